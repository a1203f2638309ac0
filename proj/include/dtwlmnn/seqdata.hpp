#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace dtwlmnn {

/// One sample: a T x n multichannel time series stored row-major
/// (row = timestep, column = channel).
class Sequence {
 public:
  Sequence() = default;
  /// Throws ValidationError unless values.size() == length * channels,
  /// both are >= 1 and every entry is finite.
  Sequence(std::string id, std::size_t length, std::size_t channels,
           std::vector<double> values);

  const std::string& id() const { return id_; }
  std::size_t length() const { return length_; }
  std::size_t channels() const { return channels_; }

  double at(std::size_t t, std::size_t k) const {
    return values_[t * channels_ + k];
  }
  std::span<const double> row(std::size_t t) const {
    return {values_.data() + t * channels_, channels_};
  }
  std::span<const double> values() const { return values_; }
  /// Copy of channel k as a contiguous scalar series.
  std::vector<double> channel(std::size_t k) const;

  bool operator==(const Sequence&) const = default;

 private:
  std::string id_;
  std::size_t length_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> values_;
};

/// Labeled set of sequences sharing one channel count. Immutable after
/// construction.
class Corpus {
 public:
  Corpus() = default;
  /// Labels are dense class indices into class_names. Throws
  /// ValidationError on any invariant violation (m >= 2, channel counts
  /// agree, labels in range, every class populated).
  Corpus(std::vector<Sequence> sequences, std::vector<std::size_t> labels,
         std::vector<std::string> channel_names,
         std::vector<std::string> class_names);

  std::size_t size() const { return sequences_.size(); }
  std::size_t channels() const { return channel_names_.size(); }
  std::size_t classes() const { return class_names_.size(); }

  const Sequence& sequence(std::size_t i) const { return sequences_[i]; }
  const std::vector<Sequence>& sequences() const { return sequences_; }
  std::size_t label(std::size_t i) const { return labels_[i]; }
  const std::vector<std::size_t>& labels() const { return labels_; }
  const std::vector<std::string>& channel_names() const {
    return channel_names_;
  }
  const std::vector<std::string>& class_names() const { return class_names_; }

  /// Content digest over values, labels and names (FNV-1a, hex).
  std::string digest() const;

  bool operator==(const Corpus&) const = default;

 private:
  std::vector<Sequence> sequences_;
  std::vector<std::size_t> labels_;
  std::vector<std::string> channel_names_;
  std::vector<std::string> class_names_;
};

/// Reads a JSON manifest
///   {"channels": [...], "samples": [{"file": "...", "label": "..."}]}
/// whose sample files are header-less CSVs (one row per timestep).
/// Relative file paths resolve against the manifest's directory. Labels map
/// to dense indices in order of first appearance.
Corpus load_corpus(const std::filesystem::path& manifest_path);

/// Writes `dir/manifest.json` plus one `<id>.csv` per sequence, creating
/// `dir` if needed. Values use shortest round-trip formatting so that
/// load_corpus reproduces the corpus bit-exactly.
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);

/// Parses one header-less numeric CSV into a Sequence. `expected_channels`
/// of 0 accepts whatever the first row has.
Sequence read_sequence_csv(const std::filesystem::path& file, std::string id,
                           std::size_t expected_channels);

}  // namespace dtwlmnn
