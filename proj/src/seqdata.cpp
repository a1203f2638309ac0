#include "dtwlmnn/seqdata.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "dtwlmnn/errors.hpp"
#include "dtwlmnn/fingerprint.hpp"
#include "json.hpp"

namespace dtwlmnn {

namespace fs = std::filesystem;
using nlohmann::json;

Sequence::Sequence(std::string id, std::size_t length, std::size_t channels,
                   std::vector<double> values)
    : id_(std::move(id)),
      length_(length),
      channels_(channels),
      values_(std::move(values)) {
  if (length_ == 0 || channels_ == 0) {
    throw ValidationError("sequence '" + id_ + "': empty sequence");
  }
  if (values_.size() != length_ * channels_) {
    throw ValidationError("sequence '" + id_ + "': value count " +
                          std::to_string(values_.size()) + " != " +
                          std::to_string(length_) + "x" +
                          std::to_string(channels_));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw ValidationError("sequence '" + id_ + "': non-finite value at row " +
                            std::to_string(i / channels_ + 1) + ", col " +
                            std::to_string(i % channels_ + 1));
    }
  }
}

std::vector<double> Sequence::channel(std::size_t k) const {
  std::vector<double> out(length_);
  for (std::size_t t = 0; t < length_; ++t) out[t] = at(t, k);
  return out;
}

Corpus::Corpus(std::vector<Sequence> sequences,
               std::vector<std::size_t> labels,
               std::vector<std::string> channel_names,
               std::vector<std::string> class_names)
    : sequences_(std::move(sequences)),
      labels_(std::move(labels)),
      channel_names_(std::move(channel_names)),
      class_names_(std::move(class_names)) {
  if (sequences_.size() < 2) {
    throw ValidationError("corpus needs at least 2 sequences, got " +
                          std::to_string(sequences_.size()));
  }
  if (labels_.size() != sequences_.size()) {
    throw ValidationError("corpus: label count does not match sequence count");
  }
  if (channel_names_.empty()) {
    throw ValidationError("corpus: no channels");
  }
  if (class_names_.empty()) {
    throw ValidationError("corpus: no classes");
  }
  std::vector<std::size_t> members(class_names_.size(), 0);
  for (std::size_t i = 0; i < sequences_.size(); ++i) {
    if (sequences_[i].channels() != channel_names_.size()) {
      throw ValidationError("corpus: sequence '" + sequences_[i].id() +
                            "' has " +
                            std::to_string(sequences_[i].channels()) +
                            " channels, expected " +
                            std::to_string(channel_names_.size()));
    }
    if (labels_[i] >= class_names_.size()) {
      throw ValidationError("corpus: label index out of range for '" +
                            sequences_[i].id() + "'");
    }
    ++members[labels_[i]];
  }
  for (std::size_t c = 0; c < members.size(); ++c) {
    if (members[c] == 0) {
      throw ValidationError("corpus: class '" + class_names_[c] +
                            "' has no members");
    }
  }
}

std::string Corpus::digest() const {
  Fnv1a h;
  for (const auto& name : channel_names_) h.text(name);
  for (const auto& name : class_names_) h.text(name);
  for (std::size_t i = 0; i < sequences_.size(); ++i) {
    h.text(sequences_[i].id());
    h.u64(sequences_[i].length());
    h.f64s(sequences_[i].values());
    h.u64(labels_[i]);
  }
  return h.hex();
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' ||
                        s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::string where(const fs::path& file, std::size_t line, std::size_t col) {
  std::string out = file.string() + ":" + std::to_string(line);
  if (col > 0) out += ":" + std::to_string(col);
  return out;
}

}  // namespace

Sequence read_sequence_csv(const fs::path& file, std::string id,
                           std::size_t expected_channels) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open sequence file " + file.string());

  std::vector<double> values;
  std::size_t channels = expected_channels;
  std::size_t rows = 0;
  std::size_t line_no = 0;
  std::size_t blank_run_start = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty()) {
      if (blank_run_start == 0) blank_run_start = line_no;
      continue;
    }
    if (blank_run_start != 0) {
      throw ValidationError(where(file, blank_run_start, 0) +
                            ": blank line inside data");
    }
    std::size_t col = 0;
    std::size_t pos = 0;
    while (true) {
      std::size_t comma = view.find(',', pos);
      std::string_view cell =
          trim(view.substr(pos, comma == std::string_view::npos
                                    ? std::string_view::npos
                                    : comma - pos));
      ++col;
      double value = 0.0;
      auto [ptr, ec] =
          std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (cell.empty() || ec != std::errc() ||
          ptr != cell.data() + cell.size()) {
        throw ValidationError(where(file, line_no, col) +
                              ": cannot parse '" + std::string(cell) + "'");
      }
      if (!std::isfinite(value)) {
        throw ValidationError(where(file, line_no, col) +
                              ": non-finite value '" + std::string(cell) +
                              "'");
      }
      values.push_back(value);
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (channels == 0) channels = col;
    if (col != channels) {
      throw ValidationError(where(file, line_no, 0) + ": row has " +
                            std::to_string(col) + " columns, expected " +
                            std::to_string(channels));
    }
    ++rows;
  }
  if (rows == 0) throw ValidationError(file.string() + ": no data rows");
  return Sequence(std::move(id), rows, channels, std::move(values));
}

Corpus load_corpus(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open manifest " + manifest_path.string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(manifest_path.string() + ": invalid JSON: " +
                          e.what());
  }
  if (!manifest.is_object() || !manifest.contains("channels") ||
      !manifest["channels"].is_array() || !manifest.contains("samples") ||
      !manifest["samples"].is_array()) {
    throw ValidationError(manifest_path.string() +
                          ": manifest needs 'channels' and 'samples' arrays");
  }

  std::vector<std::string> channel_names;
  for (const auto& c : manifest["channels"]) {
    if (!c.is_string()) {
      throw ValidationError(manifest_path.string() +
                            ": channel names must be strings");
    }
    channel_names.push_back(c.get<std::string>());
  }
  if (channel_names.empty()) {
    throw ValidationError(manifest_path.string() + ": empty channel list");
  }

  const fs::path base = manifest_path.parent_path();
  std::vector<Sequence> sequences;
  std::vector<std::size_t> labels;
  std::vector<std::string> class_names;
  std::map<std::string, std::size_t> class_index;
  // Optional fixed class order; when present, labels outside it are errors.
  const bool closed_classes = manifest.contains("classes");
  if (closed_classes) {
    if (!manifest["classes"].is_array()) {
      throw ValidationError(manifest_path.string() +
                            ": 'classes' must be an array");
    }
    for (const auto& c : manifest["classes"]) {
      if (!c.is_string() ||
          !class_index.try_emplace(c.get<std::string>(), class_names.size())
               .second) {
        throw ValidationError(manifest_path.string() +
                              ": class names must be unique strings");
      }
      class_names.push_back(c.get<std::string>());
    }
  }
  std::size_t sample_no = 0;
  for (const auto& s : manifest["samples"]) {
    ++sample_no;
    const std::string context = manifest_path.string() + ": sample " +
                                std::to_string(sample_no);
    if (!s.is_object() || !s.contains("file") || !s["file"].is_string() ||
        !s.contains("label")) {
      throw ValidationError(context + ": needs 'file' and 'label'");
    }
    std::string label;
    if (s["label"].is_string()) {
      label = s["label"].get<std::string>();
    } else if (s["label"].is_number_integer()) {
      label = std::to_string(s["label"].get<long long>());
    } else {
      throw ValidationError(context + ": unknown label type");
    }
    if (label.empty()) throw ValidationError(context + ": empty label");

    fs::path file = s["file"].get<std::string>();
    if (file.is_relative()) file = base / file;
    if (!fs::exists(file)) {
      throw IoError(context + ": missing file " + file.string());
    }
    Sequence seq = read_sequence_csv(file, fs::path(file).stem().string(),
                                     channel_names.size());
    sequences.push_back(std::move(seq));

    auto it = class_index.find(label);
    if (it == class_index.end()) {
      if (closed_classes) {
        throw ValidationError(context + ": unknown label '" + label + "'");
      }
      it = class_index.emplace(label, class_names.size()).first;
      class_names.push_back(label);
    }
    labels.push_back(it->second);
  }
  return Corpus(std::move(sequences), std::move(labels),
                std::move(channel_names), std::move(class_names));
}

namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

}  // namespace

void write_corpus(const Corpus& corpus, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  json manifest;
  manifest["channels"] = corpus.channel_names();
  manifest["classes"] = corpus.class_names();
  manifest["samples"] = json::array();
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Sequence& seq = corpus.sequence(i);
    const std::string file = seq.id() + ".csv";
    std::string text;
    for (std::size_t t = 0; t < seq.length(); ++t) {
      for (std::size_t k = 0; k < seq.channels(); ++k) {
        if (k > 0) text.push_back(',');
        append_double(text, seq.at(t, k));
      }
      text.push_back('\n');
    }
    std::ofstream out(dir / file, std::ios::binary);
    if (!out) throw IoError("cannot write " + (dir / file).string());
    out << text;
    if (!out) throw IoError("write failed for " + (dir / file).string());
    manifest["samples"].push_back(
        {{"file", file}, {"label", corpus.class_names()[corpus.label(i)]}});
  }
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

}  // namespace dtwlmnn
