#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dtwlmnn/dtw.hpp"
#include "dtwlmnn/eval.hpp"
#include "dtwlmnn/lmnn.hpp"
#include "dtwlmnn/synthetic.hpp"

namespace dtwlmnn::app {

inline const std::vector<std::string> kAllMethods = {"dtw-lmnn", "dtw-knn",
                                                     "euclidean-lmnn", "pca-dtw-knn"};

/// One experiment: corpus, DTW, LMNN, regularization and CV settings plus
/// the output directory. `seed` drives the CV plan, LMNN and the synthetic
/// generator alike.
struct RunConfig {
  std::filesystem::path corpus;
  std::filesystem::path out = "out";
  /// Distance-table cache; defaults to <out>/table.bin.
  std::optional<std::filesystem::path> cache;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::vector<std::string> methods = kAllMethods;

  DtwConfig dtw;
  LmnnConfig lmnn;
  RegularizationPolicy regularization;
  std::size_t folds = 10;
  std::size_t repetitions = 10;
  PairingUnit pairing = PairingUnit::repetition;
  std::size_t knn_k = 3;
  std::size_t pca_components = 3;

  SyntheticSpec synth;

  std::filesystem::path cache_path() const {
    return cache ? *cache : out / "table.bin";
  }
  /// Propagates `seed` into the LMNN and synthetic settings.
  void apply_seed();
  /// Throws ValidationError for an empty or unknown method list and bad
  /// CV settings.
  void validate() const;
  /// Stable key of every setting except paths and threads.
  std::string key() const;
};

/// Parses a JSON config. Relative paths resolve against `base_dir`.
/// Unknown keys are rejected.
RunConfig parse_config(const std::string& text,
                       const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& file);

}  // namespace dtwlmnn::app
