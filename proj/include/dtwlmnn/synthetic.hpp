#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

#include "dtwlmnn/seqdata.hpp"

namespace dtwlmnn {

/// Recipe for a labeled synthetic corpus.
///
/// Every channel k carries a smooth base waveform on a per-sample time axis
/// of random length. Informative channels add a class-dependent offset;
/// the remaining channels add a per-sample random level (nuisance) that
/// carries no class information. Independent Gaussian noise is added to
/// every timestep of every channel. Channels listed in `duplicates` are then
/// overwritten with exact copies of their source channel.
struct SyntheticSpec {
  std::size_t samples = 20;
  std::size_t channels = 3;
  std::size_t classes = 2;
  std::size_t min_length = 20;
  std::size_t max_length = 30;
  std::vector<std::size_t> informative = {0};
  /// class_offsets[j][y]: offset for informative channel j, class y. When
  /// empty, class y gets offset_scale * (2y/(c-1) - 1), i.e. +-offset_scale
  /// for two classes.
  std::vector<std::vector<double>> class_offsets;
  double offset_scale = 5.0;
  double noise_sigma = 0.1;
  double nuisance_sigma = 0.0;
  /// target channel -> source channel
  std::map<std::size_t, std::size_t> duplicates;
  std::uint64_t seed = 1;
};

/// Deterministic for a fixed spec. Labels are balanced (sample i has class
/// i mod c). Throws ValidationError for an invalid spec.
Corpus generate_synthetic(const SyntheticSpec& spec);

}  // namespace dtwlmnn
