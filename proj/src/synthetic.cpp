#include "dtwlmnn/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <set>
#include <string>

#include "dtwlmnn/errors.hpp"

namespace dtwlmnn {

namespace {

void validate(const SyntheticSpec& spec) {
  if (spec.classes < 2) throw ValidationError("synthetic: need c >= 2");
  if (spec.samples < spec.classes) {
    throw ValidationError("synthetic: need at least one sample per class");
  }
  if (spec.channels == 0) throw ValidationError("synthetic: need n >= 1");
  if (spec.min_length == 0 || spec.min_length > spec.max_length) {
    throw ValidationError("synthetic: invalid length range");
  }
  if (spec.informative.empty()) {
    throw ValidationError("synthetic: empty informative channel set");
  }
  std::set<std::size_t> seen;
  for (std::size_t k : spec.informative) {
    if (k >= spec.channels || !seen.insert(k).second) {
      throw ValidationError("synthetic: bad informative channel " +
                            std::to_string(k));
    }
  }
  if (!spec.class_offsets.empty()) {
    if (spec.class_offsets.size() != spec.informative.size()) {
      throw ValidationError(
          "synthetic: class_offsets needs one row per informative channel");
    }
    for (const auto& row : spec.class_offsets) {
      if (row.size() != spec.classes) {
        throw ValidationError(
            "synthetic: class_offsets rows need one entry per class");
      }
    }
  }
  if (!(spec.noise_sigma >= 0.0) || !(spec.nuisance_sigma >= 0.0)) {
    throw ValidationError("synthetic: noise scales must be >= 0");
  }
  for (auto [target, source] : spec.duplicates) {
    if (target >= spec.channels || source >= spec.channels ||
        target == source || spec.duplicates.contains(source)) {
      throw ValidationError("synthetic: bad duplicate mapping " +
                            std::to_string(target) + "<-" +
                            std::to_string(source));
    }
  }
}

double class_offset(const SyntheticSpec& spec, std::size_t informative_slot,
                    std::size_t label) {
  if (!spec.class_offsets.empty()) {
    return spec.class_offsets[informative_slot][label];
  }
  const double c = static_cast<double>(spec.classes);
  return spec.offset_scale * (2.0 * static_cast<double>(label) / (c - 1.0) -
                              1.0);
}

}  // namespace

Corpus generate_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> length_dist(spec.min_length,
                                                         spec.max_length);

  const std::size_t n = spec.channels;
  // Per-channel waveform: frequency in {1, 1.5, 2, ...}, fixed phase.
  std::vector<double> freq(n);
  std::vector<double> phase(n);
  for (std::size_t k = 0; k < n; ++k) {
    freq[k] = 1.0 + 0.5 * static_cast<double>(k % 3);
    phase[k] = 2.0 * std::numbers::pi * unit(rng);
  }
  std::vector<std::ptrdiff_t> slot(n, -1);
  for (std::size_t j = 0; j < spec.informative.size(); ++j) {
    slot[spec.informative[j]] = static_cast<std::ptrdiff_t>(j);
  }

  std::vector<Sequence> sequences;
  std::vector<std::size_t> labels;
  sequences.reserve(spec.samples);
  const int id_width =
      static_cast<int>(std::to_string(spec.samples - 1).size());
  for (std::size_t i = 0; i < spec.samples; ++i) {
    const std::size_t label = i % spec.classes;
    const std::size_t length = length_dist(rng);
    std::vector<double> level(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      if (slot[k] >= 0) {
        level[k] = class_offset(spec, static_cast<std::size_t>(slot[k]), label);
      } else {
        level[k] = spec.nuisance_sigma * gauss(rng);
      }
    }
    std::vector<double> values(length * n);
    for (std::size_t t = 0; t < length; ++t) {
      const double u =
          length > 1 ? static_cast<double>(t) / static_cast<double>(length - 1)
                     : 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        values[t * n + k] =
            std::sin(2.0 * std::numbers::pi * freq[k] * u + phase[k]) +
            level[k] + spec.noise_sigma * gauss(rng);
      }
    }
    for (auto [target, source] : spec.duplicates) {
      for (std::size_t t = 0; t < length; ++t) {
        values[t * n + target] = values[t * n + source];
      }
    }
    char id[32];
    std::snprintf(id, sizeof id, "s%0*zu", id_width, i);
    sequences.emplace_back(id, length, n, std::move(values));
    labels.push_back(label);
  }

  std::vector<std::string> channel_names(n);
  for (std::size_t k = 0; k < n; ++k) channel_names[k] = "ch" + std::to_string(k);
  std::vector<std::string> class_names(spec.classes);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    class_names[c] = "class" + std::to_string(c);
  }
  return Corpus(std::move(sequences), std::move(labels),
                std::move(channel_names), std::move(class_names));
}

}  // namespace dtwlmnn
