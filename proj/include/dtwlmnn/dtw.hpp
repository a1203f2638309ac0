#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dtwlmnn/kernels.hpp"
#include "dtwlmnn/seqdata.hpp"

namespace dtwlmnn {

using kernels::LocalCost;

struct DtwConfig {
  LocalCost local_cost = LocalCost::absolute;
  /// Sakoe-Chiba radius in timesteps; nullopt = unconstrained.
  std::optional<std::size_t> band_radius;
  /// Per-channel z-scoring before DTW. Statistics come from the corpus the
  /// table is built on (DTW values are label-free).
  bool znormalize = false;

  /// Stable text key, e.g. "cost=absolute;band=none;znorm=0".
  std::string key() const;
};

/// DTW between two scalar series: minimum summed local cost over monotone
/// warping paths from (1,1) to (T1,T2) with steps (1,0), (0,1), (1,1).
/// Throws ValidationError for an empty series or a band narrower than
/// |T1 - T2|.
double dtw_scalar(std::span<const double> a, std::span<const double> b,
                  const DtwConfig& cfg = {});

/// Per-channel DTW of two sequences: entry k is dtw_scalar over channel k.
std::vector<double> dtw_component_vector(const Sequence& x, const Sequence& y,
                                         const DtwConfig& cfg = {});

/// For every ordered pair (i, j), the n-vector of per-channel distances.
/// Stored densely as m*m*n doubles, pair-major.
class DistanceVectorTable {
 public:
  DistanceVectorTable() = default;
  DistanceVectorTable(std::size_t samples, std::size_t channels,
                      std::string fingerprint = {});

  std::size_t samples() const { return m_; }
  std::size_t channels() const { return n_; }
  const std::string& fingerprint() const { return fingerprint_; }

  std::span<const double> vec(std::size_t i, std::size_t j) const {
    return {data_.data() + (i * m_ + j) * n_, n_};
  }
  std::span<double> vec(std::size_t i, std::size_t j) {
    return {data_.data() + (i * m_ + j) * n_, n_};
  }
  std::span<const double> data() const { return data_; }

  /// Checks zero diagonal, symmetry, and nonnegative finite entries.
  /// Throws ValidationError naming the first violation.
  void validate() const;

  bool operator==(const DistanceVectorTable&) const = default;

 private:
  std::size_t m_ = 0;
  std::size_t n_ = 0;
  std::string fingerprint_;
  std::vector<double> data_;
};

/// Fingerprint binding a table to its corpus content and DTW settings.
std::string table_fingerprint(const Corpus& corpus, const DtwConfig& cfg);

/// Computes D^ij for i <= j in parallel and mirrors; D^ii = 0.
DistanceVectorTable build_distance_table(const Corpus& corpus,
                                         const DtwConfig& cfg = {});

/// Same over a plain list of sequences (used for PCA-projected corpora).
DistanceVectorTable build_distance_table(std::span<const Sequence> sequences,
                                         const DtwConfig& cfg,
                                         std::string fingerprint);

/// Euclidean baseline table: for each pair the shorter sequence is used
/// whole and the longer is subsampled at equally spaced timesteps (first and
/// last included); entry k is the Euclidean norm of the channel-k difference.
DistanceVectorTable build_euclidean_table(const Corpus& corpus);

/// Endpoint-inclusive equally spaced row indices (0-based):
/// t_r = round((r) * (long_len - 1) / (count - 1)), r = 0..count-1.
std::vector<std::size_t> subsample_indices(std::size_t long_len,
                                           std::size_t count);

/// Binary cache: magic, m, n, fingerprint, payload.
void save_table(const DistanceVectorTable& table,
                const std::filesystem::path& file);
/// Throws IoError on a corrupt file. If `expected_fingerprint` is non-empty
/// and differs from the stored one, returns nullopt (cache miss).
std::optional<DistanceVectorTable> load_table(
    const std::filesystem::path& file,
    const std::string& expected_fingerprint = {});

}  // namespace dtwlmnn
