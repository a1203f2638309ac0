#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dtwlmnn {

/// Learned quadratic form over distance vectors, stored through its factor
/// L (rows = projection dimensions, columns = channels); M = L^T L.
struct MetricModel {
  Eigen::MatrixXd L;
  bool regularized = false;
  std::optional<std::size_t> effective_dim;
  std::vector<std::string> channel_names;
  /// Provenance: fingerprint of the table/config the model was trained on.
  std::string fingerprint;
  std::uint64_t seed = 0;

  std::size_t channels() const { return static_cast<std::size_t>(L.cols()); }
  std::size_t rank() const { return static_cast<std::size_t>(L.rows()); }
  Eigen::MatrixXd metric() const { return L.transpose() * L; }

  bool operator==(const MetricModel& other) const;
};

struct RelevanceProfile {
  std::vector<double> values;
  bool normalized = false;
};

/// ||L d||^2. Throws ValidationError on a length mismatch.
double pair_distance(const MetricModel& model, std::span<const double> d);

/// Same, given the metric M directly (row-major n x n) via the active
/// quadform kernel. No dimension checks.
double quadform(const Eigen::MatrixXd& m, std::span<const double> d);

/// Column sums of squares of L (= diag of L^T L). With `normalize`, divided
/// by the largest entry (all-zero profiles stay zero).
RelevanceProfile relevance_profile(const MetricModel& model,
                                   bool normalize = false);

/// Frobenius-nearest PSD matrix: symmetrize, clamp negative eigenvalues to
/// zero, reconstruct. Throws ValidationError on non-finite input.
Eigen::MatrixXd psd_project(const Eigen::MatrixXd& s);

/// Smallest eigenvalue of the symmetric part of m.
double min_eigenvalue(const Eigen::MatrixXd& m);

/// L = diag(sqrt(lambda)) U^T over the top `rank` eigenpairs (all n when
/// nullopt). Eigenvector signs are fixed so the largest-magnitude entry is
/// positive. Throws ValidationError if M has an eigenvalue below
/// -1e-8 * ||M||_F.
MetricModel factor_L(const Eigen::MatrixXd& m,
                     std::optional<std::size_t> rank = std::nullopt);

/// Symmetric eigendecomposition sorted by descending eigenvalue, with the
/// same sign convention as factor_L.
struct SymmetricEigen {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;  // columns
};
SymmetricEigen sorted_eigen(const Eigen::MatrixXd& s);

/// JSON: {channel_names, rows, cols, L (row-major), regularized,
/// effective_dim, fingerprint, seed}.
std::string model_to_json(const MetricModel& model);
MetricModel model_from_json(const std::string& text);
void save_model(const MetricModel& model, const std::filesystem::path& file);
MetricModel load_model(const std::filesystem::path& file);

}  // namespace dtwlmnn
