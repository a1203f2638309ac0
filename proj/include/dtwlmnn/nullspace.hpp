#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dtwlmnn/dtw.hpp"
#include "dtwlmnn/quadform.hpp"

namespace dtwlmnn {

/// Eigendecomposition of the raw (unnormalized) correlation matrix
/// sum_{i,j} D^ij D^ij^T over training pairs; eigenvalues descending,
/// eigenvectors as columns.
struct CorrelationSpectrum {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;
  std::string source;
};

/// Orthogonal projector onto the leading `dim` eigenvectors.
struct Projector {
  Eigen::MatrixXd phi;
  std::size_t dim = 0;
};

CorrelationSpectrum correlation_spectrum(
    const DistanceVectorTable& table, std::span<const std::size_t> train_indices);

struct DimPolicy {
  enum class Kind { threshold, energy, manual };
  Kind kind = Kind::threshold;
  /// threshold: relative eigenvalue cutoff; energy: retained fraction;
  /// manual: J.
  double value = 1e-8;

  static DimPolicy threshold(double rel) { return {Kind::threshold, rel}; }
  static DimPolicy energy(double fraction) { return {Kind::energy, fraction}; }
  static DimPolicy manual(std::size_t dim) {
    return {Kind::manual, static_cast<double>(dim)};
  }
  std::string key() const;
};

/// threshold: #{lambda_j >= rel * lambda_max}. energy: smallest J whose
/// leading eigenvalues reach `fraction` of the total, ignoring eigenvalues
/// below 1e-8 * lambda_max as numerical noise. manual: clamped to [1, n].
std::size_t choose_effective_dim(const CorrelationSpectrum& spectrum,
                                 const DimPolicy& policy);

Projector make_projector(const CorrelationSpectrum& spectrum, std::size_t dim);

/// L * Phi; flags the model regularized with effective_dim = dim.
MetricModel regularize(const MetricModel& model,
                       const CorrelationSpectrum& spectrum, std::size_t dim);
MetricModel regularize(const MetricModel& model, const Projector& projector);

/// Sum over channels of the unbiased across-profile variance.
double profile_variance(std::span<const RelevanceProfile> profiles);

/// CSV rows "index,eigenvalue" (1-based index).
void write_spectrum_csv(const CorrelationSpectrum& spectrum,
                        const std::filesystem::path& file,
                        const std::string& header = {});

}  // namespace dtwlmnn
