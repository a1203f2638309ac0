#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dtwlmnn/dtw.hpp"
#include "dtwlmnn/quadform.hpp"

namespace dtwlmnn {

/// Fixed target neighbors: targets[i] lists the k same-class samples
/// closest to i under the unweighted distance-vector norm (ties: lower
/// index). Samples outside the training subset have no targets.
struct NeighborStructure {
  std::vector<std::vector<std::size_t>> targets;
  std::size_t k = 0;
  /// Number of samples whose target list was cut short by a small class.
  std::size_t truncated = 0;
};

enum class LowRankMode {
  /// Optimize full M, then keep the top eigenpairs.
  truncate,
  /// Optimize an n' x n factor L directly (nonconvex).
  direct,
};

struct LmnnConfig {
  std::size_t k = 3;
  double c = 0.5;
  std::size_t max_iters = 1000;
  /// First step length relative to the iterate: ||step * G0||_F equals
  /// initial_step_rel * ||M0||_F. `initial_step` overrides with an absolute
  /// value.
  double initial_step_rel = 1e-2;
  std::optional<double> initial_step;
  double step_growth = 1.2;
  double step_decay = 0.5;
  /// Converged when the accepted objective improved by less than this
  /// (relative) over the last `patience` accepted steps.
  double tolerance = 1e-7;
  std::size_t patience = 10;
  /// Consecutive rejected steps after which training stops as stalled.
  std::size_t max_rejects = 60;
  std::optional<std::size_t> rank;
  LowRankMode low_rank_mode = LowRankMode::truncate;
  /// 0 = exact impostor set every iteration. Otherwise the candidate
  /// triple set is rebuilt every this many iterations and the objective in
  /// between is evaluated on candidates only.
  std::size_t active_set_refresh = 0;
  std::uint64_t seed = 0;

  /// Throws ValidationError on out-of-range settings.
  void validate() const;
  /// Stable text key of every setting, for fingerprints.
  std::string key() const;
};

struct Triple {
  std::size_t i;
  std::size_t j;
  std::size_t l;
  bool operator==(const Triple&) const = default;
};

struct ObjectiveValue {
  double value = 0.0;
  double pull = 0.0;
  /// Sum of hinge terms, before the c factor.
  double push = 0.0;
  /// Triples with strictly positive hinge, ordered by (i, j, l).
  std::vector<Triple> active;
};

struct TraceRow {
  std::size_t iter = 0;
  double objective = 0.0;
  double step = 0.0;
  std::size_t active_count = 0;
  double min_eig = 0.0;
  double max_eig = 0.0;
  bool accepted = false;
};

struct TrainTrace {
  std::vector<TraceRow> rows;
  double initial_objective = 0.0;
  bool converged = false;
  /// Warning state: stopped by max_iters rather than convergence.
  bool hit_max_iters = false;
};

struct TrainResult {
  MetricModel model;
  /// Final metric iterate (before any rank truncation).
  Eigen::MatrixXd metric;
  TrainTrace trace;
  NeighborStructure neighbors;
};

/// All sample indices 0..m-1.
std::vector<std::size_t> all_indices(std::size_t m);

/// Targets among `subset` (all samples when empty).
NeighborStructure select_targets(const DistanceVectorTable& table,
                                 std::span<const std::size_t> labels,
                                 std::size_t k,
                                 std::span<const std::size_t> subset = {});

/// LMNN cost over the training subset: pull = sum of target distances,
/// push = sum over targets (i,j) and differently labeled l in the subset of
/// [1 + d_ij - d_il]_+, value = pull + c * push.
ObjectiveValue lmnn_objective(const Eigen::MatrixXd& m,
                              const DistanceVectorTable& table,
                              std::span<const std::size_t> labels,
                              const NeighborStructure& nbrs, double c,
                              std::span<const std::size_t> subset = {});

/// Subgradient sum_ij O^ij + c * sum_active (O^ij - O^il), O^ab = D^ab
/// D^ab^T, for a given active set. Exactly symmetric.
Eigen::MatrixXd lmnn_gradient(const DistanceVectorTable& table,
                              const NeighborStructure& nbrs, double c,
                              std::span<const Triple> active,
                              std::size_t channels);

/// Convenience overload that evaluates the active set at M first.
Eigen::MatrixXd lmnn_gradient(const Eigen::MatrixXd& m,
                              const DistanceVectorTable& table,
                              std::span<const std::size_t> labels,
                              const NeighborStructure& nbrs, double c,
                              std::span<const std::size_t> subset = {});

/// Projected subgradient descent with accept/reject step control, starting
/// from the identity scaled to unit mean target distance. Throws
/// TrainingError on a non-finite objective.
TrainResult train(const DistanceVectorTable& table,
                  std::span<const std::size_t> labels, const LmnnConfig& cfg,
                  std::span<const std::size_t> subset = {});

/// CSV: iter,objective,step,active_count,min_eig,max_eig,accepted, preceded by a
/// "# key=value" provenance line when `header` is non-empty.
void write_trace_csv(const TrainTrace& trace, const std::filesystem::path& file,
                     const std::string& header = {});

}  // namespace dtwlmnn
