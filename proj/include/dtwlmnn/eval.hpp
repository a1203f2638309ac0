#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dtwlmnn/dtw.hpp"
#include "dtwlmnn/lmnn.hpp"
#include "dtwlmnn/nullspace.hpp"
#include "dtwlmnn/quadform.hpp"
#include "dtwlmnn/seqdata.hpp"

namespace dtwlmnn {

// ---------------------------------------------------------------------------
// Cross-validation plan

/// Stratified k-fold partitions for several independent shuffles. Every
/// pipeline in one comparison consumes the same plan.
class CvPlan {
 public:
  CvPlan() = default;
  CvPlan(std::size_t folds, std::size_t repetitions, std::uint64_t seed,
         std::vector<std::vector<std::vector<std::size_t>>> assignment);

  std::size_t folds() const { return folds_; }
  std::size_t repetitions() const { return repetitions_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t samples() const { return samples_; }

  /// Sorted test indices of one fold.
  const std::vector<std::size_t>& test(std::size_t rep, std::size_t fold) const {
    return assignment_[rep][fold];
  }
  /// Sorted complement of test(rep, fold).
  std::vector<std::size_t> train(std::size_t rep, std::size_t fold) const;

  bool operator==(const CvPlan&) const = default;

 private:
  std::size_t folds_ = 0;
  std::size_t repetitions_ = 0;
  std::uint64_t seed_ = 0;
  std::size_t samples_ = 0;
  std::vector<std::vector<std::vector<std::size_t>>> assignment_;
};

/// Each repetition shuffles every class independently and deals its members
/// round-robin over the folds, continuing the fold cursor from class to
/// class. Throws ValidationError if folds < 2 or folds > m.
CvPlan make_cv_plan(std::span<const std::size_t> labels, std::size_t folds = 10,
                    std::size_t repetitions = 10, std::uint64_t seed = 1);

// ---------------------------------------------------------------------------
// Classification

/// Majority label among the k smallest distances. Distance ties go to the
/// smaller tie key (the global sample index; defaults to position). Vote
/// ties go to the tied class whose best-ranked member comes first, i.e. the
/// class of the nearest neighbor whenever it is among the tied classes.
/// Throws ValidationError if fewer than k candidates are given.
std::size_t knn_classify(std::span<const double> distances,
                         std::span<const std::size_t> labels, std::size_t k,
                         std::span<const std::size_t> tie_keys = {});

// ---------------------------------------------------------------------------
// Statistics

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  std::size_t df = 0;
  /// All differences equal and nonzero: p is reported as 0.
  bool degenerate = false;
};

/// Two-sided paired t-test on a - b. All-zero differences give p = 1.
TTestResult paired_ttest(std::span<const double> a, std::span<const double> b);

double mean_of(std::span<const double> v);
/// Unbiased sample variance; 0 for fewer than two values.
double variance_of(std::span<const double> v);

// ---------------------------------------------------------------------------
// Pipelines

struct RegularizationPolicy {
  bool enabled = false;
  DimPolicy dim = DimPolicy::threshold(1e-8);
};

enum class PairingUnit { repetition, fold };

struct MethodResult {
  std::string method;
  /// [repetition][fold], percent.
  std::vector<std::vector<double>> fold_accuracy;
  /// Percent of all samples classified correctly in each repetition.
  std::vector<double> repetition_accuracy;
  double mean = 0.0;
  double variance = 0.0;
  /// Per fold (repetition-major), normalized to max 1; LMNN methods only.
  std::vector<RelevanceProfile> profiles;
  /// Per fold models, repetition-major; LMNN methods only.
  std::vector<MetricModel> models;
  std::vector<std::size_t> effective_dims;
  std::size_t max_iter_warnings = 0;

  /// Accuracy units for the paired t-test.
  std::vector<double> units(PairingUnit unit) const;
};

/// Distances from one query to each of the given training samples.
using PairDistanceFn = std::function<double(std::size_t query, std::size_t train)>;

/// Scores every fold of the plan with KNN over `distance`. `fold_distance`
/// is called once per (rep, fold) to build the distance function.
MethodResult evaluate_with(
    const std::string& method, std::span<const std::size_t> labels,
    const CvPlan& plan, std::size_t knn_k,
    const std::function<PairDistanceFn(std::size_t rep, std::size_t fold)>&
        fold_distance);

/// Per fold: targets and training on the fold's training samples,
/// optional regularization with the training-pair spectrum, then KNN of
/// every test sample by pair_distance to the training samples.
MethodResult evaluate_dtw_lmnn(const DistanceVectorTable& table,
                               std::span<const std::size_t> labels,
                               const LmnnConfig& cfg, const CvPlan& plan,
                               const RegularizationPolicy& reg,
                               std::size_t knn_k = 3,
                               const std::string& method = "dtw-lmnn");

MethodResult evaluate_dtw_lmnn(const Corpus& corpus, const DtwConfig& dtw,
                               const LmnnConfig& cfg, const CvPlan& plan,
                               const RegularizationPolicy& reg,
                               std::size_t knn_k = 3);

/// Plain KNN with distance ||D^ij||^2 (L = identity; same ranking as the
/// unsquared norm).
MethodResult evaluate_dtw_knn(const DistanceVectorTable& table,
                              std::span<const std::size_t> labels,
                              const CvPlan& plan, std::size_t knn_k = 3,
                              const std::string& method = "dtw-knn");

/// LMNN on per-channel Euclidean distances between equal-length
/// (subsampled) series.
MethodResult evaluate_euclidean_lmnn(const Corpus& corpus, const LmnnConfig& cfg,
                                     const CvPlan& plan,
                                     const RegularizationPolicy& reg,
                                     std::size_t knn_k = 3);

/// Principal axes of the mean-centered timestep vectors of the training
/// sequences. Throws ValidationError when fewer than `components`
/// eigenvalues are nonzero.
struct PcaBasis {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;  // n x components, columns = axes
};
PcaBasis fit_pca(const Corpus& corpus, std::span<const std::size_t> train,
                 std::size_t components);
Sequence project_sequence(const Sequence& seq, const PcaBasis& basis);

/// Per fold: PCA on training timesteps, project every sequence, component
/// DTW on the projections, unweighted KNN.
MethodResult evaluate_pca_dtw_knn(const Corpus& corpus, const DtwConfig& dtw,
                                  const CvPlan& plan, std::size_t components = 3,
                                  std::size_t knn_k = 3);

// ---------------------------------------------------------------------------
// Feature-selection sweep

struct SweepPoint {
  std::size_t features = 0;
  double accuracy_mean = 0.0;
  double accuracy_var = 0.0;
  std::vector<double> repetition_accuracy;
};

struct SweepCurve {
  /// Channels by descending relevance (ties: lower channel first).
  std::vector<std::size_t> order;
  std::vector<SweepPoint> points;  // points[f - 1] keeps the top f channels
  std::size_t best_features = 0;   // smallest f reaching the max accuracy
  double best_accuracy = 0.0;
};

/// Channel order by descending value, ties by index.
std::vector<std::size_t> relevance_order(const RelevanceProfile& profile);

/// L with every column outside `keep` set to zero, so that
/// pair_distance only sees the kept channels.
MetricModel restrict_channels(const MetricModel& model,
                              std::span<const std::size_t> keep);

/// One fixed model for every fold; ranking from its own profile.
SweepCurve feature_selection_sweep(const DistanceVectorTable& table,
                                   std::span<const std::size_t> labels,
                                   const MetricModel& model, const CvPlan& plan,
                                   std::size_t knn_k = 3);

/// One model per (rep, fold), repetition-major, as produced by
/// evaluate_dtw_lmnn; ranking from the mean normalized profile.
SweepCurve feature_selection_sweep(const DistanceVectorTable& table,
                                   std::span<const std::size_t> labels,
                                   std::span<const MetricModel> fold_models,
                                   const CvPlan& plan, std::size_t knn_k = 3);

/// Table with only the `keep` channels, in ascending channel order.
DistanceVectorTable select_channels(const DistanceVectorTable& table,
                                    std::span<const std::size_t> keep);

/// Retrains DTW-LMNN from scratch for every f on the table restricted to
/// the first f channels of `order`. At f = n this is evaluate_dtw_lmnn on
/// the full table.
SweepCurve feature_selection_sweep_retrain(const DistanceVectorTable& table,
                                           std::span<const std::size_t> labels,
                                           const LmnnConfig& cfg, const CvPlan& plan,
                                           const RegularizationPolicy& reg,
                                           std::span<const std::size_t> order,
                                           std::size_t knn_k = 3);

// ---------------------------------------------------------------------------
// Reports

struct PValue {
  std::string a;
  std::string b;
  TTestResult test;
};

struct EvalReport {
  std::vector<MethodResult> methods;
  std::vector<PValue> pvalues;
  std::optional<SweepCurve> sweep;
  PairingUnit pairing = PairingUnit::repetition;
  std::uint64_t seed = 0;
  std::string fingerprint;
};

/// Paired t-tests of every method against `reference` (skipped when the
/// reference is absent).
void add_pvalues(EvalReport& report, const std::string& reference);

std::string report_to_json(const EvalReport& report);
/// method,repetition,fold,accuracy
std::string report_to_csv(const EvalReport& report);
/// f,accuracy_mean,accuracy_var
std::string sweep_to_csv(const SweepCurve& curve, const std::string& header = {});
/// channel_name,mean,variance over normalized per-fold profiles.
std::string profiles_to_csv(std::span<const RelevanceProfile> profiles,
                            std::span<const std::string> channel_names,
                            const std::string& header = {});
/// Fixed-width table: method, mean, variance, p-value vs reference.
std::string format_summary(const EvalReport& report, const std::string& reference);

}  // namespace dtwlmnn
