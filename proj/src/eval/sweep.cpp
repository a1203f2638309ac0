#include <algorithm>
#include <numeric>

#include "dtwlmnn/errors.hpp"
#include "dtwlmnn/eval.hpp"

namespace dtwlmnn {

std::vector<std::size_t> relevance_order(const RelevanceProfile& profile) {
  std::vector<std::size_t> order(profile.values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return profile.values[a] > profile.values[b];
  });
  return order;
}

MetricModel restrict_channels(const MetricModel& model,
                              std::span<const std::size_t> keep) {
  std::vector<bool> kept(model.channels(), false);
  for (std::size_t c : keep) {
    if (c >= model.channels()) {
      throw ValidationError("restrict_channels: channel " + std::to_string(c) +
                            " out of range");
    }
    kept[c] = true;
  }
  MetricModel out = model;
  for (std::size_t c = 0; c < kept.size(); ++c) {
    if (!kept[c]) out.L.col(static_cast<Eigen::Index>(c)).setZero();
  }
  return out;
}

DistanceVectorTable select_channels(const DistanceVectorTable& table,
                                    std::span<const std::size_t> keep) {
  std::vector<std::size_t> cols(keep.begin(), keep.end());
  std::sort(cols.begin(), cols.end());
  if (cols.empty() || std::adjacent_find(cols.begin(), cols.end()) != cols.end() ||
      cols.back() >= table.channels()) {
    throw ValidationError("select_channels: invalid channel list");
  }
  if (cols.size() == table.channels()) return table;
  std::string fingerprint = table.fingerprint() + ";channels=";
  for (std::size_t c : cols) fingerprint += std::to_string(c) + ",";
  DistanceVectorTable out(table.samples(), cols.size(), fingerprint);
  for (std::size_t i = 0; i < table.samples(); ++i) {
    for (std::size_t j = 0; j < table.samples(); ++j) {
      const auto src = table.vec(i, j);
      const auto dst = out.vec(i, j);
      for (std::size_t k = 0; k < cols.size(); ++k) dst[k] = src[cols[k]];
    }
  }
  return out;
}

namespace {

void add_point(SweepCurve& curve, std::size_t f, const MethodResult& r) {
  curve.points.push_back({f, r.mean, r.variance, r.repetition_accuracy});
  if (r.mean > curve.best_accuracy || f == 1) {
    curve.best_accuracy = r.mean;
    curve.best_features = f;
  }
}

SweepCurve run_sweep(const DistanceVectorTable& table,
                     std::span<const std::size_t> labels,
                     const std::vector<std::size_t>& order,
                     const std::function<const MetricModel&(std::size_t)>& model_for,
                     const CvPlan& plan, std::size_t knn_k) {
  SweepCurve curve;
  curve.order = order;
  const std::size_t units = plan.repetitions() * plan.folds();
  for (std::size_t f = 1; f <= order.size(); ++f) {
    const std::span<const std::size_t> keep(order.data(), f);
    std::vector<MetricModel> restricted;
    restricted.reserve(units);
    for (std::size_t u = 0; u < units; ++u) {
      restricted.push_back(restrict_channels(model_for(u), keep));
    }
    const MethodResult r = evaluate_with(
        "sweep", labels, plan, knn_k, [&](std::size_t rep, std::size_t fold) {
          const MetricModel* model = &restricted[rep * plan.folds() + fold];
          return PairDistanceFn([&table, model](std::size_t q, std::size_t t) {
            return pair_distance(*model, table.vec(q, t));
          });
        });
    add_point(curve, f, r);
  }
  return curve;
}

}  // namespace

SweepCurve feature_selection_sweep(const DistanceVectorTable& table,
                                   std::span<const std::size_t> labels,
                                   const MetricModel& model, const CvPlan& plan,
                                   std::size_t knn_k) {
  if (model.channels() != table.channels()) {
    throw ValidationError("sweep: model has " + std::to_string(model.channels()) +
                          " channels, table " + std::to_string(table.channels()));
  }
  return run_sweep(table, labels, relevance_order(relevance_profile(model, true)),
                   [&](std::size_t) -> const MetricModel& { return model; }, plan,
                   knn_k);
}

SweepCurve feature_selection_sweep(const DistanceVectorTable& table,
                                   std::span<const std::size_t> labels,
                                   std::span<const MetricModel> fold_models,
                                   const CvPlan& plan, std::size_t knn_k) {
  if (fold_models.size() != plan.repetitions() * plan.folds()) {
    throw ValidationError("sweep: " + std::to_string(fold_models.size()) +
                          " models for " +
                          std::to_string(plan.repetitions() * plan.folds()) + " folds");
  }
  RelevanceProfile mean;
  mean.values.assign(table.channels(), 0.0);
  mean.normalized = true;
  for (const auto& model : fold_models) {
    if (model.channels() != table.channels()) {
      throw ValidationError("sweep: model/table channel mismatch");
    }
    const RelevanceProfile p = relevance_profile(model, true);
    for (std::size_t c = 0; c < p.values.size(); ++c) mean.values[c] += p.values[c];
  }
  for (double& v : mean.values) v /= static_cast<double>(fold_models.size());
  return run_sweep(table, labels, relevance_order(mean),
                   [&](std::size_t u) -> const MetricModel& { return fold_models[u]; },
                   plan, knn_k);
}

SweepCurve feature_selection_sweep_retrain(const DistanceVectorTable& table,
                                           std::span<const std::size_t> labels,
                                           const LmnnConfig& cfg, const CvPlan& plan,
                                           const RegularizationPolicy& reg,
                                           std::span<const std::size_t> order,
                                           std::size_t knn_k) {
  std::vector<std::size_t> sorted(order.begin(), order.end());
  std::sort(sorted.begin(), sorted.end());
  bool permutation = sorted.size() == table.channels();
  for (std::size_t c = 0; permutation && c < sorted.size(); ++c) {
    permutation = sorted[c] == c;
  }
  if (!permutation) {
    throw ValidationError("sweep: order must be a permutation of the channels");
  }
  SweepCurve curve;
  curve.order.assign(order.begin(), order.end());
  for (std::size_t f = 1; f <= order.size(); ++f) {
    const DistanceVectorTable sub = select_channels(table, order.first(f));
    LmnnConfig sub_cfg = cfg;
    if (sub_cfg.rank && *sub_cfg.rank > f) sub_cfg.rank = f;
    add_point(curve, f,
              evaluate_dtw_lmnn(sub, labels, sub_cfg, plan, reg, knn_k, "sweep"));
  }
  return curve;
}

}  // namespace dtwlmnn
