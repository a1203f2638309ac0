#include <Eigen/Eigenvalues>
#include <algorithm>
#include <string>

#include "dtwlmnn/errors.hpp"
#include "dtwlmnn/eval.hpp"
#include "dtwlmnn/fingerprint.hpp"
#include "dtwlmnn/parallel.hpp"

namespace dtwlmnn {

std::vector<double> MethodResult::units(PairingUnit unit) const {
  if (unit == PairingUnit::repetition) return repetition_accuracy;
  std::vector<double> out;
  for (const auto& rep : fold_accuracy) out.insert(out.end(), rep.begin(), rep.end());
  return out;
}

namespace {

void finalize(MethodResult& result) {
  result.mean = mean_of(result.repetition_accuracy);
  result.variance = variance_of(result.repetition_accuracy);
}

struct FoldScore {
  std::size_t correct = 0;
  std::size_t tested = 0;
};

FoldScore score_fold(std::span<const std::size_t> labels,
                     std::span<const std::size_t> train,
                     std::span<const std::size_t> test, std::size_t knn_k,
                     const PairDistanceFn& distance) {
  std::vector<std::size_t> train_labels(train.size());
  for (std::size_t r = 0; r < train.size(); ++r) train_labels[r] = labels[train[r]];
  std::vector<double> dists(train.size());
  FoldScore score;
  for (std::size_t q : test) {
    for (std::size_t r = 0; r < train.size(); ++r) dists[r] = distance(q, train[r]);
    if (knn_classify(dists, train_labels, knn_k, train) == labels[q]) ++score.correct;
    ++score.tested;
  }
  return score;
}

}  // namespace

MethodResult evaluate_with(
    const std::string& method, std::span<const std::size_t> labels,
    const CvPlan& plan, std::size_t knn_k,
    const std::function<PairDistanceFn(std::size_t rep, std::size_t fold)>&
        fold_distance) {
  if (plan.samples() != labels.size()) {
    throw ValidationError("evaluate: plan covers " + std::to_string(plan.samples()) +
                          " samples, labels " + std::to_string(labels.size()));
  }
  MethodResult result;
  result.method = method;
  result.fold_accuracy.assign(plan.repetitions(),
                              std::vector<double>(plan.folds(), 0.0));
  std::vector<FoldScore> scores(plan.repetitions() * plan.folds());
  for (std::size_t rep = 0; rep < plan.repetitions(); ++rep) {
    for (std::size_t fold = 0; fold < plan.folds(); ++fold) {
      const auto train = plan.train(rep, fold);
      const auto& test = plan.test(rep, fold);
      const PairDistanceFn distance = fold_distance(rep, fold);
      scores[rep * plan.folds() + fold] =
          score_fold(labels, train, test, knn_k, distance);
    }
  }
  for (std::size_t rep = 0; rep < plan.repetitions(); ++rep) {
    std::size_t correct = 0;
    for (std::size_t fold = 0; fold < plan.folds(); ++fold) {
      const FoldScore& s = scores[rep * plan.folds() + fold];
      result.fold_accuracy[rep][fold] =
          s.tested == 0 ? 0.0
                        : 100.0 * static_cast<double>(s.correct) /
                              static_cast<double>(s.tested);
      correct += s.correct;
    }
    result.repetition_accuracy.push_back(100.0 * static_cast<double>(correct) /
                                         static_cast<double>(plan.samples()));
  }
  finalize(result);
  return result;
}

MethodResult evaluate_dtw_lmnn(const DistanceVectorTable& table,
                               std::span<const std::size_t> labels,
                               const LmnnConfig& cfg, const CvPlan& plan,
                               const RegularizationPolicy& reg, std::size_t knn_k,
                               const std::string& method) {
  cfg.validate();
  const std::size_t units = plan.repetitions() * plan.folds();
  std::vector<MetricModel> models(units);
  std::vector<std::size_t> dims(units, 0);
  std::vector<char> warned(units, 0);
  // Folds are independent; each writes its own slot.
  parallel_for(units, [&](std::size_t u) {
    const std::size_t rep = u / plan.folds();
    const std::size_t fold = u % plan.folds();
    const auto train_idx = plan.train(rep, fold);
    TrainResult trained;
    try {
      trained = train(table, labels, cfg, train_idx);
    } catch (const TrainingError& e) {
      throw TrainingError(method + ": repetition " + std::to_string(rep) +
                          ", fold " + std::to_string(fold) + ": " + e.what());
    }
    MetricModel model = std::move(trained.model);
    if (reg.enabled) {
      const CorrelationSpectrum spectrum = correlation_spectrum(table, train_idx);
      const std::size_t dim = choose_effective_dim(spectrum, reg.dim);
      model = regularize(model, spectrum, dim);
      dims[u] = dim;
    }
    warned[u] = trained.trace.hit_max_iters ? 1 : 0;
    models[u] = std::move(model);
  });

  MethodResult result = evaluate_with(
      method, labels, plan, knn_k, [&](std::size_t rep, std::size_t fold) {
        const MetricModel* model = &models[rep * plan.folds() + fold];
        return PairDistanceFn([&table, model](std::size_t q, std::size_t t) {
          return pair_distance(*model, table.vec(q, t));
        });
      });
  for (std::size_t u = 0; u < units; ++u) {
    result.profiles.push_back(relevance_profile(models[u], true));
    if (reg.enabled) result.effective_dims.push_back(dims[u]);
    result.max_iter_warnings += static_cast<std::size_t>(warned[u]);
  }
  result.models = std::move(models);
  return result;
}

MethodResult evaluate_dtw_lmnn(const Corpus& corpus, const DtwConfig& dtw,
                               const LmnnConfig& cfg, const CvPlan& plan,
                               const RegularizationPolicy& reg, std::size_t knn_k) {
  const DistanceVectorTable table = build_distance_table(corpus, dtw);
  return evaluate_dtw_lmnn(table, corpus.labels(), cfg, plan, reg, knn_k);
}

MethodResult evaluate_dtw_knn(const DistanceVectorTable& table,
                              std::span<const std::size_t> labels,
                              const CvPlan& plan, std::size_t knn_k,
                              const std::string& method) {
  MetricModel identity;
  identity.L = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(table.channels()),
                                         static_cast<Eigen::Index>(table.channels()));
  return evaluate_with(method, labels, plan, knn_k, [&](std::size_t, std::size_t) {
    return PairDistanceFn([&](std::size_t q, std::size_t t) {
      return pair_distance(identity, table.vec(q, t));
    });
  });
}

MethodResult evaluate_euclidean_lmnn(const Corpus& corpus, const LmnnConfig& cfg,
                                     const CvPlan& plan,
                                     const RegularizationPolicy& reg,
                                     std::size_t knn_k) {
  const DistanceVectorTable table = build_euclidean_table(corpus);
  return evaluate_dtw_lmnn(table, corpus.labels(), cfg, plan, reg, knn_k,
                           "euclidean-lmnn");
}

PcaBasis fit_pca(const Corpus& corpus, std::span<const std::size_t> train,
                 std::size_t components) {
  const auto n = static_cast<Eigen::Index>(corpus.channels());
  if (components < 1 || components > corpus.channels()) {
    throw ValidationError("pca: need 1 <= components <= channels");
  }
  if (train.empty()) throw ValidationError("pca: empty training set");
  PcaBasis basis;
  basis.mean = Eigen::VectorXd::Zero(n);
  double count = 0.0;
  for (std::size_t i : train) {
    const Sequence& s = corpus.sequence(i);
    for (std::size_t t = 0; t < s.length(); ++t) {
      basis.mean += Eigen::Map<const Eigen::VectorXd>(s.row(t).data(), n);
    }
    count += static_cast<double>(s.length());
  }
  basis.mean /= count;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i : train) {
    const Sequence& s = corpus.sequence(i);
    for (std::size_t t = 0; t < s.length(); ++t) {
      const Eigen::VectorXd x =
          Eigen::Map<const Eigen::VectorXd>(s.row(t).data(), n) - basis.mean;
      cov.noalias() += x * x.transpose();
    }
  }
  cov /= count;
  const SymmetricEigen eig = sorted_eigen(cov);
  const double top = eig.values(0);
  const auto k = static_cast<Eigen::Index>(components);
  if (!(top > 0.0) || eig.values(k - 1) <= 1e-12 * top) {
    throw ValidationError("pca: degenerate covariance (fewer than " +
                          std::to_string(components) + " nonzero eigenvalues)");
  }
  basis.components = eig.vectors.leftCols(k);
  return basis;
}

Sequence project_sequence(const Sequence& seq, const PcaBasis& basis) {
  const auto n = static_cast<Eigen::Index>(seq.channels());
  const auto k = basis.components.cols();
  std::vector<double> values(seq.length() * static_cast<std::size_t>(k));
  for (std::size_t t = 0; t < seq.length(); ++t) {
    const Eigen::VectorXd x =
        Eigen::Map<const Eigen::VectorXd>(seq.row(t).data(), n) - basis.mean;
    const Eigen::VectorXd y = basis.components.transpose() * x;
    for (Eigen::Index c = 0; c < k; ++c) {
      values[t * static_cast<std::size_t>(k) + static_cast<std::size_t>(c)] = y(c);
    }
  }
  return Sequence(seq.id(), seq.length(), static_cast<std::size_t>(k),
                  std::move(values));
}

MethodResult evaluate_pca_dtw_knn(const Corpus& corpus, const DtwConfig& dtw,
                                  const CvPlan& plan, std::size_t components,
                                  std::size_t knn_k) {
  const std::size_t units = plan.repetitions() * plan.folds();
  std::vector<DistanceVectorTable> tables(units);
  parallel_for(units, [&](std::size_t u) {
    const auto train = plan.train(u / plan.folds(), u % plan.folds());
    const PcaBasis basis = fit_pca(corpus, train, components);
    std::vector<Sequence> projected;
    projected.reserve(corpus.size());
    for (const auto& s : corpus.sequences()) projected.push_back(project_sequence(s, basis));
    tables[u] = build_distance_table(projected, dtw, {});
  });
  return evaluate_with("pca-dtw-knn", corpus.labels(), plan, knn_k,
                       [&](std::size_t rep, std::size_t fold) {
                         const DistanceVectorTable* table =
                             &tables[rep * plan.folds() + fold];
                         return PairDistanceFn([table](std::size_t q, std::size_t t) {
                           double s = 0.0;
                           for (double v : table->vec(q, t)) s += v * v;
                           return s;
                         });
                       });
}

}  // namespace dtwlmnn
