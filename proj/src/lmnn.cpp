#include "dtwlmnn/lmnn.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "dtwlmnn/errors.hpp"
#include "dtwlmnn/kernels.hpp"
#include "dtwlmnn/parallel.hpp"

namespace dtwlmnn {

void LmnnConfig::validate() const {
  if (k < 1) throw ValidationError("lmnn: k must be >= 1");
  if (!(c > 0.0) || !std::isfinite(c)) throw ValidationError("lmnn: c must be > 0");
  if (!(tolerance > 0.0)) throw ValidationError("lmnn: tolerance must be > 0");
  if (!(initial_step_rel > 0.0)) {
    throw ValidationError("lmnn: initial_step_rel must be > 0");
  }
  if (initial_step && !(*initial_step > 0.0)) {
    throw ValidationError("lmnn: initial_step must be > 0");
  }
  if (!(step_growth >= 1.0)) throw ValidationError("lmnn: step_growth must be >= 1");
  if (!(step_decay > 0.0 && step_decay < 1.0)) {
    throw ValidationError("lmnn: step_decay must be in (0, 1)");
  }
  if (patience < 1) throw ValidationError("lmnn: patience must be >= 1");
  if (max_rejects < 1) throw ValidationError("lmnn: max_rejects must be >= 1");
  if (rank && *rank < 1) throw ValidationError("lmnn: rank must be >= 1");
}

std::string LmnnConfig::key() const {
  std::ostringstream out;
  out.precision(17);
  out << "k=" << k << ";c=" << c << ";max_iters=" << max_iters
      << ";step_rel=" << initial_step_rel << ";step=";
  if (initial_step) {
    out << *initial_step;
  } else {
    out << "auto";
  }
  out << ";growth=" << step_growth << ";decay=" << step_decay
      << ";tol=" << tolerance << ";patience=" << patience
      << ";max_rejects=" << max_rejects
      << ";rank=" << (rank ? std::to_string(*rank) : "full")
      << ";mode=" << (low_rank_mode == LowRankMode::truncate ? "truncate" : "direct")
      << ";refresh=" << active_set_refresh << ";seed=" << seed;
  return out.str();
}

std::vector<std::size_t> all_indices(std::size_t m) {
  std::vector<std::size_t> out(m);
  std::iota(out.begin(), out.end(), 0);
  return out;
}

namespace {

std::vector<std::size_t> resolve_subset(std::span<const std::size_t> subset,
                                        std::size_t m) {
  if (subset.empty()) return all_indices(m);
  std::vector<std::size_t> out(subset.begin(), subset.end());
  std::sort(out.begin(), out.end());
  if (std::adjacent_find(out.begin(), out.end()) != out.end() ||
      out.back() >= m) {
    throw ValidationError("lmnn: subset has duplicates or out-of-range indices");
  }
  return out;
}

void check_inputs(const DistanceVectorTable& table,
                  std::span<const std::size_t> labels) {
  if (labels.size() != table.samples()) {
    throw ValidationError("lmnn: label count " + std::to_string(labels.size()) +
                          " != table size " + std::to_string(table.samples()));
  }
}

double euclid_sq(std::span<const double> d) {
  double s = 0.0;
  for (double v : d) s += v * v;
  return s;
}

// Dense m x m distances d_ab = D^ab^T M D^ab for a, b in the subset.
class PairDistances {
 public:
  PairDistances(const Eigen::MatrixXd& metric, const DistanceVectorTable& table,
                std::span<const std::size_t> subset)
      : m_(table.samples()), values_(m_ * m_, 0.0) {
    const auto& kern = kernels::active();
    const std::size_t n = table.channels();
    parallel_for(subset.size(), [&](std::size_t ai) {
      const std::size_t a = subset[ai];
      for (std::size_t bi = ai + 1; bi < subset.size(); ++bi) {
        const std::size_t b = subset[bi];
        const double d = kern.quadform(metric.data(), table.vec(a, b).data(), n);
        values_[a * m_ + b] = d;
      }
    });
    for (std::size_t ai = 0; ai < subset.size(); ++ai) {
      for (std::size_t bi = ai + 1; bi < subset.size(); ++bi) {
        const std::size_t a = subset[ai];
        const std::size_t b = subset[bi];
        values_[b * m_ + a] = values_[a * m_ + b];
      }
    }
  }
  double operator()(std::size_t a, std::size_t b) const {
    return values_[a * m_ + b];
  }

 private:
  std::size_t m_;
  std::vector<double> values_;
};

void check_metric(const Eigen::MatrixXd& m, const DistanceVectorTable& table) {
  if (m.rows() != static_cast<Eigen::Index>(table.channels()) ||
      m.cols() != m.rows()) {
    throw ValidationError("lmnn: metric is " + std::to_string(m.rows()) + "x" +
                          std::to_string(m.cols()) + ", table has " +
                          std::to_string(table.channels()) + " channels");
  }
}

// Optional restriction to a candidate triple list (active-set refresh).
ObjectiveValue evaluate(const Eigen::MatrixXd& metric,
                        const DistanceVectorTable& table,
                        std::span<const std::size_t> labels,
                        const NeighborStructure& nbrs, double c,
                        std::span<const std::size_t> subset,
                        const std::vector<std::vector<Triple>>* candidates) {
  const PairDistances dist(metric, table, subset);
  struct Partial {
    double pull = 0.0;
    double push = 0.0;
    std::vector<Triple> active;
  };
  std::vector<Partial> partial(subset.size());
  parallel_for(subset.size(), [&](std::size_t ii) {
    const std::size_t i = subset[ii];
    Partial& p = partial[ii];
    for (std::size_t j : nbrs.targets[i]) {
      const double dij = dist(i, j);
      p.pull += dij;
      if (candidates != nullptr) {
        continue;
      }
      for (std::size_t l : subset) {
        if (labels[l] == labels[i]) continue;
        const double hinge = 1.0 + dij - dist(i, l);
        if (hinge > 0.0) {
          p.push += hinge;
          p.active.push_back({i, j, l});
        }
      }
    }
    if (candidates != nullptr) {
      for (const Triple& t : (*candidates)[ii]) {
        const double hinge = 1.0 + dist(t.i, t.j) - dist(t.i, t.l);
        if (hinge > 0.0) {
          p.push += hinge;
          p.active.push_back(t);
        }
      }
    }
  });
  ObjectiveValue out;
  for (auto& p : partial) {
    out.pull += p.pull;
    out.push += p.push;
    out.active.insert(out.active.end(), p.active.begin(), p.active.end());
  }
  out.value = out.pull + c * out.push;
  return out;
}

// Triples whose hinge argument exceeds -1 at the given metric.
std::vector<std::vector<Triple>> candidate_triples(
    const Eigen::MatrixXd& metric, const DistanceVectorTable& table,
    std::span<const std::size_t> labels, const NeighborStructure& nbrs,
    std::span<const std::size_t> subset) {
  const PairDistances dist(metric, table, subset);
  std::vector<std::vector<Triple>> out(subset.size());
  for (std::size_t ii = 0; ii < subset.size(); ++ii) {
    const std::size_t i = subset[ii];
    for (std::size_t j : nbrs.targets[i]) {
      for (std::size_t l : subset) {
        if (labels[l] == labels[i]) continue;
        if (1.0 + dist(i, j) - dist(i, l) > -1.0) out[ii].push_back({i, j, l});
      }
    }
  }
  return out;
}

}  // namespace

NeighborStructure select_targets(const DistanceVectorTable& table,
                                 std::span<const std::size_t> labels,
                                 std::size_t k,
                                 std::span<const std::size_t> subset) {
  check_inputs(table, labels);
  if (k < 1) throw ValidationError("select_targets: k must be >= 1");
  const auto members = resolve_subset(subset, table.samples());
  NeighborStructure nbrs;
  nbrs.k = k;
  nbrs.targets.assign(table.samples(), {});
  for (std::size_t i : members) {
    std::vector<std::pair<double, std::size_t>> same;
    for (std::size_t j : members) {
      if (j != i && labels[j] == labels[i]) {
        same.emplace_back(euclid_sq(table.vec(i, j)), j);
      }
    }
    std::sort(same.begin(), same.end());
    if (same.size() < k) ++nbrs.truncated;
    const std::size_t take = std::min(k, same.size());
    for (std::size_t r = 0; r < take; ++r) nbrs.targets[i].push_back(same[r].second);
  }
  return nbrs;
}

ObjectiveValue lmnn_objective(const Eigen::MatrixXd& m,
                              const DistanceVectorTable& table,
                              std::span<const std::size_t> labels,
                              const NeighborStructure& nbrs, double c,
                              std::span<const std::size_t> subset) {
  check_inputs(table, labels);
  check_metric(m, table);
  const auto members = resolve_subset(subset, table.samples());
  return evaluate(m, table, labels, nbrs, c, members, nullptr);
}

Eigen::MatrixXd lmnn_gradient(const DistanceVectorTable& table,
                              const NeighborStructure& nbrs, double c,
                              std::span<const Triple> active,
                              std::size_t channels) {
  const std::size_t m = table.samples();
  const std::size_t n = channels;
  // Pair weights folded onto a <= b since O^ab = O^ba.
  std::vector<double> weight(m * m, 0.0);
  auto add = [&](std::size_t a, std::size_t b, double w) {
    if (a > b) std::swap(a, b);
    weight[a * m + b] += w;
  };
  for (std::size_t i = 0; i < nbrs.targets.size(); ++i) {
    for (std::size_t j : nbrs.targets[i]) add(i, j, 1.0);
  }
  for (const Triple& t : active) {
    add(t.i, t.j, c);
    add(t.i, t.l, -c);
  }
  const auto& kern = kernels::active();
  std::vector<std::vector<double>> partial(m);
  parallel_for(m, [&](std::size_t a) {
    for (std::size_t b = a + 1; b < m; ++b) {
      const double w = weight[a * m + b];
      if (w == 0.0) continue;
      if (partial[a].empty()) partial[a].assign(n * n, 0.0);
      kern.sym_rank1_update(partial[a].data(), table.vec(a, b).data(), w, n);
    }
  });
  std::vector<double> total(n * n, 0.0);
  for (const auto& p : partial) {
    if (p.empty()) continue;
    for (std::size_t e = 0; e < total.size(); ++e) total[e] += p[e];
  }
  kernels::mirror_upper(total.data(), n);
  Eigen::MatrixXd g(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t col = 0; col < n; ++col) {
      g(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col)) =
          total[r * n + col];
    }
  }
  return g;
}

Eigen::MatrixXd lmnn_gradient(const Eigen::MatrixXd& m,
                              const DistanceVectorTable& table,
                              std::span<const std::size_t> labels,
                              const NeighborStructure& nbrs, double c,
                              std::span<const std::size_t> subset) {
  const ObjectiveValue obj = lmnn_objective(m, table, labels, nbrs, c, subset);
  return lmnn_gradient(table, nbrs, c, obj.active, table.channels());
}

namespace {

class Trainer {
 public:
  Trainer(const DistanceVectorTable& table, std::span<const std::size_t> labels,
          const LmnnConfig& cfg, std::vector<std::size_t> subset)
      : table_(table),
        labels_(labels),
        cfg_(cfg),
        subset_(std::move(subset)),
        n_(static_cast<Eigen::Index>(table.channels())) {
    nbrs_ = select_targets(table_, labels_, cfg_.k, subset_);
  }

  TrainResult run() {
    const bool direct = cfg_.rank && cfg_.low_rank_mode == LowRankMode::direct &&
                        *cfg_.rank < static_cast<std::size_t>(n_);
    Eigen::MatrixXd factor;
    Eigen::MatrixXd metric;
    if (direct) {
      factor = initial_factor(*cfg_.rank);
      factor /= std::sqrt(mean_target_distance(factor.transpose() * factor));
      metric = factor.transpose() * factor;
    } else {
      metric = Eigen::MatrixXd::Identity(n_, n_);
      metric /= mean_target_distance(metric);
    }
    const bool refreshing = cfg_.active_set_refresh > 0;
    if (refreshing) refresh(metric);
    double best_full = refreshing ? full_objective(metric) : 0.0;
    Eigen::MatrixXd best_metric = metric;
    Eigen::MatrixXd best_factor = factor;

    ObjectiveValue obj = objective(metric);
    TrainTrace trace;
    trace.initial_objective = obj.value;
    Eigen::MatrixXd grad = gradient(obj, direct ? &factor : nullptr);
    const double grad_norm = grad.norm();
    double step = 0.0;
    if (grad_norm > 0.0) {
      step = cfg_.initial_step
                 ? *cfg_.initial_step
                 : cfg_.initial_step_rel * (direct ? factor.norm() : metric.norm()) /
                       grad_norm;
    }

    std::vector<double> accepted{obj.value};
    std::size_t rejects = 0;
    if (grad_norm == 0.0) trace.converged = true;
    for (std::size_t iter = 1; iter <= cfg_.max_iters && !trace.converged; ++iter) {
      if (refreshing && iter % cfg_.active_set_refresh == 0) {
        const double full = full_objective(metric);
        if (full < best_full) {
          best_full = full;
          best_metric = metric;
          best_factor = factor;
        } else {
          metric = best_metric;
          factor = best_factor;
          step *= cfg_.step_decay;
        }
        refresh(metric);
        obj = objective(metric);
        grad = gradient(obj, direct ? &factor : nullptr);
      }
      Eigen::MatrixXd cand_factor;
      Eigen::MatrixXd cand_metric;
      if (direct) {
        cand_factor = factor - step * grad;
        cand_metric = cand_factor.transpose() * cand_factor;
      } else {
        cand_metric = psd_project(metric - step * grad);
      }
      ObjectiveValue cand = objective(cand_metric);
      if (!std::isfinite(cand.value)) {
        throw TrainingError("lmnn: non-finite objective at iteration " +
                            std::to_string(iter) + " (check distance scaling)");
      }
      TraceRow row;
      row.iter = iter;
      if (cand.value < obj.value) {
        metric = std::move(cand_metric);
        if (direct) factor = std::move(cand_factor);
        obj = std::move(cand);
        grad = gradient(obj, direct ? &factor : nullptr);
        row.accepted = true;
        accepted.push_back(obj.value);
        step *= cfg_.step_growth;
        rejects = 0;
      } else {
        step *= cfg_.step_decay;
        ++rejects;
      }
      row.objective = obj.value;
      row.step = step;
      row.active_count = obj.active.size();
      const Eigen::VectorXd eig =
          Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(metric, Eigen::EigenvaluesOnly)
              .eigenvalues();
      row.min_eig = eig.minCoeff();
      row.max_eig = eig.maxCoeff();
      trace.rows.push_back(row);

      if (row.accepted && accepted.size() > cfg_.patience) {
        const double before = accepted[accepted.size() - 1 - cfg_.patience];
        const double scale = std::max(std::abs(obj.value), 1e-300);
        if ((before - obj.value) / scale < cfg_.tolerance) trace.converged = true;
      }
      if (rejects >= cfg_.max_rejects || grad.norm() == 0.0) trace.converged = true;
      if (iter == cfg_.max_iters && !trace.converged) trace.hit_max_iters = true;
    }

    if (refreshing && !(full_objective(metric) < best_full)) {
      metric = best_metric;
      factor = best_factor;
    }

    TrainResult result;
    result.metric = metric;
    if (direct) {
      result.model.L = factor;
    } else {
      result.model = factor_L(metric, cfg_.rank);
    }
    result.model.seed = cfg_.seed;
    result.model.fingerprint = table_.fingerprint();
    result.trace = std::move(trace);
    result.neighbors = std::move(nbrs_);
    return result;
  }

 private:
  ObjectiveValue objective(const Eigen::MatrixXd& metric) const {
    return evaluate(metric, table_, labels_, nbrs_, cfg_.c, subset_,
                    cfg_.active_set_refresh > 0 ? &candidates_ : nullptr);
  }

  double full_objective(const Eigen::MatrixXd& metric) const {
    return evaluate(metric, table_, labels_, nbrs_, cfg_.c, subset_, nullptr).value;
  }

  // Gradient in M, or in L (= 2 L G) for the direct low-rank mode.
  Eigen::MatrixXd gradient(const ObjectiveValue& obj,
                           const Eigen::MatrixXd* factor) const {
    Eigen::MatrixXd g = lmnn_gradient(table_, nbrs_, cfg_.c, obj.active,
                                      static_cast<std::size_t>(n_));
    if (factor != nullptr) return 2.0 * (*factor) * g;
    return g;
  }

  void refresh(const Eigen::MatrixXd& metric) {
    candidates_ = candidate_triples(metric, table_, labels_, nbrs_, subset_);
  }

  double mean_target_distance(const Eigen::MatrixXd& metric) const {
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t i : subset_) {
      for (std::size_t j : nbrs_.targets[i]) {
        total += quadform(metric, table_.vec(i, j));
        ++count;
      }
    }
    if (count == 0 || !(total > 0.0)) return 1.0;
    return total / static_cast<double>(count);
  }

  Eigen::MatrixXd initial_factor(std::size_t rank) const {
    std::mt19937_64 rng(cfg_.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd g(n_, n_);
    for (Eigen::Index c = 0; c < n_; ++c) {
      for (Eigen::Index r = 0; r < n_; ++r) g(r, c) = gauss(rng);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    const Eigen::MatrixXd q = qr.householderQ();
    return q.leftCols(static_cast<Eigen::Index>(rank)).transpose();
  }

  const DistanceVectorTable& table_;
  std::span<const std::size_t> labels_;
  const LmnnConfig& cfg_;
  std::vector<std::size_t> subset_;
  Eigen::Index n_;
  NeighborStructure nbrs_;
  std::vector<std::vector<Triple>> candidates_;
};

}  // namespace

TrainResult train(const DistanceVectorTable& table,
                  std::span<const std::size_t> labels, const LmnnConfig& cfg,
                  std::span<const std::size_t> subset) {
  cfg.validate();
  check_inputs(table, labels);
  if (cfg.rank && *cfg.rank > table.channels()) {
    throw ValidationError("lmnn: rank " + std::to_string(*cfg.rank) + " exceeds " +
                          std::to_string(table.channels()) + " channels");
  }
  Trainer trainer(table, labels, cfg, resolve_subset(subset, table.samples()));
  return trainer.run();
}

void write_trace_csv(const TrainTrace& trace, const std::filesystem::path& file,
                     const std::string& header) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write trace " + file.string());
  out.precision(17);
  if (!header.empty()) out << "# " << header << '\n';
  out << "iter,objective,step,active_count,min_eig,max_eig,accepted\n";
  out << 0 << ',' << trace.initial_objective << ",0,0,0,0,1\n";
  for (const auto& r : trace.rows) {
    out << r.iter << ',' << r.objective << ',' << r.step << ','
        << r.active_count << ',' << r.min_eig << ',' << r.max_eig << ','
        << (r.accepted ? 1 : 0) << '\n';
  }
  if (!out) throw IoError("write failed for trace " + file.string());
}

}  // namespace dtwlmnn
