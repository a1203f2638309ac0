// Acceptance run: one PASS/FAIL/SKIP line per criterion.
//
//   acceptance [--only N] [--published-corpora DIR]
//
// DIR (or $DTWLMNN_PUBLISHED_CORPORA) holds walking/, dance/, cricket/ and
// articulatory/ subdirectories, each with a manifest.json.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "dtwlmnn/dtw.hpp"
#include "dtwlmnn/errors.hpp"
#include "dtwlmnn/eval.hpp"
#include "dtwlmnn/lmnn.hpp"
#include "dtwlmnn/nullspace.hpp"
#include "dtwlmnn/synthetic.hpp"
#include "oracles.hpp"

using namespace dtwlmnn;
namespace fs = std::filesystem;

namespace {

enum class Verdict { pass, fail, skip };

struct Outcome {
  Verdict verdict;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_s;  // 0 = no runtime limit
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

SyntheticSpec discrimination_spec(std::uint64_t seed, double nuisance) {
  SyntheticSpec s;
  s.samples = 60;
  s.channels = 5;
  s.classes = 2;
  s.informative = {0};
  s.duplicates = {{3, 1}, {4, 2}};
  s.nuisance_sigma = nuisance;
  s.seed = seed;
  return s;
}

constexpr std::uint64_t kSeeds[] = {1, 2, 3, 4, 5};

Outcome dtw_oracle() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> len(1, 6);
  std::uniform_int_distribution<int> val(0, 4);
  std::size_t pairs = 0;
  std::size_t mismatches = 0;
  for (; pairs < 600; ++pairs) {
    std::vector<double> a(static_cast<std::size_t>(len(rng)));
    std::vector<double> b(static_cast<std::size_t>(len(rng)));
    for (double& x : a) x = val(rng);
    for (double& x : b) x = val(rng);
    for (bool squared : {false, true}) {
      DtwConfig cfg;
      cfg.local_cost = squared ? LocalCost::squared : LocalCost::absolute;
      if (dtw_scalar(a, b, cfg) != oracle::dtw_paths(a, b, squared)) ++mismatches;
    }
  }
  return {mismatches == 0 ? Verdict::pass : Verdict::fail,
          fmt("%zu pairs x 2 costs, %zu mismatches", pairs, mismatches)};
}

Outcome gradient_check() {
  std::mt19937_64 rng(35);
  const double eps = 1e-6;
  int probes = 0;
  std::size_t entries = 0;
  std::size_t bad = 0;
  double worst = 0.0;
  while (probes < 25) {
    const std::size_t n = 2 + static_cast<std::size_t>(probes) % 5;
    const std::size_t m = 6 + static_cast<std::size_t>(probes) % 5;
    const DistanceVectorTable t = oracle::random_table(m, n, rng);
    std::vector<std::size_t> y(m);
    for (std::size_t i = 0; i < m; ++i) y[i] = i % 2;
    const NeighborStructure nb = select_targets(t, y, 2);
    const Eigen::MatrixXd M = oracle::random_psd(n, rng, 0.5);
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j : nb.targets[i]) {
        for (std::size_t l = 0; l < m; ++l) {
          if (y[l] != y[i]) {
            margin = std::min(margin, std::abs(1.0 + oracle::quad(M, t.vec(i, j)) -
                                               oracle::quad(M, t.vec(i, l))));
          }
        }
      }
    }
    if (margin < 1e-3) continue;
    ++probes;
    const Eigen::MatrixXd g = lmnn_gradient(M, t, y, nb, 0.5);
    for (Eigen::Index a = 0; a < M.rows(); ++a) {
      for (Eigen::Index b = a; b < M.cols(); ++b) {
        Eigen::MatrixXd e = Eigen::MatrixXd::Zero(M.rows(), M.cols());
        e(a, b) = 1.0;
        e(b, a) = 1.0;
        const double fd = (lmnn_objective(M + eps * e, t, y, nb, 0.5).value -
                           lmnn_objective(M - eps * e, t, y, nb, 0.5).value) /
                          (2.0 * eps);
        const double analytic = a == b ? g(a, b) : 2.0 * g(a, b);
        const double rel = std::abs(fd - analytic) / std::abs(analytic);
        worst = std::max(worst, rel);
        ++entries;
        if (!(rel <= 1e-4)) ++bad;
      }
    }
  }
  return {bad == 0 ? Verdict::pass : Verdict::fail,
          fmt("%d probes, %zu entries, worst rel err %.2e", probes, entries, worst)};
}

Outcome optimizer_contract() {
  std::size_t violations = 0;
  std::size_t accepted = 0;
  double worst_eig = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SyntheticSpec spec;
    spec.samples = 40;
    spec.channels = 5;
    spec.nuisance_sigma = 3.0;
    spec.duplicates = {{4, 1}};
    spec.seed = seed;
    const Corpus c = generate_synthetic(spec);
    const DistanceVectorTable t = build_distance_table(c);
    LmnnConfig cfg;
    cfg.seed = seed;
    const TrainResult r = train(t, c.labels(), cfg);
    double last = r.trace.initial_objective;
    for (const TraceRow& row : r.trace.rows) {
      if (row.accepted) {
        ++accepted;
        if (row.objective > last) ++violations;
        last = row.objective;
      }
      if (row.min_eig < -1e-9 * row.max_eig) ++violations;
      worst_eig = std::min(worst_eig, row.min_eig / row.max_eig);
    }
  }
  return {violations == 0 ? Verdict::pass : Verdict::fail,
          fmt("10 runs, %zu accepted steps, %zu violations, min eig/max eig %.2e",
              accepted, violations, worst_eig)};
}

struct Discrimination {
  double lmnn = 0.0;
  double lmnn_rank3 = 0.0;
  double knn = 0.0;
};

Discrimination discriminate(double nuisance, bool with_rank3) {
  Discrimination d;
  for (std::uint64_t seed : kSeeds) {
    const Corpus c = generate_synthetic(discrimination_spec(seed, nuisance));
    const DistanceVectorTable t = build_distance_table(c);
    const CvPlan plan = make_cv_plan(c.labels(), 10, 1, seed);
    LmnnConfig cfg;
    cfg.seed = seed;
    d.lmnn += evaluate_dtw_lmnn(t, c.labels(), cfg, plan, {}).mean;
    d.knn += evaluate_dtw_knn(t, c.labels(), plan).mean;
    if (with_rank3) {
      cfg.rank = 3;
      d.lmnn_rank3 += evaluate_dtw_lmnn(t, c.labels(), cfg, plan, {}).mean;
    }
  }
  const double s = static_cast<double>(std::size(kSeeds));
  d.lmnn /= s;
  d.lmnn_rank3 /= s;
  d.knn /= s;
  return d;
}

Outcome end_to_end() {
  const Discrimination base = discriminate(1.0, true);
  const bool base_ok = base.lmnn >= 95.0 && base.lmnn_rank3 >= 95.0;
  double sigma = 1.0;
  Discrimination hard = base;
  while (hard.knn > 85.0 && sigma < 1024.0) {
    sigma *= 2.0;
    hard = discriminate(sigma, false);
  }
  const bool ordered = hard.knn <= 85.0 && hard.lmnn > hard.knn;
  return {base_ok && ordered ? Verdict::pass : Verdict::fail,
          fmt("sigma=1: lmnn %.2f%%, rank-3 %.2f%%, knn %.2f%%; sigma=%g: lmnn %.2f%% "
              "vs knn %.2f%%",
              base.lmnn, base.lmnn_rank3, base.knn, sigma, hard.lmnn, hard.knn)};
}

Outcome regularization_equivalence() {
  std::size_t runs = 0;
  std::size_t bad = 0;
  double worst = 0.0;
  for (std::uint64_t seed : kSeeds) {
    for (bool dup : {true, false}) {
      SyntheticSpec spec = discrimination_spec(seed, 2.0);
      spec.samples = 30;
      if (!dup) spec.duplicates.clear();
      const Corpus c = generate_synthetic(spec);
      const DistanceVectorTable t = build_distance_table(c);
      const auto idx = all_indices(c.size());
      LmnnConfig cfg;
      cfg.seed = seed;
      const MetricModel model = train(t, c.labels(), cfg).model;
      const CorrelationSpectrum s = correlation_spectrum(t, idx);
      const std::size_t j = choose_effective_dim(s, DimPolicy::threshold(1e-8));
      Eigen::MatrixXd corr = Eigen::MatrixXd::Zero(5, 5);
      for (std::size_t a : idx) {
        for (std::size_t b : idx) {
          const auto d = t.vec(a, b);
          const Eigen::Map<const Eigen::VectorXd> v(d.data(), 5);
          corr += v * v.transpose();
        }
      }
      const Eigen::VectorXd ev = oracle::jacobi(corr).values;
      const auto rank = static_cast<std::size_t>((ev.array() >= 1e-8 * ev(0)).count());
      const MetricModel reg = regularize(model, s, j);
      ++runs;
      if (j != rank || j != (dup ? 3u : 5u)) ++bad;
      if (reg.L.norm() > model.L.norm()) ++bad;
      for (std::size_t a : idx) {
        for (std::size_t b : idx) {
          if (a == b) continue;
          const double before = pair_distance(model, t.vec(a, b));
          const double after = pair_distance(reg, t.vec(a, b));
          const double rel = std::abs(after - before) / before;
          worst = std::max(worst, rel);
          if (!(rel <= 1e-6)) ++bad;
        }
      }
    }
  }
  return {bad == 0 ? Verdict::pass : Verdict::fail,
          fmt("%zu runs, worst rel distance change %.2e, %zu violations", runs, worst,
              bad)};
}

Outcome interpretability() {
  std::size_t lower = 0;
  std::size_t unequal = 0;
  double worst_gap = 0.0;
  std::string detail;
  for (std::uint64_t seed : kSeeds) {
    const Corpus c = generate_synthetic(discrimination_spec(seed, 2.0));
    const DistanceVectorTable t = build_distance_table(c);
    const CvPlan plan = make_cv_plan(c.labels(), 10, 1, seed);
    LmnnConfig cfg;
    cfg.seed = seed;
    RegularizationPolicy on;
    on.enabled = true;
    const MethodResult plain = evaluate_dtw_lmnn(t, c.labels(), cfg, plan, {});
    const MethodResult reg = evaluate_dtw_lmnn(t, c.labels(), cfg, plan, on);
    const double vp = profile_variance(plain.profiles);
    const double vr = profile_variance(reg.profiles);
    if (vr < vp) ++lower;
    detail += fmt(" %.3g<%.3g", vr, vp);
    for (const RelevanceProfile& p : reg.profiles) {
      for (auto [dup, src] : {std::pair{3, 1}, std::pair{4, 2}}) {
        const double a = p.values[static_cast<std::size_t>(dup)];
        const double b = p.values[static_cast<std::size_t>(src)];
        const double gap = std::abs(a - b) / std::max(a, b);
        worst_gap = std::max(worst_gap, gap);
        if (!(gap <= 0.05)) ++unequal;
      }
    }
  }
  const bool ok = lower == std::size(kSeeds) && unequal == 0;
  return {ok ? Verdict::pass : Verdict::fail,
          fmt("variance reg<plain in %zu/5 seeds:", lower) + detail +
              fmt("; worst duplicate gap %.2e", worst_gap)};
}

Outcome sweep() {
  std::size_t bad = 0;
  std::string detail;
  for (std::uint64_t seed : kSeeds) {
    const Corpus c = generate_synthetic(discrimination_spec(seed, 8.0));
    const DistanceVectorTable t = build_distance_table(c);
    const CvPlan plan = make_cv_plan(c.labels(), 10, 1, seed);
    LmnnConfig cfg;
    cfg.seed = seed;
    RegularizationPolicy on;
    on.enabled = true;
    const MethodResult cv = evaluate_dtw_lmnn(t, c.labels(), cfg, plan, on);
    const SweepCurve curve = feature_selection_sweep(t, c.labels(), cv.models, plan);
    const SweepPoint& full = curve.points.back();
    if (curve.best_features > 2) ++bad;
    if (full.accuracy_mean != cv.mean || full.repetition_accuracy != cv.repetition_accuracy) {
      ++bad;
    }
    detail += fmt(" f*=%zu(%.1f%%,full %.1f%%)", curve.best_features, curve.best_accuracy,
                  cv.mean);
  }
  return {bad == 0 ? Verdict::pass : Verdict::fail, "5 seeds:" + detail};
}

Outcome ttest() {
  const std::vector<double> a{2, -1, 3, 0, 1};
  const std::vector<double> zero(5, 0.0);
  const TTestResult hand = paired_ttest(a, zero);
  const double ref = oracle::student_t_p(hand.t, 4.0);
  const TTestResult same = paired_ttest(a, a);
  const TTestResult shift = paired_ttest(std::vector<double>{3, 4, 5},
                                         std::vector<double>{1, 2, 3});
  const bool ok = std::abs(hand.p - 0.2302) <= 1e-3 && std::abs(hand.p - ref) <= 1e-3 &&
                  hand.df == 4 && same.p == 1.0 && !same.degenerate && shift.p == 0.0 &&
                  shift.degenerate;
  return {ok ? Verdict::pass : Verdict::fail,
          fmt("p=%.4f (integration %.4f), zero diffs p=%g, constant diffs p=%g%s",
              hand.p, ref, same.p, shift.p, shift.degenerate ? " degenerate" : "")};
}

struct PublishedRow {
  const char* dir;
  double euclid;
  double euclid_var;
  double knn;
  double knn_var;
  double lmnn;
  double lmnn_var;
};

// Within three combined standard deviations, with a 1-point floor.
bool within_reach(double ours, double our_var, double published, double published_var) {
  return std::abs(ours - published) <= 3.0 * std::sqrt(std::max(our_var + published_var, 1.0));
}

Outcome published_reproduction(const fs::path& root) {
  if (root.empty()) return {Verdict::skip, "no converted corpora supplied"};
  const PublishedRow rows[] = {{"walking", 92, 0.87, 95, 0.77, 100, 0},
                           {"dance", 80, 1.49, 77.5, 1.51, 90, 1.03},
                           {"cricket", 95.56, 0.38, 99.44, 0.18, 100, 0},
                           {"articulatory", 97.30, 1.20, 98.61, 1.05, 99.06, 1.11}};
  std::size_t found = 0;
  bool ok = true;
  std::string detail;
  for (const PublishedRow& row : rows) {
    const fs::path manifest = root / row.dir / "manifest.json";
    if (!fs::exists(manifest)) continue;
    ++found;
    const Corpus c = load_corpus(manifest);
    const DistanceVectorTable t = build_distance_table(c);
    const CvPlan plan = make_cv_plan(c.labels(), 10, 10, 1);
    const MethodResult e = evaluate_euclidean_lmnn(c, {}, plan, {});
    const MethodResult k = evaluate_dtw_knn(t, c.labels(), plan);
    const MethodResult l = evaluate_dtw_lmnn(t, c.labels(), {}, plan, {});
    ok = ok && within_reach(e.mean, e.variance, row.euclid, row.euclid_var) &&
         within_reach(k.mean, k.variance, row.knn, row.knn_var) &&
         within_reach(l.mean, l.variance, row.lmnn, row.lmnn_var);
    detail += fmt(" %s: euclid %.2f/%.2f knn %.2f/%.2f lmnn %.2f/%.2f;", row.dir, e.mean,
                  row.euclid, k.mean, row.knn, l.mean, row.lmnn);
  }
  if (found == 0) return {Verdict::skip, "no manifests under " + root.string()};
  return {ok ? Verdict::pass : Verdict::fail, "ours/published" + detail};
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  fs::path corpora;
  if (const char* env = std::getenv("DTWLMNN_PUBLISHED_CORPORA")) corpora = env;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    if (flag == "--only") {
      only = std::atoi(argv[i + 1]);
    } else if (flag == "--published-corpora") {
      corpora = argv[i + 1];
    } else {
      std::fprintf(stderr, "usage: acceptance [--only N] [--published-corpora DIR]\n");
      return 2;
    }
  }

  const std::vector<Criterion> criteria{
      {1, "dtw matches path enumeration", 10, dtw_oracle},
      {2, "gradient matches finite differences", 30, gradient_check},
      {3, "optimizer descends and stays psd", 0, optimizer_contract},
      {4, "synthetic discrimination", 300, end_to_end},
      {5, "regularization preserves training distances", 0, regularization_equivalence},
      {6, "regularization stabilizes relevance", 0, interpretability},
      {7, "feature sweep", 0, sweep},
      {8, "paired t-test", 0, ttest},
      {9, "published accuracies", 0, [&] { return published_reproduction(corpora); }},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    if (only != 0 && c.id != only) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Verdict::fail, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_s > 0 && secs >= c.budget_s && o.verdict == Verdict::pass) {
      o = {Verdict::fail, o.detail + fmt("; over %.0f s budget", c.budget_s)};
    }
    const char* tag = o.verdict == Verdict::pass   ? "PASS"
                      : o.verdict == Verdict::fail ? "FAIL"
                                                   : "SKIP";
    std::printf("AC%d %s  %s: %s [%.2f s]\n", c.id, tag, c.name.c_str(), o.detail.c_str(),
                secs);
    std::fflush(stdout);
    if (o.verdict == Verdict::fail) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
