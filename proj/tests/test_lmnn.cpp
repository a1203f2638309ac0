#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "dtwlmnn/errors.hpp"
#include "dtwlmnn/lmnn.hpp"
#include "dtwlmnn/parallel.hpp"
#include "dtwlmnn/synthetic.hpp"
#include "oracles.hpp"

using namespace dtwlmnn;

namespace {

std::vector<std::size_t> alternating_labels(std::size_t m, std::size_t classes) {
  std::vector<std::size_t> y(m);
  for (std::size_t i = 0; i < m; ++i) y[i] = i % classes;
  return y;
}

struct SynthSetup {
  Corpus corpus;
  DistanceVectorTable table;
};

SynthSetup synth(std::uint64_t seed, std::size_t m = 30) {
  SyntheticSpec spec;
  spec.samples = m;
  spec.channels = 4;
  spec.nuisance_sigma = 2.0;
  spec.seed = seed;
  SynthSetup s{generate_synthetic(spec), {}};
  s.table = build_distance_table(s.corpus);
  return s;
}

}  // namespace

TEST(Targets, NearestSameClassByUnweightedNorm) {
  std::mt19937_64 rng(31);
  const DistanceVectorTable t = oracle::random_table(10, 3, rng);
  const auto y = alternating_labels(10, 2);
  const NeighborStructure nb = select_targets(t, y, 2);
  for (std::size_t i = 0; i < 10; ++i) {
    ASSERT_EQ(nb.targets[i].size(), 2u);
    std::vector<std::pair<double, std::size_t>> same;
    for (std::size_t j = 0; j < 10; ++j) {
      if (j != i && y[j] == y[i]) {
        const auto d = t.vec(i, j);
        same.emplace_back(d[0] * d[0] + d[1] * d[1] + d[2] * d[2], j);
      }
    }
    std::sort(same.begin(), same.end());
    EXPECT_EQ(nb.targets[i][0], same[0].second);
    EXPECT_EQ(nb.targets[i][1], same[1].second);
  }
  EXPECT_EQ(nb.truncated, 0u);
}

TEST(Targets, SubsetAndTruncation) {
  std::mt19937_64 rng(32);
  const DistanceVectorTable t = oracle::random_table(8, 2, rng);
  const auto y = alternating_labels(8, 2);
  const std::vector<std::size_t> subset{0, 1, 2, 3, 5};
  const NeighborStructure nb = select_targets(t, y, 3, subset);
  EXPECT_TRUE(nb.targets[4].empty());
  EXPECT_EQ(nb.targets[0].size(), 1u);
  for (std::size_t i : subset) {
    for (std::size_t j : nb.targets[i]) {
      EXPECT_NE(std::find(subset.begin(), subset.end(), j), subset.end());
    }
  }
  EXPECT_EQ(nb.truncated, 5u);
}

TEST(Objective, MatchesTripleLoopOracle) {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 10; ++trial) {
    const DistanceVectorTable t = oracle::random_table(10, 4, rng);
    const auto y = alternating_labels(10, 3);
    const std::vector<std::size_t> subset{0, 1, 2, 3, 4, 6, 7, 9};
    const NeighborStructure nb = select_targets(t, y, 2, subset);
    const Eigen::MatrixXd m = oracle::random_psd(4, rng, 0.3);
    const ObjectiveValue obj = lmnn_objective(m, t, y, nb, 0.7, subset);
    const double ref = oracle::lmnn_objective(m, t, y, nb.targets, 0.7, subset);
    EXPECT_NEAR(obj.value, ref, 1e-10 * std::abs(ref));
    EXPECT_NEAR(obj.value, obj.pull + 0.7 * obj.push, 1e-10 * std::abs(ref));
    std::size_t expected = 0;
    for (std::size_t i : subset) {
      for (std::size_t j : nb.targets[i]) {
        for (std::size_t l : subset) {
          if (y[l] != y[i] && 1.0 + oracle::quad(m, t.vec(i, j)) - oracle::quad(m, t.vec(i, l)) > 0.0) {
            ASSERT_LT(expected, obj.active.size());
            EXPECT_EQ(std::tie(obj.active[expected].i, obj.active[expected].j,
                               obj.active[expected].l),
                      std::tie(i, j, l));
            ++expected;
          }
        }
      }
    }
    EXPECT_EQ(expected, obj.active.size());
  }
}

TEST(Gradient, ExactlySymmetric) {
  std::mt19937_64 rng(34);
  const DistanceVectorTable t = oracle::random_table(10, 6, rng);
  const auto y = alternating_labels(10, 2);
  const NeighborStructure nb = select_targets(t, y, 3);
  const Eigen::MatrixXd g = lmnn_gradient(oracle::random_psd(6, rng, 0.2), t, y, nb, 0.5);
  EXPECT_EQ(g, g.transpose());
}

TEST(Gradient, MatchesCentralDifferences) {
  std::mt19937_64 rng(35);
  const double eps = 1e-6;
  int probes = 0;
  while (probes < 20) {
    const std::size_t n = 2 + static_cast<std::size_t>(probes) % 5;
    const std::size_t m = 6 + static_cast<std::size_t>(probes) % 5;
    const DistanceVectorTable t = oracle::random_table(m, n, rng);
    const auto y = alternating_labels(m, 2);
    const NeighborStructure nb = select_targets(t, y, 2);
    const Eigen::MatrixXd M = oracle::random_psd(n, rng, 0.5);
    // Skip probes with a hinge argument within reach of the perturbation.
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j : nb.targets[i]) {
        for (std::size_t l = 0; l < m; ++l) {
          if (y[l] == y[i]) continue;
          margin = std::min(margin, std::abs(1.0 + oracle::quad(M, t.vec(i, j)) -
                                             oracle::quad(M, t.vec(i, l))));
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
        const double fp = lmnn_objective(M + eps * e, t, y, nb, 0.5).value;
        const double fm = lmnn_objective(M - eps * e, t, y, nb, 0.5).value;
        const double fd = (fp - fm) / (2.0 * eps);
        const double analytic = a == b ? g(a, b) : 2.0 * g(a, b);
        EXPECT_LE(std::abs(fd - analytic), 1e-4 * std::abs(analytic))
            << "probe " << probes << " entry " << a << "," << b;
      }
    }
  }
}

TEST(Train, ObjectiveNonIncreasingAndPsd) {
  const SynthSetup s = synth(41);
  const TrainResult r = train(s.table, s.corpus.labels(), LmnnConfig{});
  double last = r.trace.initial_objective;
  for (const TraceRow& row : r.trace.rows) {
    if (row.accepted) {
      EXPECT_LT(row.objective, last);
      last = row.objective;
    }
    EXPECT_GE(row.min_eig, -1e-9 * row.max_eig);
  }
  EXPECT_LT(last, r.trace.initial_objective);
  EXPECT_EQ(r.model.rank(), 4u);
  EXPECT_LT((r.model.metric() - r.metric).norm(), 1e-9 * r.metric.norm());
}

TEST(Train, DeterministicAndThreadCountInvariant) {
  const SynthSetup s = synth(42);
  set_max_threads(1);
  const TrainResult a = train(s.table, s.corpus.labels(), LmnnConfig{});
  set_max_threads(4);
  const TrainResult b = train(s.table, s.corpus.labels(), LmnnConfig{});
  set_max_threads(0);
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.trace.rows.size(), b.trace.rows.size());
}

TEST(Train, LowRankModes) {
  const SynthSetup s = synth(43);
  LmnnConfig cfg;
  cfg.rank = 2;
  const TrainResult trunc = train(s.table, s.corpus.labels(), cfg);
  EXPECT_EQ(trunc.model.rank(), 2u);
  EXPECT_EQ(trunc.model.channels(), 4u);
  cfg.low_rank_mode = LowRankMode::direct;
  const TrainResult direct = train(s.table, s.corpus.labels(), cfg);
  EXPECT_EQ(direct.model.rank(), 2u);
  EXPECT_LT(direct.trace.rows.empty() ? direct.trace.initial_objective
                                      : direct.trace.rows.back().objective,
            direct.trace.initial_objective);
}

TEST(Train, ActiveSetRefreshStillDescends) {
  const SynthSetup s = synth(44);
  LmnnConfig cfg;
  cfg.active_set_refresh = 10;
  const TrainResult r = train(s.table, s.corpus.labels(), cfg);
  const NeighborStructure nb = select_targets(s.table, s.corpus.labels(), cfg.k);
  const TrainResult exact = train(s.table, s.corpus.labels(), LmnnConfig{});
  const double start = exact.trace.initial_objective;
  const double end = lmnn_objective(r.metric, s.table, s.corpus.labels(), nb, cfg.c).value;
  EXPECT_LT(end, start);
}

TEST(Train, SubsetIgnoresOtherSamples) {
  const SynthSetup s = synth(45);
  std::vector<std::size_t> subset;
  for (std::size_t i = 0; i < 20; ++i) subset.push_back(i);
  const TrainResult a = train(s.table, s.corpus.labels(), LmnnConfig{}, subset);
  DistanceVectorTable changed = s.table;
  for (std::size_t i = 20; i < 30; ++i) {
    for (std::size_t j = 0; j < 30; ++j) {
      if (j == i) continue;
      for (double& v : changed.vec(i, j)) v += 1.0;
      for (double& v : changed.vec(j, i)) v += 1.0;
    }
  }
  const TrainResult b = train(changed, s.corpus.labels(), LmnnConfig{}, subset);
  EXPECT_EQ(a.model.L, b.model.L);
}

TEST(Config, ValidateRejectsBadSettings) {
  LmnnConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.k = 0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = {};
  cfg.c = -1.0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = {};
  cfg.step_decay = 1.5;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = {};
  cfg.rank = 0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  EXPECT_NE(LmnnConfig{}.key(), cfg.key());
}

TEST(Train, TraceCsvHasHeaderAndRows) {
  const SynthSetup s = synth(46, 12);
  LmnnConfig cfg;
  cfg.max_iters = 5;
  const TrainResult r = train(s.table, s.corpus.labels(), cfg);
  EXPECT_TRUE(r.trace.hit_max_iters || r.trace.converged);
  const auto dir = oracle::temp_dir("trace_csv");
  write_trace_csv(r.trace, dir / "trace.csv", "fingerprint=x seed=1");
  std::ifstream in(dir / "trace.csv");
  std::string first;
  std::string second;
  std::getline(in, first);
  std::getline(in, second);
  EXPECT_EQ(first, "# fingerprint=x seed=1");
  EXPECT_EQ(second, "iter,objective,step,active_count,min_eig,max_eig,accepted");
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  EXPECT_EQ(lines, r.trace.rows.size() + 1);
}
