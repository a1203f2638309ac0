#pragma once

// Slow, independent reference implementations used to check the library.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dtwlmnn/dtw.hpp"
#include "dtwlmnn/lmnn.hpp"

namespace oracle {

// Minimum cost over every monotone warping path, enumerated explicitly.
inline double dtw_paths(std::span<const double> a, std::span<const double> b,
                        bool squared, std::size_t band = dtwlmnn::kernels::kNoBand) {
  double best = std::numeric_limits<double>::infinity();
  auto cost = [&](std::size_t i, std::size_t j) {
    const double d = a[i] - b[j];
    return squared ? d * d : std::abs(d);
  };
  auto in_band = [&](std::size_t i, std::size_t j) {
    return band == dtwlmnn::kernels::kNoBand || (i > j ? i - j : j - i) <= band;
  };
  auto walk = [&](auto&& self, std::size_t i, std::size_t j, double acc) -> void {
    if (!in_band(i, j)) return;
    acc += cost(i, j);
    if (i + 1 == a.size() && j + 1 == b.size()) {
      best = std::min(best, acc);
      return;
    }
    if (i + 1 < a.size()) self(self, i + 1, j, acc);
    if (j + 1 < b.size()) self(self, i, j + 1, acc);
    if (i + 1 < a.size() && j + 1 < b.size()) self(self, i + 1, j + 1, acc);
  };
  walk(walk, 0, 0, 0.0);
  return best;
}

struct Eigenpairs {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // columns
};

// Cyclic Jacobi rotations for a symmetric matrix.
inline Eigenpairs jacobi(Eigen::MatrixXd a, int sweeps = 100) {
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  for (int s = 0; s < sweeps; ++s) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    }
    if (off < 1e-30 * std::max(1.0, a.squaredNorm())) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index x, Eigen::Index y) { return a(x, x) > a(y, y); });
  Eigenpairs out{Eigen::VectorXd(n), Eigen::MatrixXd(n, n)};
  for (Eigen::Index r = 0; r < n; ++r) {
    out.values(r) = a(order[static_cast<std::size_t>(r)], order[static_cast<std::size_t>(r)]);
    out.vectors.col(r) = v.col(order[static_cast<std::size_t>(r)]);
  }
  return out;
}

// Two-sided p-value by composite Simpson integration of the Student-t
// density over [0, |t|].
inline double student_t_p(double t, double df, int intervals = 200000) {
  const double logc = std::lgamma((df + 1.0) / 2.0) - std::lgamma(df / 2.0) -
                      0.5 * std::log(df * std::numbers::pi);
  auto pdf = [&](double x) {
    return std::exp(logc - (df + 1.0) / 2.0 * std::log1p(x * x / df));
  };
  const double hi = std::abs(t);
  const double h = hi / intervals;
  double s = pdf(0.0) + pdf(hi);
  for (int i = 1; i < intervals; ++i) s += (i % 2 ? 4.0 : 2.0) * pdf(i * h);
  return 1.0 - 2.0 * (s * h / 3.0);
}

inline double quad(const Eigen::MatrixXd& m, std::span<const double> d) {
  double s = 0.0;
  for (std::size_t a = 0; a < d.size(); ++a) {
    for (std::size_t b = 0; b < d.size(); ++b) {
      s += d[a] * m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * d[b];
    }
  }
  return s;
}

// pull + c * sum of hinges, by explicit loops over (i, j, l).
inline double lmnn_objective(const Eigen::MatrixXd& m,
                             const dtwlmnn::DistanceVectorTable& table,
                             std::span<const std::size_t> labels,
                             const std::vector<std::vector<std::size_t>>& targets,
                             double c, std::span<const std::size_t> subset) {
  double pull = 0.0;
  double push = 0.0;
  for (std::size_t i : subset) {
    for (std::size_t j : targets[i]) {
      const double dij = quad(m, table.vec(i, j));
      pull += dij;
      for (std::size_t l : subset) {
        if (labels[l] == labels[i]) continue;
        push += std::max(0.0, 1.0 + dij - quad(m, table.vec(i, l)));
      }
    }
  }
  return pull + c * push;
}

// Full sort, then majority vote; vote ties go to the nearest neighbor's
// class when it is tied, otherwise to the tied class appearing first.
inline std::size_t knn(std::span<const double> dist, std::span<const std::size_t> labels,
                       std::size_t k, std::span<const std::size_t> keys) {
  std::vector<std::size_t> idx(dist.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return std::make_pair(dist[a], keys[a]) < std::make_pair(dist[b], keys[b]);
  });
  std::map<std::size_t, std::size_t> votes;
  for (std::size_t r = 0; r < k; ++r) ++votes[labels[idx[r]]];
  std::size_t top = 0;
  for (const auto& [label, v] : votes) top = std::max(top, v);
  for (std::size_t r = 0; r < k; ++r) {
    if (votes[labels[idx[r]]] == top) return labels[idx[r]];
  }
  return labels[idx[0]];
}

inline dtwlmnn::DistanceVectorTable random_table(std::size_t m, std::size_t n,
                                                 std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.1, 3.0);
  dtwlmnn::DistanceVectorTable t(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      auto v = t.vec(i, j);
      for (auto& x : v) x = u(rng);
      std::copy(v.begin(), v.end(), t.vec(j, i).begin());
    }
  }
  return t;
}

inline Eigen::MatrixXd random_psd(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    for (Eigen::Index c = 0; c < a.cols(); ++c) a(r, c) = g(rng);
  }
  return scale * (a * a.transpose()) / static_cast<double>(n);
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("dtwlmnn_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oracle
