#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <numeric>

#include "dtwlmnn/errors.hpp"
#include "dtwlmnn/eval.hpp"

namespace dtwlmnn {

std::size_t knn_classify(std::span<const double> distances,
                         std::span<const std::size_t> labels, std::size_t k,
                         std::span<const std::size_t> tie_keys) {
  if (labels.size() != distances.size() ||
      (!tie_keys.empty() && tie_keys.size() != distances.size())) {
    throw ValidationError("knn: distances, labels and keys differ in length");
  }
  if (k < 1) throw ValidationError("knn: k must be >= 1");
  if (distances.size() < k) {
    throw ValidationError("knn: " + std::to_string(distances.size()) +
                          " training samples for k=" + std::to_string(k));
  }
  auto key = [&](std::size_t i) { return tie_keys.empty() ? i : tie_keys[i]; };
  std::vector<std::size_t> order(distances.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k),
                    order.end(), [&](std::size_t a, std::size_t b) {
                      if (distances[a] != distances[b]) {
                        return distances[a] < distances[b];
                      }
                      return key(a) < key(b);
                    });
  // (votes, first rank) per label among the k nearest.
  std::vector<std::pair<std::size_t, std::size_t>> tally;
  std::vector<std::size_t> seen;
  for (std::size_t r = 0; r < k; ++r) {
    const std::size_t label = labels[order[r]];
    auto it = std::find(seen.begin(), seen.end(), label);
    if (it == seen.end()) {
      seen.push_back(label);
      tally.emplace_back(1, r);
    } else {
      ++tally[static_cast<std::size_t>(it - seen.begin())].first;
    }
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < tally.size(); ++c) {
    if (tally[c].first > tally[best].first) best = c;
  }
  return seen[best];
}

double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance_of(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double mean = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

TTestResult paired_ttest(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("t-test: length mismatch");
  if (a.size() < 2) throw ValidationError("t-test: need at least 2 pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];

  TTestResult out;
  out.df = d.size() - 1;
  const double mean = mean_of(d);
  const double sd = std::sqrt(variance_of(d));
  const bool all_equal =
      std::all_of(d.begin(), d.end(), [&](double x) { return x == d.front(); });
  if (all_equal) {
    if (d.front() == 0.0) {
      out.t = 0.0;
      out.p = 1.0;
    } else {
      out.t = std::copysign(std::numeric_limits<double>::infinity(), d.front());
      out.p = 0.0;
      out.degenerate = true;
    }
    return out;
  }
  out.t = mean / (sd / std::sqrt(static_cast<double>(d.size())));
  const boost::math::students_t dist(static_cast<double>(out.df));
  out.p = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(out.t))),
                     0.0, 1.0);
  return out;
}

}  // namespace dtwlmnn
