#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "dtwlmnn/kernels.hpp"

namespace dtwlmnn::kernels {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double local(double x, double y, LocalCost cost) {
  const double diff = x - y;
  return cost == LocalCost::absolute ? std::abs(diff) : diff * diff;
}

void dtw_multichannel_scalar(const double* a, std::size_t ta, const double* b,
                             std::size_t tb, std::size_t n, LocalCost cost,
                             std::size_t band, double* out) {
  // Rolling rows over b, index 0 is the virtual boundary column.
  std::vector<double> prev(tb + 1);
  std::vector<double> curr(tb + 1);
  for (std::size_t k = 0; k < n; ++k) {
    std::fill(prev.begin(), prev.end(), kInf);
    prev[0] = 0.0;
    for (std::size_t i = 1; i <= ta; ++i) {
      std::fill(curr.begin(), curr.end(), kInf);
      std::size_t lo = 1;
      std::size_t hi = tb;
      if (band != kNoBand) {
        lo = i > band ? std::max<std::size_t>(1, i - band) : 1;
        hi = std::min(tb, i + band);
      }
      const double ai = a[(i - 1) * n + k];
      for (std::size_t j = lo; j <= hi; ++j) {
        const double best = std::min(std::min(prev[j - 1], prev[j]), curr[j - 1]);
        curr[j] = local(ai, b[(j - 1) * n + k], cost) + best;
      }
      std::swap(prev, curr);
    }
    out[k] = prev[tb];
  }
}

void subsampled_euclid_scalar(const double* a, const double* b,
                              const std::size_t* rows, std::size_t count,
                              std::size_t n, double* out) {
  for (std::size_t k = 0; k < n; ++k) {
    double acc = 0.0;
    for (std::size_t r = 0; r < count; ++r) {
      const double diff = a[r * n + k] - b[rows[r] * n + k];
      acc = acc + diff * diff;
    }
    out[k] = std::sqrt(acc);
  }
}

double quadform_scalar(const double* m, const double* d, std::size_t n) {
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += m[i * n + j] * d[j];
    total += d[i] * row;
  }
  return total;
}

void sym_rank1_update_scalar(double* g, const double* d, double w,
                             std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = w * d[i];
    for (std::size_t j = i; j < n; ++j) g[i * n + j] += wi * d[j];
  }
}

constexpr KernelTable kScalar{
    Isa::scalar,
    &dtw_multichannel_scalar,
    &subsampled_euclid_scalar,
    &quadform_scalar,
    &sym_rank1_update_scalar,
};

}  // namespace

const KernelTable& scalar_kernels() { return kScalar; }

void mirror_upper(double* g, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) g[j * n + i] = g[i * n + j];
  }
}

}  // namespace dtwlmnn::kernels
