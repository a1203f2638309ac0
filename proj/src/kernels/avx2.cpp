// Compiled with -mavx2 -mfma -ffp-contract=off; only reached after a runtime
// CPU check. The DTW and Euclidean kernels use separate mul/add so results
// match the scalar reference bit for bit.

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "dtwlmnn/kernels.hpp"

namespace dtwlmnn::kernels {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

__m256i lane_mask(std::size_t active) {
  alignas(32) long long bits[4];
  for (std::size_t l = 0; l < 4; ++l) bits[l] = l < active ? -1 : 0;
  return _mm256_load_si256(reinterpret_cast<const __m256i*>(bits));
}

__m256d load_lanes(const double* p, std::size_t active, __m256i mask) {
  return active == 4 ? _mm256_loadu_pd(p) : _mm256_maskload_pd(p, mask);
}

// Four channels per lane group; a cell holds one DP value per channel.
void dtw_multichannel_avx2(const double* a, std::size_t ta, const double* b,
                           std::size_t tb, std::size_t n, LocalCost cost,
                           std::size_t band, double* out) {
  const __m256d inf = _mm256_set1_pd(kInf);
  const __m256d sign = _mm256_set1_pd(-0.0);
  std::vector<double> prev_buf(4 * (tb + 1));
  std::vector<double> curr_buf(4 * (tb + 1));
  std::vector<double> b_block(4 * tb);

  for (std::size_t k0 = 0; k0 < n; k0 += 4) {
    const std::size_t active = std::min<std::size_t>(4, n - k0);
    const __m256i mask = lane_mask(active);
    for (std::size_t j = 0; j < tb; ++j) {
      _mm256_storeu_pd(&b_block[4 * j], load_lanes(b + j * n + k0, active, mask));
    }
    double* prev = prev_buf.data();
    double* curr = curr_buf.data();
    for (std::size_t j = 0; j <= tb; ++j) _mm256_storeu_pd(prev + 4 * j, inf);
    _mm256_storeu_pd(prev, _mm256_setzero_pd());

    for (std::size_t i = 1; i <= ta; ++i) {
      for (std::size_t j = 0; j <= tb; ++j) _mm256_storeu_pd(curr + 4 * j, inf);
      std::size_t lo = 1;
      std::size_t hi = tb;
      if (band != kNoBand) {
        lo = i > band ? std::max<std::size_t>(1, i - band) : 1;
        hi = std::min(tb, i + band);
      }
      const __m256d ai = load_lanes(a + (i - 1) * n + k0, active, mask);
      __m256d left = _mm256_loadu_pd(curr + 4 * (lo - 1));
      for (std::size_t j = lo; j <= hi; ++j) {
        const __m256d diag = _mm256_loadu_pd(prev + 4 * (j - 1));
        const __m256d up = _mm256_loadu_pd(prev + 4 * j);
        const __m256d best = _mm256_min_pd(_mm256_min_pd(diag, up), left);
        const __m256d diff = _mm256_sub_pd(ai, _mm256_loadu_pd(&b_block[4 * (j - 1)]));
        const __m256d c = cost == LocalCost::absolute
                              ? _mm256_andnot_pd(sign, diff)
                              : _mm256_mul_pd(diff, diff);
        left = _mm256_add_pd(c, best);
        _mm256_storeu_pd(curr + 4 * j, left);
      }
      std::swap(prev, curr);
    }
    alignas(32) double result[4];
    _mm256_store_pd(result, _mm256_loadu_pd(prev + 4 * tb));
    for (std::size_t l = 0; l < active; ++l) out[k0 + l] = result[l];
  }
}

void subsampled_euclid_avx2(const double* a, const double* b,
                            const std::size_t* rows, std::size_t count,
                            std::size_t n, double* out) {
  for (std::size_t k0 = 0; k0 < n; k0 += 4) {
    const std::size_t active = std::min<std::size_t>(4, n - k0);
    const __m256i mask = lane_mask(active);
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t r = 0; r < count; ++r) {
      const __m256d diff =
          _mm256_sub_pd(load_lanes(a + r * n + k0, active, mask),
                        load_lanes(b + rows[r] * n + k0, active, mask));
      acc = _mm256_add_pd(acc, _mm256_mul_pd(diff, diff));
    }
    alignas(32) double result[4];
    _mm256_store_pd(result, _mm256_sqrt_pd(acc));
    for (std::size_t l = 0; l < active; ++l) out[k0 + l] = result[l];
  }
}

double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

double quadform_avx2(const double* m, const double* d, std::size_t n) {
  const std::size_t body = n - n % 4;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = m + i * n;
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t j = 0; j < body; j += 4) {
      acc = _mm256_fmadd_pd(_mm256_loadu_pd(row + j), _mm256_loadu_pd(d + j), acc);
    }
    double dot = hsum(acc);
    for (std::size_t j = body; j < n; ++j) dot += row[j] * d[j];
    total += d[i] * dot;
  }
  return total;
}

void sym_rank1_update_avx2(double* g, const double* d, double w,
                           std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = w * d[i];
    const __m256d wv = _mm256_set1_pd(wi);
    double* row = g + i * n;
    std::size_t j = i;
    for (; j + 4 <= n; j += 4) {
      _mm256_storeu_pd(row + j, _mm256_fmadd_pd(wv, _mm256_loadu_pd(d + j),
                                                _mm256_loadu_pd(row + j)));
    }
    for (; j < n; ++j) row[j] += wi * d[j];
  }
}

constexpr KernelTable kAvx2{
    Isa::avx2,
    &dtw_multichannel_avx2,
    &subsampled_euclid_avx2,
    &quadform_avx2,
    &sym_rank1_update_avx2,
};

}  // namespace

const KernelTable* avx2_kernel_table() { return &kAvx2; }

}  // namespace dtwlmnn::kernels
