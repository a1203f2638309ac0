#pragma once

// Hot inner loops, with a scalar reference implementation and an AVX2
// variant picked at runtime. The scalar table is always available and is
// the ground truth the SIMD variants are tested against.
//
// Bitwise-identical across variants: dtw_multichannel, subsampled_euclid.
// Equal up to summation order: quadform, sym_rank1_update.

#include <cstddef>
#include <string_view>

namespace dtwlmnn::kernels {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

enum class LocalCost { absolute, squared };

/// Sentinel for "no warping window".
inline constexpr std::size_t kNoBand = static_cast<std::size_t>(-1);

struct KernelTable {
  Isa isa;

  /// Independent scalar DTW for each of the n channels of two row-major
  /// sequences a (ta x n) and b (tb x n), steps {(1,0),(0,1),(1,1)}.
  /// `band` restricts cells to |i - j| <= band (kNoBand: unconstrained).
  /// Caller guarantees ta, tb >= 1 and that the band admits a path. Writes
  /// n values to out.
  void (*dtw_multichannel)(const double* a, std::size_t ta, const double* b,
                           std::size_t tb, std::size_t n, LocalCost cost,
                           std::size_t band, double* out);

  /// out[k] = sqrt(sum_r (a[r][k] - b[rows[r]][k])^2) for k < n, where a has
  /// `count` rows and b is indexed through `rows`.
  void (*subsampled_euclid)(const double* a, const double* b,
                            const std::size_t* rows, std::size_t count,
                            std::size_t n, double* out);

  /// d^T M d for a row-major n x n matrix M.
  double (*quadform)(const double* m, const double* d, std::size_t n);

  /// Upper triangle (j >= i) of row-major g += w * d d^T. The lower triangle
  /// is left untouched; callers mirror once after accumulation.
  void (*sym_rank1_update)(double* g, const double* d, double w,
                           std::size_t n);
};

const KernelTable& scalar_kernels();

/// nullptr when the AVX2 variant was not compiled in or the CPU lacks
/// AVX2/FMA.
const KernelTable* avx2_kernels();

/// Best supported ISA, overridable with DTWLMNN_ISA=scalar|avx2 in the
/// environment (read once).
Isa detected_isa();

/// Kernel table currently in use.
const KernelTable& active();

/// Forces a specific variant (tests, benchmarking). Returns false if `isa`
/// is unavailable on this machine, leaving the selection unchanged.
bool select_isa(Isa isa);

/// Mirrors the upper triangle of a row-major n x n matrix into the lower.
void mirror_upper(double* g, std::size_t n);

}  // namespace dtwlmnn::kernels
