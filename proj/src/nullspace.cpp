#include "dtwlmnn/nullspace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dtwlmnn/errors.hpp"
#include "dtwlmnn/fingerprint.hpp"
#include "dtwlmnn/kernels.hpp"

namespace dtwlmnn {

CorrelationSpectrum correlation_spectrum(
    const DistanceVectorTable& table, std::span<const std::size_t> train_indices) {
  if (train_indices.empty()) {
    throw ValidationError("correlation_spectrum: empty training set");
  }
  const std::size_t n = table.channels();
  const auto& kern = kernels::active();
  std::vector<double> corr(n * n, 0.0);
  Fnv1a source;
  source.text(table.fingerprint());
  // Ordered pairs (i, j) and (j, i) carry the same vector; the diagonal
  // pairs are zero.
  for (std::size_t a = 0; a < train_indices.size(); ++a) {
    const std::size_t i = train_indices[a];
    if (i >= table.samples()) {
      throw ValidationError("correlation_spectrum: index out of range");
    }
    source.u64(i);
    for (std::size_t b = a + 1; b < train_indices.size(); ++b) {
      const auto d = table.vec(i, train_indices[b]);
      for (double v : d) {
        if (!std::isfinite(v)) {
          throw ValidationError("correlation_spectrum: non-finite entry");
        }
      }
      kern.sym_rank1_update(corr.data(), d.data(), 2.0, n);
    }
  }
  kernels::mirror_upper(corr.data(), n);
  const Eigen::Map<const Eigen::MatrixXd> c(corr.data(),
                                            static_cast<Eigen::Index>(n),
                                            static_cast<Eigen::Index>(n));
  const SymmetricEigen eig = sorted_eigen(c);
  return {eig.values, eig.vectors, source.hex()};
}

std::string DimPolicy::key() const {
  std::ostringstream out;
  out.precision(17);
  switch (kind) {
    case Kind::threshold:
      out << "threshold(" << value << ")";
      break;
    case Kind::energy:
      out << "energy(" << value << ")";
      break;
    case Kind::manual:
      out << "manual(" << static_cast<std::size_t>(value) << ")";
      break;
  }
  return out.str();
}

std::size_t choose_effective_dim(const CorrelationSpectrum& spectrum,
                                 const DimPolicy& policy) {
  const auto n = static_cast<std::size_t>(spectrum.eigenvalues.size());
  if (n == 0) return 0;
  const double top = spectrum.eigenvalues(0);
  switch (policy.kind) {
    case DimPolicy::Kind::manual: {
      const double j = std::max(1.0, policy.value);
      return std::min(n, static_cast<std::size_t>(j));
    }
    case DimPolicy::Kind::threshold: {
      if (!(top > 0.0)) return 0;
      std::size_t count = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (spectrum.eigenvalues(static_cast<Eigen::Index>(j)) >= policy.value * top) {
          ++count;
        }
      }
      return count;
    }
    case DimPolicy::Kind::energy: {
      if (!(top > 0.0)) return 0;
      const double floor = 1e-8 * top;
      std::vector<double> kept;
      for (std::size_t j = 0; j < n; ++j) {
        const double v = spectrum.eigenvalues(static_cast<Eigen::Index>(j));
        kept.push_back(v >= floor ? v : 0.0);
      }
      double total = 0.0;
      for (double v : kept) total += v;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        acc += kept[j];
        if (acc >= policy.value * total) return j + 1;
      }
      return n;
    }
  }
  return n;
}

Projector make_projector(const CorrelationSpectrum& spectrum, std::size_t dim) {
  const Eigen::Index n = spectrum.eigenvectors.rows();
  if (dim > static_cast<std::size_t>(n)) {
    throw ValidationError("make_projector: dim exceeds channel count");
  }
  if (dim == static_cast<std::size_t>(n)) return {Eigen::MatrixXd::Identity(n, n), dim};
  const Eigen::MatrixXd u =
      spectrum.eigenvectors.leftCols(static_cast<Eigen::Index>(dim));
  Eigen::MatrixXd phi = u * u.transpose();
  phi = 0.5 * (phi + phi.transpose());
  return {phi, dim};
}

MetricModel regularize(const MetricModel& model, const Projector& projector) {
  if (projector.phi.rows() != model.L.cols()) {
    throw ValidationError("regularize: model has " +
                          std::to_string(model.L.cols()) +
                          " channels, projector " +
                          std::to_string(projector.phi.rows()));
  }
  MetricModel out = model;
  out.L = model.L * projector.phi;
  out.regularized = true;
  out.effective_dim = projector.dim;
  return out;
}

MetricModel regularize(const MetricModel& model,
                       const CorrelationSpectrum& spectrum, std::size_t dim) {
  return regularize(model, make_projector(spectrum, dim));
}

double profile_variance(std::span<const RelevanceProfile> profiles) {
  if (profiles.size() < 2) {
    throw ValidationError("profile_variance: need at least 2 profiles");
  }
  const std::size_t n = profiles.front().values.size();
  for (const auto& p : profiles) {
    if (p.values.size() != n) {
      throw ValidationError("profile_variance: profile length mismatch");
    }
  }
  const double count = static_cast<double>(profiles.size());
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    double mean = 0.0;
    for (const auto& p : profiles) mean += p.values[k];
    mean /= count;
    double ss = 0.0;
    for (const auto& p : profiles) {
      const double d = p.values[k] - mean;
      ss += d * d;
    }
    total += ss / (count - 1.0);
  }
  return total;
}

void write_spectrum_csv(const CorrelationSpectrum& spectrum,
                        const std::filesystem::path& file,
                        const std::string& header) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write spectrum " + file.string());
  out.precision(17);
  if (!header.empty()) out << "# " << header << '\n';
  out << "index,eigenvalue\n";
  for (Eigen::Index j = 0; j < spectrum.eigenvalues.size(); ++j) {
    out << j + 1 << ',' << spectrum.eigenvalues(j) << '\n';
  }
  if (!out) throw IoError("write failed for spectrum " + file.string());
}

}  // namespace dtwlmnn
