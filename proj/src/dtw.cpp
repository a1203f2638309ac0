#include "dtwlmnn/dtw.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "dtwlmnn/errors.hpp"
#include "dtwlmnn/fingerprint.hpp"
#include "dtwlmnn/parallel.hpp"

namespace dtwlmnn {

namespace fs = std::filesystem;

std::string DtwConfig::key() const {
  std::string out = "cost=";
  out += local_cost == LocalCost::absolute ? "absolute" : "squared";
  out += ";band=";
  out += band_radius ? std::to_string(*band_radius) : "none";
  out += ";znorm=";
  out += znormalize ? "1" : "0";
  return out;
}

namespace {

std::size_t band_of(const DtwConfig& cfg) {
  return cfg.band_radius ? *cfg.band_radius : kernels::kNoBand;
}

void check_lengths(std::size_t ta, std::size_t tb, const DtwConfig& cfg) {
  if (ta == 0 || tb == 0) throw ValidationError("dtw: empty sequence");
  if (cfg.band_radius) {
    const std::size_t gap = ta > tb ? ta - tb : tb - ta;
    if (gap > *cfg.band_radius) {
      throw ValidationError("dtw: band radius " +
                            std::to_string(*cfg.band_radius) +
                            " admits no path for lengths " +
                            std::to_string(ta) + " and " + std::to_string(tb));
    }
  }
}

}  // namespace

double dtw_scalar(std::span<const double> a, std::span<const double> b,
                  const DtwConfig& cfg) {
  check_lengths(a.size(), b.size(), cfg);
  double out = 0.0;
  kernels::active().dtw_multichannel(a.data(), a.size(), b.data(), b.size(), 1,
                                     cfg.local_cost, band_of(cfg), &out);
  return out;
}

std::vector<double> dtw_component_vector(const Sequence& x, const Sequence& y,
                                         const DtwConfig& cfg) {
  if (x.channels() != y.channels()) {
    throw ValidationError("dtw: channel count mismatch (" +
                          std::to_string(x.channels()) + " vs " +
                          std::to_string(y.channels()) + ")");
  }
  check_lengths(x.length(), y.length(), cfg);
  std::vector<double> out(x.channels());
  kernels::active().dtw_multichannel(x.values().data(), x.length(),
                                     y.values().data(), y.length(),
                                     x.channels(), cfg.local_cost,
                                     band_of(cfg), out.data());
  return out;
}

DistanceVectorTable::DistanceVectorTable(std::size_t samples,
                                         std::size_t channels,
                                         std::string fingerprint)
    : m_(samples),
      n_(channels),
      fingerprint_(std::move(fingerprint)),
      data_(samples * samples * channels, 0.0) {}

void DistanceVectorTable::validate() const {
  for (std::size_t i = 0; i < m_; ++i) {
    for (std::size_t j = 0; j < m_; ++j) {
      auto d = vec(i, j);
      auto t = vec(j, i);
      for (std::size_t k = 0; k < n_; ++k) {
        const std::string at = "table[" + std::to_string(i) + "][" +
                               std::to_string(j) + "][" + std::to_string(k) +
                               "]";
        if (!std::isfinite(d[k]) || d[k] < 0.0) {
          throw ValidationError(at + ": negative or non-finite entry");
        }
        if (i == j && d[k] != 0.0) {
          throw ValidationError(at + ": nonzero diagonal");
        }
        if (d[k] != t[k]) throw ValidationError(at + ": asymmetric");
      }
    }
  }
}

std::string table_fingerprint(const Corpus& corpus, const DtwConfig& cfg) {
  return Fnv1a().text("dtw-table-v1").text(cfg.key()).text(corpus.digest()).hex();
}

namespace {

std::vector<Sequence> znormalized(std::span<const Sequence> sequences) {
  const std::size_t n = sequences.front().channels();
  std::vector<double> mean(n, 0.0);
  std::vector<double> sq(n, 0.0);
  double count = 0.0;
  for (const auto& s : sequences) {
    for (std::size_t t = 0; t < s.length(); ++t) {
      for (std::size_t k = 0; k < n; ++k) mean[k] += s.at(t, k);
    }
    count += static_cast<double>(s.length());
  }
  for (auto& v : mean) v /= count;
  for (const auto& s : sequences) {
    for (std::size_t t = 0; t < s.length(); ++t) {
      for (std::size_t k = 0; k < n; ++k) {
        const double d = s.at(t, k) - mean[k];
        sq[k] += d * d;
      }
    }
  }
  std::vector<double> scale(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double sd = std::sqrt(sq[k] / count);
    scale[k] = sd > 0.0 ? 1.0 / sd : 1.0;
  }
  std::vector<Sequence> out;
  out.reserve(sequences.size());
  for (const auto& s : sequences) {
    std::vector<double> values(s.values().begin(), s.values().end());
    for (std::size_t t = 0; t < s.length(); ++t) {
      for (std::size_t k = 0; k < n; ++k) {
        values[t * n + k] = (values[t * n + k] - mean[k]) * scale[k];
      }
    }
    out.emplace_back(s.id(), s.length(), n, std::move(values));
  }
  return out;
}

}  // namespace

DistanceVectorTable build_distance_table(std::span<const Sequence> sequences,
                                         const DtwConfig& cfg,
                                         std::string fingerprint) {
  const std::size_t m = sequences.size();
  if (m == 0) throw ValidationError("build_distance_table: no sequences");
  const std::size_t n = sequences.front().channels();
  for (const auto& s : sequences) {
    if (s.channels() != n) {
      throw ValidationError("build_distance_table: channel count mismatch");
    }
  }
  std::vector<Sequence> normalized;
  if (cfg.znormalize) {
    normalized = znormalized(sequences);
    sequences = normalized;
  }
  DistanceVectorTable table(m, n, std::move(fingerprint));
  // Upper triangle, row-parallel; each worker writes disjoint slots.
  parallel_for(m, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      auto d = dtw_component_vector(sequences[i], sequences[j], cfg);
      std::copy(d.begin(), d.end(), table.vec(i, j).begin());
      std::copy(d.begin(), d.end(), table.vec(j, i).begin());
    }
  });
  return table;
}

DistanceVectorTable build_distance_table(const Corpus& corpus,
                                         const DtwConfig& cfg) {
  return build_distance_table(corpus.sequences(), cfg,
                              table_fingerprint(corpus, cfg));
}

std::vector<std::size_t> subsample_indices(std::size_t long_len,
                                           std::size_t count) {
  if (count == 0 || count > long_len) {
    throw ValidationError("subsample_indices: need 1 <= count <= length");
  }
  std::vector<std::size_t> rows(count);
  if (count == 1) {
    rows[0] = 0;
    return rows;
  }
  for (std::size_t r = 0; r < count; ++r) {
    const double pos = static_cast<double>(r) *
                       static_cast<double>(long_len - 1) /
                       static_cast<double>(count - 1);
    rows[r] = static_cast<std::size_t>(std::lround(pos));
  }
  return rows;
}

DistanceVectorTable build_euclidean_table(const Corpus& corpus) {
  const std::size_t m = corpus.size();
  const std::size_t n = corpus.channels();
  DistanceVectorTable table(
      m, n, Fnv1a().text("euclid-table-v1").text(corpus.digest()).hex());
  parallel_for(m, [&](std::size_t i) {
    std::vector<double> d(n);
    for (std::size_t j = i + 1; j < m; ++j) {
      const Sequence* shorter = &corpus.sequence(i);
      const Sequence* longer = &corpus.sequence(j);
      if (shorter->length() > longer->length()) std::swap(shorter, longer);
      const auto rows = subsample_indices(longer->length(), shorter->length());
      kernels::active().subsampled_euclid(shorter->values().data(),
                                          longer->values().data(), rows.data(),
                                          rows.size(), n, d.data());
      std::copy(d.begin(), d.end(), table.vec(i, j).begin());
      std::copy(d.begin(), d.end(), table.vec(j, i).begin());
    }
  });
  return table;
}

namespace {

constexpr char kMagic[8] = {'D', 'T', 'W', 'T', 'B', 'L', '1', '\0'};

}  // namespace

void save_table(const DistanceVectorTable& table, const fs::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write table cache " + file.string());
  const std::uint64_t m = table.samples();
  const std::uint64_t n = table.channels();
  const std::uint64_t flen = table.fingerprint().size();
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&m), sizeof m);
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(&flen), sizeof flen);
  out.write(table.fingerprint().data(), static_cast<std::streamsize>(flen));
  out.write(reinterpret_cast<const char*>(table.data().data()),
            static_cast<std::streamsize>(table.data().size() * sizeof(double)));
  if (!out) throw IoError("write failed for table cache " + file.string());
}

std::optional<DistanceVectorTable> load_table(
    const fs::path& file, const std::string& expected_fingerprint) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open table cache " + file.string());
  char magic[8];
  std::uint64_t m = 0;
  std::uint64_t n = 0;
  std::uint64_t flen = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&m), sizeof m);
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  in.read(reinterpret_cast<char*>(&flen), sizeof flen);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0 || flen > 4096 ||
      m > (1u << 20) || n > (1u << 20)) {
    throw IoError("corrupt table cache " + file.string());
  }
  std::string fingerprint(flen, '\0');
  in.read(fingerprint.data(), static_cast<std::streamsize>(flen));
  if (!expected_fingerprint.empty() && fingerprint != expected_fingerprint) {
    return std::nullopt;
  }
  DistanceVectorTable table(m, n, fingerprint);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      auto d = table.vec(i, j);
      in.read(reinterpret_cast<char*>(d.data()),
              static_cast<std::streamsize>(n * sizeof(double)));
    }
  }
  if (!in || in.peek() != std::char_traits<char>::eof()) {
    throw IoError("truncated or oversized table cache " + file.string());
  }
  table.validate();
  return table;
}

}  // namespace dtwlmnn
