#include "dtwlmnn/quadform.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dtwlmnn/errors.hpp"
#include "dtwlmnn/kernels.hpp"
#include "json.hpp"

namespace dtwlmnn {

using nlohmann::json;

bool MetricModel::operator==(const MetricModel& other) const {
  return L.rows() == other.L.rows() && L.cols() == other.L.cols() &&
         L == other.L && regularized == other.regularized &&
         effective_dim == other.effective_dim &&
         channel_names == other.channel_names &&
         fingerprint == other.fingerprint && seed == other.seed;
}

double pair_distance(const MetricModel& model, std::span<const double> d) {
  if (d.size() != model.channels()) {
    throw ValidationError("pair_distance: vector length " +
                          std::to_string(d.size()) + " != " +
                          std::to_string(model.channels()));
  }
  const Eigen::Map<const Eigen::VectorXd> v(d.data(),
                                            static_cast<Eigen::Index>(d.size()));
  return (model.L * v).squaredNorm();
}

double quadform(const Eigen::MatrixXd& m, std::span<const double> d) {
  // M is symmetric, so Eigen's column-major storage reads as row-major.
  return kernels::active().quadform(m.data(), d.data(), d.size());
}

RelevanceProfile relevance_profile(const MetricModel& model, bool normalize) {
  RelevanceProfile profile;
  profile.normalized = normalize;
  profile.values.resize(model.channels());
  for (Eigen::Index k = 0; k < model.L.cols(); ++k) {
    profile.values[static_cast<std::size_t>(k)] = model.L.col(k).squaredNorm();
  }
  if (normalize) {
    const double peak =
        profile.values.empty()
            ? 0.0
            : *std::max_element(profile.values.begin(), profile.values.end());
    if (peak > 0.0) {
      for (auto& v : profile.values) v /= peak;
    }
  }
  return profile;
}

SymmetricEigen sorted_eigen(const Eigen::MatrixXd& s) {
  if (s.rows() != s.cols()) throw ValidationError("eigen: matrix not square");
  if (!s.allFinite()) throw ValidationError("eigen: non-finite input");
  const Eigen::MatrixXd sym = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw ValidationError("eigen: decomposition failed");
  }
  const Eigen::Index n = s.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    return solver.eigenvalues()(a) > solver.eigenvalues()(b);
  });
  SymmetricEigen out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const Eigen::Index src = order[static_cast<std::size_t>(c)];
    out.values(c) = solver.eigenvalues()(src);
    Eigen::VectorXd v = solver.eigenvectors().col(src);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    out.vectors.col(c) = v;
  }
  return out;
}

Eigen::MatrixXd psd_project(const Eigen::MatrixXd& s) {
  const SymmetricEigen eig = sorted_eigen(s);
  const Eigen::VectorXd clamped = eig.values.cwiseMax(0.0);
  Eigen::MatrixXd out =
      eig.vectors * clamped.asDiagonal() * eig.vectors.transpose();
  return 0.5 * (out + out.transpose());
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
  const SymmetricEigen eig = sorted_eigen(m);
  return eig.values.size() == 0 ? 0.0 : eig.values(eig.values.size() - 1);
}

MetricModel factor_L(const Eigen::MatrixXd& m, std::optional<std::size_t> rank) {
  const SymmetricEigen eig = sorted_eigen(m);
  const auto n = static_cast<std::size_t>(m.rows());
  const double tol = 1e-8 * m.norm();
  if (n > 0 && eig.values(eig.values.size() - 1) < -tol) {
    throw ValidationError("factor_L: matrix is not PSD (eigenvalue " +
                          std::to_string(eig.values(eig.values.size() - 1)) +
                          ")");
  }
  if (rank && (*rank == 0 || *rank > n)) {
    throw ValidationError("factor_L: rank " + std::to_string(*rank) + " outside 1.." +
                          std::to_string(n));
  }
  const std::size_t rows = rank.value_or(n);
  MetricModel model;
  model.L.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < rows; ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    model.L.row(ri) = std::sqrt(std::max(eig.values(ri), 0.0)) *
                      eig.vectors.col(ri).transpose();
  }
  return model;
}

std::string model_to_json(const MetricModel& model) {
  json j;
  j["channel_names"] = model.channel_names;
  j["rows"] = model.L.rows();
  j["cols"] = model.L.cols();
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(model.L.size()));
  for (Eigen::Index r = 0; r < model.L.rows(); ++r) {
    for (Eigen::Index c = 0; c < model.L.cols(); ++c) flat.push_back(model.L(r, c));
  }
  j["L"] = flat;
  j["regularized"] = model.regularized;
  j["effective_dim"] = model.effective_dim ? json(*model.effective_dim) : json();
  j["fingerprint"] = model.fingerprint;
  j["seed"] = model.seed;
  return j.dump(2) + "\n";
}

MetricModel model_from_json(const std::string& text) {
  MetricModel model;
  try {
    const json j = json::parse(text);
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto flat = j.at("L").get<std::vector<double>>();
    if (rows < 1 || cols < 1 || flat.size() != static_cast<std::size_t>(rows * cols)) {
      throw ValidationError("model: L has wrong size");
    }
    model.L.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        model.L(r, c) = flat[static_cast<std::size_t>(r * cols + c)];
      }
    }
    model.channel_names = j.at("channel_names").get<std::vector<std::string>>();
    if (model.channel_names.size() != static_cast<std::size_t>(cols)) {
      throw ValidationError("model: channel_names length != cols");
    }
    model.regularized = j.at("regularized").get<bool>();
    if (j.contains("effective_dim") && !j["effective_dim"].is_null()) {
      model.effective_dim = j["effective_dim"].get<std::size_t>();
    }
    model.fingerprint = j.value("fingerprint", std::string());
    model.seed = j.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw ValidationError(std::string("model: ") + e.what());
  }
  if (!model.L.allFinite()) throw ValidationError("model: non-finite L");
  return model;
}

void save_model(const MetricModel& model, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write model " + file.string());
  out << model_to_json(model);
  if (!out) throw IoError("write failed for model " + file.string());
}

MetricModel load_model(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open model " + file.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return model_from_json(buffer.str());
}

}  // namespace dtwlmnn
