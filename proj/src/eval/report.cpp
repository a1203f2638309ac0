#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "dtwlmnn/eval.hpp"
#include "dtwlmnn/nullspace.hpp"
#include "json.hpp"

namespace dtwlmnn {

using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string header_lines(const std::string& header) {
  if (header.empty()) return {};
  std::string out;
  std::istringstream in(header);
  for (std::string line; std::getline(in, line);) out += "# " + line + "\n";
  return out;
}

std::string provenance(const EvalReport& report) {
  return "fingerprint=" + report.fingerprint + " seed=" + std::to_string(report.seed);
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(); }

const MethodResult* find_method(const EvalReport& report, const std::string& name) {
  for (const auto& m : report.methods) {
    if (m.method == name) return &m;
  }
  return nullptr;
}

}  // namespace

void add_pvalues(EvalReport& report, const std::string& reference) {
  const MethodResult* ref = find_method(report, reference);
  if (ref == nullptr) return;
  const auto a = ref->units(report.pairing);
  for (const auto& m : report.methods) {
    if (m.method == reference) continue;
    report.pvalues.push_back({reference, m.method,
                              paired_ttest(a, m.units(report.pairing))});
  }
}

std::string report_to_json(const EvalReport& report) {
  json j;
  j["fingerprint"] = report.fingerprint;
  j["seed"] = report.seed;
  j["pairing"] = report.pairing == PairingUnit::repetition ? "repetition" : "fold";
  json methods = json::array();
  for (const auto& m : report.methods) {
    json e;
    e["method"] = m.method;
    e["mean"] = m.mean;
    e["variance"] = m.variance;
    e["repetition_accuracy"] = m.repetition_accuracy;
    e["fold_accuracy"] = m.fold_accuracy;
    if (!m.effective_dims.empty()) e["effective_dims"] = m.effective_dims;
    if (!m.profiles.empty()) {
      json profiles = json::array();
      for (const auto& p : m.profiles) profiles.push_back(p.values);
      e["profiles"] = profiles;
      e["profile_variance"] = profile_variance(m.profiles);
    }
    e["max_iter_warnings"] = m.max_iter_warnings;
    methods.push_back(e);
  }
  j["methods"] = methods;
  json pvalues = json::array();
  for (const auto& p : report.pvalues) {
    pvalues.push_back({{"a", p.a},
                       {"b", p.b},
                       {"t", finite_or_null(p.test.t)},
                       {"df", p.test.df},
                       {"p", p.test.p},
                       {"degenerate", p.test.degenerate}});
  }
  j["pvalues"] = pvalues;
  if (report.sweep) {
    json points = json::array();
    for (const auto& pt : report.sweep->points) {
      points.push_back({{"features", pt.features},
                        {"accuracy_mean", pt.accuracy_mean},
                        {"accuracy_var", pt.accuracy_var}});
    }
    j["sweep"] = {{"order", report.sweep->order},
                  {"points", points},
                  {"best_features", report.sweep->best_features},
                  {"best_accuracy", report.sweep->best_accuracy}};
  }
  return j.dump(2) + "\n";
}

std::string report_to_csv(const EvalReport& report) {
  std::string out = header_lines(provenance(report));
  out += "method,repetition,fold,accuracy\n";
  for (const auto& m : report.methods) {
    for (std::size_t r = 0; r < m.fold_accuracy.size(); ++r) {
      for (std::size_t f = 0; f < m.fold_accuracy[r].size(); ++f) {
        out += m.method + "," + std::to_string(r) + "," + std::to_string(f) + "," +
               num(m.fold_accuracy[r][f]) + "\n";
      }
    }
  }
  return out;
}

std::string sweep_to_csv(const SweepCurve& curve, const std::string& header) {
  std::string out = header_lines(header);
  out += "f,accuracy_mean,accuracy_var\n";
  for (const auto& pt : curve.points) {
    out += std::to_string(pt.features) + "," + num(pt.accuracy_mean) + "," +
           num(pt.accuracy_var) + "\n";
  }
  return out;
}

std::string profiles_to_csv(std::span<const RelevanceProfile> profiles,
                            std::span<const std::string> channel_names,
                            const std::string& header) {
  std::string out = header_lines(header);
  out += "channel_name,mean,variance\n";
  if (profiles.empty()) return out;
  const std::size_t n = profiles.front().values.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::vector<double> column;
    column.reserve(profiles.size());
    for (const auto& p : profiles) column.push_back(p.values.at(c));
    const std::string name =
        c < channel_names.size() ? channel_names[c] : "ch" + std::to_string(c);
    out += name + "," + num(mean_of(column)) + "," + num(variance_of(column)) + "\n";
  }
  return out;
}

std::string format_summary(const EvalReport& report, const std::string& reference) {
  const bool with_p = report.methods.size() >= 2;
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-16s %-20s", "method", "accuracy (var)");
  out += line;
  if (with_p) out += " p vs " + reference;
  out += "\n";
  for (const auto& m : report.methods) {
    char acc[64];
    std::snprintf(acc, sizeof acc, "%.2f (%.2f)", m.mean, m.variance);
    std::snprintf(line, sizeof line, "%-16s %-20s", m.method.c_str(), acc);
    out += line;
    if (with_p) {
      std::string cell = "--";
      for (const auto& p : report.pvalues) {
        if (p.a == reference && p.b == m.method) {
          char pv[64];
          std::snprintf(pv, sizeof pv, "%.4g%s", p.test.p,
                        p.test.degenerate ? " (degenerate)" : "");
          cell = pv;
        }
      }
      out += " " + cell;
    }
    out += "\n";
  }
  return out;
}

}  // namespace dtwlmnn
