#include "run_config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "dtwlmnn/errors.hpp"
#include "json.hpp"

namespace dtwlmnn::app {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ValidationError("config: " + where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* a) { return key == a; });
    if (!known) throw ValidationError("config: unknown key '" + where + key + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

template <class T>
void read_optional(const json& j, const char* key, std::optional<T>& out) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    out.reset();
  } else {
    out = j.at(key).get<T>();
  }
}

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

void read_dtw(const json& j, DtwConfig& cfg) {
  check_keys(j, "dtw.", {"local_cost", "band_radius", "znormalize"});
  if (j.contains("local_cost")) {
    const auto cost = j.at("local_cost").get<std::string>();
    if (cost == "absolute") {
      cfg.local_cost = LocalCost::absolute;
    } else if (cost == "squared") {
      cfg.local_cost = LocalCost::squared;
    } else {
      throw ValidationError("config: dtw.local_cost must be absolute or squared");
    }
  }
  read_optional(j, "band_radius", cfg.band_radius);
  read(j, "znormalize", cfg.znormalize);
}

void read_lmnn(const json& j, LmnnConfig& cfg) {
  check_keys(j, "lmnn.",
             {"k", "c", "max_iters", "initial_step_rel", "initial_step", "step_growth",
              "step_decay", "tolerance", "patience", "max_rejects", "rank",
              "low_rank_mode", "active_set_refresh"});
  read(j, "k", cfg.k);
  read(j, "c", cfg.c);
  read(j, "max_iters", cfg.max_iters);
  read(j, "initial_step_rel", cfg.initial_step_rel);
  read_optional(j, "initial_step", cfg.initial_step);
  read(j, "step_growth", cfg.step_growth);
  read(j, "step_decay", cfg.step_decay);
  read(j, "tolerance", cfg.tolerance);
  read(j, "patience", cfg.patience);
  read(j, "max_rejects", cfg.max_rejects);
  read_optional(j, "rank", cfg.rank);
  read(j, "active_set_refresh", cfg.active_set_refresh);
  if (j.contains("low_rank_mode")) {
    const auto mode = j.at("low_rank_mode").get<std::string>();
    if (mode == "truncate") {
      cfg.low_rank_mode = LowRankMode::truncate;
    } else if (mode == "direct") {
      cfg.low_rank_mode = LowRankMode::direct;
    } else {
      throw ValidationError("config: lmnn.low_rank_mode must be truncate or direct");
    }
  }
}

void read_regularization(const json& j, RegularizationPolicy& reg) {
  check_keys(j, "regularization.", {"enabled", "policy", "value"});
  read(j, "enabled", reg.enabled);
  std::string policy = "threshold";
  double value = reg.dim.value;
  read(j, "policy", policy);
  read(j, "value", value);
  if (policy == "threshold") {
    reg.dim = DimPolicy::threshold(value);
  } else if (policy == "energy") {
    reg.dim = DimPolicy::energy(value);
  } else if (policy == "manual") {
    if (value < 1 || value != static_cast<double>(static_cast<std::size_t>(value))) {
      throw ValidationError("config: manual effective dimension must be a positive integer");
    }
    reg.dim = DimPolicy::manual(static_cast<std::size_t>(value));
  } else {
    throw ValidationError("config: regularization.policy must be threshold, energy or manual");
  }
}

void read_synth(const json& j, SyntheticSpec& spec) {
  check_keys(j, "synth.",
             {"samples", "channels", "classes", "min_length", "max_length",
              "informative", "class_offsets", "offset_scale", "noise_sigma",
              "nuisance_sigma", "duplicates"});
  read(j, "samples", spec.samples);
  read(j, "channels", spec.channels);
  read(j, "classes", spec.classes);
  read(j, "min_length", spec.min_length);
  read(j, "max_length", spec.max_length);
  read(j, "informative", spec.informative);
  read(j, "class_offsets", spec.class_offsets);
  read(j, "offset_scale", spec.offset_scale);
  read(j, "noise_sigma", spec.noise_sigma);
  read(j, "nuisance_sigma", spec.nuisance_sigma);
  if (j.contains("duplicates")) {
    spec.duplicates.clear();
    for (const auto& [target, source] : j.at("duplicates").items()) {
      std::size_t t = 0;
      try {
        t = std::stoul(target);
      } catch (const std::exception&) {
        throw ValidationError("config: synth.duplicates keys must be channel indices");
      }
      spec.duplicates[t] = source.get<std::size_t>();
    }
  }
}

}  // namespace

void RunConfig::apply_seed() {
  lmnn.seed = seed;
  synth.seed = seed;
}

void RunConfig::validate() const {
  if (methods.empty()) throw ValidationError("config: method list is empty");
  for (const auto& m : methods) {
    if (std::find(kAllMethods.begin(), kAllMethods.end(), m) == kAllMethods.end()) {
      throw ValidationError("config: unknown method '" + m + "'");
    }
  }
  if (folds < 2) throw ValidationError("config: cv.folds must be >= 2");
  if (repetitions < 1) throw ValidationError("config: cv.repetitions must be >= 1");
  if (knn_k < 1) throw ValidationError("config: knn_k must be >= 1");
  lmnn.validate();
}

std::string RunConfig::key() const {
  std::ostringstream out;
  out << "seed=" << seed << ";dtw{" << dtw.key() << "};lmnn{" << lmnn.key()
      << "};reg=" << (regularization.enabled ? regularization.dim.key() : "off")
      << ";folds=" << folds << ";reps=" << repetitions
      << ";pairing=" << (pairing == PairingUnit::repetition ? "repetition" : "fold")
      << ";knn_k=" << knn_k << ";pca=" << pca_components << ";methods=";
  for (const auto& m : methods) out << m << ",";
  return out.str();
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  RunConfig cfg;
  try {
    check_keys(j, "",
               {"corpus", "out", "cache", "seed", "threads", "methods", "dtw", "lmnn",
                "regularization", "cv", "knn_k", "pca_components", "synth"});
    if (j.contains("corpus")) cfg.corpus = resolve(base_dir, j.at("corpus").get<std::string>());
    if (j.contains("out")) cfg.out = resolve(base_dir, j.at("out").get<std::string>());
    if (j.contains("cache") && !j.at("cache").is_null()) {
      cfg.cache = resolve(base_dir, j.at("cache").get<std::string>());
    }
    read(j, "seed", cfg.seed);
    read(j, "threads", cfg.threads);
    read(j, "methods", cfg.methods);
    read(j, "knn_k", cfg.knn_k);
    read(j, "pca_components", cfg.pca_components);
    if (j.contains("dtw")) read_dtw(j.at("dtw"), cfg.dtw);
    if (j.contains("lmnn")) read_lmnn(j.at("lmnn"), cfg.lmnn);
    if (j.contains("regularization")) {
      read_regularization(j.at("regularization"), cfg.regularization);
    }
    if (j.contains("cv")) {
      const json& cv = j.at("cv");
      check_keys(cv, "cv.", {"folds", "repetitions", "pairing"});
      read(cv, "folds", cfg.folds);
      read(cv, "repetitions", cfg.repetitions);
      if (cv.contains("pairing")) {
        const auto p = cv.at("pairing").get<std::string>();
        if (p == "repetition") {
          cfg.pairing = PairingUnit::repetition;
        } else if (p == "fold") {
          cfg.pairing = PairingUnit::fold;
        } else {
          throw ValidationError("config: cv.pairing must be repetition or fold");
        }
      }
    }
    if (j.contains("synth")) read_synth(j.at("synth"), cfg.synth);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  cfg.apply_seed();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open config " + file.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), file.parent_path());
}

}  // namespace dtwlmnn::app
