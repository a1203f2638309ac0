#include "commands.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "CLI11.hpp"
#include "dtwlmnn/errors.hpp"
#include "dtwlmnn/fingerprint.hpp"
#include "dtwlmnn/nullspace.hpp"
#include "dtwlmnn/parallel.hpp"
#include "dtwlmnn/synthetic.hpp"

namespace dtwlmnn::app {

namespace {

const std::string kReference = "dtw-lmnn";

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void write_text(const std::filesystem::path& file, const std::string& text) {
  ensure_dir(file.parent_path().empty() ? "." : file.parent_path());
  std::ofstream out(file, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + file.string());
}

Corpus load_configured_corpus(const RunConfig& cfg) {
  if (cfg.corpus.empty()) throw ValidationError("config: no corpus manifest given");
  return load_corpus(cfg.corpus);
}

std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string provenance(const std::string& fp, std::uint64_t seed) {
  return "fingerprint=" + fp + " seed=" + std::to_string(seed);
}

CvPlan plan_for(const RunConfig& cfg, const Corpus& corpus) {
  return make_cv_plan(corpus.labels(), cfg.folds, cfg.repetitions, cfg.seed);
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const TrainingError*>(&e) != nullptr) return kTraining;
  if (dynamic_cast<const IoError*>(&e) != nullptr) return kIo;
  return kValidation;
}

std::string run_fingerprint(const RunConfig& cfg, const std::string& table_fp) {
  return Fnv1a().text("dtw-lmnn-run-v1").text(table_fp).text(cfg.key()).hex();
}

DistanceVectorTable cmd_table(const RunConfig& cfg, const Corpus& corpus,
                              std::ostream& log) {
  const std::string fp = table_fingerprint(corpus, cfg.dtw);
  const auto path = cfg.cache_path();
  if (std::filesystem::exists(path)) {
    if (auto cached = load_table(path, fp)) {
      log << "table: reusing cache " << path.string() << " (fingerprint " << fp << ")\n";
      return std::move(*cached);
    }
    log << "table: cache " << path.string() << " is stale, recomputing\n";
  } else {
    log << "table: computing " << corpus.size() << "x" << corpus.size() << "x"
        << corpus.channels() << " distance vectors\n";
  }
  DistanceVectorTable table = build_distance_table(corpus, cfg.dtw);
  ensure_dir(path.parent_path().empty() ? "." : path.parent_path());
  save_table(table, path);
  log << "table: wrote " << path.string() << " (fingerprint " << fp << ")\n";
  return table;
}

MetricModel cmd_train(const RunConfig& cfg, std::ostream& log) {
  const Corpus corpus = load_configured_corpus(cfg);
  const DistanceVectorTable table = cmd_table(cfg, corpus, log);
  const std::string run_fp = run_fingerprint(cfg, table.fingerprint());
  const std::string header = provenance(run_fp, cfg.seed);

  TrainResult trained = train(table, corpus.labels(), cfg.lmnn);
  MetricModel model = std::move(trained.model);
  ensure_dir(cfg.out);
  if (cfg.regularization.enabled) {
    const std::vector<std::size_t> all = all_indices(corpus.size());
    const CorrelationSpectrum spectrum = correlation_spectrum(table, all);
    const std::size_t dim = choose_effective_dim(spectrum, cfg.regularization.dim);
    model = regularize(model, spectrum, dim);
    write_spectrum_csv(spectrum, cfg.out / "spectrum.csv", header);
    log << "train: regularized with effective dimension " << dim << "\n";
  }
  model.channel_names = corpus.channel_names();
  model.fingerprint = table.fingerprint() + ":" + run_fp;
  model.seed = cfg.seed;
  save_model(model, cfg.out / "model.json");
  write_trace_csv(trained.trace, cfg.out / "trace.csv", header);
  if (trained.trace.hit_max_iters) {
    log << "train: warning: stopped at max_iters=" << cfg.lmnn.max_iters << "\n";
  }
  log << "train: wrote " << (cfg.out / "model.json").string() << " (rank "
      << model.rank() << ")\n";
  return model;
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  const Corpus corpus = load_configured_corpus(cfg);
  const DistanceVectorTable table = cmd_table(cfg, corpus, log);
  const CvPlan plan = plan_for(cfg, corpus);

  EvalReport report;
  report.pairing = cfg.pairing;
  report.seed = cfg.seed;
  report.fingerprint = run_fingerprint(cfg, table.fingerprint());
  int status = kOk;
  for (const auto& method : cfg.methods) {
    try {
      if (method == "dtw-lmnn") {
        report.methods.push_back(evaluate_dtw_lmnn(table, corpus.labels(), cfg.lmnn, plan,
                                                   cfg.regularization, cfg.knn_k));
      } else if (method == "dtw-knn") {
        report.methods.push_back(evaluate_dtw_knn(table, corpus.labels(), plan, cfg.knn_k));
      } else if (method == "euclidean-lmnn") {
        report.methods.push_back(evaluate_euclidean_lmnn(corpus, cfg.lmnn, plan,
                                                         cfg.regularization, cfg.knn_k));
      } else if (method == "pca-dtw-knn") {
        report.methods.push_back(
            evaluate_pca_dtw_knn(corpus, cfg.dtw, plan, cfg.pca_components, cfg.knn_k));
      }
      const MethodResult& r = report.methods.back();
      log << "evaluate: " << method << " done";
      if (r.max_iter_warnings > 0) {
        log << " (" << r.max_iter_warnings << " folds hit max_iters)";
      }
      log << "\n";
    } catch (const std::exception& e) {
      log << "evaluate: " << method << " failed: " << e.what() << "\n";
      if (status == kOk) status = exit_code_for(e);
    }
  }
  add_pvalues(report, kReference);

  const std::string header = provenance(report.fingerprint, report.seed);
  write_text(cfg.out / "report.json", report_to_json(report));
  write_text(cfg.out / "report.csv", report_to_csv(report));
  const std::string summary = format_summary(report, kReference);
  write_text(cfg.out / "summary.txt", "# " + header + "\n" + summary);
  for (const auto& m : report.methods) {
    if (m.method == kReference && !m.profiles.empty()) {
      write_text(cfg.out / "profiles.csv",
                 profiles_to_csv(m.profiles, corpus.channel_names(),
                                 header + " total_variance=" +
                                     num(profile_variance(m.profiles))));
    }
  }
  out << summary;
  return status;
}

void cmd_relevance(const RunConfig& cfg, const std::filesystem::path& model_file,
                   std::ostream& out, std::ostream& log) {
  const MetricModel model = load_model(model_file);
  const Corpus corpus = load_configured_corpus(cfg);
  const std::string table_fp = table_fingerprint(corpus, cfg.dtw);
  const std::string model_table_fp = model.fingerprint.substr(0, model.fingerprint.find(':'));
  if (model_table_fp != table_fp) {
    throw ValidationError("relevance: model fingerprint " + model.fingerprint +
                          " does not match corpus/table fingerprint " + table_fp);
  }
  const DistanceVectorTable table = cmd_table(cfg, corpus, log);
  const CvPlan plan = plan_for(cfg, corpus);
  const std::string run_fp = run_fingerprint(cfg, table.fingerprint());
  std::string header = provenance(run_fp, cfg.seed) + " model=" + model.fingerprint +
                       " regularized=" + (model.regularized ? "1" : "0");
  if (model.effective_dim) header += " effective_dim=" + std::to_string(*model.effective_dim);

  const MethodResult cv = evaluate_dtw_lmnn(table, corpus.labels(), cfg.lmnn, plan,
                                            cfg.regularization, cfg.knn_k);
  const double total = profile_variance(cv.profiles);
  write_text(cfg.out / "relevance.csv",
             profiles_to_csv(cv.profiles, corpus.channel_names(),
                             header + " total_variance=" + num(total)));

  std::ostringstream folds;
  folds << "# " << header << "\nrepetition,fold";
  for (const auto& name : corpus.channel_names()) folds << "," << name;
  folds << "\n";
  folds.precision(17);
  for (std::size_t u = 0; u < cv.profiles.size(); ++u) {
    folds << u / plan.folds() << "," << u % plan.folds();
    for (double v : cv.profiles[u].values) folds << "," << v;
    folds << "\n";
  }
  write_text(cfg.out / "fold_profiles.csv", folds.str());

  const RelevanceProfile own = relevance_profile(model, true);
  std::ostringstream prof;
  prof.precision(17);
  prof << "# " << header << "\nchannel_name,relevance\n";
  for (std::size_t c = 0; c < own.values.size(); ++c) {
    prof << corpus.channel_names()[c] << "," << own.values[c] << "\n";
  }
  write_text(cfg.out / "model_profile.csv", prof.str());

  const SweepCurve curve = feature_selection_sweep(table, corpus.labels(), model, plan,
                                                   cfg.knn_k);
  write_text(cfg.out / "sweep.csv", sweep_to_csv(curve, header));
  out << "total profile variance: " << total << "\n"
      << "sweep: best accuracy " << curve.best_accuracy << " with "
      << curve.best_features << " of " << corpus.channels() << " channels\n";
}

SweepCurve cmd_sweep(const RunConfig& cfg, bool retrain, std::ostream& out,
                     std::ostream& log) {
  const Corpus corpus = load_configured_corpus(cfg);
  const DistanceVectorTable table = cmd_table(cfg, corpus, log);
  const CvPlan plan = plan_for(cfg, corpus);
  const std::string header =
      provenance(run_fingerprint(cfg, table.fingerprint()), cfg.seed);
  const MethodResult cv = evaluate_dtw_lmnn(table, corpus.labels(), cfg.lmnn, plan,
                                            cfg.regularization, cfg.knn_k);
  SweepCurve curve =
      feature_selection_sweep(table, corpus.labels(), cv.models, plan, cfg.knn_k);
  if (retrain) {
    curve = feature_selection_sweep_retrain(table, corpus.labels(), cfg.lmnn, plan,
                                            cfg.regularization, curve.order, cfg.knn_k);
  }
  write_text(cfg.out / "sweep.csv", sweep_to_csv(curve, header));
  out << "sweep: best accuracy " << curve.best_accuracy << " with "
      << curve.best_features << " of " << corpus.channels() << " channels; order";
  for (std::size_t c : curve.order) out << " " << corpus.channel_names()[c];
  out << "\n";
  return curve;
}

void cmd_synth(const RunConfig& cfg, std::ostream& log) {
  const Corpus corpus = generate_synthetic(cfg.synth);
  write_corpus(corpus, cfg.out);
  log << "synth: wrote " << corpus.size() << " sequences to " << cfg.out.string()
      << " (digest " << corpus.digest() << ")\n";
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Metric learning over component-wise DTW distances"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> rank;
  bool regularize = false;
  std::optional<std::size_t> effective_dim;
  std::string methods;
  std::optional<unsigned> threads;
  std::string out_dir;
  std::string corpus_path;
  std::string model_path;

  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--seed", seed, "Seed for CV plan, LMNN and synthetic data");
  app.add_option("--rank", rank, "Rows of L (low-rank LMNN)");
  app.add_flag("--regularize", regularize, "Apply null-space regularization");
  app.add_option("--effective-dim", effective_dim,
                 "Fixed effective dimension (implies --regularize)");
  app.add_option("--methods", methods, "Comma-separated methods to evaluate");
  app.add_option("--threads", threads, "Worker cap (0 = all cores)");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--corpus", corpus_path, "Corpus manifest (overrides config)");

  auto* table_cmd = app.add_subcommand("table", "Compute or reuse the distance table");
  auto* train_cmd = app.add_subcommand("train", "Train a metric on all samples");
  auto* eval_cmd = app.add_subcommand("evaluate", "Cross-validate the configured methods");
  auto* rel_cmd = app.add_subcommand("relevance", "Relevance profiles and sweep for a model");
  rel_cmd->add_option("--model", model_path, "Model JSON")->required();
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic corpus");
  auto* sweep_cmd = app.add_subcommand("sweep", "Feature-selection sweep over CV models");
  bool retrain = false;
  sweep_cmd->add_flag("--retrain", retrain, "Retrain LMNN for every channel subset");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream help_out;
    std::ostringstream help_err;
    const int code = app.exit(e, help_out, help_err);
    out << help_out.str();
    err << help_err.str();
    return code == 0 ? kOk : kValidation;
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (rank) cfg.lmnn.rank = *rank;
    if (regularize) cfg.regularization.enabled = true;
    if (effective_dim) {
      cfg.regularization.enabled = true;
      cfg.regularization.dim = DimPolicy::manual(*effective_dim);
    }
    if (!methods.empty()) {
      cfg.methods.clear();
      std::istringstream list(methods);
      for (std::string m; std::getline(list, m, ',');) {
        if (!m.empty()) cfg.methods.push_back(m);
      }
    }
    if (threads) cfg.threads = *threads;
    if (!out_dir.empty()) cfg.out = out_dir;
    if (!corpus_path.empty()) cfg.corpus = corpus_path;
    cfg.apply_seed();
    cfg.validate();
    set_max_threads(cfg.threads);

    if (*table_cmd) {
      const Corpus corpus = load_configured_corpus(cfg);
      cmd_table(cfg, corpus, err);
    } else if (*train_cmd) {
      cmd_train(cfg, err);
    } else if (*eval_cmd) {
      return cmd_evaluate(cfg, out, err);
    } else if (*rel_cmd) {
      cmd_relevance(cfg, model_path, out, err);
    } else if (*synth_cmd) {
      cmd_synth(cfg, err);
    } else if (*sweep_cmd) {
      cmd_sweep(cfg, retrain, out, err);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kOk;
}

}  // namespace dtwlmnn::app
