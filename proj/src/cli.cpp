#include "genmil/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "genmil/eval.hpp"
#include "genmil/io.hpp"
#include "genmil/model_io.hpp"

namespace genmil {

namespace {

struct DataFlags {
  std::string path;
  std::string format = "csv";
  int classes = 0;

  void add(CLI::App& cmd, bool required = true) {
    auto* opt = cmd.add_option("--data", path, "Bag CSV (or MUSK1 clean1 file with --format musk1)");
    if (required) opt->required();
    cmd.add_option("--format", format, "Input layout")->check(CLI::IsMember({"csv", "musk1"}));
    cmd.add_option("--classes", classes, "Number of classes t (default: largest label, at least 2)");
  }

  Dataset load() const {
    if (format == "musk1") return load_musk1(path);
    return load_bag_csv(path, classes > 0 ? std::optional<int>(classes) : std::nullopt);
  }
};

struct ModelFlags {
  std::string model = "bif";
  std::string density = "gauss-diag";
  std::string feature_density = "kde";
  std::string classifier = "lr";
  int max_iter = 100;
  double pca = 0.0;
  std::string pca_measure = "singular-value";

  void add(CLI::App& cmd) {
    cmd.add_option("--model", model, "Model structure")->check(CLI::IsMember({"bif", "fib"}));
    cmd.add_option("--density", density, "BIF class-conditional density")
        ->check(CLI::IsMember({"gauss", "gauss-diag", "kde", "copula", "copula-diag"}));
    cmd.add_option("--feature-density", feature_density, "FIB feature density P(F)")
        ->check(CLI::IsMember({"gauss", "gauss-diag", "kde", "copula", "copula-diag"}));
    cmd.add_option("--classifier", classifier, "FIB instance classifier")
        ->check(CLI::IsMember({"lr", "knn", "qda", "dd"}));
    cmd.add_option("--max-iter", max_iter, "EM iteration cap")->check(CLI::PositiveNumber);
    cmd.add_option("--pca", pca, "Retained fraction for PCA (0 disables)")->check(CLI::Range(0.0, 1.0));
    cmd.add_option("--pca-measure", pca_measure, "How the retained fraction is measured")
        ->check(CLI::IsMember({"variance", "singular-value"}));
  }

  EmConfig em() const {
    EmConfig c;
    c.model = parse_model_kind(model);
    c.density = parse_density_kind(density);
    c.feature_density = parse_density_kind(feature_density);
    c.classifier = parse_classifier_kind(classifier);
    c.max_iterations = max_iter;
    return c;
  }

  std::optional<double> pca_threshold() const {
    return pca > 0.0 ? std::optional<double>(pca) : std::nullopt;
  }
};

void check_model_supported(const EmConfig& em, const Dataset& data) {
  if (em.model == ModelKind::kFib && em.classifier == ClassifierKind::kDiverseDensity &&
      data.domain().size() != 2)
    throw Error(ErrorKind::kUnsupportedDomain,
                "diverse density needs t=2, data has t=" + std::to_string(data.domain().size()));
}

// Writes to `path` atomically, or to `out` when no path is given.
void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty())
    out << text;
  else
    write_file_atomic(path, text);
}

int default_threads() { return std::max(1, static_cast<int>(std::thread::hardware_concurrency())); }

// ------------------------------------------------------------------ train

struct TrainCmd {
  DataFlags data;
  ModelFlags model;
  std::string out;
  std::string log;
  int threads = 1;

  void run(std::ostream& stdout_) const {
    const Dataset ds = data.load();
    EmConfig em = model.em();
    check_model_supported(em, ds);
    em.threads = threads;

    std::optional<PcaTransform> pca;
    std::optional<Dataset> projected;
    if (auto th = model.pca_threshold()) {
      pca = fit_pca(ds.pooled_instances(), *th, parse_spectrum_measure(model.pca_measure));
      projected = pca->apply(ds);
    }
    std::ostringstream log_text;
    em.on_iteration = [&](const IterationEvent& e) {
      log_text << "iteration=" << e.iteration << " labels_changed=" << e.labels_changed
               << " loglik=" << format_double(e.loglik) << " objective=" << format_double(e.objective)
               << '\n';
    };
    EmResult result = train(projected ? *projected : ds, em);
    log_text << "converged=" << (result.converged ? "true" : "false")
             << " iterations=" << result.iteration_count << '\n';

    SavedModel saved{.model = std::move(result.model),
                     .pca = std::move(pca),
                     .density = model.density,
                     .feature_density = model.feature_density,
                     .classifier = model.classifier,
                     .iterations = result.iteration_count,
                     .converged = result.converged};
    save_model(saved, out);
    const std::string log_path = log.empty() ? out + ".log" : log;
    write_file_atomic(log_path, log_text.str());
    stdout_ << "model=" << out << "\nlog=" << log_path << "\niterations=" << result.iteration_count
            << "\nconverged=" << (result.converged ? "true" : "false") << '\n';
  }
};

// ------------------------------------------------------------------ infer

struct InferCmd {
  std::string model;
  DataFlags data;
  std::string out;

  void run(std::ostream& stdout_) const {
    const SavedModel saved = load_model(model);
    const int t = model_classes(saved.model);
    DataFlags df = data;
    if (df.classes == 0 && df.format == "csv") df.classes = t;
    const Dataset ds = df.load();
    if (ds.dim() != saved.input_dim())
      throw Error(ErrorKind::kDimensionMismatch,
                  "model expects " + std::to_string(saved.input_dim()) + " features, data has " +
                      std::to_string(ds.dim()));
    if (ds.domain().size() != t)
      throw Error(ErrorKind::kDimensionMismatch,
                  "model has t=" + std::to_string(t) + ", data has t=" + std::to_string(ds.domain().size()));

    std::ostringstream os;
    os << "bag_id,predicted_bag_label,instance,instance_label";
    for (int b = 1; b <= t; ++b) os << ",log_score_" << b;
    os << '\n';
    for (const auto& bag : ds.bags()) {
      const MatrixXd x = saved.pca ? saved.pca->apply(bag.instances) : bag.instances;
      const InferenceResult r = infer(saved.model, x);
      for (std::size_t j = 0; j < r.instance_labels.size(); ++j) {
        os << bag.id << ',' << r.bag_label << ',' << j << ',' << r.instance_labels[j];
        for (Eigen::Index b = 0; b < r.log_scores.size(); ++b) os << ',' << format_double(r.log_scores[b]);
        os << '\n';
      }
    }
    emit(out, os.str(), stdout_);
  }
};

// ------------------------------------------------------------------- eval

struct EvalCmd {
  DataFlags data;
  ModelFlags model;
  bool baseline = false;
  int threads = 0;
  std::string out;

  void run(std::ostream& stdout_) const {
    const Dataset ds = data.load();
    EvalConfig cfg;
    cfg.em = model.em();
    check_model_supported(cfg.em, ds);
    cfg.pca_threshold = model.pca_threshold();
    cfg.pca_measure = parse_spectrum_measure(model.pca_measure);
    cfg.threads = threads > 0 ? threads : default_threads();

    std::ostringstream os;
    write_report(leave_one_bag_out(ds, cfg), os);
    if (baseline) {
      os << '\n';
      write_report(non_mil_baseline(ds, cfg), os);
    }
    emit(out, os.str(), stdout_);
  }
};

// --------------------------------------------------------------- simulate

struct SimulateCmd {
  std::string config;
  std::string model;
  int bags = 80;
  int min_size = 15;
  int max_size = 25;
  std::string out;

  void run(std::ostream& stdout_, std::optional<std::uint64_t> seed) const {
    Dataset ds = [&] {
      if (!model.empty()) {
        const SavedModel saved = load_model(model);
        const auto* bif = std::get_if<BifParams>(&saved.model);
        if (!bif) throw Error(ErrorKind::kConfig, "simulate --model needs a BIF model");
        if (saved.pca) throw Error(ErrorKind::kConfig, "simulate --model does not support PCA models");
        if (min_size < 1 || min_size > max_size)
          throw Error(ErrorKind::kConfig, "bag size range must satisfy 1 <= min <= max");
        return bif_sample(*bif, bags, uniform_bag_size(min_size, max_size), seed.value_or(1));
      }
      GeneratorConfig gc = config.empty() ? default_synthetic_config() : load_generator_config(config);
      if (seed) gc.seed = *seed;
      return generate_synthetic(gc);
    }();
    std::ostringstream os;
    write_bag_csv(ds, os);
    emit(out, os.str(), stdout_);
  }
};

// -------------------------------------------------------------- benchmark

struct BenchmarkCmd {
  std::string suite = "musk1";
  std::string data_dir = "data/musk1";
  std::string config;
  double pca = -1.0;
  std::string pca_measure = "singular-value";
  std::vector<std::string> only;
  int threads = 0;
  std::string out;

  struct Row {
    std::string name;
    std::string status;  // "ok", "not implemented", "not applicable ..."
    std::optional<EvalReport> report;
  };

  void run(std::ostream& stdout_, std::optional<std::uint64_t> seed) const {
    static const std::vector<std::string> kRows = {
        "BIF/gauss", "BIF/gauss-diag", "BIF/kde", "BIF/copula", "BIF/copula-diag", "FIB/lr",
        "FIB/knn",   "FIB/svm",        "FIB/qda", "FIB/dd",     "non-MIL/qda"};
    for (const auto& name : only)
      if (std::find(kRows.begin(), kRows.end(), name) == kRows.end())
        throw Error(ErrorKind::kConfig, "unknown benchmark row '" + name + "'");
    Dataset ds = [&] {
      if (suite == "musk1") return load_musk1(std::filesystem::path(data_dir) / "clean1.data");
      GeneratorConfig gc = config.empty() ? default_synthetic_config() : load_generator_config(config);
      if (seed) gc.seed = *seed;
      return generate_synthetic(gc);
    }();
    EvalConfig base;
    const double th = pca >= 0.0 ? pca : (suite == "musk1" ? 0.9 : 0.0);
    if (th > 0.0) base.pca_threshold = th;
    base.pca_measure = parse_spectrum_measure(pca_measure);
    base.threads = threads > 0 ? threads : default_threads();
    base.compute_train_loglik = false;

    auto wanted = [&](const std::string& name) {
      return only.empty() || std::find(only.begin(), only.end(), name) != only.end();
    };
    std::vector<Row> rows;
    for (DensityKind d : {DensityKind::kGaussian, DensityKind::kGaussianDiag, DensityKind::kKde,
                          DensityKind::kCopula, DensityKind::kCopulaDiag}) {
      EvalConfig c = base;
      c.em.model = ModelKind::kBif;
      c.em.density = d;
      const auto name = model_name(c.em);
      if (!wanted(name)) continue;
      rows.push_back({name, "ok", leave_one_bag_out(ds, c)});
    }
    const std::pair<const char*, std::optional<ClassifierKind>> fib_rows[] = {
        {"lr", ClassifierKind::kLogistic}, {"knn", ClassifierKind::kKnn}, {"svm", std::nullopt},
        {"qda", ClassifierKind::kQda},     {"dd", ClassifierKind::kDiverseDensity}};
    for (const auto& [label, kind] : fib_rows) {
      const std::string name = std::string("FIB/") + label;
      if (!wanted(name)) continue;
      if (!kind) {
        rows.push_back({name, "not implemented", std::nullopt});
        continue;
      }
      if (*kind == ClassifierKind::kDiverseDensity && ds.domain().size() != 2) {
        rows.push_back({name, "not applicable (t=" + std::to_string(ds.domain().size()) + ")", std::nullopt});
        continue;
      }
      EvalConfig c = base;
      c.em.model = ModelKind::kFib;
      c.em.classifier = *kind;
      rows.push_back({name, "ok", leave_one_bag_out(ds, c)});
    }
    if (wanted("non-MIL/qda")) rows.push_back({"non-MIL/qda", "ok", non_mil_baseline(ds, base)});

    std::ostringstream os;
    os << "# suite=" << suite << " bags=" << ds.size() << " instances=" << ds.instance_count()
       << " p=" << ds.dim() << " t=" << ds.domain().size()
       << " pca=" << (base.pca_threshold ? format_double(*base.pca_threshold) : "none") << '\n';
    os << "model,status,bag_accuracy,instance_accuracy,evaluated_folds,degenerate_folds\n";
    for (const auto& r : rows) {
      os << r.name << ',' << r.status;
      if (r.report) {
        os << ',' << format_double(r.report->bag_accuracy) << ','
           << (r.report->instance_accuracy ? format_double(*r.report->instance_accuracy) : "NA") << ','
           << r.report->evaluated_folds << ',' << r.report->degenerate_folds;
      } else {
        os << ",NA,NA,0,0";
      }
      os << '\n';
    }
    emit(out, os.str(), stdout_);
  }
};

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Generative multiple-instance learning: BIF and FIB models", "genmil"};
  app.require_subcommand(1);
  std::uint64_t seed = 1;

  auto add_seed = [&](CLI::App* cmd) {
    return cmd->add_option("--seed", seed, "Random seed (u64)");
  };

  TrainCmd train_cmd;
  auto* train_app = app.add_subcommand("train", "Fit a model with hard EM and save it");
  train_cmd.data.add(*train_app);
  train_cmd.model.add(*train_app);
  train_app->add_option("--out", train_cmd.out, "Model file to write")->required();
  train_app->add_option("--log", train_cmd.log, "Iteration log (default: <out>.log)");
  train_app->add_option("--threads", train_cmd.threads, "E-step worker threads")->check(CLI::PositiveNumber);
  add_seed(train_app);

  InferCmd infer_cmd;
  auto* infer_app = app.add_subcommand("infer", "Label bags and instances with a saved model");
  infer_app->add_option("--model", infer_cmd.model, "Model file")->required();
  infer_cmd.data.add(*infer_app);
  infer_app->add_option("--out", infer_cmd.out, "Output CSV (default: stdout)");
  add_seed(infer_app);

  EvalCmd eval_cmd;
  auto* eval_app = app.add_subcommand("eval", "Leave-one-bag-out evaluation");
  eval_cmd.data.add(*eval_app);
  eval_cmd.model.add(*eval_app);
  eval_app->add_flag("--baseline", eval_cmd.baseline, "Also report the non-MIL QDA baseline");
  eval_app->add_option("--threads", eval_cmd.threads, "Fold worker threads (default: all cores)");
  eval_app->add_option("--out", eval_cmd.out, "Report file (default: stdout)");
  add_seed(eval_app);

  SimulateCmd sim_cmd;
  auto* sim_app = app.add_subcommand("simulate", "Generate synthetic BIF bags");
  auto* cfg_opt = sim_app->add_option("--config", sim_cmd.config, "Generator config (JSON)");
  sim_app->add_option("--model", sim_cmd.model, "Sample from a saved BIF model instead")->excludes(cfg_opt);
  sim_app->add_option("--bags", sim_cmd.bags, "Bag count with --model")->check(CLI::PositiveNumber);
  sim_app->add_option("--min-size", sim_cmd.min_size, "Smallest bag with --model");
  sim_app->add_option("--max-size", sim_cmd.max_size, "Largest bag with --model");
  sim_app->add_option("--out", sim_cmd.out, "Output CSV (default: stdout)");
  auto* sim_seed = add_seed(sim_app);

  BenchmarkCmd bench_cmd;
  auto* bench_app = app.add_subcommand("benchmark", "Run the full model matrix");
  bench_app->add_option("--suite", bench_cmd.suite, "Benchmark suite")
      ->check(CLI::IsMember({"musk1", "synthetic"}));
  bench_app->add_option("--data-dir", bench_cmd.data_dir, "Directory holding clean1.data");
  bench_app->add_option("--config", bench_cmd.config, "Generator config for the synthetic suite");
  bench_app->add_option("--pca", bench_cmd.pca, "PCA fraction (default 0.9 for musk1, off otherwise)");
  bench_app->add_option("--pca-measure", bench_cmd.pca_measure, "How the retained fraction is measured")
      ->check(CLI::IsMember({"variance", "singular-value"}));
  bench_app->add_option("--only", bench_cmd.only, "Restrict to these rows, e.g. BIF/gauss-diag");
  bench_app->add_option("--threads", bench_cmd.threads, "Fold worker threads (default: all cores)");
  bench_app->add_option("--out", bench_cmd.out, "Table file (default: stdout)");
  auto* bench_seed = add_seed(bench_app);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "genmil: error: " << one_line(e.what()) << '\n';
    return 2;
  }

  try {
    if (train_app->parsed()) {
      train_cmd.run(out);
    } else if (infer_app->parsed()) {
      infer_cmd.run(out);
    } else if (eval_app->parsed()) {
      eval_cmd.run(out);
    } else if (sim_app->parsed()) {
      sim_cmd.run(out, sim_seed->count() ? std::optional<std::uint64_t>(seed) : std::nullopt);
    } else if (bench_app->parsed()) {
      bench_cmd.run(out, bench_seed->count() ? std::optional<std::uint64_t>(seed) : std::nullopt);
    }
  } catch (const Error& e) {
    err << "genmil: " << to_string(e.kind()) << ": " << one_line(e.what()) << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "genmil: error: " << one_line(e.what()) << '\n';
    return 1;
  }
  return 0;
}

}  // namespace genmil
