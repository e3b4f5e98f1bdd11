#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "mgnet/checkpoint.hpp"
#include "mgnet/cli.hpp"
#include "mgnet/errors.hpp"
#include "mgnet/parallel.hpp"
#include "mgnet/simd/kernels.hpp"

namespace mgnet::cli {
namespace {

constexpr std::size_t kReferenceParams = 6'202'754;
constexpr std::size_t kBaselineParams = 8'288'290;

std::filesystem::path require_path(const CliConfig& cfg, const std::string& key) {
  const std::string& v = cfg.str(key);
  if (v.empty()) throw ConfigError("--" + key + " is required for this command");
  return v;
}

std::filesystem::path output_dir(const CliConfig& cfg) {
  std::filesystem::path dir = cfg.str("out");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw IoError("failed writing " + path.string());
}

std::string signed_delta(std::size_t a, std::size_t b) {
  const long long d = static_cast<long long>(a) - static_cast<long long>(b);
  return (d >= 0 ? "+" : "") + std::to_string(d);
}

void apply_runtime(const CliConfig& cfg) {
  set_num_threads(static_cast<int>(std::max<std::size_t>(1, cfg.size("threads"))));
  const std::string& simd_choice = cfg.str("simd");
  if (simd_choice == "auto") {
    simd::select(simd::best_supported());
  } else if (simd_choice == "scalar") {
    simd::select(simd::Isa::kScalar);
  } else if (simd_choice == "avx2") {
    if (!simd::supported(simd::Isa::kAvx2)) throw ConfigError("this CPU does not support AVX2");
    simd::select(simd::Isa::kAvx2);
  } else {
    throw ConfigError("simd must be auto, scalar or avx2, got `" + simd_choice + "`");
  }
}

int cmd_synth(const CliConfig& cfg, std::ostream& out) {
  const SynthSpec spec = cfg.synth_spec();
  const std::filesystem::path dir = output_dir(cfg);
  const Manifest m = synth_generate(spec, dir);
  out << "manifest=" << (dir / "manifest.csv").string() << "\n"
      << "subjects=" << 2 * spec.subjects_per_class << "\n"
      << "scans=" << m.records.size() << "\n"
      << "geometry=" << shape_str(spec.geometry) << "\n"
      << "effect_size=" << format_double(spec.effect_size) << "\n"
      << "noise_std=" << format_double(spec.noise_std) << "\n"
      << "seed_data=" << spec.seed << "\n";
  return kExitOk;
}

int cmd_split(const CliConfig& cfg, std::ostream& out) {
  const Manifest m = read_manifest(require_path(cfg, "manifest"), false);
  const std::size_t k = cfg.size("k");
  const FoldAssignment folds = stratified_group_kfold(m, k, cfg.u64("seed_split"));
  const std::filesystem::path path =
      cfg.str("folds").empty() ? output_dir(cfg) / "folds.csv" : std::filesystem::path(cfg.str("folds"));
  write_folds(folds, path);
  const auto labels = m.subject_labels();
  out << cfg.seed_header() << "folds=" << path.string() << "\nk=" << k << "\n";
  for (std::size_t f = 0; f < k; ++f) {
    std::size_t per_class[2] = {0, 0};
    for (const auto& [subject, fold] : folds.fold_of) {
      if (fold == f) ++per_class[labels.at(subject)];
    }
    out << "fold=" << f << " nc_subjects=" << per_class[0] << " ad_subjects=" << per_class[1]
        << "\n";
  }
  return kExitOk;
}

std::vector<std::size_t> selected_indices(const CliConfig& cfg, const Manifest& m, bool train_side) {
  if (cfg.str("folds").empty()) {
    std::vector<std::size_t> all(m.records.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }
  const FoldAssignment folds = read_folds(cfg.str("folds"));
  const std::size_t fold = cfg.size("fold");
  if (fold >= folds.k) {
    throw ConfigError("fold " + std::to_string(fold) + " out of range for k = " +
                      std::to_string(folds.k));
  }
  return train_side ? folds.train_indices(m, fold) : folds.test_indices(m, fold);
}

int cmd_train(const CliConfig& cfg, std::ostream& out) {
  const Manifest m = read_manifest(require_path(cfg, "manifest"));
  const MgNetConfig model_cfg = cfg.model_config();
  const TrainConfig train_cfg = cfg.train_config();
  const auto indices = selected_indices(cfg, m, true);
  if (indices.empty()) throw ArgumentError("no training scans selected");
  const std::vector<Sample> samples = load_samples(m, indices, cfg.flag("normalize"));

  const std::filesystem::path dir = output_dir(cfg);
  out << cfg.seed_header();
  TrainResult result = train(model_cfg, samples, train_cfg, [&](const EpochRecord& e) {
    RunHistory one{{e}};
    out << one.to_log(true) << std::flush;
  });

  const std::filesystem::path ckpt =
      cfg.str("checkpoint").empty() ? dir / "model.mgn3" : std::filesystem::path(cfg.str("checkpoint"));
  save_checkpoint(result.params, ckpt);
  write_text(dir / "history.log", result.history.to_log(true));

  std::ostringstream summary;
  summary << "checkpoint=" << ckpt.string() << "\n"
          << "train_scans=" << samples.size() << "\n"
          << "epochs=" << train_cfg.epochs << "\n"
          << "final_loss=" << format_double(result.history.epochs.back().mean_loss) << "\n"
          << "param_count=" << param_count(result.params) << "\n"
          << "seed_model=" << cfg.str("seed_model") << "\n"
          << "seed_train=" << cfg.str("seed_train") << "\n";
  write_text(dir / "train_summary.txt", summary.str());
  out << summary.str();
  return kExitOk;
}

int cmd_eval(const CliConfig& cfg, std::ostream& out) {
  const MgNetParams params = load_checkpoint(require_path(cfg, "checkpoint"));
  const Manifest m = read_manifest(require_path(cfg, "manifest"));
  const MgNetConfig& mc = params.config;
  if (!m.geometry.empty()) {
    const Shape spatial(m.geometry.begin() + 1, m.geometry.end());
    const bool channels_ok = m.geometry[0] == mc.input_channels;
    const bool spatial_ok = mc.input_spatial.empty() || mc.input_spatial == spatial;
    if (!channels_ok || !spatial_ok) {
      Shape model_geometry{mc.input_channels};
      if (mc.input_spatial.empty()) {
        model_geometry.insert(model_geometry.end(), spatial.begin(), spatial.end());
      } else {
        model_geometry.insert(model_geometry.end(), mc.input_spatial.begin(), mc.input_spatial.end());
      }
      throw ShapeError("volume geometry " + shape_str(m.geometry) +
                       " does not match model geometry " + shape_str(model_geometry));
    }
  }
  const auto indices = selected_indices(cfg, m, false);
  if (indices.empty()) throw ArgumentError("no evaluation scans selected");
  const std::vector<Sample> samples = load_samples(m, indices, cfg.flag("normalize"));
  const EvalMetrics metrics = evaluate(params, samples, cfg.aggregation());
  out << "scans=" << samples.size() << "\n" << format_metrics_block(metrics);
  return kExitOk;
}

int cmd_params(const CliConfig& cfg, std::ostream& out) {
  out << params_report(cfg.model_config());
  return kExitOk;
}

int cmd_cv(const CliConfig& cfg, std::ostream& out) {
  const Manifest m = read_manifest(require_path(cfg, "manifest"));
  const MgNetConfig model_cfg = cfg.model_config();
  const TrainConfig train_cfg = cfg.train_config();
  const FoldAssignment folds = cfg.str("folds").empty()
                                   ? stratified_group_kfold(m, cfg.size("k"), cfg.u64("seed_split"))
                                   : read_folds(cfg.str("folds"));
  const std::filesystem::path dir = output_dir(cfg);

  CvOptions options;
  options.normalize_volumes = cfg.flag("normalize");
  options.aggregation = cfg.aggregation();
  std::ofstream history(dir / "cv_history.log", std::ios::trunc);
  if (!history) throw IoError("cannot open " + (dir / "cv_history.log").string());
  options.on_epoch = [&](std::size_t fold, const EpochRecord& e) {
    RunHistory one{{e}};
    history << "fold=" << fold << " " << one.to_log(true) << std::flush;
  };

  out << cfg.seed_header() << "k=" << folds.k << "\n"
      << "use_avg_pool=" << (model_cfg.use_avg_pool ? "true" : "false") << "\n";
  const CvResult result = cross_validate(model_cfg, m, folds, train_cfg, options);
  const std::string report = result.report();
  write_text(dir / "cv_report.txt", report);
  out << report;
  return kExitOk;
}

struct FlagBinding {
  const char* flag;
  const char* key;
  const char* help;
};

constexpr FlagBinding kFlags[] = {
    {"--manifest", "manifest", "manifest CSV"},
    {"--folds", "folds", "fold assignment CSV"},
    {"--fold", "fold", "held-out fold index"},
    {"--k", "k", "number of folds"},
    {"--seed-model", "seed_model", "initialisation seed"},
    {"--seed-train", "seed_train", "shuffling seed"},
    {"--seed-split", "seed_split", "fold assignment seed"},
    {"--seed-data", "seed_data", "synthetic data seed"},
    {"--checkpoint", "checkpoint", "MGN3 checkpoint path"},
    {"--out", "out", "output directory"},
    {"--threads", "threads", "worker threads"},
    {"--epochs", "epochs", "training epochs"},
    {"--lr", "learning_rate", "learning rate"},
    {"--batch-size", "batch_size", "mini-batch size"},
    {"--simd", "simd", "kernel set: auto, scalar or avx2"},
};

}  // namespace

std::string params_report(const MgNetConfig& config) {
  const ParamBreakdown b = param_breakdown(config);
  std::ostringstream os;
  os << "param_count=" << b.total() << "\n"
     << "f_in=" << b.f_in << "\n";
  for (std::size_t l = 0; l < b.levels.size(); ++l) {
    const auto& lv = b.levels[l];
    os << "level" << (l + 1) << "=" << lv.total() << " A=" << lv.A << " B=" << lv.B
       << " Pi=" << lv.Pi << " R=" << lv.R << "\n";
  }
  os << "head=" << b.head << "\n"
     << "delta_vs_6202754=" << signed_delta(b.total(), kReferenceParams) << "\n"
     << "delta_vs_8288290=" << signed_delta(b.total(), kBaselineParams) << "\n"
     << "below_8288290=" << (b.total() < kBaselineParams ? "true" : "false") << "\n";
  return os.str();
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const DivergenceError*>(&e)) return kExitDivergence;
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ArgumentError*>(&e)) {
    return kExitArgument;
  }
  if (dynamic_cast<const Error*>(&e)) return kExitData;
  return 1;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"3D multigrid network: synthetic data, splitting, training and evaluation"};
  app.require_subcommand(1);

  std::string config_path;
  std::map<std::string, std::string> values;
  std::vector<std::string> overrides;
  bool no_avg_pool = false;
  std::vector<std::pair<CLI::Option*, const char*>> bound;

  const std::pair<const char*, const char*> commands[] = {
      {"synth", "generate a synthetic dataset"},
      {"split", "assign subjects to stratified folds"},
      {"train", "train on every fold except --fold"},
      {"eval", "evaluate a checkpoint"},
      {"params", "report the parameter count"},
      {"cv", "run k-fold cross-validation"},
  };
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "key=value configuration file");
    for (const FlagBinding& f : kFlags) {
      bound.emplace_back(sub->add_option(f.flag, values[f.key], f.help), f.key);
    }
    sub->add_option("--set", overrides, "override any configuration key (key=value)");
    sub->add_flag("--no-avg-pool", no_avg_pool, "disable average pooling after restriction");
    subs[name] = sub;
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitArgument;
  }

  try {
    CliConfig cfg;
    if (!config_path.empty()) cfg.load_file(config_path);
    for (const auto& [opt, key] : bound) {
      if (opt->count() > 0) cfg.set(key, values[key]);
    }
    for (const std::string& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got `" + kv + "`");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (no_avg_pool) cfg.set("use_avg_pool", "false");
    apply_runtime(cfg);

    if (subs["synth"]->parsed()) return cmd_synth(cfg, out);
    if (subs["split"]->parsed()) return cmd_split(cfg, out);
    if (subs["train"]->parsed()) return cmd_train(cfg, out);
    if (subs["eval"]->parsed()) return cmd_eval(cfg, out);
    if (subs["params"]->parsed()) return cmd_params(cfg, out);
    if (subs["cv"]->parsed()) return cmd_cv(cfg, out);
    throw ConfigError("no command given");
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  return run(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace mgnet::cli
