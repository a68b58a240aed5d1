#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <memory>
#include <ostream>

#include "mufnet/binary_io.hpp"
#include "mufnet/checkpoint.hpp"
#include "mufnet/errors.hpp"
#include "mufnet/feature_store.hpp"
#include "mufnet/run_config.hpp"
#include "mufnet/synth.hpp"
#include "mufnet/training.hpp"

namespace mufnet::cli {

namespace {

namespace fs = std::filesystem;

// A file parsed but its contents are invalid; the message names the file.
struct MalformedInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <class Fn>
auto read_input(const std::string& path, Fn&& load) {
  try {
    return load(path);
  } catch (const FormatError& e) {
    throw MalformedInput(path + ": " + e.what());
  } catch (const ParseError& e) {
    throw MalformedInput(path + ": " + e.what());
  }
}

struct Flags {
  std::string config;
  std::string data;
  std::string features;
  std::string provider;
  std::string out;
  std::string variant;
  std::string param;
  std::string grid;
  std::string checkpoint;
  std::string split = "test";
  std::uint64_t seed = 7;
  std::size_t epochs = 10;
  std::size_t n = 2000;
  std::size_t dim = 16;
};

std::vector<std::string> variant_names() {
  std::vector<std::string> out;
  for (Variant v : kAllVariants) out.emplace_back(to_string(v));
  return out;
}

void add_config(CLI::App& app, Flags& f) {
  app.add_option("--config", f.config, "Config file with 'key = value' lines; flags override it");
}
void add_out(CLI::App& app, Flags& f) {
  app.add_option("--out", f.out, "Output directory (created if missing; default: out)");
}
void add_seed(CLI::App& app, Flags& f) { app.add_option("--seed", f.seed, "Random seed"); }
void add_data(CLI::App& app, Flags& f) {
  app.add_option("--data", f.data, "Manifest TSV (id, split, label, text)");
  app.add_option("--features", f.features, "MFS1 feature-store file");
  app.add_option("--provider", f.provider, "Feature source (default: store if --features is set)")
      ->check(CLI::IsMember({"stub", "store"}));
}
void add_model(CLI::App& app, Flags& f) {
  app.add_option("--dim", f.dim, "Model width");
  app.add_option("--variant", f.variant, "Ablation variant")->check(CLI::IsMember(variant_names()));
}
void add_epochs(CLI::App& app, Flags& f) {
  app.add_option("--epochs", f.epochs, "Training epochs");
}
void add_split(CLI::App& app, Flags& f) {
  app.add_option("--split", f.split, "Split to score (default: test)")
      ->check(CLI::IsMember({"train", "validation", "test"}));
}

RunConfig build_config(const CLI::App& sub, const Flags& f) {
  RunConfig cfg;
  if (!f.config.empty()) {
    try {
      cfg = load_run_config(f.config);
    } catch (const ParseError& e) {
      throw ConfigError(f.config + ": " + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError(f.config + ": " + e.what());
    }
  }
  const auto given = [&sub](const char* flag) {
    return sub.get_option_no_throw(flag) != nullptr && sub.count(flag) > 0;
  };
  const auto set = [&](const char* flag, const char* key, const std::string& value) {
    if (given(flag)) apply_setting(cfg, key, value);
  };
  set("--data", "data", f.data);
  set("--features", "features", f.features);
  set("--provider", "provider", f.provider);
  set("--out", "out", f.out);
  set("--seed", "seed", std::to_string(f.seed));
  set("--epochs", "epochs", std::to_string(f.epochs));
  set("--dim", "dim", std::to_string(f.dim));
  set("--variant", "variant", f.variant);
  cfg.validate();
  return cfg;
}

FeatureProvider make_provider(const RunConfig& cfg, std::size_t dim) {
  if (cfg.resolved_provider() == "stub") {
    return FeatureProvider(StubProvider::make(dim, cfg.train.seed));
  }
  auto store = std::make_shared<const FeatureStore>(
      read_input(cfg.features, [](const std::string& p) { return load_feature_store(p); }));
  if (store->dim() != dim) {
    throw ConfigError("feature store " + cfg.features + " has dim " + std::to_string(store->dim()) +
                      " but the model expects " + std::to_string(dim));
  }
  return FeatureProvider(std::move(store));
}

Dataset load_dataset(const RunConfig& cfg, std::size_t dim) {
  if (cfg.data.empty()) throw ConfigError("no manifest given (--data)");
  Manifest manifest = read_input(cfg.data, [](const std::string& p) { return load_manifest(p); });
  const FeatureProvider provider = make_provider(cfg, dim);
  return Dataset(std::move(manifest), provider);
}

fs::path prepare_out(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir, "cannot create output directory: " + ec.message());
  return fs::path(dir);
}

void write_text(const fs::path& path, const std::string& text) {
  write_file_bytes(path.string(), std::vector<std::uint8_t>(text.begin(), text.end()));
}

int cmd_gen_synth(const CLI::App& sub, const Flags& f, std::ostream& out) {
  SynthSpec spec;
  spec.n = f.n;
  spec.dim = f.dim;
  spec.seed = f.seed;
  const std::string dir = sub.count("--out") ? f.out : "out";
  const SynthData data = gen_synth(spec);
  const fs::path root = prepare_out(dir);
  save_manifest(data.manifest, (root / "manifest.tsv").string());
  save_feature_store(data.store, (root / "features.mfs").string());
  out << "wrote " << data.manifest.size() << " samples (train " << data.manifest.count(Split::train)
      << ", validation " << data.manifest.count(Split::validation) << ", test "
      << data.manifest.count(Split::test) << ") to " << root.string() << "\n";
  return kOk;
}

int cmd_train(const CLI::App& sub, const Flags& f, std::ostream& out) {
  const RunConfig cfg = build_config(sub, f);
  const Dataset data = load_dataset(cfg, cfg.train.model.dim);
  const fs::path root = prepare_out(cfg.out);
  const TrainResult r = train(cfg.train, data, [&out](const EpochRecord& e) {
    out << "epoch " << e.epoch << " train_loss " << e.train_loss << " val_acc " << e.val.acc
        << "\n";
  });
  save_checkpoint(cfg.train.model, r.params, (root / "checkpoint.rcmf").string());
  write_text(root / "epochs.csv", format_epoch_log(r.log));
  out << "best epoch " << r.best_epoch << "; wrote " << (root / "checkpoint.rcmf").string()
      << "\n";
  return kOk;
}

int cmd_eval(const CLI::App& sub, const Flags& f, std::ostream& out) {
  const RunConfig cfg = build_config(sub, f);
  const std::string ckpt_path =
      f.checkpoint.empty() ? (fs::path(cfg.out) / "checkpoint.rcmf").string() : f.checkpoint;
  const Checkpoint ckpt =
      read_input(ckpt_path, [](const std::string& p) { return load_checkpoint(p); });
  const Dataset data = load_dataset(cfg, ckpt.config.dim);
  const Split split = parse_split(f.split);
  const Metrics m = evaluate(ckpt.params, ckpt.config, data, split);
  const fs::path root = prepare_out(cfg.out);
  write_text(root / "metrics.csv", format_metrics_csv(split, m));
  out << to_string(split) << " acc " << m.acc << " precision " << m.precision << " recall "
      << m.recall << " f1 " << m.f1 << "\n";
  return kOk;
}

int cmd_ablate(const CLI::App& sub, const Flags& f, std::ostream& out) {
  const RunConfig cfg = build_config(sub, f);
  const Dataset data = load_dataset(cfg, cfg.train.model.dim);
  const fs::path root = prepare_out(cfg.out);
  const auto rows = ablate(cfg.train, data, parse_split(f.split));
  write_text(root / "ablation.csv", format_ablation_csv(rows));
  for (const AblationRow& r : rows) {
    out << to_string(r.variant) << " acc " << r.metrics.acc << " f1 " << r.metrics.f1 << "\n";
  }
  return kOk;
}

int cmd_sweep(const CLI::App& sub, const Flags& f, std::ostream& out) {
  const RunConfig cfg = build_config(sub, f);
  const SweepParam param = parse_sweep_param(f.param);
  const std::vector<double> grid = parse_grid(f.grid);
  const Dataset data = load_dataset(cfg, cfg.train.model.dim);
  const fs::path root = prepare_out(cfg.out);
  const auto rows = sweep(cfg.train, param, grid, data, parse_split(f.split));
  write_text(root / "sweep.csv", format_sweep_csv(rows));
  for (const SweepRow& r : rows) {
    out << to_string(r.param) << " " << r.value << " acc " << r.metrics.acc << "\n";
  }
  return kOk;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

int fail(std::ostream& err, int code, const char* kind, const std::string& message) {
  err << "error: " << kind << ": " << one_line(message) << "\n";
  return code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"mufnet: multimodal sarcasm-detection network (train, evaluate, ablate, sweep)",
               "mufnet"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "mufnet 0.1.0");
  Flags f;

  CLI::App* gen = app.add_subcommand("gen-synth", "Generate the planted-rule synthetic dataset");
  gen->add_option("--n", f.n, "Number of samples (>= 10)");
  gen->add_option("--dim", f.dim, "Feature width (>= 2)");
  add_seed(*gen, f);
  add_out(*gen, f);

  CLI::App* tr = app.add_subcommand("train", "Train a model; writes checkpoint.rcmf and epochs.csv");
  add_config(*tr, f);
  add_data(*tr, f);
  add_model(*tr, f);
  add_epochs(*tr, f);
  add_seed(*tr, f);
  add_out(*tr, f);

  CLI::App* ev = app.add_subcommand("eval", "Score a checkpoint; writes metrics.csv");
  add_config(*ev, f);
  add_data(*ev, f);
  ev->add_option("--checkpoint", f.checkpoint, "Checkpoint to load (default: <out>/checkpoint.rcmf)");
  add_split(*ev, f);
  add_seed(*ev, f);
  add_out(*ev, f);

  CLI::App* ab = app.add_subcommand("ablate", "Train every variant; writes ablation.csv");
  add_config(*ab, f);
  add_data(*ab, f);
  ab->add_option("--dim", f.dim, "Model width");
  add_epochs(*ab, f);
  add_split(*ab, f);
  add_seed(*ab, f);
  add_out(*ab, f);

  CLI::App* sw = app.add_subcommand("sweep", "Train once per grid value; writes sweep.csv");
  add_config(*sw, f);
  add_data(*sw, f);
  add_model(*sw, f);
  sw->add_option("--param", f.param, "Weight to sweep")
      ->required()
      ->check(CLI::IsMember({"alpha", "beta", "gamma"}));
  sw->add_option("--grid", f.grid, "Grid as START:STOP:STEP, e.g. 0.0:1.0:0.1")->required();
  add_epochs(*sw, f);
  add_split(*sw, f);
  add_seed(*sw, f);
  add_out(*sw, f);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    return fail(err, kBadFlag, "bad_flag", e.what());
  }

  try {
    if (gen->parsed()) return cmd_gen_synth(*gen, f, out);
    if (tr->parsed()) return cmd_train(*tr, f, out);
    if (ev->parsed()) return cmd_eval(*ev, f, out);
    if (ab->parsed()) return cmd_ablate(*ab, f, out);
    if (sw->parsed()) return cmd_sweep(*sw, f, out);
    return fail(err, kBadFlag, "bad_flag", "no command given");
  } catch (const MissingFileError& e) {
    return fail(err, kMissingFile, "missing_file", e.what());
  } catch (const IoError& e) {
    return fail(err, kRuntime, "runtime", e.what());
  } catch (const ConfigError& e) {
    return fail(err, kBadConfig, "config", e.what());
  } catch (const MalformedInput& e) {
    return fail(err, kMalformedInput, "malformed_input", e.what());
  } catch (const LookupError& e) {
    return fail(err, kMalformedInput, "malformed_input", e.what());
  } catch (const std::exception& e) {
    return fail(err, kRuntime, "runtime", e.what());
  }
}

}  // namespace mufnet::cli
