// Copyright 2026 The seqsynth Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "seqsynth/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "seqsynth/config.hpp"
#include "seqsynth/errors.hpp"
#include "seqsynth/evaluation.hpp"

namespace seqsynth {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path events_file(const fs::path& dir, const std::string& split) {
  return dir / (split.empty() ? "events.csv" : split + "_events.csv");
}

fs::path labels_file(const fs::path& dir, const std::string& split) {
  return dir / (split.empty() ? "labels.csv" : split + "_labels.csv");
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) {
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  }
  return os.str();
}

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SchemaError("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

// One manifest.json per output directory, rewritten by every run there.
class Manifest {
 public:
  Manifest(std::string command, std::vector<std::string> args, fs::path out)
      : out_(std::move(out)) {
    j_["command"] = std::move(command);
    j_["arguments"] = std::move(args);
    j_["tool_version"] = SEQSYNTH_VERSION;
    j_["started_at"] = utc_now();
    j_["inputs"] = json::array();
    j_["outputs"] = json::array();
    j_["config_path"] = nullptr;
  }

  void set(const std::string& key, json value) { j_[key] = std::move(value); }

  void input(const fs::path& p) {
    if (p.empty() || !fs::exists(p)) return;
    j_["inputs"].push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
  }

  void output(const fs::path& p) {
    j_["outputs"].push_back({{"path", p.filename().string()}, {"sha256", sha256_file(p)}});
  }

  void write(const std::string& status) {
    j_["status"] = status;
    j_["finished_at"] = utc_now();
    write_json(out_ / "manifest.json", j_);
  }

 private:
  fs::path out_;
  json j_;
};

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> parallel;
};

void add_common(CLI::App* cmd, Common& c, bool config_required = false) {
  auto* opt = cmd->add_option("--config", c.config, "TOML configuration file");
  if (config_required) opt->required();
  cmd->add_option("--seed", c.seed, "master seed");
  cmd->add_option("--out", c.out, "output directory")->required();
}

void prepare_out(const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw SchemaError("cannot create output directory " + out.string());
}

int thread_count(const std::optional<int>& parallel) {
  if (parallel) {
    if (*parallel < 1) throw ConfigError("--parallel must be at least 1");
    return *parallel;
  }
  if (const char* env = std::getenv("SEQSYNTH_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || n < 1) {
      throw ConfigError("SEQSYNTH_THREADS must be a positive integer, got '" + std::string(env) + "'");
    }
    return static_cast<int>(n);
  }
  return 1;
}

ParseResult read_split(const fs::path& dir, const std::string& split,
                       const EventVocabulary* vocab) {
  ParseOptions opts;
  opts.vocabulary = vocab;
  const fs::path labels = labels_file(dir, split);
  return parse_events(events_file(dir, split), fs::exists(labels) ? labels : fs::path{}, opts);
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const Common& c, Manifest& m) {
  const fs::path out(c.out);
  Scenario s = load_scenario(c.config);
  const std::uint64_t seed = c.seed.value_or(0);
  m.set("seed", seed);
  m.set("scenario", to_json(s));

  // One pool so the label median is shared; the first n_train are training
  // subjects.
  std::vector<EventSequence> all = simulate_dataset(s.params, s.n_train + s.n_test, seed, "s");
  std::vector<EventSequence> train(all.begin(), all.begin() + s.n_train);
  std::vector<EventSequence> test(all.begin() + s.n_train, all.end());

  std::vector<std::string> names;
  for (int k = 0; k < s.params.num_types(); ++k) names.push_back("type_" + std::to_string(k));
  const EventVocabulary vocab = EventVocabulary::build(names, {});

  prepare_out(out);
  for (const auto& [split, seqs] : {std::pair{"train", &train}, std::pair{"test", &test}}) {
    write_events_csv(events_file(out, split), *seqs, vocab);
    write_labels_csv(labels_file(out, split), *seqs);
    m.output(events_file(out, split));
    m.output(labels_file(out, split));
  }
  std::cout << "simulated " << train.size() << " train and " << test.size()
            << " test subjects into " << out.string() << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------- train

int cmd_train(const Common& c, const std::string& data, Manifest& m) {
  const fs::path out(c.out);
  TrainFile cfg = load_train_config(c.config);
  if (c.seed) cfg.train.seed = *c.seed;
  m.set("seed", cfg.train.seed);
  m.set("model_config", to_json(cfg.model));
  m.set("train_config", to_json(cfg.train));

  m.input(events_file(data, "train"));
  m.input(labels_file(data, "train"));
  const ParseResult parsed = read_split(data, "train", nullptr);
  if (parsed.sequences.empty()) throw ValidationError("no training subjects in " + data);

  std::vector<EventSequence> train = parsed.sequences, val;
  if (cfg.train.val_fraction > 0.0 && train.size() >= 2) {
    SplitResult sr = split(parsed.sequences, 1.0 - cfg.train.val_fraction, cfg.train.seed);
    train = std::move(sr.train);
    val = std::move(sr.test);
  }

  Model model(cfg.model, parsed.vocabulary);
  model.initialize(cfg.train.seed);
  prepare_out(out);

  json extra{{"train_config", to_json(cfg.train)}};
  const fs::path ckpt = out / "checkpoint.json";
  try {
    const FitResult fr = fit(model, train, val, cfg.train, [](int epoch, const LossBreakdown& b) {
      std::cerr << "epoch " << epoch << " total " << b.total << "\n";
    });
    extra["best_epoch"] = fr.best_epoch;
    extra["best_val_loss"] = fr.best_val_loss;
    save_checkpoint(ckpt, model, extra);
    write_loss_curve(out / "loss_curve.csv", fr.curve);
    m.output(ckpt);
    m.output(out / "loss_curve.csv");
    m.set("checkpoint_sha256", sha256_file(ckpt));
  } catch (const TrainingAbortError& e) {
    // fit() restored the best parameters seen before the failure.
    extra["aborted"] = e.what();
    save_checkpoint(ckpt, model, extra);
    m.output(ckpt);
    m.set("checkpoint_sha256", sha256_file(ckpt));
    m.set("error", e.what());
    throw;
  }
  std::cout << "checkpoint written to " << ckpt.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  std::string checkpoint;
  std::string data;
  std::string split = "train";
  bool events_known = false;
  std::optional<double> var_multiplier;
};

int cmd_generate(const Common& c, const GenerateArgs& a, Manifest& m) {
  const fs::path out(c.out);
  GenerationConfig gen = load_generation_config(c.config);
  if (a.events_known) gen.mode = GenerationMode::kEventsKnown;
  if (a.var_multiplier) gen.var_multiplier = *a.var_multiplier;
  if (c.seed) gen.seed = *c.seed;
  gen.validate();
  const int threads = thread_count(c.parallel);
  m.set("seed", gen.seed);
  m.set("generation_config", to_json(gen));

  m.input(a.checkpoint);
  m.set("checkpoint_sha256", sha256_file(a.checkpoint));
  LoadedCheckpoint loaded = load_checkpoint(a.checkpoint);
  Model& model = loaded.model;

  m.input(events_file(a.data, a.split));
  m.input(labels_file(a.data, a.split));
  const ParseResult parsed = read_split(a.data, a.split, &model.vocabulary());

  const SyntheticDataset syn = synthesize_dataset(model, parsed.sequences, gen, threads);
  if (gen.mode == GenerationMode::kEventsKnown) {
    // Every emitted subject must stay inside its source's type set.
    for (std::size_t i = 0, s = 0; i < syn.metadata.size(); ++i) {
      if (syn.metadata[i].failed) continue;
      std::set<int> src;
      for (const auto& e : parsed.sequences[i].events) src.insert(e.type);
      for (const auto& e : syn.sequences[s].events) {
        if (!src.count(e.type)) throw ContractError("events-known support violated for " + syn.metadata[i].subject_id);
      }
      ++s;
    }
  }

  prepare_out(out);
  write_events_csv(events_file(out, ""), syn.sequences, model.vocabulary());
  write_labels_csv(labels_file(out, ""), syn.sequences);
  write_json(out / "metadata.json", metadata_to_json(syn, gen));
  for (const char* f : {"events.csv", "labels.csv", "metadata.json"}) m.output(out / f);

  std::cout << "generated " << syn.sequences.size() << " subjects into " << out.string() << "\n";
  if (syn.failures > 0) {
    std::cerr << syn.failures << " subject(s) failed; see metadata.json\n";
    m.set("error", std::to_string(syn.failures) + " subjects failed");
    return kExitInternal;
  }
  return kExitOk;
}

// ---------------------------------------------------------------- evaluate

int cmd_evaluate(const Common& c, const std::string& real_dir, const std::string& syn_dir,
                 Manifest& m) {
  const fs::path out(c.out);
  EvalConfig cfg = load_eval_config(c.config);
  const std::uint64_t seed = c.seed.value_or(0);
  m.set("seed", seed);
  m.set("eval_config", to_json(cfg));

  for (const char* split : {"train", "test"}) {
    m.input(events_file(real_dir, split));
    m.input(labels_file(real_dir, split));
  }
  m.input(events_file(syn_dir, ""));
  m.input(labels_file(syn_dir, ""));

  const ParseResult train = read_split(real_dir, "train", nullptr);
  const ParseResult test = read_split(real_dir, "test", &train.vocabulary);
  // Both sides go through the same clock shift, so a copy of the real data
  // scores as a copy.
  const ParseResult syn = read_split(syn_dir, "", &train.vocabulary);
  const int K = train.vocabulary.size();

  MetricReport report = evaluate_synthetic(train.sequences, test.sequences, syn.sequences, K, cfg, seed);
  double multiplier = std::numeric_limits<double>::quiet_NaN();
  const fs::path meta = fs::path(syn_dir) / "metadata.json";
  if (fs::exists(meta)) {
    std::ifstream in(meta);
    const json j = json::parse(in, nullptr, false);
    if (!j.is_discarded() && j.contains("config") && j["config"].contains("var_multiplier")) {
      multiplier = j["config"]["var_multiplier"].get<double>();
    }
  }
  report.metadata["var_multiplier"] = multiplier;

  prepare_out(out);
  write_json(out / "report.json", to_json(report));
  write_text(out / "metrics.csv", csv_header() + "\n" + csv_row(multiplier, report) + "\n");
  m.output(out / "report.json");
  m.output(out / "metrics.csv");
  std::cout << csv_header() << "\n" << csv_row(multiplier, report) << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------- sweep

struct SweepArgs {
  std::string checkpoint;
  std::string data;
  std::vector<double> multipliers{0.1, 0.5, 1.0, 2.0, 4.0};
  int repeats = 1;
};

int cmd_sweep(const Common& c, const SweepArgs& a, Manifest& m) {
  const fs::path out(c.out);
  SweepOptions opt;
  opt.multipliers = a.multipliers;
  opt.repeats = a.repeats;
  opt.generation = load_generation_config(c.config);
  opt.eval = load_eval_config(c.config);
  opt.seed = c.seed.value_or(opt.generation.seed);
  opt.threads = thread_count(c.parallel);
  if (opt.multipliers.size() < 2) throw ConfigError("--multipliers needs at least two values");
  if (opt.repeats < 1) throw ConfigError("--repeats must be positive");
  m.set("seed", opt.seed);
  m.set("multipliers", opt.multipliers);
  m.set("repeats", opt.repeats);
  m.set("generation_config", to_json(opt.generation));
  m.set("eval_config", to_json(opt.eval));

  m.input(a.checkpoint);
  m.set("checkpoint_sha256", sha256_file(a.checkpoint));
  LoadedCheckpoint loaded = load_checkpoint(a.checkpoint);
  for (const char* split : {"train", "test"}) {
    m.input(events_file(a.data, split));
    m.input(labels_file(a.data, split));
  }
  const ParseResult train = read_split(a.data, "train", &loaded.model.vocabulary());
  const ParseResult test = read_split(a.data, "test", &loaded.model.vocabulary());

  prepare_out(out);
  const fs::path csv = out / "sweep.csv";
  const fs::path svg = out / "sweep.svg";
  std::string text = csv_header() + "\n";
  std::vector<SweepRow> done;
  write_text(csv, text);
  auto flush = [&] {
    write_text(svg, render_sweep_svg(done));
    m.output(csv);
    m.output(svg);
  };
  try {
    run_sweep(loaded.model, train.sequences, test.sequences, opt, [&](const SweepRow& row) {
      text += csv_row(row.multiplier, row.report) + "\n";
      write_text(csv, text);
      done.push_back(row);
      std::cerr << "multiplier " << row.multiplier << " done\n";
    });
  } catch (const Error& e) {
    flush();
    m.set("error", e.what());
    throw;
  }
  flush();
  std::cout << text;
  return kExitOk;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const TrainingAbortError*>(&e)) return kExitDiverged;
  if (dynamic_cast<const VersionMismatchError*>(&e)) return kExitVersion;
  if (dynamic_cast<const VocabularyMismatchError*>(&e)) return kExitVocabulary;
  if (dynamic_cast<const SchemaError*>(&e) || dynamic_cast<const ValidationError*>(&e) ||
      dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const TruncationError*>(&e) ||
      dynamic_cast<const SplitError*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e)) {
    return kExitInput;
  }
  return kExitInternal;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"synthetic event sequences from a VAE with Hawkes heads", "seqsynth"};
  app.set_version_flag("--version", SEQSYNTH_VERSION);
  app.require_subcommand(1);

  Common common;
  std::string data, real_dir, syn_dir;
  GenerateArgs gen_args;
  SweepArgs sweep_args;

  auto* sim = app.add_subcommand("simulate", "simulate the multivariate Hawkes fixture");
  add_common(sim, common);

  auto* train = app.add_subcommand("train", "train a model on <data>/train_events.csv");
  add_common(train, common);
  train->add_option("--data", data, "data directory")->required();

  auto* gen = app.add_subcommand("generate", "generate one synthetic subject per source subject");
  add_common(gen, common);
  gen->add_option("--checkpoint", gen_args.checkpoint, "checkpoint.json from train")->required();
  gen->add_option("--data", gen_args.data, "data directory")->required();
  gen->add_option("--split", gen_args.split, "source split (train or test)");
  gen->add_flag("--events-known", gen_args.events_known, "restrict types to each source's set");
  gen->add_option("--var-multiplier", gen_args.var_multiplier, "latent noise scale (overrides config)");
  gen->add_option("--parallel", common.parallel, "worker threads");

  auto* eval = app.add_subcommand("evaluate", "score a synthetic set against real data");
  add_common(eval, common);
  eval->add_option("--real", real_dir, "real data directory (train/test)")->required();
  eval->add_option("--synthetic", syn_dir, "synthetic data directory")->required();

  auto* sweep = app.add_subcommand("sweep", "generate and evaluate across variance multipliers");
  add_common(sweep, common);
  sweep->add_option("--checkpoint", sweep_args.checkpoint, "checkpoint.json from train")->required();
  sweep->add_option("--data", sweep_args.data, "data directory")->required();
  sweep->add_option("--multipliers", sweep_args.multipliers, "comma-separated, at least two")
      ->delimiter(',');
  sweep->add_option("--repeats", sweep_args.repeats, "runs per multiplier, seeds seed..seed+repeats-1");
  sweep->add_option("--parallel", common.parallel, "worker threads");

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  CLI::App* chosen = app.get_subcommands().front();
  const std::string name = chosen->get_name();
  Manifest manifest(name, std::vector<std::string>(args.begin() + 1, args.end()), common.out);
  if (!common.config.empty()) manifest.set("config_path", common.config);
  bool out_ready = false;
  try {
    prepare_out(common.out);
    out_ready = true;
    if (!common.config.empty()) manifest.input(common.config);
    int code = kExitOk;
    if (chosen == sim) code = cmd_simulate(common, manifest);
    if (chosen == train) code = cmd_train(common, data, manifest);
    if (chosen == gen) code = cmd_generate(common, gen_args, manifest);
    if (chosen == eval) code = cmd_evaluate(common, real_dir, syn_dir, manifest);
    if (chosen == sweep) code = cmd_sweep(common, sweep_args, manifest);
    manifest.set("exit_code", code);
    manifest.write(code == kExitOk ? "ok" : "error");
    return code;
  } catch (const std::exception& e) {
    std::cerr << "seqsynth " << name << ": " << e.what() << "\n";
    const int code = exit_code_for(e);
    if (out_ready) {
      try {
        manifest.set("error", e.what());
        manifest.set("exit_code", code);
        manifest.write("error");
      } catch (const std::exception&) {
      }
    }
    return code;
  }
}

int run_cli(int argc, char** argv) { return run_cli(std::vector<std::string>(argv, argv + argc)); }

}  // namespace seqsynth
