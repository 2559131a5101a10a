// Copyright 2026 The PIM Toolkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pim/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "pim/evalharness.hpp"
#include "pim/objective.hpp"

namespace pim::cli {
namespace {

namespace fs = std::filesystem;

// Sub-streams of the run seed.
constexpr uint64_t kInitStream = 0x494e495400000000ULL;
constexpr uint64_t kDataStream = 0x4441544100000000ULL;
constexpr uint64_t kCorruptStream = 0x434f525200000000ULL;
constexpr uint64_t kTripletStream = 0x5452495000000000ULL;
constexpr uint64_t kJndStream = 0x4a4e440000000000ULL;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Common {
  uint64_t seed = 0;
  std::string out;
  std::string checkpoint;
  int mc_samples = kDefaultMcSamples;
};

void add_config(CLI::App* sub) {
  sub->add_option("--config", "File of `key = value` lines; flags take precedence")
      ->configurable(false);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

// Strips one level of quotes or brackets; "[a,b]" becomes "a,b".
std::string unwrap(std::string v) {
  if (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') || (v.front() == '[' && v.back() == ']'))) {
    v = v.substr(1, v.size() - 2);
  }
  v.erase(std::remove(v.begin(), v.end(), '"'), v.end());
  return v;
}

// The deepest subcommand named on the command line.
CLI::App* find_leaf(CLI::App& app, const std::vector<std::string>& args) {
  CLI::App* leaf = &app;
  for (const auto& a : args) {
    if (a.starts_with("-")) continue;
    for (auto* sub : leaf->get_subcommands([](CLI::App*) { return true; })) {
      if (sub->get_name() == a) {
        leaf = sub;
        break;
      }
    }
  }
  return leaf;
}

// Splices config-file values in as --key=value, skipping keys also given as
// flags. Unknown keys are errors.
std::vector<std::string> apply_config_file(CLI::App& app, std::vector<std::string> args) {
  std::string file;
  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) file = args[i + 1];
    if (args[i].starts_with("--config=")) file = args[i].substr(9);
  }
  if (file.empty()) return args;
  std::ifstream in(file);
  if (!in) throw Error("cannot open config file '" + file + "'");
  CLI::App* leaf = find_leaf(app, args);

  std::vector<std::string> injected;
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    const std::string where = file + ":" + std::to_string(n);
    if (eq == std::string::npos) throw Error(where + ": expected `key = value`");
    const std::string key = trim(t.substr(0, eq)), value = unwrap(trim(t.substr(eq + 1)));
    const CLI::Option* opt = leaf->get_option_no_throw("--" + key);
    if (key.empty() || opt == nullptr || !opt->get_configurable()) {
      throw Error(where + ": unknown key '" + key + "' for '" + leaf->get_name() + "'");
    }
    // Empty values ("") leave the option unset.
    const bool on_command_line = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == "--" + key || a.starts_with("--" + key + "=");
    });
    if (!on_command_line && !value.empty()) injected.push_back("--" + key + "=" + value);
  }
  // Insert right after the subcommand path so trailing positionals stay last.
  auto pos = args.begin();
  for (auto it = args.begin(); it != args.end(); ++it) {
    if (*it == leaf->get_name()) {
      pos = it + 1;
      break;
    }
  }
  args.insert(pos, injected.begin(), injected.end());
  return args;
}

void add_common(CLI::App* sub, Common& c, bool out_required) {
  add_config(sub);
  sub->add_option("--seed", c.seed, "Run seed");
  auto* out = sub->add_option("--out", c.out, "Output directory");
  if (out_required) out->required();
  sub->add_option("--checkpoint", c.checkpoint, "Model checkpoint (.pimk)");
  sub->add_option("--mc-samples", c.mc_samples, "Monte-Carlo samples per distance")
      ->check(CLI::PositiveNumber);
}

// Echoes the fully resolved options next to the outputs.
std::vector<std::pair<std::string, std::string>> echo_config(const CLI::App* sub,
                                                             const fs::path& dir,
                                                             const std::string& stem) {
  const std::string text = sub->config_to_str(true, false);
  fs::create_directories(dir);
  const fs::path file = dir / (stem + ".config");
  std::ofstream f(file);
  f << text;
  if (!f) throw Error("cannot write '" + file.string() + "'");

  std::vector<std::pair<std::string, std::string>> kv;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos || line[0] == '#' || line[0] == '[') continue;
    std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    key.erase(key.find_last_not_of(' ') + 1);
    value.erase(0, value.find_first_not_of(' '));
    kv.emplace_back(key, value);
  }
  return kv;
}

PimModel load_model(const Common& c) {
  if (c.checkpoint.empty()) throw Error("--checkpoint is required for the PIM metric");
  return PimModel::load(c.checkpoint, c.mc_samples);
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  Common common;
  bool synthetic = false;
  std::string frames;
  int64_t synthetic_pairs = 5000;
  int64_t patch = 64;
  std::string profile = "full";
  std::string objective = "ixyz";
  int64_t steps = 0, batch = 0, beta_horizon = 0, crop = 0, checkpoint_every = 0;
  double lr = 0.0;
  int64_t log_every = 100;
  std::string pyramid = "steerable";
  int cnn_depth = 4, cnn_width = 64, components = 5;
};

void setup_train(CLI::App& app, TrainArgs& a) {
  auto* sub = app.add_subcommand("train", "Train an encoder on frame pairs");
  add_common(sub, a.common, true);
  const TrainingConfig d;
  a.steps = d.steps, a.batch = d.batch_size, a.beta_horizon = d.beta_horizon, a.crop = d.crop;
  a.checkpoint_every = d.checkpoint_every, a.lr = d.lr.initial;
  auto* syn = sub->add_flag("--synthetic", a.synthetic, "Train on procedurally generated pairs");
  auto* fr = sub->add_option("--frames", a.frames, "Directory of <segment>/frame_*.ppm");
  syn->excludes(fr);
  sub->add_option("--synthetic-pairs", a.synthetic_pairs, "Synthetic pair count")
      ->check(CLI::PositiveNumber);
  sub->add_option("--patch", a.patch, "Patch extent of training pairs")->check(CLI::PositiveNumber);
  sub->add_option("--profile", a.profile, "full or ablation (60000 steps)")
      ->check(CLI::IsMember({"full", "ablation"}));
  sub->add_option("--objective", a.objective, "ixyz, infonce or single-infonce")
      ->check(CLI::IsMember({"ixyz", "infonce", "single-infonce"}));
  sub->add_option("--steps", a.steps, "Optimizer steps");
  sub->add_option("--batch", a.batch, "Pairs per batch");
  sub->add_option("--beta-horizon", a.beta_horizon,
                  "Steps over which beta ramps to 1 (default: the profile's fraction of --steps)");
  sub->add_option("--crop", a.crop, "Latent crop per scale");
  sub->add_option("--checkpoint-every", a.checkpoint_every, "Checkpoint interval");
  sub->add_option("--lr", a.lr, "Initial learning rate");
  sub->add_option("--log-every", a.log_every, "Print every n-th loss line")
      ->check(CLI::PositiveNumber);
  sub->add_option("--pyramid", a.pyramid, "steerable or laplacian")
      ->check(CLI::IsMember({"steerable", "laplacian"}));
  sub->add_option("--cnn-depth", a.cnn_depth, "Conv layers per scale");
  sub->add_option("--cnn-width", a.cnn_width, "Hidden conv units");
  sub->add_option("--components", a.components, "Mixture components");
}

int cmd_train(CLI::App* sub, const TrainArgs& a, std::ostream& out, std::ostream& err) {
  if (!a.synthetic && a.frames.empty()) throw Error("train needs --synthetic or --frames <dir>");
  const auto given = [&](const char* name) { return sub->get_option(name)->count() > 0; };

  TrainingConfig cfg = a.profile == "ablation" ? ablation_training_config() : TrainingConfig{};
  cfg.objective = parse_objective_kind(a.objective);
  cfg.seed = a.common.seed;
  const int64_t profile_steps = cfg.steps, profile_horizon = cfg.beta_horizon;
  if (given("--steps")) cfg.steps = a.steps;
  if (given("--batch")) cfg.batch_size = a.batch;
  if (given("--crop")) cfg.crop = a.crop;
  if (given("--lr")) cfg.lr.initial = a.lr;
  // An unset horizon keeps the profile's ramp fraction on shorter or longer runs.
  if (given("--beta-horizon")) {
    cfg.beta_horizon = a.beta_horizon;
  } else if (cfg.steps != profile_steps) {
    cfg.beta_horizon = std::min<int64_t>(cfg.steps, std::llround(static_cast<double>(cfg.steps) *
                                                            static_cast<double>(profile_horizon) /
                                                            static_cast<double>(profile_steps)));
  }
  cfg.checkpoint_every =
      given("--checkpoint-every") ? a.checkpoint_every : std::min(cfg.checkpoint_every, cfg.steps);
  // Defaults shown in the echoed config are the values actually used.
  sub->get_option("--steps")->default_str(std::to_string(cfg.steps));
  sub->get_option("--beta-horizon")->default_str(std::to_string(cfg.beta_horizon));
  sub->get_option("--checkpoint-every")->default_str(std::to_string(cfg.checkpoint_every));
  cfg.validate();

  Architecture arch;
  arch.pyramid = parse_pyramid_kind(a.pyramid);
  arch.cnn_depth = a.cnn_depth;
  arch.cnn_width = a.cnn_width;
  arch.components = a.components;
  arch.validate();

  const fs::path dir = a.common.out;
  echo_config(sub, dir, "train");

  std::unique_ptr<PairSet> pairs;
  const uint64_t data_seed = derive_seed(a.common.seed, kDataStream);
  if (a.synthetic) {
    SynthConfig sc;
    sc.patch = a.patch;
    pairs = std::make_unique<SyntheticPairSet>(data_seed, static_cast<size_t>(a.synthetic_pairs), sc);
  } else {
    FramePairConfig fc;
    fc.patch = a.patch;
    std::vector<std::string> warnings;
    auto built = build_frame_pairs(a.frames, data_seed, fc, &warnings);
    for (const auto& w : warnings) err << "warning: " << w << "\n";
    if (built.empty()) throw Error("no usable frame pairs under '" + a.frames + "'");
    pairs = std::make_unique<InMemoryPairSet>(std::move(built));
  }

  out << "training " << to_string(cfg.objective) << " for " << cfg.steps << " steps on "
      << pairs->size() << " pairs\n";
  const auto log_every = a.log_every;
  const TrainingResult result =
      train(cfg, *pairs, init_parameters(derive_seed(a.common.seed, kInitStream), arch), dir,
            [&](const StepRecord& r) {
              if (r.step % log_every == 0 || r.step + 1 == cfg.steps) out << format_log_line(r) << "\n";
              return true;
            });
  if (result.checkpoints.empty()) throw Error("training wrote no checkpoint");
  out << "checkpoint " << result.checkpoints.back().string() << "\n";
  return kExitOk;
}

// ---- distance ---------------------------------------------------------------

struct DistanceArgs {
  Common common;
  std::vector<std::string> images;
};

void setup_distance(CLI::App& app, DistanceArgs& a) {
  auto* sub = app.add_subcommand("distance", "PIM between two PPM images");
  add_common(sub, a.common, false);
  sub->get_option("--checkpoint")->required();
  sub->add_option("images", a.images, "Two PPM images of equal extents")->required()->configurable(false)->expected(2);
}

int cmd_distance(const CLI::App* sub, const DistanceArgs& a, std::ostream& out) {
  const PimModel model = load_model(a.common);
  const Tensor x = read_ppm(a.images[0]), y = read_ppm(a.images[1]);
  const double d = distance(x, y, model, a.common.seed);
  const std::string line = (model.components() == 1 ? "PIM1 " : "PIM ") + fmt(d);
  if (!a.common.out.empty()) {
    echo_config(sub, a.common.out, "distance");
    std::ofstream f(fs::path(a.common.out) / "distance.txt");
    f << line << "\n";
    if (!f) throw Error("cannot write distance.txt in '" + a.common.out + "'");
  }
  out << line << "\n";
  return kExitOk;
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs {
  Common common;
  std::string metric = "pim";
  std::vector<std::string> inputs;
  std::string records = "triplet";
  std::vector<int64_t> shifts{0, 1, 2, 3, 4, 5};
  std::string corruption = "noise";
  double level = 0.12;
};

CLI::App* add_eval_leaf(CLI::App* eval, const std::string& name, const std::string& help,
                        EvalArgs& a, bool uses_metric) {
  auto* sub = eval->add_subcommand(name, help);
  add_common(sub, a.common, true);
  if (uses_metric) {
    sub->add_option("--metric", a.metric, "pim or rmse")->check(CLI::IsMember({"pim", "rmse"}));
  }
  return sub;
}

void setup_eval(CLI::App& app, EvalArgs& a) {
  auto* eval = app.add_subcommand("eval", "Run an evaluation experiment");
  eval->require_subcommand(1);
  add_eval_leaf(eval, "2afc", "2AFC score of triplet manifests", a, true)
      ->add_option("manifests", a.inputs, "Triplet manifests")->required()->configurable(false);
  add_eval_leaf(eval, "jnd", "JND mAP of pair manifests", a, true)
      ->add_option("manifests", a.inputs, "Pair manifests")->required()->configurable(false);
  auto* shift = add_eval_leaf(eval, "shift", "Score change under reference shifts", a, true);
  shift->add_option("manifest", a.inputs, "Triplet or pair manifest")->required()->configurable(false)->expected(1);
  shift->add_option("--records", a.records, "triplet or pair")
      ->check(CLI::IsMember({"triplet", "pair"}));
  shift->add_option("--shifts", a.shifts, "Shift magnitudes in pixels")->delimiter(',');
  auto* noise = add_eval_leaf(eval, "noise-equiv", "Equivalent Gaussian-noise level", a, true);
  noise->add_option("refs", a.inputs, "Reference PPM files or directories")->required()->configurable(false);
  noise->add_option("--corruption", a.corruption, "noise or zoom")
      ->check(CLI::IsMember({"noise", "zoom"}));
  noise->add_option("--level", a.level, "Noise sigma, or zoom step 1..5");
  add_eval_leaf(eval, "rankcorr", "Spearman correlation of two score files", a, false)
      ->add_option("scores", a.inputs, "Two score files")->required()->configurable(false)->expected(2);
}

MetricFn choose_metric(const EvalArgs& a, std::optional<PimModel>& model) {
  if (a.metric == "rmse") return rmse_metric();
  model.emplace(load_model(a.common));
  return pim_metric(*model);
}

std::vector<Tensor> collect_refs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(in))
        if (e.path().extension() == ".ppm") found.push_back(e.path());
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.emplace_back(in);
    }
  }
  if (files.empty()) throw Error("no reference images found");
  std::vector<Tensor> refs;
  for (const auto& f : files) refs.push_back(read_ppm(f));
  return refs;
}

int cmd_eval(const CLI::App* leaf, const EvalArgs& a, std::ostream& out) {
  const std::string exp = leaf->get_name();
  const fs::path dir = a.common.out;
  ExperimentReport report;
  report.experiment = exp;
  report.seed = a.common.seed;
  report.config = echo_config(leaf, dir, exp);
  std::string inputs;
  for (const auto& in : a.inputs) inputs += (inputs.empty() ? "" : ",") + in;
  report.config.emplace_back("inputs", inputs);
  std::optional<PimModel> model;

  if (exp == "2afc" || exp == "jnd") {
    const MetricFn metric = choose_metric(a, model);
    report.metric = metric.name;
    const RecordKind kind = exp == "2afc" ? RecordKind::triplet : RecordKind::pair;
    double sum = 0.0;
    for (size_t m = 0; m < a.inputs.size(); ++m) {
      const auto records = load_eval_records(a.inputs[m], kind);
      const uint64_t seed = derive_seed(a.common.seed, m);
      const double s = exp == "2afc" ? score_2afc(records, metric, seed)
                                     : score_jnd_map(records, metric, seed);
      report.conditions.emplace_back("manifest_" + std::to_string(m), s);
      sum += s;
    }
    report.score = sum / static_cast<double>(a.inputs.size());
    out << (exp == "2afc" ? "2AFC " : "mAP ") << fmt(report.score) << "\n";
  } else if (exp == "shift") {
    const MetricFn metric = choose_metric(a, model);
    report.metric = metric.name;
    const auto records = load_eval_records(a.inputs[0], parse_record_kind(a.records));
    const ShiftReport rep = pixel_shift_experiment(records, metric, a.shifts, a.common.seed);
    report.score = rep.baseline;
    for (const auto& r : rep.results) {
      report.conditions.emplace_back("delta_" + std::to_string(r.shift), r.delta);
      out << "shift " << r.shift << " score " << fmt(r.score) << " delta " << fmt(r.delta) << "\n";
    }
  } else if (exp == "noise-equiv") {
    const MetricFn metric = choose_metric(a, model);
    report.metric = metric.name;
    const std::vector<Tensor> refs = collect_refs(a.inputs);
    std::vector<Tensor> corrupted;
    const uint64_t cseed = derive_seed(a.common.seed, kCorruptStream);
    for (size_t i = 0; i < refs.size(); ++i) {
      if (a.corruption == "noise") {
        Rng rng(derive_seed(cseed, i));
        corrupted.push_back(add_gaussian_noise(refs[i], a.level, rng));
      } else {
        const int k = static_cast<int>(a.level);
        if (k != a.level) throw Error("zoom level must be an integer in 1..5");
        corrupted.push_back(zoom_corruption(refs[i], k));
      }
    }
    const EquivalentNoise eq =
        equivalent_noise(refs, corrupted, metric, default_sigma_grid(), a.common.seed);
    report.score = eq.sigma;
    report.conditions.emplace_back("corruption_mean", eq.corruption_mean);
    for (size_t j = 0; j < eq.grid.size(); ++j) {
      report.conditions.emplace_back("sigma_" + fmt(eq.grid[j]), eq.grid_means[j]);
    }
    out << "sigma " << fmt(eq.sigma) << "\n";
  } else {  // rankcorr
    report.metric = "spearman";
    report.score = spearman_rho(read_score_file(a.inputs[0]), read_score_file(a.inputs[1]));
    out << "rho " << fmt(report.score) << "\n";
  }
  write_report(dir, report);
  return kExitOk;
}

// ---- synth-data -------------------------------------------------------------

struct SynthArgs {
  Common common;
  int64_t count = 0;
  int64_t patch = 64;
  std::vector<std::string> what{"pairs", "triplets", "jnd"};
};

void setup_synth(CLI::App& app, SynthArgs& a) {
  auto* sub = app.add_subcommand("synth-data", "Write synthetic pairs and eval manifests");
  add_config(sub);
  sub->add_option("--seed", a.common.seed, "Generator seed");
  sub->add_option("--out", a.common.out, "Output directory")->required();
  sub->add_option("--count", a.count, "Items per output kind")->required()->check(CLI::PositiveNumber);
  sub->add_option("--patch", a.patch, "Image extent")->check(CLI::PositiveNumber);
  sub->add_option("--what", a.what, "Any of pairs, triplets, jnd")
      ->delimiter(',')
      ->check(CLI::IsMember({"pairs", "triplets", "jnd"}));
}

int cmd_synth(const CLI::App* sub, const SynthArgs& a, std::ostream& out) {
  const fs::path dir = a.common.out;
  echo_config(sub, dir, "synth-data");
  const auto n = static_cast<size_t>(a.count);
  const auto wants = [&](const char* w) { return std::find(a.what.begin(), a.what.end(), w) != a.what.end(); };
  SynthEvalConfig ec;
  ec.scene.patch = a.patch;

  if (wants("pairs")) {
    const fs::path root = dir / "pairs";
    fs::create_directories(root);
    std::ofstream manifest(root / "manifest.txt");
    for (size_t i = 0; i < n; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "pair_%05zu", i);
      const FramePair p = synth_pair(derive_seed(a.common.seed, kDataStream), i, ec.scene);
      fs::create_directories(root / name);
      write_ppm(p.x, root / name / "frame_0000.ppm");
      write_ppm(p.y, root / name / "frame_0001.ppm");
      manifest << name << "/frame_0000.ppm " << name << "/frame_0001.ppm\n";
    }
    if (!manifest) throw Error("cannot write '" + (root / "manifest.txt").string() + "'");
  }
  if (wants("triplets")) {
    write_eval_records(dir / "triplets" / "manifest.txt",
                       synth_triplets(derive_seed(a.common.seed, kTripletStream), n, ec));
  }
  if (wants("jnd")) {
    write_eval_records(dir / "jnd" / "manifest.txt",
                       synth_jnd_pairs(derive_seed(a.common.seed, kJndStream), n, ec));
  }
  out << "wrote " << n << " items per kind to " << dir.string() << "\n";
  return kExitOk;
}

}  // namespace

std::vector<double> read_score_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open score file '" + path.string() + "'");
  std::vector<double> v;
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    std::istringstream tokens(line);
    std::string first, last;
    if (!(tokens >> first) || first[0] == '#') continue;
    last = first;
    for (std::string tok; tokens >> tok;) last = tok;
    try {
      size_t used = 0;
      v.push_back(std::stod(last, &used));
      if (used != last.size()) throw std::invalid_argument(last);
    } catch (const std::exception&) {
      throw Error(path.string() + ":" + std::to_string(n) + ": not a number: '" + last + "'");
    }
  }
  return v;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Perceptual Information Metric toolkit", "pim"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  TrainArgs train_args;
  DistanceArgs distance_args;
  EvalArgs eval_args;
  SynthArgs synth_args;
  setup_train(app, train_args);
  setup_distance(app, distance_args);
  setup_eval(app, eval_args);
  setup_synth(app, synth_args);

  std::vector<std::string> resolved;
  try {
    resolved = apply_config_file(app, args);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  std::vector<const char*> argv{"pim"};
  for (const auto& a : resolved) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (auto* sub = app.get_subcommand("train"); sub->parsed()) return cmd_train(sub, train_args, out, err);
    if (auto* sub = app.get_subcommand("distance"); sub->parsed()) return cmd_distance(sub, distance_args, out);
    if (auto* sub = app.get_subcommand("synth-data"); sub->parsed()) return cmd_synth(sub, synth_args, out);
    const auto* eval = app.get_subcommand("eval");
    return cmd_eval(eval->get_subcommands().front(), eval_args, out);
  } catch (const CheckpointError& e) {
    err << "error: " << e.what() << "\n";
    return kExitCheckpoint;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace pim::cli
