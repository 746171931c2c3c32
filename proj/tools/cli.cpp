// SPDX-License-Identifier: Apache-2.0
#include "replaylab/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "replaylab/experiments.hpp"
#include "replaylab/gradcheck.hpp"

namespace replaylab {
namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* expected) {
  throw ConfigError("config key '" + std::string(key) + "': '" + std::string(value) + "' is not " + expected);
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) bad_value(key, v, "a non-negative integer");
  return out;
}

std::size_t to_size(std::string_view key, std::string_view v) { return static_cast<std::size_t>(to_u64(key, v)); }

double to_double(std::string_view key, std::string_view v) {
  const std::string s(v);
  char* end = nullptr;
  const double d = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(d)) bad_value(key, v, "a finite number");
  return d;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v, "a boolean");
}

template <class T>
std::vector<T> to_list(std::string_view key, std::string_view v, T (*parse)(std::string_view, std::string_view)) {
  std::vector<T> out;
  std::stringstream ss{std::string(v)};
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t = trim(item);
    if (!t.empty()) out.push_back(parse(key, t));
  }
  return out;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
std::string join(const std::vector<T>& values) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(values[i]);
  }
  return s;
}

struct KeyHandler {
  const char* name;
  const char* description;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

const std::vector<KeyHandler>& handlers() {
  static const std::vector<KeyHandler> table = [] {
    std::vector<KeyHandler> t;
    auto add = [&](const char* n, const char* d, auto set, auto get) { t.push_back({n, d, set, get}); };
    using C = ExperimentConfig;
    using S = std::string_view;
    add("method", "er, sgd (no buffer) or joint (shuffled union of all tasks)",
        [](C& c, S v) {
          if (v != "er" && v != "sgd" && v != "joint") bad_value("method", v, "one of er, sgd, joint");
          c.method = v;
        },
        [](const C& c) { return c.method; });
    add("dataset", "fashion-mnist or synthetic",
        [](C& c, S v) {
          if (v != "fashion-mnist" && v != "synthetic") bad_value("dataset", v, "fashion-mnist or synthetic");
          c.dataset = v;
        },
        [](const C& c) { return c.dataset; });
    add("data_dir", "directory with the four IDX files (default: $REPLAYLAB_DATA)",
        [](C& c, S v) { c.data_dir = v; }, [](const C& c) { return c.data_dir; });
    add("seeds", "comma list of run seeds",
        [](C& c, S v) {
          c.seeds = to_list<std::uint64_t>("seeds", v, to_u64);
          if (c.seeds.empty()) bad_value("seeds", v, "a non-empty seed list");
        },
        [](const C& c) { return join(c.seeds); });
    add("out", "output directory", [](C& c, S v) { c.out = v; }, [](const C& c) { return c.out; });
    add("classes_per_task", "classes per task (ascending class ids)",
        [](C& c, S v) { c.classes_per_task = to_size("classes_per_task", v); },
        [](const C& c) { return std::to_string(c.classes_per_task); });
    add("split_seed", "seed of the task split and of synthetic data",
        [](C& c, S v) { c.split_seed = to_u64("split_seed", v); },
        [](const C& c) { return std::to_string(c.split_seed); });
    add("buffer", "replay buffer capacity (0: fine-tuning baseline)",
        [](C& c, S v) { c.train.buffer_capacity = to_size("buffer", v); },
        [](const C& c) { return std::to_string(c.train.buffer_capacity); });
    add("replay_batch", "replay items per step",
        [](C& c, S v) { c.train.replay_batch_size = to_size("replay_batch", v); },
        [](const C& c) { return std::to_string(c.train.replay_batch_size); });
    add("stream_batch", "stream items per step",
        [](C& c, S v) { c.train.stream_batch_size = to_size("stream_batch", v); },
        [](const C& c) { return std::to_string(c.train.stream_batch_size); });
    add("epochs_per_task", "passes over each task",
        [](C& c, S v) { c.train.epochs_per_task = to_size("epochs_per_task", v); },
        [](const C& c) { return std::to_string(c.train.epochs_per_task); });
    add("hidden", "comma list of hidden layer widths",
        [](C& c, S v) { c.train.hidden = to_list<std::size_t>("hidden", v, to_size); },
        [](const C& c) { return join(c.train.hidden); });
    add("lr0", "initial SGD learning rate", [](C& c, S v) { c.train.lr0 = to_double("lr0", v); },
        [](const C& c) { return fmt_double(c.train.lr0); });
    add("decay_fraction", "final / initial learning rate under exponential decay",
        [](C& c, S v) { c.train.decay_fraction = to_double("decay_fraction", v); },
        [](const C& c) { return fmt_double(c.train.decay_fraction); });
    add("tricks", "comma list of iba, bic, cbic, elrd, brs, lars, or none",
        [](C& c, S v) { c.train.tricks = parse_tricks(std::string(v)); },
        [](const C& c) {
          std::string s = c.train.tricks.label();
          std::replace(s.begin(), s.end(), '+', ',');
          return s;
        });
    add("decay_enabled", "exponential learning-rate decay (same flag as the elrd trick)",
        [](C& c, S v) { c.train.tricks.elrd = to_bool("decay_enabled", v); },
        [](const C& c) { return std::string(c.train.tricks.elrd ? "true" : "false"); });
    add("replay", "rehearse buffer items (false keeps the buffer for bias fitting only)",
        [](C& c, S v) { c.train.replay = to_bool("replay", v); },
        [](const C& c) { return std::string(c.train.replay ? "true" : "false"); });
    add("ring_buffer", "class-wise FIFO buffer instead of reservoir sampling",
        [](C& c, S v) { c.train.ring_buffer = to_bool("ring_buffer", v); },
        [](const C& c) { return std::string(c.train.ring_buffer ? "true" : "false"); });
    add("aug.max_shift", "largest translation in pixels",
        [](C& c, S v) { c.train.aug_max_shift = to_size("aug.max_shift", v); },
        [](const C& c) { return std::to_string(c.train.aug_max_shift); });
    add("aug.hflip_prob", "horizontal flip probability",
        [](C& c, S v) { c.train.aug_hflip_prob = to_double("aug.hflip_prob", v); },
        [](const C& c) { return fmt_double(c.train.aug_hflip_prob); });
    add("aug.stream_enabled", "augment stream batches",
        [](C& c, S v) { c.train.stream_augment = to_bool("aug.stream_enabled", v); },
        [](const C& c) { return std::string(c.train.stream_augment ? "true" : "false"); });
    add("aug.iba_enabled", "store raw items and augment every replay draw (same flag as the iba trick)",
        [](C& c, S v) { c.train.tricks.iba = to_bool("aug.iba_enabled", v); },
        [](const C& c) { return std::string(c.train.tricks.iba ? "true" : "false"); });
    add("bias.epochs", "bias-correction fitting epochs over the buffer",
        [](C& c, S v) { c.train.bias_fit.epochs = to_size("bias.epochs", v); },
        [](const C& c) { return std::to_string(c.train.bias_fit.epochs); });
    add("bias.batch_size", "bias-correction minibatch size",
        [](C& c, S v) { c.train.bias_fit.batch_size = to_size("bias.batch_size", v); },
        [](const C& c) { return std::to_string(c.train.bias_fit.batch_size); });
    add("bias.lr", "bias-correction learning rate",
        [](C& c, S v) { c.train.bias_fit.learning_rate = to_double("bias.lr", v); },
        [](const C& c) { return fmt_double(c.train.bias_fit.learning_rate); });
    add("synthetic.classes", "synthetic class count",
        [](C& c, S v) { c.synthetic.classes = to_size("synthetic.classes", v); },
        [](const C& c) { return std::to_string(c.synthetic.classes); });
    add("synthetic.per_class", "synthetic training items per class",
        [](C& c, S v) { c.synthetic.per_class = to_size("synthetic.per_class", v); },
        [](const C& c) { return std::to_string(c.synthetic.per_class); });
    add("synthetic.test_per_class", "synthetic test items per class",
        [](C& c, S v) { c.synthetic.test_per_class = to_size("synthetic.test_per_class", v); },
        [](const C& c) { return std::to_string(c.synthetic.test_per_class); });
    add("synthetic.dim", "synthetic feature dimension",
        [](C& c, S v) { c.synthetic.dim = to_size("synthetic.dim", v); },
        [](const C& c) { return std::to_string(c.synthetic.dim); });
    add("synthetic.separation", "minimum distance between synthetic class means",
        [](C& c, S v) { c.synthetic.separation = to_double("synthetic.separation", v); },
        [](const C& c) { return fmt_double(c.synthetic.separation); });
    add("synthetic.noise", "per-feature standard deviation around each mean",
        [](C& c, S v) { c.synthetic.noise = to_double("synthetic.noise", v); },
        [](const C& c) { return fmt_double(c.synthetic.noise); });
    return t;
  }();
  return table;
}

const KeyHandler& handler(std::string_view key) {
  for (const KeyHandler& h : handlers())
    if (key == h.name) return h;
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string fixed(double v, int digits = 6) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

Json correction_json(const FittedCorrection& f) {
  Json j;
  j["after_task"] = f.after_task;
  if (const auto* b = std::get_if<BicLayer>(&f.correction)) {
    j["kind"] = "bic";
    j["alpha"] = b->alpha;
    j["beta"] = b->beta;
    j["classes"] = b->last_task_classes;
  } else if (const auto* c = std::get_if<CbicLayer>(&f.correction)) {
    j["kind"] = "cbic";
    j["betas"] = c->betas;
  }
  return j;
}

Json run_json(const RunReport& r) {
  Json j;
  j["method"] = r.method;
  j["tricks"] = r.tricks;
  j["seed"] = r.seed;
  j["per_task_accuracy"] = r.per_task_accuracy;
  j["average_accuracy"] = r.average_accuracy;
  j["task_pred_distribution"] = r.task_pred_distribution;
  j["task_pred_kl"] = r.task_pred_kl;
  j["buffer_class_counts"] = r.buffer_class_counts;
  j["buffer_balance_mse"] = r.buffer_balance_mse;
  Json corr = Json::array();
  for (const FittedCorrection& f : r.corrections) corr.push_back(correction_json(f));
  j["corrections"] = corr;
  j["examples_seen"] = r.examples_seen;
  j["steps"] = r.steps.size();
  j["first_lr"] = r.steps.empty() ? 0.0 : r.steps.front().lr;
  j["final_lr"] = r.steps.empty() ? 0.0 : r.steps.back().lr;
  j["parameter_checksum"] = hex64(r.parameter_checksum);
  j["wall_clock_seconds"] = r.wall_clock_seconds;
  return j;
}

Json config_json(const ExperimentConfig& config) {
  Json j;
  for (const KeyHandler& h : handlers()) j[h.name] = h.get(config);
  return j;
}

std::string data_dir_of(const ExperimentConfig& config) {
  if (!config.data_dir.empty()) return config.data_dir;
  if (const char* env = std::getenv("REPLAYLAB_DATA"); env && *env) return env;
  throw DataError("no Fashion-MNIST directory: set data_dir or REPLAYLAB_DATA");
}

// Options shared by the training subcommands.
struct CommonOptions {
  std::string config_path;
  std::vector<std::string> sets;
  std::string seeds, out, tricks, dataset, data_dir, method;
  std::optional<std::size_t> buffer;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "flat key = value config file");
  cmd->add_option("--set", o.sets, "override one key (key=value), repeatable");
  cmd->add_option("--seeds", o.seeds, "comma list of seeds");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--buffer", o.buffer, "replay buffer capacity");
  cmd->add_option("--tricks", o.tricks, "comma list of iba,bic,cbic,elrd,brs,lars or none");
  cmd->add_option("--dataset", o.dataset, "fashion-mnist or synthetic");
  cmd->add_option("--data-dir", o.data_dir, "Fashion-MNIST directory");
  cmd->add_option("--method", o.method, "er, sgd or joint");
}

ExperimentConfig resolve(const CommonOptions& o) {
  ExperimentConfig c;
  if (!o.config_path.empty()) c = load_config(o.config_path, c);
  for (const std::string& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    set_config_value(c, trim(std::string_view(s).substr(0, eq)), trim(std::string_view(s).substr(eq + 1)));
  }
  if (!o.seeds.empty()) set_config_value(c, "seeds", o.seeds);
  if (!o.out.empty()) set_config_value(c, "out", o.out);
  if (o.buffer) c.train.buffer_capacity = *o.buffer;
  if (!o.tricks.empty()) set_config_value(c, "tricks", o.tricks);
  if (!o.dataset.empty()) set_config_value(c, "dataset", o.dataset);
  if (!o.data_dir.empty()) set_config_value(c, "data_dir", o.data_dir);
  if (!o.method.empty()) set_config_value(c, "method", o.method);
  c.train.validate();
  return c;
}

int cmd_run(const CommonOptions& o, std::ostream& out) {
  const ExperimentConfig c = resolve(o);
  const TaskStream stream = build_stream(c);
  const std::vector<RunReport> runs = run_experiment(c, stream);
  const std::string hash = config_hash(c);
  write_text(fs::path(c.out) / "runs.csv", runs_csv(runs, hash));
  write_text(fs::path(c.out) / "report.json", report_json(c, runs));
  for (const RunReport& r : runs)
    out << r.method << " tricks=" << r.tricks << " seed=" << r.seed << " average=" << fixed(r.average_accuracy, 4)
        << '\n';
  out << "wrote " << (fs::path(c.out) / "runs.csv").string() << '\n';
  return 0;
}

int cmd_ablation(const CommonOptions& o, std::ostream& out) {
  const ExperimentConfig c = resolve(o);
  const TaskStream stream = build_stream(c);
  const std::vector<AblationRow> rows = ablation_suite(stream, c.train, c.seeds);
  write_text(fs::path(c.out) / "ablation.csv", ablation_csv(c, rows));
  write_text(fs::path(c.out) / "ablation.json", ablation_json(c, rows));
  for (const AblationRow& r : rows)
    out << std::left << std::setw(28) << r.label << fixed(r.mean_accuracy, 4) << " +- " << fixed(r.std_accuracy, 4)
        << '\n';
  return 0;
}

struct ToyOptions {
  std::size_t repetitions = 500;
  std::size_t batch = 10;
  std::uint64_t seed = 0;
  std::string out = "results";
};

int cmd_balance_toy(const ToyOptions& o, std::ostream& out) {
  BalanceToyConfig cfg;
  cfg.repetitions = o.repetitions;
  cfg.batch_size = o.batch;
  cfg.seed = o.seed;
  const std::vector<Strategy> strategies{Strategy::Reservoir, Strategy::BalancedReservoir,
                                         Strategy::LossAwareBalancedReservoir, Strategy::Ring};
  const std::vector<BalanceToyStats> stats = balance_toy(cfg, strategies);
  std::ostringstream csv;
  csv << "# replaylab balance v1: " << cfg.classes << " classes x " << cfg.per_class << " items, capacity "
      << cfg.capacity << ", seed " << cfg.seed << "\n";
  const std::string hash = hex64(fnv1a("balance-toy classes=" + std::to_string(cfg.classes) +
                                       " per_class=" + std::to_string(cfg.per_class) + " capacity=" +
                                       std::to_string(cfg.capacity) + " repetitions=" + std::to_string(cfg.repetitions) +
                                       " batch=" + std::to_string(cfg.batch_size)));
  csv << "strategy,seed,config_hash,repetitions,mse_mean,mse_std,below_reservoir_batches";
  for (std::size_t c = 0; c < cfg.classes; ++c) csv << ",count_mean_" << c;
  for (std::size_t c = 0; c < cfg.classes; ++c) csv << ",count_std_" << c;
  csv << '\n';
  for (const BalanceToyStats& s : stats) {
    csv << to_string(s.strategy) << ',' << cfg.seed << ',' << hash << ',' << cfg.repetitions << ',' << fixed(s.mse_mean) << ',' << fixed(s.mse_std) << ','
        << fixed(batch_win_fraction(s, stats[0], cfg.batch_size), 4);
    for (double m : s.mean_counts) csv << ',' << fixed(m, 4);
    for (double m : s.std_counts) csv << ',' << fixed(m, 4);
    csv << '\n';
    out << std::left << std::setw(10) << to_string(s.strategy) << " mse " << fixed(s.mse_mean, 3) << " +- "
        << fixed(s.mse_std, 3) << '\n';
  }
  write_text(fs::path(o.out) / "balance.csv", csv.str());
  return 0;
}

struct OmissionOptions {
  std::size_t classes = 10, capacity = 10, trials = 100000;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_omission(const OmissionOptions& o, std::ostream& out) {
  const double analytic = omission_probability(o.classes, o.capacity);
  const double mc = omission_monte_carlo(o.classes, o.capacity, o.trials, o.seed);
  std::ostringstream csv;
  const std::string hash = hex64(fnv1a("omission classes=" + std::to_string(o.classes) + " capacity=" +
                                       std::to_string(o.capacity) + " trials=" + std::to_string(o.trials)));
  csv << "# replaylab omission v1\nclasses,capacity,trials,seed,config_hash,analytic,monte_carlo,abs_diff\n"
      << o.classes << ',' << o.capacity << ',' << o.trials << ',' << o.seed << ',' << hash << ',' << fixed(analytic) << ','
      << fixed(mc) << ',' << fixed(std::abs(analytic - mc)) << '\n';
  out << csv.str();
  if (!o.out.empty()) write_text(fs::path(o.out) / "omission.csv", csv.str());
  return 0;
}

struct GradcheckOptions {
  std::uint64_t seed = 0;
  std::size_t nets = 20;
  bool corrupt = false;
};

int cmd_gradcheck(const GradcheckOptions& o, std::ostream& out) {
  const std::vector<GradcheckNet> nets =
      gradcheck_suite(o.nets, o.seed, o.corrupt ? BackwardFault::FlipReluMask : BackwardFault::None);
  std::size_t failed = 0;
  for (std::size_t n = 0; n < nets.size(); ++n) {
    const GradcheckResult& r = nets[n].result;
    failed += !r.passed();
    out << "net " << n << " dims " << join(nets[n].dims) << " batch " << nets[n].batch << " params " << r.parameters
        << " failures " << r.failures << " worst_rel " << std::scientific << std::setprecision(3) << r.worst_relative
        << std::defaultfloat << (r.passed() ? " ok" : " FAIL") << '\n';
  }
  out << (failed ? "FAIL" : "PASS") << ": " << (nets.size() - failed) << "/" << nets.size()
      << " nets within tolerance\n";
  return failed ? 1 : 0;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const KeyHandler& h : handlers()) k.push_back({h.name, h.description});
    return k;
  }();
  return keys;
}

void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value) {
  handler(key).set(config, value);
}

std::string get_config_value(const ExperimentConfig& config, std::string_view key) { return handler(key).get(config); }

ExperimentConfig parse_config(std::string_view text, ExperimentConfig base) {
  std::stringstream ss{std::string(text)};
  std::string line;
  std::size_t number = 0;
  while (std::getline(ss, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(number) + ": expected key = value");
    try {
      set_config_value(base, trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(number) + ": " + e.what());
    }
  }
  return base;
}

ExperimentConfig load_config(const std::string& path, ExperimentConfig base) {
  return parse_config(read_text(path), std::move(base));
}

std::string config_to_text(const ExperimentConfig& config) {
  std::string s;
  for (const KeyHandler& h : handlers()) s += std::string(h.name) + " = " + h.get(config) + "\n";
  return s;
}

std::string config_hash(const ExperimentConfig& config) {
  std::string s;
  for (const KeyHandler& h : handlers()) {
    const std::string_view name = h.name;
    if (name == "seeds" || name == "out") continue;
    s += std::string(name) + "=" + h.get(config) + "\n";
  }
  return hex64(fnv1a(s));
}

TaskStream build_stream(const ExperimentConfig& config) {
  Rng rng = make_rng(config.split_seed, 99);
  std::shared_ptr<const Dataset> train, test;
  if (config.dataset == "synthetic") {
    const SyntheticSpec& s = config.synthetic;
    const SyntheticModel model = make_synthetic_model(s.classes, s.dim, s.separation, rng, s.noise);
    train = std::make_shared<const Dataset>(sample_synthetic(model, s.per_class, rng, Split::Train));
    test = std::make_shared<const Dataset>(sample_synthetic(model, s.test_per_class, rng, Split::Test));
  } else {
    const std::string dir = data_dir_of(config);
    train = std::make_shared<const Dataset>(load_fashion_mnist(dir, Split::Train));
    test = std::make_shared<const Dataset>(load_fashion_mnist(dir, Split::Test));
  }
  return make_class_il_tasks(train, test, config.classes_per_task, rng);
}

std::vector<RunReport> run_experiment(const ExperimentConfig& config, const TaskStream& stream) {
  std::vector<RunReport> runs;
  for (std::uint64_t seed : config.seeds) {
    TrainConfig c = config.train;
    c.seed = seed;
    if (config.method == "joint") runs.push_back(run_joint_baseline(stream, c));
    else if (config.method == "sgd") runs.push_back(run_sgd_baseline(stream, c));
    else runs.push_back(run_class_il(stream, c));
  }
  return runs;
}

std::string runs_csv(const std::vector<RunReport>& runs, const std::string& hash) {
  std::ostringstream csv;
  const std::size_t tasks = runs.empty() ? 0 : runs.front().per_task_accuracy.size();
  csv << "# replaylab runs v1\nmethod,tricks,seed,config_hash";
  for (std::size_t t = 0; t < tasks; ++t) csv << ",task_" << t;
  csv << ",average,wall_clock_seconds\n";
  for (const RunReport& r : runs) {
    csv << r.method << ',' << r.tricks << ',' << r.seed << ',' << hash;
    for (double a : r.per_task_accuracy) csv << ',' << fixed(a);
    csv << ',' << fixed(r.average_accuracy) << ',' << fixed(r.wall_clock_seconds, 3) << '\n';
  }
  return csv.str();
}

std::string report_json(const ExperimentConfig& config, const std::vector<RunReport>& runs) {
  Json j;
  j["schema"] = "replaylab-report/1";
  j["config_hash"] = config_hash(config);
  j["config"] = config_json(config);
  Json arr = Json::array();
  for (const RunReport& r : runs) arr.push_back(run_json(r));
  j["runs"] = arr;
  return j.dump(2) + "\n";
}

std::string ablation_csv(const ExperimentConfig& config, const std::vector<AblationRow>& rows) {
  std::ostringstream csv;
  csv << "# replaylab ablation v1\nstep,label,config_hash,seeds,runs,mean_accuracy,std_accuracy,wall_clock_seconds\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ExperimentConfig c = config;
    c.train = rows[i].config;
    double wall = 0.0;
    for (const RunReport& r : rows[i].runs) wall += r.wall_clock_seconds;
    std::string seeds;
    for (const RunReport& r : rows[i].runs) seeds += (seeds.empty() ? "" : ";") + std::to_string(r.seed);
    csv << i << ',' << rows[i].label << ',' << config_hash(c) << ',' << seeds << ',' << rows[i].runs.size() << ','
        << fixed(rows[i].mean_accuracy) << ',' << fixed(rows[i].std_accuracy) << ',' << fixed(wall, 3) << '\n';
  }
  return csv.str();
}

std::string ablation_json(const ExperimentConfig& config, const std::vector<AblationRow>& rows) {
  Json j;
  j["schema"] = "replaylab-ablation/1";
  j["config"] = config_json(config);
  Json arr = Json::array();
  for (const AblationRow& row : rows) {
    ExperimentConfig c = config;
    c.train = row.config;
    Json r;
    r["label"] = row.label;
    r["config_hash"] = config_hash(c);
    r["mean_accuracy"] = row.mean_accuracy;
    r["std_accuracy"] = row.std_accuracy;
    Json runs = Json::array();
    for (const RunReport& run : row.runs) runs.push_back(run_json(run));
    r["runs"] = runs;
    arr.push_back(r);
  }
  j["rows"] = arr;
  return j.dump(2) + "\n";
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"replaylab: experience replay for class-incremental learning"};
  app.require_subcommand(1);

  CommonOptions run_opts, abl_opts;
  CLI::App* run = app.add_subcommand("run", "train over the configured seeds; writes runs.csv and report.json");
  add_common(run, run_opts);
  CLI::App* abl = app.add_subcommand("ablation", "ER with cumulatively enabled tricks; writes ablation.csv");
  add_common(abl, abl_opts);

  ToyOptions toy;
  CLI::App* bal = app.add_subcommand("balance-toy", "buffer class balance on the 6 x 170 toy stream");
  bal->add_option("--repetitions", toy.repetitions, "independent streams")->check(CLI::PositiveNumber);
  bal->add_option("--batch", toy.batch, "repetitions per comparison batch")->check(CLI::PositiveNumber);
  bal->add_option("--seed", toy.seed, "base seed");
  bal->add_option("--out", toy.out, "output directory");

  OmissionOptions om;
  CLI::App* omi = app.add_subcommand("omission", "probability that one class misses a random buffer");
  omi->add_option("-C,--classes", om.classes, "class count");
  omi->add_option("-B,--capacity", om.capacity, "buffer capacity");
  omi->add_option("--trials", om.trials, "Monte-Carlo trials");
  omi->add_option("--seed", om.seed, "seed");
  omi->add_option("--out", om.out, "optional output directory for omission.csv");

  GradcheckOptions gc;
  CLI::App* grad = app.add_subcommand("gradcheck", "finite-difference check of the MLP gradients");
  grad->add_option("--seed", gc.seed, "seed");
  grad->add_option("--nets", gc.nets, "random nets to check")->check(CLI::PositiveNumber);
  grad->add_flag("--corrupt", gc.corrupt, "inject a ReLU-mask fault into backward");

  CLI::App* keys = app.add_subcommand("config-keys", "list every config key with its default");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) return cmd_run(run_opts, out);
    if (*abl) return cmd_ablation(abl_opts, out);
    if (*bal) return cmd_balance_toy(toy, out);
    if (*omi) return cmd_omission(om, out);
    if (*grad) return cmd_gradcheck(gc, out);
    if (*keys) {
      const ExperimentConfig defaults;
      for (const ConfigKey& k : config_keys())
        out << k.name << " = " << get_config_value(defaults, k.name) << "    # " << k.description << '\n';
      return 0;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 4;
  }
  return 4;
}

}  // namespace replaylab
