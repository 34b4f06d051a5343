#pragma once

// Experiment driver behind the command-line verbs: configuration files,
// training runs with per-epoch test curves, task evaluation into metric
// records, and the grid x seed sweep with best-configuration selection.
//
// Config grammar: one `key = value` per line, `#` starts a comment, blank
// lines ignored. Lists are comma separated; integer ranges may be written
// `a..b` (inclusive). Keys:
//
//   dataset          mnist | fashion-mnist | cifar10 | cifar100
//   families         ae, kae, kae:1..kae:3, kan, fourier, wavelet (list)
//   latent           bottleneck width
//   order            polynomial order used by a bare `kae`
//   epochs, batch_size, lr_grid, wd_grid, seeds
//   tasks            reconstruction, retrieval, classification,
//                    denoising-gaussian, denoising-saltpepper, or `all`
//   selection        per-task | reconstruction
//   data_dir, out_dir
//   retrieval_subset, retrieval_k, recall_ns
//   gaussian_sigma, saltpepper_prob, clip_noisy
//   latent_sigmoid, output_sigmoid (true | false | default), init
//   grid_size, spline_order
//   train_limit, test_limit  first rows kept from each split (0 = all)

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "kae/checkpoint.hpp"
#include "kae/data.hpp"
#include "kae/error.hpp"
#include "kae/eval.hpp"
#include "kae/layers.hpp"
#include "kae/model.hpp"
#include "kae/optim.hpp"
#include "kae/records.hpp"

namespace kae {

struct FamilyChoice {
  LayerKind kind = LayerKind::Polynomial;
  unsigned p = 0;  // polynomial order; 0 for other families

  std::string label() const {
    if (kind == LayerKind::Affine) return "ae";
    if (kind == LayerKind::Polynomial) return "kae" + std::to_string(p);
    return std::string(to_string(kind));
  }
  friend bool operator==(const FamilyChoice&, const FamilyChoice&) = default;
};

struct ExperimentConfig {
  std::string dataset = "mnist";
  std::vector<FamilyChoice> families = {{LayerKind::Affine, 0},
                                        {LayerKind::Polynomial, 1},
                                        {LayerKind::Polynomial, 2},
                                        {LayerKind::Polynomial, 3}};
  std::size_t d_latent = 16;
  unsigned order_p = 3;
  std::size_t epochs = 10;
  std::size_t batch_size = 256;
  std::vector<double> lr_grid = {1e-4, 1e-5};
  std::vector<double> wd_grid = {1e-4, 1e-5};
  std::vector<std::uint64_t> seeds = {2024, 2025, 2026, 2027, 2028, 2029, 2030, 2031, 2032, 2033};
  std::vector<Task> tasks = {std::begin(kAllTasks), std::end(kAllTasks)};
  SelectionMode selection = SelectionMode::PerTask;
  std::filesystem::path data_dir = data_dir_from_env();
  std::filesystem::path out_dir = "out";

  std::size_t retrieval_subset = 1000;
  std::size_t retrieval_k = 10;
  std::vector<std::size_t> recall_ns = {10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  double gaussian_sigma = 0.1;
  double saltpepper_prob = 0.05;
  bool clip_noisy = false;

  std::optional<bool> latent_sigmoid;
  std::optional<bool> output_sigmoid;
  InitScheme init = InitScheme::LinearStart;
  unsigned grid_size = 5;
  unsigned spline_order = 3;

  std::size_t train_limit = 0;
  std::size_t test_limit = 0;

  void validate() const {
    auto bad = [](const std::string& m) { throw Error(ErrorKind::InvalidArgument, "config: " + m); };
    if (families.empty()) bad("families is empty");
    if (lr_grid.empty()) bad("lr_grid is empty");
    if (wd_grid.empty()) bad("wd_grid is empty");
    if (seeds.empty()) bad("seeds is empty");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) bad("seeds must be distinct");
    if (tasks.empty()) bad("tasks is empty");
    if (batch_size == 0) bad("batch_size must be >= 1");
    if (d_latent == 0) bad("latent must be >= 1");
    for (double v : lr_grid)
      if (!(v > 0.0)) bad("learning rates must be positive");
    for (double v : wd_grid)
      if (!(v >= 0.0)) bad("weight decays must be >= 0");
    if (retrieval_k == 0) bad("retrieval_k must be >= 1");
    for (auto n : recall_ns)
      if (n < retrieval_k) bad("recall_ns entries must be >= retrieval_k");
  }

  AutoencoderConfig model_config(const FamilyChoice& f, std::size_t d_input, std::uint64_t seed) const {
    AutoencoderConfig c;
    c.d_input = d_input;
    c.d_latent = d_latent;
    c.family = f.kind;
    c.order_p = f.kind == LayerKind::Polynomial ? f.p : order_p;
    c.grid_size = grid_size;
    c.spline_order = spline_order;
    c.init = init;
    c.latent_sigmoid = latent_sigmoid;
    c.output_sigmoid = output_sigmoid;
    c.master_seed = seed;
    return c;
  }
};

// ---- config parsing ---------------------------------------------------------------------

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  for (auto part : split(s, ',')) {
    const auto t = trim(part);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

inline FamilyChoice parse_family(std::string_view s, unsigned default_order) {
  if (s.starts_with("kae:") || s.starts_with("polynomial:")) {
    const auto colon = s.find(':');
    unsigned p = 0;
    const auto tail = s.substr(colon + 1);
    auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), p);
    if (ec != std::errc() || ptr != tail.data() + tail.size() || p == 0)
      throw Error(ErrorKind::Usage, "bad polynomial order in family '" + std::string(s) + "'");
    return {LayerKind::Polynomial, p};
  }
  const auto k = parse_layer_kind(s);
  if (!k)
    throw Error(ErrorKind::Usage, "unknown family '" + std::string(s) +
                                      "' (expected ae, kae, kae:P, kan, fourier, wavelet)");
  return {*k, *k == LayerKind::Polynomial ? default_order : 0u};
}

inline std::vector<Task> parse_tasks(std::string_view s) {
  std::vector<Task> out;
  for (const auto& name : split_list(s)) {
    if (name == "all") {
      out.assign(std::begin(kAllTasks), std::end(kAllTasks));
      continue;
    }
    const auto t = parse_task(name);
    if (!t)
      throw Error(ErrorKind::Usage, "unknown task '" + name +
                                        "' (expected reconstruction, retrieval, classification, denoising-gaussian, "
                                        "denoising-saltpepper)");
    if (std::find(out.begin(), out.end(), *t) == out.end()) out.push_back(*t);
  }
  return out;
}

template <typename Int>
std::vector<Int> parse_int_list(std::string_view s, std::string_view key) {
  std::vector<Int> out;
  for (const auto& item : split_list(s)) {
    const auto dots = item.find("..");
    if (dots != std::string::npos) {
      const Int a = parse_int<Int>(trim(std::string_view(item).substr(0, dots)), 0, key);
      const Int b = parse_int<Int>(trim(std::string_view(item).substr(dots + 2)), 0, key);
      if (b < a) throw Error(ErrorKind::Parse, std::string(key) + ": empty range " + item);
      for (Int v = a; v <= b; ++v) out.push_back(v);
    } else {
      out.push_back(parse_int<Int>(item, 0, key));
    }
  }
  return out;
}

inline std::vector<double> parse_double_list(std::string_view s, std::string_view key) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) out.push_back(parse_double(item, 0, key));
  return out;
}

inline bool parse_bool(std::string_view s, std::string_view key) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw Error(ErrorKind::Parse, std::string(key) + ": expected true or false, got '" + std::string(s) + "'");
}

inline std::optional<bool> parse_optional_bool(std::string_view s, std::string_view key) {
  if (s == "default") return std::nullopt;
  return parse_bool(s, key);
}

}  // namespace detail

/// Applies one `key = value` setting. Keys and values are already trimmed.
inline void apply_setting(ExperimentConfig& c, std::string_view key, std::string_view value) {
  using namespace detail;
  if (key == "dataset") {
    c.dataset = std::string(value);
  } else if (key == "families" || key == "family") {
    c.families.clear();
    for (const auto& f : split_list(value)) c.families.push_back(parse_family(f, c.order_p));
  } else if (key == "latent" || key == "d_latent") {
    c.d_latent = parse_int<std::size_t>(value, 0, key);
  } else if (key == "order" || key == "order_p") {
    c.order_p = parse_int<unsigned>(value, 0, key);
  } else if (key == "epochs") {
    c.epochs = parse_int<std::size_t>(value, 0, key);
  } else if (key == "batch_size") {
    c.batch_size = parse_int<std::size_t>(value, 0, key);
  } else if (key == "lr_grid" || key == "lr") {
    c.lr_grid = parse_double_list(value, key);
  } else if (key == "wd_grid" || key == "wd") {
    c.wd_grid = parse_double_list(value, key);
  } else if (key == "seeds") {
    c.seeds = parse_int_list<std::uint64_t>(value, key);
  } else if (key == "tasks") {
    c.tasks = parse_tasks(value);
  } else if (key == "selection" || key == "selection_metric") {
    const auto m = parse_selection(value);
    if (!m) throw Error(ErrorKind::Parse, "selection: expected per-task or reconstruction");
    c.selection = *m;
  } else if (key == "data_dir") {
    c.data_dir = std::string(value);
  } else if (key == "out_dir") {
    c.out_dir = std::string(value);
  } else if (key == "retrieval_subset") {
    c.retrieval_subset = parse_int<std::size_t>(value, 0, key);
  } else if (key == "retrieval_k") {
    c.retrieval_k = parse_int<std::size_t>(value, 0, key);
  } else if (key == "recall_ns") {
    c.recall_ns = parse_int_list<std::size_t>(value, key);
  } else if (key == "gaussian_sigma") {
    c.gaussian_sigma = parse_double(value, 0, key);
  } else if (key == "saltpepper_prob") {
    c.saltpepper_prob = parse_double(value, 0, key);
  } else if (key == "clip_noisy") {
    c.clip_noisy = parse_bool(value, key);
  } else if (key == "latent_sigmoid") {
    c.latent_sigmoid = parse_optional_bool(value, key);
  } else if (key == "output_sigmoid") {
    c.output_sigmoid = parse_optional_bool(value, key);
  } else if (key == "init") {
    const auto s = parse_init_scheme(value);
    if (!s) throw Error(ErrorKind::Parse, "init: expected linear-start or uniform-all");
    c.init = *s;
  } else if (key == "grid_size") {
    c.grid_size = parse_int<unsigned>(value, 0, key);
  } else if (key == "spline_order") {
    c.spline_order = parse_int<unsigned>(value, 0, key);
  } else if (key == "train_limit") {
    c.train_limit = parse_int<std::size_t>(value, 0, key);
  } else if (key == "test_limit") {
    c.test_limit = parse_int<std::size_t>(value, 0, key);
  } else {
    throw Error(ErrorKind::Parse, "unknown key '" + std::string(key) + "'");
  }
}

inline ExperimentConfig parse_config(std::string_view text, ExperimentConfig base = {}) {
  std::size_t line_no = 0;
  for (auto line : detail::split(text, '\n')) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": expected key = value");
    const auto key = detail::trim(line.substr(0, eq));
    const auto value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": missing key");
    try {
      apply_setting(base, key, value);
    } catch (const Error& e) {
      throw Error(e.kind() == ErrorKind::Usage ? ErrorKind::Usage : ErrorKind::Parse,
                  "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

inline ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {}) {
  try {
    return parse_config(read_text(path), std::move(base));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Io) throw;
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

// ---- runs ----------------------------------------------------------------------------------

struct RunKey {
  std::string dataset;
  std::size_t d_latent = 0;
  FamilyChoice family;
  double lr = 0.0;
  double wd = 0.0;
  std::uint64_t seed = 0;

  /// e.g. "mnist-d16-kae3-lr1e-04-wd1e-05-s2024"
  std::string run_id() const {
    return dataset + "-d" + std::to_string(d_latent) + "-" + family.label() + "-lr" + detail::format_double(lr) +
           "-wd" + detail::format_double(wd) + "-s" + std::to_string(seed);
  }
};

struct CurvePoint {
  std::string run_id;
  FamilyChoice family;
  double lr = 0.0;
  double wd = 0.0;
  std::uint64_t seed = 0;
  std::size_t epoch = 0;  // 1-based
  double test_mse = 0.0;
};

inline constexpr std::string_view kCurvesHeader = "run_id,family,p,lr,wd,seed,epoch,test_mse";

inline std::string curve_csv_line(const CurvePoint& c) {
  return c.run_id + "," + std::string(to_string(c.family.kind)) + "," + std::to_string(c.family.p) + "," +
         detail::format_double(c.lr) + "," + detail::format_double(c.wd) + "," + std::to_string(c.seed) + "," +
         std::to_string(c.epoch) + "," + detail::format_double(c.test_mse);
}

struct DataBundle {
  Dataset train;
  Dataset test;
};

inline Dataset take_prefix(Dataset ds, std::size_t limit) {
  if (limit == 0 || limit >= ds.size()) return ds;
  ds.X = slice_rows(ds.X, 0, limit);
  ds.labels.resize(limit);
  return ds;
}

inline DataBundle load_data(const ExperimentConfig& c) {
  return {take_prefix(load_named(c.dataset, Split::Train, c.data_dir), c.train_limit),
          take_prefix(load_named(c.dataset, Split::Test, c.data_dir), c.test_limit)};
}

struct TrainedRun {
  RunKey key;
  Autoencoder model;
  AdamState optimizer;
  std::vector<double> test_curve;  // test MSE after each epoch
};

/// Trains one (family, lr, wd, seed) point: parameters from the seed's "init"
/// stream, batch order from its "shuffle" stream, test MSE after every epoch.
inline TrainedRun train_run(const ExperimentConfig& c, const RunKey& key, const DataBundle& data,
                            std::ostream* log = nullptr) {
  TrainedRun run{key, build(c.model_config(key.family, data.train.dim(), key.seed)), {}, {}};
  run.optimizer = make_adam(run.model, key.lr, key.wd);
  RngStream shuffle = RngStream::derive(key.seed, "shuffle");
  for (std::size_t epoch = 1; epoch <= c.epochs; ++epoch) {
    for (const auto& idx : batch_indices(data.train.size(), c.batch_size, shuffle)) {
      const auto lg = loss_and_grads(run.model, gather_rows(data.train.X, idx));
      step(run.model, lg.grads, run.optimizer);
    }
    run.test_curve.push_back(reconstruction_error(run.model, data.test));
    if (log) *log << key.run_id() << " epoch " << epoch << " test_mse " << run.test_curve.back() << "\n" << std::flush;
  }
  return run;
}

inline std::vector<CurvePoint> curve_points(const TrainedRun& r) {
  std::vector<CurvePoint> out;
  for (std::size_t e = 0; e < r.test_curve.size(); ++e)
    out.push_back({r.key.run_id(), r.key.family, r.key.lr, r.key.wd, r.key.seed, e + 1, r.test_curve[e]});
  return out;
}

/// Evaluates `tasks` on a trained model. Every random choice comes from a
/// stream derived from the seed and the task, so families sharing a seed see
/// the same retrieval subset and the same noise.
inline std::vector<MetricRecord> evaluate_tasks(const ExperimentConfig& c, const RunKey& key, const Autoencoder& model,
                                                const DataBundle& data, const std::vector<Task>& tasks) {
  if (model.config.d_input != data.test.dim())
    throw Error(ErrorKind::Shape, "model expects d_input=" + std::to_string(model.config.d_input) + " but " +
                                      data.test.name + " has dimension " + std::to_string(data.test.dim()));
  std::vector<MetricRecord> out;
  auto rec = [&](Task t, double v, std::size_t n = 0) {
    MetricRecord r;
    r.task = t;
    r.recall_n = n;
    r.dataset = key.dataset;
    r.d_latent = key.d_latent;
    r.family = std::string(to_string(key.family.kind));
    r.p = key.family.p;
    r.lr = key.lr;
    r.wd = key.wd;
    r.seed = key.seed;
    r.value = v;
    out.push_back(std::move(r));
  };
  for (Task t : tasks) {
    switch (t) {
      case Task::Reconstruction:
        rec(t, reconstruction_error(model, data.test));
        break;
      case Task::Retrieval: {
        RngStream s = RngStream::derive(key.seed, "subsample:retrieval");
        const auto sub = subsample(data.test, std::min(c.retrieval_subset, data.test.size()), s);
        const auto curve = recall_curve(sub.X, encode_all(model, sub.X), c.retrieval_k, c.recall_ns);
        for (std::size_t i = 0; i < curve.size(); ++i) rec(t, curve[i], c.recall_ns[i]);
        break;
      }
      case Task::Classification:
        rec(t, knn_classify(encode_all(model, data.train.X), data.train.labels, encode_all(model, data.test.X),
                            data.test.labels));
        break;
      case Task::DenoisingGaussian:
      case Task::DenoisingSaltPepper: {
        RngStream s = RngStream::derive(key.seed, "noise:" + std::string(to_string(t)));
        NoiseSpec noise{t == Task::DenoisingGaussian ? NoiseKind::Gaussian : NoiseKind::SaltPepper,
                        t == Task::DenoisingGaussian ? c.gaussian_sigma : c.saltpepper_prob, c.clip_noisy};
        rec(t, denoising_error(model, data.test, noise, s));
        break;
      }
    }
  }
  return out;
}

inline std::vector<RunKey> run_keys(const ExperimentConfig& c) {
  std::vector<RunKey> out;
  for (const auto& f : c.families)
    for (double lr : c.lr_grid)
      for (double wd : c.wd_grid)
        for (auto seed : c.seeds) out.push_back({c.dataset, c.d_latent, f, lr, wd, seed});
  return out;
}

inline std::filesystem::path checkpoint_path(const ExperimentConfig& c, const RunKey& k) {
  return c.out_dir / "checkpoints" / (k.run_id() + ".kaeb");
}

inline void ensure_out_dir(const ExperimentConfig& c) {
  std::error_code ec;
  std::filesystem::create_directories(c.out_dir / "checkpoints", ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create output directory " + c.out_dir.string() + ": " + ec.message());
}

namespace detail {

inline void append_lines(const std::filesystem::path& p, std::string_view header, const std::vector<std::string>& lines) {
  const bool fresh = !std::filesystem::exists(p) || std::filesystem::file_size(p) == 0;
  std::ofstream os(p, std::ios::binary | std::ios::app);
  if (!os) throw Error(ErrorKind::Io, "cannot open " + p.string() + " for writing");
  if (fresh) os << header << '\n';
  for (const auto& l : lines) os << l << '\n';
  if (!os) throw Error(ErrorKind::Io, "write failed for " + p.string());
}

}  // namespace detail

// ---- verbs -----------------------------------------------------------------------------------

/// Trains every (family, lr, wd, seed) point, writes one checkpoint per run
/// (with optimizer state) and appends the test curves to out_dir/curves.csv.
inline std::vector<TrainedRun> cmd_train(const ExperimentConfig& c, std::ostream* log = nullptr) {
  c.validate();
  const auto data = load_data(c);
  ensure_out_dir(c);
  std::vector<TrainedRun> runs;
  for (const auto& key : run_keys(c)) {
    auto run = train_run(c, key, data, log);
    save_checkpoint(checkpoint_path(c, key), run.model, &run.optimizer);
    std::vector<std::string> lines;
    for (const auto& p : curve_points(run)) lines.push_back(curve_csv_line(p));
    detail::append_lines(c.out_dir / "curves.csv", kCurvesHeader, lines);
    runs.push_back(std::move(run));
  }
  return runs;
}

/// Evaluates a checkpoint on `tasks` and appends the records to
/// out_dir/records.csv. The seed is the checkpoint's master seed; lr and wd
/// come from its optimizer block when present.
inline std::vector<MetricRecord> cmd_eval(const std::filesystem::path& checkpoint, const std::vector<Task>& tasks,
                                          const ExperimentConfig& c) {
  const auto ck = load_checkpoint_full(checkpoint);
  const auto data = load_data(c);
  RunKey key{c.dataset, ck.model.config.d_latent,
             {ck.model.config.family, ck.model.config.family == LayerKind::Polynomial ? ck.model.config.order_p : 0u},
             ck.optimizer ? ck.optimizer->lr : 0.0, ck.optimizer ? ck.optimizer->weight_decay : 0.0,
             ck.model.config.master_seed};
  ExperimentConfig local = c;
  local.d_latent = key.d_latent;
  auto records = evaluate_tasks(local, key, ck.model, data, tasks);
  ensure_out_dir(c);
  std::vector<std::string> lines;
  for (const auto& r : records) lines.push_back(record_csv_line(r));
  detail::append_lines(c.out_dir / "records.csv", kRecordsHeader, lines);
  return records;
}

struct BenchResult {
  std::vector<MetricRecord> records;  // in run_id order
  std::vector<CurvePoint> curves;
  std::vector<Aggregate> aggregates;
  std::vector<Aggregate> selected;
  std::size_t spot_checked = 0;
};

/// Re-derives records from their saved checkpoints; throws if any differ.
inline void spot_check(const ExperimentConfig& c, const DataBundle& data, const std::vector<MetricRecord>& records,
                       std::size_t count, std::uint64_t seed) {
  RngStream s = RngStream::derive(seed, "spotcheck");
  const auto picks = subsample_indices(records.size(), std::min(count, records.size()), s);
  for (auto i : picks) {
    const auto& r = records[i];
    const auto kind = parse_layer_kind(r.family);
    RunKey key{r.dataset, r.d_latent, {*kind, r.p}, r.lr, r.wd, r.seed};
    const auto model = load_checkpoint(checkpoint_path(c, key));
    const auto again = evaluate_tasks(c, key, model, data, {r.task});
    const auto match = std::find_if(again.begin(), again.end(), [&](const MetricRecord& x) { return x == r; });
    if (match == again.end())
      throw Error(ErrorKind::PayloadMismatch, "spot check failed: " + r.task_label() + " for " + key.run_id() +
                                                  " does not reproduce from its checkpoint");
  }
}

/// Full sweep: train every grid point and seed, evaluate the configured tasks,
/// aggregate over seeds and select the best grid point per family. Writes
/// records.csv, curves.csv, aggregates.csv, report.json and report.md under
/// out_dir (replacing earlier files), then spot-checks 3 records against
/// their checkpoints.
inline BenchResult cmd_bench(const ExperimentConfig& c, std::ostream* log = nullptr) {
  c.validate();
  const auto data = load_data(c);
  ensure_out_dir(c);

  auto keys = run_keys(c);
  std::sort(keys.begin(), keys.end(), [](const RunKey& a, const RunKey& b) { return a.run_id() < b.run_id(); });

  BenchResult res;
  for (const auto& key : keys) {
    const auto run = train_run(c, key, data, log);
    save_checkpoint(checkpoint_path(c, key), run.model, &run.optimizer);
    for (auto& p : curve_points(run)) res.curves.push_back(std::move(p));
    for (auto& r : evaluate_tasks(c, key, run.model, data, c.tasks)) res.records.push_back(std::move(r));
    if (log) *log << key.run_id() << " done\n" << std::flush;
  }
  res.aggregates = aggregate(res.records);
  res.selected = select_best(res.aggregates, c.selection);

  write_text(c.out_dir / "records.csv", records_to_csv(res.records));
  std::string curves(kCurvesHeader);
  curves += '\n';
  for (const auto& p : res.curves) curves += curve_csv_line(p) + '\n';
  write_text(c.out_dir / "curves.csv", curves);
  write_text(c.out_dir / "aggregates.csv", aggregates_to_csv(res.aggregates));
  write_text(c.out_dir / "report.json", report_to_json(res.records, c.selection).dump(2) + "\n");
  write_text(c.out_dir / "report.md", report_to_markdown(res.records, c.selection));

  spot_check(c, data, res.records, 3, c.seeds.front());
  res.spot_checked = std::min<std::size_t>(3, res.records.size());
  return res;
}

enum class ReportFormat { Csv, Json, Markdown };

inline std::optional<ReportFormat> parse_report_format(std::string_view s) {
  if (s == "csv") return ReportFormat::Csv;
  if (s == "json") return ReportFormat::Json;
  if (s == "markdown" || s == "markdown-table" || s == "md") return ReportFormat::Markdown;
  return std::nullopt;
}

/// Renders a records file: csv gives the aggregate table (selected rows),
/// json the full report object, markdown one table per task.
inline std::string render_report(const std::vector<MetricRecord>& records, ReportFormat fmt,
                                 SelectionMode mode = SelectionMode::PerTask) {
  switch (fmt) {
    case ReportFormat::Csv:
      return aggregates_to_csv(records.empty() ? std::vector<Aggregate>{} : select_best(aggregate(records), mode));
    case ReportFormat::Json:
      return report_to_json(records, mode).dump(2) + "\n";
    case ReportFormat::Markdown:
      return report_to_markdown(records, mode);
  }
  return {};
}

inline std::string cmd_report(const std::filesystem::path& records_path, ReportFormat fmt,
                              SelectionMode mode = SelectionMode::PerTask) {
  return render_report(read_records(records_path), fmt, mode);
}

}  // namespace kae
