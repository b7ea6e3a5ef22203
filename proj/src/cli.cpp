#include "ltc/cli.hpp"

#include <chrono>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ltc/error.hpp"
#include "ltc/metrics.hpp"
#include "ltc/parallel.hpp"

namespace ltc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

void ExperimentConfig::validate() const {
  train.validate();
  pool.validate();
  require(repeats >= 1, Errc::InvalidArgument, "repeats must be >= 1");
  require(k >= 0, Errc::InvalidArgument, "k must be >= 0");
  for (Index kt : task_k) require(kt >= 1, Errc::InvalidArgument, "per-task k must be >= 1");
  require(stream.passes >= 1, Errc::InvalidArgument, "passes must be >= 1");
}

namespace {

std::vector<std::vector<int>> parse_groups(const std::string& text) {
  // "0,1;2,3" -> {{0,1},{2,3}}
  std::vector<std::vector<int>> groups;
  std::stringstream outer(text);
  std::string part;
  while (std::getline(outer, part, ';')) {
    std::vector<int> g;
    std::stringstream inner(part);
    std::string item;
    while (std::getline(inner, item, ','))
      if (!item.empty()) g.push_back(std::stoi(item));
    require(!g.empty(), Errc::InvalidArgument, "empty class group in '" + text + "'");
    groups.push_back(std::move(g));
  }
  return groups;
}

template <typename T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(static_cast<T>(std::stoll(item)));
  return out;
}

}  // namespace

void apply_config_json(ExperimentConfig& cfg, const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(Errc::MalformedFile, std::string("config: ") + e.what());
  }
  require(j.is_object(), Errc::MalformedFile, "config must be a JSON object");
  auto& t = cfg.train;
  auto& m = cfg.train.model;
  const std::map<std::string, std::function<void(const json&)>> keys = {
      {"data", [&](const json& v) { cfg.data = v.get<std::string>(); }},
      {"format", [&](const json& v) { cfg.format = parse_format(v.get<std::string>()); }},
      {"labels", [&](const json& v) { cfg.labels = fs::path(v.get<std::string>()); }},
      {"k", [&](const json& v) { cfg.k = v.get<Index>(); }},
      {"task_k", [&](const json& v) { cfg.task_k = v.get<std::vector<Index>>(); }},
      {"pretrain_epochs", [&](const json& v) { t.pretrain_epochs = v.get<int>(); }},
      {"train_epochs", [&](const json& v) { t.train_epochs = v.get<int>(); }},
      {"batch_size", [&](const json& v) { t.batch_size = v.get<Index>(); }},
      {"lr", [&](const json& v) { t.lr = v.get<double>(); }},
      {"alpha", [&](const json& v) { t.alpha = v.get<double>(); }},
      {"linkage", [&](const json& v) { t.linkage = tc::parse_linkage(v.get<std::string>()); }},
      {"conv_channels", [&](const json& v) { m.conv_channels = v.get<Index>(); }},
      {"kernel_width", [&](const json& v) { m.kernel_width = v.get<Index>(); }},
      {"lstm_hidden_1", [&](const json& v) { m.lstm_hidden_1 = v.get<Index>(); }},
      {"lstm_hidden_2", [&](const json& v) { m.lstm_hidden_2 = v.get<Index>(); }},
      {"attention_width", [&](const json& v) { m.attention_width = v.get<Index>(); }},
      {"activation", [&](const json& v) { m.activation = nn::parse_activation(v.get<std::string>()); }},
      {"delta", [&](const json& v) { cfg.pool.delta = v.get<double>(); }},
      {"refine_band", [&](const json& v) { cfg.pool.refine_band = v.get<double>(); }},
      {"pool_capacity", [&](const json& v) { cfg.pool.capacity = v.get<std::size_t>(); }},
      {"replay_cap", [&](const json& v) { cfg.pool.replay_cap = v.get<Index>(); }},
      {"stream", [&](const json& v) { cfg.stream_mode = parse_stream_mode(v.get<std::string>()); }},
      {"groups", [&](const json& v) { cfg.stream.class_groups = v.get<std::vector<std::vector<int>>>(); }},
      {"group_sizes",
       [&](const json& v) { cfg.stream.class_groups = groups_from_sizes(v.get<std::vector<int>>()); }},
      {"passes", [&](const json& v) { cfg.stream.passes = v.get<int>(); }},
      {"drift_batches", [&](const json& v) { cfg.stream.num_batches = v.get<int>(); }},
      {"drift_batch_size", [&](const json& v) { cfg.stream.batch_size = v.get<int>(); }},
      {"max_fraction", [&](const json& v) { cfg.stream.max_fraction = v.get<double>(); }},
      {"ablate_single_model", [&](const json& v) { cfg.ablate_single_model = v.get<bool>(); }},
      {"out", [&](const json& v) { cfg.out = v.get<std::string>(); }},
      {"seed", [&](const json& v) { cfg.seed = v.get<std::uint64_t>(); }},
      {"repeats", [&](const json& v) { cfg.repeats = v.get<int>(); }},
      {"timing", [&](const json& v) { cfg.timing = v.get<bool>(); }},
  };
  for (const auto& [key, value] : j.items()) {
    auto it = keys.find(key);
    require(it != keys.end(), Errc::InvalidArgument, "unknown config key '" + key + "'");
    try {
      it->second(value);
    } catch (const json::exception& e) {
      fail(Errc::MalformedFile, "config key '" + key + "': " + e.what());
    }
  }
}

TimeSeriesDataset prepare_dataset(const ExperimentConfig& cfg) {
  require(!cfg.data.empty(), Errc::InvalidArgument, "no dataset given (--data)");
  const DataFormat format = cfg.format.value_or(cfg.data.extension() == ".bin" ? DataFormat::Binary : DataFormat::LongCSV);
  TimeSeriesDataset ds = load_dataset(cfg.data, format, cfg.labels);
  return normalize(pad_time(ds, 4));
}

// --- results ---------------------------------------------------------------

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(12) << x;
  return os.str();
}

std::string fmt(const std::optional<double>& x) { return x ? fmt(*x) : std::string(); }

Index resolve_k(const ExperimentConfig& cfg, const TimeSeriesDataset& ds) {
  if (cfg.k > 0) return cfg.k;
  require(ds.num_classes.has_value(), Errc::InvalidArgument, "k not given and the dataset has no labels");
  return *ds.num_classes;
}

ResultRow base_row(const TimeSeriesDataset& ds, Index k, std::uint64_t seed, const std::string& algorithm) {
  ResultRow r;
  r.dataset = ds.name;
  r.n = ds.n;
  r.length = ds.length;
  r.vars = ds.vars;
  r.classes = ds.num_classes;
  r.k = k;
  r.seed = std::to_string(seed);
  r.algorithm = algorithm;
  return r;
}

void score(ResultRow& r, const TimeSeriesDataset& ds, const std::vector<int>& pred) {
  if (!ds.labels) return;
  r.accuracy = metrics::clustering_accuracy(pred, *ds.labels);
  r.purity = metrics::purity(pred, *ds.labels);
}

std::vector<ResultRow> with_mean(std::vector<ResultRow> rows) {
  if (rows.size() < 2) return rows;
  ResultRow mean = rows.front();
  mean.seed = "mean";
  auto avg = [&](std::optional<double> ResultRow::*field) -> std::optional<double> {
    double s = 0.0;
    for (const auto& r : rows) {
      if (!(r.*field)) return std::nullopt;
      s += *(r.*field);
    }
    return s / static_cast<double>(rows.size());
  };
  mean.accuracy = avg(&ResultRow::accuracy);
  mean.purity = avg(&ResultRow::purity);
  mean.mse_final = avg(&ResultRow::mse_final);
  mean.kld_final = avg(&ResultRow::kld_final);
  mean.wall_seconds = 0.0;
  for (const auto& r : rows) mean.wall_seconds += r.wall_seconds / static_cast<double>(rows.size());
  rows.push_back(mean);
  return rows;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, Errc::DiskWriteFailure, "cannot create " + dir.string());
}

void write_labels(const fs::path& path, const std::vector<int>& labels) {
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), Errc::DiskWriteFailure, "cannot write " + path.string());
  out << "sample_id,cluster\n";
  for (std::size_t i = 0; i < labels.size(); ++i) out << i << ',' << labels[i] << '\n';
}

}  // namespace

std::vector<ResultRow> cmd_cluster(const ExperimentConfig& cfg) {
  cfg.validate();
  const TimeSeriesDataset ds = prepare_dataset(cfg);
  const Index k = resolve_k(cfg, ds);
  std::vector<ResultRow> rows(static_cast<std::size_t>(cfg.repeats));
  make_dir(cfg.out);
  parallel_for(rows.size(), [&](std::size_t r) {
    train::TrainConfig tcfg = cfg.train;
    tcfg.seed = cfg.seed + r;
    const auto t0 = std::chrono::steady_clock::now();
    const train::TrainedModel model = train::train_full(ds, k, tcfg);
    const double wall = seconds_since(t0);
    ResultRow row = base_row(ds, k, tcfg.seed, "ltc");
    score(row, ds, model.assignments);
    for (const auto& rec : model.trace) (rec.phase == train::Phase::Mse ? row.mse_final : row.kld_final) = rec.loss;
    row.wall_seconds = cfg.timing ? wall : 0.0;
    const fs::path run_dir = cfg.out / "runs" / ("seed_" + std::to_string(tcfg.seed));
    make_dir(run_dir);
    train::write_trace_csv(run_dir / "trace.csv", model.trace);
    write_labels(run_dir / "assignments.csv", model.assignments);
    rows[r] = std::move(row);
  });
  rows = with_mean(std::move(rows));
  write_results_csv(cfg.out / "results.csv", rows);
  return rows;
}

std::vector<ResultRow> cmd_baseline(const ExperimentConfig& cfg) {
  cfg.validate();
  const TimeSeriesDataset ds = prepare_dataset(cfg);
  const Index k = resolve_k(cfg, ds);
  const Eigen::MatrixXd X = ds.flattened();
  std::vector<ResultRow> rows;
  for (int r = 0; r < cfg.repeats; ++r) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(r);
    const auto t0 = std::chrono::steady_clock::now();
    const metrics::KMeansResult km = metrics::kmeans(X, k, seed);
    ResultRow row = base_row(ds, k, seed, "kmeans");
    row.wall_seconds = cfg.timing ? seconds_since(t0) : 0.0;
    score(row, ds, km.labels);
    rows.push_back(std::move(row));
  }
  rows = with_mean(std::move(rows));
  make_dir(cfg.out);
  write_results_csv(cfg.out / "results.csv", rows);
  return rows;
}

void write_results_csv(const fs::path& path, const std::vector<ResultRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), Errc::DiskWriteFailure, "cannot write " + path.string());
  out << "dataset,n,l,v,c,k,seed,accuracy,purity,mse_final,kld_final,wall_seconds,algorithm\n";
  for (const auto& r : rows) {
    out << r.dataset << ',' << r.n << ',' << r.length << ',' << r.vars << ',';
    if (r.classes) out << *r.classes;
    out << ',' << r.k << ',' << r.seed << ',' << fmt(r.accuracy) << ',' << fmt(r.purity) << ',' << fmt(r.mse_final)
        << ',' << fmt(r.kld_final) << ',' << fmt(r.wall_seconds) << ',' << r.algorithm << '\n';
  }
  require(static_cast<bool>(out), Errc::DiskWriteFailure, "cannot write " + path.string());
}

// --- lifelong --------------------------------------------------------------

std::vector<LifelongRow> cmd_lifelong(const ExperimentConfig& cfg) {
  cfg.validate();
  const TimeSeriesDataset ds = prepare_dataset(cfg);
  const TaskStream stream = make_stream(ds, cfg.stream_mode, cfg.stream, cfg.seed);
  const std::size_t distinct = stream.tasks.size() / static_cast<std::size_t>(cfg.stream.passes);

  std::vector<Index> task_k(distinct);
  for (std::size_t t = 0; t < distinct; ++t) {
    if (!cfg.task_k.empty()) {
      task_k[t] = cfg.task_k[std::min(t, cfg.task_k.size() - 1)];
    } else {
      const auto& labels = *stream.tasks[t].labels;
      task_k[t] = static_cast<Index>(std::set<int>(labels.begin(), labels.end()).size());
    }
  }

  const fs::path pool_dir = cfg.out / "pool";
  make_dir(cfg.out);
  std::error_code ec;
  fs::remove_all(pool_dir, ec);
  lifelong::ModelPool pool;
  pool.config = cfg.pool;
  pool.storage_dir = pool_dir;
  train::TrainConfig tcfg = cfg.train;
  tcfg.seed = cfg.seed;
  const lifelong::StepOptions options{cfg.ablate_single_model};

  std::vector<LifelongRow> rows;
  std::vector<bool> seen(distinct, false);
  for (std::size_t step = 0; step < stream.tasks.size(); ++step) {
    const std::size_t task_id = step % distinct;
    const TimeSeriesDataset& task = stream.tasks[step];
    const lifelong::StepResult res = lifelong::lifelong_step(pool, task, task_k[task_id], tcfg, options);
    seen[task_id] = true;

    LifelongRow row;
    row.step = static_cast<int>(step);
    row.task_id = static_cast<int>(task_id);
    row.decision = res.decision.kind;
    row.v = res.decision.v;
    row.pool_size = pool.entries.size();
    row.acc_task = metrics::clustering_accuracy(res.labels, *task.labels);
    row.acc_per_task.assign(distinct, std::nullopt);
    for (std::size_t j = 0; j < distinct; ++j) {
      if (!seen[j]) continue;
      const auto ev = lifelong::evaluate_task(pool, stream.tasks[j]);
      row.acc_per_task[j] = metrics::clustering_accuracy(ev.labels, *stream.tasks[j].labels);
    }
    rows.push_back(std::move(row));
  }
  lifelong::save_pool(pool, pool_dir);
  write_lifelong_csv(cfg.out / "lifelong.csv", rows);
  return rows;
}

void write_lifelong_csv(const fs::path& path, const std::vector<LifelongRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), Errc::DiskWriteFailure, "cannot write " + path.string());
  const std::size_t distinct = rows.empty() ? 0 : rows.front().acc_per_task.size();
  out << "step,task_id,decision,v,pool_size,acc_task";
  for (std::size_t j = 0; j < distinct; ++j) out << ",acc_task_" << j;
  out << '\n';
  for (const auto& r : rows) {
    out << r.step << ',' << r.task_id << ',' << lifelong::to_string(r.decision) << ',' << fmt(r.v) << ','
        << r.pool_size << ',' << fmt(r.acc_task);
    for (const auto& a : r.acc_per_task) out << ',' << fmt(a);
    out << '\n';
  }
}

// --- pool ------------------------------------------------------------------

namespace {

json read_manifest(const fs::path& path) {
  require(fs::exists(path), Errc::MissingCheckpoint, "no checkpoint at " + path.string());
  std::ifstream in(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(Errc::MalformedFile, path.string() + ": " + e.what());
  }
}

}  // namespace

void cmd_pool(PoolAction action, const fs::path& pool_dir, std::ostream& out, const std::optional<fs::path>& dest,
              std::optional<int> id) {
  const json manifest = read_manifest(pool_dir / "pool.json");
  switch (action) {
    case PoolAction::List:
      out << "id,p_c,h,created_at\n";
      for (const auto& e : manifest.at("entries"))
        out << e.at("id").get<int>() << ',' << fmt(e.at("p_c").get<double>()) << ',' << e.at("habituation").get<int>()
            << ',' << e.at("created_at").get<int>() << '\n';
      break;
    case PoolAction::Export: {
      require(dest.has_value(), Errc::InvalidArgument, "export needs a destination (--dest)");
      make_dir(*dest);
      std::error_code ec;
      fs::copy(pool_dir, *dest, fs::copy_options::recursive | fs::copy_options::overwrite_existing, ec);
      require(!ec, Errc::DiskWriteFailure, "cannot export to " + dest->string() + ": " + ec.message());
      out << "exported " << pool_dir.string() << " to " << dest->string() << '\n';
      break;
    }
    case PoolAction::Inspect: {
      require(id.has_value(), Errc::InvalidArgument, "inspect needs an entry id (--id)");
      const std::string name = std::to_string(*id);
      fs::path entry = pool_dir / "entries" / name / "entry.json";
      if (!fs::exists(entry)) entry = pool_dir / "evicted" / name / "entry.json";
      require(fs::exists(entry), Errc::MissingCheckpoint, "no entry " + name + " in " + pool_dir.string());
      out << read_manifest(entry).dump(2) << '\n';
      break;
    }
  }
}

// --- command line ----------------------------------------------------------

namespace {

/// Flags are bound to scratch values and applied after the config file, so a
/// flag given on the command line always wins.
class Overrides {
 public:
  template <typename T, typename F>
  void option(CLI::App* app, const std::string& name, const std::string& help, F setter) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(name, *value, help);
    appliers_.push_back([opt, value, setter](ExperimentConfig& c) {
      if (opt->count() > 0) setter(c, *value);
    });
  }

  template <typename F>
  void flag(CLI::App* app, const std::string& name, const std::string& help, F setter) {
    CLI::Option* opt = app->add_flag(name, help);
    appliers_.push_back([opt, setter](ExperimentConfig& c) {
      if (opt->count() > 0) setter(c);
    });
  }

  void apply(ExperimentConfig& cfg) const {
    for (const auto& f : appliers_) f(cfg);
  }

 private:
  std::vector<std::function<void(ExperimentConfig&)>> appliers_;
};

void add_data_flags(CLI::App* app, Overrides& o) {
  using C = ExperimentConfig;
  o.option<std::string>(app, "--data", "dataset file", [](C& c, const std::string& v) { c.data = v; });
  o.option<std::string>(app, "--format", "csv or binary (default: by extension)",
                        [](C& c, const std::string& v) { c.format = parse_format(v); });
  o.option<std::string>(app, "--labels", "labels CSV (default: <stem>.labels.csv)",
                        [](C& c, const std::string& v) { c.labels = fs::path(v); });
  o.option<Index>(app, "--k", "number of clusters", [](C& c, Index v) { c.k = v; });
}

void add_train_flags(CLI::App* app, Overrides& o) {
  using C = ExperimentConfig;
  o.option<int>(app, "--pretrain-epochs", "reconstruction epochs", [](C& c, int v) { c.train.pretrain_epochs = v; });
  o.option<int>(app, "--train-epochs", "clustering epochs (0: hierarchical init only)",
                [](C& c, int v) { c.train.train_epochs = v; });
  o.option<Index>(app, "--batch-size", "mini-batch size", [](C& c, Index v) { c.train.batch_size = v; });
  o.option<double>(app, "--lr", "Adam learning rate", [](C& c, double v) { c.train.lr = v; });
  o.option<double>(app, "--alpha", "Student's t degrees of freedom", [](C& c, double v) { c.train.alpha = v; });
  o.option<std::string>(app, "--linkage", "complete, average or single",
                        [](C& c, const std::string& v) { c.train.linkage = tc::parse_linkage(v); });
  o.option<Index>(app, "--conv-channels", "", [](C& c, Index v) { c.train.model.conv_channels = v; });
  o.option<Index>(app, "--kernel-width", "", [](C& c, Index v) { c.train.model.kernel_width = v; });
  o.option<Index>(app, "--lstm-hidden-1", "", [](C& c, Index v) { c.train.model.lstm_hidden_1 = v; });
  o.option<Index>(app, "--lstm-hidden-2", "", [](C& c, Index v) { c.train.model.lstm_hidden_2 = v; });
  o.option<Index>(app, "--attention-width", "", [](C& c, Index v) { c.train.model.attention_width = v; });
  o.option<std::string>(app, "--activation", "leaky_relu, logistic or tanh",
                        [](C& c, const std::string& v) { c.train.model.activation = nn::parse_activation(v); });
}

void add_lifelong_flags(CLI::App* app, Overrides& o) {
  using C = ExperimentConfig;
  o.option<std::string>(app, "--stream", "iid, sequential or drift",
                        [](C& c, const std::string& v) { c.stream_mode = parse_stream_mode(v); });
  o.option<std::string>(app, "--groups", "class groups, e.g. 0,1;2,3",
                        [](C& c, const std::string& v) { c.stream.class_groups = parse_groups(v); });
  o.option<std::string>(app, "--group-sizes", "consecutive group sizes, e.g. 6,2,2", [](C& c, const std::string& v) {
    c.stream.class_groups = groups_from_sizes(parse_list<int>(v));
  });
  o.option<std::string>(app, "--task-k", "clusters per task, e.g. 2,2",
                        [](C& c, const std::string& v) { c.task_k = parse_list<Index>(v); });
  o.option<int>(app, "--passes", "times the task list is replayed", [](C& c, int v) { c.stream.passes = v; });
  o.option<int>(app, "--drift-batches", "", [](C& c, int v) { c.stream.num_batches = v; });
  o.option<int>(app, "--drift-batch-size", "", [](C& c, int v) { c.stream.batch_size = v; });
  o.option<double>(app, "--max-fraction", "final share of the incoming class",
                   [](C& c, double v) { c.stream.max_fraction = v; });
  o.option<double>(app, "--delta", "new-model threshold", [](C& c, double v) { c.pool.delta = v; });
  o.option<double>(app, "--refine-band", "refine threshold", [](C& c, double v) { c.pool.refine_band = v; });
  o.option<std::size_t>(app, "--pool-capacity", "", [](C& c, std::size_t v) { c.pool.capacity = v; });
  o.option<Index>(app, "--replay-cap", "", [](C& c, Index v) { c.pool.replay_cap = v; });
  o.flag(app, "--ablate-single-model", "always refine the first model without replay",
         [](C& c) { c.ablate_single_model = true; });
}

std::string read_file(const fs::path& path) {
  require(fs::exists(path), Errc::MissingFile, "config file " + path.string() + " not found");
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int exit_code_for(const Error& e) {
  return e.code() == Errc::NonFiniteLoss || e.code() == Errc::NonFiniteValue ? 3 : 2;
}

void print_rows(const std::vector<ResultRow>& rows) {
  for (const auto& r : rows)
    std::cout << r.algorithm << " seed=" << r.seed << " accuracy=" << fmt(r.accuracy) << " purity=" << fmt(r.purity)
              << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Lifelong deep temporal clustering"};
  app.require_subcommand(1);
  Overrides o;
  using C = ExperimentConfig;
  std::string config_path;
  app.add_option("--config", config_path, "JSON config; flags override its values");
  o.option<std::uint64_t>(&app, "--seed", "base seed", [](C& c, std::uint64_t v) { c.seed = v; });
  o.option<std::string>(&app, "--out", "output directory", [](C& c, const std::string& v) { c.out = v; });
  o.option<int>(&app, "--repeats", "runs with seeds seed..seed+n-1", [](C& c, int v) { c.repeats = v; });
  o.flag(&app, "--no-timing", "write wall_seconds as 0", [](C& c) { c.timing = false; });

  auto* cluster = app.add_subcommand("cluster", "train on one dataset and report accuracy");
  auto* baseline = app.add_subcommand("baseline", "k-means on the raw flattened series");
  auto* life = app.add_subcommand("lifelong", "run a task stream through the model pool");
  auto* pool = app.add_subcommand("pool", "inspect a saved model pool");
  auto* synth = app.add_subcommand("synth", "write the synthetic sinusoid dataset");
  for (auto* sub : {cluster, baseline, life, pool, synth}) sub->fallthrough();
  for (auto* sub : {cluster, baseline, life}) add_data_flags(sub, o);
  for (auto* sub : {cluster, life}) add_train_flags(sub, o);
  add_lifelong_flags(life, o);

  std::string action;
  std::string pool_dir, dest;
  int entry_id = -1;
  pool->add_option("action", action, "list, export or inspect")
      ->required()
      ->check(CLI::IsMember({"list", "export", "inspect"}));
  pool->add_option("--pool", pool_dir, "pool directory (default: <out>/pool)");
  pool->add_option("--dest", dest, "export destination");
  auto* id_opt = pool->add_option("--id", entry_id, "entry id for inspect");

  SinusoidSpec spec;
  std::string synth_format = "csv";
  synth->add_option("--n", spec.n, "samples");
  synth->add_option("--length", spec.length, "timesteps");
  synth->add_option("--vars", spec.vars, "variables");
  synth->add_option("--classes", spec.classes, "classes");
  synth->add_option("--noise", spec.noise, "Gaussian noise sd");
  synth->add_option("--interference", spec.interference_amplitude, "amplitude of the shared tone");
  synth->add_option("--format", synth_format, "csv or binary");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    ExperimentConfig cfg;
    if (!config_path.empty()) apply_config_json(cfg, read_file(config_path));
    o.apply(cfg);

    if (*cluster) {
      print_rows(cmd_cluster(cfg));
    } else if (*baseline) {
      print_rows(cmd_baseline(cfg));
    } else if (*life) {
      for (const auto& r : cmd_lifelong(cfg))
        std::cout << "step " << r.step << " task " << r.task_id << ' ' << lifelong::to_string(r.decision)
                  << " v=" << fmt(r.v) << " pool=" << r.pool_size << " acc=" << fmt(r.acc_task) << '\n';
    } else if (*pool) {
      const fs::path dir = pool_dir.empty() ? cfg.out / "pool" : fs::path(pool_dir);
      const PoolAction act = action == "list" ? PoolAction::List
                             : action == "export" ? PoolAction::Export
                                                  : PoolAction::Inspect;
      std::optional<int> id;
      if (id_opt->count() > 0) id = entry_id;
      cmd_pool(act, dir, std::cout, dest.empty() ? std::nullopt : std::optional<fs::path>(dest), id);
    } else if (*synth) {
      const TimeSeriesDataset ds = make_sinusoid_dataset(spec, cfg.seed);
      make_dir(cfg.out);
      if (parse_format(synth_format) == DataFormat::Binary) {
        save_binary(ds, cfg.out / "synth.bin");
      } else {
        save_long_csv(ds, cfg.out / "synth.csv");
      }
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace ltc::cli
