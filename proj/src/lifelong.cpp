#include "ltc/lifelong.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include <json.hpp>

#include "ltc/error.hpp"
#include "ltc/parallel.hpp"

namespace ltc::lifelong {

namespace fs = std::filesystem;
using nlohmann::json;

void PoolConfig::validate() const {
  require(capacity >= 1, Errc::InvalidArgument, "pool capacity must be >= 1");
  require(replay_cap >= 0, Errc::InvalidArgument, "replay cap must be >= 0");
  require(std::isfinite(delta) && std::isfinite(refine_band), Errc::InvalidArgument, "thresholds must be finite");
}

PoolEntry* ModelPool::find(int id) {
  for (auto& e : entries)
    if (e.id == id) return &e;
  return nullptr;
}

const PoolEntry* ModelPool::find(int id) const {
  for (const auto& e : entries)
    if (e.id == id) return &e;
  return nullptr;
}

std::string to_string(DecisionKind kind) {
  switch (kind) {
    case DecisionKind::Refine: return "refine";
    case DecisionKind::Retrain: return "retrain";
    case DecisionKind::NewModel: return "new_model";
  }
  return "?";
}

std::vector<EntryScore> evaluate_pool(const ModelPool& pool, const TimeSeriesDataset& X) {
  require(!pool.entries.empty(), Errc::EmptyPool, "model pool is empty; train a first model");
  std::vector<EntryScore> scores(pool.entries.size());
  parallel_for(pool.entries.size(), [&](std::size_t i) {
    const auto& e = pool.entries[i];
    scores[i].id = e.id;
    if (X.length != e.model.ctae.length || X.vars != e.model.ctae.vars) {
      scores[i].p_x = std::numeric_limits<double>::quiet_NaN();
      scores[i].v = std::numeric_limits<double>::infinity();
      return;
    }
    scores[i].p_x = train::evaluate(e.model.ctae, e.model.tc, X).confidence;
    scores[i].v = std::abs(scores[i].p_x - e.model.tc.p_c);
  });
  return scores;
}

DecisionKind classify(double v, const PoolConfig& config) {
  if (v <= config.refine_band) return DecisionKind::Refine;
  if (v <= config.delta) return DecisionKind::Retrain;
  return DecisionKind::NewModel;
}

RoutingDecision route_scores(ModelPool& pool, std::vector<EntryScore> scores, bool commit) {
  RoutingDecision d;
  d.scores = std::move(scores);
  const EntryScore* best = nullptr;
  for (const auto& s : d.scores)
    if (!best || s.v < best->v || (s.v == best->v && s.id < best->id)) best = &s;
  if (!best) {
    d.kind = DecisionKind::NewModel;
    return d;
  }
  d.v = best->v;
  d.kind = classify(best->v, pool.config);
  if (d.kind != DecisionKind::NewModel) {
    d.entry_id = best->id;
    if (commit) {
      PoolEntry* e = pool.find(best->id);
      require(e != nullptr, Errc::InvalidArgument, "routing selected unknown entry " + std::to_string(best->id));
      ++e->habituation;
    }
  }
  return d;
}

RoutingDecision route(ModelPool& pool, const TimeSeriesDataset& X, bool commit) {
  return route_scores(pool, evaluate_pool(pool, X), commit);
}

TimeSeriesDataset replay_mixture(const PoolEntry& entry, const TimeSeriesDataset& X_new) {
  return concat(entry.replay, X_new);
}

TimeSeriesDataset subsample(const TimeSeriesDataset& ds, Index cap, std::uint64_t seed) {
  std::vector<Index> idx(static_cast<std::size_t>(ds.n));
  std::iota(idx.begin(), idx.end(), Index{0});
  if (cap < ds.n) {
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(static_cast<std::size_t>(std::max<Index>(cap, 0)));
    std::sort(idx.begin(), idx.end());
  }
  return ds.subset(idx);
}

namespace {

std::uint64_t task_seed(const train::TrainConfig& cfg, int salt) {
  return cfg.seed + 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(salt + 1);
}

}  // namespace

void refine_with_replay(PoolEntry& entry, const TimeSeriesDataset& X_new, const train::TrainConfig& cfg,
                        Index replay_cap) {
  const TimeSeriesDataset mixture = replay_mixture(entry, X_new);
  train::TrainConfig phase2 = cfg;
  phase2.seed = task_seed(cfg, entry.id * 1000 + entry.habituation);
  const auto trace = train::train_joint(entry.model.ctae, entry.model.tc, mixture, phase2);
  entry.model.trace.insert(entry.model.trace.end(), trace.begin(), trace.end());
  entry.replay = subsample(mixture, replay_cap, phase2.seed);
}

std::optional<int> add_or_evict(ModelPool& pool, PoolEntry entry) {
  std::optional<int> evicted;
  if (pool.entries.size() >= pool.config.capacity) {
    require(!pool.storage_dir.empty(), Errc::DiskWriteFailure, "pool is full and has no storage directory");
    auto victim = std::min_element(pool.entries.begin(), pool.entries.end(), [](const auto& a, const auto& b) {
      if (a.habituation != b.habituation) return a.habituation < b.habituation;
      if (a.created_at != b.created_at) return a.created_at < b.created_at;
      return a.id < b.id;
    });
    save_entry(pool.storage_dir / "evicted" / std::to_string(victim->id), *victim);
    evicted = victim->id;
    pool.evicted.push_back(victim->id);
    pool.entries.erase(victim);
  }
  pool.entries.push_back(std::move(entry));
  return evicted;
}

train::TrainedModel train_new_or_retrain(ModelPool& pool, const RoutingDecision& decision, const TimeSeriesDataset& X,
                                         Index k, const train::TrainConfig& cfg) {
  require(decision.kind != DecisionKind::Refine, Errc::InvalidArgument, "refinement goes through refine_with_replay");
  train::TrainConfig run = cfg;
  run.seed = task_seed(cfg, pool.tasks_seen);
  if (decision.kind == DecisionKind::Retrain) {
    require(decision.entry_id.has_value(), Errc::InvalidArgument, "retrain decision without an entry");
    PoolEntry* e = pool.find(*decision.entry_id);
    require(e != nullptr, Errc::InvalidArgument, "retrain target " + std::to_string(*decision.entry_id) + " is gone");
    e->model = train::train_full_from(e->model.ctae, X, k, run);
    e->replay = subsample(X, pool.config.replay_cap, run.seed);
    return e->model;
  }

  // Warm start from the closest entry still within delta, if any.
  const PoolEntry* init = nullptr;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : decision.scores)
    if (s.v <= pool.config.delta && s.v < best) {
      best = s.v;
      init = pool.find(s.id);
    }
  PoolEntry entry;
  entry.id = pool.next_id++;
  entry.created_at = pool.tasks_seen;
  if (init && init->model.ctae.length == X.length && init->model.ctae.vars == X.vars) {
    entry.model = train::train_full_from(init->model.ctae, X, k, run);
  } else {
    entry.model = train::train_full(X, k, run);
  }
  entry.replay = subsample(X, pool.config.replay_cap, run.seed);
  train::TrainedModel result = entry.model;
  add_or_evict(pool, std::move(entry));
  return result;
}

StepResult lifelong_step(ModelPool& pool, const TimeSeriesDataset& task, Index k, const train::TrainConfig& cfg,
                         const StepOptions& options) {
  pool.config.validate();
  StepResult out;
  if (pool.entries.empty()) {
    out.decision.kind = DecisionKind::NewModel;
    ModelPool& p = pool;
    if (options.single_model) p.config.replay_cap = 0;
    out.labels = train_new_or_retrain(p, out.decision, task, k, cfg).assignments;
    ++pool.tasks_seen;
    return out;
  }
  if (options.single_model) {
    PoolEntry& e = pool.entries.front();
    auto scores = evaluate_pool(pool, task);
    out.decision.scores = scores;
    out.decision.kind = DecisionKind::Refine;
    out.decision.entry_id = e.id;
    out.decision.v = scores.front().v;
    ++e.habituation;
    refine_with_replay(e, task, cfg, 0);
    out.labels = train::evaluate(e.model.ctae, e.model.tc, task).labels;
    ++pool.tasks_seen;
    return out;
  }
  out.decision = route(pool, task, true);
  if (out.decision.kind == DecisionKind::Refine) {
    PoolEntry* e = pool.find(*out.decision.entry_id);
    refine_with_replay(*e, task, cfg, pool.config.replay_cap);
    out.labels = train::evaluate(e->model.ctae, e->model.tc, task).labels;
  } else {
    const auto model = train_new_or_retrain(pool, out.decision, task, k, cfg);
    out.labels = model.assignments;
  }
  ++pool.tasks_seen;
  return out;
}

TaskEvaluation evaluate_task(const ModelPool& pool, const TimeSeriesDataset& X) {
  const auto scores = evaluate_pool(pool, X);
  const EntryScore* best = nullptr;
  for (const auto& s : scores)
    if (!best || s.v < best->v || (s.v == best->v && s.id < best->id)) best = &s;
  require(best != nullptr && std::isfinite(best->v), Errc::ShapeMismatch, "no pool entry can score this task");
  const PoolEntry* e = pool.find(best->id);
  TaskEvaluation out;
  out.entry_id = best->id;
  out.v = best->v;
  out.labels = train::evaluate(e->model.ctae, e->model.tc, X).labels;
  return out;
}

// --- checkpoints -----------------------------------------------------------

namespace {

constexpr int kFormatVersion = 1;

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  out << j.dump(2) << '\n';
  require(static_cast<bool>(out), Errc::DiskWriteFailure, "cannot write " + path.string());
}

json read_json(const fs::path& path) {
  require(fs::exists(path), Errc::MissingCheckpoint, "missing " + path.string());
  std::ifstream in(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(Errc::MalformedFile, path.string() + ": " + e.what());
  }
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, Errc::DiskWriteFailure, "cannot create " + dir.string());
}

}  // namespace

void save_entry(const fs::path& dir, const PoolEntry& entry) {
  make_dir(dir);
  const auto& tc = entry.model.tc;
  write_json(dir / "entry.json", {{"format_version", kFormatVersion},
                                  {"id", entry.id},
                                  {"habituation", entry.habituation},
                                  {"created_at", entry.created_at},
                                  {"k", tc.k()},
                                  {"latent_dim", tc.dim()},
                                  {"alpha", tc.alpha},
                                  {"p_c", tc.p_c},
                                  {"replay_samples", entry.replay.n}});
  ctae::save_ctae(dir / "model", entry.model.ctae);
  const RowMatrix mu = tc.centroids;
  std::ofstream out(dir / "centroids.f64", std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(mu.data()), static_cast<std::streamsize>(sizeof(double) * mu.size()));
  require(static_cast<bool>(out), Errc::DiskWriteFailure, "cannot write centroids in " + dir.string());
  if (entry.replay.n > 0) save_binary(entry.replay, dir / "replay.bin");
}

PoolEntry load_entry(const fs::path& dir) {
  const json j = read_json(dir / "entry.json");
  require(j.value("format_version", 0) == kFormatVersion, Errc::MalformedFile, "unsupported entry version");
  PoolEntry e;
  e.id = j.at("id").get<int>();
  e.habituation = j.at("habituation").get<int>();
  e.created_at = j.at("created_at").get<int>();
  e.model.ctae = ctae::load_ctae(dir / "model");
  const Index k = j.at("k").get<Index>(), d = j.at("latent_dim").get<Index>();
  RowMatrix mu(k, d);
  std::ifstream in(dir / "centroids.f64", std::ios::binary);
  require(static_cast<bool>(in), Errc::MissingCheckpoint, "missing centroids in " + dir.string());
  in.read(reinterpret_cast<char*>(mu.data()), static_cast<std::streamsize>(sizeof(double) * mu.size()));
  require(in.gcount() == static_cast<std::streamsize>(sizeof(double) * mu.size()), Errc::MalformedFile,
          "truncated centroids in " + dir.string());
  e.model.tc.centroids = mu;
  e.model.tc.alpha = j.at("alpha").get<double>();
  e.model.tc.p_c = j.at("p_c").get<double>();
  if (j.at("replay_samples").get<Index>() > 0) {
    e.replay = load_dataset(dir / "replay.bin", DataFormat::Binary);
  } else {
    e.replay.length = e.model.ctae.length;
    e.replay.vars = e.model.ctae.vars;
    e.replay.valid_length = e.model.ctae.length;
    e.replay.samples.resize(0, e.model.ctae.vars);
  }
  return e;
}

void save_pool(const ModelPool& pool, const fs::path& dir) {
  make_dir(dir);
  json manifest = {{"format_version", kFormatVersion},
                   {"capacity", pool.config.capacity},
                   {"delta", pool.config.delta},
                   {"refine_band", pool.config.refine_band},
                   {"replay_cap", pool.config.replay_cap},
                   {"next_id", pool.next_id},
                   {"tasks_seen", pool.tasks_seen},
                   {"entries", json::array()},
                   {"evicted", pool.evicted}};
  for (const auto& e : pool.entries)
    manifest["entries"].push_back({{"id", e.id},
                                   {"p_c", e.model.tc.p_c},
                                   {"habituation", e.habituation},
                                   {"created_at", e.created_at},
                                   {"k", e.model.tc.k()}});
  std::error_code ec;
  fs::remove_all(dir / "entries", ec);
  for (const auto& e : pool.entries) save_entry(dir / "entries" / std::to_string(e.id), e);
  // Evicted entries already on disk elsewhere are mirrored into this checkpoint.
  if (!pool.storage_dir.empty() && fs::weakly_canonical(pool.storage_dir) != fs::weakly_canonical(dir))
    for (int id : pool.evicted) {
      const fs::path src = pool.storage_dir / "evicted" / std::to_string(id);
      if (fs::exists(src)) {
        make_dir(dir / "evicted");
        fs::copy(src, dir / "evicted" / std::to_string(id),
                 fs::copy_options::recursive | fs::copy_options::overwrite_existing);
      }
    }
  write_json(dir / "pool.json", manifest);
}

ModelPool load_pool(const fs::path& dir) {
  const json j = read_json(dir / "pool.json");
  require(j.value("format_version", 0) == kFormatVersion, Errc::MalformedFile, "unsupported pool version");
  ModelPool pool;
  pool.storage_dir = dir;
  pool.config.capacity = j.at("capacity").get<std::size_t>();
  pool.config.delta = j.at("delta").get<double>();
  pool.config.refine_band = j.at("refine_band").get<double>();
  pool.config.replay_cap = j.at("replay_cap").get<Index>();
  pool.next_id = j.at("next_id").get<int>();
  pool.tasks_seen = j.at("tasks_seen").get<int>();
  pool.evicted = j.at("evicted").get<std::vector<int>>();
  for (const auto& ej : j.at("entries"))
    pool.entries.push_back(load_entry(dir / "entries" / std::to_string(ej.at("id").get<int>())));
  return pool;
}

}  // namespace ltc::lifelong
