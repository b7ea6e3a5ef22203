#include "ltc/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "ltc/error.hpp"

namespace ltc {

namespace fs = std::filesystem;

void TimeSeriesDataset::validate() const {
  require(n >= 1, Errc::MalformedFile, "dataset has no samples");
  require(length >= 4, Errc::MalformedFile, "series length must be at least 4");
  require(vars >= 1, Errc::MalformedFile, "dataset has no variables");
  require(samples.rows() == n * length && samples.cols() == vars, Errc::MalformedFile,
          "sample storage does not match (N, L, V)");
  require(valid_length >= 1 && valid_length <= length, Errc::MalformedFile, "bad valid length");
  require(samples.allFinite(), Errc::MalformedFile, "non-finite sample value");
  if (labels) {
    require(static_cast<Index>(labels->size()) == n, Errc::MalformedFile, "label count != N");
    require(num_classes.has_value() && *num_classes >= 1, Errc::MalformedFile, "labels without class count");
    for (int y : *labels)
      require(y >= 0 && y < *num_classes, Errc::MalformedFile, "label outside [0, C)");
  }
}

TimeSeriesDataset TimeSeriesDataset::subset(std::span<const Index> indices) const {
  TimeSeriesDataset out;
  out.name = name;
  out.n = static_cast<Index>(indices.size());
  out.length = length;
  out.vars = vars;
  out.valid_length = valid_length;
  out.samples.resize(out.n * length, vars);
  for (Index i = 0; i < out.n; ++i) out.sample(i) = sample(indices[i]);
  if (labels) {
    std::vector<int> y(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) y[i] = (*labels)[indices[i]];
    out.labels = std::move(y);
    out.num_classes = num_classes;
  }
  return out;
}

TimeSeriesDataset concat(const TimeSeriesDataset& a, const TimeSeriesDataset& b) {
  if (a.n == 0) return b;
  if (b.n == 0) return a;
  require(a.length == b.length && a.vars == b.vars, Errc::ShapeMismatch, "concat of differently shaped datasets");
  TimeSeriesDataset out;
  out.name = a.name;
  out.n = a.n + b.n;
  out.length = a.length;
  out.vars = a.vars;
  out.valid_length = std::min(a.valid_length, b.valid_length);
  out.samples.resize(out.n * out.length, out.vars);
  out.samples.topRows(a.samples.rows()) = a.samples;
  out.samples.bottomRows(b.samples.rows()) = b.samples;
  if (a.labels && b.labels) {
    std::vector<int> y = *a.labels;
    y.insert(y.end(), b.labels->begin(), b.labels->end());
    out.labels = std::move(y);
    out.num_classes = std::max(a.num_classes.value_or(0), b.num_classes.value_or(0));
  }
  return out;
}

DataFormat parse_format(const std::string& name) {
  if (name == "csv" || name == "long-csv" || name == "LongCSV") return DataFormat::LongCSV;
  if (name == "bin" || name == "binary" || name == "Binary") return DataFormat::Binary;
  fail(Errc::InvalidArgument, "unknown data format '" + name + "'");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

long long parse_int(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(Errc::MalformedFile, where + ": expected integer, got '" + s + "'");
  }
}

double parse_real(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(Errc::MalformedFile, where + ": expected number, got '" + s + "'");
  }
}

void attach_labels(TimeSeriesDataset& ds, const std::vector<int>& labels) {
  int max_label = -1;
  for (int y : labels) {
    require(y >= 0, Errc::MalformedFile, "negative label");
    max_label = std::max(max_label, y);
  }
  ds.labels = labels;
  ds.num_classes = max_label + 1;
}

TimeSeriesDataset load_long_csv(const fs::path& path, const std::optional<fs::path>& labels_path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::MissingFile, "cannot open " + path.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), Errc::MalformedFile, "empty file " + path.string());
  const auto header = split_csv_line(line);
  require(header.size() >= 3 && header[0] == "sample_id" && header[1] == "timestep", Errc::MalformedFile,
          "header must be sample_id,timestep,v0,...");
  const Index vars = static_cast<Index>(header.size()) - 2;

  std::vector<long long> ids;
  std::vector<Index> lengths;
  std::vector<double> values;
  long long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    const std::string where = path.filename().string() + ":" + std::to_string(line_no);
    require(static_cast<Index>(cells.size()) == vars + 2, Errc::MalformedFile, where + ": wrong column count");
    const long long id = parse_int(cells[0], where);
    const long long t = parse_int(cells[1], where);
    if (ids.empty() || ids.back() != id) {
      require(ids.empty() || id > ids.back(), Errc::MalformedFile, where + ": rows not sorted by sample_id");
      require(t == 0, Errc::MalformedFile, where + ": series must start at timestep 0");
      ids.push_back(id);
      lengths.push_back(0);
    }
    require(t == lengths.back(), Errc::MalformedFile, where + ": timesteps not contiguous");
    ++lengths.back();
    for (Index v = 0; v < vars; ++v) values.push_back(parse_real(cells[2 + v], where));
  }
  require(!ids.empty(), Errc::MalformedFile, "no data rows in " + path.string());
  const Index length = lengths.front();
  for (std::size_t i = 0; i < lengths.size(); ++i)
    require(lengths[i] == length, Errc::MalformedFile,
            "sample " + std::to_string(ids[i]) + " has " + std::to_string(lengths[i]) + " timesteps, expected " +
                std::to_string(length));

  TimeSeriesDataset ds;
  ds.name = path.stem().string();
  ds.n = static_cast<Index>(ids.size());
  ds.length = length;
  ds.vars = vars;
  ds.valid_length = length;
  ds.samples = Eigen::Map<RowMatrix>(values.data(), ds.n * length, vars);

  fs::path lpath = labels_path.value_or(path.parent_path() / (path.stem().string() + ".labels.csv"));
  if (labels_path) require(fs::exists(lpath), Errc::MissingFile, "cannot open labels " + lpath.string());
  if (fs::exists(lpath)) {
    std::ifstream lin(lpath);
    require(static_cast<bool>(lin), Errc::MissingFile, "cannot open labels " + lpath.string());
    std::getline(lin, line);
    const auto lheader = split_csv_line(line);
    require(lheader.size() == 2 && lheader[0] == "sample_id" && lheader[1] == "label", Errc::MalformedFile,
            "labels header must be sample_id,label");
    std::map<long long, int> by_id;
    long long lno = 1;
    while (std::getline(lin, line)) {
      ++lno;
      if (line.empty() || line == "\r") continue;
      const auto cells = split_csv_line(line);
      const std::string where = lpath.filename().string() + ":" + std::to_string(lno);
      require(cells.size() == 2, Errc::MalformedFile, where + ": wrong column count");
      by_id[parse_int(cells[0], where)] = static_cast<int>(parse_int(cells[1], where));
    }
    std::vector<int> labels;
    labels.reserve(ids.size());
    for (long long id : ids) {
      auto it = by_id.find(id);
      require(it != by_id.end(), Errc::MalformedFile, "no label for sample " + std::to_string(id));
      labels.push_back(it->second);
    }
    attach_labels(ds, labels);
  }
  ds.validate();
  return ds;
}

static_assert(std::endian::native == std::endian::little, "binary I/O assumes a little-endian host");

template <typename T>
void read_raw(std::istream& in, T* dst, std::size_t count, const fs::path& path) {
  in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(sizeof(T) * count));
  require(static_cast<std::size_t>(in.gcount()) == sizeof(T) * count, Errc::MalformedFile,
          "truncated binary file " + path.string());
}

TimeSeriesDataset load_binary(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), Errc::MissingFile, "cannot open " + path.string());
  char magic[4];
  read_raw(in, magic, 4, path);
  require(std::memcmp(magic, "LTC1", 4) == 0, Errc::MalformedFile, "bad magic in " + path.string());
  std::uint64_t dims[3];
  read_raw(in, dims, 3, path);
  TimeSeriesDataset ds;
  ds.name = path.stem().string();
  ds.n = static_cast<Index>(dims[0]);
  ds.length = static_cast<Index>(dims[1]);
  ds.vars = static_cast<Index>(dims[2]);
  ds.valid_length = ds.length;
  require(dims[0] > 0 && dims[1] > 0 && dims[2] > 0 && dims[0] * dims[1] * dims[2] < (1ull << 34),
          Errc::MalformedFile, "implausible dimensions in " + path.string());
  ds.samples.resize(ds.n * ds.length, ds.vars);
  read_raw(in, ds.samples.data(), static_cast<std::size_t>(ds.samples.size()), path);
  std::uint8_t flag = 0;
  read_raw(in, &flag, 1, path);
  require(flag == 0 || flag == 1, Errc::MalformedFile, "bad label flag in " + path.string());
  if (flag == 1) {
    std::vector<std::int32_t> raw(static_cast<std::size_t>(ds.n));
    read_raw(in, raw.data(), raw.size(), path);
    attach_labels(ds, std::vector<int>(raw.begin(), raw.end()));
  }
  ds.validate();
  return ds;
}

}  // namespace

TimeSeriesDataset load_dataset(const fs::path& path, DataFormat format, const std::optional<fs::path>& labels_path) {
  require(fs::exists(path), Errc::MissingFile, "no such file " + path.string());
  return format == DataFormat::LongCSV ? load_long_csv(path, labels_path) : load_binary(path);
}

void save_binary(const TimeSeriesDataset& ds, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), Errc::DiskWriteFailure, "cannot write " + path.string());
  out.write("LTC1", 4);
  const std::uint64_t dims[3] = {static_cast<std::uint64_t>(ds.n), static_cast<std::uint64_t>(ds.length),
                                 static_cast<std::uint64_t>(ds.vars)};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  out.write(reinterpret_cast<const char*>(ds.samples.data()),
            static_cast<std::streamsize>(sizeof(double) * ds.samples.size()));
  const std::uint8_t flag = ds.labels ? 1 : 0;
  out.write(reinterpret_cast<const char*>(&flag), 1);
  if (ds.labels) {
    std::vector<std::int32_t> raw(ds.labels->begin(), ds.labels->end());
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(4 * raw.size()));
  }
  require(static_cast<bool>(out), Errc::DiskWriteFailure, "short write to " + path.string());
}

void save_long_csv(const TimeSeriesDataset& ds, const fs::path& path, const std::optional<fs::path>& labels_path) {
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), Errc::DiskWriteFailure, "cannot write " + path.string());
  out.precision(17);
  out << "sample_id,timestep";
  for (Index v = 0; v < ds.vars; ++v) out << ",v" << v;
  out << '\n';
  for (Index i = 0; i < ds.n; ++i)
    for (Index t = 0; t < ds.length; ++t) {
      out << i << ',' << t;
      for (Index v = 0; v < ds.vars; ++v) out << ',' << ds.samples(i * ds.length + t, v);
      out << '\n';
    }
  if (ds.labels) {
    const fs::path lpath = labels_path.value_or(path.parent_path() / (path.stem().string() + ".labels.csv"));
    std::ofstream lout(lpath, std::ios::trunc);
    require(static_cast<bool>(lout), Errc::DiskWriteFailure, "cannot write " + lpath.string());
    lout << "sample_id,label\n";
    for (Index i = 0; i < ds.n; ++i) lout << i << ',' << (*ds.labels)[i] << '\n';
  }
}

TimeSeriesDataset normalize(const TimeSeriesDataset& ds) {
  TimeSeriesDataset out = ds;
  const double cells = static_cast<double>(ds.samples.rows());
  for (Index v = 0; v < ds.vars; ++v) {
    auto col = out.samples.col(v);
    const double mean = col.sum() / cells;
    col.array() -= mean;
    const double sd = std::sqrt(col.squaredNorm() / cells);
    require(sd > 1e-12 * std::max(1.0, std::abs(mean)), Errc::ZeroVariance,
            "variable " + std::to_string(v) + " is constant");
    col /= sd;
  }
  return out;
}

TimeSeriesDataset pad_time(const TimeSeriesDataset& ds, Index multiple) {
  require(multiple >= 1, Errc::InvalidArgument, "padding multiple must be >= 1");
  const Index padded = (ds.length + multiple - 1) / multiple * multiple;
  if (padded == ds.length) return ds;
  TimeSeriesDataset out = ds;
  out.length = padded;
  out.samples.resize(ds.n * padded, ds.vars);
  for (Index i = 0; i < ds.n; ++i) {
    auto dst = out.sample(i);
    dst.topRows(ds.length) = ds.sample(i);
    dst.bottomRows(padded - ds.length).rowwise() = ds.samples.row((i + 1) * ds.length - 1);
  }
  return out;
}

StreamMode parse_stream_mode(const std::string& name) {
  if (name == "iid" || name == "IID") return StreamMode::IID;
  if (name == "sequential" || name == "Sequential") return StreamMode::Sequential;
  if (name == "drift" || name == "ContinuousDrift" || name == "continuous-drift") return StreamMode::ContinuousDrift;
  fail(Errc::InvalidArgument, "unknown stream mode '" + name + "'");
}

std::string to_string(StreamMode mode) {
  switch (mode) {
    case StreamMode::IID: return "iid";
    case StreamMode::Sequential: return "sequential";
    case StreamMode::ContinuousDrift: return "drift";
  }
  return "?";
}

std::vector<std::vector<int>> groups_from_sizes(std::span<const int> sizes) {
  std::vector<std::vector<int>> groups;
  int next = 0;
  for (int s : sizes) {
    require(s >= 1, Errc::InvalidArgument, "class group sizes must be >= 1");
    std::vector<int> g(static_cast<std::size_t>(s));
    std::iota(g.begin(), g.end(), next);
    next += s;
    groups.push_back(std::move(g));
  }
  return groups;
}

namespace {

std::vector<Index> indices_of_classes(const std::vector<int>& labels, const std::set<int>& classes) {
  std::vector<Index> idx;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (classes.count(labels[i])) idx.push_back(static_cast<Index>(i));
  return idx;
}

}  // namespace

TaskStream make_stream(const TimeSeriesDataset& ds, StreamMode mode, const StreamParams& params, std::uint64_t seed) {
  require(ds.labels.has_value(), Errc::MissingLabels, "streams are built from labeled data");
  require(params.passes >= 1, Errc::InvalidArgument, "passes must be >= 1");
  const int C = ds.num_classes.value_or(0);
  const auto& labels = *ds.labels;
  std::mt19937_64 rng(seed);
  TaskStream stream;
  stream.mode = mode;

  std::vector<TimeSeriesDataset> one_pass;
  switch (mode) {
    case StreamMode::IID: {
      std::vector<Index> idx(static_cast<std::size_t>(ds.n));
      std::iota(idx.begin(), idx.end(), Index{0});
      std::shuffle(idx.begin(), idx.end(), rng);
      one_pass.push_back(ds.subset(idx));
      break;
    }
    case StreamMode::Sequential: {
      auto groups = params.class_groups;
      if (groups.empty())
        for (int c = 0; c < C; ++c) groups.push_back({c});
      std::set<int> seen;
      for (const auto& g : groups)
        for (int c : g) {
          require(c >= 0 && c < C, Errc::InvalidArgument, "class group names unknown class " + std::to_string(c));
          require(seen.insert(c).second, Errc::InvalidArgument, "class groups overlap at " + std::to_string(c));
        }
      std::set<int> present(labels.begin(), labels.end());
      for (int c : present)
        require(seen.count(c) > 0, Errc::InvalidArgument, "class " + std::to_string(c) + " is in no group");
      for (std::size_t t = 0; t < groups.size(); ++t) {
        auto idx = indices_of_classes(labels, std::set<int>(groups[t].begin(), groups[t].end()));
        require(!idx.empty(), Errc::InvalidArgument, "class group " + std::to_string(t) + " has no samples");
        std::shuffle(idx.begin(), idx.end(), rng);
        auto task = ds.subset(idx);
        task.name = ds.name + "_task" + std::to_string(t);
        one_pass.push_back(std::move(task));
      }
      break;
    }
    case StreamMode::ContinuousDrift: {
      require(params.num_batches >= 1 && params.batch_size >= 1, Errc::InvalidArgument, "bad drift batching");
      require(params.max_fraction >= 0.0 && params.max_fraction <= 1.0, Errc::InvalidArgument,
              "max_fraction must be in [0, 1]");
      std::vector<int> resident, incoming;
      if (params.class_groups.size() >= 2) {
        resident = params.class_groups[0];
        incoming = params.class_groups[1];
      } else {
        require(C >= 2, Errc::InvalidArgument, "drift needs at least two classes");
        for (int c = 0; c < C - 1; ++c) resident.push_back(c);
        incoming.push_back(C - 1);
      }
      auto old_idx = indices_of_classes(labels, std::set<int>(resident.begin(), resident.end()));
      auto new_idx = indices_of_classes(labels, std::set<int>(incoming.begin(), incoming.end()));
      require(!old_idx.empty() && !new_idx.empty(), Errc::InvalidArgument, "drift class sets must be non-empty");
      std::shuffle(old_idx.begin(), old_idx.end(), rng);
      std::shuffle(new_idx.begin(), new_idx.end(), rng);
      std::size_t old_pos = 0, new_pos = 0;
      const int nb = params.num_batches;
      for (int b = 0; b < nb; ++b) {
        const double frac = nb == 1 ? params.max_fraction : params.max_fraction * b / (nb - 1);
        const int n_new = static_cast<int>(std::lround(frac * params.batch_size));
        std::vector<Index> idx;
        for (int i = 0; i < params.batch_size - n_new; ++i) idx.push_back(old_idx[old_pos++ % old_idx.size()]);
        for (int i = 0; i < n_new; ++i) idx.push_back(new_idx[new_pos++ % new_idx.size()]);
        std::shuffle(idx.begin(), idx.end(), rng);
        auto task = ds.subset(idx);
        task.name = ds.name + "_batch" + std::to_string(b);
        one_pass.push_back(std::move(task));
        stream.drift_schedule.push_back(static_cast<double>(n_new) / params.batch_size);
      }
      break;
    }
  }
  for (int p = 0; p < params.passes; ++p)
    stream.tasks.insert(stream.tasks.end(), one_pass.begin(), one_pass.end());
  if (params.passes > 1 && mode == StreamMode::ContinuousDrift) {
    const auto sched = stream.drift_schedule;
    for (int p = 1; p < params.passes; ++p)
      stream.drift_schedule.insert(stream.drift_schedule.end(), sched.begin(), sched.end());
  }
  return stream;
}

TimeSeriesDataset make_sinusoid_dataset(const SinusoidSpec& spec, std::uint64_t seed) {
  require(spec.n >= 1 && spec.length >= 4 && spec.vars >= 1 && spec.classes >= 1, Errc::InvalidArgument,
          "bad synthetic dataset shape");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, spec.noise);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  constexpr double two_pi = 2.0 * std::numbers::pi;

  TimeSeriesDataset ds;
  ds.name = "sinusoids";
  ds.n = spec.n;
  ds.length = spec.length;
  ds.vars = spec.vars;
  ds.valid_length = spec.length;
  ds.samples.resize(spec.n * spec.length, spec.vars);
  std::vector<int> labels(static_cast<std::size_t>(spec.n));
  for (Index i = 0; i < spec.n; ++i) {
    const int c = static_cast<int>(i % spec.classes);
    labels[i] = c;
    const double cycles = spec.base_cycles * (c + 1);
    const double phase = two_pi * c / spec.classes + spec.phase_jitter * unit(rng);
    const double amp = 1.0 + spec.amplitude_jitter * unit(rng);
    const double tone_phase = std::numbers::pi * unit(rng);
    for (Index t = 0; t < spec.length; ++t)
      for (Index v = 0; v < spec.vars; ++v) {
        const double arg = two_pi * cycles * static_cast<double>(t) / spec.length + phase +
                           std::numbers::pi * static_cast<double>(v) / (2.0 * spec.vars);
        const double tone = std::sin(two_pi * spec.interference_cycles * static_cast<double>(t) / spec.length + tone_phase);
        ds.samples(i * spec.length + t, v) = amp * std::sin(arg) + spec.interference_amplitude * tone + noise(rng);
      }
  }
  ds.labels = std::move(labels);
  ds.num_classes = spec.classes;
  return ds;
}

}  // namespace ltc
