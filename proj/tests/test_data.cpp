#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "ltc/data.hpp"
#include "ltc/error.hpp"
#include "support.hpp"

using namespace ltc;
namespace fs = std::filesystem;

namespace {

void write(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

TimeSeriesDataset labeled(int n_per_class, int classes, Index length = 4) {
  TimeSeriesDataset ds;
  ds.name = "toy";
  ds.n = n_per_class * classes;
  ds.length = length;
  ds.vars = 1;
  ds.valid_length = length;
  ds.samples.resize(ds.n * length, 1);
  std::vector<int> labels;
  for (Index i = 0; i < ds.n; ++i) {
    labels.push_back(static_cast<int>(i % classes));
    ds.sample(i).setConstant(static_cast<double>(i));
  }
  ds.labels = labels;
  ds.num_classes = classes;
  return ds;
}

std::multiset<double> sample_ids(const TimeSeriesDataset& ds) {
  std::multiset<double> ids;
  for (Index i = 0; i < ds.n; ++i) ids.insert(ds.sample(i)(0, 0));
  return ids;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("long CSV loading") {
  const auto dir = ltc::testing::scratch_dir("data_csv");
  write(dir / "two.csv",
        "sample_id,timestep,v0\n0,0,1\n0,1,2\n0,2,3\n0,3,4\n1,0,5\n1,1,6\n1,2,7\n1,3,8\n");
  const auto ds = load_dataset(dir / "two.csv", DataFormat::LongCSV);
  CHECK(ds.n == 2);
  CHECK(ds.length == 4);
  CHECK(ds.vars == 1);
  CHECK(ds.sample(1)(2, 0) == 7.0);
  CHECK_FALSE(ds.labels.has_value());

  write(dir / "two.labels.csv", "sample_id,label\n0,0\n1,1\n");
  const auto with = load_dataset(dir / "two.csv", DataFormat::LongCSV);
  REQUIRE(with.labels.has_value());
  CHECK(*with.labels == std::vector<int>{0, 1});
  CHECK(with.num_classes == 2);

  write(dir / "ragged.csv", "sample_id,timestep,v0\n0,0,1\n0,1,2\n0,2,3\n0,3,4\n1,0,5\n1,1,6\n1,2,7\n");
  CHECK(ltc::testing::error_code([&] { load_dataset(dir / "ragged.csv", DataFormat::LongCSV); }) == Errc::MalformedFile);
  write(dir / "unsorted.csv", "sample_id,timestep,v0\n0,1,1\n0,0,2\n0,2,3\n0,3,4\n");
  CHECK(ltc::testing::error_code([&] { load_dataset(dir / "unsorted.csv", DataFormat::LongCSV); }) == Errc::MalformedFile);
  write(dir / "header.csv", "id,t,v0\n0,0,1\n");
  CHECK(ltc::testing::error_code([&] { load_dataset(dir / "header.csv", DataFormat::LongCSV); }) == Errc::MalformedFile);
  CHECK(ltc::testing::error_code([&] { load_dataset(dir / "absent.csv", DataFormat::LongCSV); }) == Errc::MissingFile);
}

TEST_CASE("binary and CSV round trips") {
  const auto dir = ltc::testing::scratch_dir("data_bin");
  SinusoidSpec spec;
  spec.n = 12;
  spec.length = 8;
  spec.vars = 3;
  const auto ds = make_sinusoid_dataset(spec, 5);
  save_binary(ds, dir / "d.bin");
  const auto back = load_dataset(dir / "d.bin", DataFormat::Binary);
  CHECK(back.samples == ds.samples);
  CHECK(back.labels == ds.labels);

  save_long_csv(ds, dir / "d.csv");
  const auto csv = load_dataset(dir / "d.csv", DataFormat::LongCSV);
  CHECK(csv.samples == ds.samples);  // 17 significant digits round-trip exactly
  CHECK(csv.labels == ds.labels);

  std::ofstream(dir / "bad.bin") << "NOPE";
  CHECK(ltc::testing::error_code([&] { load_dataset(dir / "bad.bin", DataFormat::Binary); }) == Errc::MalformedFile);
}

TEST_CASE("normalize") {
  TimeSeriesDataset ds;
  ds.n = 1;
  ds.length = 3;
  ds.vars = 2;
  ds.valid_length = 3;
  ds.samples.resize(3, 2);
  ds.samples << 1, 10, 2, 20, 3, 60;
  const auto z = normalize(ds);
  CHECK(z.samples(0, 0) == doctest::Approx(-1.224744871391589).epsilon(1e-12));
  CHECK(z.samples(1, 0) == doctest::Approx(0.0));
  CHECK(z.samples(2, 0) == doctest::Approx(1.224744871391589).epsilon(1e-12));
  for (Index v = 0; v < 2; ++v) {
    CHECK(std::abs(z.samples.col(v).mean()) <= 1e-12);
    CHECK(std::sqrt(z.samples.col(v).array().square().mean()) == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK((normalize(z).samples - z.samples).cwiseAbs().maxCoeff() <= 1e-6);

  ds.samples.col(1).setConstant(4.0);
  CHECK(ltc::testing::error_code([&] { normalize(ds); }) == Errc::ZeroVariance);
}

TEST_CASE("pad_time") {
  TimeSeriesDataset ds = labeled(2, 1, 5);
  ds.sample(0) << 1, 2, 3, 4, 5;
  auto padded = pad_time(ds, 4);
  CHECK(padded.length == 8);
  CHECK(padded.valid_length == 5);
  CHECK(padded.sample(0).topRows(5) == ds.sample(0));
  for (Index t = 5; t < 8; ++t) CHECK(padded.sample(0)(t, 0) == 5.0);
  CHECK(padded.sample(1).topRows(5) == ds.sample(1));

  CHECK(pad_time(labeled(1, 1, 198), 4).length == 200);
  const auto same = pad_time(labeled(2, 1, 64), 4);
  CHECK(same.length == 64);
  CHECK(same.valid_length == 64);
}

TEST_CASE("sequential streams") {
  const auto ds = labeled(3, 10);
  const std::vector<int> sizes = {6, 2, 2};
  StreamParams params;
  params.class_groups = groups_from_sizes(sizes);
  const auto stream = make_stream(ds, StreamMode::Sequential, params, 1);
  REQUIRE(stream.tasks.size() == 3);
  std::multiset<double> all;
  std::set<int> seen;
  for (std::size_t t = 0; t < 3; ++t) {
    std::set<int> classes(stream.tasks[t].labels->begin(), stream.tasks[t].labels->end());
    for (int c : classes) CHECK(seen.insert(c).second);
    for (int c : classes) CHECK(std::count(params.class_groups[t].begin(), params.class_groups[t].end(), c) == 1);
    const auto ids = sample_ids(stream.tasks[t]);
    all.insert(ids.begin(), ids.end());
  }
  CHECK(all == sample_ids(ds));

  params.class_groups = {{0, 1}, {1, 2}};
  CHECK_THROWS_AS(make_stream(labeled(2, 3), StreamMode::Sequential, params, 0), Error);
}

TEST_CASE("iid stream is a permutation") {
  const auto ds = labeled(5, 4);
  const auto stream = make_stream(ds, StreamMode::IID, {}, 3);
  REQUIRE(stream.tasks.size() == 1);
  CHECK(sample_ids(stream.tasks[0]) == sample_ids(ds));
  std::multiset<int> a(ds.labels->begin(), ds.labels->end());
  std::multiset<int> b(stream.tasks[0].labels->begin(), stream.tasks[0].labels->end());
  CHECK(a == b);
  // Labels stay attached to their samples.
  for (Index i = 0; i < stream.tasks[0].n; ++i)
    CHECK((*stream.tasks[0].labels)[i] == static_cast<int>(stream.tasks[0].sample(i)(0, 0)) % 4);
}

TEST_CASE("continuous drift ramps the new class") {
  const auto ds = labeled(40, 3);
  StreamParams params;
  params.num_batches = 10;
  params.batch_size = 64;
  params.max_fraction = 0.5;
  const auto stream = make_stream(ds, StreamMode::ContinuousDrift, params, 7);
  REQUIRE(stream.tasks.size() == 10);
  double prev = -1.0;
  for (const auto& task : stream.tasks) {
    const double frac = static_cast<double>(std::count(task.labels->begin(), task.labels->end(), 2)) / task.n;
    CHECK(frac >= prev);
    prev = frac;
  }
  CHECK(std::abs(prev - 0.5) <= 1.0 / 64);
  CHECK(stream.tasks.front().labels->end() == std::find(stream.tasks.front().labels->begin(),
                                                         stream.tasks.front().labels->end(), 2));
}

TEST_CASE("streams need labels") {
  auto ds = labeled(2, 2);
  ds.labels.reset();
  CHECK(ltc::testing::error_code([&] { make_stream(ds, StreamMode::IID, {}, 0); }) == Errc::MissingLabels);
}

TEST_CASE("synthetic sinusoids") {
  const SinusoidSpec spec;
  const auto a = make_sinusoid_dataset(spec, 42);
  const auto b = make_sinusoid_dataset(spec, 42);
  CHECK(a.n == 300);
  CHECK(a.length == 64);
  CHECK(a.vars == 4);
  CHECK(a.num_classes == 3);
  CHECK(a.samples == b.samples);
  CHECK_FALSE(make_sinusoid_dataset(spec, 43).samples == a.samples);
  std::map<int, int> counts;
  for (int l : *a.labels) ++counts[l];
  CHECK(counts == std::map<int, int>{{0, 100}, {1, 100}, {2, 100}});
  a.validate();
}

}  // TEST_SUITE
