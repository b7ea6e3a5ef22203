#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ltc/cli.hpp"
#include "support.hpp"

using namespace ltc;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
  return cells;
}

fs::path synth_csv(const fs::path& dir, Index n, Index vars, int classes) {
  SinusoidSpec spec;
  spec.n = n;
  spec.length = 14;  // padded to 16 on load
  spec.vars = vars;
  spec.classes = classes;
  save_long_csv(make_sinusoid_dataset(spec, 2), dir / "synth.csv");
  return dir / "synth.csv";
}

// Small model and short schedules so each run takes a fraction of a second.
std::vector<std::string> tiny_flags() {
  return {"--pretrain-epochs", "1", "--train-epochs", "2", "--batch-size", "8", "--conv-channels", "4",
          "--lstm-hidden-1",   "3", "--lstm-hidden-2", "2", "--attention-width", "3"};
}

int run_cli(std::vector<std::string> args, const std::vector<std::string>& extra = {}) {
  args.insert(args.begin(), "ltc");
  args.insert(args.end(), extra.begin(), extra.end());
  return cli::run(args);
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("cluster writes one row per repeat plus a mean") {
  const auto dir = ltc::testing::scratch_dir("cli_cluster");
  const auto data = synth_csv(dir, 24, 2, 3);
  REQUIRE(run_cli({"--out", (dir / "o").string(), "--repeats", "10", "cluster", "--data", data.string(), "--k", "3"},
                  tiny_flags()) == 0);
  const auto lines = read_lines(dir / "o" / "results.csv");
  REQUIRE(lines.size() == 12);
  CHECK(lines[0] == "dataset,n,l,v,c,k,seed,accuracy,purity,mse_final,kld_final,wall_seconds,algorithm");
  CHECK(split(lines[11])[6] == "mean");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split(lines[i]);
    REQUIRE(cells.size() == 13);
    CHECK(cells[1] == "24");
    CHECK(cells[2] == "16");
    CHECK(std::stod(cells[7]) <= std::stod(cells[8]));
  }
  for (int r = 0; r < 10; ++r) CHECK(fs::exists(dir / "o" / "runs" / ("seed_" + std::to_string(r)) / "trace.csv"));
}

TEST_CASE("no refinement epochs still yields a row") {
  const auto dir = ltc::testing::scratch_dir("cli_zero");
  const auto data = synth_csv(dir, 24, 2, 3);
  auto flags = tiny_flags();
  *(std::find(flags.begin(), flags.end(), "--train-epochs") + 1) = "0";
  REQUIRE(run_cli({"--out", (dir / "o").string(), "cluster", "--data", data.string()}, flags) == 0);
  CHECK(read_lines(dir / "o" / "results.csv").size() == 2);
}

TEST_CASE("fixed seeds give byte-identical outputs") {
  const auto dir = ltc::testing::scratch_dir("cli_bytes");
  const auto data = synth_csv(dir, 24, 2, 3);
  for (const char* out : {"a", "b"}) {
    REQUIRE(run_cli({"--out", (dir / out).string(), "--seed", "5", "--no-timing", "cluster", "--data", data.string()},
                    tiny_flags()) == 0);
    REQUIRE(run_cli({"--out", (dir / out / "km").string(), "--seed", "5", "--no-timing", "baseline", "--data",
                     data.string()}) == 0);
  }
  CHECK(ltc::testing::trees_identical(dir / "a", dir / "b"));
  const auto km = read_lines(dir / "a" / "km" / "results.csv");
  REQUIRE(km.size() == 2);
  CHECK(split(km[1]).back() == "kmeans");
  CHECK(split(km[1])[6] == "5");
}

TEST_CASE("configuration file and flag precedence") {
  const auto dir = ltc::testing::scratch_dir("cli_config");
  cli::ExperimentConfig cfg;
  cli::apply_config_json(cfg, R"({"k": 4, "delta": 0.07, "train_epochs": 7, "groups": [[0, 1], [2]],
                                  "linkage": "average", "seed": 3})");
  CHECK(cfg.k == 4);
  CHECK(cfg.pool.delta == 0.07);
  CHECK(cfg.train.train_epochs == 7);
  CHECK(cfg.train.linkage == tc::Linkage::Average);
  CHECK(cfg.stream.class_groups == std::vector<std::vector<int>>{{0, 1}, {2}});
  CHECK(cfg.seed == 3);
  CHECK(ltc::testing::error_code([&] { cli::apply_config_json(cfg, R"({"bogus": 1})"); }) == Errc::InvalidArgument);

  const auto data = synth_csv(dir, 24, 2, 3);
  std::ofstream(dir / "cfg.json") << R"({"data": ")" << data.string() << R"(", "k": 2, "seed": 11, "timing": false})";
  REQUIRE(run_cli({"--config", (dir / "cfg.json").string(), "--out", (dir / "o").string(), "--seed", "4", "baseline",
                   "--k", "3"}) == 0);
  const auto row = split(read_lines(dir / "o" / "results.csv")[1]);
  CHECK(row[5] == "3");
  CHECK(row[6] == "4");
  CHECK(std::stod(row[11]) == 0.0);
}

TEST_CASE("errors map to exit codes") {
  const auto dir = ltc::testing::scratch_dir("cli_errors");
  CHECK(run_cli({"--out", (dir / "o").string(), "cluster", "--data", (dir / "nope.csv").string()}) == 2);
  CHECK(run_cli({"cluster", "--no-such-flag"}) == 2);
  CHECK(run_cli({"--config", (dir / "missing.json").string(), "baseline"}) == 2);

  // The installed binary reports the same way.
  const std::string cmd = std::string(LTC_CLI_PATH) + " cluster --data " + (dir / "nope.csv").string() + " --out " +
                          (dir / "o").string() + " 2> " + (dir / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(status) == 2);
  CHECK(read_lines(dir / "stderr.txt").size() >= 1);
}

TEST_CASE("lifelong run and pool commands") {
  const auto dir = ltc::testing::scratch_dir("cli_lifelong");
  const auto data = synth_csv(dir, 32, 2, 4);
  REQUIRE(run_cli({"--out", (dir / "o").string(), "--no-timing", "lifelong", "--data", data.string(), "--groups",
                   "0,1;2,3", "--pool-capacity", "2"},
                  tiny_flags()) == 0);
  const auto lines = read_lines(dir / "o" / "lifelong.csv");
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "step,task_id,decision,v,pool_size,acc_task,acc_task_0,acc_task_1");
  const auto first = split(lines[1]);
  CHECK(first[2] == "new_model");
  CHECK(std::stoi(first[4]) == 1);
  for (std::size_t i = 1; i < lines.size(); ++i) CHECK(std::stoi(split(lines[i])[4]) <= 2);

  std::ostringstream listing;
  cli::cmd_pool(cli::PoolAction::List, dir / "o" / "pool", listing);
  std::istringstream in(listing.str());
  std::vector<std::string> rows;
  for (std::string l; std::getline(in, l);) rows.push_back(l);
  const std::size_t entries = split(lines.back())[4] == "2" ? 2 : 1;
  REQUIRE(rows.size() == entries + 1);
  CHECK(rows[0] == "id,p_c,h,created_at");

  std::ostringstream manifest;
  cli::cmd_pool(cli::PoolAction::Inspect, dir / "o" / "pool", manifest, std::nullopt, 0);
  CHECK(manifest.str().find("\"habituation\"") != std::string::npos);
  std::ostringstream sink;
  CHECK(ltc::testing::error_code([&] {
          cli::cmd_pool(cli::PoolAction::Inspect, dir / "o" / "pool", sink, std::nullopt, 99);
        }) == Errc::MissingCheckpoint);
  CHECK(run_cli({"pool", "inspect", "--pool", (dir / "o" / "pool").string(), "--id", "99"}) == 2);

  cli::cmd_pool(cli::PoolAction::Export, dir / "o" / "pool", sink, dir / "copy");
  CHECK(ltc::testing::trees_identical(dir / "o" / "pool", dir / "copy"));

  lifelong::ModelPool fresh;
  lifelong::save_pool(fresh, dir / "fresh");
  std::ostringstream empty;
  cli::cmd_pool(cli::PoolAction::List, dir / "fresh", empty);
  CHECK(empty.str() == "id,p_c,h,created_at\n");
  CHECK(ltc::testing::error_code([&] { cli::cmd_pool(cli::PoolAction::List, dir / "absent", sink); }) ==
        Errc::MissingCheckpoint);
}

TEST_CASE("repeating one task refines after the first step") {
  const auto dir = ltc::testing::scratch_dir("cli_iid");
  const auto data = synth_csv(dir, 24, 2, 2);
  REQUIRE(run_cli({"--out", (dir / "o").string(), "lifelong", "--data", data.string(), "--stream", "iid", "--passes",
                   "3"},
                  tiny_flags()) == 0);
  const auto lines = read_lines(dir / "o" / "lifelong.csv");
  REQUIRE(lines.size() == 4);
  CHECK(split(lines[1])[2] == "new_model");
  CHECK(split(lines[2])[2] == "refine");
  CHECK(split(lines[3])[2] == "refine");
}

}  // TEST_SUITE
