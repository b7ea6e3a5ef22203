#include <fstream>

#include <json.hpp>

#include "ltc/error.hpp"
#include "ltc/nn.hpp"

namespace ltc::nn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

json layer_to_json(const LayerSpec& s) {
  return {{"kind", to_string(s.kind)},       {"name", s.name},       {"in_channels", s.in_channels},
          {"out_channels", s.out_channels}, {"kernel", s.kernel},   {"dilation", s.dilation},
          {"hidden", s.hidden},             {"pool", s.pool},       {"activation", to_string(s.activation)},
          {"first_param", s.first_param}};
}

LayerSpec layer_from_json(const json& j) {
  LayerSpec s;
  s.kind = parse_layer_kind(j.at("kind").get<std::string>());
  s.name = j.at("name").get<std::string>();
  s.in_channels = j.at("in_channels").get<Index>();
  s.out_channels = j.at("out_channels").get<Index>();
  s.kernel = j.at("kernel").get<Index>();
  s.dilation = j.at("dilation").get<Index>();
  s.hidden = j.at("hidden").get<Index>();
  s.pool = j.at("pool").get<Index>();
  s.activation = parse_activation(j.at("activation").get<std::string>());
  s.first_param = j.at("first_param").get<Index>();
  return s;
}

std::string blob_name(Index i, const std::string& name) { return std::to_string(i) + "_" + name + ".f64"; }

}  // namespace

void save_checkpoint(const fs::path& dir, const ParamStore& params, std::span<const LayerSpec> layers) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, Errc::DiskWriteFailure, "cannot create " + dir.string());
  json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["layers"] = json::array();
  for (const auto& l : layers) manifest["layers"].push_back(layer_to_json(l));
  manifest["params"] = json::array();
  for (Index i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    const std::string file = blob_name(i, p.name);
    manifest["params"].push_back({{"name", p.name}, {"shape", {p.value.rows(), p.value.cols()}}, {"file", file}});
    const RowMatrix row_major = p.value;
    std::ofstream out(dir / file, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(row_major.data()),
              static_cast<std::streamsize>(sizeof(double) * row_major.size()));
    require(static_cast<bool>(out), Errc::DiskWriteFailure, "cannot write " + (dir / file).string());
  }
  std::ofstream mout(dir / "manifest.json", std::ios::trunc);
  mout << manifest.dump(2) << '\n';
  require(static_cast<bool>(mout), Errc::DiskWriteFailure, "cannot write manifest in " + dir.string());
}

Checkpoint load_checkpoint(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json";
  require(fs::exists(mpath), Errc::MissingCheckpoint, "no manifest in " + dir.string());
  std::ifstream min(mpath);
  json manifest;
  try {
    manifest = json::parse(min);
  } catch (const json::exception& e) {
    fail(Errc::MalformedFile, mpath.string() + ": " + e.what());
  }
  require(manifest.value("format_version", 0) == kFormatVersion, Errc::MalformedFile,
          "unsupported checkpoint version in " + mpath.string());
  Checkpoint ck;
  for (const auto& l : manifest.at("layers")) ck.layers.push_back(layer_from_json(l));
  for (const auto& pj : manifest.at("params")) {
    const Index rows = pj.at("shape").at(0).get<Index>();
    const Index cols = pj.at("shape").at(1).get<Index>();
    const Index idx = ck.params.add(pj.at("name").get<std::string>(), rows, cols);
    RowMatrix buf(rows, cols);
    const fs::path blob = dir / pj.at("file").get<std::string>();
    std::ifstream in(blob, std::ios::binary);
    require(static_cast<bool>(in), Errc::MissingCheckpoint, "missing blob " + blob.string());
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(sizeof(double) * buf.size()));
    require(in.gcount() == static_cast<std::streamsize>(sizeof(double) * buf.size()), Errc::MalformedFile,
            "truncated blob " + blob.string());
    ck.params.value(idx) = buf;
  }
  return ck;
}

}  // namespace ltc::nn
