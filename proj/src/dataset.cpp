#include "cfdepth/codec.hpp"
#include "cfdepth/errors.hpp"
#include "cfdepth/synthgen.hpp"

#include "json.hpp"

#include <algorithm>
#include <cstdio>

namespace cfd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json meta_json(const SampleRecord& rec) {
  const Intrinsics& k = rec.depth_with.intrinsics;
  json j;
  j["id"] = rec.id;
  j["seed"] = rec.seed;
  j["family"] = to_string(rec.family);
  j["intrinsics"] = {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}};
  if (rec.factors) {
    const FactorLabels& f = *rec.factors;
    j["factors"] = {{"complexity", to_string(f.complexity)},
                    {"rarity", to_string(f.rarity)},
                    {"neighbors", f.neighbors},
                    {"behind", to_string(f.behind)},
                    {"distance", f.distance}};
  }
  return j;
}

}  // namespace

std::string sample_dir_name(int id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d", id);
  return buf;
}

void write_dataset(const std::vector<SampleRecord>& records, const fs::path& directory) {
  fs::create_directories(directory);
  for (const auto& rec : records) {
    const fs::path dir = directory / sample_dir_name(rec.id);
    fs::create_directories(dir);
    write_file(dir / "rgb.ppm", encode_ppm(rec.rgb));
    write_file(dir / "mask.pgm", encode_pgm(rec.mask));
    write_file(dir / "depth_with.pfm", encode_pfm(rec.depth_with));
    write_file(dir / "depth_without.pfm", encode_pfm(rec.depth_without));
    const std::string meta = meta_json(rec).dump(2) + "\n";
    write_file(dir / "meta.json", std::span(reinterpret_cast<const std::uint8_t*>(meta.data()), meta.size()));
  }
}

namespace {

SampleMeta parse_meta(const Bytes& raw) {
  const json j = json::parse(raw.begin(), raw.end());
  SampleMeta m;
  m.id = j.at("id").get<int>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.family = parse_family(j.value("family", std::string("standard")));
  const json& ji = j.at("intrinsics");
  m.intrinsics = {ji.at("fx").get<double>(), ji.at("fy").get<double>(), ji.at("cx").get<double>(),
                  ji.at("cy").get<double>()};
  if (j.contains("factors")) {
    const json& jf = j.at("factors");
    FactorLabels f;
    f.complexity = parse_complexity(jf.at("complexity").get<std::string>());
    f.rarity = parse_rarity(jf.at("rarity").get<std::string>());
    f.neighbors = jf.at("neighbors").get<int>();
    f.behind = parse_behind(jf.at("behind").get<std::string>());
    f.distance = jf.at("distance").get<double>();
    f.validate();
    m.factors = f;
  }
  return m;
}

class SampleReader {
 public:
  explicit SampleReader(const fs::path& dir) : dir_(dir), name_(dir.filename().string()) {}

  DatasetError fail(const std::string& detail) const {
    return DatasetError("sample " + name_ + ": " + current_ + (detail.empty() ? "" : ": " + detail));
  }

  Bytes bytes(const char* file) {
    current_ = file;
    const fs::path p = dir_ / file;
    if (!fs::is_regular_file(p)) throw fail("");
    return read_file(p);
  }

  template <typename F>
  auto guarded(F&& f) {
    try {
      return f();
    } catch (const DatasetError&) {
      throw;
    } catch (const std::exception& e) {
      throw fail(e.what());
    }
  }

  void set_current(std::string c) { current_ = std::move(c); }

 private:
  fs::path dir_;
  std::string name_;
  std::string current_;
};

std::vector<fs::path> sample_dirs(const fs::path& directory) {
  if (!fs::is_directory(directory)) throw DatasetError("dataset directory not found: " + directory.string());
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(directory)) {
    if (entry.is_directory()) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

}  // namespace

SampleRecord load_sample(const fs::path& sample_dir) {
  SampleReader reader(sample_dir);
  SampleRecord rec;
  reader.guarded([&] {
    const SampleMeta m = parse_meta(reader.bytes("meta.json"));
    rec.id = m.id;
    rec.seed = m.seed;
    rec.family = m.family;
    rec.factors = m.factors;
    rec.rgb = decode_ppm(reader.bytes("rgb.ppm"));
    rec.mask = decode_pgm(reader.bytes("mask.pgm"));
    rec.depth_with = depth_from_pfm(decode_pfm(reader.bytes("depth_with.pfm")), m.intrinsics);
    rec.depth_without = depth_from_pfm(decode_pfm(reader.bytes("depth_without.pfm")), m.intrinsics);
    return 0;
  });
  reader.set_current("dimensions");
  const int w = rec.rgb.width();
  const int h = rec.rgb.height();
  if (rec.mask.width() != w || rec.mask.height() != h || rec.depth_with.width() != w ||
      rec.depth_with.height() != h || rec.depth_without.width() != w || rec.depth_without.height() != h) {
    throw reader.fail("files disagree in size");
  }
  return rec;
}

std::vector<SampleMeta> load_dataset_meta(const fs::path& directory) {
  std::vector<SampleMeta> out;
  for (const auto& d : sample_dirs(directory)) {
    SampleReader reader(d);
    out.push_back(reader.guarded([&] { return parse_meta(reader.bytes("meta.json")); }));
  }
  return out;
}

std::vector<SampleRecord> load_dataset(const fs::path& directory) {
  std::vector<SampleRecord> out;
  for (const auto& d : sample_dirs(directory)) out.push_back(load_sample(d));
  return out;
}

}  // namespace cfd
