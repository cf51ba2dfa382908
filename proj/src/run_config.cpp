#include "cfdepth/run_config.hpp"

#include "cfdepth/errors.hpp"

namespace cfd {

std::string to_string(GenMode m) {
  switch (m) {
    case GenMode::training: return "training";
    case GenMode::sweep: return "sweep";
    case GenMode::slanted: return "slanted";
  }
  return "?";
}

GenMode parse_gen_mode(const std::string& s) {
  if (s == "training") return GenMode::training;
  if (s == "sweep") return GenMode::sweep;
  if (s == "slanted") return GenMode::slanted;
  throw ConfigError("unknown gen.mode: " + s);
}

namespace {

std::string to_string(SelectRule r) { return r == SelectRule::mean ? "mean" : "minimum"; }

SelectRule parse_select_rule(const std::string& s) {
  if (s == "mean") return SelectRule::mean;
  if (s == "minimum") return SelectRule::minimum;
  throw ConfigError("unknown eval.select_rule: " + s);
}

template <typename F>
void as_config_error(F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

void RunConfig::validate() const {
  as_config_error([&] {
    gen.validate();
    noise.validate();
    model.validate();
    train.validate();
    bench_config().validate();
  });
  if (gen_count < 1) throw ConfigError("count must be positive");
  if (gen_replicates < 1) throw ConfigError("gen.replicates must be positive");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("train.val_fraction must lie in [0, 1)");
  if (!(min_delta >= 0.0)) throw ConfigError("eval.min_delta must be non-negative");
  if (!(metrics.min_divisor > 0.0)) throw ConfigError("eval.min_divisor must be positive");
  const auto colon = response.find(':');
  if (colon == std::string::npos) throw ConfigError("eval.response must be region:statistic, got " + response);
  as_config_error([&] { parse_region(response.substr(0, colon)); });
  const std::string stat = response.substr(colon + 1);
  if (stat != "rms" && stat != "mae" && stat != "rel" && stat != "d1" && stat != "d2" && stat != "d3") {
    throw ConfigError("unknown response statistic: " + stat);
  }
}

NormalBenchConfig RunConfig::bench_config() const {
  NormalBenchConfig b;
  b.scenes = bench_scenes;
  b.seed = bench_seed;
  b.width = bench_width;
  b.height = bench_height;
  b.focal = bench_focal;
  b.noise = noise;
  b.grid = train.augment.grid;
  b.planefit_window = bench_planefit_window;
  b.include_planefit = bench_planefit;
  return b;
}

std::string format_run_config(const RunConfig& c) {
  KeyValues kv;
  kv["gen.width"] = std::to_string(c.gen.width);
  kv["gen.height"] = std::to_string(c.gen.height);
  kv["gen.fx"] = format_double(c.gen.fx);
  kv["gen.fy"] = format_double(c.gen.fy);
  kv["gen.max_depth"] = format_double(c.gen.max_depth);
  kv["gen.ambient"] = format_double(c.gen.ambient);
  kv["gen.rare_fraction"] = format_double(c.gen.rare_fraction);
  kv["gen.slanted_fraction"] = format_double(c.gen.slanted_fraction);
  kv["gen.proximity_radius"] = format_double(c.gen.proximity_radius);
  kv["gen.similar_depth"] = format_double(c.gen.similar_depth);
  kv["gen.min_mask_pixels"] = std::to_string(c.gen.min_mask_pixels);
  kv["gen.max_attempts"] = std::to_string(c.gen.max_attempts);
  kv["gen.mode"] = to_string(c.gen_mode);
  kv["gen.count"] = std::to_string(c.gen_count);
  kv["gen.replicates"] = std::to_string(c.gen_replicates);
  kv["gen.seed"] = std::to_string(c.gen_seed);
  kv["noise.sigma"] = format_double(c.noise.sigma);
  kv["noise.patch_prob"] = format_double(c.noise.patch_prob);
  kv["noise.patch_height"] = format_double(c.noise.patch_height);
  kv["noise.patch_diameter"] = format_double(c.noise.patch_diameter);
  c.model.write(kv, "model.");
  c.train.write(kv);
  kv["train.val_fraction"] = format_double(c.val_fraction);
  kv["eval.rel_divisor"] = to_string(c.metrics.rel_divisor);
  kv["eval.min_divisor"] = format_double(c.metrics.min_divisor);
  kv["eval.min_delta"] = format_double(c.min_delta);
  kv["eval.select_rule"] = to_string(c.select_rule);
  kv["eval.response"] = c.response;
  kv["bench.scenes"] = std::to_string(c.bench_scenes);
  kv["bench.seed"] = std::to_string(c.bench_seed);
  kv["bench.width"] = std::to_string(c.bench_width);
  kv["bench.height"] = std::to_string(c.bench_height);
  kv["bench.focal"] = format_double(c.bench_focal);
  kv["bench.planefit_window"] = std::to_string(c.bench_planefit_window);
  kv["bench.planefit"] = c.bench_planefit ? "true" : "false";
  return format_key_values(kv);
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig c;
  KeyReader r(parse_key_values(text));
  r.read("gen.width", c.gen.width);
  r.read("gen.height", c.gen.height);
  r.read("gen.fx", c.gen.fx);
  r.read("gen.fy", c.gen.fy);
  r.read("gen.max_depth", c.gen.max_depth);
  r.read("gen.ambient", c.gen.ambient);
  r.read("gen.rare_fraction", c.gen.rare_fraction);
  r.read("gen.slanted_fraction", c.gen.slanted_fraction);
  r.read("gen.proximity_radius", c.gen.proximity_radius);
  r.read("gen.similar_depth", c.gen.similar_depth);
  r.read("gen.min_mask_pixels", c.gen.min_mask_pixels);
  r.read("gen.max_attempts", c.gen.max_attempts);
  std::string mode = to_string(c.gen_mode);
  r.read("gen.mode", mode);
  c.gen_mode = parse_gen_mode(mode);
  r.read("gen.count", c.gen_count);
  r.read("gen.replicates", c.gen_replicates);
  r.read("gen.seed", c.gen_seed);
  r.read("noise.sigma", c.noise.sigma);
  r.read("noise.patch_prob", c.noise.patch_prob);
  r.read("noise.patch_height", c.noise.patch_height);
  r.read("noise.patch_diameter", c.noise.patch_diameter);
  c.model.read(r, "model.");
  c.train.read(r);
  r.read("train.val_fraction", c.val_fraction);
  std::string divisor = to_string(c.metrics.rel_divisor);
  r.read("eval.rel_divisor", divisor);
  as_config_error([&] { c.metrics.rel_divisor = parse_rel_divisor(divisor); });
  r.read("eval.min_divisor", c.metrics.min_divisor);
  r.read("eval.min_delta", c.min_delta);
  std::string rule = to_string(c.select_rule);
  r.read("eval.select_rule", rule);
  c.select_rule = parse_select_rule(rule);
  r.read("eval.response", c.response);
  r.read("bench.scenes", c.bench_scenes);
  r.read("bench.seed", c.bench_seed);
  r.read("bench.width", c.bench_width);
  r.read("bench.height", c.bench_height);
  r.read("bench.focal", c.bench_focal);
  r.read("bench.planefit_window", c.bench_planefit_window);
  r.read("bench.planefit", c.bench_planefit);
  r.finish();
  c.validate();
  return c;
}

}  // namespace cfd
