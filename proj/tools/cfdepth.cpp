// Command-line front end. Usage errors exit 2, data errors exit 1; every
// failure prints one line "error: <Kind>: <message>" on stderr.

#include "cfdepth/anova.hpp"
#include "cfdepth/baselines.hpp"
#include "cfdepth/codec.hpp"
#include "cfdepth/errors.hpp"
#include "cfdepth/metrics.hpp"
#include "cfdepth/model.hpp"
#include "cfdepth/normal_bench.hpp"
#include "cfdepth/normals.hpp"
#include "cfdepth/run_config.hpp"
#include "cfdepth/synthgen.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace cfd;

namespace {

struct UsageError : Error {
  explicit UsageError(const std::string& what) : Error("UsageError", what) {}
};

std::string read_text(const fs::path& p) {
  const Bytes b = read_file(p);
  return {b.begin(), b.end()};
}

void write_text(const fs::path& p, const std::string& text) {
  write_file(p, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// Prints to stdout when path is empty or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::fwrite(text.data(), 1, text.size(), stdout);
  } else {
    write_text(path, text);
  }
}

RunConfig load_config(const std::string& path) {
  if (path.empty()) return RunConfig{};
  return parse_run_config(read_text(path));
}

Intrinsics default_intrinsics(const RunConfig& c, int width, int height) {
  return {c.gen.fx, c.gen.fy, 0.5 * (width - 1), 0.5 * (height - 1)};
}

DepthMap read_depth(const std::string& path, const std::optional<Intrinsics>& k, const RunConfig& c) {
  const PfmImage img = decode_pfm(read_file(path));
  return depth_from_pfm(img, k ? *k : default_intrinsics(c, img.width, img.height));
}

struct Options {
  std::string config;
  std::string out;
  std::string out2;
  std::string path_a, path_b, path_c;
  std::string method;
  std::string sample_id = "0000";
  std::optional<int> count;
  std::optional<std::uint64_t> seed;
  std::optional<double> number;
  std::optional<double> fx, fy, cx, cy;
  bool flag_a = false;
  bool flag_b = false;
  std::string response;
};

std::optional<Intrinsics> intrinsics_of(const Options& o, const RunConfig& c, int w, int h) {
  if (!o.fx && !o.fy && !o.cx && !o.cy) return std::nullopt;
  Intrinsics k = default_intrinsics(c, w, h);
  if (o.fx) k.fx = *o.fx;
  if (o.fy) k.fy = *o.fy;
  if (o.cx) k.cx = *o.cx;
  if (o.cy) k.cy = *o.cy;
  return k;
}

int run_gen(const Options& o) {
  RunConfig c = load_config(o.config);
  if (o.count) {
    if (*o.count < 1) throw UsageError("count must be positive");
    c.gen_count = *o.count;
  }
  if (o.seed) c.gen_seed = *o.seed;
  if (o.flag_a && o.flag_b) throw UsageError("--factor-sweep and --slanted are exclusive");
  if (o.flag_a) c.gen_mode = GenMode::sweep;
  if (o.flag_b) c.gen_mode = GenMode::slanted;
  c.validate();
  std::vector<SampleRecord> recs;
  switch (c.gen_mode) {
    case GenMode::training: recs = generate_training_set(c.gen_count, c.gen_seed, c.gen); break;
    case GenMode::sweep: recs = generate_factor_sweep(c.gen_replicates, c.gen_seed, c.gen); break;
    case GenMode::slanted: recs = generate_slanted_set(c.gen_count, c.gen_seed, c.gen); break;
  }
  write_dataset(recs, o.out);
  std::printf("wrote %zu samples to %s\n", recs.size(), o.out.c_str());
  return 0;
}

int run_normals(const Options& o) {
  const RunConfig c = load_config(o.config);
  const PfmImage img = decode_pfm(read_file(o.path_a));
  const auto k = intrinsics_of(o, c, img.width, img.height);
  const DepthMap depth = depth_from_pfm(img, k ? *k : default_intrinsics(c, img.width, img.height));
  if (o.method == "gradient") {
    write_file(o.out, encode_pfm(gradient_normals(depth)));
  } else if (o.method == "quantized") {
    const SmoothedNormals s = quantized_smoothed_normals(gradient_normals(depth), c.train.augment.grid);
    write_file(o.out, encode_pfm(s.normals));
    if (!o.out2.empty()) write_file(o.out2, encode_pfm(s.confidence));
  } else {
    write_file(o.out, encode_pfm(planefit_normals(depth, c.bench_planefit_window)));
  }
  if (!o.out2.empty() && o.method != "quantized") throw UsageError("--conf-out needs --method quantized");
  return 0;
}

int run_noise(const Options& o) {
  RunConfig c = load_config(o.config);
  if (o.number) c.noise.patch_prob = *o.number;
  c.validate();
  const DepthMap depth = read_depth(o.path_a, std::nullopt, c);
  write_file(o.out, encode_pfm(simulate_sensor_noise(depth, o.seed.value_or(1), c.noise)));
  return 0;
}

int run_train(const Options& o) {
  const RunConfig c = load_config(o.config);
  std::vector<SampleRecord> recs = load_dataset(o.path_a);
  if (recs.empty()) throw DatasetError("dataset has no samples: " + o.path_a);
  const auto n_val = static_cast<std::size_t>(static_cast<double>(recs.size()) * c.val_fraction);
  const std::vector<SampleRecord> val(recs.end() - static_cast<std::ptrdiff_t>(n_val), recs.end());
  recs.resize(recs.size() - n_val);
  Model model(c.model);
  std::string log = training_log_header() + "\n";
  train(model, recs, val, c.train, [&](const EpochLog& row) {
    log += format_log_row(row) + "\n";
    std::fprintf(stderr, "epoch %d train %.4f val %.4f\n", row.epoch, row.train_loss, row.val_loss);
  });
  KeyValues meta;
  meta["train_samples"] = std::to_string(recs.size());
  meta["val_samples"] = std::to_string(val.size());
  KeyValues hyper;
  c.train.write(hyper);
  for (const auto& [k, v] : hyper) meta[k] = v;
  save_checkpoint(model, o.out, meta);
  if (!o.out2.empty()) write_text(o.out2, log);
  return 0;
}

int run_predict(const Options& o) {
  const Checkpoint ck = load_checkpoint(o.path_a);
  const RgbImage rgb = decode_ppm(read_file(o.path_b));
  const ObjectMask mask = decode_pgm(read_file(o.path_c));
  const RunConfig c;
  const auto k = intrinsics_of(o, c, rgb.width(), rgb.height());
  write_file(o.out, encode_pfm(predict(ck.model, rgb, mask, k ? *k : default_intrinsics(c, rgb.width(), rgb.height()))));
  return 0;
}

int run_baseline(const Options& o) {
  const RunConfig c;
  const DepthMap depth = read_depth(o.path_a, std::nullopt, c);
  if (o.method == "nothing") {
    write_file(o.out, encode_pfm(do_nothing(depth)));
    return 0;
  }
  if (o.path_b.empty()) throw UsageError("--mask is required for --method poisson");
  const ObjectMask mask = decode_pgm(read_file(o.path_b));
  write_file(o.out, encode_pfm(poisson_fill(depth, mask)));
  return 0;
}

int run_eval(const Options& o) {
  const RunConfig c = load_config(o.config);
  const DepthMap pred = read_depth(o.path_a, std::nullopt, c);
  const DepthMap gt = read_depth(o.path_b, std::nullopt, c);
  const ObjectMask mask = decode_pgm(read_file(o.path_c));
  std::vector<MetricsRecord> recs;
  for (const auto& row : compute_metrics(pred, gt, mask, c.metrics)) recs.push_back({o.sample_id, o.method, row});
  emit(o.out, format_metrics_csv(recs));
  return 0;
}

int run_select(const Options& o) {
  RunConfig c = load_config(o.config);
  if (o.number) c.min_delta = *o.number;
  c.validate();
  const std::vector<SampleRecord> recs = load_dataset(o.path_a);
  std::string text;
  for (std::size_t i : select_samples(recs, c.min_delta, c.select_rule)) text += sample_dir_name(recs[i].id) + "\n";
  emit(o.out, text);
  return 0;
}

double statistic(const MetricsRow& r, const std::string& stat) {
  if (stat == "rms") return r.rms;
  if (stat == "mae") return r.mae;
  if (stat == "rel") return r.rel;
  if (stat == "d1") return r.d1;
  if (stat == "d2") return r.d2;
  return r.d3;
}

int run_anova(const Options& o) {
  RunConfig c = load_config(o.config);
  if (!o.response.empty()) c.response = o.response;
  c.validate();
  const auto colon = c.response.find(':');
  const Region region = parse_region(c.response.substr(0, colon));
  const std::string stat = c.response.substr(colon + 1);

  const std::vector<MetricsRecord> rows = parse_metrics_csv(read_text(o.path_a));
  std::map<std::string, FactorLabels> labels;
  for (const auto& m : load_dataset_meta(o.path_b))
    if (m.factors) labels[sample_dir_name(m.id)] = *m.factors;

  std::string method = o.method;
  if (method.empty()) {
    for (const auto& r : rows) {
      if (method.empty()) method = r.method;
      if (r.method != method) throw UsageError("metrics csv holds several methods; pick one with --method");
    }
  }
  std::vector<FactorLabels> used;
  std::vector<double> y;
  int skipped = 0;
  for (const auto& r : rows) {
    if (r.method != method || r.row.region != region) continue;
    const auto it = labels.find(r.sample_id);
    if (it == labels.end()) throw DatasetError("sample " + r.sample_id + " has no factor labels in " + o.path_b);
    const double v = statistic(r.row, stat);
    if (!std::isfinite(v)) {
      ++skipped;
      continue;
    }
    used.push_back(it->second);
    y.push_back(v);
  }
  if (used.empty()) throw InsufficientData("no metrics rows for method " + method + " and region " + to_string(region));
  const DesignMatrix design = build_design(scene_factors(used));
  AnovaReport report =
      partial_f_tests(design, Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size())));
  report.response = method + " " + c.response;
  if (skipped) report.warnings.push_back(std::to_string(skipped) + " rows without a value skipped");
  emit(o.out, format_anova_report(report));
  return 0;
}

int run_normal_bench(const Options& o) {
  RunConfig c = load_config(o.config);
  if (o.count) {
    if (*o.count < 1) throw UsageError("scenes must be positive");
    c.bench_scenes = *o.count;
  }
  if (o.seed) c.bench_seed = *o.seed;
  if (o.flag_b) c.bench_planefit = false;
  c.validate();
  std::string text = "method,mean_dot,runtime_s\n";
  for (const auto& row : run_normal_bench(c.bench_config())) {
    text += row.method + "," + format_double(row.mean_dot) + "," + (o.flag_a ? format_double(row.runtime_s) : "NA") +
            "\n";
  }
  emit(o.out, text);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Counterfactual depth toolkit"};
  app.require_subcommand(0, 1);
  Options o;
  bool dump = false;
  app.add_flag("--dump-config", dump, "Print the effective configuration (defaults, or --config applied) and exit");
  std::string top_config;
  app.add_option("--config", top_config, "Config file for --dump-config");

  auto config_opt = [&](CLI::App* s) { s->add_option("--config", o.config, "Config file (key = value)"); };

  CLI::App* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  config_opt(gen);
  gen->add_option("--out", o.out, "Output directory")->required();
  gen->add_option("--count", o.count, "Number of samples (training and slanted modes)");
  gen->add_option("--seed", o.seed, "Master seed");
  gen->add_flag("--factor-sweep", o.flag_a, "Generate gen.replicates samples of every label combination");
  gen->add_flag("--slanted", o.flag_b, "Generate slanted-background scenes");

  CLI::App* normals = app.add_subcommand("normals", "Surface normals of a depth map");
  config_opt(normals);
  normals->add_option("--depth", o.path_a, "Depth PFM")->required();
  normals->add_option("--method", o.method, "gradient, quantized or planefit")
      ->required()
      ->check(CLI::IsMember({"gradient", "quantized", "planefit"}));
  normals->add_option("--out", o.out, "Normals PFM (3 channels)")->required();
  normals->add_option("--conf-out", o.out2, "Confidence PFM (quantized only)");
  normals->add_option("--fx", o.fx);
  normals->add_option("--fy", o.fy);
  normals->add_option("--cx", o.cx);
  normals->add_option("--cy", o.cy);

  CLI::App* noise = app.add_subcommand("noise", "Simulate sensor noise on a depth map");
  config_opt(noise);
  noise->add_option("--depth", o.path_a, "Depth PFM")->required();
  noise->add_option("--seed", o.seed, "Noise seed (default 1)");
  noise->add_option("--patch-prob", o.number, "Probability a pixel centers a raised patch");
  noise->add_option("--out", o.out, "Noisy depth PFM")->required();

  CLI::App* trn = app.add_subcommand("train", "Train a model on a dataset");
  config_opt(trn);
  trn->add_option("--data", o.path_a, "Dataset directory")->required();
  trn->add_option("--out-ckpt", o.out, "Checkpoint path")->required();
  trn->add_option("--log", o.out2, "Training log CSV");

  CLI::App* pred = app.add_subcommand("predict", "Predict counterfactual depth");
  pred->add_option("--ckpt", o.path_a, "Checkpoint")->required();
  pred->add_option("--rgb", o.path_b, "RGB PPM")->required();
  pred->add_option("--mask", o.path_c, "Mask PGM (0 = remove)")->required();
  pred->add_option("--out", o.out, "Depth PFM of the model crop")->required();
  pred->add_option("--fx", o.fx);
  pred->add_option("--fy", o.fy);
  pred->add_option("--cx", o.cx);
  pred->add_option("--cy", o.cy);

  CLI::App* base = app.add_subcommand("baseline", "Run a baseline on a depth map");
  base->add_option("--method", o.method, "poisson or nothing")
      ->required()
      ->check(CLI::IsMember({"poisson", "nothing"}));
  base->add_option("--depth", o.path_a, "Depth PFM")->required();
  base->add_option("--mask", o.path_b, "Mask PGM");
  base->add_option("--out", o.out, "Depth PFM")->required();

  CLI::App* ev = app.add_subcommand("eval", "Depth metrics for all, interior and exterior pixels");
  config_opt(ev);
  ev->add_option("--pred", o.path_a, "Predicted depth PFM")->required();
  ev->add_option("--gt", o.path_b, "Ground-truth depth PFM")->required();
  ev->add_option("--mask", o.path_c, "Mask PGM")->required();
  ev->add_option("--out-csv", o.out, "Output CSV (default stdout)");
  ev->add_option("--sample-id", o.sample_id, "sample_id column");
  o.method = "";
  ev->add_option("--method-name", o.method, "method column");

  CLI::App* sel = app.add_subcommand("select", "List samples whose interior depth changes enough");
  config_opt(sel);
  sel->add_option("--data", o.path_a, "Dataset directory")->required();
  sel->add_option("--min-delta", o.number, "Minimum interior change in meters");
  sel->add_option("--out", o.out, "Output list (default stdout)");

  CLI::App* an = app.add_subcommand("anova", "Regress per-sample error on the scene factors");
  config_opt(an);
  an->add_option("--metrics-csv", o.path_a, "Metrics CSV from eval")->required();
  an->add_option("--data", o.path_b, "Dataset directory with factor labels")->required();
  an->add_option("--response", o.response, "region:statistic, e.g. interior:rms");
  an->add_option("--method", o.method, "Method rows to use");
  an->add_option("--out", o.out, "Report path (default stdout)");

  CLI::App* bench = app.add_subcommand("normal-bench", "Compare normal estimators on noisy synthetic depth");
  config_opt(bench);
  bench->add_option("--scenes", o.count, "Number of scenes");
  bench->add_option("--seed", o.seed, "Scene seed");
  bench->add_option("--out", o.out, "CSV path (default stdout)");
  bench->add_flag("--timing", o.flag_a, "Report wall-clock runtimes instead of NA");
  bench->add_flag("--no-planefit", o.flag_b, "Skip the plane-fit row");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::fprintf(stderr, "error: UsageError: %s\n", e.what());
    return 2;
  }

  try {
    if (dump) {
      emit("", format_run_config(load_config(top_config)));
      return 0;
    }
    if (app.get_subcommands().empty()) throw UsageError("a subcommand is required (see --help)");
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "gen") return run_gen(o);
    if (name == "normals") return run_normals(o);
    if (name == "noise") return run_noise(o);
    if (name == "train") return run_train(o);
    if (name == "predict") return run_predict(o);
    if (name == "baseline") return run_baseline(o);
    if (name == "eval") return run_eval(o);
    if (name == "select") return run_select(o);
    if (name == "anova") return run_anova(o);
    return run_normal_bench(o);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: UsageError: %s\n", e.what());
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: ConfigError: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", e.kind().c_str(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: IOError: %s\n", e.what());
    return 1;
  }
}
