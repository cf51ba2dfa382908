#pragma once

#include "cfdepth/keyvalue.hpp"
#include "cfdepth/metrics.hpp"
#include "cfdepth/model.hpp"
#include "cfdepth/normal_bench.hpp"
#include "cfdepth/synthgen.hpp"

#include <cstdint>
#include <string>

namespace cfd {

enum class GenMode { training, sweep, slanted };

std::string to_string(GenMode m);
GenMode parse_gen_mode(const std::string& s);

/// Every tunable of the command-line pipeline. Text form: one
/// `section.field = value` line per setting (see format_run_config).
struct RunConfig {
  // gen.*
  GenConfig gen;
  GenMode gen_mode = GenMode::training;
  int gen_count = 500;        // training and slanted modes
  int gen_replicates = 2;     // sweep mode: samples per label combination
  std::uint64_t gen_seed = 1;

  // noise.*
  NoiseParams noise;

  // model.*
  ModelConfig model;

  // train.*, loss.*, augment.*, normals.*
  TrainConfig train;
  double val_fraction = 0.1;  // train.val_fraction: tail of the dataset held out

  // eval.*
  MetricOptions metrics;
  double min_delta = 0.25;
  SelectRule select_rule = SelectRule::mean;
  std::string response = "interior:rms";  // anova response, region:statistic

  // bench.*
  int bench_scenes = 100;
  std::uint64_t bench_seed = 7;
  int bench_width = 640;
  int bench_height = 512;
  double bench_focal = 400.0;
  int bench_planefit_window = 9;
  bool bench_planefit = true;

  /// ConfigError naming the offending setting.
  void validate() const;
  NormalBenchConfig bench_config() const;
};

std::string format_run_config(const RunConfig& config);

/// Starts from the defaults and applies the given text. Unknown keys and
/// malformed values raise ConfigError; syntax errors raise ParseError.
RunConfig parse_run_config(const std::string& text);

}  // namespace cfd
