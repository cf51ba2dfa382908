#pragma once

#include "cfdepth/image.hpp"
#include "cfdepth/synthgen.hpp"

#include <array>
#include <string>
#include <vector>

namespace cfd {

enum class Region { all, interior, exterior };
enum class RelDivisor { prediction, ground_truth };

std::string to_string(Region r);
Region parse_region(const std::string& s);
std::string to_string(RelDivisor d);
RelDivisor parse_rel_divisor(const std::string& s);

/// Divisor of rel and the exclusion threshold on it.
struct MetricOptions {
  RelDivisor rel_divisor = RelDivisor::prediction;
  double min_divisor = 1e-6;
};

/// Running sums behind one row. Sums use Neumaier compensation in
/// row-major pixel order.
struct MetricSums {
  long n_pixels = 0;    // valid ground truth
  long n_excluded = 0;  // invalid ground truth, or divisor at or below min_divisor
  long n_ratio = 0;     // pixels entering rel and delta
  double sse = 0.0;
  double sae = 0.0;
  double rel = 0.0;
  std::array<long, 3> delta{};
};

struct MetricsRow {
  Region region = Region::all;
  bool present = false;  // false when no pixel entered the row
  long n_pixels = 0;
  long n_excluded = 0;
  double rms = 0.0;
  double mae = 0.0;
  double rel = 0.0;
  double d1 = 0.0;  // percent
  double d2 = 0.0;
  double d3 = 0.0;
  MetricSums sums;
};

/// Rows for all, interior (mask 0) and exterior (mask 1) pixels, in that
/// order. rms and mae are over pixels with valid ground truth; rel and the
/// delta percentages also skip pixels whose divisor (or prediction) is at
/// or below min_divisor. A row with no pixels is flagged absent.
std::array<MetricsRow, 3> compute_metrics(const DepthMap& pred, const DepthMap& gt, const ObjectMask& mask,
                                          const MetricOptions& options = {});

struct MetricsRecord {
  std::string sample_id;
  std::string method;
  MetricsRow row;
};

/// Header: sample_id,method,region,n_pixels,n_excluded,rms,mae,rel,d1,d2,d3.
/// Absent rows print NA for the six statistics.
std::string metrics_csv_header();
std::string format_metrics_csv(const std::vector<MetricsRecord>& records);
std::vector<MetricsRecord> parse_metrics_csv(const std::string& text);

enum class SelectRule { mean, minimum };

/// Interior depth change |depth_without - depth_with| of a record,
/// aggregated by `rule` over mask-0 pixels where both depths are valid.
/// NaN when there are no such pixels.
double interior_depth_change(const SampleRecord& rec, SelectRule rule = SelectRule::mean);

/// Indices of records whose interior change is at least min_delta; a
/// threshold of 0 or less keeps every record.
std::vector<std::size_t> select_samples(const std::vector<SampleRecord>& records, double min_delta = 0.25,
                                        SelectRule rule = SelectRule::mean);

}  // namespace cfd
