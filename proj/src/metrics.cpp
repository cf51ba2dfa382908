#include "cfdepth/metrics.hpp"

#include "cfdepth/errors.hpp"
#include "cfdepth/keyvalue.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

namespace cfd {

std::string to_string(Region r) {
  switch (r) {
    case Region::all: return "all";
    case Region::interior: return "interior";
    case Region::exterior: return "exterior";
  }
  return "?";
}

Region parse_region(const std::string& s) {
  if (s == "all") return Region::all;
  if (s == "interior") return Region::interior;
  if (s == "exterior") return Region::exterior;
  throw InvalidInput("unknown region: " + s);
}

std::string to_string(RelDivisor d) { return d == RelDivisor::prediction ? "prediction" : "ground_truth"; }

RelDivisor parse_rel_divisor(const std::string& s) {
  if (s == "prediction") return RelDivisor::prediction;
  if (s == "ground_truth") return RelDivisor::ground_truth;
  throw InvalidInput("unknown rel divisor: " + s);
}

namespace {

struct Neumaier {
  double sum = 0.0;
  double c = 0.0;
  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      c += (sum - t) + v;
    } else {
      c += (v - t) + sum;
    }
    sum = t;
  }
  double value() const { return sum + c; }
};

struct Accumulator {
  MetricSums s;
  Neumaier sse, sae, rel;
};

MetricsRow finish(Region region, const Accumulator& a) {
  MetricsRow r;
  r.region = region;
  r.sums = a.s;
  r.sums.sse = a.sse.value();
  r.sums.sae = a.sae.value();
  r.sums.rel = a.rel.value();
  r.n_pixels = a.s.n_pixels;
  r.n_excluded = a.s.n_excluded;
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  r.present = a.s.n_pixels > 0;
  if (!r.present) {
    r.rms = r.mae = r.rel = r.d1 = r.d2 = r.d3 = nan;
    return r;
  }
  const double n = static_cast<double>(a.s.n_pixels);
  r.rms = std::sqrt(r.sums.sse / n);
  r.mae = r.sums.sae / n;
  if (a.s.n_ratio > 0) {
    const double m = static_cast<double>(a.s.n_ratio);
    r.rel = r.sums.rel / m;
    r.d1 = 100.0 * static_cast<double>(a.s.delta[0]) / m;
    r.d2 = 100.0 * static_cast<double>(a.s.delta[1]) / m;
    r.d3 = 100.0 * static_cast<double>(a.s.delta[2]) / m;
  } else {
    r.rel = r.d1 = r.d2 = r.d3 = nan;
  }
  return r;
}

}  // namespace

std::array<MetricsRow, 3> compute_metrics(const DepthMap& pred, const DepthMap& gt, const ObjectMask& mask,
                                          const MetricOptions& options) {
  const int w = gt.width();
  const int h = gt.height();
  if (pred.width() != w || pred.height() != h || mask.width() != w || mask.height() != h) {
    throw ShapeError("compute_metrics: pred " + std::to_string(pred.width()) + "x" + std::to_string(pred.height()) +
                     ", gt " + std::to_string(w) + "x" + std::to_string(h) + ", mask " +
                     std::to_string(mask.width()) + "x" + std::to_string(mask.height()));
  }
  const double t1 = 1.25;
  const double thresholds[3] = {t1, t1 * t1, t1 * t1 * t1};
  auto add = [&](Accumulator& a, double d, double p) {
    if (!(d > 0.0)) {
      ++a.s.n_excluded;
      return;
    }
    ++a.s.n_pixels;
    const double e = d - p;
    a.sse.add(e * e);
    a.sae.add(std::abs(e));
    const double div = options.rel_divisor == RelDivisor::prediction ? p : d;
    if (!(div > options.min_divisor) || !(p > options.min_divisor)) {
      ++a.s.n_excluded;
      return;
    }
    ++a.s.n_ratio;
    a.rel.add(std::abs(e) / div);
    const double ratio = std::max(d / p, p / d);
    for (int i = 0; i < 3; ++i)
      if (ratio < thresholds[i]) ++a.s.delta[i];
  };
  Accumulator all, interior, exterior;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double d = gt.data(y, x);
      const double p = pred.data(y, x);
      add(all, d, p);
      add(mask.removed(y, x) ? interior : exterior, d, p);
    }
  return {finish(Region::all, all), finish(Region::interior, interior), finish(Region::exterior, exterior)};
}

std::string metrics_csv_header() { return "sample_id,method,region,n_pixels,n_excluded,rms,mae,rel,d1,d2,d3"; }

std::string format_metrics_csv(const std::vector<MetricsRecord>& records) {
  std::string out = metrics_csv_header() + "\n";
  auto num = [](const MetricsRow& r, double v) { return r.present && std::isfinite(v) ? format_double(v) : "NA"; };
  for (const auto& rec : records) {
    const MetricsRow& r = rec.row;
    out += rec.sample_id + "," + rec.method + "," + to_string(r.region) + "," + std::to_string(r.n_pixels) + "," +
           std::to_string(r.n_excluded) + "," + num(r, r.rms) + "," + num(r, r.mae) + "," + num(r, r.rel) + "," +
           num(r, r.d1) + "," + num(r, r.d2) + "," + num(r, r.d3) + "\n";
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_number(const std::string& s, std::size_t line) {
  if (s == "NA") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw FormatError("metrics csv line " + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

long parse_count(const std::string& s, std::size_t line) {
  long v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || v < 0) {
    throw FormatError("metrics csv line " + std::to_string(line) + ": bad count '" + s + "'");
  }
  return v;
}

}  // namespace

std::vector<MetricsRecord> parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("metrics csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != metrics_csv_header()) throw FormatError("metrics csv: unexpected header '" + line + "'");
  std::vector<MetricsRecord> out;
  std::size_t no = 1;
  while (std::getline(in, line)) {
    ++no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != 11) {
      throw FormatError("metrics csv line " + std::to_string(no) + ": expected 11 fields, got " +
                        std::to_string(f.size()));
    }
    MetricsRecord rec;
    rec.sample_id = f[0];
    rec.method = f[1];
    MetricsRow& r = rec.row;
    try {
      r.region = parse_region(f[2]);
    } catch (const InvalidInput& e) {
      throw FormatError("metrics csv line " + std::to_string(no) + ": " + e.what());
    }
    r.n_pixels = parse_count(f[3], no);
    r.n_excluded = parse_count(f[4], no);
    r.rms = parse_number(f[5], no);
    r.mae = parse_number(f[6], no);
    r.rel = parse_number(f[7], no);
    r.d1 = parse_number(f[8], no);
    r.d2 = parse_number(f[9], no);
    r.d3 = parse_number(f[10], no);
    r.present = f[5] != "NA";
    out.push_back(std::move(rec));
  }
  return out;
}

double interior_depth_change(const SampleRecord& rec, SelectRule rule) {
  const int w = rec.mask.width();
  const int h = rec.mask.height();
  if (rec.depth_with.width() != w || rec.depth_with.height() != h || rec.depth_without.width() != w ||
      rec.depth_without.height() != h) {
    throw ShapeError("interior_depth_change: record dims disagree");
  }
  Neumaier sum;
  long n = 0;
  double lo = std::numeric_limits<double>::infinity();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!rec.mask.removed(y, x) || !rec.depth_with.valid(y, x) || !rec.depth_without.valid(y, x)) continue;
      const double c = std::abs(static_cast<double>(rec.depth_without.data(y, x)) - rec.depth_with.data(y, x));
      sum.add(c);
      lo = std::min(lo, c);
      ++n;
    }
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  return rule == SelectRule::mean ? sum.value() / static_cast<double>(n) : lo;
}

std::vector<std::size_t> select_samples(const std::vector<SampleRecord>& records, double min_delta, SelectRule rule) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const double c = interior_depth_change(records[i], rule);
    if (min_delta <= 0.0 || c >= min_delta) out.push_back(i);
  }
  return out;
}

}  // namespace cfd
