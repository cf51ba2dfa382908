#include "cfdepth/errors.hpp"
#include "cfdepth/metrics.hpp"

#include "doctest.h"

#include <cmath>
#include <random>

using namespace cfd;

namespace {

const Intrinsics kIntr{10.0, 10.0, 7.5, 7.5};

// Per-pixel reference: one pass per region, compensated sums written out
// independently of the library.
struct Oracle {
  long n = 0, excluded = 0, n_ratio = 0, d[3] = {0, 0, 0};
  double sse = 0, sse_c = 0, sae = 0, sae_c = 0, rel = 0, rel_c = 0;

  static void kahan(double& s, double& c, double v) {
    const double t = s + v;
    c += std::abs(s) >= std::abs(v) ? (s - t) + v : (v - t) + s;
    s = t;
  }
};

Oracle oracle(const DepthMap& pred, const DepthMap& gt, const ObjectMask& mask, int region, bool by_pred) {
  Oracle o;
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      if (region == 1 && mask.data(y, x) != 0) continue;
      if (region == 2 && mask.data(y, x) != 1) continue;
      const double g = gt.data(y, x), p = pred.data(y, x);
      if (g <= 0) {
        o.excluded++;
        continue;
      }
      o.n++;
      Oracle::kahan(o.sse, o.sse_c, (g - p) * (g - p));
      Oracle::kahan(o.sae, o.sae_c, std::abs(g - p));
      const double div = by_pred ? p : g;
      if (div <= 1e-6 || p <= 1e-6) {
        o.excluded++;
        continue;
      }
      o.n_ratio++;
      Oracle::kahan(o.rel, o.rel_c, std::abs(g - p) / div);
      const double r = g / p > p / g ? g / p : p / g;
      if (r < 1.25) o.d[0]++;
      if (r < 1.25 * 1.25) o.d[1]++;
      if (r < 1.25 * 1.25 * 1.25) o.d[2]++;
    }
  }
  return o;
}

void check_against(const MetricsRow& r, const Oracle& o) {
  REQUIRE(r.present == (o.n > 0));
  CHECK(r.n_pixels == o.n);
  CHECK(r.n_excluded == o.excluded);
  if (!r.present) return;
  CHECK(r.rms == std::sqrt((o.sse + o.sse_c) / o.n));
  CHECK(r.mae == (o.sae + o.sae_c) / o.n);
  REQUIRE(o.n_ratio > 0);
  CHECK(r.rel == (o.rel + o.rel_c) / o.n_ratio);
  CHECK(r.d1 == 100.0 * o.d[0] / o.n_ratio);
  CHECK(r.d2 == 100.0 * o.d[1] / o.n_ratio);
  CHECK(r.d3 == 100.0 * o.d[2] / o.n_ratio);
}

struct Instance {
  DepthMap pred, gt;
  ObjectMask mask;
};

Instance random_instance(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Instance in{DepthMap(16, 16, kIntr), DepthMap(16, 16, kIntr), ObjectMask(16, 16, 1)};
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      in.gt.data(y, x) = u(rng) < 0.05f ? 0.0f : 0.5f + 4.0f * u(rng);
      const float v = u(rng);
      in.pred.data(y, x) = v < 0.03f ? 0.0f : in.gt.data(y, x) * (0.5f + 1.2f * u(rng)) + 0.1f;
      in.mask.data(y, x) = u(rng) < 0.3f ? 0 : 1;
    }
  return in;
}

}  // namespace

TEST_CASE("perfect prediction") {
  DepthMap gt(8, 6, kIntr, 2.0f);
  ObjectMask m(8, 6, 1);
  m.data(2, 2) = 0;
  for (const auto& r : compute_metrics(gt, gt, m)) {
    CHECK(r.present);
    CHECK(r.rms == 0.0);
    CHECK(r.mae == 0.0);
    CHECK(r.rel == 0.0);
    CHECK(r.d1 == 100.0);
    CHECK(r.d3 == 100.0);
  }
}

TEST_CASE("single pixel delta arithmetic") {
  const DepthMap gt(1, 1, kIntr, 2.0f);
  const DepthMap pred(1, 1, kIntr, 1.5f);
  const auto rows = compute_metrics(pred, gt, ObjectMask(1, 1, 1));
  CHECK(rows[0].d1 == 0.0);
  CHECK(rows[0].d2 == 100.0);
  CHECK(rows[0].rms == 0.5);
  CHECK(rows[0].rel == doctest::Approx(0.5 / 1.5).epsilon(1e-15));
  CHECK_FALSE(rows[1].present);
  CHECK(std::isnan(rows[1].rms));
  MetricOptions by_gt;
  by_gt.rel_divisor = RelDivisor::ground_truth;
  CHECK(compute_metrics(pred, gt, ObjectMask(1, 1, 1), by_gt)[0].rel == 0.25);
}

TEST_CASE("brute-force oracle on random instances") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Instance in = random_instance(seed);
    for (bool by_pred : {true, false}) {
      MetricOptions opt;
      opt.rel_divisor = by_pred ? RelDivisor::prediction : RelDivisor::ground_truth;
      const auto rows = compute_metrics(in.pred, in.gt, in.mask, opt);
      for (int region = 0; region < 3; ++region) {
        CHECK(rows[region].region == static_cast<Region>(region));
        check_against(rows[region], oracle(in.pred, in.gt, in.mask, region, by_pred));
      }
      for (const auto& r : rows) {
        CHECK(r.d1 <= r.d2);
        CHECK(r.d2 <= r.d3);
        CHECK(r.d3 <= 100.0);
        CHECK(r.rms >= r.mae);
      }
      CHECK(rows[0].n_pixels == rows[1].n_pixels + rows[2].n_pixels);
      CHECK(rows[0].n_excluded == rows[1].n_excluded + rows[2].n_excluded);
      CHECK(rows[0].sums.n_ratio == rows[1].sums.n_ratio + rows[2].sums.n_ratio);
      for (int i = 0; i < 3; ++i) CHECK(rows[0].sums.delta[i] == rows[1].sums.delta[i] + rows[2].sums.delta[i]);
      CHECK(rows[0].sums.sse == doctest::Approx(rows[1].sums.sse + rows[2].sums.sse).epsilon(1e-14));
      CHECK(rows[0].sums.sae == doctest::Approx(rows[1].sums.sae + rows[2].sums.sae).epsilon(1e-14));
    }
  }
}

TEST_CASE("scale invariance") {
  const Instance in = random_instance(7);
  DepthMap p2 = in.pred, g2 = in.gt;
  p2.data *= 4.0f;
  g2.data *= 4.0f;
  const auto a = compute_metrics(in.pred, in.gt, in.mask);
  const auto b = compute_metrics(p2, g2, in.mask);
  for (int i = 0; i < 3; ++i) {
    CHECK(b[i].rel == doctest::Approx(a[i].rel).epsilon(1e-12));
    CHECK(b[i].d1 == a[i].d1);
    CHECK(b[i].d3 == a[i].d3);
    CHECK(b[i].rms == doctest::Approx(4.0 * a[i].rms).epsilon(1e-12));
    CHECK(b[i].mae == doctest::Approx(4.0 * a[i].mae).epsilon(1e-12));
  }
}

TEST_CASE("metrics errors") {
  CHECK_THROWS_AS(compute_metrics(DepthMap(4, 4, kIntr), DepthMap(4, 5, kIntr), ObjectMask(4, 4, 1)), ShapeError);
}

TEST_CASE("metrics csv round trip") {
  const Instance in = random_instance(3);
  const auto rows = compute_metrics(in.pred, in.gt, in.mask);
  std::vector<MetricsRecord> recs;
  for (const auto& r : rows) recs.push_back({"0003", "model", r});
  MetricsRow absent;
  absent.region = Region::interior;
  recs.push_back({"0004", "poisson", absent});
  const std::string csv = format_metrics_csv(recs);
  CHECK(csv.rfind(metrics_csv_header() + "\n", 0) == 0);
  CHECK(csv.find("0004,poisson,interior,0,0,NA,NA,NA,NA,NA,NA\n") != std::string::npos);
  const auto back = parse_metrics_csv(csv);
  REQUIRE(back.size() == 4);
  for (int i = 0; i < 3; ++i) {
    CHECK(back[i].row.rms == rows[i].rms);
    CHECK(back[i].row.d2 == rows[i].d2);
    CHECK(back[i].row.n_excluded == rows[i].n_excluded);
  }
  CHECK_FALSE(back[3].row.present);
  CHECK(format_metrics_csv(back) == csv);
  CHECK_THROWS_AS(parse_metrics_csv("a,b\n"), FormatError);
  CHECK_THROWS_AS(parse_metrics_csv(metrics_csv_header() + "\n1,m,all,3\n"), FormatError);
  CHECK_THROWS_AS(parse_metrics_csv(metrics_csv_header() + "\n1,m,top,1,0,1,1,1,1,1,1\n"), FormatError);
}

TEST_CASE("select_samples") {
  SampleRecord same;
  same.mask = ObjectMask(10, 10, 1);
  same.mask.data.block(3, 3, 4, 4).setZero();
  same.depth_with = DepthMap(10, 10, kIntr, 2.0f);
  same.depth_without = same.depth_with;
  SampleRecord wall = same;
  wall.depth_with.data.block(3, 3, 4, 4).setConstant(1.5f);
  SampleRecord partial = same;
  partial.depth_with.data.block(3, 3, 4, 2).setConstant(1.4f);

  CHECK(interior_depth_change(same) == 0.0);
  CHECK(interior_depth_change(wall) == doctest::Approx(0.5).epsilon(1e-7));
  CHECK(interior_depth_change(partial) == doctest::Approx(0.3).epsilon(1e-6));
  CHECK(interior_depth_change(partial, SelectRule::minimum) == 0.0);
  const std::vector<SampleRecord> recs{same, wall, partial};
  CHECK(select_samples(recs) == std::vector<std::size_t>{1, 2});
  CHECK(select_samples(recs, 0.25, SelectRule::minimum) == std::vector<std::size_t>{1});
  CHECK(select_samples(recs, 0.0) == std::vector<std::size_t>{0, 1, 2});
}
