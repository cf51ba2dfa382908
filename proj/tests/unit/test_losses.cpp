#include "doctest.h"

#include "cfdepth/losses.hpp"

#include <cmath>
#include <cstring>
#include <random>

using namespace cfd;
using namespace cfd::ad;

namespace {

Tensor<double> filled(const Shape& s, std::initializer_list<double> v) {
  Tensor<double> t(s);
  int i = 0;
  for (double x : v) t.data[i++] = x;
  return t;
}

LossTargets<double> random_targets(const Shape& s, std::mt19937_64& rng, double invalid_rate) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LossTargets<double> tg{Tensor<double>(s), Tensor<double>(Shape{s.n, 3, s.h, s.w}), Tensor<double>(s),
                         Tensor<double>(s), {}, {}};
  for (int n = 0; n < s.n; ++n) {
    tg.fx.push_back(20.0 + 10.0 * u(rng));
    tg.fy.push_back(20.0 + 10.0 * u(rng));
    for (int y = 0; y < s.h; ++y) {
      for (int x = 0; x < s.w; ++x) {
        tg.depth.at(n, 0, y, x) = 1.0 + 2.0 * u(rng);
        Eigen::Vector3d nn(0.6 * (u(rng) - 0.5), 0.6 * (u(rng) - 0.5), 1.0);
        nn.normalize();
        for (int c = 0; c < 3; ++c) tg.normals.at(n, c, y, x) = nn[c];
        tg.confidence.at(n, 0, y, x) = 0.2 + 0.8 * u(rng);
        tg.valid.at(n, 0, y, x) = u(rng) < invalid_rate ? 0.0 : 1.0;
      }
    }
  }
  return tg;
}

Tensor<double> smooth_prediction(const Shape& s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor<double> p(s);
  for (int n = 0; n < s.n; ++n)
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x) p.at(n, 0, y, x) = 2.0 + 0.01 * x - 0.008 * y + 0.004 * u(rng);
  return p;
}

}  // namespace

TEST_CASE("berhu loss examples") {
  const Shape s{1, 1, 1, 2};
  Tape<double> t;
  auto pred = t.constant(filled(s, {0.5, 2.0}));
  const Tensor<double> gt(s, 0.0);
  const Tensor<double> valid(s, 1.0);
  // |0.5| = 0.5 and (4 + 1) / 2 = 2.5 with c = 1.
  CHECK(berhu_loss(pred, gt, valid, std::optional<double>(1.0)).item() == doctest::Approx(1.5));
  // Detached cutoff: c = 0.2 * 2 = 0.4; (0.25 + 0.16) / 0.8 and (4 + 0.16) / 0.8.
  CHECK(berhu_cutoff(pred.value(), gt.data, valid.data) == doctest::Approx(0.4));
  CHECK(berhu_loss(pred, gt, valid).item() == doctest::Approx(0.5 * (0.41 / 0.8 + 4.16 / 0.8)));
  // Perfect prediction.
  auto exact = t.constant(gt);
  CHECK(berhu_loss(exact, gt, valid).item() == 0.0);
}

TEST_CASE("avg depth loss example") {
  const Shape s{1, 1, 2, 2};
  Tape<double> t;
  auto pred = t.constant(Tensor<double>(s, 2.0));
  const Tensor<double> gt = filled(s, {1.0, 2.0, 2.0, 1.0});
  const Tensor<double> valid(s, 1.0);
  CHECK(avg_depth_loss(pred, gt, valid).item() == doctest::Approx(0.25));
  // Images with no valid pixel are left out of the batch mean.
  const Shape s2{2, 1, 2, 2};
  Tape<double> t2;
  auto pred2 = t2.constant(Tensor<double>(s2, 2.0));
  Tensor<double> gt2(s2, 0.0), valid2(s2, 0.0);
  for (int i = 0; i < 4; ++i) {
    gt2.data[i] = gt.data[i];
    valid2.data[i] = 1.0;
  }
  CHECK(avg_depth_loss(pred2, gt2, valid2).item() == doctest::Approx(0.25));
  CHECK_THROWS_AS(avg_depth_loss(pred2, gt2, Tensor<double>(s2, 0.0)), InvalidInput);
}

TEST_CASE("surface normal loss examples") {
  const Shape s{1, 1, 6, 6};
  LossTargets<double> tg{Tensor<double>(s, 2.0), Tensor<double>(Shape{1, 3, 6, 6}, 0.0), Tensor<double>(s, 1.0),
                         Tensor<double>(s, 1.0), {10.0}, {10.0}};
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) tg.normals.at(0, 2, y, x) = 1.0;
  Tape<double> t;
  auto flat = t.constant(Tensor<double>(s, 2.0));
  CHECK(surface_normal_loss(flat, tg).item() == 0.0);

  // Slope 0.1 per pixel with f = 10: predicted normal (1, 0, 1) / sqrt 2
  // against a frontal target: -log(1 / sqrt 2) = log(2) / 2.
  Tensor<double> tilt(s);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) tilt.at(0, 0, y, x) = 2.0 + 0.1 * x;
  auto pt = t.constant(tilt);
  CHECK(surface_normal_loss(pt, tg).item() == doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-12));

  // Confidence scales the penalty linearly.
  LossTargets<double> half = tg;
  half.confidence.data.setConstant(0.5);
  CHECK(surface_normal_loss(pt, half).item() == doctest::Approx(0.25 * std::log(2.0)).epsilon(1e-12));

  // Opposed normals hit the clamp floor instead of producing a NaN.
  LossTargets<double> opp = tg;
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) {
      opp.normals.at(0, 0, y, x) = -1.0;
      opp.normals.at(0, 2, y, x) = 0.0;
    }
  const double l = surface_normal_loss(pt, opp).item();
  CHECK(l == doctest::Approx(-std::log(1e-6)));
}

TEST_CASE("surface normal loss is non-negative") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Shape s{2, 1, 8, 10};
    auto tg = random_targets(s, rng, 0.2);
    std::normal_distribution<double> nd(2.0, 0.3);
    Tensor<double> p(s);
    for (Eigen::Index i = 0; i < p.data.size(); ++i) p.data[i] = nd(rng);
    Tape<double> t;
    CHECK(surface_normal_loss(t.constant(p), tg).item() >= 0.0);
  }
}

TEST_CASE("every term ignores pixels with valid = 0") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int trial = 0; trial < 10; ++trial) {
    const Shape s{2, 1, 8, 10};
    auto tg = random_targets(s, rng, 0.25);
    Tensor<double> p = smooth_prediction(s, rng);
    auto tg2 = tg;
    Tensor<double> p2 = p;
    for (Eigen::Index i = 0; i < p.data.size(); ++i) {
      if (tg.valid.data[i] != 0.0) continue;
      p2.data[i] = u(rng);
      tg2.depth.data[i] = u(rng);
      tg2.confidence.data[i] = u(rng);
    }
    // Normals of invalid pixels are perturbed too.
    for (int n = 0; n < s.n; ++n)
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x)
          if (tg.valid.at(n, 0, y, x) == 0.0) tg2.normals.at(n, 0, y, x) = 0.3;
    Tape<double> t1, t2;
    const auto a = total_loss(t1.constant(p), tg, LossWeights{});
    const auto b = total_loss(t2.constant(p2), tg2, LossWeights{});
    const double la = a.total.item();
    const double lb = b.total.item();
    CHECK(std::memcmp(&la, &lb, sizeof(double)) == 0);
  }
}

TEST_CASE("total loss gradient matches central differences") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 10; ++trial) {
    const Shape s{2, 1, 8, 10};
    const auto tg = random_targets(s, rng, 0.15);
    ParameterList<double> params{{"pred", smooth_prediction(s, rng)}};
    // The cutoff is a detached batch constant; freeze it at the base point.
    double c0;
    {
      Tape<double> t;
      c0 = total_loss(t.parameter(params, 0), tg, LossWeights{}).cutoff;
    }
    const double err = grad_check(
        [&](Tape<double>&, std::vector<Var<double>>& v) {
          return total_loss(v[0], tg, LossWeights{}, std::optional<double>(c0)).total;
        },
        params);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("total loss combines weighted terms and skips zero weights") {
  std::mt19937_64 rng(6);
  const Shape s{1, 1, 6, 7};
  const auto tg = random_targets(s, rng, 0.0);
  const Tensor<double> p = smooth_prediction(s, rng);
  Tape<double> t;
  const auto terms = total_loss(t.constant(p), tg, LossWeights{1.0, 0.5, 1.0});
  CHECK(terms.total.item() ==
        doctest::Approx(terms.surface + 0.5 * terms.avg + terms.berhu).epsilon(1e-14));
  const auto only = total_loss(t.constant(p), tg, LossWeights{0.0, 0.0, 1.0});
  CHECK(only.surface == 0.0);
  CHECK(only.total.item() == doctest::Approx(terms.berhu));
  CHECK_THROWS_AS(total_loss(t.constant(p), tg, LossWeights{-1.0, 0.5, 1.0}), InvalidInput);
}

TEST_CASE("loss shape errors") {
  const Shape s{1, 1, 4, 4};
  Tape<double> t;
  auto pred = t.constant(Tensor<double>(s, 1.0));
  CHECK_THROWS_AS(berhu_loss(pred, Tensor<double>(Shape{1, 1, 4, 3}, 1.0), Tensor<double>(s, 1.0)), ShapeError);
  CHECK_THROWS_AS(berhu_loss(pred, Tensor<double>(s, 1.0), Tensor<double>(s, 0.0)), InvalidInput);
}
