#include "cfdepth/augment.hpp"
#include "cfdepth/errors.hpp"
#include "cfdepth/geometry.hpp"

#include "doctest.h"

#include <cmath>

using namespace cfd;

namespace {

const SampleRecord& record() {
  static const SampleRecord rec =
      generate_sample({Complexity::simple, Rarity::common, 1, Behind::wall, 1.5}, 31);
  return rec;
}

AugSample flat_sample(int w, int h, float depth) {
  SampleRecord rec;
  rec.rgb = RgbImage(w, h, 0.5f);
  rec.mask = ObjectMask(w, h, 1);
  rec.mask.data.block(h / 3, w / 3, h / 3, w / 3).setZero();
  const Intrinsics k{100.0, 100.0, 0.5 * (w - 1), 0.5 * (h - 1)};
  rec.depth_with = DepthMap(w, h, k, depth);
  rec.depth_without = DepthMap(w, h, k, depth);
  return make_aug_sample(rec, true);
}

bool same_normals(const NormalField& a, const NormalField& b) {
  for (int c = 0; c < 3; ++c)
    if (!(a.ch[c] == b.ch[c]).all()) return false;
  return true;
}

bool same_sample(const AugSample& a, const AugSample& b) {
  for (int c = 0; c < 3; ++c)
    if (!(a.rgb.ch[c] == b.rgb.ch[c]).all()) return false;
  return (a.mask.data == b.mask.data).all() && (a.depth_with.data == b.depth_with.data).all() &&
         (a.depth_without.data == b.depth_without.data).all() && same_normals(a.normals, b.normals) &&
         (a.confidence.data == b.confidence.data).all() && (a.flipped == b.flipped).all() &&
         a.depth_without.intrinsics == b.depth_without.intrinsics;
}

}  // namespace

TEST_CASE("make_aug_sample") {
  const SampleRecord& rec = record();
  const AugSample removal = make_aug_sample(rec, true);
  CHECK((removal.mask.data == rec.mask.data).all());
  CHECK((removal.depth_without.data == rec.depth_without.data).all());
  const AugSample empty = make_aug_sample(rec, false);
  CHECK(empty.mask.removed_count() == 0);
  CHECK((empty.depth_without.data == rec.depth_with.data).all());
  CHECK((empty.flipped == 0).all());
  const SmoothedNormals sm = quantized_smoothed_normals(gradient_normals(rec.depth_with));
  CHECK(same_normals(empty.normals, sm.normals));
}

TEST_CASE("random_crop_rescale") {
  const AugSample s = make_aug_sample(record(), true);

  SUBCASE("alpha 1 at the centered anchor is the center crop") {
    const CropWindow c = center_crop_to_aspect(160, 128, 64, 80);
    const AugSample out = random_crop_rescale(s, 1.0, c.x0, c.y0, 64, 80);
    CHECK((out.depth_with.data == crop(s.depth_with.data, c)).all());
    CHECK((out.depth_without.data == crop(s.depth_without.data, c)).all());
    CHECK((out.mask.data == crop(s.mask.data, c)).all());
    CHECK(out.depth_without.intrinsics == s.depth_without.intrinsics.cropped(c.x0, c.y0));
  }
  SUBCASE("depths are the crop divided by alpha") {
    const double alpha = 0.8;
    const AugSample out = random_crop_rescale(s, alpha, 10, 7, 64, 80);
    REQUIRE(out.depth_with.width() == 128);
    REQUIRE(out.depth_with.height() == 102);
    for (int y = 0; y < out.depth_with.height(); ++y) {
      for (int x = 0; x < out.depth_with.width(); ++x) {
        CHECK(out.depth_with.data(y, x) == static_cast<float>(s.depth_with.data(y + 7, x + 10) / alpha));
        CHECK(out.depth_without.data(y, x) == static_cast<float>(s.depth_without.data(y + 7, x + 10) / alpha));
      }
    }
    CHECK(out.depth_with.intrinsics.fx == s.depth_with.intrinsics.fx * alpha);
    const SmoothedNormals sm = quantized_smoothed_normals(gradient_normals(out.depth_without));
    CHECK(same_normals(out.normals, sm.normals));
    CHECK((out.confidence.data == sm.confidence.data).all());
  }
  SUBCASE("constant depth 2 at alpha 2/3 becomes 3") {
    const AugSample flat = flat_sample(90, 72, 2.0f);
    const AugSample out = random_crop_rescale(flat, 2.0 / 3.0, 5, 3, 4, 5);
    CHECK((out.depth_with.data == 3.0f).all());
    const NormalField g_before = gradient_normals(flat.depth_without);
    const NormalField g_after = gradient_normals(out.depth_without);
    CHECK((g_before.at(30, 40) - Eigen::Vector3d(0, 0, 1)).norm() == 0.0);
    CHECK((g_after.at(20, 25) - Eigen::Vector3d(0, 0, 1)).norm() == 0.0);
    const Eigen::Vector3d bin = BinGrid{}.center(BinGrid{}.nearest({0, 0, 1}));
    CHECK((flat.normals.at(30, 40) - bin).norm() == 0.0);
    CHECK((out.normals.at(20, 25) - bin).norm() == 0.0);
  }
  SUBCASE("bad windows") {
    CHECK_THROWS_AS(random_crop_rescale(s, 1.0, 1, 0, 64, 80), InvalidInput);
    CHECK_THROWS_AS(random_crop_rescale(s, 0.8, 40, 0, 64, 80), InvalidInput);
    CHECK_THROWS_AS(random_crop_rescale(s, 0.8, -1, 0, 64, 80), InvalidInput);
    CHECK_THROWS_AS(random_crop_rescale(s, 0.5, 0, 0, 64, 80), InvalidInput);
  }
}

TEST_CASE("geometric_color_jitter") {
  const AugSample s = make_aug_sample(record(), true);

  SUBCASE("neutral parameters are the identity") {
    CHECK(same_sample(geometric_color_jitter(s, {}), s));
  }
  SUBCASE("flip is an involution") {
    JitterParams p;
    p.flip = true;
    const AugSample once = geometric_color_jitter(s, p);
    CHECK_FALSE((once.depth_with.data == s.depth_with.data).all());
    CHECK(once.depth_with.data(5, 0) == s.depth_with.data(5, 159));
    CHECK(same_sample(geometric_color_jitter(once, p), s));
  }
  SUBCASE("color weights clamp") {
    AugSample g = s;
    g.rgb = RgbImage(160, 128, 0.9f);
    JitterParams p;
    p.color = {1.2, 0.5, 1.0};
    const AugSample out = geometric_color_jitter(g, p);
    CHECK((out.rgb.ch[0] == 1.0f).all());
    CHECK((out.rgb.ch[1] == 0.45f).all());
    CHECK((out.rgb.ch[2] == 0.9f).all());
  }
  SUBCASE("rotation keeps depth values and mask binary") {
    const AugSample flat = flat_sample(80, 64, 2.5f);
    JitterParams p;
    p.rotation_deg = 4.0;
    const AugSample out = geometric_color_jitter(flat, p);
    CHECK((out.depth_with.data == 2.5f).all());
    CHECK(((out.mask.data == 0) || (out.mask.data == 1)).all());
    CHECK(out.mask.removed(32, 40));
    CHECK_FALSE(out.mask.removed(2, 2));
    CHECK(out.mask.removed_count() > flat.mask.removed_count());
    const AugSample ramp = [&] {
      AugSample r = flat;
      for (int x = 0; x < 80; ++x) r.depth_with.data.col(x).setConstant(1.0f + 0.01f * x);
      return r;
    }();
    const AugSample rot = geometric_color_jitter(ramp, p);
    CHECK(rot.depth_with.data.minCoeff() >= 1.0f);
    CHECK(rot.depth_with.data.maxCoeff() <= 1.0f + 0.01f * 79 + 1e-6f);
  }
}

TEST_CASE("mask_dropout") {
  const ObjectMask mask = record().mask;
  const DropoutResult none = mask_dropout(mask, 0.0, 3);
  CHECK((none.mask.data == mask.data).all());
  CHECK((none.flipped == 0).all());
  const DropoutResult all = mask_dropout(mask, 1.0, 3);
  CHECK((all.flipped == 1).all());
  CHECK((all.mask.data == 1 - mask.data).all());

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const DropoutResult r = mask_dropout(mask, 0.1, seed);
    const int flipped = static_cast<int>(r.flipped.cast<int>().sum());
    CHECK(flipped >= 1876);
    CHECK(flipped <= 2219);
    CHECK(((r.mask.data != mask.data) == (r.flipped == 1)).all());
  }
  const DropoutResult a = mask_dropout(mask, 0.1, 9);
  const DropoutResult b = mask_dropout(ObjectMask(160, 128, 1), 0.1, 9);
  CHECK((a.flipped == b.flipped).all());
  CHECK_THROWS_AS(mask_dropout(mask, 1.5, 1), InvalidInput);
}

TEST_CASE("augment_sample") {
  const AugSample s = make_aug_sample(record(), true);
  const AugmentConfig cfg;

  SUBCASE("deterministic") {
    CHECK(same_sample(augment_sample(s, 5, cfg), augment_sample(s, 5, cfg)));
    CHECK_FALSE(same_sample(augment_sample(s, 5, cfg), augment_sample(s, 6, cfg)));
  }
  SUBCASE("output size and shipped normals") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      const AugSample a = augment_sample(s, seed, cfg);
      CHECK(a.rgb.width() == 80);
      CHECK(a.rgb.height() == 64);
      CHECK(a.depth_without.width() == 80);
      CHECK(a.flipped.rows() == 64);
      const SmoothedNormals sm = quantized_smoothed_normals(gradient_normals(a.depth_without), cfg.grid);
      CHECK(same_normals(a.normals, sm.normals));
      CHECK((a.confidence.data == sm.confidence.data).all());
      for (int c = 0; c < 3; ++c) {
        CHECK(a.rgb.ch[c].minCoeff() >= 0.0f);
        CHECK(a.rgb.ch[c].maxCoeff() <= 1.0f);
      }
    }
  }
  SUBCASE("identity config only resamples") {
    const AugSample a = augment_sample(s, 11, AugmentConfig::identity());
    CHECK((a.depth_without.data == bilinear_resize(s.depth_without, 80, 64).data).all());
    CHECK((a.depth_with.data == bilinear_resize(s.depth_with, 80, 64).data).all());
    CHECK((a.mask.data == nearest_resize(s.mask, 80, 64).data).all());
    CHECK((a.rgb.ch[1] == bilinear_resize(s.rgb.ch[1], 80, 64)).all());
    CHECK((a.flipped == 0).all());
    CHECK(a.depth_without.intrinsics == s.depth_without.intrinsics.resized(160, 128, 80, 64));
  }
  SUBCASE("flipped set marks exactly the dropout changes") {
    AugmentConfig no_drop = cfg;
    no_drop.dropout_rate = 0.0;
    for (std::uint64_t seed = 20; seed < 25; ++seed) {
      const AugSample a = augment_sample(s, seed, cfg);
      const AugSample b = augment_sample(s, seed, no_drop);
      CHECK((a.depth_without.data == b.depth_without.data).all());
      CHECK(((a.mask.data != b.mask.data) == (a.flipped == 1)).all());
      CHECK((b.flipped == 0).all());
      CHECK(a.flipped.cast<int>().sum() > 0);
    }
  }
  SUBCASE("bad config") {
    AugmentConfig bad = cfg;
    bad.alpha_min = 0.5;
    CHECK_THROWS_AS(augment_sample(s, 1, bad), InvalidInput);
    bad = cfg;
    bad.flip_prob = 2.0;
    CHECK_THROWS_AS(augment_sample(s, 1, bad), InvalidInput);
    bad = cfg;
    bad.color_min = 1.3;
    CHECK_THROWS_AS(augment_sample(s, 1, bad), InvalidInput);
  }
}
