#include "cfdepth/errors.hpp"
#include "cfdepth/model.hpp"

#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <random>

using namespace cfd;
using namespace cfd::ad;

namespace {

template <typename Scalar>
Tensor<Scalar> random_tensor(const Shape& s, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<Scalar> t(s);
  for (Eigen::Index i = 0; i < t.data.size(); ++i) t.data[i] = static_cast<Scalar>(u(rng));
  return t;
}

template <typename Scalar>
Tensor<Scalar> box_mask(const Shape& s) {
  Tensor<Scalar> m(s);
  m.data.setOnes();
  for (int n = 0; n < s.n; ++n)
    for (int y = s.h / 4; y < s.h / 2; ++y)
      for (int x = s.w / 4; x < s.w / 2; ++x) m.at(n, 0, y, x) = 0;
  return m;
}

void jitter_biases(ParameterList<double>& params, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (auto& p : params)
    if (p.name.ends_with(".b"))
      for (Eigen::Index i = 0; i < p.value.data.size(); ++i) p.value.data[i] += u(rng);
}

bool same_params(const ParameterList<float>& a, const ParameterList<float>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].name != b[i].name || !(a[i].value.shape == b[i].value.shape)) return false;
    if (!(a[i].value.data == b[i].value.data).all()) return false;
  }
  return true;
}

const std::vector<SampleRecord>& records() {
  static const std::vector<SampleRecord> recs = generate_training_set(6, 3);
  return recs;
}

}  // namespace

TEST_CASE("model config") {
  const ModelConfig c;
  CHECK(c.output_h() == 32);
  CHECK(c.output_w() == 40);
  CHECK(c.bottleneck_h() == 4);
  CHECK(c.bottleneck_w() == 5);
  ModelConfig bad = c;
  bad.input_h = 60;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.n_up_blocks = 5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.decoder_channels = {8};
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  KeyValues kv;
  ModelConfig m = c;
  m.mask_at_input = true;
  m.seed = 77;
  m.write(kv);
  ModelConfig back;
  KeyReader r(kv);
  back.read(r);
  r.finish();
  CHECK(back.mask_at_input);
  CHECK(back.seed == 77);
  CHECK(back.encoder_channels == c.encoder_channels);
}

TEST_CASE("parameter layout") {
  const auto layout = parameter_layout(ModelConfig{});
  CHECK(layout.size() == 2 * (4 + 3 * 3 + 1));
  CHECK(layout.front().first == "enc0.w");
  CHECK(layout.front().second == Shape{16, 3, 3, 3});
  CHECK(layout[8].first == "up0.conv1.w");
  CHECK(layout[8].second == Shape{48, 97, 3, 3});
  CHECK(layout[12].second == Shape{48, 97, 1, 1});
  CHECK(layout.back().first == "final.b");
  CHECK(layout.back().second == Shape{1, 1, 1, 1});

  ModelConfig at_input;
  at_input.mask_at_input = true;
  const auto alt = parameter_layout(at_input);
  CHECK(alt.front().second == Shape{16, 4, 3, 3});
  CHECK(alt[8].second == Shape{48, 96, 3, 3});
}

TEST_CASE("forward pass") {
  const ModelConfig c;
  const Model model(c);
  const Shape in{2, 3, 64, 80};
  const auto rgb = random_tensor<float>(in, 1, 0.0, 1.0);
  const auto mask = box_mask<float>(Shape{2, 1, 64, 80});
  const Tensor<float> out = model.infer(rgb, mask);
  CHECK(out.shape == Shape{2, 1, 32, 40});
  CHECK(out.data.minCoeff() > 0.0f);
  CHECK(out.data.allFinite());

  SUBCASE("deterministic in seed and inputs") {
    const Model again(c);
    CHECK(same_params(model.params(), again.params()));
    CHECK((again.infer(rgb, mask).data == out.data).all());
    CHECK_FALSE(same_params(model.params(), build_model(c, 2).params()));
  }
  SUBCASE("the mask changes the output") {
    Tensor<float> ones = mask;
    ones.data.setOnes();
    CHECK_FALSE((model.infer(rgb, ones).data == out.data).all());
  }
  SUBCASE("initial output is near the bias depth") {
    CHECK(std::abs(static_cast<double>(out.data.mean()) - 2.5) < 0.5);
  }
  SUBCASE("as many up-blocks as stages gives input resolution") {
    ModelConfig full = c;
    full.n_up_blocks = 4;
    full.decoder_channels = {48, 24, 12, 8};
    CHECK(Model(full).infer(rgb, mask).shape == Shape{2, 1, 64, 80});
  }
  SUBCASE("bad inputs") {
    CHECK_THROWS_AS(model.infer(random_tensor<float>(Shape{1, 3, 32, 40}, 1, 0, 1), mask), ShapeError);
    ParameterList<float> short_list = model.params();
    short_list.pop_back();
    CHECK_THROWS_AS(Model(c, short_list), ShapeError);
  }
}

TEST_CASE("predict maps back to the model crop") {
  const SampleRecord& rec = records()[0];
  const Model model(ModelConfig{});
  const DepthMap d = predict(model, rec.rgb, rec.mask, rec.depth_with.intrinsics);
  const CropWindow win = model_crop(model.config(), 160, 128);
  CHECK(d.width() == win.width);
  CHECK(d.height() == win.height);
  CHECK(d.intrinsics == rec.depth_with.intrinsics.cropped(win.x0, win.y0));
  CHECK((d.data > 0.0f).all());
  CHECK_THROWS_AS(predict(model, rec.rgb, ObjectMask(10, 10, 1)), InvalidInput);
}

TEST_CASE("predict at the input size is the resized network output") {
  const ModelConfig c;
  const Model model(c);
  const auto rgb_t = random_tensor<float>(Shape{1, 3, 64, 80}, 3, 0.0, 1.0);
  const auto mask_t = box_mask<float>(Shape{1, 1, 64, 80});
  RgbImage rgb(80, 64);
  ObjectMask mask(80, 64, 1);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 80; ++x) {
      for (int k = 0; k < 3; ++k) rgb.ch[k](y, x) = rgb_t.at(0, k, y, x);
      mask.data(y, x) = static_cast<std::uint8_t>(mask_t.at(0, 0, y, x));
    }
  const Tensor<float> out = model.infer(rgb_t, mask_t);
  PlaneF small(32, 40);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 40; ++x) small(y, x) = out.at(0, 0, y, x);
  const DepthMap d = predict(model, rgb, mask);
  CHECK((d.data == bilinear_resize(small, 80, 64)).all());
}

TEST_CASE("full model gradient check in double precision") {
  const ModelConfig c = ModelConfig::tiny();
  DepthNet<double> net = Model(c).cast<double>();
  // Zero biases put ReLU inputs exactly on the kink wherever the encoder is
  // dead inside the hole; move them off it.
  jitter_biases(net.params(), 4);
  const Shape in{2, 3, c.input_h, c.input_w};
  const Shape out{2, 1, c.output_h(), c.output_w()};
  const auto rgb = random_tensor<double>(in, 5, 0.0, 1.0);
  const auto mask = box_mask<double>(Shape{2, 1, c.input_h, c.input_w});

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LossTargets<double> tg{random_tensor<double>(out, 11, 1.5, 3.5), Tensor<double>(Shape{2, 3, out.h, out.w}),
                         random_tensor<double>(out, 12, 0.2, 1.0), Tensor<double>(out), {30.0, 25.0}, {30.0, 28.0}};
  for (int n = 0; n < 2; ++n)
    for (int y = 0; y < out.h; ++y)
      for (int x = 0; x < out.w; ++x) {
        Eigen::Vector3d v(0.5 * (u(rng) - 0.5), 0.5 * (u(rng) - 0.5), 1.0);
        v.normalize();
        for (int k = 0; k < 3; ++k) tg.normals.at(n, k, y, x) = v[k];
        tg.valid.at(n, 0, y, x) = u(rng) < 0.1 ? 0.0 : 1.0;
      }

  // Freeze the berHu cutoff at its value for the initial parameters so the
  // finite differences see a smooth function.
  double cutoff = 0.0;
  {
    Tape<double> tape;
    auto vars = tape.parameters(net.params());
    cutoff = total_loss(net.forward(tape, vars, rgb, mask), tg, LossWeights{}).cutoff;
  }
  const double err = grad_check(
      [&](Tape<double>& tape, std::vector<Var<double>>& v) {
        return total_loss(net.forward(tape, v, rgb, mask), tg, LossWeights{}, std::optional<double>(cutoff)).total;
      },
      net.params());
  CHECK(err < 1e-4);
}

TEST_CASE("learning rate schedule") {
  TrainConfig t;
  for (int e = 1; e <= 5; ++e) CHECK(learning_rate(t, e) == 0.01);
  for (int e = 6; e <= 10; ++e) CHECK(learning_rate(t, e) == 0.005);
  CHECK(learning_rate(t, 11) == 0.0025);
  CHECK_THROWS_AS(learning_rate(t, 0), InvalidInput);
}

TEST_CASE("train config round trip") {
  TrainConfig t;
  t.epochs = 7;
  t.lr = 0.003;
  t.weights.normal = 0.0;
  t.augment.dropout_rate = 0.0;
  t.augment.grid.beta = 4.0;
  KeyValues kv;
  t.write(kv);
  TrainConfig back;
  KeyReader r(kv);
  back.read(r);
  r.finish();
  CHECK(back.epochs == 7);
  CHECK(back.lr == 0.003);
  CHECK(back.weights.normal == 0.0);
  CHECK(back.augment.dropout_rate == 0.0);
  CHECK(back.augment.grid.beta == 4.0);
  TrainConfig bad;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = TrainConfig{};
  bad.weights.berhu = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("make_batch") {
  const ModelConfig c;
  AugmentConfig aug;
  const AugSample a = augment_sample(records()[1], true, 4, aug);
  const AugSample b = augment_sample(records()[2], false, 5, aug);
  const Batch<float> batch = make_batch<float>({&a, &b}, c);
  CHECK(batch.rgb.shape == Shape{2, 3, 64, 80});
  CHECK(batch.targets.depth.shape == Shape{2, 1, 32, 40});
  CHECK(batch.targets.normals.shape == Shape{2, 3, 32, 40});
  CHECK(batch.targets.fx[0] == a.depth_without.intrinsics.fx * 0.5);
  CHECK(batch.mask.at(0, 0, 10, 10) == static_cast<float>(a.mask.data(10, 10)));

  int flipped_targets = 0;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 40; ++x) {
      const bool any = a.flipped.block(2 * y, 2 * x, 2, 2).any();
      if (any) {
        CHECK(batch.targets.valid.at(0, 0, y, x) == 0.0f);
        ++flipped_targets;
      }
      if (!any && batch.targets.depth.at(0, 0, y, x) > 0.0f) CHECK(batch.targets.valid.at(0, 0, y, x) == 1.0f);
    }
  CHECK(flipped_targets > 0);
  CHECK((batch.region.data.segment(32 * 40, 32 * 40).array() == 1.0f).all());
  CHECK_THROWS_AS(make_batch<float>({}, c), InvalidInput);
}

TEST_CASE("loss ignores depth under dropout flips") {
  const ModelConfig c;
  const Model model(c);
  const AugSample a = augment_sample(records()[3], true, 8, AugmentConfig{});
  REQUIRE(a.flipped.cast<int>().sum() > 0);
  AugSample perturbed = a;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (int y = 0; y < a.flipped.rows(); ++y)
    for (int x = 0; x < a.flipped.cols(); ++x)
      if (a.flipped(y, x) && a.depth_without.data(y, x) > 0.0f) perturbed.depth_without.data(y, x) += u(rng);

  auto loss = [&](const AugSample& s) {
    const Batch<float> batch = make_batch<float>({&s}, c);
    Tape<float> tape;
    auto vars = tape.parameters(const_cast<Model&>(model).params());
    return total_loss(model.forward(tape, vars, batch.rgb, batch.mask), batch.targets, LossWeights{}).total.item();
  };
  const float l0 = loss(a);
  const float l1 = loss(perturbed);
  CHECK(std::memcmp(&l0, &l1, sizeof(float)) == 0);
}

TEST_CASE("training") {
  const ModelConfig c;
  const auto& recs = records();
  const std::vector<SampleRecord> train_set(recs.begin(), recs.begin() + 4);
  const std::vector<SampleRecord> val_set(recs.begin() + 4, recs.end());
  TrainConfig t;
  t.epochs = 2;
  t.batch_size = 3;

  SUBCASE("zero learning rate leaves parameters unchanged") {
    Model model(c);
    const ParameterList<float> before = model.params();
    t.lr = 0.0;
    const auto log = train(model, train_set, val_set, t);
    CHECK(same_params(before, model.params()));
    REQUIRE(log.size() == 2);
    CHECK(log[0].val_loss == log[1].val_loss);
  }
  SUBCASE("deterministic and logged") {
    Model m1(c), m2(c);
    int calls = 0;
    const auto l1 = train(m1, train_set, val_set, t, [&](const EpochLog&) { ++calls; });
    const auto l2 = train(m2, train_set, val_set, t);
    CHECK(calls == 2);
    CHECK(same_params(m1.params(), m2.params()));
    CHECK(format_log_row(l1[1]) == format_log_row(l2[1]));
    CHECK(l1[1].lr == 0.01);
    CHECK(std::isfinite(l1[1].val_rms_interior));
    CHECK(std::isfinite(l1[1].val_rms_exterior));
  }
  SUBCASE("a divergent step names the batch") {
    Model model(c);
    model.params().back().value.data[0] = std::numeric_limits<float>::quiet_NaN();
    try {
      train(model, train_set, val_set, t);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("epoch 1, batch 0") != std::string::npos);
    }
  }
}

TEST_CASE("eight fixed samples overfit") {
  const ModelConfig c;
  const std::vector<SampleRecord> set = generate_training_set(8, 3);
  Model model(c);
  TrainConfig t;
  t.epochs = 200;
  t.batch_size = 8;
  t.lr = 0.003;
  t.lr_halve_every = 1000;
  t.removal_fraction = 1.0;
  t.augment = AugmentConfig::identity();
  const auto log = train(model, set, {}, t);
  CHECK(log.back().train_loss * 10.0 <= log.front().train_loss);
}

TEST_CASE("checkpoint") {
  ModelConfig c;
  c.mask_at_input = true;
  const Model model(c);
  const KeyValues meta{{"epochs", "3"}, {"note", "x"}};
  const Bytes bytes = encode_checkpoint(model, meta);
  REQUIRE(bytes.size() > 12);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "CFDM");

  const Checkpoint back = decode_checkpoint(bytes);
  CHECK(back.meta == meta);
  CHECK(back.model.config().mask_at_input);
  CHECK(same_params(back.model.params(), model.params()));
  CHECK(encode_checkpoint(back.model, back.meta) == bytes);

  const auto path = std::filesystem::temp_directory_path() / "cfdepth_test_model.ckpt";
  save_checkpoint(model, path, meta);
  CHECK(same_params(load_checkpoint(path).model.params(), model.params()));
  std::filesystem::remove(path);

  const Bytes truncated(bytes.begin(), bytes.end() - 4);
  try {
    decode_checkpoint(truncated);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    const std::size_t blob = 4 * static_cast<std::size_t>(model.parameter_count());
    CHECK(msg.find(std::to_string(blob)) != std::string::npos);
    CHECK(msg.find(std::to_string(blob - 4)) != std::string::npos);
  }
  Bytes bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bad_magic), FormatError);
  Bytes bad_version = bytes;
  bad_version[4] = 9;
  CHECK_THROWS_AS(decode_checkpoint(bad_version), FormatError);
  CHECK_THROWS_AS(decode_checkpoint(Bytes(bytes.begin(), bytes.begin() + 20)), FormatError);
}
