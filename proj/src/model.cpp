#include "cfdepth/model.hpp"

#include "cfdepth/errors.hpp"

#include <bit>
#include <cstring>
#include <limits>
#include <numeric>

namespace cfd {

template class DepthNet<float>;
template class DepthNet<double>;

void ModelConfig::validate() const {
  if (encoder_channels.empty()) throw ConfigError("model: need at least one encoder stage");
  for (int c : encoder_channels)
    if (c < 1) throw ConfigError("model: channel counts must be positive");
  for (int c : decoder_channels)
    if (c < 1) throw ConfigError("model: channel counts must be positive");
  if (input_h < 1 || input_w < 1) throw ConfigError("model: input dims must be positive");
  const int f = 1 << stages();
  if (input_h % f != 0 || input_w % f != 0) {
    throw ConfigError("model: input " + std::to_string(input_h) + "x" + std::to_string(input_w) +
                      " is not divisible by 2^" + std::to_string(stages()));
  }
  if (n_up_blocks < 1 || n_up_blocks > stages()) {
    throw ConfigError("model: n_up_blocks must lie in [1, " + std::to_string(stages()) + "]");
  }
  if (static_cast<int>(decoder_channels.size()) != n_up_blocks) {
    throw ConfigError("model: decoder_channels needs one entry per up-block");
  }
}

void ModelConfig::write(KeyValues& kv, const std::string& prefix) const {
  kv[prefix + "input_h"] = std::to_string(input_h);
  kv[prefix + "input_w"] = std::to_string(input_w);
  kv[prefix + "encoder_channels"] = format_ints(encoder_channels);
  kv[prefix + "n_up_blocks"] = std::to_string(n_up_blocks);
  kv[prefix + "decoder_channels"] = format_ints(decoder_channels);
  kv[prefix + "mask_at_input"] = mask_at_input ? "true" : "false";
  kv[prefix + "seed"] = std::to_string(seed);
}

void ModelConfig::read(KeyReader& r, const std::string& prefix) {
  r.read(prefix + "input_h", input_h);
  r.read(prefix + "input_w", input_w);
  r.read(prefix + "encoder_channels", encoder_channels);
  r.read(prefix + "n_up_blocks", n_up_blocks);
  r.read(prefix + "decoder_channels", decoder_channels);
  r.read(prefix + "mask_at_input", mask_at_input);
  r.read(prefix + "seed", seed);
}

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.input_h = 16;
  c.input_w = 16;
  c.encoder_channels = {4};
  c.n_up_blocks = 1;
  c.decoder_channels = {4};
  return c;
}

std::vector<std::pair<std::string, ad::Shape>> parameter_layout(const ModelConfig& c) {
  c.validate();
  std::vector<std::pair<std::string, ad::Shape>> out;
  auto conv = [&](const std::string& name, int cout, int cin, int k) {
    out.emplace_back(name + ".w", ad::Shape{cout, cin, k, k});
    out.emplace_back(name + ".b", ad::Shape{1, cout, 1, 1});
  };
  int ch = c.mask_at_input ? 4 : 3;
  for (int s = 0; s < c.stages(); ++s) {
    conv("enc" + std::to_string(s), c.encoder_channels[s], ch, 3);
    ch = c.encoder_channels[s];
  }
  for (int u = 0; u < c.n_up_blocks; ++u) {
    const int cin = ch + (c.mask_at_input ? 0 : 1);
    const int cout = c.decoder_channels[u];
    const std::string name = "up" + std::to_string(u);
    conv(name + ".conv1", cout, cin, 3);
    conv(name + ".conv2", cout, cout, 3);
    conv(name + ".proj", cout, cin, 1);
    ch = cout;
  }
  conv("final", 1, ch, 3);
  return out;
}

CropWindow model_crop(const ModelConfig& config, int width, int height) {
  return center_crop_to_aspect(width, height, config.input_h, config.input_w);
}

std::pair<ad::Tensor<float>, ad::Tensor<float>> model_inputs(const ModelConfig& config, const RgbImage& rgb,
                                                             const ObjectMask& mask) {
  if (rgb.width() != mask.width() || rgb.height() != mask.height()) {
    throw InvalidInput("predict: rgb is " + std::to_string(rgb.width()) + "x" + std::to_string(rgb.height()) +
                       " but mask is " + std::to_string(mask.width()) + "x" + std::to_string(mask.height()));
  }
  const CropWindow win = model_crop(config, rgb.width(), rgb.height());
  const int h = config.input_h;
  const int w = config.input_w;
  const RgbImage r = bilinear_resize(crop(rgb, win), w, h);
  const ObjectMask m = nearest_resize(crop(mask, win), w, h);
  ad::Tensor<float> tr(ad::Shape{1, 3, h, w});
  ad::Tensor<float> tm(ad::Shape{1, 1, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) tr.at(0, c, y, x) = r.ch[c](y, x);
      tm.at(0, 0, y, x) = static_cast<float>(m.data(y, x));
    }
  return {std::move(tr), std::move(tm)};
}

DepthMap predict(const Model& model, const RgbImage& rgb, const ObjectMask& mask, const Intrinsics& intrinsics) {
  const ModelConfig& c = model.config();
  const auto [tr, tm] = model_inputs(c, rgb, mask);
  const ad::Tensor<float> out = model.infer(tr, tm);
  PlaneF plane = Eigen::Map<const PlaneF>(out.data.data(), c.output_h(), c.output_w());
  const CropWindow win = model_crop(c, rgb.width(), rgb.height());
  return DepthMap(bilinear_resize(plane, win.width, win.height), intrinsics.cropped(win.x0, win.y0));
}

template <typename Scalar>
Batch<Scalar> make_batch(const std::vector<const AugSample*>& samples, const ModelConfig& config) {
  if (samples.empty()) throw InvalidInput("make_batch: no samples");
  const int n = static_cast<int>(samples.size());
  const int ih = config.input_h;
  const int iw = config.input_w;
  const int oh = config.output_h();
  const int ow = config.output_w();
  Batch<Scalar> b;
  b.rgb = ad::Tensor<Scalar>(ad::Shape{n, 3, ih, iw});
  b.mask = ad::Tensor<Scalar>(ad::Shape{n, 1, ih, iw});
  b.region = ad::Tensor<Scalar>(ad::Shape{n, 1, oh, ow});
  LossTargets<Scalar>& t = b.targets;
  t.depth = ad::Tensor<Scalar>(ad::Shape{n, 1, oh, ow});
  t.normals = ad::Tensor<Scalar>(ad::Shape{n, 3, oh, ow});
  t.confidence = ad::Tensor<Scalar>(ad::Shape{n, 1, oh, ow});
  t.valid = ad::Tensor<Scalar>(ad::Shape{n, 1, oh, ow});
  for (int i = 0; i < n; ++i) {
    const AugSample& s = *samples[i];
    if (s.rgb.width() != iw || s.rgb.height() != ih || s.depth_without.width() != iw || s.mask.width() != iw ||
        s.flipped.cols() != iw || s.flipped.rows() != ih) {
      throw ShapeError("make_batch: sample is not at the network input size");
    }
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < ih; ++y)
        for (int x = 0; x < iw; ++x) b.rgb.at(i, c, y, x) = static_cast<Scalar>(s.rgb.ch[c](y, x));
    for (int y = 0; y < ih; ++y)
      for (int x = 0; x < iw; ++x) b.mask.at(i, 0, y, x) = static_cast<Scalar>(s.mask.data(y, x));

    const PlaneF depth = bilinear_resize_depth(s.depth_without.data, ow, oh);
    for (int y = 0; y < oh; ++y) {
      const auto ty = cfd::detail::bilinear_tap(y, ih, oh);
      const int ny = cfd::detail::nearest_tap(y, ih, oh);
      for (int x = 0; x < ow; ++x) {
        const auto tx = cfd::detail::bilinear_tap(x, iw, ow);
        const int nx = cfd::detail::nearest_tap(x, iw, ow);
        const bool flipped = s.flipped(ty.i0, tx.i0) || s.flipped(ty.i0, tx.i1) || s.flipped(ty.i1, tx.i0) ||
                             s.flipped(ty.i1, tx.i1);
        const bool ok = depth(y, x) > 0.0f && !flipped;
        t.depth.at(i, 0, y, x) = static_cast<Scalar>(depth(y, x));
        t.valid.at(i, 0, y, x) = ok ? Scalar(1) : Scalar(0);
        for (int c = 0; c < 3; ++c) t.normals.at(i, c, y, x) = static_cast<Scalar>(s.normals.ch[c](ny, nx));
        t.confidence.at(i, 0, y, x) = static_cast<Scalar>(s.confidence.data(ny, nx));
        b.region.at(i, 0, y, x) = static_cast<Scalar>(s.mask.data(ny, nx) ^ s.flipped(ny, nx));
      }
    }
    const Intrinsics k = s.depth_without.intrinsics.resized(iw, ih, ow, oh);
    t.fx.push_back(k.fx);
    t.fy.push_back(k.fy);
  }
  return b;
}

template Batch<float> make_batch(const std::vector<const AugSample*>&, const ModelConfig&);
template Batch<double> make_batch(const std::vector<const AugSample*>&, const ModelConfig&);

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be positive");
  if (batch_size < 1) throw ConfigError("train: batch_size must be positive");
  if (!(lr >= 0.0)) throw ConfigError("train: lr must be non-negative");
  if (lr_halve_every < 1) throw ConfigError("train: lr_halve_every must be positive");
  if (!(removal_fraction >= 0.0 && removal_fraction <= 1.0)) {
    throw ConfigError("train: removal_fraction must lie in [0, 1]");
  }
  try {
    weights.validate();
    augment.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
}

void TrainConfig::write(KeyValues& kv) const {
  kv["train.epochs"] = std::to_string(epochs);
  kv["train.batch_size"] = std::to_string(batch_size);
  kv["train.lr"] = format_double(lr);
  kv["train.lr_halve_every"] = std::to_string(lr_halve_every);
  kv["train.removal_fraction"] = format_double(removal_fraction);
  kv["train.seed"] = std::to_string(seed);
  kv["loss.normal"] = format_double(weights.normal);
  kv["loss.avg"] = format_double(weights.avg);
  kv["loss.berhu"] = format_double(weights.berhu);
  kv["augment.alpha_min"] = format_double(augment.alpha_min);
  kv["augment.alpha_max"] = format_double(augment.alpha_max);
  kv["augment.rotation_deg"] = format_double(augment.rotation_deg);
  kv["augment.flip_prob"] = format_double(augment.flip_prob);
  kv["augment.color_min"] = format_double(augment.color_min);
  kv["augment.color_max"] = format_double(augment.color_max);
  kv["augment.dropout_rate"] = format_double(augment.dropout_rate);
  kv["normals.n_latitudes"] = std::to_string(augment.grid.n_latitudes);
  kv["normals.n_azimuths"] = std::to_string(augment.grid.n_azimuths);
  kv["normals.beta"] = format_double(augment.grid.beta);
  kv["normals.azimuth_phase"] = format_double(augment.grid.azimuth_phase);
}

void TrainConfig::read(KeyReader& r) {
  r.read("train.epochs", epochs);
  r.read("train.batch_size", batch_size);
  r.read("train.lr", lr);
  r.read("train.lr_halve_every", lr_halve_every);
  r.read("train.removal_fraction", removal_fraction);
  r.read("train.seed", seed);
  r.read("loss.normal", weights.normal);
  r.read("loss.avg", weights.avg);
  r.read("loss.berhu", weights.berhu);
  r.read("augment.alpha_min", augment.alpha_min);
  r.read("augment.alpha_max", augment.alpha_max);
  r.read("augment.rotation_deg", augment.rotation_deg);
  r.read("augment.flip_prob", augment.flip_prob);
  r.read("augment.color_min", augment.color_min);
  r.read("augment.color_max", augment.color_max);
  r.read("augment.dropout_rate", augment.dropout_rate);
  r.read("normals.n_latitudes", augment.grid.n_latitudes);
  r.read("normals.n_azimuths", augment.grid.n_azimuths);
  r.read("normals.beta", augment.grid.beta);
  r.read("normals.azimuth_phase", augment.grid.azimuth_phase);
}

double learning_rate(const TrainConfig& config, int epoch) {
  if (epoch < 1) throw InvalidInput("learning_rate: epochs are 1-based");
  return config.lr * std::ldexp(1.0, -((epoch - 1) / config.lr_halve_every));
}

std::string training_log_header() { return "epoch,lr,train_loss,val_loss,val_rms_interior,val_rms_exterior"; }

std::string format_log_row(const EpochLog& r) {
  return std::to_string(r.epoch) + "," + format_double(r.lr) + "," + format_double(r.train_loss) + "," +
         format_double(r.val_loss) + "," + format_double(r.val_rms_interior) + "," +
         format_double(r.val_rms_exterior);
}

namespace {

struct ValStats {
  double loss = 0.0;
  double rms_interior = 0.0;
  double rms_exterior = 0.0;
};

ValStats validate_model(Model& model, const std::vector<AugSample>& val, const TrainConfig& config) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  if (val.empty()) return {nan, nan, nan};
  double loss = 0.0;
  double se_in = 0.0, se_out = 0.0;
  long n_in = 0, n_out = 0;
  for (std::size_t b0 = 0; b0 < val.size(); b0 += config.batch_size) {
    std::vector<const AugSample*> ptrs;
    for (std::size_t i = b0; i < std::min(val.size(), b0 + config.batch_size); ++i) ptrs.push_back(&val[i]);
    const Batch<float> batch = make_batch<float>(ptrs, model.config());
    ad::Tape<float> tape;
    std::vector<ad::Var<float>> p;
    for (const auto& prm : model.params()) p.push_back(tape.constant(prm.value));
    ad::Var<float> pred = model.forward(tape, p, batch.rgb, batch.mask);
    loss += static_cast<double>(total_loss(pred, batch.targets, config.weights).total.item()) * ptrs.size();
    const auto& pv = pred.value();
    for (Eigen::Index i = 0; i < pv.size(); ++i) {
      if (batch.targets.valid.data[i] == 0.0f) continue;
      const double e = static_cast<double>(pv[i]) - batch.targets.depth.data[i];
      if (batch.region.data[i] == 0.0f) {
        se_in += e * e;
        ++n_in;
      } else {
        se_out += e * e;
        ++n_out;
      }
    }
  }
  return {loss / static_cast<double>(val.size()), n_in ? std::sqrt(se_in / n_in) : nan,
          n_out ? std::sqrt(se_out / n_out) : nan};
}

}  // namespace

std::vector<EpochLog> train(Model& model, const std::vector<SampleRecord>& train_set,
                            const std::vector<SampleRecord>& val_set, const TrainConfig& config,
                            const std::function<void(const EpochLog&)>& on_epoch) {
  config.validate();
  if (train_set.empty()) throw InvalidInput("train: empty training set");
  const ModelConfig& mc = model.config();
  AugmentConfig aug = config.augment;
  aug.out_width = mc.input_w;
  aug.out_height = mc.input_h;

  std::vector<AugSample> val;
  val.reserve(val_set.size());
  for (const auto& rec : val_set) val.push_back(center_sample(rec, true, mc.input_w, mc.input_h, aug.grid));

  ad::AdamState<float> adam;
  std::vector<EpochLog> log;
  const int n = static_cast<int>(train_set.size());
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = learning_rate(config, epoch);
    adam.lr = lr;
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(0, i)]);

    double loss_sum = 0.0;
    int batch_index = 0;
    for (int b0 = 0; b0 < n; b0 += config.batch_size, ++batch_index) {
      std::vector<AugSample> augs;
      for (int i = b0; i < std::min(n, b0 + config.batch_size); ++i) {
        const SampleRecord& rec = train_set[order[i]];
        const bool removal = rng.bernoulli(config.removal_fraction);
        const std::uint64_t seed = derive_seed(derive_seed(config.seed, 0x10000u + epoch), static_cast<std::uint64_t>(order[i]));
        augs.push_back(augment_sample(rec, removal, seed, aug));
      }
      std::vector<const AugSample*> ptrs;
      for (const auto& a : augs) ptrs.push_back(&a);
      const Batch<float> batch = make_batch<float>(ptrs, mc);

      ad::Tape<float> tape;
      auto vars = tape.parameters(model.params());
      ad::Var<float> pred = model.forward(tape, vars, batch.rgb, batch.mask);
      LossTerms<float> terms = total_loss(pred, batch.targets, config.weights);
      const double loss = terms.total.item();
      const std::string where = "epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_index);
      if (!std::isfinite(loss)) throw NumericError("non-finite loss at " + where);
      const ad::Gradients<float> grads = tape.backward(terms.total);
      try {
        ad::adam_step(model.params(), grads, adam);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " at " + where);
      }
      loss_sum += loss * static_cast<double>(augs.size());
    }
    const ValStats v = validate_model(model, val, config);
    EpochLog row{epoch, lr, loss_sum / n, v.loss, v.rms_interior, v.rms_exterior};
    log.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  return log;
}

namespace {

void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
  return v;
}

}  // namespace

Bytes encode_checkpoint(const Model& model, const KeyValues& meta) {
  KeyValues kv;
  model.config().write(kv);
  for (const auto& [k, v] : meta) kv["meta." + k] = v;
  const std::string header = format_key_values(kv);
  Bytes out{'C', 'F', 'D', 'M'};
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(header.size()));
  out.insert(out.end(), header.begin(), header.end());
  out.reserve(out.size() + 4 * static_cast<std::size_t>(model.parameter_count()));
  for (const auto& p : model.params())
    for (Eigen::Index i = 0; i < p.value.data.size(); ++i) put_u32(out, std::bit_cast<std::uint32_t>(p.value.data[i]));
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12) throw FormatError("checkpoint: file too short (" + std::to_string(bytes.size()) + " bytes)");
  if (std::memcmp(bytes.data(), "CFDM", 4) != 0) throw FormatError("checkpoint: bad magic");
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: version " + std::to_string(version) + ", expected " +
                      std::to_string(kCheckpointVersion));
  }
  const std::size_t header_len = get_u32(bytes, 8);
  if (header_len > bytes.size() - 12) {
    throw FormatError("checkpoint: header length " + std::to_string(header_len) + " exceeds file size");
  }
  const std::string header(reinterpret_cast<const char*>(bytes.data()) + 12, header_len);
  ModelConfig config;
  KeyValues meta;
  try {
    KeyReader r(parse_key_values(header));
    config.read(r, "model.");
    for (const auto& [k, v] : r.take_prefix("meta.")) meta[k.substr(5)] = v;
    r.finish();
    config.validate();
  } catch (const Error& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  const auto layout = parameter_layout(config);
  std::size_t count = 0;
  for (const auto& [name, shape] : layout) count += static_cast<std::size_t>(shape.size());
  const std::size_t expected = 4 * count;
  const std::size_t actual = bytes.size() - 12 - header_len;
  if (expected != actual) {
    throw FormatError("checkpoint: parameter blob is " + std::to_string(actual) + " bytes, expected " +
                      std::to_string(expected));
  }
  ad::ParameterList<float> params;
  std::size_t at = 12 + header_len;
  for (const auto& [name, shape] : layout) {
    ad::Tensor<float> t(shape);
    for (Eigen::Index i = 0; i < t.data.size(); ++i, at += 4) t.data[i] = std::bit_cast<float>(get_u32(bytes, at));
    params.push_back({name, std::move(t)});
  }
  return {Model(config, std::move(params)), std::move(meta)};
}

void save_checkpoint(const Model& model, const std::filesystem::path& path, const KeyValues& meta) {
  write_file(path, encode_checkpoint(model, meta));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace cfd
