#pragma once

#include "cfdepth/augment.hpp"
#include "cfdepth/autodiff.hpp"
#include "cfdepth/codec.hpp"
#include "cfdepth/geometry.hpp"
#include "cfdepth/keyvalue.hpp"
#include "cfdepth/losses.hpp"
#include "cfdepth/rng.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace cfd {

/// Encoder-decoder layout. Each encoder stage is a stride-2 3x3 conv + relu;
/// each up-block doubles the resolution.
struct ModelConfig {
  int input_h = 64;
  int input_w = 80;
  std::vector<int> encoder_channels{16, 32, 64, 96};
  int n_up_blocks = 3;
  std::vector<int> decoder_channels{48, 24, 12};
  /// Ablation: feed the mask once, next to the RGB input, instead of at
  /// every up-block input.
  bool mask_at_input = false;
  std::uint64_t seed = 1;

  void validate() const;
  int stages() const { return static_cast<int>(encoder_channels.size()); }
  int bottleneck_h() const { return input_h >> stages(); }
  int bottleneck_w() const { return input_w >> stages(); }
  int output_h() const { return bottleneck_h() << n_up_blocks; }
  int output_w() const { return bottleneck_w() << n_up_blocks; }

  /// Writes / reads `prefix + field` keys.
  void write(KeyValues& kv, const std::string& prefix = "model.") const;
  void read(KeyReader& r, const std::string& prefix = "model.");

  /// 16 x 16 input, 4 channels, one stage and one up-block.
  static ModelConfig tiny();
};

/// Name and shape of every parameter in declared order.
std::vector<std::pair<std::string, ad::Shape>> parameter_layout(const ModelConfig& config);

/// Inverse softplus of 2.5 m; initial bias of the output layer.
inline constexpr double kInitialOutputBias = 2.4068381081;

namespace detail {

/// Nearest-neighbor resize of (N, 1, H, W) to (N, 1, h, w).
template <typename Scalar>
ad::Tensor<Scalar> resize_mask_tensor(const ad::Tensor<Scalar>& m, int h, int w) {
  ad::Tensor<Scalar> out(ad::Shape{m.shape.n, 1, h, w});
  for (int n = 0; n < m.shape.n; ++n)
    for (int y = 0; y < h; ++y) {
      const int sy = cfd::detail::nearest_tap(y, m.shape.h, h);
      for (int x = 0; x < w; ++x) out.at(n, 0, y, x) = m.at(n, 0, sy, cfd::detail::nearest_tap(x, m.shape.w, w));
    }
  return out;
}

}  // namespace detail

template <typename Scalar>
class DepthNet {
 public:
  /// He-scaled normal weights drawn from config.seed (a tenth of that for
  /// the output layer), zero biases except the output layer.
  explicit DepthNet(const ModelConfig& config) : config_(config) {
    config_.validate();
    Rng rng(config_.seed);
    for (const auto& [name, shape] : parameter_layout(config_)) {
      ad::Tensor<Scalar> t(shape);
      if (name.ends_with(".w")) {
        const double gain = name == "final.w" ? 0.1 : 1.0;
        const double sd = gain * std::sqrt(2.0 / (static_cast<double>(shape.c) * shape.h * shape.w));
        for (Eigen::Index i = 0; i < t.data.size(); ++i) t.data[i] = static_cast<Scalar>(rng.normal(0.0, sd));
      } else if (name == "final.b") {
        t.data.setConstant(static_cast<Scalar>(kInitialOutputBias));
      }
      params_.push_back({name, std::move(t)});
    }
  }

  /// Adopts existing parameters; names and shapes must match the layout.
  DepthNet(const ModelConfig& config, ad::ParameterList<Scalar> params) : config_(config), params_(std::move(params)) {
    config_.validate();
    const auto layout = parameter_layout(config_);
    if (layout.size() != params_.size()) throw ShapeError("parameter count does not match the model layout");
    for (std::size_t i = 0; i < layout.size(); ++i) {
      if (layout[i].first != params_[i].name || !(layout[i].second == params_[i].value.shape)) {
        throw ShapeError("parameter " + params_[i].name + " does not match layout entry " + layout[i].first);
      }
    }
  }

  const ModelConfig& config() const { return config_; }
  ad::ParameterList<Scalar>& params() { return params_; }
  const ad::ParameterList<Scalar>& params() const { return params_; }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (const auto& p : params_) n += p.value.data.size();
    return n;
  }

  /// rgb: (N, 3, H, W) in [0, 1]; mask: (N, 1, H, W) with 0 = remove.
  /// Returns positive depth (N, 1, h, w).
  ad::Var<Scalar> forward(ad::Tape<Scalar>& tape, const std::vector<ad::Var<Scalar>>& p,
                          const ad::Tensor<Scalar>& rgb, const ad::Tensor<Scalar>& mask) const {
    const ModelConfig& c = config_;
    const ad::Shape in{rgb.shape.n, 3, c.input_h, c.input_w};
    if (!(rgb.shape == in) || !(mask.shape == ad::Shape{in.n, 1, in.h, in.w})) {
      throw ShapeError("DepthNet: inputs " + rgb.shape.str() + " / " + mask.shape.str() + " do not match " + in.str());
    }
    if (p.size() != params_.size()) throw ShapeError("DepthNet: wrong number of parameter variables");
    std::size_t k = 0;
    auto next = [&]() { return p[k++]; };

    ad::Var<Scalar> x = ad::add_scalar(tape.constant(rgb), Scalar(-0.5));
    if (c.mask_at_input) x = ad::concat_channels(x, tape.constant(mask));
    for (int s = 0; s < c.stages(); ++s) {
      auto w = next();
      auto b = next();
      x = ad::relu(ad::conv2d(x, w, b, 2, 1));
    }
    for (int u = 0; u < c.n_up_blocks; ++u) {
      const ad::Shape xs = x.shape();
      ad::Var<Scalar> xin =
          c.mask_at_input ? x : ad::concat_channels(x, tape.constant(detail::resize_mask_tensor(mask, xs.h, xs.w)));
      auto w1 = next();
      auto b1 = next();
      auto w2 = next();
      auto b2 = next();
      auto wp = next();
      auto bp = next();
      ad::Var<Scalar> main = ad::conv2d(ad::relu(ad::conv2d(ad::upsample_nearest_2x(xin), w1, b1, 1, 1)), w2, b2, 1, 1);
      ad::Var<Scalar> res = ad::upsample_nearest_2x(ad::conv2d(xin, wp, bp, 1, 0));
      x = ad::relu(ad::add(main, res));
    }
    auto wf = next();
    auto bf = next();
    return ad::softplus(ad::conv2d(x, wf, bf, 1, 1));
  }

  ad::Tensor<Scalar> infer(const ad::Tensor<Scalar>& rgb, const ad::Tensor<Scalar>& mask) const {
    ad::Tape<Scalar> tape;
    std::vector<ad::Var<Scalar>> p;
    for (const auto& prm : params_) p.push_back(tape.constant(prm.value));
    ad::Var<Scalar> out = forward(tape, p, rgb, mask);
    return ad::Tensor<Scalar>(out.shape(), out.value());
  }

  template <typename Other>
  DepthNet<Other> cast() const {
    ad::ParameterList<Other> out;
    for (const auto& prm : params_) {
      out.push_back({prm.name, ad::Tensor<Other>(prm.value.shape, prm.value.data.template cast<Other>())});
    }
    return DepthNet<Other>(config_, std::move(out));
  }

 private:
  ModelConfig config_;
  ad::ParameterList<Scalar> params_;
};

using Model = DepthNet<float>;

inline Model build_model(ModelConfig config, std::uint64_t seed) {
  config.seed = seed;
  return Model(config);
}

/// Window of a width x height image the model sees: the largest centered
/// crop with the model's input aspect.
CropWindow model_crop(const ModelConfig& config, int width, int height);

/// Network inputs for one image: center crop to the model aspect, bilinear
/// RGB resize, nearest mask resize.
std::pair<ad::Tensor<float>, ad::Tensor<float>> model_inputs(const ModelConfig& config, const RgbImage& rgb,
                                                             const ObjectMask& mask);

/// Depth for the model crop of the image (see model_crop), bilinearly
/// resized from the network output. `intrinsics`, if given, are those of
/// the full image and are cropped accordingly.
DepthMap predict(const Model& model, const RgbImage& rgb, const ObjectMask& mask, const Intrinsics& intrinsics = {});

/// A batch ready for the loss: inputs at network input size, targets at
/// network output size.
template <typename Scalar>
struct Batch {
  ad::Tensor<Scalar> rgb;
  ad::Tensor<Scalar> mask;
  LossTargets<Scalar> targets;
  ad::Tensor<Scalar> region;  // pre-dropout mask at output size (0 = interior)
};

/// Builds inputs and loss targets from augmented samples at the network
/// input size. A target pixel is valid when its depth is valid and no
/// mask-dropout flip lies under its resampling footprint.
template <typename Scalar>
Batch<Scalar> make_batch(const std::vector<const AugSample*>& samples, const ModelConfig& config);

struct TrainConfig {
  int epochs = 30;
  int batch_size = 32;
  double lr = 0.01;
  int lr_halve_every = 5;
  double removal_fraction = 0.5;  // chance a draw uses the object mask
  LossWeights weights;
  AugmentConfig augment;
  std::uint64_t seed = 1;

  void validate() const;
  /// `train.`, `loss.`, `augment.` and `normals.` keys.
  void write(KeyValues& kv) const;
  void read(KeyReader& r);
};

/// Learning rate of 1-based `epoch`: halved after every lr_halve_every epochs.
double learning_rate(const TrainConfig& config, int epoch);

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_rms_interior = 0.0;
  double val_rms_exterior = 0.0;
};

std::string training_log_header();
std::string format_log_row(const EpochLog& row);

/// Adam training. Each draw augments one record as a removal sample (target
/// depth_without) or an empty-mask sample (target depth_with) with
/// probability removal_fraction. Validation uses un-augmented removal
/// samples; val rms values are at network output size. A non-finite loss
/// or gradient raises NumericError naming the epoch and batch.
std::vector<EpochLog> train(Model& model, const std::vector<SampleRecord>& train_set,
                            const std::vector<SampleRecord>& val_set, const TrainConfig& config,
                            const std::function<void(const EpochLog&)>& on_epoch = {});

/// "CFDM", u32 version, u32 header length, key = value header (model config
/// and `meta.` entries), float32 parameters in declared order. Integers and
/// floats are little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Model model;
  KeyValues meta;  // keys without the "meta." prefix
};

Bytes encode_checkpoint(const Model& model, const KeyValues& meta = {});
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const Model& model, const std::filesystem::path& path, const KeyValues& meta = {});
Checkpoint load_checkpoint(const std::filesystem::path& path);

extern template class DepthNet<float>;
extern template class DepthNet<double>;
extern template Batch<float> make_batch(const std::vector<const AugSample*>&, const ModelConfig&);
extern template Batch<double> make_batch(const std::vector<const AugSample*>&, const ModelConfig&);

}  // namespace cfd
