#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "paanet/ops.hpp"
#include "paanet/rng.hpp"
#include "paanet/tensor.hpp"

namespace paanet {

struct ModelConfig {
  int in_channels = 3;
  std::array<int, 4> encoder_channels{16, 32, 64, 128};
  int dense_layers = 4;     // layers per PAAD block
  int growth = 16;          // channels added by each dense conv
  int num_paad_blocks = 2;  // 0 builds the encoder-decoder ablation
  int input_h = 64;
  int input_w = 64;

  void validate() const {
    using detail::require;
    require(in_channels >= 1, "config: in_channels must be >= 1");
    for (const int c : encoder_channels)
      require(c >= 1, "config: encoder channels must be >= 1");
    require(dense_layers >= 1, "config: dense_layers must be >= 1");
    require(growth >= 1, "config: growth must be >= 1");
    require(num_paad_blocks >= 0, "config: num_paad_blocks must be >= 0");
    require(input_h >= 16 && input_h % 16 == 0 && input_w >= 16 && input_w % 16 == 0,
            "config: input size " + std::to_string(input_h) + "x" + std::to_string(input_w) +
                " must be divisible by 16 (four halvings)");
  }

  bool operator==(const ModelConfig&) const = default;
};

template <typename T>
using ParamMap = std::map<std::string, TensorT<T>>;

enum class Polarity { kForward, kReverse };

template <typename T>
struct PaadOutputT {
  std::vector<TensorT<T>> features;  // one stream per scale, channels preserved
  std::vector<TensorT<T>> gams;      // dense_layers maps, each N x 1 x H x W
};

template <typename T>
struct ModelOutputsT {
  TensorT<T> prediction;                  // finest decoder head at ground-truth size
  std::vector<TensorT<T>> side_outputs;   // decoder heads v=1..4, ground-truth size
  std::vector<TensorT<T>> gams;           // all blocks' maps in block order
};

using PaadOutput = PaadOutputT<float>;
using ModelOutputs = ModelOutputsT<float>;

// Enumerates every learnable tensor the configuration implies. Construction,
// the shape audit, checkpoint validation and the optimizer all share this map.
inline std::map<std::string, std::vector<int>> expected_param_shapes(const ModelConfig& cfg) {
  cfg.validate();
  std::map<std::string, std::vector<int>> shapes;
  auto conv_entry = [&](const std::string& stem, int cout, int cin, int k) {
    shapes[stem + ".weight"] = {cout, cin, k, k};
    shapes[stem + ".bias"] = {cout};
  };

  int prev = cfg.in_channels;
  for (int v = 1; v <= 4; ++v) {
    const int ch = cfg.encoder_channels[static_cast<std::size_t>(v - 1)];
    const std::string lvl = "encoder.level" + std::to_string(v);
    conv_entry(lvl + ".stem", ch, prev, 3);
    conv_entry(lvl + ".res_a", ch, ch, 3);
    conv_entry(lvl + ".res_b", ch, ch, 3);
    prev = ch;
  }

  for (int b = 1; b <= cfg.num_paad_blocks; ++b) {
    const std::string blk = "block" + std::to_string(b);
    for (int c = 1; c <= cfg.dense_layers; ++c) {
      const std::string layer = blk + ".layer" + std::to_string(c);
      for (int v = 1; v <= 4; ++v) {
        const int in_ch =
            cfg.encoder_channels[static_cast<std::size_t>(v - 1)] + (c - 1) * cfg.growth;
        conv_entry(layer + ".scale" + std::to_string(v) + ".conv", cfg.growth, in_ch, 3);
      }
      conv_entry(layer + ".mini", 1, 4 * cfg.growth, 3);
    }
    for (int v = 1; v <= 4; ++v) {
      const int ch = cfg.encoder_channels[static_cast<std::size_t>(v - 1)];
      conv_entry(blk + ".fuse.scale" + std::to_string(v), ch, ch + cfg.dense_layers * cfg.growth,
                 1);
    }
  }

  for (int v = 1; v <= 3; ++v) {
    const int ch = cfg.encoder_channels[static_cast<std::size_t>(v - 1)];
    const int ch_up = cfg.encoder_channels[static_cast<std::size_t>(v)];
    const std::string lvl = "decoder.level" + std::to_string(v);
    shapes[lvl + ".up.weight"] = {ch_up, ch, 4, 4};
    shapes[lvl + ".up.bias"] = {ch};
    conv_entry(lvl + ".fuse", ch, 2 * ch, 3);
  }
  for (int v = 1; v <= 4; ++v)
    conv_entry("head.level" + std::to_string(v), 1,
               cfg.encoder_channels[static_cast<std::size_t>(v - 1)], 1);
  return shapes;
}

// Fan-in-scaled uniform weights (bound sqrt(1/fan_in)), zero biases, drawn in
// sorted path order from one seeded stream.
template <typename T>
ParamMap<T> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  ParamMap<T> params;
  Rng rng(seed);
  for (const auto& [path, shape] : expected_param_shapes(cfg)) {
    TensorT<T> t(shape);
    if (shape.size() == 4) {
      // Transposed kernels contribute k^2/stride^2 taps per output element.
      const bool transposed = path.find(".up.") != std::string::npos;
      const double fan_in = transposed
                                ? static_cast<double>(shape[0]) * (shape[2] / 2) * (shape[3] / 2)
                                : static_cast<double>(shape[1]) * shape[2] * shape[3];
      const double bound = std::sqrt(1.0 / fan_in);
      for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-bound, bound));
    }
    t.set_requires_grad(true);
    params.emplace(path, std::move(t));
  }
  return params;
}

// Checks that a parameter set matches the configuration exactly: no missing
// entries, no extras, no shape drift, no aliased storage.
template <typename T>
void audit_params(const ModelConfig& cfg, const ParamMap<T>& params) {
  const auto expect = expected_param_shapes(cfg);
  for (const auto& [path, shape] : expect) {
    const auto it = params.find(path);
    if (it == params.end()) throw std::runtime_error("param audit: missing tensor '" + path + "'");
    if (it->second.shape() != shape)
      throw std::runtime_error("param audit: '" + path + "' has shape " +
                               detail::shape_str(it->second.shape()) + ", expected " +
                               detail::shape_str(shape));
  }
  for (const auto& [path, tensor] : params)
    if (!expect.count(path)) throw std::runtime_error("param audit: unexpected tensor '" + path + "'");
  std::map<const void*, std::string> storage;
  for (const auto& [path, tensor] : params) {
    const auto [it, fresh] = storage.emplace(tensor.data(), path);
    if (!fresh)
      throw std::runtime_error("param audit: '" + path + "' aliases storage of '" + it->second + "'");
  }
}

// The PAANet graph: residual encoder, progressive alternating attention dense
// blocks, skip-connected decoder with per-level sigmoid heads.
template <typename T = float>
class PaanetT {
 public:
  PaanetT(ModelConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    params_ = init_params<T>(cfg_, seed);
    audit_params(cfg_, params_);
  }

  PaanetT(ModelConfig cfg, ParamMap<T> params) : cfg_(cfg), params_(std::move(params)) {
    cfg_.validate();
    audit_params(cfg_, params_);
  }

  const ModelConfig& config() const { return cfg_; }
  ParamMap<T>& params() { return params_; }
  const ParamMap<T>& params() const { return params_; }

  void zero_grads() {
    for (auto& [path, t] : params_) t.zero_grad();
  }

  // Four feature streams E_v at 1/2^v of the input resolution.
  std::vector<TensorT<T>> encode(const TensorT<T>& image) const {
    check_image(image);
    std::vector<TensorT<T>> levels;
    TensorT<T> x = image;
    for (int v = 1; v <= 4; ++v) {
      const std::string lvl = "encoder.level" + std::to_string(v);
      TensorT<T> stem = relu(conv2d(x, p(lvl + ".stem.weight"), p(lvl + ".stem.bias"), 2, 1));
      TensorT<T> branch =
          conv2d(relu(conv2d(stem, p(lvl + ".res_a.weight"), p(lvl + ".res_a.bias"), 1, 1)),
                 p(lvl + ".res_b.weight"), p(lvl + ".res_b.bias"), 1, 1);
      x = add(stem, branch);
      levels.push_back(x);
    }
    return levels;
  }

  // One dense conv: concatenates the priors newest-first and projects them to
  // `growth` channels. priors holds [P^0 .. P^(c-1)] oldest-first.
  TensorT<T> dense_layer(const std::vector<TensorT<T>>& priors, int block, int layer,
                         int scale) const {
    detail::require(static_cast<int>(priors.size()) == layer,
                    "dense_layer: layer " + std::to_string(layer) + " expects " +
                        std::to_string(layer) + " priors, got " + std::to_string(priors.size()));
    std::vector<TensorT<T>> newest_first(priors.rbegin(), priors.rend());
    TensorT<T> cat = newest_first.size() == 1 ? newest_first[0] : concat_channels(newest_first);
    const std::string stem = "block" + std::to_string(block) + ".layer" + std::to_string(layer) +
                             ".scale" + std::to_string(scale) + ".conv";
    return relu(conv2d(cat, p(stem + ".weight"), p(stem + ".bias"), 1, 1));
  }

  // Fuses the four scale streams of one dense round into a guiding attention
  // map at ground-truth resolution, squashed into (0,1).
  TensorT<T> mini_decode(const std::array<TensorT<T>, 4>& f, int block, int layer) const {
    std::vector<TensorT<T>> up;
    up.reserve(4);
    for (const auto& t : f) up.push_back(resize_bilinear(t, cfg_.input_h, cfg_.input_w));
    TensorT<T> cat = concat_channels(up);
    const std::string stem = "block" + std::to_string(block) + ".layer" + std::to_string(layer) + ".mini";
    return sigmoid(conv2d(cat, p(stem + ".weight"), p(stem + ".bias"), 1, 1));
  }

  // Downscales the map to the feature grid and gates: forward polarity
  // multiplies by G, reverse polarity by (1 - G).
  static TensorT<T> apply_attention(const TensorT<T>& features, const TensorT<T>& gam,
                                    Polarity polarity) {
    TensorT<T> gate = resize_bilinear(gam, features.dim(2), features.dim(3));
    if (polarity == Polarity::kReverse) gate = one_minus(gate);
    return mul_broadcast(features, gate);
  }

  // Runs dense_layers rounds of {dense conv, mini-decoder, gating} per scale,
  // then folds everything back to the input channel count with a 1x1 fusion
  // and a residual skip from the block input.
  PaadOutputT<T> paad_block(const std::vector<TensorT<T>>& inputs, Polarity polarity,
                            int block) const {
    detail::require(inputs.size() == 4, "paad_block: expects 4 scale streams");
    std::array<std::vector<TensorT<T>>, 4> history;
    for (int v = 0; v < 4; ++v) history[static_cast<std::size_t>(v)] = {inputs[static_cast<std::size_t>(v)]};

    PaadOutputT<T> out;
    for (int c = 1; c <= cfg_.dense_layers; ++c) {
      std::array<TensorT<T>, 4> f;
      for (int v = 0; v < 4; ++v)
        f[static_cast<std::size_t>(v)] =
            dense_layer(history[static_cast<std::size_t>(v)], block, c, v + 1);
      TensorT<T> gam = mini_decode(f, block, c);
      for (int v = 0; v < 4; ++v)
        history[static_cast<std::size_t>(v)].push_back(
            apply_attention(f[static_cast<std::size_t>(v)], gam, polarity));
      out.gams.push_back(std::move(gam));
    }

    for (int v = 0; v < 4; ++v) {
      const std::string stem =
          "block" + std::to_string(block) + ".fuse.scale" + std::to_string(v + 1);
      TensorT<T> cat = concat_channels(history[static_cast<std::size_t>(v)]);
      TensorT<T> fused = conv2d(cat, p(stem + ".weight"), p(stem + ".bias"), 1, 0);
      out.features.push_back(add(fused, inputs[static_cast<std::size_t>(v)]));
    }
    return out;
  }

  // Full network. Blocks alternate polarity starting forward; the decoder
  // walks v=4..1 fusing Upscale(D_{v+1}) with the skip stream P_v.
  ModelOutputsT<T> forward(const TensorT<T>& image) const {
    check_image(image);
    ModelOutputsT<T> out;
    std::vector<TensorT<T>> streams = encode(image);
    for (int b = 1; b <= cfg_.num_paad_blocks; ++b) {
      const Polarity pol = (b % 2 == 1) ? Polarity::kForward : Polarity::kReverse;
      PaadOutputT<T> po = paad_block(streams, pol, b);
      streams = std::move(po.features);
      for (auto& g : po.gams) out.gams.push_back(std::move(g));
    }

    std::array<TensorT<T>, 4> dec;
    dec[3] = streams[3];
    for (int v = 3; v >= 1; --v) {
      const std::string lvl = "decoder.level" + std::to_string(v);
      TensorT<T> up = transposed_conv2d(dec[static_cast<std::size_t>(v)], p(lvl + ".up.weight"),
                                        p(lvl + ".up.bias"));
      TensorT<T> cat = concat_channels<T>({up, streams[static_cast<std::size_t>(v - 1)]});
      dec[static_cast<std::size_t>(v - 1)] =
          conv2d(cat, p(lvl + ".fuse.weight"), p(lvl + ".fuse.bias"), 1, 1);
    }

    for (int v = 1; v <= 4; ++v) {
      const std::string stem = "head.level" + std::to_string(v);
      TensorT<T> h = sigmoid(conv2d(dec[static_cast<std::size_t>(v - 1)], p(stem + ".weight"),
                                    p(stem + ".bias"), 1, 0));
      out.side_outputs.push_back(resize_bilinear(h, cfg_.input_h, cfg_.input_w));
    }
    out.prediction = out.side_outputs[0];
    return out;
  }

 private:
  void check_image(const TensorT<T>& image) const {
    detail::require(image.defined() && image.rank() == 4 && image.dim(1) == cfg_.in_channels &&
                        image.dim(2) == cfg_.input_h && image.dim(3) == cfg_.input_w,
                    "model: input must be [N," + std::to_string(cfg_.in_channels) + "," +
                        std::to_string(cfg_.input_h) + "," + std::to_string(cfg_.input_w) +
                        "], got " + detail::shape_str(image.shape()));
  }

  const TensorT<T>& p(const std::string& path) const {
    const auto it = params_.find(path);
    if (it == params_.end()) throw std::runtime_error("model: no parameter '" + path + "'");
    return it->second;
  }

  ModelConfig cfg_;
  ParamMap<T> params_;
};

using Paanet = PaanetT<float>;

}  // namespace paanet
