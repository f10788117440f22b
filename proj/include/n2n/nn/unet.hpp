#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "n2n/core/rng.hpp"
#include "n2n/nn/layers.hpp"

namespace n2n::nn {

enum class LayerKind { input, conv, maxpool, upsample, concat };
enum class Activation { leaky_relu, linear };

struct LayerDesc {
  std::string name;
  LayerKind kind = LayerKind::conv;
  int out_channels = 0;
  Activation activation = Activation::linear;
  int source = -1;  // concat: index of the layer whose output is appended
};

inline constexpr double kLeakySlope = 0.1;

/// Layer list of the encoder-decoder. `unet(n, m, 1.0, 5)` is the full-size network:
///
///   input, enc_conv0, enc_conv1, pool1, enc_conv2, pool2, ..., enc_conv5, pool5, enc_conv6,
///   upsample5, concat(pool4), dec_conv5a, dec_conv5b, ..., upsample1, concat(input),
///   dec_conv1a (64), dec_conv1b (32), dec_conv1c (m, linear)
///
/// Encoder convs have 48 maps, decoder convs 96. `depth` sets the number of pooling levels
/// and `width_scale` multiplies every feature count.
struct NetworkSpec {
  std::vector<LayerDesc> layers;
  int n_in = 3;
  int m_out = 3;
  double width_scale = 1.0;
  int depth = 5;

  static int scaled(int c, double s) { return std::max(1, static_cast<int>(std::lround(c * s))); }

  static NetworkSpec unet(int n_in, int m_out, double width_scale = 1.0, int depth = 5) {
    require(n_in > 0 && m_out > 0, "unet: channel counts must be positive");
    require(width_scale > 0.0, "unet: width_scale must be positive");
    require(depth >= 1, "unet: depth must be at least 1");
    NetworkSpec s;
    s.n_in = n_in;
    s.m_out = m_out;
    s.width_scale = width_scale;
    s.depth = depth;
    const int enc = scaled(48, width_scale);
    const int dec = scaled(96, width_scale);
    auto conv = [&](std::string name, int c, Activation a = Activation::leaky_relu) {
      s.layers.push_back({std::move(name), LayerKind::conv, c, a, -1});
    };
    auto add = [&](std::string name, LayerKind k) { s.layers.push_back({std::move(name), k, 0, Activation::linear, -1}); };

    s.layers.push_back({"input", LayerKind::input, n_in, Activation::linear, -1});
    std::vector<int> skip{0};  // skip[k] = index of the layer concatenated at decoder level k+1
    conv("enc_conv0", enc);
    for (int level = 1; level <= depth; ++level) {
      conv("enc_conv" + std::to_string(level), enc);
      add("pool" + std::to_string(level), LayerKind::maxpool);
      skip.push_back(static_cast<int>(s.layers.size()) - 1);
    }
    conv("enc_conv" + std::to_string(depth + 1), enc);
    for (int level = depth; level >= 1; --level) {
      const std::string l = std::to_string(level);
      add("upsample" + l, LayerKind::upsample);
      s.layers.push_back({"concat" + l, LayerKind::concat, 0, Activation::linear, skip[level - 1]});
      if (level > 1) {
        conv("dec_conv" + l + "a", dec);
        conv("dec_conv" + l + "b", dec);
      }
    }
    conv("dec_conv1a", scaled(64, width_scale));
    conv("dec_conv1b", scaled(32, width_scale));
    conv("dec_conv1c", m_out, Activation::linear);
    s.resolve_channels();
    return s;
  }

  /// Pass-through network (no parameters); output equals input. Requires n_in == m_out.
  static NetworkSpec identity(int channels) {
    NetworkSpec s;
    s.n_in = s.m_out = channels;
    s.depth = 0;
    s.layers.push_back({"input", LayerKind::input, channels, Activation::linear, -1});
    return s;
  }

  /// Fills out_channels of shape-preserving layers and checks concat sources.
  void resolve_channels() {
    std::vector<int> level(layers.size(), 0);
    for (std::size_t i = 0; i < layers.size(); ++i) {
      LayerDesc& l = layers[i];
      if (i == 0) {
        require(l.kind == LayerKind::input, "network spec must start with an input layer");
        l.out_channels = n_in;
        continue;
      }
      const LayerDesc& prev = layers[i - 1];
      level[i] = level[i - 1];
      switch (l.kind) {
        case LayerKind::input: throw ContractViolation("input layer may only appear first");
        case LayerKind::conv: break;
        case LayerKind::maxpool: l.out_channels = prev.out_channels; ++level[i]; break;
        case LayerKind::upsample: l.out_channels = prev.out_channels; --level[i]; break;
        case LayerKind::concat:
          require(l.source >= 0 && static_cast<std::size_t>(l.source) < i,
                  l.name + ": concat source must refer to an earlier layer");
          require(level[l.source] == level[i], l.name + ": concat source " + layers[l.source].name +
                                                    " has a different spatial size");
          l.out_channels = prev.out_channels + layers[l.source].out_channels;
          break;
      }
      require(l.out_channels > 0, l.name + ": non-positive channel count");
    }
    require(layers.back().out_channels == m_out, "network output channels do not match m_out");
  }

  std::size_t parameter_count() const {
    std::size_t total = 0;
    for (std::size_t i = 1; i < layers.size(); ++i)
      if (layers[i].kind == LayerKind::conv)
        total += static_cast<std::size_t>(9) * layers[i - 1].out_channels * layers[i].out_channels + layers[i].out_channels;
    return total;
  }

  /// Input height/width must be a multiple of this.
  int spatial_multiple() const { return 1 << std::max(depth, 0); }
};

template <class T>
struct NetworkState {
  std::vector<Tensor<T>> parameters;  // weight, bias per conv layer in layer order
  std::vector<Array<T>> adam_m;
  std::vector<Array<T>> adam_v;
  long step = 0;
};

/// He-normal weights (std sqrt(2/fan_in)), zero biases.
template <class T>
NetworkState<T> build_network(const NetworkSpec& spec, Rng& rng) {
  NetworkState<T> st;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 1; i < spec.layers.size(); ++i) {
    if (spec.layers[i].kind != LayerKind::conv) continue;
    const int cin = spec.layers[i - 1].out_channels;
    const int cout = spec.layers[i].out_channels;
    const double stddev = std::sqrt(2.0 / (9.0 * cin));
    Array<T> w({cout, cin, 3, 3});
    for (auto& v : w.values()) v = static_cast<T>(stddev * normal(rng));
    st.parameters.emplace_back(std::move(w), true);
    st.parameters.emplace_back(Array<T>({cout}), true);
  }
  for (const auto& p : st.parameters) {
    st.adam_m.emplace_back(p.shape());
    st.adam_v.emplace_back(p.shape());
  }
  return st;
}

/// Runs the layer list on an (N, n_in, H, W) input. Returns (N, m_out, H, W).
template <class T>
Tensor<T> forward(const NetworkSpec& spec, const NetworkState<T>& state, const Tensor<T>& input) {
  const Shape& s = input.shape();
  require(s.size() == 4 && s[1] == spec.n_in,
          "forward: input " + shape_string(s) + " does not have " + std::to_string(spec.n_in) + " channels");
  const int mult = spec.spatial_multiple();
  require(s[2] % mult == 0 && s[3] % mult == 0,
          "forward: spatial size of " + shape_string(s) + " must be a multiple of " + std::to_string(mult));
  std::vector<Tensor<T>> outs;
  outs.reserve(spec.layers.size());
  outs.push_back(input);
  std::size_t p = 0;
  for (std::size_t i = 1; i < spec.layers.size(); ++i) {
    const LayerDesc& l = spec.layers[i];
    const Tensor<T>& x = outs.back();
    switch (l.kind) {
      case LayerKind::conv: {
        Tensor<T> y = conv2d_same(x, state.parameters.at(p), state.parameters.at(p + 1));
        p += 2;
        outs.push_back(l.activation == Activation::leaky_relu ? leaky_relu(y, static_cast<T>(kLeakySlope)) : y);
        break;
      }
      case LayerKind::maxpool: outs.push_back(maxpool2(x)); break;
      case LayerKind::upsample: outs.push_back(upsample_nearest2(x)); break;
      case LayerKind::concat: outs.push_back(concat_channels(x, outs[l.source])); break;
      case LayerKind::input: throw ContractViolation("unexpected input layer");
    }
  }
  return outs.back();
}

}  // namespace n2n::nn
