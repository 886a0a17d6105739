#pragma once

#include "avt/actions.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace avt::dqn {

/// Layer widths of the Q-network: a 1x1 channel-merge convolution, 3x3 convolutions each
/// followed by 2x2 max-pooling, optional extra 3x3 blocks without pooling, then fully
/// connected layers with dropout, and a linear action-value head.
struct QNetworkConfig {
  int input_size = 64;
  int input_channels = 12;
  int merge_filters = 16;
  std::vector<int> conv_filters = {32, 64, 64};
  int extra_blocks = 0;
  std::vector<int> hidden = {512, 128};
  double dropout = 0.5;
  int actions = ActionTable::kSize;

  friend bool operator==(const QNetworkConfig&, const QNetworkConfig&) = default;
};

struct TensorInfo {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

enum class LayerKind { Conv, Relu, MaxPool, Linear, Dropout };

struct LayerSpec {
  LayerKind kind;
  int in_c = 0, in_h = 0, in_w = 0;
  int out_c = 0, out_h = 0, out_w = 0;
  int kernel = 0;
  std::size_t weight = 0, bias = 0;  // offsets into the parameter vector

  std::size_t in_size() const { return static_cast<std::size_t>(in_c) * in_h * in_w; }
  std::size_t out_size() const { return static_cast<std::size_t>(out_c) * out_h * out_w; }
};

inline void validate(const QNetworkConfig& c) {
  if (c.input_size < 1 || c.input_channels < 1) throw std::invalid_argument("QNetworkConfig: bad input shape");
  if (c.merge_filters < 1 || c.actions < 1) throw std::invalid_argument("QNetworkConfig: bad widths");
  if (c.dropout < 0 || c.dropout >= 1) throw std::invalid_argument("QNetworkConfig: dropout outside [0,1)");
  int s = c.input_size;
  for (int f : c.conv_filters) {
    if (f < 1) throw std::invalid_argument("QNetworkConfig: bad conv width");
    s /= 2;
    if (s < 1) throw std::invalid_argument("QNetworkConfig: too many pooling stages for the input size");
  }
  for (int h : c.hidden) {
    if (h < 1) throw std::invalid_argument("QNetworkConfig: bad hidden width");
  }
  if (c.extra_blocks < 0) throw std::invalid_argument("QNetworkConfig: negative extra_blocks");
}

/// Intermediate activations of one sample, kept for the backward pass.
template <typename Scalar>
struct Activations {
  std::vector<std::vector<Scalar>> values;       // values[i] = input of layer i; back() = output
  std::vector<std::vector<std::uint32_t>> aux;   // pooling argmax / dropout keep-mask per layer
};

/// Convolutional Q-network with hand-written forward and backward passes. Parameters live in one
/// flat vector; `tensors()` describes the layout.
template <typename Scalar>
class QNetwork {
 public:
  QNetwork() = default;

  explicit QNetwork(QNetworkConfig config) : config_(std::move(config)) {
    validate(config_);
    build();
  }

  const QNetworkConfig& config() const { return config_; }
  const std::vector<TensorInfo>& tensors() const { return tensors_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  std::span<Scalar> params() { return params_; }
  std::span<const Scalar> params() const { return params_; }
  std::size_t param_count() const { return params_.size(); }
  std::size_t input_size() const { return layers_.front().in_size(); }

  /// He-normal weights, zero biases.
  template <typename Rng>
  void initialize(Rng& rng) {
    std::fill(params_.begin(), params_.end(), Scalar(0));
    for (const auto& l : layers_) {
      if (l.kind != LayerKind::Conv && l.kind != LayerKind::Linear) continue;
      std::size_t fan_in = l.kind == LayerKind::Conv ? static_cast<std::size_t>(l.in_c) * l.kernel * l.kernel
                                                     : l.in_size();
      std::normal_distribution<double> n(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
      std::size_t count = weight_count(l);
      for (std::size_t i = 0; i < count; ++i) params_[l.weight + i] = static_cast<Scalar>(n(rng));
    }
  }

  void copy_params_from(const QNetwork& other) {
    if (other.params_.size() != params_.size()) throw std::invalid_argument("copy_params_from: shape mismatch");
    params_ = other.params_;
  }

  /// Inference pass (dropout disabled).
  std::vector<Scalar> forward(std::span<const Scalar> input) const {
    Activations<Scalar> acts;
    run_forward<std::mt19937_64>(input, acts, nullptr);
    return std::move(acts.values.back());
  }

  /// Training pass; dropout masks are drawn from `rng` when non-null.
  template <typename Rng>
  std::vector<Scalar> forward_train(std::span<const Scalar> input, Activations<Scalar>& acts, Rng* rng) const {
    run_forward(input, acts, rng);
    return acts.values.back();
  }

  std::vector<Scalar> forward_train(std::span<const Scalar> input, Activations<Scalar>& acts) const {
    run_forward<std::mt19937_64>(input, acts, nullptr);
    return acts.values.back();
  }

  /// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output); returns d(loss)/d(input).
  std::vector<Scalar> backward(const Activations<Scalar>& acts, std::span<const Scalar> grad_out,
                               std::span<Scalar> grad) const {
    if (grad.size() != params_.size()) throw std::invalid_argument("backward: gradient buffer size mismatch");
    std::vector<Scalar> g(grad_out.begin(), grad_out.end());
    for (std::size_t li = layers_.size(); li-- > 0;) {
      const auto& l = layers_[li];
      const auto& in = acts.values[li];
      const auto& out = acts.values[li + 1];
      std::vector<Scalar> gin(l.in_size(), Scalar(0));
      switch (l.kind) {
        case LayerKind::Conv: conv_backward(l, in, g, gin, grad); break;
        case LayerKind::Relu:
          for (std::size_t i = 0; i < gin.size(); ++i) gin[i] = out[i] > Scalar(0) ? g[i] : Scalar(0);
          break;
        case LayerKind::MaxPool: {
          const auto& arg = acts.aux[li];
          for (std::size_t i = 0; i < g.size(); ++i) gin[arg[i]] += g[i];
          break;
        }
        case LayerKind::Linear: linear_backward(l, in, g, gin, grad); break;
        case LayerKind::Dropout: {
          const auto& keep = acts.aux[li];
          if (keep.empty()) {
            gin = g;
          } else {
            const Scalar scale = Scalar(1.0 / (1.0 - config_.dropout));
            for (std::size_t i = 0; i < gin.size(); ++i) gin[i] = keep[i] ? g[i] * scale : Scalar(0);
          }
          break;
        }
      }
      g = std::move(gin);
    }
    return g;
  }

 private:
  static std::size_t weight_count(const LayerSpec& l) {
    if (l.kind == LayerKind::Conv) return static_cast<std::size_t>(l.out_c) * l.in_c * l.kernel * l.kernel;
    return static_cast<std::size_t>(l.out_c) * l.in_size();
  }

  void add_param_layer(LayerSpec l, const std::string& name) {
    std::size_t wc = weight_count(l);
    l.weight = params_size_;
    l.bias = params_size_ + wc;
    if (l.kind == LayerKind::Conv) {
      tensors_.push_back({name + ".weight", {l.out_c, l.in_c, l.kernel, l.kernel}, l.weight, wc});
    } else {
      tensors_.push_back({name + ".weight", {l.out_c, static_cast<int>(l.in_size())}, l.weight, wc});
    }
    tensors_.push_back({name + ".bias", {l.out_c}, l.bias, static_cast<std::size_t>(l.out_c)});
    params_size_ += wc + static_cast<std::size_t>(l.out_c);
    layers_.push_back(l);
  }

  void add_simple(LayerKind kind, int c, int h, int w, int oc, int oh, int ow) {
    LayerSpec l{kind, c, h, w, oc, oh, ow};
    layers_.push_back(l);
  }

  void build() {
    int c = config_.input_channels, h = config_.input_size, w = config_.input_size;
    auto conv = [&](int out, int k, const std::string& name) {
      add_param_layer(LayerSpec{LayerKind::Conv, c, h, w, out, h, w, k}, name);
      c = out;
      add_simple(LayerKind::Relu, c, h, w, c, h, w);
    };
    conv(config_.merge_filters, 1, "merge");
    for (std::size_t i = 0; i < config_.conv_filters.size(); ++i) {
      conv(config_.conv_filters[i], 3, "conv" + std::to_string(i + 1));
      add_simple(LayerKind::MaxPool, c, h, w, c, h / 2, w / 2);
      h /= 2;
      w /= 2;
    }
    for (int i = 0; i < config_.extra_blocks; ++i) conv(c, 3, "extra" + std::to_string(i + 1));
    int n = c * h * w;
    for (std::size_t i = 0; i < config_.hidden.size(); ++i) {
      add_param_layer(LayerSpec{LayerKind::Linear, n, 1, 1, config_.hidden[i], 1, 1}, "fc" + std::to_string(i + 1));
      n = config_.hidden[i];
      add_simple(LayerKind::Relu, n, 1, 1, n, 1, 1);
      add_simple(LayerKind::Dropout, n, 1, 1, n, 1, 1);
    }
    add_param_layer(LayerSpec{LayerKind::Linear, n, 1, 1, config_.actions, 1, 1}, "head");
    params_.assign(params_size_, Scalar(0));
  }

  template <typename Rng>
  void run_forward(std::span<const Scalar> input, Activations<Scalar>& acts, Rng* rng) const {
    if (input.size() != input_size()) throw std::invalid_argument("QNetwork::forward: input shape mismatch");
    acts.values.resize(layers_.size() + 1);
    acts.aux.assign(layers_.size(), {});
    acts.values[0].assign(input.begin(), input.end());
    for (std::size_t li = 0; li < layers_.size(); ++li) {
      const auto& l = layers_[li];
      const auto& in = acts.values[li];
      auto& out = acts.values[li + 1];
      out.assign(l.out_size(), Scalar(0));
      switch (l.kind) {
        case LayerKind::Conv: conv_forward(l, in, out); break;
        case LayerKind::Relu:
          for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] > Scalar(0) ? in[i] : Scalar(0);
          break;
        case LayerKind::MaxPool: pool_forward(l, in, out, acts.aux[li]); break;
        case LayerKind::Linear: linear_forward(l, in, out); break;
        case LayerKind::Dropout:
          if (rng && config_.dropout > 0) {
            auto& keep = acts.aux[li];
            keep.resize(out.size());
            std::bernoulli_distribution bern(1.0 - config_.dropout);
            const Scalar scale = Scalar(1.0 / (1.0 - config_.dropout));
            for (std::size_t i = 0; i < out.size(); ++i) {
              keep[i] = bern(*rng) ? 1u : 0u;
              out[i] = keep[i] ? in[i] * scale : Scalar(0);
            }
          } else {
            out = in;
          }
          break;
      }
    }
  }

  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MapMat = Eigen::Map<Mat>;
  using CMapMat = Eigen::Map<const Mat>;

  /// Patch matrix (C*K*K, H*W) for a same-padded convolution; out-of-image taps are zero.
  static void im2col(const LayerSpec& l, const Scalar* in, Scalar* cols) {
    const int H = l.in_h, W = l.in_w, K = l.kernel, P = K / 2;
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    for (int ci = 0; ci < l.in_c; ++ci) {
      for (int ky = 0; ky < K; ++ky) {
        for (int kx = 0; kx < K; ++kx) {
          Scalar* row = cols + ((static_cast<std::size_t>(ci) * K + ky) * K + kx) * plane;
          const Scalar* src = in + plane * ci;
          const int dy = ky - P, dx = kx - P;
          for (int y = 0; y < H; ++y) {
            Scalar* r = row + static_cast<std::size_t>(y) * W;
            const int sy = y + dy;
            if (sy < 0 || sy >= H) {
              std::fill(r, r + W, Scalar(0));
              continue;
            }
            const Scalar* s = src + static_cast<std::size_t>(sy) * W;
            for (int x = 0; x < W; ++x) {
              const int sx = x + dx;
              r[x] = (sx >= 0 && sx < W) ? s[sx] : Scalar(0);
            }
          }
        }
      }
    }
  }

  static void col2im(const LayerSpec& l, const Scalar* cols, Scalar* gin) {
    const int H = l.in_h, W = l.in_w, K = l.kernel, P = K / 2;
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    for (int ci = 0; ci < l.in_c; ++ci) {
      for (int ky = 0; ky < K; ++ky) {
        for (int kx = 0; kx < K; ++kx) {
          const Scalar* row = cols + ((static_cast<std::size_t>(ci) * K + ky) * K + kx) * plane;
          Scalar* dst = gin + plane * ci;
          const int dy = ky - P, dx = kx - P;
          const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
          const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
          for (int y = y0; y < y1; ++y) {
            const Scalar* r = row + static_cast<std::size_t>(y) * W;
            Scalar* d = dst + static_cast<std::size_t>(y + dy) * W + dx;
            for (int x = x0; x < x1; ++x) d[x] += r[x];
          }
        }
      }
    }
  }

  void conv_forward(const LayerSpec& l, const std::vector<Scalar>& in, std::vector<Scalar>& out) const {
    const Eigen::Index plane = static_cast<Eigen::Index>(l.in_h) * l.in_w;
    const Eigen::Index taps = static_cast<Eigen::Index>(l.in_c) * l.kernel * l.kernel;
    CMapMat w(params_.data() + l.weight, l.out_c, taps);
    Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> bias(params_.data() + l.bias, l.out_c);
    MapMat o(out.data(), l.out_c, plane);
    if (l.kernel == 1) {
      o.noalias() = w * CMapMat(in.data(), l.in_c, plane);
    } else {
      cols_.resize(static_cast<std::size_t>(taps * plane));
      im2col(l, in.data(), cols_.data());
      o.noalias() = w * CMapMat(cols_.data(), taps, plane);
    }
    o.colwise() += bias;
  }

  void conv_backward(const LayerSpec& l, const std::vector<Scalar>& in, const std::vector<Scalar>& gout,
                     std::vector<Scalar>& gin, std::span<Scalar> grad) const {
    const Eigen::Index plane = static_cast<Eigen::Index>(l.in_h) * l.in_w;
    const Eigen::Index taps = static_cast<Eigen::Index>(l.in_c) * l.kernel * l.kernel;
    CMapMat w(params_.data() + l.weight, l.out_c, taps);
    CMapMat go(gout.data(), l.out_c, plane);
    MapMat gw(grad.data() + l.weight, l.out_c, taps);
    Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> gb(grad.data() + l.bias, l.out_c);
    gb += go.rowwise().sum();
    if (l.kernel == 1) {
      CMapMat x(in.data(), l.in_c, plane);
      gw.noalias() += go * x.transpose();
      MapMat(gin.data(), l.in_c, plane).noalias() += w.transpose() * go;
      return;
    }
    cols_.resize(static_cast<std::size_t>(taps * plane));
    im2col(l, in.data(), cols_.data());
    gw.noalias() += go * CMapMat(cols_.data(), taps, plane).transpose();
    gcols_.resize(cols_.size());
    MapMat(gcols_.data(), taps, plane).noalias() = w.transpose() * go;
    col2im(l, gcols_.data(), gin.data());
  }

  void pool_forward(const LayerSpec& l, const std::vector<Scalar>& in, std::vector<Scalar>& out,
                    std::vector<std::uint32_t>& arg) const {
    arg.assign(out.size(), 0);
    for (int c = 0; c < l.in_c; ++c) {
      for (int y = 0; y < l.out_h; ++y) {
        for (int x = 0; x < l.out_w; ++x) {
          std::size_t best = (static_cast<std::size_t>(c) * l.in_h + 2 * y) * l.in_w + 2 * x;
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              std::size_t i = (static_cast<std::size_t>(c) * l.in_h + 2 * y + dy) * l.in_w + 2 * x + dx;
              if (in[i] > in[best]) best = i;
            }
          }
          std::size_t o = (static_cast<std::size_t>(c) * l.out_h + y) * l.out_w + x;
          out[o] = in[best];
          arg[o] = static_cast<std::uint32_t>(best);
        }
      }
    }
  }

  void linear_forward(const LayerSpec& l, const std::vector<Scalar>& in, std::vector<Scalar>& out) const {
    const std::size_t n = l.in_size();
    const Scalar* wts = params_.data() + l.weight;
    const Scalar* bias = params_.data() + l.bias;
    for (int o = 0; o < l.out_c; ++o) {
      const Scalar* row = wts + n * o;
      Scalar acc = 0;
      for (std::size_t i = 0; i < n; ++i) acc += row[i] * in[i];
      out[o] = acc + bias[o];
    }
  }

  void linear_backward(const LayerSpec& l, const std::vector<Scalar>& in, const std::vector<Scalar>& gout,
                       std::vector<Scalar>& gin, std::span<Scalar> grad) const {
    const std::size_t n = l.in_size();
    const Scalar* wts = params_.data() + l.weight;
    Scalar* gw = grad.data() + l.weight;
    Scalar* gb = grad.data() + l.bias;
    for (int o = 0; o < l.out_c; ++o) {
      const Scalar g = gout[o];
      if (g == Scalar(0)) continue;
      gb[o] += g;
      const Scalar* row = wts + n * o;
      Scalar* grow = gw + n * o;
      for (std::size_t i = 0; i < n; ++i) {
        grow[i] += g * in[i];
        gin[i] += g * row[i];
      }
    }
  }

  QNetworkConfig config_;
  std::vector<LayerSpec> layers_;
  std::vector<TensorInfo> tensors_;
  std::vector<Scalar> params_;
  std::size_t params_size_ = 0;
  // scratch for im2col; makes a network instance unsafe to share across threads
  mutable std::vector<Scalar> cols_, gcols_;
};

/// Index of the largest value; ties resolve to the lowest index.
template <typename Scalar>
int argmax(std::span<const Scalar> q) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(q.size()); ++i) {
    if (q[static_cast<std::size_t>(i)] > q[static_cast<std::size_t>(best)]) best = i;
  }
  return best;
}

}  // namespace avt::dqn
