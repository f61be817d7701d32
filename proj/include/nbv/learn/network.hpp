#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "nbv/random.hpp"

namespace nbv::learn {

enum class LayerKind { kConv, kDense, kRelu, kTanh };

struct LayerSpec {
  LayerKind kind = LayerKind::kDense;
  int out = 0;     // channels (conv) or units (dense)
  int kernel = 0;  // conv only
  int stride = 1;  // conv only

  bool operator==(const LayerSpec&) const = default;
};

/// Layer stack over a CHW input. An optional side input of `side_dim`
/// features is appended to the input of layer `side_at` (which must be a
/// dense layer); the critic uses it for the action.
struct ArchSpec {
  std::array<int, 3> input{1, 1, 1};  // channels, height, width
  std::vector<LayerSpec> layers;
  int side_dim = 0;
  int side_at = -1;

  bool operator==(const ArchSpec&) const = default;

  /// One-line text form, e.g. "in 6x84x84; conv 16 8 4; relu; dense 6".
  std::string describe() const;
  static ArchSpec parse(const std::string& text);

  /// Image trunk: conv 16@8x8/4, conv 32@4x4/2, dense 256.
  static ArchSpec image_trunk(std::array<int, 3> input);
  /// Fully connected trunk with the given hidden widths.
  static ArchSpec mlp_trunk(std::array<int, 3> input, const std::vector<int>& hidden);
};

/// Appends heads to a trunk.
ArchSpec q_network(ArchSpec trunk, int actions);
ArchSpec actor_network(ArchSpec trunk, int action_dim);
ArchSpec critic_network(ArchSpec trunk, int action_dim);

/// Feed-forward network with a flat parameter vector.
///
/// Batches are matrices with one sample per column; image features are
/// flattened in CHW order. `forward` caches activations for `backward`;
/// `predict` does not touch the cache.
template <typename S>
class Network {
 public:
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

  explicit Network(ArchSpec arch);

  const ArchSpec& arch() const { return arch_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  std::size_t num_params() const { return static_cast<std::size_t>(params_.size()); }

  Vec& params() { return params_; }
  const Vec& params() const { return params_; }
  const Vec& grad() const { return grad_; }

  /// Uniform(+-1/sqrt(fan_in)) weights and biases; the last parametric layer
  /// uses +-final_scale instead when final_scale > 0.
  void init(Rng& rng, double final_scale = 0.0);

  Mat forward(const Mat& x, const Mat* side = nullptr);
  Mat predict(const Mat& x, const Mat* side = nullptr) const;

  /// Back-propagates d(loss)/d(output) through the cached forward pass.
  /// Overwrites grad() and returns it; input and side-input gradients are
  /// available afterwards.
  const Vec& backward(const Mat& d_out);
  const Mat& input_grad() const { return d_input_; }
  const Mat& side_grad() const { return d_side_; }

  template <typename T>
  Network<T> cast() const;

 private:
  struct Cache {
    std::vector<Mat> acts;  // acts[i] is the input of layer i (side input appended)
    std::vector<Mat> cols;  // im2col buffers of conv layers
  };
  Mat run(const Mat& x, const Mat* side, Cache& cache) const;

  ArchSpec arch_;
  std::vector<std::array<int, 3>> shapes_;  // input shape of each layer (before side input)
  std::vector<int> sizes_;                  // flattened input size of each layer, then output size
  std::vector<std::size_t> offsets_;        // parameter offset of each layer
  Vec params_;
  Vec grad_;
  Cache cache_;
  Mat d_input_;
  Mat d_side_;
};

template <typename S>
template <typename T>
Network<T> Network<S>::cast() const {
  Network<T> out(arch_);
  out.params() = params_.template cast<T>();
  return out;
}

/// Adam optimizer over a flat parameter vector.
template <typename S>
class Adam {
 public:
  using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

  explicit Adam(std::size_t n = 0, double lr = 1e-4, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(Vec& params, const Vec& grad);

  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t t = 0;
  Vec m;
  Vec v;
};

/// target <- tau * source + (1 - tau) * target
template <typename S>
void soft_update(Network<S>& target, const Network<S>& source, double tau);

}  // namespace nbv::learn
