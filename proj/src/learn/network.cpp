#include "nbv/learn/network.hpp"

#include <cmath>
#include <sstream>

#include "nbv/error.hpp"

namespace nbv::learn {

std::string ArchSpec::describe() const {
  std::ostringstream os;
  os << "in " << input[0] << 'x' << input[1] << 'x' << input[2];
  for (const LayerSpec& l : layers) {
    switch (l.kind) {
      case LayerKind::kConv: os << "; conv " << l.out << ' ' << l.kernel << ' ' << l.stride; break;
      case LayerKind::kDense: os << "; dense " << l.out; break;
      case LayerKind::kRelu: os << "; relu"; break;
      case LayerKind::kTanh: os << "; tanh"; break;
    }
  }
  if (side_dim > 0) os << "; side " << side_dim << ' ' << side_at;
  return os.str();
}

ArchSpec ArchSpec::parse(const std::string& text) {
  ArchSpec a;
  std::istringstream in(text);
  std::string item;
  bool first = true;
  while (std::getline(in, item, ';')) {
    std::istringstream is(item);
    std::string word;
    is >> word;
    if (first) {
      char x1 = 0, x2 = 0;
      if (word != "in" || !(is >> a.input[0] >> x1 >> a.input[1] >> x2 >> a.input[2]) || x1 != 'x' || x2 != 'x') {
        throw FormatError("architecture: expected 'in CxHxW'", 0);
      }
      first = false;
      continue;
    }
    LayerSpec l;
    if (word == "conv") {
      l.kind = LayerKind::kConv;
      if (!(is >> l.out >> l.kernel >> l.stride)) throw FormatError("architecture: bad conv layer", 0);
    } else if (word == "dense") {
      l.kind = LayerKind::kDense;
      if (!(is >> l.out)) throw FormatError("architecture: bad dense layer", 0);
    } else if (word == "relu") {
      l.kind = LayerKind::kRelu;
    } else if (word == "tanh") {
      l.kind = LayerKind::kTanh;
    } else if (word == "side") {
      if (!(is >> a.side_dim >> a.side_at)) throw FormatError("architecture: bad side input", 0);
      continue;
    } else {
      throw FormatError("architecture: unknown layer '" + word + "'", 0);
    }
    a.layers.push_back(l);
  }
  if (first) throw FormatError("architecture: empty description", 0);
  return a;
}

ArchSpec ArchSpec::image_trunk(std::array<int, 3> input) {
  ArchSpec a;
  a.input = input;
  a.layers = {{LayerKind::kConv, 16, 8, 4}, {LayerKind::kRelu},  {LayerKind::kConv, 32, 4, 2},
              {LayerKind::kRelu},           {LayerKind::kDense, 256}, {LayerKind::kRelu}};
  return a;
}

ArchSpec ArchSpec::mlp_trunk(std::array<int, 3> input, const std::vector<int>& hidden) {
  ArchSpec a;
  a.input = input;
  for (int h : hidden) {
    a.layers.push_back({LayerKind::kDense, h});
    a.layers.push_back({LayerKind::kRelu});
  }
  return a;
}

ArchSpec q_network(ArchSpec trunk, int actions) {
  trunk.layers.push_back({LayerKind::kDense, actions});
  return trunk;
}

ArchSpec actor_network(ArchSpec trunk, int action_dim) {
  trunk.layers.push_back({LayerKind::kDense, action_dim});
  trunk.layers.push_back({LayerKind::kTanh});
  return trunk;
}

ArchSpec critic_network(ArchSpec trunk, int action_dim) {
  int at = static_cast<int>(trunk.layers.size());
  for (int i = static_cast<int>(trunk.layers.size()) - 1; i >= 0; --i) {
    if (trunk.layers[i].kind == LayerKind::kDense) {
      at = i;
      break;
    }
  }
  trunk.side_dim = action_dim;
  trunk.side_at = at;
  trunk.layers.push_back({LayerKind::kDense, 1});
  return trunk;
}

template <typename S>
Network<S>::Network(ArchSpec arch) : arch_(std::move(arch)) {
  const int n_layers = static_cast<int>(arch_.layers.size());
  if (n_layers == 0) throw ConfigError("network: no layers");
  for (int d : arch_.input) {
    if (d < 1) throw ConfigError("network: input dimensions must be positive");
  }
  if (arch_.side_dim > 0) {
    if (arch_.side_at < 0 || arch_.side_at >= n_layers || arch_.layers[arch_.side_at].kind != LayerKind::kDense) {
      throw ConfigError("network: side input must feed a dense layer");
    }
  }
  std::array<int, 3> shape = arch_.input;
  std::size_t offset = 0;
  for (int i = 0; i < n_layers; ++i) {
    const LayerSpec& l = arch_.layers[i];
    const int side = (arch_.side_dim > 0 && i == arch_.side_at) ? arch_.side_dim : 0;
    shapes_.push_back(shape);
    sizes_.push_back(shape[0] * shape[1] * shape[2] + side);
    offsets_.push_back(offset);
    switch (l.kind) {
      case LayerKind::kConv: {
        if (l.out < 1 || l.kernel < 1 || l.stride < 1) throw ConfigError("network: bad conv layer");
        if (shape[1] < l.kernel || shape[2] < l.kernel) throw ConfigError("network: conv kernel larger than input");
        const int oh = (shape[1] - l.kernel) / l.stride + 1;
        const int ow = (shape[2] - l.kernel) / l.stride + 1;
        offset += static_cast<std::size_t>(l.out) * (shape[0] * l.kernel * l.kernel + 1);
        shape = {l.out, oh, ow};
        break;
      }
      case LayerKind::kDense:
        if (l.out < 1) throw ConfigError("network: bad dense layer");
        offset += static_cast<std::size_t>(l.out) * (sizes_.back() + 1);
        shape = {l.out, 1, 1};
        break;
      case LayerKind::kRelu:
      case LayerKind::kTanh:
        break;
    }
  }
  sizes_.push_back(shape[0] * shape[1] * shape[2]);
  offsets_.push_back(offset);
  params_ = Vec::Zero(static_cast<Eigen::Index>(offset));
  grad_ = Vec::Zero(static_cast<Eigen::Index>(offset));
}

template <typename S>
void Network<S>::init(Rng& rng, double final_scale) {
  int last = -1;
  for (int i = 0; i < static_cast<int>(arch_.layers.size()); ++i) {
    if (arch_.layers[i].kind == LayerKind::kConv || arch_.layers[i].kind == LayerKind::kDense) last = i;
  }
  for (int i = 0; i < static_cast<int>(arch_.layers.size()); ++i) {
    const LayerSpec& l = arch_.layers[i];
    int fan_in = 0;
    if (l.kind == LayerKind::kConv) fan_in = shapes_[i][0] * l.kernel * l.kernel;
    if (l.kind == LayerKind::kDense) fan_in = sizes_[i];
    if (fan_in == 0) continue;
    const double bound = (i == last && final_scale > 0.0) ? final_scale : 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) {
      params_[static_cast<Eigen::Index>(k)] = static_cast<S>(rng.uniform(-bound, bound));
    }
  }
}

template <typename S>
typename Network<S>::Mat Network<S>::run(const Mat& x, const Mat* side, Cache& cache) const {
  if (x.rows() != arch_.input[0] * arch_.input[1] * arch_.input[2]) {
    throw Error("network: input has " + std::to_string(x.rows()) + " features, expected " +
                std::to_string(arch_.input[0] * arch_.input[1] * arch_.input[2]));
  }
  const Eigen::Index n = x.cols();
  if (arch_.side_dim > 0) {
    if (!side || side->rows() != arch_.side_dim || side->cols() != n) throw Error("network: side input shape mismatch");
  }
  const int n_layers = static_cast<int>(arch_.layers.size());
  cache.acts.resize(n_layers + 1);
  cache.cols.resize(n_layers);

  auto place = [&](int i, Mat&& y) {
    if (arch_.side_dim > 0 && i == arch_.side_at) {
      Mat joined(y.rows() + side->rows(), n);
      joined.topRows(y.rows()) = y;
      joined.bottomRows(side->rows()) = *side;
      cache.acts[i] = std::move(joined);
    } else {
      cache.acts[i] = std::move(y);
    }
  };
  place(0, Mat(x));

  for (int i = 0; i < n_layers; ++i) {
    const LayerSpec& l = arch_.layers[i];
    const Mat& a = cache.acts[i];
    const S* p = params_.data() + offsets_[i];
    Mat y;
    switch (l.kind) {
      case LayerKind::kConv: {
        const auto [c_in, h, w] = shapes_[i];
        const int k = l.kernel, s = l.stride;
        const int oh = (h - k) / s + 1, ow = (w - k) / s + 1;
        const Eigen::Index pos = static_cast<Eigen::Index>(oh) * ow;
        const Eigen::Index kk = static_cast<Eigen::Index>(c_in) * k * k;
        Mat& cols = cache.cols[i];
        cols.resize(n * pos, kk);
        for (Eigen::Index b = 0; b < n; ++b) {
          const S* src = a.col(b).data();
          for (int c = 0; c < c_in; ++c) {
            for (int ky = 0; ky < k; ++ky) {
              for (int kx = 0; kx < k; ++kx) {
                S* dst = cols.col((c * k + ky) * k + kx).data() + b * pos;
                for (int oy = 0; oy < oh; ++oy) {
                  const S* row = src + (static_cast<std::size_t>(c) * h + oy * s + ky) * w + kx;
                  for (int ox = 0; ox < ow; ++ox) *dst++ = row[ox * s];
                }
              }
            }
          }
        }
        const Eigen::Map<const Mat> wmat(p, l.out, kk);
        const Eigen::Map<const Eigen::Matrix<S, 1, Eigen::Dynamic>> bias(p + l.out * kk, l.out);
        // One product per sample keeps each output independent of the rest
        // of the batch, bit for bit.
        Mat out(pos, l.out);
        y.resize(static_cast<Eigen::Index>(l.out) * pos, n);
        for (Eigen::Index b = 0; b < n; ++b) {
          out.noalias() = cols.middleRows(b * pos, pos) * wmat.transpose();
          out.rowwise() += bias;
          y.col(b) = Eigen::Map<const Vec>(out.data(), out.size());
        }
        break;
      }
      case LayerKind::kDense: {
        const Eigen::Map<const Mat> wmat(p, l.out, a.rows());
        const Eigen::Map<const Vec> bias(p + l.out * a.rows(), l.out);
        y = wmat * a;
        y.colwise() += bias;
        break;
      }
      case LayerKind::kRelu:
        y = a.cwiseMax(S(0));
        break;
      case LayerKind::kTanh:
        y = a.array().tanh().matrix();
        break;
    }
    place(i + 1, std::move(y));
  }
  return cache.acts[n_layers];
}

template <typename S>
typename Network<S>::Mat Network<S>::forward(const Mat& x, const Mat* side) {
  return run(x, side, cache_);
}

template <typename S>
typename Network<S>::Mat Network<S>::predict(const Mat& x, const Mat* side) const {
  Cache local;
  return run(x, side, local);
}

template <typename S>
const typename Network<S>::Vec& Network<S>::backward(const Mat& d_out) {
  const int n_layers = static_cast<int>(arch_.layers.size());
  if (static_cast<int>(cache_.acts.size()) != n_layers + 1) throw Error("network: backward before forward");
  const Eigen::Index n = cache_.acts[0].cols();
  if (d_out.rows() != sizes_.back() || d_out.cols() != n) throw Error("network: output gradient shape mismatch");
  grad_.setZero();
  d_side_.resize(0, 0);

  Mat d = d_out;
  for (int i = n_layers - 1; i >= 0; --i) {
    const LayerSpec& l = arch_.layers[i];
    const Mat& a = cache_.acts[i];
    const S* p = params_.data() + offsets_[i];
    S* g = grad_.data() + offsets_[i];
    Mat da;
    switch (l.kind) {
      case LayerKind::kConv: {
        const auto [c_in, h, w] = shapes_[i];
        const int k = l.kernel, s = l.stride;
        const int oh = (h - k) / s + 1, ow = (w - k) / s + 1;
        const Eigen::Index pos = static_cast<Eigen::Index>(oh) * ow;
        const Eigen::Index kk = static_cast<Eigen::Index>(c_in) * k * k;
        const Mat& cols = cache_.cols[i];
        Mat dy(n * pos, l.out);
        for (Eigen::Index b = 0; b < n; ++b) {
          for (int oc = 0; oc < l.out; ++oc) dy.col(oc).segment(b * pos, pos) = d.col(b).segment(oc * pos, pos);
        }
        Eigen::Map<Mat> gw(g, l.out, kk);
        Eigen::Map<Eigen::Matrix<S, 1, Eigen::Dynamic>> gb(g + l.out * kk, l.out);
        gw.noalias() = dy.transpose() * cols;
        gb = dy.colwise().sum();
        if (i == 0) break;
        const Eigen::Map<const Mat> wmat(p, l.out, kk);
        const Mat dcols = dy * wmat;
        da = Mat::Zero(a.rows(), n);
        for (Eigen::Index b = 0; b < n; ++b) {
          S* dst = da.col(b).data();
          for (int c = 0; c < c_in; ++c) {
            for (int ky = 0; ky < k; ++ky) {
              for (int kx = 0; kx < k; ++kx) {
                const S* src = dcols.col((c * k + ky) * k + kx).data() + b * pos;
                for (int oy = 0; oy < oh; ++oy) {
                  S* row = dst + (static_cast<std::size_t>(c) * h + oy * s + ky) * w + kx;
                  for (int ox = 0; ox < ow; ++ox) row[ox * s] += *src++;
                }
              }
            }
          }
        }
        break;
      }
      case LayerKind::kDense: {
        const Eigen::Map<const Mat> wmat(p, l.out, a.rows());
        Eigen::Map<Mat> gw(g, l.out, a.rows());
        Eigen::Map<Vec> gb(g + l.out * a.rows(), l.out);
        gw.noalias() = d * a.transpose();
        gb = d.rowwise().sum();
        if (i > 0 || arch_.side_at == 0) da.noalias() = wmat.transpose() * d;
        break;
      }
      case LayerKind::kRelu:
        da = (a.array() > S(0)).select(d, S(0));
        break;
      case LayerKind::kTanh: {
        const auto y = cache_.acts[i + 1].topRows(d.rows()).array();
        da = (d.array() * (S(1) - y * y)).matrix();
        break;
      }
    }
    if (arch_.side_dim > 0 && i == arch_.side_at) {
      d_side_ = da.bottomRows(arch_.side_dim);
      const Mat top = da.topRows(da.rows() - arch_.side_dim);
      da = top;
    }
    d = std::move(da);
  }
  d_input_ = std::move(d);
  return grad_;
}

template <typename S>
Adam<S>::Adam(std::size_t n, double lr_, double beta1_, double beta2_, double eps_)
    : lr(lr_), beta1(beta1_), beta2(beta2_), eps(eps_), m(Vec::Zero(static_cast<Eigen::Index>(n))),
      v(Vec::Zero(static_cast<Eigen::Index>(n))) {}

template <typename S>
void Adam<S>::step(Vec& params, const Vec& grad) {
  if (params.size() != m.size() || grad.size() != m.size()) throw Error("adam: size mismatch");
  ++t;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  const S b1 = static_cast<S>(beta1), b2 = static_cast<S>(beta2);
  m = b1 * m + (S(1) - b1) * grad;
  v = b2 * v + (S(1) - b2) * grad.cwiseProduct(grad);
  const S step = static_cast<S>(lr / c1);
  const S root_c2 = static_cast<S>(std::sqrt(c2));
  params.array() -= step * m.array() / (v.array().sqrt() / root_c2 + static_cast<S>(eps));
}

template <typename S>
void soft_update(Network<S>& target, const Network<S>& source, double tau) {
  if (target.num_params() != source.num_params()) throw Error("soft_update: parameter count mismatch");
  const S t = static_cast<S>(tau);
  target.params() = t * source.params() + (S(1) - t) * target.params();
}

template class Network<float>;
template class Network<double>;
template class Adam<float>;
template class Adam<double>;
template void soft_update(Network<float>&, const Network<float>&, double);
template void soft_update(Network<double>&, const Network<double>&, double);

}  // namespace nbv::learn
