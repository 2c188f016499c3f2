#include "slmc/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace slmc {

namespace {

constexpr char kMagic[8] = {'S', 'L', 'M', 'C', 'N', 'N', 'W', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

inline double activate(Activation a, double x) {
  return a == Activation::gelu ? gelu(x) : x;
}

inline double activate_grad(Activation a, double x) {
  return a == Activation::gelu ? gelu_grad(x) : 1.0;
}

Matrix apply_activation(Activation a, const Matrix& pre) {
  if (a == Activation::identity) return pre;
  return pre.unaryExpr([](double v) { return gelu(v); });
}

Matrix apply_activation_grad(Activation a, const Matrix& pre) {
  if (a == Activation::identity) return Matrix::Ones(pre.rows(), pre.cols());
  return pre.unaryExpr([](double v) { return gelu_grad(v); });
}

}  // namespace

double gelu(double x) {
  return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
}

double gelu_grad(double x) {
  const double phi_cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  const double phi_pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
  return phi_cdf + x * phi_pdf;
}

Index Network::parameter_count() const {
  Index n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.biases.size();
  return n;
}

void Network::validate() const {
  if (layers.empty()) throw std::invalid_argument("network has no layers");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    if (l.biases.size() != l.out_dim())
      throw std::invalid_argument("layer " + std::to_string(k) + ": bias size mismatch");
    if (k > 0 && layers[k - 1].out_dim() != l.in_dim())
      throw std::invalid_argument("layer " + std::to_string(k) + ": dimension chain broken");
    if (!l.weights.allFinite() || !l.biases.allFinite())
      throw std::invalid_argument("layer " + std::to_string(k) + ": non-finite parameters");
  }
}

Network make_mlp(const std::vector<Index>& dims, Activation hidden,
                 Activation head, RngStream& rng) {
  if (dims.size() < 2) throw std::invalid_argument("make_mlp: need at least two dims");
  Network net;
  net.layers.reserve(dims.size() - 1);
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    DenseLayer layer;
    const Index in = dims[k];
    const Index out = dims[k + 1];
    const double bound = std::sqrt(3.0 / static_cast<double>(in));
    layer.weights = Matrix(out, in);
    for (Index j = 0; j < in; ++j)
      for (Index i = 0; i < out; ++i)
        layer.weights(i, j) = rng.uniform_range(-bound, bound);
    layer.biases = Vector::Zero(out);
    layer.activation = (k + 2 == dims.size()) ? head : hidden;
    net.layers.push_back(std::move(layer));
  }
  return net;
}

Matrix forward(const Network& net, const Matrix& x, ForwardCache* cache) {
  if (x.rows() != net.input_dim())
    throw std::invalid_argument("forward: input has " + std::to_string(x.rows()) +
                                " rows, network expects " + std::to_string(net.input_dim()));
  if (!x.allFinite()) throw std::invalid_argument("forward: non-finite input");
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
    cache->inputs.reserve(net.layers.size());
    cache->pre.reserve(net.layers.size());
  }
  Matrix h = x;
  for (const auto& layer : net.layers) {
    if (cache) cache->inputs.push_back(h);
    Matrix pre = (layer.weights * h).colwise() + layer.biases;
    if (cache) cache->pre.push_back(pre);
    h = apply_activation(layer.activation, pre);
  }
  if (cache) cache->valid = true;
  return h;
}

Vector forward(const Network& net, const Vector& x) {
  return forward(net, Matrix(x), nullptr).col(0);
}

NetGradients NetGradients::zeros_like(const Network& net) {
  NetGradients g;
  g.weights.reserve(net.layers.size());
  g.biases.reserve(net.layers.size());
  for (const auto& l : net.layers) {
    g.weights.emplace_back(Matrix::Zero(l.out_dim(), l.in_dim()));
    g.biases.emplace_back(Vector::Zero(l.out_dim()));
  }
  return g;
}

void NetGradients::add_scaled(const NetGradients& other, double scale) {
  for (std::size_t k = 0; k < weights.size(); ++k) {
    weights[k] += scale * other.weights[k];
    biases[k] += scale * other.biases[k];
  }
}

void NetGradients::scale(double s) {
  for (std::size_t k = 0; k < weights.size(); ++k) {
    weights[k] *= s;
    biases[k] *= s;
  }
}

NetGradients backward(const Network& net, const ForwardCache& cache,
                      const Matrix& upstream, Matrix* input_grad) {
  if (!cache.valid || cache.pre.size() != net.layers.size())
    throw std::logic_error("backward: no cached forward pass for this network");
  if (upstream.rows() != net.output_dim() || upstream.cols() != cache.pre.back().cols())
    throw std::invalid_argument("backward: upstream gradient shape mismatch");

  NetGradients grads;
  grads.weights.resize(net.layers.size());
  grads.biases.resize(net.layers.size());

  Matrix delta = upstream;
  for (int k = static_cast<int>(net.layers.size()) - 1; k >= 0; --k) {
    const auto& layer = net.layers[k];
    Matrix dpre =
        delta.cwiseProduct(apply_activation_grad(layer.activation, cache.pre[k]));
    grads.weights[k].noalias() = dpre * cache.inputs[k].transpose();
    grads.biases[k] = dpre.rowwise().sum();
    if (k > 0 || input_grad) {
      Matrix dx = layer.weights.transpose() * dpre;
      if (k == 0) {
        if (input_grad) *input_grad = std::move(dx);
      } else {
        delta = std::move(dx);
      }
    }
  }
  return grads;
}

AdamState AdamState::for_network(const Network& net, double learning_rate) {
  AdamState s;
  s.learning_rate = learning_rate;
  for (const auto& l : net.layers) {
    s.m_w.emplace_back(Matrix::Zero(l.out_dim(), l.in_dim()));
    s.v_w.emplace_back(Matrix::Zero(l.out_dim(), l.in_dim()));
    s.m_b.emplace_back(Vector::Zero(l.out_dim()));
    s.v_b.emplace_back(Vector::Zero(l.out_dim()));
  }
  return s;
}

namespace {

template <typename Mat>
void check_finite(const Mat& g, long base_index, const char* what) {
  if (g.allFinite()) return;
  for (Index j = 0; j < g.cols(); ++j)
    for (Index i = 0; i < g.rows(); ++i)
      if (!std::isfinite(g(i, j)))
        throw TrainingError(std::string("non-finite ") + what + " gradient at flat index " +
                            std::to_string(base_index + j * g.rows() + i));
}

template <typename Mat>
void adam_update(Mat& p, const Mat& g, Mat& m, Mat& v, const AdamState& s,
                 double corr1, double corr2) {
  m = s.beta1 * m + (1.0 - s.beta1) * g;
  v = s.beta2 * v + (1.0 - s.beta2) * g.cwiseProduct(g);
  p.array() -= (s.learning_rate / corr1) * m.array() /
               ((v.array() / corr2).sqrt() + s.eps_adam);
}

}  // namespace

void adam_step(Network& net, const NetGradients& grads, AdamState& opt) {
  if (grads.weights.size() != net.layers.size())
    throw std::invalid_argument("adam_step: gradient/network layer count mismatch");
  long flat = 0;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    check_finite(grads.weights[k], flat, "weight");
    flat += grads.weights[k].size();
    check_finite(grads.biases[k], flat, "bias");
    flat += grads.biases[k].size();
  }

  opt.step_count += 1;
  const double corr1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step_count));
  const double corr2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step_count));
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    auto& l = net.layers[k];
    adam_update(l.weights, grads.weights[k], opt.m_w[k], opt.v_w[k], opt, corr1, corr2);
    adam_update(l.biases, grads.biases[k], opt.m_b[k], opt.v_b[k], opt, corr1, corr2);
  }
}

namespace {

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& is, T& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw CorruptFileError("checkpoint truncated");
}

}  // namespace

void save_weights(const Network& net, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os.write(kMagic, sizeof(kMagic));
  write_pod(os, kFormatVersion);
  write_pod(os, static_cast<std::uint32_t>(net.layers.size()));
  for (const auto& l : net.layers) {
    write_pod(os, static_cast<std::uint64_t>(l.out_dim()));
    write_pod(os, static_cast<std::uint64_t>(l.in_dim()));
    write_pod(os, static_cast<std::uint32_t>(l.activation));
    for (Index i = 0; i < l.out_dim(); ++i)
      for (Index j = 0; j < l.in_dim(); ++j) write_pod(os, l.weights(i, j));
    for (Index i = 0; i < l.out_dim(); ++i) write_pod(os, l.biases[i]);
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

Network load_network(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw CorruptFileError("bad checkpoint magic in " + path);
  std::uint32_t version = 0, n_layers = 0;
  read_pod(is, version);
  if (version != kFormatVersion)
    throw CorruptFileError("unsupported checkpoint version " + std::to_string(version));
  read_pod(is, n_layers);
  if (n_layers == 0 || n_layers > 1024) throw CorruptFileError("implausible layer count");

  Network net;
  net.layers.resize(n_layers);
  for (auto& l : net.layers) {
    std::uint64_t out = 0, in = 0;
    std::uint32_t act = 0;
    read_pod(is, out);
    read_pod(is, in);
    read_pod(is, act);
    if (out == 0 || in == 0 || out > (1u << 20) || in > (1u << 20))
      throw CorruptFileError("implausible layer shape");
    if (act > static_cast<std::uint32_t>(Activation::gelu))
      throw CorruptFileError("unknown activation tag");
    l.weights = Matrix(out, in);
    l.biases = Vector(out);
    l.activation = static_cast<Activation>(act);
    for (std::uint64_t i = 0; i < out; ++i)
      for (std::uint64_t j = 0; j < in; ++j) read_pod(is, l.weights(i, j));
    for (std::uint64_t i = 0; i < out; ++i) read_pod(is, l.biases[i]);
  }
  net.validate();
  return net;
}

void load_weights(Network& net, const std::string& path) {
  Network loaded = load_network(path);
  if (loaded.layers.size() != net.layers.size())
    throw std::invalid_argument("load_weights: layer count mismatch");
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    if (loaded.layers[k].in_dim() != net.layers[k].in_dim() ||
        loaded.layers[k].out_dim() != net.layers[k].out_dim())
      throw std::invalid_argument("load_weights: dimension mismatch at layer " +
                                  std::to_string(k));
  }
  net = std::move(loaded);
}

}  // namespace slmc
