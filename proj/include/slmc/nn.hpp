#pragma once

#include <string>
#include <vector>

#include "slmc/errors.hpp"
#include "slmc/rng.hpp"
#include "slmc/types.hpp"

namespace slmc {

enum class Activation { identity, gelu };

// Exact Gaussian-CDF gelu: x * Phi(x).
double gelu(double x);
double gelu_grad(double x);

struct DenseLayer {
  Matrix weights;  // out x in
  Vector biases;   // out
  Activation activation = Activation::identity;

  Index in_dim() const { return weights.cols(); }
  Index out_dim() const { return weights.rows(); }
};

struct Network {
  std::vector<DenseLayer> layers;

  Index input_dim() const { return layers.front().in_dim(); }
  Index output_dim() const { return layers.back().out_dim(); }
  Index parameter_count() const;
  // Checks dimension chaining and finiteness of all parameters.
  void validate() const;
};

// Fully connected stack with `hidden` activation on interior layers and
// `head` on the last one. Weights: fan-in scaled uniform, biases zero.
Network make_mlp(const std::vector<Index>& dims, Activation hidden,
                 Activation head, RngStream& rng);

// Per-layer inputs and pre-activations from a forward pass; batched with
// one column per sample.
struct ForwardCache {
  std::vector<Matrix> inputs;  // inputs[k] feeds layer k
  std::vector<Matrix> pre;     // pre[k] = W_k inputs[k] + b_k
  bool valid = false;
};

Matrix forward(const Network& net, const Matrix& x, ForwardCache* cache = nullptr);
Vector forward(const Network& net, const Vector& x);

struct NetGradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  static NetGradients zeros_like(const Network& net);
  void add_scaled(const NetGradients& other, double scale);
  void scale(double s);
};

// Gradient of <upstream, forward(net, x)> w.r.t. every parameter; the
// gradient w.r.t. the input lands in *input_grad when non-null. Needs the
// cache from a prior forward pass.
NetGradients backward(const Network& net, const ForwardCache& cache,
                      const Matrix& upstream, Matrix* input_grad = nullptr);

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  long step_count = 0;
  std::vector<Matrix> m_w, v_w;
  std::vector<Vector> m_b, v_b;

  static AdamState for_network(const Network& net, double learning_rate = 1e-3);
};

// One bias-corrected Adam update. Throws TrainingError (with the flat
// parameter index) on a non-finite gradient.
void adam_step(Network& net, const NetGradients& grads, AdamState& opt);

// Versioned binary checkpoint: magic, version, layer dims + activation
// tags, row-major f64 weights and biases. Round-trips are bit exact.
void save_weights(const Network& net, const std::string& path);
Network load_network(const std::string& path);
// Loads into an existing network; layer shapes must match.
void load_weights(Network& net, const std::string& path);

}  // namespace slmc
