#pragma once

#include <optional>
#include <string>
#include <utility>

#include "slmc/nn.hpp"
#include "slmc/rng.hpp"
#include "slmc/types.hpp"

namespace slmc {

struct TrainConfig {
  int epochs = 150;
  int batch_size = 516;
  double learning_rate = 1e-3;
  double beta_vae = 1.0 / 120.0;
  std::uint64_t rng_seed = 0;
  double logsig_lo = -10.0;
  double logsig_hi = 10.0;
};

// Gaussian-encoder beta-VAE with deterministic-mean decoder under SSE
// reconstruction loss. The encoder emits [mu; log sigma] (2M outputs);
// log sigma is clamped before exponentiation, so sigma stays positive
// and log Gamma finite.
struct VaeModel {
  Network encoder;  // D -> 2M
  Network decoder;  // M -> D
  Index latent_dim = 0;
  double beta_vae = 1.0;
  double logsig_lo = -10.0;
  double logsig_hi = 10.0;

  Index data_dim() const { return decoder.output_dim(); }

  void encode(const Vector& x, Vector& mu, Vector& log_sigma) const;
  Vector decode(const Vector& z) const { return forward(decoder, z); }

  // x' = Dec(z), z ~ N(0, I_M); depends only on weights and the stream.
  Vector sample_proposal(RngStream& rng) const;

  // log Gamma(x) = -0.5 ||mu(x)||^2 + sum_m log sigma_m(x), constant dropped.
  double log_gamma(const Vector& x) const;

  void validate() const;
};

// The stack used everywhere: 256-256-128-128-64-32 gelu encoder trunk with
// a linear 2M head, mirrored decoder with a linear D head.
VaeModel make_vae(Index data_dim, Index latent_dim, double beta_vae, RngStream& rng);

struct ElboResult {
  double loss = 0;  // sse + beta_vae * kl
  double sse = 0;
  double kl = 0;
  NetGradients encoder_grads;
  NetGradients decoder_grads;
};

// Single-sample reparameterized objective and its exact gradients.
ElboResult elbo_loss(const VaeModel& model, const Vector& x, RngStream& rng);
// Same with caller-supplied noise; used for gradient checks.
ElboResult elbo_loss_with_noise(const VaeModel& model, const Vector& x, const Vector& xi);

struct TrainReport {
  std::vector<double> epoch_loss;
  bool improved = false;  // final mean loss <= initial mean loss (soft check)
};

// Shuffled-minibatch Adam on the ELBO objective. Deterministic given the
// stream. Throws TrainingError carrying epoch/batch on a non-finite loss.
TrainReport train_vae(VaeModel& model, const Samples& data, const TrainConfig& cfg,
                      RngStream rng);

// Per-dimension isometric factors over generated samples: mean of
// sqrt(2 sigma_m^2 / beta_vae) * ||Dec(mu) - Dec(mu + delta e_m)|| / delta.
Vector isometric_factor(const VaeModel& model, const Samples& samples,
                        double delta = 1e-3);

// kappa_m = (beta_vae / 2) * mean over samples of 1 / sigma_m^2.
Vector latent_importance(const VaeModel& model, const Samples& samples);

struct VaeProvenance {
  std::string target;
  double beta = 1.0;
  int epochs = 0;
  std::uint64_t seed = 0;
};

// Checkpoint = <stem>.enc.bin + <stem>.dec.bin + <stem>.json sidecar.
void save_vae(const VaeModel& model, const std::string& stem,
              const std::optional<VaeProvenance>& provenance = std::nullopt);
VaeModel load_vae(const std::string& stem);

}  // namespace slmc
