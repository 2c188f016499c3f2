#include "slmc/vae.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"
#include "slmc/errors.hpp"

namespace slmc {

namespace {

using nlohmann::json;

struct BatchElbo {
  double loss_sum = 0;  // summed over the batch
  double sse_sum = 0;
  double kl_sum = 0;
  NetGradients enc_grads;  // gradients of the batch-mean objective
  NetGradients dec_grads;
};

// Mean over the batch of SSE(x, Dec(z)) + beta * KL, z = mu + sigma .* xi.
BatchElbo batch_elbo(const VaeModel& model, const Matrix& x, const Matrix& xi) {
  const Index m_dim = model.latent_dim;
  const Index batch = x.cols();
  const double inv_b = 1.0 / static_cast<double>(batch);
  const double beta = model.beta_vae;

  ForwardCache enc_cache, dec_cache;
  Matrix enc_out = forward(model.encoder, x, &enc_cache);
  Matrix mu = enc_out.topRows(m_dim);
  Matrix raw = enc_out.bottomRows(m_dim);
  Matrix ls = raw.cwiseMax(model.logsig_lo).cwiseMin(model.logsig_hi);
  Matrix sig = ls.array().exp().matrix();

  Matrix z = mu + sig.cwiseProduct(xi);
  Matrix xhat = forward(model.decoder, z, &dec_cache);
  Matrix resid = xhat - x;

  BatchElbo out;
  out.sse_sum = resid.squaredNorm();
  out.kl_sum = 0.5 * (mu.squaredNorm() + sig.squaredNorm() -
                      static_cast<double>(m_dim * batch) - 2.0 * ls.sum());
  out.loss_sum = out.sse_sum + beta * out.kl_sum;

  Matrix dxhat = (2.0 * inv_b) * resid;
  Matrix dz;
  out.dec_grads = backward(model.decoder, dec_cache, dxhat, &dz);

  Matrix dmu = dz + (beta * inv_b) * mu;
  Matrix dls = dz.cwiseProduct(sig.cwiseProduct(xi)) +
               (beta * inv_b) * (sig.cwiseProduct(sig).array() - 1.0).matrix();
  // Clamped log-sigma entries carry no gradient.
  Matrix gate = ((raw.array() > model.logsig_lo) && (raw.array() < model.logsig_hi))
                    .cast<double>()
                    .matrix();
  dls = dls.cwiseProduct(gate);

  Matrix upstream(2 * m_dim, batch);
  upstream.topRows(m_dim) = dmu;
  upstream.bottomRows(m_dim) = dls;
  out.enc_grads = backward(model.encoder, enc_cache, upstream);
  return out;
}

Matrix gather_columns(const Samples& data, const std::vector<Index>& order,
                      std::size_t begin, std::size_t end) {
  Matrix x(data.front().size(), static_cast<Index>(end - begin));
  for (std::size_t i = begin; i < end; ++i)
    x.col(static_cast<Index>(i - begin)) = data[order[i]];
  return x;
}

}  // namespace

void VaeModel::validate() const {
  encoder.validate();
  decoder.validate();
  if (latent_dim <= 0) throw std::invalid_argument("vae: latent_dim must be positive");
  if (encoder.output_dim() != 2 * latent_dim)
    throw std::invalid_argument("vae: encoder must emit 2M outputs");
  if (decoder.input_dim() != latent_dim)
    throw std::invalid_argument("vae: decoder input must be M");
  if (decoder.output_dim() != encoder.input_dim())
    throw std::invalid_argument("vae: decoder output dim must match encoder input dim");
  if (!(beta_vae > 0)) throw std::invalid_argument("vae: beta_vae must be positive");
  if (!(logsig_lo < logsig_hi)) throw std::invalid_argument("vae: bad log-sigma clamp");
}

void VaeModel::encode(const Vector& x, Vector& mu, Vector& log_sigma) const {
  Vector h = forward(encoder, x);
  mu = h.head(latent_dim);
  log_sigma = h.tail(latent_dim).cwiseMax(logsig_lo).cwiseMin(logsig_hi);
}

Vector VaeModel::sample_proposal(RngStream& rng) const {
  Vector z = rng.normal_vector(latent_dim);
  Vector x = decode(z);
  if (!x.allFinite()) throw std::runtime_error("vae: non-finite proposal from decoder");
  return x;
}

double VaeModel::log_gamma(const Vector& x) const {
  Vector mu, ls;
  encode(x, mu, ls);
  return -0.5 * mu.squaredNorm() + ls.sum();
}

VaeModel make_vae(Index data_dim, Index latent_dim, double beta_vae, RngStream& rng) {
  VaeModel model;
  model.latent_dim = latent_dim;
  model.beta_vae = beta_vae;
  model.encoder = make_mlp({data_dim, 256, 256, 128, 128, 64, 32, 2 * latent_dim},
                           Activation::gelu, Activation::identity, rng);
  model.decoder = make_mlp({latent_dim, 32, 64, 128, 128, 256, 256, data_dim},
                           Activation::gelu, Activation::identity, rng);
  model.validate();
  return model;
}

ElboResult elbo_loss_with_noise(const VaeModel& model, const Vector& x, const Vector& xi) {
  if (x.size() != model.data_dim())
    throw std::invalid_argument("elbo_loss: state dimension mismatch");
  if (xi.size() != model.latent_dim)
    throw std::invalid_argument("elbo_loss: noise dimension mismatch");
  BatchElbo b = batch_elbo(model, Matrix(x), Matrix(xi));
  ElboResult r;
  r.loss = b.loss_sum;
  r.sse = b.sse_sum;
  r.kl = b.kl_sum;
  r.encoder_grads = std::move(b.enc_grads);
  r.decoder_grads = std::move(b.dec_grads);
  if (!std::isfinite(r.loss)) throw TrainingError("elbo_loss: non-finite loss");
  return r;
}

ElboResult elbo_loss(const VaeModel& model, const Vector& x, RngStream& rng) {
  return elbo_loss_with_noise(model, x, rng.normal_vector(model.latent_dim));
}

TrainReport train_vae(VaeModel& model, const Samples& data, const TrainConfig& cfg,
                      RngStream rng) {
  if (data.empty()) throw std::invalid_argument("train_vae: empty dataset");
  if (cfg.epochs < 1 || cfg.batch_size < 1)
    throw std::invalid_argument("train_vae: epochs and batch_size must be >= 1");
  for (const auto& p : data)
    if (p.size() != model.data_dim())
      throw std::invalid_argument("train_vae: datum dimension mismatch");
  model.validate();

  AdamState enc_opt = AdamState::for_network(model.encoder, cfg.learning_rate);
  AdamState dec_opt = AdamState::for_network(model.decoder, cfg.learning_rate);

  const std::size_t n = data.size();
  std::vector<Index> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<Index>(i);

  TrainReport report;
  report.epoch_loss.reserve(cfg.epochs);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = n - 1; i > 0; --i) {
      std::size_t j = rng.uniform_index(i + 1);
      std::swap(order[i], order[j]);
    }
    double loss_sum = 0;
    int batch_index = 0;
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size, ++batch_index) {
      const std::size_t end = std::min(n, begin + cfg.batch_size);
      Matrix x = gather_columns(data, order, begin, end);
      Matrix xi(model.latent_dim, x.cols());
      for (Index c = 0; c < xi.cols(); ++c)
        for (Index r = 0; r < xi.rows(); ++r) xi(r, c) = rng.normal();

      BatchElbo b = batch_elbo(model, x, xi);
      if (!std::isfinite(b.loss_sum))
        throw TrainingError("train_vae: non-finite loss at epoch " +
                            std::to_string(epoch) + " batch " + std::to_string(batch_index));
      loss_sum += b.loss_sum;
      adam_step(model.encoder, b.enc_grads, enc_opt);
      adam_step(model.decoder, b.dec_grads, dec_opt);
    }
    report.epoch_loss.push_back(loss_sum / static_cast<double>(n));
  }
  report.improved = report.epoch_loss.back() <= report.epoch_loss.front();
  return report;
}

Vector isometric_factor(const VaeModel& model, const Samples& samples, double delta) {
  if (samples.empty()) throw std::invalid_argument("isometric_factor: empty sample set");
  if (!(delta > 0)) throw std::invalid_argument("isometric_factor: delta must be positive");
  const Index m_dim = model.latent_dim;
  const double beta = model.beta_vae;
  Vector iso = Vector::Zero(m_dim);

  const Index chunk = 1024;
  const Index n = static_cast<Index>(samples.size());
  for (Index begin = 0; begin < n; begin += chunk) {
    const Index cols = std::min(chunk, n - begin);
    Matrix x(model.data_dim(), cols);
    for (Index c = 0; c < cols; ++c) x.col(c) = samples[begin + c];
    Matrix h = forward(model.encoder, x);
    Matrix mu = h.topRows(m_dim);
    Matrix sig = h.bottomRows(m_dim)
                     .cwiseMax(model.logsig_lo)
                     .cwiseMin(model.logsig_hi)
                     .array()
                     .exp()
                     .matrix();
    Matrix base = forward(model.decoder, mu);
    for (Index m = 0; m < m_dim; ++m) {
      Matrix mup = mu;
      mup.row(m).array() += delta;
      Matrix pert = forward(model.decoder, mup);
      Array norms = (base - pert).colwise().norm().transpose().array() / delta;
      Array scales = (2.0 * sig.row(m).transpose().array().square() / beta).sqrt();
      iso[m] += (scales * norms).sum();
    }
  }
  return iso / static_cast<double>(n);
}

Vector latent_importance(const VaeModel& model, const Samples& samples) {
  if (samples.empty()) throw std::invalid_argument("latent_importance: empty sample set");
  const Index m_dim = model.latent_dim;
  Vector acc = Vector::Zero(m_dim);
  Vector mu, ls;
  for (const auto& x : samples) {
    model.encode(x, mu, ls);
    acc.array() += (-2.0 * ls.array()).exp();  // 1 / sigma^2
  }
  return (model.beta_vae / 2.0) * acc / static_cast<double>(samples.size());
}

void save_vae(const VaeModel& model, const std::string& stem,
              const std::optional<VaeProvenance>& provenance) {
  save_weights(model.encoder, stem + ".enc.bin");
  save_weights(model.decoder, stem + ".dec.bin");
  json meta;
  meta["format_version"] = 1;
  meta["data_dim"] = model.data_dim();
  meta["latent_dim"] = model.latent_dim;
  meta["beta_vae"] = model.beta_vae;
  meta["logsig_lo"] = model.logsig_lo;
  meta["logsig_hi"] = model.logsig_hi;
  if (provenance) {
    meta["provenance"] = {{"target", provenance->target},
                          {"beta", provenance->beta},
                          {"epochs", provenance->epochs},
                          {"seed", provenance->seed}};
  }
  std::ofstream os(stem + ".json");
  if (!os) throw std::runtime_error("cannot write " + stem + ".json");
  os << meta.dump(2) << "\n";
}

VaeModel load_vae(const std::string& stem) {
  std::ifstream is(stem + ".json");
  if (!is) throw std::runtime_error("cannot open " + stem + ".json");
  json meta = json::parse(is, nullptr, true);
  VaeModel model;
  model.latent_dim = meta.at("latent_dim").get<Index>();
  model.beta_vae = meta.at("beta_vae").get<double>();
  model.logsig_lo = meta.value("logsig_lo", -10.0);
  model.logsig_hi = meta.value("logsig_hi", 10.0);
  model.encoder = load_network(stem + ".enc.bin");
  model.decoder = load_network(stem + ".dec.bin");
  if (meta.at("data_dim").get<Index>() != model.data_dim())
    throw CorruptFileError("vae checkpoint: sidecar/weight dimension mismatch");
  model.validate();
  return model;
}

}  // namespace slmc
