#include <cmath>
#include <cstdio>

#include "doctest.h"
#include "slmc/vae.hpp"

using namespace slmc;

namespace {

Network linear_net(const Matrix& w, const Vector& b) {
  Network net;
  net.layers.push_back({w, b, Activation::identity});
  return net;
}

// Encoder emitting constant (mu, log sigma) regardless of the input.
VaeModel constant_vae(Index data_dim, const Vector& mu, const Vector& log_sigma,
                      const Matrix& dec_w, const Vector& dec_b, double beta_vae) {
  const Index m = mu.size();
  Vector head(2 * m);
  head.head(m) = mu;
  head.tail(m) = log_sigma;
  VaeModel model;
  model.encoder = linear_net(Matrix::Zero(2 * m, data_dim), head);
  model.decoder = linear_net(dec_w, dec_b);
  model.latent_dim = m;
  model.beta_vae = beta_vae;
  model.validate();
  return model;
}

// Encoder computing mu = x with unit sigma; decoder = identity.
VaeModel identity_vae(Index dim, double beta_vae) {
  Matrix enc_w = Matrix::Zero(2 * dim, dim);
  enc_w.topRows(dim) = Matrix::Identity(dim, dim);
  VaeModel model;
  model.encoder = linear_net(enc_w, Vector::Zero(2 * dim));
  model.decoder = linear_net(Matrix::Identity(dim, dim), Vector::Zero(dim));
  model.latent_dim = dim;
  model.beta_vae = beta_vae;
  model.validate();
  return model;
}

VaeModel small_random_vae(Index dim, double beta_vae, std::uint64_t seed) {
  RngStream rng = RngStream::from_seed(seed);
  VaeModel model;
  model.encoder = make_mlp({dim, 6, 2 * dim}, Activation::gelu,
                           Activation::identity, rng);
  model.decoder = make_mlp({dim, 6, dim}, Activation::gelu,
                           Activation::identity, rng);
  model.latent_dim = dim;
  model.beta_vae = beta_vae;
  model.validate();
  return model;
}

bool weights_equal(const Network& a, const Network& b) {
  for (std::size_t k = 0; k < a.layers.size(); ++k) {
    if (a.layers[k].weights != b.layers[k].weights) return false;
    if (a.layers[k].biases != b.layers[k].biases) return false;
  }
  return true;
}

double elbo_value(const VaeModel& model, const Vector& x, const Vector& xi) {
  return elbo_loss_with_noise(model, x, xi).loss;
}

}  // namespace

TEST_CASE("elbo: standard-normal posterior has zero KL") {
  VaeModel model = constant_vae(2, Vector::Zero(2), Vector::Zero(2),
                                Matrix::Zero(2, 2), Vector::Zero(2), 1.0);
  Vector x(2);
  x << 0.3, -1.2;
  ElboResult r = elbo_loss_with_noise(model, x, Vector::Zero(2));
  CHECK(r.kl == 0.0);
}

TEST_CASE("elbo: exact reconstruction has zero SSE") {
  VaeModel model = identity_vae(2, 1.0);
  Vector x(2);
  x << 0.7, -0.4;
  ElboResult r = elbo_loss_with_noise(model, x, Vector::Zero(2));
  CHECK(r.sse == 0.0);
}

TEST_CASE("elbo: hand-computed Gaussian KL") {
  Vector mu(2), ls(2);
  mu << 1.0, 0.0;
  ls << 0.0, 0.0;  // sigma = (1, 1)
  VaeModel model = constant_vae(2, mu, ls, Matrix::Zero(2, 2), Vector::Zero(2), 1.0);
  ElboResult r = elbo_loss_with_noise(model, Vector::Zero(2), Vector::Zero(2));
  CHECK(r.kl == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("elbo: analytic gradients match finite differences with frozen noise") {
  const double h = 1e-5;
  VaeModel model = small_random_vae(2, 0.25, 31);
  RngStream rng = RngStream::from_seed(77);
  Vector x = rng.normal_vector(2);
  Vector xi = rng.normal_vector(2);
  ElboResult r = elbo_loss_with_noise(model, x, xi);

  auto fd_check = [&](double& p, double analytic) {
    const double saved = p;
    p = saved + h;
    const double up = elbo_value(model, x, xi);
    p = saved - h;
    const double dn = elbo_value(model, x, xi);
    p = saved;
    const double fd = (up - dn) / (2 * h);
    const double scale = std::max({1.0, std::abs(fd), std::abs(analytic)});
    CHECK(std::abs(fd - analytic) / scale < 1e-4);
  };

  for (std::size_t k = 0; k < model.encoder.layers.size(); ++k) {
    auto& layer = model.encoder.layers[k];
    for (Index i = 0; i < layer.out_dim(); ++i) {
      fd_check(layer.weights(i, 0), r.encoder_grads.weights[k](i, 0));
      fd_check(layer.biases[i], r.encoder_grads.biases[k][i]);
    }
  }
  for (std::size_t k = 0; k < model.decoder.layers.size(); ++k) {
    auto& layer = model.decoder.layers[k];
    for (Index i = 0; i < layer.out_dim(); ++i) {
      fd_check(layer.weights(i, 0), r.decoder_grads.weights[k](i, 0));
      fd_check(layer.biases[i], r.decoder_grads.biases[k][i]);
    }
  }
}

TEST_CASE("train: zero learning rate leaves weights bit-identical") {
  VaeModel model = small_random_vae(2, 0.5, 5);
  VaeModel before = model;
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 4;
  cfg.learning_rate = 0.0;
  cfg.beta_vae = 0.5;
  Samples data;
  RngStream rng = RngStream::from_seed(8);
  for (int i = 0; i < 10; ++i) data.push_back(rng.normal_vector(2));
  train_vae(model, data, cfg, RngStream::from_seed(9));
  CHECK(weights_equal(model.encoder, before.encoder));
  CHECK(weights_equal(model.decoder, before.decoder));
}

TEST_CASE("train: a single repeated point reconstructs better after training") {
  VaeModel model = small_random_vae(2, 1e-3, 6);
  Vector point(2);
  point << 0.8, -0.3;
  auto sse_now = [&] {
    return elbo_loss_with_noise(model, point, Vector::Zero(2)).sse;
  };
  const double before = sse_now();
  Samples data(64, point);
  TrainConfig cfg;
  cfg.epochs = 150;
  cfg.batch_size = 16;
  cfg.beta_vae = 1e-3;
  TrainReport report = train_vae(model, data, cfg, RngStream::from_seed(10));
  CHECK(sse_now() < before);
  CHECK(report.improved);
}

TEST_CASE("train: warm start reproduces previous outputs before any step") {
  VaeModel model = small_random_vae(2, 0.5, 12);
  Samples data;
  RngStream rng = RngStream::from_seed(13);
  for (int i = 0; i < 20; ++i) data.push_back(rng.normal_vector(2));
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.beta_vae = 0.5;
  train_vae(model, data, cfg, RngStream::from_seed(14));

  // Warm start = continue from the trained weights: a zero-rate pass leaves
  // the decoded outputs bit-identical.
  VaeModel warm = model;
  TrainConfig frozen = cfg;
  frozen.learning_rate = 0.0;
  train_vae(warm, data, frozen, RngStream::from_seed(15));
  Vector z = rng.normal_vector(2);
  CHECK(warm.decode(z) == model.decode(z));
}

TEST_CASE("train: empty dataset and NaN loss are errors") {
  VaeModel model = small_random_vae(2, 0.5, 16);
  TrainConfig cfg;
  CHECK_THROWS_AS(train_vae(model, {}, cfg, RngStream::from_seed(1)),
                  std::invalid_argument);
  model.encoder.layers[0].weights(0, 0) = std::nan("");
  Samples data(4, Vector::Zero(2));
  CHECK_THROWS(train_vae(model, data, cfg, RngStream::from_seed(2)));
}

TEST_CASE("sample_proposal: identity decoder pushes the standard normal through") {
  VaeModel model = identity_vae(2, 1.0);
  RngStream rng = RngStream::from_seed(21);
  const int n = 100000;
  Vector mean = Vector::Zero(2);
  for (int i = 0; i < n; ++i) mean += model.sample_proposal(rng);
  mean /= n;
  CHECK(mean.cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("sample_proposal: constant decoder returns the constant") {
  Vector c(2);
  c << 3.0, -1.0;
  VaeModel model = constant_vae(2, Vector::Zero(2), Vector::Zero(2),
                                Matrix::Zero(2, 2), c, 1.0);
  RngStream rng = RngStream::from_seed(22);
  for (int i = 0; i < 100; ++i) CHECK(model.sample_proposal(rng) == c);
}

TEST_CASE("sample_proposal: affine decoder gives covariance A A^T") {
  Matrix a(2, 2);
  a << 1.0, 0.4, -0.3, 2.0;
  Vector b(2);
  b << 0.5, -1.0;
  VaeModel model = constant_vae(2, Vector::Zero(2), Vector::Zero(2), a, b, 1.0);
  RngStream rng = RngStream::from_seed(23);
  const int n = 100000;
  Vector mean = Vector::Zero(2);
  Matrix second = Matrix::Zero(2, 2);
  for (int i = 0; i < n; ++i) {
    Vector x = model.sample_proposal(rng);
    mean += x;
    second += x * x.transpose();
  }
  mean /= n;
  Matrix cov = second / n - mean * mean.transpose();
  Matrix expected = a * a.transpose();
  CHECK((cov - expected).norm() / expected.norm() < 0.05);
}

TEST_CASE("sample_proposal: depends only on weights and the stream") {
  VaeModel model = small_random_vae(3, 0.5, 24);
  RngStream r1 = RngStream::from_seed(25).fork("p");
  RngStream r2 = RngStream::from_seed(25).fork("p");
  for (int i = 0; i < 10; ++i)
    CHECK(model.sample_proposal(r1) == model.sample_proposal(r2));
}

TEST_CASE("log_gamma: dropped-constant closed form") {
  SUBCASE("standard posterior gives zero") {
    VaeModel model = constant_vae(2, Vector::Zero(2), Vector::Zero(2),
                                  Matrix::Zero(2, 2), Vector::Zero(2), 1.0);
    CHECK(model.log_gamma(Vector::Zero(2)) == 0.0);
  }
  SUBCASE("mu (1,0), sigma (1,1)") {
    Vector mu(2), ls(2);
    mu << 1, 0;
    ls << 0, 0;
    VaeModel model =
        constant_vae(2, mu, ls, Matrix::Zero(2, 2), Vector::Zero(2), 1.0);
    CHECK(model.log_gamma(Vector::Zero(2)) == doctest::Approx(-0.5).epsilon(1e-12));
  }
  SUBCASE("mu (1,2), sigma (0.5,2)") {
    Vector mu(2), ls(2);
    mu << 1, 2;
    ls << std::log(0.5), std::log(2.0);
    VaeModel model =
        constant_vae(2, mu, ls, Matrix::Zero(2, 2), Vector::Zero(2), 1.0);
    CHECK(model.log_gamma(Vector::Zero(2)) == doctest::Approx(-2.5).epsilon(1e-12));
  }
}

TEST_CASE("log_gamma: shifting the log-sigma head shifts log Gamma by M*c") {
  VaeModel model = small_random_vae(3, 0.5, 26);
  RngStream rng = RngStream::from_seed(27);
  Vector x = rng.normal_vector(3);
  const double base = model.log_gamma(x);
  const double c = 0.37;
  model.encoder.layers.back().biases.tail(3).array() += c;
  CHECK(model.log_gamma(x) == doctest::Approx(base + 3 * c).epsilon(1e-12));
}

TEST_CASE("isometric factor: identity decoder with matched sigma is exactly one") {
  const double beta_vae = 0.04;
  const double ls = 0.5 * std::log(beta_vae / 2.0);  // sigma^2 = beta/2
  VaeModel model = constant_vae(2, Vector::Zero(2),
                                Vector::Constant(2, ls),
                                Matrix::Identity(2, 2), Vector::Zero(2), beta_vae);
  Samples samples(100, Vector::Zero(2));
  Vector iso = isometric_factor(model, samples, 1e-3);
  CHECK((iso.array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("isometric factor: a scaled decoder direction scales the factor") {
  const double beta_vae = 0.5;
  Matrix dec = Matrix::Identity(2, 2);
  dec(1, 1) = 2.0;  // dimension 2 stretched by 2
  Vector ls = Vector::Constant(2, -0.3);
  VaeModel model = constant_vae(2, Vector::Zero(2), ls, dec, Vector::Zero(2),
                                beta_vae);
  Samples samples(50, Vector::Zero(2));
  Vector iso = isometric_factor(model, samples, 1e-3);
  const double sigma2 = std::exp(2.0 * -0.3);
  const double unit = std::sqrt(2.0 * sigma2 / beta_vae);
  CHECK(iso[0] == doctest::Approx(unit).epsilon(1e-9));
  CHECK(iso[1] == doctest::Approx(2.0 * unit).epsilon(1e-9));
}

TEST_CASE("latent importance: closed form under constant sigma") {
  const double beta_vae = 0.8;
  SUBCASE("sigma = 1") {
    VaeModel model = constant_vae(2, Vector::Zero(2), Vector::Zero(2),
                                  Matrix::Zero(2, 2), Vector::Zero(2), beta_vae);
    Vector kappa = latent_importance(model, Samples(10, Vector::Zero(2)));
    CHECK(kappa[0] == doctest::Approx(beta_vae / 2).epsilon(1e-12));
  }
  SUBCASE("sigma = 2") {
    VaeModel model = constant_vae(2, Vector::Zero(2),
                                  Vector::Constant(2, std::log(2.0)),
                                  Matrix::Zero(2, 2), Vector::Zero(2), beta_vae);
    Vector kappa = latent_importance(model, Samples(10, Vector::Zero(2)));
    CHECK(kappa[0] == doctest::Approx(beta_vae / 8).epsilon(1e-12));
  }
  SUBCASE("two-point mixture of sigmas") {
    // log sigma = x_0 * log 2: sigma = 1 at x0 = 0 and sigma = 2 at x0 = 1.
    Matrix enc_w = Matrix::Zero(4, 2);
    enc_w(2, 0) = std::log(2.0);
    enc_w(3, 0) = std::log(2.0);
    VaeModel model;
    model.encoder = linear_net(enc_w, Vector::Zero(4));
    model.decoder = linear_net(Matrix::Zero(2, 2), Vector::Zero(2));
    model.latent_dim = 2;
    model.beta_vae = beta_vae;
    Samples samples = {Vector::Zero(2), Vector::Zero(2)};
    samples[1][0] = 1.0;
    Vector kappa = latent_importance(model, samples);
    CHECK(kappa[0] ==
          doctest::Approx(beta_vae / 2 * (1.0 + 0.25) / 2.0).epsilon(1e-12));
  }
}

TEST_CASE("vae checkpoints: round-trip and dimension validation") {
  VaeModel model = small_random_vae(2, 0.5, 30);
  const std::string stem = "test_vae_ckpt";
  save_vae(model, stem, VaeProvenance{"toy", 1.0, 0, 42});
  VaeModel loaded = load_vae(stem);
  CHECK(weights_equal(model.encoder, loaded.encoder));
  CHECK(weights_equal(model.decoder, loaded.decoder));
  CHECK(loaded.beta_vae == model.beta_vae);

  // Swapping in a decoder of the wrong width must be rejected.
  VaeModel other = small_random_vae(3, 0.5, 31);
  save_weights(other.decoder, stem + ".dec.bin");
  CHECK_THROWS(load_vae(stem));
  for (const char* suffix : {".enc.bin", ".dec.bin", ".json"})
    std::remove((stem + suffix).c_str());
}
