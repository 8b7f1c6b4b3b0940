#include "ambicp/synthetic.hpp"

#include <cmath>

namespace ambicp {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

ToyConfig toy_preset(double circumradius, Eigen::Index n) {
  ToyConfig config;
  config.num_classes = 3;
  config.dim = 2;
  config.means.resize(3, 2);
  for (int k = 0; k < 3; ++k) {
    const double angle = kPi / 2.0 + 2.0 * kPi * k / 3.0;
    config.means(k, 0) = circumradius * std::cos(angle);
    config.means(k, 1) = circumradius * std::sin(angle);
  }
  config.sigmas = Eigen::MatrixXd::Ones(3, 2);
  config.weights = Eigen::VectorXd::Constant(3, 1.0 / 3.0);
  config.n = n;
  return config;
}

ToyConfig ambiguous_preset(Eigen::Index n) { return toy_preset(1.0, n); }
ToyConfig separated_preset(Eigen::Index n) { return toy_preset(5.0, n); }

void validate_toy_config(const ToyConfig& config) {
  if (config.num_classes < 1) throw ConfigError("toy config: num_classes must be >= 1");
  if (config.dim < 1) throw ConfigError("toy config: dim must be >= 1");
  if (config.means.rows() != config.num_classes || config.means.cols() != config.dim)
    throw ConfigError("toy config: means must be K x d");
  if (config.sigmas.rows() != config.num_classes || config.sigmas.cols() != config.dim)
    throw ConfigError("toy config: sigmas must be K x d");
  if ((config.sigmas.array() <= 0.0).any())
    throw ConfigError("toy config: sigmas must be positive");
  if (config.weights.size() != config.num_classes)
    throw ConfigError("toy config: weights must have K entries");
  validate_plausibilities(config.weights);  // NegativeMass / NotNormalized on bad priors
  if (config.n < 1) throw ConfigError("toy config: n must be >= 1");
}

Eigen::VectorXd bayes_posterior_vector(const Eigen::Ref<const Eigen::VectorXd>& x,
                                       const ToyConfig& config) {
  Eigen::VectorXd logp(config.num_classes);
  for (int k = 0; k < config.num_classes; ++k) {
    double acc = config.weights[k] > 0.0 ? std::log(config.weights[k])
                                         : -std::numeric_limits<double>::infinity();
    for (int t = 0; t < config.dim; ++t) {
      const double s = config.sigmas(k, t);
      const double z = (x[t] - config.means(k, t)) / s;
      acc -= std::log(s) + 0.5 * z * z;
    }
    logp[k] = acc;
  }
  const double top = logp.maxCoeff();
  Eigen::VectorXd p = (logp.array() - top).exp();
  return p / p.sum();
}

Plausibilities bayes_posterior(const Eigen::Ref<const Eigen::VectorXd>& x,
                               const ToyConfig& config) {
  validate_toy_config(config);
  return validate_plausibilities(bayes_posterior_vector(x, config));
}

ToyDataset gen_toy(const ToyConfig& config, RandomStream& rng, TieBreak tie_break) {
  validate_toy_config(config);
  const Eigen::Index n = config.n;
  ToyDataset ds;
  ds.ids.reserve(static_cast<std::size_t>(n));
  ds.features.resize(n, config.dim);
  ds.true_labels.resize(n);
  ds.posteriors.resize(n, config.num_classes);
  ds.voted_labels.resize(n);

  for (Eigen::Index i = 0; i < n; ++i) {
    ds.ids.push_back(std::to_string(i));
    const int y = rng.categorical(config.weights);
    ds.true_labels[i] = y;
    for (int t = 0; t < config.dim; ++t)
      ds.features(i, t) = config.means(y, t) + config.sigmas(y, t) * rng.gaussian();
    const Eigen::VectorXd post = bayes_posterior_vector(ds.features.row(i), config);
    ds.posteriors.row(i) = post.transpose();
    ds.voted_labels[i] = vote(validate_plausibilities(post), tie_break,
                              tie_break == TieBreak::Random ? &rng : nullptr);
  }
  return ds;
}

Eigen::VectorXd augment_input(const Eigen::Ref<const Eigen::VectorXd>& x, double sigma_aug,
                              RandomStream& rng) {
  if (!(sigma_aug > 0.0)) throw ConfigError("sigma_aug must be positive");
  return x + sigma_aug * rng.gaussian_vector(x.size());
}

}  // namespace ambicp
