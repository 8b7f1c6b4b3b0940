// Gaussian-mixture toy data with exact Bayes posteriors. The posteriors serve
// both as plausibilities and as conformity scores, which removes model
// training from the experiment loop.
#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "ambicp/aggregation.hpp"
#include "ambicp/rng.hpp"
#include "ambicp/types.hpp"

namespace ambicp {

struct ToyConfig {
  int num_classes = 0;
  int dim = 0;
  Eigen::MatrixXd means;   // K x d
  Eigen::MatrixXd sigmas;  // K x d diagonal scales, all > 0
  Eigen::VectorXd weights; // class priors on the simplex
  Eigen::Index n = 0;      // examples per draw
};

// K=3 classes in two dimensions, means at the vertices of an equilateral
// triangle of the given circumradius, unit sigmas, equal weights. r=1 is the
// ambiguous default; r=5 the separated preset.
ToyConfig toy_preset(double circumradius, Eigen::Index n);
ToyConfig ambiguous_preset(Eigen::Index n);
ToyConfig separated_preset(Eigen::Index n);

void validate_toy_config(const ToyConfig& config);

struct ToyDataset {
  std::vector<std::string> ids;
  Eigen::MatrixXd features;     // n x d
  Eigen::VectorXi true_labels;  // sampled ancestrally
  Eigen::MatrixXd posteriors;   // n x K exact Bayes posteriors
  Eigen::VectorXi voted_labels; // argmax of each posterior row
};

// Ancestral sampling: Y ~ weights, X ~ N(mu_Y, diag(sigma_Y^2)).
ToyDataset gen_toy(const ToyConfig& config, RandomStream& rng,
                   TieBreak tie_break = TieBreak::LowestIndex);

// Exact posterior P(Y=y|X=x); log-space with max subtraction.
Plausibilities bayes_posterior(const Eigen::Ref<const Eigen::VectorXd>& x,
                               const ToyConfig& config);

Eigen::VectorXd bayes_posterior_vector(const Eigen::Ref<const Eigen::VectorXd>& x,
                                       const ToyConfig& config);

// x plus isotropic Gaussian noise of scale sigma_aug.
Eigen::VectorXd augment_input(const Eigen::Ref<const Eigen::VectorXd>& x, double sigma_aug,
                              RandomStream& rng);

}  // namespace ambicp
