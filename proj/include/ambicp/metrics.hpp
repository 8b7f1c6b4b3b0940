// Coverage and inefficiency evaluation of prediction-set collections.
#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "ambicp/types.hpp"

namespace ambicp {

struct TrialReport {
  int trial = 0;
  double voted_coverage = 0.0;
  double aggregated_coverage = 0.0;
  std::optional<double> true_coverage;  // synthetic runs only
  double inefficiency = 0.0;
};

// Fraction of examples whose voted label lies in the set. Ids must align
// position-wise with the sets (IdMismatch otherwise).
double voted_coverage(const std::vector<PredictionSet>& sets,
                      const std::vector<std::string>& ids,
                      const Eigen::Ref<const Eigen::VectorXi>& voted_labels);

// Tie-aware variant: each example contributes (1/L) sum_j 1[Y^j in C] over
// its L argmax-tied labels.
double voted_coverage_tied(const std::vector<PredictionSet>& sets,
                           const std::vector<std::string>& ids,
                           const Eigen::Ref<const Eigen::MatrixXd>& lambda);

// Mean over examples of the covered plausibility mass sum_y lambda_y 1[y in C].
double aggregated_coverage(const std::vector<PredictionSet>& sets,
                           const std::vector<std::string>& ids,
                           const Eigen::Ref<const Eigen::MatrixXd>& lambda);

// Mean prediction-set cardinality.
double inefficiency(const std::vector<PredictionSet>& sets);

enum class ProfileSort {
  PerCurve,           // each curve sorted by its own values
  ByMaxPlausibility,  // all curves ordered by ambiguity proxy
};

// Per-example realized coverage curves plus the max-plausibility sequence.
struct CoverageProfile {
  Eigen::VectorXd voted_curve;
  Eigen::VectorXd aggregated_curve;
  Eigen::VectorXd max_plausibility;
};

CoverageProfile coverage_profile(const std::vector<PredictionSet>& sets,
                                 const std::vector<std::string>& ids,
                                 const Eigen::Ref<const Eigen::VectorXi>& voted_labels,
                                 const Eigen::Ref<const Eigen::MatrixXd>& lambda,
                                 ProfileSort sort_key = ProfileSort::PerCurve);

}  // namespace ambicp
