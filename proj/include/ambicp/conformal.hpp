// Split conformal prediction, Monte Carlo conformal prediction over sampled
// pseudo-labels, dependent-p-value averaging, and the ECDF-corrected variant
// with a DKW confidence band.
//
// Prediction sets use score >= tau and p-value > alpha; ties in scores are
// kept inside the set. Threshold-form and p-value-form sets coincide exactly,
// set for set, for every input (see quantile index notes in conformal.cpp).
#pragma once

#include <Eigen/Dense>

#include <vector>

#include "ambicp/rng.hpp"
#include "ambicp/types.hpp"

namespace ambicp {

// k-th smallest value of `scores` (1-based, ties kept). k < 1 yields the
// NEG_INF sentinel (full prediction set downstream); k > n yields POS_INF
// (empty set). Degenerate indices are statistically meaningful at small n or
// extreme alpha, so they are encoded rather than raised.
Threshold empirical_quantile(const Eigen::Ref<const Eigen::VectorXd>& scores, Eigen::Index k);

// Order-statistic index floor(alpha*(n+1)) for split calibration, and
// floor(alpha*m*(n+1)) - m + 1 for Monte Carlo calibration. Computed as the
// smallest score count whose p-value exceeds alpha under the same
// floating-point division the p-value routes use, which makes the two set
// constructions agree bit-exactly.
Eigen::Index split_quantile_index(double alpha, Eigen::Index n);
Eigen::Index mc_quantile_index(double alpha, Eigen::Index n, Eigen::Index m);

// Split-CP threshold: the floor(alpha*(n+1))-th smallest true-label score.
Threshold calibrate_split(const Eigen::Ref<const Eigen::VectorXd>& true_label_scores,
                          double alpha);

// C(X) = {k : E(X,k) >= tau}.
PredictionSet predict_set(std::string id, const Eigen::Ref<const Eigen::RowVectorXd>& test_row,
                          const Threshold& tau);

// Conformal p-value (|{i : s_i <= test}| + 1) / (n + 1).
double p_value(const Eigen::Ref<const Eigen::VectorXd>& calib_scores, double test_score);

// Per-class p-values for one test row (single sort of the calibration scores).
Eigen::VectorXd p_values_row(const Eigen::Ref<const Eigen::VectorXd>& calib_scores,
                             const Eigen::Ref<const Eigen::RowVectorXd>& test_row);

// C(X) = {y : rho_y > alpha}, p_values field populated.
PredictionSet predict_set_pvalue(std::string id,
                                 const Eigen::Ref<const Eigen::RowVectorXd>& test_row,
                                 const Eigen::Ref<const Eigen::VectorXd>& calib_scores,
                                 double alpha);

// Monte Carlo calibration over an n x m matrix of replicate scores
// E(X_i, Y_i^j): flattens all mn scores and takes the
// (floor(alpha*m*(n+1)) - m + 1)-th smallest, with the usual sentinels.
Threshold calibrate_mc(const Eigen::Ref<const Eigen::MatrixXd>& replicate_scores, double alpha);

// Averaged p-value over the m replicate columns,
// rho_bar = (sum_j (count_j + 1)) / (m(n+1)) in [1/(n+1), 1].
double mc_p_value(const Eigen::Ref<const Eigen::MatrixXd>& replicate_calib_scores,
                  double test_score);

Eigen::VectorXd mc_p_values_row(const Eigen::Ref<const Eigen::MatrixXd>& replicate_calib_scores,
                                const Eigen::Ref<const Eigen::RowVectorXd>& test_row);

PredictionSet predict_set_mc_pvalue(std::string id,
                                    const Eigen::Ref<const Eigen::RowVectorXd>& test_row,
                                    const Eigen::Ref<const Eigen::MatrixXd>& replicate_calib_scores,
                                    double alpha);

// Right-continuous empirical CDF of a sample in [0, 1].
class EmpiricalCDF {
 public:
  explicit EmpiricalCDF(std::vector<double> values);

  // (number of sample values <= f) / count.
  double evaluate(double f) const;
  Eigen::Index count() const { return static_cast<Eigen::Index>(values_.size()); }
  const std::vector<double>& values() const { return values_; }

 private:
  std::vector<double> values_;  // sorted ascending
};

EmpiricalCDF build_ecdf(std::vector<double> values);

// DKW band around an ECDF: epsilon = sqrt(log(2/delta) / (2 count)), and the
// true CDF lies inside [lower, upper] everywhere with probability >= 1-delta.
struct BandedCDF {
  EmpiricalCDF base;
  double epsilon = 0.0;
  double delta = 0.0;

  double upper(double f) const { return std::min(base.evaluate(f) + epsilon, 1.0); }
  double lower(double f) const { return std::max(base.evaluate(f) - epsilon, 0.0); }
};

BandedCDF dkw_band(EmpiricalCDF ecdf, double delta);

// Calibration artifact of ECDF Monte Carlo CP: sorted replicate reference
// scores from the first l calibration examples, plus the banded ECDF of the
// averaged p-values of the held-out examples l+1..n.
struct EcdfMcCalibration {
  Eigen::VectorXd reference_scores;  // sorted ascending, size m*l
  Eigen::Index l;
  Eigen::Index m;
  BandedCDF band;

  // rho_bar for one score; the denominator is m(l+1).
  double averaged_p_value(double score) const;
  // Upper-band corrected p-value F+(rho_bar).
  double corrected_p_value(double score) const;
};

// Steps 1-4: sample m labels per example for i <= l, one label for i > l,
// compute the held-out averaged p-values and build the banded ECDF.
// Label draws come from rng.fork("pseudo-labels"/"holdout-labels", id).
EcdfMcCalibration calibrate_ecdf_mc(const ScoreTable& calib_scores,
                                    const Eigen::Ref<const Eigen::MatrixXd>& calib_lambda,
                                    double delta, Eigen::Index l, Eigen::Index m,
                                    const RandomStream& rng);

// Steps 5-6 for every test row: corrected p-values are stored on the sets.
std::vector<PredictionSet> predict_ecdf_mc(const EcdfMcCalibration& calibration,
                                           const ScoreTable& test_scores, double alpha);

// Whole Algorithm-2 pipeline; guarantee target (1-alpha)(1-delta).
std::vector<PredictionSet> ecdf_mc_predict(const ScoreTable& calib_scores,
                                           const Eigen::Ref<const Eigen::MatrixXd>& calib_lambda,
                                           const ScoreTable& test_scores, double alpha,
                                           double delta, Eigen::Index l, Eigen::Index m,
                                           const RandomStream& rng);

}  // namespace ambicp
