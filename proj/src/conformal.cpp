#include "ambicp/conformal.hpp"

#include <algorithm>
#include <cmath>

namespace ambicp {

namespace {

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ConfigError("alpha must lie in (0,1), got " + std::to_string(alpha));
}

// p-value thresholding is well defined at the endpoints too (alpha = 0 keeps
// every class, alpha = 1 keeps none); only calibration pins alpha to (0,1).
void check_alpha_closed(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw ConfigError("alpha must lie in [0,1], got " + std::to_string(alpha));
}

Eigen::Index count_leq_sorted(const std::vector<double>& sorted, double x) {
  return static_cast<Eigen::Index>(
      std::upper_bound(sorted.begin(), sorted.end(), x) - sorted.begin());
}

}  // namespace

Threshold empirical_quantile(const Eigen::Ref<const Eigen::VectorXd>& scores, Eigen::Index k) {
  const Eigen::Index n = scores.size();
  if (n == 0) throw EmptySample("empirical_quantile needs a non-empty sample");
  if (k < 1) return Threshold::neg_inf();
  if (k > n) return Threshold::pos_inf();
  std::vector<double> v(scores.data(), scores.data() + n);
  std::nth_element(v.begin(), v.begin() + (k - 1), v.end());
  return Threshold::finite(v[static_cast<std::size_t>(k - 1)]);
}

// The p-value route includes class y iff (c_y + 1)/(n+1) > alpha with
// c_y = |{i : s_i <= E(X,y)}|, so the matching order-statistic index is the
// smallest count c with (c+1)/(n+1) > alpha. In exact arithmetic this is
// floor(alpha*(n+1)); the one-ulp adjustment below pins the same value the
// floating-point comparison uses, since floor(alpha*(n+1)) can fall on the
// wrong side when alpha*(n+1) rounds across an integer.
Eigen::Index split_quantile_index(double alpha, Eigen::Index n) {
  check_alpha(alpha);
  const double denom = static_cast<double>(n + 1);
  const auto rho = [denom](Eigen::Index c) { return (static_cast<double>(c) + 1.0) / denom; };
  Eigen::Index k = static_cast<Eigen::Index>(std::floor(alpha * denom));
  k = std::clamp<Eigen::Index>(k, 0, n);
  while (k > 0 && rho(k - 1) > alpha) --k;
  while (k <= n && rho(k) <= alpha) ++k;
  return k;
}

// Same construction for the averaged p-value: smallest total count C with
// (C + m)/(m(n+1)) > alpha, equal to floor(alpha*m*(n+1)) - m + 1 exactly.
Eigen::Index mc_quantile_index(double alpha, Eigen::Index n, Eigen::Index m) {
  check_alpha(alpha);
  if (m < 1) throw ConfigError("m must be >= 1");
  const double denom = static_cast<double>(m) * static_cast<double>(n + 1);
  const double dm = static_cast<double>(m);
  const auto rho = [denom, dm](Eigen::Index c) { return (static_cast<double>(c) + dm) / denom; };
  Eigen::Index k = static_cast<Eigen::Index>(std::floor(alpha * denom)) - m + 1;
  k = std::clamp<Eigen::Index>(k, 0, m * n);
  while (k > 0 && rho(k - 1) > alpha) --k;
  while (k <= m * n && rho(k) <= alpha) ++k;
  return k;
}

Threshold calibrate_split(const Eigen::Ref<const Eigen::VectorXd>& true_label_scores,
                          double alpha) {
  return empirical_quantile(true_label_scores, split_quantile_index(alpha, true_label_scores.size()));
}

PredictionSet predict_set(std::string id, const Eigen::Ref<const Eigen::RowVectorXd>& test_row,
                          const Threshold& tau) {
  PredictionSet set;
  set.id = std::move(id);
  if (tau.is_pos_inf()) return set;
  for (Eigen::Index k = 0; k < test_row.size(); ++k) {
    if (tau.is_neg_inf() || test_row[k] >= tau.value) set.classes.push_back(static_cast<int>(k));
  }
  return set;
}

double p_value(const Eigen::Ref<const Eigen::VectorXd>& calib_scores, double test_score) {
  const Eigen::Index n = calib_scores.size();
  if (n == 0) throw EmptySample("p_value needs calibration scores");
  Eigen::Index count = 0;
  for (Eigen::Index i = 0; i < n; ++i) count += calib_scores[i] <= test_score;
  return (static_cast<double>(count) + 1.0) / static_cast<double>(n + 1);
}

Eigen::VectorXd p_values_row(const Eigen::Ref<const Eigen::VectorXd>& calib_scores,
                             const Eigen::Ref<const Eigen::RowVectorXd>& test_row) {
  const Eigen::Index n = calib_scores.size();
  if (n == 0) throw EmptySample("p_values_row needs calibration scores");
  std::vector<double> sorted(calib_scores.data(), calib_scores.data() + n);
  std::sort(sorted.begin(), sorted.end());
  Eigen::VectorXd rho(test_row.size());
  for (Eigen::Index k = 0; k < test_row.size(); ++k) {
    rho[k] = (static_cast<double>(count_leq_sorted(sorted, test_row[k])) + 1.0) /
             static_cast<double>(n + 1);
  }
  return rho;
}

PredictionSet predict_set_pvalue(std::string id,
                                 const Eigen::Ref<const Eigen::RowVectorXd>& test_row,
                                 const Eigen::Ref<const Eigen::VectorXd>& calib_scores,
                                 double alpha) {
  check_alpha_closed(alpha);
  PredictionSet set;
  set.id = std::move(id);
  set.p_values = p_values_row(calib_scores, test_row);
  for (Eigen::Index k = 0; k < test_row.size(); ++k) {
    if ((*set.p_values)[k] > alpha) set.classes.push_back(static_cast<int>(k));
  }
  return set;
}

Threshold calibrate_mc(const Eigen::Ref<const Eigen::MatrixXd>& replicate_scores, double alpha) {
  const Eigen::Index n = replicate_scores.rows();
  const Eigen::Index m = replicate_scores.cols();
  if (n == 0 || m == 0) throw EmptySample("calibrate_mc needs a non-empty score matrix");
  Eigen::VectorXd flat = replicate_scores.reshaped();
  return empirical_quantile(flat, mc_quantile_index(alpha, n, m));
}

double mc_p_value(const Eigen::Ref<const Eigen::MatrixXd>& replicate_calib_scores,
                  double test_score) {
  const Eigen::Index n = replicate_calib_scores.rows();
  const Eigen::Index m = replicate_calib_scores.cols();
  if (n == 0 || m == 0) throw EmptySample("mc_p_value needs a non-empty score matrix");
  Eigen::Index count = 0;
  const double* p = replicate_calib_scores.data();
  for (Eigen::Index i = 0; i < n * m; ++i) count += p[i] <= test_score;
  return (static_cast<double>(count) + static_cast<double>(m)) /
         (static_cast<double>(m) * static_cast<double>(n + 1));
}

Eigen::VectorXd mc_p_values_row(const Eigen::Ref<const Eigen::MatrixXd>& replicate_calib_scores,
                                const Eigen::Ref<const Eigen::RowVectorXd>& test_row) {
  const Eigen::Index n = replicate_calib_scores.rows();
  const Eigen::Index m = replicate_calib_scores.cols();
  if (n == 0 || m == 0) throw EmptySample("mc_p_values_row needs a non-empty score matrix");
  std::vector<double> sorted(replicate_calib_scores.data(), replicate_calib_scores.data() + n * m);
  std::sort(sorted.begin(), sorted.end());
  Eigen::VectorXd rho(test_row.size());
  for (Eigen::Index k = 0; k < test_row.size(); ++k) {
    rho[k] = (static_cast<double>(count_leq_sorted(sorted, test_row[k])) + static_cast<double>(m)) /
             (static_cast<double>(m) * static_cast<double>(n + 1));
  }
  return rho;
}

PredictionSet predict_set_mc_pvalue(std::string id,
                                    const Eigen::Ref<const Eigen::RowVectorXd>& test_row,
                                    const Eigen::Ref<const Eigen::MatrixXd>& replicate_calib_scores,
                                    double alpha) {
  check_alpha_closed(alpha);
  PredictionSet set;
  set.id = std::move(id);
  set.p_values = mc_p_values_row(replicate_calib_scores, test_row);
  for (Eigen::Index k = 0; k < test_row.size(); ++k) {
    if ((*set.p_values)[k] > alpha) set.classes.push_back(static_cast<int>(k));
  }
  return set;
}

EmpiricalCDF::EmpiricalCDF(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw EmptySample("ECDF needs a non-empty sample");
  for (double v : values_) {
    if (!(v >= 0.0 && v <= 1.0))
      throw Error("ECDF values must lie in [0,1], got " + std::to_string(v));
  }
  std::sort(values_.begin(), values_.end());
}

double EmpiricalCDF::evaluate(double f) const {
  return static_cast<double>(count_leq_sorted(values_, f)) / static_cast<double>(values_.size());
}

EmpiricalCDF build_ecdf(std::vector<double> values) { return EmpiricalCDF(std::move(values)); }

BandedCDF dkw_band(EmpiricalCDF ecdf, double delta) {
  if (!(delta > 0.0 && delta < 1.0))
    throw ConfigError("delta must lie in (0,1), got " + std::to_string(delta));
  const double eps =
      std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(ecdf.count())));
  return BandedCDF{std::move(ecdf), eps, delta};
}

double EcdfMcCalibration::averaged_p_value(double score) const {
  const auto* begin = reference_scores.data();
  const auto* end = begin + reference_scores.size();
  const auto count = static_cast<double>(std::upper_bound(begin, end, score) - begin);
  return (count + static_cast<double>(m)) /
         (static_cast<double>(m) * static_cast<double>(l + 1));
}

double EcdfMcCalibration::corrected_p_value(double score) const {
  return band.upper(averaged_p_value(score));
}

EcdfMcCalibration calibrate_ecdf_mc(const ScoreTable& calib_scores,
                                    const Eigen::Ref<const Eigen::MatrixXd>& calib_lambda,
                                    double delta, Eigen::Index l, Eigen::Index m,
                                    const RandomStream& rng) {
  const Eigen::Index n = calib_scores.num_examples();
  if (calib_lambda.rows() != n || calib_lambda.cols() != calib_scores.num_classes())
    throw Error("calibration plausibilities do not match the score table shape");
  if (l < 1 || n - l < 2)
    throw SplitTooSmall("need 1 <= l and n-l >= 2, got l=" + std::to_string(l) +
                        ", n=" + std::to_string(n));
  if (m < 1) throw ConfigError("m must be >= 1");

  // Step 1: m pseudo-labels per example on the first split.
  Eigen::VectorXd flat(l * m);
  for (Eigen::Index i = 0; i < l; ++i) {
    RandomStream stream = rng.fork("pseudo-labels", calib_scores.ids[i]);
    for (Eigen::Index j = 0; j < m; ++j) {
      const int label = stream.categorical(calib_lambda.row(i));
      flat[i * m + j] = calib_scores.scores(i, label);
    }
  }
  std::sort(flat.data(), flat.data() + flat.size());

  const auto averaged = [&](double score) {
    const auto count =
        static_cast<double>(std::upper_bound(flat.data(), flat.data() + flat.size(), score) -
                            flat.data());
    return (count + static_cast<double>(m)) /
           (static_cast<double>(m) * static_cast<double>(l + 1));
  };

  // Steps 2-3: one label per held-out example, averaged p-values against the
  // first split with denominator m(l+1).
  std::vector<double> rho_bar;
  rho_bar.reserve(static_cast<std::size_t>(n - l));
  for (Eigen::Index i = l; i < n; ++i) {
    RandomStream stream = rng.fork("holdout-labels", calib_scores.ids[i]);
    const int label = stream.categorical(calib_lambda.row(i));
    rho_bar.push_back(averaged(calib_scores.scores(i, label)));
  }

  // Step 4: ECDF of the held-out averaged p-values plus its DKW band.
  return EcdfMcCalibration{std::move(flat), l, m,
                           dkw_band(build_ecdf(std::move(rho_bar)), delta)};
}

std::vector<PredictionSet> predict_ecdf_mc(const EcdfMcCalibration& calibration,
                                           const ScoreTable& test_scores, double alpha) {
  check_alpha_closed(alpha);
  std::vector<PredictionSet> sets;
  sets.reserve(static_cast<std::size_t>(test_scores.num_examples()));
  const Eigen::Index K = test_scores.num_classes();
  for (Eigen::Index i = 0; i < test_scores.num_examples(); ++i) {
    PredictionSet set;
    set.id = test_scores.ids[i];
    Eigen::VectorXd corrected(K);
    for (Eigen::Index k = 0; k < K; ++k)
      corrected[k] = calibration.corrected_p_value(test_scores.scores(i, k));
    for (Eigen::Index k = 0; k < K; ++k) {
      if (corrected[k] > alpha) set.classes.push_back(static_cast<int>(k));
    }
    set.p_values = std::move(corrected);
    sets.push_back(std::move(set));
  }
  return sets;
}

std::vector<PredictionSet> ecdf_mc_predict(const ScoreTable& calib_scores,
                                           const Eigen::Ref<const Eigen::MatrixXd>& calib_lambda,
                                           const ScoreTable& test_scores, double alpha,
                                           double delta, Eigen::Index l, Eigen::Index m,
                                           const RandomStream& rng) {
  return predict_ecdf_mc(calibrate_ecdf_mc(calib_scores, calib_lambda, delta, l, m, rng),
                         test_scores, alpha);
}

}  // namespace ambicp
