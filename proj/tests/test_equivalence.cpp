// Exact-equivalence oracles between the threshold and p-value formulations,
// including tied scores and near-boundary alphas. The acceptance suite runs
// the larger continuous-score versions; these property tests stress the edge
// geometry.
#include <doctest.h>

#include <vector>

#include "ambicp/conformal.hpp"
#include "ambicp/rng.hpp"

using namespace ambicp;

namespace {

double draw_score(RandomStream& rng, bool gridded) {
  if (!gridded) return rng.uniform();
  // Coarse grid forces heavy ties across calibration and test scores.
  return static_cast<double>(rng.uniform_int(11)) / 10.0;
}

double draw_alpha(RandomStream& rng) {
  switch (rng.uniform_int(4)) {
    case 0: return 0.01 + 0.98 * rng.uniform();
    case 1: return 0.05;
    case 2: return 0.3;  // representability edge at small n
    default: {
      // Values of the form j/(n+1)-ish that sit on p-value lattice points.
      const auto n = 1 + rng.uniform_int(30);
      const auto j = 1 + rng.uniform_int(n);
      return static_cast<double>(j) / static_cast<double>(n + 1);
    }
  }
}

}  // namespace

TEST_CASE("threshold-form and p-value-form split sets coincide exactly") {
  RandomStream rng(101, "equivalence-a");
  for (int rep = 0; rep < 1200; ++rep) {
    const bool gridded = rep % 3 == 0;
    const Eigen::Index n = 5 + static_cast<Eigen::Index>(rng.uniform_int(496));
    const Eigen::Index K = 2 + static_cast<Eigen::Index>(rng.uniform_int(19));
    Eigen::VectorXd calib(n);
    for (Eigen::Index i = 0; i < n; ++i) calib[i] = draw_score(rng, gridded);
    Eigen::RowVectorXd test(K);
    for (Eigen::Index k = 0; k < K; ++k) test[k] = draw_score(rng, gridded);
    const double alpha = draw_alpha(rng);

    const PredictionSet via_tau = predict_set("x", test, calibrate_split(calib, alpha));
    const PredictionSet via_rho = predict_set_pvalue("x", test, calib, alpha);
    REQUIRE(via_tau.classes == via_rho.classes);
  }
}

TEST_CASE("averaged p-value thresholding equals the Monte Carlo quantile set") {
  RandomStream rng(103, "equivalence-b");
  for (int rep = 0; rep < 1200; ++rep) {
    const bool gridded = rep % 3 == 0;
    const Eigen::Index n = 5 + static_cast<Eigen::Index>(rng.uniform_int(200));
    const Eigen::Index m = 1 + static_cast<Eigen::Index>(rng.uniform_int(20));
    const Eigen::Index K = 2 + static_cast<Eigen::Index>(rng.uniform_int(19));
    Eigen::MatrixXd scores(n, m);
    for (Eigen::Index i = 0; i < n * m; ++i) scores.data()[i] = draw_score(rng, gridded);
    Eigen::RowVectorXd test(K);
    for (Eigen::Index k = 0; k < K; ++k) test[k] = draw_score(rng, gridded);
    const double alpha = draw_alpha(rng);

    const PredictionSet via_tau = predict_set("x", test, calibrate_mc(scores, alpha));
    const PredictionSet via_rho = predict_set_mc_pvalue("x", test, scores, alpha);
    REQUIRE(via_tau.classes == via_rho.classes);
  }
}
