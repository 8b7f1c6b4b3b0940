#include <doctest.h>

#include <cmath>

#include "ambicp/conformal.hpp"
#include "ambicp/extensions.hpp"
#include "ambicp/synthetic.hpp"

using namespace ambicp;

TEST_CASE("multilabel plausibilities split mass evenly") {
  const Plausibilities two = multilabel_plausibilities({2, 6}, 10);
  CHECK(two[2] == 0.5);
  CHECK(two[6] == 0.5);
  CHECK(two.probs().sum() == 1.0);

  const Plausibilities one = multilabel_plausibilities({3}, 5);
  CHECK(one[3] == 1.0);

  const Plausibilities full = multilabel_plausibilities({0, 1, 2}, 3);
  for (int k = 0; k < 3; ++k) CHECK(full[k] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  CHECK_THROWS_AS(multilabel_plausibilities({}, 4), EmptyLabelSet);
  CHECK_THROWS_AS(multilabel_plausibilities({5}, 4), LabelOutOfRange);
}

TEST_CASE("multilabel plausibilities are permutation equivariant") {
  const int K = 7;
  const std::vector<int> set = {1, 4, 6};
  // Relabel classes by the cycle k -> (k+2) mod K and compare.
  std::vector<int> shifted;
  for (int k : set) shifted.push_back((k + 2) % K);
  const Plausibilities base = multilabel_plausibilities(set, K);
  const Plausibilities moved = multilabel_plausibilities(shifted, K);
  for (int k = 0; k < K; ++k) CHECK(base[k] == moved[(k + 2) % K]);
}

TEST_CASE("duplicates in the label set collapse") {
  const Plausibilities p = multilabel_plausibilities({2, 2, 5}, 6);
  CHECK(p[2] == 0.5);
  CHECK(p[5] == 0.5);
}

namespace {

AugmentedBatch batch_of(std::string id, const Eigen::MatrixXd& rows) {
  return AugmentedBatch{std::move(id), rows};
}

}  // namespace

TEST_CASE("augmented p-values with one replicate reduce to plain p-values") {
  RandomStream rng(3, "aug-m1");
  const int n = 40, K = 3;
  std::vector<AugmentedBatch> calib;
  Eigen::VectorXi labels(n);
  Eigen::VectorXd calib_scores(n);
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd rows(1, K);
    for (int k = 0; k < K; ++k) rows(0, k) = rng.uniform();
    labels[i] = static_cast<int>(rng.uniform_int(K));
    calib_scores[i] = rows(0, labels[i]);
    calib.push_back(batch_of(std::to_string(i), rows));
  }
  Eigen::MatrixXd test_rows(1, K);
  for (int k = 0; k < K; ++k) test_rows(0, k) = rng.uniform();
  const AugmentedBatch test = batch_of("t", test_rows);

  const AugmentedCalibration cal(calib, labels);
  const Eigen::VectorXd rho = cal.p_values(test);
  for (int k = 0; k < K; ++k)
    CHECK(rho[k] == p_value(calib_scores, test_rows(0, k)));
  CHECK(augmented_mc_p_value(calib, labels, test, 1) == rho[1]);
}

TEST_CASE("identity augmentation replicates equal the single-replicate case") {
  RandomStream rng(5, "aug-id");
  const int n = 30, K = 4, m = 6;
  std::vector<AugmentedBatch> calib1, calibm;
  Eigen::VectorXi labels(n);
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd row(1, K);
    for (int k = 0; k < K; ++k) row(0, k) = rng.uniform();
    labels[i] = static_cast<int>(rng.uniform_int(K));
    calib1.push_back(batch_of(std::to_string(i), row));
    calibm.push_back(batch_of(std::to_string(i), row.replicate(m, 1)));
  }
  Eigen::MatrixXd test_row(1, K);
  for (int k = 0; k < K; ++k) test_row(0, k) = rng.uniform();

  const Eigen::VectorXd rho1 = AugmentedCalibration(calib1, labels).p_values(batch_of("t", test_row));
  const Eigen::VectorXd rhom =
      AugmentedCalibration(calibm, labels).p_values(batch_of("t", test_row.replicate(m, 1)));
  for (int k = 0; k < K; ++k) CHECK(rho1[k] == doctest::Approx(rhom[k]).epsilon(1e-15));
}

TEST_CASE("replicate counts must agree between calibration and test") {
  Eigen::MatrixXd two(2, 2), three(3, 2);
  two.setConstant(0.5);
  three.setConstant(0.5);
  std::vector<AugmentedBatch> calib = {batch_of("a", two), batch_of("b", two)};
  Eigen::VectorXi labels(2);
  labels << 0, 1;
  const AugmentedCalibration cal(calib, labels);
  CHECK_THROWS_AS(cal.p_values(batch_of("t", three)), ReplicateMismatch);
  std::vector<AugmentedBatch> bad = {batch_of("a", two), batch_of("b", three)};
  CHECK_THROWS_AS(AugmentedCalibration(bad, labels), ReplicateMismatch);
}

TEST_CASE("augmented rho_bar is the mean of the per-replicate p-values") {
  RandomStream rng(7, "aug-mean");
  const int n = 25, K = 3, m = 5;
  std::vector<AugmentedBatch> calib;
  Eigen::VectorXi labels(n);
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd rows(m, K);
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < K; ++k) rows(j, k) = rng.uniform();
    labels[i] = static_cast<int>(rng.uniform_int(K));
    calib.push_back(batch_of(std::to_string(i), rows));
  }
  Eigen::MatrixXd test_rows(m, K);
  for (int j = 0; j < m; ++j)
    for (int k = 0; k < K; ++k) test_rows(j, k) = rng.uniform();

  const Eigen::VectorXd rho = AugmentedCalibration(calib, labels).p_values(batch_of("t", test_rows));
  for (int k = 0; k < K; ++k) {
    double manual = 0.0;
    for (int j = 0; j < m; ++j) {
      Eigen::VectorXd refs(n);
      for (int i = 0; i < n; ++i) refs[i] = calib[static_cast<std::size_t>(i)].rows(j, labels[i]);
      manual += p_value(refs, test_rows(j, k));
    }
    manual /= m;
    CHECK(rho[k] == doctest::Approx(manual).epsilon(1e-15));
    CHECK(rho[k] >= 1.0 / (n + 1));
    CHECK(rho[k] <= 1.0);
  }
}

// With multi-label plausibilities, Monte Carlo CP targets marginal aggregated
// coverage only: some two-label examples end up with exactly one covered
// label.
TEST_CASE("multi-label sets may cover label sets partially") {
  RandomStream rng(13, "ml-partial");
  RandomStream data = rng.fork("data");
  const Eigen::Index n_cal = 400, n_test = 400;
  const ToyDataset ds = gen_toy(ambiguous_preset(n_cal + n_test), data);

  std::vector<std::vector<int>> sets_by_example(static_cast<std::size_t>(n_cal + n_test));
  Eigen::MatrixXd lambda(n_cal + n_test, 3);
  for (Eigen::Index i = 0; i < n_cal + n_test; ++i) {
    std::vector<int> label_set{ds.true_labels[i]};
    if (rng.uniform() < 0.5)
      label_set.push_back((ds.true_labels[i] + 1 + static_cast<int>(rng.uniform_int(2))) % 3);
    sets_by_example[static_cast<std::size_t>(i)] = label_set;
    lambda.row(i) = multilabel_plausibilities(label_set, 3).probs().transpose();
  }

  Eigen::MatrixXd rep(n_cal, 10);
  RandomStream labels_rng = rng.fork("labels");
  for (Eigen::Index i = 0; i < n_cal; ++i)
    for (Eigen::Index j = 0; j < 10; ++j)
      rep(i, j) = ds.posteriors(i, labels_rng.categorical(lambda.row(i)));
  const Threshold tau = calibrate_mc(rep, 0.1);

  int partially_covered = 0;
  for (Eigen::Index i = n_cal; i < n_cal + n_test; ++i) {
    const auto& label_set = sets_by_example[static_cast<std::size_t>(i)];
    if (label_set.size() < 2) continue;
    int covered = 0;
    for (int y : label_set) covered += ds.posteriors(i, y) >= tau.value ? 1 : 0;
    if (covered == 1) ++partially_covered;
  }
  CHECK(partially_covered > 0);
}

// Simulation oracle: calibrating with augmentations raises coverage on
// augmented inputs relative to original-only calibration.
TEST_CASE("augmented calibration improves coverage under input noise") {
  const double alpha = 0.1, sigma_aug = 0.75;
  const int n_cal = 300, n_test = 300, m = 10, trials = 25;
  const ToyConfig config = ambiguous_preset(n_cal + n_test);
  double base_cov = 0.0, aug_cov = 0.0;
  for (int t = 0; t < trials; ++t) {
    RandomStream trial(31, "aug-trial", static_cast<std::uint64_t>(t));
    RandomStream data = trial.fork("data");
    const ToyDataset ds = gen_toy(config, data);

    Eigen::VectorXd original(n_cal);
    for (int i = 0; i < n_cal; ++i) original[i] = ds.posteriors(i, ds.true_labels[i]);
    const Threshold tau = calibrate_split(original, alpha);

    std::vector<AugmentedBatch> calib;
    for (int i = 0; i < n_cal; ++i) {
      AugmentedBatch batch;
      batch.id = ds.ids[static_cast<std::size_t>(i)];
      batch.rows.resize(m, 3);
      batch.rows.row(0) = ds.posteriors.row(i);
      RandomStream stream = trial.fork("augment", batch.id);
      for (int j = 1; j < m; ++j)
        batch.rows.row(j) =
            bayes_posterior_vector(augment_input(ds.features.row(i).transpose(), sigma_aug, stream),
                                   config)
                .transpose();
      calib.push_back(std::move(batch));
    }
    const AugmentedCalibration cal(calib, ds.true_labels.head(n_cal));

    int base_hits = 0, aug_hits = 0;
    for (int i = n_cal; i < n_cal + n_test; ++i) {
      AugmentedBatch batch;
      batch.id = ds.ids[static_cast<std::size_t>(i)];
      batch.rows.resize(m, 3);
      batch.rows.row(0) = ds.posteriors.row(i);
      RandomStream stream = trial.fork("augment", batch.id);
      for (int j = 1; j < m; ++j)
        batch.rows.row(j) =
            bayes_posterior_vector(augment_input(ds.features.row(i).transpose(), sigma_aug, stream),
                                   config)
                .transpose();
      // Baseline: original calibration evaluated on an augmented input.
      base_hits += batch.rows(1, ds.true_labels[i]) >= tau.value ? 1 : 0;
      const Eigen::VectorXd rho = cal.p_values(batch);
      aug_hits += rho[ds.true_labels[i]] > alpha ? 1 : 0;
    }
    base_cov += static_cast<double>(base_hits) / n_test;
    aug_cov += static_cast<double>(aug_hits) / n_test;
  }
  base_cov /= trials;
  aug_cov /= trials;
  CHECK(base_cov < 1 - alpha - 0.02);
  CHECK(aug_cov > base_cov + 0.02);
  CHECK(aug_cov >= 1 - 2 * alpha);
}
