// Acceptance suite. Each criterion runs standalone and prints one pass/fail
// line; the binary exits nonzero if any criterion fails. Expected values
// marked "frozen" were fixed ahead of time from independent oracle runs
// (brute-force simulation at larger trial counts) and are not tuned to this
// implementation's output.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "ambicp/aggregation.hpp"
#include "ambicp/conformal.hpp"
#include "ambicp/experiment.hpp"
#include "ambicp/extensions.hpp"
#include "ambicp/metrics.hpp"
#include "ambicp/rng.hpp"
#include "ambicp/sampling.hpp"
#include "ambicp/synthetic.hpp"

using namespace ambicp;

namespace {

struct Check {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? " [ok]" : " [VIOLATED]");
  }
  void note(const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

// ---------------------------------------------------------------------------
// C1: threshold-form sets equal p-value-form sets, exactly.

Check criterion_1() {
  Check c;
  RandomStream rng(2024001, "acceptance-c1");
  int mismatches = 0;
  const int instances = 1000;
  for (int rep = 0; rep < instances; ++rep) {
    const Eigen::Index n = 5 + static_cast<Eigen::Index>(rng.uniform_int(496));
    const Eigen::Index K = 2 + static_cast<Eigen::Index>(rng.uniform_int(19));
    const double alpha = 0.01 + 0.98 * rng.uniform();
    Eigen::VectorXd calib(n);
    for (Eigen::Index i = 0; i < n; ++i) calib[i] = rng.uniform();
    Eigen::RowVectorXd test(K);
    for (Eigen::Index k = 0; k < K; ++k) test[k] = rng.uniform();
    const PredictionSet a = predict_set("x", test, calibrate_split(calib, alpha));
    const PredictionSet b = predict_set_pvalue("x", test, calib, alpha);
    if (a.classes != b.classes) ++mismatches;
  }
  c.require(mismatches == 0, std::to_string(instances) + " instances, " +
                                 std::to_string(mismatches) + " mismatches");
  return c;
}

// ---------------------------------------------------------------------------
// C2: averaged-p-value thresholding equals the Monte Carlo quantile set.

Check criterion_2() {
  Check c;
  RandomStream rng(2024002, "acceptance-c2");
  int mismatches = 0;
  const int instances = 1000;
  for (int rep = 0; rep < instances; ++rep) {
    const Eigen::Index n = 5 + static_cast<Eigen::Index>(rng.uniform_int(496));
    const Eigen::Index m = 1 + static_cast<Eigen::Index>(rng.uniform_int(20));
    const Eigen::Index K = 2 + static_cast<Eigen::Index>(rng.uniform_int(19));
    const double alpha = 0.01 + 0.98 * rng.uniform();
    Eigen::MatrixXd scores(n, m);
    for (Eigen::Index i = 0; i < n * m; ++i) scores.data()[i] = rng.uniform();
    Eigen::RowVectorXd test(K);
    for (Eigen::Index k = 0; k < K; ++k) test[k] = rng.uniform();
    const PredictionSet a = predict_set("x", test, calibrate_mc(scores, alpha));
    const PredictionSet b = predict_set_mc_pvalue("x", test, scores, alpha);
    if (a.classes != b.classes) ++mismatches;
  }
  c.require(mismatches == 0, std::to_string(instances) + " instances (m in [1,20]), " +
                                 std::to_string(mismatches) + " mismatches");
  return c;
}

// ---------------------------------------------------------------------------
// C3: split CP against true labels lands inside [1-a, 1-a+1/(n+1)].

Check criterion_3() {
  Check c;
  ExperimentConfig config;
  config.method = Method::SplitTrue;
  config.alpha = 0.05;
  config.trials = 1000;
  config.calib_fraction = 0.5;
  config.master_seed = 2024003;
  ToySource toy;
  toy.config = separated_preset(1000);  // 500 calibration / 500 test per trial
  config.toy = toy;
  const ExperimentResult result = run_experiment(config);
  const double mean_true = result.summary.true_coverage->mean;
  c.note("mean true coverage " + fmt(mean_true, 5));
  c.require(mean_true >= 0.95 - 0.005,
            "above 0.945 (band floor 0.95 minus tolerance)");
  c.require(mean_true <= 0.95 + 1.0 / 501.0 + 0.005,
            "below 0.95+1/501+0.005 = " + fmt(0.95 + 1.0 / 501.0 + 0.005, 5));
  return c;
}

// ---------------------------------------------------------------------------
// C4: voted-label calibration on the ambiguous preset undercovers by the
// pre-registered gap. Frozen oracle: split-voted aggregated coverage 0.69259
// at alpha=0.05, n_cal=n_test=500, r=1.0 (4000-trial brute-force run), giving
// g* = 0.95 - 0.69259 = 0.2574.

constexpr double kFrozenGap = 0.2574;

ExperimentResult run_voted_ambiguous(int trials) {
  ExperimentConfig config;
  config.method = Method::SplitVoted;
  config.alpha = 0.05;
  config.trials = trials;
  config.calib_fraction = 0.5;
  config.master_seed = 2024004;
  ToySource toy;
  toy.config = ambiguous_preset(1000);
  config.toy = toy;
  return run_experiment(config);
}

Check criterion_4() {
  Check c;
  const ExperimentResult result = run_voted_ambiguous(500);
  const double mean_true = result.summary.true_coverage->mean;
  const double gap_run = 0.95 - result.summary.aggregated_coverage.mean;
  c.note("frozen g*=" + fmt(kFrozenGap) + ", runtime mass-route gap " + fmt(gap_run));
  c.require(kFrozenGap > 0.02, "preset qualifies as ambiguous (g* > 0.02)");
  c.require(std::abs(mean_true - (0.95 - kFrozenGap)) <= 0.01,
            "true coverage " + fmt(mean_true) + " = 0.95 - g* +- 0.01");
  c.require(std::abs(gap_run - kFrozenGap) <= 0.01, "mass-route oracle agrees with frozen g*");
  return c;
}

// ---------------------------------------------------------------------------
// C5: Monte Carlo CP with m=10 closes the gap while the voted-label
// configuration stays below target.

Check criterion_5() {
  Check c;
  ExperimentConfig config;
  config.method = Method::Mc;
  config.alpha = 0.05;
  config.m = 10;
  config.trials = 500;
  config.calib_fraction = 0.5;
  config.master_seed = 2024005;
  ToySource toy;
  toy.config = ambiguous_preset(1000);
  config.toy = toy;
  const ExperimentResult mc = run_experiment(config);
  const double agg = mc.summary.aggregated_coverage.mean;
  c.require(std::abs(agg - 0.95) <= 0.01, "mc aggregated coverage " + fmt(agg) + " = 0.95 +- 0.01");

  const ExperimentResult voted = run_voted_ambiguous(500);
  const double voted_agg = voted.summary.aggregated_coverage.mean;
  c.require(voted_agg < 0.95 - 0.02,
            "voted-calibrated aggregated coverage " + fmt(voted_agg) + " stays below 0.93");
  return c;
}

// ---------------------------------------------------------------------------
// C6: the spread of aggregated coverage across pseudo-label resamplings at a
// fixed calibration/test split is nonincreasing in m.

Check criterion_6() {
  Check c;
  RandomStream rng(2024006, "acceptance-c6");
  RandomStream data_rng = rng.fork("data");
  const Eigen::Index n_cal = 100, n_test = 500;
  const ToyDataset ds = gen_toy(ambiguous_preset(n_cal + n_test), data_rng);
  std::vector<std::string> calib_ids(ds.ids.begin(), ds.ids.begin() + n_cal);
  const Eigen::MatrixXd calib_lambda = ds.posteriors.topRows(n_cal);
  const Eigen::MatrixXd calib_scores = ds.posteriors.topRows(n_cal);
  const Eigen::MatrixXd test_post = ds.posteriors.bottomRows(n_test);

  const std::vector<Eigen::Index> ms = {1, 3, 10, 50};
  std::vector<double> stds;
  for (const Eigen::Index m : ms) {
    std::vector<double> coverages;
    for (int r = 0; r < 200; ++r) {
      const RandomStream resample = rng.fork("labels", static_cast<std::uint64_t>(r));
      const ReplicatedLabels labels = expand_calibration(calib_ids, calib_lambda, m, resample);
      const Threshold tau = calibrate_mc(replicate_scores(calib_scores, labels), 0.05);
      double mass = 0.0;
      for (Eigen::Index i = 0; i < n_test; ++i)
        for (Eigen::Index k = 0; k < 3; ++k)
          if (tau.is_neg_inf() || test_post(i, k) >= tau.value) mass += test_post(i, k);
      coverages.push_back(mass / static_cast<double>(n_test));
    }
    double mean = 0.0;
    for (double v : coverages) mean += v;
    mean /= static_cast<double>(coverages.size());
    double ss = 0.0;
    for (double v : coverages) ss += (v - mean) * (v - mean);
    stds.push_back(std::sqrt(ss / (static_cast<double>(coverages.size()) - 1.0)));
  }
  std::string seq;
  for (std::size_t i = 0; i < ms.size(); ++i)
    seq += "m=" + std::to_string(ms[i]) + ":" + fmt(stds[i], 5) + (i + 1 < ms.size() ? " " : "");
  c.note(seq);
  for (std::size_t i = 0; i + 1 < stds.size(); ++i) {
    c.require(stds[i + 1] <= 1.10 * stds[i],
              "std(m=" + std::to_string(ms[i + 1]) + ") <= 1.1 std(m=" + std::to_string(ms[i]) +
                  ")");
  }
  return c;
}

// ---------------------------------------------------------------------------
// C7: averaged p-values from 10 independent uniforms duplicated to m=20
// dependent ones; the ECDF-corrected empirical level tracks the target within
// the DKW epsilon, and the upper-band correction stays super-uniform.

Check criterion_7() {
  Check c;
  RandomStream rng(2024007, "acceptance-c7");
  const int total = 10000;
  std::vector<double> rho_bar(total);
  for (int s = 0; s < total; ++s) {
    double values[20];
    for (int j = 0; j < 10; ++j) {
      values[j] = rng.uniform();
      values[j + 10] = values[j];  // duplication makes the 20 tests dependent
    }
    double sum = 0.0;
    for (double v : values) sum += v;
    rho_bar[static_cast<std::size_t>(s)] = sum / 20.0;
  }
  const std::vector<double> build(rho_bar.begin(), rho_bar.begin() + total / 2);
  const std::vector<double> eval(rho_bar.begin() + total / 2, rho_bar.end());
  const BandedCDF band = dkw_band(build_ecdf(build), 1e-4);
  c.note("epsilon " + fmt(band.epsilon, 5) + " at count " + std::to_string(total / 2));

  double worst_plain = 0.0, worst_upper = -1.0;
  for (int grid = 1; grid <= 99; ++grid) {
    const double alpha = grid / 100.0;
    long plain_hits = 0, upper_hits = 0;
    for (double r : eval) {
      if (band.base.evaluate(r) <= alpha) ++plain_hits;
      if (band.upper(r) <= alpha) ++upper_hits;
    }
    const double plain_level = static_cast<double>(plain_hits) / static_cast<double>(eval.size());
    const double upper_level = static_cast<double>(upper_hits) / static_cast<double>(eval.size());
    worst_plain = std::max(worst_plain, std::abs(plain_level - alpha));
    const double se = std::sqrt(alpha * (1 - alpha) / static_cast<double>(eval.size()));
    worst_upper = std::max(worst_upper, upper_level - (alpha + 3 * se));
  }
  c.require(worst_plain <= band.epsilon,
            "max |ECDF-corrected level - alpha| = " + fmt(worst_plain, 5) + " <= epsilon");
  c.require(worst_upper <= 0.0, "upper-band corrected levels stay super-uniform");
  return c;
}

// ---------------------------------------------------------------------------
// C8: ECDF Monte Carlo CP coverage against the (1-a)(1-d) guarantee. The
// calibration size keeps the DKW epsilon below the stated ceiling:
// eps = sqrt(log(2/1e-4)/(2*25000)) = 0.0141 and observed coverage sits near
// (1-a) + eps.

Check criterion_8() {
  Check c;
  const double alpha = 0.05, delta = 1e-4;
  ExperimentConfig config;
  config.method = Method::EcdfMc;
  config.alpha = alpha;
  config.delta = delta;
  config.m = 10;
  config.l_fraction = 0.5;
  config.trials = 500;
  config.master_seed = 2024008;
  ToySource toy;
  toy.config = ambiguous_preset(52000);
  config.toy = toy;
  config.calib_fraction = 50000.0 / 52000.0;  // 50000 calibration, l = 25000
  const ExperimentResult result = run_experiment(config);
  const double agg = result.summary.aggregated_coverage.mean;
  c.note("mean aggregated coverage " + fmt(agg, 5));
  c.require(agg >= (1 - alpha) * (1 - delta) - 0.01,
            "above (1-a)(1-d)-0.01 = " + fmt((1 - alpha) * (1 - delta) - 0.01, 5));
  c.require(agg <= 1 - alpha + 0.02, "below 1-a+0.02 = " + fmt(1 - alpha + 0.02, 5));
  return c;
}

// ---------------------------------------------------------------------------
// C9: super-uniformity of split p-values and the 2-alpha bound for averaged
// ones, over 1e5 simulated calibration/test pairs each.

Check criterion_9() {
  Check c;
  const int sims = 100000;
  RandomStream rng(2024009, "acceptance-c9");

  {  // split CP on exchangeable uniforms
    const int n = 99;
    std::vector<double> rho(sims);
    Eigen::VectorXd calib(n);
    for (int s = 0; s < sims; ++s) {
      for (int i = 0; i < n; ++i) calib[i] = rng.uniform();
      rho[static_cast<std::size_t>(s)] = p_value(calib, rng.uniform());
    }
    double worst = -1.0;
    for (int grid = 1; grid <= 19; ++grid) {
      const double alpha = grid * 0.05;
      long hits = 0;
      for (double r : rho) hits += r <= alpha ? 1 : 0;
      const double level = static_cast<double>(hits) / sims;
      const double se = std::sqrt(alpha * (1 - alpha) / sims);
      worst = std::max(worst, level - (alpha + 3 * se));
    }
    c.require(worst <= 0.0, "split p-values: P(rho <= a) <= a + 3SE on the grid");
  }

  {  // averaged p-values on toy data with sampled pseudo-labels
    const Eigen::Index n = 20, m = 5;
    const ToyConfig config = ambiguous_preset(n + 1);
    std::vector<double> rho(sims);
    for (int s = 0; s < sims; ++s) {
      RandomStream sim = rng.fork("sim", static_cast<std::uint64_t>(s));
      const ToyDataset ds = gen_toy(config, sim);
      Eigen::MatrixXd rep(n, m);
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
          const int label = sim.categorical(ds.posteriors.row(i));
          rep(i, j) = ds.posteriors(i, label);
        }
      }
      const int test_label = sim.categorical(ds.posteriors.row(n));
      rho[static_cast<std::size_t>(s)] = mc_p_value(rep, ds.posteriors(n, test_label));
    }
    double worst = -1.0;
    for (int grid = 1; grid <= 19; ++grid) {
      const double alpha = grid * 0.05;
      long hits = 0;
      for (double r : rho) hits += r <= alpha ? 1 : 0;
      const double level = static_cast<double>(hits) / sims;
      const double bound = std::min(1.0, 2 * alpha);
      const double se = std::sqrt(bound * (1 - bound) / sims + 1e-12);
      worst = std::max(worst, level - (bound + 3 * se));
    }
    c.require(worst <= 0.0, "averaged p-values: P(rho_bar <= a) <= 2a + 3SE on the grid");
  }
  return c;
}

// ---------------------------------------------------------------------------
// C10: multi-label Monte Carlo CP reaches the aggregated coverage target.

Check criterion_10() {
  Check c;
  ExperimentConfig config;
  config.method = Method::MultilabelMc;
  config.alpha = 0.1;
  config.m = 10;
  config.trials = 300;
  config.calib_fraction = 1.0 / 3.0;  // 500 calibration / 1000 test
  config.master_seed = 2024010;
  ToySource toy;
  toy.config = ambiguous_preset(1500);
  toy.second_label_prob = 0.5;  // each example carries 1-2 true labels
  config.toy = toy;
  const ExperimentResult result = run_experiment(config);
  const double agg = result.summary.aggregated_coverage.mean;
  c.note("mean aggregated coverage " + fmt(agg, 5));
  c.require(std::abs(agg - 0.9) <= 0.015, "within 0.90 +- 0.015");
  return c;
}

// ---------------------------------------------------------------------------
// C11: augmentation CP. sigma_aug = 0.5 was fixed by the oracle run so that
// original-only calibration undercovers augmented inputs by >= 0.03 at
// alpha = 0.1; the oracle is re-run here. The averaged-p-value procedure is
// then required to keep its 1-2a guarantee and to land within +-0.02 of 1-a.

Check criterion_11() {
  Check c;
  const double alpha = 0.1, sigma_aug = 0.5;

  {  // baseline oracle: split CP on originals, evaluated on augmented inputs
    RandomStream rng(2024011, "acceptance-c11-baseline");
    const Eigen::Index n_cal = 400, n_test = 400;
    const ToyConfig config = ambiguous_preset(n_cal + n_test);
    double coverage = 0.0;
    const int trials = 200, draws = 3;
    for (int t = 0; t < trials; ++t) {
      RandomStream trial = rng.fork("trial", static_cast<std::uint64_t>(t));
      RandomStream data = trial.fork("data");
      const ToyDataset ds = gen_toy(config, data);
      Eigen::VectorXd calib(n_cal);
      for (Eigen::Index i = 0; i < n_cal; ++i) calib[i] = ds.posteriors(i, ds.true_labels[i]);
      const Threshold tau = calibrate_split(calib, alpha);
      RandomStream noise = trial.fork("noise");
      int hits = 0;
      for (Eigen::Index i = n_cal; i < n_cal + n_test; ++i) {
        for (int d = 0; d < draws; ++d) {
          const Eigen::VectorXd x =
              augment_input(ds.features.row(i).transpose(), sigma_aug, noise);
          const Eigen::VectorXd post = bayes_posterior_vector(x, config);
          hits += post[ds.true_labels[i]] >= tau.value ? 1 : 0;
        }
      }
      coverage += static_cast<double>(hits) / static_cast<double>(n_test * draws);
    }
    coverage /= trials;
    const double gap = (1 - alpha) - coverage;
    c.note("baseline coverage on augmented inputs " + fmt(coverage) + " (gap " + fmt(gap) + ")");
    c.require(gap >= 0.03, "original-only calibration undercovers by >= 0.03");
  }

  {  // augmented Monte Carlo CP over input replicates
    ExperimentConfig config;
    config.method = Method::AugmentedMc;
    config.alpha = alpha;
    config.m = 10;
    config.trials = 300;
    config.calib_fraction = 0.5;
    config.master_seed = 2024012;
    ToySource toy;
    toy.config = ambiguous_preset(800);
    toy.sigma_aug = sigma_aug;
    config.toy = toy;
    const ExperimentResult result = run_experiment(config);
    const double cov = result.summary.true_coverage->mean;
    c.note("augmented-mc coverage w.r.t. the augmented joint " + fmt(cov, 4));
    c.require(cov >= 1 - 2 * alpha, "guarantee floor 1-2a = " + fmt(1 - 2 * alpha, 2));
    c.require(std::abs(cov - (1 - alpha)) <= 0.02, "within 0.02 of 1-a");
  }
  return c;
}

// ---------------------------------------------------------------------------
// C12: aggregation worked examples and the bootstrap mean oracle.

Check criterion_12() {
  Check c;
  {
    AnnotationRecord record;
    record.id = "w";
    record.payload = PartialRankings{{Ranking{{1}, {4, 6}}}};  // blocks {2},{5,7} 1-based
    const Plausibilities p = aggregate_partial_rankings(record, 10);
    const bool exact = std::abs(p[1] - 2.0 / 3.0) < 1e-15 &&
                       std::abs(p[4] - 1.0 / 6.0) < 1e-15 &&
                       std::abs(p[6] - 1.0 / 6.0) < 1e-15 && p[0] == 0.0 && p[9] == 0.0;
    c.require(exact, "inverse-rank worked example (2/3, 1/6, 1/6)");
  }
  {
    AnnotationRecord record;
    record.id = "s";
    record.payload = SingleLabels{{0, 0, 1, 2}};
    const Plausibilities p = aggregate_single_labels(record, 3);
    c.require(p[0] == 0.5 && p[1] == 0.25 && p[2] == 0.25, "single-label counting (labels 1,1,2,3)");
    AnnotationRecord unanimous;
    unanimous.id = "u";
    unanimous.payload = SingleLabels{{1, 1, 1}};
    const Plausibilities q = aggregate_single_labels(unanimous, 4);
    c.require(q[1] == 1.0 && q[0] == 0.0 && q[2] == 0.0 && q[3] == 0.0,
              "unanimous one-hot (labels 2,2,2)");
  }
  {
    AnnotationRecord record;
    record.id = "b";
    record.payload = SingleLabels{{0, 0, 1, 2}};
    RandomStream rng(2024013, "acceptance-c12");
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    const int draws = 10000;
    for (int i = 0; i < draws; ++i)
      mean += bootstrap_aggregate(record, 3, SingleLabelFrequency{}, rng).probs();
    mean /= draws;
    const bool close = std::abs(mean[0] - 0.5) < 0.02 && std::abs(mean[1] - 0.25) < 0.02 &&
                       std::abs(mean[2] - 0.25) < 0.02;
    c.require(close, "bootstrap mean within 0.02 of (0.5, 0.25, 0.25)");
  }
  return c;
}

struct Criterion {
  const char* name;
  std::function<Check()> run;
  double budget_seconds;  // 0 = no stated budget
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"C01 equivalence of threshold and p-value sets", criterion_1, 10.0},
      {"C02 equivalence of averaged p-values and MC quantile", criterion_2, 30.0},
      {"C03 split-CP coverage band on separated preset", criterion_3, 60.0},
      {"C04 coverage gap under voted-label calibration", criterion_4, 0.0},
      {"C05 Monte Carlo CP closes the gap (m=10)", criterion_5, 0.0},
      {"C06 coverage variance nonincreasing in m", criterion_6, 0.0},
      {"C07 ECDF correction of dependent averaged p-values", criterion_7, 30.0},
      {"C08 ECDF Monte Carlo CP coverage window", criterion_8, 0.0},
      {"C09 p-value super-uniformity (1a and 2a bounds)", criterion_9, 0.0},
      {"C10 multi-label aggregated coverage", criterion_10, 0.0},
      {"C11 augmentation CP", criterion_11, 0.0},
      {"C12 aggregation worked examples", criterion_12, 0.0},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Check check;
    try {
      check = criterion.run();
    } catch (const std::exception& e) {
      check.pass = false;
      check.detail = std::string("exception: ") + e.what();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (criterion.budget_seconds > 0.0 && seconds > criterion.budget_seconds) {
      check.pass = false;
      check.detail += "; exceeded " + fmt(criterion.budget_seconds, 0) + " s budget";
    }
    failures += check.pass ? 0 : 1;
    std::printf("[%s] %s: %s (%.2f s)\n", check.pass ? "PASS" : "FAIL", criterion.name,
                check.detail.c_str(), seconds);
    std::fflush(stdout);
  }
  if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
  return failures > 0 ? 1 : 0;
}
