// Command-line surface: toy data generation, annotation aggregation,
// conformal calibration/prediction, evaluation, and the seeded multi-trial
// experiment runner.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "ambicp/aggregation.hpp"
#include "ambicp/conformal.hpp"
#include "ambicp/experiment.hpp"
#include "ambicp/extensions.hpp"
#include "ambicp/io.hpp"
#include "ambicp/metrics.hpp"
#include "ambicp/sampling.hpp"
#include "ambicp/synthetic.hpp"

namespace {

using namespace ambicp;

TieBreak parse_tie(const std::string& name) {
  if (name == "lowest") return TieBreak::LowestIndex;
  if (name == "random") return TieBreak::Random;
  throw ConfigError("tie-break must be 'lowest' or 'random'");
}

ToyConfig preset_config(const std::string& preset, double circumradius, Eigen::Index n) {
  if (!preset.empty()) {
    if (preset == "ambiguous") return ambiguous_preset(n);
    if (preset == "separated") return separated_preset(n);
    throw ConfigError("preset must be 'ambiguous' or 'separated'");
  }
  return toy_preset(circumradius, n);
}

int cmd_gen_toy(const std::string& preset, double circumradius, Eigen::Index n,
                std::uint64_t seed, const std::string& tie, const std::string& out_dir,
                double sigma_aug, Eigen::Index replicates) {
  const ToyConfig config = preset_config(preset, circumradius, n);
  RandomStream rng(seed, "data");
  const TieBreak tie_break = parse_tie(tie);
  const ToyDataset ds = gen_toy(config, rng, tie_break);

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create directory " + out_dir);
  const auto path = [&](const char* name) { return (fs::path(out_dir) / name).string(); };

  write_score_table(path("scores.csv"), ScoreTable{ds.ids, ds.posteriors});
  write_plausibilities(path("plausibilities.csv"), ds.ids, ds.posteriors);
  write_labels(path("true_labels.csv"), ds.ids, ds.true_labels);
  write_labels(path("voted_labels.csv"), ds.ids, ds.voted_labels);

  if (replicates > 1) {
    RandomStream aug_root(seed, "augment");
    std::vector<AugmentedBatch> batches;
    batches.reserve(ds.ids.size());
    for (Eigen::Index i = 0; i < config.n; ++i) {
      AugmentedBatch batch;
      batch.id = ds.ids[static_cast<std::size_t>(i)];
      batch.rows.resize(replicates, config.num_classes);
      batch.rows.row(0) = ds.posteriors.row(i);
      RandomStream stream = aug_root.fork("example", batch.id);
      for (Eigen::Index j = 1; j < replicates; ++j) {
        const Eigen::VectorXd x =
            augment_input(ds.features.row(i).transpose(), sigma_aug, stream);
        batch.rows.row(j) = bayes_posterior_vector(x, config).transpose();
      }
      batches.push_back(std::move(batch));
    }
    write_augmented_scores(path("augmented_scores.csv"), batches);
  }
  std::cout << "wrote toy dataset (" << n << " examples) to " << out_dir << "\n";
  return 0;
}

int cmd_aggregate(const std::string& annotations_path, int num_classes,
                  const std::string& out_path, bool bootstrap, std::uint64_t seed,
                  const std::string& votes_out, const std::string& tie) {
  const auto records = read_annotations(annotations_path);
  if (records.empty()) throw EmptyAnnotations("no annotation records in " + annotations_path);

  std::vector<std::string> ids;
  Eigen::MatrixXd lambda(static_cast<Eigen::Index>(records.size()), num_classes);
  RandomStream root(seed, "bootstrap-aggregate");
  for (std::size_t i = 0; i < records.size(); ++i) {
    Plausibilities p = [&] {
      if (!bootstrap) return aggregate(records[i], num_classes);
      RandomStream stream = root.fork("record", records[i].id);
      const AggregationProcedure procedure =
          std::holds_alternative<SingleLabels>(records[i].payload)
              ? AggregationProcedure{SingleLabelFrequency{}}
              : AggregationProcedure{InverseRankNormalization{}};
      return bootstrap_aggregate(records[i], num_classes, procedure, stream);
    }();
    ids.push_back(records[i].id);
    lambda.row(static_cast<Eigen::Index>(i)) = p.probs().transpose();
  }
  write_plausibilities(out_path, ids, lambda);

  if (!votes_out.empty()) {
    const TieBreak tie_break = parse_tie(tie);
    RandomStream tie_root(seed, "tie-break");
    Eigen::VectorXi votes(lambda.rows());
    for (Eigen::Index i = 0; i < lambda.rows(); ++i) {
      RandomStream stream = tie_root.fork("example", ids[static_cast<std::size_t>(i)]);
      votes[i] = vote(validate_plausibilities(lambda.row(i).transpose()), tie_break,
                      tie_break == TieBreak::Random ? &stream : nullptr);
    }
    write_labels(votes_out, ids, votes);
  }
  std::cout << "aggregated " << records.size() << " records -> " << out_path << "\n";
  return 0;
}

int cmd_calibrate(const std::string& scores_path, const std::string& labels_path,
                  const std::string& plausibilities_path, const std::string& method,
                  double alpha, double delta, Eigen::Index m, double l_fraction,
                  std::uint64_t seed, const std::string& out_path) {
  const ScoreTable scores = read_score_table(scores_path);
  CalibrationArtifact artifact;
  artifact.method = method;
  artifact.alpha = alpha;
  artifact.m = m;

  if (method == "split") {
    if (labels_path.empty()) throw ConfigError("split calibration needs --labels");
    const LabelTable labels = read_labels(labels_path);
    if (labels.ids != scores.ids) throw IdMismatch("label ids do not match score ids");
    Eigen::VectorXd calib_scores(scores.num_examples());
    for (Eigen::Index i = 0; i < scores.num_examples(); ++i) {
      if (labels.labels[i] >= scores.num_classes())
        throw LabelOutOfRange("label of " + scores.ids[static_cast<std::size_t>(i)] +
                              " exceeds class count");
      calib_scores[i] = scores.scores(i, labels.labels[i]);
    }
    artifact.m = 1;
    artifact.threshold = calibrate_split(calib_scores, alpha);
  } else if (method == "mc" || method == "ecdf-mc") {
    if (plausibilities_path.empty())
      throw ConfigError(method + " calibration needs --plausibilities");
    const PlausibilityTable lambda = read_plausibilities(plausibilities_path);
    if (lambda.ids != scores.ids) throw IdMismatch("plausibility ids do not match score ids");
    RandomStream rng(seed, "calibrate");
    if (method == "mc") {
      const ReplicatedLabels labels = expand_calibration(scores.ids, lambda.lambda, m, rng);
      artifact.threshold = calibrate_mc(replicate_scores(scores.scores, labels), alpha);
    } else {
      const auto l = static_cast<Eigen::Index>(
          std::floor(l_fraction * static_cast<double>(scores.num_examples())));
      artifact.ecdf = calibrate_ecdf_mc(scores, lambda.lambda, delta, l, m, rng);
    }
  } else {
    throw ConfigError("method must be split, mc or ecdf-mc");
  }
  write_artifact(out_path, artifact);
  std::cout << "calibrated (" << method << ", alpha=" << alpha << ") -> " << out_path << "\n";
  return 0;
}

int cmd_predict(const std::string& scores_path, const std::string& artifact_path,
                const std::string& out_path) {
  const ScoreTable scores = read_score_table(scores_path);
  const CalibrationArtifact artifact = read_artifact(artifact_path);
  std::vector<PredictionSet> sets;
  if (artifact.threshold) {
    sets.reserve(static_cast<std::size_t>(scores.num_examples()));
    for (Eigen::Index i = 0; i < scores.num_examples(); ++i)
      sets.push_back(predict_set(scores.ids[static_cast<std::size_t>(i)], scores.scores.row(i),
                                 *artifact.threshold));
  } else {
    sets = predict_ecdf_mc(*artifact.ecdf, scores, artifact.alpha);
  }
  write_prediction_sets(out_path, sets);
  std::cout << "predicted " << sets.size() << " sets -> " << out_path << "\n";
  return 0;
}

int cmd_evaluate(const std::string& sets_path, const std::string& plausibilities_path,
                 const std::string& voted_path, const std::string& true_path, bool tie_aware,
                 const std::string& out_path, const std::string& profile_path) {
  const auto sets = read_prediction_sets(sets_path);
  const PlausibilityTable lambda = read_plausibilities(plausibilities_path);

  Eigen::VectorXi voted(lambda.lambda.rows());
  if (!voted_path.empty()) {
    const LabelTable table = read_labels(voted_path);
    if (table.ids != lambda.ids) throw IdMismatch("voted-label ids do not match plausibilities");
    voted = table.labels;
  } else {
    for (Eigen::Index i = 0; i < lambda.lambda.rows(); ++i)
      voted[i] = vote(validate_plausibilities(lambda.lambda.row(i).transpose()));
  }

  std::ofstream out(out_path);
  if (!out) throw IoError("cannot open " + out_path + " for writing");
  out << "examples " << sets.size() << '\n';
  out << "voted_coverage " << format_double(voted_coverage(sets, lambda.ids, voted)) << '\n';
  if (tie_aware)
    out << "voted_coverage_tied "
        << format_double(voted_coverage_tied(sets, lambda.ids, lambda.lambda)) << '\n';
  out << "aggregated_coverage "
      << format_double(aggregated_coverage(sets, lambda.ids, lambda.lambda)) << '\n';
  if (!true_path.empty()) {
    const LabelTable table = read_labels(true_path);
    if (table.ids != lambda.ids) throw IdMismatch("true-label ids do not match plausibilities");
    out << "true_coverage " << format_double(voted_coverage(sets, lambda.ids, table.labels))
        << '\n';
  }
  out << "inefficiency " << format_double(inefficiency(sets)) << '\n';

  if (!profile_path.empty()) {
    const CoverageProfile profile = coverage_profile(sets, lambda.ids, voted, lambda.lambda);
    std::ofstream pout(profile_path);
    if (!pout) throw IoError("cannot open " + profile_path + " for writing");
    pout << "rank,voted,aggregated,max_plausibility\n";
    for (Eigen::Index i = 0; i < profile.voted_curve.size(); ++i)
      pout << i << ',' << format_double(profile.voted_curve[i]) << ','
           << format_double(profile.aggregated_curve[i]) << ','
           << format_double(profile.max_plausibility[i]) << '\n';
  }
  std::cout << "evaluation written to " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conformal prediction under ambiguous ground truth"};
  app.require_subcommand(1);

  // gen-toy
  std::string preset, tie = "lowest", out_dir = ".";
  double circumradius = 1.0, sigma_aug = 0.5;
  Eigen::Index n = 1000, replicates = 1;
  std::uint64_t seed = 0;
  auto* gen = app.add_subcommand("gen-toy", "Generate the Gaussian-mixture toy dataset");
  gen->add_option("--preset", preset, "ambiguous | separated");
  gen->add_option("--circumradius", circumradius, "custom mean circumradius");
  gen->add_option("--n", n, "number of examples")->check(CLI::PositiveNumber);
  gen->add_option("--seed", seed, "master seed");
  gen->add_option("--tie-break", tie, "lowest | random");
  gen->add_option("--out-dir", out_dir, "output directory")->required();
  gen->add_option("--sigma-aug", sigma_aug, "augmentation noise scale");
  gen->add_option("--replicates", replicates, "augmented replicates per example (incl. original)");

  // aggregate
  std::string annotations_path, agg_out, votes_out;
  int num_classes = 0;
  bool bootstrap = false;
  auto* agg = app.add_subcommand("aggregate", "Aggregate expert annotations into plausibilities");
  agg->add_option("--annotations", annotations_path, "annotations JSONL")->required();
  agg->add_option("--classes", num_classes, "class count K")->required()->check(CLI::PositiveNumber);
  agg->add_option("--out", agg_out, "output plausibilities CSV")->required();
  agg->add_flag("--bootstrap", bootstrap, "resample annotation entries with replacement");
  agg->add_option("--seed", seed, "master seed");
  agg->add_option("--votes-out", votes_out, "also write voted labels CSV");
  agg->add_option("--tie-break", tie, "lowest | random");

  // calibrate
  std::string scores_path, labels_path, plaus_path, method = "split", artifact_out;
  double alpha = 0.05, delta = 1e-4, l_fraction = 0.5;
  Eigen::Index m = 10;
  auto* cal = app.add_subcommand("calibrate", "Calibrate a conformal predictor");
  cal->add_option("--scores", scores_path, "calibration scores CSV")->required();
  cal->add_option("--labels", labels_path, "calibration labels CSV (split)");
  cal->add_option("--plausibilities", plaus_path, "plausibilities CSV (mc, ecdf-mc)");
  cal->add_option("--method", method, "split | mc | ecdf-mc");
  cal->add_option("--alpha", alpha, "miscoverage level");
  cal->add_option("--delta", delta, "ECDF band level (ecdf-mc)");
  cal->add_option("--m", m, "pseudo-labels per example");
  cal->add_option("--l-fraction", l_fraction, "first-split fraction (ecdf-mc)");
  cal->add_option("--seed", seed, "master seed");
  cal->add_option("--out", artifact_out, "output artifact JSON")->required();

  // predict
  std::string artifact_path, sets_out;
  auto* pre = app.add_subcommand("predict", "Build prediction sets from an artifact");
  pre->add_option("--scores", scores_path, "test scores CSV")->required();
  pre->add_option("--artifact", artifact_path, "calibration artifact JSON")->required();
  pre->add_option("--out", sets_out, "output prediction sets JSONL")->required();

  // evaluate
  std::string sets_path, voted_path, true_path, eval_out, profile_path;
  bool tie_aware = false;
  auto* eva = app.add_subcommand("evaluate", "Coverage and inefficiency of prediction sets");
  eva->add_option("--sets", sets_path, "prediction sets JSONL")->required();
  eva->add_option("--plausibilities", plaus_path, "plausibilities CSV")->required();
  eva->add_option("--voted-labels", voted_path, "voted labels CSV (default: argmax)");
  eva->add_option("--true-labels", true_path, "true labels CSV");
  eva->add_flag("--tie-aware", tie_aware, "also report tie-aware voted coverage");
  eva->add_option("--out", eval_out, "output report")->required();
  eva->add_option("--profile", profile_path, "per-example coverage profile CSV");

  // experiment
  std::string exp_method = "mc", toy_preset_name, exp_out_dir;
  std::string exp_scores, exp_plaus, exp_labels, exp_annotations, exp_augmented;
  double calib_fraction = 0.5, second_label_prob = 0.5;
  int trials = 100, threads = 1, bins = 50;
  bool svg = false, emit_p_values = false;
  auto* exp = app.add_subcommand("experiment", "Seeded multi-trial coverage experiment");
  exp->add_option("--method", exp_method,
                  "split-voted | split-true | mc | ecdf-mc | multilabel-mc | augmented-mc");
  exp->add_option("--alpha", alpha, "miscoverage level");
  exp->add_option("--delta", delta, "ECDF band level (ecdf-mc)");
  exp->add_option("--m", m, "pseudo-labels / replicates per example");
  exp->add_option("--l-fraction", l_fraction, "first-split fraction (ecdf-mc)");
  exp->add_option("--calib-fraction", calib_fraction, "calibration fraction per trial");
  exp->add_option("--trials", trials, "number of trials");
  exp->add_option("--seed", seed, "master seed");
  exp->add_option("--tie-break", tie, "lowest | random");
  exp->add_flag("--bootstrap", bootstrap, "plausibility-resampling mc variant");
  exp->add_option("--toy-preset", toy_preset_name, "ambiguous | separated");
  exp->add_option("--circumradius", circumradius, "custom toy circumradius");
  exp->add_option("--n", n, "toy examples per trial");
  exp->add_option("--sigma-aug", sigma_aug, "augmentation noise scale (augmented-mc)");
  exp->add_option("--second-label-prob", second_label_prob,
                  "chance of a second label (multilabel-mc)");
  exp->add_option("--scores", exp_scores, "scores CSV (file source)");
  exp->add_option("--plausibilities", exp_plaus, "plausibilities CSV (file source)");
  exp->add_option("--labels", exp_labels, "true labels CSV (file source)");
  exp->add_option("--annotations", exp_annotations, "annotations JSONL (bootstrap)");
  exp->add_option("--augmented-scores", exp_augmented, "augmented scores CSV (augmented-mc)");
  exp->add_option("--threads", threads, "worker threads");
  exp->add_option("--bins", bins, "histogram bins");
  exp->add_flag("--svg", svg, "also write SVG histograms");
  exp->add_flag("--emit-p-values", emit_p_values, "collect evaluation-label p-values");
  exp->add_option("--out-dir", exp_out_dir, "report directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed())
      return cmd_gen_toy(preset, circumradius, n, seed, tie, out_dir, sigma_aug, replicates);
    if (agg->parsed())
      return cmd_aggregate(annotations_path, num_classes, agg_out, bootstrap, seed, votes_out,
                           tie);
    if (cal->parsed())
      return cmd_calibrate(scores_path, labels_path, plaus_path, method, alpha, delta, m,
                           l_fraction, seed, artifact_out);
    if (pre->parsed()) return cmd_predict(scores_path, artifact_path, sets_out);
    if (eva->parsed())
      return cmd_evaluate(sets_path, plaus_path, voted_path, true_path, tie_aware, eval_out,
                          profile_path);
    if (exp->parsed()) {
      ExperimentConfig config;
      config.method = method_from_string(exp_method);
      config.alpha = alpha;
      config.delta = delta;
      config.m = m;
      config.l_fraction = l_fraction;
      config.calib_fraction = calib_fraction;
      config.trials = trials;
      config.master_seed = seed;
      config.tie_break = parse_tie(tie);
      config.bootstrap = bootstrap;
      config.threads = threads;
      config.collect_p_values = emit_p_values;
      if (!exp_scores.empty() || !exp_plaus.empty()) {
        FileSource files;
        files.scores_path = exp_scores;
        files.plausibilities_path = exp_plaus;
        files.labels_path = exp_labels;
        files.annotations_path = exp_annotations;
        files.augmented_scores_path = exp_augmented;
        config.files = std::move(files);
      } else {
        ToySource toy;
        toy.config = preset_config(toy_preset_name, circumradius, n);
        toy.sigma_aug = sigma_aug;
        toy.second_label_prob = second_label_prob;
        config.toy = std::move(toy);
      }
      const ExperimentResult result = run_experiment(config);
      ReportOptions options;
      options.histogram_bins = bins;
      options.svg = svg;
      emit_report(result, exp_out_dir, options);
      std::cout << "method " << method_to_string(config.method) << ", " << trials
                << " trials -> " << exp_out_dir << "\n"
                << "aggregated_coverage mean " << format_double(result.summary.aggregated_coverage.mean)
                << " std " << format_double(result.summary.aggregated_coverage.stddev) << "\n";
      return 0;
    }
  } catch (const ambicp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
