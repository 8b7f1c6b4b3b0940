#include "ambicp/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "ambicp/conformal.hpp"
#include "ambicp/extensions.hpp"
#include "ambicp/io.hpp"
#include "ambicp/sampling.hpp"

namespace ambicp {

namespace {

// One half of a calibration/test split, everything aligned by row.
struct Slice {
  std::vector<std::string> ids;
  Eigen::MatrixXd scores;
  Eigen::MatrixXd lambda;
  Eigen::VectorXi voted;
  std::optional<Eigen::VectorXi> true_labels;
  std::vector<AnnotationRecord> records;        // bootstrap mode only
  std::vector<AugmentedBatch> batches;          // augmented-mc only
};

struct LoadedFiles {
  std::vector<std::string> ids;
  Eigen::MatrixXd scores;
  Eigen::MatrixXd lambda;
  std::optional<Eigen::VectorXi> true_labels;
  std::vector<AnnotationRecord> records;
  std::vector<AugmentedBatch> batches;
};

double eval_p_value_sorted(const std::vector<double>& sorted, double score, Eigen::Index m) {
  const auto count = static_cast<double>(
      std::upper_bound(sorted.begin(), sorted.end(), score) - sorted.begin());
  const auto n_plus_1 =
      static_cast<double>(sorted.size()) / static_cast<double>(m) + 1.0;
  return (count + static_cast<double>(m)) / (static_cast<double>(m) * n_plus_1);
}

MetricSummary summarize(const std::vector<double>& values) {
  MetricSummary s;
  const auto n = static_cast<double>(values.size());
  for (double v : values) s.mean += v;
  s.mean /= n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

class ExperimentRunner {
 public:
  explicit ExperimentRunner(const ExperimentConfig& config) : config_(config) {
    validate_config(config_);
    if (config_.files) load_files();
  }

  ExperimentResult run() {
    ExperimentResult result;
    result.trials.resize(static_cast<std::size_t>(config_.trials));
    std::vector<std::vector<double>> p_values(static_cast<std::size_t>(config_.trials));

    const int threads = std::max(1, std::min<int>(config_.threads, config_.trials));
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&]() {
      for (;;) {
        const int t = next.fetch_add(1);
        if (t >= config_.trials) return;
        try {
          result.trials[static_cast<std::size_t>(t)] =
              run_trial(t, p_values[static_cast<std::size_t>(t)]);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          return;
        }
      }
    };

    if (threads == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      pool.reserve(static_cast<std::size_t>(threads));
      for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
      for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    for (auto& pv : p_values)
      result.p_values.insert(result.p_values.end(), pv.begin(), pv.end());
    result.num_classes = num_classes_;

    std::vector<double> voted, aggregated, true_cov, ineff;
    for (const auto& r : result.trials) {
      voted.push_back(r.voted_coverage);
      aggregated.push_back(r.aggregated_coverage);
      if (r.true_coverage) true_cov.push_back(*r.true_coverage);
      ineff.push_back(r.inefficiency);
    }
    result.summary.trials = config_.trials;
    result.summary.voted_coverage = summarize(voted);
    result.summary.aggregated_coverage = summarize(aggregated);
    result.summary.inefficiency = summarize(ineff);
    if (true_cov.size() == voted.size()) result.summary.true_coverage = summarize(true_cov);
    return result;
  }

 private:
  void load_files() {
    const FileSource& files = *config_.files;
    const ScoreTable scores = read_score_table(files.scores_path);
    const PlausibilityTable lambda = read_plausibilities(files.plausibilities_path);
    if (lambda.ids != scores.ids)
      throw IdMismatch("plausibility ids do not match score ids");
    loaded_.ids = scores.ids;
    loaded_.scores = scores.scores;
    loaded_.lambda = lambda.lambda;
    num_classes_ = loaded_.scores.cols();

    if (!files.labels_path.empty()) {
      const LabelTable labels = read_labels(files.labels_path);
      if (labels.ids != scores.ids) throw IdMismatch("label ids do not match score ids");
      loaded_.true_labels = labels.labels;
    }
    if (!files.annotations_path.empty()) {
      auto records = read_annotations(files.annotations_path);
      std::unordered_map<std::string, std::size_t> by_id;
      for (std::size_t i = 0; i < records.size(); ++i) by_id[records[i].id] = i;
      loaded_.records.reserve(loaded_.ids.size());
      for (const auto& id : loaded_.ids) {
        const auto it = by_id.find(id);
        if (it == by_id.end()) throw IdMismatch("no annotations for example " + id);
        loaded_.records.push_back(records[it->second]);
      }
    }
    if (!files.augmented_scores_path.empty()) {
      auto batches = read_augmented_scores(files.augmented_scores_path);
      std::unordered_map<std::string, std::size_t> by_id;
      for (std::size_t i = 0; i < batches.size(); ++i) by_id[batches[i].id] = i;
      loaded_.batches.reserve(loaded_.ids.size());
      for (const auto& id : loaded_.ids) {
        const auto it = by_id.find(id);
        if (it == by_id.end()) throw IdMismatch("no augmented scores for example " + id);
        loaded_.batches.push_back(batches[it->second]);
      }
    }
  }

  // Assembles the calibration/test slices for one trial.
  void make_slices(int trial, const RandomStream& trial_rng, Slice& calib, Slice& test) {
    if (config_.toy) {
      make_toy_slices(trial_rng, calib, test);
    } else {
      make_file_slices(trial_rng, calib, test);
    }
    (void)trial;
  }

  void make_toy_slices(const RandomStream& trial_rng, Slice& calib, Slice& test) {
    const ToySource& toy = *config_.toy;
    RandomStream data_rng = trial_rng.fork("data");
    const ToyDataset ds = gen_toy(toy.config, data_rng, config_.tie_break);
    num_classes_ = toy.config.num_classes;

    const Eigen::Index n = toy.config.n;
    const auto n_cal = static_cast<Eigen::Index>(
        std::floor(config_.calib_fraction * static_cast<double>(n)));
    if (n_cal < 1 || n - n_cal < 1)
      throw ConfigError("calib_fraction leaves an empty calibration or test split");

    const bool multilabel = config_.method == Method::MultilabelMc;
    Eigen::MatrixXd lambda = ds.posteriors;
    Eigen::VectorXi voted = ds.voted_labels;
    if (multilabel) {
      // Each example carries its true label plus, with configured probability,
      // one extra distinct label; plausibility mass is split evenly.
      lambda.setZero();
      const int K = toy.config.num_classes;
      for (Eigen::Index i = 0; i < n; ++i) {
        RandomStream stream = trial_rng.fork("label-sets", ds.ids[static_cast<std::size_t>(i)]);
        std::vector<int> set{ds.true_labels[i]};
        if (K > 1 && stream.uniform() < toy.second_label_prob) {
          const int offset = 1 + static_cast<int>(stream.uniform_int(static_cast<std::uint64_t>(K - 1)));
          set.push_back((ds.true_labels[i] + offset) % K);
        }
        const Plausibilities ml = multilabel_plausibilities(set, K);
        lambda.row(i) = ml.probs().transpose();
        voted[i] = vote(ml, TieBreak::LowestIndex);
      }
    } else if (config_.method == Method::AugmentedMc) {
      // Ground truth is unambiguous here; coverage targets the true labels.
      lambda.setZero();
      for (Eigen::Index i = 0; i < n; ++i) lambda(i, ds.true_labels[i]) = 1.0;
      voted = ds.true_labels;
    }

    auto fill = [&](Slice& slice, Eigen::Index begin, Eigen::Index count) {
      slice.ids.assign(ds.ids.begin() + begin, ds.ids.begin() + begin + count);
      slice.scores = ds.posteriors.middleRows(begin, count);
      slice.lambda = lambda.middleRows(begin, count);
      slice.voted = voted.segment(begin, count);
      slice.true_labels = ds.true_labels.segment(begin, count);
      if (config_.method == Method::AugmentedMc) {
        slice.batches.reserve(static_cast<std::size_t>(count));
        for (Eigen::Index i = begin; i < begin + count; ++i) {
          AugmentedBatch batch;
          batch.id = ds.ids[static_cast<std::size_t>(i)];
          batch.rows.resize(config_.m, toy.config.num_classes);
          batch.rows.row(0) = ds.posteriors.row(i);
          RandomStream stream = trial_rng.fork("augment", batch.id);
          for (Eigen::Index j = 1; j < config_.m; ++j) {
            const Eigen::VectorXd x =
                augment_input(ds.features.row(i).transpose(), toy.sigma_aug, stream);
            batch.rows.row(j) = bayes_posterior_vector(x, toy.config).transpose();
          }
          slice.batches.push_back(std::move(batch));
        }
      }
    };
    fill(calib, 0, n_cal);
    fill(test, n_cal, n - n_cal);
  }

  void make_file_slices(const RandomStream& trial_rng, Slice& calib, Slice& test) {
    const auto n = static_cast<Eigen::Index>(loaded_.ids.size());
    const auto n_cal = static_cast<Eigen::Index>(
        std::floor(config_.calib_fraction * static_cast<double>(n)));
    if (n_cal < 1 || n - n_cal < 1)
      throw ConfigError("calib_fraction leaves an empty calibration or test split");

    // Fisher-Yates with the trial's split stream.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    RandomStream split_rng = trial_rng.fork("split");
    for (Eigen::Index i = n - 1; i > 0; --i) {
      const auto j = static_cast<Eigen::Index>(
          split_rng.uniform_int(static_cast<std::uint64_t>(i + 1)));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }

    auto fill = [&](Slice& slice, Eigen::Index begin, Eigen::Index count) {
      slice.ids.reserve(static_cast<std::size_t>(count));
      slice.scores.resize(count, loaded_.scores.cols());
      slice.lambda.resize(count, loaded_.lambda.cols());
      slice.voted.resize(count);
      if (loaded_.true_labels) slice.true_labels = Eigen::VectorXi(count);
      for (Eigen::Index i = 0; i < count; ++i) {
        const Eigen::Index src = order[static_cast<std::size_t>(begin + i)];
        slice.ids.push_back(loaded_.ids[static_cast<std::size_t>(src)]);
        slice.scores.row(i) = loaded_.scores.row(src);
        slice.lambda.row(i) = loaded_.lambda.row(src);
        if (loaded_.true_labels) (*slice.true_labels)[i] = (*loaded_.true_labels)[src];
        if (!loaded_.records.empty())
          slice.records.push_back(loaded_.records[static_cast<std::size_t>(src)]);
        if (!loaded_.batches.empty())
          slice.batches.push_back(loaded_.batches[static_cast<std::size_t>(src)]);
      }
      for (Eigen::Index i = 0; i < count; ++i) {
        RandomStream tie_rng = trial_rng.fork("tie-break", slice.ids[static_cast<std::size_t>(i)]);
        slice.voted[i] =
            vote(validate_plausibilities(slice.lambda.row(i).transpose()), config_.tie_break,
                 config_.tie_break == TieBreak::Random ? &tie_rng : nullptr);
      }
    };
    fill(calib, 0, n_cal);
    fill(test, n_cal, n - n_cal);
  }

  TrialReport run_trial(int trial, std::vector<double>& p_values_out) {
    const RandomStream trial_rng(config_.master_seed, "trial",
                                 static_cast<std::uint64_t>(trial));
    Slice calib, test;
    make_slices(trial, trial_rng, calib, test);

    const Eigen::Index n_cal = calib.scores.rows();
    const Eigen::Index n_test = test.scores.rows();
    std::vector<PredictionSet> sets;
    sets.reserve(static_cast<std::size_t>(n_test));

    // Sorted reference scores for the optional p-value collection; m=1 for the
    // split methods, m columns for the Monte Carlo ones.
    std::vector<double> sorted_refs;
    Eigen::Index refs_m = 1;

    switch (config_.method) {
      case Method::SplitVoted:
      case Method::SplitTrue: {
        const bool use_true = config_.method == Method::SplitTrue;
        Eigen::VectorXd calib_scores(n_cal);
        for (Eigen::Index i = 0; i < n_cal; ++i) {
          const int label = use_true ? (*calib.true_labels)[i] : calib.voted[i];
          calib_scores[i] = calib.scores(i, label);
        }
        const Threshold tau = calibrate_split(calib_scores, config_.alpha);
        for (Eigen::Index i = 0; i < n_test; ++i)
          sets.push_back(
              predict_set(test.ids[static_cast<std::size_t>(i)], test.scores.row(i), tau));
        if (config_.collect_p_values) {
          sorted_refs.assign(calib_scores.data(), calib_scores.data() + n_cal);
          std::sort(sorted_refs.begin(), sorted_refs.end());
        }
        break;
      }
      case Method::Mc:
      case Method::MultilabelMc: {
        const ReplicatedLabels labels =
            config_.bootstrap
                ? expand_calibration_bootstrap(calib.records,
                                               static_cast<int>(num_classes_), config_.m,
                                               trial_rng)
                : expand_calibration(calib.ids, calib.lambda, config_.m, trial_rng);
        const Eigen::MatrixXd rep = replicate_scores(calib.scores, labels);
        const Threshold tau = calibrate_mc(rep, config_.alpha);
        for (Eigen::Index i = 0; i < n_test; ++i)
          sets.push_back(
              predict_set(test.ids[static_cast<std::size_t>(i)], test.scores.row(i), tau));
        if (config_.collect_p_values) {
          sorted_refs.assign(rep.data(), rep.data() + rep.size());
          std::sort(sorted_refs.begin(), sorted_refs.end());
          refs_m = config_.m;
        }
        break;
      }
      case Method::EcdfMc: {
        const auto l = static_cast<Eigen::Index>(
            std::floor(config_.l_fraction * static_cast<double>(n_cal)));
        const ScoreTable calib_table{calib.ids, calib.scores};
        const ScoreTable test_table{test.ids, test.scores};
        sets = ecdf_mc_predict(calib_table, calib.lambda, test_table, config_.alpha,
                               config_.delta, l, config_.m, trial_rng);
        break;
      }
      case Method::AugmentedMc: {
        const AugmentedCalibration cal(calib.batches, *calib.true_labels);
        for (Eigen::Index i = 0; i < n_test; ++i) {
          const auto& batch = test.batches[static_cast<std::size_t>(i)];
          PredictionSet set;
          set.id = batch.id;
          Eigen::VectorXd rho = cal.p_values(batch);
          for (Eigen::Index k = 0; k < rho.size(); ++k)
            if (rho[k] > config_.alpha) set.classes.push_back(static_cast<int>(k));
          set.p_values = std::move(rho);
          sets.push_back(std::move(set));
        }
        break;
      }
    }

    TrialReport report;
    report.trial = trial;
    report.voted_coverage = voted_coverage(sets, test.ids, test.voted);
    report.aggregated_coverage = aggregated_coverage(sets, test.ids, test.lambda);
    if (test.true_labels)
      report.true_coverage = voted_coverage(sets, test.ids, *test.true_labels);
    report.inefficiency = inefficiency(sets);

    if (config_.collect_p_values) {
      p_values_out.reserve(static_cast<std::size_t>(n_test));
      for (Eigen::Index i = 0; i < n_test; ++i) {
        const int label = test.true_labels ? (*test.true_labels)[i] : test.voted[i];
        const auto& set = sets[static_cast<std::size_t>(i)];
        if (set.p_values) {
          p_values_out.push_back((*set.p_values)[label]);
        } else {
          p_values_out.push_back(
              eval_p_value_sorted(sorted_refs, test.scores(i, label), refs_m));
        }
      }
    }
    return report;
  }

  ExperimentConfig config_;
  LoadedFiles loaded_;
  Eigen::Index num_classes_ = 0;
};

}  // namespace

Method method_from_string(const std::string& name) {
  if (name == "split-voted") return Method::SplitVoted;
  if (name == "split-true") return Method::SplitTrue;
  if (name == "mc") return Method::Mc;
  if (name == "ecdf-mc") return Method::EcdfMc;
  if (name == "multilabel-mc") return Method::MultilabelMc;
  if (name == "augmented-mc") return Method::AugmentedMc;
  throw ConfigError("unknown method '" + name + "'");
}

std::string method_to_string(Method method) {
  switch (method) {
    case Method::SplitVoted: return "split-voted";
    case Method::SplitTrue: return "split-true";
    case Method::Mc: return "mc";
    case Method::EcdfMc: return "ecdf-mc";
    case Method::MultilabelMc: return "multilabel-mc";
    case Method::AugmentedMc: return "augmented-mc";
  }
  throw ConfigError("unknown method enum value");
}

void validate_config(const ExperimentConfig& config) {
  if (!(config.alpha > 0.0 && config.alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");
  if (!(config.delta > 0.0 && config.delta < 1.0)) throw ConfigError("delta must lie in (0,1)");
  if (config.m < 1) throw ConfigError("m must be >= 1");
  if (!(config.l_fraction > 0.0 && config.l_fraction < 1.0))
    throw ConfigError("l_fraction must lie in (0,1)");
  if (!(config.calib_fraction > 0.0 && config.calib_fraction < 1.0))
    throw ConfigError("calib_fraction must lie in (0,1)");
  if (config.trials < 1) throw ConfigError("trials must be >= 1");
  if (config.threads < 1) throw ConfigError("threads must be >= 1");
  if (config.toy.has_value() == config.files.has_value())
    throw ConfigError("exactly one data source (toy or files) must be set");
  if (config.toy) validate_toy_config(config.toy->config);
  if (config.files && config.files->scores_path.empty())
    throw ConfigError("scores_path is required for file-backed experiments");
  if (config.files && config.files->plausibilities_path.empty())
    throw ConfigError("plausibilities_path is required for file-backed experiments");

  if (config.method == Method::SplitTrue && config.files && config.files->labels_path.empty())
    throw ConfigError("labels_path is required for method split-true");
  if (config.method == Method::MultilabelMc && !config.toy)
    throw ConfigError("multilabel-mc experiments need a toy source");
  if (config.method == Method::AugmentedMc && config.files &&
      (config.files->augmented_scores_path.empty() || config.files->labels_path.empty()))
    throw ConfigError("augmented-mc with files needs augmented_scores_path and labels_path");
  if (config.method == Method::AugmentedMc && config.toy && !(config.toy->sigma_aug > 0.0))
    throw ConfigError("sigma_aug must be positive");
  if (config.bootstrap) {
    if (config.method != Method::Mc) throw ConfigError("bootstrap applies to method mc only");
    if (!config.files || config.files->annotations_path.empty())
      throw ConfigError("bootstrap mode needs annotations_path");
  }
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  return ExperimentRunner(config).run();
}

void emit_report(const ExperimentResult& result, const std::string& out_dir,
                 const ReportOptions& options) {
  if (result.trials.empty()) throw EmptySample("no trial reports to emit");
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create directory " + out_dir);

  const auto path = [&](const std::string& name) { return (fs::path(out_dir) / name).string(); };
  write_trial_reports(path("trials.csv"), result.trials);

  {
    std::ofstream out(path("summary.txt"));
    if (!out) throw IoError("cannot open summary.txt for writing");
    const auto line = [&](const std::string& name, const MetricSummary& s) {
      out << name << " mean " << format_double(s.mean) << " std " << format_double(s.stddev)
          << '\n';
    };
    out << "trials " << result.summary.trials << '\n';
    line("voted_coverage", result.summary.voted_coverage);
    line("aggregated_coverage", result.summary.aggregated_coverage);
    if (result.summary.true_coverage) line("true_coverage", *result.summary.true_coverage);
    line("inefficiency", result.summary.inefficiency);
  }

  const auto emit_hist = [&](const std::string& name, const std::vector<double>& values,
                             double lo, double hi) {
    const Histogram hist = make_histogram(values, lo, hi, options.histogram_bins);
    write_histogram(path("hist_" + name + ".csv"), hist);
    if (options.svg) write_histogram_svg(path("hist_" + name + ".svg"), hist, name);
  };

  std::vector<double> voted, aggregated, true_cov, ineff;
  for (const auto& r : result.trials) {
    voted.push_back(r.voted_coverage);
    aggregated.push_back(r.aggregated_coverage);
    if (r.true_coverage) true_cov.push_back(*r.true_coverage);
    ineff.push_back(r.inefficiency);
  }
  emit_hist("voted_coverage", voted, 0.0, 1.0);
  emit_hist("aggregated_coverage", aggregated, 0.0, 1.0);
  if (!true_cov.empty()) emit_hist("true_coverage", true_cov, 0.0, 1.0);
  emit_hist("inefficiency", ineff, 0.0, static_cast<double>(result.num_classes));
  if (!result.p_values.empty()) emit_hist("p_values", result.p_values, 0.0, 1.0);
}

}  // namespace ambicp
