// Seeded multi-trial experiment runner. Every trial draws its randomness from
// a stream derived as (master_seed, "trial", index), so results are a pure
// function of (input files, config) regardless of thread scheduling.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ambicp/aggregation.hpp"
#include "ambicp/metrics.hpp"
#include "ambicp/synthetic.hpp"
#include "ambicp/types.hpp"

namespace ambicp {

enum class Method { SplitVoted, SplitTrue, Mc, EcdfMc, MultilabelMc, AugmentedMc };

Method method_from_string(const std::string& name);
std::string method_to_string(Method method);

// Synthetic data source: a fresh dataset of config.n examples is generated
// per trial and split by calib_fraction.
struct ToySource {
  ToyConfig config;
  double sigma_aug = 0.5;         // augmented-mc noise scale
  double second_label_prob = 0.5; // multilabel-mc: chance of a second label
};

// File-backed source: loaded once, randomly re-split per trial.
struct FileSource {
  std::string scores_path;
  std::string plausibilities_path;
  std::string labels_path;            // optional; enables true coverage and split-true
  std::string annotations_path;       // optional; required for bootstrap mode
  std::string augmented_scores_path;  // optional; required for augmented-mc
};

struct ExperimentConfig {
  Method method = Method::Mc;
  double alpha = 0.05;
  double delta = 1e-4;   // ecdf-mc only
  Eigen::Index m = 10;
  double l_fraction = 0.5;  // ecdf-mc only
  double calib_fraction = 0.5;
  int trials = 1;
  std::uint64_t master_seed = 0;
  TieBreak tie_break = TieBreak::LowestIndex;
  bool bootstrap = false;  // plausibility-resampling variant of mc
  int threads = 1;
  bool collect_p_values = false;  // evaluation-label p-values, histogram analog
  std::optional<ToySource> toy;
  std::optional<FileSource> files;
};

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;
};

struct ExperimentSummary {
  int trials = 0;
  MetricSummary voted_coverage;
  MetricSummary aggregated_coverage;
  std::optional<MetricSummary> true_coverage;
  MetricSummary inefficiency;
};

struct ExperimentResult {
  std::vector<TrialReport> trials;
  ExperimentSummary summary;
  std::vector<double> p_values;  // filled when collect_p_values is set
  Eigen::Index num_classes = 0;
};

// Throws ConfigError naming the offending field.
void validate_config(const ExperimentConfig& config);

ExperimentResult run_experiment(const ExperimentConfig& config);

struct ReportOptions {
  int histogram_bins = 50;
  bool svg = false;
};

// Writes trials.csv, summary.txt and per-metric histogram CSVs (plus SVG bar
// charts when requested) into out_dir.
void emit_report(const ExperimentResult& result, const std::string& out_dir,
                 const ReportOptions& options = {});

}  // namespace ambicp
