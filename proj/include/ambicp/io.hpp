// File formats. All CSV files carry a mandatory header row; class indices are
// 1-based on disk and converted here. Floats are written in decimal with 12
// significant digits, locale-independent.
//
//   scores:          id,s_1,...,s_K
//   plausibilities:  id,p_1,...,p_K        (rows validated onto the simplex)
//   labels:          id,label
//   augmented:       id,replicate,s_1,...,s_K   (replicate 1 = original)
//   annotations:     JSON lines {"id":..,"type":"single","labels":[..]} or
//                    {"id":..,"type":"ranking","rankings":[[[2],[5,7]],..]}
//   prediction sets: JSON lines {"id":..,"classes":[..],"p_values":[..]?}
//   artifacts:       one JSON object (threshold or reference scores + band)
#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "ambicp/conformal.hpp"
#include "ambicp/extensions.hpp"
#include "ambicp/metrics.hpp"
#include "ambicp/types.hpp"

namespace ambicp {

std::string format_double(double value);

ScoreTable read_score_table(const std::string& path);
void write_score_table(const std::string& path, const ScoreTable& table,
                       const std::string& column_prefix = "s");

struct PlausibilityTable {
  std::vector<std::string> ids;
  Eigen::MatrixXd lambda;  // n x K
};

PlausibilityTable read_plausibilities(const std::string& path);
void write_plausibilities(const std::string& path, const std::vector<std::string>& ids,
                          const Eigen::Ref<const Eigen::MatrixXd>& lambda);

struct LabelTable {
  std::vector<std::string> ids;
  Eigen::VectorXi labels;  // 0-based in memory
};

LabelTable read_labels(const std::string& path);
void write_labels(const std::string& path, const std::vector<std::string>& ids,
                  const Eigen::Ref<const Eigen::VectorXi>& labels);

std::vector<AnnotationRecord> read_annotations(const std::string& path);
void write_annotations(const std::string& path, const std::vector<AnnotationRecord>& records);

std::vector<PredictionSet> read_prediction_sets(const std::string& path);
void write_prediction_sets(const std::string& path, const std::vector<PredictionSet>& sets);

std::vector<AugmentedBatch> read_augmented_scores(const std::string& path);
void write_augmented_scores(const std::string& path, const std::vector<AugmentedBatch>& batches);

// Calibration output: a scalar threshold (split / mc) or the reference-score
// multiset plus banded ECDF (ecdf-mc).
struct CalibrationArtifact {
  std::string method;  // "split" | "mc" | "ecdf-mc"
  double alpha = 0.0;
  Eigen::Index m = 1;
  std::optional<Threshold> threshold;
  std::optional<EcdfMcCalibration> ecdf;
};

CalibrationArtifact read_artifact(const std::string& path);
void write_artifact(const std::string& path, const CalibrationArtifact& artifact);

void write_trial_reports(const std::string& path, const std::vector<TrialReport>& reports);
std::vector<TrialReport> read_trial_reports(const std::string& path);

// Uniform-bin histogram counts over [lo, hi].
struct Histogram {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<long> counts;
};

Histogram make_histogram(const std::vector<double>& values, double lo, double hi, int bins);
void write_histogram(const std::string& path, const Histogram& hist);
Histogram read_histogram(const std::string& path);

// Minimal standalone SVG bar chart of a histogram.
void write_histogram_svg(const std::string& path, const Histogram& hist,
                         const std::string& title);

}  // namespace ambicp
