// Exchangeable pseudo-label sampling: expands a calibration set into the
// n x m replicate structure used by Monte Carlo calibration.
#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "ambicp/aggregation.hpp"
#include "ambicp/rng.hpp"
#include "ambicp/types.hpp"

namespace ambicp {

// labels(i, j) = Y_i^j in [0, K). Each column, paired with the example rows,
// forms one exchangeable pseudo-labeled calibration set.
struct ReplicatedLabels {
  Eigen::MatrixXi labels;

  Eigen::Index n() const { return labels.rows(); }
  Eigen::Index m() const { return labels.cols(); }
};

// m independent categorical draws from lambda.
Eigen::VectorXi sample_pseudo_labels(const Plausibilities& lambda, Eigen::Index m,
                                     RandomStream& rng);

// Fills the n x m matrix with independent draws per example. The per-example
// stream is rng.fork("pseudo-labels", id): draws extend column-wise, so
// growing m leaves earlier columns unchanged, and permuting rows permutes the
// output rows identically (the stream travels with the id).
ReplicatedLabels expand_calibration(const std::vector<std::string>& ids,
                                    const Eigen::Ref<const Eigen::MatrixXd>& lambda,
                                    Eigen::Index m, const RandomStream& rng);

ReplicatedLabels expand_calibration(const std::vector<PlausibleExample>& calib, Eigen::Index m,
                                    const RandomStream& rng);

// Plausibility-resampling variant: before each label draw, lambda_i^j is
// redrawn by bootstrapping the example's annotations.
ReplicatedLabels expand_calibration_bootstrap(const std::vector<AnnotationRecord>& records,
                                              int num_classes, Eigen::Index m,
                                              const RandomStream& rng);

// E(X_i, Y_i^j) lookup: scores row i evaluated at each sampled label.
Eigen::MatrixXd replicate_scores(const Eigen::Ref<const Eigen::MatrixXd>& scores,
                                 const ReplicatedLabels& labels);

}  // namespace ambicp
