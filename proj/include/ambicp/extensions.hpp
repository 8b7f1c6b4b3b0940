// Two applications of Monte Carlo conformal prediction beyond label
// ambiguity: multi-label classification via uniform plausibilities, and
// calibration with data-augmentation replicates of the inputs.
#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "ambicp/types.hpp"

namespace ambicp {

// m score rows per logical example; row 0 always holds the unaugmented
// input's scores, rows 1..m-1 the augmented inputs'.
struct AugmentedBatch {
  std::string id;
  Eigen::MatrixXd rows;  // m x K

  Eigen::Index replicates() const { return rows.rows(); }
  Eigen::Index num_classes() const { return rows.cols(); }
};

// lambda_y = 1[y in set] / |set|. Duplicates in the input are collapsed.
Plausibilities multilabel_plausibilities(const std::vector<int>& label_set, int num_classes);

// Pre-sorted per-replicate reference scores E(X_i^j, Y_i). Calibration labels
// are fixed here: replication is over inputs, not labels.
class AugmentedCalibration {
 public:
  AugmentedCalibration(const std::vector<AugmentedBatch>& calib,
                       const Eigen::Ref<const Eigen::VectorXi>& true_labels);

  // rho_bar_k for every class of the test batch: the j-th replicate's p-value
  // compares E(test^j, k) against the j-th calibration replicates, and the m
  // p-values are averaged. Throws ReplicateMismatch when m differs.
  Eigen::VectorXd p_values(const AugmentedBatch& test) const;

  Eigen::Index replicates() const { return static_cast<Eigen::Index>(refs_.size()); }
  Eigen::Index num_examples() const { return n_; }

 private:
  std::vector<std::vector<double>> refs_;  // per replicate, sorted
  Eigen::Index n_ = 0;
};

// One-shot form of the above for a single candidate class.
double augmented_mc_p_value(const std::vector<AugmentedBatch>& calib,
                            const Eigen::Ref<const Eigen::VectorXi>& true_labels,
                            const AugmentedBatch& test, int candidate);

}  // namespace ambicp
