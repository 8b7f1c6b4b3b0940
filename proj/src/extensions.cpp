#include "ambicp/extensions.hpp"

#include <algorithm>

namespace ambicp {

Plausibilities multilabel_plausibilities(const std::vector<int>& label_set, int num_classes) {
  if (label_set.empty()) throw EmptyLabelSet("multi-label set must be non-empty");
  std::vector<int> unique = label_set;
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());

  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(num_classes);
  const double mass = 1.0 / static_cast<double>(unique.size());
  for (int label : unique) {
    if (label < 0 || label >= num_classes)
      throw LabelOutOfRange("multi-label set contains class " + std::to_string(label));
    lambda[label] = mass;
  }
  return validate_plausibilities(lambda);
}

AugmentedCalibration::AugmentedCalibration(const std::vector<AugmentedBatch>& calib,
                                           const Eigen::Ref<const Eigen::VectorXi>& true_labels) {
  if (calib.empty()) throw EmptySample("augmented calibration must be non-empty");
  if (static_cast<Eigen::Index>(calib.size()) != true_labels.size())
    throw Error("calibration batches and labels differ in count");

  n_ = static_cast<Eigen::Index>(calib.size());
  const Eigen::Index m = calib.front().replicates();
  refs_.assign(static_cast<std::size_t>(m), {});
  for (auto& r : refs_) r.reserve(static_cast<std::size_t>(n_));

  for (Eigen::Index i = 0; i < n_; ++i) {
    const AugmentedBatch& batch = calib[static_cast<std::size_t>(i)];
    if (batch.replicates() != m)
      throw ReplicateMismatch("calibration batch " + batch.id + " has " +
                              std::to_string(batch.replicates()) + " replicates, expected " +
                              std::to_string(m));
    const int y = true_labels[i];
    if (y < 0 || y >= batch.num_classes())
      throw LabelOutOfRange("calibration label " + std::to_string(y) + " out of range");
    for (Eigen::Index j = 0; j < m; ++j)
      refs_[static_cast<std::size_t>(j)].push_back(batch.rows(j, y));
  }
  for (auto& r : refs_) std::sort(r.begin(), r.end());
}

Eigen::VectorXd AugmentedCalibration::p_values(const AugmentedBatch& test) const {
  const auto m = replicates();
  if (test.replicates() != m)
    throw ReplicateMismatch("test batch " + test.id + " has " +
                            std::to_string(test.replicates()) + " replicates, expected " +
                            std::to_string(m));
  const Eigen::Index K = test.num_classes();
  Eigen::VectorXd rho = Eigen::VectorXd::Zero(K);
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto& sorted = refs_[static_cast<std::size_t>(j)];
    for (Eigen::Index k = 0; k < K; ++k) {
      const auto count = static_cast<double>(
          std::upper_bound(sorted.begin(), sorted.end(), test.rows(j, k)) - sorted.begin());
      rho[k] += (count + 1.0) / static_cast<double>(n_ + 1);
    }
  }
  return rho / static_cast<double>(m);
}

double augmented_mc_p_value(const std::vector<AugmentedBatch>& calib,
                            const Eigen::Ref<const Eigen::VectorXi>& true_labels,
                            const AugmentedBatch& test, int candidate) {
  if (candidate < 0 || candidate >= test.num_classes())
    throw LabelOutOfRange("candidate class " + std::to_string(candidate) + " out of range");
  return AugmentedCalibration(calib, true_labels).p_values(test)[candidate];
}

}  // namespace ambicp
