#include "ambicp/metrics.hpp"

#include <algorithm>
#include <numeric>

namespace ambicp {

namespace {

void check_alignment(const std::vector<PredictionSet>& sets,
                     const std::vector<std::string>& ids) {
  if (sets.size() != ids.size())
    throw IdMismatch("got " + std::to_string(sets.size()) + " sets for " +
                     std::to_string(ids.size()) + " labeled examples");
  for (std::size_t i = 0; i < sets.size(); ++i) {
    if (sets[i].id != ids[i])
      throw IdMismatch("id mismatch at position " + std::to_string(i) + ": set '" + sets[i].id +
                       "' vs example '" + ids[i] + "'");
  }
}

double covered_mass(const PredictionSet& set, const Eigen::Ref<const Eigen::MatrixXd>& lambda,
                    Eigen::Index row) {
  double mass = 0.0;
  for (int k : set.classes) mass += lambda(row, k);
  return mass;
}

}  // namespace

double voted_coverage(const std::vector<PredictionSet>& sets,
                      const std::vector<std::string>& ids,
                      const Eigen::Ref<const Eigen::VectorXi>& voted_labels) {
  check_alignment(sets, ids);
  if (static_cast<Eigen::Index>(sets.size()) != voted_labels.size())
    throw IdMismatch("label count does not match set count");
  if (sets.empty()) throw EmptySample("coverage of an empty collection is undefined");
  double hits = 0.0;
  for (std::size_t i = 0; i < sets.size(); ++i)
    hits += sets[i].contains(voted_labels[static_cast<Eigen::Index>(i)]) ? 1.0 : 0.0;
  return hits / static_cast<double>(sets.size());
}

double voted_coverage_tied(const std::vector<PredictionSet>& sets,
                           const std::vector<std::string>& ids,
                           const Eigen::Ref<const Eigen::MatrixXd>& lambda) {
  check_alignment(sets, ids);
  if (static_cast<Eigen::Index>(sets.size()) != lambda.rows())
    throw IdMismatch("plausibility rows do not match set count");
  if (sets.empty()) throw EmptySample("coverage of an empty collection is undefined");
  double total = 0.0;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const double best = lambda.row(row).maxCoeff();
    int tied = 0, covered = 0;
    for (Eigen::Index k = 0; k < lambda.cols(); ++k) {
      if (lambda(row, k) == best) {
        ++tied;
        covered += sets[i].contains(static_cast<int>(k)) ? 1 : 0;
      }
    }
    total += static_cast<double>(covered) / static_cast<double>(tied);
  }
  return total / static_cast<double>(sets.size());
}

double aggregated_coverage(const std::vector<PredictionSet>& sets,
                           const std::vector<std::string>& ids,
                           const Eigen::Ref<const Eigen::MatrixXd>& lambda) {
  check_alignment(sets, ids);
  if (static_cast<Eigen::Index>(sets.size()) != lambda.rows())
    throw IdMismatch("plausibility rows do not match set count");
  if (sets.empty()) throw EmptySample("coverage of an empty collection is undefined");
  double total = 0.0;
  for (std::size_t i = 0; i < sets.size(); ++i)
    total += covered_mass(sets[i], lambda, static_cast<Eigen::Index>(i));
  return total / static_cast<double>(sets.size());
}

double inefficiency(const std::vector<PredictionSet>& sets) {
  if (sets.empty()) throw EmptySample("inefficiency of an empty collection is undefined");
  double total = 0.0;
  for (const auto& set : sets) total += static_cast<double>(set.classes.size());
  return total / static_cast<double>(sets.size());
}

CoverageProfile coverage_profile(const std::vector<PredictionSet>& sets,
                                 const std::vector<std::string>& ids,
                                 const Eigen::Ref<const Eigen::VectorXi>& voted_labels,
                                 const Eigen::Ref<const Eigen::MatrixXd>& lambda,
                                 ProfileSort sort_key) {
  check_alignment(sets, ids);
  if (static_cast<Eigen::Index>(sets.size()) != voted_labels.size() ||
      static_cast<Eigen::Index>(sets.size()) != lambda.rows())
    throw IdMismatch("labels/plausibilities do not match set count");
  if (sets.empty()) throw EmptySample("profile of an empty collection is undefined");

  const auto n = static_cast<Eigen::Index>(sets.size());
  CoverageProfile profile;
  profile.voted_curve.resize(n);
  profile.aggregated_curve.resize(n);
  profile.max_plausibility.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& set = sets[static_cast<std::size_t>(i)];
    profile.voted_curve[i] = set.contains(voted_labels[i]) ? 1.0 : 0.0;
    profile.aggregated_curve[i] = covered_mass(set, lambda, i);
    profile.max_plausibility[i] = lambda.row(i).maxCoeff();
  }

  if (sort_key == ProfileSort::PerCurve) {
    std::sort(profile.voted_curve.begin(), profile.voted_curve.end());
    std::sort(profile.aggregated_curve.begin(), profile.aggregated_curve.end());
    std::sort(profile.max_plausibility.begin(), profile.max_plausibility.end());
  } else {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return profile.max_plausibility[a] < profile.max_plausibility[b];
    });
    CoverageProfile sorted;
    sorted.voted_curve.resize(n);
    sorted.aggregated_curve.resize(n);
    sorted.max_plausibility.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      sorted.voted_curve[i] = profile.voted_curve[order[static_cast<std::size_t>(i)]];
      sorted.aggregated_curve[i] = profile.aggregated_curve[order[static_cast<std::size_t>(i)]];
      sorted.max_plausibility[i] = profile.max_plausibility[order[static_cast<std::size_t>(i)]];
    }
    profile = std::move(sorted);
  }
  return profile;
}

}  // namespace ambicp
