#include "ambicp/types.hpp"

#include <algorithm>
#include <unordered_set>

namespace ambicp {

Plausibilities validate_plausibilities(const Eigen::Ref<const Eigen::VectorXd>& probs) {
  if (probs.size() == 0) throw EmptySample("plausibilities must be non-empty");
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    if (probs[k] < kNegativeMassTolerance)
      throw NegativeMass("plausibility entry " + std::to_string(k) + " is negative: " +
                         std::to_string(probs[k]));
  }
  Eigen::VectorXd p = probs.cwiseMax(0.0);
  const double sum = p.sum();
  if (std::abs(sum - 1.0) > kSimplexTolerance)
    throw NotNormalized("plausibilities sum to " + std::to_string(sum) + ", expected 1");
  if (sum != 1.0) p /= sum;
  return Plausibilities(std::move(p));
}

ScoreTable make_score_table(std::vector<std::string> ids, Eigen::MatrixXd scores) {
  if (static_cast<Eigen::Index>(ids.size()) != scores.rows())
    throw Error("score table has " + std::to_string(ids.size()) + " ids but " +
                std::to_string(scores.rows()) + " rows");
  std::unordered_set<std::string> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) throw Error("duplicate example id: " + id);
  }
  return ScoreTable{std::move(ids), std::move(scores)};
}

bool PredictionSet::contains(int k) const {
  return std::binary_search(classes.begin(), classes.end(), k);
}

}  // namespace ambicp
