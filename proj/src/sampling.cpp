#include "ambicp/sampling.hpp"

namespace ambicp {

Eigen::VectorXi sample_pseudo_labels(const Plausibilities& lambda, Eigen::Index m,
                                     RandomStream& rng) {
  if (m < 1) throw ConfigError("m must be >= 1");
  Eigen::VectorXi draws(m);
  for (Eigen::Index j = 0; j < m; ++j) draws[j] = rng.categorical(lambda.probs());
  return draws;
}

ReplicatedLabels expand_calibration(const std::vector<std::string>& ids,
                                    const Eigen::Ref<const Eigen::MatrixXd>& lambda,
                                    Eigen::Index m, const RandomStream& rng) {
  const auto n = static_cast<Eigen::Index>(ids.size());
  if (n == 0) throw EmptySample("expand_calibration needs a non-empty calibration set");
  if (lambda.rows() != n) throw Error("plausibility rows do not match id count");
  if (m < 1) throw ConfigError("m must be >= 1");

  ReplicatedLabels out;
  out.labels.resize(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    RandomStream stream = rng.fork("pseudo-labels", ids[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < m; ++j) out.labels(i, j) = stream.categorical(lambda.row(i));
  }
  return out;
}

ReplicatedLabels expand_calibration(const std::vector<PlausibleExample>& calib, Eigen::Index m,
                                    const RandomStream& rng) {
  if (calib.empty()) throw EmptySample("expand_calibration needs a non-empty calibration set");
  std::vector<std::string> ids;
  ids.reserve(calib.size());
  const Eigen::Index K = calib.front().lambda.num_classes();
  Eigen::MatrixXd lambda(static_cast<Eigen::Index>(calib.size()), K);
  for (std::size_t i = 0; i < calib.size(); ++i) {
    ids.push_back(calib[i].id);
    lambda.row(static_cast<Eigen::Index>(i)) = calib[i].lambda.probs().transpose();
  }
  return expand_calibration(ids, lambda, m, rng);
}

ReplicatedLabels expand_calibration_bootstrap(const std::vector<AnnotationRecord>& records,
                                              int num_classes, Eigen::Index m,
                                              const RandomStream& rng) {
  const auto n = static_cast<Eigen::Index>(records.size());
  if (n == 0) throw EmptySample("expand_calibration needs a non-empty calibration set");
  if (m < 1) throw ConfigError("m must be >= 1");

  ReplicatedLabels out;
  out.labels.resize(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const AnnotationRecord& record = records[static_cast<std::size_t>(i)];
    const AggregationProcedure procedure =
        std::holds_alternative<SingleLabels>(record.payload)
            ? AggregationProcedure{SingleLabelFrequency{}}
            : AggregationProcedure{InverseRankNormalization{}};
    RandomStream stream = rng.fork("pseudo-labels", record.id);
    for (Eigen::Index j = 0; j < m; ++j) {
      const Plausibilities lambda = bootstrap_aggregate(record, num_classes, procedure, stream);
      out.labels(i, j) = stream.categorical(lambda.probs());
    }
  }
  return out;
}

Eigen::MatrixXd replicate_scores(const Eigen::Ref<const Eigen::MatrixXd>& scores,
                                 const ReplicatedLabels& labels) {
  if (scores.rows() != labels.n()) throw Error("score rows do not match label rows");
  Eigen::MatrixXd out(labels.n(), labels.m());
  for (Eigen::Index i = 0; i < labels.n(); ++i)
    for (Eigen::Index j = 0; j < labels.m(); ++j) out(i, j) = scores(i, labels.labels(i, j));
  return out;
}

}  // namespace ambicp
