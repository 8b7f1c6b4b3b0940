#include "ambicp/aggregation.hpp"

#include <algorithm>

namespace ambicp {

namespace {

void check_label_range(int label, int num_classes, const std::string& id) {
  if (label < 0 || label >= num_classes)
    throw LabelOutOfRange("record " + id + ": class index " + std::to_string(label) +
                          " outside [0," + std::to_string(num_classes) + ")");
}

}  // namespace

Plausibilities aggregate_single_labels(const AnnotationRecord& record, int num_classes) {
  const auto* payload = std::get_if<SingleLabels>(&record.payload);
  if (payload == nullptr)
    throw Error("record " + record.id + ": expected single-label annotations");
  if (payload->labels.empty())
    throw EmptyAnnotations("record " + record.id + " has no annotations");

  Eigen::VectorXd counts = Eigen::VectorXd::Zero(num_classes);
  for (int label : payload->labels) {
    check_label_range(label, num_classes, record.id);
    counts[label] += 1.0;
  }
  return validate_plausibilities(counts / static_cast<double>(payload->labels.size()));
}

Plausibilities aggregate_partial_rankings(const AnnotationRecord& record, int num_classes) {
  const auto* payload = std::get_if<PartialRankings>(&record.payload);
  if (payload == nullptr)
    throw Error("record " + record.id + ": expected partial-ranking annotations");
  if (payload->rankings.empty())
    throw EmptyAnnotations("record " + record.id + " has no annotations");

  Eigen::VectorXd weight = Eigen::VectorXd::Zero(num_classes);
  for (const Ranking& ranking : payload->rankings) {
    std::vector<bool> seen(static_cast<std::size_t>(num_classes), false);
    for (std::size_t block_idx = 0; block_idx < ranking.size(); ++block_idx) {
      const Block& block = ranking[block_idx];
      if (block.empty())
        throw Error("record " + record.id + ": empty block in ranking");
      const double w = 1.0 / (static_cast<double>(block_idx + 1) * static_cast<double>(block.size()));
      for (int label : block) {
        check_label_range(label, num_classes, record.id);
        if (seen[static_cast<std::size_t>(label)])
          throw OverlappingBlocks("record " + record.id + ": class " + std::to_string(label) +
                                  " appears in two blocks of one ranking");
        seen[static_cast<std::size_t>(label)] = true;
        weight[label] += w;
      }
    }
  }
  const double total = weight.sum();
  if (total <= 0.0)
    throw AllMassExcluded("record " + record.id + ": every ranking excludes all conditions");
  return validate_plausibilities(weight / total);
}

Plausibilities aggregate(const AnnotationRecord& record, int num_classes,
                         const AggregationProcedure& procedure) {
  if (std::holds_alternative<SingleLabelFrequency>(procedure))
    return aggregate_single_labels(record, num_classes);
  return aggregate_partial_rankings(record, num_classes);
}

Plausibilities aggregate(const AnnotationRecord& record, int num_classes) {
  if (std::holds_alternative<SingleLabels>(record.payload))
    return aggregate_single_labels(record, num_classes);
  return aggregate_partial_rankings(record, num_classes);
}

Plausibilities bootstrap_aggregate(const AnnotationRecord& record, int num_classes,
                                   const AggregationProcedure& procedure, RandomStream& rng) {
  AnnotationRecord resampled;
  resampled.id = record.id;
  if (const auto* single = std::get_if<SingleLabels>(&record.payload)) {
    if (single->labels.empty())
      throw EmptyAnnotations("record " + record.id + " has no annotations");
    SingleLabels out;
    out.labels.reserve(single->labels.size());
    for (std::size_t q = 0; q < single->labels.size(); ++q)
      out.labels.push_back(single->labels[rng.uniform_int(single->labels.size())]);
    resampled.payload = std::move(out);
  } else {
    const auto& rankings = std::get<PartialRankings>(record.payload).rankings;
    if (rankings.empty()) throw EmptyAnnotations("record " + record.id + " has no annotations");
    PartialRankings out;
    out.rankings.reserve(rankings.size());
    for (std::size_t q = 0; q < rankings.size(); ++q)
      out.rankings.push_back(rankings[rng.uniform_int(rankings.size())]);
    resampled.payload = std::move(out);
  }
  return aggregate(resampled, num_classes, procedure);
}

int vote(const Plausibilities& lambda, TieBreak tie_break, RandomStream* rng) {
  const Eigen::VectorXd& p = lambda.probs();
  const double best = p.maxCoeff();
  if (tie_break == TieBreak::LowestIndex) {
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      if (p[k] == best) return static_cast<int>(k);
    }
  }
  if (rng == nullptr) throw Error("random tie-break requires a stream");
  std::vector<int> tied;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    if (p[k] == best) tied.push_back(static_cast<int>(k));
  }
  return tied[rng->uniform_int(tied.size())];
}

}  // namespace ambicp
