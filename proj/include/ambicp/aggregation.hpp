// Aggregation of expert annotations into plausibilities: single-label
// frequencies and inverse rank normalization of partial rankings, plus
// bootstrap resampling of the annotation entries and voted-label extraction.
#pragma once

#include <variant>

#include "ambicp/rng.hpp"
#include "ambicp/types.hpp"

namespace ambicp {

struct SingleLabelFrequency {};
struct InverseRankNormalization {};
using AggregationProcedure = std::variant<SingleLabelFrequency, InverseRankNormalization>;

// lambda_k = (number of annotations equal to k) / p.
Plausibilities aggregate_single_labels(const AnnotationRecord& record, int num_classes);

// Inverse rank normalization: block i of a ranking (1-based, best first)
// contributes 1/(i*|block|) to each of its classes; the implicit excluded
// block contributes nothing. The weights are normalized across classes.
// Throws AllMassExcluded when every ranking carries zero non-excluded mass.
Plausibilities aggregate_partial_rankings(const AnnotationRecord& record, int num_classes);

// Dispatch on the requested procedure; the record payload must match.
Plausibilities aggregate(const AnnotationRecord& record, int num_classes,
                         const AggregationProcedure& procedure);

// Procedure inferred from the payload variant.
Plausibilities aggregate(const AnnotationRecord& record, int num_classes);

// Resamples the p annotation entries with replacement (same count), then
// applies the procedure.
Plausibilities bootstrap_aggregate(const AnnotationRecord& record, int num_classes,
                                   const AggregationProcedure& procedure, RandomStream& rng);

enum class TieBreak { LowestIndex, Random };

// Argmax class of lambda. Ties go to the lowest index by default; the Random
// rule picks uniformly among the tied classes and requires a stream.
int vote(const Plausibilities& lambda, TieBreak tie_break = TieBreak::LowestIndex,
         RandomStream* rng = nullptr);

}  // namespace ambicp
