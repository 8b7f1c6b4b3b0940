// Shared domain types and errors.
//
// Conventions used throughout the library:
//  - class indices are 0-based internally; file formats are 1-based and the
//    conversion happens only in io.cpp;
//  - conformity scores are "higher = more conforming";
//  - all types are immutable after construction and safe to share across
//    threads.
#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace ambicp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NegativeMass : public Error {
 public:
  using Error::Error;
};
class NotNormalized : public Error {
 public:
  using Error::Error;
};
class EmptyAnnotations : public Error {
 public:
  using Error::Error;
};
class LabelOutOfRange : public Error {
 public:
  using Error::Error;
};
class OverlappingBlocks : public Error {
 public:
  using Error::Error;
};
class AllMassExcluded : public Error {
 public:
  using Error::Error;
};
class EmptySample : public Error {
 public:
  using Error::Error;
};
class EmptyLabelSet : public Error {
 public:
  using Error::Error;
};
class SplitTooSmall : public Error {
 public:
  using Error::Error;
};
class ReplicateMismatch : public Error {
 public:
  using Error::Error;
};
class IdMismatch : public Error {
 public:
  using Error::Error;
};
class ConfigError : public Error {
 public:
  using Error::Error;
};
class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& message)
      : Error(path + ":" + std::to_string(line) + ": " + message), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Sum-to-one tolerance; aggregation formulas divide by exact sums, so larger
// drift indicates caller error rather than rounding.
inline constexpr double kSimplexTolerance = 1e-9;
inline constexpr double kNegativeMassTolerance = -1e-12;

// A point on the K-simplex. Construct via validate_plausibilities(); entries
// are >= 0 and sum to one (renormalized on entry within tolerance).
class Plausibilities {
 public:
  const Eigen::VectorXd& probs() const { return probs_; }
  Eigen::Index num_classes() const { return probs_.size(); }
  double operator[](Eigen::Index k) const { return probs_[k]; }

  friend Plausibilities validate_plausibilities(const Eigen::Ref<const Eigen::VectorXd>& probs);

 private:
  explicit Plausibilities(Eigen::VectorXd p) : probs_(std::move(p)) {}
  Eigen::VectorXd probs_;
};

// Validates simplex membership. Values are renormalized only when
// |sum - 1| <= 1e-9; entries in [-1e-12, 0) are clamped to zero first.
// Throws NegativeMass / NotNormalized otherwise.
Plausibilities validate_plausibilities(const Eigen::Ref<const Eigen::VectorXd>& probs);

// n x K matrix of conformity scores plus unique example ids.
struct ScoreTable {
  std::vector<std::string> ids;
  Eigen::MatrixXd scores;

  Eigen::Index num_examples() const { return scores.rows(); }
  Eigen::Index num_classes() const { return scores.cols(); }
};

// Validates id uniqueness and shape agreement.
ScoreTable make_score_table(std::vector<std::string> ids, Eigen::MatrixXd scores);

// Expert annotations for one example: either a list of single labels or a
// list of partial rankings. A ranking stores only its non-excluded blocks,
// ordered most- to least-plausible; the excluded block is implicit.
struct SingleLabels {
  std::vector<int> labels;
};

using Block = std::vector<int>;
using Ranking = std::vector<Block>;

struct PartialRankings {
  std::vector<Ranking> rankings;
};

struct AnnotationRecord {
  std::string id;
  std::variant<SingleLabels, PartialRankings> payload;
};

// Calibrated score threshold. NEG_INF / POS_INF sentinels encode degenerate
// quantile indices and yield the full / empty prediction set respectively.
struct Threshold {
  double value = 0.0;

  static Threshold finite(double v) { return Threshold{v}; }
  static Threshold neg_inf() { return Threshold{-std::numeric_limits<double>::infinity()}; }
  static Threshold pos_inf() { return Threshold{std::numeric_limits<double>::infinity()}; }

  bool is_neg_inf() const { return std::isinf(value) && value < 0; }
  bool is_pos_inf() const { return std::isinf(value) && value > 0; }
  bool is_finite() const { return std::isfinite(value); }
};

// Subset of classes for one example, sorted ascending, with optional
// per-class p-values (corrected or not, depending on the producing method).
struct PredictionSet {
  std::string id;
  std::vector<int> classes;
  std::optional<Eigen::VectorXd> p_values;

  bool contains(int k) const;
};

// (id, plausibilities) calibration pair.
struct PlausibleExample {
  std::string id;
  Plausibilities lambda;
};

}  // namespace ambicp
