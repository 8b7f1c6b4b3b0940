#include "ambicp/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

namespace ambicp {

namespace {

using nlohmann::json;

std::string fmt(double value) { return format_double(value); }

double parse_double(const std::string& token, const std::string& path, std::size_t line) {
  double out = 0.0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc() || ptr != end)
    throw ParseError(path, line, "not a number: '" + token + "'");
  return out;
}

long parse_long(const std::string& token, const std::string& path, std::size_t line) {
  long out = 0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc() || ptr != end)
    throw ParseError(path, line, "not an integer: '" + token + "'");
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path + " for reading");
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  return out;
}

// Reads an id + K-floats CSV with a mandatory header.
std::pair<std::vector<std::string>, Eigen::MatrixXd> read_wide_csv(const std::string& path) {
  std::ifstream in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError(path, 1, "missing header row");
  ++line_no;
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "id")
    throw ParseError(path, 1, "header must be id,<col_1>,...,<col_K>");
  const std::size_t K = header.size() - 1;

  std::vector<std::string> ids;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != K + 1)
      throw ParseError(path, line_no,
                       "expected " + std::to_string(K + 1) + " fields, got " +
                           std::to_string(fields.size()));
    ids.push_back(fields[0]);
    for (std::size_t k = 1; k <= K; ++k) values.push_back(parse_double(fields[k], path, line_no));
  }
  Eigen::MatrixXd matrix(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(K));
  for (Eigen::Index i = 0; i < matrix.rows(); ++i)
    for (Eigen::Index k = 0; k < matrix.cols(); ++k)
      matrix(i, k) = values[static_cast<std::size_t>(i) * K + static_cast<std::size_t>(k)];
  return {std::move(ids), std::move(matrix)};
}

void write_wide_csv(const std::string& path, const std::vector<std::string>& ids,
                    const Eigen::Ref<const Eigen::MatrixXd>& matrix,
                    const std::string& column_prefix) {
  if (static_cast<Eigen::Index>(ids.size()) != matrix.rows())
    throw Error("id count does not match matrix rows");
  std::ofstream out = open_output(path);
  out << "id";
  for (Eigen::Index k = 0; k < matrix.cols(); ++k) out << ',' << column_prefix << '_' << (k + 1);
  out << '\n';
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    out << ids[static_cast<std::size_t>(i)];
    for (Eigen::Index k = 0; k < matrix.cols(); ++k) out << ',' << fmt(matrix(i, k));
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

json threshold_to_json(const Threshold& tau) {
  if (tau.is_neg_inf()) return "neg_inf";
  if (tau.is_pos_inf()) return "pos_inf";
  return tau.value;
}

Threshold threshold_from_json(const json& j, const std::string& path) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "neg_inf") return Threshold::neg_inf();
    if (s == "pos_inf") return Threshold::pos_inf();
    throw ParseError(path, 1, "bad threshold sentinel '" + s + "'");
  }
  return Threshold::finite(j.get<double>());
}

}  // namespace

std::string format_double(double value) {
  char buffer[64];
  auto [ptr, ec] =
      std::to_chars(buffer, buffer + sizeof(buffer), value, std::chars_format::general, 12);
  if (ec != std::errc()) throw Error("float formatting failed");
  return std::string(buffer, ptr);
}

ScoreTable read_score_table(const std::string& path) {
  auto [ids, matrix] = read_wide_csv(path);
  try {
    return make_score_table(std::move(ids), std::move(matrix));
  } catch (const Error& e) {
    throw ParseError(path, 1, e.what());
  }
}

void write_score_table(const std::string& path, const ScoreTable& table,
                       const std::string& column_prefix) {
  write_wide_csv(path, table.ids, table.scores, column_prefix);
}

PlausibilityTable read_plausibilities(const std::string& path) {
  auto [ids, matrix] = read_wide_csv(path);
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    try {
      matrix.row(i) = validate_plausibilities(matrix.row(i).transpose()).probs().transpose();
    } catch (const Error& e) {
      throw ParseError(path, static_cast<std::size_t>(i) + 2, e.what());
    }
  }
  return PlausibilityTable{std::move(ids), std::move(matrix)};
}

void write_plausibilities(const std::string& path, const std::vector<std::string>& ids,
                          const Eigen::Ref<const Eigen::MatrixXd>& lambda) {
  write_wide_csv(path, ids, lambda, "p");
}

LabelTable read_labels(const std::string& path) {
  std::ifstream in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError(path, 1, "missing header row");
  ++line_no;
  if (split_csv_line(line) != std::vector<std::string>{"id", "label"})
    throw ParseError(path, 1, "header must be id,label");

  LabelTable table;
  std::vector<int> labels;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 2) throw ParseError(path, line_no, "expected id,label");
    const long label = parse_long(fields[1], path, line_no);
    if (label < 1) throw ParseError(path, line_no, "labels are 1-based, got " + fields[1]);
    table.ids.push_back(fields[0]);
    labels.push_back(static_cast<int>(label - 1));
  }
  table.labels = Eigen::Map<Eigen::VectorXi>(labels.data(), static_cast<Eigen::Index>(labels.size()));
  return table;
}

void write_labels(const std::string& path, const std::vector<std::string>& ids,
                  const Eigen::Ref<const Eigen::VectorXi>& labels) {
  if (static_cast<Eigen::Index>(ids.size()) != labels.size())
    throw Error("id count does not match label count");
  std::ofstream out = open_output(path);
  out << "id,label\n";
  for (Eigen::Index i = 0; i < labels.size(); ++i)
    out << ids[static_cast<std::size_t>(i)] << ',' << (labels[i] + 1) << '\n';
  if (!out) throw IoError("failed writing " + path);
}

std::vector<AnnotationRecord> read_annotations(const std::string& path) {
  std::ifstream in = open_input(path);
  std::vector<AnnotationRecord> records;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(path, line_no, e.what());
    }
    if (!j.contains("id") || !j.contains("type"))
      throw ParseError(path, line_no, "annotation needs 'id' and 'type'");
    AnnotationRecord record;
    record.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
    if (!seen_ids.insert(record.id).second)
      throw ParseError(path, line_no, "duplicate annotation id '" + record.id + "'");
    std::string type;
    try {
      type = j["type"].get<std::string>();
    } catch (const json::exception& e) {
      throw ParseError(path, line_no, e.what());
    }
    try {
      if (type == "single") {
        SingleLabels payload;
        if (!j.contains("labels") || !j["labels"].is_array() || j["labels"].empty())
          throw ParseError(path, line_no, "single-label record needs a non-empty 'labels' array");
        for (const auto& item : j["labels"]) {
          const long label = item.get<long>();
          if (label < 1) throw ParseError(path, line_no, "labels are 1-based");
          payload.labels.push_back(static_cast<int>(label - 1));
        }
        record.payload = std::move(payload);
      } else if (type == "ranking") {
        PartialRankings payload;
        if (!j.contains("rankings") || !j["rankings"].is_array() || j["rankings"].empty())
          throw ParseError(path, line_no, "ranking record needs a non-empty 'rankings' array");
        for (const auto& ranking_json : j["rankings"]) {
          if (!ranking_json.is_array() || ranking_json.empty())
            throw ParseError(path, line_no, "each ranking needs at least one block");
          Ranking ranking;
          for (const auto& block_json : ranking_json) {
            if (!block_json.is_array() || block_json.empty())
              throw ParseError(path, line_no, "empty block in ranking");
            Block block;
            for (const auto& item : block_json) {
              const long label = item.get<long>();
              if (label < 1) throw ParseError(path, line_no, "labels are 1-based");
              block.push_back(static_cast<int>(label - 1));
            }
            ranking.push_back(std::move(block));
          }
          payload.rankings.push_back(std::move(ranking));
        }
        record.payload = std::move(payload);
      } else {
        throw ParseError(path, line_no, "unknown annotation type '" + type + "'");
      }
    } catch (const json::exception& e) {
      throw ParseError(path, line_no, e.what());
    }
    records.push_back(std::move(record));
  }
  return records;
}

void write_annotations(const std::string& path, const std::vector<AnnotationRecord>& records) {
  std::ofstream out = open_output(path);
  for (const auto& record : records) {
    json j;
    j["id"] = record.id;
    if (const auto* single = std::get_if<SingleLabels>(&record.payload)) {
      j["type"] = "single";
      json labels = json::array();
      for (int label : single->labels) labels.push_back(label + 1);
      j["labels"] = std::move(labels);
    } else {
      j["type"] = "ranking";
      json rankings = json::array();
      for (const auto& ranking : std::get<PartialRankings>(record.payload).rankings) {
        json ranking_json = json::array();
        for (const auto& block : ranking) {
          json block_json = json::array();
          for (int label : block) block_json.push_back(label + 1);
          ranking_json.push_back(std::move(block_json));
        }
        rankings.push_back(std::move(ranking_json));
      }
      j["rankings"] = std::move(rankings);
    }
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

std::vector<PredictionSet> read_prediction_sets(const std::string& path) {
  std::ifstream in = open_input(path);
  std::vector<PredictionSet> sets;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(path, line_no, e.what());
    }
    PredictionSet set;
    try {
      set.id = j.at("id").get<std::string>();
      for (const auto& item : j.at("classes")) {
        const long label = item.get<long>();
        if (label < 1) throw ParseError(path, line_no, "classes are 1-based");
        set.classes.push_back(static_cast<int>(label - 1));
      }
      if (!std::is_sorted(set.classes.begin(), set.classes.end()))
        throw ParseError(path, line_no, "classes must be sorted ascending");
      if (j.contains("p_values")) {
        const auto& pv = j["p_values"];
        Eigen::VectorXd values(static_cast<Eigen::Index>(pv.size()));
        for (Eigen::Index k = 0; k < values.size(); ++k)
          values[k] = pv[static_cast<std::size_t>(k)].get<double>();
        set.p_values = std::move(values);
      }
    } catch (const json::exception& e) {
      throw ParseError(path, line_no, e.what());
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

void write_prediction_sets(const std::string& path, const std::vector<PredictionSet>& sets) {
  std::ofstream out = open_output(path);
  for (const auto& set : sets) {
    json j;
    j["id"] = set.id;
    json classes = json::array();
    for (int k : set.classes) classes.push_back(k + 1);
    j["classes"] = std::move(classes);
    if (set.p_values) {
      json pv = json::array();
      for (Eigen::Index k = 0; k < set.p_values->size(); ++k)
        pv.push_back(json::parse(fmt((*set.p_values)[k])));
      j["p_values"] = std::move(pv);
    }
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

std::vector<AugmentedBatch> read_augmented_scores(const std::string& path) {
  std::ifstream in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError(path, 1, "missing header row");
  ++line_no;
  const auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "id" || header[1] != "replicate")
    throw ParseError(path, 1, "header must be id,replicate,<col_1>,...");
  const std::size_t K = header.size() - 2;

  std::vector<AugmentedBatch> batches;
  std::vector<std::vector<double>> rows;  // rows of the batch being assembled
  std::unordered_set<std::string> seen;
  std::string current_id;
  bool open = false;

  auto flush = [&]() {
    if (!open) return;
    AugmentedBatch batch;
    batch.id = current_id;
    batch.rows.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(K));
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t k = 0; k < K; ++k)
        batch.rows(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = rows[r][k];
    batches.push_back(std::move(batch));
    rows.clear();
    open = false;
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != K + 2)
      throw ParseError(path, line_no,
                       "expected " + std::to_string(K + 2) + " fields, got " +
                           std::to_string(fields.size()));
    const long replicate = parse_long(fields[1], path, line_no);
    if (!open || fields[0] != current_id) {
      flush();
      current_id = fields[0];
      open = true;
      if (!seen.insert(current_id).second)
        throw ParseError(path, line_no, "rows of batch " + current_id + " must be contiguous");
      if (replicate != 1)
        throw ParseError(path, line_no, "batch " + current_id + " must start at replicate 1");
    } else if (replicate != static_cast<long>(rows.size()) + 1) {
      throw ParseError(path, line_no,
                       "replicate indices of " + current_id + " must be consecutive from 1");
    }
    std::vector<double> row(K);
    for (std::size_t k = 0; k < K; ++k) row[k] = parse_double(fields[k + 2], path, line_no);
    rows.push_back(std::move(row));
  }
  flush();
  return batches;
}

void write_augmented_scores(const std::string& path, const std::vector<AugmentedBatch>& batches) {
  std::ofstream out = open_output(path);
  if (batches.empty()) throw EmptySample("no augmented batches to write");
  out << "id,replicate";
  for (Eigen::Index k = 0; k < batches.front().num_classes(); ++k) out << ",s_" << (k + 1);
  out << '\n';
  for (const auto& batch : batches) {
    for (Eigen::Index j = 0; j < batch.replicates(); ++j) {
      out << batch.id << ',' << (j + 1);
      for (Eigen::Index k = 0; k < batch.num_classes(); ++k) out << ',' << fmt(batch.rows(j, k));
      out << '\n';
    }
  }
  if (!out) throw IoError("failed writing " + path);
}

CalibrationArtifact read_artifact(const std::string& path) {
  std::ifstream in = open_input(path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path, 1, e.what());
  }
  CalibrationArtifact artifact;
  try {
    artifact.method = j.at("method").get<std::string>();
    artifact.alpha = j.at("alpha").get<double>();
    artifact.m = j.value("m", 1);
    if (artifact.method == "split" || artifact.method == "mc") {
      artifact.threshold = threshold_from_json(j.at("threshold"), path);
    } else if (artifact.method == "ecdf-mc") {
      const auto& refs = j.at("reference_scores");
      Eigen::VectorXd reference(static_cast<Eigen::Index>(refs.size()));
      for (Eigen::Index i = 0; i < reference.size(); ++i)
        reference[i] = refs[static_cast<std::size_t>(i)].get<double>();
      std::sort(reference.begin(), reference.end());
      std::vector<double> samples;
      for (const auto& item : j.at("ecdf_samples")) samples.push_back(item.get<double>());
      artifact.ecdf = EcdfMcCalibration{
          std::move(reference), j.at("l").get<long>(), artifact.m,
          dkw_band(build_ecdf(std::move(samples)), j.at("delta").get<double>())};
    } else {
      throw ParseError(path, 1, "unknown calibration method '" + artifact.method + "'");
    }
  } catch (const json::exception& e) {
    throw ParseError(path, 1, e.what());
  }
  return artifact;
}

void write_artifact(const std::string& path, const CalibrationArtifact& artifact) {
  json j;
  j["method"] = artifact.method;
  j["alpha"] = json::parse(fmt(artifact.alpha));
  j["m"] = artifact.m;
  if (artifact.threshold) j["threshold"] = threshold_to_json(*artifact.threshold);
  if (artifact.ecdf) {
    const auto& cal = *artifact.ecdf;
    j["l"] = cal.l;
    j["delta"] = json::parse(fmt(cal.band.delta));
    j["epsilon"] = json::parse(fmt(cal.band.epsilon));
    json refs = json::array();
    for (Eigen::Index i = 0; i < cal.reference_scores.size(); ++i)
      refs.push_back(json::parse(fmt(cal.reference_scores[i])));
    j["reference_scores"] = std::move(refs);
    json samples = json::array();
    for (double v : cal.band.base.values()) samples.push_back(json::parse(fmt(v)));
    j["ecdf_samples"] = std::move(samples);
  }
  std::ofstream out = open_output(path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path);
}

void write_trial_reports(const std::string& path, const std::vector<TrialReport>& reports) {
  std::ofstream out = open_output(path);
  out << "trial,voted_coverage,aggregated_coverage,true_coverage,inefficiency\n";
  for (const auto& r : reports) {
    out << r.trial << ',' << fmt(r.voted_coverage) << ',' << fmt(r.aggregated_coverage) << ',';
    if (r.true_coverage) out << fmt(*r.true_coverage);
    out << ',' << fmt(r.inefficiency) << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

std::vector<TrialReport> read_trial_reports(const std::string& path) {
  std::ifstream in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError(path, 1, "missing header row");
  ++line_no;
  if (line != "trial,voted_coverage,aggregated_coverage,true_coverage,inefficiency")
    throw ParseError(path, 1, "unexpected trial report header");
  std::vector<TrialReport> reports;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 5) throw ParseError(path, line_no, "expected 5 fields");
    TrialReport r;
    r.trial = static_cast<int>(parse_long(fields[0], path, line_no));
    r.voted_coverage = parse_double(fields[1], path, line_no);
    r.aggregated_coverage = parse_double(fields[2], path, line_no);
    if (!fields[3].empty()) r.true_coverage = parse_double(fields[3], path, line_no);
    r.inefficiency = parse_double(fields[4], path, line_no);
    reports.push_back(r);
  }
  return reports;
}

Histogram make_histogram(const std::vector<double>& values, double lo, double hi, int bins) {
  if (bins < 1) throw ConfigError("histogram needs at least one bin");
  if (!(hi > lo)) throw ConfigError("histogram range must be non-degenerate");
  Histogram hist;
  hist.lo = lo;
  hist.hi = hi;
  hist.counts.assign(static_cast<std::size_t>(bins), 0);
  const double width = (hi - lo) / bins;
  for (double v : values) {
    auto bin = static_cast<long>(std::floor((v - lo) / width));
    bin = std::clamp<long>(bin, 0, bins - 1);
    ++hist.counts[static_cast<std::size_t>(bin)];
  }
  return hist;
}

void write_histogram(const std::string& path, const Histogram& hist) {
  std::ofstream out = open_output(path);
  out << "bin_lo,bin_hi,count\n";
  const double width = (hist.hi - hist.lo) / static_cast<double>(hist.counts.size());
  for (std::size_t b = 0; b < hist.counts.size(); ++b) {
    out << fmt(hist.lo + width * static_cast<double>(b)) << ','
        << fmt(hist.lo + width * static_cast<double>(b + 1)) << ',' << hist.counts[b] << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

Histogram read_histogram(const std::string& path) {
  std::ifstream in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError(path, 1, "missing header row");
  ++line_no;
  if (line != "bin_lo,bin_hi,count") throw ParseError(path, 1, "unexpected histogram header");
  Histogram hist;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 3) throw ParseError(path, line_no, "expected bin_lo,bin_hi,count");
    if (first) {
      hist.lo = parse_double(fields[0], path, line_no);
      first = false;
    }
    hist.hi = parse_double(fields[1], path, line_no);
    hist.counts.push_back(parse_long(fields[2], path, line_no));
  }
  if (hist.counts.empty()) throw ParseError(path, line_no, "histogram has no bins");
  return hist;
}

void write_histogram_svg(const std::string& path, const Histogram& hist,
                         const std::string& title) {
  const int width = 640, height = 400, margin = 40;
  long peak = 1;
  for (long c : hist.counts) peak = std::max(peak, c);

  std::ofstream out = open_output(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\">\n";
  out << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
      << title << "</text>\n";
  const double plot_w = width - 2.0 * margin;
  const double plot_h = height - 2.0 * margin;
  const double bar_w = plot_w / static_cast<double>(hist.counts.size());
  for (std::size_t b = 0; b < hist.counts.size(); ++b) {
    const double h = plot_h * static_cast<double>(hist.counts[b]) / static_cast<double>(peak);
    out << "<rect x=\"" << margin + bar_w * static_cast<double>(b) << "\" y=\""
        << height - margin - h << "\" width=\"" << bar_w << "\" height=\"" << h
        << "\" fill=\"#4878a8\"/>\n";
  }
  out << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin
      << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << margin << "\" y=\"" << height - margin + 16 << "\" font-size=\"11\">"
      << fmt(hist.lo) << "</text>\n";
  out << "<text x=\"" << width - margin << "\" y=\"" << height - margin + 16
      << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(hist.hi) << "</text>\n";
  out << "</svg>\n";
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace ambicp
