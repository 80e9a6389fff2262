#pragma once

// Robustness scores and their marginalized, example-weighted aggregates.

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "probekit/probe.hpp"

namespace probekit {

class UndefinedForZeroClean : public std::domain_error {
 public:
  UndefinedForZeroClean()
      : std::domain_error("UndefinedForZeroClean: robustness needs a clean accuracy > 0") {}
};

// 1 - (a_clean - a_perturbed) / a_clean. Values above 1 mean the probe did
// better on perturbed input.
double robustness_score(double a_clean, double a_perturbed);

inline bool improves_under_perturbation(double score) { return score > 1.0; }

enum class Dim { kTask, kModel, kLanguage, kLayer, kPerturbation };

const char* dim_name(Dim dim);
std::optional<Dim> dim_from_name(std::string_view name);
// "model,language" -> {kModel, kLanguage}; throws std::invalid_argument.
std::vector<Dim> parse_dims(std::string_view text);

struct RobustnessRecord {
  std::string task;
  std::string model;
  std::string language;
  int layer = 0;
  std::string perturbation;
  double a_clean = 0.0;
  double a_perturbed = 0.0;
  size_t n_examples = 1;
  double score = 0.0;

  std::string key(Dim dim) const;
};

RobustnessRecord make_record(std::string task, std::string model, std::string language,
                             int layer, std::string perturbation, double a_clean,
                             double a_perturbed, size_t n_examples);

struct RecordSet {
  std::vector<RobustnessRecord> records;
  size_t excluded_zero_clean = 0;
  size_t unmatched = 0;  // perturbed rows without a clean counterpart
};

// Joins every perturbed result with the clean result sharing
// (task, model, language, layer). Weights are the perturbed set's sizes.
RecordSet build_records(const std::vector<ProbeResult>& results);

struct TableCell {
  std::vector<std::string> key;  // one value per group dim
  double score = 0.0;            // weighted mean
  double weight = 0.0;           // sum of contributing n_examples
  size_t n_records = 0;
  double min_score = 0.0;
  double max_score = 0.0;
};

struct RobustnessTable {
  std::vector<Dim> group_dims;
  std::vector<TableCell> cells;  // sorted by key; layers compare numerically

  const TableCell* find(const std::vector<std::string>& key) const;
};

// Weighted mean per group key over every record, marginalizing the other dims.
// Throws std::invalid_argument on an empty record list.
RobustnessTable aggregate(const std::vector<RobustnessRecord>& records,
                          const std::vector<Dim>& group_dims);

// Re-aggregates an existing table onto a subset of its dims, weighting each
// cell by its weight.
RobustnessTable reaggregate(const RobustnessTable& table, const std::vector<Dim>& group_dims);

struct LayerRanking {
  bool equal = false;  // spread of layer means below the threshold
  std::vector<int> most_affected;  // top_k, lowest score first; empty if equal
  std::vector<std::pair<int, double>> ranking;  // all layers, ascending score
};

inline constexpr double kEqualThreshold = 0.01;

// Records of one (task, language) slice; throws std::invalid_argument if
// they cover fewer than two layers.
LayerRanking most_affected_layers(const std::vector<RobustnessRecord>& records, size_t top_k,
                                  double equal_threshold = kEqualThreshold);

struct AffectedRow {
  std::string task;
  std::string language;
  LayerRanking ranking;
};

// One row per (task, language), averaged over models and perturbations.
std::vector<AffectedRow> most_affected_table(const std::vector<RobustnessRecord>& records,
                                             size_t top_k,
                                             double equal_threshold = kEqualThreshold);

std::string records_to_csv(const std::vector<RobustnessRecord>& records);
std::string table_to_csv(const RobustnessTable& table);
// Two-dim tables only: first dim down the rows, second across the columns.
std::string table_to_pivot_csv(const RobustnessTable& table);
std::string affected_to_csv(const std::vector<AffectedRow>& rows);
// Static heatmap of a two-dim table.
std::string table_to_svg_heatmap(const RobustnessTable& table, std::string_view title);

}  // namespace probekit
