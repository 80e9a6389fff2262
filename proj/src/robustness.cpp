#include "probekit/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "probekit/csv.hpp"

namespace probekit {

double robustness_score(double a_clean, double a_perturbed) {
  if (a_clean == 0.0) throw UndefinedForZeroClean();
  if (!(a_clean > 0.0)) throw std::domain_error("clean accuracy must be positive");
  return 1.0 - (a_clean - a_perturbed) / a_clean;
}

const char* dim_name(Dim dim) {
  switch (dim) {
    case Dim::kTask: return "task";
    case Dim::kModel: return "model";
    case Dim::kLanguage: return "language";
    case Dim::kLayer: return "layer";
    case Dim::kPerturbation: return "perturbation";
  }
  return "?";
}

std::optional<Dim> dim_from_name(std::string_view name) {
  for (Dim d : {Dim::kTask, Dim::kModel, Dim::kLanguage, Dim::kLayer, Dim::kPerturbation}) {
    if (name == dim_name(d)) return d;
  }
  return std::nullopt;
}

std::vector<Dim> parse_dims(std::string_view text) {
  std::vector<Dim> dims;
  size_t start = 0;
  while (start <= text.size()) {
    size_t end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view part = text.substr(start, end - start);
    auto d = dim_from_name(part);
    if (!d) throw std::invalid_argument("unknown dimension '" + std::string(part) + "'");
    if (std::find(dims.begin(), dims.end(), *d) != dims.end()) {
      throw std::invalid_argument("dimension '" + std::string(part) + "' repeated");
    }
    dims.push_back(*d);
    if (end == text.size()) break;
    start = end + 1;
  }
  return dims;
}

std::string RobustnessRecord::key(Dim dim) const {
  switch (dim) {
    case Dim::kTask: return task;
    case Dim::kModel: return model;
    case Dim::kLanguage: return language;
    case Dim::kLayer: return std::to_string(layer);
    case Dim::kPerturbation: return perturbation;
  }
  return {};
}

RobustnessRecord make_record(std::string task, std::string model, std::string language,
                             int layer, std::string perturbation, double a_clean,
                             double a_perturbed, size_t n_examples) {
  RobustnessRecord r;
  r.task = std::move(task);
  r.model = std::move(model);
  r.language = std::move(language);
  r.layer = layer;
  r.perturbation = std::move(perturbation);
  r.a_clean = a_clean;
  r.a_perturbed = a_perturbed;
  r.n_examples = n_examples;
  r.score = robustness_score(a_clean, a_perturbed);
  return r;
}

RecordSet build_records(const std::vector<ProbeResult>& results) {
  using Key = std::tuple<std::string, std::string, std::string, int>;
  std::map<Key, const ProbeResult*> clean;
  for (const ProbeResult& r : results) {
    if (r.variant == "clean") clean[{r.task, r.model_name, r.language, r.layer}] = &r;
  }
  RecordSet out;
  for (const ProbeResult& r : results) {
    if (r.variant == "clean") continue;
    auto it = clean.find({r.task, r.model_name, r.language, r.layer});
    if (it == clean.end()) {
      ++out.unmatched;
      continue;
    }
    if (it->second->mean_accuracy == 0.0) {
      ++out.excluded_zero_clean;
      continue;
    }
    out.records.push_back(make_record(r.task, r.model_name, r.language, r.layer, r.variant,
                                      it->second->mean_accuracy, r.mean_accuracy,
                                      std::max<size_t>(r.n_examples, 1)));
  }
  return out;
}

namespace {

// Layers sort numerically, everything else lexicographically.
struct KeyLess {
  const std::vector<Dim>* dims;
  bool operator()(const std::vector<std::string>& a, const std::vector<std::string>& b) const {
    for (size_t i = 0; i < a.size(); ++i) {
      if (a[i] == b[i]) continue;
      if ((*dims)[i] == Dim::kLayer) return std::stoll(a[i]) < std::stoll(b[i]);
      return a[i] < b[i];
    }
    return false;
  }
};

struct Accumulator {
  double weighted_sum = 0.0;
  double weight = 0.0;
  size_t n = 0;
  double lo = INFINITY;
  double hi = -INFINITY;

  void add(double score, double w, size_t records, double min_s, double max_s) {
    weighted_sum += w * score;
    weight += w;
    n += records;
    lo = std::min(lo, min_s);
    hi = std::max(hi, max_s);
  }
};

RobustnessTable finish(const std::vector<Dim>& dims,
                       const std::map<std::vector<std::string>, Accumulator, KeyLess>& acc) {
  RobustnessTable table;
  table.group_dims = dims;
  for (const auto& [key, a] : acc) {
    if (a.weight <= 0.0) continue;
    TableCell cell;
    cell.key = key;
    // A single contributor is reported verbatim (identity grouping).
    cell.score = a.n == 1 ? a.lo : a.weighted_sum / a.weight;
    cell.weight = a.weight;
    cell.n_records = a.n;
    cell.min_score = a.lo;
    cell.max_score = a.hi;
    // Guard the bound against rounding in the division.
    cell.score = std::clamp(cell.score, a.lo, a.hi);
    table.cells.push_back(std::move(cell));
  }
  return table;
}

}  // namespace

const TableCell* RobustnessTable::find(const std::vector<std::string>& key) const {
  for (const TableCell& c : cells) {
    if (c.key == key) return &c;
  }
  return nullptr;
}

RobustnessTable aggregate(const std::vector<RobustnessRecord>& records,
                          const std::vector<Dim>& group_dims) {
  if (records.empty()) throw std::invalid_argument("aggregate needs at least one record");
  std::map<std::vector<std::string>, Accumulator, KeyLess> acc(KeyLess{&group_dims});
  for (const RobustnessRecord& r : records) {
    std::vector<std::string> key;
    key.reserve(group_dims.size());
    for (Dim d : group_dims) key.push_back(r.key(d));
    acc[key].add(r.score, static_cast<double>(r.n_examples), 1, r.score, r.score);
  }
  return finish(group_dims, acc);
}

RobustnessTable reaggregate(const RobustnessTable& table, const std::vector<Dim>& group_dims) {
  std::vector<size_t> positions;
  for (Dim d : group_dims) {
    auto it = std::find(table.group_dims.begin(), table.group_dims.end(), d);
    if (it == table.group_dims.end()) {
      throw std::invalid_argument(std::string("dimension '") + dim_name(d) +
                                  "' is not in the source table");
    }
    positions.push_back(static_cast<size_t>(it - table.group_dims.begin()));
  }
  std::map<std::vector<std::string>, Accumulator, KeyLess> acc(KeyLess{&group_dims});
  for (const TableCell& c : table.cells) {
    std::vector<std::string> key;
    for (size_t p : positions) key.push_back(c.key[p]);
    acc[key].add(c.score, c.weight, c.n_records, c.min_score, c.max_score);
  }
  return finish(group_dims, acc);
}

LayerRanking most_affected_layers(const std::vector<RobustnessRecord>& records, size_t top_k,
                                  double equal_threshold) {
  const RobustnessTable by_layer = aggregate(records, {Dim::kLayer});
  if (by_layer.cells.size() < 2) {
    throw std::invalid_argument("layer ranking needs records from at least two layers");
  }
  LayerRanking out;
  for (const TableCell& c : by_layer.cells) out.ranking.emplace_back(std::stoi(c.key[0]), c.score);
  std::stable_sort(out.ranking.begin(), out.ranking.end(),
                   [](const auto& a, const auto& b) { return a.second < b.second; });
  const double spread = out.ranking.back().second - out.ranking.front().second;
  out.equal = spread < equal_threshold;
  if (!out.equal) {
    for (size_t i = 0; i < std::min(top_k, out.ranking.size()); ++i) {
      out.most_affected.push_back(out.ranking[i].first);
    }
  }
  return out;
}

std::vector<AffectedRow> most_affected_table(const std::vector<RobustnessRecord>& records,
                                             size_t top_k, double equal_threshold) {
  std::map<std::pair<std::string, std::string>, std::vector<RobustnessRecord>> slices;
  for (const RobustnessRecord& r : records) slices[{r.task, r.language}].push_back(r);
  std::vector<AffectedRow> rows;
  for (const auto& [key, slice] : slices) {
    std::set<int> layers;
    for (const auto& r : slice) layers.insert(r.layer);
    if (layers.size() < 2) continue;
    rows.push_back({key.first, key.second, most_affected_layers(slice, top_k, equal_threshold)});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Output

std::string records_to_csv(const std::vector<RobustnessRecord>& records) {
  std::string out = "task,model,language,layer,perturbation,a_clean,a_perturbed,n_examples,score\n";
  for (const RobustnessRecord& r : records) {
    out += csv::join({r.task, r.model, r.language, std::to_string(r.layer), r.perturbation,
                      csv::format_double(r.a_clean), csv::format_double(r.a_perturbed),
                      std::to_string(r.n_examples), csv::format_double(r.score)}) +
           "\n";
  }
  return out;
}

std::string table_to_csv(const RobustnessTable& table) {
  std::vector<std::string> header;
  for (Dim d : table.group_dims) header.push_back(dim_name(d));
  header.insert(header.end(), {"score", "weight", "n_records"});
  std::string out = csv::join(header) + "\n";
  for (const TableCell& c : table.cells) {
    std::vector<std::string> row = c.key;
    row.push_back(csv::format_double(c.score));
    row.push_back(csv::format_double(c.weight));
    row.push_back(std::to_string(c.n_records));
    out += csv::join(row) + "\n";
  }
  return out;
}

namespace {

std::pair<std::vector<std::string>, std::vector<std::string>> axes(const RobustnessTable& t) {
  if (t.group_dims.size() != 2) throw std::invalid_argument("pivot needs exactly two dims");
  std::vector<std::string> rows, cols;
  for (const TableCell& c : t.cells) {
    if (std::find(rows.begin(), rows.end(), c.key[0]) == rows.end()) rows.push_back(c.key[0]);
  }
  const std::vector<Dim> col_dim = {t.group_dims[1]};
  std::set<std::vector<std::string>, KeyLess> col_set(KeyLess{&col_dim});
  for (const TableCell& c : t.cells) col_set.insert({c.key[1]});
  for (const auto& k : col_set) cols.push_back(k[0]);
  return {rows, cols};
}

}  // namespace

std::string table_to_pivot_csv(const RobustnessTable& table) {
  auto [rows, cols] = axes(table);
  std::vector<std::string> header = {std::string(dim_name(table.group_dims[0])) + "\\" +
                                     dim_name(table.group_dims[1])};
  header.insert(header.end(), cols.begin(), cols.end());
  std::string out = csv::join(header) + "\n";
  for (const std::string& r : rows) {
    std::vector<std::string> line = {r};
    for (const std::string& c : cols) {
      const TableCell* cell = table.find({r, c});
      line.push_back(cell ? csv::format_double(cell->score) : "");
    }
    out += csv::join(line) + "\n";
  }
  return out;
}

std::string affected_to_csv(const std::vector<AffectedRow>& rows) {
  std::string out = "task,language,most_affected_layers\n";
  for (const AffectedRow& r : rows) {
    std::string layers;
    if (r.ranking.equal) {
      layers = "Equal";
    } else {
      for (size_t i = 0; i < r.ranking.most_affected.size(); ++i) {
        if (i) layers += ",";
        layers += std::to_string(r.ranking.most_affected[i]);
      }
    }
    out += csv::join({r.task, r.language, layers}) + "\n";
  }
  return out;
}

std::string table_to_svg_heatmap(const RobustnessTable& table, std::string_view title) {
  auto [rows, cols] = axes(table);
  constexpr int kCellW = 72, kCellH = 24, kLeft = 120, kTop = 60;
  const int width = kLeft + kCellW * static_cast<int>(cols.size()) + 20;
  const int height = kTop + kCellH * static_cast<int>(rows.size()) + 20;
  double lo = INFINITY, hi = -INFINITY;
  for (const TableCell& c : table.cells) {
    lo = std::min(lo, c.score);
    hi = std::max(hi, c.score);
  }
  auto escape = [](std::string_view s) {
    std::string o;
    for (char ch : s) {
      if (ch == '<') o += "&lt;";
      else if (ch == '>') o += "&gt;";
      else if (ch == '&') o += "&amp;";
      else o.push_back(ch);
    }
    return o;
  };
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
                    "\" height=\"" + std::to_string(height) +
                    "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg += "<text x=\"8\" y=\"18\" font-size=\"13\">" + escape(title) + "</text>\n";
  for (size_t j = 0; j < cols.size(); ++j) {
    svg += "<text x=\"" + std::to_string(kLeft + kCellW * static_cast<int>(j) + 4) + "\" y=\"" +
           std::to_string(kTop - 8) + "\">" + escape(cols[j]) + "</text>\n";
  }
  for (size_t i = 0; i < rows.size(); ++i) {
    const int y = kTop + kCellH * static_cast<int>(i);
    svg += "<text x=\"8\" y=\"" + std::to_string(y + 16) + "\">" + escape(rows[i]) + "</text>\n";
    for (size_t j = 0; j < cols.size(); ++j) {
      const TableCell* cell = table.find({rows[i], cols[j]});
      if (!cell) continue;
      const double t = hi > lo ? (cell->score - lo) / (hi - lo) : 1.0;
      // Low scores (most affected) are red, high scores white.
      const int g = static_cast<int>(std::lround(80 + 175 * t));
      const int x = kLeft + kCellW * static_cast<int>(j);
      svg += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) + "\" width=\"" +
             std::to_string(kCellW) + "\" height=\"" + std::to_string(kCellH) +
             "\" fill=\"rgb(255," + std::to_string(g) + "," + std::to_string(g) +
             ")\" stroke=\"#999\"/>\n";
      char label[32];
      std::snprintf(label, sizeof label, "%.3f", cell->score);
      svg += "<text x=\"" + std::to_string(x + 6) + "\" y=\"" + std::to_string(y + 16) + "\">" +
             label + "</text>\n";
    }
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace probekit
