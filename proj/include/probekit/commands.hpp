#pragma once

// Pipeline commands behind the probekit executable. Each returns a process
// exit code and writes a manifest.json into its output directory last, so a
// directory with a manifest is complete.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "probekit/labels.hpp"
#include "probekit/perturb.hpp"

namespace probekit {

enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 1,
  kExitConfig = 2,
  kExitInternal = 3,
};

// Bad flags, unreadable or malformed config files.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input data that fails validation.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

const char* tool_version();

struct CommonOptions {
  std::filesystem::path out;
  bool force = false;
  std::optional<uint64_t> seed;
  std::optional<std::filesystem::path> config;
};

// Streams for progress messages and machine-readable reports.
struct CommandIo {
  std::ostream* report;
  std::ostream* log;
};
CommandIo default_io();

// Config files are JSON objects whose keys mirror the struct fields; unknown
// keys raise ConfigError.
ExtractorConfig extractor_config_from_json(std::string_view text);
PerturbConfig perturb_config_from_json(std::string_view text);

std::vector<TaskKind> parse_task_list(const std::vector<std::string>& names);
std::vector<PerturbationKind> parse_kind_list(const std::vector<std::string>& names);

struct ValidateOptions {
  std::vector<std::filesystem::path> inputs;
  // Optional: also write validation.jsonl and a manifest here.
  std::optional<std::filesystem::path> out;
  bool force = false;
};
// One JSON line per file status and per error. Exit 0 iff no errors.
int cmd_validate(const ValidateOptions& opt, const CommandIo& io = default_io());

struct BuildDatasetOptions {
  std::vector<std::filesystem::path> inputs;
  std::vector<std::string> tasks;  // empty: all eight
  std::optional<std::string> language;
  CommonOptions common;
};
// Writes <Task>.jsonl and <Task>.stats.json for every requested task, plus
// phrases.jsonl for AppendR.
int cmd_build_dataset(const BuildDatasetOptions& opt, const CommandIo& io = default_io());

struct PerturbOptions {
  std::filesystem::path dataset;
  std::vector<std::string> kinds;  // empty: all thirteen
  std::vector<std::string> tasks;  // empty: every task file present
  CommonOptions common;
};
// Writes <Kind>/<Task>.jsonl and <Kind>/<Task>.stats.json.
int cmd_perturb(const PerturbOptions& opt, const CommandIo& io = default_io());

struct FixtureEmbedOptions {
  std::filesystem::path dataset;
  int layers = 13;
  int dim = 64;
  std::optional<std::string> signal;  // "layers=7;strength=5"
  std::string model = "fixture";
  CommonOptions common;
};
// Mirrors every dataset .jsonl below `dataset` as .prbemb + .prbemb.meta.json.
int cmd_fixture_embed(const FixtureEmbedOptions& opt, const CommandIo& io = default_io());

struct ProbeOptions {
  // Paired element-wise: embeddings[i] holds the vectors for dataset[i].
  std::vector<std::filesystem::path> datasets;
  std::vector<std::filesystem::path> embeddings;
  std::vector<int> layers;  // empty: all
  std::vector<std::string> tasks;
  int jobs = 1;
  CommonOptions common;
};
// Writes results.csv.
int cmd_probe(const ProbeOptions& opt, const CommandIo& io = default_io());

struct ReportOptions {
  std::vector<std::filesystem::path> results;
  // Each entry is a comma-separated dim list; empty: the six standard pairs.
  std::vector<std::string> group_by;
  int top_k = 3;
  bool plots = false;
  CommonOptions common;
};
// Writes records.csv, one table_<dims>.csv per grouping (plus a pivot and
// optional SVG for pairs) and most_affected_layers.csv.
int cmd_report(const ReportOptions& opt, const CommandIo& io = default_io());

}  // namespace probekit
