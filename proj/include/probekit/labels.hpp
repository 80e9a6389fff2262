#pragma once

// Probing-task label extraction from parsed SSF sentences.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "probekit/ssf.hpp"

namespace probekit {

enum class TaskKind {
  kSentLen,
  kTreeDepth,
  kBShift,
  kSubjNum,
  kObjNum,
  kVerbGen,
  kVerbNum,
  kVerbPer,
};

inline constexpr std::array<TaskKind, 8> kAllTasks = {
    TaskKind::kSentLen, TaskKind::kTreeDepth, TaskKind::kBShift,
    TaskKind::kSubjNum, TaskKind::kObjNum,    TaskKind::kVerbGen,
    TaskKind::kVerbNum, TaskKind::kVerbPer,
};

const char* task_name(TaskKind task);
std::optional<TaskKind> task_from_name(std::string_view name);

// Class counts and label names, in label-index order.
size_t class_count(TaskKind task);
const std::vector<std::string>& label_names(TaskKind task);

struct Token {
  std::string surface;
  std::string pos_tag;

  bool operator==(const Token&) const = default;
  auto operator<=>(const Token&) const = default;
};

using TokenSentence = std::vector<Token>;

struct ProbingExample {
  std::string example_id;
  std::string language;
  TaskKind task = TaskKind::kSentLen;
  TokenSentence tokens;
  int label = 0;
  std::string label_name;
  // Set on perturbed copies; empty for clean examples.
  std::string perturbation;

  bool operator==(const ProbingExample&) const = default;
};

// Inclusive integer ranges; the declared domain is [front.lo, back.hi].
struct BinSpec {
  TaskKind task;
  std::vector<std::pair<int, int>> ranges;

  std::optional<int> bin_of(long long value) const;
  int domain_min() const { return ranges.front().first; }
  int domain_max() const { return ranges.back().second; }
};

const BinSpec& sentlen_bins();
const BinSpec& treedepth_bins();

// Raw morph values → label indices, per language.
struct LanguageProfile {
  std::string code;
  bool has_verb_morph = true;
  std::map<std::string, int> gender;  // VerbGen labels
  std::map<std::string, int> number;  // VerbNum labels
  std::map<std::string, int> person;  // VerbPer labels
  std::string singular_marker = "sg";
  std::string plural_marker = "pl";
};

// Known profiles: hi, kn, ml, mr, te, ur. Unknown codes get the default
// mapping with verb morphology enabled.
LanguageProfile language_profile(std::string_view code);

struct ExtractorConfig {
  std::string language = "hi";
  std::string subject_relation = "k1";
  std::string object_relation = "k2";
  std::string verb_chunk_tag = std::string(ssf::kFiniteVerbGroupTag);
  // Argument heads must carry one of these noun tags. The singular/plural
  // tags decide first and the af number slot is the fallback; a tag that
  // contradicts the slot leaves the example out. Tagsets that mark plural
  // nouns NN belong in other_noun_tags so the slot decides.
  std::set<std::string> singular_noun_tags = {"NN"};
  std::set<std::string> plural_noun_tags = {"NNS"};
  std::set<std::string> other_noun_tags = {"NNP", "NNPC", "NNC"};
  double bshift_probability = 0.2;
};

enum class ArgRole { kSubject, kObject };
enum class VerbFeature { kGender, kNumber, kPerson };

// Either an example or the reason there is none; reasons are counted in the
// statistics sidecar.
struct Extraction {
  std::optional<ProbingExample> example;
  std::string skip_reason;
};

std::string example_id_for(const ssf::SsfDocument& doc, const ssf::SsfSentence& s);

TokenSentence tokens_of(const ssf::SsfSentence& s);

Extraction extract_sentlen(const ssf::SsfSentence& s, const ExtractorConfig& cfg,
                           const std::string& example_id);

// BFS level count from the root, root at level 1.
int tree_depth(const ssf::SsfSentence& s);

Extraction extract_treedepth(const ssf::SsfSentence& s, const ExtractorConfig& cfg,
                             const std::string& example_id);

Extraction extract_arg_number(const ssf::SsfSentence& s, ArgRole role,
                              const ExtractorConfig& cfg,
                              const std::string& example_id);

Extraction extract_verb_feature(const ssf::SsfSentence& s, VerbFeature which,
                                const ExtractorConfig& cfg,
                                const std::string& example_id);

struct BShiftInput {
  std::string example_id;
  TokenSentence tokens;
};

struct BShiftResult {
  std::vector<ProbingExample> examples;
  // Index of the swapped bigram's left token for each positive, keyed by id.
  std::map<std::string, size_t> swap_positions;
  std::vector<std::string> too_short;  // ids skipped for having < 2 tokens
};

// Each sentence is selected with the configured probability using its own
// stream derived from (seed, position in corpus); a selected sentence gets one
// uniformly chosen adjacent pair swapped and label 1.
BShiftResult generate_bshift(const std::vector<BShiftInput>& corpus, uint64_t seed,
                             const ExtractorConfig& cfg);

struct TaskStats {
  size_t attempted = 0;
  size_t produced = 0;
  std::map<std::string, size_t> skipped;

  bool operator==(const TaskStats&) const = default;
};

struct Dataset {
  std::map<TaskKind, std::vector<ProbingExample>> examples;
  std::map<TaskKind, TaskStats> stats;
};

Dataset build_dataset(const ssf::SsfDocument& doc, const std::set<TaskKind>& tasks,
                      uint64_t seed, const ExtractorConfig& cfg);

// Same, but over several documents treated as one corpus (BShift positions
// run across documents in order).
Dataset build_dataset(const std::vector<ssf::SsfDocument>& docs,
                      const std::set<TaskKind>& tasks, uint64_t seed,
                      const ExtractorConfig& cfg);

// JSON-lines I/O.
std::string to_jsonl_line(const ProbingExample& ex);
ProbingExample from_jsonl_line(std::string_view line);
std::string to_jsonl(const std::vector<ProbingExample>& examples);
std::vector<ProbingExample> from_jsonl(std::string_view text);
std::string stats_to_json(TaskKind task, const TaskStats& stats);

}  // namespace probekit
