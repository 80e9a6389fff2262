#include "probekit/labels.hpp"

#include <deque>
#include <filesystem>
#include <stdexcept>

#include "json.hpp"
#include "probekit/rng.hpp"

namespace probekit {

using ordered_json = nlohmann::ordered_json;

const char* task_name(TaskKind task) {
  switch (task) {
    case TaskKind::kSentLen: return "SentLen";
    case TaskKind::kTreeDepth: return "TreeDepth";
    case TaskKind::kBShift: return "BShift";
    case TaskKind::kSubjNum: return "SubjNum";
    case TaskKind::kObjNum: return "ObjNum";
    case TaskKind::kVerbGen: return "VerbGen";
    case TaskKind::kVerbNum: return "VerbNum";
    case TaskKind::kVerbPer: return "VerbPer";
  }
  return "?";
}

std::optional<TaskKind> task_from_name(std::string_view name) {
  for (TaskKind t : kAllTasks) {
    if (name == task_name(t)) return t;
  }
  return std::nullopt;
}

const std::vector<std::string>& label_names(TaskKind task) {
  static const std::vector<std::string> kSentLen = {
      "(0-5)", "(6-8)", "(9-12)", "(13-16)", "(17-20)", "(21-25)", "(26-28)", "(29-32)"};
  static const std::vector<std::string> kTreeDepth = {
      "(0-2)", "(3-5)", "(6-8)", "(9-11)", "(12-20)"};
  static const std::vector<std::string> kBShift = {"0", "1"};
  static const std::vector<std::string> kNumber2 = {"singular", "plural"};
  static const std::vector<std::string> kGender = {"masculine", "feminine", "neutral", "any"};
  static const std::vector<std::string> kNumber3 = {"singular", "plural", "any"};
  static const std::vector<std::string> kPerson = {
      "1st person",           "2nd person",           "3rd person",
      "1st person honorific", "2nd person honorific", "3rd person honorific",
      "any"};
  switch (task) {
    case TaskKind::kSentLen: return kSentLen;
    case TaskKind::kTreeDepth: return kTreeDepth;
    case TaskKind::kBShift: return kBShift;
    case TaskKind::kSubjNum:
    case TaskKind::kObjNum: return kNumber2;
    case TaskKind::kVerbGen: return kGender;
    case TaskKind::kVerbNum: return kNumber3;
    case TaskKind::kVerbPer: return kPerson;
  }
  throw std::logic_error("unknown task");
}

size_t class_count(TaskKind task) { return label_names(task).size(); }

std::optional<int> BinSpec::bin_of(long long value) const {
  for (size_t i = 0; i < ranges.size(); ++i) {
    if (value >= ranges[i].first && value <= ranges[i].second) {
      return static_cast<int>(i);
    }
  }
  return std::nullopt;
}

const BinSpec& sentlen_bins() {
  static const BinSpec kBins{TaskKind::kSentLen,
                             {{0, 5}, {6, 8}, {9, 12}, {13, 16},
                              {17, 20}, {21, 25}, {26, 28}, {29, 32}}};
  return kBins;
}

const BinSpec& treedepth_bins() {
  static const BinSpec kBins{TaskKind::kTreeDepth,
                             {{0, 2}, {3, 5}, {6, 8}, {9, 11}, {12, 20}}};
  return kBins;
}

LanguageProfile language_profile(std::string_view code) {
  LanguageProfile p;
  p.code = std::string(code);
  p.gender = {{"m", 0}, {"f", 1}, {"n", 2}, {"any", 3}};
  p.number = {{"sg", 0}, {"pl", 1}, {"any", 2}};
  p.person = {{"1", 0},  {"2", 1},  {"3", 2},  {"1h", 3},
              {"2h", 4}, {"3h", 5}, {"any", 6}};
  if (code == "ml") {
    // No verb morphology is annotated in the Malayalam resources.
    p.has_verb_morph = false;
  } else if (code == "kn" || code == "te") {
    // Dravidian resources also write the neuter as "nm" (non-masculine).
    p.gender.emplace("nm", 2);
  }
  return p;
}

std::string example_id_for(const ssf::SsfDocument& doc, const ssf::SsfSentence& s) {
  if (doc.source_path.empty()) return s.id;
  return std::filesystem::path(doc.source_path).stem().string() + "/" + s.id;
}

TokenSentence tokens_of(const ssf::SsfSentence& s) {
  TokenSentence out;
  out.reserve(ssf::word_count(s));
  for (const ssf::Chunk& c : s.chunks) {
    for (const ssf::WordNode& w : c.words) out.push_back({w.surface, w.pos_tag});
  }
  return out;
}

namespace {

Extraction make(const ssf::SsfSentence& s, TaskKind task, int label,
                const ExtractorConfig& cfg, const std::string& example_id) {
  ProbingExample ex;
  ex.example_id = example_id;
  ex.language = cfg.language;
  ex.task = task;
  ex.tokens = tokens_of(s);
  ex.label = label;
  ex.label_name = label_names(task)[label];
  return {std::move(ex), {}};
}

Extraction skip(std::string reason) { return {std::nullopt, std::move(reason)}; }

}  // namespace

Extraction extract_sentlen(const ssf::SsfSentence& s, const ExtractorConfig& cfg,
                           const std::string& example_id) {
  const size_t n = ssf::word_count(s);
  if (n == 0) return skip("empty sentence");
  auto bin = sentlen_bins().bin_of(static_cast<long long>(n));
  if (!bin) return skip("length out of range");
  return make(s, TaskKind::kSentLen, *bin, cfg, example_id);
}

int tree_depth(const ssf::SsfSentence& s) {
  const ssf::DependencyTree tree = ssf::dependency_edges(s);
  std::vector<std::vector<int>> children(s.chunks.size() + 1);
  for (const auto& e : tree.edges) children[e.parent_chunk_index].push_back(e.child_chunk_index);
  std::deque<std::pair<int, int>> queue{{tree.root_chunk_index, 1}};
  int depth = 0;
  while (!queue.empty()) {
    auto [node, level] = queue.front();
    queue.pop_front();
    depth = std::max(depth, level);
    for (int child : children[node]) queue.emplace_back(child, level + 1);
  }
  return depth;
}

Extraction extract_treedepth(const ssf::SsfSentence& s, const ExtractorConfig& cfg,
                             const std::string& example_id) {
  if (s.chunks.empty()) return skip("empty sentence");
  int depth;
  try {
    depth = tree_depth(s);
  } catch (const ssf::SsfError& e) {
    return skip(ssf::error_kind_name(e.kind()));
  }
  auto bin = treedepth_bins().bin_of(depth);
  if (!bin) return skip("depth out of range");
  return make(s, TaskKind::kTreeDepth, *bin, cfg, example_id);
}

Extraction extract_arg_number(const ssf::SsfSentence& s, ArgRole role,
                              const ExtractorConfig& cfg,
                              const std::string& example_id) {
  const TaskKind task = role == ArgRole::kSubject ? TaskKind::kSubjNum : TaskKind::kObjNum;
  const std::string& relation =
      role == ArgRole::kSubject ? cfg.subject_relation : cfg.object_relation;
  const ssf::Chunk* verb = ssf::main_verb_chunk(s, cfg.verb_chunk_tag);
  if (!verb) return skip("no main verb chunk");
  const std::string* verb_name = verb->name();
  if (!verb_name) return skip("main verb chunk has no name");

  const ssf::Chunk* arg = nullptr;
  for (const ssf::Chunk& c : s.chunks) {
    const std::string* drel = c.drel();
    if (!drel) continue;
    auto [rel, target] = ssf::split_drel(*drel);
    if (rel == relation && target == *verb_name) {
      arg = &c;
      break;
    }
  }
  if (!arg) return skip("no " + relation + " chunk");

  const ssf::WordNode* head = ssf::chunk_head(*arg);
  const std::string& tag = head->pos_tag;
  const bool pos_sg = cfg.singular_noun_tags.contains(tag);
  const bool pos_pl = cfg.plural_noun_tags.contains(tag);
  if (!pos_sg && !pos_pl && !cfg.other_noun_tags.contains(tag)) {
    return skip("head is not a noun");
  }
  const LanguageProfile profile = language_profile(cfg.language);
  const std::string& morph = head->features.number();
  const bool morph_sg = !morph.empty() && morph == profile.singular_marker;
  const bool morph_pl = !morph.empty() && morph == profile.plural_marker;

  std::optional<int> label;
  if (pos_sg) label = 0;
  else if (pos_pl) label = 1;
  if (label) {
    if ((*label == 0 && morph_pl) || (*label == 1 && morph_sg)) {
      return skip("conflicting number evidence");
    }
  } else if (morph_sg) {
    label = 0;
  } else if (morph_pl) {
    label = 1;
  }
  if (!label) return skip("no number evidence");
  return make(s, task, *label, cfg, example_id);
}

Extraction extract_verb_feature(const ssf::SsfSentence& s, VerbFeature which,
                                const ExtractorConfig& cfg,
                                const std::string& example_id) {
  const LanguageProfile profile = language_profile(cfg.language);
  if (!profile.has_verb_morph) return skip("no verb morphology for language");
  const ssf::Chunk* verb = ssf::main_verb_chunk(s, cfg.verb_chunk_tag);
  if (!verb) return skip("no main verb chunk");
  const ssf::WordNode* head = ssf::chunk_head(*verb);

  TaskKind task;
  const std::string* raw;
  const std::map<std::string, int>* table;
  switch (which) {
    case VerbFeature::kGender:
      task = TaskKind::kVerbGen;
      raw = &head->features.gender();
      table = &profile.gender;
      break;
    case VerbFeature::kNumber:
      task = TaskKind::kVerbNum;
      raw = &head->features.number();
      table = &profile.number;
      break;
    case VerbFeature::kPerson:
    default:
      task = TaskKind::kVerbPer;
      raw = &head->features.person();
      table = &profile.person;
      break;
  }
  if (raw->empty()) return skip("empty morph slot");
  auto it = table->find(*raw);
  if (it == table->end()) return skip("UnknownFeatureValue:" + *raw);
  return make(s, task, it->second, cfg, example_id);
}

BShiftResult generate_bshift(const std::vector<BShiftInput>& corpus, uint64_t seed,
                             const ExtractorConfig& cfg) {
  BShiftResult result;
  for (size_t i = 0; i < corpus.size(); ++i) {
    const BShiftInput& in = corpus[i];
    if (in.tokens.size() < 2) {
      result.too_short.push_back(in.example_id);
      continue;
    }
    Rng rng(derive_seed(seed, static_cast<uint64_t>(i)));
    ProbingExample ex;
    ex.example_id = in.example_id;
    ex.language = cfg.language;
    ex.task = TaskKind::kBShift;
    ex.tokens = in.tokens;
    if (rng.bernoulli(cfg.bshift_probability)) {
      const size_t pos = rng.below(in.tokens.size() - 1);
      std::swap(ex.tokens[pos], ex.tokens[pos + 1]);
      ex.label = 1;
      result.swap_positions.emplace(in.example_id, pos);
    }
    ex.label_name = label_names(TaskKind::kBShift)[ex.label];
    result.examples.push_back(std::move(ex));
  }
  return result;
}

Dataset build_dataset(const ssf::SsfDocument& doc, const std::set<TaskKind>& tasks,
                      uint64_t seed, const ExtractorConfig& cfg) {
  return build_dataset(std::vector<ssf::SsfDocument>{doc}, tasks, seed, cfg);
}

Dataset build_dataset(const std::vector<ssf::SsfDocument>& docs,
                      const std::set<TaskKind>& tasks, uint64_t seed,
                      const ExtractorConfig& cfg) {
  Dataset out;
  for (TaskKind t : tasks) {
    out.examples[t];
    out.stats[t];
  }
  auto record = [&](TaskKind t, Extraction&& e) {
    TaskStats& st = out.stats[t];
    ++st.attempted;
    if (e.example) {
      ++st.produced;
      out.examples[t].push_back(std::move(*e.example));
    } else {
      ++st.skipped[e.skip_reason];
    }
  };

  std::vector<BShiftInput> bshift_corpus;
  for (const ssf::SsfDocument& doc : docs) {
    for (const ssf::SsfSentence& s : doc.sentences) {
      const std::string id = example_id_for(doc, s);
      for (TaskKind t : tasks) {
        switch (t) {
          case TaskKind::kSentLen: record(t, extract_sentlen(s, cfg, id)); break;
          case TaskKind::kTreeDepth: record(t, extract_treedepth(s, cfg, id)); break;
          case TaskKind::kSubjNum:
            record(t, extract_arg_number(s, ArgRole::kSubject, cfg, id));
            break;
          case TaskKind::kObjNum:
            record(t, extract_arg_number(s, ArgRole::kObject, cfg, id));
            break;
          case TaskKind::kVerbGen:
            record(t, extract_verb_feature(s, VerbFeature::kGender, cfg, id));
            break;
          case TaskKind::kVerbNum:
            record(t, extract_verb_feature(s, VerbFeature::kNumber, cfg, id));
            break;
          case TaskKind::kVerbPer:
            record(t, extract_verb_feature(s, VerbFeature::kPerson, cfg, id));
            break;
          case TaskKind::kBShift:
            bshift_corpus.push_back({id, tokens_of(s)});
            break;
        }
      }
    }
  }
  if (tasks.contains(TaskKind::kBShift)) {
    BShiftResult bs = generate_bshift(bshift_corpus, seed, cfg);
    TaskStats& st = out.stats[TaskKind::kBShift];
    st.attempted = bshift_corpus.size();
    st.produced = bs.examples.size();
    if (!bs.too_short.empty()) st.skipped["SentenceTooShort"] = bs.too_short.size();
    out.examples[TaskKind::kBShift] = std::move(bs.examples);
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON lines

std::string to_jsonl_line(const ProbingExample& ex) {
  ordered_json j;
  j["id"] = ex.example_id;
  j["lang"] = ex.language;
  j["task"] = task_name(ex.task);
  ordered_json toks = ordered_json::array();
  for (const Token& t : ex.tokens) toks.push_back({t.surface, t.pos_tag});
  j["tokens"] = std::move(toks);
  j["label"] = ex.label;
  j["label_name"] = ex.label_name;
  if (!ex.perturbation.empty()) j["perturbation"] = ex.perturbation;
  return j.dump();
}

ProbingExample from_jsonl_line(std::string_view line) {
  const auto j = nlohmann::json::parse(line);
  ProbingExample ex;
  ex.example_id = j.at("id").get<std::string>();
  ex.language = j.at("lang").get<std::string>();
  const std::string task = j.at("task").get<std::string>();
  auto t = task_from_name(task);
  if (!t) throw std::runtime_error("unknown task '" + task + "'");
  ex.task = *t;
  for (const auto& tok : j.at("tokens")) {
    if (!tok.is_array() || tok.size() != 2) {
      throw std::runtime_error("token entries must be [surface, POS] pairs");
    }
    ex.tokens.push_back({tok[0].get<std::string>(), tok[1].get<std::string>()});
  }
  ex.label = j.at("label").get<int>();
  ex.label_name = j.at("label_name").get<std::string>();
  if (j.contains("perturbation")) ex.perturbation = j["perturbation"].get<std::string>();
  if (ex.label < 0 || static_cast<size_t>(ex.label) >= class_count(ex.task)) {
    throw std::runtime_error("label out of range for task " + task);
  }
  return ex;
}

std::string to_jsonl(const std::vector<ProbingExample>& examples) {
  std::string out;
  for (const ProbingExample& ex : examples) {
    out += to_jsonl_line(ex);
    out += '\n';
  }
  return out;
}

std::vector<ProbingExample> from_jsonl(std::string_view text) {
  std::vector<ProbingExample> out;
  size_t start = 0;
  size_t line_no = 0;
  while (start < text.size()) {
    size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    ++line_no;
    std::string_view line = text.substr(start, nl - start);
    start = nl + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.push_back(from_jsonl_line(line));
    } catch (const std::exception& e) {
      throw std::runtime_error("JSONL line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::string stats_to_json(TaskKind task, const TaskStats& stats) {
  ordered_json j;
  j["task"] = task_name(task);
  j["attempted"] = stats.attempted;
  j["produced"] = stats.produced;
  ordered_json skipped = ordered_json::object();
  for (const auto& [reason, n] : stats.skipped) skipped[reason] = n;
  j["skipped"] = std::move(skipped);
  return j.dump(2) + "\n";
}

}  // namespace probekit
