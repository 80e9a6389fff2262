#include "probekit/commands.hpp"

#include <algorithm>
#include <ctime>
#include <iostream>
#include <map>
#include <set>

#include "json.hpp"
#include "probekit/csv.hpp"
#include "probekit/digest.hpp"
#include "probekit/embedding.hpp"
#include "probekit/probe.hpp"
#include "probekit/rng.hpp"
#include "probekit/robustness.hpp"
#include "probekit/ssf.hpp"

#ifndef PROBEKIT_VERSION
#define PROBEKIT_VERSION "0.0.0"
#endif

namespace probekit {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

const char* tool_version() { return PROBEKIT_VERSION; }

CommandIo default_io() { return {&std::cout, &std::cerr}; }

namespace {

constexpr const char* kManifestName = "manifest.json";
constexpr const char* kPhrasesName = "phrases.jsonl";

std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class Manifest {
 public:
  Manifest(std::string command, ordered_json request) {
    j_["command"] = std::move(command);
    j_["request"] = std::move(request);
  }

  ordered_json& config() { return j_["config"]; }
  void add_input(const fs::path& path) { inputs_[path.generic_string()] = to_hex(sha256_file(path)); }
  void set_seed(uint64_t seed) { seed_ = seed; }

  void write(const fs::path& dir) {
    j_["inputs"] = ordered_json::object();
    for (const auto& [path, digest] : inputs_) j_["inputs"][path] = digest;
    j_["seed"] = seed_;
    j_["tool_version"] = tool_version();
    j_["timestamp"] = utc_timestamp();
    write_file(dir / kManifestName, j_.dump(2) + "\n");
  }

 private:
  ordered_json j_;
  std::map<std::string, std::string> inputs_;
  uint64_t seed_ = 0;
};

ordered_json paths_json(const std::vector<fs::path>& paths) {
  ordered_json out = ordered_json::array();
  for (const fs::path& p : paths) out.push_back(p.generic_string());
  return out;
}

// Options shared by every command that writes an output directory. The config
// file enters by content so that editing it invalidates earlier runs.
ordered_json common_json(const CommonOptions& common) {
  ordered_json out;
  out["seed"] = common.seed ? ordered_json(*common.seed) : ordered_json(nullptr);
  out["config"] = common.config && fs::exists(*common.config)
                      ? ordered_json(to_hex(sha256_file(*common.config)))
                      : ordered_json(nullptr);
  return out;
}

// True when `out` holds a finished run of the same request whose inputs are
// unchanged, so the command has nothing to do.
bool already_done(const fs::path& out, bool force, const CommandIo& io,
                  const ordered_json& request) {
  if (out.empty()) throw ConfigError("--out is required");
  const fs::path manifest_path = out / kManifestName;
  if (force || !fs::exists(manifest_path)) return false;
  ordered_json previous;
  try {
    previous = ordered_json::parse(read_file(manifest_path));
  } catch (const nlohmann::json::exception&) {
    *io.log << "unreadable " << manifest_path.generic_string() << "; rerunning\n";
    return false;
  }
  if (!previous.contains("request") || previous["request"] != request) {
    *io.log << "options differ from " << manifest_path.generic_string() << "; rerunning\n";
    return false;
  }
  if (previous.contains("inputs")) {
    for (const auto& [path, digest] : previous["inputs"].items()) {
      if (!fs::is_regular_file(path) || to_hex(sha256_file(path)) != digest) {
        *io.log << "input changed since the last run: " << path << "; rerunning\n";
        return false;
      }
    }
  }
  *io.log << "up to date: " << manifest_path.generic_string()
          << " exists (use --force to rerun)\n";
  return true;
}

std::string read_config(const std::optional<fs::path>& path) {
  if (!path) return {};
  if (!fs::exists(*path)) throw ConfigError("config file not found: " + path->string());
  return read_file(*path);
}

nlohmann::json parse_config_object(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  return j;
}

std::set<std::string> string_set(const nlohmann::json& v) {
  return v.get<std::set<std::string>>();
}

// Runs `body`, translating exceptions into exit codes.
template <typename F>
int guarded(const CommandIo& io, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    *io.log << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ProbeError& e) {
    *io.log << "error: " << e.what() << "\n";
    return e.kind() == ProbeErrorKind::kInvalidConfig ? kExitConfig : kExitValidation;
  } catch (const ValidationError& e) {
    *io.log << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ssf::SsfError& e) {
    *io.log << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const EmbeddingError& e) {
    *io.log << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    *io.log << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

std::vector<fs::path> jsonl_files_below(const fs::path& root) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".jsonl") continue;
    if (entry.path().filename() == kPhrasesName) continue;
    files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::string json_line(const ordered_json& j) { return j.dump() + "\n"; }

}  // namespace

ExtractorConfig extractor_config_from_json(std::string_view text) {
  ExtractorConfig cfg;
  const nlohmann::json j = parse_config_object(text);
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "language") cfg.language = value.get<std::string>();
      else if (key == "subject_relation") cfg.subject_relation = value.get<std::string>();
      else if (key == "object_relation") cfg.object_relation = value.get<std::string>();
      else if (key == "verb_chunk_tag") cfg.verb_chunk_tag = value.get<std::string>();
      else if (key == "singular_noun_tags") cfg.singular_noun_tags = string_set(value);
      else if (key == "plural_noun_tags") cfg.plural_noun_tags = string_set(value);
      else if (key == "other_noun_tags") cfg.other_noun_tags = string_set(value);
      else if (key == "bshift_probability") cfg.bshift_probability = value.get<double>();
      else throw ConfigError("unknown extractor config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(e.what());
  }
  if (!(cfg.bshift_probability >= 0.0 && cfg.bshift_probability <= 1.0)) {
    throw ConfigError("bshift_probability must lie in [0, 1]");
  }
  return cfg;
}

PerturbConfig perturb_config_from_json(std::string_view text) {
  PerturbConfig cfg;
  const nlohmann::json j = parse_config_object(text);
  std::set<std::string> nouns = cfg.pos.noun_tags();
  std::set<std::string> verbs = cfg.pos.verb_tags();
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "noun_tags") {
        nouns = string_set(value);
      } else if (key == "verb_tags") {
        verbs = string_set(value);
      } else if (key == "empty_policy") {
        const auto p = value.get<std::string>();
        if (p == "skip") cfg.empty_policy = EmptyPolicy::kSkip;
        else if (p == "placeholder") cfg.empty_policy = EmptyPolicy::kPlaceholder;
        else throw ConfigError("empty_policy must be 'skip' or 'placeholder'");
      } else if (key == "unk_token") {
        cfg.unk_token = value.get<std::string>();
      } else if (key == "unk_tag") {
        cfg.unk_tag = value.get<std::string>();
      } else {
        throw ConfigError("unknown perturb config key '" + key + "'");
      }
    }
    cfg.pos = PosClassifier(nouns, verbs);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

std::vector<TaskKind> parse_task_list(const std::vector<std::string>& names) {
  if (names.empty()) return {kAllTasks.begin(), kAllTasks.end()};
  std::vector<TaskKind> out;
  for (const std::string& n : names) {
    auto t = task_from_name(n);
    if (!t) throw ConfigError("unknown task '" + n + "'");
    if (std::find(out.begin(), out.end(), *t) == out.end()) out.push_back(*t);
  }
  return out;
}

std::vector<PerturbationKind> parse_kind_list(const std::vector<std::string>& names) {
  if (names.empty()) return {kAllPerturbations.begin(), kAllPerturbations.end()};
  std::vector<PerturbationKind> out;
  for (const std::string& n : names) {
    auto k = perturbation_from_name(n);
    if (!k) throw ConfigError("unknown perturbation '" + n + "'");
    if (std::find(out.begin(), out.end(), *k) == out.end()) out.push_back(*k);
  }
  return out;
}

// ---------------------------------------------------------------------------
// validate

int cmd_validate(const ValidateOptions& opt, const CommandIo& io) {
  return guarded(io, [&] {
    const ordered_json request = {{"inputs", paths_json(opt.inputs)}};
    if (opt.out && already_done(*opt.out, opt.force, io, request)) return int{kExitOk};
    if (opt.inputs.empty()) throw ConfigError("no input files");
    std::string report;
    size_t total_errors = 0;
    Manifest manifest("validate", request);
    for (const fs::path& path : opt.inputs) {
      ordered_json status;
      status["file"] = path.generic_string();
      if (!fs::is_regular_file(path)) {
        status["status"] = "missing";
        status["errors"] = 1;
        report += json_line(status);
        ++total_errors;
        continue;
      }
      manifest.add_input(path);
      const ssf::ParseReport pr =
          ssf::parse_document_lenient(read_file(path), path.generic_string());
      for (const ssf::SsfError& e : pr.errors) {
        ordered_json line;
        line["file"] = path.generic_string();
        line["sentence_id"] = e.sentence_id();
        line["error"] = ssf::error_kind_name(e.kind());
        line["line"] = e.line();
        line["column"] = e.column();
        line["message"] = e.detail();
        report += json_line(line);
      }
      status["status"] = pr.errors.empty() ? "ok" : "error";
      status["sentences"] = pr.document.sentences.size();
      status["errors"] = pr.errors.size();
      report += json_line(status);
      total_errors += pr.errors.size();
    }
    *io.report << report;
    if (opt.out) {
      write_file(*opt.out / "validation.jsonl", report);
      manifest.config()["inputs"] = opt.inputs.size();
      manifest.write(*opt.out);
    }
    return int{total_errors == 0 ? kExitOk : kExitValidation};
  });
}

// ---------------------------------------------------------------------------
// build-dataset

int cmd_build_dataset(const BuildDatasetOptions& opt, const CommandIo& io) {
  return guarded(io, [&] {
    const fs::path& out = opt.common.out;
    const ordered_json request = {{"inputs", paths_json(opt.inputs)},
                                  {"tasks", opt.tasks},
                                  {"language", opt.language ? ordered_json(*opt.language)
                                                            : ordered_json(nullptr)},
                                  {"common", common_json(opt.common)}};
    if (already_done(out, opt.common.force, io, request)) return int{kExitOk};
    ExtractorConfig cfg;
    if (opt.common.config) cfg = extractor_config_from_json(read_config(opt.common.config));
    if (opt.language) cfg.language = *opt.language;
    const std::vector<TaskKind> tasks = parse_task_list(opt.tasks);
    const uint64_t seed = opt.common.seed.value_or(0);
    if (opt.inputs.empty()) throw ConfigError("no input files");

    Manifest manifest("build-dataset", request);
    std::vector<ssf::SsfDocument> docs;
    std::set<std::string> stems;
    for (const fs::path& path : opt.inputs) {
      if (!fs::is_regular_file(path)) throw ConfigError("input not found: " + path.string());
      if (!stems.insert(path.stem().string()).second) {
        throw ValidationError("two inputs share the file stem '" + path.stem().string() +
                              "', which would collide in example ids");
      }
      manifest.add_input(path);
      docs.push_back(ssf::parse_document(read_file(path), path.string()));
    }

    const Dataset ds = build_dataset(docs, std::set<TaskKind>(tasks.begin(), tasks.end()),
                                     seed, cfg);
    fs::create_directories(out);
    for (TaskKind t : tasks) {
      const std::string name = task_name(t);
      write_file(out / (name + ".jsonl"), to_jsonl(ds.examples.at(t)));
      write_file(out / (name + ".stats.json"), stats_to_json(t, ds.stats.at(t)));
      *io.log << name << ": " << ds.stats.at(t).produced << " of "
              << ds.stats.at(t).attempted << " sentences\n";
    }
    std::vector<Phrase> phrases;
    for (const auto& doc : docs) {
      auto p = phrases_from(doc);
      phrases.insert(phrases.end(), std::make_move_iterator(p.begin()),
                     std::make_move_iterator(p.end()));
    }
    write_file(out / kPhrasesName, phrases_to_jsonl(phrases));

    auto& c = manifest.config();
    c["language"] = cfg.language;
    c["tasks"] = ordered_json::array();
    for (TaskKind t : tasks) c["tasks"].push_back(task_name(t));
    c["subject_relation"] = cfg.subject_relation;
    c["object_relation"] = cfg.object_relation;
    c["verb_chunk_tag"] = cfg.verb_chunk_tag;
    c["singular_noun_tags"] = cfg.singular_noun_tags;
    c["plural_noun_tags"] = cfg.plural_noun_tags;
    c["other_noun_tags"] = cfg.other_noun_tags;
    c["bshift_probability"] = cfg.bshift_probability;
    manifest.set_seed(seed);
    manifest.write(out);
    return int{kExitOk};
  });
}

// ---------------------------------------------------------------------------
// perturb

int cmd_perturb(const PerturbOptions& opt, const CommandIo& io) {
  return guarded(io, [&] {
    const fs::path& out = opt.common.out;
    const ordered_json request = {{"dataset", opt.dataset.generic_string()},
                                  {"kinds", opt.kinds},
                                  {"tasks", opt.tasks},
                                  {"common", common_json(opt.common)}};
    if (already_done(out, opt.common.force, io, request)) return int{kExitOk};
    PerturbConfig cfg;
    if (opt.common.config) cfg = perturb_config_from_json(read_config(opt.common.config));
    const std::vector<PerturbationKind> kinds = parse_kind_list(opt.kinds);
    const uint64_t seed = opt.common.seed.value_or(0);
    if (!fs::is_directory(opt.dataset)) {
      throw ConfigError("dataset directory not found: " + opt.dataset.string());
    }

    Manifest manifest("perturb", request);
    std::vector<Phrase> phrases;
    const fs::path phrase_path = opt.dataset / kPhrasesName;
    if (fs::exists(phrase_path)) {
      manifest.add_input(phrase_path);
      phrases = phrases_from_jsonl(read_file(phrase_path));
    }

    std::vector<TaskKind> tasks;
    if (opt.tasks.empty()) {
      for (TaskKind t : kAllTasks) {
        if (fs::exists(opt.dataset / (std::string(task_name(t)) + ".jsonl"))) tasks.push_back(t);
      }
    } else {
      tasks = parse_task_list(opt.tasks);
    }
    if (tasks.empty()) throw ValidationError("no task files in " + opt.dataset.string());

    const std::set<PerturbationKind> kind_set(kinds.begin(), kinds.end());
    for (TaskKind t : tasks) {
      const std::string name = task_name(t);
      const fs::path in = opt.dataset / (name + ".jsonl");
      if (!fs::exists(in)) throw ValidationError("missing task file " + in.string());
      manifest.add_input(in);
      const std::vector<ProbingExample> examples = from_jsonl(read_file(in));
      if (std::any_of(examples.begin(), examples.end(),
                      [](const ProbingExample& e) { return !e.perturbation.empty(); })) {
        throw ValidationError(in.string() + " already holds perturbed examples");
      }
      bool appendr_without_pool = phrases.empty() && kind_set.contains(PerturbationKind::kAppendR) &&
                                  t != TaskKind::kBShift && !examples.empty();
      std::set<PerturbationKind> run_kinds = kind_set;
      if (appendr_without_pool) {
        *io.log << "warning: no phrases available; AppendR skipped for " << name << "\n";
        run_kinds.erase(PerturbationKind::kAppendR);
      }
      const PerturbedDataset pd = perturb_dataset(examples, run_kinds, cfg, phrases, seed);
      for (PerturbationKind k : kinds) {
        if (!run_kinds.contains(k)) continue;
        const fs::path dir = out / perturbation_name(k);
        write_file(dir / (name + ".jsonl"), to_jsonl(pd.examples.at(k)));
        write_file(dir / (name + ".stats.json"), perturb_stats_to_json(k, t, pd.stats.at(k)));
      }
    }

    auto& c = manifest.config();
    c["dataset"] = opt.dataset.generic_string();
    c["kinds"] = ordered_json::array();
    for (PerturbationKind k : kinds) c["kinds"].push_back(perturbation_name(k));
    c["tasks"] = ordered_json::array();
    for (TaskKind t : tasks) c["tasks"].push_back(task_name(t));
    c["noun_tags"] = cfg.pos.noun_tags();
    c["verb_tags"] = cfg.pos.verb_tags();
    c["empty_policy"] = cfg.empty_policy == EmptyPolicy::kSkip ? "skip" : "placeholder";
    c["unk_token"] = cfg.unk_token;
    c["unk_tag"] = cfg.unk_tag;
    manifest.set_seed(seed);
    manifest.write(out);
    return int{kExitOk};
  });
}

// ---------------------------------------------------------------------------
// fixture-embed

int cmd_fixture_embed(const FixtureEmbedOptions& opt, const CommandIo& io) {
  return guarded(io, [&] {
    const fs::path& out = opt.common.out;
    const ordered_json request = {
        {"dataset", opt.dataset.generic_string()},
        {"layers", opt.layers},
        {"dim", opt.dim},
        {"signal", opt.signal ? ordered_json(*opt.signal) : ordered_json(nullptr)},
        {"model", opt.model},
        {"common", common_json(opt.common)}};
    if (already_done(out, opt.common.force, io, request)) return int{kExitOk};
    if (opt.layers < 1 || opt.layers > 65535) throw ConfigError("--layers must be in [1, 65535]");
    if (opt.dim < 1 || opt.dim > 65535) throw ConfigError("--dim must be in [1, 65535]");
    std::optional<SignalSpec> signal;
    if (opt.signal) {
      try {
        signal = parse_signal_spec(*opt.signal);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
    if (!fs::is_directory(opt.dataset)) {
      throw ConfigError("dataset directory not found: " + opt.dataset.string());
    }
    const uint64_t seed = opt.common.seed.value_or(0);

    Manifest manifest("fixture-embed", request);
    size_t written = 0;
    for (const fs::path& in : jsonl_files_below(opt.dataset)) {
      const fs::path rel = fs::relative(in, opt.dataset);
      manifest.add_input(in);
      const std::string text = read_file(in);
      const std::vector<ProbingExample> examples = from_jsonl(text);
      if (examples.empty()) {
        *io.log << "skipping empty dataset " << rel.generic_string() << "\n";
        continue;
      }
      EmbeddingSet set;
      try {
        set = generate_fixture(examples, static_cast<uint16_t>(opt.layers),
                               static_cast<uint16_t>(opt.dim), seed, signal, opt.model,
                               sha256(text), rel.generic_string());
      } catch (const std::invalid_argument& e) {
        throw ConfigError(rel.generic_string() + ": " + e.what());
      }
      fs::path target = out / rel;
      target.replace_extension(".prbemb");
      write_embeddings(set, target);
      write_file(target.string() + ".meta.json", embedding_meta_json(set, false, "fixture"));
      ++written;
    }
    if (written == 0) throw ValidationError("no non-empty datasets below " + opt.dataset.string());

    auto& c = manifest.config();
    c["dataset"] = opt.dataset.generic_string();
    c["layers"] = opt.layers;
    c["dim"] = opt.dim;
    c["model"] = opt.model;
    if (signal) {
      c["signal"]["layers"] = signal->layers;
      c["signal"]["strength"] = signal->strength;
    } else {
      c["signal"] = nullptr;
    }
    manifest.set_seed(seed);
    manifest.write(out);
    return int{kExitOk};
  });
}

// ---------------------------------------------------------------------------
// probe

int cmd_probe(const ProbeOptions& opt, const CommandIo& io) {
  return guarded(io, [&] {
    const fs::path& out = opt.common.out;
    const ordered_json request = {{"datasets", paths_json(opt.datasets)},
                                  {"embeddings", paths_json(opt.embeddings)},
                                  {"layers", opt.layers},
                                  {"tasks", opt.tasks},
                                  {"common", common_json(opt.common)}};
    if (already_done(out, opt.common.force, io, request)) return int{kExitOk};
    ProbeConfig cfg;
    if (opt.common.config) cfg = ProbeConfig::from_json(read_config(opt.common.config));
    if (opt.common.seed) cfg.seed = *opt.common.seed;
    cfg.validate();
    if (opt.datasets.empty()) throw ConfigError("no --dataset given");
    if (opt.datasets.size() != opt.embeddings.size()) {
      throw ConfigError("each --dataset needs a matching --embeddings directory");
    }
    if (opt.jobs < 1) throw ConfigError("--jobs must be positive");
    std::set<TaskKind> task_filter;
    for (TaskKind t : parse_task_list(opt.tasks)) task_filter.insert(t);

    Manifest manifest("probe", request);
    std::vector<ProbeResult> results;
    ordered_json skipped = ordered_json::array();
    for (size_t p = 0; p < opt.datasets.size(); ++p) {
      if (!fs::is_directory(opt.datasets[p])) {
        throw ConfigError("dataset directory not found: " + opt.datasets[p].string());
      }
      for (const fs::path& in : jsonl_files_below(opt.datasets[p])) {
        const fs::path rel = fs::relative(in, opt.datasets[p]);
        auto task = task_from_name(in.stem().string());
        if (!task || !task_filter.contains(*task)) continue;
        const std::string text = read_file(in);
        std::vector<ProbingExample> examples = from_jsonl(text);
        auto skip = [&](const std::string& why) {
          *io.log << "skipping " << rel.generic_string() << ": " << why << "\n";
          skipped.push_back({{"dataset", in.generic_string()}, {"reason", why}});
        };
        if (examples.empty()) {
          skip("empty dataset");
          continue;
        }
        fs::path emb_path = opt.embeddings[p] / rel;
        emb_path.replace_extension(".prbemb");
        if (!fs::exists(emb_path)) {
          throw ValidationError("no embeddings for " + in.string() + " at " + emb_path.string());
        }
        manifest.add_input(in);
        manifest.add_input(emb_path);
        const EmbeddingSet set = read_embeddings(emb_path, sha256(text));
        const size_t dropped = drop_rare_classes(examples, cfg.folds);
        if (dropped > 0) {
          *io.log << rel.generic_string() << ": dropped " << dropped
                  << " examples of classes with fewer than " << cfg.folds << " members\n";
        }
        std::set<int> present;
        for (const auto& e : examples) present.insert(e.label);
        if (present.size() < 2) {
          skip("fewer than two classes with enough examples for stratified folds");
          continue;
        }
        std::vector<ProbeResult> layer_results = run_probe_layers(set, examples, cfg, opt.jobs);
        for (ProbeResult& r : layer_results) {
          if (!opt.layers.empty() &&
              std::find(opt.layers.begin(), opt.layers.end(), r.layer) == opt.layers.end()) {
            continue;
          }
          results.push_back(std::move(r));
        }
      }
    }
    std::sort(results.begin(), results.end(), [](const ProbeResult& a, const ProbeResult& b) {
      return std::tie(a.task, a.language, a.model_name, a.variant, a.layer) <
             std::tie(b.task, b.language, b.model_name, b.variant, b.layer);
    });
    std::string csv_text = results_csv_header(cfg.folds);
    for (const ProbeResult& r : results) csv_text += result_to_csv_row(r);
    write_file(out / "results.csv", csv_text);
    *io.log << "wrote " << results.size() << " probe results\n";

    auto& c = manifest.config();
    c["probe"] = ordered_json::parse(cfg.to_json());
    c["datasets"] = ordered_json::array();
    for (const auto& d : opt.datasets) c["datasets"].push_back(d.generic_string());
    c["embeddings"] = ordered_json::array();
    for (const auto& e : opt.embeddings) c["embeddings"].push_back(e.generic_string());
    c["layers"] = opt.layers;
    c["skipped"] = skipped;
    manifest.set_seed(cfg.seed);
    manifest.write(out);
    return int{kExitOk};
  });
}

// ---------------------------------------------------------------------------
// report

namespace {

std::string dims_label(const std::vector<Dim>& dims) {
  std::string s;
  for (Dim d : dims) {
    if (!s.empty()) s += "_";
    s += dim_name(d);
  }
  return s;
}

const std::vector<std::string>& standard_groupings() {
  static const std::vector<std::string> g = {
      "model,language", "model,perturbation", "language,task",
      "model,task",     "language,perturbation", "perturbation,task",
  };
  return g;
}

}  // namespace

int cmd_report(const ReportOptions& opt, const CommandIo& io) {
  return guarded(io, [&] {
    const fs::path& out = opt.common.out;
    const ordered_json request = {{"results", paths_json(opt.results)},
                                  {"group_by", opt.group_by},
                                  {"top_k", opt.top_k},
                                  {"plots", opt.plots},
                                  {"common", common_json(opt.common)}};
    if (already_done(out, opt.common.force, io, request)) return int{kExitOk};
    if (opt.results.empty()) throw ConfigError("no --results given");
    if (opt.top_k < 1) throw ConfigError("--top-k must be positive");
    std::vector<std::vector<Dim>> groupings;
    for (const std::string& g : opt.group_by.empty() ? standard_groupings() : opt.group_by) {
      try {
        groupings.push_back(parse_dims(g));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }

    Manifest manifest("report", request);
    std::vector<ProbeResult> results;
    for (const fs::path& path : opt.results) {
      if (!fs::is_regular_file(path)) throw ConfigError("results file not found: " + path.string());
      manifest.add_input(path);
      std::vector<ProbeResult> part;
      try {
        part = results_from_csv(read_file(path));
      } catch (const std::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
      }
      results.insert(results.end(), part.begin(), part.end());
    }
    const RecordSet rs = build_records(results);
    if (rs.records.empty()) {
      throw ValidationError("no clean/perturbed result pairs to compare");
    }
    if (rs.excluded_zero_clean > 0) {
      *io.log << rs.excluded_zero_clean
              << " records excluded: clean accuracy 0 leaves the score undefined\n";
    }
    if (rs.unmatched > 0) {
      *io.log << rs.unmatched << " perturbed results had no clean counterpart\n";
    }

    fs::create_directories(out);
    write_file(out / "records.csv", records_to_csv(rs.records));
    for (const auto& dims : groupings) {
      const std::string label = dims_label(dims);
      const RobustnessTable table = aggregate(rs.records, dims);
      write_file(out / ("table_" + label + ".csv"), table_to_csv(table));
      if (dims.size() == 2) {
        write_file(out / ("table_" + label + ".pivot.csv"), table_to_pivot_csv(table));
        if (opt.plots) {
          write_file(out / ("table_" + label + ".svg"),
                     table_to_svg_heatmap(table, "robustness: " + std::string(dim_name(dims[0])) +
                                                     " vs " + dim_name(dims[1])));
        }
      }
    }
    write_file(out / "most_affected_layers.csv",
               affected_to_csv(most_affected_table(rs.records, static_cast<size_t>(opt.top_k))));

    auto& c = manifest.config();
    c["group_by"] = ordered_json::array();
    for (const auto& dims : groupings) c["group_by"].push_back(dims_label(dims));
    c["top_k"] = opt.top_k;
    c["equal_threshold"] = kEqualThreshold;
    c["plots"] = opt.plots;
    c["excluded_zero_clean"] = rs.excluded_zero_clean;
    c["unmatched"] = rs.unmatched;
    manifest.write(out);
    return int{kExitOk};
  });
}

}  // namespace probekit
