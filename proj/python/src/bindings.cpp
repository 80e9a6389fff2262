#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "probekit/commands.hpp"
#include "probekit/digest.hpp"
#include "probekit/embedding.hpp"
#include "probekit/labels.hpp"
#include "probekit/perturb.hpp"
#include "probekit/probe.hpp"
#include "probekit/robustness.hpp"
#include "probekit/ssf.hpp"

namespace py = pybind11;
using namespace probekit;

namespace {

using TokenPairs = std::vector<std::pair<std::string, std::string>>;

TokenSentence to_tokens(const TokenPairs& pairs) {
  TokenSentence out;
  out.reserve(pairs.size());
  for (const auto& [surface, tag] : pairs) out.push_back({surface, tag});
  return out;
}

TokenPairs from_tokens(const TokenSentence& tokens) {
  TokenPairs out;
  out.reserve(tokens.size());
  for (const Token& t : tokens) out.emplace_back(t.surface, t.pos_tag);
  return out;
}

py::dict example_dict(const ProbingExample& ex) {
  py::dict d;
  d["example_id"] = ex.example_id;
  d["language"] = ex.language;
  d["task"] = task_name(ex.task);
  d["tokens"] = from_tokens(ex.tokens);
  d["label"] = ex.label;
  d["label_name"] = ex.label_name;
  return d;
}

Sha256 digest_from_hex(const std::string& hex) {
  Sha256 out{};
  if (hex.empty()) return out;
  if (hex.size() != 64) throw py::value_error("digest must be 64 hex characters");
  for (size_t i = 0; i < 32; ++i) out[i] = static_cast<uint8_t>(std::stoul(hex.substr(2 * i, 2), nullptr, 16));
  return out;
}

py::dict validate_ssf(const std::string& text) {
  const ssf::ParseReport report = ssf::parse_document_lenient(text);
  py::list errors;
  for (const ssf::SsfError& e : report.errors) {
    py::dict d;
    d["kind"] = ssf::error_kind_name(e.kind());
    d["line"] = e.line();
    d["column"] = e.column();
    d["sentence_id"] = e.sentence_id();
    d["message"] = e.detail();
    errors.append(d);
  }
  py::dict out;
  out["sentences"] = report.document.sentences.size();
  out["errors"] = errors;
  return out;
}

py::dict build_dataset_py(const std::string& text, const std::vector<std::string>& tasks,
                          const std::string& language, uint64_t seed,
                          const std::string& source_path) {
  ExtractorConfig cfg;
  cfg.language = language;
  std::set<TaskKind> kinds;
  if (tasks.empty()) {
    kinds.insert(kAllTasks.begin(), kAllTasks.end());
  } else {
    for (TaskKind t : parse_task_list(tasks)) kinds.insert(t);
  }
  const Dataset ds = build_dataset(ssf::parse_document(text, source_path), kinds, seed, cfg);
  py::dict out;
  for (const auto& [task, examples] : ds.examples) {
    py::list rows;
    for (const ProbingExample& ex : examples) rows.append(example_dict(ex));
    out[task_name(task)] = rows;
  }
  return out;
}

py::tuple perturb_py(const TokenPairs& tokens, const std::string& kind, uint64_t seed,
                     const std::vector<TokenPairs>& phrase_pool) {
  const auto k = perturbation_from_name(kind);
  if (!k) throw py::value_error("unknown perturbation: " + kind);
  std::vector<TokenSentence> pool;
  for (const auto& p : phrase_pool) pool.push_back(to_tokens(p));
  const PerturbOutcome r = perturb(to_tokens(tokens), *k, PerturbConfig{}, pool, seed);
  const char* status = r.status == PerturbStatus::kOk              ? "ok"
                       : r.status == PerturbStatus::kNothingToDrop ? "nothing_to_drop"
                                                                   : "empty_result";
  return py::make_tuple(from_tokens(r.tokens), status);
}

py::dict read_embeddings_py(const std::string& path) {
  const EmbeddingSet set = read_embeddings(path);
  py::array_t<float> data({set.n_sentences(), set.n_layers(), set.dim()});
  std::memcpy(data.mutable_data(), set.data().data(), set.data().size() * sizeof(float));
  py::dict out;
  out["model_name"] = set.header().model_name;
  out["dataset_digest"] = to_hex(set.header().dataset_digest);
  out["ids"] = set.index();
  out["data"] = data;
  return out;
}

void write_embeddings_py(const std::string& path, const std::vector<std::string>& ids,
                         py::array_t<float, py::array::c_style | py::array::forcecast> data,
                         const std::string& model_name, const std::string& digest_hex) {
  if (data.ndim() != 3) throw py::value_error("data must have shape (sentences, layers, dim)");
  EmbeddingHeader h;
  h.n_sentences = static_cast<uint32_t>(data.shape(0));
  h.n_layers = static_cast<uint16_t>(data.shape(1));
  h.dim = static_cast<uint16_t>(data.shape(2));
  h.model_name = model_name;
  h.dataset_digest = digest_from_hex(digest_hex);
  std::vector<float> values(data.data(), data.data() + data.size());
  write_embeddings(EmbeddingSet(h, ids, std::move(values)), path);
}

py::dict train_py(const Eigen::MatrixXd& x, const std::vector<int>& y, int class_count,
                  double c, int max_iterations, double tolerance) {
  LabeledMatrix m{x, y, class_count};
  ProbeConfig cfg;
  cfg.c_inverse_reg = c;
  cfg.max_iterations = max_iterations;
  cfg.gradient_tolerance = tolerance;
  const TrainResult r = train(m, cfg);
  py::dict out;
  out["weights"] = r.model.weights;
  out["bias"] = r.model.bias;
  out["termination"] = r.termination;
  out["iterations"] = r.iterations;
  out["objective"] = r.final_objective;
  out["gradient_norm"] = r.final_gradient_norm;
  out["objective_trace"] = r.objective_trace;
  return out;
}

py::tuple objective_py(const Eigen::MatrixXd& x, const std::vector<int>& y,
                       const Eigen::MatrixXd& w, const Eigen::VectorXd& b, double c) {
  Eigen::MatrixXd gw;
  Eigen::VectorXd gb;
  const double f = probe_objective(x, y, w, b, c, &gw, &gb);
  return py::make_tuple(f, gw, gb);
}

py::dict most_affected_py(const std::vector<std::tuple<int, double, double>>& rows,
                          size_t top_k, double threshold) {
  std::vector<RobustnessRecord> records;
  for (const auto& [layer, clean, perturbed] : rows) {
    records.push_back(make_record("t", "m", "l", layer, "p", clean, perturbed, 1));
  }
  const LayerRanking r = most_affected_layers(records, top_k, threshold);
  py::dict out;
  out["equal"] = r.equal;
  out["most_affected"] = r.most_affected;
  out["ranking"] = r.ranking;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of probekit";
  m.attr("__version__") = tool_version();

  py::register_exception<ssf::SsfError>(m, "SsfError", PyExc_ValueError);
  py::register_exception<EmbeddingError>(m, "EmbeddingError", PyExc_ValueError);
  py::register_exception<ProbeError>(m, "ProbeError", PyExc_ValueError);

  m.def("validate_ssf", &validate_ssf, py::arg("text"),
        "Lenient parse; returns the sentence count and the errors found.");
  m.def("roundtrip_ssf", [](const std::string& text) {
    return ssf::serialize(ssf::parse_document(text));
  }, py::arg("text"));
  m.def("build_dataset", &build_dataset_py, py::arg("text"),
        py::arg("tasks") = std::vector<std::string>{}, py::arg("language") = "hi",
        py::arg("seed") = 0, py::arg("source_path") = "",
        "Examples per task name; ids derive from the file stem of source_path.");
  m.def("perturb", &perturb_py, py::arg("tokens"), py::arg("kind"), py::arg("seed") = 0,
        py::arg("phrase_pool") = std::vector<TokenPairs>{},
        "Returns (tokens, status) for a list of (surface, tag) pairs.");
  m.def("perturbation_names", [] {
    std::vector<std::string> out;
    for (PerturbationKind k : kAllPerturbations) out.emplace_back(perturbation_name(k));
    return out;
  });
  m.def("read_embeddings", &read_embeddings_py, py::arg("path"));
  m.def("write_embeddings", &write_embeddings_py, py::arg("path"), py::arg("ids"),
        py::arg("data"), py::arg("model_name"), py::arg("dataset_digest") = "");
  m.def("probe_objective", &objective_py, py::arg("x"), py::arg("y"), py::arg("weights"),
        py::arg("bias"), py::arg("c") = 20.0, "Returns (J, dJ/dW, dJ/db).");
  m.def("train", &train_py, py::arg("x"), py::arg("y"), py::arg("class_count"),
        py::arg("c") = 20.0, py::arg("max_iterations") = 1000,
        py::arg("tolerance") = 1e-5);
  m.def("stratified_kfold", [](const std::vector<int>& y, int k, uint64_t seed) {
    std::vector<std::pair<std::vector<size_t>, std::vector<size_t>>> out;
    for (Fold& f : stratified_kfold(y, k, seed)) out.emplace_back(std::move(f.train), std::move(f.test));
    return out;
  }, py::arg("y"), py::arg("k") = 5, py::arg("seed") = 0);
  m.def("robustness_score", &robustness_score, py::arg("a_clean"), py::arg("a_perturbed"));
  m.def("most_affected_layers", &most_affected_py, py::arg("rows"), py::arg("top_k") = 1,
        py::arg("threshold") = kEqualThreshold,
        "rows are (layer, a_clean, a_perturbed) triples of one task and language.");
}
