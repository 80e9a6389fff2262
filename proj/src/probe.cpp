#include "probekit/probe.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <future>
#include <map>
#include <numeric>
#include <unordered_map>

#include "json.hpp"
#include "probekit/csv.hpp"
#include "probekit/rng.hpp"

namespace probekit {

const char* probe_error_name(ProbeErrorKind kind) {
  switch (kind) {
    case ProbeErrorKind::kClassTooSmall: return "ClassTooSmall";
    case ProbeErrorKind::kInvalidData: return "InvalidData";
    case ProbeErrorKind::kInvalidConfig: return "InvalidConfig";
    case ProbeErrorKind::kNonFiniteLoss: return "NonFiniteLoss";
    case ProbeErrorKind::kAlignmentMismatch: return "AlignmentMismatch";
  }
  return "Unknown";
}

// ---------------------------------------------------------------------------
// Config

void ProbeConfig::validate() const {
  auto bad = [](const std::string& m) { return ProbeError(ProbeErrorKind::kInvalidConfig, m); };
  if (!(c_inverse_reg > 0.0) || !std::isfinite(c_inverse_reg)) throw bad("c_inverse_reg must be > 0");
  if (penalty != "l2") throw bad("only the l2 penalty is supported");
  if (objective_mode != "multinomial") throw bad("only the multinomial objective is supported");
  if (max_iterations < 1) throw bad("max_iterations must be >= 1");
  if (!(gradient_tolerance > 0.0)) throw bad("gradient_tolerance must be > 0");
  if (folds < 2) throw bad("folds must be >= 2");
}

ProbeConfig ProbeConfig::from_json(std::string_view text) {
  ProbeConfig cfg;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ProbeError(ProbeErrorKind::kInvalidConfig, e.what());
  }
  if (!j.is_object()) throw ProbeError(ProbeErrorKind::kInvalidConfig, "expected an object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "c_inverse_reg") cfg.c_inverse_reg = value.get<double>();
      else if (key == "penalty") cfg.penalty = value.get<std::string>();
      else if (key == "objective_mode") cfg.objective_mode = value.get<std::string>();
      else if (key == "max_iterations") cfg.max_iterations = value.get<int>();
      else if (key == "gradient_tolerance") cfg.gradient_tolerance = value.get<double>();
      else if (key == "folds") cfg.folds = value.get<int>();
      else if (key == "seed") cfg.seed = value.get<uint64_t>();
      else if (key == "standardize") cfg.standardize = value.get<bool>();
      else throw ProbeError(ProbeErrorKind::kInvalidConfig, "unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ProbeError(ProbeErrorKind::kInvalidConfig, e.what());
  }
  cfg.validate();
  return cfg;
}

std::string ProbeConfig::to_json() const {
  nlohmann::ordered_json j;
  j["c_inverse_reg"] = c_inverse_reg;
  j["penalty"] = penalty;
  j["objective_mode"] = objective_mode;
  j["max_iterations"] = max_iterations;
  j["gradient_tolerance"] = gradient_tolerance;
  j["folds"] = folds;
  j["seed"] = seed;
  j["standardize"] = standardize;
  return j.dump();
}

void LabeledMatrix::validate(size_t min_per_class) const {
  auto bad = [](const std::string& m) { return ProbeError(ProbeErrorKind::kInvalidData, m); };
  if (class_count < 2) throw bad("class_count must be >= 2");
  if (static_cast<size_t>(x.rows()) != y.size()) throw bad("x rows and y length differ");
  if (!x.allFinite()) throw bad("x has non-finite entries");
  std::vector<size_t> counts(class_count, 0);
  for (int label : y) {
    if (label < 0 || label >= class_count) throw bad("label out of range");
    ++counts[label];
  }
  for (int c = 0; c < class_count; ++c) {
    if (counts[c] < min_per_class) {
      throw ProbeError(min_per_class > 1 ? ProbeErrorKind::kClassTooSmall : ProbeErrorKind::kInvalidData,
                       "class " + std::to_string(c) + " has " + std::to_string(counts[c]) +
                           " rows, needs " + std::to_string(min_per_class));
    }
  }
}

// ---------------------------------------------------------------------------
// Model

namespace {

Eigen::MatrixXd apply_standardization(const ProbeModel& m, const Eigen::MatrixXd& x) {
  if (m.feature_mean.size() == 0) return x;
  return (x.rowwise() - m.feature_mean.transpose()).array().rowwise() /
         m.feature_scale.transpose().array();
}

}  // namespace

Eigen::MatrixXd ProbeModel::scores(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd s = apply_standardization(*this, x) * weights.transpose();
  s.rowwise() += bias.transpose();
  return s;
}

namespace {

// Objective accumulated in extended precision so that differences between
// nearby iterates stay resolvable when J is large.
long double objective_ld(const Eigen::MatrixXd& x, const std::vector<int>& y,
                         const Eigen::MatrixXd& weights, const Eigen::VectorXd& bias,
                         double c, Eigen::MatrixXd* grad_weights, Eigen::VectorXd* grad_bias) {
  const Eigen::Index n = x.rows();
  const Eigen::Index k = weights.rows();
  Eigen::MatrixXd s = x * weights.transpose();
  s.rowwise() += bias.transpose();
  long double loss = 0.0L;
  // s becomes softmax(s) - onehot(y) row by row.
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index top = 0;
    const double m = s.row(i).maxCoeff(&top);
    // -log softmax[y] = (m - s_y) + log1p(sum over j != top of exp(s_j - m))
    double rest = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (j != top) rest += std::exp(s(i, j) - m);
    }
    loss += static_cast<long double>(m - s(i, y[i])) + std::log1p(rest);
    if (grad_weights || grad_bias) {
      const double z = 1.0 + rest;
      for (Eigen::Index j = 0; j < k; ++j) s(i, j) = std::exp(s(i, j) - m) / z;
      s(i, y[i]) -= 1.0;
    }
  }
  if (grad_weights) *grad_weights = weights + c * (s.transpose() * x);
  if (grad_bias) *grad_bias = c * s.colwise().sum().transpose();
  long double reg = 0.0L;
  for (Eigen::Index j = 0; j < weights.size(); ++j) {
    reg += static_cast<long double>(weights.data()[j]) * weights.data()[j];
  }
  return 0.5L * reg + static_cast<long double>(c) * loss;
}

}  // namespace

double probe_objective(const Eigen::MatrixXd& x, const std::vector<int>& y,
                       const Eigen::MatrixXd& weights, const Eigen::VectorXd& bias,
                       double c, Eigen::MatrixXd* grad_weights, Eigen::VectorXd* grad_bias) {
  return static_cast<double>(objective_ld(x, y, weights, bias, c, grad_weights, grad_bias));
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct Problem {
  const Eigen::MatrixXd& x;
  const std::vector<int>& y;
  Eigen::Index k;
  Eigen::Index d;
  double c;

  long double eval(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const {
    Eigen::Map<const Eigen::MatrixXd> w(theta.data(), k, d);
    Eigen::VectorXd b = theta.tail(k);
    Eigen::MatrixXd gw;
    Eigen::VectorXd gb;
    const long double f = objective_ld(x, y, w, b, c, &gw, &gb);
    grad.resize(theta.size());
    grad.head(k * d) = Eigen::Map<const Eigen::VectorXd>(gw.data(), k * d);
    grad.tail(k) = gb;
    return f;
  }
};

}  // namespace

TrainResult train(const LabeledMatrix& data, const ProbeConfig& cfg) {
  cfg.validate();
  data.validate(1);
  const Eigen::Index k = data.class_count;
  const Eigen::Index d = data.x.cols();

  ProbeModel model;
  Eigen::MatrixXd xs;
  const Eigen::MatrixXd* x = &data.x;
  if (cfg.standardize) {
    model.feature_mean = data.x.colwise().mean().transpose();
    Eigen::MatrixXd centered = data.x.rowwise() - model.feature_mean.transpose();
    model.feature_scale =
        (centered.colwise().squaredNorm() / static_cast<double>(data.x.rows())).cwiseSqrt().transpose();
    for (Eigen::Index j = 0; j < d; ++j) {
      if (model.feature_scale(j) == 0.0) model.feature_scale(j) = 1.0;
    }
    xs = centered.array().rowwise() / model.feature_scale.transpose().array();
    x = &xs;
  }

  const Problem problem{*x, data.y, k, d, cfg.c_inverse_reg};
  const Eigen::Index p = k * d + k;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd grad;
  long double f = problem.eval(theta, grad);

  TrainResult result;
  result.initial_objective = static_cast<double>(f);
  result.objective_trace.push_back(static_cast<double>(f));

  constexpr int kMemory = 10;
  constexpr double kArmijo = 1e-4;
  constexpr int kMaxBacktracks = 60;
  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> history;  // (s, y)

  auto check_finite = [&](double value, int iter) {
    if (!std::isfinite(value)) {
      throw ProbeError(ProbeErrorKind::kNonFiniteLoss,
                       "objective is not finite at iteration " + std::to_string(iter));
    }
  };
  check_finite(f, 0);

  result.termination = "max_iterations";
  int iter = 0;
  bool retried_steepest = false;
  while (true) {
    const double gnorm = grad.lpNorm<Eigen::Infinity>();
    if (gnorm < cfg.gradient_tolerance) {
      result.termination = "converged";
      break;
    }
    if (iter >= cfg.max_iterations) break;

    // Two-loop recursion.
    Eigen::VectorXd q = grad;
    std::vector<double> alpha(history.size());
    for (size_t i = history.size(); i-- > 0;) {
      const auto& [s, yv] = history[i];
      alpha[i] = s.dot(q) / yv.dot(s);
      q -= alpha[i] * yv;
    }
    if (!history.empty()) {
      const auto& [s, yv] = history.back();
      q *= s.dot(yv) / yv.squaredNorm();
    } else {
      q /= std::max(1.0, grad.norm());
    }
    for (size_t i = 0; i < history.size(); ++i) {
      const auto& [s, yv] = history[i];
      const double beta = yv.dot(q) / yv.dot(s);
      q += (alpha[i] - beta) * s;
    }
    Eigen::VectorXd direction = -q;
    double slope = grad.dot(direction);
    if (!(slope < 0.0)) {
      history.clear();
      direction = -grad / std::max(1.0, grad.norm());
      slope = grad.dot(direction);
    }

    double step = 1.0;
    Eigen::VectorXd next_grad;
    Eigen::VectorXd next_theta;
    long double next_f = f;
    bool accepted = false;
    for (int bt = 0; bt < kMaxBacktracks; ++bt) {
      next_theta = theta + step * direction;
      next_f = problem.eval(next_theta, next_grad);
      if (!std::isfinite(next_f)) {
        step *= 0.5;
        continue;
      }
      if (next_f - f <= kArmijo * step * slope &&
          static_cast<double>(next_f) <= static_cast<double>(f)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    ++iter;
    if (!accepted) {
      if (!history.empty() && !retried_steepest) {
        history.clear();
        retried_steepest = true;
        continue;
      }
      result.termination = "no_progress";
      break;
    }
    retried_steepest = false;
    check_finite(next_f, iter);

    Eigen::VectorXd s = next_theta - theta;
    Eigen::VectorXd yv = next_grad - grad;
    if (s.dot(yv) > 1e-12 * s.norm() * yv.norm()) {
      history.emplace_back(std::move(s), std::move(yv));
      if (history.size() > kMemory) history.pop_front();
    }
    theta = std::move(next_theta);
    grad = std::move(next_grad);
    f = next_f;
    result.objective_trace.push_back(static_cast<double>(f));
  }

  result.iterations = iter;
  result.final_objective = static_cast<double>(f);
  result.final_gradient_norm = grad.lpNorm<Eigen::Infinity>();
  model.weights = Eigen::Map<const Eigen::MatrixXd>(theta.data(), k, d);
  model.bias = theta.tail(k);
  result.model = std::move(model);
  return result;
}

std::vector<int> predict_from_scores(const Eigen::MatrixXd& scores) {
  std::vector<int> out(static_cast<size_t>(scores.rows()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    int best = 0;
    for (Eigen::Index j = 1; j < scores.cols(); ++j) {
      if (scores(i, j) > scores(i, best)) best = static_cast<int>(j);
    }
    out[static_cast<size_t>(i)] = best;
  }
  return out;
}

std::vector<int> predict(const ProbeModel& model, const Eigen::MatrixXd& x) {
  return predict_from_scores(model.scores(x));
}

double evaluate(const ProbeModel& model, const Eigen::MatrixXd& x, const std::vector<int>& y) {
  if (static_cast<size_t>(x.rows()) != y.size()) {
    throw ProbeError(ProbeErrorKind::kInvalidData, "x rows and y length differ");
  }
  if (y.empty()) return 0.0;
  const std::vector<int> pred = predict(model, x);
  size_t correct = 0;
  for (size_t i = 0; i < y.size(); ++i) correct += pred[i] == y[i];
  return static_cast<double>(correct) / static_cast<double>(y.size());
}

// ---------------------------------------------------------------------------
// Cross-validation

std::vector<Fold> stratified_kfold(const std::vector<int>& y, int k, uint64_t seed) {
  if (k < 2) throw ProbeError(ProbeErrorKind::kInvalidConfig, "k must be >= 2");
  std::map<int, std::vector<size_t>> by_class;
  for (size_t i = 0; i < y.size(); ++i) by_class[y[i]].push_back(i);
  for (const auto& [label, members] : by_class) {
    if (members.size() < static_cast<size_t>(k)) {
      throw ProbeError(ProbeErrorKind::kClassTooSmall,
                       "class " + std::to_string(label) + " has " +
                           std::to_string(members.size()) + " members, fewer than " +
                           std::to_string(k) + " folds");
    }
  }
  std::vector<Fold> folds(static_cast<size_t>(k));
  std::vector<int> fold_of(y.size(), -1);
  size_t offset = 0;
  for (auto& [label, members] : by_class) {
    Rng rng(derive_seed(seed, static_cast<uint64_t>(label)));
    rng.shuffle(members);
    for (size_t j = 0; j < members.size(); ++j) {
      fold_of[members[j]] = static_cast<int>((offset + j) % static_cast<size_t>(k));
    }
    offset = (offset + members.size()) % static_cast<size_t>(k);
  }
  for (size_t i = 0; i < y.size(); ++i) {
    for (int f = 0; f < k; ++f) {
      (f == fold_of[i] ? folds[f].test : folds[f].train).push_back(i);
    }
  }
  return folds;
}

// ---------------------------------------------------------------------------
// Probing runs

size_t drop_rare_classes(std::vector<ProbingExample>& examples, int folds) {
  std::map<int, size_t> counts;
  for (const ProbingExample& ex : examples) ++counts[ex.label];
  const size_t before = examples.size();
  std::erase_if(examples, [&](const ProbingExample& ex) {
    return counts[ex.label] < static_cast<size_t>(folds);
  });
  return before - examples.size();
}

namespace {

struct Prepared {
  std::vector<size_t> rows;  // embedding row per example
  std::vector<int> y;        // dense labels
  int class_count = 0;
};

Prepared prepare(const EmbeddingSet& embeddings, const std::vector<ProbingExample>& examples) {
  if (examples.empty()) throw ProbeError(ProbeErrorKind::kInvalidData, "no examples");
  std::unordered_map<std::string_view, size_t> row_of;
  row_of.reserve(embeddings.index().size());
  for (size_t i = 0; i < embeddings.index().size(); ++i) row_of.emplace(embeddings.index()[i], i);

  std::map<int, int> dense;
  for (const ProbingExample& ex : examples) dense.emplace(ex.label, 0);
  int next = 0;
  for (auto& [label, idx] : dense) idx = next++;

  Prepared p;
  p.class_count = next;
  for (const ProbingExample& ex : examples) {
    auto it = row_of.find(ex.example_id);
    if (it == row_of.end()) {
      throw ProbeError(ProbeErrorKind::kAlignmentMismatch,
                       "no embedding row for example '" + ex.example_id + "'");
    }
    p.rows.push_back(it->second);
    p.y.push_back(dense[ex.label]);
  }
  if (p.class_count < 2) {
    throw ProbeError(ProbeErrorKind::kInvalidData, "examples carry a single class");
  }
  return p;
}

Eigen::MatrixXd layer_matrix(const EmbeddingSet& embeddings, const std::vector<size_t>& rows,
                             int layer) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(embeddings.dim()));
  for (size_t i = 0; i < rows.size(); ++i) {
    auto v = embeddings.vector(rows[i], static_cast<size_t>(layer));
    for (size_t j = 0; j < v.size(); ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[j];
  }
  return x;
}

ProbeResult probe_layer(const EmbeddingSet& embeddings, const std::vector<ProbingExample>& examples,
                        const Prepared& prep, const std::vector<Fold>& folds, int layer,
                        const ProbeConfig& cfg) {
  if (layer < 0 || static_cast<size_t>(layer) >= embeddings.n_layers()) {
    throw ProbeError(ProbeErrorKind::kInvalidConfig, "layer " + std::to_string(layer) + " out of range");
  }
  const Eigen::MatrixXd x = layer_matrix(embeddings, prep.rows, layer);
  ProbeResult r;
  r.task = task_name(examples.front().task);
  r.model_name = embeddings.header().model_name;
  r.layer = layer;
  r.variant = examples.front().perturbation.empty() ? "clean" : examples.front().perturbation;
  r.language = examples.front().language;
  r.n_examples = examples.size();
  std::string reason = "converged";
  for (const Fold& fold : folds) {
    LabeledMatrix train_data;
    train_data.class_count = prep.class_count;
    train_data.x = x(fold.train, Eigen::all);
    for (size_t i : fold.train) train_data.y.push_back(prep.y[i]);
    const TrainResult tr = train(train_data, cfg);
    if (tr.termination != "converged" && reason == "converged") reason = tr.termination;
    std::vector<int> test_y;
    for (size_t i : fold.test) test_y.push_back(prep.y[i]);
    r.fold_accuracies.push_back(evaluate(tr.model, x(fold.test, Eigen::all), test_y));
  }
  r.mean_accuracy = std::accumulate(r.fold_accuracies.begin(), r.fold_accuracies.end(), 0.0) /
                    static_cast<double>(r.fold_accuracies.size());
  r.termination_reason = reason;
  return r;
}

}  // namespace

ProbeResult run_probe(const EmbeddingSet& embeddings, const std::vector<ProbingExample>& examples,
                      int layer, const ProbeConfig& cfg) {
  cfg.validate();
  const Prepared prep = prepare(embeddings, examples);
  const std::vector<Fold> folds = stratified_kfold(prep.y, cfg.folds, cfg.seed);
  return probe_layer(embeddings, examples, prep, folds, layer, cfg);
}

std::vector<ProbeResult> run_probe_layers(const EmbeddingSet& embeddings,
                                          const std::vector<ProbingExample>& examples,
                                          const ProbeConfig& cfg, int jobs) {
  cfg.validate();
  const Prepared prep = prepare(embeddings, examples);
  // Folds are fixed per dataset so every layer sees the same splits.
  const std::vector<Fold> folds = stratified_kfold(prep.y, cfg.folds, cfg.seed);
  const int n_layers = static_cast<int>(embeddings.n_layers());
  std::vector<ProbeResult> results(static_cast<size_t>(n_layers));
  jobs = std::clamp(jobs, 1, n_layers);
  for (int start = 0; start < n_layers; start += jobs) {
    std::vector<std::future<ProbeResult>> batch;
    for (int layer = start; layer < std::min(n_layers, start + jobs); ++layer) {
      batch.push_back(std::async(jobs > 1 ? std::launch::async : std::launch::deferred,
                                 [&, layer] {
                                   return probe_layer(embeddings, examples, prep, folds, layer, cfg);
                                 }));
    }
    for (size_t b = 0; b < batch.size(); ++b) results[start + b] = batch[b].get();
  }
  return results;
}

// ---------------------------------------------------------------------------
// CSV

std::string results_csv_header(int folds) {
  std::vector<std::string> cols = {"task", "model", "layer", "variant"};
  for (int f = 0; f < folds; ++f) cols.push_back("fold" + std::to_string(f));
  cols.insert(cols.end(), {"mean_accuracy", "termination_reason", "language", "n_examples"});
  return csv::join(cols) + "\n";
}

std::string result_to_csv_row(const ProbeResult& r) {
  std::vector<std::string> cols = {r.task, r.model_name, std::to_string(r.layer), r.variant};
  for (double a : r.fold_accuracies) cols.push_back(csv::format_double(a));
  cols.push_back(csv::format_double(r.mean_accuracy));
  cols.push_back(r.termination_reason);
  cols.push_back(r.language);
  cols.push_back(std::to_string(r.n_examples));
  return csv::join(cols) + "\n";
}

std::vector<ProbeResult> results_from_csv(std::string_view text) {
  const auto rows = csv::parse(text);
  if (rows.empty()) return {};
  const auto& header = rows.front();
  std::map<std::string, size_t> col;
  for (size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* required : {"task", "model", "layer", "variant", "mean_accuracy"}) {
    if (!col.contains(required)) {
      throw std::runtime_error(std::string("results CSV lacks column '") + required + "'");
    }
  }
  std::vector<size_t> fold_cols;
  for (int f = 0; col.contains("fold" + std::to_string(f)); ++f) {
    fold_cols.push_back(col["fold" + std::to_string(f)]);
  }
  std::vector<ProbeResult> out;
  for (size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) {
      throw std::runtime_error("results CSV row " + std::to_string(r + 1) + " has " +
                               std::to_string(row.size()) + " fields, expected " +
                               std::to_string(header.size()));
    }
    ProbeResult pr;
    pr.task = row[col["task"]];
    pr.model_name = row[col["model"]];
    pr.layer = std::stoi(row[col["layer"]]);
    pr.variant = row[col["variant"]];
    for (size_t c : fold_cols) pr.fold_accuracies.push_back(std::stod(row[c]));
    pr.mean_accuracy = std::stod(row[col["mean_accuracy"]]);
    if (col.contains("termination_reason")) pr.termination_reason = row[col["termination_reason"]];
    if (col.contains("language")) pr.language = row[col["language"]];
    pr.n_examples = col.contains("n_examples") ? std::stoul(row[col["n_examples"]]) : 1;
    out.push_back(std::move(pr));
  }
  return out;
}

}  // namespace probekit
