#pragma once

// Linear probes: L2-regularized multinomial logistic regression trained per
// layer and scored with stratified k-fold cross-validation.
//
// Objective (bias unregularized):
//   J(W, b) = 1/2 ||W||_F^2 + C * sum_i -log softmax(W x_i + b)[y_i]

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "probekit/embedding.hpp"
#include "probekit/labels.hpp"

namespace probekit {

enum class ProbeErrorKind {
  kClassTooSmall,
  kInvalidData,
  kInvalidConfig,
  kNonFiniteLoss,
  kAlignmentMismatch,
};

const char* probe_error_name(ProbeErrorKind kind);

class ProbeError : public std::runtime_error {
 public:
  ProbeError(ProbeErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(probe_error_name(kind)) + ": " + message),
        kind_(kind) {}
  ProbeErrorKind kind() const { return kind_; }

 private:
  ProbeErrorKind kind_;
};

struct ProbeConfig {
  double c_inverse_reg = 20.0;
  std::string penalty = "l2";
  std::string objective_mode = "multinomial";
  int max_iterations = 1000;
  double gradient_tolerance = 1e-5;
  int folds = 5;
  uint64_t seed = 0;
  bool standardize = false;

  void validate() const;
  // Keys mirror the field names; unknown keys are rejected.
  static ProbeConfig from_json(std::string_view text);
  std::string to_json() const;
};

struct LabeledMatrix {
  Eigen::MatrixXd x;  // n x d
  std::vector<int> y;
  int class_count = 2;

  // Throws ProbeError unless every label is in range, class_count >= 2 and
  // each class has at least `min_per_class` rows.
  void validate(size_t min_per_class = 1) const;
};

struct ProbeModel {
  Eigen::MatrixXd weights;  // class_count x d
  Eigen::VectorXd bias;     // class_count
  // Feature standardization fitted on the training rows; empty when off.
  Eigen::VectorXd feature_mean;
  Eigen::VectorXd feature_scale;

  Eigen::MatrixXd scores(const Eigen::MatrixXd& x) const;
};

// Objective value; fills the gradients when they are non-null.
double probe_objective(const Eigen::MatrixXd& x, const std::vector<int>& y,
                       const Eigen::MatrixXd& weights, const Eigen::VectorXd& bias,
                       double c, Eigen::MatrixXd* grad_weights = nullptr,
                       Eigen::VectorXd* grad_bias = nullptr);

struct TrainResult {
  ProbeModel model;
  std::string termination;  // "converged", "max_iterations" or "no_progress"
  int iterations = 0;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  double final_gradient_norm = 0.0;  // infinity norm
  // Objective after each accepted step, starting with the initial value.
  std::vector<double> objective_trace;
};

// L-BFGS with Armijo backtracking from W = 0, b = 0.
TrainResult train(const LabeledMatrix& data, const ProbeConfig& cfg);

// Argmax of the scores; ties go to the lowest class index.
std::vector<int> predict_from_scores(const Eigen::MatrixXd& scores);
std::vector<int> predict(const ProbeModel& model, const Eigen::MatrixXd& x);
double evaluate(const ProbeModel& model, const Eigen::MatrixXd& x, const std::vector<int>& y);

struct Fold {
  std::vector<size_t> train;
  std::vector<size_t> test;
};

// Every index lands in exactly one test fold; each class is dealt round-robin
// after a seeded shuffle, so per-fold class counts are floor or ceil of
// n_c / k. Throws kClassTooSmall if a present class has fewer than k members.
std::vector<Fold> stratified_kfold(const std::vector<int>& y, int k, uint64_t seed);

struct ProbeResult {
  std::string task;
  std::string model_name;
  int layer = 0;
  std::string variant;  // "clean" or a perturbation name
  std::string language;
  std::vector<double> fold_accuracies;
  double mean_accuracy = 0.0;
  std::string termination_reason;
  size_t n_examples = 0;

  bool operator==(const ProbeResult&) const = default;
};

// Drops examples of classes with fewer than `folds` members; returns how many
// were dropped.
size_t drop_rare_classes(std::vector<ProbingExample>& examples, int folds);

ProbeResult run_probe(const EmbeddingSet& embeddings,
                      const std::vector<ProbingExample>& examples, int layer,
                      const ProbeConfig& cfg);

// All layers, `jobs` at a time; results in layer order.
std::vector<ProbeResult> run_probe_layers(const EmbeddingSet& embeddings,
                                          const std::vector<ProbingExample>& examples,
                                          const ProbeConfig& cfg, int jobs = 1);

std::string results_csv_header(int folds);
std::string result_to_csv_row(const ProbeResult& r);
std::vector<ProbeResult> results_from_csv(std::string_view text);

}  // namespace probekit
