// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "uqtrace/common.hpp"

namespace uqtrace::learn {

using Matrix = std::vector<std::vector<double>>;  // row-major

struct Scaler {
  std::vector<double> means;
  std::vector<double> stds;              // population std; 1 for degenerate
  std::vector<size_t> degenerate_cols;   // zero-variance columns
};

Scaler fit_scaler(const Matrix& m);
Matrix apply_scaler(const Scaler& s, const Matrix& m);

struct LogRegModel {
  std::vector<double> weights;
  double intercept = 0.0;
  double lambda = 1.0;  // L2 strength, = 1/C; intercept unpenalized
  bool converged = false;
  size_t iterations = 0;
  bool trained = false;
};

// Deterministic penalized Newton/IRLS on
//   sum_i logloss_i + (lambda/2) * ||w||^2.
// Step-halved so the objective decreases monotonically; converged when
// the gradient inf-norm drops below tol.
LogRegModel fit_logreg(const Matrix& x, const std::vector<int>& labels,
                       double lambda = 1.0, size_t max_iter = 1000,
                       double tol = 1e-8);

std::vector<double> predict_proba(const LogRegModel& model, const Matrix& x);

// Penalized log-loss objective and its analytic gradient
// (d(weights)..., d(intercept) last); exposed for gradient checking.
double logreg_objective(const Matrix& x, const std::vector<int>& labels,
                        const std::vector<double>& weights, double intercept,
                        double lambda);
std::vector<double> logreg_gradient(const Matrix& x,
                                    const std::vector<int>& labels,
                                    const std::vector<double>& weights,
                                    double intercept, double lambda);

struct TreeNode {
  bool leaf = true;
  int feature = -1;
  double threshold = 0.0;
  double value = 0.0;  // leaf prediction
  int left = -1;
  int right = -1;
};

struct Tree {
  std::vector<TreeNode> nodes;  // node 0 is the root
  double predict(const std::vector<double>& row) const;
  int depth() const;
  int leaf_count() const;
};

struct GBoostModel {
  std::vector<Tree> trees;
  double learning_rate = 0.1;
  double base_score = 0.0;  // log-odds of the positive rate
  std::vector<double> stage_deviance;  // training deviance after each stage
  bool trained = false;
};

// Stagewise additive modeling on binomial deviance. Each stage fits a
// depth-limited regression tree to the residuals y - p with exact
// greedy squared-error splits (ties: lowest feature index, then lowest
// threshold) and one-Newton-step leaf values. No subsampling, so the
// fit is deterministic given input order.
GBoostModel fit_gboost(const Matrix& x, const std::vector<int>& labels,
                       size_t n_estimators = 100, int max_depth = 3,
                       double learning_rate = 0.1);

std::vector<double> predict_proba(const GBoostModel& model, const Matrix& x);

struct FoldAssignment {
  std::vector<int> fold_of;  // per row
  int k = 5;
  unsigned seed = 42;

  std::vector<size_t> test_indices(int fold) const;
  std::vector<size_t> train_indices(int fold) const;
};

// Shuffled stratified k-fold: per-fold class counts within 1 of the
// proportional allocation; deterministic under seed; each class must
// have at least k members.
FoldAssignment stratified_kfold(const std::vector<int>& labels, int k = 5,
                                unsigned seed = 42);

// |w_i| / sum_j |w_j|, intercept excluded. Errors on all-zero weights.
std::vector<double> coefficient_share(const LogRegModel& model);

// Versioned JSON model serialization.
std::string dump_logreg(const LogRegModel& model);
LogRegModel load_logreg(const std::string& json_text);
std::string dump_gboost(const GBoostModel& model);
GBoostModel load_gboost(const std::string& json_text);

}  // namespace uqtrace::learn
