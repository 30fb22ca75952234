// SPDX-License-Identifier: Apache-2.0
#include "uqtrace/learn.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "json.hpp"

namespace uqtrace::learn {

namespace {

void check_matrix(const Matrix& m) {
  if (m.empty()) throw ValidationError("empty matrix");
  const size_t width = m.front().size();
  for (const auto& row : m)
    if (row.size() != width) throw ValidationError("ragged matrix");
}

void check_two_classes(const std::vector<int>& labels) {
  const bool has_pos = std::find(labels.begin(), labels.end(), 1) != labels.end();
  const bool has_neg = std::find(labels.begin(), labels.end(), 0) != labels.end();
  if (!has_pos || !has_neg)
    throw ValidationError("both classes must be present");
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow
double softplus(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd x(m.size(), m.front().size());
  for (size_t i = 0; i < m.size(); ++i)
    for (size_t j = 0; j < m[i].size(); ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m[i][j];
  return x;
}

}  // namespace

Scaler fit_scaler(const Matrix& m) {
  check_matrix(m);
  if (m.size() < 2) throw ValidationError("scaler needs at least 2 rows");
  const size_t n = m.size();
  const size_t d = m.front().size();
  Scaler s;
  s.means.assign(d, 0.0);
  s.stds.assign(d, 1.0);
  for (const auto& row : m)
    for (size_t j = 0; j < d; ++j) s.means[j] += row[j];
  for (size_t j = 0; j < d; ++j) s.means[j] /= static_cast<double>(n);
  for (size_t j = 0; j < d; ++j) {
    double ss = 0.0;
    for (const auto& row : m) {
      const double dv = row[j] - s.means[j];
      ss += dv * dv;
    }
    const double var = ss / static_cast<double>(n);  // population variance
    if (var > 0.0) {
      s.stds[j] = std::sqrt(var);
    } else {
      s.stds[j] = 1.0;  // degenerate column passes through centered
      s.degenerate_cols.push_back(j);
    }
  }
  return s;
}

Matrix apply_scaler(const Scaler& s, const Matrix& m) {
  Matrix out = m;
  for (auto& row : out) {
    if (row.size() != s.means.size())
      throw ValidationError("scaler width mismatch");
    for (size_t j = 0; j < row.size(); ++j)
      row[j] = (row[j] - s.means[j]) / s.stds[j];
  }
  return out;
}

double logreg_objective(const Matrix& x, const std::vector<int>& labels,
                        const std::vector<double>& weights, double intercept,
                        double lambda) {
  double obj = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    double z = intercept;
    for (size_t j = 0; j < weights.size(); ++j) z += weights[j] * x[i][j];
    obj += softplus(z) - (labels[i] ? z : 0.0);
  }
  double penalty = 0.0;
  for (double w : weights) penalty += w * w;
  return obj + 0.5 * lambda * penalty;
}

std::vector<double> logreg_gradient(const Matrix& x,
                                    const std::vector<int>& labels,
                                    const std::vector<double>& weights,
                                    double intercept, double lambda) {
  const size_t d = weights.size();
  std::vector<double> grad(d + 1, 0.0);
  for (size_t i = 0; i < x.size(); ++i) {
    double z = intercept;
    for (size_t j = 0; j < d; ++j) z += weights[j] * x[i][j];
    const double resid = sigmoid(z) - static_cast<double>(labels[i]);
    for (size_t j = 0; j < d; ++j) grad[j] += resid * x[i][j];
    grad[d] += resid;
  }
  for (size_t j = 0; j < d; ++j) grad[j] += lambda * weights[j];
  return grad;
}

LogRegModel fit_logreg(const Matrix& x, const std::vector<int>& labels,
                       double lambda, size_t max_iter, double tol) {
  check_matrix(x);
  if (labels.size() != x.size()) throw ValidationError("label count mismatch");
  check_two_classes(labels);
  if (!(lambda > 0.0)) throw ValidationError("lambda must be positive");

  const size_t n = x.size();
  const size_t d = x.front().size();
  const Eigen::MatrixXd xm = to_eigen(x);

  LogRegModel model;
  model.lambda = lambda;
  model.weights.assign(d, 0.0);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d) + 1);

  auto objective = [&](const Eigen::VectorXd& b) {
    std::vector<double> w(b.data(), b.data() + d);
    return logreg_objective(x, labels, w, b(static_cast<Eigen::Index>(d)),
                            lambda);
  };

  double obj = objective(beta);
  for (size_t iter = 0; iter < max_iter; ++iter) {
    model.iterations = iter + 1;

    Eigen::VectorXd grad =
        Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d) + 1);
    Eigen::MatrixXd hess =
        Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d) + 1,
                              static_cast<Eigen::Index>(d) + 1);
    for (size_t i = 0; i < n; ++i) {
      const Eigen::Index ii = static_cast<Eigen::Index>(i);
      const double z =
          xm.row(ii).dot(beta.head(static_cast<Eigen::Index>(d))) +
          beta(static_cast<Eigen::Index>(d));
      const double p = sigmoid(z);
      const double resid = p - static_cast<double>(labels[i]);
      const double w = std::max(p * (1.0 - p), 1e-12);
      Eigen::VectorXd xi(static_cast<Eigen::Index>(d) + 1);
      xi.head(static_cast<Eigen::Index>(d)) = xm.row(ii).transpose();
      xi(static_cast<Eigen::Index>(d)) = 1.0;
      grad += resid * xi;
      hess += w * xi * xi.transpose();
    }
    for (size_t j = 0; j < d; ++j) {
      const Eigen::Index jj = static_cast<Eigen::Index>(j);
      grad(jj) += lambda * beta(jj);
      hess(jj, jj) += lambda;
    }

    if (grad.lpNorm<Eigen::Infinity>() <= tol) {
      model.converged = true;
      break;
    }

    Eigen::VectorXd step = hess.ldlt().solve(grad);
    // Step-halving keeps the objective monotonically decreasing.
    double scale = 1.0;
    Eigen::VectorXd candidate = beta - scale * step;
    double cand_obj = objective(candidate);
    size_t halvings = 0;
    while (cand_obj > obj && halvings < 50) {
      scale *= 0.5;
      candidate = beta - scale * step;
      cand_obj = objective(candidate);
      ++halvings;
    }
    if (cand_obj > obj) break;  // no descent direction left
    beta = candidate;
    obj = cand_obj;
  }

  for (size_t j = 0; j < d; ++j)
    model.weights[j] = beta(static_cast<Eigen::Index>(j));
  model.intercept = beta(static_cast<Eigen::Index>(d));
  model.trained = true;
  return model;
}

std::vector<double> predict_proba(const LogRegModel& model, const Matrix& x) {
  if (!model.trained) throw ValidationError("model is not trained");
  std::vector<double> out;
  out.reserve(x.size());
  for (const auto& row : x) {
    if (row.size() != model.weights.size())
      throw ValidationError("feature width mismatch");
    double z = model.intercept;
    for (size_t j = 0; j < row.size(); ++j) z += model.weights[j] * row[j];
    out.push_back(sigmoid(z));
  }
  return out;
}

// --------------------------------------------------------------------
// Gradient boosting
// --------------------------------------------------------------------

double Tree::predict(const std::vector<double>& row) const {
  int node = 0;
  while (!nodes[node].leaf) {
    node = row[nodes[node].feature] <= nodes[node].threshold
               ? nodes[node].left
               : nodes[node].right;
  }
  return nodes[node].value;
}

int Tree::depth() const {
  // Iterative depth over the node vector.
  std::vector<std::pair<int, int>> stack{{0, 0}};
  int max_depth = 0;
  while (!stack.empty()) {
    auto [node, d] = stack.back();
    stack.pop_back();
    max_depth = std::max(max_depth, d);
    if (!nodes[node].leaf) {
      stack.push_back({nodes[node].left, d + 1});
      stack.push_back({nodes[node].right, d + 1});
    }
  }
  return max_depth;
}

int Tree::leaf_count() const {
  return static_cast<int>(
      std::count_if(nodes.begin(), nodes.end(),
                    [](const TreeNode& n) { return n.leaf; }));
}

namespace {

struct SplitChoice {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

// Exact greedy squared-error split over the rows of `idx`.
// Ties broken by lowest feature index, then lowest threshold.
SplitChoice best_split(const Matrix& x, const std::vector<double>& residual,
                       const std::vector<size_t>& idx) {
  const size_t d = x.front().size();
  SplitChoice best;

  double total = 0.0, total_sq = 0.0;
  for (size_t i : idx) {
    total += residual[i];
    total_sq += residual[i] * residual[i];
  }
  const double parent_sse =
      total_sq - total * total / static_cast<double>(idx.size());

  std::vector<size_t> order(idx);
  for (size_t f = 0; f < d; ++f) {
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      if (x[a][f] != x[b][f]) return x[a][f] < x[b][f];
      return a < b;
    });
    double left_sum = 0.0;
    size_t left_n = 0;
    for (size_t k = 0; k + 1 < order.size(); ++k) {
      left_sum += residual[order[k]];
      ++left_n;
      const double v = x[order[k]][f];
      const double next = x[order[k + 1]][f];
      if (v == next) continue;  // no boundary between equal values
      const double right_sum = total - left_sum;
      const size_t right_n = order.size() - left_n;
      const double child_sse =
          total_sq - left_sum * left_sum / static_cast<double>(left_n) -
          right_sum * right_sum / static_cast<double>(right_n);
      const double gain = parent_sse - child_sse;
      const double threshold = v + 0.5 * (next - v);
      constexpr double kGainEps = 1e-12;
      if (gain > best.gain + kGainEps) {
        best = {true, static_cast<int>(f), threshold, gain};
      }
    }
  }
  return best;
}

// Builds one regression tree on the residuals; leaf values are a
// single Newton step sum(residual) / sum(p(1-p)) on the deviance.
void grow_node(Tree& tree, int node, const Matrix& x,
               const std::vector<double>& residual,
               const std::vector<double>& hessian,
               const std::vector<size_t>& idx, int depth, int max_depth) {
  auto leaf_value = [&](const std::vector<size_t>& rows) {
    double num = 0.0, den = 0.0;
    for (size_t i : rows) {
      num += residual[i];
      den += hessian[i];
    }
    return num / std::max(den, 1e-12);
  };

  SplitChoice split;
  if (depth < max_depth && idx.size() >= 2) split = best_split(x, residual, idx);
  if (!split.found) {
    tree.nodes[node].leaf = true;
    tree.nodes[node].value = leaf_value(idx);
    return;
  }

  std::vector<size_t> left_idx, right_idx;
  for (size_t i : idx) {
    (x[i][split.feature] <= split.threshold ? left_idx : right_idx).push_back(i);
  }

  tree.nodes[node].leaf = false;
  tree.nodes[node].feature = split.feature;
  tree.nodes[node].threshold = split.threshold;
  tree.nodes[node].left = static_cast<int>(tree.nodes.size());
  tree.nodes.push_back({});
  tree.nodes[node].right = static_cast<int>(tree.nodes.size());
  tree.nodes.push_back({});
  grow_node(tree, tree.nodes[node].left, x, residual, hessian, left_idx,
            depth + 1, max_depth);
  grow_node(tree, tree.nodes[node].right, x, residual, hessian, right_idx,
            depth + 1, max_depth);
}

double binomial_deviance(const std::vector<double>& score,
                         const std::vector<int>& labels) {
  double dev = 0.0;
  for (size_t i = 0; i < score.size(); ++i)
    dev += softplus(score[i]) - (labels[i] ? score[i] : 0.0);
  return 2.0 * dev / static_cast<double>(score.size());
}

}  // namespace

GBoostModel fit_gboost(const Matrix& x, const std::vector<int>& labels,
                       size_t n_estimators, int max_depth,
                       double learning_rate) {
  check_matrix(x);
  if (labels.size() != x.size()) throw ValidationError("label count mismatch");
  check_two_classes(labels);
  if (max_depth < 1) throw ValidationError("max_depth must be >= 1");
  if (!(learning_rate > 0.0))
    throw ValidationError("learning_rate must be positive");

  const size_t n = x.size();
  const double pos =
      static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  GBoostModel model;
  model.learning_rate = learning_rate;
  model.base_score = std::log(pos / (static_cast<double>(n) - pos));

  std::vector<double> score(n, model.base_score);
  std::vector<size_t> all_idx(n);
  std::iota(all_idx.begin(), all_idx.end(), 0);

  for (size_t stage = 0; stage < n_estimators; ++stage) {
    std::vector<double> residual(n), hessian(n);
    for (size_t i = 0; i < n; ++i) {
      const double p = sigmoid(score[i]);
      residual[i] = static_cast<double>(labels[i]) - p;
      hessian[i] = p * (1.0 - p);
    }
    Tree tree;
    tree.nodes.push_back({});
    grow_node(tree, 0, x, residual, hessian, all_idx, 0, max_depth);
    for (size_t i = 0; i < n; ++i)
      score[i] += learning_rate * tree.predict(x[i]);
    model.trees.push_back(std::move(tree));
    model.stage_deviance.push_back(binomial_deviance(score, labels));
  }
  model.trained = true;
  return model;
}

std::vector<double> predict_proba(const GBoostModel& model, const Matrix& x) {
  if (!model.trained) throw ValidationError("model is not trained");
  std::vector<double> out;
  out.reserve(x.size());
  for (const auto& row : x) {
    double score = model.base_score;
    for (const auto& tree : model.trees)
      score += model.learning_rate * tree.predict(row);
    out.push_back(sigmoid(score));
  }
  return out;
}

// --------------------------------------------------------------------
// Cross-validation folds
// --------------------------------------------------------------------

std::vector<size_t> FoldAssignment::test_indices(int fold) const {
  std::vector<size_t> out;
  for (size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] == fold) out.push_back(i);
  return out;
}

std::vector<size_t> FoldAssignment::train_indices(int fold) const {
  std::vector<size_t> out;
  for (size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] != fold) out.push_back(i);
  return out;
}

FoldAssignment stratified_kfold(const std::vector<int>& labels, int k,
                                unsigned seed) {
  if (k < 2) throw ValidationError("k must be >= 2");
  FoldAssignment folds;
  folds.k = k;
  folds.seed = seed;
  folds.fold_of.assign(labels.size(), -1);

  std::mt19937 rng(seed);
  for (int cls : {0, 1}) {
    std::vector<size_t> idx;
    for (size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) idx.push_back(i);
    if (idx.size() < static_cast<size_t>(k))
      throw ValidationError("class " + std::to_string(cls) +
                            " has fewer members than folds");
    // Fisher-Yates with an explicit draw so the shuffle is identical
    // across standard libraries.
    for (size_t i = idx.size() - 1; i > 0; --i) {
      const size_t j = rng() % (i + 1);
      std::swap(idx[i], idx[j]);
    }
    // Contiguous chunks, remainder to the first folds: per-fold class
    // counts within 1 of the proportional allocation.
    const size_t base = idx.size() / static_cast<size_t>(k);
    const size_t extra = idx.size() % static_cast<size_t>(k);
    size_t at = 0;
    for (int f = 0; f < k; ++f) {
      const size_t count = base + (static_cast<size_t>(f) < extra ? 1 : 0);
      for (size_t c = 0; c < count; ++c) folds.fold_of[idx[at++]] = f;
    }
  }
  return folds;
}

std::vector<double> coefficient_share(const LogRegModel& model) {
  if (!model.trained) throw ValidationError("model is not trained");
  double total = 0.0;
  for (double w : model.weights) total += std::fabs(w);
  if (total == 0.0)
    throw ValidationError("coefficient shares undefined for all-zero weights");
  std::vector<double> shares;
  shares.reserve(model.weights.size());
  for (double w : model.weights) shares.push_back(std::fabs(w) / total);
  return shares;
}

// --------------------------------------------------------------------
// Serialization
// --------------------------------------------------------------------

namespace {
constexpr int kFormatVersion = 1;
}

std::string dump_logreg(const LogRegModel& model) {
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "logreg";
  j["weights"] = model.weights;
  j["intercept"] = model.intercept;
  j["lambda"] = model.lambda;
  j["converged"] = model.converged;
  return j.dump(2);
}

LogRegModel load_logreg(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  if (j.value("kind", "") != "logreg")
    throw ValidationError("not a logreg model document");
  if (j.value("format_version", 0) != kFormatVersion)
    throw ValidationError("unsupported model format version");
  LogRegModel m;
  m.weights = j.at("weights").get<std::vector<double>>();
  m.intercept = j.at("intercept").get<double>();
  m.lambda = j.at("lambda").get<double>();
  m.converged = j.value("converged", false);
  m.trained = true;
  return m;
}

std::string dump_gboost(const GBoostModel& model) {
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "gboost";
  j["learning_rate"] = model.learning_rate;
  j["base_score"] = model.base_score;
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : model.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : tree.nodes) {
      nodes.push_back({{"leaf", n.leaf},
                       {"feature", n.feature},
                       {"threshold", n.threshold},
                       {"value", n.value},
                       {"left", n.left},
                       {"right", n.right}});
    }
    trees.push_back(std::move(nodes));
  }
  j["trees"] = std::move(trees);
  return j.dump(2);
}

GBoostModel load_gboost(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  if (j.value("kind", "") != "gboost")
    throw ValidationError("not a gboost model document");
  if (j.value("format_version", 0) != kFormatVersion)
    throw ValidationError("unsupported model format version");
  GBoostModel m;
  m.learning_rate = j.at("learning_rate").get<double>();
  m.base_score = j.at("base_score").get<double>();
  for (const auto& tj : j.at("trees")) {
    Tree tree;
    for (const auto& nj : tj) {
      TreeNode n;
      n.leaf = nj.at("leaf").get<bool>();
      n.feature = nj.at("feature").get<int>();
      n.threshold = nj.at("threshold").get<double>();
      n.value = nj.at("value").get<double>();
      n.left = nj.at("left").get<int>();
      n.right = nj.at("right").get<int>();
      tree.nodes.push_back(n);
    }
    m.trees.push_back(std::move(tree));
  }
  m.trained = true;
  return m;
}

}  // namespace uqtrace::learn
