#pragma once

// Model roster: regularized logistic regression (L1/L2), ridge regression on
// +-1 targets, k-nearest-neighbors and a bagged CART forest.  All trainers
// are deterministic: the optimizers are full-batch with fixed schedules, and
// the forest takes an explicit stream for its bootstrap/feature draws.

#include "driftlab/gaussian.hpp"
#include "driftlab/stats.hpp"

#include <optional>
#include <stdexcept>
#include <variant>
#include <vector>

namespace driftlab {

// Optimizer ran out of iterations before certifying the requested gap.
struct ConvergenceError : std::runtime_error {
    double gap;
    explicit ConvergenceError(double g)
        : std::runtime_error("optimizer failed to reach the requested optimality gap"),
          gap(g) {}
};

// Training produced sign(0): an all-zero weight vector (L1 with a penalty
// above the data scale does this legitimately).
struct DegenerateModelError : std::runtime_error {
    DegenerateModelError() : std::runtime_error("trained weight vector is identically zero") {}
};

enum class Penalty { L1, L2 };

struct LogisticOptions {
    Penalty penalty = Penalty::L2;
    double C = 1.0;          // penalty weight is 1/C, scikit-style
    double tol = 1e-8;       // certified optimality gap
    long long max_iter = 200000;
    std::optional<std::vector<double>> warm_start; // initial iterate
};

// First n_sub rows, unchanged order.
Dataset subsample(const Dataset& data, long long n_sub);
// First d_proj coordinates of every row.
Dataset project(const Dataset& data, long long d_proj);

// argmin (1/C)*R(theta) + sum_i log(1+exp(-y_i theta.x_i)), R = |.|_1 or |.|_2^2/2.
LinearClassifier train_logistic(const Dataset& data, const LogisticOptions& opt);

// argmin |X theta - y|^2 + reg_alpha*|theta|^2, used as a classifier by sign.
// Dispatches to the dual (n x n) solve when d > n, primal otherwise.
LinearClassifier train_ridge(const Dataset& data, double reg_alpha);
LinearClassifier train_ridge_primal(const Dataset& data, double reg_alpha);
LinearClassifier train_ridge_dual(const Dataset& data, double reg_alpha);

struct KnnModel {
    long long k = 1;
    Dataset train;
};
KnnModel make_knn(const Dataset& data, long long k);

struct ForestNode {
    int feature = -1;      // -1 marks a leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    int label = 0;         // leaf vote
};
struct ForestTree {
    std::vector<ForestNode> nodes; // node 0 is the root
};
struct ForestModel {
    std::vector<ForestTree> trees;
    long long d = 0;
};
ForestModel train_forest(const Dataset& data, long long n_trees,
                         std::optional<long long> max_depth, const Rng& stream);

using TrainedModel = std::variant<LinearClassifier, KnnModel, ForestModel>;

// Input dimension a model consumes (its own training dimension).
long long model_dim(const TrainedModel& model);

// Classify one point; x must have at least model_dim coordinates.
int predict(const LinearClassifier& model, const double* x);
int predict(const KnnModel& model, const double* x);
int predict(const ForestModel& model, const double* x);
int predict(const TrainedModel& model, const double* x);

// Squared Euclidean distance over d coordinates; the one distance definition
// shared by every k-NN code path so tie handling is reproducible.
inline double dist2(const double* a, const double* b, long long d) {
    double s = 0.0;
    for (long long j = 0; j < d; ++j) {
        double diff = a[j] - b[j];
        s += diff * diff;
    }
    return s;
}

// Indices of the k nearest entries of dists[0..n); ties on distance go to the
// lower index.  Returned indices are ordered nearest-first.
std::vector<long long> knn_select(const double* dists, long long n, long long k);

// Majority label among the selected neighbors; a tied vote falls back to the
// single nearest neighbor's label.
int knn_vote(const std::vector<long long>& selected, const std::vector<int>& labels);

int knn_classify(const KnnModel& model, const double* x);

// Accuracy on n_test fresh samples from the task, with a Clopper-Pearson
// interval.  Sample i comes from child stream i of `stream`, so the estimate
// does not depend on evaluation order.
MetricEstimate empirical_accuracy(const TrainedModel& model, const GaussianTask& task,
                                  long long n_test, const Rng& stream,
                                  double confidence = 0.95);

} // namespace driftlab
