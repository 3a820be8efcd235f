#pragma once

// Experiment runners.  Each scenario builds a task pair (original and
// shifted), trains a grid of models on data from the original task, scores
// every model on both, and reports the records together with trend fits and
// whatever diagnostic the scenario is about (deviation bound, probit ratios,
// per-group fits).  Everything is a pure function of the config, including
// its master seed; the worker-thread count never changes the result.

#include "driftlab/gaussian.hpp"
#include "driftlab/learners.hpp"
#include "driftlab/stats.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace driftlab {

enum class ScenarioKind {
    MainTrend,       // mean shift, full model roster, exact + sampled scoring
    MoreData,        // logistic models trained with auxiliary shifted samples
    Adversarial,     // shift direction chosen against one trained model
    CovarianceShift, // anisotropic noise plus additive white noise
    MatchedNoise,    // covariance-proportional vs isotropic added noise
};

std::string to_string(ScenarioKind kind);
std::optional<ScenarioKind> parse_scenario_kind(std::string_view name);

struct LearnerGrid {
    std::vector<double> logistic_l2_c; // inverse regularization, ascending
    std::vector<double> logistic_l1_c;
    std::vector<double> ridge_alpha;
    std::vector<long long> knn_k;
    std::vector<long long> forest_trees;
};

struct ScenarioConfig {
    ScenarioKind kind = ScenarioKind::MainTrend;
    std::uint64_t seed = 1729;
    int threads = 1;

    // task
    long long d = 100000;
    double sigma = 0.031622776601683791; // 10^-1.5

    // mean-shift parameters
    double alpha = 0.7;
    double beta = 0.5;
    double gamma = 1.0;

    // training pool and model-diversity knobs
    long long n_train = 100;
    std::vector<long long> n_sub = {30, 50, 100};
    std::vector<long long> d_proj = {50, 300, 1000, 3000};
    std::vector<long long> d_proj_nonlinear = {50, 300}; // sampled-scoring families
    long long n_test = 100000;

    // more-data scenario
    std::vector<long long> aux_sizes = {0, 50, 100};
    double sigma_aux = 0.044721359549995794; // sqrt(2) * default sigma

    // adversarial scenario
    double adv_scale = -0.03;
    std::string adv_target; // model id; empty picks the best exact ID accuracy

    // diagonal-covariance task (covariance-shift and matched-noise scenarios)
    long long cov_small_count = 10;
    double cov_var_big = 0.5;
    double cov_var_small = 0.005;
    double cov_s2 = 0.125;          // additive shift strength
    bool cov_scale_control = false; // use the proportional-scaling control shift
    double matched_kappa = 1.25;

    LearnerGrid grid;
    TransformKind transform = TransformKind::Probit;
};

// Per-kind defaults: task size, grids, and evaluation sizes all filled in.
ScenarioConfig default_config(ScenarioKind kind);

struct ScenarioResult {
    ScenarioKind kind = ScenarioKind::MainTrend;
    std::uint64_t seed = 0;
    std::vector<EvalRecord> records; // sorted by model_id, metrics canonical
    std::map<std::string, TrendFit> fits;
    std::optional<double> theoretical_slope;
    std::optional<double> theoretical_intercept;
    std::optional<double> bound; // deviation bound at delta = 0.05
    std::optional<std::string> target_model_id;
    std::map<std::string, double> extras; // named full-precision diagnostics
    std::vector<std::string> warnings;
};

ScenarioResult run_scenario(const ScenarioConfig& config);

ScenarioResult run_main_trend(const ScenarioConfig& config);
ScenarioResult run_more_data(const ScenarioConfig& config);
ScenarioResult run_adversarial(const ScenarioConfig& config);
ScenarioResult run_covariance_shift(const ScenarioConfig& config);
ScenarioResult run_matched_noise(const ScenarioConfig& config);

// Runs fn(0..n-1) on up to `threads` workers; any exception is rethrown on
// the caller's thread after all workers finish.
void parallel_for(long long n, int threads, const std::function<void(long long)>& fn);

} // namespace driftlab
