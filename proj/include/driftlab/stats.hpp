#pragma once

// Accuracy metrics with confidence intervals, trend fitting on transformed
// axes, and the derived quantities built on top of a fit (effective
// robustness, the correlation property check, random-classifier
// interpolation).

#include "driftlab/numerics.hpp"

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace driftlab {

struct MetricEstimate {
    Probability value = 0.0;
    Probability ci_lo = 0.0;
    Probability ci_hi = 0.0;
    std::optional<long long> n; // sample count; empty for exactly-computed values
};

// Exact value: zero-width interval, no sample count.
MetricEstimate exact_metric(Probability value);
// Empirical value with a Clopper-Pearson interval.
MetricEstimate empirical_metric(long long successes, long long n, double confidence = 0.95);

// Nearest double to the 9-significant-digit decimal rendering of v.  Metrics
// are stored in this canonical form so that in-memory results and their CSV
// round trips are bit-identical.
double round_sig9(double v);
// round_sig9 applied to the value and both interval endpoints.
MetricEstimate canonical_metric(const MetricEstimate& m);

struct EvalRecord {
    std::string model_id;
    std::string family;
    std::map<std::string, std::string> hyperparams; // canonical: sorted by key
    MetricEstimate acc_id;
    MetricEstimate acc_ood;
    std::string status = "ok"; // "ok" | "non_converged" | "degenerate"
};

struct TrendFit {
    TransformKind transform = TransformKind::Probit;
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t n_points = 0;
};

// Exact two-sided Clopper-Pearson interval; endpoints located to 1e-10.
std::pair<Probability, Probability> clopper_pearson(long long successes, long long n,
                                                    double confidence);

struct PerClassF1 {
    double f1 = 0.0;  // in [0,1]; defined as 0 when precision+recall is 0
    long long n = 0;  // class sample count
};

// Heuristic macro-F1 interval: each class contributes the half-width of a
// symmetric CP interval around 1/2 at its sample count, the mean of those is
// shrunk by sqrt(#classes).  Returns {mean f1, half width}.
std::pair<double, double> macro_f1_ci(const std::vector<PerClassF1>& classes,
                                      double confidence = 0.95);

// Least-squares line through the transformed (id, ood) pairs of all usable
// records.  Empirical metrics are clamped by their sample count before the
// transform; exact metrics at 0 or 1 cannot be transformed and are dropped
// with a note in *warnings.  Throws if fewer than two distinct points remain.
TrendFit fit_trend(const std::vector<EvalRecord>& records, TransformKind kind,
                   std::vector<std::string>* warnings = nullptr);

// Signed vertical residual of one record against a fitted trend.
double effective_robustness(const EvalRecord& record, const TrendFit& fit);

struct CorrelationTransform {
    double slope = 0.0;
    double offset = 0.0;
};
struct CorrelationCheck {
    bool holds = false;
    double max_deviation = 0.0;
};

// Does gamma (a probit-line transform) map every record's ID accuracy to
// within alpha of its OOD accuracy?
CorrelationCheck check_correlation_property(const std::vector<EvalRecord>& records,
                                            const CorrelationTransform& gamma, double alpha);

// Accuracy pairs traced by mixing a classifier with a random guesser:
// p -> (p*acc_id + (1-p)/n_classes, p*acc_ood + (1-p)/n_classes).
std::vector<std::pair<Probability, Probability>>
interpolate_with_random(Probability acc_id, Probability acc_ood, long long n_classes,
                        const std::vector<double>& ps);

} // namespace driftlab
