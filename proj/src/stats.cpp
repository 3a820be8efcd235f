#include "driftlab/stats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

namespace driftlab {

double round_sig9(double v) {
    if (!std::isfinite(v)) return v;
    char buf[40];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 9);
    if (ec != std::errc{}) throw std::runtime_error("round_sig9: formatting failed");
    double out = 0.0;
    auto [ptr, ec2] = std::from_chars(buf, end, out);
    if (ec2 != std::errc{} || ptr != end) throw std::runtime_error("round_sig9: reparse failed");
    return out;
}

MetricEstimate canonical_metric(const MetricEstimate& m) {
    MetricEstimate out = m;
    out.value = round_sig9(m.value);
    out.ci_lo = round_sig9(m.ci_lo);
    out.ci_hi = round_sig9(m.ci_hi);
    return out;
}

MetricEstimate exact_metric(Probability value) {
    if (!(value >= 0.0 && value <= 1.0))
        throw std::domain_error("exact_metric: value outside [0,1]");
    return MetricEstimate{value, value, value, std::nullopt};
}

MetricEstimate empirical_metric(long long successes, long long n, double confidence) {
    if (n <= 0) throw std::domain_error("empirical_metric: n must be positive");
    if (successes < 0 || successes > n)
        throw std::domain_error("empirical_metric: successes outside [0,n]");
    auto [lo, hi] = clopper_pearson(successes, n, confidence);
    MetricEstimate m;
    m.value = static_cast<double>(successes) / static_cast<double>(n);
    m.ci_lo = lo;
    m.ci_hi = hi;
    m.n = n;
    return m;
}

namespace {

// Smallest p with binomial_cdf(k, n, p) <= target; the cdf is continuous and
// strictly decreasing in p for 0 <= k < n, so plain bisection suffices.
double bisect_cdf_eq(long long k, long long n, double target) {
    double lo = 0.0, hi = 1.0;
    // invariant: cdf(lo) > target >= cdf(hi)
    for (int i = 0; i < 200 && (hi - lo) > 1e-12; ++i) {
        double mid = 0.5 * (lo + hi);
        if (binomial_cdf(k, n, mid) > target) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace

std::pair<Probability, Probability> clopper_pearson(long long successes, long long n,
                                                    double confidence) {
    if (n <= 0) throw std::domain_error("clopper_pearson: n must be positive");
    if (successes < 0 || successes > n)
        throw std::domain_error("clopper_pearson: successes outside [0,n]");
    if (!(confidence > 0.0 && confidence < 1.0))
        throw std::domain_error("clopper_pearson: confidence outside (0,1)");
    double tail = 0.5 * (1.0 - confidence);
    // lower endpoint: P[Bin(n,lo) >= k] = tail  <=>  cdf(k-1, n, lo) = 1 - tail
    double lo = successes == 0 ? 0.0 : bisect_cdf_eq(successes - 1, n, 1.0 - tail);
    // upper endpoint: P[Bin(n,hi) <= k] = tail
    double hi = successes == n ? 1.0 : bisect_cdf_eq(successes, n, tail);
    return {lo, hi};
}

std::pair<double, double> macro_f1_ci(const std::vector<PerClassF1>& classes,
                                      double confidence) {
    if (classes.empty()) throw std::domain_error("macro_f1_ci: no classes");
    double f_sum = 0.0, delta_sum = 0.0;
    for (const auto& c : classes) {
        if (c.n <= 0) throw std::domain_error("macro_f1_ci: class with n <= 0");
        if (!(c.f1 >= 0.0 && c.f1 <= 1.0))
            throw std::domain_error("macro_f1_ci: f1 outside [0,1]");
        auto [lo, hi] = clopper_pearson(c.n / 2, c.n, confidence);
        delta_sum += 0.5 * (hi - lo);
        f_sum += c.f1;
    }
    double count = static_cast<double>(classes.size());
    return {f_sum / count, (delta_sum / count) / std::sqrt(count)};
}

namespace {

// Transform one metric for fitting; empty when the value is untransformable
// (an exact 0 or 1).
std::optional<double> transform_metric(const MetricEstimate& m, TransformKind kind) {
    if (kind == TransformKind::Linear) return apply_transform(m.value, kind);
    if (!m.n && (m.value <= 0.0 || m.value >= 1.0)) return std::nullopt;
    return apply_transform(m.value, kind, m.n);
}

} // namespace

TrendFit fit_trend(const std::vector<EvalRecord>& records, TransformKind kind,
                   std::vector<std::string>* warnings) {
    std::vector<std::pair<double, double>> pts;
    pts.reserve(records.size());
    for (const auto& r : records) {
        if (r.status != "ok") continue;
        auto x = transform_metric(r.acc_id, kind);
        auto y = transform_metric(r.acc_ood, kind);
        if (!x || !y) {
            if (warnings)
                warnings->push_back("fit_trend: record '" + r.model_id +
                                    "' has a degenerate exact accuracy, excluded from fit");
            continue;
        }
        pts.emplace_back(*x, *y);
    }
    if (pts.size() < 2)
        throw std::invalid_argument("fit_trend: need at least two usable records");
    // canonical order makes the result independent of input ordering
    std::sort(pts.begin(), pts.end());
    if (pts.front().first == pts.back().first)
        throw std::invalid_argument("fit_trend: all transformed ID accuracies identical");

    double n = static_cast<double>(pts.size());
    double sx = 0.0, sy = 0.0;
    for (const auto& [x, y] : pts) { sx += x; sy += y; }
    double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& [x, y] : pts) {
        double dx = x - mx, dy = y - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    TrendFit fit;
    fit.transform = kind;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    // all-equal y values make a flat residual-free line, and two points are
    // always fitted exactly
    fit.r_squared = (syy == 0.0 || pts.size() == 2)
                        ? 1.0
                        : std::clamp((sxy * sxy) / (sxx * syy), 0.0, 1.0);
    fit.n_points = pts.size();
    return fit;
}

double effective_robustness(const EvalRecord& record, const TrendFit& fit) {
    auto x = transform_metric(record.acc_id, fit.transform);
    auto y = transform_metric(record.acc_ood, fit.transform);
    if (!x || !y)
        throw std::domain_error("effective_robustness: record has a degenerate exact accuracy");
    return *y - (fit.slope * *x + fit.intercept);
}

CorrelationCheck check_correlation_property(const std::vector<EvalRecord>& records,
                                            const CorrelationTransform& gamma, double alpha) {
    if (alpha < 0.0) throw std::domain_error("check_correlation_property: alpha < 0");
    CorrelationCheck out;
    out.max_deviation = 0.0;
    for (const auto& r : records) {
        if (r.status != "ok") continue;
        auto x = transform_metric(r.acc_id, TransformKind::Probit);
        if (!x)
            throw std::domain_error("check_correlation_property: ID accuracy not transformable");
        double mapped = normal_cdf(gamma.slope * *x + gamma.offset);
        out.max_deviation = std::fmax(out.max_deviation, std::fabs(mapped - r.acc_ood.value));
    }
    out.holds = out.max_deviation <= alpha;
    return out;
}

std::vector<std::pair<Probability, Probability>>
interpolate_with_random(Probability acc_id, Probability acc_ood, long long n_classes,
                        const std::vector<double>& ps) {
    if (n_classes < 2) throw std::domain_error("interpolate_with_random: need >= 2 classes");
    double chance = 1.0 / static_cast<double>(n_classes);
    for (Probability a : {acc_id, acc_ood})
        if (!(a >= chance && a <= 1.0))
            throw std::domain_error("interpolate_with_random: accuracy outside [1/C, 1]");
    std::vector<std::pair<Probability, Probability>> out;
    out.reserve(ps.size());
    for (double p : ps) {
        if (!(p >= 0.0 && p <= 1.0))
            throw std::domain_error("interpolate_with_random: p outside [0,1]");
        out.emplace_back(p * acc_id + (1.0 - p) * chance, p * acc_ood + (1.0 - p) * chance);
    }
    return out;
}

} // namespace driftlab
