#include "driftlab/numerics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace driftlab {

namespace {

constexpr double kSqrt2 = 1.41421356237309504880168872420969808;
constexpr double kInvSqrt2Pi = 0.39894228040143267793994605993438187;

// Upper tail Q(z) = P[N(0,1) > z].  Complementary form keeps full relative
// precision for large z, which the probit refinement below depends on.
double upper_tail(double z) { return 0.5 * std::erfc(z / kSqrt2); }

// Acklam's rational approximation to the probit function, |rel err| < 1.2e-9.
// Only used as the initializer; two Halley steps against the erfc-based CDF
// finish the job.
double probit_initial(double p) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    if (p < p_low) {
        double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - p_low) {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    double q = p - 0.5;
    double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

// Continued fraction for the regularized incomplete beta, modified Lentz.
// Valid for x < (a+1)/(a+b+2); the caller flips arguments otherwise.
double beta_cont_frac(double a, double b, double x) {
    constexpr double tiny = 1e-300;
    constexpr double eps = 1e-16;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 20000; ++m) {
        double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) return h;
    }
    throw std::runtime_error("incomplete beta continued fraction did not converge");
}

double log_gamma(double x) {
#if defined(__GLIBC__)
    int sign = 0;
    return ::lgamma_r(x, &sign); // avoids the signgam global; x > 0 here anyway
#else
    return std::lgamma(x);
#endif
}

// Regularized incomplete beta I_x(a,b) for a,b > 0, x in [0,1].
double reg_inc_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double ln_pre = log_gamma(a + b) - log_gamma(a) - log_gamma(b) +
                    a * std::log(x) + b * std::log1p(-x);
    double pre = std::exp(ln_pre);
    if (x < (a + 1.0) / (a + b + 2.0))
        return pre * beta_cont_frac(a, b, x) / a;
    return 1.0 - pre * beta_cont_frac(b, a, 1.0 - x) / b;
}

} // namespace

std::string to_string(TransformKind kind) {
    switch (kind) {
        case TransformKind::Linear: return "linear";
        case TransformKind::Probit: return "probit";
        case TransformKind::Logit: return "logit";
    }
    throw std::logic_error("to_string: unknown TransformKind");
}

std::optional<TransformKind> parse_transform(std::string_view name) {
    if (name == "linear") return TransformKind::Linear;
    if (name == "probit") return TransformKind::Probit;
    if (name == "logit") return TransformKind::Logit;
    return std::nullopt;
}

double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double probit(Probability p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::domain_error("probit: p must lie strictly inside (0,1), got " + std::to_string(p));
    // Work on the small tail q = min(p, 1-p): upper_tail(z) = q with z >= 0
    // keeps every quantity at full relative precision; the sign is restored
    // at the end.  Two Halley steps on f(z) = Q(z) - q, with Q' = -pdf and
    // Q'' = z*pdf, i.e. z <- z - u/(1 + z*u/2) where u = (q - Q(z))/pdf(z).
    bool upper_half = p >= 0.5;
    double q = upper_half ? 1.0 - p : p;
    double z = -probit_initial(q); // >= 0 up to approximation error
    for (int i = 0; i < 2; ++i) {
        double pdf = normal_pdf(z);
        if (pdf <= 0.0) break; // |z| beyond ~38; initializer already exact there
        double u = (q - upper_tail(z)) / pdf;
        z -= u / (1.0 + 0.5 * z * u);
    }
    return upper_half ? z : -z;
}

double logit(Probability p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::domain_error("logit: p must lie strictly inside (0,1), got " + std::to_string(p));
    return std::log(p) - std::log1p(-p);
}

Probability inv_logit(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

double apply_transform(Probability p, TransformKind kind, std::optional<long long> clamp_n) {
    if (!(p >= 0.0 && p <= 1.0))
        throw std::domain_error("apply_transform: p outside [0,1]: " + std::to_string(p));
    if (kind == TransformKind::Linear) return p;
    double q = p;
    if (clamp_n) {
        if (*clamp_n <= 0)
            throw std::domain_error("apply_transform: clamp_n must be positive");
        double lo = 1.0 / (2.0 * static_cast<double>(*clamp_n));
        q = std::fmin(std::fmax(q, lo), 1.0 - lo);
    }
    return kind == TransformKind::Probit ? probit(q) : logit(q);
}

double binomial_cdf(long long k, long long n, Probability p) {
    if (n < 0) throw std::domain_error("binomial_cdf: n must be >= 0");
    if (!(p >= 0.0 && p <= 1.0))
        throw std::domain_error("binomial_cdf: p outside [0,1]: " + std::to_string(p));
    if (k < 0) return 0.0;
    if (k >= n) return 1.0;
    // P[Bin(n,p) <= k] = I_{1-p}(n-k, k+1)
    return reg_inc_beta(static_cast<double>(n - k), static_cast<double>(k + 1), 1.0 - p);
}

} // namespace driftlab
