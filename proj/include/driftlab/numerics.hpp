#pragma once

// Scalar special functions used by the statistics layer: the standard normal
// CDF and its inverse (the probit transform), logit, and the binomial CDF
// that backs Clopper-Pearson intervals.

#include <optional>
#include <string>
#include <string_view>

namespace driftlab {

// A probability; always expected to lie in [0,1].
using Probability = double;

enum class TransformKind { Linear, Probit, Logit };

std::string to_string(TransformKind kind);
// Parses "linear" / "probit" / "logit"; empty on anything else.
std::optional<TransformKind> parse_transform(std::string_view name);

double normal_pdf(double x);
double normal_cdf(double x);

// Inverse of normal_cdf on (0,1).  Throws std::domain_error outside.
double probit(Probability p);

// log(p/(1-p)) on (0,1) and its inverse.
double logit(Probability p);
Probability inv_logit(double x);

// Axis rescaling for accuracy values.  When clamp_n is given, p is first
// pulled into [1/(2n), 1-1/(2n)] so empirical accuracies of exactly 0 or 1
// stay transformable; Linear returns p untouched.
double apply_transform(Probability p, TransformKind kind,
                       std::optional<long long> clamp_n = std::nullopt);

// P[Binomial(n,p) <= k] via the regularized incomplete beta function.
double binomial_cdf(long long k, long long n, Probability p);

} // namespace driftlab
