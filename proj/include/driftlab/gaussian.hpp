#pragma once

// The synthetic binary-classification world: labels are uniform on {-1,+1},
// features are gaussian around mu*y.  For linear classifiers the accuracy
// under any such task has a closed form, which is what makes the probit-line
// experiments exact rather than sampled.

#include "driftlab/numerics.hpp"
#include "driftlab/rng.hpp"

#include <cstdint>
#include <variant>
#include <vector>

namespace driftlab {

struct IsotropicNoise {
    double sigma = 1.0; // per-coordinate standard deviation
};
struct DiagonalNoise {
    std::vector<double> variances; // length d, all positive
};
using Noise = std::variant<IsotropicNoise, DiagonalNoise>;

struct GaussianTask {
    long long d = 0;
    std::vector<double> mu; // length d
    Noise noise;
};

// mu' = alpha*mu + beta*delta, sigma' = gamma*sigma.  delta is a direction
// with norm <= 1 (unit for random shifts, c*theta/|theta| adversarially).
struct MeanShift {
    double alpha = 1.0;
    double beta = 0.0;
    double gamma = 1.0;
    std::vector<double> delta;
};
struct CovarianceAdd {
    double s2 = 0.0; // Sigma' = Sigma + s2*I
};
struct CovarianceScale {
    double kappa = 1.0; // Sigma' = kappa*Sigma
};
using ShiftSpec = std::variant<MeanShift, CovarianceAdd, CovarianceScale>;

// Weight vector of sign(theta . x).  May be shorter than the task dimension;
// evaluation zero-pads the missing coordinates.
struct LinearClassifier {
    std::vector<double> theta;
};

// Row-major sample matrix with labels; samples from a task live here.
struct Dataset {
    long long n = 0;
    long long d = 0;
    std::vector<double> x; // n*d, row-major
    std::vector<int> y;    // {-1,+1}

    const double* row(long long i) const { return x.data() + i * d; }
    double* row(long long i) { return x.data() + i * d; }
};

struct AuxTask {
    GaussianTask task;               // the auxiliary distribution itself
    std::vector<double> delta_tilde; // the fresh unit direction used to build it
};

// Uniform direction on the unit sphere in R^d.
std::vector<double> sample_unit_sphere(long long d, Rng& rng);

// Shifted task.  MeanShift requires isotropic noise (the mean-shift algebra
// assumes it); covariance shifts work on either noise form.
GaussianTask apply_shift(const GaussianTask& task, const ShiftSpec& shift);

// Phi(theta.mu / sqrt(theta' Sigma theta)), exact for any linear classifier.
Probability exact_linear_accuracy(const GaussianTask& task, const LinearClassifier& clf);

// Departure of the shifted accuracy from the theoretical probit line:
// probit(acc') - (alpha/gamma)*probit(acc).  Computed from exact accuracies
// and cross-checked against the closed form (beta/(gamma*sigma)) * unit-theta
// dot delta; the two must agree to 1e-8.
double probit_deviation(const GaussianTask& task, const MeanShift& shift,
                        const LinearClassifier& clf);

// High-probability bound on |probit deviation| for a classifier chosen
// independently of delta: (beta/(gamma*sigma)) * sqrt(2*log(2/delta_p)/d).
double theorem_bound(double beta, double gamma, double sigma, long long d, double delta_p);
// Same bound holding simultaneously for n_models classifiers (union bound).
double theorem_bound_union(double beta, double gamma, double sigma, long long d,
                           double delta_p, long long n_models);

// n i.i.d. samples.  Sample i draws from its own child stream (label first,
// then coordinates), so the first d' coordinates of a sample do not depend on
// how many further coordinates anyone else materializes.
Dataset sample_dataset(const GaussianTask& task, long long n, const Rng& stream);

// Fill `out` (length dims <= task.d) with sample index `i` of `stream`;
// returns the label.  sample_dataset is a loop over this.
int sample_into(const GaussianTask& task, long long i, const Rng& stream, double* out,
                long long dims);

// Auxiliary task: mean pushed by beta along a fresh random direction, noise
// replaced by isotropic sigma_aux.
AuxTask make_aux_task(const GaussianTask& base, double beta, double sigma_aux, Rng& rng);

// Mean shift aimed at a specific classifier: delta = c * theta / |theta|,
// zero-padded to dimension d.  |c| <= 1.
MeanShift adversarial_mean_shift(double alpha, double beta, double gamma, double c,
                                 const LinearClassifier& target, long long d);

// Marginal of the first d_proj coordinates (itself a gaussian task).
GaussianTask project_task(const GaussianTask& task, long long d_proj);

} // namespace driftlab
