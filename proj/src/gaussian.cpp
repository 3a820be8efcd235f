#include "driftlab/gaussian.hpp"

#include <cmath>
#include <stdexcept>

namespace driftlab {

namespace {

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

double dot_prefix(const std::vector<double>& a, const std::vector<double>& b) {
    // dot over the shorter length; the longer vector's tail multiplies zeros
    std::size_t m = std::min(a.size(), b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += a[i] * b[i];
    return s;
}

double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

// theta' Sigma theta for theta possibly shorter than the task dimension
double quad_form(const Noise& noise, const std::vector<double>& theta) {
    if (const auto* iso = std::get_if<IsotropicNoise>(&noise)) {
        double n = norm2(theta);
        return iso->sigma * iso->sigma * n * n;
    }
    const auto& var = std::get<DiagonalNoise>(noise).variances;
    double s = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) s += var[i] * theta[i] * theta[i];
    return s;
}

void validate_task(const GaussianTask& task) {
    require(task.d > 0, "GaussianTask: d must be positive");
    require(static_cast<long long>(task.mu.size()) == task.d, "GaussianTask: |mu| != d");
    if (const auto* iso = std::get_if<IsotropicNoise>(&task.noise)) {
        require(iso->sigma > 0.0, "GaussianTask: sigma must be positive");
    } else {
        const auto& var = std::get<DiagonalNoise>(task.noise).variances;
        require(static_cast<long long>(var.size()) == task.d, "GaussianTask: |variances| != d");
        for (double v : var) require(v > 0.0, "GaussianTask: variances must be positive");
    }
}

} // namespace

std::vector<double> sample_unit_sphere(long long d, Rng& rng) {
    require(d >= 1, "sample_unit_sphere: d must be >= 1");
    std::vector<double> v(static_cast<std::size_t>(d));
    double n2;
    do {
        n2 = 0.0;
        for (auto& x : v) {
            x = rng.next_gaussian();
            n2 += x * x;
        }
    } while (n2 == 0.0); // probability-zero guard
    double inv = 1.0 / std::sqrt(n2);
    for (auto& x : v) x *= inv;
    return v;
}

GaussianTask apply_shift(const GaussianTask& task, const ShiftSpec& shift) {
    validate_task(task);
    GaussianTask out = task;
    if (const auto* ms = std::get_if<MeanShift>(&shift)) {
        const auto* iso = std::get_if<IsotropicNoise>(&task.noise);
        require(iso != nullptr, "apply_shift: MeanShift requires isotropic noise");
        require(static_cast<long long>(ms->delta.size()) == task.d,
                "apply_shift: |delta| != d");
        require(ms->gamma > 0.0, "apply_shift: gamma must be positive");
        double dn = norm2(ms->delta);
        require(dn <= 1.0 + 1e-9, "apply_shift: |delta| must be <= 1");
        for (long long i = 0; i < task.d; ++i)
            out.mu[static_cast<std::size_t>(i)] =
                ms->alpha * task.mu[static_cast<std::size_t>(i)] +
                ms->beta * ms->delta[static_cast<std::size_t>(i)];
        out.noise = IsotropicNoise{ms->gamma * iso->sigma};
        return out;
    }
    if (const auto* add = std::get_if<CovarianceAdd>(&shift)) {
        require(add->s2 >= 0.0, "apply_shift: s2 must be >= 0");
        if (const auto* iso = std::get_if<IsotropicNoise>(&task.noise)) {
            out.noise = IsotropicNoise{std::sqrt(iso->sigma * iso->sigma + add->s2)};
        } else {
            auto var = std::get<DiagonalNoise>(task.noise).variances;
            for (auto& v : var) v += add->s2;
            out.noise = DiagonalNoise{std::move(var)};
        }
        return out;
    }
    const auto& sc = std::get<CovarianceScale>(shift);
    require(sc.kappa > 0.0, "apply_shift: kappa must be positive");
    if (const auto* iso = std::get_if<IsotropicNoise>(&task.noise)) {
        out.noise = IsotropicNoise{iso->sigma * std::sqrt(sc.kappa)};
    } else {
        auto var = std::get<DiagonalNoise>(task.noise).variances;
        for (auto& v : var) v *= sc.kappa;
        out.noise = DiagonalNoise{std::move(var)};
    }
    return out;
}

Probability exact_linear_accuracy(const GaussianTask& task, const LinearClassifier& clf) {
    validate_task(task);
    require(!clf.theta.empty(), "exact_linear_accuracy: empty theta");
    require(static_cast<long long>(clf.theta.size()) <= task.d,
            "exact_linear_accuracy: theta longer than task dimension");
    double denom2 = quad_form(task.noise, clf.theta);
    require(denom2 > 0.0, "exact_linear_accuracy: theta is all zero");
    double margin = dot_prefix(clf.theta, task.mu) / std::sqrt(denom2);
    return normal_cdf(margin);
}

double probit_deviation(const GaussianTask& task, const MeanShift& shift,
                        const LinearClassifier& clf) {
    const auto* iso = std::get_if<IsotropicNoise>(&task.noise);
    require(iso != nullptr, "probit_deviation: task must have isotropic noise");
    Probability acc = exact_linear_accuracy(task, clf);
    Probability acc_shift = exact_linear_accuracy(apply_shift(task, ShiftSpec{shift}), clf);
    double via_acc = probit(acc_shift) - (shift.alpha / shift.gamma) * probit(acc);
    double tn = norm2(clf.theta);
    double closed = shift.beta / (shift.gamma * iso->sigma) *
                    (dot_prefix(clf.theta, shift.delta) / tn);
    if (std::fabs(via_acc - closed) > 1e-8)
        throw std::runtime_error("probit_deviation: exact-accuracy and closed-form paths "
                                 "disagree beyond 1e-8");
    return via_acc;
}

double theorem_bound(double beta, double gamma, double sigma, long long d, double delta_p) {
    require(sigma > 0.0 && gamma > 0.0, "theorem_bound: sigma and gamma must be positive");
    require(d >= 1, "theorem_bound: d must be >= 1");
    require(delta_p > 0.0 && delta_p < 1.0, "theorem_bound: delta_p outside (0,1)");
    return beta / (gamma * sigma) *
           std::sqrt(2.0 * std::log(2.0 / delta_p) / static_cast<double>(d));
}

double theorem_bound_union(double beta, double gamma, double sigma, long long d,
                           double delta_p, long long n_models) {
    require(n_models >= 1, "theorem_bound_union: n_models must be >= 1");
    return theorem_bound(beta, gamma, sigma, d, delta_p / static_cast<double>(n_models));
}

int sample_into(const GaussianTask& task, long long i, const Rng& stream, double* out,
                long long dims) {
    Rng s = stream.derive(static_cast<std::uint64_t>(i));
    int label = (s.next_u32() & 1u) ? 1 : -1;
    double y = static_cast<double>(label);
    if (const auto* iso = std::get_if<IsotropicNoise>(&task.noise)) {
        double sd = iso->sigma;
        for (long long j = 0; j < dims; ++j)
            out[j] = task.mu[static_cast<std::size_t>(j)] * y + sd * s.next_gaussian();
    } else {
        const auto& var = std::get<DiagonalNoise>(task.noise).variances;
        for (long long j = 0; j < dims; ++j)
            out[j] = task.mu[static_cast<std::size_t>(j)] * y +
                     std::sqrt(var[static_cast<std::size_t>(j)]) * s.next_gaussian();
    }
    return label;
}

Dataset sample_dataset(const GaussianTask& task, long long n, const Rng& stream) {
    validate_task(task);
    require(n >= 0, "sample_dataset: n must be >= 0");
    Dataset data;
    data.n = n;
    data.d = task.d;
    data.x.resize(static_cast<std::size_t>(n * task.d));
    data.y.resize(static_cast<std::size_t>(n));
    for (long long i = 0; i < n; ++i)
        data.y[static_cast<std::size_t>(i)] = sample_into(task, i, stream, data.row(i), task.d);
    return data;
}

AuxTask make_aux_task(const GaussianTask& base, double beta, double sigma_aux, Rng& rng) {
    validate_task(base);
    require(sigma_aux > 0.0, "make_aux_task: sigma_aux must be positive");
    AuxTask aux;
    aux.delta_tilde = sample_unit_sphere(base.d, rng);
    aux.task.d = base.d;
    aux.task.mu = base.mu;
    for (long long i = 0; i < base.d; ++i)
        aux.task.mu[static_cast<std::size_t>(i)] += beta * aux.delta_tilde[static_cast<std::size_t>(i)];
    aux.task.noise = IsotropicNoise{sigma_aux};
    return aux;
}

MeanShift adversarial_mean_shift(double alpha, double beta, double gamma, double c,
                                 const LinearClassifier& target, long long d) {
    require(std::fabs(c) <= 1.0, "adversarial_mean_shift: |c| must be <= 1");
    require(!target.theta.empty(), "adversarial_mean_shift: empty target theta");
    require(static_cast<long long>(target.theta.size()) <= d,
            "adversarial_mean_shift: target theta longer than d");
    double tn = norm2(target.theta);
    require(tn > 0.0, "adversarial_mean_shift: target theta is all zero");
    MeanShift shift;
    shift.alpha = alpha;
    shift.beta = beta;
    shift.gamma = gamma;
    shift.delta.assign(static_cast<std::size_t>(d), 0.0);
    for (std::size_t i = 0; i < target.theta.size(); ++i)
        shift.delta[i] = c * target.theta[i] / tn;
    return shift;
}

GaussianTask project_task(const GaussianTask& task, long long d_proj) {
    validate_task(task);
    require(d_proj >= 1 && d_proj <= task.d, "project_task: d_proj outside [1, d]");
    GaussianTask out;
    out.d = d_proj;
    out.mu.assign(task.mu.begin(), task.mu.begin() + d_proj);
    if (const auto* iso = std::get_if<IsotropicNoise>(&task.noise)) {
        out.noise = *iso;
    } else {
        const auto& var = std::get<DiagonalNoise>(task.noise).variances;
        out.noise = DiagonalNoise{std::vector<double>(var.begin(), var.begin() + d_proj)};
    }
    return out;
}

} // namespace driftlab
