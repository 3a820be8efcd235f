#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "driftlab/gaussian.hpp"
#include "driftlab/numerics.hpp"
#include "driftlab/rng.hpp"
#include "oracles.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <vector>

using namespace driftlab;

namespace {

GaussianTask iso_task(std::vector<double> mu, double sigma) {
    GaussianTask t;
    t.d = static_cast<long long>(mu.size());
    t.mu = std::move(mu);
    t.noise = IsotropicNoise{sigma};
    return t;
}

GaussianTask diag_task(std::vector<double> mu, std::vector<double> var) {
    GaussianTask t;
    t.d = static_cast<long long>(mu.size());
    t.mu = std::move(mu);
    t.noise = DiagonalNoise{std::move(var)};
    return t;
}

double norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) s += a[i] * b[i];
    return s;
}

} // namespace

TEST_CASE("sample_unit_sphere produces unit vectors deterministically") {
    Rng rng(17);
    for (long long d : {1LL, 2LL, 10LL, 500LL}) {
        auto v = sample_unit_sphere(d, rng);
        CHECK(static_cast<long long>(v.size()) == d);
        CHECK(std::fabs(norm(v) - 1.0) <= 1e-12);
    }
    // one dimension collapses to a sign
    Rng r1(5);
    auto s = sample_unit_sphere(1, r1);
    CHECK(std::fabs(std::fabs(s[0]) - 1.0) <= 1e-15);

    // identical generator state, identical draw
    Rng a(123), b(123);
    CHECK(sample_unit_sphere(64, a) == sample_unit_sphere(64, b));
    CHECK_THROWS_AS(sample_unit_sphere(0, a), std::invalid_argument);

    // no preferred direction: coordinate means shrink with the sample count
    Rng r2(29);
    const int reps = 4000;
    std::vector<double> mean(8, 0.0);
    for (int i = 0; i < reps; ++i) {
        auto u = sample_unit_sphere(8, r2);
        for (int j = 0; j < 8; ++j) mean[static_cast<std::size_t>(j)] += u[static_cast<std::size_t>(j)];
    }
    for (double m : mean) CHECK(std::fabs(m / reps) <= 0.03);
}

TEST_CASE("apply_shift mean-shift algebra") {
    GaussianTask base = iso_task({1.0, -2.0, 0.5}, 0.4);
    MeanShift ms;
    ms.alpha = 0.9;
    ms.beta = 0.5;
    ms.gamma = 1.5;
    ms.delta = {0.0, 0.6, -0.8};
    GaussianTask shifted = apply_shift(base, ms);
    CHECK(shifted.d == 3);
    CHECK(shifted.mu[0] == 0.9 * 1.0);
    CHECK(shifted.mu[1] == doctest::Approx(0.9 * -2.0 + 0.5 * 0.6).epsilon(1e-15));
    CHECK(shifted.mu[2] == doctest::Approx(0.9 * 0.5 - 0.5 * 0.8).epsilon(1e-15));
    CHECK(std::get<IsotropicNoise>(shifted.noise).sigma == doctest::Approx(0.6).epsilon(1e-15));
    // the base task is untouched
    CHECK(base.mu[0] == 1.0);
    CHECK(std::get<IsotropicNoise>(base.noise).sigma == 0.4);

    MeanShift bad = ms;
    bad.delta = {1.0, 1.0, 1.0}; // norm sqrt(3) > 1
    CHECK_THROWS_AS(apply_shift(base, bad), std::invalid_argument);
    bad = ms;
    bad.delta = {1.0, 0.0};
    CHECK_THROWS_AS(apply_shift(base, bad), std::invalid_argument);
    bad = ms;
    bad.gamma = 0.0;
    CHECK_THROWS_AS(apply_shift(base, bad), std::invalid_argument);
    // mean shifts are only defined over isotropic noise
    GaussianTask dt = diag_task({1.0, 1.0, 1.0}, {1.0, 2.0, 3.0});
    CHECK_THROWS_AS(apply_shift(dt, ms), std::invalid_argument);
}

TEST_CASE("apply_shift covariance forms") {
    GaussianTask base = iso_task({1.0, 0.0}, 0.3);
    GaussianTask added = apply_shift(base, CovarianceAdd{0.16});
    CHECK(std::get<IsotropicNoise>(added.noise).sigma ==
          doctest::Approx(std::sqrt(0.09 + 0.16)).epsilon(1e-15));
    CHECK(added.mu == base.mu);

    GaussianTask dt = diag_task({0.0, 0.0, 0.0}, {0.5, 0.005, 2.0});
    GaussianTask dadd = apply_shift(dt, CovarianceAdd{0.125});
    const auto& var = std::get<DiagonalNoise>(dadd.noise).variances;
    CHECK(var[0] == 0.625);
    CHECK(var[1] == 0.13);
    CHECK(var[2] == 2.125);

    GaussianTask scaled = apply_shift(base, CovarianceScale{4.0});
    CHECK(std::get<IsotropicNoise>(scaled.noise).sigma == doctest::Approx(0.6).epsilon(1e-15));
    GaussianTask dscale = apply_shift(dt, CovarianceScale{2.0});
    CHECK(std::get<DiagonalNoise>(dscale.noise).variances == std::vector<double>{1.0, 0.01, 4.0});

    CHECK_THROWS_AS(apply_shift(base, CovarianceAdd{-0.1}), std::invalid_argument);
    CHECK_THROWS_AS(apply_shift(base, CovarianceScale{0.0}), std::invalid_argument);
}

TEST_CASE("exact_linear_accuracy closed form") {
    // theta = mu gives Phi(|mu|/sigma)
    GaussianTask t = iso_task({0.3, 0.0, 0.4}, 0.25);
    LinearClassifier mu_clf{{0.3, 0.0, 0.4}};
    CHECK(std::fabs(exact_linear_accuracy(t, mu_clf) -
                    static_cast<double>(oracle::normal_cdf(2.0L))) <= 1e-12);

    // scale invariance of the decision rule
    LinearClassifier big{{3.0, 0.0, 4.0}};
    CHECK(exact_linear_accuracy(t, big) == doctest::Approx(exact_linear_accuracy(t, mu_clf)).epsilon(1e-15));

    // negation flips the accuracy
    LinearClassifier neg{{-0.3, 0.0, -0.4}};
    CHECK(std::fabs(exact_linear_accuracy(t, neg) + exact_linear_accuracy(t, mu_clf) - 1.0) <= 1e-12);

    // orthogonal to the mean: coin flip
    LinearClassifier orth{{0.0, 1.0, 0.0}};
    CHECK(exact_linear_accuracy(t, orth) == 0.5);

    // short theta is zero-padded
    LinearClassifier short_clf{{0.3}};
    LinearClassifier padded{{0.3, 0.0, 0.0}};
    CHECK(exact_linear_accuracy(t, short_clf) == exact_linear_accuracy(t, padded));
    CHECK(std::fabs(exact_linear_accuracy(t, short_clf) -
                    static_cast<double>(oracle::normal_cdf(0.3L / 0.25L))) <= 1e-12);

    // diagonal noise weights the quadratic form per coordinate
    GaussianTask dt = diag_task({1.0, 0.0}, {4.0, 9.0});
    LinearClassifier ones{{1.0, 1.0}};
    CHECK(std::fabs(exact_linear_accuracy(dt, ones) -
                    static_cast<double>(oracle::normal_cdf(1.0L / std::sqrt(13.0L)))) <= 1e-12);

    CHECK_THROWS_AS(exact_linear_accuracy(t, LinearClassifier{{}}), std::invalid_argument);
    CHECK_THROWS_AS(exact_linear_accuracy(t, LinearClassifier{{0.0, 0.0}}), std::invalid_argument);
    CHECK_THROWS_AS(exact_linear_accuracy(t, LinearClassifier{{1, 2, 3, 4}}), std::invalid_argument);
}

TEST_CASE("exact_linear_accuracy agrees with Monte Carlo") {
    GaussianTask t = iso_task({0.2, -0.1, 0.15, 0.0, 0.25}, 0.5);
    LinearClassifier clf{{0.5, -0.4, 0.1, 0.2, 0.3}};
    double exact = exact_linear_accuracy(t, clf);

    Rng stream = Rng(2024).derive("mc");
    const long long n = 200000;
    Dataset data = sample_dataset(t, n, stream);
    long long hits = 0;
    for (long long i = 0; i < n; ++i) {
        double m = 0.0;
        for (long long j = 0; j < t.d; ++j)
            m += clf.theta[static_cast<std::size_t>(j)] * data.row(i)[j];
        int pred = m >= 0.0 ? 1 : -1;
        if (pred == data.y[static_cast<std::size_t>(i)]) ++hits;
    }
    double emp = static_cast<double>(hits) / static_cast<double>(n);
    // 4 binomial standard deviations
    double slack = 4.0 * std::sqrt(exact * (1.0 - exact) / static_cast<double>(n));
    CHECK(std::fabs(emp - exact) <= slack);
}

TEST_CASE("probit_deviation matches the closed form and the oracle") {
    const double sigma = std::pow(10.0, -1.5);
    // mean zero keeps both accuracies near 1/2 regardless of the shift size
    GaussianTask t = iso_task(std::vector<double>(20, 0.0), sigma);

    Rng rng(301);
    auto theta = sample_unit_sphere(20, rng);
    auto delta = sample_unit_sphere(20, rng);
    LinearClassifier clf{theta};
    MeanShift ms;
    ms.alpha = 0.9;
    ms.beta = 0.02;
    ms.gamma = 1.2;
    ms.delta = delta;

    double dev = probit_deviation(t, ms, clf);
    double closed = ms.beta / (ms.gamma * sigma) * dot(theta, delta);
    CHECK(std::fabs(dev - closed) <= 1e-10);

    // independent path: long double probit of the two exact accuracies
    double acc = exact_linear_accuracy(t, clf);
    double acc_s = exact_linear_accuracy(apply_shift(t, ShiftSpec{ms}), clf);
    long double via = oracle::probit(static_cast<long double>(acc_s)) -
                      static_cast<long double>(ms.alpha / ms.gamma) *
                          oracle::probit(static_cast<long double>(acc));
    CHECK(std::fabs(dev - static_cast<double>(via)) <= 1e-9);

    // no mean displacement, no deviation
    ms.beta = 0.0;
    CHECK(std::fabs(probit_deviation(t, ms, clf)) <= 1e-12);

    GaussianTask dt = diag_task({0.0, 0.0}, {1.0, 2.0});
    MeanShift flat;
    flat.delta = {1.0, 0.0};
    CHECK_THROWS_AS(probit_deviation(dt, flat, LinearClassifier{{1.0, 0.0}}), std::invalid_argument);
}

TEST_CASE("probit_deviation carries the beta over gamma-sigma gain") {
    // beta = 0.5, gamma = 1, sigma = 10^-1.5: gain 15.8113883...; an alignment
    // of 0.05 between theta and delta scales it down into representable range
    const double sigma = std::pow(10.0, -1.5);
    GaussianTask t = iso_task(std::vector<double>(4, 0.0), sigma);
    LinearClassifier clf{{1.0, 0.0, 0.0, 0.0}};
    MeanShift ms;
    ms.alpha = 1.0;
    ms.beta = 0.5;
    ms.gamma = 1.0;
    ms.delta = {0.05, 0.0, std::sqrt(1.0 - 0.05 * 0.05), 0.0};

    double dev = probit_deviation(t, ms, clf);
    CHECK(std::fabs(dev - 0.05 * oracle::kShiftGain) <= 1e-9);
}

TEST_CASE("theorem_bound frozen values") {
    const double sigma = std::pow(10.0, -1.5);
    CHECK(std::fabs(theorem_bound(0.5, 1.0, sigma, 100000, 0.01) - oracle::kBoundDelta01) <= 1e-12);
    CHECK(std::fabs(theorem_bound(0.5, 1.0, sigma, 100000, 0.05) - oracle::kBoundDelta05) <= 1e-12);
    // two models at base delta 0.01: effective tail probability 0.005
    CHECK(std::fabs(theorem_bound_union(0.5, 1.0, sigma, 100000, 0.01, 2) -
                    oracle::kBoundUnionN2Delta01) <= 1e-12);
    // two models at delta 0.5 puts ln(8) inside the root
    CHECK(std::fabs(theorem_bound_union(0.5, 1.0, sigma, 100000, 0.5, 2) -
                    0.5 / sigma * std::sqrt(2.0 * std::log(8.0) / 1e5)) <= 1e-15);
    CHECK(std::fabs(theorem_bound_union(0.5, 1.0, sigma, 100000, 0.01, 100) -
                    oracle::kBoundUnionN100Delta01) <= 1e-12);
    // a union over one model is no union at all
    CHECK(theorem_bound_union(0.5, 1.0, sigma, 100000, 0.01, 1) ==
          theorem_bound(0.5, 1.0, sigma, 100000, 0.01));

    // shrinks with dimension, grows as the failure probability tightens
    CHECK(theorem_bound(0.5, 1.0, sigma, 1000, 0.05) > theorem_bound(0.5, 1.0, sigma, 4000, 0.05));
    CHECK(theorem_bound(0.5, 1.0, sigma, 1000, 0.01) > theorem_bound(0.5, 1.0, sigma, 1000, 0.05));
    CHECK(theorem_bound_union(0.5, 1.0, sigma, 1000, 0.05, 50) >
          theorem_bound(0.5, 1.0, sigma, 1000, 0.05));
    // dimension halves the square, bound scales by 1/sqrt(2)
    CHECK(std::fabs(theorem_bound(0.5, 1.0, sigma, 2000, 0.05) * std::sqrt(2.0) -
                    theorem_bound(0.5, 1.0, sigma, 1000, 0.05)) <= 1e-15);

    CHECK_THROWS_AS(theorem_bound(0.5, 1.0, 0.0, 100, 0.05), std::invalid_argument);
    CHECK_THROWS_AS(theorem_bound(0.5, 0.0, 1.0, 100, 0.05), std::invalid_argument);
    CHECK_THROWS_AS(theorem_bound(0.5, 1.0, 1.0, 0, 0.05), std::invalid_argument);
    CHECK_THROWS_AS(theorem_bound(0.5, 1.0, 1.0, 100, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(theorem_bound(0.5, 1.0, 1.0, 100, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(theorem_bound_union(0.5, 1.0, 1.0, 100, 0.05, 0), std::invalid_argument);
}

TEST_CASE("theorem_bound holds for random shift directions") {
    // a classifier fixed before the shift direction is drawn exceeds the
    // delta_p = 0.05 bound far less often than 5% of the time
    const double sigma = std::pow(10.0, -1.5);
    const long long d = 1000;
    GaussianTask t = iso_task(std::vector<double>(static_cast<std::size_t>(d), 0.0), sigma);

    Rng rng(77);
    auto theta = sample_unit_sphere(d, rng);
    LinearClassifier clf{theta};
    double bound = theorem_bound(0.5, 1.0, sigma, d, 0.05);

    int over = 0;
    const int trials = 500;
    for (int i = 0; i < trials; ++i) {
        MeanShift ms;
        ms.alpha = 1.0;
        ms.beta = 0.5;
        ms.gamma = 1.0;
        ms.delta = sample_unit_sphere(d, rng);
        if (std::fabs(probit_deviation(t, ms, clf)) > bound) ++over;
    }
    CHECK(static_cast<double>(over) / trials <= 0.03);
}

TEST_CASE("sample_dataset is deterministic and prefix-stable") {
    GaussianTask t = iso_task({0.5, -0.3, 0.2, 0.1, 0.0, 0.4, -0.2, 0.3, 0.6, -0.1}, 0.7);
    Rng stream = Rng(99).derive("data");

    Dataset a = sample_dataset(t, 50, stream);
    Dataset b = sample_dataset(t, 50, stream);
    CHECK(a.x == b.x);
    CHECK(a.y == b.y);

    // a projected task draws the same leading coordinates and labels
    Dataset proj = sample_dataset(project_task(t, 3), 50, stream);
    for (long long i = 0; i < 50; ++i) {
        CHECK(proj.y[static_cast<std::size_t>(i)] == a.y[static_cast<std::size_t>(i)]);
        for (long long j = 0; j < 3; ++j)
            CHECK(proj.row(i)[j] == a.row(i)[j]);
    }

    // sample_into agrees with the dataset row by row
    std::vector<double> row(10);
    for (long long i : {0LL, 7LL, 49LL}) {
        int label = sample_into(t, i, stream, row.data(), 10);
        CHECK(label == a.y[static_cast<std::size_t>(i)]);
        for (long long j = 0; j < 10; ++j) CHECK(row[static_cast<std::size_t>(j)] == a.row(i)[j]);
    }

    // extending n keeps earlier samples in place
    Dataset longer = sample_dataset(t, 80, stream);
    for (std::size_t i = 0; i < a.x.size(); ++i) CHECK(longer.x[i] == a.x[i]);

    // distinct streams diverge
    Dataset c = sample_dataset(t, 50, Rng(99).derive("other"));
    CHECK(c.x != a.x);

    Dataset empty = sample_dataset(t, 0, stream);
    CHECK(empty.n == 0);
    CHECK(empty.x.empty());
}

TEST_CASE("sample_dataset draws from the task distribution") {
    GaussianTask t = iso_task({0.8, -0.5, 0.0}, 0.6);
    Rng stream = Rng(7).derive("dist");
    const long long n = 20000;
    Dataset data = sample_dataset(t, n, stream);

    double label_mean = 0.0;
    std::vector<double> cond_mean(3, 0.0);
    for (long long i = 0; i < n; ++i) {
        double y = data.y[static_cast<std::size_t>(i)];
        label_mean += y;
        for (long long j = 0; j < 3; ++j)
            cond_mean[static_cast<std::size_t>(j)] += data.row(i)[j] * y;
    }
    CHECK(std::fabs(label_mean / n) <= 0.03);
    // E[x_j * y] = mu_j
    double slack = 4.0 * std::sqrt(0.6 * 0.6 + 0.8 * 0.8) / std::sqrt(static_cast<double>(n));
    for (long long j = 0; j < 3; ++j)
        CHECK(std::fabs(cond_mean[static_cast<std::size_t>(j)] / n - t.mu[static_cast<std::size_t>(j)]) <= slack);

    // diagonal noise: per-coordinate variance shows through
    GaussianTask dt = diag_task({0.0, 0.0}, {0.25, 4.0});
    Dataset dd = sample_dataset(dt, n, Rng(7).derive("diag"));
    double v0 = 0.0, v1 = 0.0;
    for (long long i = 0; i < n; ++i) {
        v0 += dd.row(i)[0] * dd.row(i)[0];
        v1 += dd.row(i)[1] * dd.row(i)[1];
    }
    CHECK(std::fabs(v0 / n - 0.25) <= 0.02);
    CHECK(std::fabs(v1 / n - 4.0) <= 0.3);
}

TEST_CASE("make_aux_task pushes the mean along a fresh unit direction") {
    GaussianTask base = iso_task({1.0, 2.0, 3.0, 4.0}, 0.5);
    Rng rng(41);
    AuxTask aux = make_aux_task(base, 0.5, 0.2, rng);
    CHECK(std::fabs(norm(aux.delta_tilde) - 1.0) <= 1e-12);
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(aux.task.mu[i] == doctest::Approx(base.mu[i] + 0.5 * aux.delta_tilde[i]).epsilon(1e-15));
    CHECK(std::get<IsotropicNoise>(aux.task.noise).sigma == 0.2);

    // reproducible from the generator seed
    Rng r1(41), r2(41);
    AuxTask x = make_aux_task(base, 0.5, 0.2, r1);
    AuxTask y = make_aux_task(base, 0.5, 0.2, r2);
    CHECK(x.delta_tilde == y.delta_tilde);
    CHECK(x.task.mu == y.task.mu);

    CHECK_THROWS_AS(make_aux_task(base, 0.5, 0.0, rng), std::invalid_argument);
}

TEST_CASE("adversarial_mean_shift aims the displacement at the target") {
    LinearClassifier target{{3.0, 0.0, 4.0}};
    MeanShift ms = adversarial_mean_shift(1.0, 0.5, 1.0, -0.03, target, 5);
    REQUIRE(ms.delta.size() == 5);
    CHECK(ms.delta[0] == doctest::Approx(-0.03 * 0.6).epsilon(1e-15));
    CHECK(ms.delta[1] == 0.0);
    CHECK(ms.delta[2] == doctest::Approx(-0.03 * 0.8).epsilon(1e-15));
    CHECK(ms.delta[3] == 0.0);
    CHECK(ms.delta[4] == 0.0);
    CHECK(std::fabs(norm(ms.delta) - 0.03) <= 1e-12);

    CHECK_THROWS_AS(adversarial_mean_shift(1, 0.5, 1, 1.5, target, 5), std::invalid_argument);
    CHECK_THROWS_AS(adversarial_mean_shift(1, 0.5, 1, 0.1, LinearClassifier{{}}, 5),
                    std::invalid_argument);
    CHECK_THROWS_AS(adversarial_mean_shift(1, 0.5, 1, 0.1, LinearClassifier{{0.0}}, 5),
                    std::invalid_argument);
    CHECK_THROWS_AS(adversarial_mean_shift(1, 0.5, 1, 0.1, target, 2), std::invalid_argument);
}

TEST_CASE("adversarial shift hits the frozen target deviation") {
    // c = -0.03 with beta = 0.5, gamma = 1, sigma = 10^-1.5 lands exactly at
    // c * beta / (gamma * sigma)
    const double sigma = std::pow(10.0, -1.5);
    const long long d = 50;
    GaussianTask t = iso_task(std::vector<double>(static_cast<std::size_t>(d), 0.0), sigma);
    Rng rng(1234);
    auto theta = sample_unit_sphere(d, rng);
    LinearClassifier target{theta};

    MeanShift ms = adversarial_mean_shift(1.0, 0.5, 1.0, -0.03, target, d);
    double dev = probit_deviation(t, ms, target);
    CHECK(std::fabs(dev - oracle::kAdversarialDev) <= 1e-9);
    CHECK(std::fabs(dev + 0.474342) <= 1e-3);

    // any other classifier deviates no further than |c| * beta / (gamma * sigma)
    double cap = 0.03 * 0.5 / sigma + 1e-9;
    for (int i = 0; i < 20; ++i) {
        LinearClassifier other{sample_unit_sphere(d, rng)};
        CHECK(std::fabs(probit_deviation(t, ms, other)) <= cap);
    }
}

TEST_CASE("project_task truncates mean and noise") {
    GaussianTask t = diag_task({1.0, 2.0, 3.0, 4.0}, {0.1, 0.2, 0.3, 0.4});
    GaussianTask p = project_task(t, 2);
    CHECK(p.d == 2);
    CHECK(p.mu == std::vector<double>{1.0, 2.0});
    CHECK(std::get<DiagonalNoise>(p.noise).variances == std::vector<double>{0.1, 0.2});

    GaussianTask it = iso_task({1.0, 2.0, 3.0}, 0.9);
    GaussianTask ip = project_task(it, 3);
    CHECK(ip.mu == it.mu);
    CHECK(std::get<IsotropicNoise>(ip.noise).sigma == 0.9);

    CHECK_THROWS_AS(project_task(t, 0), std::invalid_argument);
    CHECK_THROWS_AS(project_task(t, 5), std::invalid_argument);
}

TEST_CASE("covariance addition compresses probit margins coordinate-wise") {
    // one-hot classifiers on a diagonal task: adding s2 to a variance v
    // multiplies the probit margin by sqrt(v / (v + s2))
    GaussianTask t = diag_task({0.05, 0.05}, {0.5, 0.005});
    GaussianTask shifted = apply_shift(t, CovarianceAdd{0.125});

    LinearClassifier e0{{1.0, 0.0}};
    LinearClassifier e1{{0.0, 1.0}};
    double r0 = probit(exact_linear_accuracy(shifted, e0)) / probit(exact_linear_accuracy(t, e0));
    double r1 = probit(exact_linear_accuracy(shifted, e1)) / probit(exact_linear_accuracy(t, e1));
    CHECK(std::fabs(r0 - oracle::kRatioBig) <= 1e-9);
    CHECK(std::fabs(r1 - oracle::kRatioSmall) <= 1e-9);

    // scaling the whole covariance compresses every margin equally
    GaussianTask scaled = apply_shift(t, CovarianceScale{1.25});
    double s0 = probit(exact_linear_accuracy(scaled, e0)) / probit(exact_linear_accuracy(t, e0));
    double s1 = probit(exact_linear_accuracy(scaled, e1)) / probit(exact_linear_accuracy(t, e1));
    CHECK(std::fabs(s0 - 1.0 / std::sqrt(1.25)) <= 1e-12);
    CHECK(std::fabs(s1 - s0) <= 1e-12);
}
