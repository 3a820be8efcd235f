#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "driftlab/gaussian.hpp"
#include "driftlab/scenarios.hpp"
#include "driftlab/stats.hpp"
#include "oracles.hpp"

#include <atomic>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

using namespace driftlab;

namespace {

// small mean-shift world: sigma raised and projections narrowed so exact
// accuracies stay far from 1 and nine-digit storage never saturates
ScenarioConfig trimmed_main() {
    ScenarioConfig cfg = default_config(ScenarioKind::MainTrend);
    cfg.seed = 31;
    cfg.threads = 2;
    cfg.d = 1500;
    cfg.sigma = 0.1;
    cfg.n_train = 60;
    cfg.n_sub = {30, 60};
    cfg.d_proj = {60, 150};
    cfg.d_proj_nonlinear = {60};
    cfg.n_test = 2000;
    cfg.grid.logistic_l2_c = {1e-2, 1.0};
    cfg.grid.logistic_l1_c = {};
    cfg.grid.ridge_alpha = {0.1};
    cfg.grid.knn_k = {1, 3};
    cfg.grid.forest_trees = {3};
    return cfg;
}

bool same_records(const std::vector<EvalRecord>& a, const std::vector<EvalRecord>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const EvalRecord& x = a[i];
        const EvalRecord& y = b[i];
        if (x.model_id != y.model_id || x.family != y.family || x.status != y.status ||
            x.hyperparams != y.hyperparams)
            return false;
        auto same_metric = [](const MetricEstimate& m, const MetricEstimate& n) {
            return m.value == n.value && m.ci_lo == n.ci_lo && m.ci_hi == n.ci_hi && m.n == n.n;
        };
        if (!same_metric(x.acc_id, y.acc_id) || !same_metric(x.acc_ood, y.acc_ood))
            return false;
    }
    return true;
}

} // namespace

TEST_CASE("scenario kinds round-trip through their names") {
    for (ScenarioKind k :
         {ScenarioKind::MainTrend, ScenarioKind::MoreData, ScenarioKind::Adversarial,
          ScenarioKind::CovarianceShift, ScenarioKind::MatchedNoise}) {
        auto parsed = parse_scenario_kind(to_string(k));
        REQUIRE(parsed.has_value());
        CHECK(*parsed == k);
    }
    CHECK(!parse_scenario_kind("main-trend").has_value());
    CHECK(!parse_scenario_kind("").has_value());
    CHECK(!parse_scenario_kind("MainTrend").has_value());
}

TEST_CASE("default configs carry the per-scenario shapes") {
    ScenarioConfig main_cfg = default_config(ScenarioKind::MainTrend);
    CHECK(main_cfg.d == 100000);
    CHECK(main_cfg.n_train == 100);
    CHECK(std::fabs(main_cfg.sigma - std::pow(10.0, -1.5)) <= 1e-15);
    CHECK(main_cfg.alpha == 0.7);
    CHECK(main_cfg.beta == 0.5);
    CHECK(main_cfg.gamma == 1.0);
    CHECK(!main_cfg.grid.logistic_l2_c.empty());
    CHECK(!main_cfg.grid.knn_k.empty());
    CHECK(!main_cfg.grid.forest_trees.empty());

    ScenarioConfig more = default_config(ScenarioKind::MoreData);
    CHECK(more.kind == ScenarioKind::MoreData);
    CHECK(more.aux_sizes == std::vector<long long>{0, 50, 100});
    CHECK(std::fabs(more.sigma_aux - std::sqrt(2.0) * more.sigma) <= 1e-15);
    CHECK(more.grid.knn_k.empty());
    CHECK(more.grid.forest_trees.empty());

    ScenarioConfig adv = default_config(ScenarioKind::Adversarial);
    CHECK(adv.adv_scale == -0.03);
    CHECK(adv.adv_target.empty());

    ScenarioConfig cov = default_config(ScenarioKind::CovarianceShift);
    CHECK(cov.d == 500);
    CHECK(cov.n_train == 2000);
    CHECK(cov.cov_small_count == 10);
    CHECK(cov.cov_var_big == 0.5);
    CHECK(cov.cov_var_small == 0.005);
    CHECK(cov.cov_s2 == 0.125);
    CHECK(!cov.cov_scale_control);

    ScenarioConfig matched = default_config(ScenarioKind::MatchedNoise);
    CHECK(matched.matched_kappa == 1.25);
    CHECK(matched.d == 500);
}

TEST_CASE("parallel_for covers every index once and rethrows worker errors") {
    const long long n = 500;
    for (int threads : {1, 3, 8, 64}) {
        std::vector<std::atomic<int>> hits(n);
        for (auto& h : hits) h = 0;
        parallel_for(n, threads, [&](long long i) { ++hits[static_cast<std::size_t>(i)]; });
        for (auto& h : hits) CHECK(h == 1);
    }
    parallel_for(0, 4, [](long long) { throw std::runtime_error("never runs"); });

    CHECK_THROWS_WITH_AS(
        parallel_for(100, 4,
                     [](long long i) {
                         if (i == 37) throw std::runtime_error("worker 37 exploded");
                     }),
        "worker 37 exploded", std::runtime_error);
}

TEST_CASE("main trend produces the full grid with exact and sampled scoring") {
    ScenarioConfig cfg = trimmed_main();
    ScenarioResult res = run_scenario(cfg);
    CHECK(res.kind == ScenarioKind::MainTrend);
    CHECK(res.seed == cfg.seed);

    // 3 linear configs x 2 n_sub x 2 d_proj, plus knn {1,3} x 2 and forest x 2
    REQUIRE(res.records.size() == 18);
    std::set<std::string> ids;
    for (const auto& r : res.records) {
        CHECK(r.status == "ok");
        ids.insert(r.model_id);
    }
    CHECK(ids.size() == 18);
    // sorted output
    for (std::size_t i = 1; i < res.records.size(); ++i)
        CHECK(res.records[i - 1].model_id < res.records[i].model_id);

    long long linear_count = 0, sampled_count = 0;
    for (const auto& r : res.records) {
        bool is_linear = r.family == "logistic_l2" || r.family == "logistic_l1" ||
                         r.family == "ridge";
        if (is_linear) {
            ++linear_count;
            // exact metrics: no sample count, zero-width interval
            CHECK(!r.acc_id.n.has_value());
            CHECK(r.acc_id.ci_lo == r.acc_id.value);
            CHECK(r.acc_id.ci_hi == r.acc_id.value);
            CHECK(res.extras.count("deviation/" + r.model_id) == 1);
            CHECK(res.extras.count("theta_norm/" + r.model_id) == 1);
        } else {
            ++sampled_count;
            REQUIRE(r.acc_id.n.has_value());
            CHECK(*r.acc_id.n == cfg.n_test);
            REQUIRE(r.acc_ood.n.has_value());
            // the stored value is a count over n_test
            double k = r.acc_id.value * static_cast<double>(cfg.n_test);
            CHECK(std::fabs(k - std::round(k)) <= 1e-6);
            CHECK(r.acc_id.ci_lo < r.acc_id.value);
            CHECK(r.acc_id.value < r.acc_id.ci_hi);
        }
        // canonical nine-digit storage
        CHECK(r.acc_id.value == round_sig9(r.acc_id.value));
        CHECK(r.acc_ood.value == round_sig9(r.acc_ood.value));
    }
    CHECK(linear_count == 12);
    CHECK(sampled_count == 6);

    REQUIRE(res.theoretical_slope.has_value());
    CHECK(*res.theoretical_slope == cfg.alpha / cfg.gamma);
    REQUIRE(res.bound.has_value());
    CHECK(*res.bound == theorem_bound(cfg.beta, cfg.gamma, cfg.sigma, cfg.d, 0.05));
    CHECK(res.extras.at("bound_delta_0.05") == *res.bound);
    CHECK(res.extras.at("bound_delta_0.01") ==
          theorem_bound(cfg.beta, cfg.gamma, cfg.sigma, cfg.d, 0.01));

    // the reported maximum matches the per-model deviations
    double max_dev = 0.0;
    for (const auto& [key, value] : res.extras)
        if (key.rfind("deviation/", 0) == 0) max_dev = std::fmax(max_dev, std::fabs(value));
    CHECK(res.extras.at("max_abs_deviation_exact") == max_dev);

    REQUIRE(res.fits.count("exact") == 1);
    REQUIRE(res.fits.count("all") == 1);
    CHECK(res.fits.at("exact").n_points == 12);
    CHECK(res.fits.at("all").n_points == 18);
    CHECK(res.fits.at("exact").transform == cfg.transform);

    double frac = res.extras.at("band_intersection_fraction");
    CHECK(frac >= 0.0);
    CHECK(frac <= 1.0);
    CHECK(res.extras.count("correlation_max_deviation") == 1);
}

TEST_CASE("main trend with no mean displacement sits exactly on the line") {
    ScenarioConfig cfg = trimmed_main();
    cfg.beta = 0.0;
    ScenarioResult res = run_scenario(cfg);
    for (const auto& [key, value] : res.extras)
        if (key.rfind("deviation/", 0) == 0) CHECK(std::fabs(value) <= 1e-10);
    CHECK(res.extras.at("max_abs_deviation_exact") <= 1e-10);

    // probit(acc_ood) = (alpha/gamma) * probit(acc_id) for every exact record,
    // so the fitted line is the theoretical one up to nine-digit storage
    const TrendFit& fit = res.fits.at("exact");
    CHECK(std::fabs(fit.slope - 0.7) <= 1e-6);
    CHECK(std::fabs(fit.intercept) <= 1e-6);
    CHECK(fit.r_squared >= 1.0 - 1e-9);
}

TEST_CASE("main trend runs are reproducible and thread-count independent") {
    ScenarioConfig cfg = trimmed_main();
    ScenarioResult a = run_scenario(cfg);
    ScenarioResult b = run_scenario(cfg);
    CHECK(same_records(a.records, b.records));
    CHECK(a.extras == b.extras);

    cfg.threads = 1;
    ScenarioResult one = run_scenario(cfg);
    cfg.threads = 8;
    ScenarioResult eight = run_scenario(cfg);
    CHECK(same_records(one.records, eight.records));
    CHECK(one.extras == eight.extras);
    CHECK(same_records(a.records, one.records));
}

TEST_CASE("more data trains against an auxiliary pool and groups fits by size") {
    ScenarioConfig cfg = default_config(ScenarioKind::MoreData);
    cfg.seed = 47;
    cfg.threads = 2;
    cfg.d = 800;
    cfg.sigma = 0.1;
    cfg.sigma_aux = 0.1 * std::sqrt(2.0);
    cfg.n_train = 80;
    cfg.n_sub = {40};
    cfg.d_proj = {200};
    cfg.d_proj_nonlinear = {};
    cfg.n_test = 2500;
    cfg.aux_sizes = {0, 60};
    cfg.grid.logistic_l2_c = {1e-4, 1.0};
    cfg.grid.logistic_l1_c = {};

    ScenarioResult res = run_scenario(cfg);
    REQUIRE(res.records.size() == 4);
    for (const auto& r : res.records) {
        CHECK(r.status == "ok");
        CHECK(r.family == "logistic_l2");
        REQUIRE(r.hyperparams.count("aux") == 1);
        REQUIRE(r.acc_id.n.has_value());
        CHECK(*r.acc_id.n == cfg.n_test);
    }
    CHECK(res.extras.count("mean_acc_id_aux0") == 1);
    CHECK(res.extras.count("mean_acc_ood_aux0") == 1);
    CHECK(res.extras.count("mean_acc_id_aux60") == 1);
    CHECK(res.extras.count("mean_acc_ood_aux60") == 1);

    // group means are plain averages of the stored values
    double sum_id = 0.0;
    int n0 = 0;
    for (const auto& r : res.records)
        if (r.hyperparams.at("aux") == "0") {
            sum_id += r.acc_id.value;
            ++n0;
        }
    CHECK(n0 == 2);
    CHECK(std::fabs(res.extras.at("mean_acc_id_aux0") - sum_id / n0) <= 1e-15);

    // a logistic grid is required
    ScenarioConfig bad = cfg;
    bad.grid.logistic_l2_c = {};
    bad.grid.logistic_l1_c = {};
    CHECK_THROWS_AS(run_scenario(bad), std::invalid_argument);
}

TEST_CASE("adversarial shift lands the target on the frozen deviation") {
    ScenarioConfig cfg = default_config(ScenarioKind::Adversarial);
    cfg.seed = 53;
    cfg.threads = 2;
    cfg.d = 3200;
    cfg.n_train = 50;
    cfg.n_sub = {50};
    cfg.d_proj = {100};
    cfg.d_proj_nonlinear = {100};
    cfg.n_test = 2000;
    cfg.grid.logistic_l2_c = {1e-2, 1.0};
    cfg.grid.logistic_l1_c = {};
    cfg.grid.ridge_alpha = {0.1};
    cfg.grid.knn_k = {1};
    cfg.grid.forest_trees = {};

    ScenarioResult res = run_scenario(cfg);
    REQUIRE(res.target_model_id.has_value());
    REQUIRE(res.extras.count("target_deviation") == 1);
    CHECK(std::fabs(res.extras.at("target_deviation") - oracle::kAdversarialDev) <= 1e-8);

    // the target record is marked, exists, and is a linear model
    const EvalRecord* target = nullptr;
    for (const auto& r : res.records)
        if (r.model_id == *res.target_model_id) target = &r;
    REQUIRE(target != nullptr);
    CHECK(target->hyperparams.count("target") == 1);
    CHECK(target->hyperparams.at("target") == "1");
    CHECK((target->family == "logistic_l2" || target->family == "ridge"));

    // no model can deviate further than |c| * beta / (gamma * sigma)
    double cap = 0.03 * cfg.beta / (cfg.gamma * cfg.sigma) + 1e-9;
    for (const auto& [key, value] : res.extras)
        if (key.rfind("deviation/", 0) == 0) CHECK(std::fabs(value) <= cap);
    CHECK(res.extras.at("max_abs_deviation_exact") >= 0.03 * cfg.beta / (cfg.gamma * cfg.sigma) - 1e-9);

    // the target is the best exact ID accuracy among linear models
    double best = -1.0;
    for (const auto& r : res.records)
        if (r.family == "logistic_l2" || r.family == "ridge")
            best = std::fmax(best, r.acc_id.value);
    CHECK(target->acc_id.value == best);

    // an explicit target id is honored
    std::string other;
    for (const auto& r : res.records)
        if (r.family == "ridge") other = r.model_id;
    REQUIRE(!other.empty());
    ScenarioConfig forced = cfg;
    forced.adv_target = other;
    ScenarioResult fres = run_scenario(forced);
    REQUIRE(fres.target_model_id.has_value());
    CHECK(*fres.target_model_id == other);
    CHECK(std::fabs(fres.extras.at("target_deviation") - oracle::kAdversarialDev) <= 1e-8);

    forced.adv_target = "no/such=model";
    CHECK_THROWS_AS(run_scenario(forced), std::invalid_argument);

    // zero scale: the shift does nothing in probit units; the slack covers
    // two probit round trips at margins near five
    ScenarioConfig zero = cfg;
    zero.adv_scale = 0.0;
    ScenarioResult zres = run_scenario(zero);
    for (const auto& [key, value] : zres.extras)
        if (key.rfind("deviation/", 0) == 0) CHECK(std::fabs(value) <= 2e-9);
}

TEST_CASE("covariance shift separates big and small variance directions") {
    ScenarioConfig cfg = default_config(ScenarioKind::CovarianceShift);
    cfg.seed = 61;
    cfg.threads = 2;
    cfg.d = 100;
    cfg.cov_small_count = 5;
    cfg.n_train = 300;
    cfg.n_sub = {150};
    cfg.d_proj = {100};
    cfg.n_test = 1000;
    cfg.grid.logistic_l2_c = {1e-2};
    cfg.grid.logistic_l1_c = {0.3};
    cfg.grid.ridge_alpha = {0.1};

    ScenarioResult res = run_scenario(cfg);
    REQUIRE(res.records.size() == 3);
    for (const auto& r : res.records) CHECK(r.status == "ok");

    // the axis probes hit the closed-form ratios exactly
    CHECK(std::fabs(res.extras.at("ratio_small_coord") - oracle::kRatioSmall) <= 1e-9);
    CHECK(std::fabs(res.extras.at("ratio_big_coord") - oracle::kRatioBig) <= 1e-9);

    // per-model ratios stay inside the reported envelope
    double lo = res.extras.at("ratio_min");
    double hi = res.extras.at("ratio_max");
    CHECK(lo <= hi);
    for (const auto& [key, value] : res.extras)
        if (key.rfind("ratio/", 0) == 0) {
            CHECK(value >= lo - 1e-15);
            CHECK(value <= hi + 1e-15);
        }
    CHECK(res.extras.at("ratio_spread") == hi / lo);
    CHECK(res.extras.at("ratio_constant") == (hi / lo <= 1.05 ? 1.0 : 0.0));
    CHECK(res.fits.count("exact") == 1);
    CHECK(!res.theoretical_slope.has_value());

    // additive strength must be positive in this mode
    ScenarioConfig bad = cfg;
    bad.cov_s2 = 0.0;
    CHECK_THROWS_AS(run_scenario(bad), std::invalid_argument);
}

TEST_CASE("covariance scaling control compresses every direction equally") {
    ScenarioConfig cfg = default_config(ScenarioKind::CovarianceShift);
    cfg.seed = 67;
    cfg.threads = 1;
    cfg.d = 100;
    cfg.cov_small_count = 5;
    cfg.n_train = 200;
    cfg.n_sub = {100, 200};
    cfg.d_proj = {100};
    cfg.grid.logistic_l2_c = {1e-2, 1.0};
    cfg.grid.logistic_l1_c = {};
    cfg.grid.ridge_alpha = {0.1};
    cfg.cov_scale_control = true;
    cfg.matched_kappa = 1.25;

    ScenarioResult res = run_scenario(cfg);
    double want = 1.0 / std::sqrt(1.25);
    for (const auto& [key, value] : res.extras)
        if (key.rfind("ratio/", 0) == 0) CHECK(std::fabs(value - want) <= 1e-9);
    CHECK(res.extras.at("ratio_constant") == 1.0);
    CHECK(std::fabs(res.extras.at("ratio_small_coord") - want) <= 1e-9);
    CHECK(std::fabs(res.extras.at("ratio_big_coord") - want) <= 1e-9);

    REQUIRE(res.theoretical_slope.has_value());
    CHECK(*res.theoretical_slope == want);
    const TrendFit& fit = res.fits.at("exact");
    CHECK(std::fabs(fit.slope - want) <= 1e-6);
    CHECK(std::fabs(fit.intercept) <= 1e-6);
    CHECK(fit.r_squared >= 1.0 - 1e-9);
}

TEST_CASE("matched noise splits each model into paired records") {
    ScenarioConfig cfg = default_config(ScenarioKind::MatchedNoise);
    cfg.seed = 71;
    cfg.threads = 2;
    cfg.d = 100;
    cfg.cov_small_count = 5;
    cfg.n_train = 300;
    cfg.n_sub = {100, 300};
    cfg.d_proj = {100};
    cfg.grid.logistic_l2_c = {1e-2, 1.0};
    cfg.grid.logistic_l1_c = {};
    cfg.grid.ridge_alpha = {0.1};

    ScenarioResult res = run_scenario(cfg);
    REQUIRE(res.records.size() == 12); // 6 base models, two shifts each
    std::set<std::string> matched_ids, iso_ids;
    for (const auto& r : res.records) {
        REQUIRE(r.hyperparams.count("shift") == 1);
        const std::string& id = r.model_id;
        if (r.hyperparams.at("shift") == "matched") {
            CHECK(id.substr(id.size() - 8) == "+matched");
            matched_ids.insert(id.substr(0, id.size() - 8));
        } else {
            CHECK(r.hyperparams.at("shift") == "isotropic");
            CHECK(id.substr(id.size() - 10) == "+isotropic");
            iso_ids.insert(id.substr(0, id.size() - 10));
        }
    }
    CHECK(matched_ids == iso_ids);
    CHECK(matched_ids.size() == 6);

    // within a pair the ID accuracy is shared
    for (const std::string& base : matched_ids) {
        const EvalRecord *m = nullptr, *i = nullptr;
        for (const auto& r : res.records) {
            if (r.model_id == base + "+matched") m = &r;
            if (r.model_id == base + "+isotropic") i = &r;
        }
        REQUIRE(m != nullptr);
        REQUIRE(i != nullptr);
        CHECK(m->acc_id.value == i->acc_id.value);
    }

    // matched additive strength equals (kappa-1) * trace / d
    double trace = 5 * 0.005 + 95 * 0.5;
    CHECK(std::fabs(res.extras.at("matched_s2") - 0.25 * trace / 100.0) <= 1e-15);
    REQUIRE(res.theoretical_slope.has_value());
    CHECK(*res.theoretical_slope == 1.0 / std::sqrt(1.25));
    CHECK(res.extras.at("matched_slope") == *res.theoretical_slope);

    // scaling the covariance preserves the probit line exactly; the
    // trace-matched isotropic addition does not
    const TrendFit& matched = res.fits.at("matched");
    CHECK(matched.r_squared >= 1.0 - 1e-9);
    CHECK(std::fabs(matched.slope - 1.0 / std::sqrt(1.25)) <= 1e-6);
    CHECK(std::fabs(matched.intercept) <= 1e-6);
    double r2_iso = res.extras.at("r2_isotropic");
    CHECK(r2_iso == res.fits.at("isotropic").r_squared);
    CHECK(r2_iso < matched.r_squared);
    CHECK(res.extras.at("r2_matched") == matched.r_squared);
}

TEST_CASE("matched noise at kappa one degenerates to the identity") {
    ScenarioConfig cfg = default_config(ScenarioKind::MatchedNoise);
    cfg.seed = 73;
    cfg.threads = 1;
    cfg.d = 60;
    cfg.cov_small_count = 3;
    cfg.n_train = 120;
    cfg.n_sub = {60, 120};
    cfg.d_proj = {60};
    cfg.grid.logistic_l2_c = {1e-2, 1.0};
    cfg.grid.logistic_l1_c = {};
    cfg.grid.ridge_alpha = {};
    cfg.matched_kappa = 1.0;

    ScenarioResult res = run_scenario(cfg);
    CHECK(res.extras.at("matched_s2") == 0.0);
    for (const auto& r : res.records) CHECK(r.acc_ood.value == r.acc_id.value);
    CHECK(std::fabs(res.fits.at("matched").slope - 1.0) <= 1e-12);
    CHECK(std::fabs(res.fits.at("isotropic").slope - 1.0) <= 1e-12);
    CHECK(res.fits.at("matched").r_squared == 1.0);

    cfg.matched_kappa = 0.8;
    CHECK_THROWS_AS(run_scenario(cfg), std::invalid_argument);
}

TEST_CASE("scenario configs are validated before any work starts") {
    ScenarioConfig cfg = trimmed_main();
    cfg.d = 0;
    CHECK_THROWS_AS(run_scenario(cfg), std::invalid_argument);

    cfg = trimmed_main();
    cfg.n_sub = {100}; // beyond n_train = 60
    CHECK_THROWS_AS(run_scenario(cfg), std::invalid_argument);

    cfg = trimmed_main();
    cfg.d_proj = {60, 5000}; // beyond d
    CHECK_THROWS_AS(run_scenario(cfg), std::invalid_argument);

    cfg = trimmed_main();
    cfg.n_sub = {};
    CHECK_THROWS_AS(run_scenario(cfg), std::invalid_argument);

    cfg = trimmed_main();
    cfg.grid.knn_k = {90}; // beyond every n_sub
    CHECK_THROWS_AS(run_scenario(cfg), std::invalid_argument);

    cfg = trimmed_main();
    cfg.grid.logistic_l2_c = {0.0};
    CHECK_THROWS_AS(run_scenario(cfg), std::invalid_argument);

    cfg = trimmed_main();
    cfg.sigma = 0.0;
    CHECK_THROWS_AS(run_scenario(cfg), std::invalid_argument);

    ScenarioConfig adv = default_config(ScenarioKind::Adversarial);
    adv.adv_scale = 1.5;
    CHECK_THROWS_AS(run_scenario(adv), std::invalid_argument);
}
