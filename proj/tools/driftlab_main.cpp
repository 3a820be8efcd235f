#include <charconv>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "driftlab/config.hpp"
#include "driftlab/results_io.hpp"
#include "driftlab/scenarios.hpp"
#include "driftlab/svg.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitRuntime = 3;

int run_simulate(const std::string& config_path, const std::string& out_dir, bool plot) {
    driftlab::ScenarioConfig cfg;
    try {
        cfg = driftlab::load_config(config_path);
    } catch (const driftlab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitInput;
    }
    try {
        std::filesystem::create_directories(out_dir);
        driftlab::ScenarioResult result = driftlab::run_scenario(cfg);
        for (const auto& warning : result.warnings) std::cerr << "warning: " << warning << "\n";

        std::string records_path = out_dir + "/records.csv";
        driftlab::save_records_csv(result.records, records_path);

        std::map<std::string, driftlab::FitSummary> groups;
        for (const auto& [name, fit] : result.fits) {
            driftlab::FitSummary summary;
            summary.fit = fit;
            summary.theoretical_slope = result.theoretical_slope;
            summary.theorem_bound = result.bound;
            summary.scenario = driftlab::to_string(result.kind);
            summary.seed = result.seed;
            groups[name] = summary;
        }
        driftlab::save_fit_json(groups, out_dir + "/fit.json");

        if (plot) {
            std::optional<driftlab::TheoreticalLine> theory;
            if (result.theoretical_slope)
                theory = driftlab::TheoreticalLine{*result.theoretical_slope,
                                                   result.theoretical_intercept.value_or(0.0)};
            driftlab::emit_svg(result.records, result.fits, theory, cfg.transform,
                               out_dir + "/scatter.svg");
        }

        std::cout << "scenario: " << driftlab::to_string(result.kind) << "\n";
        std::cout << "records: " << result.records.size() << "\n";
        for (const auto& [name, fit] : result.fits)
            std::cout << "fit " << name << ": slope=" << fit.slope
                      << " intercept=" << fit.intercept << " r_squared=" << fit.r_squared
                      << " n=" << fit.n_points << "\n";
        if (result.target_model_id) std::cout << "target: " << *result.target_model_id << "\n";
        return kExitOk;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

int run_analyze(const std::string& records_path, const std::string& transform_name,
                const std::string& out_path) {
    auto kind = driftlab::parse_transform(transform_name);
    if (!kind) {
        std::cerr << "error: unknown transform '" << transform_name << "'\n";
        return kExitInput;
    }
    std::vector<driftlab::EvalRecord> records;
    try {
        records = driftlab::load_records_csv(records_path);
    } catch (const driftlab::SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return kExitInput;
    }
    try {
        std::vector<std::string> warnings;
        driftlab::TrendFit fit = driftlab::fit_trend(records, *kind, &warnings);
        for (const auto& warning : warnings) std::cerr << "warning: " << warning << "\n";
        driftlab::FitSummary summary;
        summary.fit = fit;
        summary.scenario = "external";
        driftlab::save_fit_json({{"fit", summary}}, out_path);
        std::cout << "transform: " << driftlab::to_string(fit.transform) << "\n";
        std::cout << "slope=" << fit.slope << " intercept=" << fit.intercept
                  << " r_squared=" << fit.r_squared << " n=" << fit.n_points << "\n";
        return kExitOk;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

int run_interpolate(double acc_id, double acc_ood, long long classes, long long steps,
                    const std::string& out_path) {
    try {
        std::vector<double> ps;
        ps.reserve(static_cast<std::size_t>(steps));
        for (long long i = 0; i < steps; ++i)
            ps.push_back(static_cast<double>(i) / static_cast<double>(steps - 1));
        auto trace = driftlab::interpolate_with_random(acc_id, acc_ood, classes, ps);

        std::vector<driftlab::EvalRecord> records;
        for (std::size_t i = 0; i < trace.size(); ++i) {
            driftlab::EvalRecord rec;
            char buf[40];
            auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), ps[i]);
            if (ec != std::errc{}) throw std::runtime_error("number formatting failed");
            std::string p_str(buf, end);
            rec.family = "interpolation";
            rec.hyperparams["p"] = p_str;
            rec.model_id = "interp/p=" + p_str;
            rec.acc_id = driftlab::canonical_metric(driftlab::exact_metric(trace[i].first));
            rec.acc_ood = driftlab::canonical_metric(driftlab::exact_metric(trace[i].second));
            records.push_back(std::move(rec));
        }
        driftlab::save_records_csv(records, out_path);
        std::cout << "rows: " << records.size() << "\n";
        return kExitOk;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::domain_error& e) {
        // out-of-range accuracy or class count passed on the command line
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Synthetic distribution-shift benchmark: trains model grids on Gaussian "
                 "tasks, scores them in and out of distribution, and fits accuracy trends."};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    bool plot = false;
    CLI::App* simulate = app.add_subcommand("simulate", "Run a scenario from a config file");
    simulate->add_option("--config", config_path, "Scenario config file")->required();
    simulate->add_option("--out", out_dir, "Output directory")->required();
    simulate->add_flag("--plot", plot, "Also write scatter.svg");

    std::string records_path, transform_name, fit_out;
    CLI::App* analyze = app.add_subcommand("analyze", "Fit a trend to an evaluation CSV");
    analyze->add_option("--records", records_path, "Evaluation records CSV")->required();
    analyze->add_option("--transform", transform_name, "Axis scaling")
        ->required()
        ->check(CLI::IsMember({"linear", "probit", "logit"}));
    analyze->add_option("--out", fit_out, "Output JSON path")->required();

    double acc_id = 0.0, acc_ood = 0.0;
    long long classes = 0, steps = 0;
    std::string interp_out;
    CLI::App* interpolate =
        app.add_subcommand("interpolate", "Trace accuracy pairs of a model mixed with a "
                                          "random guesser");
    interpolate->add_option("--acc-id", acc_id, "Model accuracy in distribution")
        ->required()
        ->check(CLI::Range(0.0, 1.0));
    interpolate->add_option("--acc-ood", acc_ood, "Model accuracy out of distribution")
        ->required()
        ->check(CLI::Range(0.0, 1.0));
    interpolate->add_option("--classes", classes, "Number of classes")
        ->required()
        ->check(CLI::Range(2LL, 1000000000LL));
    interpolate->add_option("--steps", steps, "Number of interpolation points")
        ->required()
        ->check(CLI::Range(2LL, 1000000LL));
    interpolate->add_option("--out", interp_out, "Output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    if (simulate->parsed()) return run_simulate(config_path, out_dir, plot);
    if (analyze->parsed()) return run_analyze(records_path, transform_name, fit_out);
    return run_interpolate(acc_id, acc_ood, classes, steps, interp_out);
}
