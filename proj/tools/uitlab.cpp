#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "uitlab/errors.hpp"
#include "uitlab/harness.hpp"

namespace {

enum Exit : int { kOk = 0, kVerdictFailed = 1, kConfigError = 2, kIoError = 3, kInternal = 4 };

void print_verdicts(const uitlab::ReportBundle& b) {
    for (const auto& v : b.verdicts) {
        std::cout << "  [" << uitlab::to_string(v.status) << "] " << v.name << " = " << uitlab::format_number(v.value);
        if (!v.reason.empty()) {
            std::cout << " (" << v.reason << ")";
        }
        std::cout << '\n';
    }
    for (const auto& f : b.failures) {
        std::cout << "  [failure] " << f << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Uniform-in-time error experiments"};
    app.set_version_flag("--version", uitlab::version_string());

    std::string experiment;
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    std::size_t threads = 0;

    app.add_option("experiment", experiment,
                   "averaging | discretization | meanfield | counterexample | metrics-selftest")
        ->required();
    app.add_option("--config", config_path, "JSON experiment config");
    app.add_option("--out", out_dir, "Report directory (overrides output_dir in the config)");
    auto* seed_opt = app.add_option("--seed", seed, "Master seed (overrides the config)");
    app.add_option("--threads", threads, "Worker threads; 0 uses UITLAB_THREADS or all cores");

    CLI11_PARSE(app, argc, argv);

    try {
        uitlab::ExperimentConfig cfg;
        const auto kind = uitlab::parse_experiment_kind(experiment);
        if (!config_path.empty()) {
            cfg = uitlab::parse_config(config_path);
            if (cfg.experiment != kind) {
                std::cerr << "config describes '" << uitlab::to_string(cfg.experiment) << "', not '" << experiment
                          << "'\n";
                return kConfigError;
            }
        } else if (kind == uitlab::ExperimentKind::MetricsSelftest) {
            cfg = uitlab::parse_config_json({{"experiment", "metrics-selftest"}});
        } else {
            std::cerr << "--config is required for " << experiment << '\n';
            return kConfigError;
        }
        if (*seed_opt) {
            cfg.seed = seed;
            cfg.source["seed"] = seed;
        }
        cfg.threads = threads;
        if (!out_dir.empty()) {
            cfg.output_dir = out_dir;
        }

        const uitlab::ReportBundle bundle = uitlab::run_experiment(cfg);
        std::cout << uitlab::to_string(cfg.experiment) << ": " << (bundle.ok() ? "PASS" : "FAIL") << " in "
                  << bundle.wall_seconds << " s\n";
        print_verdicts(bundle);
        if (!cfg.output_dir.empty()) {
            const auto paths = uitlab::emit_reports(bundle, cfg.output_dir);
            std::cout << "reports: " << paths.curves.parent_path().string() << '\n';
        } else if (kind != uitlab::ExperimentKind::MetricsSelftest) {
            std::cerr << "no output directory given; reports not written\n";
        }
        return bundle.ok() ? kOk : kVerdictFailed;
    } catch (const uitlab::ConfigError& e) {
        std::cerr << "config error:\n";
        for (const auto& v : e.violations()) {
            std::cerr << "  - " << v << '\n';
        }
        return kConfigError;
    } catch (const uitlab::InvalidArgument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConfigError;
    } catch (const uitlab::IoError& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return kIoError;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kInternal;
    }
}
