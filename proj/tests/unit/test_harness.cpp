#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "uitlab/errors.hpp"
#include "uitlab/harness.hpp"

using namespace uitlab;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> violations_of(const std::string& text) {
    try {
        parse_config_text(text);
    } catch (const ConfigError& e) {
        return e.violations();
    }
    return {};
}

bool any_contains(const std::vector<std::string>& v, const std::string& needle) {
    for (const auto& s : v) {
        if (s.find(needle) != std::string::npos) return true;
    }
    return false;
}

const Verdict* find_verdict(const ReportBundle& b, const std::string& name) {
    for (const auto& v : b.verdicts) {
        if (v.name == name) return &v;
    }
    return nullptr;
}

}  // namespace

TEST_CASE("config acceptance") {
    const ExperimentConfig c = parse_config_text(R"({"experiment": "averaging", "sweep": [0.02, 0.01],
        "horizon": 20, "n_reps": 100, "seed": 7, "params": {"r": 1}})");
    CHECK(c.experiment == ExperimentKind::Averaging);
    CHECK(c.sweep.size() == 2);
    CHECK(c.number("r", 0.0) == 1.0);
    CHECK(c.text("mode", "strong") == "strong");
}

TEST_CASE("config rejections are aggregated and named") {
    auto v = violations_of(R"({"experiment": "discretization", "sweep": [0.3], "horizon": 10, "n_reps": 100,
        "seed": 1, "params": {"scheme": "ula"}})");
    CHECK(any_contains(v, "delta^-1 in N"));

    v = violations_of(R"({"experiment": "meanfield", "sweep": [16], "horizon": 10, "n_reps": 100, "seed": 1,
        "params": {"a": 1, "kappa": 1.5}})");
    CHECK(any_contains(v, "kappa"));

    v = violations_of(R"({"experiment": "averaging", "sweep": [0.01], "horizon": 10, "n_reps": 10, "seed": 1,
        "colour": "red", "params": {"r": 1, "speed": 3}})");
    CHECK(any_contains(v, "colour"));
    CHECK(any_contains(v, "speed"));
    CHECK(any_contains(v, "n_reps"));
    CHECK(v.size() >= 3);

    CHECK_THROWS_AS(parse_config_text("[1, 2]"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("{not json"), ConfigError);
    CHECK_THROWS_AS(parse_config(fs::path("/nonexistent/config.json")), IoError);
}

TEST_CASE("counterexample config is exempt from the replica floor") {
    CHECK_NOTHROW(parse_config_text(R"({"experiment": "counterexample", "sweep": [0.2, 0.1], "horizon": 13,
        "n_reps": 1, "seed": 1, "params": {"h": 0.01}})"));
}

TEST_CASE("counterexample run reports non-uniformity") {
    const ExperimentConfig c = parse_config_text(R"({"experiment": "counterexample", "sweep": [0.2, 0.1, 0.05],
        "horizon": 23, "n_reps": 1, "seed": 1, "params": {"h": 0.01}})");
    const ReportBundle b = run_experiment(c);
    CHECK(b.summary["non_uniform"].get<bool>());
    CHECK(b.summary["max_error"].get<double>() > 0.6);
    const Verdict* v = find_verdict(b, "non_uniform");
    REQUIRE(v != nullptr);
    CHECK(v->status == Verdict::Status::Pass);
}

TEST_CASE("averaging without coupling skips the slope as degenerate") {
    const ExperimentConfig c = parse_config_text(R"({"experiment": "averaging", "sweep": [0.1, 0.05],
        "horizon": 2, "n_reps": 100, "seed": 3, "params": {"r": 0, "floor_reps": 0, "n_out": 21}})");
    const ReportBundle b = run_experiment(c);
    const Verdict* v = find_verdict(b, "sup_slope");
    REQUIRE(v != nullptr);
    CHECK(v->status == Verdict::Status::Skipped);
    CHECK(v->reason == "degenerate");
}

TEST_CASE("number formatting") {
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(1.0) == "1");
    CHECK(format_number(std::numeric_limits<double>::infinity()) == "inf");
    CHECK(format_number(-std::numeric_limits<double>::infinity()) == "-inf");
    CHECK(format_number(std::nan("")) == "nan");
}

TEST_CASE("curves csv layout") {
    std::ostringstream empty;
    write_curves_csv(empty, {});
    CHECK(empty.str() == "experiment,sweep_value,t,value,std_error\n");

    std::vector<ErrorCurve> curves(4);
    for (std::size_t i = 0; i < curves.size(); ++i) {
        curves[i].meta.label = "x";
        curves[i].meta.sweep_value = 0.5 * (i + 1);
        for (int k = 0; k < 100; ++k) {
            curves[i].times.push_back(k);
            curves[i].values.push_back(0.25);
            curves[i].std_errors.push_back(0.0);
        }
    }
    std::ostringstream os;
    write_curves_csv(os, curves);
    const std::string s = os.str();
    CHECK(std::count(s.begin(), s.end(), '\n') == 401);
    CHECK(s.find('\r') == std::string::npos);
}

TEST_CASE("report emission") {
    const ExperimentConfig c = parse_config_text(R"({"experiment": "counterexample", "sweep": [0.2],
        "horizon": 8, "n_reps": 1, "seed": 1, "params": {"h": 0.01, "stride": 10}})");
    const ReportBundle b = run_experiment(c);
    const fs::path dir = fs::temp_directory_path() / "uitlab_harness_test";
    fs::remove_all(dir);
    const ReportPaths p = emit_reports(b, dir);
    CHECK(fs::exists(p.curves));
    CHECK(fs::exists(p.summary));
    std::ifstream in(p.manifest);
    const auto manifest = nlohmann::json::parse(in);
    CHECK(manifest["seed"] == 1);
    CHECK(manifest["csv_rows"] == 81);

    const fs::path blocker = dir / "blocker";
    std::ofstream(blocker) << "x";
    CHECK_THROWS_AS(emit_reports(b, blocker / "sub"), IoError);
    fs::remove_all(dir);
}

TEST_CASE("config hash is stable") {
    const std::string text = R"({"experiment": "metrics-selftest", "seed": 5})";
    CHECK(config_hash(parse_config_text(text)) == config_hash(parse_config_text(text)));
    CHECK(config_hash(parse_config_text(text)) !=
          config_hash(parse_config_text(R"({"experiment": "metrics-selftest", "seed": 6})")));
}

TEST_CASE("shipped configs parse") {
    std::size_t n = 0;
    for (const auto& entry : fs::directory_iterator(fs::path(UITLAB_SOURCE_DIR) / "configs")) {
        if (entry.path().extension() != ".json") continue;
        INFO(entry.path().string());
        CHECK_NOTHROW(parse_config(entry.path()));
        ++n;
    }
    CHECK(n >= 8);
}
