#include "uitlab/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "uitlab/averaging.hpp"
#include "uitlab/counterexample.hpp"
#include "uitlab/discretization.hpp"
#include "uitlab/errors.hpp"
#include "uitlab/meanfield.hpp"
#include "uitlab/parallel.hpp"
#include "uitlab/stochastic_core.hpp"

#ifndef UITLAB_GIT_HASH
#define UITLAB_GIT_HASH "unknown"
#endif
#ifndef UITLAB_VERSION
#define UITLAB_VERSION "0.0.0"
#endif

namespace uitlab {

using nlohmann::json;

namespace {

enum class PType { Number, Integer, Text };

using Schema = std::map<std::string, PType, std::less<>>;

const Schema& schema_for(ExperimentKind k) {
    static const Schema averaging{
        {"mode", PType::Text},        {"r", PType::Number},           {"h_base", PType::Number},
        {"x0", PType::Number},        {"y0", PType::Number},          {"floor_reps", PType::Integer},
        {"test_function", PType::Text}, {"n_out", PType::Integer},    {"slope_min", PType::Number},
        {"slope_max", PType::Number}, {"plateau_max", PType::Number}, {"plateau_at", PType::Number},
        {"x0_prime", PType::Number},  {"contraction_h", PType::Number}, {"lambda_fraction", PType::Number},
    };
    static const Schema discretization{
        {"scheme", PType::Text},       {"potential", PType::Text},     {"a", PType::Number},
        {"b", PType::Number},          {"gamma", PType::Number},       {"flow_time", PType::Number},
        {"x0", PType::Number},         {"v0", PType::Number},          {"reference_factor", PType::Integer},
        {"reference", PType::Text},    {"floor_reps", PType::Integer}, {"n_out", PType::Integer},
        {"slope_min", PType::Number},  {"slope_max", PType::Number},   {"plateau_max", PType::Number},
        {"plateau_at", PType::Number}, {"max_steps", PType::Integer},
    };
    static const Schema meanfield{
        {"a", PType::Number},          {"kappa", PType::Number},       {"provider", PType::Text},
        {"proxy_size", PType::Integer}, {"h", PType::Number},          {"m0", PType::Number},
        {"v0", PType::Number},         {"n_out", PType::Integer},      {"slope_min", PType::Number},
        {"slope_max", PType::Number},  {"plateau_max", PType::Number}, {"plateau_at", PType::Number},
    };
    static const Schema counterexample{{"h", PType::Number}, {"x0", PType::Number}, {"stride", PType::Integer}};
    static const Schema none{};
    switch (k) {
        case ExperimentKind::Averaging: return averaging;
        case ExperimentKind::Discretization: return discretization;
        case ExperimentKind::Meanfield: return meanfield;
        case ExperimentKind::Counterexample: return counterexample;
        case ExperimentKind::MetricsSelftest: return none;
    }
    return none;
}

const char* type_name(PType t) {
    switch (t) {
        case PType::Number: return "a number";
        case PType::Integer: return "a non-negative integer";
        case PType::Text: return "a string";
    }
    return "?";
}

bool type_matches(const json& v, PType t) {
    switch (t) {
        case PType::Number: return v.is_number();
        case PType::Integer: return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
        case PType::Text: return v.is_string();
    }
    return false;
}

json num(double x) {
    if (std::isfinite(x)) {
        return x;
    }
    return format_number(x);
}

json fit_json(const RateFit& f) {
    return {{"exponent", num(f.exponent)},
            {"intercept", num(f.intercept)},
            {"r_squared", num(f.r_squared)},
            {"n_points", f.n_points}};
}

Verdict range_verdict(std::string name, double value, double lo, double hi) {
    Verdict v{std::move(name), Verdict::Status::Fail, value, lo, hi, ""};
    if (value >= lo && value <= hi) {
        v.status = Verdict::Status::Pass;
    } else {
        v.reason = "outside_range";
    }
    return v;
}

Verdict skipped(std::string name, std::string reason) {
    Verdict v;
    v.name = std::move(name);
    v.status = Verdict::Status::Skipped;
    v.value = std::numeric_limits<double>::quiet_NaN();
    v.lo = v.value;
    v.hi = v.value;
    v.reason = std::move(reason);
    return v;
}

std::string sweep_tag(double x) { return format_number(x); }

struct Plateau {
    double stat;
    double se;
};

Plateau plateau_with_se(const ErrorCurve& c, Window early, Window late) {
    const double stat = plateau_stat(c, early, late);
    const double e = window_max(c, early);
    const double l = window_max(c, late);
    const double se_e = window_argmax_se(c, early);
    const double se_l = window_argmax_se(c, late);
    double se = 0.0;
    if (e > 0.0 && l > 0.0) {
        se = stat * std::hypot(se_e / e, se_l / l);
    }
    return {stat, se};
}

/// The sweep item used for the plateau check: `plateau_at` if given, else the
/// middle entry in the order listed.
std::size_t plateau_item(const ExperimentConfig& cfg) {
    if (cfg.params.contains("plateau_at")) {
        const double want = cfg.number("plateau_at", 0.0);
        for (std::size_t i = 0; i < cfg.sweep.size(); ++i) {
            if (std::abs(cfg.sweep[i] - want) <= 1e-12 * std::max(1.0, std::abs(want))) {
                return i;
            }
        }
        throw ConfigError({"params.plateau_at = " + format_number(want) + " is not a sweep value"});
    }
    return (cfg.sweep.size() - 1) / 2;
}

void add_plateau_verdict(ReportBundle& b, const ErrorCurve& c, double limit) {
    const double horizon = c.times.back();
    const std::string name = "plateau@" + sweep_tag(c.meta.sweep_value);
    if (horizon < 10.0) {
        b.verdicts.push_back(skipped(name, "horizon_too_short"));
        return;
    }
    const Window early{2.0, 5.0};
    const Window late{0.5 * horizon, horizon};
    const Plateau p = plateau_with_se(c, early, late);
    b.summary["plateau"] = {{"sweep_value", num(c.meta.sweep_value)},
                            {"early", {early.lo, early.hi}},
                            {"late", {late.lo, late.hi}},
                            {"stat", num(p.stat)},
                            {"std_error", num(p.se)}};
    Verdict v{name, Verdict::Status::Fail, p.stat, 0.0, limit, ""};
    // Pass when the ratio is within three standard errors of the limit.
    if (p.stat - 3.0 * p.se <= limit) {
        v.status = Verdict::Status::Pass;
    } else {
        v.reason = "late_window_exceeds_early";
    }
    b.verdicts.push_back(v);
}

json item_json(const ErrorCurve& c) {
    const Window all{c.times.front(), c.times.back()};
    json flags = json::array();
    for (const auto& f : c.flags) {
        flags.push_back(f);
    }
    return {{"label", c.meta.label},
            {"sweep_value", num(c.meta.sweep_value)},
            {"sup", num(window_max(c, all))},
            {"sup_std_error", num(window_argmax_se(c, all))},
            {"terminal", num(c.values.back())},
            {"terminal_std_error", num(c.std_errors.back())},
            {"flags", flags}};
}

void note_flags(ReportBundle& b, const ErrorCurve& c) {
    for (const auto& f : c.flags) {
        b.failures.push_back(f + "@" + sweep_tag(c.meta.sweep_value));
    }
}

/// Power-law fit of `metric(curve)` against the sweep. Degenerate inputs
/// (zero errors) skip the fit.
void add_slope_verdict(ReportBundle& b, const std::string& name, const std::vector<const ErrorCurve*>& curves,
                       double (*metric)(const ErrorCurve&), double lo, double hi, bool degenerate) {
    if (degenerate) {
        b.verdicts.push_back(skipped(name, "degenerate"));
        return;
    }
    if (curves.size() < 2) {
        b.verdicts.push_back(skipped(name, "single_sweep_value"));
        return;
    }
    std::vector<std::pair<double, double>> pts;
    for (const ErrorCurve* c : curves) {
        const double m = metric(*c);
        if (!(m > 0.0)) {
            b.verdicts.push_back(skipped(name, "degenerate"));
            return;
        }
        pts.emplace_back(c->meta.sweep_value, m);
    }
    const RateFit fit = fit_power_law(pts);
    b.summary["fits"][name] = fit_json(fit);
    b.verdicts.push_back(range_verdict(name, fit.exponent, lo, hi));
}

double sup_metric(const ErrorCurve& c) { return *std::max_element(c.values.begin(), c.values.end()); }
double sup_rms_metric(const ErrorCurve& c) { return std::sqrt(sup_metric(c)); }
double terminal_rms_metric(const ErrorCurve& c) { return std::sqrt(c.values.back()); }

std::vector<const ErrorCurve*> pointers(const std::vector<ErrorCurve>& v, std::size_t begin, std::size_t end) {
    std::vector<const ErrorCurve*> out;
    for (std::size_t i = begin; i < end; ++i) {
        out.push_back(&v[i]);
    }
    return out;
}

//---------------------------------------------------------------------------//

void run_averaging(const ExperimentConfig& cfg, ReportBundle& b) {
    const std::string mode = cfg.text("mode", "strong");
    const double r = cfg.number("r", 1.0);
    AveragingOptions opts;
    opts.x0 = cfg.number("x0", 0.0);
    opts.y0 = cfg.number("y0", 0.0);
    opts.h_base = cfg.number("h_base", kDefaultStepBase);
    opts.n_out = cfg.integer("n_out", 101);
    opts.threads = cfg.threads;
    opts.floor_reps = cfg.integer("floor_reps", 200);
    b.summary["mode"] = mode;

    if (mode == "contraction") {
        ContractionOptions copts;
        copts.h = cfg.number("contraction_h", kDefaultStepBase);
        copts.n_out = opts.n_out;
        copts.threads = cfg.threads;
        const double x0 = cfg.number("x0", 1.0);
        const double x0p = cfg.number("x0_prime", -1.0);
        const double fraction = cfg.number("lambda_fraction", 0.9);
        json rows = json::array();
        for (double rr : cfg.sweep) {
            ContractionEstimate est = estimate_contraction(AveragedModel{rr}, x0, x0p, cfg.horizon, cfg.n_reps,
                                                           cfg.seed, copts);
            const double bound = AveragedModel{rr}.contraction_rate_bound();
            rows.push_back({{"r", num(rr)}, {"lambda", num(est.lambda)}, {"rate_bound", num(bound)},
                            {"fit", fit_json(est.fit)}});
            const std::string name = "lambda@" + sweep_tag(rr);
            if (rr == 0.0) {
                b.verdicts.push_back(range_verdict(name, est.lambda, 0.95, 1.05));
            } else {
                const double lo = fraction * bound;
                b.verdicts.push_back(range_verdict(name, est.lambda, lo, std::numeric_limits<double>::infinity()));
            }
            b.curves.push_back(std::move(est.curve));
        }
        b.summary["contraction"] = rows;
        return;
    }

    if (mode == "moments") {
        json rows = json::array();
        for (double delta : cfg.sweep) {
            MomentTraces mt = moment_trace(SlowFastModel{r, delta}, cfg.horizon, cfg.n_reps, cfg.seed, opts);
            double worst = -std::numeric_limits<double>::infinity();
            const ErrorCurve& c = mt.x_second_moment;
            for (std::size_t k = 0; k < c.size(); ++k) {
                const double bound = slow_moment_bound(c.times[k], opts.x0 * opts.x0, r);
                worst = std::max(worst, c.values[k] - 3.0 * c.std_errors[k] - bound);
            }
            const Window all{c.times.front(), c.times.back()};
            rows.push_back({{"delta", num(delta)},
                            {"sup_x_second_moment", num(window_max(c, all))},
                            {"sup_y_second_moment", num(window_max(mt.y_second_moment, all))}});
            b.verdicts.push_back(
                range_verdict("moment_bound@" + sweep_tag(delta), worst, -std::numeric_limits<double>::infinity(), 0.0));
            b.curves.push_back(std::move(mt.x_second_moment));
            b.curves.push_back(std::move(mt.y_second_moment));
        }
        b.summary["moments"] = rows;
        return;
    }

    const bool weak = mode == "weak";
    const TestFunction f = parse_test_function(cfg.text("test_function", "tanh"));
    for (double delta : cfg.sweep) {
        const SlowFastModel m{r, delta};
        b.curves.push_back(weak ? simulate_weak_error(m, f, cfg.horizon, cfg.n_reps, cfg.seed, opts)
                                : simulate_strong_error(m, cfg.horizon, cfg.n_reps, cfg.seed, opts));
        note_flags(b, b.curves.back());
    }
    json items = json::array();
    for (const auto& c : b.curves) {
        items.push_back(item_json(c));
    }
    b.summary["items"] = items;
    add_slope_verdict(b, "sup_slope", pointers(b.curves, 0, b.curves.size()), sup_metric, cfg.number("slope_min", 0.7),
                      cfg.number("slope_max", 1.3), r == 0.0);
    if (r != 0.0) {
        add_plateau_verdict(b, b.curves[plateau_item(cfg)], cfg.number("plateau_max", 2.0));
    }
}

void run_discretization(const ExperimentConfig& cfg, ReportBundle& b) {
    const Scheme scheme = parse_scheme(cfg.text("scheme", "ula"));
    PotentialSpec pot;
    pot.kind = parse_potential_kind(cfg.text("potential", "quadratic"));
    pot.a = cfg.number("a", 1.0);
    pot.b = cfg.number("b", pot.kind == PotentialKind::Quadratic ? 0.0 : 0.3);
    pot.validate();

    DiscretizationOptions opts;
    opts.x0 = cfg.number("x0", 0.0);
    opts.v0 = cfg.number("v0", 0.0);
    opts.n_out = cfg.integer("n_out", 101);
    opts.threads = cfg.threads;
    opts.floor_reps = cfg.integer("floor_reps", 100);
    opts.reference_factor = cfg.integer("reference_factor", 0);
    opts.kinetic_reference =
        cfg.text("reference", "fine_ubu") == "fine_euler" ? KineticReference::FineEuler : KineticReference::FineUbu;
    opts.max_steps = cfg.integer("max_steps", 10'000'000);
    const double gamma = cfg.number("gamma", 1.0);
    const double flow_time = cfg.number("flow_time", 1.0);

    double lo = 0.8;
    double hi = 1.2;
    if (scheme == Scheme::UBU) {
        lo = 1.6;
        hi = 2.4;
    } else if (scheme == Scheme::HMC) {
        hi = 1.4;
    }
    lo = cfg.number("slope_min", lo);
    hi = cfg.number("slope_max", hi);

    b.summary["scheme"] = std::string(to_string(scheme));
    b.summary["potential"] = {{"kind", std::string(to_string(pot.kind))}, {"a", pot.a}, {"b", pot.b}};
    for (double step : cfg.sweep) {
        switch (scheme) {
            case Scheme::ULA:
                b.curves.push_back(ula_strong_error(pot, step, cfg.horizon, cfg.n_reps, cfg.seed, opts));
                break;
            case Scheme::UBU:
                b.curves.push_back(ubu_strong_error(pot, gamma, step, cfg.horizon, cfg.n_reps, cfg.seed, opts));
                break;
            case Scheme::HMC: {
                const int n_leap = leapfrog_steps(flow_time, step);
                b.curves.push_back(hmc_bias_curve(pot, step, n_leap,
                                                  static_cast<std::size_t>(std::llround(cfg.horizon)), cfg.n_reps,
                                                  cfg.seed, opts));
                break;
            }
        }
        note_flags(b, b.curves.back());
    }
    json items = json::array();
    for (const auto& c : b.curves) {
        items.push_back(item_json(c));
    }
    b.summary["items"] = items;
    if (!b.failures.empty()) {
        b.verdicts.push_back(skipped("sup_rms_slope", "reference_floor"));
        b.verdicts.push_back(skipped("terminal_rms_slope", "reference_floor"));
        return;
    }
    const auto all = pointers(b.curves, 0, b.curves.size());
    add_slope_verdict(b, "sup_rms_slope", all, sup_rms_metric, lo, hi, false);
    add_slope_verdict(b, "terminal_rms_slope", all, terminal_rms_metric, lo, hi, false);
    add_plateau_verdict(b, b.curves[plateau_item(cfg)], cfg.number("plateau_max", 2.0));
}

void run_meanfield(const ExperimentConfig& cfg, ReportBundle& b) {
    const double a = cfg.number("a", 1.0);
    const double kappa = cfg.number("kappa", 0.5);
    PocOptions opts;
    opts.h = cfg.number("h", 1e-3);
    opts.m0 = cfg.number("m0", 1.0);
    opts.v0 = cfg.number("v0", 0.5);
    opts.n_out = cfg.integer("n_out", 101);
    opts.threads = cfg.threads;
    opts.provider = cfg.text("provider", "closure") == "proxy" ? LimitProvider::Proxy : LimitProvider::GaussianClosure;
    opts.proxy_size = cfg.integer("proxy_size", 0);

    std::size_t largest = 0;
    for (std::size_t i = 1; i < cfg.sweep.size(); ++i) {
        if (cfg.sweep[i] > cfg.sweep[largest]) {
            largest = i;
        }
    }
    std::vector<ErrorCurve> moments;
    for (std::size_t i = 0; i < cfg.sweep.size(); ++i) {
        const auto n = static_cast<std::size_t>(std::llround(cfg.sweep[i]));
        PocTraces tr = simulate_poc(ParticleModel::quadratic(a, kappa, n), cfg.horizon, cfg.n_reps, cfg.seed, opts);
        b.curves.push_back(std::move(tr.error));
        if (i == largest) {
            moments.push_back(std::move(tr.ensemble_mean));
            moments.push_back(std::move(tr.ensemble_variance));
        }
    }
    const std::size_t n_poc = b.curves.size();
    json items = json::array();
    for (std::size_t i = 0; i < n_poc; ++i) {
        items.push_back(item_json(b.curves[i]));
    }
    b.summary["items"] = items;
    add_slope_verdict(b, "sup_slope_vs_n", pointers(b.curves, 0, n_poc), sup_metric, cfg.number("slope_min", -1.3),
                      cfg.number("slope_max", -0.7), kappa == 0.0);
    add_plateau_verdict(b, b.curves[plateau_item(cfg)], cfg.number("plateau_max", 2.0));

    if (opts.provider == LimitProvider::GaussianClosure) {
        const GaussianClosure g{kappa, a, opts.m0, opts.v0};
        json checks = json::array();
        double worst = 0.0;
        for (double t : {1.0, 2.0, 5.0, 10.0, 20.0}) {
            if (t > cfg.horizon) {
                continue;
            }
            const ErrorCurve& mc = moments[0];
            const auto it = std::min_element(mc.times.begin(), mc.times.end(),
                                              [t](double x, double y) { return std::abs(x - t) < std::abs(y - t); });
            const auto k = static_cast<std::size_t>(it - mc.times.begin());
            const LawMoments law = gaussian_closure_law(g, mc.times[k]);
            const double z_mean = std::abs(moments[0].values[k] - law.mean) / moments[0].std_errors[k];
            const double z_var = std::abs(moments[1].values[k] - law.variance) / moments[1].std_errors[k];
            worst = std::max({worst, z_mean, z_var});
            checks.push_back({{"t", num(mc.times[k])},
                              {"ensemble_mean", num(moments[0].values[k])},
                              {"closure_mean", num(law.mean)},
                              {"ensemble_variance", num(moments[1].values[k])},
                              {"closure_variance", num(law.variance)}});
        }
        b.summary["closure_checks"] = checks;
        b.verdicts.push_back(range_verdict("closure_match_z@" + sweep_tag(cfg.sweep[largest]), worst, 0.0, 3.0));
    }
    for (auto& c : moments) {
        b.curves.push_back(std::move(c));
    }
}

double value_near(const ErrorCurve& c, double t, bool& found) {
    for (std::size_t k = 0; k < c.size(); ++k) {
        if (std::abs(c.times[k] - t) <= 1e-9 * std::max(1.0, t)) {
            found = true;
            return c.values[k];
        }
    }
    found = false;
    return std::numeric_limits<double>::quiet_NaN();
}

void run_counterexample(const ExperimentConfig& cfg, ReportBundle& b) {
    const double h = cfg.number("h", 0.01);
    CounterexampleOptions opts;
    opts.x0 = cfg.number("x0", 0.0);
    opts.stride = cfg.integer("stride", 1);
    json rows = json::array();
    double min_peak = std::numeric_limits<double>::infinity();
    double max_peak = 0.0;
    for (double delta : cfg.sweep) {
        const AppendixModel m{delta, h};
        ErrorCurve c = simulate_counterexample(m, cfg.horizon, cfg.seed, opts);
        const std::string tag = sweep_tag(delta);
        const double peak = *std::max_element(c.values.begin(), c.values.end());
        double dev = 0.0;
        for (std::size_t k = 0; k < c.size(); ++k) {
            dev = std::max(dev, std::abs(c.values[k] - analytic_error(c.times[k], delta)));
        }
        min_peak = std::min(min_peak, peak);
        max_peak = std::max(max_peak, peak);
        b.verdicts.push_back(range_verdict("max_error@" + tag, peak, 0.95, 1.05));
        b.verdicts.push_back(range_verdict("analytic_deviation@" + tag, dev, 0.0, 10.0 * h));
        bool found = false;
        const double at_end = value_near(c, m.window_end(), found);
        b.verdicts.push_back(found ? range_verdict("value_at_window_end@" + tag, at_end, 0.98, 1.02)
                                   : skipped("value_at_window_end@" + tag, "not_an_output_point"));
        const double after = value_near(c, m.window_end() + 1.0, found);
        const double e1 = std::exp(-1.0);
        b.verdicts.push_back(found ? range_verdict("value_after_window@" + tag, after, e1 - 0.02, e1 + 0.02)
                                   : skipped("value_after_window@" + tag, "not_an_output_point"));
        rows.push_back({{"delta", num(delta)}, {"max_error", num(peak)}, {"analytic_deviation", num(dev)},
                        {"value_at_window_end", num(at_end)}, {"value_after_window", num(after)}});
        b.curves.push_back(std::move(c));
    }
    // The error does not shrink as delta shrinks.
    const bool non_uniform = min_peak >= 0.5 * max_peak && min_peak >= 0.1;
    b.summary["items"] = rows;
    b.summary["non_uniform"] = non_uniform;
    b.summary["max_error"] = num(max_peak);
    Verdict v{"non_uniform", non_uniform ? Verdict::Status::Pass : Verdict::Status::Fail, min_peak, 0.5 * max_peak,
              std::numeric_limits<double>::infinity(), non_uniform ? "" : "error_shrinks_with_delta"};
    b.verdicts.push_back(v);
}

void run_selftest(const ExperimentConfig& cfg, ReportBundle& b) {
    json rows = json::array();
    for (const auto& chk : metrics_selftest(cfg.seed)) {
        Verdict v;
        v.name = chk.name;
        v.status = chk.pass ? Verdict::Status::Pass : Verdict::Status::Fail;
        v.value = chk.pass ? 1.0 : 0.0;
        v.lo = 1.0;
        v.hi = 1.0;
        v.reason = chk.pass ? "" : chk.detail;
        rows.push_back({{"name", chk.name}, {"pass", chk.pass}, {"detail", chk.detail}});
        b.verdicts.push_back(std::move(v));
    }
    b.summary["checks"] = rows;
}

std::uint64_t fnv1a(std::string_view s) { return experiment_tag(s); }

std::string hex64(std::uint64_t x) {
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << x;
    return os.str();
}

}  // namespace

//---------------------------------------------------------------------------//

ExperimentKind parse_experiment_kind(std::string_view name) {
    if (name == "averaging") return ExperimentKind::Averaging;
    if (name == "discretization") return ExperimentKind::Discretization;
    if (name == "meanfield") return ExperimentKind::Meanfield;
    if (name == "counterexample") return ExperimentKind::Counterexample;
    if (name == "metrics-selftest") return ExperimentKind::MetricsSelftest;
    throw InvalidArgument("unknown experiment '" + std::string(name) + "'");
}

std::string_view to_string(ExperimentKind k) noexcept {
    switch (k) {
        case ExperimentKind::Averaging: return "averaging";
        case ExperimentKind::Discretization: return "discretization";
        case ExperimentKind::Meanfield: return "meanfield";
        case ExperimentKind::Counterexample: return "counterexample";
        case ExperimentKind::MetricsSelftest: return "metrics-selftest";
    }
    return "unknown";
}

std::string_view to_string(Verdict::Status s) noexcept {
    switch (s) {
        case Verdict::Status::Pass: return "pass";
        case Verdict::Status::Fail: return "fail";
        case Verdict::Status::Skipped: return "skipped";
    }
    return "fail";
}

double ExperimentConfig::number(const std::string& key, double fallback) const {
    const auto it = params.find(key);
    return it == params.end() ? fallback : it->get<double>();
}

std::size_t ExperimentConfig::integer(const std::string& key, std::size_t fallback) const {
    const auto it = params.find(key);
    return it == params.end() ? fallback : it->get<std::size_t>();
}

std::string ExperimentConfig::text(const std::string& key, const std::string& fallback) const {
    const auto it = params.find(key);
    return it == params.end() ? fallback : it->get<std::string>();
}

ExperimentConfig parse_config_json(const json& doc) {
    std::vector<std::string> bad;
    if (!doc.is_object()) {
        throw ConfigError({"config must be a JSON object"});
    }
    static const std::vector<std::string> known{"experiment", "sweep",      "horizon", "n_reps",
                                                "seed",       "output_dir", "params"};
    for (const auto& [key, value] : doc.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            bad.push_back("unknown key '" + key + "'");
        }
    }

    ExperimentConfig cfg;
    cfg.source = doc;
    if (!doc.contains("experiment") || !doc["experiment"].is_string()) {
        bad.push_back("'experiment' must be one of averaging, discretization, meanfield, counterexample, "
                      "metrics-selftest");
        throw ConfigError(bad);
    }
    try {
        cfg.experiment = parse_experiment_kind(doc["experiment"].get<std::string>());
    } catch (const InvalidArgument& e) {
        bad.push_back(e.what());
        throw ConfigError(bad);
    }
    const ExperimentKind kind = cfg.experiment;
    const bool selftest = kind == ExperimentKind::MetricsSelftest;

    if (doc.contains("sweep")) {
        if (!doc["sweep"].is_array()) {
            bad.push_back("'sweep' must be an array of numbers");
        } else {
            for (const auto& v : doc["sweep"]) {
                if (!v.is_number()) {
                    bad.push_back("'sweep' entries must be numbers");
                    break;
                }
                cfg.sweep.push_back(v.get<double>());
            }
        }
    }
    if (!selftest && cfg.sweep.empty()) {
        bad.push_back("'sweep' must list at least one value");
    }
    if (doc.contains("horizon")) {
        if (doc["horizon"].is_number() && doc["horizon"].get<double>() > 0.0) {
            cfg.horizon = doc["horizon"].get<double>();
        } else {
            bad.push_back("'horizon' must be a positive number");
        }
    } else if (!selftest) {
        bad.push_back("'horizon' is required");
    }
    if (doc.contains("n_reps")) {
        if (doc["n_reps"].is_number_unsigned()) {
            cfg.n_reps = doc["n_reps"].get<std::size_t>();
        } else {
            bad.push_back("'n_reps' must be a non-negative integer");
        }
    }
    const bool needs_reps = kind != ExperimentKind::Counterexample && !selftest;
    if (needs_reps && cfg.n_reps < 100) {
        bad.push_back("'n_reps' must be at least 100 (got " + std::to_string(cfg.n_reps) + ")");
    }
    if (doc.contains("seed")) {
        if (doc["seed"].is_number_unsigned()) {
            cfg.seed = doc["seed"].get<std::uint64_t>();
        } else {
            bad.push_back("'seed' must be a non-negative integer");
        }
    }
    if (doc.contains("output_dir")) {
        if (doc["output_dir"].is_string()) {
            cfg.output_dir = doc["output_dir"].get<std::string>();
        } else {
            bad.push_back("'output_dir' must be a string");
        }
    }
    if (doc.contains("params")) {
        if (!doc["params"].is_object()) {
            bad.push_back("'params' must be an object");
        } else {
            const Schema& schema = schema_for(kind);
            for (const auto& [key, value] : doc["params"].items()) {
                const auto it = schema.find(key);
                if (it == schema.end()) {
                    bad.push_back("unknown key 'params." + key + "' for experiment " + std::string(to_string(kind)));
                } else if (!type_matches(value, it->second)) {
                    bad.push_back("'params." + key + "' must be " + type_name(it->second));
                } else {
                    cfg.params[key] = value;
                }
            }
        }
    }
    if (!bad.empty()) {
        throw ConfigError(bad);
    }

    // Semantic rules, collected together.
    auto check = [&](bool ok, std::string msg) {
        if (!ok) {
            bad.push_back(std::move(msg));
        }
    };
    auto one_of = [&](const std::string& key, std::initializer_list<const char*> allowed) {
        if (!cfg.params.contains(key)) {
            return;
        }
        const std::string v = cfg.text(key, "");
        for (const char* a : allowed) {
            if (v == a) {
                return;
            }
        }
        std::string list;
        for (const char* a : allowed) {
            list += list.empty() ? a : std::string(", ") + a;
        }
        bad.push_back("'params." + key + "' = '" + v + "' is not one of " + list);
    };

    switch (kind) {
        case ExperimentKind::Averaging: {
            one_of("mode", {"strong", "weak", "contraction", "moments"});
            one_of("test_function", {"tanh", "cos", "inverse_quadratic", "constant"});
            const bool contraction = cfg.text("mode", "strong") == "contraction";
            for (double v : cfg.sweep) {
                if (contraction) {
                    check(v >= 0.0 && std::isfinite(v), "sweep value r = " + format_number(v) + " must be >= 0");
                } else {
                    check(v > 0.0 && v < 1.0, "sweep value delta = " + format_number(v) + " must lie in (0, 1)");
                }
            }
            check(std::isfinite(cfg.number("r", 1.0)), "'params.r' must be finite");
            check(cfg.number("h_base", kDefaultStepBase) > 0.0, "'params.h_base' must be positive");
            break;
        }
        case ExperimentKind::Discretization: {
            one_of("scheme", {"ula", "ubu", "hmc"});
            one_of("potential", {"quadratic", "perturbed_quadratic"});
            one_of("reference", {"fine_ubu", "fine_euler"});
            for (double v : cfg.sweep) {
                check(has_integer_inverse(v),
                      "sweep value delta = " + format_number(v) + " violates delta^-1 in N (1/delta must be a positive integer)");
            }
            const double a = cfg.number("a", 1.0);
            const double b = cfg.number("b", 0.3);
            check(a > 0.0, "'params.a' must be positive");
            if (cfg.text("potential", "quadratic") == "perturbed_quadratic") {
                check(std::abs(b) < a, "'params.b' must satisfy |b| < a");
            }
            check(cfg.number("gamma", 1.0) > 0.0, "'params.gamma' must be positive");
            if (cfg.text("scheme", "ula") == "hmc") {
                check(cfg.text("potential", "quadratic") == "quadratic", "hmc needs the quadratic potential");
                check(cfg.number("flow_time", 1.0) > 0.0, "'params.flow_time' must be positive");
            }
            break;
        }
        case ExperimentKind::Meanfield: {
            one_of("provider", {"closure", "proxy"});
            const double a = cfg.number("a", 1.0);
            const double kappa = cfg.number("kappa", 0.5);
            check(kappa < a, "kappa < a is required (got kappa = " + format_number(kappa) + ", a = " +
                                 format_number(a) + ")");
            check(cfg.number("h", 1e-3) > 0.0, "'params.h' must be positive");
            check(cfg.number("v0", 0.5) >= 0.0, "'params.v0' must be non-negative");
            for (double v : cfg.sweep) {
                check(v >= 2.0 && v == std::floor(v) && v <= 1024.0,
                      "sweep value N = " + format_number(v) + " must be an integer in [2, 1024]");
            }
            break;
        }
        case ExperimentKind::Counterexample: {
            const double h = cfg.number("h", 0.01);
            check(h > 0.0, "'params.h' must be positive");
            check(cfg.integer("stride", 1) >= 1, "'params.stride' must be at least 1");
            for (double d : cfg.sweep) {
                if (!(d > 0.0)) {
                    bad.push_back("sweep value delta = " + format_number(d) + " must be positive");
                    continue;
                }
                check(cfg.horizon >= 1.0 / d + 3.0,
                      "horizon must be at least 1/delta + 3 = " + format_number(1.0 / d + 3.0));
                if (h > 0.0) {
                    try {
                        AppendixModel{d, h}.validate();
                    } catch (const InvalidArgument& e) {
                        bad.push_back("delta = " + format_number(d) + ": " + e.what());
                    }
                }
            }
            break;
        }
        case ExperimentKind::MetricsSelftest: break;
    }
    if (cfg.params.contains("plateau_at")) {
        const double want = cfg.number("plateau_at", 0.0);
        check(std::any_of(cfg.sweep.begin(), cfg.sweep.end(), [want](double v) { return v == want; }),
              "'params.plateau_at' must be one of the sweep values");
    }
    if (!bad.empty()) {
        throw ConfigError(bad);
    }
    return cfg;
}

ExperimentConfig parse_config_text(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError({std::string("invalid JSON: ") + e.what()});
    }
    return parse_config_json(doc);
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config file " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::uint64_t config_hash(const ExperimentConfig& cfg) { return fnv1a(cfg.source.dump()); }

bool ReportBundle::ok() const noexcept {
    if (!failures.empty()) {
        return false;
    }
    return std::none_of(verdicts.begin(), verdicts.end(),
                        [](const Verdict& v) { return v.status == Verdict::Status::Fail; });
}

ReportBundle run_experiment(const ExperimentConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    ReportBundle b;
    b.config = cfg;
    b.summary["experiment"] = std::string(to_string(cfg.experiment));
    try {
        switch (cfg.experiment) {
            case ExperimentKind::Averaging: run_averaging(cfg, b); break;
            case ExperimentKind::Discretization: run_discretization(cfg, b); break;
            case ExperimentKind::Meanfield: run_meanfield(cfg, b); break;
            case ExperimentKind::Counterexample: run_counterexample(cfg, b); break;
            case ExperimentKind::MetricsSelftest: run_selftest(cfg, b); break;
        }
    } catch (const NumericalBlowup& e) {
        b.failures.push_back("blowup: step " + std::to_string(e.step_index()) + ", trajectory " +
                             (e.trajectory() == NumericalBlowup::kUnknown ? std::string("unknown")
                                                                          : std::to_string(e.trajectory())));
    } catch (const BudgetExceeded& e) {
        b.failures.push_back(std::string("budget_exceeded: ") + e.what());
    } catch (const FitFailure& e) {
        b.failures.push_back(std::string("fit_failure: ") + e.what());
    }
    b.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return b;
}

std::string format_number(double x) {
    if (std::isnan(x)) {
        return "nan";
    }
    if (std::isinf(x)) {
        return x > 0 ? "inf" : "-inf";
    }
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

void write_curves_csv(std::ostream& os, const std::vector<ErrorCurve>& curves) {
    os << "experiment,sweep_value,t,value,std_error\n";
    for (const auto& c : curves) {
        const std::string prefix = c.meta.label + "," + format_number(c.meta.sweep_value) + ",";
        for (std::size_t k = 0; k < c.size(); ++k) {
            os << prefix << format_number(c.times[k]) << ',' << format_number(c.values[k]) << ','
               << format_number(c.std_errors[k]) << '\n';
        }
    }
}

json summary_json(const ReportBundle& b) {
    json s = b.summary;
    json verdicts = json::array();
    for (const auto& v : b.verdicts) {
        verdicts.push_back({{"name", v.name},
                            {"status", std::string(to_string(v.status))},
                            {"value", num(v.value)},
                            {"lo", num(v.lo)},
                            {"hi", num(v.hi)},
                            {"reason", v.reason}});
    }
    s["verdicts"] = verdicts;
    s["failures"] = b.failures;
    s["ok"] = b.ok();
    return s;
}

std::string version_string() { return std::string("uitlab ") + UITLAB_VERSION + " (git " + UITLAB_GIT_HASH + ")"; }

ReportPaths emit_reports(const ReportBundle& b, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());
    }
    ReportPaths paths{out_dir / "curves.csv", out_dir / "summary.json", out_dir / "manifest.json"};
    auto write = [](const std::filesystem::path& p, auto&& body) {
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot write " + p.string());
        }
        body(out);
        out.flush();
        if (!out) {
            throw IoError("write failed for " + p.string());
        }
    };
    write(paths.curves, [&](std::ostream& os) { write_curves_csv(os, b.curves); });
    write(paths.summary, [&](std::ostream& os) { os << summary_json(b).dump(2) << '\n'; });

    std::size_t rows = 0;
    for (const auto& c : b.curves) {
        rows += c.size();
    }
    const json manifest{{"config", b.config.source},
                        {"experiment", std::string(to_string(b.config.experiment))},
                        {"seed", b.config.seed},
                        {"config_hash", hex64(config_hash(b.config))},
                        {"version", version_string()},
                        {"compiler", __VERSION__},
                        {"threads", resolve_threads(b.config.threads)},
                        {"wall_seconds", b.wall_seconds},
                        {"csv_rows", rows},
                        {"ok", b.ok()},
                        {"files", {"curves.csv", "summary.json", "manifest.json"}}};
    write(paths.manifest, [&](std::ostream& os) { os << manifest.dump(2) << '\n'; });
    return paths;
}

}  // namespace uitlab
