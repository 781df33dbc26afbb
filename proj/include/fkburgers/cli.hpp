#pragma once

// Command line: simulate, verify, oracle, zones, flows. Exit codes: 0 when
// every check passes, 1 on a failed check or a runtime failure, 2 on a
// configuration error.

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "config.hpp"
#include "errors.hpp"
#include "harness.hpp"
#include "oracle.hpp"
#include "picard.hpp"
#include "report.hpp"
#include "scalar_flows.hpp"
#include "zones.hpp"

namespace fkb {

enum ExitCode { kExitPass = 0, kExitFail = 1, kExitConfig = 2 };

struct CliOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    std::optional<int> jobs;
    std::string format = "json";
};

namespace detail {

inline ReportFormat report_format(const CliOptions& o) {
    return o.format == "csv" ? ReportFormat::Csv : ReportFormat::Json;
}

inline ReportContext report_context(const ExperimentConfig& c) {
    ReportContext ctx;
    ctx.field = c.field.kind;
    ctx.seed = c.seed;
    if (c.zones.layout) ctx.layout_hash = layout_hash(*c.zones.layout);
    return ctx;
}

inline std::string fingerprint_hash(const ExperimentConfig& c) { return hex64(fnv1a(c.field_fingerprint)); }

inline std::filesystem::path field_path(const std::filesystem::path& out, const char* stem, int m) {
    return out / "fields" / (std::string(stem) + "_m" + std::to_string(m) + ".bin");
}

inline void save_state(const SchemeState& st, const ExperimentConfig& c, const std::filesystem::path& out) {
    std::filesystem::create_directories(out / "fields");
    for (std::size_t m = 0; m < st.iterates.size(); ++m)
        st.iterates[m].save_binary(field_path(out, "u", static_cast<int>(m)).string());
    for (std::size_t m = 0; m < st.gradients.size(); ++m)
        st.gradients[m].save_binary(field_path(out, "grad", static_cast<int>(m)).string());
    nlohmann::ordered_json j;
    j["schema"] = kReportSchema;
    j["fingerprint"] = fingerprint_hash(c);
    j["m_max"] = st.cfg.m_max;
    j["gradients"] = st.cfg.gradients;
    write_text(out / "fields" / "manifest.json", j.dump(2) + "\n");
}

/// Stored iterates when their manifest matches the configuration.
inline std::optional<SchemeState> load_state(const ExperimentConfig& c, const VelocityField& u0,
                                             const std::filesystem::path& out, bool need_gradients) {
    const auto manifest = out / "fields" / "manifest.json";
    if (!std::filesystem::exists(manifest)) return std::nullopt;
    std::ifstream f(manifest);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    }
    if (j.value("fingerprint", "") != fingerprint_hash(c)) return std::nullopt;
    const bool grads = j.value("gradients", false);
    if (need_gradients && !grads) return std::nullopt;
    IterationConfig cfg = c.iteration;
    cfg.gradients = grads;
    SchemeState st = make_state(u0, cfg);
    for (int m = 0; m <= cfg.m_max; ++m) {
        GridField u = GridField::load_binary(field_path(out, "u", m).string());
        u.envelope = u0;
        u.policy = cfg.policy;
        st.stats.push_back(collect_stats(u, m, cfg.se_ceiling));
        st.iterates.push_back(std::move(u));
        if (grads) {
            GridField g = GridField::load_binary(field_path(out, "grad", m).string());
            g.envelope = u0;
            g.policy = cfg.policy;
            st.gradients.push_back(std::move(g));
        }
    }
    return st;
}

inline SchemeState compute_state(const ExperimentConfig& c, const VelocityField& u0, bool gradients) {
    IterationConfig cfg = c.iteration;
    cfg.gradients = cfg.viscous && (cfg.gradients || gradients);
    return cfg.viscous ? run_viscous(u0, cfg) : run_nonviscous(u0, cfg);
}

inline std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

inline void print_report_line(std::ostream& os, const BoundReport& r) {
    os << r.id << ": " << (r.pass ? "PASS" : "FAIL");
    if (r.status != "pass" && r.status != "fail") os << " (" << r.status << ")";
    os << "  samples=" << r.samples << " violation=" << fmt(r.violation_fraction)
       << " fitted=" << fmt(r.fitted_constant) << "\n";
}

// -- subcommands -----------------------------------------------------------

inline int cmd_simulate(const ExperimentConfig& c, const CliOptions& o, std::ostream& os) {
    const VelocityField u0 = build_field(c);
    const SchemeState st = compute_state(c, u0, false);
    const std::filesystem::path out(o.out);
    save_state(st, c, out);
    const GridField& last = st.iterates.back();
    for (std::size_t j = 0; j < last.slices(); ++j) {
        std::ostringstream csv;
        last.write_csv_slice(csv, j);
        write_text(out / "curves" / ("u_m" + std::to_string(last.m_index) + "_slice" + std::to_string(j) + ".csv"),
                   csv.str());
    }
    nlohmann::ordered_json j;
    j["schema"] = kReportSchema;
    j["field"] = c.field.kind;
    j["seed"] = c.seed;
    j["viscous"] = c.iteration.viscous;
    auto& arr = j["iterates"] = nlohmann::ordered_json::array();
    for (const IterateStats& s : st.stats) {
        arr.push_back({{"m", s.m}, {"sup_norm", s.sup_norm}, {"max_se", s.max_se}, {"se_warning", s.se_warning}});
        os << "iterate " << s.m << ": sup |u| = " << fmt(s.sup_norm) << ", max se = " << fmt(s.max_se) << "\n";
    }
    if (report_format(o) == ReportFormat::Json) {
        write_text(out / "reports" / "simulate.json", j.dump(2) + "\n");
    } else {
        std::ostringstream csv;
        csv.precision(17);
        csv << "m,sup_norm,max_se,se_warning\n";
        for (const IterateStats& s : st.stats)
            csv << s.m << ',' << s.sup_norm << ',' << s.max_se << ',' << (s.se_warning ? 1 : 0) << '\n';
        write_text(out / "reports" / "simulate.csv", csv.str());
    }
    return kExitPass;
}

/// Runs every enabled check in a fixed order.
inline std::vector<BoundReport> run_checks(const ExperimentConfig& c, const std::filesystem::path& out,
                                           std::ostream& log) {
    const VelocityField u0 = build_field(c);
    const ChecksSection& ch = c.checks;
    const Thresholds& th = ch.thresholds;
    const bool need_state = ch.has("displacement") || ch.has("safe_zones") || ch.has("uniform_bounds") ||
                            ch.has("v_decay") || ch.has("penalized") || ch.has("gradient_consistency");
    const bool need_grads = ch.has("uniform_bounds") || ch.has("gradient_consistency");
    std::optional<SchemeState> st;
    if (need_state) {
        st = load_state(c, u0, out, need_grads);
        if (st) {
            log << "using stored iterates from " << (out / "fields").string() << "\n";
        } else {
            st = compute_state(c, u0, need_grads);
            save_state(*st, c, out);
        }
    }
    std::vector<BoundReport> reports;
    const double radius = c.check_radius();
    for (const std::string& name : check_names()) {
        if (!ch.has(name)) continue;
        if (name == "hyp1") {
            reports.push_back(verify_hyp1(u0));
        } else if (name == "displacement") {
            DisplacementSetup s;
            s.paths = ch.displacement_paths;
            s.steps = ch.displacement_steps;
            s.seed = c.seed + 7;
            s.abnormal_kappa_prime = ch.abnormal_kappa_prime;
            s.times = ch.displacement_times;
            if (s.times.empty())
                for (double t : c.iteration.slices)
                    if (t >= 1.0 / u0.U()) s.times.push_back(t);
            if (s.times.empty()) throw PreconditionError("displacement: no slice in [1/U, T]; set checks.displacement_times");
            s.starts.clear();
            for (double x : ch.displacement_starts) {
                Vec v(u0.dim());
                v[0] = x;
                s.starts.push_back(v);
            }
            reports.push_back(verify_displacement(*st, s, c.constants, th));
        } else if (name == "safe_zones") {
            SafeZoneSetup s;
            s.layout = *c.zones.layout;
            s.zone = c.zones.index;
            s.t = c.zones.t;
            s.starts = c.zones.starts;
            s.steps = c.zones.steps;
            s.paths = c.zones.paths;
            s.seed = c.seed + 5;
            reports.push_back(verify_safe_zones(*st, s, c.constants, th));
        } else if (name == "uniform_bounds") {
            reports.push_back(verify_uniform_bounds(*st, radius, th));
        } else if (name == "v_decay") {
            reports.push_back(verify_v_decay(*st, c.constants.C, th));
        } else if (name == "mt_tail") {
            MtTailSetup s;
            s.dim = u0.dim();
            s.t = ch.tail_t;
            s.paths = ch.tail_paths;
            s.steps = ch.tail_steps;
            s.seed = c.seed + 3;
            s.jobs = c.iteration.jobs;
            reports.push_back(verify_mt_tail(s, th));
        } else if (name == "appendix_lemma") {
            LemmaSetup s;
            s.samples = ch.lemma_samples;
            s.seed = c.seed + 9;
            reports.push_back(verify_appendix_lemma(s));
        } else if (name == "penalized") {
            PenalizedSetup s;
            s.m = ch.penalized_m;
            s.levels = ch.penalized_levels;
            s.C = c.constants.C;
            reports.push_back(verify_penalized(*st, s));
        } else if (name == "gradient_consistency") {
            reports.push_back(verify_gradient_consistency(*st, radius, th));
        }
        print_report_line(log, reports.back());
    }
    return reports;
}

inline int cmd_verify(const ExperimentConfig& c, const CliOptions& o, std::ostream& os) {
    const std::filesystem::path out(o.out);
    const auto reports = run_checks(c, out, os);
    const ReportContext ctx = report_context(c);
    bool all = true;
    nlohmann::ordered_json summary;
    summary["schema"] = kReportSchema;
    auto& arr = summary["checks"] = nlohmann::ordered_json::array();
    for (const BoundReport& r : reports) {
        write_report(out, r, ctx, report_format(o));
        arr.push_back({{"check", r.id}, {"anchor", r.anchor}, {"pass", r.pass}, {"status", r.status}});
        all = all && r.pass;
    }
    summary["all_pass"] = all;
    write_text(out / "reports" / "summary.json", summary.dump(2) + "\n");
    write_timing(out / "timing.json", reports);
    os << (all ? "all checks passed" : "some checks failed") << "\n";
    return all ? kExitPass : kExitFail;
}

inline int cmd_oracle(const ExperimentConfig& c, const CliOptions& o, std::ostream& os) {
    const VelocityField u0 = build_field(c);
    if (u0.dim() != 1) throw ConfigError("oracle: the exact reference exists in one dimension only");
    const ScalarFn f = scalar_view(u0);
    const std::filesystem::path out(o.out);
    const SpatialGrid& g = c.iteration.grid;
    const double R = c.checks.oracle_radius;
    std::vector<double> xs;
    std::vector<std::size_t> idx;
    for (std::size_t n = 0; n < g.size(); ++n)
        if (std::abs(g.node(n)[0]) <= R) {
            xs.push_back(g.node(n)[0]);
            idx.push_back(n);
        }
    std::vector<double> ts;
    std::vector<std::vector<double>> curves;
    for (double t : c.iteration.slices)
        if (t > 0.0) {
            ts.push_back(t);
            curves.push_back(cole_hopf_curve(f, t, xs));
        }
    std::ostringstream csv;
    write_oracle_csv(csv, xs, ts, curves);
    write_text(out / "curves" / "oracle.csv", csv.str());
    os << "oracle curves: " << (out / "curves" / "oracle.csv").string() << "\n";

    const auto st = load_state(c, u0, out, false);
    if (!st) {
        os << "no stored iterates match the configuration; comparison skipped\n";
        return kExitPass;
    }
    const GridField& u = st->iterates.back();
    BoundReport r;
    r.id = "oracle";
    r.anchor = "Cole-Hopf reference for the last iterate";
    double worst = 0.0;
    for (std::size_t k = 0; k < ts.size(); ++k) {
        const std::size_t j = *u.slice_index(ts[k]);
        std::vector<double> ref, cand, xx, se;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (std::abs(curves[k][i]) <= c.checks.oracle_floor) continue;
            ref.push_back(curves[k][i]);
            cand.push_back(u.at(j, idx[i], 0));
            xx.push_back(xs[i]);
            se.push_back(u.se(j, idx[i], 0));
        }
        if (ref.empty()) continue;
        const Comparison cmp = compare_values(ref, cand, xx, se, true);
        r.metric("rel_sup_t" + fmt(ts[k]), cmp.value);
        r.metric("worst_x_t" + fmt(ts[k]), cmp.worst[0]);
        r.samples += cmp.count;
        worst = std::max(worst, cmp.value);
    }
    r.fitted_constant = worst;
    r.metric("tolerance", c.checks.oracle_tolerance);
    r.finish(r.samples > 0 && worst <= c.checks.oracle_tolerance);
    write_report(out, r, report_context(c), report_format(o));
    print_report_line(os, r);
    return r.pass ? kExitPass : kExitFail;
}

inline int cmd_zones(const ExperimentConfig& c, const CliOptions& o, std::ostream& os) {
    if (!c.zones.layout) throw ConfigError("zones: [zones] radii is empty");
    const ZoneLayout& L = *c.zones.layout;
    const double U = c.field.U, t = c.zones.t, C = c.constants.C;
    nlohmann::ordered_json j;
    j["radii"] = L.radii;
    j["layout_hash"] = layout_hash(L);
    j["core_threshold"] = core_threshold(L.kappa, C, U, t, c.constants.core_threshold_factor);
    auto& arr = j["intervals"] = nlohmann::ordered_json::array();
    for (std::size_t i = 1; i <= L.safe_count(); ++i) {
        const SafeInterval a = safe_interval(L, i, t, U, C, false);
        const SafeInterval b = safe_interval(L, i, t, U, C, true);
        arr.push_back({{"i", i},
                       {"nonviscous", {a.lower, a.upper}},
                       {"nonviscous_empty", a.empty()},
                       {"viscous", {b.lower, b.upper}},
                       {"viscous_empty", b.empty()}});
    }
    if (o.format == "json") {
        os << j.dump(2) << "\n";
    } else {
        os << "i,nonviscous_lower,nonviscous_upper,viscous_lower,viscous_upper\n";
        for (std::size_t i = 1; i <= L.safe_count(); ++i) {
            const SafeInterval a = safe_interval(L, i, t, U, C, false);
            const SafeInterval b = safe_interval(L, i, t, U, C, true);
            os << i << ',' << a.lower << ',' << a.upper << ',' << b.lower << ',' << b.upper << "\n";
        }
    }
    return kExitPass;
}

inline int cmd_flows(const ExperimentConfig& c, const CliOptions& o, std::ostream& os) {
    const FlowParams p{c.field.kappa, c.field.U, c.flow.x_min};
    try {
        p.validate();
    } catch (const ParameterError& e) {
        throw ConfigError(std::string("[flow] ") + e.what());
    }
    DeterministicOptions opt;
    opt.grading = c.flow.grading;
    const DriftFn v = [&p](double, const Vec& y) { return Vec{comparison_velocity(p, y[0])}; };
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    std::ostringstream csv;
    csv.precision(17);
    csv << "t,x,phi,numeric,rel_error,envelope,envelope_bracketed,regime\n";
    for (double t : c.flow.times)
        for (double x : c.flow.points) {
            const double phi = phi_flow(p, t, x);
            const double num = integrate_deterministic(v, t, Vec{x}, c.flow.steps, opt).end_Y()[0];
            const double rel = phi != 0.0 ? std::abs(num - phi) / std::abs(phi) : std::abs(num);
            const double env = displacement_envelope(p, t, x);
            const double envb = displacement_envelope_bracketed(p, t, x);
            const std::string regime(to_string(classify_regime(p, t, x)));
            j.push_back({{"t", t},
                         {"x", x},
                         {"phi", phi},
                         {"numeric", num},
                         {"rel_error", rel},
                         {"envelope", env},
                         {"envelope_bracketed", envb},
                         {"regime", regime},
                         {"cutoffs", cutoff_recursion(c.constants.C, p, t, c.flow.recursion_m)}});
            csv << t << ',' << x << ',' << phi << ',' << num << ',' << rel << ',' << env << ',' << envb << ','
                << regime << "\n";
        }
    os << (o.format == "json" ? j.dump(2) + "\n" : csv.str());
    return kExitPass;
}

}  // namespace detail

/// Entry point of the fkburgers executable.
inline int cli_main(int argc, char** argv, std::ostream& os = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Picard / Feynman-Kac numerical lab for viscous Burgers"};
    app.fallthrough();
    CliOptions o;
    bool help_config = false;
    app.add_option("--config", o.config, "configuration file")->check(CLI::ExistingFile);
    app.add_option("--seed", o.seed, "override iteration.seed");
    app.add_option("--out", o.out, "output directory")->capture_default_str();
    app.add_option("--jobs", o.jobs, "override iteration.jobs")->check(CLI::PositiveNumber);
    app.add_option("--format", o.format, "report format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
    app.add_flag("--help-config", help_config, "print every configuration key and exit");
    auto* simulate = app.add_subcommand("simulate", "run the Picard scheme and store the iterates");
    auto* verify = app.add_subcommand("verify", "run the enabled bound checks");
    auto* oracle = app.add_subcommand("oracle", "write Cole-Hopf curves and compare stored iterates");
    auto* zones = app.add_subcommand("zones", "validate a zone layout and print its safe intervals");
    auto* flows = app.add_subcommand("flows", "evaluate comparison flows, envelopes and cut-offs");
    app.require_subcommand(0, 1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, os, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, os, err);
        return kExitConfig;
    }
    if (help_config) {
        print_config_help(os);
        return kExitPass;
    }
    if (app.get_subcommands().empty()) {
        err << app.help();
        return kExitConfig;
    }
    try {
        ExperimentConfig c = o.config.empty() ? default_config() : load_config(o.config);
        if (o.seed) {
            c.seed = *o.seed;
            c.iteration.seed = *o.seed;
            c.field_fingerprint += "seed_override=" + std::to_string(*o.seed) + "\n";
        }
        if (o.jobs) c.iteration.jobs = *o.jobs;
        if (simulate->parsed()) return detail::cmd_simulate(c, o, os);
        if (verify->parsed()) return detail::cmd_verify(c, o, os);
        if (oracle->parsed()) return detail::cmd_oracle(c, o, os);
        if (zones->parsed()) return detail::cmd_zones(c, o, os);
        if (flows->parsed()) return detail::cmd_flows(c, o, os);
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const PreconditionError& e) {
        err << "precondition not met: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ValidationError& e) {
        err << "invalid input: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ParameterError& e) {
        err << "invalid parameter: " << e.what() << "\n";
        return kExitConfig;
    } catch (const Error& e) {
        err << "run failed: " << e.what() << "\n";
        return kExitFail;
    }
    return kExitConfig;
}

}  // namespace fkb
