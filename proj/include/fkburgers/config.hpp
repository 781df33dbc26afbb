#pragma once

// Experiment configuration: an ini-style file with sections [field], [flow],
// [zones], [iteration], [constants], [checks]. Unknown sections or keys are
// errors.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "constants.hpp"
#include "errors.hpp"
#include "harness.hpp"
#include "picard.hpp"
#include "scalar_flows.hpp"
#include "velocity.hpp"
#include "zones.hpp"

namespace fkb {

struct KeySpec {
    const char* section;
    const char* key;
    const char* fallback;
    const char* doc;
};

inline const std::vector<KeySpec>& config_keys() {
    static const std::vector<KeySpec> keys = {
        {"field", "kind", "prototype", "prototype | linear | constant | shock | annular"},
        {"field", "dim", "1", "space dimension, 1 to 3"},
        {"field", "U", "1", "velocity scale U >= 1"},
        {"field", "kappa", "2", "growth exponent kappa > 1"},
        {"field", "slope", "1", "linear: u_0(x) = slope * x"},
        {"field", "value", "0.5", "constant: comma-separated components"},
        {"field", "shock_amplitude", "1", "shock: u_0(x) = -a tanh(a x / 2)"},
        {"field", "amplitudes", "", "annular: bump peak per dangerous zone"},
        {"field", "amplitude_factor", "0", "annular: peak = factor * |prototype| at the zone middle (used when amplitudes is empty)"},
        {"field", "growth", "", "K0,K1,K2,alpha,beta; empty fits them from the field"},
        {"flow", "x_min", "0", "cut-off of the comparison velocity"},
        {"flow", "times", "1,2,4", "flows: evaluation times"},
        {"flow", "points", "0", "flows: start positions"},
        {"flow", "steps", "1000", "flows: RK4 steps of the numerical comparison flow"},
        {"flow", "grading", "3", "flows: step mesh s_k = t (k/n)^grading"},
        {"flow", "recursion_m", "4", "flows: last index of the cut-off recursion"},
        {"zones", "radii", "", "R_1 <= R_2 <= ...; empty means no layout"},
        {"zones", "thin_C", "1", "R_{2i} - R_{2i-1} <= thin_C R_{2i-1}^{1/kappa}"},
        {"zones", "fat_eps", "3", "R_{2i+1} >= (1 + fat_eps) R_{2i}"},
        {"zones", "subdivide", "false", "insert empty dangerous zones into very fat safe zones"},
        {"zones", "index", "1", "safe zone checked by safe_zones"},
        {"zones", "t", "1", "start time of the safe-zone check"},
        {"zones", "starts", "1000", "safe_zones: starts in I_i(t)"},
        {"zones", "steps", "1000", "safe_zones: integration steps"},
        {"zones", "paths", "100", "safe_zones: noise paths per start (viscous)"},
        {"iteration", "m_max", "4", "last Picard iterate"},
        {"iteration", "samples", "2000", "Monte Carlo paths per node"},
        {"iteration", "sde_steps", "200", "time steps per path"},
        {"iteration", "box", "20", "grid half width L of [-L, L]^d"},
        {"iteration", "nodes", "401", "grid nodes per axis"},
        {"iteration", "slices", "0,0.25,0.5,1", "slice times starting at 0"},
        {"iteration", "viscous", "true", "viscous (Feynman-Kac) or non-viscous scheme"},
        {"iteration", "seed", "1", "base seed of every random stream"},
        {"iteration", "antithetic", "true", "mirror every second path"},
        {"iteration", "gradients", "false", "carry grad u^(m) as well"},
        {"iteration", "gamma", "0.5", "Hoelder exponent of the gradient decay check"},
        {"iteration", "ode_steps_per_unit", "400", "non-viscous RK4 steps per unit time"},
        {"iteration", "policy", "envelope", "outside the box: envelope | clamp | error"},
        {"iteration", "blowup_factor", "4", "escape radius in units of the grid extent"},
        {"iteration", "jobs", "1", "worker threads"},
        {"constants", "C", "2", "induction constant C > 1"},
        {"constants", "C_kappa", "4", "normal-regime displacement constant > 1"},
        {"constants", "kappa_prime", "2", "abnormal-regime exponent >= 1"},
        {"constants", "C_abn", "4", "abnormal-regime prefactor"},
        {"constants", "c_tail", "0.25", "Gaussian tail rate"},
        {"constants", "core_threshold_factor", "32", "core radius factor"},
        {"checks", "enabled", "hyp1,displacement,uniform_bounds,v_decay,mt_tail,appendix_lemma",
         "hyp1, displacement, safe_zones, uniform_bounds, v_decay, mt_tail, appendix_lemma, penalized, gradient_consistency"},
        {"checks", "violation", "0.01", "largest admissible violation fraction"},
        {"checks", "stability", "2", "largest max/min of a fitted constant over m"},
        {"checks", "slope_slack", "0.3", "decay slope must be <= log(theta) + slack"},
        {"checks", "theta", "0.5", "decay region t <= theta T_min"},
        {"checks", "r2_min", "0.95", "tail regression R^2"},
        {"checks", "moment_split", "0.2", "E[M_t^4] half-sample relative gap"},
        {"checks", "agreement", "0.95", "gradient cross-check agreeing fraction"},
        {"checks", "radius", "0", "region |x| <= radius of the grid checks; 0 means half the box"},
        {"checks", "displacement_paths", "10000", "noise paths of the displacement check"},
        {"checks", "displacement_steps", "100", "steps per displacement path"},
        {"checks", "displacement_times", "", "horizons in [1/U, T]; empty uses the slices in that range"},
        {"checks", "displacement_starts", "0,3,-10", "start radii along the first axis"},
        {"checks", "abnormal_form", "kappa_prime", "kappa_prime: (M_t sqrt t)^kappa' | kappa: (M_t sqrt t / <Ut>)^kappa"},
        {"checks", "tail_paths", "100000", "paths of the M_t tail check"},
        {"checks", "tail_steps", "1000", "steps per tail path"},
        {"checks", "tail_t", "1", "horizon of the tail check"},
        {"checks", "lemma_samples", "1000", "random parameter sets of the fixed-point lemma"},
        {"checks", "penalized_m", "2", "iterate of the penalized check"},
        {"checks", "penalized_levels", "4,5,6", "levels n of the penalized check"},
        {"checks", "oracle_tolerance", "0.05", "oracle: largest relative sup error"},
        {"checks", "oracle_radius", "10", "oracle: comparison region |x| <= radius"},
        {"checks", "oracle_floor", "0.1", "oracle: skip points with |u_oracle| <= floor"},
    };
    return keys;
}

inline const std::vector<std::string>& check_names() {
    static const std::vector<std::string> names = {"hyp1",     "displacement",  "safe_zones",
                                                   "uniform_bounds", "v_decay", "mt_tail",
                                                   "appendix_lemma", "penalized", "gradient_consistency"};
    return names;
}

inline void print_config_help(std::ostream& os) {
    std::string section;
    for (const KeySpec& k : config_keys()) {
        if (section != k.section) {
            os << (section.empty() ? "" : "\n") << "[" << k.section << "]\n";
            section = k.section;
        }
        os << "  " << k.key << " = " << k.fallback << "\n      " << k.doc << "\n";
    }
}

struct FieldSpec {
    std::string kind = "prototype";
    int dim = 1;
    double U = 1.0;
    double kappa = 2.0;
    double slope = 1.0;
    std::vector<double> value{0.5};
    double shock_amplitude = 1.0;
    std::vector<double> amplitudes;
    double amplitude_factor = 0.0;
    std::vector<double> growth;
};

struct FlowSection {
    double x_min = 0.0;
    std::vector<double> times{1.0, 2.0, 4.0};
    std::vector<double> points{0.0};
    int steps = 1000;
    double grading = 3.0;
    int recursion_m = 4;
};

struct ZonesSection {
    std::optional<ZoneLayout> layout;
    bool subdivide = false;
    std::size_t index = 1;
    double t = 1.0;
    int starts = 1000;
    int steps = 1000;
    int paths = 100;
};

struct ChecksSection {
    std::vector<std::string> enabled;
    Thresholds thresholds;
    double radius = 0.0;
    int displacement_paths = 10000;
    int displacement_steps = 100;
    std::vector<double> displacement_times;
    std::vector<double> displacement_starts{0.0, 3.0, -10.0};
    bool abnormal_kappa_prime = true;
    int tail_paths = 100000;
    int tail_steps = 1000;
    double tail_t = 1.0;
    int lemma_samples = 1000;
    int penalized_m = 2;
    std::vector<int> penalized_levels{4, 5, 6};
    double oracle_tolerance = 0.05;
    double oracle_radius = 10.0;
    double oracle_floor = 0.1;

    bool has(const std::string& name) const {
        return std::find(enabled.begin(), enabled.end(), name) != enabled.end();
    }
};

struct ExperimentConfig {
    FieldSpec field;
    FlowSection flow;
    ZonesSection zones;
    IterationConfig iteration;
    BoundConstants constants;
    ChecksSection checks;
    std::string out = "out";
    std::uint64_t seed = 1;
    /// Canonical text of the sections that determine the fields.
    std::string field_fingerprint;

    double check_radius() const {
        return checks.radius > 0.0 ? checks.radius : 0.5 * iteration.grid.inner_radius();
    }
};

namespace detail {

inline std::string trim(std::string s) {
    boost::algorithm::trim(s);
    return s;
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> parts;
    const std::string t = trim(s);
    if (t.empty()) return parts;
    boost::algorithm::split(parts, t, boost::algorithm::is_any_of(","));
    for (auto& p : parts) p = trim(p);
    return parts;
}

class ConfigReader {
public:
    explicit ConfigReader(const boost::property_tree::ptree& tree) : tree_(tree) {}

    std::string raw(const std::string& section, const std::string& key) const {
        const std::string path = section + "." + key;
        if (auto v = tree_.get_optional<std::string>(boost::property_tree::ptree::path_type(path, '.')))
            return trim(*v);
        for (const KeySpec& k : config_keys())
            if (section == k.section && key == k.key) return k.fallback;
        throw ConfigError("internal: undocumented key " + path);
    }

    double number(const std::string& section, const std::string& key) const {
        return to_double(raw(section, key), section + "." + key);
    }

    int integer(const std::string& section, const std::string& key) const {
        const std::string s = raw(section, key);
        try {
            std::size_t pos = 0;
            const long v = std::stol(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return static_cast<int>(v);
        } catch (const std::exception&) {
            throw ConfigError(section + "." + key + ": expected an integer, got '" + s + "'");
        }
    }

    bool boolean(const std::string& section, const std::string& key) const {
        const std::string s = boost::algorithm::to_lower_copy(raw(section, key));
        if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
        if (s == "false" || s == "0" || s == "no" || s == "off") return false;
        throw ConfigError(section + "." + key + ": expected a boolean, got '" + s + "'");
    }

    std::vector<double> numbers(const std::string& section, const std::string& key) const {
        std::vector<double> out;
        for (const auto& p : split_list(raw(section, key))) out.push_back(to_double(p, section + "." + key));
        return out;
    }

    static double to_double(const std::string& s, const std::string& what) {
        try {
            std::size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw ConfigError(what + ": expected a number, got '" + s + "'");
        }
    }

private:
    const boost::property_tree::ptree& tree_;
};

inline std::string join(const std::vector<double>& v) {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    return os.str();
}

}  // namespace detail

/// Parses a configuration text. Every unknown section or key is listed in one
/// ConfigError.
inline ExperimentConfig parse_config(std::istream& in) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("config syntax: ") + e.what());
    }
    std::vector<std::string> unknown;
    std::set<std::string> sections;
    for (const KeySpec& k : config_keys()) sections.insert(k.section);
    for (const auto& [section, body] : tree) {
        if (!sections.count(section)) {
            unknown.push_back(body.empty() ? section : "[" + section + "]");
            continue;
        }
        for (const auto& [key, value] : body) {
            (void)value;
            const bool known = std::any_of(config_keys().begin(), config_keys().end(), [&](const KeySpec& k) {
                return section == k.section && key == k.key;
            });
            if (!known) unknown.push_back(section + "." + key);
        }
    }
    if (!unknown.empty()) throw ConfigError("unknown configuration keys: " + boost::algorithm::join(unknown, ", "));

    const detail::ConfigReader r(tree);
    ExperimentConfig c;

    FieldSpec& f = c.field;
    f.kind = r.raw("field", "kind");
    f.dim = r.integer("field", "dim");
    f.U = r.number("field", "U");
    f.kappa = r.number("field", "kappa");
    f.slope = r.number("field", "slope");
    f.value = r.numbers("field", "value");
    f.shock_amplitude = r.number("field", "shock_amplitude");
    f.amplitudes = r.numbers("field", "amplitudes");
    f.amplitude_factor = r.number("field", "amplitude_factor");
    f.growth = r.numbers("field", "growth");
    static const std::set<std::string> kinds{"prototype", "linear", "constant", "shock", "annular"};
    if (!kinds.count(f.kind)) throw ConfigError("field.kind: unknown kind '" + f.kind + "'");
    if (f.dim < 1 || f.dim > kMaxDim) throw ConfigError("field.dim must lie in [1, 3]");
    if (!f.growth.empty() && f.growth.size() != 5) throw ConfigError("field.growth needs five numbers K0,K1,K2,alpha,beta");
    if (f.kind == "constant" && static_cast<int>(f.value.size()) != f.dim)
        throw ConfigError("field.value needs " + std::to_string(f.dim) + " components");
    if (f.kind == "shock" && f.dim != 1) throw ConfigError("field.kind = shock is one-dimensional");

    FlowSection& fl = c.flow;
    fl.x_min = r.number("flow", "x_min");
    fl.times = r.numbers("flow", "times");
    fl.points = r.numbers("flow", "points");
    fl.steps = r.integer("flow", "steps");
    fl.grading = r.number("flow", "grading");
    fl.recursion_m = r.integer("flow", "recursion_m");

    ZonesSection& z = c.zones;
    const auto radii = r.numbers("zones", "radii");
    if (!radii.empty()) {
        ZoneLayout L;
        L.radii = radii;
        L.kappa = f.kappa;
        L.thin_C = r.number("zones", "thin_C");
        L.fat_eps = r.number("zones", "fat_eps");
        const LayoutReport rep = validate_layout(L);
        if (!rep.pass)
            throw ConfigError("zones.radii: " + rep.first_violation + " (radii pair R_" +
                              std::to_string(rep.lower_index) + " = " +
                              detail::join({L.R(rep.lower_index)}) + ", R_" + std::to_string(rep.upper_index) +
                              " = " + detail::join({L.R(rep.upper_index)}) + ")");
        z.subdivide = r.boolean("zones", "subdivide");
        z.layout = z.subdivide ? subdivide(L) : L;
    }
    const int zone_index = r.integer("zones", "index");
    if (zone_index < 1) throw ConfigError("zones.index must be >= 1");
    z.index = static_cast<std::size_t>(zone_index);
    z.t = r.number("zones", "t");
    z.starts = r.integer("zones", "starts");
    z.steps = r.integer("zones", "steps");
    z.paths = r.integer("zones", "paths");

    IterationConfig& it = c.iteration;
    it.m_max = r.integer("iteration", "m_max");
    it.mc_samples = r.integer("iteration", "samples");
    it.sde_steps = r.integer("iteration", "sde_steps");
    const double box = r.number("iteration", "box");
    const int nodes = r.integer("iteration", "nodes");
    if (!(box > 0.0) || nodes < 2) throw ConfigError("iteration.box must be > 0 and iteration.nodes >= 2");
    it.grid = SpatialGrid::box(f.dim, box, nodes);
    it.slices = r.numbers("iteration", "slices");
    it.viscous = r.boolean("iteration", "viscous");
    it.seed = static_cast<std::uint64_t>(r.integer("iteration", "seed"));
    it.antithetic = r.boolean("iteration", "antithetic");
    it.gradients = r.boolean("iteration", "gradients");
    it.gamma = r.number("iteration", "gamma");
    it.ode_steps_per_unit = r.integer("iteration", "ode_steps_per_unit");
    const std::string policy = r.raw("iteration", "policy");
    if (policy == "envelope") it.policy = Extrapolation::Envelope;
    else if (policy == "clamp") it.policy = Extrapolation::Clamp;
    else if (policy == "error") it.policy = Extrapolation::Error;
    else throw ConfigError("iteration.policy: unknown policy '" + policy + "'");
    it.blowup_factor = r.number("iteration", "blowup_factor");
    it.jobs = r.integer("iteration", "jobs");
    c.seed = it.seed;
    try {
        it.validate();
    } catch (const ParameterError& e) {
        throw ConfigError(std::string("[iteration] ") + e.what());
    }

    BoundConstants& k = c.constants;
    k.C = r.number("constants", "C");
    k.C_kappa = r.number("constants", "C_kappa");
    k.kappa_prime = r.number("constants", "kappa_prime");
    k.C_abn = r.number("constants", "C_abn");
    k.c_tail = r.number("constants", "c_tail");
    k.core_threshold_factor = r.number("constants", "core_threshold_factor");
    k.validate();

    ChecksSection& ch = c.checks;
    for (const auto& name : detail::split_list(r.raw("checks", "enabled"))) {
        if (std::find(check_names().begin(), check_names().end(), name) == check_names().end())
            throw ConfigError("checks.enabled: unknown check '" + name + "'");
        ch.enabled.push_back(name);
    }
    Thresholds& th = ch.thresholds;
    th.violation = r.number("checks", "violation");
    th.stability = r.number("checks", "stability");
    th.slope_slack = r.number("checks", "slope_slack");
    th.theta = r.number("checks", "theta");
    th.r2_min = r.number("checks", "r2_min");
    th.moment_split = r.number("checks", "moment_split");
    th.agreement = r.number("checks", "agreement");
    th.validate();
    ch.radius = r.number("checks", "radius");
    ch.displacement_paths = r.integer("checks", "displacement_paths");
    ch.displacement_steps = r.integer("checks", "displacement_steps");
    ch.displacement_times = r.numbers("checks", "displacement_times");
    ch.displacement_starts = r.numbers("checks", "displacement_starts");
    const std::string form = r.raw("checks", "abnormal_form");
    if (form != "kappa_prime" && form != "kappa") throw ConfigError("checks.abnormal_form: unknown form '" + form + "'");
    ch.abnormal_kappa_prime = form == "kappa_prime";
    ch.tail_paths = r.integer("checks", "tail_paths");
    ch.tail_steps = r.integer("checks", "tail_steps");
    ch.tail_t = r.number("checks", "tail_t");
    ch.lemma_samples = r.integer("checks", "lemma_samples");
    ch.penalized_m = r.integer("checks", "penalized_m");
    ch.penalized_levels.clear();
    for (double v : r.numbers("checks", "penalized_levels")) ch.penalized_levels.push_back(static_cast<int>(v));
    ch.oracle_tolerance = r.number("checks", "oracle_tolerance");
    ch.oracle_radius = r.number("checks", "oracle_radius");
    ch.oracle_floor = r.number("checks", "oracle_floor");

    // Referential completeness.
    if (ch.has("safe_zones") && !z.layout) throw ConfigError("checks.enabled lists safe_zones but [zones] radii is empty");
    if (f.kind == "annular" && !z.layout) throw ConfigError("field.kind = annular needs [zones] radii");
    if ((ch.has("uniform_bounds") || ch.has("gradient_consistency")) && !it.viscous)
        throw ConfigError("uniform_bounds and gradient_consistency need iteration.viscous = true");
    if ((ch.has("displacement") || ch.has("penalized")) && !it.viscous)
        throw ConfigError("displacement and penalized need iteration.viscous = true");

    // Sections that determine the stored fields.
    std::ostringstream fp;
    for (const char* s : {"field", "zones", "iteration"})
        for (const KeySpec& key : config_keys())
            if (std::string(key.section) == s && std::string(key.key) != "jobs")
                fp << s << "." << key.key << "=" << r.raw(s, key.key) << "\n";
    c.field_fingerprint = fp.str();
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse_config(in);
}

inline ExperimentConfig default_config() {
    std::istringstream empty;
    return parse_config(empty);
}

/// The configured initial field.
inline VelocityField build_field(const ExperimentConfig& c) {
    const FieldSpec& f = c.field;
    std::optional<GrowthConstants> g;
    if (!f.growth.empty()) g = GrowthConstants{f.growth[0], f.growth[1], f.growth[2], f.growth[3], f.growth[4]};
    try {
        if (f.kind == "prototype") {
            if (g) return make_prototype(f.dim, f.U, f.kappa, Mat::identity(f.dim), g);
            return make_prototype(f.dim, f.U, f.kappa);
        }
        if (f.kind == "linear") {
            Mat A = Mat::identity(f.dim) * f.slope;
            if (f.dim == 1 && !g) return make_linear_1d(f.slope);
            return make_linear(A, f.U, f.kappa, g);
        }
        if (f.kind == "constant") {
            Vec v(f.dim);
            for (int i = 0; i < f.dim; ++i) v[i] = f.value[i];
            return make_constant(v, f.U, f.kappa, g);
        }
        if (f.kind == "shock") return make_shock_1d(f.shock_amplitude);
        // annular
        const ZoneLayout& L = *c.zones.layout;
        const VelocityField base = make_prototype(f.dim, f.U, f.kappa);
        std::vector<double> amps = f.amplitudes;
        if (amps.empty() && f.amplitude_factor != 0.0)
            for (std::size_t i = 0; i < L.dangerous_count(); ++i) {
                Vec mid(f.dim);
                mid[0] = 0.5 * (L.R(2 * i + 1) + L.R(2 * i + 2));
                amps.push_back(f.amplitude_factor * base(mid).norm());
            }
        return make_annular(base, L, amps, g ? *g : base.constants());
    } catch (const AmplitudeError& e) {
        throw ConfigError(std::string("[field] ") + e.what());
    } catch (const ValidationError& e) {
        throw ConfigError(std::string("[field] ") + e.what());
    } catch (const ParameterError& e) {
        throw ConfigError(std::string("[field] ") + e.what());
    }
}

}  // namespace fkb
