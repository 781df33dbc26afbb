#pragma once

#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "brownian.hpp"
#include "linalg.hpp"
#include "scalar_flows.hpp"

namespace fkb {

/// One characteristic. Y is the noise-removed position; the physical position
/// is X(s) = Y(s) + B(s).
struct PathRecord {
    double t = 0.0;
    Vec x;
    std::vector<double> times;
    std::vector<Vec> Y;
    /// Noise positions at the sample times; empty for deterministic runs.
    std::vector<Vec> B;
    double m_t = 1.0;
    Regime regime = Regime::NormalConvective;
    double max_displacement = 0.0;

    bool has_noise() const { return !B.empty(); }
    std::size_t size() const { return times.size(); }

    Vec X(std::size_t k) const { return has_noise() ? Y[k] + B[k] : Y[k]; }
    Vec end_Y() const { return Y.back(); }
    Vec end_X() const { return X(size() - 1); }

    void finalize(const std::optional<FlowParams>& flow) {
        max_displacement = 0.0;
        for (const Vec& y : Y) max_displacement = std::max(max_displacement, (y - x).norm());
        double sup = 0.0;
        for (const Vec& b : B) sup = std::max(sup, b.norm());
        m_t = t > 0.0 ? 1.0 + sup / std::sqrt(t) : 1.0;
        if (flow) regime = classify_regime(*flow, t, x.norm(), m_t * std::sqrt(t));
    }

    /// Columns: s, Y components, B components, running M.
    void write_csv(std::ostream& os) const {
        const int d = x.dim;
        os << "s";
        for (int i = 0; i < d; ++i) os << ",Y" << i;
        for (int i = 0; i < d; ++i) os << ",B" << i;
        os << ",M\n";
        os.precision(17);
        double sup = 0.0;
        for (std::size_t k = 0; k < size(); ++k) {
            os << times[k];
            for (int i = 0; i < d; ++i) os << ',' << Y[k][i];
            const Vec b = has_noise() ? B[k] : Vec(d);
            for (int i = 0; i < d; ++i) os << ',' << b[i];
            sup = std::max(sup, b.norm());
            const double running = times[k] > 0.0 ? 1.0 + sup / std::sqrt(times[k]) : 1.0;
            os << ',' << running << '\n';
        }
    }

    void write_csv(const std::string& path) const {
        std::ofstream f(path);
        if (!f) throw ParameterError("cannot open " + path + " for writing");
        write_csv(f);
    }
};

}  // namespace fkb
