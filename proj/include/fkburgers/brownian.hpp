#pragma once

// Brownian paths with per-component variance 2s at time s, matching the
// generator d_t - Laplacian.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"

namespace fkb {

inline constexpr double kNoiseVariance = 2.0;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of an individual path. Depends only on (base, stream, index), never on
/// which worker computes it.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index, std::uint64_t stream = 0) {
    return splitmix64(splitmix64(base ^ splitmix64(stream + 0x51ed27a3ULL)) + index);
}

struct BrownianPath {
    std::uint64_t seed = 0;
    int dim = 1;
    double t = 1.0;
    int steps = 1;
    double variance = kNoiseVariance;
    /// Positions B(s_k), s_k = k t / steps, stored (steps + 1) x dim.
    std::vector<double> values;
    double running_max_abs = 0.0;

    double time(int k) const { return t * k / steps; }
    double step() const { return t / steps; }

    Vec at(int k) const {
        Vec b(dim);
        for (int i = 0; i < dim; ++i) b[i] = values[static_cast<std::size_t>(k) * dim + i];
        return b;
    }

    /// 1 + sup |B_s| / sqrt(t).
    double m_t() const { return 1.0 + running_max_abs / std::sqrt(t); }
};

/// Fills n (steps + 1) x d positions of a variance-`variance` Brownian path
/// started at 0 with horizon t.
inline void fill_brownian(std::uint64_t seed, int d, double t, int steps, double variance,
                          double* out) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sd = std::sqrt(variance * t / steps);
    for (int i = 0; i < d; ++i) out[i] = 0.0;
    for (int k = 1; k <= steps; ++k) {
        for (int i = 0; i < d; ++i) {
            const std::size_t j = static_cast<std::size_t>(k) * d + i;
            out[j] = out[j - d] + sd * normal(rng);
        }
    }
}

inline BrownianPath sample_brownian(std::uint64_t seed, int d, double t, int steps,
                                    double variance = kNoiseVariance) {
    require_dim(d);
    if (steps < 1) throw ParameterError("sample_brownian: steps must be >= 1");
    if (!(t > 0.0)) throw ParameterError("sample_brownian: t must be > 0");
    if (!(variance >= 0.0)) throw ParameterError("sample_brownian: variance must be >= 0");
    BrownianPath path;
    path.seed = seed;
    path.dim = d;
    path.t = t;
    path.steps = steps;
    path.variance = variance;
    path.values.assign(static_cast<std::size_t>(steps + 1) * d, 0.0);
    fill_brownian(seed, d, t, steps, variance, path.values.data());
    for (int k = 0; k <= steps; ++k) path.running_max_abs = std::max(path.running_max_abs, path.at(k).norm());
    return path;
}

/// Unit-horizon paths W shared by every node, slice and iterate (common random
/// numbers). The path for horizon t is sqrt(t) W(s / t). Stored step-major,
/// [k][p][i], so a sweep over paths at fixed step is contiguous.
class NoiseBank {
public:
    NoiseBank() = default;

    NoiseBank(std::uint64_t seed, int dim, int paths, int steps, bool antithetic,
              double variance = kNoiseVariance)
        : seed_(seed), dim_(dim), paths_(paths), steps_(steps), antithetic_(antithetic) {
        require_dim(dim);
        if (paths < 1) throw ParameterError("NoiseBank: paths must be >= 1");
        if (steps < 1) throw ParameterError("NoiseBank: steps must be >= 1");
        if (antithetic && paths % 2 != 0)
            throw ParameterError("NoiseBank: antithetic sampling needs an even path count");
        data_.assign(static_cast<std::size_t>(steps + 1) * paths * dim, 0.0);
        std::vector<double> buf(static_cast<std::size_t>(steps + 1) * dim);
        for (int p = 0; p < paths; ++p) {
            const bool mirror = antithetic && (p % 2 == 1);
            if (!mirror) fill_brownian(derive_seed(seed, p / (antithetic ? 2 : 1)), dim, 1.0, steps,
                                       variance, buf.data());
            const double sign = mirror ? -1.0 : 1.0;
            for (int k = 0; k <= steps; ++k)
                for (int i = 0; i < dim; ++i)
                    data_[index(k, p, i)] = sign * buf[static_cast<std::size_t>(k) * dim + i];
        }
    }

    int dim() const { return dim_; }
    int paths() const { return paths_; }
    int steps() const { return steps_; }
    bool antithetic() const { return antithetic_; }
    std::uint64_t seed() const { return seed_; }

    std::size_t index(int k, int p, int i) const {
        return (static_cast<std::size_t>(k) * paths_ + p) * dim_ + i;
    }
    /// W at step k for all paths, [p][i].
    const double* step_row(int k) const { return data_.data() + index(k, 0, 0); }
    double w(int k, int p, int i) const { return data_[index(k, p, i)]; }

    /// Path p scaled to horizon t, as a standalone record.
    BrownianPath path(int p, double t) const {
        BrownianPath out;
        out.seed = derive_seed(seed_, p / (antithetic_ ? 2 : 1));
        out.dim = dim_;
        out.t = t;
        out.steps = steps_;
        out.values.resize(static_cast<std::size_t>(steps_ + 1) * dim_);
        const double s = std::sqrt(t);
        for (int k = 0; k <= steps_; ++k)
            for (int i = 0; i < dim_; ++i)
                out.values[static_cast<std::size_t>(k) * dim_ + i] = s * w(k, p, i);
        for (int k = 0; k <= steps_; ++k)
            out.running_max_abs = std::max(out.running_max_abs, out.at(k).norm());
        return out;
    }

private:
    std::uint64_t seed_ = 0;
    int dim_ = 1;
    int paths_ = 0;
    int steps_ = 0;
    bool antithetic_ = false;
    std::vector<double> data_;
};

}  // namespace fkb
