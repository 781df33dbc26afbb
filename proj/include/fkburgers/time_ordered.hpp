#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"

namespace fkb {

/// Largest singular value by power iteration on M^T M (d <= 3).
inline double spectral_norm(const Mat& M) {
    const int d = M.dim;
    const Mat A = M.transposed() * M;
    Vec v = Vec::filled(d, 1.0);
    for (int i = 0; i < d; ++i) v[i] += 0.1 * i;
    double lambda = 0.0;
    for (int it = 0; it < 200; ++it) {
        Vec w = A * v;
        const double n = w.norm();
        if (n == 0.0) return 0.0;
        w *= 1.0 / n;
        if (std::abs(n - lambda) <= 1e-15 * n) {
            lambda = n;
            break;
        }
        lambda = n;
        v = w;
    }
    return std::sqrt(lambda);
}

inline constexpr double kBlowupLog = 50.0;

struct OrderedExpResult {
    Mat M;
    /// Integral of the Frobenius norm of the integrand (Simpson on the stages).
    double integral_norm = 0.0;
};

/// Product integral of dM/ds = B(s) M, M(0) = I over `steps` equal steps of
/// [0, t] with classical RK4. The integrand is queried as B(step, frac) with
/// frac in {0, 1/2, 1}, so piecewise data can be aligned with step edges.
/// Later times multiply from the left.
inline OrderedExpResult time_ordered_exp(const std::function<Mat(int, double)>& B, int dim, int steps,
                                         double t) {
    require_dim(dim);
    if (steps < 1) throw ParameterError("time_ordered_exp: at least one step is required");
    const double h = t / steps;
    OrderedExpResult res{Mat::identity(dim), 0.0};
    Mat& M = res.M;
    for (int k = 0; k < steps; ++k) {
        const Mat B0 = B(k, 0.0), Bh = B(k, 0.5), B1 = B(k, 1.0);
        const Mat k1 = B0 * M;
        const Mat k2 = Bh * (M + k1 * (h / 2));
        const Mat k3 = Bh * (M + k2 * (h / 2));
        const Mat k4 = B1 * (M + k3 * h);
        M += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        res.integral_norm += h / 6.0 * (B0.frobenius() + 4.0 * Bh.frobenius() + B1.frobenius());
        if (!(M.max_abs() < std::exp(kBlowupLog)))
            throw BlowupError("time_ordered_exp: matrix norm exceeded e^50 at s = " +
                              std::to_string((k + 1) * h));
    }
    const double norm = spectral_norm(M);
    const double cap = std::exp(res.integral_norm) * (1.0 + 1e-6);
    if (norm > cap)
        throw BlowupError("time_ordered_exp: |M| = " + std::to_string(norm) +
                          " exceeds exp(int |B|) = " + std::to_string(cap));
    return res;
}

/// Integrand given by samples at the step nodes s_k = k t / n (n + 1 of them),
/// linearly interpolated inside each step.
inline OrderedExpResult time_ordered_exp(const std::vector<Mat>& samples, double t) {
    if (samples.empty()) throw ParameterError("time_ordered_exp: at least one sample is required");
    const int dim = samples.front().dim;
    if (samples.size() == 1) {
        return time_ordered_exp([&](int, double) { return samples[0]; }, dim, 1, t);
    }
    const int steps = static_cast<int>(samples.size()) - 1;
    return time_ordered_exp(
        [&](int k, double f) { return samples[k] * (1.0 - f) + samples[k + 1] * f; }, dim, steps, t);
}

}  // namespace fkb
