#pragma once

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <initializer_list>

#include "errors.hpp"

namespace fkb {

inline constexpr int kMaxDim = 3;

inline void require_dim(int d) {
    if (d < 1 || d > kMaxDim) {
        throw ParameterError("dimension must be in [1, " + std::to_string(kMaxDim) +
                             "], got " + std::to_string(d));
    }
}

/// Point or vector in R^d, d <= kMaxDim. Unused trailing slots stay zero.
struct Vec {
    int dim = 1;
    std::array<double, kMaxDim> c{};

    Vec() = default;
    explicit Vec(int d) : dim(d) { require_dim(d); }
    Vec(std::initializer_list<double> xs) : dim(static_cast<int>(xs.size())) {
        require_dim(dim);
        std::copy(xs.begin(), xs.end(), c.begin());
    }
    static Vec scalar(double x) { return Vec{x}; }
    static Vec filled(int d, double v) {
        Vec out(d);
        for (int i = 0; i < d; ++i) out.c[i] = v;
        return out;
    }

    double& operator[](int i) { return c[i]; }
    double operator[](int i) const { return c[i]; }

    double norm2() const {
        double s = 0.0;
        for (int i = 0; i < dim; ++i) s += c[i] * c[i];
        return s;
    }
    double norm() const { return std::sqrt(norm2()); }

    Vec& operator+=(const Vec& o) {
        for (int i = 0; i < dim; ++i) c[i] += o.c[i];
        return *this;
    }
    Vec& operator-=(const Vec& o) {
        for (int i = 0; i < dim; ++i) c[i] -= o.c[i];
        return *this;
    }
    Vec& operator*=(double s) {
        for (int i = 0; i < dim; ++i) c[i] *= s;
        return *this;
    }
    friend Vec operator+(Vec a, const Vec& b) { return a += b; }
    friend Vec operator-(Vec a, const Vec& b) { return a -= b; }
    friend Vec operator*(Vec a, double s) { return a *= s; }
    friend Vec operator*(double s, Vec a) { return a *= s; }
    friend Vec operator-(Vec a) { return a *= -1.0; }
    friend bool operator==(const Vec& a, const Vec& b) {
        if (a.dim != b.dim) return false;
        for (int i = 0; i < a.dim; ++i)
            if (a.c[i] != b.c[i]) return false;
        return true;
    }
};

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (int i = 0; i < a.dim; ++i) s += a.c[i] * b.c[i];
    return s;
}

/// Square d x d matrix, row-major. For velocity gradients the convention is
/// G(i, j) = d_i u_j.
struct Mat {
    int dim = 1;
    std::array<double, kMaxDim * kMaxDim> a{};

    Mat() = default;
    explicit Mat(int d) : dim(d) { require_dim(d); }
    static Mat identity(int d) {
        Mat m(d);
        for (int i = 0; i < d; ++i) m(i, i) = 1.0;
        return m;
    }
    static Mat diag(const Vec& v) {
        Mat m(v.dim);
        for (int i = 0; i < v.dim; ++i) m(i, i) = v[i];
        return m;
    }

    double& operator()(int i, int j) { return a[i * kMaxDim + j]; }
    double operator()(int i, int j) const { return a[i * kMaxDim + j]; }

    Mat transposed() const {
        Mat t(dim);
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) t(i, j) = (*this)(j, i);
        return t;
    }
    double frobenius() const {
        double s = 0.0;
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) s += (*this)(i, j) * (*this)(i, j);
        return std::sqrt(s);
    }
    double max_abs() const {
        double s = 0.0;
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) s = std::max(s, std::abs((*this)(i, j)));
        return s;
    }

    Mat& operator+=(const Mat& o) {
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) (*this)(i, j) += o(i, j);
        return *this;
    }
    Mat& operator-=(const Mat& o) {
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) (*this)(i, j) -= o(i, j);
        return *this;
    }
    Mat& operator*=(double s) {
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) (*this)(i, j) *= s;
        return *this;
    }
    friend Mat operator+(Mat x, const Mat& y) { return x += y; }
    friend Mat operator-(Mat x, const Mat& y) { return x -= y; }
    friend Mat operator*(Mat x, double s) { return x *= s; }
    friend Mat operator*(double s, Mat x) { return x *= s; }

    friend Mat operator*(const Mat& x, const Mat& y) {
        Mat out(x.dim);
        for (int i = 0; i < x.dim; ++i)
            for (int k = 0; k < x.dim; ++k) {
                const double xik = x(i, k);
                for (int j = 0; j < x.dim; ++j) out(i, j) += xik * y(k, j);
            }
        return out;
    }
    friend Vec operator*(const Mat& x, const Vec& v) {
        Vec out(x.dim);
        for (int i = 0; i < x.dim; ++i)
            for (int j = 0; j < x.dim; ++j) out[i] += x(i, j) * v[j];
        return out;
    }
};

/// Third-order tensor H(i, j, k) = d_i d_j u_k.
struct Tensor3 {
    int dim = 1;
    std::array<double, kMaxDim * kMaxDim * kMaxDim> a{};

    Tensor3() = default;
    explicit Tensor3(int d) : dim(d) { require_dim(d); }
    double& operator()(int i, int j, int k) { return a[(i * kMaxDim + j) * kMaxDim + k]; }
    double operator()(int i, int j, int k) const { return a[(i * kMaxDim + j) * kMaxDim + k]; }
    double frobenius() const {
        double s = 0.0;
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j)
                for (int k = 0; k < dim; ++k) s += (*this)(i, j, k) * (*this)(i, j, k);
        return std::sqrt(s);
    }
};

/// x^p with the base clamped away from zero; fractional powers of tiny
/// negative roundoff would otherwise produce NaN.
inline double safe_pow(double base, double p) {
    return std::pow(std::max(base, 1e-300), p);
}

/// <t> = max(1, t).
inline double bracket(double t) { return std::max(1.0, t); }

}  // namespace fkb
