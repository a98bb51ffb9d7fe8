#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>

namespace ksreg {

// Forward-mode first-order jet: a value and K directional derivatives.
template <std::size_t K>
struct Dual {
    double v = 0.0;
    std::array<double, K> d{};

    constexpr Dual() = default;
    constexpr Dual(double value) : v(value) {}  // NOLINT: implicit promotion from constants

    static Dual variable(double value, std::size_t slot) {
        Dual r(value);
        r.d[slot] = 1.0;
        return r;
    }

    Dual& operator+=(const Dual& o) {
        v += o.v;
        for (std::size_t k = 0; k < K; ++k) d[k] += o.d[k];
        return *this;
    }
    Dual& operator-=(const Dual& o) {
        v -= o.v;
        for (std::size_t k = 0; k < K; ++k) d[k] -= o.d[k];
        return *this;
    }
    Dual& operator*=(const Dual& o) {
        for (std::size_t k = 0; k < K; ++k) d[k] = d[k] * o.v + v * o.d[k];
        v *= o.v;
        return *this;
    }
    Dual& operator*=(double s) {
        v *= s;
        for (auto& x : d) x *= s;
        return *this;
    }
    Dual& operator/=(const Dual& o) {
        const double inv = 1.0 / o.v;
        v *= inv;
        for (std::size_t k = 0; k < K; ++k) d[k] = (d[k] - v * o.d[k]) * inv;
        return *this;
    }
};

template <std::size_t K>
Dual<K> operator-(Dual<K> a) {
    a.v = -a.v;
    for (auto& x : a.d) x = -x;
    return a;
}
template <std::size_t K>
Dual<K> operator+(Dual<K> a, const Dual<K>& b) { return a += b; }
template <std::size_t K>
Dual<K> operator-(Dual<K> a, const Dual<K>& b) { return a -= b; }
template <std::size_t K>
Dual<K> operator*(Dual<K> a, const Dual<K>& b) { return a *= b; }
template <std::size_t K>
Dual<K> operator/(Dual<K> a, const Dual<K>& b) { return a /= b; }
template <std::size_t K>
Dual<K> operator+(Dual<K> a, double b) { a.v += b; return a; }
template <std::size_t K>
Dual<K> operator+(double b, Dual<K> a) { a.v += b; return a; }
template <std::size_t K>
Dual<K> operator-(Dual<K> a, double b) { a.v -= b; return a; }
template <std::size_t K>
Dual<K> operator-(double b, const Dual<K>& a) { return Dual<K>(b) - a; }
template <std::size_t K>
Dual<K> operator*(Dual<K> a, double s) { return a *= s; }
template <std::size_t K>
Dual<K> operator*(double s, Dual<K> a) { return a *= s; }
template <std::size_t K>
Dual<K> operator/(Dual<K> a, double s) { return a *= (1.0 / s); }
template <std::size_t K>
Dual<K> operator/(double s, const Dual<K>& a) { return Dual<K>(s) / a; }

template <std::size_t K>
Dual<K> pow(const Dual<K>& a, double r) {
    Dual<K> out(std::pow(a.v, r));
    const double slope = r * std::pow(a.v, r - 1.0);
    for (std::size_t k = 0; k < K; ++k) out.d[k] = slope * a.d[k];
    return out;
}
template <std::size_t K>
Dual<K> sqrt(const Dual<K>& a) {
    Dual<K> out(std::sqrt(a.v));
    const double slope = 0.5 / out.v;
    for (std::size_t k = 0; k < K; ++k) out.d[k] = slope * a.d[k];
    return out;
}
template <std::size_t K>
Dual<K> cos(const Dual<K>& a) {
    Dual<K> out(std::cos(a.v));
    const double slope = -std::sin(a.v);
    for (std::size_t k = 0; k < K; ++k) out.d[k] = slope * a.d[k];
    return out;
}
template <std::size_t K>
Dual<K> sin(const Dual<K>& a) {
    Dual<K> out(std::sin(a.v));
    const double slope = std::cos(a.v);
    for (std::size_t k = 0; k < K; ++k) out.d[k] = slope * a.d[k];
    return out;
}

inline double value_of(double x) { return x; }
template <std::size_t K>
double value_of(const Dual<K>& x) { return x.v; }

// Largest magnitude among value and derivative parts.
inline double magnitude(double x) { return std::abs(x); }
template <std::size_t K>
double magnitude(const Dual<K>& x) {
    double m = std::abs(x.v);
    for (double g : x.d) m = std::max(m, std::abs(g));
    return m;
}

inline bool all_finite(double x) { return std::isfinite(x); }
template <std::size_t K>
bool all_finite(const Dual<K>& x) {
    if (!std::isfinite(x.v)) return false;
    for (double g : x.d)
        if (!std::isfinite(g)) return false;
    return true;
}

// Flush subnormal-range values to zero.
inline void flush_tiny(double& x) {
    if (std::abs(x) < 1e-300) x = 0.0;
}
template <std::size_t K>
void flush_tiny(Dual<K>& x) {
    flush_tiny(x.v);
    for (double& g : x.d) flush_tiny(g);
}

}  // namespace ksreg
