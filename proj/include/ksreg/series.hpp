#pragma once

// Dense truncated multivariate power series over a scalar type T (double or
// a forward-mode jet). Coefficients are stored by graded-lexicographic rank:
// all monomials of degree 0, then degree 1, ..., and inside a degree in
// descending lexicographic order of the exponent tuple. The rank of a
// monomial does not depend on the truncation order, so a series of order N is
// a prefix of the same series at any higher order.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ksreg/dual.hpp"
#include "ksreg/errors.hpp"

namespace ksreg {

inline constexpr int kMaxOrder = 16;

using Exponents = std::array<std::uint8_t, 4>;

class MonomialLayout {
public:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    struct Pair {
        std::uint32_t a;
        std::uint32_t b;
        std::uint32_t out;
    };

    // Shared layout for 2 or 4 variables, covering every order up to kMaxOrder.
    static const MonomialLayout& get(int nvars);

    int nvars() const { return nvars_; }
    // Number of monomials of total degree <= order.
    std::size_t count(int order) const { return degree_begin_[static_cast<std::size_t>(order) + 1]; }
    std::size_t degree_begin(int d) const { return degree_begin_[static_cast<std::size_t>(d)]; }
    int degree(std::size_t idx) const { return degree_[idx]; }
    const Exponents& exponents(std::size_t idx) const { return exps_[idx]; }
    std::size_t index(const Exponents& e) const;

    // alpha - e_var, or npos when the exponent of var is zero.
    std::size_t lower(std::size_t idx, int var) const { return lower_[idx * 4 + static_cast<std::size_t>(var)]; }
    // alpha + e_var, or npos past kMaxOrder.
    std::size_t raise(std::size_t idx, int var) const { return raise_[idx * 4 + static_cast<std::size_t>(var)]; }
    // Index of alpha + beta; caller guarantees the degree is within kMaxOrder.
    std::size_t sum_index(std::size_t a, std::size_t b) const;

    // Ordered pairs (a, b) with deg(a) + deg(b) <= order, sorted by output degree.
    std::span<const Pair> pairs(int order) const;
    std::span<const Pair> pairs_of_degree(int d) const;

private:
    explicit MonomialLayout(int nvars);

    int nvars_;
    std::vector<Exponents> exps_;
    std::vector<int> degree_;
    std::vector<std::size_t> degree_begin_;
    std::vector<std::uint32_t> lut_;
    std::vector<std::size_t> lower_;
    std::vector<std::size_t> raise_;
    std::vector<Pair> pairs_;
    std::vector<std::size_t> pair_begin_;
};

template <class T>
class MultiSeries {
public:
    MultiSeries() = default;
    MultiSeries(int nvars, int order) : nvars_(nvars), order_(order) {
        if (nvars != 2 && nvars != 4) throw DimensionError("MultiSeries: nvars must be 2 or 4");
        if (order < 0 || order > kMaxOrder) throw DimensionError("MultiSeries: order out of range [0, 16]");
        c_.assign(layout().count(order), T(0.0));
    }

    static MultiSeries constant(int nvars, int order, const T& c) {
        MultiSeries s(nvars, order);
        s.c_[0] = c;
        return s;
    }
    static MultiSeries variable(int nvars, int order, int var, const T& scale = T(1.0)) {
        MultiSeries s(nvars, order);
        if (var < 0 || var >= nvars) throw DimensionError("MultiSeries::variable: bad variable index");
        if (order >= 1) s.c_[1 + static_cast<std::size_t>(var)] = scale;
        return s;
    }

    int nvars() const { return nvars_; }
    int order() const { return order_; }
    std::size_t size() const { return c_.size(); }
    bool truncated() const { return truncated_; }
    void set_truncated(bool t) { truncated_ = t; }
    const MonomialLayout& layout() const { return MonomialLayout::get(nvars_); }

    const T& operator[](std::size_t i) const { return c_[i]; }
    T& operator[](std::size_t i) { return c_[i]; }
    std::span<const T> coeffs() const { return c_; }
    std::span<T> coeffs() { return c_; }

    T coeff(const Exponents& e) const {
        const std::size_t i = layout().index(e);
        return i < c_.size() ? c_[i] : T(0.0);
    }
    void set_coeff(const Exponents& e, const T& v) {
        const std::size_t i = layout().index(e);
        if (i >= c_.size()) throw DimensionError("MultiSeries::set_coeff: degree exceeds truncation order");
        c_[i] = v;
    }

    MultiSeries& operator+=(const MultiSeries& o) {
        check_compatible(o);
        for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
        return *this;
    }
    MultiSeries& operator-=(const MultiSeries& o) {
        check_compatible(o);
        for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
        return *this;
    }
    MultiSeries& operator*=(const T& s) {
        for (auto& x : c_) x *= s;
        return *this;
    }
    MultiSeries& add_constant(const T& s) {
        c_[0] += s;
        return *this;
    }

    void check_compatible(const MultiSeries& o) const {
        if (o.nvars_ != nvars_ || o.order_ != order_)
            throw DimensionError("MultiSeries: mismatched nvars/order (" + std::to_string(nvars_) + "," +
                                 std::to_string(order_) + ") vs (" + std::to_string(o.nvars_) + "," +
                                 std::to_string(o.order_) + ")");
    }

    void flush() {
        for (auto& x : c_) flush_tiny(x);
    }

    std::size_t nonzeros() const {
        std::size_t n = 0;
        for (const auto& x : c_)
            if (magnitude(x) != 0.0) ++n;
        return n;
    }

private:
    int nvars_ = 4;
    int order_ = 0;
    bool truncated_ = false;
    std::vector<T> c_;
};

template <class T>
MultiSeries<T> operator+(MultiSeries<T> a, const MultiSeries<T>& b) { return a += b; }
template <class T>
MultiSeries<T> operator-(MultiSeries<T> a, const MultiSeries<T>& b) { return a -= b; }
template <class T>
MultiSeries<T> operator*(MultiSeries<T> a, const T& s) { return a *= s; }
template <class T>
MultiSeries<T> operator-(MultiSeries<T> a) { return a *= T(-1.0); }

namespace detail {

// Sparse operands go through the exponent lookup; dense ones through the pair table.
inline bool prefer_sparse(std::size_t nnz, std::size_t size) { return nnz * 6 < size; }

template <class T>
std::vector<std::size_t> nonzero_indices(const MultiSeries<T>& a) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (magnitude(a[i]) != 0.0) idx.push_back(i);
    return idx;
}

}  // namespace detail

// Truncated Cauchy product.
template <class T>
MultiSeries<T> mul(const MultiSeries<T>& a, const MultiSeries<T>& b) {
    a.check_compatible(b);
    const auto& lay = a.layout();
    const int order = a.order();
    MultiSeries<T> out(a.nvars(), order);
    const auto nz_a = detail::nonzero_indices(a);
    const auto nz_b = detail::nonzero_indices(b);
    const bool sparse = detail::prefer_sparse(std::min(nz_a.size(), nz_b.size()), a.size());
    if (sparse) {
        const bool a_small = nz_a.size() <= nz_b.size();
        const auto& small = a_small ? nz_a : nz_b;
        const auto& big = a_small ? nz_b : nz_a;
        const MultiSeries<T>& s = a_small ? a : b;
        const MultiSeries<T>& g = a_small ? b : a;
        for (std::size_t i : small) {
            const int di = lay.degree(i);
            for (std::size_t j : big) {
                if (lay.degree(j) + di > order) break;  // big is sorted by index, hence by degree
                out[lay.sum_index(i, j)] += s[i] * g[j];
            }
        }
    } else {
        for (const auto& p : lay.pairs(order)) out[p.out] += a[p.a] * b[p.b];
    }
    out.flush();
    return out;
}

template <class T>
MultiSeries<T> operator*(const MultiSeries<T>& a, const MultiSeries<T>& b) {
    return mul(a, b);
}

enum class ArithOp { Add, Sub, Mul };

template <class T>
MultiSeries<T> arith(const MultiSeries<T>& a, const MultiSeries<T>& b, ArithOp op, const T& scale = T(1.0)) {
    a.check_compatible(b);
    MultiSeries<T> out = op == ArithOp::Add ? a + b : op == ArithOp::Sub ? a - b : mul(a, b);
    out *= scale;
    out.flush();
    return out;
}

// a^r by the homogeneous recurrence a * D(g) = r * g * D(a), D the Euler
// degree operator. Requires a(0) > 0.
template <class T>
MultiSeries<T> pow_real(const MultiSeries<T>& a, double r) {
    const double a0 = value_of(a[0]);
    if (!(a0 > 0.0)) throw DomainError("pow_real: constant term must be positive, got " + std::to_string(a0));
    const auto& lay = a.layout();
    const int order = a.order();
    MultiSeries<T> g(a.nvars(), order);
    using std::pow;
    g[0] = pow(a[0], r);
    if (r == 0.0) {
        g[0] = T(1.0);
        return g;
    }
    const auto nz_a = detail::nonzero_indices(a);
    const bool sparse = detail::prefer_sparse(nz_a.size(), a.size());
    for (int k = 1; k <= order; ++k) {
        const std::size_t lo = lay.degree_begin(k);
        const std::size_t hi = lay.degree_begin(k + 1);
        if (sparse) {
            for (std::size_t i : nz_a) {
                const int j = lay.degree(i);
                if (j == 0) continue;
                if (j > k) break;
                const double w = r * j - (k - j);
                const std::size_t mlo = lay.degree_begin(k - j);
                const std::size_t mhi = lay.degree_begin(k - j + 1);
                const T aw = a[i] * w;
                for (std::size_t m = mlo; m < mhi; ++m) g[lay.sum_index(i, m)] += aw * g[m];
            }
        } else {
            for (const auto& p : lay.pairs_of_degree(k)) {
                const int j = lay.degree(p.a);
                if (j == 0) continue;
                g[p.out] += (a[p.a] * g[p.b]) * (r * j - (k - j));
            }
        }
        const T denom = a[0] * static_cast<double>(k);
        for (std::size_t i = lo; i < hi; ++i) g[i] = g[i] / denom;
    }
    g.flush();
    return g;
}

// Term-wise derivative; the top-degree band of the result is zero.
template <class T>
MultiSeries<T> partial(const MultiSeries<T>& a, int var) {
    if (var < 0 || var >= a.nvars()) throw DimensionError("partial: bad variable index");
    const auto& lay = a.layout();
    MultiSeries<T> out(a.nvars(), a.order());
    for (std::size_t i = 1; i < a.size(); ++i) {
        const auto e = lay.exponents(i)[static_cast<std::size_t>(var)];
        if (e == 0) continue;
        out[lay.lower(i, var)] += a[i] * static_cast<double>(e);
    }
    return out;
}

// Term-wise antiderivative vanishing on {u_var = 0}. Top-degree content that
// would move past the truncation order sets the truncation flag.
template <class T>
MultiSeries<T> antiderivative(const MultiSeries<T>& a, int var) {
    if (var < 0 || var >= a.nvars()) throw DimensionError("antiderivative: bad variable index");
    const auto& lay = a.layout();
    MultiSeries<T> out(a.nvars(), a.order());
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (magnitude(a[i]) == 0.0) continue;
        if (lay.degree(i) >= a.order()) {
            out.set_truncated(true);
            continue;
        }
        const auto e = lay.exponents(i)[static_cast<std::size_t>(var)];
        out[lay.raise(i, var)] = a[i] / static_cast<double>(e + 1);
    }
    return out;
}

// Values of every monomial up to `order` at `point`, in layout order.
std::vector<double> monomial_values(int nvars, int order, std::span<const double> point);

template <class T>
T eval(const MultiSeries<T>& a, std::span<const double> point) {
    if (point.size() != static_cast<std::size_t>(a.nvars())) throw DimensionError("eval: point length mismatch");
    const auto mono = monomial_values(a.nvars(), a.order(), point);
    T acc(0.0);
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * mono[i];
    return acc;
}

template <class T>
T eval_with(const MultiSeries<T>& a, std::span<const double> mono) {
    T acc(0.0);
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * mono[i];
    return acc;
}

template <class T>
using SquareMatrix = std::array<std::array<T, 4>, 4>;

// Composition b(u) = a(scale * M^T u), exact for polynomial content of degree <= order.
template <class T>
MultiSeries<T> linear_substitute(const MultiSeries<T>& a, const SquareMatrix<T>& m, const T& scale) {
    const int nv = a.nvars();
    const int order = a.order();
    const auto& lay = a.layout();
    MultiSeries<T> out(nv, order);
    out[0] = a[0];
    if (order == 0) return out;

    // Linear form for each source variable: l_i(u) = scale * sum_j M[j][i] u_j.
    std::array<std::array<T, 4>, 4> lin{};
    for (int i = 0; i < nv; ++i)
        for (int j = 0; j < nv; ++j) lin[i][j] = scale * m[j][i];

    // prev[k] holds the image of the k-th monomial of degree d-1 as a
    // homogeneous polynomial of degree d-1 (dense over that degree band).
    std::vector<std::vector<T>> prev{std::vector<T>{T(1.0)}};
    for (int d = 1; d <= order; ++d) {
        const std::size_t lo = lay.degree_begin(d);
        const std::size_t hi = lay.degree_begin(d + 1);
        const std::size_t plo = lay.degree_begin(d - 1);
        std::vector<std::vector<T>> cur(hi - lo, std::vector<T>(hi - lo, T(0.0)));
        bool any_needed = false;
        for (std::size_t idx = lo; idx < hi; ++idx) {
            const auto& e = lay.exponents(idx);
            int v = 0;
            while (e[static_cast<std::size_t>(v)] == 0) ++v;
            const std::size_t parent = lay.lower(idx, v) - plo;
            auto& poly = cur[idx - lo];
            const auto& pp = prev[parent];
            for (std::size_t k = 0; k < pp.size(); ++k) {
                if (magnitude(pp[k]) == 0.0) continue;
                for (int w = 0; w < nv; ++w) {
                    if (magnitude(lin[v][w]) == 0.0) continue;
                    poly[lay.raise(plo + k, w) - lo] += pp[k] * lin[v][w];
                }
            }
            if (magnitude(a[idx]) != 0.0) {
                any_needed = true;
                for (std::size_t k = 0; k < poly.size(); ++k) out[lo + k] += a[idx] * poly[k];
            }
        }
        (void)any_needed;
        prev = std::move(cur);
    }
    out.flush();
    return out;
}

// Change truncation order: extension pads with zeros, reduction drops terms.
template <class T>
MultiSeries<T> with_order(const MultiSeries<T>& a, int order) {
    MultiSeries<T> out(a.nvars(), order);
    const std::size_t n = std::min(out.size(), a.size());
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i];
    return out;
}

// Real-valued copy of the value part (or the identity for double).
inline MultiSeries<double> values(const MultiSeries<double>& a) { return a; }
template <std::size_t K>
MultiSeries<double> values(const MultiSeries<Dual<K>>& a) {
    MultiSeries<double> out(a.nvars(), a.order());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i].v;
    return out;
}
template <std::size_t K>
MultiSeries<double> derivative_part(const MultiSeries<Dual<K>>& a, std::size_t slot) {
    MultiSeries<double> out(a.nvars(), a.order());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i].d[slot];
    return out;
}
template <class T>
MultiSeries<T> promote(const MultiSeries<double>& a) {
    MultiSeries<T> out(a.nvars(), a.order());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = T(a[i]);
    return out;
}

// Largest |coefficient| (value part) with total degree in [dmin, dmax].
template <class T>
double max_abs_coeff(const MultiSeries<T>& a, int dmin, int dmax) {
    const auto& lay = a.layout();
    double m = 0.0;
    dmax = std::min(dmax, a.order());
    for (int d = std::max(dmin, 0); d <= dmax; ++d)
        for (std::size_t i = lay.degree_begin(d); i < lay.degree_begin(d + 1); ++i)
            m = std::max(m, std::abs(value_of(a[i])));
    return m;
}

}  // namespace ksreg
