#include "ksreg/hjsolver.hpp"

#include <cmath>
#include <string>

#include "ksreg/errors.hpp"

namespace ksreg {

namespace {

using std::cos;
using std::sin;
using std::sqrt;

// Integer-coefficient quadratic forms, built in double and promoted.
Series quadratic(int order, std::initializer_list<std::pair<Exponents, double>> terms) {
    Series s(4, order);
    if (order < 2) return s;
    for (const auto& [e, v] : terms) s.set_coeff(e, v);
    return s;
}

Exponents ex(int a, int b, int c, int d) {
    return {static_cast<std::uint8_t>(a), static_cast<std::uint8_t>(b), static_cast<std::uint8_t>(c),
            static_cast<std::uint8_t>(d)};
}

// pi(u) components and |u|^2.
std::array<Series, 3> pi_series(int order) {
    return {quadratic(order, {{ex(2, 0, 0, 0), 1.0}, {ex(0, 2, 0, 0), -1.0}, {ex(0, 0, 2, 0), -1.0},
                              {ex(0, 0, 0, 2), 1.0}}),
            quadratic(order, {{ex(1, 1, 0, 0), 2.0}, {ex(0, 0, 1, 1), -2.0}}),
            quadratic(order, {{ex(1, 0, 1, 0), 2.0}, {ex(0, 1, 0, 1), 2.0}})};
}

Series norm2_series(int nvars, int order) {
    Series s(nvars, order);
    if (order < 2) return s;
    for (int v = 0; v < nvars; ++v) {
        Exponents e{};
        e[static_cast<std::size_t>(v)] = 2;
        s.set_coeff(e, 1.0);
    }
    return s;
}

// Entry A_{kj}(u) as a linear series.
Series ks_entry(int order, int k, int j) {
    static const int sign[4][4] = {{1, -1, -1, 1}, {1, 1, -1, -1}, {1, 1, 1, 1}, {1, -1, 1, -1}};
    static const int var[4][4] = {{0, 1, 2, 3}, {1, 0, 3, 2}, {2, 3, 0, 1}, {3, 2, 1, 0}};
    return Series::variable(4, order, var[k][j], static_cast<double>(sign[k][j]));
}

template <class T>
struct KsIngredients {
    MultiSeries<T> uu;                // |u|^2
    MultiSeries<T> perp2;             // |omega ^ pi(u)|^2
    MultiSeries<T> pie;               // pi(u) . e
    std::array<MultiSeries<T>, 4> b;  // b_omega(u)
    MultiSeries<T> inv_dist;          // |lambda pi(u) + e|^-1
};

template <class T>
KsIngredients<T> ks_ingredients(int order, const T& lambda, const std::array<T, 3>& w, const std::array<T, 3>& e) {
    const int n = std::max(order, 4);
    const auto pid = pi_series(n);
    std::array<MultiSeries<T>, 3> pi{promote<T>(pid[0]), promote<T>(pid[1]), promote<T>(pid[2])};
    KsIngredients<T> g;
    g.uu = promote<T>(norm2_series(4, n));
    const MultiSeries<T> uu2 = mul(g.uu, g.uu);
    MultiSeries<T> wpi = pi[0] * w[0] + pi[1] * w[1] + pi[2] * w[2];
    g.pie = pi[0] * e[0] + pi[1] * e[1] + pi[2] * e[2];
    const T w2 = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
    g.perp2 = uu2 * w2 - mul(wpi, wpi);

    // (omega x pi, 0) then b_j = 2 sum_k A_kj(u) c_k.
    const std::array<MultiSeries<T>, 3> c{pi[2] * w[1] - pi[1] * w[2], pi[0] * w[2] - pi[2] * w[0],
                                          pi[1] * w[0] - pi[0] * w[1]};
    for (int j = 0; j < 4; ++j) {
        MultiSeries<T> bj(4, n);
        for (int k = 0; k < 3; ++k) bj += mul(promote<T>(ks_entry(n, k, j)), c[static_cast<std::size_t>(k)]);
        g.b[static_cast<std::size_t>(j)] = bj * T(2.0);
    }
    MultiSeries<T> d2 = uu2 * (lambda * lambda) + g.pie * (2.0 * lambda);
    d2.add_constant(T(1.0));
    g.inv_dist = pow_real(d2, -0.5);

    if (n != order) {
        g.uu = with_order(g.uu, order);
        g.perp2 = with_order(g.perp2, order);
        g.pie = with_order(g.pie, order);
        for (auto& bj : g.b) bj = with_order(bj, order);
        g.inv_dist = with_order(g.inv_dist, order);
    }
    return g;
}

// Rotated equation data: F = q1 + sign * c * sqrt(base - k * sum_j (p_j - q_j)^2).
template <class T>
struct SpatialRhsData {
    MultiSeries<T> base;
    std::array<MultiSeries<T>, 4> q;  // lambda^2 b_j
    T root_scale;                     // sqrt(8) |nu|
    T kin_scale;                      // 1 / (8 lambda)
    double sign = 1.0;
};

template <class T>
SpatialRhsData<T> spatial_rhs_data(const SpatialFrame<T>& f, int order, RootBranch branch) {
    const auto g = ks_ingredients(order, f.lambda, f.omega, f.e);
    const double c = 1.0 - f.mu;
    const double em = shifted_energy(f.energy, f.mu);
    const T lam = f.lambda;
    SpatialRhsData<T> d;
    MultiSeries<T> tidal = g.inv_dist + g.pie * lam;
    tidal.add_constant(T(-1.0));
    d.base = mul(g.uu, g.perp2) * (0.5 * lam * lam * lam) + g.uu * (lam * em) + mul(g.uu, tidal) * (c * lam);
    d.base.add_constant(T(f.mu) + f.kappa);
    if (!(value_of(d.base[0]) > 0.0))
        throw ParameterError("HJ right-hand side: mu + kappa must be positive, got " +
                             std::to_string(value_of(d.base[0])));
    for (std::size_t j = 0; j < 4; ++j) d.q[j] = g.b[j] * (lam * lam);
    d.root_scale = sqrt(8.0 * lam);
    d.kin_scale = 1.0 / (8.0 * lam);
    d.sign = branch == RootBranch::Positive ? 1.0 : -1.0;
    return d;
}

template <class T>
MultiSeries<T> spatial_rhs_eval(const SpatialRhsData<T>& d, int order, const MultiSeries<T>& p2,
                                const MultiSeries<T>& p3, const MultiSeries<T>& p4) {
    const bool full = order == d.base.order();
    MultiSeries<T> arg = full ? d.base : with_order(d.base, order);
    const std::array<const MultiSeries<T>*, 3> ps{&p2, &p3, &p4};
    MultiSeries<T> kin(4, order);
    for (std::size_t j = 0; j < 3; ++j) {
        MultiSeries<T> diff = *ps[j] - (full ? d.q[j + 1] : with_order(d.q[j + 1], order));
        kin += mul(diff, diff);
    }
    arg -= kin * d.kin_scale;
    if (!(value_of(arg[0]) > 0.0)) throw DomainError("HJ right-hand side: square-root argument not positive at u = 0");
    MultiSeries<T> out = pow_real(arg, 0.5) * (d.sign * d.root_scale);
    out += full ? d.q[0] : with_order(d.q[0], order);
    return out;
}

// Staged Picard iteration on the u1-antiderivative. Pass k runs at order k,
// which fixes degree k; further passes at full order must reproduce W.
template <class T, class Rhs>
PicardResult<T> picard(int nvars, int order, const Rhs& rhs, double tol) {
    if (order < 1 || order > kMaxOrder) throw DimensionError("HJ solver: order must lie in [1, 16]");
    PicardResult<T> r;
    r.w = MultiSeries<T>(nvars, order);
    for (int k = 1; k <= order; ++k) {
        const MultiSeries<T> wk = with_order(r.w, k);
        r.w = with_order(antiderivative(rhs(wk, k), 0), order);
        ++r.passes;
    }
    for (int extra = 0; extra < 2; ++extra) {
        MultiSeries<T> next = antiderivative(rhs(r.w, order), 0);
        ++r.passes;
        double diff = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < next.size(); ++i) {
            diff = std::max(diff, magnitude(next[i] - r.w[i]));
            scale = std::max(scale, magnitude(next[i]));
        }
        r.truncated = next.truncated();
        r.w = std::move(next);
        r.w.set_truncated(r.truncated);
        if (diff <= tol * std::max(scale, 1e-300)) return r;
    }
    throw ConvergenceError("HJ Picard iteration did not settle within order + 2 passes (internal inconsistency)");
}

template <class T>
SquareMatrix<T> snu_entries(const std::array<T, 4>& n) {
    return {{{n[0], -n[1], -n[2], -n[3]},
             {n[1], n[0], -n[3], n[2]},
             {n[2], n[3], n[0], -n[1]},
             {n[3], -n[2], n[1], n[0]}}};
}

}  // namespace

double kappa_nu(double mu, const Vec4& nu) { return mu * (nu.squaredNorm() - 1.0); }

template <class T>
SpatialFrame<T> make_frame(const std::array<T, 4>& nu, const T& kappa, double mu, double energy) {
    SpatialFrame<T> f;
    f.nu = nu;
    f.kappa = kappa;
    f.mu = mu;
    f.energy = energy;
    const T &n1 = nu[0], &n2 = nu[1], &n3 = nu[2], &n4 = nu[3];
    f.lambda = n1 * n1 + n2 * n2 + n3 * n3 + n4 * n4;
    if (!(value_of(f.lambda) > 0.0)) throw DomainError("HJ frame: nu = 0");
    const T inv = 1.0 / f.lambda;
    // Rows of Pi = R_nu / |nu|^2 for the third and first axes.
    f.omega = {2.0 * (n1 * n3 + n2 * n4) * inv, -2.0 * (n2 * n3 - n1 * n4) * inv,
               (n1 * n1 + n2 * n2 - n3 * n3 - n4 * n4) * inv};
    f.e = {(n1 * n1 - n2 * n2 - n3 * n3 + n4 * n4) * inv, -2.0 * (n1 * n2 + n3 * n4) * inv,
           -2.0 * (n1 * n3 - n2 * n4) * inv};
    f.s = snu_entries(nu);
    return f;
}

template <class T>
MultiSeries<T> build_rhs_t(const SpatialFrame<T>& f, int order, const MultiSeries<T>& p2, const MultiSeries<T>& p3,
                           const MultiSeries<T>& p4, RootBranch branch) {
    const auto d = spatial_rhs_data(f, order, branch);
    return spatial_rhs_eval(d, order, p2, p3, p4);
}

template <class T>
PicardResult<T> solve_wtilde_t(const SpatialFrame<T>& f, int order, const HJOptions& opt) {
    const auto d = spatial_rhs_data(f, order, opt.branch);
    auto rhs = [&](const MultiSeries<T>& w, int k) {
        return spatial_rhs_eval(d, k, partial(w, 1), partial(w, 2), partial(w, 3));
    };
    return picard<T>(4, order, rhs, opt.tolerance);
}

template <class T>
MultiSeries<T> assemble_t(const MultiSeries<T>& wtilde, const SpatialFrame<T>& f) {
    return linear_substitute(wtilde, f.s, T(1.0) / f.lambda);
}

template <class T>
PlanarPieces<T> solve_planar_t(const T& alpha, const T& kappa, double energy, double mu, int order,
                               const HJOptions& opt) {
    const int n = std::max(order, 4);
    const double c = 1.0 - mu;
    const double em = shifted_energy(energy, mu);
    const MultiSeries<T> rho = promote<T>(norm2_series(2, n));
    const MultiSeries<T> u1 = MultiSeries<T>::variable(2, n, 0);
    const MultiSeries<T> u2 = MultiSeries<T>::variable(2, n, 1);
    // X in the rotated variables: Re(e^{2 i alpha} (u1 + i u2)^2).
    const T c2 = cos(2.0 * alpha), s2 = sin(2.0 * alpha);
    const MultiSeries<T> x = (mul(u1, u1) - mul(u2, u2)) * c2 - mul(u1, u2) * (2.0 * s2);
    MultiSeries<T> d2 = x * T(2.0) + mul(rho, rho);
    d2.add_constant(T(1.0));
    MultiSeries<T> tidal = pow_real(d2, -0.5) + x;
    tidal.add_constant(T(-1.0));
    const MultiSeries<T> rho2 = mul(rho, rho);
    MultiSeries<T> base = mul(rho2, rho) * T(0.5) + rho * T(em) + mul(rho, tidal) * T(c);
    base.add_constant(kappa + mu);
    if (!(value_of(base[0]) > 0.0)) throw ParameterError("planar HJ: mu + kappa must be positive");
    const MultiSeries<T> q1 = with_order(mul(rho, u2) * T(-2.0), order);
    const MultiSeries<T> q2 = with_order(mul(rho, u1) * T(2.0), order);
    base = with_order(base, order);
    const double sign = opt.branch == RootBranch::Positive ? 1.0 : -1.0;
    const double root = std::sqrt(8.0);

    auto rhs = [&](const MultiSeries<T>& w, int k) {
        MultiSeries<T> diff = partial(w, 1) - with_order(q2, k);
        MultiSeries<T> arg = with_order(base, k) - mul(diff, diff) * T(0.125);
        if (!(value_of(arg[0]) > 0.0)) throw DomainError("planar HJ: square-root argument not positive at u = 0");
        MultiSeries<T> out = pow_real(arg, 0.5) * T(sign * root);
        out += with_order(q1, k);
        return out;
    };
    const auto r = picard<T>(2, order, rhs, opt.tolerance);
    PlanarPieces<T> out;
    out.wtilde = r.w;
    out.passes = r.passes;
    out.truncated = r.truncated;
    // W(u) = W~(R_alpha^T u); linear_substitute applies M^T, so M = R_alpha.
    const T ca = cos(alpha), sa = sin(alpha);
    SquareMatrix<T> m{};
    m[0][0] = ca;
    m[0][1] = -sa;
    m[1][0] = sa;
    m[1][1] = ca;
    out.w = linear_substitute(r.w, m, T(1.0));
    return out;
}

template SpatialFrame<double> make_frame(const std::array<double, 4>&, const double&, double, double);
template SpatialFrame<Dual<4>> make_frame(const std::array<Dual<4>, 4>&, const Dual<4>&, double, double);
template MultiSeries<double> build_rhs_t(const SpatialFrame<double>&, int, const Series&, const Series&,
                                         const Series&, RootBranch);
template PicardResult<double> solve_wtilde_t(const SpatialFrame<double>&, int, const HJOptions&);
template PicardResult<Dual<4>> solve_wtilde_t(const SpatialFrame<Dual<4>>&, int, const HJOptions&);
template MultiSeries<double> assemble_t(const Series&, const SpatialFrame<double>&);
template MultiSeries<Dual<4>> assemble_t(const MultiSeries<Dual<4>>&, const SpatialFrame<Dual<4>>&);
template PlanarPieces<double> solve_planar_t(const double&, const double&, double, double, int, const HJOptions&);
template PlanarPieces<Dual<2>> solve_planar_t(const Dual<2>&, const Dual<2>&, double, double, int,
                                              const HJOptions&);

// ---------------------------------------------------------------------------

namespace {

std::array<double, 4> as_array(const Vec4& v) { return {v[0], v[1], v[2], v[3]}; }

void check_params(const Params& p) {
    if (!(p.mu > 0.0 && p.mu <= 0.5)) throw ParameterError("mu must lie in (0, 1/2]");
    if (!std::isfinite(p.energy) || !std::isfinite(p.kappa) || !p.nu.allFinite())
        throw ParameterError("non-finite HJ parameter");
    if (p.nu.squaredNorm() == 0.0) throw ParameterError("nu must be nonzero");
    if (!(p.mu + p.kappa > 0.0)) throw ParameterError("mu + kappa must be positive");
}

}  // namespace

Series build_rhs(const Params& p, const Series& p2, const Series& p3, const Series& p4, RootBranch branch) {
    check_params(p);
    p2.check_compatible(p3);
    p2.check_compatible(p4);
    if (p2.nvars() != 4) throw DimensionError("build_rhs: series must have 4 variables");
    const auto f = make_frame<double>(as_array(p.nu), p.kappa, p.mu, p.energy);
    return build_rhs_t(f, p2.order(), p2, p3, p4, branch);
}

HJSolution solve_wtilde(const Params& p, int order, const HJOptions& opt) {
    check_params(p);
    const auto f = make_frame<double>(as_array(p.nu), p.kappa, p.mu, p.energy);
    const auto r = solve_wtilde_t(f, order, opt);
    HJSolution s;
    s.params = p;
    s.order = order;
    s.wtilde = r.w;
    s.omega = Vec3(f.omega[0], f.omega[1], f.omega[2]);
    s.e_vec = Vec3(f.e[0], f.e[1], f.e[2]);
    s.passes = r.passes;
    s.truncated = r.truncated;
    return s;
}

CompleteIntegral assemble_W(const HJSolution& sol) {
    const double k = kappa_nu(sol.params.mu, sol.params.nu);
    if (std::abs(sol.params.kappa - k) > 1e-12 * std::max(1.0, std::abs(k)))
        throw ParameterError("assemble_W: solution was not built at kappa = mu (|nu|^2 - 1)");
    const auto f = make_frame<double>(as_array(sol.params.nu), sol.params.kappa, sol.params.mu, sol.params.energy);
    CompleteIntegral ci;
    ci.params = sol.params;
    ci.order = sol.order;
    ci.w = assemble_t(sol.wtilde, f);
    ci.source = sol;
    return ci;
}

CompleteIntegral complete_integral(const Params& p, int order, const HJOptions& opt) {
    Params q = p;
    q.kappa = kappa_nu(p.mu, p.nu);
    return assemble_W(solve_wtilde(q, order, opt));
}

Series ks_residual(const Series& w, double level, double mu, double energy) {
    if (w.nvars() != 4) throw DimensionError("ks_residual: W must have 4 variables");
    const int order = w.order();
    const auto g = ks_ingredients<double>(order, 1.0, {0.0, 0.0, 1.0}, {1.0, 0.0, 0.0});
    Series kin(4, order);
    for (int j = 0; j < 4; ++j) {
        Series d = partial(w, j) - g.b[static_cast<std::size_t>(j)];
        kin += mul(d, d);
    }
    Series tidal = g.inv_dist + g.pie;
    tidal.add_constant(-1.0);
    Series r = kin * 0.125 - mul(g.uu, g.perp2) * 0.5 - g.uu * shifted_energy(energy, mu) -
               mul(g.uu, tidal) * (1.0 - mu);
    r.add_constant(-mu - level);
    r.flush();
    return r;
}

Series residual(const CompleteIntegral& ci) {
    return ks_residual(ci.w, kappa_nu(ci.params.mu, ci.params.nu), ci.params.mu, ci.params.energy);
}

PlanarHJSolution solve_planar(double alpha, double kappa, double energy, double mu, int order, const HJOptions& opt) {
    if (!(mu > 0.0 && mu <= 0.5)) throw ParameterError("mu must lie in (0, 1/2]");
    const auto r = solve_planar_t<double>(alpha, kappa, energy, mu, order, opt);
    PlanarHJSolution s;
    s.alpha = alpha;
    s.kappa = kappa;
    s.energy = energy;
    s.mu = mu;
    s.order = order;
    s.wtilde = r.wtilde;
    s.w2 = r.w;
    s.passes = r.passes;
    s.truncated = r.truncated;
    return s;
}

Series planar_residual(const PlanarHJSolution& sol) {
    const int order = sol.order;
    const int n = std::max(order, 4);
    const Series w = with_order(sol.w2, n);
    const Series rho = norm2_series(2, n);
    const Series u1 = Series::variable(2, n, 0), u2 = Series::variable(2, n, 1);
    const Series x = mul(u1, u1) - mul(u2, u2);
    Series d2 = x * 2.0 + mul(rho, rho);
    d2.add_constant(1.0);
    Series tidal = pow_real(d2, -0.5) + x;
    tidal.add_constant(-1.0);
    const Series a = partial(w, 0) + mul(rho, u2) * 2.0;
    const Series b = partial(w, 1) - mul(rho, u1) * 2.0;
    Series r = (mul(a, a) + mul(b, b)) * 0.125 - mul(mul(rho, rho), rho) * 0.5 -
               rho * shifted_energy(sol.energy, sol.mu) - mul(rho, tidal) * (1.0 - sol.mu);
    r.add_constant(-sol.mu - sol.kappa);
    return with_order(r, order);
}

// ---------------------------------------------------------------------------

namespace {

MultiSeries<Dual<4>> dual_complete_integral(double mu, double energy, const Vec4& nu, int order) {
    std::array<Dual<4>, 4> dn;
    for (std::size_t l = 0; l < 4; ++l) dn[l] = Dual<4>::variable(nu[static_cast<Eigen::Index>(l)], l);
    const Dual<4> lam = dn[0] * dn[0] + dn[1] * dn[1] + dn[2] * dn[2] + dn[3] * dn[3];
    const Dual<4> kappa = mu * (lam - 1.0);
    const auto f = make_frame(dn, kappa, mu, energy);
    const auto r = solve_wtilde_t(f, order, HJOptions{});
    return assemble_t(r.w, f);
}

Series richardson_derivative(const Params& p, int order, int direction) {
    const double h = 1e-3;
    auto at = [&](double step) {
        Params q = p;
        q.nu[direction] += step;
        return complete_integral(q, order).w;
    };
    auto central = [&](double step) { return (at(step) - at(-step)) * (0.5 / step); };
    const Series d1 = central(h), d2 = central(0.5 * h), d4 = central(0.25 * h);
    const Series r1 = (d2 * 4.0 - d1) * (1.0 / 3.0);
    const Series r2 = (d4 * 4.0 - d2) * (1.0 / 3.0);
    double err = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < r2.size(); ++i) {
        err = std::max(err, std::abs(r2[i] - r1[i]));
        scale = std::max(scale, std::abs(r2[i]));
    }
    if (err > 1e-8 * std::max(scale, 1e-300))
        throw AccuracyError("param_derivative: Richardson levels disagree by " + std::to_string(err) +
                            " (coefficient scale " + std::to_string(scale) + ")");
    return r2;
}

}  // namespace

Series param_derivative(const Params& p, int order, int direction, DerivativeMethod method) {
    check_params(p);
    if (direction < 0 || direction > 3) throw DimensionError("param_derivative: direction must be 0..3");
    if (method == DerivativeMethod::Richardson) return richardson_derivative(p, order, direction);
    return derivative_part(dual_complete_integral(p.mu, p.energy, p.nu, order), static_cast<std::size_t>(direction));
}

template <std::size_t K>
JetValue<K> ParamJet<K>::at(const Eigen::Matrix<double, K, 1>& u) const {
    const std::array<double, K> pt = [&] {
        std::array<double, K> a{};
        for (std::size_t i = 0; i < K; ++i) a[i] = u[static_cast<Eigen::Index>(i)];
        return a;
    }();
    const auto mono = monomial_values(static_cast<int>(K), order, pt);
    JetValue<K> v;
    const Dual<K> w0 = eval_with(w, mono);
    v.w = w0.v;
    for (std::size_t l = 0; l < K; ++l) v.grad_p[static_cast<Eigen::Index>(l)] = w0.d[l];
    for (std::size_t i = 0; i < K; ++i) {
        const Dual<K> g = eval_with(grad[i], mono);
        v.grad_u[static_cast<Eigen::Index>(i)] = g.v;
        for (std::size_t l = 0; l < K; ++l) v.mixed(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) = g.d[l];
    }
    return v;
}

template <std::size_t K>
double ParamJet<K>::mixed_determinant_at_origin() const {
    Eigen::Matrix<double, K, K> m;
    for (std::size_t i = 0; i < K; ++i)
        for (std::size_t l = 0; l < K; ++l)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) = w[1 + i].d[l];
    return m.determinant();
}

template struct ParamJet<4>;
template struct ParamJet<2>;

IntegralJet integral_jet(double mu, double energy, const Vec4& nu, int order) {
    Params p;
    p.mu = mu;
    p.energy = energy;
    p.nu = nu;
    p.kappa = kappa_nu(mu, nu);
    check_params(p);
    IntegralJet j;
    j.order = order;
    j.w = dual_complete_integral(mu, energy, nu, order);
    for (int i = 0; i < 4; ++i) j.grad[static_cast<std::size_t>(i)] = partial(j.w, i);
    return j;
}

PlanarJet planar_jet(double alpha, double kappa, double energy, double mu, int order) {
    if (!(mu > 0.0 && mu <= 0.5)) throw ParameterError("mu must lie in (0, 1/2]");
    const auto r = solve_planar_t(Dual<2>::variable(alpha, 0), Dual<2>::variable(kappa, 1), energy, mu, order,
                                  HJOptions{});
    PlanarJet j;
    j.order = order;
    j.w = r.w;
    for (int i = 0; i < 2; ++i) j.grad[static_cast<std::size_t>(i)] = partial(j.w, i);
    return j;
}

double j4(double mu, double energy, const Vec4& nu, int order) {
    return integral_jet(mu, energy, nu, order).mixed_determinant_at_origin();
}

double j2(double alpha, double kappa, double energy, double mu, int order) {
    return planar_jet(alpha, kappa, energy, mu, order).mixed_determinant_at_origin();
}

double convergence_radius_estimate(const Series& s) {
    const auto& lay = s.layout();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (int d = 2; d <= s.order(); ++d) {
        double m = 0.0;
        for (std::size_t i = lay.degree_begin(d); i < lay.degree_begin(d + 1); ++i) m = std::max(m, std::abs(s[i]));
        if (m <= 0.0) continue;
        const double y = std::log(m);
        sx += d;
        sy += y;
        sxx += static_cast<double>(d) * d;
        sxy += d * y;
        ++n;
    }
    if (n < 2) return std::numeric_limits<double>::infinity();
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return std::exp(-slope);
}

}  // namespace ksreg
