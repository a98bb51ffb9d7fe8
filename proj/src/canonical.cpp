#include "ksreg/canonical.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "ksreg/errors.hpp"

namespace ksreg {

namespace {

double sup(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

double condition_number(const Eigen::MatrixXd& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& s = svd.singularValues();
    const double lo = s[s.size() - 1];
    return lo > 0.0 ? s[0] / lo : std::numeric_limits<double>::infinity();
}

std::array<double, 4> arr4(const Vec4& v) { return {v[0], v[1], v[2], v[3]}; }

Params integral_params(double mu, double energy, const Vec4& nu) {
    Params p;
    p.mu = mu;
    p.energy = energy;
    p.nu = nu;
    p.kappa = kappa_nu(mu, nu);
    return p;
}

std::array<Series, 4> gradient_series(const Series& w) {
    return {partial(w, 0), partial(w, 1), partial(w, 2), partial(w, 3)};
}

Vec4 eval_gradient(const std::array<Series, 4>& g, const Vec4& u, int order) {
    const auto pt = arr4(u);
    const auto mono = monomial_values(4, order, pt);
    Vec4 out;
    for (int i = 0; i < 4; ++i) out[i] = eval_with(g[static_cast<std::size_t>(i)], mono);
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Trusted radius

double trusted_radius_scan(double mu, double energy, int order, double r_max, double tol) {
    static std::mutex mtx;
    static std::map<std::tuple<double, double, int, double, double>, double> cache;
    const auto key = std::make_tuple(mu, energy, order, r_max, tol);
    {
        std::lock_guard<std::mutex> lock(mtx);
        if (auto it = cache.find(key); it != cache.end()) return it->second;
    }

    const std::array<Vec4, 3> nus{Vec4(1, 0, 0, 0), Vec4(0.5, 0.5, 0.5, 0.5),
                                  Vec4(0.3, -0.5, 0.7, 0.4).normalized()};
    std::vector<Vec4> dirs;
    for (int i = 0; i < 4; ++i)
        for (double s : {1.0, -1.0}) dirs.push_back(s * Vec4::Unit(i));
    for (int m = 0; m < 16; ++m)
        dirs.push_back(0.5 * Vec4(m & 1 ? -1 : 1, m & 2 ? -1 : 1, m & 4 ? -1 : 1, m & 8 ? -1 : 1));

    std::vector<std::array<Series, 4>> grads;
    for (const Vec4& nu : nus) grads.push_back(gradient_series(complete_integral(integral_params(mu, energy, nu), order).w));

    const int steps = 20;
    const double bound = tol * std::sqrt(8.0 * mu);
    double trusted = 0.0;
    for (int k = 1; k <= steps; ++k) {
        const double r = r_max * k / steps;
        bool ok = true;
        for (const auto& g : grads) {
            for (const Vec4& d : dirs) {
                const Vec4 u = r * d;
                const Vec4 U = eval_gradient(g, u, order);
                double res;
                try {
                    res = std::abs(ham_ks_identity(KSState{u, U}, energy, mu));
                } catch (const Error&) {
                    res = std::numeric_limits<double>::infinity();
                }
                if (!(res <= bound)) ok = false;
            }
        }
        if (!ok) break;
        trusted = r;
    }
    std::lock_guard<std::mutex> lock(mtx);
    cache[key] = trusted;
    return trusted;
}

// ---------------------------------------------------------------------------
// Chi4

Chi4::Chi4(double mu, double energy, const CanonicalOptions& opt) : mu_(mu), energy_(energy), opt_(opt) {
    if (!(mu > 0.0 && mu <= 0.5)) throw ParameterError("mu must lie in (0, 1/2]");
    if (opt.order < 2 || opt.order > kMaxOrder) throw ParameterError("series order out of range");
    if (!(opt.r_max > 0.0)) throw ParameterError("r_max must be positive");
    scanned_ = opt.scan_radius ? trusted_radius_scan(mu, energy, opt.order, opt.r_max, opt.scan_tolerance) : opt.r_max;
    trusted_ = std::min(scanned_, opt.r_max);
}

void Chi4::check_ball(const Vec4& u, const char* where) const {
    const double r = u.norm();
    if (r > trusted_)
        throw DomainError(std::string(where) + ": |u| = " + fmt(r) + " exceeds the trusted radius " + fmt(trusted_));
}

const IntegralJet& Chi4::jet(const Vec4& nu) {
    if (!jet_nu_ || *jet_nu_ != nu) {
        jet_ = integral_jet(mu_, energy_, nu, opt_.order);
        jet_nu_ = nu;
    }
    return jet_;
}

Vec4 Chi4::grad_u(const Vec4& u, const Vec4& nu) {
    if (jet_nu_ && *jet_nu_ == nu) return jet_.at(u).grad_u;
    if (!ci_nu_ || *ci_nu_ != nu) {
        ci_grad_ = gradient_series(complete_integral(integral_params(mu_, energy_, nu), opt_.order).w);
        ci_nu_ = nu;
    }
    return eval_gradient(ci_grad_, u, opt_.order);
}

NuHatResult Chi4::nu_hat(const KSState& s, const std::optional<Vec4>& guess) {
    check_ball(s.u, "nu_hat");
    // Full Newton while the steps are large; once they drop below `chord`
    // the Jacobian is frozen and only the plain series is re-evaluated.
    constexpr double chord = 1e-4;
    NuHatResult out;
    Vec4 nu = guess.value_or(Vec4(s.U / std::sqrt(8.0 * mu_)));
    Vec4 jac_nu = nu;
    Mat4 m = jet(nu).at(s.u).mixed;
    Vec4 res = s.U - grad_u(s.u, nu);
    double rn = sup(res);
    int it = 0;
    for (; it < opt_.max_iter && rn > opt_.newton_tol; ++it) {
        if (sup(nu - jac_nu) > chord) {
            m = jet(nu).at(s.u).mixed;
            jac_nu = nu;
        }
        const Vec4 delta = m.partialPivLu().solve(res);
        const bool large = sup(delta) > chord;
        double step = 1.0;
        Vec4 trial;
        Vec4 rt;
        double rtn = 0.0;
        for (int h = 0; h < 12; ++h) {
            trial = nu + step * delta;
            if (large) jet(trial);
            rt = s.U - grad_u(s.u, trial);
            rtn = sup(rt);
            if (rtn < rn || !std::isfinite(rn)) break;
            step *= 0.5;
        }
        if (!(rtn < rn)) {
            if (rn <= 10.0 * opt_.newton_tol) break;  // round-off floor
            throw InversionError("nu_hat: Newton stalled at residual " + fmt(rn) + ", last nu = (" + fmt(nu[0]) +
                                 ", " + fmt(nu[1]) + ", " + fmt(nu[2]) + ", " + fmt(nu[3]) + ")");
        }
        nu = trial;
        res = rt;
        rn = rtn;
    }
    if (rn > 10.0 * opt_.newton_tol)
        throw InversionError("nu_hat: no convergence in " + std::to_string(opt_.max_iter) + " iterations, residual " +
                             fmt(rn));
    if (rn > 0.0) {
        const Vec4 trial = nu + m.partialPivLu().solve(res);
        const Vec4 rt = s.U - grad_u(s.u, trial);
        if (sup(rt) <= 10.0 * opt_.newton_tol) {
            nu = trial;
            rn = sup(rt);
        }
    }
    out.nu = nu;
    out.newton.iterations = it;
    out.newton.residual = rn;
    out.newton.condition = condition_number(m);
    out.newton.ill_conditioned = out.newton.condition > 1e8;
    return out;
}

Vec4 Chi4::n_hat(const Vec4& u, const Vec4& nu) {
    check_ball(u, "n_hat");
    return jet(nu).at(u).grad_p;
}

ActionAngleState Chi4::forward(const KSState& s, NewtonReport* report) {
    const NuHatResult r = nu_hat(s);
    if (report) *report = r.newton;
    return {n_hat(s.u, r.nu), r.nu};
}

Chi4InverseResult Chi4::inverse(const Vec4& n, const Vec4& nu, const std::optional<Vec4>& guess) {
    const IntegralJet& j = jet(nu);
    Vec4 u = guess.value_or(Vec4(n / std::sqrt(8.0 * mu_)));
    JetValue<4> v = j.at(u);
    Vec4 f = v.grad_p - n;
    double fn = sup(f);
    int it = 0;
    for (; it < opt_.max_iter && fn > opt_.newton_tol; ++it) {
        const Mat4 jac = v.mixed.transpose();
        const Vec4 delta = -jac.partialPivLu().solve(f);
        double step = 1.0;
        Vec4 trial;
        JetValue<4> vt;
        double ftn = 0.0;
        for (int h = 0; h < 12; ++h) {
            trial = u + step * delta;
            vt = j.at(trial);
            ftn = sup(Vec4(vt.grad_p - n));
            if (ftn < fn) break;
            step *= 0.5;
        }
        if (!(ftn < fn)) {
            if (fn <= 10.0 * opt_.newton_tol) break;
            throw InversionError("chi4_inverse: Newton stalled at residual " + fmt(fn) + ", last u = (" + fmt(u[0]) +
                                 ", " + fmt(u[1]) + ", " + fmt(u[2]) + ", " + fmt(u[3]) + ")");
        }
        u = trial;
        v = vt;
        f = v.grad_p - n;
        fn = ftn;
        if (u.norm() > 2.0 * opt_.r_max) throw InversionError("chi4_inverse: iterate left the series domain");
    }
    if (fn > 10.0 * opt_.newton_tol)
        throw InversionError("chi4_inverse: no convergence in " + std::to_string(opt_.max_iter) +
                             " iterations, residual " + fmt(fn));
    // One more full step takes the quadratically converging iterate to
    // round-off, so nearby inputs give smoothly varying outputs.
    if (fn > 0.0) {
        const Vec4 trial = u - v.mixed.transpose().partialPivLu().solve(f);
        const JetValue<4> vt = j.at(trial);
        const double ftn = sup(Vec4(vt.grad_p - n));
        if (ftn <= 10.0 * opt_.newton_tol) {
            u = trial;
            v = vt;
            fn = ftn;
        }
    }
    check_ball(u, "chi4_inverse");
    Chi4InverseResult out;
    out.state = KSState{u, v.grad_u};
    out.newton.iterations = it;
    out.newton.residual = fn;
    out.newton.condition = condition_number(v.mixed);
    out.newton.ill_conditioned = out.newton.condition > 1e8;
    return out;
}

Vec4 nu_hat(const KSState& s, double energy, double mu, const CanonicalOptions& opt) {
    Chi4 chi(mu, energy, opt);
    return chi.nu_hat(s).nu;
}

Vec4 n_hat(const Vec4& u, const Vec4& nu, double energy, double mu, const CanonicalOptions& opt) {
    Chi4 chi(mu, energy, opt);
    return chi.n_hat(u, nu);
}

KSState chi4_inverse(const Vec4& n, const Vec4& nu, double energy, double mu, const CanonicalOptions& opt) {
    Chi4 chi(mu, energy, opt);
    return chi.inverse(n, nu).state;
}

// ---------------------------------------------------------------------------
// Exit search shared by the spatial and planar propagators.

namespace {

using VecX = Eigen::VectorXd;

struct MarchPoint {
    double s = 0.0;
    VecX u, U;
};

struct MarchHooks {
    // (u, U) on the analytic solution at proper time s, Newton started at `guess`.
    std::function<MarchPoint(double s, const VecX& guess, int& iters)> solve;
    std::function<VecX(const VecX& u, const VecX& U)> uprime;
    std::function<double(const VecX& u, const VecX& U)> level;
    std::function<double(const VecX& u, const VecX& U)> bilinear;
};

struct MarchOutcome {
    MarchPoint exit;
    double t_exit = 0.0;
    bool immediate = false;
};

void observe(const MarchHooks& hooks, const MarchPoint& p, int iters, EncounterDiagnostics& d) {
    d.energy_drift = std::max(d.energy_drift, std::abs(hooks.level(p.u, p.U)));
    d.bilinear = std::max(d.bilinear, std::abs(hooks.bilinear(p.u, p.U)));
    d.newton_iters_max = std::max(d.newton_iters_max, iters);
    d.max_u_norm = std::max(d.max_u_norm, p.u.norm());
}

MarchOutcome march_to_exit(const MarchHooks& hooks, const MarchPoint& start, double sigma, int dir, long max_steps,
                           EncounterDiagnostics& diag) {
    MarchOutcome out;
    observe(hooks, start, 0, diag);
    const VecX up0 = hooks.uprime(start.u, start.U);
    if (dir * 2.0 * start.u.dot(up0) >= 0.0) {
        out.exit = start;
        out.immediate = true;
        return out;
    }

    std::vector<MarchPoint> samples{start};
    MarchPoint cur = start;
    const double root_sigma = std::sqrt(sigma);
    bool bracketed = false;
    for (long k = 0; k < max_steps; ++k) {
        const VecX up = hooks.uprime(cur.u, cur.U);
        const double speed = std::max(up.norm(), 1e-300);
        // |d|u|^2/ds| <= 2 |u| |u'|; keep the radius change below sigma/20 and
        // the u change below a twentieth of the sphere's u-radius.
        const double ds = 0.05 * std::min(sigma / (2.0 * std::max(cur.u.norm(), 1e-300) * speed), root_sigma / speed);
        const double s_new = cur.s + dir * ds;
        int iters = 0;
        MarchPoint next = hooks.solve(s_new, VecX(cur.u + up * (dir * ds)), iters);
        observe(hooks, next, iters, diag);
        ++diag.steps;
        samples.push_back(next);
        if (next.u.squaredNorm() >= sigma) {
            bracketed = true;
            break;
        }
        cur = next;
    }
    if (!bracketed) {
        diag.transit = false;
        out.exit = samples.back();
        return out;
    }

    const MarchPoint& a = samples[samples.size() - 2];
    const MarchPoint& b = samples.back();
    auto interp_guess = [&](double s) {
        const double w = (s - a.s) / (b.s - a.s);
        return VecX((1.0 - w) * a.u + w * b.u);
    };
    MarchPoint last;
    auto g = [&](double s) {
        int iters = 0;
        last = hooks.solve(s, interp_guess(s), iters);
        diag.newton_iters_max = std::max(diag.newton_iters_max, iters);
        return last.u.squaredNorm() - sigma;
    };
    double lo = std::min(a.s, b.s), hi = std::max(a.s, b.s);
    double glo = a.s < b.s ? a.u.squaredNorm() - sigma : b.u.squaredNorm() - sigma;
    double ghi = a.s < b.s ? b.u.squaredNorm() - sigma : a.u.squaredNorm() - sigma;
    double root;
    if (glo == 0.0) {
        root = lo;
    } else if (ghi == 0.0) {
        root = hi;
    } else {
        boost::uintmax_t max_it = 100;
        const auto br = boost::math::tools::toms748_solve(
            g, lo, hi, glo, ghi,
            [](double x, double y) { return std::abs(y - x) <= 4e-16 * std::max(std::abs(x), std::abs(y)); }, max_it);
        // Secant polish from the bracket ends.
        const double ga = g(br.first), gb = g(br.second);
        root = (gb != ga) ? br.first - ga * (br.second - br.first) / (gb - ga) : 0.5 * (br.first + br.second);
        root = std::clamp(root, br.first, br.second);
    }
    g(root);
    out.exit = last;
    out.exit.s = root;

    // t = int_0^{s_exit} |u(s)|^2 ds on the analytic solution.
    auto guess_at = [&](double s) {
        std::size_t k = 1;
        while (k + 1 < samples.size() && dir * samples[k].s < dir * s) ++k;
        const MarchPoint& p = samples[k - 1];
        const MarchPoint& q = samples[k];
        const double w = std::clamp((s - p.s) / (q.s - p.s), 0.0, 1.0);
        return VecX((1.0 - w) * p.u + w * q.u);
    };
    auto density = [&](double s) {
        int iters = 0;
        return hooks.solve(s, guess_at(s), iters).u.squaredNorm();
    };
    double err = 0.0;
    const double t = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        density, std::min(0.0, root), std::max(0.0, root), 6, 1e-13, &err);
    out.t_exit = root < 0.0 ? -t : t;
    return out;
}

}  // namespace

EncounterResult encounter_map(const PlanetoState& entry, double sigma, const Params& params,
                              const EncounterOptions& opt) {
    params.validate();
    if (!(sigma > 0.0)) throw ParameterError("encounter_map: sigma must be positive");
    if (opt.direction != 1 && opt.direction != -1) throw ParameterError("encounter_map: direction must be +1 or -1");
    if (!params.primary_potential)
        throw ParameterError("encounter_map: the complete integral is built for the full potential");
    const double mu = body_mu(params.mu, params.body);
    const double energy = params.energy;
    if (std::abs(entry.q.norm() - sigma) > opt.entry_tolerance)
        throw ParameterError("encounter_map: |X| = " + fmt(entry.q.norm()) + " is not on the sphere sigma = " +
                             fmt(sigma));
    const double h = ham_planeto(entry, mu);
    if (std::abs(h - energy) > opt.energy_tolerance * std::max(1.0, std::abs(energy)))
        throw ParameterError("encounter_map: H(entry) = " + fmt(h) + " differs from E = " + fmt(energy));

    Chi4 chi(mu, energy, opt.canonical);
    EncounterResult res;
    res.entry = entry;
    res.diagnostics.trusted_radius = chi.trusted_radius();
    const Chart chart = opt.chart.value_or(select_chart(entry.q));
    res.diagnostics.chart = chart;
    const KSState ks = chart_lift(entry, chart);
    const NuHatResult nh = chi.nu_hat(ks);
    res.nu0 = nh.nu;
    res.n0 = chi.n_hat(ks.u, res.nu0);
    res.diagnostics.newton_iters_max = nh.newton.iterations;

    const Vec4 nu0 = res.nu0;
    const Vec4 n0 = res.n0;
    MarchHooks hooks;
    hooks.solve = [&](double s, const VecX& guess, int& iters) {
        const Chi4InverseResult r = chi.inverse(n0 + 2.0 * mu * s * nu0, nu0, Vec4(guess));
        iters = r.newton.iterations;
        return MarchPoint{s, r.state.u, r.state.U};
    };
    hooks.uprime = [&](const VecX& u, const VecX& U) {
        return VecX(grad_ks_identity(KSState{u, U}, energy, mu).dU);
    };
    hooks.level = [&](const VecX& u, const VecX& U) { return ham_ks_identity(KSState{u, U}, energy, mu); };
    hooks.bilinear = [](const VecX& u, const VecX& U) { return bilinear(Vec4(u), Vec4(U)); };

    const MarchOutcome m = march_to_exit(hooks, MarchPoint{0.0, ks.u, ks.U}, sigma, opt.direction, opt.max_steps,
                                         res.diagnostics);
    if (m.immediate) {
        res.exit = entry;
        return res;
    }
    const KSState ex{Vec4(m.exit.u), Vec4(m.exit.U)};
    res.exit = phase_project(ex);
    res.s_exit = m.exit.s;
    res.t_exit = m.t_exit;
    if (res.diagnostics.transit) {
        const NuHatResult back = chi.nu_hat(ex, nu0);
        res.diagnostics.nu_drift = sup(back.nu - nu0);
    }
    return res;
}

PlanetoState sphere_entry(const Vec3& position_dir, const Vec3& momentum_dir, double sigma, double energy, double mu) {
    if (!(sigma > 0.0)) throw ParameterError("sphere_entry: sigma must be positive");
    if (position_dir.norm() == 0.0 || momentum_dir.norm() == 0.0)
        throw ParameterError("sphere_entry: zero direction");
    PlanetoState s;
    s.q = sigma * position_dir.normalized();
    const Vec3 d = momentum_dir.normalized();
    // H(q, m d) = m^2/2 + m b + c.
    const double b = d[0] * s.q[1] - d[1] * s.q[0];
    const double c = ham_planeto(PlanetoState{s.q, Vec3::Zero()}, mu);
    const double disc = b * b - 2.0 * (c - energy);
    if (disc < 0.0) throw DomainError("sphere_entry: energy not reachable along this momentum direction");
    const double m = -b + std::sqrt(disc);
    if (!(m > 0.0)) throw DomainError("sphere_entry: no positive momentum magnitude");
    s.p = m * d;
    return s;
}

PlanarEncounterResult planar_encounter_map(const PlanetoState& entry, double sigma, const Params& params,
                                           const EncounterOptions& opt) {
    params.validate();
    if (!(sigma > 0.0)) throw ParameterError("planar_encounter_map: sigma must be positive");
    if (entry.q[2] != 0.0 || entry.p[2] != 0.0)
        throw ParameterError("planar_encounter_map: entry state is not planar");
    if (!params.primary_potential)
        throw ParameterError("planar_encounter_map: the complete integral is built for the full potential");
    const double mu = body_mu(params.mu, params.body);
    const double energy = params.energy;
    if (std::abs(entry.q.norm() - sigma) > opt.entry_tolerance)
        throw ParameterError("planar_encounter_map: entry is not on the sphere");
    const double h = ham_planeto(entry, mu);
    if (std::abs(h - energy) > opt.energy_tolerance * std::max(1.0, std::abs(energy)))
        throw ParameterError("planar_encounter_map: H(entry) = " + fmt(h) + " differs from E = " + fmt(energy));
    const int order = opt.canonical.order;
    const double r_max = std::min(opt.canonical.r_max, opt.canonical.scan_radius
                                                           ? trusted_radius_scan(mu, energy, order, opt.canonical.r_max,
                                                                                 opt.canonical.scan_tolerance)
                                                           : opt.canonical.r_max);
    const double tol = opt.canonical.newton_tol;

    PlanarEncounterResult res;
    res.entry = entry;
    res.diagnostics.trusted_radius = r_max;
    const PlanarKSState lc = lc_lift(PlanarState{entry.q.head<2>(), entry.p.head<2>()});
    if (lc.u.norm() > r_max) throw DomainError("planar_encounter_map: entry lies outside the trusted ball");

    // (alpha, kappa) from U = dW/du, starting at the linear part.
    double alpha = std::atan2(lc.U[1], lc.U[0]);
    double kappa = lc.U.squaredNorm() / 8.0 - mu;
    PlanarJet jet = planar_jet(alpha, kappa, energy, mu, order);
    JetValue<2> v = jet.at(lc.u);
    int it = 0;
    for (; it < opt.canonical.max_iter; ++it) {
        const Vec2 f = lc.U - v.grad_u;
        if (sup(f) <= tol) break;
        const Vec2 d = v.mixed.partialPivLu().solve(f);
        alpha += d[0];
        kappa += d[1];
        jet = planar_jet(alpha, kappa, energy, mu, order);
        v = jet.at(lc.u);
    }
    if (sup(Vec2(lc.U - v.grad_u)) > 10.0 * tol)
        throw InversionError("planar_encounter_map: (alpha, kappa) Newton did not converge");
    res.alpha = alpha;
    res.kappa = kappa;
    res.n0 = v.grad_p;
    res.diagnostics.newton_iters_max = it;

    const Vec2 n0 = res.n0;
    MarchHooks hooks;
    hooks.solve = [&](double s, const VecX& guess, int& iters) {
        const Vec2 target = n0 + Vec2(0.0, s);
        Vec2 u = guess;
        JetValue<2> jv = jet.at(u);
        int k = 0;
        for (; k < opt.canonical.max_iter; ++k) {
            const Vec2 f = jv.grad_p - target;
            if (sup(f) <= tol) break;
            u -= jv.mixed.transpose().partialPivLu().solve(f);
            jv = jet.at(u);
        }
        if (sup(Vec2(jv.grad_p - target)) > 10.0 * tol)
            throw InversionError("planar_encounter_map: u Newton did not converge");
        if (u.norm() > r_max) throw DomainError("planar_encounter_map: trajectory leaves the trusted ball");
        iters = k;
        return MarchPoint{s, u, jv.grad_u};
    };
    hooks.uprime = [&](const VecX& u, const VecX& U) {
        return VecX(grad_lc(PlanarKSState{u, U}, energy, mu).dU);
    };
    hooks.level = [&](const VecX& u, const VecX& U) { return ham_lc(PlanarKSState{u, U}, energy, mu); };
    hooks.bilinear = [](const VecX&, const VecX&) { return 0.0; };

    const MarchOutcome m = march_to_exit(hooks, MarchPoint{0.0, lc.u, lc.U}, sigma, opt.direction, opt.max_steps,
                                         res.diagnostics);
    if (m.immediate) {
        res.exit = entry;
        return res;
    }
    const PlanarState ps = lc_project(PlanarKSState{Vec2(m.exit.u), Vec2(m.exit.U)});
    res.exit.q = Vec3(ps.q[0], ps.q[1], 0.0);
    res.exit.p = Vec3(ps.p[0], ps.p[1], 0.0);
    res.s_exit = m.exit.s;
    res.t_exit = m.t_exit;
    return res;
}

// ---------------------------------------------------------------------------
// First integrals

Vec3 first_integrals_nnu(const Vec4& n, const Vec4& nu) {
    return Vec3(nu[0] * n[3] - nu[3] * n[0],
                0.5 * (nu[0] * n[2] - n[0] * nu[2] + n[1] * nu[3] - n[3] * nu[1]),
                0.5 * (nu[0] * n[1] - n[0] * nu[1] + n[3] * nu[2] - n[2] * nu[3]));
}

FirstIntegralTriple cartesian_integrals(const PlanetoState& state, Chi4& chi) {
    FirstIntegralTriple out;
    out.h = ham_planeto(state, chi.mu());
    auto through = [&](Chart c) {
        const KSState ks = chart_lift(state, c);
        const ActionAngleState an = chi.forward(ks);
        return first_integrals_nnu(an.n, an.nu);
    };
    const bool plus = in_chart_domain(state.q, Chart::PlusX);
    const bool minus = in_chart_domain(state.q, Chart::MinusX);
    out.chart = plus ? Chart::PlusX : Chart::MinusX;
    out.components = through(out.chart);
    if (plus && minus) {
        out.both_charts = true;
        out.chart_discrepancy = sup(Vec3(out.components - through(Chart::MinusX)));
    }
    out.n2 = out.components.squaredNorm();
    out.nz = out.components[2];
    return out;
}

FirstIntegralTriple cartesian_integrals(const PlanetoState& state, double energy, double mu,
                                        const CanonicalOptions& opt) {
    Chi4 chi(mu, energy, opt);
    return cartesian_integrals(state, chi);
}

// ---------------------------------------------------------------------------
// Brackets and completeness

Eigen::VectorXd numeric_gradient(const PhaseFunction& f, const Eigen::VectorXd& x, double h_rel, double scale_floor,
                                 double tol) {
    const Eigen::Index n = x.size();
    Eigen::VectorXd coarse(n), fine(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double h = h_rel * std::max(std::abs(x[i]), scale_floor);
        auto central = [&](double step) {
            Eigen::VectorXd a = x, b = x;
            a[i] += step;
            b[i] -= step;
            return (f(a) - f(b)) / (2.0 * step);
        };
        const double d1 = central(h), d2 = central(0.5 * h), d4 = central(0.25 * h);
        coarse[i] = (4.0 * d2 - d1) / 3.0;
        fine[i] = (4.0 * d4 - d2) / 3.0;
    }
    const double scale = std::max(fine.norm(), 1e-300);
    const double est = (fine - coarse).norm();
    if (est > tol * scale)
        throw AccuracyError("numeric_gradient: extrapolation levels differ by " + fmt(est / scale) + " relative");
    return fine;
}

double poisson_bracket(const Eigen::VectorXd& gf, const Eigen::VectorXd& gg) {
    if (gf.size() != gg.size() || gf.size() % 2 != 0) throw DimensionError("poisson_bracket: gradient sizes");
    const Eigen::Index d = gf.size() / 2;
    return gf.head(d).dot(gg.tail(d)) - gf.tail(d).dot(gg.head(d));
}

double poisson_bracket(const PhaseFunction& f, const PhaseFunction& g, const Eigen::VectorXd& x, int dim) {
    if (dim != 6 && dim != 8) throw DimensionError("poisson_bracket: dimension must be 6 or 8");
    if (x.size() != dim) throw DimensionError("poisson_bracket: point has the wrong dimension");
    return poisson_bracket(numeric_gradient(f, x), numeric_gradient(g, x));
}

Eigen::Matrix<double, 8, 8> chi4_jacobian(const KSState& ks, Chi4& chi, ActionAngleState* at) {
    const Vec4 nu = chi.nu_hat(ks).nu;
    const IntegralJet& jet = chi.jet(nu);
    const JetValue<4> jv = jet.at(ks.u);
    const Mat4 m = jv.mixed;  // m(i, l) = W_{u_i nu_l}
    if (at) *at = ActionAngleState{jv.grad_p, nu};

    Mat4 wuu;
    {
        const auto pt = arr4(ks.u);
        const auto mono = monomial_values(4, jet.order, pt);
        for (int i = 0; i < 4; ++i)
            for (int k = i; k < 4; ++k) {
                const auto d2 = partial(jet.grad[static_cast<std::size_t>(i)], k);
                wuu(i, k) = wuu(k, i) = eval_with(d2, mono).v;
            }
    }
    // W_nunu by central differences of the exact parameter gradients.
    Mat4 wnn;
    const double dn = 1e-5;
    for (int l = 0; l < 4; ++l) {
        const Vec4 plus = chi.jet(nu + dn * Vec4::Unit(l)).at(ks.u).grad_p;
        const Vec4 minus = chi.jet(nu - dn * Vec4::Unit(l)).at(ks.u).grad_p;
        wnn.col(l) = (plus - minus) / (2.0 * dn);
    }
    wnn = 0.5 * (wnn + wnn.transpose()).eval();

    // d nu = M^{-1} (dU - W_uu du), dn = M^T du + W_nunu d nu.
    Eigen::Matrix<double, 8, 8> out;
    const Eigen::PartialPivLU<Mat4> lu(m);
    Eigen::Matrix<double, 4, 8> jnu;
    jnu.leftCols<4>() = lu.solve(-wuu);
    jnu.rightCols<4>() = lu.solve(Mat4::Identity());
    out.topLeftCorner<4, 4>() = m.transpose();
    out.topRightCorner<4, 4>().setZero();
    out.topRows<4>() += wnn * jnu;
    out.bottomRows<4>() = jnu;
    return out;
}

namespace {

struct IntegralGradients {
    Eigen::Matrix<double, 6, 1> h, n2, nz;
};

// Gradients of (H, N^2, N_Z) in (q, p). The map (q, p) -> (u, U) is
// differentiated numerically (closed-form chart), (u, U) -> (n, nu) by the
// implicit relations U = W_u, n = W_nu with W_nunu from central differences
// of the exact parameter gradients.
IntegralGradients integral_gradients(const PlanetoState& state, Chi4& chi) {
    const Chart c = select_chart(state.q);
    const KSState ks = chart_lift(state, c);
    ActionAngleState an;
    const Eigen::Matrix<double, 8, 8> jchi = chi4_jacobian(ks, chi, &an);
    const Vec4& n = an.n;
    const Vec4& nu = an.nu;
    const Eigen::Matrix<double, 4, 8> jn = jchi.topRows<4>();
    const Eigen::Matrix<double, 4, 8> jnu = jchi.bottomRows<4>();

    // Lift Jacobian d(u, U)/d(q, p), 8 x 6.
    Eigen::Matrix<double, 8, 6> jl;
    const Vec6 x0 = state.packed();
    const double hq = 1e-4 * state.q.norm(), hp = 1e-4 * std::max(state.p.norm(), 1e-3);
    for (int i = 0; i < 6; ++i) {
        const double h = i < 3 ? hq : hp;
        auto lift = [&](double step) {
            Vec6 x = x0;
            x[i] += step;
            const KSState k = chart_lift(PlanetoState::unpack(x), c);
            Vec8 y;
            y << k.u, k.U;
            return y;
        };
        const Vec8 d1 = (lift(h) - lift(-h)) / (2.0 * h);
        const Vec8 d2 = (lift(0.5 * h) - lift(-0.5 * h)) / h;
        jl.col(i) = (4.0 * d2 - d1) / 3.0;
    }

    // Bilinear integrals: gradients in (n, nu).
    const Vec3 comp = first_integrals_nnu(n, nu);
    Eigen::Matrix<double, 3, 4> dn_n, dn_nu;
    dn_n << -nu[3], 0, 0, nu[0],
            -0.5 * nu[2], 0.5 * nu[3], 0.5 * nu[0], -0.5 * nu[1],
            -0.5 * nu[1], 0.5 * nu[0], -0.5 * nu[3], 0.5 * nu[2];
    dn_nu << n[3], 0, 0, -n[0],
             0.5 * n[2], -0.5 * n[3], -0.5 * n[0], 0.5 * n[1],
             0.5 * n[1], -0.5 * n[0], 0.5 * n[3], -0.5 * n[2];
    const Eigen::Matrix<double, 3, 6> dcomp = (dn_n * jn + dn_nu * jnu) * jl;

    IntegralGradients g;
    const PlanetoGradient gh = grad_planeto(state, chi.mu());
    g.h << gh.dq, gh.dp;
    g.n2 = 2.0 * (dcomp.transpose() * comp);
    g.nz = dcomp.row(2).transpose();
    return g;
}

}  // namespace

CompletenessReport completeness_check(const std::vector<PlanetoState>& states, double energy, double mu,
                                      const CanonicalOptions& opt, double rank_tol) {
    Chi4 chi(mu, energy, opt);
    CompletenessReport rep;
    for (const PlanetoState& s : states) {
        CompletenessSample cs;
        cs.state = s;
        const IntegralGradients g = integral_gradients(s, chi);
        Eigen::Matrix<double, 3, 6> rows;
        rows.row(0) = g.h.transpose() / std::max(g.h.norm(), 1e-300);
        rows.row(1) = g.n2.transpose() / std::max(g.n2.norm(), 1e-300);
        rows.row(2) = g.nz.transpose() / std::max(g.nz.norm(), 1e-300);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(rows);
        const auto& sv = svd.singularValues();
        cs.singular_ratio = sv[2] / sv[0];
        cs.rank = 0;
        for (int i = 0; i < 3; ++i)
            if (sv[i] > rank_tol * sv[0]) ++cs.rank;
        cs.h_n2 = poisson_bracket(g.h, g.n2);
        cs.h_nz = poisson_bracket(g.h, g.nz);
        cs.n2_nz = poisson_bracket(g.n2, g.nz);
        if (cs.rank == 3) ++rep.full_rank;
        rep.max_h_n2 = std::max(rep.max_h_n2, std::abs(cs.h_n2));
        rep.max_h_nz = std::max(rep.max_h_nz, std::abs(cs.h_nz));
        rep.max_n2_nz = std::max(rep.max_n2_nz, std::abs(cs.n2_nz));
        rep.samples.push_back(cs);
    }
    return rep;
}

Eigen::Matrix<double, 8, 5> collision_leaf_jacobian(double mu, double energy, const Vec4& nu, int order) {
    const Series w = complete_integral(integral_params(mu, energy, nu), order).w;
    Eigen::Matrix<double, 8, 5> jac = Eigen::Matrix<double, 8, 5>::Zero();
    const Vec4 big_u = std::sqrt(8.0 * mu) * nu;
    for (int j = 0; j < 4; ++j) {
        const Series wj = partial(w, j);
        for (int i = 0; i < 4; ++i) jac(i, j) = -partial(wj, i)[0];
        jac(4 + j, j) = 1.0;
    }
    // l(u, U) = u4 U1 - u3 U2 + u2 U3 - u1 U4 at u = 0.
    jac(0, 4) = -big_u[3];
    jac(1, 4) = big_u[2];
    jac(2, 4) = -big_u[1];
    jac(3, 4) = big_u[0];
    return jac;
}

int numeric_rank(const Eigen::MatrixXd& m, double rel_tol) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& s = svd.singularValues();
    int r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s[i] > rel_tol * s[0]) ++r;
    return r;
}

}  // namespace ksreg
