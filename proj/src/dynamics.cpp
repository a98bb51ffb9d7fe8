#include "ksreg/dynamics.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <cmath>

#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>

#include "ksreg/errors.hpp"

namespace ksreg {

namespace odeint = boost::numeric::odeint;

namespace {

using OdeState = std::vector<double>;
using Dopri = odeint::runge_kutta_dopri5<OdeState>;

VecX to_vec(const OdeState& y, int n) {
    VecX v(n);
    for (int i = 0; i < n; ++i) v[i] = y[static_cast<std::size_t>(i)];
    return v;
}

bool finite(const OdeState& y) {
    return std::all_of(y.begin(), y.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

const char* to_string(HamiltonianId id) {
    switch (id) {
        case HamiltonianId::Planetocentric: return "H";
        case HamiltonianId::KS: return "K_I";
        case HamiltonianId::LeviCivita: return "K_2";
        case HamiltonianId::Barycentric: return "h";
    }
    return "?";
}

int state_dimension(HamiltonianId id) {
    switch (id) {
        case HamiltonianId::KS: return 8;
        case HamiltonianId::LeviCivita: return 4;
        default: return 6;
    }
}

bool is_regularized(HamiltonianId id) { return id == HamiltonianId::KS || id == HamiltonianId::LeviCivita; }

VecX vector_field(const SystemSpec& sys, const VecX& y) {
    VecX dy(y.size());
    switch (sys.id) {
        case HamiltonianId::Planetocentric: {
            const PlanetoState s{y.head<3>(), y.segment<3>(3)};
            const PlanetoGradient g = grad_planeto(s, sys.mu, sys.primary_potential);
            dy << g.dp, -g.dq;
            break;
        }
        case HamiltonianId::Barycentric: {
            // The translation to the secondary has unit Jacobian, so grad h = grad H there.
            const CartState c{y.head<3>(), y.segment<3>(3)};
            const PlanetoGradient g = grad_planeto(to_planeto(c, sys.mu, 2), sys.mu, sys.primary_potential);
            dy << g.dp, -g.dq;
            break;
        }
        case HamiltonianId::KS: {
            const KSState s{y.head<4>(), y.segment<4>(4)};
            const KSGradient g = grad_ks_identity(s, sys.energy, sys.mu, sys.primary_potential);
            dy << g.dU, -g.du;
            break;
        }
        case HamiltonianId::LeviCivita: {
            const PlanarKSState s{y.head<2>(), y.segment<2>(2)};
            const PlanarKSGradient g = grad_lc(s, sys.energy, sys.mu, sys.primary_potential);
            dy << g.dU, -g.du;
            break;
        }
    }
    return dy;
}

double hamiltonian_value(const SystemSpec& sys, const VecX& y) {
    switch (sys.id) {
        case HamiltonianId::Planetocentric:
            return ham_planeto(PlanetoState{y.head<3>(), y.segment<3>(3)}, sys.mu, sys.primary_potential);
        case HamiltonianId::Barycentric: {
            if (!sys.primary_potential)
                return ham_planeto(to_planeto(CartState{y.head<3>(), y.segment<3>(3)}, sys.mu, 2), sys.mu, false);
            return ham_bary(CartState{y.head<3>(), y.segment<3>(3)}, sys.mu);
        }
        case HamiltonianId::KS:
            return ham_ks_identity(KSState{y.head<4>(), y.segment<4>(4)}, sys.energy, sys.mu, sys.primary_potential);
        case HamiltonianId::LeviCivita:
            return ham_lc(PlanarKSState{y.head<2>(), y.segment<2>(2)}, sys.energy, sys.mu, sys.primary_potential);
    }
    return 0.0;
}

double time_density(const SystemSpec& sys, const VecX& y) {
    if (sys.id == HamiltonianId::KS) return y.head<4>().squaredNorm();
    if (sys.id == HamiltonianId::LeviCivita) return y.head<2>().squaredNorm();
    return 1.0;
}

namespace {

// Forward-in-tau system: dy/dtau = dir * f(y), plus dt/dtau = dir * |u|^2 for
// the regularized formulations. All closed-form errors become singular-approach errors.
struct OdeSystem {
    SystemSpec sys;
    int n = 0;
    bool augmented = false;
    double dir = 1.0;
    long* evals = nullptr;

    void operator()(const OdeState& y, OdeState& dy, double /*tau*/) const {
        if (evals) ++*evals;
        const VecX v = to_vec(y, n);
        VecX f;
        try {
            f = vector_field(sys, v);
        } catch (const DomainError& e) {
            throw SingularityApproachError(std::string("vector field undefined: ") + e.what());
        }
        for (int i = 0; i < n; ++i) dy[static_cast<std::size_t>(i)] = dir * f[i];
        if (augmented) dy[static_cast<std::size_t>(n)] = dir * time_density(sys, v);
    }
};

struct Recorder {
    const SystemSpec& sys;
    int n;
    bool augmented;
    double dir;
    Trajectory& traj;

    void record(double tau, const OdeState& y) {
        const VecX v = to_vec(y, n);
        traj.x.push_back(dir * tau);
        traj.t.push_back(augmented ? y[static_cast<std::size_t>(n)] : dir * tau);
        traj.states.push_back(v);
        traj.derivatives.push_back(vector_field(sys, v));
        traj.energy.push_back(hamiltonian_value(sys, v));
        traj.bilinear.push_back(sys.id == HamiltonianId::KS ? bilinear(v.head<4>(), v.segment<4>(4)) : 0.0);
    }
};

}  // namespace

Trajectory integrate(const SystemSpec& sys, const VecX& y0, double span, const Tolerances& tol,
                     const std::vector<double>& output_at, const std::optional<EventSpec>& event) {
    const int n = state_dimension(sys.id);
    if (y0.size() != n) throw DimensionError("integrate: state has wrong dimension for " + std::string(to_string(sys.id)));
    if (!y0.allFinite()) throw DomainError("integrate: non-finite initial state");
    const bool augmented = is_regularized(sys.id);
    const double dir = span < 0 ? -1.0 : 1.0;
    const double total = std::abs(span);

    Trajectory traj;
    traj.id = sys.id;
    OdeSystem ode{sys, n, augmented, dir, &traj.stats.rhs_evals};
    Recorder rec{sys, n, augmented, dir, traj};

    OdeState y(static_cast<std::size_t>(n + (augmented ? 1 : 0)), 0.0);
    for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = y0[i];
    try {
        OdeState tmp(y.size());
        ode(y, tmp, 0.0);
    } catch (const SingularityApproachError&) {
        throw DomainError("integrate: initial state lies on the singular set of " + std::string(to_string(sys.id)));
    }
    rec.record(0.0, y);
    if (total == 0.0) return traj;

    std::vector<double> outputs;
    for (double o : output_at)
        if (o * dir > 0.0 && std::abs(o) < total) outputs.push_back(std::abs(o));
    std::sort(outputs.begin(), outputs.end());
    std::size_t next_out = 0;

    auto dense = tol.max_step > 0 ? odeint::make_dense_output(tol.abs, tol.rel, tol.max_step, Dopri())
                                  : odeint::make_dense_output(tol.abs, tol.rel, Dopri());
    auto controlled = odeint::make_controlled(tol.abs, tol.rel, Dopri());

    // Exact (step-controlled) transport from (ta, ya) to tb.
    auto advance = [&](const OdeState& ya, double ta, double tb) {
        OdeState yb = ya;
        if (tb > ta) {
            odeint::integrate_adaptive(controlled, std::ref(ode), yb, ta, tb, std::min(tb - ta, 1e-3 * (tb - ta) + 1e-6));
        }
        return yb;
    };

    double dt0 = std::min(total, 1e-4);
    if (tol.max_step > 0) dt0 = std::min(dt0, tol.max_step);
    dense.initialize(y, 0.0, dt0);

    double g_prev = 0.0;
    if (event) g_prev = event->g(y0);

    try {
        while (dense.current_time() < total) {
            if (traj.stats.accepted >= tol.max_steps)
                throw ConvergenceError("integrate: step budget exhausted (" + std::to_string(tol.max_steps) + ")");
            const double tcur = dense.current_time();
            if (tcur + dense.current_time_step() > total) {
                const OdeState cur = dense.current_state();
                dense.initialize(cur, tcur, total - tcur);
            }
            const auto [ta, tb] = dense.do_step(std::ref(ode));
            ++traj.stats.accepted;
            const OdeState& yb = dense.current_state();
            if (!finite(yb)) throw SingularityApproachError("integrate: non-finite state near x = " + std::to_string(dir * tb));
            const double h = tb - ta;
            if (h < tol.min_step * std::max(1.0, tb) && tb < total)
                throw SingularityApproachError("integrate: step size underflow (" + std::to_string(h) +
                                               ") near x = " + std::to_string(dir * tb));

            // Exact samples requested inside this step. The dense stepper
            // keeps the step start as its old state.
            OdeState ya(y.size());
            dense.calc_state(ta, ya);
            while (next_out < outputs.size() && outputs[next_out] <= tb) {
                if (outputs[next_out] > ta) rec.record(outputs[next_out], advance(ya, ta, outputs[next_out]));
                ++next_out;
            }

            if (event) {
                const VecX vb = to_vec(yb, n);
                const double gb = event->g(vb);
                const bool crossed = (g_prev < 0.0 && gb >= 0.0 && event->direction >= 0) ||
                                     (g_prev > 0.0 && gb <= 0.0 && event->direction <= 0);
                if (crossed && tb >= event->not_before) {
                    // Bracket on the dense interpolant, then polish with exact transports.
                    OdeState yi(y.size());
                    auto g_dense = [&](double tau) {
                        dense.calc_state(tau, yi);
                        return event->g(to_vec(yi, n));
                    };
                    double lo = std::max(ta, event->not_before), hi = tb;
                    double glo = g_dense(lo);
                    if ((glo < 0) == (gb < 0)) lo = ta, glo = g_prev;
                    boost::uintmax_t iters = 60;
                    const auto br = boost::math::tools::toms748_solve(
                        g_dense, lo, hi, glo, gb,
                        [&](double a, double b) { return std::abs(b - a) <= 1e-15 * std::max(1.0, std::abs(b)); },
                        iters);
                    double tau = 0.5 * (br.first + br.second);
                    OdeState ye = advance(ya, ta, tau);
                    double ge = event->g(to_vec(ye, n));
                    double tau_prev = hi, g_prev_s = gb;
                    for (int it = 0; it < 8 && ge != 0.0; ++it) {
                        const double slope = (ge - g_prev_s) / (tau - tau_prev);
                        if (!std::isfinite(slope) || slope == 0.0) break;
                        const double step = -ge / slope;
                        tau_prev = tau;
                        g_prev_s = ge;
                        tau = std::clamp(tau + step, ta, tb);
                        ye = advance(ya, ta, tau);
                        ge = event->g(to_vec(ye, n));
                        if (std::abs(step) <= event->tolerance * std::max(1.0, std::abs(tau))) break;
                    }
                    while (next_out < outputs.size()) ++next_out;
                    rec.record(tau, ye);
                    traj.event_found = true;
                    traj.event_x = dir * tau;
                    return traj;
                }
                g_prev = gb;
            }
            rec.record(tb, yb);
        }
    } catch (const odeint::step_adjustment_error& e) {
        throw SingularityApproachError(std::string("integrate: ") + e.what());
    } catch (const odeint::no_progress_error& e) {
        throw SingularityApproachError(std::string("integrate: ") + e.what());
    }
    return traj;
}

std::vector<double> physical_time(const Trajectory& traj) {
    if (!is_regularized(traj.id)) return traj.x;
    const int half = state_dimension(traj.id) / 2;
    std::vector<double> t(traj.x.size(), 0.0);
    for (std::size_t i = 1; i < traj.x.size(); ++i) {
        const double h = traj.x[i] - traj.x[i - 1];
        const VecX& a = traj.states[i - 1];
        const VecX& b = traj.states[i];
        const double fa = a.head(half).squaredNorm(), fb = b.head(half).squaredNorm();
        const double da = 2.0 * a.head(half).dot(traj.derivatives[i - 1].head(half));
        const double db = 2.0 * b.head(half).dot(traj.derivatives[i].head(half));
        t[i] = t[i - 1] + 0.5 * h * (fa + fb) + h * h / 12.0 * (da - db);
    }
    return t;
}

FlowEquivalenceReport flow_equivalence(const PlanetoState& entry, double span, const Params& params,
                                       const Tolerances& tol) {
    params.validate();
    const double mu = body_mu(params.mu, params.body);
    const double energy = ham_planeto(entry, mu, params.primary_potential);
    const KSState lifted = chart_lift(entry);
    SystemSpec ks{HamiltonianId::KS, mu, energy, params.primary_potential};

    // Integrate in s until the physical time reaches span.
    const double r0 = entry.q.norm();
    const double s_guess = 4.0 * std::abs(span) / std::max(r0, 1e-12) + 10.0;
    const double sgn = span < 0 ? -1.0 : 1.0;
    Trajectory kt;
    {
        // A probe run brackets s(span), Newton on t(s) with dt/ds = |u|^2 finishes it.
        SystemSpec aug = ks;
        Trajectory probe = integrate(aug, lifted.packed(), sgn * s_guess, tol);
        std::size_t k = 0;
        while (k < probe.t.size() && std::abs(probe.t[k]) < std::abs(span)) ++k;
        if (k == probe.t.size()) throw ConvergenceError("flow_equivalence: physical time span not reached");
        // Secant on t(s) between the bracketing samples, refined by exact integration.
        double sa = probe.x[k - 1], sb = probe.x[k];
        double ta = probe.t[k - 1], tb = probe.t[k];
        double s_end = sa + (span - ta) * (sb - sa) / (tb - ta);
        for (int it = 0; it < 6; ++it) {
            Trajectory tr = integrate(aug, lifted.packed(), s_end, tol);
            const double te = tr.t.back();
            const double rate = tr.states.back().head<4>().squaredNorm();
            const double ds = (span - te) / rate;
            s_end += ds;
            if (std::abs(ds) <= 1e-15 * std::max(1.0, std::abs(s_end))) break;
        }
        kt = integrate(aug, lifted.packed(), s_end, tol);
    }

    FlowEquivalenceReport rep;
    rep.min_radius = std::numeric_limits<double>::infinity();
    for (const VecX& v : kt.states) rep.min_radius = std::min(rep.min_radius, v.head<4>().squaredNorm());
    for (std::size_t i = 0; i < kt.states.size(); ++i) {
        rep.ks_energy_drift = std::max(rep.ks_energy_drift, std::abs(kt.energy[i] - kt.energy[0]));
        rep.ks_bilinear_drift = std::max(rep.ks_bilinear_drift, std::abs(kt.bilinear[i] - kt.bilinear[0]));
    }
    const bool planar = entry.q[2] == 0.0 && entry.p[2] == 0.0;

    std::vector<double> times;
    for (std::size_t i = 1; i + 1 < kt.t.size(); ++i) times.push_back(kt.t[i]);
    times.push_back(kt.t.back());
    SystemSpec cart{HamiltonianId::Planetocentric, mu, energy, params.primary_potential};
    Trajectory ct;
    try {
        ct = integrate(cart, entry.packed(), kt.t.back(), tol, times);
    } catch (const SingularityApproachError& e) {
        rep.cartesian_failed = true;
        rep.cartesian_message = e.what();
    } catch (const ConvergenceError& e) {
        rep.cartesian_failed = true;
        rep.cartesian_message = e.what();
    }

    std::vector<std::pair<double, PlanetoState>> projected;
    for (std::size_t i = 0; i < kt.states.size(); ++i) {
        const PlanetoState p = phase_project(KSState::unpack(kt.states[i]));
        if (planar) rep.max_planar_drift = std::max({rep.max_planar_drift, std::abs(p.q[2]), std::abs(p.p[2])});
        projected.emplace_back(kt.t[i], p);
    }
    if (rep.cartesian_failed) return rep;

    // Every KS sample time was requested as an exact Cartesian output.
    std::size_t j = 0;
    for (const auto& [t, p] : projected) {
        const double tol_t = 1e-13 * std::max(1.0, std::abs(t));
        while (j < ct.x.size() && std::abs(ct.x[j] - t) > tol_t && std::abs(ct.x[j]) < std::abs(t)) ++j;
        if (j == ct.x.size()) break;
        if (std::abs(ct.x[j] - t) > tol_t) continue;
        const VecX c = ct.states[j];
        const VecX k = p.packed();
        const double scale = 1.0 + std::max(k.head<3>().norm(), k.tail<3>().norm());
        rep.max_deviation = std::max(rep.max_deviation, (c - k).cwiseAbs().maxCoeff() / scale);
        ++rep.samples;
    }
    return rep;
}

}  // namespace ksreg
