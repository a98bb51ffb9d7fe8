#include "ksreg/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace ksreg {

bool InvariantCheck::passed() const { return std::isfinite(max_deviation) && max_deviation <= tolerance; }

bool SuiteResult::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const InvariantCheck& c) { return c.passed(); });
}

const InvariantCheck& SuiteResult::check(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return c;
    throw UsageError("suite " + suite + " has no invariant " + name);
}

bool VerifyReport::passed() const {
    return std::all_of(suites.begin(), suites.end(), [](const SuiteResult& s) { return s.passed(); });
}

std::vector<std::string> VerifyReport::failures() const {
    std::vector<std::string> out;
    for (const auto& s : suites)
        for (const auto& c : s.checks)
            if (!c.passed()) out.push_back(s.suite + "/" + c.name);
    return out;
}

const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names{"algebra", "kscore", "hj", "canonical", "dynamics"};
    return names;
}

long suite_sample_count(const std::string& suite, long requested) {
    if (requested < 1) throw UsageError("--samples must be at least 1");
    if (suite == "algebra") return std::min(requested, 2000L);
    if (suite == "hj") return std::min(requested, 20L);
    if (suite == "canonical") return std::min(requested, 40L);
    if (suite == "dynamics") return std::min(requested, 10L);
    return requested;
}

namespace {

constexpr double kMuRef = 0.01;
constexpr double kERef = -1.8;
constexpr double kInf = std::numeric_limits<double>::infinity();

using Rng = std::mt19937_64;

// Collects the running maximum of each named deviation.
class Checks {
public:
    void add(const std::string& name, double tol) { list_.push_back({name, 0.0, tol, 0}); }

    void record(const std::string& name, double dev) {
        InvariantCheck& c = find(name);
        ++c.samples;
        if (std::isnan(dev)) dev = kInf;
        c.max_deviation = std::max(c.max_deviation, dev);
    }

    // Runs `fn` and records its deviation; a library error counts as an infinite deviation.
    template <class F>
    void measure(const std::string& name, F&& fn) {
        double dev;
        try {
            dev = fn();
        } catch (const Error&) {
            dev = kInf;
        }
        record(name, dev);
    }

    std::vector<InvariantCheck> take() { return std::move(list_); }

private:
    InvariantCheck& find(const std::string& name) {
        for (auto& c : list_)
            if (c.name == name) return c;
        throw UsageError("unregistered invariant " + name);
    }
    std::vector<InvariantCheck> list_;
};

Vec3 gauss3(Rng& rng) {
    std::normal_distribution<double> g;
    return Vec3(g(rng), g(rng), g(rng));
}

Vec4 gauss4(Rng& rng) {
    std::normal_distribution<double> g;
    return Vec4(g(rng), g(rng), g(rng), g(rng));
}

Vec4 unit4(Rng& rng) { return gauss4(rng).normalized(); }

double uniform(Rng& rng, double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }

double log_uniform(Rng& rng, double a, double b) { return std::exp(uniform(rng, std::log(a), std::log(b))); }

Series random_series(Rng& rng, int order, double scale) {
    Series s(4, order);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = uniform(rng, -scale, scale);
    return s;
}

double max_diff(const Series& a, const Series& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

Series degree_band(const Series& a, int dmin, int dmax) {
    Series out(a.nvars(), a.order());
    const auto& lay = a.layout();
    for (std::size_t i = 0; i < a.size(); ++i)
        if (lay.degree(i) >= dmin && lay.degree(i) <= dmax) out[i] = a[i];
    return out;
}

std::array<double, 4> arr(const Vec4& v) { return {v[0], v[1], v[2], v[3]}; }

Params make_params(double mu, double energy, const Vec4& nu) {
    Params p;
    p.mu = mu;
    p.energy = energy;
    p.nu = nu;
    return p;
}

// ---------------------------------------------------------------------------

std::vector<InvariantCheck> suite_algebra(Rng& rng, long n) {
    constexpr int order = 6;
    Checks c;
    c.add("product_associativity", 1e-13);
    c.add("product_commutativity", 1e-14);
    c.add("distributivity", 1e-13);
    c.add("sqrt_squared", 1e-12);
    c.add("partial_of_antiderivative", 1e-13);
    c.add("substitution_keeps_degree", 0.0);
    c.add("substitution_value", 1e-12);
    for (long k = 0; k < n; ++k) {
        const Series a = random_series(rng, order, 0.5), b = random_series(rng, order, 0.5),
                     d = random_series(rng, order, 0.5);
        c.record("product_associativity", max_diff((a * b) * d, a * (b * d)));
        c.record("product_commutativity", max_diff(a * b, b * a));
        c.record("distributivity", max_diff(a * (b + d), a * b + a * d));

        Series p = random_series(rng, order, 0.1);
        p[0] = uniform(rng, 0.5, 2.0);
        const Series g = pow_real(p, 0.5);
        c.record("sqrt_squared", max_diff(g * g, p));

        const Series low = degree_band(a, 0, order - 1);
        const int var = static_cast<int>(k % 4);
        c.record("partial_of_antiderivative", max_diff(partial(antiderivative(low, var), var), low));

        const int deg = static_cast<int>(k % (order + 1));
        const Series band = degree_band(a, deg, deg);
        Eigen::HouseholderQR<Mat4> qr(Eigen::Matrix4d::NullaryExpr([&](Eigen::Index, Eigen::Index) {
            return std::normal_distribution<double>()(rng);
        }));
        const Mat4 q = qr.householderQ();
        const double scale = uniform(rng, 0.5, 2.0);
        SquareMatrix<double> m{};
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = q(i, j);
        const Series sub = linear_substitute(band, m, scale);
        c.record("substitution_keeps_degree", max_diff(sub, degree_band(sub, deg, deg)));
        const Vec4 u = gauss4(rng) * 0.5;
        const double lhs = eval(sub, arr(u));
        const double rhs = eval(band, arr(Vec4(scale * q.transpose() * u)));
        c.record("substitution_value", std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
    }
    return c.take();
}

std::vector<InvariantCheck> suite_kscore(Rng& rng, long n) {
    Checks c;
    c.add("ks_matrix_orthogonality", 1e-13);
    c.add("projection_norm", 1e-13);
    c.add("fourth_component_vanishes", 1e-14);
    c.add("snu_orthogonality", 1e-13);
    c.add("snu_intertwining", 1e-13);
    c.add("bilinear_fibre_invariance", 1e-13);
    c.add("bilinear_snu_scaling", 1e-13);
    c.add("snu_conjugation", 1e-11);
    c.add("lift_bilinear_zero", 1e-14);
    c.add("lift_round_trip", 1e-13);
    for (long k = 0; k < n; ++k) {
        Vec4 u = unit4(rng) * uniform(rng, 1e-3, 10.0);
        const double uu = u.squaredNorm();
        const Mat4 a = ks_matrix(u);
        c.record("ks_matrix_orthogonality", (a * a.transpose() - uu * Mat4::Identity()).cwiseAbs().maxCoeff() / uu);
        c.record("projection_norm", std::abs(ks_project(u).norm() - uu) / uu);
        c.record("fourth_component_vanishes", std::abs((a * u)[3]) / uu);

        const Vec4 nu = gauss4(rng), U = gauss4(rng);
        const double nn = nu.squaredNorm();
        const SnuMatrices sm = snu_matrix(nu);
        c.record("snu_orthogonality", (sm.s * sm.s.transpose() - nn * Mat4::Identity()).cwiseAbs().maxCoeff() / nn);
        c.record("snu_intertwining",
                 (ks_project(sm.s * u) - sm.r * ks_project(u)).cwiseAbs().maxCoeff() / (nn * uu));
        const double l = bilinear(u, U);
        const double scale = u.norm() * U.norm();
        const Mat4 s0 = s0_alpha(uniform(rng, -std::numbers::pi, std::numbers::pi));
        c.record("bilinear_fibre_invariance", std::abs(bilinear(s0 * u, s0 * U) - l) / scale);
        c.record("bilinear_snu_scaling", std::abs(bilinear(sm.s * u, sm.s * U) - nn * l) / (nn * scale));

        // K_I(S u, S^-T U) = |nu|^2 K_{|nu|^2 Pi}(u, U) near the collision point.
        const Vec4 nu_c = unit4(rng) * uniform(rng, 0.9, 1.1);
        const Vec4 u_c = unit4(rng) * uniform(rng, 1e-3, 0.3);
        const SnuMatrices mc = snu_matrix(nu_c);
        const double ncn = nu_c.squaredNorm();
        c.measure("snu_conjugation", [&] {
            const double lhs = ham_ks_identity(KSState{mc.s * u_c, mc.s.transpose().inverse() * U}, kERef, kMuRef);
            const double rhs = ncn * ham_ks_general(KSState{u_c, U}, ncn, mc.pi, kERef, kMuRef);
            return std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs));
        });

        const PlanetoState x{gauss3(rng), gauss3(rng)};
        const KSState lift = chart_lift(x);
        c.record("lift_bilinear_zero", std::abs(bilinear(lift.u, lift.U)) / (lift.u.norm() * lift.U.norm() + 1.0));
        const PlanetoState back = phase_project(lift);
        c.record("lift_round_trip",
                 (back.packed() - x.packed()).cwiseAbs().maxCoeff() / (1.0 + x.packed().cwiseAbs().maxCoeff()));
    }
    return c.take();
}

std::vector<InvariantCheck> suite_hj(Rng& rng, long n) {
    constexpr int order = 8;
    Checks c;
    c.add("residual_through_order_minus_one", 1e-9);
    c.add("linear_coefficients", 1e-12);
    c.add("wtilde_u1_coefficient", 1e-12);
    c.add("wtilde_boundary_zero", 0.0);
    c.add("j4_relative", 1e-9);
    c.add("planar_j2_magnitude", 1e-10);
    c.add("planar_linear_coefficients", 1e-12);
    c.add("planar_residual", 1e-9);
    c.add("fibre_equivariance", 1e-11);
    c.add("derivative_paths_agree", 1e-7);
    for (double mu : {0.01, 0.1, 0.5}) {
        for (double energy : {kERef - 0.05, kERef + 0.05}) {
            for (long k = 0; k < n; ++k) {
                const Vec4 nu = unit4(rng) * uniform(rng, 0.95, 1.05);
                c.measure("residual_through_order_minus_one", [&] {
                    const CompleteIntegral ci = complete_integral(make_params(mu, energy, nu), order);
                    const double sq = std::sqrt(8 * mu);
                    double lin = 0.0;
                    for (int j = 0; j < 4; ++j) {
                        Exponents e{};
                        e[static_cast<std::size_t>(j)] = 1;
                        lin = std::max(lin, std::abs(ci.w.coeff(e) - sq * nu[j]));
                    }
                    c.record("linear_coefficients", lin);
                    const double w1 = std::sqrt(8 * (mu + ci.params.kappa) * nu.squaredNorm());
                    c.record("wtilde_u1_coefficient", std::abs(ci.source.wtilde.coeff({1, 0, 0, 0}) - w1));
                    double boundary = 0.0;
                    const auto& lay = ci.source.wtilde.layout();
                    for (std::size_t i = 0; i < ci.source.wtilde.size(); ++i)
                        if (lay.exponents(i)[0] == 0) boundary = std::max(boundary, std::abs(ci.source.wtilde[i]));
                    c.record("wtilde_boundary_zero", boundary);
                    return max_abs_coeff(residual(ci), 0, order - 1) / sq;
                });
            }
        }
        for (long k = 0; k < n; ++k) {
            const double energy = uniform(rng, kERef - 0.1, kERef + 0.1);
            const Vec4 nu = unit4(rng);
            c.measure("j4_relative", [&] {
                const double ref = 64 * mu * mu;
                return std::abs(j4(mu, energy, nu, 6) - ref) / ref;
            });
            const double alpha = uniform(rng, -std::numbers::pi, std::numbers::pi);
            const double kappa = uniform(rng, -0.2, 0.2) * mu;
            c.measure("planar_j2_magnitude", [&] { return std::abs(std::abs(j2(alpha, kappa, energy, mu, 6)) - 4.0); });
            c.measure("planar_residual", [&] {
                const PlanarHJSolution s = solve_planar(alpha, kappa, energy, mu, order);
                const double w = std::sqrt(8 * (mu + kappa));
                c.record("planar_linear_coefficients",
                         std::max(std::abs(s.w2.coeff({1, 0, 0, 0}) - w * std::cos(alpha)),
                                  std::abs(s.w2.coeff({0, 1, 0, 0}) - w * std::sin(alpha))));
                return max_abs_coeff(planar_residual(s), 0, order - 1) / std::sqrt(8 * mu);
            });
        }
    }
    const long m = std::max(1L, n / 4);
    for (long k = 0; k < m; ++k) {
        const Vec4 nu = unit4(rng) * uniform(rng, 0.97, 1.03);
        const Mat4 s0 = s0_alpha(uniform(rng, -3.0, 3.0));
        const Vec4 u = unit4(rng) * 0.05;
        c.measure("fibre_equivariance", [&] {
            const CompleteIntegral a = complete_integral(make_params(kMuRef, kERef, nu), order);
            const CompleteIntegral b = complete_integral(make_params(kMuRef, kERef, s0 * nu), order);
            return std::abs(eval(a.w, arr(u)) - eval(b.w, arr(Vec4(s0 * u))));
        });
        const Params p = make_params(kMuRef, kERef, nu);
        const int dir = static_cast<int>(k % 4);
        c.measure("derivative_paths_agree", [&] {
            const Series a = param_derivative(p, order, dir, DerivativeMethod::Propagation);
            const Series b = param_derivative(p, order, dir, DerivativeMethod::Richardson);
            return max_diff(a, b) / std::max(1.0, max_abs_coeff(a, 0, order));
        });
    }
    return c.take();
}

PlanetoState inbound(Rng& rng, double sigma) {
    const Vec3 q = gauss3(rng).normalized();
    Vec3 t = gauss3(rng);
    t = (t - t.dot(q) * q).normalized();
    const double th = uniform(rng, 0.3, 1.2);
    return sphere_entry(q, -std::cos(th) * q + std::sin(th) * t, sigma, kERef, kMuRef);
}

double qhat(const Eigen::VectorXd& x, int i) { return ks_project(x.head<4>())[i]; }
double phat(const Eigen::VectorXd& x, int i) { return phase_project(KSState{x.head<4>(), x.tail<4>()}).p[i]; }

double symplectic_defect(const Eigen::Matrix<double, 8, 8>& j) {
    Eigen::Matrix<double, 8, 8> om = Eigen::Matrix<double, 8, 8>::Zero();
    om.topRightCorner<4, 4>() = Mat4::Identity();
    om.bottomLeftCorner<4, 4>() = -Mat4::Identity();
    return (j.transpose() * om * j - om).cwiseAbs().maxCoeff();
}

std::vector<InvariantCheck> suite_canonical(Rng& rng, long n) {
    Checks c;
    c.add("nu_hat_unit_norm", 1e-9);
    c.add("inverse_round_trip", 1e-9);
    c.add("nnu_bilinear_zero", 1e-12);
    c.add("symplectic", 1e-7);
    c.add("chart_agreement", 1e-9);
    c.add("bracket_q_p", 1e-8);
    c.add("bracket_p_p", 1e-8);
    c.add("integral_brackets", 1e-7);
    c.add("gradient_rank_deficit", 0.01);
    c.add("collision_leaf_rank", 0.0);
    c.add("encounter_reversibility", 1e-8);
    c.add("encounter_chart_independence", 1e-9);
    c.add("planar_vs_spatial", 1e-7);

    CanonicalOptions o8;
    o8.order = 8;
    Chi4 chi(kMuRef, kERef, o8);
    std::vector<PlanetoState> states;
    for (long k = 0; k < n; ++k) {
        const double r = log_uniform(rng, 1e-5, 2e-4);
        const PlanetoState st = sphere_entry(gauss3(rng), gauss3(rng), r, kERef, kMuRef);
        states.push_back(st);
        const KSState s = chart_lift(st);
        c.measure("nu_hat_unit_norm", [&] {
            const ActionAngleState a = chi.forward(s);
            c.record("nnu_bilinear_zero", std::abs(bilinear(a.n, a.nu)));
            const KSState back = chi.inverse(a.n, a.nu).state;
            const double scale = 1.0 + s.packed().cwiseAbs().maxCoeff();
            c.record("inverse_round_trip", (back.packed() - s.packed()).cwiseAbs().maxCoeff() / scale);
            return std::abs(a.nu.norm() - 1.0);
        });
        if (k % 3 == 0) c.measure("symplectic", [&] { return symplectic_defect(chi4_jacobian(s, chi)); });
        c.measure("chart_agreement", [&] {
            const FirstIntegralTriple f = cartesian_integrals(st, chi);
            return f.both_charts ? f.chart_discrepancy : kInf;
        });

        const KSState g = chart_lift(PlanetoState{gauss3(rng), gauss3(rng)});
        Eigen::VectorXd x(8);
        x << g.u, g.U;
        const int i = static_cast<int>(k % 3), j = static_cast<int>((k / 3) % 3);
        c.measure("bracket_q_p", [&] {
            const double b = poisson_bracket([&](const Eigen::VectorXd& y) { return qhat(y, i); },
                                             [&](const Eigen::VectorXd& y) { return phat(y, j); }, x, 8);
            return std::abs(b - (i == j ? 1.0 : 0.0));
        });
        c.measure("bracket_p_p", [&] {
            return std::abs(poisson_bracket([&](const Eigen::VectorXd& y) { return phat(y, i); },
                                            [&](const Eigen::VectorXd& y) { return phat(y, (i + 1) % 3); }, x, 8));
        });
        c.measure("collision_leaf_rank", [&] {
            return std::abs(numeric_rank(collision_leaf_jacobian(kMuRef, kERef, unit4(rng), 8)) - 5.0);
        });
    }
    c.measure("integral_brackets", [&] {
        const CompletenessReport rep = completeness_check(states, kERef, kMuRef, o8);
        c.record("gradient_rank_deficit", 1.0 - rep.rank_fraction());
        return std::max({rep.max_h_n2, rep.max_h_nz, rep.max_n2_nz});
    });

    const double sigma = 1e-3;
    Params p = make_params(kMuRef, kERef, Vec4(1, 0, 0, 0));
    const long m = std::min(n, 3L);
    for (long k = 0; k < m; ++k) {
        const PlanetoState en = inbound(rng, sigma);
        c.measure("encounter_reversibility", [&] {
            const EncounterResult fwd = encounter_map(en, sigma, p);
            EncounterOptions back;
            back.direction = -1;
            const EncounterResult rev = encounter_map(fwd.exit, sigma, p, back);
            return (rev.exit.packed() - en.packed()).cwiseAbs().maxCoeff() / en.packed().cwiseAbs().maxCoeff();
        });
        if (k >= 2) continue;
        c.measure("encounter_chart_independence", [&] {
            EncounterOptions plus, minus;
            plus.chart = Chart::PlusX;
            minus.chart = Chart::MinusX;
            const EncounterResult a = encounter_map(en, sigma, p, plus);
            const EncounterResult b = encounter_map(en, sigma, p, minus);
            return (a.exit.packed() - b.exit.packed()).cwiseAbs().maxCoeff();
        });
        const double phi = uniform(rng, -std::numbers::pi, std::numbers::pi);
        const double th = uniform(rng, -1.2, 1.2);
        const Vec3 q(std::cos(phi), std::sin(phi), 0.0);
        const Vec3 t(-std::sin(phi), std::cos(phi), 0.0);
        const PlanetoState pe = sphere_entry(q, -std::cos(th) * q + std::sin(th) * t, sigma, kERef, kMuRef);
        c.measure("planar_vs_spatial", [&] {
            const EncounterResult a = encounter_map(pe, sigma, p);
            const PlanarEncounterResult b = planar_encounter_map(pe, sigma, p);
            return (a.exit.packed() - b.exit.packed()).cwiseAbs().maxCoeff();
        });
    }
    return c.take();
}

// Bound arc about the secondary whose pericentre stays well away from it.
PlanetoState near_circular(Rng& rng) {
    const double r = uniform(rng, 0.01, 0.03);
    const Vec3 q = gauss3(rng).normalized();
    Vec3 t = gauss3(rng);
    t = (t - t.dot(q) * q).normalized();
    const double v = std::sqrt(kMuRef / r);
    return {r * q, v * (uniform(rng, 0.85, 1.15) * t + uniform(rng, -0.2, 0.2) * q)};
}

std::vector<InvariantCheck> suite_dynamics(Rng& rng, long n) {
    Checks c;
    c.add("ks_energy_drift", 1e-10);
    c.add("ks_bilinear_drift", 1e-11);
    c.add("energy_drift_per_step_budget", 1.0);
    c.add("ks_cartesian_equivalence", 1e-8);
    const Tolerances tol;
    for (long k = 0; k < n; ++k) {
        const PlanetoState entry = near_circular(rng);
        const double energy = ham_planeto(entry, kMuRef);
        const double span = k % 2 ? -5.0 : 5.0;
        c.measure("ks_energy_drift", [&] {
            const Trajectory tr = integrate({HamiltonianId::KS, kMuRef, energy, true}, chart_lift(entry).packed(), span);
            double de = 0, dl = 0;
            for (std::size_t i = 0; i < tr.states.size(); ++i) {
                de = std::max(de, std::abs(tr.energy[i]));
                dl = std::max(dl, std::abs(tr.bilinear[i]));
            }
            c.record("ks_bilinear_drift", dl);
            return de;
        });
        c.measure("energy_drift_per_step_budget", [&] {
            const Trajectory tr = integrate({HamiltonianId::Planetocentric, kMuRef, energy, true}, entry.packed(), 0.5);
            double drift = 0;
            for (double e : tr.energy) drift = std::max(drift, std::abs(e - tr.energy.front()));
            const double budget = 10.0 * tol.rel * static_cast<double>(tr.stats.accepted) * std::max(1.0, std::abs(energy));
            return drift / budget;
        });
        c.measure("ks_cartesian_equivalence", [&] {
            const FlowEquivalenceReport rep = flow_equivalence(entry, 0.3, make_params(kMuRef, energy, Vec4(1, 0, 0, 0)));
            return rep.cartesian_failed ? kInf : rep.max_deviation;
        });
    }
    return c.take();
}

Rng suite_rng(std::uint64_t seed, std::size_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index)};
    return Rng(seq);
}

}  // namespace

SuiteResult run_suite(const std::string& suite, long samples, std::uint64_t seed) {
    const auto& names = suite_names();
    const auto it = std::find(names.begin(), names.end(), suite);
    if (it == names.end()) throw UsageError("unknown suite \"" + suite + "\"");
    SuiteResult r;
    r.suite = suite;
    r.samples = suite_sample_count(suite, samples);
    Rng rng = suite_rng(seed, static_cast<std::size_t>(it - names.begin()));
    if (suite == "algebra") r.checks = suite_algebra(rng, r.samples);
    else if (suite == "kscore") r.checks = suite_kscore(rng, r.samples);
    else if (suite == "hj") r.checks = suite_hj(rng, r.samples);
    else if (suite == "canonical") r.checks = suite_canonical(rng, r.samples);
    else r.checks = suite_dynamics(rng, r.samples);
    return r;
}

VerifyReport run_verify(const std::string& suite, long samples, std::uint64_t seed) {
    VerifyReport rep;
    rep.seed = seed;
    rep.samples = samples;
    if (suite == "all") {
        for (const auto& s : suite_names()) rep.suites.push_back(run_suite(s, samples, seed));
    } else {
        rep.suites.push_back(run_suite(suite, samples, seed));
    }
    return rep;
}

Json to_json(const VerifyReport& r) {
    Json j;
    j["seed"] = r.seed;
    j["samples"] = r.samples;
    j["passed"] = r.passed();
    Json suites = Json::array();
    for (const auto& s : r.suites) {
        Json js;
        js["suite"] = s.suite;
        js["samples"] = s.samples;
        js["passed"] = s.passed();
        Json inv = Json::array();
        for (const auto& c : s.checks) {
            Json jc;
            jc["name"] = c.name;
            jc["max_deviation"] = c.max_deviation;
            jc["tolerance"] = c.tolerance;
            jc["samples"] = c.samples;
            jc["passed"] = c.passed();
            inv.push_back(std::move(jc));
        }
        js["invariants"] = std::move(inv);
        suites.push_back(std::move(js));
    }
    j["suites"] = std::move(suites);
    j["failures"] = r.failures();
    return j;
}

}  // namespace ksreg
