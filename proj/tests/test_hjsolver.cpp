#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "ksreg/errors.hpp"
#include "ksreg/hjsolver.hpp"
#include "test_util.hpp"

namespace ksreg {
namespace {

using testing::max_abs_diff;

constexpr double kMu = 0.01;
constexpr double kE = -1.8;

Exponents ex(int a, int b = 0, int c = 0, int d = 0) {
    return {static_cast<std::uint8_t>(a), static_cast<std::uint8_t>(b), static_cast<std::uint8_t>(c),
            static_cast<std::uint8_t>(d)};
}

Vec4 random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    return Vec4(g(rng), g(rng), g(rng), g(rng)).normalized();
}

Params params(double mu, double energy, const Vec4& nu, double kappa = 0.0) {
    Params p;
    p.mu = mu;
    p.energy = energy;
    p.nu = nu;
    p.kappa = kappa;
    return p;
}

std::array<double, 4> arr(const Vec4& v) { return {v[0], v[1], v[2], v[3]}; }

// Scalar evaluation of the rotated right-hand side from the closed-form kscore maps.
double direct_rhs(const Params& p, const Vec4& u, const Vec4& U) {
    const SnuMatrices m = snu_matrix(p.nu);
    const double lam = p.nu.squaredNorm();
    const Vec3 w = m.pi.transpose() * Vec3::UnitZ();
    const Vec3 e = m.pi.transpose() * Vec3::UnitX();
    const Vec3 q = ks_project(u);
    const double uu = u.squaredNorm();
    const Vec4 b = vector_potential(u, w);
    double s = p.mu + p.kappa + 0.5 * lam * lam * lam * uu * w.cross(q).squaredNorm() +
               lam * uu * p.shifted_energy() +
               (1 - p.mu) * lam * uu * (1 / (lam * q + e).norm() - 1 + lam * q.dot(e));
    for (int j = 1; j < 4; ++j) s -= std::pow(U[j] - lam * lam * b[j], 2) / (8 * lam);
    return lam * lam * b[0] + std::sqrt(8 * lam) * std::sqrt(s);
}

TEST(BuildRhs, ConstantTermAtZeroMomenta) {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 5; ++t) {
        Vec4 nu = random_unit(rng) * 1.03;
        const Params p = params(kMu, kE, nu, 0.002);
        const Series z(4, 6);
        const Series f = build_rhs(p, z, z, z);
        EXPECT_NEAR(f[0], std::sqrt(8 * nu.squaredNorm() * (kMu + 0.002)), 1e-15);
    }
}

TEST(BuildRhs, MatchesDirectEvaluation) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g;
    for (int t = 0; t < 10; ++t) {
        const Params p = params(0.05, kE, random_unit(rng) * 1.02, 0.001);
        std::array<Series, 3> ps;
        for (auto& s : ps) s = testing::random_series(rng, 4, 10, 0.3, 2);
        for (auto& s : ps) s[0] = 0.0;
        const Series f = build_rhs(p, ps[0], ps[1], ps[2]);
        for (int k = 0; k < 5; ++k) {
            Vec4 u(g(rng), g(rng), g(rng), g(rng));
            u *= 0.01 / u.norm();
            Vec4 U;
            U[0] = 0;
            for (int j = 0; j < 3; ++j) U[j + 1] = eval(ps[static_cast<std::size_t>(j)], arr(u));
            EXPECT_NEAR(eval(f, arr(u)), direct_rhs(p, u, U), 1e-13);
        }
    }
}

TEST(BuildRhs, OmegaTermVanishesOnThirdAxis) {
    // nu = e1 gives omega = (0, 0, 1); u = (t, 0, t, 0) / sqrt(2) projects onto (0, 0, t^2).
    const Params p = params(kMu, kE, Vec4(1, 0, 0, 0));
    const double t = 0.01;
    const Vec4 u = Vec4(t, 0, t, 0) / std::sqrt(2.0);
    const Vec3 q = ks_project(u);
    EXPECT_NEAR(q[2], t * t, 1e-18);
    EXPECT_EQ(Vec3::UnitZ().cross(q).squaredNorm(), 0.0);
    const Series z(4, 12);
    const Series f = build_rhs(p, z, z, z);
    EXPECT_NEAR(eval(f, arr(u)), direct_rhs(p, u, Vec4::Zero()), 1e-14);
}

TEST(BuildRhs, EvenApartFromMagneticTerm) {
    std::mt19937_64 rng(3);
    const Params p = params(0.1, kE, random_unit(rng));
    const Series z(4, 4);
    const Series f = build_rhs(p, z, z, z);
    const auto& lay = f.layout();
    // The b1 term is cubic; every other contribution is even in u.
    for (std::size_t i = 0; i < f.size(); ++i) {
        const int d = lay.degree(i);
        if (d % 2 == 1 && d != 3) EXPECT_EQ(f[i], 0.0) << "degree " << d;
    }
    // Degree-3 band equals lambda^2 b1 exactly.
    const SnuMatrices m = snu_matrix(p.nu);
    const Vec3 w = m.pi.transpose() * Vec3::UnitZ();
    std::mt19937_64 r2(4);
    std::normal_distribution<double> g;
    for (int k = 0; k < 5; ++k) {
        const Vec4 u(g(r2), g(r2), g(r2), g(r2));
        double band = 0.0;
        const auto mono = monomial_values(4, 4, arr(u));
        for (std::size_t i = lay.degree_begin(3); i < lay.degree_begin(4); ++i) band += f[i] * mono[i];
        EXPECT_NEAR(band, vector_potential(u, w)[0], 1e-12 * std::pow(u.norm(), 3));
    }
}

TEST(BuildRhs, NonPositiveRootThrows) {
    const Series z(4, 4);
    EXPECT_THROW(build_rhs(params(kMu, kE, Vec4(1, 0, 0, 0), -0.02), z, z, z), ParameterError);
}

TEST(SolveWtilde, LeadingTermsAndBoundary) {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 5; ++t) {
        const Vec4 nu = random_unit(rng) * (0.97 + 0.01 * t);
        const double kappa = 0.001 * (t - 2);
        const Params p = params(kMu, kE, nu, kappa);
        const HJSolution s = solve_wtilde(p, 8);
        const double lam = nu.squaredNorm();
        EXPECT_NEAR(s.wtilde.coeff(ex(1)), std::sqrt(8 * (kMu + kappa) * lam), 1e-12 * std::sqrt(8 * kMu));
        const double c3 = std::sqrt(2.0) * p.shifted_energy() * std::pow(lam, 1.5) / std::sqrt(kMu + kappa);
        EXPECT_NEAR(s.wtilde.coeff(ex(1, 2)), c3, 1e-12 * std::abs(c3));
        EXPECT_NEAR(s.wtilde.coeff(ex(1, 0, 0, 2)), c3, 1e-12 * std::abs(c3));
        EXPECT_NEAR(s.wtilde.coeff(ex(3)), c3 / 3, 1e-12 * std::abs(c3));
        const auto& lay = s.wtilde.layout();
        for (std::size_t i = 0; i < s.wtilde.size(); ++i)
            if (lay.exponents(i)[0] == 0) ASSERT_EQ(s.wtilde[i], 0.0);
        EXPECT_LE(s.passes, 8 + 2);
        EXPECT_TRUE(s.truncated);
        EXPECT_NEAR(s.omega.norm(), 1.0, 1e-14);
        EXPECT_NEAR(s.e_vec.dot(s.omega), 0.0, 1e-14);
    }
}

TEST(SolveWtilde, NegativeBranchFlipsLinearTerm) {
    HJOptions opt;
    opt.branch = RootBranch::Negative;
    const HJSolution s = solve_wtilde(params(kMu, kE, Vec4(1, 0, 0, 0)), 6, opt);
    EXPECT_NEAR(s.wtilde.coeff(ex(1)), -std::sqrt(8 * kMu), 1e-15);
}

TEST(SolveWtilde, RejectsBadOrderAndParameters) {
    EXPECT_THROW(solve_wtilde(params(kMu, kE, Vec4(1, 0, 0, 0)), 0), DimensionError);
    EXPECT_THROW(solve_wtilde(params(kMu, kE, Vec4(1, 0, 0, 0)), 17), DimensionError);
    EXPECT_THROW(solve_wtilde(params(kMu, kE, Vec4::Zero()), 4), ParameterError);
    EXPECT_THROW(solve_wtilde(params(kMu, kE, Vec4(1, 0, 0, 0), -kMu), 4), ParameterError);
}

TEST(AssembleW, IdentityFrameAndLinearPart) {
    const CompleteIntegral e1 = complete_integral(params(kMu, kE, Vec4(1, 0, 0, 0)), 8);
    EXPECT_LT(max_abs_diff(e1.w, e1.source.wtilde), 1e-15 * max_abs_coeff(e1.w, 0, 8));
    std::mt19937_64 rng(6);
    for (int t = 0; t < 10; ++t) {
        const Vec4 nu = random_unit(rng);
        const CompleteIntegral ci = complete_integral(params(kMu, kE, nu), 8);
        for (int j = 0; j < 4; ++j)
            EXPECT_NEAR(ci.w[1 + static_cast<std::size_t>(j)], std::sqrt(8 * kMu) * nu[j], 1e-12);
    }
    HJSolution wrong = solve_wtilde(params(kMu, kE, Vec4(1.1, 0, 0, 0), 0.0), 4);
    EXPECT_THROW(assemble_W(wrong), ParameterError);
}

TEST(AssembleW, FibreEquivariance) {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 5; ++t) {
        const Vec4 nu = random_unit(rng) * 1.02;
        const double alpha = std::uniform_real_distribution<double>(-3, 3)(rng);
        const Mat4 s0 = s0_alpha(alpha);
        const CompleteIntegral a = complete_integral(params(kMu, kE, nu), 8);
        const CompleteIntegral b = complete_integral(params(kMu, kE, s0 * nu), 8);
        // W(u, nu) = W(S0 u, S0 nu): substitute u -> S0 u into b.
        SquareMatrix<double> m{};
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) m[i][j] = s0(j, i);  // linear_substitute uses M^T
        const Series bs = linear_substitute(b.w, m, 1.0);
        const auto& lay = a.w.layout();
        for (int d = 0; d <= 8; ++d) {
            double band = 0.0, diff = 0.0;
            for (std::size_t i = lay.degree_begin(d); i < lay.degree_begin(d + 1); ++i) {
                band = std::max(band, std::abs(a.w[i]));
                diff = std::max(diff, std::abs(a.w[i] - bs[i]));
            }
            EXPECT_LE(diff, 1e-11 * std::max(1.0, band)) << "degree " << d;
        }
    }
}

TEST(Residual, VanishesThroughOrderMinusOne) {
    std::mt19937_64 rng(8);
    for (double mu : {0.005, 0.01, 0.1, 0.5}) {
        for (int t = 0; t < 3; ++t) {
            const Vec4 nu = random_unit(rng) * (0.95 + 0.05 * t);
            const CompleteIntegral ci = complete_integral(params(mu, kE + 0.05 * (t - 1), nu), 8);
            const Series r = residual(ci);
            EXPECT_NEAR(r[0], 0.0, 1e-15);
            EXPECT_LE(max_abs_coeff(r, 0, 7), 1e-9 * std::sqrt(8 * mu)) << "mu " << mu;
        }
    }
}

TEST(Residual, HigherOrdersRelativeToCoefficientScale) {
    // Above N = 8 at small mu the coefficients of W grow like R^-d with
    // R ~ 0.13; the absolute bound is applied per degree relative to that scale.
    std::mt19937_64 rng(9);
    for (int n : {10, 12}) {
        const CompleteIntegral ci = complete_integral(params(kMu, kE, random_unit(rng)), n);
        const Series r = residual(ci);
        for (int d = 0; d < n; ++d) {
            const double scale = std::max(1.0, max_abs_coeff(ci.w, d + 1, d + 1) * max_abs_coeff(ci.w, 1, 1));
            EXPECT_LE(max_abs_coeff(r, d, d), 1e-9 * std::sqrt(8 * kMu) * scale) << "N " << n << " degree " << d;
        }
    }
}

TEST(Residual, PointwiseSamplingMatchesSeries) {
    std::mt19937_64 rng(10);
    std::normal_distribution<double> g;
    const Params p = params(kMu, kE, random_unit(rng));
    const CompleteIntegral ci = complete_integral(p, 8);
    const Series r = residual(ci);
    std::array<Series, 4> grad;
    for (int i = 0; i < 4; ++i) grad[static_cast<std::size_t>(i)] = partial(ci.w, i);
    for (int k = 0; k < 20; ++k) {
        Vec4 u(g(rng), g(rng), g(rng), g(rng));
        u *= 1e-2 / u.norm();
        KSState s;
        s.u = u;
        for (int i = 0; i < 4; ++i) s.U[i] = eval(grad[static_cast<std::size_t>(i)], arr(u));
        const double direct = ham_ks_identity(s, p.energy, p.mu);
        // Through degree 7 the series residual is zero; the pointwise value is
        // the truncation tail, which the series predicts at degree 8.
        EXPECT_NEAR(direct, eval(r, arr(u)), 1e-14);
        EXPECT_LT(std::abs(direct), 1e-12);
    }
}

TEST(Residual, TailScalesWithDegree) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    const int n = 6;
    const Params p = params(0.1, kE, random_unit(rng));
    const CompleteIntegral ci = complete_integral(p, n);
    std::array<Series, 4> grad;
    for (int i = 0; i < 4; ++i) grad[static_cast<std::size_t>(i)] = partial(ci.w, i);
    Vec4 dir(g(rng), g(rng), g(rng), g(rng));
    dir.normalize();
    std::vector<double> lx, ly;
    for (double rad : {0.004, 0.008, 0.016, 0.032}) {
        KSState s;
        s.u = dir * rad;
        for (int i = 0; i < 4; ++i) s.U[i] = eval(grad[static_cast<std::size_t>(i)], arr(s.u));
        lx.push_back(std::log(rad));
        ly.push_back(std::log(std::abs(ham_ks_identity(s, p.energy, p.mu))));
    }
    const double slope = (ly.back() - ly.front()) / (lx.back() - lx.front());
    EXPECT_NEAR(slope, n, 0.6);
}

TEST(Convergence, GeometricDecayInOrder) {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> g;
    const Params p = params(kMu, kE, random_unit(rng));
    Vec4 u(g(rng), g(rng), g(rng), g(rng));
    u *= 0.05 / u.norm();
    std::vector<double> diffs;
    for (int n = 4; n <= 12; n += 2) {
        const double a = eval(complete_integral(p, n).w, arr(u));
        const double b = eval(complete_integral(p, n + 2).w, arr(u));
        diffs.push_back(std::abs(a - b));
    }
    for (std::size_t i = 1; i < diffs.size(); ++i) EXPECT_LT(diffs[i], diffs[i - 1]);
    EXPECT_LT(diffs.back(), 1e-4 * diffs.front());
    const double radius = convergence_radius_estimate(complete_integral(p, 12).w);
    EXPECT_GT(radius, 0.08);
    EXPECT_LT(radius, 0.3);
}

TEST(ParamDerivative, PathsAgree) {
    std::mt19937_64 rng(13);
    for (int t = 0; t < 3; ++t) {
        const Params p = params(kMu, kE, random_unit(rng) * 1.01);
        for (int l = 0; l < 4; ++l) {
            const Series a = param_derivative(p, 8, l, DerivativeMethod::Propagation);
            const Series b = param_derivative(p, 8, l, DerivativeMethod::Richardson);
            const double scale = std::max(1.0, max_abs_coeff(a, 0, 8));
            EXPECT_LT(max_abs_diff(a, b), 1e-7 * scale);
            // Linear part: d/dnu_l of sqrt(8 mu) nu . u.
            for (int i = 0; i < 4; ++i)
                EXPECT_NEAR(a[1 + static_cast<std::size_t>(i)], i == l ? std::sqrt(8 * kMu) : 0.0, 1e-12);
        }
    }
}

TEST(ParamDerivative, EquivariantUnderFibreRotation) {
    // W(S0 u, S0 nu) = W(u, nu) implies grad_nu W(S0 u, S0 nu) = S0 grad_nu W(u, nu).
    std::mt19937_64 rng(14);
    std::normal_distribution<double> g;
    const Vec4 nu = random_unit(rng);
    const Mat4 s0 = s0_alpha(0.7);
    const IntegralJet a = integral_jet(kMu, kE, nu, 8);
    const IntegralJet b = integral_jet(kMu, kE, s0 * nu, 8);
    for (int k = 0; k < 5; ++k) {
        Vec4 u(g(rng), g(rng), g(rng), g(rng));
        u *= 0.03 / u.norm();
        const auto va = a.at(u);
        const auto vb = b.at(s0 * u);
        EXPECT_NEAR(va.w, vb.w, 1e-13);
        EXPECT_LT((s0 * va.grad_p - vb.grad_p).cwiseAbs().maxCoeff(), 1e-11);
        EXPECT_LT((s0 * va.grad_u - vb.grad_u).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Jacobians, J4IsSixtyFourMuSquared) {
    std::mt19937_64 rng(15);
    for (double mu : {0.01, 0.1, 0.5}) {
        const double j = j4(mu, kE, random_unit(rng), 6);
        EXPECT_NEAR(j, 64 * mu * mu, 1e-9 * 64 * mu * mu);
    }
}

TEST(Planar, LinearPartAndJ2) {
    for (double alpha : {0.0, std::numbers::pi / 4, std::numbers::pi / 2, 2.0, -1.3}) {
        const double kappa = 0.001;
        const PlanarHJSolution s = solve_planar(alpha, kappa, kE, kMu, 10);
        const double c = std::sqrt(8 * (kMu + kappa));
        EXPECT_NEAR(s.w2.coeff({1, 0, 0, 0}), c * std::cos(alpha), 1e-12);
        EXPECT_NEAR(s.w2.coeff({0, 1, 0, 0}), c * std::sin(alpha), 1e-12);
        EXPECT_NEAR(std::abs(j2(alpha, kappa, kE, kMu, 6)), 4.0, 1e-10);
        const auto& lay = s.wtilde.layout();
        for (std::size_t i = 0; i < s.wtilde.size(); ++i)
            if (lay.exponents(i)[0] == 0) ASSERT_EQ(s.wtilde[i], 0.0);
    }
}

TEST(Planar, ResidualVanishes) {
    for (double alpha : {0.3, 1.9, -2.4}) {
        const PlanarHJSolution s = solve_planar(alpha, 0.0, kE, kMu, 12);
        const Series r = planar_residual(s);
        for (int d = 0; d < 12; ++d) {
            const double scale = std::max(1.0, max_abs_coeff(s.w2, d + 1, d + 1) * max_abs_coeff(s.w2, 1, 1));
            EXPECT_LE(max_abs_coeff(r, d, d), 1e-9 * std::sqrt(8 * kMu) * scale) << "degree " << d;
        }
    }
}

TEST(Planar, MatchesSpatialSliceForPlanarNu) {
    // With nu = (cos a, sin a, 0, 0) the spatial W restricted to u3 = u4 = 0
    // solves the same planar equation at kappa = kappa_nu = 0.
    for (double alpha : {0.4, -1.1}) {
        const CompleteIntegral ci = complete_integral(params(kMu, kE, Vec4(std::cos(alpha), std::sin(alpha), 0, 0)), 8);
        const PlanarHJSolution s = solve_planar(alpha, 0.0, kE, kMu, 8);
        const auto& lay2 = s.w2.layout();
        for (std::size_t i = 0; i < s.w2.size(); ++i) {
            const auto e = lay2.exponents(i);
            EXPECT_NEAR(ci.w.coeff({e[0], e[1], 0, 0}), s.w2[i], 1e-10 * std::max(1.0, std::abs(s.w2[i])));
        }
    }
}

TEST(Performance, OrderTwelveSolveIsFast) {
    const auto t0 = std::chrono::steady_clock::now();
    const CompleteIntegral ci = complete_integral(params(kMu, kE, Vec4(0.5, 0.5, 0.5, 0.5)), 12);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_LT(ms, 2000.0);
    EXPECT_EQ(ci.order, 12);
}

}  // namespace
}  // namespace ksreg
