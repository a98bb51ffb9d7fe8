#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "ksreg/series.hpp"
#include "test_util.hpp"

namespace ksreg {
namespace {

using testing::max_abs_diff;
using testing::random_series;
using S = MultiSeries<double>;

Exponents ex(int a, int b = 0, int c = 0, int d = 0) {
    return {static_cast<std::uint8_t>(a), static_cast<std::uint8_t>(b), static_cast<std::uint8_t>(c),
            static_cast<std::uint8_t>(d)};
}

TEST(Layout, GradedLexOrderAndCounts) {
    const auto& lay = MonomialLayout::get(4);
    EXPECT_EQ(lay.count(0), 1u);
    EXPECT_EQ(lay.count(1), 5u);
    EXPECT_EQ(lay.count(12), 1820u);
    EXPECT_EQ(lay.count(16), 4845u);
    EXPECT_EQ(lay.exponents(1), ex(1));
    EXPECT_EQ(lay.exponents(4), ex(0, 0, 0, 1));
    EXPECT_EQ(lay.exponents(5), ex(2));
    for (std::size_t i = 0; i < lay.count(16); ++i) EXPECT_EQ(lay.index(lay.exponents(i)), i);
    EXPECT_EQ(MonomialLayout::get(2).count(16), 153u);
}

TEST(Arith, ExactProductAndTruncation) {
    S one = S::constant(4, 2, 1.0);
    S u1 = S::variable(4, 2, 0);
    S p = arith(one + u1, one - u1, ArithOp::Mul);
    EXPECT_DOUBLE_EQ(p.coeff(ex(0)), 1.0);
    EXPECT_DOUBLE_EQ(p.coeff(ex(2)), -1.0);
    EXPECT_EQ(p.nonzeros(), 2u);

    S a = S::variable(4, 1, 0) + S::variable(4, 1, 1);
    S sq = a * a;
    EXPECT_EQ(sq.nonzeros(), 0u);
}

TEST(Arith, AddZeroAndScale) {
    std::mt19937_64 rng(3);
    S a = random_series(rng, 4, 5, 1.0);
    S z(4, 5);
    EXPECT_EQ(max_abs_diff(arith(a, z, ArithOp::Add), a), 0.0);
    S twice = arith(a, z, ArithOp::Add, 2.0);
    EXPECT_DOUBLE_EQ(twice[7], 2.0 * a[7]);
}

TEST(Arith, MismatchedShapesThrow) {
    S a(4, 3), b(4, 4), c(2, 3);
    EXPECT_THROW(arith(a, b, ArithOp::Add), DimensionError);
    EXPECT_THROW(arith(a, c, ArithOp::Mul), DimensionError);
    EXPECT_THROW(S(3, 2), DimensionError);
    EXPECT_THROW(S(4, 17), DimensionError);
}

TEST(Arith, RingAxiomsOnRandomSeries) {
    std::mt19937_64 rng(11);
    for (int order = 0; order <= 6; ++order) {
        for (int nv : {2, 4}) {
            S a = random_series(rng, nv, order, 1.0);
            S b = random_series(rng, nv, order, 1.0);
            S c = random_series(rng, nv, order, 1.0);
            EXPECT_LT(max_abs_diff((a * b) * c, a * (b * c)), 1e-13);
            EXPECT_LT(max_abs_diff(a * (b + c), a * b + a * c), 1e-13);
            EXPECT_LT(max_abs_diff(a * b, b * a), 1e-13);
        }
    }
}

TEST(Arith, SparseAndDensePathsAgree) {
    std::mt19937_64 rng(5);
    S dense = random_series(rng, 4, 8, 1.0);
    S sparse(4, 8);
    sparse.set_coeff(ex(0, 1, 1), 0.5);
    sparse.set_coeff(ex(2), -1.5);
    sparse.set_coeff(ex(0), 2.0);
    S ref(4, 8);
    // Brute-force product over all exponent pairs.
    const auto& lay = dense.layout();
    for (std::size_t i = 0; i < sparse.size(); ++i)
        for (std::size_t j = 0; j < dense.size(); ++j)
            if (lay.degree(i) + lay.degree(j) <= 8) ref[lay.sum_index(i, j)] += sparse[i] * dense[j];
    EXPECT_LT(max_abs_diff(sparse * dense, ref), 1e-14);
    EXPECT_LT(max_abs_diff(dense * sparse, ref), 1e-14);
}

TEST(PowReal, BinomialSeries) {
    S a = S::constant(4, 2, 1.0) + S::variable(4, 2, 0, 2.0);
    S g = pow_real(a, 0.5);
    EXPECT_NEAR(g.coeff(ex(0)), 1.0, 1e-15);
    EXPECT_NEAR(g.coeff(ex(1)), 1.0, 1e-15);
    EXPECT_NEAR(g.coeff(ex(2)), -0.5, 1e-15);
    EXPECT_EQ(g.nonzeros(), 3u);
}

TEST(PowReal, ZeroExponentAndConstant) {
    std::mt19937_64 rng(2);
    S a = random_series(rng, 4, 4, 0.1);
    a[0] = 1.3;
    S g = pow_real(a, 0.0);
    EXPECT_EQ(g[0], 1.0);
    EXPECT_EQ(g.nonzeros(), 1u);
    EXPECT_DOUBLE_EQ(pow_real(S::constant(4, 3, 4.0), 0.5)[0], 2.0);
}

TEST(PowReal, NonPositiveConstantThrows) {
    EXPECT_THROW(pow_real(S::constant(4, 3, 0.0), 0.5), DomainError);
    EXPECT_THROW(pow_real(S::constant(4, 3, -1.0), -0.5), DomainError);
}

TEST(PowReal, SquareRootSquaredReproduces) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> c0(0.5, 2.0);
    for (int trial = 0; trial < 20; ++trial) {
        for (int nv : {2, 4}) {
            S a = random_series(rng, nv, 8, 0.1);
            a[0] = c0(rng);
            S r = pow_real(a, 0.5);
            EXPECT_LT(max_abs_diff(r * r, a), 1e-12);
            S inv = pow_real(a, -1.0);
            S one = inv * a;
            one[0] -= 1.0;
            EXPECT_LT(max_abs_diff(one, S(nv, 8)), 1e-12);
        }
    }
}

TEST(PowReal, SparseInputMatchesDensePath) {
    // 1 + 2 pi_1 + |u|^4 style quartic: sparse path; compare with a dense copy carrying tiny noise-free zeros.
    S a = S::constant(4, 10, 1.0);
    a.set_coeff(ex(2), 2.0);
    a.set_coeff(ex(0, 2), -2.0);
    a.set_coeff(ex(4), 1.0);
    a.set_coeff(ex(2, 2), 2.0);
    S sparse_result = pow_real(a, -0.5);
    // r * r * a == 1 checks the recurrence regardless of the path taken.
    S check = sparse_result * sparse_result * a;
    check[0] -= 1.0;
    EXPECT_LT(max_abs_coeff(check, 0, 10), 1e-13);
}

TEST(Partial, Monomials) {
    S a(4, 4);
    a.set_coeff(ex(2, 1), 1.0);
    S d = partial(a, 0);
    EXPECT_DOUBLE_EQ(d.coeff(ex(1, 1)), 2.0);
    EXPECT_EQ(d.nonzeros(), 1u);
    EXPECT_EQ(partial(S::constant(4, 4, 3.0), 0).nonzeros(), 0u);
}

TEST(Partial, LinearForm) {
    const double mu = 0.01;
    const std::array<double, 4> nu{0.5, -0.5, 0.5, 0.5};
    S w(4, 5);
    for (int j = 0; j < 4; ++j) w += S::variable(4, 5, j, std::sqrt(8 * mu) * nu[static_cast<std::size_t>(j)]);
    S d = partial(w, 1);
    EXPECT_DOUBLE_EQ(d[0], std::sqrt(8 * mu) * nu[1]);
    EXPECT_EQ(d.nonzeros(), 1u);
}

TEST(Antiderivative, BasicAndBoundary) {
    S one = S::constant(4, 3, 1.0);
    S i1 = antiderivative(one, 0);
    EXPECT_DOUBLE_EQ(i1.coeff(ex(1)), 1.0);
    EXPECT_EQ(i1.nonzeros(), 1u);

    S a(4, 3);
    a.set_coeff(ex(1, 1), 2.0);
    EXPECT_DOUBLE_EQ(antiderivative(a, 0).coeff(ex(2, 1)), 1.0);

    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> dist(-0.5, 0.5);
    for (int t = 0; t < 20; ++t) {
        S r = random_series(rng, 4, 7, 1.0, 6);
        S ir = antiderivative(r, 0);
        EXPECT_FALSE(ir.truncated());
        std::array<double, 4> p{0.0, dist(rng), dist(rng), dist(rng)};
        EXPECT_EQ(eval(ir, std::span<const double>(p)), 0.0);
        for (std::size_t i = 0; i < ir.size(); ++i)
            if (ir.layout().exponents(i)[0] == 0) EXPECT_EQ(ir[i], 0.0);
    }
}

TEST(Antiderivative, TopDegreeSetsTruncationFlag) {
    std::mt19937_64 rng(4);
    S r = random_series(rng, 4, 5, 1.0);
    EXPECT_TRUE(antiderivative(r, 2).truncated());
}

TEST(Antiderivative, PartialInvertsIt) {
    std::mt19937_64 rng(21);
    for (int var = 0; var < 4; ++var) {
        S r = random_series(rng, 4, 9, 1.0, 8);
        EXPECT_LT(max_abs_diff(partial(antiderivative(r, var), var), r), 1e-15);
    }
}

TEST(Eval, KnownValues) {
    S a = S::constant(4, 2, 1.0);
    a.set_coeff(ex(2), -1.0);
    std::array<double, 4> p{0.5, 0, 0, 0};
    EXPECT_DOUBLE_EQ(eval(a, std::span<const double>(p)), 0.75);
    std::mt19937_64 rng(1);
    S r = random_series(rng, 4, 6, 1.0);
    std::array<double, 4> zero{};
    EXPECT_EQ(eval(r, std::span<const double>(zero)), r[0]);
    std::array<double, 3> bad{};
    EXPECT_THROW(eval(r, std::span<const double>(bad)), DimensionError);
}

// Direct evaluation: sum over exponent tuples of c * prod p_i^e_i.
double direct_eval(const S& a, const std::array<double, 4>& p) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& e = a.layout().exponents(i);
        double m = a[i];
        for (int v = 0; v < a.nvars(); ++v) m *= std::pow(p[static_cast<std::size_t>(v)], e[static_cast<std::size_t>(v)]);
        acc += m;
    }
    return acc;
}

TEST(Eval, ProductOfLowDegreePolynomials) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> dist(-0.2, 0.2);
    for (int t = 0; t < 50; ++t) {
        S a = random_series(rng, 4, 4, 1.0, 2);
        S b = random_series(rng, 4, 4, 1.0, 2);
        std::array<double, 4> p{dist(rng), dist(rng), dist(rng), dist(rng)};
        std::span<const double> sp(p);
        EXPECT_NEAR(eval(a * b, sp), direct_eval(a, p) * direct_eval(b, p), 1e-14);
    }
}

SquareMatrix<double> s0(double alpha) {
    const double c = std::cos(alpha), s = std::sin(alpha);
    return {{{c, 0, 0, -s}, {0, c, s, 0}, {0, -s, c, 0}, {s, 0, 0, c}}};
}

TEST(LinearSubstitute, IdentityAndRotation) {
    std::mt19937_64 rng(6);
    S a = random_series(rng, 4, 6, 1.0);
    SquareMatrix<double> id{};
    for (int i = 0; i < 4; ++i) id[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 1.0;
    EXPECT_LT(max_abs_diff(linear_substitute(a, id, 1.0), a), 1e-15);

    const double alpha = 0.37;
    S u1 = S::variable(4, 3, 0);
    S r = linear_substitute(u1, s0(alpha), 1.0);
    EXPECT_NEAR(r.coeff(ex(1)), std::cos(alpha), 1e-15);
    EXPECT_NEAR(r.coeff(ex(0, 0, 0, 1)), std::sin(alpha), 1e-15);
    EXPECT_EQ(r.nonzeros(), 2u);
}

TEST(LinearSubstitute, CommutesWithEvaluation) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int t = 0; t < 10; ++t) {
        S a = random_series(rng, 4, 7, 1.0);
        SquareMatrix<double> m{};
        for (auto& row : m)
            for (auto& x : row) x = dist(rng);
        const double scale = 0.8;
        S b = linear_substitute(a, m, scale);
        std::array<double, 4> p{dist(rng), dist(rng), dist(rng), dist(rng)};
        std::array<double, 4> q{};
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) q[static_cast<std::size_t>(i)] += scale * m[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] * p[static_cast<std::size_t>(j)];
        EXPECT_NEAR(eval(b, std::span<const double>(p)), direct_eval(a, q), 1e-11);
    }
}

TEST(LinearSubstitute, PreservesDegreeFiltration) {
    std::mt19937_64 rng(13);
    for (int d = 0; d <= 6; ++d) {
        S a(4, 6);
        const auto& lay = a.layout();
        for (std::size_t i = lay.degree_begin(d); i < lay.degree_begin(d + 1); ++i) a[i] = 1.0 + 0.1 * static_cast<double>(i % 7);
        const double alpha = 0.3 * d + 0.1;
        S b = linear_substitute(a, s0(alpha), 1.7);
        for (std::size_t i = 0; i < b.size(); ++i)
            if (lay.degree(i) != d) EXPECT_EQ(b[i], 0.0);
    }
}

TEST(DualCoefficients, PowDerivativeMatchesDifferences) {
    using D = Dual<1>;
    const double t0 = 0.3;
    auto build = [](auto t) {
        using T = decltype(t);
        MultiSeries<T> a = MultiSeries<T>::constant(4, 6, T(1.0) + t);
        a += MultiSeries<T>::variable(4, 6, 1, t * 2.0);
        a += MultiSeries<T>::variable(4, 6, 2, T(0.5));
        return pow_real(a * a, -0.5);
    };
    auto jet = build(D::variable(t0, 0));
    const double h = 1e-5;
    auto plus = build(t0 + h);
    auto minus = build(t0 - h);
    for (std::size_t i = 0; i < plus.size(); ++i) {
        const double fd = (plus[i] - minus[i]) / (2 * h);
        EXPECT_NEAR(jet[i].d[0], fd, 1e-7 * (1 + std::abs(fd)));
        EXPECT_NEAR(jet[i].v, build(t0)[i], 1e-15);
    }
}

}  // namespace
}  // namespace ksreg
