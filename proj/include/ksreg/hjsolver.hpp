#pragma once

// Particular and complete integrals of the Hamilton-Jacobi equation of the
// KS Hamiltonian, built as truncated power series in u by Picard iteration
// of W <- int_0^{u1} F(u, dW/du2, dW/du3, dW/du4) du1.
//
// Every construction is written once over a scalar type T: double for plain
// coefficients, Dual<4> to carry d/dnu exactly, Dual<2> for the planar
// parameters (alpha, kappa).

#include <array>

#include <Eigen/Dense>

#include "ksreg/dual.hpp"
#include "ksreg/kscore.hpp"
#include "ksreg/series.hpp"

namespace ksreg {

using Series = MultiSeries<double>;

inline constexpr int kDefaultOrder = 10;

enum class RootBranch { Positive, Negative };

struct HJOptions {
    RootBranch branch = RootBranch::Positive;
    // Relative coefficient change accepted by the confirming full-order pass.
    double tolerance = 1e-14;
};

// kappa_nu = mu (|nu|^2 - 1): the level that makes the particular solution a complete integral.
double kappa_nu(double mu, const Vec4& nu);

// ---------------------------------------------------------------------------
// Scalar-generic core.

template <class T>
struct SpatialFrame {
    std::array<T, 4> nu{};
    T lambda{};  // |nu|^2
    T kappa{};
    double mu = 0.0;
    double energy = 0.0;
    std::array<T, 3> omega{};  // Pi^T (0, 0, 1)
    std::array<T, 3> e{};      // Pi^T (1, 0, 0)
    SquareMatrix<T> s{};       // S_nu
};

template <class T>
SpatialFrame<T> make_frame(const std::array<T, 4>& nu, const T& kappa, double mu, double energy);

template <class T>
struct PicardResult {
    MultiSeries<T> w;
    int passes = 0;
    bool truncated = false;
};

template <class T>
MultiSeries<T> build_rhs_t(const SpatialFrame<T>& f, int order, const MultiSeries<T>& p2, const MultiSeries<T>& p3,
                           const MultiSeries<T>& p4, RootBranch branch);

template <class T>
PicardResult<T> solve_wtilde_t(const SpatialFrame<T>& f, int order, const HJOptions& opt);

// W(u) = W~(|nu|^-2 S_nu^T u).
template <class T>
MultiSeries<T> assemble_t(const MultiSeries<T>& wtilde, const SpatialFrame<T>& f);

// Planar path: W~ for the rotated Levi-Civita Hamiltonian, then W = W~(R_alpha^T u).
template <class T>
struct PlanarPieces {
    MultiSeries<T> wtilde;
    MultiSeries<T> w;
    int passes = 0;
    bool truncated = false;
};

template <class T>
PlanarPieces<T> solve_planar_t(const T& alpha, const T& kappa, double energy, double mu, int order,
                               const HJOptions& opt);

// ---------------------------------------------------------------------------
// Double-valued results.

struct HJSolution {
    Params params;
    int order = 0;
    Series wtilde;
    Vec3 omega = Vec3::Zero();
    Vec3 e_vec = Vec3::Zero();
    int passes = 0;
    bool truncated = false;
};

struct CompleteIntegral {
    Params params;  // kappa holds kappa_nu
    int order = 0;
    Series w;
    HJSolution source;
};

struct PlanarHJSolution {
    double alpha = 0.0;
    double kappa = 0.0;
    double energy = 0.0;
    double mu = 0.0;
    int order = 0;
    Series wtilde;  // in the rotated variables
    Series w2;      // complete integral W(u; alpha, kappa)
    int passes = 0;
    bool truncated = false;
};

// F(u, p) for the rotated equation, p2..p4 being the series of dW~/du2..du4.
Series build_rhs(const Params& p, const Series& p2, const Series& p3, const Series& p4,
                 RootBranch branch = RootBranch::Positive);

HJSolution solve_wtilde(const Params& p, int order, const HJOptions& opt = {});
CompleteIntegral assemble_W(const HJSolution& sol);
// solve_wtilde at kappa = kappa_nu followed by assemble_W.
CompleteIntegral complete_integral(const Params& p, int order, const HJOptions& opt = {});

// K_I(u, dW/du) - level as a series; valid through degree order - 1.
Series ks_residual(const Series& w, double level, double mu, double energy);
Series residual(const CompleteIntegral& ci);

PlanarHJSolution solve_planar(double alpha, double kappa, double energy, double mu, int order,
                              const HJOptions& opt = {});
// K_2(u, dW/du) - kappa; valid through degree order - 1.
Series planar_residual(const PlanarHJSolution& sol);

// ---------------------------------------------------------------------------
// Parameter derivatives.

enum class DerivativeMethod { Propagation, Richardson };

// dW/dnu_direction of the complete integral at nu = p.nu (kappa follows kappa_nu).
Series param_derivative(const Params& p, int order, int direction,
                        DerivativeMethod method = DerivativeMethod::Propagation);

template <std::size_t K>
struct JetValue {
    double w = 0.0;
    Eigen::Matrix<double, K, 1> grad_u;   // dW/du
    Eigen::Matrix<double, K, 1> grad_p;   // dW/dparam
    Eigen::Matrix<double, K, K> mixed;    // mixed(i, l) = d2W / du_i dparam_l
};

// W and its u-gradient carried with exact first derivatives in K parameters.
template <std::size_t K>
struct ParamJet {
    int order = 0;
    MultiSeries<Dual<K>> w;
    std::array<MultiSeries<Dual<K>>, K> grad;

    JetValue<K> at(const Eigen::Matrix<double, K, 1>& u) const;
    // det(d2W / du dparam) at u = 0.
    double mixed_determinant_at_origin() const;
};

using IntegralJet = ParamJet<4>;  // parameters nu_1..nu_4
using PlanarJet = ParamJet<2>;    // parameters (alpha, kappa)

IntegralJet integral_jet(double mu, double energy, const Vec4& nu, int order);
PlanarJet planar_jet(double alpha, double kappa, double energy, double mu, int order);

// det(d2W/du dnu) at u = 0; equals 64 mu^2 on |nu| = 1.
double j4(double mu, double energy, const Vec4& nu, int order);
// det(d2W/du d(alpha, kappa)) at u = 0.
double j2(double alpha, double kappa, double energy, double mu, int order);

// Geometric decay fit of the per-degree coefficient maxima: returns R with
// max|c_d| ~ C R^-d over degrees [2, order].
double convergence_radius_estimate(const Series& s);

}  // namespace ksreg
