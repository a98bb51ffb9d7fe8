#pragma once

// Closed-form Kustaanheimo-Stiefel machinery for the spatial circular
// restricted three-body problem: the KS matrix and projection, the bilinear
// form, the rotation families S_nu and S0_alpha, the chart atlas of local
// inverses, and the Hamiltonians of the Cartesian, planetocentric, KS and
// planar Levi-Civita formulations.
//
// Units: primaries at (-mu, 0, 0) and (1 - mu, 0, 0), period 2 pi. All
// regularized formulas are written for the secondary body (j = 2); the
// primary is reached by the mirror map in to_planeto/from_planeto.

#include <Eigen/Dense>

namespace ksreg {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec8 = Eigen::Matrix<double, 8, 1>;

// Barycentric rotating-frame state (x, y, z, p_x, p_y, p_z).
struct CartState {
    Vec3 q = Vec3::Zero();
    Vec3 p = Vec3::Zero();
};

// Body-centred translated state (X, Y, Z, P_X, P_Y, P_Z).
struct PlanetoState {
    Vec3 q = Vec3::Zero();
    Vec3 p = Vec3::Zero();

    Vec6 packed() const;
    static PlanetoState unpack(const Vec6& v);
};

// Redundant KS phase point (u, U).
struct KSState {
    Vec4 u = Vec4::Zero();
    Vec4 U = Vec4::Zero();

    Vec8 packed() const;
    static KSState unpack(const Vec8& v);
};

struct PlanarState {
    Vec2 q = Vec2::Zero();
    Vec2 p = Vec2::Zero();
};

struct PlanarKSState {
    Vec2 u = Vec2::Zero();
    Vec2 U = Vec2::Zero();
};

struct Params {
    double mu = 0.01;
    double energy = -1.8;
    double kappa = 0.0;
    double lambda = 1.0;
    Vec4 nu = Vec4(1.0, 0.0, 0.0, 0.0);
    int body = 2;
    // Test hook: false removes the tidal (1 - mu) terms, leaving a rotating Kepler problem.
    bool primary_potential = true;

    // E_mu = E + (1 - mu) + (1 - mu)^2 / 2.
    double shifted_energy() const;
    void validate() const;
};

double shifted_energy(double energy, double mu);

enum class Chart { PlusX, MinusX };

const char* to_string(Chart c);

// A(u); satisfies A(u) A(u)^T = |u|^2 I.
Mat4 ks_matrix(const Vec4& u);
// pi(u): first three components of A(u) u.
Vec3 ks_project(const Vec4& u);
// l(u, U) = u4 U1 - u3 U2 + u2 U3 - u1 U4.
double bilinear(const Vec4& u, const Vec4& U);
// Omega with l(u, U) = u . Omega U.
Mat4 bilinear_matrix();
// Lambda_omega: the cross product by omega embedded in the upper-left 3x3 block.
Mat4 lambda_matrix(const Vec3& omega);
// b_omega(u) = 2 A(u)^T Lambda_omega A(u) u.
Vec4 vector_potential(const Vec4& u, const Vec3& omega);
// Jacobian of b_omega with respect to u.
Mat4 vector_potential_jacobian(const Vec4& u, const Vec3& omega);

struct SnuMatrices {
    Mat4 s;   // S_nu, S S^T = |nu|^2 I
    Mat3 r;   // R_nu, R R^T = |nu|^4 I
    Mat3 pi;  // Pi(S_nu) = R_nu / |nu|^2, a rotation
};
SnuMatrices snu_matrix(const Vec4& nu);

// One-parameter fibre rotation; pi(S0_alpha u) = pi(u).
Mat4 s0_alpha(double alpha);
// Generator d/dalpha S0_alpha at alpha = 0.
Mat4 s0_generator();

// Hamiltonians. Each throws CollisionError/DomainError on its singular set.
double ham_bary(const CartState& s, double mu);
double ham_planeto(const PlanetoState& s, double mu, bool primary_potential = true);
// K_{lambda R}(u, U) at energy level E.
double ham_ks_general(const KSState& s, double lambda, const Mat3& rot, double energy, double mu);
// K_I = K_{lambda R} at lambda = 1, R = I.
double ham_ks_identity(const KSState& s, double energy, double mu, bool primary_potential = true);
// Planar Levi-Civita Hamiltonian K_2(u, U; E).
double ham_lc(const PlanarKSState& s, double energy, double mu, bool primary_potential = true);

struct PlanetoGradient {
    Vec3 dq;
    Vec3 dp;
};
struct KSGradient {
    Vec4 du;
    Vec4 dU;
};
struct PlanarKSGradient {
    Vec2 du;
    Vec2 dU;
};

PlanetoGradient grad_planeto(const PlanetoState& s, double mu, bool primary_potential = true);
KSGradient grad_ks_identity(const KSState& s, double energy, double mu, bool primary_potential = true);
PlanarKSGradient grad_lc(const PlanarKSState& s, double energy, double mu, bool primary_potential = true);

// Mass parameter seen from the chosen body's frame: mu for the secondary,
// 1 - mu for the primary (mirror substitution).
double body_mu(double mu, int body);

// Phase-space translation to the body-centred frame. For body 1 the result is
// additionally rotated by pi about the z axis (X -> -X, Y -> -Y, same for the
// momenta), so the primary-centred problem has the secondary's form with
// mu replaced by 1 - mu.
PlanetoState to_planeto(const CartState& s, double mu, int body = 2);
CartState from_planeto(const PlanetoState& s, double mu, int body = 2);

// Chart selection: PlusX for X > 0 or X = 0 off the axis, MinusX for X < 0.
Chart select_chart(const Vec3& q);
bool in_chart_domain(const Vec3& q, Chart c);
// pi^{-1}_{+/-}.
Vec4 chart_inverse(const Vec3& q, Chart c);
// chi^{-1}_{+/-}: u from the chart, U = 2 A(u)^T (P, 0). Satisfies l(u, U) = 0.
KSState chart_lift(const PlanetoState& s, Chart c);
KSState chart_lift(const PlanetoState& s);
// pi-tilde: position pi(u), momenta from (P, 0) = A(u) U / (2 |u|^2).
PlanetoState phase_project(const KSState& ks);

struct FibreTransition {
    double alpha = 0.0;
    double residual = 0.0;  // max component misfit of (u, U) after rotation
};
// Angle with plus = S0_alpha minus on the fibre, fitted by least squares on u
// and checked on all eight components.
FibreTransition transition_angle(const KSState& minus, const KSState& plus);

// Planar Levi-Civita map: X + iY = (u1 + i u2)^2 on the principal branch.
PlanarKSState lc_lift(const PlanarState& s);
PlanarState lc_project(const PlanarKSState& s);

}  // namespace ksreg
