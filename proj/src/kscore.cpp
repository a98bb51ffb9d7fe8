#include "ksreg/kscore.hpp"

#include <cmath>
#include <complex>
#include <string>

#include "ksreg/errors.hpp"

namespace ksreg {

namespace {

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw DomainError(std::string("non-finite ") + what);
}

}  // namespace

Vec6 PlanetoState::packed() const {
    Vec6 v;
    v << q, p;
    return v;
}

PlanetoState PlanetoState::unpack(const Vec6& v) {
    PlanetoState s;
    s.q = v.head<3>();
    s.p = v.tail<3>();
    return s;
}

Vec8 KSState::packed() const {
    Vec8 v;
    v << u, U;
    return v;
}

KSState KSState::unpack(const Vec8& v) {
    KSState s;
    s.u = v.head<4>();
    s.U = v.tail<4>();
    return s;
}

double shifted_energy(double energy, double mu) {
    const double c = 1.0 - mu;
    return energy + c + 0.5 * c * c;
}

double Params::shifted_energy() const { return ksreg::shifted_energy(energy, mu); }

void Params::validate() const {
    if (!(mu > 0.0 && mu <= 0.5)) throw ParameterError("mu must lie in (0, 1/2]");
    if (!(lambda > 0.0)) throw ParameterError("lambda must be positive");
    if (body != 1 && body != 2) throw ParameterError("body index must be 1 or 2");
    if (!std::isfinite(energy) || !std::isfinite(kappa) || !nu.allFinite())
        throw ParameterError("non-finite parameter");
}

const char* to_string(Chart c) { return c == Chart::PlusX ? "PlusX" : "MinusX"; }

Mat4 ks_matrix(const Vec4& u) {
    const double u1 = u[0], u2 = u[1], u3 = u[2], u4 = u[3];
    Mat4 a;
    a << u1, -u2, -u3, u4,
         u2, u1, -u4, -u3,
         u3, u4, u1, u2,
         u4, -u3, u2, -u1;
    return a;
}

Vec3 ks_project(const Vec4& u) {
    const double u1 = u[0], u2 = u[1], u3 = u[2], u4 = u[3];
    return Vec3(u1 * u1 - u2 * u2 - u3 * u3 + u4 * u4,
                2.0 * (u1 * u2 - u3 * u4),
                2.0 * (u1 * u3 + u2 * u4));
}

double bilinear(const Vec4& u, const Vec4& U) {
    return u[3] * U[0] - u[2] * U[1] + u[1] * U[2] - u[0] * U[3];
}

Mat4 bilinear_matrix() {
    Mat4 m = Mat4::Zero();
    m(3, 0) = 1.0;
    m(2, 1) = -1.0;
    m(1, 2) = 1.0;
    m(0, 3) = -1.0;
    return m;
}

Mat4 lambda_matrix(const Vec3& w) {
    Mat4 m = Mat4::Zero();
    m(0, 1) = -w[2];
    m(0, 2) = w[1];
    m(1, 0) = w[2];
    m(1, 2) = -w[0];
    m(2, 0) = -w[1];
    m(2, 1) = w[0];
    return m;
}

Vec4 vector_potential(const Vec4& u, const Vec3& omega) {
    const Mat4 a = ks_matrix(u);
    return 2.0 * a.transpose() * (lambda_matrix(omega) * (a * u));
}

Mat4 vector_potential_jacobian(const Vec4& u, const Vec3& omega) {
    // b = 2 A(u)^T w with w = Lambda A(u) u. The fourth row of d(A(u)u) is
    // killed by Lambda, so d(A(u)u) contributes through 2 A(u).
    const Mat4 a = ks_matrix(u);
    const Mat4 lam = lambda_matrix(omega);
    const Vec4 w = lam * (a * u);
    Mat4 jac = 4.0 * a.transpose() * lam * a;
    for (int k = 0; k < 4; ++k) {
        jac.col(k) += 2.0 * ks_matrix(Vec4::Unit(k)).transpose() * w;
    }
    return jac;
}

SnuMatrices snu_matrix(const Vec4& nu) {
    const double n1 = nu[0], n2 = nu[1], n3 = nu[2], n4 = nu[3];
    const double nn = nu.squaredNorm();
    if (!(nn > 0.0)) throw DomainError("snu_matrix: nu = 0");
    SnuMatrices out;
    out.s << n1, -n2, -n3, -n4,
             n2, n1, -n4, n3,
             n3, n4, n1, -n2,
             n4, -n3, n2, n1;
    out.r << n1 * n1 - n2 * n2 - n3 * n3 + n4 * n4, -2.0 * (n1 * n2 + n3 * n4), -2.0 * (n1 * n3 - n2 * n4),
             2.0 * (n1 * n2 - n3 * n4), n1 * n1 - n2 * n2 + n3 * n3 - n4 * n4, -2.0 * (n2 * n3 + n1 * n4),
             2.0 * (n1 * n3 + n2 * n4), -2.0 * (n2 * n3 - n1 * n4), n1 * n1 + n2 * n2 - n3 * n3 - n4 * n4;
    out.pi = out.r / nn;
    return out;
}

Mat4 s0_alpha(double alpha) {
    const double c = std::cos(alpha), s = std::sin(alpha);
    Mat4 m;
    m << c, 0, 0, -s,
         0, c, s, 0,
         0, -s, c, 0,
         s, 0, 0, c;
    return m;
}

Mat4 s0_generator() {
    Mat4 m = Mat4::Zero();
    m(0, 3) = -1.0;
    m(1, 2) = 1.0;
    m(2, 1) = -1.0;
    m(3, 0) = 1.0;
    return m;
}

double ham_bary(const CartState& s, double mu) {
    const double x = s.q[0], y = s.q[1], z = s.q[2];
    const double r1 = std::sqrt((x + mu) * (x + mu) + y * y + z * z);
    const double dx2 = x - (1.0 - mu);
    const double r2 = std::sqrt(dx2 * dx2 + y * y + z * z);
    if (r1 == 0.0) throw CollisionError("ham_bary: r1 = 0 (collision with primary body 1)");
    if (r2 == 0.0) throw CollisionError("ham_bary: r2 = 0 (collision with secondary body 2)");
    const Vec3& p = s.p;
    const double v = 0.5 * p.squaredNorm() + p[0] * y - p[1] * x - (1.0 - mu) / r1 - mu / r2;
    require_finite(v, "ham_bary");
    return v;
}

double ham_planeto(const PlanetoState& s, double mu, bool primary_potential) {
    const Vec3& q = s.q;
    const Vec3& p = s.p;
    const double r = q.norm();
    const double r1 = std::sqrt((q[0] + 1.0) * (q[0] + 1.0) + q[1] * q[1] + q[2] * q[2]);
    if (r == 0.0) throw CollisionError("ham_planeto: |X| = 0 (collision with the regularized body)");
    const double c = 1.0 - mu;
    double v = 0.5 * p.squaredNorm() + p[0] * q[1] - p[1] * q[0] - mu / r - c - 0.5 * c * c;
    if (primary_potential) {
        if (r1 == 0.0) throw CollisionError("ham_planeto: |X + e1| = 0 (collision with the other body)");
        v -= c * (1.0 / r1 - 1.0 + q[0]);
    }
    require_finite(v, "ham_planeto");
    return v;
}

double ham_ks_general(const KSState& s, double lambda, const Mat3& rot, double energy, double mu) {
    if (!(lambda > 0.0)) throw ParameterError("ham_ks_general: lambda must be positive");
    const Vec3 omega = rot.transpose() * Vec3(0.0, 0.0, 1.0);
    const Vec3 e = rot.transpose() * Vec3(1.0, 0.0, 0.0);
    const Vec3 q = ks_project(s.u);
    const double uu = s.u.squaredNorm();
    const double l2 = lambda * lambda;
    const Vec3 shifted = lambda * q + e;
    const double dist = shifted.norm();
    if (dist == 0.0) throw CollisionError("ham_ks_general: |lambda pi(u) + e| = 0 (collision with the other body)");
    const double em = shifted_energy(energy, mu);
    const Vec4 kin = s.U - l2 * vector_potential(s.u, omega);
    const double v = kin.squaredNorm() / (8.0 * l2) - 0.5 * l2 * uu * omega.cross(q).squaredNorm() - mu / lambda -
                     uu * em - (1.0 - mu) * uu * (1.0 / dist - 1.0 + lambda * q.dot(e));
    require_finite(v, "ham_ks_general");
    return v;
}

double ham_ks_identity(const KSState& s, double energy, double mu, bool primary_potential) {
    const Vec3 q = ks_project(s.u);
    const double uu = s.u.squaredNorm();
    const Vec4 kin = s.U - vector_potential(s.u, Vec3(0.0, 0.0, 1.0));
    const double em = shifted_energy(energy, mu);
    double v = kin.squaredNorm() / 8.0 - 0.5 * uu * (q[0] * q[0] + q[1] * q[1]) - mu - uu * em;
    if (primary_potential) {
        const double dist = std::sqrt((q[0] + 1.0) * (q[0] + 1.0) + q[1] * q[1] + q[2] * q[2]);
        if (dist == 0.0) throw CollisionError("ham_ks_identity: |pi(u) + e1| = 0 (collision with the other body)");
        v -= (1.0 - mu) * uu * (1.0 / dist - 1.0 + q[0]);
    }
    require_finite(v, "ham_ks_identity");
    return v;
}

double ham_lc(const PlanarKSState& s, double energy, double mu, bool primary_potential) {
    const double u1 = s.u[0], u2 = s.u[1];
    const double rho = u1 * u1 + u2 * u2;
    const double a = s.U[0] + 2.0 * rho * u2;
    const double b = s.U[1] - 2.0 * rho * u1;
    const double em = shifted_energy(energy, mu);
    double v = (a * a + b * b) / 8.0 - 0.5 * rho * rho * rho - mu - rho * em;
    if (primary_potential) {
        const double x = u1 * u1 - u2 * u2;
        const double arg = 1.0 + 2.0 * x + rho * rho;
        if (arg <= 0.0) throw CollisionError("ham_lc: 1 + 2X + |u|^4 = 0 (collision with the other body)");
        v -= (1.0 - mu) * rho * (1.0 / std::sqrt(arg) - 1.0 + x);
    }
    require_finite(v, "ham_lc");
    return v;
}

PlanetoGradient grad_planeto(const PlanetoState& s, double mu, bool primary_potential) {
    const Vec3& q = s.q;
    const Vec3& p = s.p;
    const double r = q.norm();
    if (r == 0.0) throw CollisionError("grad_planeto: |X| = 0");
    PlanetoGradient g;
    g.dp = p + Vec3(q[1], -q[0], 0.0);
    g.dq = Vec3(-p[1], p[0], 0.0) + (mu / (r * r * r)) * q;
    if (primary_potential) {
        const Vec3 d = q + Vec3::UnitX();
        const double r1 = d.norm();
        if (r1 == 0.0) throw CollisionError("grad_planeto: |X + e1| = 0");
        const double c = 1.0 - mu;
        g.dq += (c / (r1 * r1 * r1)) * d - c * Vec3::UnitX();
    }
    return g;
}

KSGradient grad_ks_identity(const KSState& s, double energy, double mu, bool primary_potential) {
    const Vec3 z(0.0, 0.0, 1.0);
    const Vec4& u = s.u;
    const Mat4 a = ks_matrix(u);
    const Vec3 q = ks_project(u);
    const double uu = u.squaredNorm();
    const Vec4 kin = s.U - vector_potential(u, z);
    const double em = shifted_energy(energy, mu);

    // d pi / du = 2 * (first three rows of A(u)).
    const Eigen::Matrix<double, 3, 4> dq = 2.0 * a.topRows<3>();
    const double perp = q[0] * q[0] + q[1] * q[1];
    const Eigen::RowVector4d dperp = 2.0 * (q[0] * dq.row(0) + q[1] * dq.row(1));

    KSGradient g;
    g.dU = 0.25 * kin;
    g.du = -0.25 * vector_potential_jacobian(u, z).transpose() * kin - u * perp - 0.5 * uu * dperp.transpose() -
           2.0 * em * u;
    if (primary_potential) {
        const Vec3 d = q + Vec3::UnitX();
        const double dist = d.norm();
        if (dist == 0.0) throw CollisionError("grad_ks_identity: |pi(u) + e1| = 0");
        const double c = 1.0 - mu;
        const double t = 1.0 / dist - 1.0 + q[0];
        const Eigen::RowVector3d dt = -d.transpose() / (dist * dist * dist) + Eigen::RowVector3d::UnitX();
        g.du -= c * (2.0 * t * u + uu * (dt * dq).transpose());
    }
    return g;
}

PlanarKSGradient grad_lc(const PlanarKSState& s, double energy, double mu, bool primary_potential) {
    const double u1 = s.u[0], u2 = s.u[1];
    const double rho = u1 * u1 + u2 * u2;
    const double a = s.U[0] + 2.0 * rho * u2;
    const double b = s.U[1] - 2.0 * rho * u1;
    const double em = shifted_energy(energy, mu);

    PlanarKSGradient g;
    g.dU = Vec2(0.25 * a, 0.25 * b);
    const Vec2 da(4.0 * u1 * u2, 4.0 * u2 * u2 + 2.0 * rho);
    const Vec2 db(-4.0 * u1 * u1 - 2.0 * rho, -4.0 * u1 * u2);
    const Vec2 drho(2.0 * u1, 2.0 * u2);
    g.du = 0.25 * a * da + 0.25 * b * db - (1.5 * rho * rho + em) * drho;
    if (primary_potential) {
        const double x = u1 * u1 - u2 * u2;
        const Vec2 dx(2.0 * u1, -2.0 * u2);
        const double arg = 1.0 + 2.0 * x + rho * rho;
        if (arg <= 0.0) throw CollisionError("grad_lc: 1 + 2X + |u|^4 = 0");
        const double inv = 1.0 / std::sqrt(arg);
        const double t = inv - 1.0 + x;
        const Vec2 dt = -0.5 * inv * inv * inv * (2.0 * dx + 2.0 * rho * drho) + dx;
        g.du -= (1.0 - mu) * (t * drho + rho * dt);
    }
    return g;
}

double body_mu(double mu, int body) {
    if (body == 2) return mu;
    if (body == 1) return 1.0 - mu;
    throw ParameterError("body index must be 1 or 2");
}

PlanetoState to_planeto(const CartState& s, double mu, int body) {
    PlanetoState out;
    if (body == 2) {
        const double xj = 1.0 - mu;
        out.q = Vec3(s.q[0] - xj, s.q[1], s.q[2]);
        out.p = Vec3(s.p[0], s.p[1] - xj, s.p[2]);
    } else if (body == 1) {
        // Translation to x_1 = -mu followed by the rotation by pi about z,
        // which swaps the roles of the two bodies.
        const double xj = -mu;
        out.q = Vec3(-(s.q[0] - xj), -s.q[1], s.q[2]);
        out.p = Vec3(-s.p[0], -(s.p[1] - xj), s.p[2]);
    } else {
        throw ParameterError("body index must be 1 or 2");
    }
    return out;
}

CartState from_planeto(const PlanetoState& s, double mu, int body) {
    CartState out;
    if (body == 2) {
        const double xj = 1.0 - mu;
        out.q = Vec3(s.q[0] + xj, s.q[1], s.q[2]);
        out.p = Vec3(s.p[0], s.p[1] + xj, s.p[2]);
    } else if (body == 1) {
        const double xj = -mu;
        out.q = Vec3(-s.q[0] + xj, -s.q[1], s.q[2]);
        out.p = Vec3(-s.p[0], -s.p[1] + xj, s.p[2]);
    } else {
        throw ParameterError("body index must be 1 or 2");
    }
    return out;
}

Chart select_chart(const Vec3& q) {
    if (q[0] > 0.0) return Chart::PlusX;
    if (q[0] < 0.0) return Chart::MinusX;
    return Chart::PlusX;
}

bool in_chart_domain(const Vec3& q, Chart c) {
    if (!q.allFinite()) return false;
    const bool on_axis = q[1] == 0.0 && q[2] == 0.0;
    if (!on_axis) return true;
    return c == Chart::PlusX ? q[0] > 0.0 : q[0] < 0.0;
}

Vec4 chart_inverse(const Vec3& q, Chart c) {
    if (q.squaredNorm() == 0.0) throw CollisionError("chart_inverse: X = 0");
    if (!in_chart_domain(q, c))
        throw ChartDomainError(std::string("chart_inverse: point on the excluded half-line of chart ") + to_string(c));
    const double r = q.norm();
    if (c == Chart::PlusX) {
        const double w = r + q[0];
        const double sw = std::sqrt(2.0 * w);
        return Vec4(std::sqrt(0.5 * w), q[1] / sw, q[2] / sw, 0.0);
    }
    const double w = r - q[0];
    const double sw = std::sqrt(2.0 * w);
    return Vec4(q[1] / sw, std::sqrt(0.5 * w), 0.0, q[2] / sw);
}

KSState chart_lift(const PlanetoState& s, Chart c) {
    KSState out;
    out.u = chart_inverse(s.q, c);
    Vec4 p4(s.p[0], s.p[1], s.p[2], 0.0);
    out.U = 2.0 * ks_matrix(out.u).transpose() * p4;
    return out;
}

KSState chart_lift(const PlanetoState& s) { return chart_lift(s, select_chart(s.q)); }

PlanetoState phase_project(const KSState& ks) {
    const double uu = ks.u.squaredNorm();
    if (uu == 0.0) throw CollisionError("phase_project: u = 0");
    PlanetoState out;
    out.q = ks_project(ks.u);
    const Vec4 p4 = ks_matrix(ks.u) * ks.U / (2.0 * uu);
    out.p = p4.head<3>();
    return out;
}

FibreTransition transition_angle(const KSState& minus, const KSState& plus) {
    FibreTransition t;
    t.alpha = std::atan2(-bilinear(minus.u, plus.u), minus.u.dot(plus.u));
    const Mat4 s = s0_alpha(t.alpha);
    t.residual = std::max((s * minus.u - plus.u).cwiseAbs().maxCoeff(), (s * minus.U - plus.U).cwiseAbs().maxCoeff());
    return t;
}

PlanarKSState lc_lift(const PlanarState& s) {
    if (s.q.squaredNorm() == 0.0) throw CollisionError("lc_lift: (X, Y) = 0");
    const std::complex<double> w = std::sqrt(std::complex<double>(s.q[0], s.q[1]));
    PlanarKSState out;
    out.u = Vec2(w.real(), w.imag());
    const double u1 = out.u[0], u2 = out.u[1];
    out.U = Vec2(2.0 * (u1 * s.p[0] + u2 * s.p[1]), 2.0 * (-u2 * s.p[0] + u1 * s.p[1]));
    return out;
}

PlanarState lc_project(const PlanarKSState& s) {
    const double u1 = s.u[0], u2 = s.u[1];
    const double rho = u1 * u1 + u2 * u2;
    if (rho == 0.0) throw CollisionError("lc_project: u = 0");
    PlanarState out;
    out.q = Vec2(u1 * u1 - u2 * u2, 2.0 * u1 * u2);
    out.p = Vec2((s.U[0] * u1 - s.U[1] * u2) / (2.0 * rho), (s.U[0] * u2 + s.U[1] * u1) / (2.0 * rho));
    return out;
}

}  // namespace ksreg
