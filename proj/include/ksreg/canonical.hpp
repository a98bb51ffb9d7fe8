#pragma once

// The canonical map chi_4 : (u, U) -> (n, nu) generated by the complete
// integral W(u; nu), its inverse, the close-encounter propagator built on the
// linear flow n(s) = n(0) + 2 mu nu s, and the first integrals N_X, N_Y, N_Z.

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ksreg/hjsolver.hpp"
#include "ksreg/kscore.hpp"

namespace ksreg {

struct CanonicalOptions {
    int order = 12;
    double r_max = 0.15;          // trusted ball in |u|
    bool scan_radius = true;      // shrink r_max to the radius where the HJ residual is acceptable
    double scan_tolerance = 1e-9; // on |K_I(u, dW/du)| / sqrt(8 mu)
    double newton_tol = 1e-12;    // sup-norm of the Newton residual
    int max_iter = 50;
};

struct ActionAngleState {
    Vec4 n = Vec4::Zero();
    Vec4 nu = Vec4::Zero();
};

struct NewtonReport {
    int iterations = 0;
    double residual = 0.0;
    double condition = 1.0;       // 2-norm condition number of the last Jacobian
    bool ill_conditioned = false; // condition > 1e8
};

struct NuHatResult {
    Vec4 nu;
    NewtonReport newton;
};

struct Chi4InverseResult {
    KSState state;
    NewtonReport newton;
};

// Evaluator for chi_4 at fixed (mu, E, order). Caches the parameter jet of W
// at the most recent nu and the plain series at the most recent residual
// point; copies are cheap to create but not thread-safe to share.
class Chi4 {
public:
    Chi4(double mu, double energy, const CanonicalOptions& opt = {});

    double mu() const { return mu_; }
    double energy() const { return energy_; }
    int order() const { return opt_.order; }
    // min(r_max, scanned radius).
    double trusted_radius() const { return trusted_; }
    double scanned_radius() const { return scanned_; }

    // nu with U = dW/du(u, nu). Newton from `guess` (default U / sqrt(8 mu)).
    NuHatResult nu_hat(const KSState& s, const std::optional<Vec4>& guess = {});
    // n = dW/dnu(u, nu).
    Vec4 n_hat(const Vec4& u, const Vec4& nu);
    ActionAngleState forward(const KSState& s, NewtonReport* report = nullptr);
    // u with n = dW/dnu(u, nu) by Newton from `guess` (default n / sqrt(8 mu)),
    // then U = dW/du(u, nu).
    Chi4InverseResult inverse(const Vec4& n, const Vec4& nu, const std::optional<Vec4>& guess = {});

    const IntegralJet& jet(const Vec4& nu);
    Vec4 grad_u(const Vec4& u, const Vec4& nu);

private:
    void check_ball(const Vec4& u, const char* where) const;

    double mu_;
    double energy_;
    CanonicalOptions opt_;
    double scanned_ = 0.0;
    double trusted_ = 0.0;
    std::optional<Vec4> jet_nu_;
    IntegralJet jet_;
    std::optional<Vec4> ci_nu_;
    std::array<Series, 4> ci_grad_;
};

// Largest radius r <= r_max on a uniform grid such that every sampled point
// with |u| <= r satisfies |K_I(u, dW/du; E) - mu(|nu|^2 - 1)| <= tol sqrt(8 mu).
double trusted_radius_scan(double mu, double energy, int order, double r_max, double tol);

// Stateless wrappers (each builds its own evaluator).
Vec4 nu_hat(const KSState& s, double energy, double mu, const CanonicalOptions& opt = {});
Vec4 n_hat(const Vec4& u, const Vec4& nu, double energy, double mu, const CanonicalOptions& opt = {});
KSState chi4_inverse(const Vec4& n, const Vec4& nu, double energy, double mu, const CanonicalOptions& opt = {});

struct EncounterOptions {
    CanonicalOptions canonical;
    int direction = +1;                 // -1 propagates backward in time
    std::optional<Chart> chart;         // lift chart; default select_chart
    long max_steps = 200000;
    double entry_tolerance = 1e-10;     // on | |X| - sigma |
    double energy_tolerance = 1e-9;     // on |H(entry) - E|
};

struct EncounterDiagnostics {
    double nu_drift = 0.0;      // sup |nu_hat(exit) - nu0|
    double energy_drift = 0.0;  // sup |K_I| over the march
    double bilinear = 0.0;      // sup |l(u, U)| over the march
    int newton_iters_max = 0;
    long steps = 0;
    bool transit = true;        // false: no exit inside the s budget
    double trusted_radius = 0.0;
    double max_u_norm = 0.0;
    Chart chart = Chart::PlusX;
};

struct EncounterResult {
    PlanetoState entry;
    PlanetoState exit;
    Vec4 nu0 = Vec4::Zero();
    Vec4 n0 = Vec4::Zero();
    double s_exit = 0.0;
    double t_exit = 0.0;
    EncounterDiagnostics diagnostics;
};

// Exit state of the motion entering the ball |X| < sigma around the body
// params.body, at energy params.energy. Throws DomainError if the arc leaves
// the trusted ball before re-crossing the sphere.
EncounterResult encounter_map(const PlanetoState& entry, double sigma, const Params& params,
                              const EncounterOptions& opt = {});

// State on |X| = sigma with position along `position_dir`, momentum along
// `momentum_dir` and H = energy (larger root of the quadratic in |P|).
PlanetoState sphere_entry(const Vec3& position_dir, const Vec3& momentum_dir, double sigma, double energy, double mu);

// Same map on the Levi-Civita plane through the complete integral W(u; alpha, kappa).
struct PlanarEncounterResult {
    PlanetoState entry;
    PlanetoState exit;
    double alpha = 0.0;
    double kappa = 0.0;
    Vec2 n0 = Vec2::Zero();     // (dW/dalpha, dW/dkappa) at entry
    double s_exit = 0.0;
    double t_exit = 0.0;
    EncounterDiagnostics diagnostics;
};

PlanarEncounterResult planar_encounter_map(const PlanetoState& entry, double sigma, const Params& params,
                                           const EncounterOptions& opt = {});

// d(n, nu)/d(u, U) at a state, rows (n, nu), columns (u, U). Second
// parameter derivatives come from central differences of exact first ones.
Eigen::Matrix<double, 8, 8> chi4_jacobian(const KSState& s, Chi4& chi, ActionAngleState* at = nullptr);

// N_X, N_Y, N_Z as bilinear forms in (n, nu).
Vec3 first_integrals_nnu(const Vec4& n, const Vec4& nu);

struct FirstIntegralTriple {
    double h = 0.0;
    double n2 = 0.0;
    double nz = 0.0;
    Vec3 components = Vec3::Zero();  // (N_X, N_Y, N_Z)
    Chart chart = Chart::PlusX;
    bool both_charts = false;
    double chart_discrepancy = 0.0;  // sup |N^+ - N^-| when both charts apply
};

FirstIntegralTriple cartesian_integrals(const PlanetoState& state, Chi4& chi);
FirstIntegralTriple cartesian_integrals(const PlanetoState& state, double energy, double mu,
                                        const CanonicalOptions& opt = {});

using PhaseFunction = std::function<double(const Eigen::VectorXd&)>;

// Gradient by Richardson-extrapolated central differences. The step for
// coordinate i is h_rel * max(|x_i|, scale_floor). Throws AccuracyError when
// the two extrapolation levels differ by more than tol relative to the gradient norm.
Eigen::VectorXd numeric_gradient(const PhaseFunction& f, const Eigen::VectorXd& x, double h_rel = 1e-3,
                                 double scale_floor = 1e-2, double tol = 1e-7);
// Canonical bracket on R^6 = (q, p) or R^8 = (u, U).
double poisson_bracket(const PhaseFunction& f, const PhaseFunction& g, const Eigen::VectorXd& x, int dim);
double poisson_bracket(const Eigen::VectorXd& grad_f, const Eigen::VectorXd& grad_g);

struct CompletenessSample {
    PlanetoState state;
    int rank = 0;
    double singular_ratio = 0.0;     // sigma_min / sigma_max of the 3 x 6 gradient matrix
    double h_n2 = 0.0;               // {H, N^2}
    double h_nz = 0.0;               // {H, N_Z}
    double n2_nz = 0.0;              // {N^2, N_Z}
};

struct CompletenessReport {
    std::vector<CompletenessSample> samples;
    int full_rank = 0;
    double max_h_n2 = 0.0;
    double max_h_nz = 0.0;
    double max_n2_nz = 0.0;
    double rank_fraction() const { return samples.empty() ? 0.0 : double(full_rank) / double(samples.size()); }
};

CompletenessReport completeness_check(const std::vector<PlanetoState>& states, double energy, double mu,
                                      const CanonicalOptions& opt = {}, double rank_tol = 1e-6);

// 8 x 5 Jacobian of (U_j - dW/du_j, l(u, U)) with respect to (u, U) at u = 0,
// U = sqrt(8 mu) nu. Columns are the gradients of F_1..F_5.
Eigen::Matrix<double, 8, 5> collision_leaf_jacobian(double mu, double energy, const Vec4& nu, int order);
int numeric_rank(const Eigen::MatrixXd& m, double rel_tol = 1e-9);

}  // namespace ksreg
