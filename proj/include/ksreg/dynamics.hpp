#pragma once

// Reference numerical integration of the four Hamiltonian formulations with an
// adaptive Dormand-Prince 5(4) pair (Boost.Odeint) and dense output.
//
// State layouts:
//   Barycentric, Planetocentric: (q1, q2, q3, p1, p2, p3), independent variable t.
//   KS: (u1..u4, U1..U4), independent variable s; physical time integrated alongside.
//   LeviCivita: (u1, u2, U1, U2), independent variable s; physical time alongside.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ksreg/kscore.hpp"

namespace ksreg {

using VecX = Eigen::VectorXd;

enum class HamiltonianId { Planetocentric, KS, LeviCivita, Barycentric };

const char* to_string(HamiltonianId id);
int state_dimension(HamiltonianId id);
bool is_regularized(HamiltonianId id);

struct SystemSpec {
    HamiltonianId id = HamiltonianId::KS;
    double mu = 0.01;
    double energy = -1.8;  // level E entering the regularized Hamiltonians
    bool primary_potential = true;
};

struct Tolerances {
    double rel = 1e-12;
    double abs = 1e-14;
    double max_step = 0.0;  // 0: unbounded
    long max_steps = 2'000'000;
    // Smallest admissible step relative to max(1, |independent variable|).
    double min_step = 1e-13;
};

// Vector field dy/dx of the selected Hamiltonian (closed-form gradients).
VecX vector_field(const SystemSpec& sys, const VecX& y);
double hamiltonian_value(const SystemSpec& sys, const VecX& y);
// Physical-time density dt/dx: |u|^2 for the regularized systems, 1 otherwise.
double time_density(const SystemSpec& sys, const VecX& y);

struct EventSpec {
    std::function<double(const VecX&)> g;
    int direction = 0;        // +1: g increasing through zero, -1: decreasing, 0: either
    double not_before = 0.0;  // crossings with |x| below this are ignored
    double tolerance = 1e-12; // on the independent variable
};

struct IntegratorStats {
    long accepted = 0;
    long rhs_evals = 0;
};

struct Trajectory {
    HamiltonianId id = HamiltonianId::KS;
    std::vector<double> x;            // independent variable (s or t)
    std::vector<double> t;            // physical time
    std::vector<VecX> states;
    std::vector<VecX> derivatives;    // dy/dx at each sample
    std::vector<double> energy;       // Hamiltonian at each sample
    std::vector<double> bilinear;     // l(u, U) for KS, 0 otherwise
    IntegratorStats stats;
    bool event_found = false;
    double event_x = 0.0;

    const VecX& final_state() const { return states.back(); }
};

// Integrates over [0, span] (span may be negative). Samples are recorded at
// every accepted step and exactly at each point of `output_at` inside the
// span. With an event the integration stops at the first qualifying crossing.
// Throws SingularityApproachError on step-size underflow or a non-finite state.
Trajectory integrate(const SystemSpec& sys, const VecX& y0, double span, const Tolerances& tol = {},
                     const std::vector<double>& output_at = {}, const std::optional<EventSpec>& event = {});

// Cumulative time t(s) = int_0^s |u|^2 ds from the samples of a regularized
// trajectory, by the Hermite-corrected trapezoid on each segment (exact for
// cubic |u|^2). Returns x itself for Cartesian runs.
std::vector<double> physical_time(const Trajectory& traj);

struct FlowEquivalenceReport {
    double max_deviation = 0.0;      // sup-norm over position and momentum, relative to the state scale
    double min_radius = 0.0;         // smallest |X| along the regularized arc
    double max_planar_drift = 0.0;   // max |Z|, |P_Z| for planar entry data
    double ks_energy_drift = 0.0;
    double ks_bilinear_drift = 0.0;
    bool cartesian_failed = false;   // Cartesian integration hit SingularityApproachError
    std::string cartesian_message;
    int samples = 0;
};

// Lifts the entry state, integrates K_I in s until physical time `span`,
// integrates H directly, and compares the projected KS states with the
// Cartesian ones at the same physical times.
FlowEquivalenceReport flow_equivalence(const PlanetoState& entry, double span, const Params& params,
                                       const Tolerances& tol = {});


}  // namespace ksreg
