#pragma once

#include <Eigen/Dense>
#include <vector>

#include "oscfield/model.hpp"

namespace oscfield {

// A fully specified synthetic-data run. Identical plans (including the seed)
// produce byte-identical outputs on any platform: the generator stack is
// pinned (mt19937_64 + explicit Box-Muller) rather than delegated to
// implementation-defined library distributions.
struct SimulationPlan {
    ModelSpec model;
    std::vector<double> times;               // strictly increasing
    std::vector<Eigen::MatrixXd> locations;  // per step, d_k x coord_dim
    unsigned long long seed = 0;

    // Empty = draw from the stationary/diffuse prior; otherwise the exact
    // initial coefficient state (size = model.state_dim()).
    Eigen::VectorXd initial_state;

    // Multipliers on the noise draws (standard-deviation scale); 0 turns the
    // corresponding noise off, giving deterministic dynamics / exact
    // observations. Model validation itself requires strictly positive
    // variances, so these are simulation-side switches.
    double process_noise_scale = 1.0;
    double measurement_noise_scale = 1.0;

    void validate() const;
};

// Build a plan observing the model at n_steps evenly spaced times in
// [t0, t1], each step sampling n_per_step locations uniformly over the
// domain. Locations are scattered across space-time; times stay gridded so
// downstream slice comparisons land on exact time stamps.
SimulationPlan scattered_plan(const ModelSpec& model, double t0, double t1, int n_steps,
                              int n_per_step, unsigned long long seed);

struct Trajectory {
    std::vector<double> times;
    Eigen::MatrixXd states;  // n_steps x state_dim
};

struct SimulationResult {
    Trajectory trajectory;
    ObservationBatch observations;
};

// Exact sampling of the discrete-time model: x_k = A_k x_{k-1} + w_k with
// w_k drawn through the Q blocks' square-root factors. Each (component,
// harmonic, mode) block consumes its own deterministic substream, so a
// component simulated alone reproduces exactly its share of a joint run
// (superposition).
Trajectory sample_trajectory(const SimulationPlan& plan);

// y_k = H_k x_k + r_k, r_k ~ N(0, sigma^2 I), from a dedicated substream.
ObservationBatch sample_observations(const Trajectory& trajectory,
                                     const SimulationPlan& plan);

// Trajectory + observations sharing one system assembly.
SimulationResult simulate(const SimulationPlan& plan);

// Project coefficient states to field values at the given points
// (steps x points). component = -1 sums all components.
Eigen::MatrixXd trajectory_field(const Trajectory& trajectory, const DiscreteSystem& sys,
                                 const BasisSet& basis, const Eigen::MatrixXd& points,
                                 int component = -1);

// Statistical validation that sampling matches the discretization: empirical
// one-step mean/covariance from a fixed starting state versus (A x0, Q), at
// relative tolerance 3/sqrt(count).
struct MomentCheckResult {
    Eigen::Vector2d expected_mean, empirical_mean;
    Eigen::Matrix2d expected_cov, empirical_cov;
    double rel_tol = 0.0;
    bool pass = false;
};
MomentCheckResult transition_moment_check(double a, double b, double q, double dt,
                                          int count, unsigned long long seed,
                                          double noise_scale = 1.0);

struct TransitionMomentReport {
    int count = 0;
    double rel_tol = 0.0;
    double worst_mean_ratio = 0.0;  // max over blocks of |err| / tolerance
    double worst_cov_ratio = 0.0;
    bool pass = false;
};
TransitionMomentReport transition_moment_check(const ModelSpec& model, double dt,
                                               int count, unsigned long long seed);

}  // namespace oscfield
