#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "oscfield/blocks.hpp"
#include "oscfield/domain.hpp"
#include "oscfield/kernels.hpp"

namespace oscfield {

// Piecewise-constant, right-continuous frequency schedule: at(t) = values[i]
// for t in [knots[i], knots[i+1]), extended by the first value before the
// first knot. A constant schedule carries no knots.
class FrequencySchedule {
  public:
    FrequencySchedule() : values_{0.0} {}
    static FrequencySchedule constant(double omega);
    static FrequencySchedule steps(std::vector<double> knots, std::vector<double> values);

    double at(double t) const;
    bool is_constant() const { return knots_.empty(); }
    const std::vector<double>& knots() const { return knots_; }
    const std::vector<double>& values() const { return values_; }

  private:
    std::vector<double> knots_;   // strictly increasing switch times (empty = constant)
    std::vector<double> values_;  // size knots_.size() (or 1 when constant), all >= 0
};

// One resonator component: a field obeying the damped oscillator dynamics
// with spatial coupling a = gamma + chi * lambda per eigenmode and the
// coupling condition b = a^2/2 + (h omega(t))^2 for harmonic h = 1..H.
// omega == 0 encodes the slowly drifting bias component (Wiener velocity
// when gamma = chi = 0). Harmonics share gamma, chi and the kernel shape;
// each may scale the kernel magnitude.
struct ComponentSpec {
    std::string name = "component";
    FrequencySchedule omega;  // rad/s of the base harmonic
    double gamma = 0.0;       // damping, 1/s
    double chi = 0.0;         // diffusion coupling, length^2/s
    KernelSpec kernel;        // driving-noise covariance
    int harmonics = 1;
    std::vector<double> harmonic_scales;  // empty = all 1; else size == harmonics
    int n_modes = 0;                      // 0 = inherit the model-wide count

    double harmonic_scale(int h) const;  // h is 1-based
    void validate() const;
};

struct ModelSpec {
    DomainSpec domain;
    int n_modes = 0;
    std::vector<ComponentSpec> components;
    double meas_noise_var = 0.0;    // sigma^2, observation units^2
    double diffuse_variance = 1e4;  // prior variance for undamped blocks

    void validate() const;
    int modes_of(int c) const;  // effective mode count of component c
    int max_modes() const;
    int state_dim() const;  // 2 * sum over components of harmonics * modes
};

// Time-stamped measurement sets; d_k may vary and may be zero
// (prediction-only step).
struct ObservationBatch {
    std::vector<double> times;
    std::vector<Eigen::MatrixXd> locations;  // [step] d_k x coord_dim
    std::vector<Eigen::VectorXd> values;     // [step] d_k

    int n_steps() const { return static_cast<int>(times.size()); }
    int n_total() const;
    void validate(const DomainSpec& domain) const;
};

// The model made concrete on a time grid: per-step 2x2 transition/noise
// blocks (pooled across steps that share dt and frequencies) and basis
// evaluations at the observation locations. State ordering is
// component-major, then harmonic, then mode, two slots per block
// (position coefficient, velocity coefficient). Immutable in structure;
// refresh_system re-derives the numeric content for new parameters.
struct DiscreteSystem {
    int state_dim = 0;
    int n_blocks = 0;
    int n_components = 0;
    double meas_noise_var = 0.0;
    double diffuse_variance = 0.0;

    std::vector<double> times;
    std::vector<int> transition_pool;  // per step: pool id of the transition
                                       // from the previous step (-1 at step 0)
    std::vector<std::vector<Eigen::Matrix2d>> pool_A;  // [pool][block]
    std::vector<std::vector<Eigen::Matrix2d>> pool_Q;
    // Pool key: (dt, per-component base frequency) that generated the entry.
    std::vector<std::pair<double, std::vector<double>>> pool_keys;

    std::vector<Eigen::MatrixXd> phi;  // [step] d_k x max_modes

    std::vector<int> block_component;  // [block]
    std::vector<int> block_harmonic;   // [block], 1-based
    std::vector<int> block_mode;       // [block], basis index
    // Continuous-time coefficients at the first step (priors, simulation).
    std::vector<double> cont_a, cont_b, cont_q;
    // Per-block eigenvalue and unscaled projected noise intensity, cached so
    // refresh_system can rebuild pools without touching the basis points.
    std::vector<double> cont_lambda_cache, cont_qbase_cache;
    std::vector<std::string> component_names;

    int n_steps() const { return static_cast<int>(times.size()); }
    int obs_count(int k) const { return static_cast<int>(phi[k].rows()); }
    // Dense d_k x state_dim measurement matrix: rows place the basis values
    // on position slots so y predicts the sum of component fields.
    Eigen::MatrixXd measurement_matrix(int k) const;
    const std::vector<Eigen::Matrix2d>& A_at(int k) const { return pool_A[transition_pool[k]]; }
    const std::vector<Eigen::Matrix2d>& Q_at(int k) const { return pool_Q[transition_pool[k]]; }
};

// Build the discrete system on the given time grid. The belief/trajectory
// convention is: the prior lives at times[0] (no transition into step 0);
// the transition into step k uses dt = t_k - t_{k-1} and the frequency
// schedules evaluated at t_k. Throws DataError on non-monotone times,
// location/time count mismatch, or out-of-domain points.
DiscreteSystem assemble_system(const ModelSpec& model, const BasisSet& basis,
                               const std::vector<double>& times,
                               const std::vector<Eigen::MatrixXd>& locations);

// Recompute pools and continuous coefficients for new parameter values on an
// already-assembled system (same domain, times, locations, structure). Basis
// evaluations are reused untouched; this is the fast path for fitting.
void refresh_system(DiscreteSystem& sys, const ModelSpec& model, const BasisSet& basis);

// Diagnostic space-time spectral density of one component (harmonic h):
//   S(nu_x, nu_t) = Q(nu_x) / ((nu_t^2 - A^2/2 - w^2)^2 + nu_t^2 A^2)
// with A = gamma + chi nu_x^2, w = h * omega(at_time), and Q the kernel
// spectral density (scaled by the harmonic's magnitude factor). Returns +inf
// exactly on the resonance ridge of an undamped component.
double model_spectral_density(const ComponentSpec& comp, double nu_x, double nu_t, int dim,
                              double at_time = 0.0, int harmonic = 1);

}  // namespace oscfield
