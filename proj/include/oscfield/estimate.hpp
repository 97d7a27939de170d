#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "oscfield/model.hpp"

namespace oscfield {

// --- named positive parameters with a log transform -------------------------

// One named model parameter in natural (positive) space. Optimization runs
// on log-values of the active entries; frozen entries never move. Entries
// whose template value is zero are frozen automatically (the log transform
// has no image for them; zero damping is the usual deliberate case).
struct ParamEntry {
    std::string name;
    double value = 0.0;
    bool active = false;
};

class ParamVector {
  public:
    // Canonical layout: per component gamma, chi, [nu,] l, s (nu only for
    // Matern kernels, frozen by default), then the global sigma_meas (the
    // standard deviation, not the variance). Positive non-nu entries start
    // active.
    static ParamVector from_model(const ModelSpec& model);

    int size() const { return static_cast<int>(entries_.size()); }
    int n_active() const;
    const ParamEntry& entry(int i) const { return entries_[i]; }
    const std::vector<ParamEntry>& entries() const { return entries_; }

    double value(const std::string& name) const;
    void set_value(const std::string& name, double v);
    void set_active(const std::string& name, bool active);
    bool has(const std::string& name) const;

    // Log-space view of the active entries, in layout order.
    Eigen::VectorXd active_log() const;
    void set_active_log(const Eigen::VectorXd& x);

    // Write the current values into a model with the same structure.
    void apply_to(ModelSpec& model) const;

  private:
    int find(const std::string& name) const;

    struct Binding {
        int component = -1;  // -1 = model-level entry
        int field = 0;       // 0 gamma, 1 chi, 2 nu, 3 l, 4 s, 5 sigma_meas
    };
    std::vector<ParamEntry> entries_;
    std::vector<Binding> bindings_;
};

// --- generic optimizer core --------------------------------------------------

// Central finite-difference gradient; falls back to a one-sided difference
// when a probe point's objective is not finite (edge of the feasible region).
Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double h);

struct CgOptions {
    int max_iterations = 60;
    double fd_step = 1e-4;         // log-space central-difference step
    double gradient_tol = 1e-2;    // stop when the gradient inf-norm drops below
    double objective_rel_tol = 1e-9;  // relative stall threshold
    double objective_min_gain = 1e-3; // absolute stall threshold per accepted step
    int stall_patience = 2;           // consecutive stalled steps before stopping
    int max_evaluations = 2000;
    // Give up early when the objective is still above this after
    // prune_after iterations (multi-restart budget control).
    double prune_above = std::numeric_limits<double>::infinity();
    int prune_after = 8;
};

struct CgResult {
    Eigen::VectorXd x;
    double objective = std::numeric_limits<double>::infinity();
    std::vector<double> trace;  // accepted objective values, nonincreasing
    bool converged = false;
    int evaluations = 0;
    std::string failure;  // nonempty when aborted (nonfinite start, pruned)
};

// Polak-Ribiere nonlinear conjugate gradient with Armijo backtracking and
// finite-difference gradients. Objective values of +inf are treated as
// out-of-bounds: the line search backs off and the direction resets.
CgResult minimize_cg(const std::function<double(const Eigen::VectorXd&)>& f,
                     Eigen::VectorXd x0, const CgOptions& opts = {});

// --- marginal-likelihood objective -------------------------------------------

// Negative marginal log-likelihood of the data under the template model with
// parameters substituted. The basis and system skeleton are built once;
// every evaluation only refreshes the numeric content and reruns the filter.
class Objective {
  public:
    Objective(const ModelSpec& template_model, const ObservationBatch& data);

    const ParamVector& params() const { return params_; }
    int n_active() const { return params_.n_active(); }
    void freeze(const std::string& name) { params_.set_active(name, false); }

    // -loglik at the given parameters; +inf (with a stored diagnostic) on
    // numerical failure so optimizers can retreat.
    double operator()(const ParamVector& p);
    double eval_active_log(const Eigen::VectorXd& x);
    const std::string& last_error() const { return last_error_; }

    const ModelSpec& model() const { return model_; }
    const BasisSet& basis() const { return basis_; }

  private:
    ModelSpec model_;
    BasisSet basis_;
    DiscreteSystem sys_;
    ObservationBatch data_;
    ParamVector params_;
    std::string last_error_;
};

// One-shot objective evaluation.
double objective_value(const ParamVector& p, const ModelSpec& template_model,
                       const ObservationBatch& data);

// --- multi-restart fitting ----------------------------------------------------

struct FitOptions {
    int restarts = 10;
    unsigned long long seed = 0;
    CgOptions optimizer;
    // First restart starts from the template's own values instead of a
    // random draw (so a template already at an optimum is returned as-is).
    bool include_template_start = true;
    // Abort restarts that lag far behind the best finished one.
    bool prune_lagging_restarts = true;
    // Parameter names held fixed at their template values. With everything
    // frozen, fit degenerates to a single objective evaluation.
    std::vector<std::string> freeze;
};

struct RestartRecord {
    Eigen::VectorXd initial_log;
    CgResult result;
};

struct FitResult {
    ParamVector params;  // best parameters (template values if nothing worked)
    double loglik = -std::numeric_limits<double>::infinity();
    int best_restart = -1;
    bool success = false;  // at least one restart reached a finite objective
    std::vector<RestartRecord> restarts;
};

// Data-derived initialization scales: restarts draw log-uniformly over
// [1e-2, 1e2] x center, with centers l ~ domain length, s ~ std(y),
// sigma ~ 0.1 std(y), gamma ~ 1/t_span, chi ~ length^2/t_span.
struct DataScales {
    double std_y = 1.0;
    double length = 1.0;
    double t_span = 1.0;
};
DataScales compute_scales(const ObservationBatch& data, const DomainSpec& domain);

// The template with every free parameter replaced by its data-derived center
// (frozen and zero-valued entries untouched): a truth-free starting point for
// fitting when nothing better is known.
ModelSpec data_derived_template(const ModelSpec& shape, const ObservationBatch& data);

FitResult fit(const ObservationBatch& data, const ModelSpec& template_model,
              const FitOptions& opts = {});

// --- finite-difference validation ---------------------------------------------

// Central-difference gradients at steps h and h/2 plus their per-coordinate
// discrepancy; halving h should shrink the discrepancy ~4x (second order).
struct GradientCheckReport {
    Eigen::VectorXd grad_h, grad_half;
    Eigen::VectorXd discrepancy;  // |grad_h - grad_half| per coordinate
    double max_relative_discrepancy = 0.0;
};
GradientCheckReport gradient_check(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h);
GradientCheckReport gradient_check(const ParamVector& p, const ModelSpec& template_model,
                                   const ObservationBatch& data, double h = 1e-4);

}  // namespace oscfield
