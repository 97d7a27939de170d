#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "oscfield/model.hpp"

namespace oscfield {

// Gaussian state with the covariance held as a square-root factor
// C = U' U (U upper triangular after every filter operation), so C is
// symmetric PSD by construction and never reconstructed during filtering.
struct GaussianBelief {
    Eigen::VectorXd mean;
    Eigen::MatrixXd sqrt_cov;

    int dim() const { return static_cast<int>(mean.size()); }
    Eigen::MatrixXd cov() const { return sqrt_cov.transpose() * sqrt_cov; }
};

struct FilterOptions {
    bool keep_history = true;   // store per-step beliefs (required for smoothing)
    bool joseph_dense = false;  // dense Joseph-form covariance path (cross-check)
    double q_floor = 1e-12;     // relative diagonal floor on Q blocks before factorization
};

struct FilterResult {
    std::vector<GaussianBelief> filtered;  // per step, if keep_history
    GaussianBelief last;
    double loglik = 0.0;
    std::vector<double> step_loglik;  // per step; 0 on prediction-only steps
    FilterOptions options;
};

// Zero-mean prior at the first step: per-block stationary covariance
// diag(q/(2ab), q/(2a)) where damped, the configured diffuse variance on
// both slots otherwise.
GaussianBelief stationary_prior(const DiscreteSystem& sys);

// One dense prediction: mean' = A mean, cov' = A cov A' + Q, via QR of the
// stacked factor. General-purpose (oracle tests; the filter itself runs the
// block-diagonal equivalent).
GaussianBelief predict_step(const GaussianBelief& belief, const Eigen::MatrixXd& a,
                            const Eigen::MatrixXd& q);

// One measurement update with diagonal noise R = diag(r). Returns the
// posterior and the marginal log-likelihood increment
// -d/2 log(2 pi) - 1/2 log|S| - 1/2 e' S^-1 e. Throws NumericalError with a
// condition estimate if the innovation covariance is numerically singular.
std::pair<GaussianBelief, double> update_step(const GaussianBelief& belief,
                                              const Eigen::MatrixXd& h,
                                              const Eigen::VectorXd& r_diag,
                                              const Eigen::VectorXd& y);

// Forward pass: alternate block-wise prediction and triangularized updates;
// steps without observations skip the update. Total log-likelihood is the
// prediction-error decomposition sum.
FilterResult filter_pass(const DiscreteSystem& sys, const ObservationBatch& data,
                         const GaussianBelief& prior, const FilterOptions& opts = {});

// Backward square-root RTS recursion from the stored filtered beliefs.
std::vector<GaussianBelief> smooth_pass(const DiscreteSystem& sys, const FilterResult& fr);

// Field posterior on a fixed evaluation point set: per-component and summed
// means/variances per step, from any belief sequence (filtered or smoothed).
struct PosteriorField {
    std::vector<double> times;
    std::vector<std::string> component_names;
    std::vector<Eigen::MatrixXd> component_mean;  // [component] (steps x points)
    std::vector<Eigen::MatrixXd> component_var;
    Eigen::MatrixXd total_mean;  // steps x points
    Eigen::MatrixXd total_var;
};
PosteriorField posterior_at(const std::vector<GaussianBelief>& beliefs,
                            const DiscreteSystem& sys, const BasisSet& basis,
                            const Eigen::MatrixXd& points);

// Time-averaged envelope of each component's posterior mean field:
// amp_c(x) = sqrt(2 * mean_k m_c(t_k, x)^2), one column per component
// (points x components). The sqrt(2) factor calibrates the RMS so a pure
// sinusoid of amplitude A maps to A.
Eigen::MatrixXd amplitude_maps(const PosteriorField& field);

}  // namespace oscfield
