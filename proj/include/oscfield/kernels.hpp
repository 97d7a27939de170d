#pragma once

#include <Eigen/Dense>
#include <string>

#include "oscfield/domain.hpp"
#include "oscfield/errors.hpp"

namespace oscfield {

enum class KernelFamily { matern, squared_exponential };

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string& name);

// Stationary isotropic covariance of the driving noise: C(0) = s^2,
// nonincreasing in r for both families.
struct KernelSpec {
    KernelFamily family = KernelFamily::matern;
    double nu = 1.5;           // smoothness (matern only)
    double length_scale = 1.0; // l, length units
    double magnitude = 1.0;    // s, field units

    static KernelSpec matern(double nu, double length_scale, double magnitude);
    static KernelSpec squared_exponential(double length_scale, double magnitude);

    // Throws std::invalid_argument on nonpositive nu / l / s.
    void validate() const;
};

// C(r) at separation r >= 0. Matern uses the half-integer closed forms for
// nu in {1/2, 3/2, 5/2} and the Bessel-K expression otherwise.
double kernel_eval(const KernelSpec& spec, double r);

// Isotropic spectral density S(w) at radial angular frequency w >= 0 in
// `dim` in {1, 2} dimensions, normalized so that
// C(r) = (2*pi)^-dim * integral S(|w|) exp(i w.r) dw. Strictly positive.
double spectral_density(const KernelSpec& spec, double w, int dim);

// Diagonal projection onto a Laplacian eigenbasis:
// q_n = S(sqrt(lambda_n)) in the domain's kernel dimension.
Eigen::VectorXd project_noise(const KernelSpec& spec, const BasisSet& basis);

}  // namespace oscfield
