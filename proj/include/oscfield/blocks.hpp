#pragma once

#include <Eigen/Dense>

#include "oscfield/errors.hpp"

namespace oscfield {

// Scalar action of the operator pair on one eigenmode: A acts as
// a = gamma + chi * lambda, and the coupling condition fixes
// b = a^2/2 + omega^2. The expression for b is the single source of truth;
// stability checks compare against it bitwise.
struct ModeCoefficients {
    double a = 0.0;
    double b = 0.0;
};
ModeCoefficients mode_coefficients(double gamma, double chi, double lambda, double omega);

// Companion-form drift block F = [[0, 1], [-b, -a]].
Eigen::Matrix2d continuous_block(double a, double b);

struct DiscreteBlock {
    Eigen::Matrix2d A;  // exp(dt * F)
    Eigen::Matrix2d Q;  // integrated process noise, symmetric PSD
};

// Exact one-step discretization of the block SDE
//   d[x, v] = F [x, v] dt + [0, 1] dW,  Var(dW) = q dt:
// A = exp(dt F) in closed form (case split on the discriminant a^2/4 - b),
// Q = int_0^dt exp(tau F) L q L' exp(tau F)' dtau via the stationary-
// covariance identity for damped blocks and closed-form primitives
// otherwise; a fixed high-order Gauss-Legendre rule covers the short-step
// regime where those expressions lose digits to cancellation.
// Throws NumericalError if any entry comes out nonfinite (extreme a*dt).
DiscreteBlock discretize_block(double a, double b, double q, double dt);

// Same, taking the companion matrix; F must have the exact shape
// [[0, 1], [-b, -a]] with a, b >= 0.
DiscreteBlock discretize_block(const Eigen::Matrix2d& F, double q, double dt);

// Stationary covariance P of the block (solution of F P + P F' + L q L' = 0):
// diag(q / (2 a b), q / (2 a)). Returns false when a = 0 (undamped blocks
// have no stationary law; callers fall back to a diffuse prior).
bool stationary_block_cov(double a, double b, double q, Eigen::Matrix2d& P);

}  // namespace oscfield
