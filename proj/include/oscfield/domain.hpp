#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "oscfield/errors.hpp"

namespace oscfield {

enum class DomainKind { interval, rectangle, disk, sphere };

std::string to_string(DomainKind kind);
DomainKind domain_kind_from_string(const std::string& name);

// Spatial domain for the negative Laplacian. Bounded kinds carry Dirichlet
// boundary conditions; the sphere (a closed surface) carries none.
struct DomainSpec {
    DomainKind kind = DomainKind::interval;
    double half_length = 0.0;                          // interval, [-L, L]
    double half_length_x = 0.0, half_length_y = 0.0;   // rectangle
    double radius = 0.0;                               // disk / sphere

    static DomainSpec interval(double half_length);
    static DomainSpec rectangle(double half_length_x, double half_length_y);
    static DomainSpec disk(double radius);
    static DomainSpec sphere(double radius);

    // Number of coordinates a point carries (sphere points are 3-D Cartesian).
    int coord_dim() const;
    // Dimension used for kernel spectral densities (sphere counts as 2).
    int kernel_dim() const;
    // Total measure |Omega| (length, area, or surface area).
    double measure() const;
    bool has_boundary() const { return kind != DomainKind::sphere; }
    // Characteristic length used for data-derived parameter scales.
    double length_scale() const;

    // True if the point lies in the domain (interior or boundary, within a
    // small relative tolerance). `coords` must hold coord_dim() values.
    bool contains(const double* coords) const;
};

// Analytic index of one eigenfunction. Field meaning depends on the domain:
//   interval:  a = mode number n (1-based)
//   rectangle: a = nx, b = ny
//   disk:      a = angular order m, b = radial zero index k (1-based),
//              c = 0 for the cosine branch, 1 for sine (m = 0 has only c = 0)
//   sphere:    a = degree l, b = order m in [-l, l] (negative = sine branch)
struct ModeIndex {
    int a = 0, b = 0, c = 0;
    friend bool operator<(const ModeIndex& x, const ModeIndex& y) {
        if (x.a != y.a) return x.a < y.a;
        if (x.b != y.b) return x.b < y.b;
        return x.c < y.c;
    }
    friend bool operator==(const ModeIndex& x, const ModeIndex& y) {
        return x.a == y.a && x.b == y.b && x.c == y.c;
    }
};

// The N lowest Dirichlet (or Laplace-Beltrami) eigenpairs of -Laplacian on a
// domain, L2-orthonormal, sorted by eigenvalue with lexicographic index
// tie-breaking. Immutable after construction; evaluation is reentrant.
class BasisSet {
  public:
    BasisSet(DomainSpec domain, std::vector<double> eigenvalues,
             std::vector<ModeIndex> modes, std::vector<double> norms);

    const DomainSpec& domain() const { return domain_; }
    int size() const { return static_cast<int>(eigenvalues_.size()); }
    double eigenvalue(int n) const { return eigenvalues_[n]; }
    const std::vector<double>& eigenvalues() const { return eigenvalues_; }
    const ModeIndex& mode(int n) const { return modes_[n]; }
    // Human-readable mode descriptor, e.g. "n=3", "m=2,k=1,sin", "l=1,m=-1".
    std::string mode_label(int n) const;

    // psi_n at a single point (coords of length domain().coord_dim()).
    double eval_one(int n, const double* coords) const;

  private:
    DomainSpec domain_;
    std::vector<double> eigenvalues_;
    std::vector<ModeIndex> modes_;
    std::vector<double> norms_;  // per-mode normalization constants
};

// Build the N lowest-eigenvalue orthonormal modes. The sphere's constant
// (l = 0) mode is excluded unless explicitly enabled; the slow bias component
// of a model owns the mean level instead.
BasisSet build_basis(const DomainSpec& domain, int n_modes,
                     bool include_sphere_constant_mode = false);

// Evaluate all basis functions at the given points (rows of `points`,
// coord_dim columns). Returns Phi with Phi(i, n) = psi_n(x_i).
// Throws DataError naming the first offending row for points outside Omega.
Eigen::MatrixXd eval_basis(const BasisSet& basis, const Eigen::MatrixXd& points);

struct QuadratureGrid {
    Eigen::MatrixXd points;   // rows = nodes, cols = coord_dim
    Eigen::VectorXd weights;  // positive, summing to |Omega|
};

// Product quadrature rule with `resolution` nodes per axis. Gauss-Legendre
// along non-periodic axes, midpoint along periodic ones; exact enough to hold
// Gram-matrix orthonormality checks to well below 1e-6 at resolution 256.
QuadratureGrid quadrature_grid(const DomainSpec& domain, int resolution);

// k-th positive zero of the Bessel function J_m (k is 1-based), located by
// bracketing and bisection to 1e-12 relative tolerance.
double bessel_j_zero(int order, int k);

// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace oscfield
