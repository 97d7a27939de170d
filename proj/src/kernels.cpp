#include "oscfield/kernels.hpp"

#include <cmath>
#include <numbers>

namespace oscfield {

namespace {
constexpr double kPi = std::numbers::pi;
}

std::string to_string(KernelFamily family) {
    return family == KernelFamily::matern ? "matern" : "squared_exponential";
}

KernelFamily kernel_family_from_string(const std::string& name) {
    if (name == "matern") return KernelFamily::matern;
    if (name == "squared_exponential" || name == "se") return KernelFamily::squared_exponential;
    throw ConfigError("unsupported kernel family: '" + name + "'");
}

KernelSpec KernelSpec::matern(double nu, double length_scale, double magnitude) {
    KernelSpec k{KernelFamily::matern, nu, length_scale, magnitude};
    k.validate();
    return k;
}

KernelSpec KernelSpec::squared_exponential(double length_scale, double magnitude) {
    KernelSpec k{KernelFamily::squared_exponential, 0.0, length_scale, magnitude};
    k.nu = std::numeric_limits<double>::infinity();
    k.validate();
    return k;
}

void KernelSpec::validate() const {
    if (!(length_scale > 0.0) || !std::isfinite(length_scale))
        throw std::invalid_argument("kernel length-scale must be strictly positive");
    if (!(magnitude > 0.0) || !std::isfinite(magnitude))
        throw std::invalid_argument("kernel magnitude must be strictly positive");
    if (family == KernelFamily::matern && !(nu > 0.0))
        throw std::invalid_argument("matern smoothness nu must be strictly positive");
}

double kernel_eval(const KernelSpec& spec, double r) {
    spec.validate();
    if (r < 0.0) throw std::invalid_argument("kernel_eval: separation r must be >= 0");
    const double s2 = spec.magnitude * spec.magnitude;
    const double l = spec.length_scale;

    if (spec.family == KernelFamily::squared_exponential) {
        return s2 * std::exp(-r * r / (2.0 * l * l));
    }

    const double nu = spec.nu;
    const double u = std::sqrt(2.0 * nu) * r / l;
    if (nu == 0.5) return s2 * std::exp(-u);
    if (nu == 1.5) return s2 * (1.0 + u) * std::exp(-u);
    if (nu == 2.5) return s2 * (1.0 + u + u * u / 3.0) * std::exp(-u);
    // General order: s^2 * 2^(1-nu)/Gamma(nu) * u^nu * K_nu(u); the limit at
    // u -> 0 is s^2, reached well before u underflows cyl_bessel_k.
    if (u < 1e-8) return s2;
    return s2 * std::pow(2.0, 1.0 - nu) / std::tgamma(nu) * std::pow(u, nu) *
           std::cyl_bessel_k(nu, u);
}

double spectral_density(const KernelSpec& spec, double w, int dim) {
    spec.validate();
    if (dim != 1 && dim != 2)
        throw std::invalid_argument("spectral_density: dim must be 1 or 2");
    if (w < 0.0) throw std::invalid_argument("spectral_density: frequency w must be >= 0");
    const double s2 = spec.magnitude * spec.magnitude;
    const double l = spec.length_scale;

    if (spec.family == KernelFamily::squared_exponential) {
        // S(w) = s^2 (2 pi)^(d/2) l^d exp(-l^2 w^2 / 2); the Gaussian tail
        // underflows for large l*w, so floor at the smallest normal double
        // to keep the density strictly positive.
        const double v = s2 * std::pow(2.0 * kPi, 0.5 * dim) * std::pow(l, dim) *
                         std::exp(-0.5 * l * l * w * w);
        return std::max(v, std::numeric_limits<double>::min());
    }

    // Matern: S(w) = s^2 2^d pi^(d/2) Gamma(nu + d/2) (2 nu)^nu / (Gamma(nu) l^(2 nu))
    //               * (2 nu / l^2 + w^2)^-(nu + d/2)
    const double nu = spec.nu;
    const double coef = s2 * std::pow(2.0, dim) * std::pow(kPi, 0.5 * dim) *
                        std::tgamma(nu + 0.5 * dim) * std::pow(2.0 * nu, nu) /
                        (std::tgamma(nu) * std::pow(l, 2.0 * nu));
    return coef * std::pow(2.0 * nu / (l * l) + w * w, -(nu + 0.5 * dim));
}

Eigen::VectorXd project_noise(const KernelSpec& spec, const BasisSet& basis) {
    const int dim = basis.domain().kernel_dim();
    Eigen::VectorXd q(basis.size());
    for (int n = 0; n < basis.size(); ++n)
        q(n) = spectral_density(spec, std::sqrt(basis.eigenvalue(n)), dim);
    return q;
}

}  // namespace oscfield
