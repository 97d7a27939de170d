#include "oscfield/blocks.hpp"

#include <cmath>
#include <sstream>

#include "oscfield/domain.hpp"  // gauss_legendre

namespace oscfield {

namespace {

// cos-like and sin-like functions of the shifted companion block:
// with delta = a^2/4 - b,  exp(t F) = e^{-at/2} (c(t) I + sl(t) (F + a/2 I))
// where c = cos(w t), sl = sin(w t)/w for delta = -w^2 < 0 and the hyperbolic
// analogues for delta > 0. Returns e^{-at/2} c and e^{-at/2} sl computed in
// forms that neither overflow (exponent differences are all <= 0) nor lose
// digits near the critical boundary (power series in delta t^2).
void damped_scalar_props(double a, double b, double t, double& ec, double& esl) {
    const double delta = 0.25 * a * a - b;
    const double z = delta * t * t;
    const bool near_critical =
        std::abs(z) < 1e-8 || (std::abs(delta) < 1e-9 * b && std::abs(z) < 100.0);
    if (near_critical) {
        // c = sum z^k/(2k)!, s = sum z^k/(2k+1)!, sl = t s.
        double c = 1.0, s = 1.0, tc = 1.0, ts = 1.0;
        for (int k = 1; k <= 60; ++k) {
            tc *= z / ((2.0 * k - 1.0) * (2.0 * k));
            ts *= z / ((2.0 * k) * (2.0 * k + 1.0));
            c += tc;
            s += ts;
            if (std::abs(tc) + std::abs(ts) < 1e-18 * (std::abs(c) + std::abs(s))) break;
        }
        const double e = std::exp(-0.5 * a * t);
        ec = e * c;
        esl = e * t * s;
    } else if (delta < 0.0) {
        const double w = std::sqrt(-delta);
        const double e = std::exp(-0.5 * a * t);
        ec = e * std::cos(w * t);
        esl = e * std::sin(w * t) / w;
    } else {
        const double mu = std::sqrt(delta);  // mu <= a/2 since b >= 0
        const double ep = std::exp((mu - 0.5 * a) * t);
        const double em = std::exp(-(mu + 0.5 * a) * t);
        ec = 0.5 * (ep + em);
        esl = 0.5 * (ep - em) / mu;
    }
}

Eigen::Matrix2d transition2(double a, double b, double t) {
    double ec, esl;
    damped_scalar_props(a, b, t, ec, esl);
    Eigen::Matrix2d A;
    A << ec + 0.5 * a * esl, esl, -b * esl, ec - 0.5 * a * esl;
    return A;
}

// Noise covariance by 24-node Gauss-Legendre on Q = q int phi phi' dtau with
// phi(tau) = exp(tau F) L. Used only when every rate (a, sqrt|delta|) times
// dt is below ~0.05, where the integrand is polynomial-like and the fixed
// rule is exact to machine precision.
Eigen::Matrix2d noise_quadrature(double a, double b, double q, double t) {
    static std::vector<double> nodes, weights;
    if (nodes.empty()) gauss_legendre(24, nodes, weights);
    Eigen::Matrix2d Q = Eigen::Matrix2d::Zero();
    for (size_t i = 0; i < nodes.size(); ++i) {
        const double tau = 0.5 * t * (nodes[i] + 1.0);
        double ec, esl;
        damped_scalar_props(a, b, tau, ec, esl);
        const Eigen::Vector2d phi(esl, ec - 0.5 * a * esl);
        Q += (0.5 * t * weights[i] * q) * phi * phi.transpose();
    }
    return Q;
}

Eigen::Matrix2d noise2(double a, double b, double q, double t) {
    Eigen::Matrix2d Q;
    if (a == 0.0 && b == 0.0) {
        // Wiener velocity: polynomial integral.
        Q << q * t * t * t / 3.0, q * t * t / 2.0, q * t * t / 2.0, q * t;
        return Q;
    }
    const double at = a * t;
    if (a > 0.0 && at >= 0.05) {
        if (b > 0.0) {
            // Stationary identity Q = P - A P A'; the decay factor
            // exp(-a dt) <= 0.95 bounds the cancellation.
            Eigen::Matrix2d P;
            stationary_block_cov(a, b, q, P);
            const Eigen::Matrix2d A = transition2(a, b, t);
            Q = P - A * P * A.transpose();
            return 0.5 * (Q + Q.transpose());
        }
        // b = 0, a > 0: elementary exponential integrals of
        // phi = ((1 - e^{-a tau})/a, e^{-a tau}).
        auto em1 = [t](double p) { return -std::expm1(-p * t) / p; };
        const double i1 = em1(a), i2 = em1(2.0 * a);
        Q << q * (t - 2.0 * i1 + i2) / (a * a), q * (i1 - i2) / a, q * (i1 - i2) / a, q * i2;
        return Q;
    }
    const double delta = 0.25 * a * a - b;
    if (delta < 0.0) {
        const double w = std::sqrt(-delta);
        if (w * t >= 0.05) {
            // Closed-form primitives of e^{-a tau} {1, cos, sin}(2 w tau),
            // valid down to a = 0 (then I0 = t exactly).
            const double i0 = a > 0.0 ? -std::expm1(-at) / a : t;
            const double beta = 2.0 * w, den = a * a + beta * beta;
            const double e = std::exp(-at);
            const double cb = std::cos(beta * t), sb = std::sin(beta * t);
            const double ic = (a - e * (a * cb - beta * sb)) / den;
            const double is = (beta - e * (a * sb + beta * cb)) / den;
            const double d0 = i0 - ic;  // int e^{-a tau} 2 sin^2(w tau)
            const double q11 = q * d0 / (2.0 * w * w);
            const double q12 = q * (is / (2.0 * w) - a * d0 / (4.0 * w * w));
            const double q22 =
                q * (0.5 * (i0 + ic) - a * is / (2.0 * w) + a * a * d0 / (8.0 * w * w));
            Q << q11, q12, q12, q22;
            return Q;
        }
    }
    // Short-step regime (all rates * dt < 0.05): fixed quadrature.
    return noise_quadrature(a, b, q, t);
}

void require_nonneg(double v, const char* what) {
    if (v < 0.0 || !std::isfinite(v)) {
        throw std::invalid_argument(std::string(what) + " must be finite and >= 0");
    }
}

}  // namespace

ModeCoefficients mode_coefficients(double gamma, double chi, double lambda, double omega) {
    require_nonneg(gamma, "gamma");
    require_nonneg(chi, "chi");
    require_nonneg(lambda, "lambda");
    require_nonneg(omega, "omega");
    ModeCoefficients mc;
    mc.a = gamma + chi * lambda;
    mc.b = mc.a * mc.a / 2 + omega * omega;
    return mc;
}

Eigen::Matrix2d continuous_block(double a, double b) {
    require_nonneg(a, "a");
    require_nonneg(b, "b");
    Eigen::Matrix2d F;
    F << 0.0, 1.0, -b, -a;
    return F;
}

DiscreteBlock discretize_block(double a, double b, double q, double dt) {
    require_nonneg(a, "a");
    require_nonneg(b, "b");
    require_nonneg(q, "q");
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw std::invalid_argument("discretize_block: dt must be strictly positive");
    }
    DiscreteBlock blk{transition2(a, b, dt), noise2(a, b, q, dt)};
    if (!blk.A.allFinite() || !blk.Q.allFinite()) {
        std::ostringstream os;
        os << "discretize_block: nonfinite result for a=" << a << " b=" << b << " q=" << q
           << " dt=" << dt;
        throw NumericalError(os.str());
    }
    return blk;
}

DiscreteBlock discretize_block(const Eigen::Matrix2d& F, double q, double dt) {
    if (F(0, 0) != 0.0 || F(0, 1) != 1.0) {
        throw std::invalid_argument(
            "discretize_block: F must be the companion form [[0,1],[-b,-a]]");
    }
    return discretize_block(-F(1, 1), -F(1, 0), q, dt);
}

bool stationary_block_cov(double a, double b, double q, Eigen::Matrix2d& P) {
    if (!(a > 0.0) || !(b > 0.0)) return false;
    P << q / (2.0 * a * b), 0.0, 0.0, q / (2.0 * a);
    return true;
}

}  // namespace oscfield
