#pragma once

// Shared helpers for the test binaries: a brute-force joint-Gaussian
// conditioning oracle (the slow-but-obviously-correct reference the filter
// and smoother are checked against) and a generator of random small model
// instances spanning damped/undamped components and ragged observation
// layouts.

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "oscfield/filter.hpp"
#include "oscfield/model.hpp"

namespace oscfield_test {

inline Eigen::MatrixXd dense_blockdiag(const std::vector<Eigen::Matrix2d>& blocks) {
    const int n = 2 * static_cast<int>(blocks.size());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (int b = 0; b < static_cast<int>(blocks.size()); ++b) {
        m.block<2, 2>(2 * b, 2 * b) = blocks[b];
    }
    return m;
}

inline Eigen::MatrixXd dense_transition(const oscfield::DiscreteSystem& sys, int k) {
    return dense_blockdiag(sys.A_at(k));
}

inline Eigen::MatrixXd dense_noise(const oscfield::DiscreteSystem& sys, int k) {
    return dense_blockdiag(sys.Q_at(k));
}

struct OracleResult {
    std::vector<Eigen::VectorXd> filtered_mean, smoothed_mean;
    std::vector<Eigen::MatrixXd> filtered_cov, smoothed_cov;
    double loglik = 0.0;
};

// Explicit joint-Gaussian conditioning over the stacked state trajectory:
// builds the full (T n) x (T n) prior covariance by propagating the
// recursion, then conditions x_k on the observation prefix (filtered) and on
// everything (smoothed). a[0]/q[0] are unused; h[k] may have zero rows.
inline OracleResult joint_conditioning_oracle(const Eigen::VectorXd& prior_mean,
                                              const Eigen::MatrixXd& prior_cov,
                                              const std::vector<Eigen::MatrixXd>& a,
                                              const std::vector<Eigen::MatrixXd>& q,
                                              const std::vector<Eigen::MatrixXd>& h,
                                              const std::vector<Eigen::VectorXd>& y,
                                              double r_var) {
    const int t_steps = static_cast<int>(h.size());
    const int n = static_cast<int>(prior_mean.size());

    Eigen::VectorXd mu(t_steps * n);
    mu.head(n) = prior_mean;
    for (int k = 1; k < t_steps; ++k) {
        mu.segment(k * n, n) = a[k] * mu.segment((k - 1) * n, n);
    }

    Eigen::MatrixXd sig(t_steps * n, t_steps * n);
    sig.topLeftCorner(n, n) = prior_cov;
    for (int k = 1; k < t_steps; ++k) {
        sig.block(k * n, k * n, n, n) =
            a[k] * sig.block((k - 1) * n, (k - 1) * n, n, n) * a[k].transpose() + q[k];
        for (int j = 0; j < k; ++j) {
            sig.block(j * n, k * n, n, n) =
                sig.block(j * n, (k - 1) * n, n, n) * a[k].transpose();
            sig.block(k * n, j * n, n, n) = sig.block(j * n, k * n, n, n).transpose();
        }
    }

    int d_total = 0;
    std::vector<int> obs_offset(t_steps + 1, 0);
    for (int k = 0; k < t_steps; ++k) {
        obs_offset[k] = d_total;
        d_total += static_cast<int>(h[k].rows());
    }
    obs_offset[t_steps] = d_total;

    Eigen::MatrixXd hbig = Eigen::MatrixXd::Zero(d_total, t_steps * n);
    Eigen::VectorXd ybig(d_total);
    for (int k = 0; k < t_steps; ++k) {
        const int d = static_cast<int>(h[k].rows());
        if (d == 0) continue;
        hbig.block(obs_offset[k], k * n, d, n) = h[k];
        ybig.segment(obs_offset[k], d) = y[k];
    }

    Eigen::MatrixXd s = hbig * sig * hbig.transpose();
    s.diagonal().array() += r_var;
    const Eigen::MatrixXd cxy = sig * hbig.transpose();
    const Eigen::VectorXd resid = ybig - hbig * mu;

    OracleResult out;
    out.filtered_mean.resize(t_steps);
    out.filtered_cov.resize(t_steps);
    out.smoothed_mean.resize(t_steps);
    out.smoothed_cov.resize(t_steps);

    auto condition = [&](int k, int m, Eigen::VectorXd& mean, Eigen::MatrixXd& cov) {
        mean = mu.segment(k * n, n);
        cov = sig.block(k * n, k * n, n, n);
        if (m == 0) return;
        const Eigen::MatrixXd sm = s.topLeftCorner(m, m);
        const Eigen::MatrixXd ck = cxy.block(k * n, 0, n, m);
        Eigen::LLT<Eigen::MatrixXd> llt(sm);
        mean += ck * llt.solve(resid.head(m));
        cov -= ck * llt.solve(ck.transpose());
    };
    for (int k = 0; k < t_steps; ++k) {
        condition(k, obs_offset[k + 1], out.filtered_mean[k], out.filtered_cov[k]);
        condition(k, d_total, out.smoothed_mean[k], out.smoothed_cov[k]);
    }

    if (d_total > 0) {
        Eigen::LLT<Eigen::MatrixXd> llt(s);
        double logdet = 0.0;
        for (int i = 0; i < d_total; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
        out.loglik = -0.5 * d_total * std::log(2.0 * M_PI) - 0.5 * logdet -
                     0.5 * resid.dot(llt.solve(resid));
    }
    return out;
}

// Convenience: run the oracle directly from an assembled system + batch.
inline OracleResult oracle_from_system(const oscfield::DiscreteSystem& sys,
                                       const oscfield::ObservationBatch& data,
                                       const oscfield::GaussianBelief& prior) {
    const int t_steps = sys.n_steps();
    std::vector<Eigen::MatrixXd> a(t_steps), q(t_steps), h(t_steps);
    std::vector<Eigen::VectorXd> y(t_steps);
    for (int k = 0; k < t_steps; ++k) {
        if (k > 0) {
            a[k] = dense_transition(sys, k);
            q[k] = dense_noise(sys, k);
        }
        h[k] = sys.measurement_matrix(k);
        y[k] = data.values[k];
    }
    return joint_conditioning_oracle(prior.mean, prior.cov(), a, q, h, y,
                                     sys.meas_noise_var);
}

struct RandomInstance {
    oscfield::ModelSpec model;
    oscfield::BasisSet basis;
    oscfield::ObservationBatch data;
    oscfield::DiscreteSystem sys;
};

// A random small instance: 1-2 components (mix of resonators and a Wiener
// bias), ragged per-step observation counts with guaranteed empty and
// non-empty steps, observation values drawn i.i.d. (the conditioning
// identity holds for arbitrary data).
inline RandomInstance make_random_instance(unsigned long long seed, int t_steps = 20,
                                           int n_modes = 8, int max_components = 2) {
    using namespace oscfield;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    ModelSpec model;
    model.domain = DomainSpec::interval(1.0);
    model.n_modes = n_modes;
    model.meas_noise_var = 0.01 + 0.2 * unif(rng);
    model.diffuse_variance = 25.0;

    const int n_components = 1 + static_cast<int>(unif(rng) * max_components) % max_components;
    for (int c = 0; c < n_components; ++c) {
        ComponentSpec comp;
        comp.name = "c" + std::to_string(c);
        const bool bias = (c == 1) && unif(rng) < 0.5;
        if (bias) {
            comp.omega = FrequencySchedule::constant(0.0);
            comp.gamma = 0.0;
            comp.chi = 0.0;
        } else {
            comp.omega = FrequencySchedule::constant(1.0 + 14.0 * unif(rng));
            comp.gamma = 0.2 + 1.8 * unif(rng);
            comp.chi = 0.05 * unif(rng);
            if (unif(rng) < 0.3) comp.harmonics = 2;
        }
        const double nus[3] = {0.5, 1.5, 2.5};
        comp.kernel = unif(rng) < 0.25
                          ? KernelSpec::squared_exponential(0.1 + 0.3 * unif(rng),
                                                            0.5 + 2.5 * unif(rng))
                          : KernelSpec::matern(nus[rng() % 3], 0.1 + 0.3 * unif(rng),
                                               0.5 + 2.5 * unif(rng));
        model.components.push_back(comp);
    }
    model.validate();
    BasisSet basis = build_basis(model.domain, n_modes);

    ObservationBatch data;
    double t = 0.0;
    for (int k = 0; k < t_steps; ++k) {
        data.times.push_back(t);
        t += 0.01 + 0.09 * unif(rng);
        int d = static_cast<int>(unif(rng) * 6.0);
        if (k == 2) d = 0;                    // guaranteed empty step
        if (k == 3 && d == 0) d = 3;          // and a guaranteed non-empty one
        Eigen::MatrixXd pts(d, 1);
        for (int i = 0; i < d; ++i) pts(i, 0) = -0.95 + 1.9 * unif(rng);
        Eigen::VectorXd vals(d);
        for (int i = 0; i < d; ++i) vals(i) = 2.0 * gauss(rng);
        data.locations.push_back(pts);
        data.values.push_back(vals);
    }
    DiscreteSystem sys = assemble_system(model, basis, data.times, data.locations);
    return RandomInstance{std::move(model), std::move(basis), std::move(data),
                          std::move(sys)};
}

}  // namespace oscfield_test
