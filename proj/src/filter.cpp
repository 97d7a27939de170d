#include "oscfield/filter.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "oscfield/blocks.hpp"
#include "oscfield/errors.hpp"

namespace oscfield {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2 pi)

// Upper-triangular n x n factor R with R'R = S'S, from QR of the stacked
// factor S (rows >= cols). The orthogonal factor is never formed.
Eigen::MatrixXd qr_reduce(const Eigen::MatrixXd& stacked) {
    const int n = static_cast<int>(stacked.cols());
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(stacked);
    Eigen::MatrixXd r = qr.matrixQR()
                            .topRows(n)
                            .triangularView<Eigen::Upper>();
    return r;
}

// Square-root factor of a symmetric PSD matrix via eigenvalue clipping:
// U = D^{1/2} V' with negatives (round-off) floored at zero, so U'U is PSD
// by construction. relative_floor * trace is added to the diagonal first,
// which keeps process-noise blocks strictly positive definite and the
// predicted covariance invertible for the smoother gain.
Eigen::Matrix2d factor_block(const Eigen::Matrix2d& q, double relative_floor) {
    Eigen::Matrix2d sym = 0.5 * (q + q.transpose());
    const double add = relative_floor * std::max(sym.trace(), 0.0);
    sym(0, 0) += add;
    sym(1, 1) += add;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(sym);
    Eigen::Vector2d ev = es.eigenvalues().cwiseMax(0.0);
    return ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd factor_psd(const Eigen::MatrixXd& q) {
    Eigen::MatrixXd sym = 0.5 * (q + q.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    return ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

// Condition estimate of X'X from the diagonal of the triangular factor;
// used in error messages when an inversion is about to go off the rails.
double diag_condition_sq(const Eigen::MatrixXd& x) {
    const double hi = x.diagonal().cwiseAbs().maxCoeff();
    const double lo = x.diagonal().cwiseAbs().minCoeff();
    if (lo <= 0.0) return std::numeric_limits<double>::infinity();
    const double ratio = hi / lo;
    return ratio * ratio;
}

void check_triangular_invertible(const Eigen::MatrixXd& x, const char* what) {
    const double cond = diag_condition_sq(x);
    if (!x.allFinite() || !(cond < 1e30)) {
        std::ostringstream msg;
        msg << what << " is numerically singular (condition estimate " << cond << ")";
        throw NumericalError(msg.str());
    }
}

// mean <- blkdiag(A) * mean, two state slots per block.
void apply_blocks(const std::vector<Eigen::Matrix2d>& a, Eigen::VectorXd& mean) {
    for (int b = 0; b < static_cast<int>(a.size()); ++b) {
        mean.segment<2>(2 * b) = a[b] * mean.segment<2>(2 * b);
    }
}

// dst (n x n) <- U * blkdiag(A)', column pair by column pair.
void right_apply_blocks_t(const std::vector<Eigen::Matrix2d>& a, const Eigen::MatrixXd& u,
                          Eigen::Ref<Eigen::MatrixXd> dst) {
    for (int b = 0; b < static_cast<int>(a.size()); ++b) {
        dst.middleCols(2 * b, 2) = u.middleCols(2 * b, 2) * a[b].transpose();
    }
}

// Square-root measurement update shared by update_step and filter_pass.
// Factorizes [[sqrt(R), 0], [U H', U]]; the triangular result holds the
// innovation factor X (X'X = S), the gain numerator Y (Y'X^-T = K... X) and
// the posterior factor Z in one sweep.
std::pair<GaussianBelief, double> sqrt_update(const GaussianBelief& belief,
                                              const Eigen::MatrixXd& h,
                                              const Eigen::VectorXd& r_diag,
                                              const Eigen::VectorXd& y) {
    const int n = belief.dim();
    const int d = static_cast<int>(y.size());

    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d + n, d + n);
    m.topLeftCorner(d, d) = r_diag.cwiseSqrt().asDiagonal();
    m.bottomLeftCorner(n, d).noalias() = belief.sqrt_cov * h.transpose();
    m.bottomRightCorner(n, n) = belief.sqrt_cov;

    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    const Eigen::MatrixXd x = r.topLeftCorner(d, d);
    check_triangular_invertible(x, "innovation covariance");

    const Eigen::VectorXd innovation = y - h * belief.mean;
    const Eigen::VectorXd z =
        x.transpose().triangularView<Eigen::Lower>().solve(innovation);

    GaussianBelief out;
    out.mean = belief.mean + r.topRightCorner(d, n).transpose() * z;
    out.sqrt_cov = r.bottomRightCorner(n, n);

    const double loglik = -0.5 * d * kLog2Pi -
                          x.diagonal().cwiseAbs().array().log().sum() -
                          0.5 * z.squaredNorm();
    if (!std::isfinite(loglik) || !out.mean.allFinite()) {
        throw NumericalError("measurement update produced nonfinite values");
    }
    return {std::move(out), loglik};
}

// Dense Joseph-form update, kept as an independently-coded cross-check of
// the square-root path: P+ = (I - K H) P (I - K H)' + K R K'.
std::pair<GaussianBelief, double> joseph_update(const GaussianBelief& belief,
                                                const Eigen::MatrixXd& h,
                                                const Eigen::VectorXd& r_diag,
                                                const Eigen::VectorXd& y) {
    const int n = belief.dim();
    const int d = static_cast<int>(y.size());
    const Eigen::MatrixXd p = belief.cov();
    Eigen::MatrixXd s = h * p * h.transpose();
    s.diagonal() += r_diag;
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("innovation covariance is not positive definite");
    }
    const Eigen::VectorXd innovation = y - h * belief.mean;
    const Eigen::MatrixXd k = (llt.solve(h * p)).transpose();  // n x d
    Eigen::MatrixXd ikh = Eigen::MatrixXd::Identity(n, n) - k * h;
    Eigen::MatrixXd post = ikh * p * ikh.transpose();
    post.noalias() += k * r_diag.asDiagonal() * k.transpose();

    GaussianBelief out;
    out.mean = belief.mean + k * innovation;
    out.sqrt_cov = factor_psd(post);

    const Eigen::VectorXd si = llt.solve(innovation);
    double logdet = 0.0;
    for (int i = 0; i < d; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
    const double loglik = -0.5 * d * kLog2Pi - 0.5 * logdet - 0.5 * innovation.dot(si);
    return {std::move(out), loglik};
}

}  // namespace

GaussianBelief stationary_prior(const DiscreteSystem& sys) {
    GaussianBelief prior;
    prior.mean = Eigen::VectorXd::Zero(sys.state_dim);
    Eigen::VectorXd variances(sys.state_dim);
    for (int b = 0; b < sys.n_blocks; ++b) {
        Eigen::Matrix2d p;
        if (stationary_block_cov(sys.cont_a[b], sys.cont_b[b], sys.cont_q[b], p)) {
            variances[2 * b] = p(0, 0);
            variances[2 * b + 1] = p(1, 1);
        } else {
            variances[2 * b] = sys.diffuse_variance;
            variances[2 * b + 1] = sys.diffuse_variance;
        }
    }
    prior.sqrt_cov = Eigen::MatrixXd(variances.cwiseSqrt().asDiagonal());
    return prior;
}

GaussianBelief predict_step(const GaussianBelief& belief, const Eigen::MatrixXd& a,
                            const Eigen::MatrixXd& q) {
    const int n = belief.dim();
    if (a.rows() != n || a.cols() != n || q.rows() != n || q.cols() != n ||
        belief.sqrt_cov.rows() != n || belief.sqrt_cov.cols() != n) {
        throw std::invalid_argument("predict_step: dimension mismatch");
    }
    if (!a.allFinite() || !q.allFinite()) {
        throw NumericalError("predict_step: nonfinite transition or noise matrix");
    }
    GaussianBelief out;
    out.mean = a * belief.mean;
    Eigen::MatrixXd stacked(2 * n, n);
    stacked.topRows(n).noalias() = belief.sqrt_cov * a.transpose();
    stacked.bottomRows(n) = factor_psd(q);
    out.sqrt_cov = qr_reduce(stacked);
    return out;
}

std::pair<GaussianBelief, double> update_step(const GaussianBelief& belief,
                                              const Eigen::MatrixXd& h,
                                              const Eigen::VectorXd& r_diag,
                                              const Eigen::VectorXd& y) {
    const int n = belief.dim();
    const int d = static_cast<int>(y.size());
    if (h.rows() != d || h.cols() != n || r_diag.size() != d ||
        belief.sqrt_cov.rows() != n || belief.sqrt_cov.cols() != n) {
        throw std::invalid_argument("update_step: dimension mismatch");
    }
    if ((r_diag.array() <= 0.0).any()) {
        throw std::invalid_argument("update_step: measurement noise must be positive");
    }
    return sqrt_update(belief, h, r_diag, y);
}

FilterResult filter_pass(const DiscreteSystem& sys, const ObservationBatch& data,
                         const GaussianBelief& prior, const FilterOptions& opts) {
    const int t_steps = sys.n_steps();
    const int n = sys.state_dim;
    if (prior.dim() != n || prior.sqrt_cov.rows() != n || prior.sqrt_cov.cols() != n) {
        throw std::invalid_argument("filter_pass: prior dimension mismatch");
    }
    if (data.n_steps() != t_steps) {
        throw DataError("filter_pass: observation batch has a different step count "
                        "than the assembled system");
    }
    for (int k = 0; k < t_steps; ++k) {
        if (data.times[k] != sys.times[k]) {
            throw DataError("filter_pass: observation times do not match the assembled system");
        }
        if (static_cast<int>(data.values[k].size()) != sys.obs_count(k)) {
            throw DataError("filter_pass: observation count mismatch at step " +
                            std::to_string(k));
        }
    }

    // Process-noise factors are shared across every step in a pool; factor
    // each pool's blocks once, on first use.
    std::vector<std::vector<Eigen::Matrix2d>> pool_uq(sys.pool_Q.size());

    FilterResult result;
    result.options = opts;
    result.step_loglik.assign(t_steps, 0.0);
    if (opts.keep_history) result.filtered.reserve(t_steps);

    GaussianBelief belief = prior;
    Eigen::MatrixXd stacked(2 * n, n);
    for (int k = 0; k < t_steps; ++k) {
        if (k > 0) {
            const auto& a = sys.A_at(k);
            if (opts.joseph_dense) {
                Eigen::MatrixXd p = belief.cov();
                Eigen::MatrixXd ap(n, n);
                for (int b = 0; b < sys.n_blocks; ++b) {
                    ap.middleRows(2 * b, 2) = a[b] * p.middleRows(2 * b, 2);
                }
                Eigen::MatrixXd next(n, n);
                for (int b = 0; b < sys.n_blocks; ++b) {
                    next.middleCols(2 * b, 2) = ap.middleCols(2 * b, 2) * a[b].transpose();
                }
                const auto& q = sys.Q_at(k);
                for (int b = 0; b < sys.n_blocks; ++b) {
                    next.block<2, 2>(2 * b, 2 * b) += q[b];
                }
                apply_blocks(a, belief.mean);
                belief.sqrt_cov = factor_psd(next);
            } else {
                const int pool = sys.transition_pool[k];
                auto& uq = pool_uq[pool];
                if (uq.empty()) {
                    const auto& q = sys.pool_Q[pool];
                    uq.reserve(q.size());
                    for (const auto& qb : q) uq.push_back(factor_block(qb, opts.q_floor));
                }
                right_apply_blocks_t(a, belief.sqrt_cov, stacked.topRows(n));
                stacked.bottomRows(n).setZero();
                for (int b = 0; b < sys.n_blocks; ++b) {
                    stacked.block<2, 2>(n + 2 * b, 2 * b) = uq[b];
                }
                apply_blocks(a, belief.mean);
                belief.sqrt_cov = qr_reduce(stacked);
            }
        }
        const int d = sys.obs_count(k);
        if (d > 0) {
            const Eigen::MatrixXd h = sys.measurement_matrix(k);
            const Eigen::VectorXd r = Eigen::VectorXd::Constant(d, sys.meas_noise_var);
            auto [updated, inc] = opts.joseph_dense
                                      ? joseph_update(belief, h, r, data.values[k])
                                      : sqrt_update(belief, h, r, data.values[k]);
            belief = std::move(updated);
            result.step_loglik[k] = inc;
            result.loglik += inc;
        }
        if (opts.keep_history) result.filtered.push_back(belief);
    }
    result.last = std::move(belief);
    return result;
}

std::vector<GaussianBelief> smooth_pass(const DiscreteSystem& sys, const FilterResult& fr) {
    const int t_steps = sys.n_steps();
    const int n = sys.state_dim;
    if (static_cast<int>(fr.filtered.size()) != t_steps) {
        throw std::invalid_argument(
            "smooth_pass: needs the per-step filter history (run with keep_history)");
    }
    std::vector<GaussianBelief> smoothed(t_steps);
    if (t_steps == 0) return smoothed;
    smoothed[t_steps - 1] = fr.filtered[t_steps - 1];

    Eigen::MatrixXd m(2 * n, 2 * n);
    for (int k = t_steps - 2; k >= 0; --k) {
        const auto& a = sys.A_at(k + 1);
        const auto& q = sys.Q_at(k + 1);
        const GaussianBelief& f = fr.filtered[k];

        // One QR triangularizes [[Uf A', Uf], [Uq, 0]]: the top-left block X
        // of the result factors the predicted covariance (X'X = A C A' + Q),
        // X'Y = A C gives the gain G = Y' X^-T, and Z'Z = C - G Cpred G' is
        // exactly the covariance decrement the smoother recursion needs.
        m.setZero();
        right_apply_blocks_t(a, f.sqrt_cov, m.topLeftCorner(n, n));
        m.topRightCorner(n, n) = f.sqrt_cov;
        for (int b = 0; b < sys.n_blocks; ++b) {
            m.block<2, 2>(n + 2 * b, 2 * b) = factor_block(q[b], fr.options.q_floor);
        }
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
        Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
        const Eigen::MatrixXd x = r.topLeftCorner(n, n);
        check_triangular_invertible(x, "predicted covariance");
        const Eigen::MatrixXd gain_t =
            x.triangularView<Eigen::Upper>().solve(r.topRightCorner(n, n));

        Eigen::VectorXd pred_mean = f.mean;
        apply_blocks(a, pred_mean);

        GaussianBelief s;
        s.mean = f.mean + gain_t.transpose() * (smoothed[k + 1].mean - pred_mean);
        Eigen::MatrixXd stacked(2 * n, n);
        stacked.topRows(n) = r.bottomRightCorner(n, n);
        stacked.bottomRows(n).noalias() = smoothed[k + 1].sqrt_cov * gain_t;
        s.sqrt_cov = qr_reduce(stacked);
        smoothed[k] = std::move(s);
    }
    return smoothed;
}

PosteriorField posterior_at(const std::vector<GaussianBelief>& beliefs,
                            const DiscreteSystem& sys, const BasisSet& basis,
                            const Eigen::MatrixXd& points) {
    const int t_steps = sys.n_steps();
    const int n = sys.state_dim;
    if (static_cast<int>(beliefs.size()) != t_steps) {
        throw std::invalid_argument("posterior_at: one belief per step required");
    }
    const Eigen::MatrixXd phi = eval_basis(basis, points);
    const int n_points = static_cast<int>(points.rows());

    PosteriorField field;
    field.times = sys.times;
    field.component_names = sys.component_names;
    field.component_mean.reserve(sys.n_components);
    field.component_var.reserve(sys.n_components);

    // Per-component measurement maps; their sum observes the full field.
    std::vector<Eigen::MatrixXd> h_comp(sys.n_components,
                                        Eigen::MatrixXd::Zero(n_points, n));
    for (int b = 0; b < sys.n_blocks; ++b) {
        h_comp[sys.block_component[b]].col(2 * b) = phi.col(sys.block_mode[b]);
    }
    Eigen::MatrixXd h_total = Eigen::MatrixXd::Zero(n_points, n);
    for (const auto& h : h_comp) h_total += h;

    auto project = [&](const Eigen::MatrixXd& h, Eigen::MatrixXd& mean,
                       Eigen::MatrixXd& var) {
        mean.resize(t_steps, n_points);
        var.resize(t_steps, n_points);
        for (int k = 0; k < t_steps; ++k) {
            mean.row(k) = (h * beliefs[k].mean).transpose();
            const Eigen::MatrixXd uh = beliefs[k].sqrt_cov * h.transpose();
            var.row(k) = uh.colwise().squaredNorm();
        }
    };
    for (int c = 0; c < sys.n_components; ++c) {
        Eigen::MatrixXd mean, var;
        project(h_comp[c], mean, var);
        field.component_mean.push_back(std::move(mean));
        field.component_var.push_back(std::move(var));
    }
    project(h_total, field.total_mean, field.total_var);
    return field;
}

Eigen::MatrixXd amplitude_maps(const PosteriorField& field) {
    const int n_comp = static_cast<int>(field.component_mean.size());
    if (n_comp == 0 || field.component_mean[0].rows() == 0) {
        throw std::invalid_argument("amplitude_maps: empty posterior field");
    }
    const int n_points = static_cast<int>(field.component_mean[0].cols());
    Eigen::MatrixXd amp(n_points, n_comp);
    for (int c = 0; c < n_comp; ++c) {
        amp.col(c) =
            (2.0 * field.component_mean[c].array().square().colwise().mean()).sqrt().transpose();
    }
    return amp;
}

}  // namespace oscfield
