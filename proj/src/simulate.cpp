#include "oscfield/simulate.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "oscfield/blocks.hpp"
#include "oscfield/errors.hpp"

namespace oscfield {

namespace {

// --- deterministic stream splitting -----------------------------------------
// Substream seeds are derived by folding identifiers into a 64-bit state with
// a splitmix64 finalizer. Everything here is integer arithmetic with pinned
// widths, so the draw sequences are identical across platforms.

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t fold(std::uint64_t h, std::uint64_t v) {
    return splitmix64(h ^ (v + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2)));
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::uint64_t block_stream_seed(std::uint64_t seed, const std::string& component,
                                int harmonic, int mode) {
    std::uint64_t h = splitmix64(seed);
    h = fold(h, fnv1a(component));
    h = fold(h, static_cast<std::uint64_t>(harmonic));
    h = fold(h, static_cast<std::uint64_t>(mode));
    return h;
}

// Standard-normal stream: Box-Muller over mt19937_64 with the spare value
// cached. Avoids std::normal_distribution, whose draw sequence is
// implementation-defined.
class GaussianStream {
  public:
    explicit GaussianStream(std::uint64_t seed) : rng_(seed) {}

    double next() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = ((rng_() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
        const double u2 = (rng_() >> 11) * 0x1.0p-53;        // [0, 1)
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * M_PI * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    Eigen::Vector2d next2() {
        const double a = next();
        const double b = next();
        return {a, b};
    }

  private:
    std::mt19937_64 rng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Square-root factor U (U'U = Q) of a PSD 2x2 block via eigendecomposition;
// w = U' z then has covariance Q.
Eigen::Matrix2d noise_factor(const Eigen::Matrix2d& q) {
    Eigen::Matrix2d sym = 0.5 * (q + q.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(sym);
    Eigen::Vector2d ev = es.eigenvalues().cwiseMax(0.0);
    return ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

DiscreteSystem assemble_plan_system(const SimulationPlan& plan, const BasisSet& basis) {
    return assemble_system(plan.model, basis, plan.times, plan.locations);
}

Trajectory sample_trajectory_core(const SimulationPlan& plan, const DiscreteSystem& sys) {
    const int t_steps = sys.n_steps();
    const int n = sys.state_dim;

    std::vector<GaussianStream> streams;
    streams.reserve(sys.n_blocks);
    for (int b = 0; b < sys.n_blocks; ++b) {
        streams.emplace_back(block_stream_seed(
            plan.seed, sys.component_names[sys.block_component[b]],
            sys.block_harmonic[b], sys.block_mode[b]));
    }

    Eigen::VectorXd x(n);
    if (plan.initial_state.size() > 0) {
        x = plan.initial_state;
    } else {
        for (int b = 0; b < sys.n_blocks; ++b) {
            Eigen::Matrix2d p;
            double sd0, sd1;
            if (stationary_block_cov(sys.cont_a[b], sys.cont_b[b], sys.cont_q[b], p)) {
                sd0 = std::sqrt(p(0, 0));
                sd1 = std::sqrt(p(1, 1));
            } else {
                sd0 = sd1 = std::sqrt(sys.diffuse_variance);
            }
            x[2 * b] = sd0 * streams[b].next();
            x[2 * b + 1] = sd1 * streams[b].next();
        }
    }

    Trajectory traj;
    traj.times = sys.times;
    traj.states.resize(t_steps, n);
    traj.states.row(0) = x;

    std::vector<std::vector<Eigen::Matrix2d>> pool_factor(sys.pool_Q.size());
    for (int k = 1; k < t_steps; ++k) {
        const auto& a = sys.A_at(k);
        const int pool = sys.transition_pool[k];
        auto& uq = pool_factor[pool];
        if (uq.empty() && plan.process_noise_scale > 0.0) {
            const auto& q = sys.pool_Q[pool];
            uq.reserve(q.size());
            for (const auto& qb : q) uq.push_back(noise_factor(qb));
        }
        for (int b = 0; b < sys.n_blocks; ++b) {
            Eigen::Vector2d xb = a[b] * x.segment<2>(2 * b);
            if (plan.process_noise_scale > 0.0) {
                xb += plan.process_noise_scale *
                      (uq[b].transpose() * streams[b].next2());
            }
            x.segment<2>(2 * b) = xb;
        }
        traj.states.row(k) = x;
    }
    return traj;
}

ObservationBatch sample_observations_core(const Trajectory& trajectory,
                                          const SimulationPlan& plan,
                                          const DiscreteSystem& sys) {
    if (trajectory.states.rows() != sys.n_steps() ||
        trajectory.states.cols() != sys.state_dim) {
        throw std::invalid_argument(
            "sample_observations: trajectory is not aligned with the plan");
    }
    GaussianStream noise(fold(splitmix64(plan.seed), fnv1a("__observations__")));
    const double sd = std::sqrt(sys.meas_noise_var) * plan.measurement_noise_scale;

    ObservationBatch batch;
    batch.times = plan.times;
    batch.locations = plan.locations;
    batch.values.reserve(sys.n_steps());
    for (int k = 0; k < sys.n_steps(); ++k) {
        const Eigen::MatrixXd h = sys.measurement_matrix(k);
        Eigen::VectorXd y = h * trajectory.states.row(k).transpose();
        for (int i = 0; i < y.size(); ++i) y[i] += sd * noise.next();
        batch.values.push_back(std::move(y));
    }
    return batch;
}

}  // namespace

void SimulationPlan::validate() const {
    model.validate();
    if (times.empty()) throw std::invalid_argument("simulation plan needs at least one time");
    for (std::size_t k = 1; k < times.size(); ++k) {
        if (!(times[k] > times[k - 1])) {
            throw std::invalid_argument("simulation times must be strictly increasing");
        }
    }
    if (locations.size() != times.size()) {
        throw std::invalid_argument("one location set per time step required");
    }
    if (initial_state.size() != 0 &&
        initial_state.size() != static_cast<Eigen::Index>(model.state_dim())) {
        throw std::invalid_argument("initial state size does not match the model state dimension");
    }
    if (!(process_noise_scale >= 0.0) || !std::isfinite(process_noise_scale) ||
        !(measurement_noise_scale >= 0.0) || !std::isfinite(measurement_noise_scale)) {
        throw std::invalid_argument("noise scales must be finite and nonnegative");
    }
}

SimulationPlan scattered_plan(const ModelSpec& model, double t0, double t1, int n_steps,
                              int n_per_step, unsigned long long seed) {
    model.validate();
    if (!(t1 > t0) || n_steps < 2 || n_per_step < 0) {
        throw std::invalid_argument("scattered_plan: need t1 > t0 and at least two steps");
    }
    SimulationPlan plan;
    plan.model = model;
    plan.seed = seed;
    std::mt19937_64 rng(fold(splitmix64(seed), fnv1a("__locations__")));
    auto unit = [&]() { return (rng() >> 11) * 0x1.0p-53; };
    GaussianStream gauss(fold(splitmix64(seed), fnv1a("__location_gauss__")));

    const int dim = model.domain.coord_dim();
    for (int k = 0; k < n_steps; ++k) {
        plan.times.push_back(t0 + (t1 - t0) * k / (n_steps - 1.0));
        Eigen::MatrixXd pts(n_per_step, dim);
        for (int i = 0; i < n_per_step; ++i) {
            // Rejection-sample uniformly over the domain from its bounding
            // box (the sphere draws a normalized Gaussian triple instead).
            while (true) {
                Eigen::VectorXd p(dim);
                switch (model.domain.kind) {
                    case DomainKind::interval:
                        p[0] = (2.0 * unit() - 1.0) * model.domain.half_length;
                        break;
                    case DomainKind::rectangle:
                        p[0] = (2.0 * unit() - 1.0) * model.domain.half_length_x;
                        p[1] = (2.0 * unit() - 1.0) * model.domain.half_length_y;
                        break;
                    case DomainKind::disk:
                        p[0] = (2.0 * unit() - 1.0) * model.domain.radius;
                        p[1] = (2.0 * unit() - 1.0) * model.domain.radius;
                        break;
                    case DomainKind::sphere: {
                        Eigen::Vector3d v(gauss.next(), gauss.next(), gauss.next());
                        p = model.domain.radius * v.normalized();
                        break;
                    }
                }
                if (model.domain.contains(p.data())) {
                    pts.row(i) = p.transpose();
                    break;
                }
            }
        }
        plan.locations.push_back(pts);
    }
    plan.validate();
    return plan;
}

Trajectory sample_trajectory(const SimulationPlan& plan) {
    plan.validate();
    const BasisSet basis = build_basis(plan.model.domain, plan.model.max_modes());
    const DiscreteSystem sys = assemble_plan_system(plan, basis);
    return sample_trajectory_core(plan, sys);
}

ObservationBatch sample_observations(const Trajectory& trajectory,
                                     const SimulationPlan& plan) {
    plan.validate();
    const BasisSet basis = build_basis(plan.model.domain, plan.model.max_modes());
    const DiscreteSystem sys = assemble_plan_system(plan, basis);
    return sample_observations_core(trajectory, plan, sys);
}

SimulationResult simulate(const SimulationPlan& plan) {
    plan.validate();
    const BasisSet basis = build_basis(plan.model.domain, plan.model.max_modes());
    const DiscreteSystem sys = assemble_plan_system(plan, basis);
    SimulationResult result{sample_trajectory_core(plan, sys), {}};
    result.observations = sample_observations_core(result.trajectory, plan, sys);
    return result;
}

Eigen::MatrixXd trajectory_field(const Trajectory& trajectory, const DiscreteSystem& sys,
                                 const BasisSet& basis, const Eigen::MatrixXd& points,
                                 int component) {
    if (trajectory.states.rows() != sys.n_steps() ||
        trajectory.states.cols() != sys.state_dim) {
        throw std::invalid_argument("trajectory_field: trajectory/system mismatch");
    }
    if (component >= sys.n_components) {
        throw std::invalid_argument("trajectory_field: component index out of range");
    }
    const Eigen::MatrixXd phi = eval_basis(basis, points);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(points.rows(), sys.state_dim);
    for (int b = 0; b < sys.n_blocks; ++b) {
        if (component >= 0 && sys.block_component[b] != component) continue;
        h.col(2 * b) += phi.col(sys.block_mode[b]);
    }
    return trajectory.states * h.transpose();
}

MomentCheckResult transition_moment_check(double a, double b, double q, double dt,
                                          int count, unsigned long long seed,
                                          double noise_scale) {
    if (count < 1000) {
        throw std::invalid_argument("transition_moment_check: need at least 1000 samples");
    }
    const DiscreteBlock blk = discretize_block(a, b, q, dt);
    const Eigen::Vector2d x0(1.0, 1.0);

    MomentCheckResult res;
    res.expected_mean = blk.A * x0;
    res.expected_cov = noise_scale * noise_scale * blk.Q;
    res.rel_tol = 3.0 / std::sqrt(static_cast<double>(count));

    const Eigen::Matrix2d factor = noise_factor(blk.Q);
    GaussianStream stream(fold(splitmix64(seed), fnv1a("__moment_check__")));

    Eigen::MatrixXd samples(count, 2);
    for (int i = 0; i < count; ++i) {
        Eigen::Vector2d x = res.expected_mean;
        if (noise_scale > 0.0) {
            x += noise_scale * (factor.transpose() * stream.next2());
        }
        samples.row(i) = x.transpose();
    }
    // Shifted two-pass covariance: centering about the first sample keeps the
    // estimate shift-invariant, so a deterministic block reports a spread of
    // exactly zero rather than mean-rounding dust.
    Eigen::MatrixXd shifted = samples.rowwise() - samples.row(0);
    const Eigen::RowVector2d shifted_mean = shifted.colwise().mean();
    res.empirical_mean = (samples.row(0) + shifted_mean).transpose();
    Eigen::MatrixXd centered = shifted.rowwise() - shifted_mean;
    res.empirical_cov = (centered.transpose() * centered) / (count - 1.0);

    bool ok = true;
    for (int i = 0; i < 2; ++i) {
        const double tol = res.rel_tol * std::sqrt(res.expected_cov(i, i)) +
                           1e-9 * (1.0 + std::abs(res.expected_mean[i]));
        if (std::abs(res.empirical_mean[i] - res.expected_mean[i]) > tol) ok = false;
    }
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            const double scale = std::sqrt(res.expected_cov(i, i) * res.expected_cov(j, j) +
                                           res.expected_cov(i, j) * res.expected_cov(i, j));
            if (std::abs(res.empirical_cov(i, j) - res.expected_cov(i, j)) >
                res.rel_tol * scale) {
                ok = false;
            }
        }
    }
    res.pass = ok;
    return res;
}

TransitionMomentReport transition_moment_check(const ModelSpec& model, double dt,
                                               int count, unsigned long long seed) {
    model.validate();
    const BasisSet basis = build_basis(model.domain, model.max_modes());
    const std::vector<double> times{0.0, dt};
    const std::vector<Eigen::MatrixXd> locs(2, Eigen::MatrixXd(0, model.domain.coord_dim()));
    const DiscreteSystem sys = assemble_system(model, basis, times, locs);

    TransitionMomentReport report;
    report.count = count;
    report.rel_tol = 3.0 / std::sqrt(static_cast<double>(count));
    report.pass = true;
    for (int b = 0; b < sys.n_blocks; ++b) {
        MomentCheckResult r = transition_moment_check(
            sys.cont_a[b], sys.cont_b[b], sys.cont_q[b], dt, count,
            fold(seed, static_cast<std::uint64_t>(b)));
        report.pass = report.pass && r.pass;
        for (int i = 0; i < 2; ++i) {
            const double tol = r.rel_tol * std::sqrt(r.expected_cov(i, i)) +
                               1e-9 * (1.0 + std::abs(r.expected_mean[i]));
            report.worst_mean_ratio = std::max(
                report.worst_mean_ratio,
                std::abs(r.empirical_mean[i] - r.expected_mean[i]) / tol);
            for (int j = 0; j < 2; ++j) {
                const double scale =
                    std::sqrt(r.expected_cov(i, i) * r.expected_cov(j, j) +
                              r.expected_cov(i, j) * r.expected_cov(i, j));
                if (scale > 0.0) {
                    report.worst_cov_ratio = std::max(
                        report.worst_cov_ratio,
                        std::abs(r.empirical_cov(i, j) - r.expected_cov(i, j)) /
                            (r.rel_tol * scale));
                }
            }
        }
    }
    return report;
}

}  // namespace oscfield
