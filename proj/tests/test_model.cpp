#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oscfield/model.hpp"

using namespace oscfield;

namespace {

constexpr double kPi = std::numbers::pi;

ModelSpec small_model() {
    ModelSpec m;
    m.domain = DomainSpec::interval(1.0);
    m.n_modes = 4;
    ComponentSpec c;
    c.name = "osc";
    c.omega = FrequencySchedule::constant(2 * kPi);
    c.gamma = 0.3;
    c.chi = 0.01;
    c.kernel = KernelSpec::matern(1.5, 0.2, 1.0);
    m.components.push_back(c);
    m.meas_noise_var = 0.01;
    return m;
}

std::vector<Eigen::MatrixXd> fixed_locations(int steps, int per_step) {
    std::vector<Eigen::MatrixXd> locs;
    for (int k = 0; k < steps; ++k) {
        Eigen::MatrixXd x(per_step, 1);
        for (int i = 0; i < per_step; ++i) x(i, 0) = -0.9 + 1.8 * (i + 0.3) / per_step;
        locs.push_back(x);
    }
    return locs;
}

}  // namespace

TEST_CASE("frequency schedule lookup is right-continuous with extension") {
    FrequencySchedule c = FrequencySchedule::constant(3.0);
    CHECK(c.is_constant());
    CHECK(c.at(-100.0) == 3.0);
    CHECK(c.at(42.0) == 3.0);

    FrequencySchedule s = FrequencySchedule::steps({0.0, 1.0, 2.5}, {1.0, 2.0, 0.5});
    CHECK(s.at(-0.1) == 1.0);  // extended left
    CHECK(s.at(0.0) == 1.0);   // value switches at the knot itself
    CHECK(s.at(0.999) == 1.0);
    CHECK(s.at(1.0) == 2.0);
    CHECK(s.at(2.4999) == 2.0);
    CHECK(s.at(2.5) == 0.5);
    CHECK(s.at(1e9) == 0.5);

    CHECK_THROWS(FrequencySchedule::constant(-1.0));
    CHECK_THROWS(FrequencySchedule::steps({0.0, 0.0}, {1.0, 2.0}));
    CHECK_THROWS(FrequencySchedule::steps({0.0}, {-2.0}));
    CHECK_THROWS(FrequencySchedule::steps({0.0, 1.0}, {1.0}));
}

TEST_CASE("model validation") {
    ModelSpec m = small_model();
    CHECK(m.state_dim() == 8);
    m.components[0].harmonics = 3;
    CHECK(m.state_dim() == 24);
    m.components[0].harmonics = 1;

    ModelSpec empty = m;
    empty.components.clear();
    CHECK_THROWS(empty.validate());
    ModelSpec bad_noise = m;
    bad_noise.meas_noise_var = 0.0;
    CHECK_THROWS(bad_noise.validate());
    ModelSpec bad_scales = m;
    bad_scales.components[0].harmonic_scales = {1.0, 0.5};
    CHECK_THROWS(bad_scales.validate());
    ModelSpec over = m;
    over.components[0].n_modes = 9;
    CHECK_THROWS(over.validate());
}

TEST_CASE("bias model assembles to Wiener-velocity blocks") {
    ModelSpec m = small_model();
    m.components[0].omega = FrequencySchedule::constant(0.0);
    m.components[0].gamma = 0.0;
    m.components[0].chi = 0.0;
    BasisSet basis = build_basis(m.domain, m.n_modes);
    const double dt = 0.125;
    DiscreteSystem sys =
        assemble_system(m, basis, {0.0, dt, 2 * dt}, fixed_locations(3, 2));
    REQUIRE(sys.n_blocks == 4);
    for (int k = 1; k < 3; ++k) {
        for (int blk = 0; blk < sys.n_blocks; ++blk) {
            const Eigen::Matrix2d& a = sys.A_at(k)[blk];
            CHECK(a(0, 0) == 1.0);
            CHECK(a(0, 1) == dt);
            CHECK(a(1, 0) == 0.0);
            CHECK(a(1, 1) == 1.0);
            const double q =
                spectral_density(m.components[0].kernel, std::sqrt(basis.eigenvalue(blk)), 1);
            const Eigen::Matrix2d& qm = sys.Q_at(k)[blk];
            CHECK(qm(0, 0) == doctest::Approx(q * dt * dt * dt / 3).epsilon(1e-15));
            CHECK(qm(0, 1) == doctest::Approx(q * dt * dt / 2).epsilon(1e-15));
            CHECK(qm(1, 1) == doctest::Approx(q * dt).epsilon(1e-15));
        }
    }
}

TEST_CASE("equal steps and constant frequency share one pool entry") {
    ModelSpec m = small_model();
    BasisSet basis = build_basis(m.domain, m.n_modes);
    // Binary-exact spacing so the step differences are bitwise equal.
    DiscreteSystem sys = assemble_system(m, basis, {0.0, 0.125, 0.25, 0.375, 0.5625},
                                         fixed_locations(5, 2));
    CHECK(sys.transition_pool[0] == -1);
    CHECK(sys.transition_pool[1] == sys.transition_pool[2]);
    CHECK(sys.transition_pool[2] == sys.transition_pool[3]);
    CHECK(sys.transition_pool[4] != sys.transition_pool[3]);  // last dt differs
    CHECK(sys.pool_A.size() == 2);
}

TEST_CASE("piecewise frequency: step blocks equal an independent rebuild") {
    ModelSpec m = small_model();
    m.components[0].omega = FrequencySchedule::steps({0.0, 0.15}, {2 * kPi, 4 * kPi});
    BasisSet basis = build_basis(m.domain, m.n_modes);
    DiscreteSystem sys = assemble_system(m, basis, {0.0, 0.1, 0.2}, fixed_locations(3, 2));
    // Step 1 (into t=0.1) sees 2 pi; step 2 (into t=0.2) sees 4 pi.
    for (int blk = 0; blk < sys.n_blocks; ++blk) {
        const double lambda = basis.eigenvalue(blk);
        const double q = spectral_density(m.components[0].kernel, std::sqrt(lambda), 1);
        for (int k : {1, 2}) {
            const double w = k == 1 ? 2 * kPi : 4 * kPi;
            const ModeCoefficients mc = mode_coefficients(m.components[0].gamma,
                                                          m.components[0].chi, lambda, w);
            DiscreteBlock ref = discretize_block(mc.a, mc.b, q, 0.1);
            CHECK(sys.A_at(k)[blk] == ref.A);  // bitwise: same code path, same inputs
            CHECK(sys.Q_at(k)[blk] == ref.Q);
        }
    }
}

TEST_CASE("coupling identity holds bitwise on assembled systems") {
    ModelSpec m = small_model();
    m.components[0].harmonics = 2;
    BasisSet basis = build_basis(m.domain, m.n_modes);
    DiscreteSystem sys = assemble_system(m, basis, {0.0, 0.1}, fixed_locations(2, 2));
    for (int blk = 0; blk < sys.n_blocks; ++blk) {
        const double a = sys.cont_a[blk];
        const double w = sys.block_harmonic[blk] * m.components[0].omega.at(0.0);
        CHECK(sys.cont_b[blk] == a * a / 2 + w * w);
    }
}

TEST_CASE("measurement matrix targets position slots and sums components") {
    ModelSpec m = small_model();
    ComponentSpec bias = m.components[0];
    bias.name = "bias";
    bias.omega = FrequencySchedule::constant(0.0);
    bias.n_modes = 2;  // per-component mode override
    m.components.push_back(bias);
    BasisSet basis = build_basis(m.domain, m.n_modes);
    DiscreteSystem sys = assemble_system(m, basis, {0.0, 0.1}, fixed_locations(2, 3));
    REQUIRE(sys.state_dim == 2 * (4 + 2));
    Eigen::MatrixXd h = sys.measurement_matrix(0);
    REQUIRE(h.rows() == 3);
    REQUIRE(h.cols() == sys.state_dim);
    // Velocity slots never observed.
    for (int col = 1; col < sys.state_dim; col += 2) CHECK(h.col(col).isZero(0.0));
    // Position slots carry the basis values of the block's own mode.
    const Eigen::MatrixXd phi = eval_basis(basis, fixed_locations(1, 3)[0]);
    for (int blk = 0; blk < sys.n_blocks; ++blk) {
        for (int i = 0; i < 3; ++i) CHECK(h(i, 2 * blk) == phi(i, sys.block_mode[blk]));
    }
    // y prediction = sum over components: x with all position coefficients 1.
    Eigen::VectorXd x = Eigen::VectorXd::Zero(sys.state_dim);
    for (int blk = 0; blk < sys.n_blocks; ++blk) x(2 * blk) = 1.0;
    Eigen::VectorXd y = h * x;
    for (int i = 0; i < 3; ++i) {
        double expect = 0.0;
        for (int n = 0; n < 4; ++n) expect += phi(i, n);  // oscillator, 4 modes
        for (int n = 0; n < 2; ++n) expect += phi(i, n);  // bias, 2 modes
        CHECK(y(i) == doctest::Approx(expect).epsilon(1e-13));
    }
}

TEST_CASE("assembly rejects malformed inputs") {
    ModelSpec m = small_model();
    BasisSet basis = build_basis(m.domain, m.n_modes);
    CHECK_THROWS_AS(
        assemble_system(m, basis, {0.0, 0.0}, fixed_locations(2, 2)), DataError);
    CHECK_THROWS_AS(
        assemble_system(m, basis, {0.0, 0.1}, fixed_locations(3, 2)), DataError);
    std::vector<Eigen::MatrixXd> outside = fixed_locations(2, 2);
    outside[1](0, 0) = 2.0;
    CHECK_THROWS_AS(assemble_system(m, basis, {0.0, 0.1}, outside), DataError);
    BasisSet tiny = build_basis(m.domain, 2);
    CHECK_THROWS(assemble_system(m, tiny, {0.0, 0.1}, fixed_locations(2, 2)));
}

TEST_CASE("refresh_system equals a fresh assembly under new parameters") {
    ModelSpec m = small_model();
    BasisSet basis = build_basis(m.domain, m.n_modes);
    DiscreteSystem sys = assemble_system(m, basis, {0.0, 0.1, 0.25}, fixed_locations(3, 2));
    ModelSpec m2 = m;
    m2.components[0].gamma = 0.9;
    m2.components[0].kernel = KernelSpec::matern(1.5, 0.35, 2.0);
    m2.meas_noise_var = 0.04;
    refresh_system(sys, m2, basis);
    DiscreteSystem fresh = assemble_system(m2, basis, {0.0, 0.1, 0.25}, fixed_locations(3, 2));
    CHECK(sys.meas_noise_var == fresh.meas_noise_var);
    for (size_t p = 0; p < sys.pool_A.size(); ++p) {
        for (int blk = 0; blk < sys.n_blocks; ++blk) {
            CHECK(sys.pool_A[p][blk] == fresh.pool_A[p][blk]);
            CHECK(sys.pool_Q[p][blk] == fresh.pool_Q[p][blk]);
        }
    }
    for (int blk = 0; blk < sys.n_blocks; ++blk) {
        CHECK(sys.cont_a[blk] == fresh.cont_a[blk]);
        CHECK(sys.cont_q[blk] == fresh.cont_q[blk]);
    }
}

TEST_CASE("empty observation steps are allowed") {
    ModelSpec m = small_model();
    BasisSet basis = build_basis(m.domain, m.n_modes);
    std::vector<Eigen::MatrixXd> locs = fixed_locations(3, 2);
    locs[1] = Eigen::MatrixXd(0, 1);
    DiscreteSystem sys = assemble_system(m, basis, {0.0, 0.1, 0.2}, locs);
    CHECK(sys.obs_count(0) == 2);
    CHECK(sys.obs_count(1) == 0);
    CHECK(sys.measurement_matrix(1).rows() == 0);
}

TEST_CASE("assembled transition blocks never expand") {
    ModelSpec m = small_model();
    m.components[0].harmonics = 2;
    BasisSet basis = build_basis(m.domain, m.n_modes);
    DiscreteSystem sys = assemble_system(m, basis, {0.0, 0.05, 0.3}, fixed_locations(3, 2));
    for (size_t p = 0; p < sys.pool_A.size(); ++p) {
        for (int blk = 0; blk < sys.n_blocks; ++blk) {
            const double rho = sys.pool_A[p][blk].eigenvalues().cwiseAbs().maxCoeff();
            CHECK(rho <= 1.0 + 1e-12);
            CHECK(rho < 1.0);  // gamma > 0 here
        }
    }
}

TEST_CASE("model spectral density: positivity, resonance peak, undamped ridge") {
    ComponentSpec c;
    c.omega = FrequencySchedule::constant(2 * kPi);
    c.gamma = 0.4;
    c.chi = 0.02;
    c.kernel = KernelSpec::matern(1.5, 0.3, 1.2);

    for (double nx : {0.0, 0.7, 3.0, 11.0})
        for (double nt : {0.0, 1.0, 2 * kPi, 40.0})
            CHECK(model_spectral_density(c, nx, nt, 1) > 0.0);

    // Peak over nu_t sits at nu_t = omega for any fixed nu_x (the coupling
    // condition puts the temporal resonance exactly there).
    for (double nx : {0.0, 1.0, 4.0}) {
        double best_nt = 0.0, best = -1.0;
        for (double nt = 0.0; nt < 20.0; nt += 0.01) {
            const double s = model_spectral_density(c, nx, nt, 1);
            if (s > best) {
                best = s;
                best_nt = nt;
            }
        }
        CHECK(best_nt == doctest::Approx(2 * kPi).epsilon(0.01));
    }

    // gamma = chi = 0: infinite ridge exactly at nu_t = omega.
    ComponentSpec undamped = c;
    undamped.gamma = 0.0;
    undamped.chi = 0.0;
    CHECK(std::isinf(model_spectral_density(undamped, 1.0, 2 * kPi, 1)));
    CHECK(model_spectral_density(undamped, 1.0, 5.0, 1) > 0.0);
    CHECK(std::isfinite(model_spectral_density(undamped, 1.0, 5.0, 1)));

    // Second harmonic peaks at 2 omega.
    ComponentSpec two = c;
    two.harmonics = 2;
    double best_nt = 0.0, best = -1.0;
    for (double nt = 0.0; nt < 30.0; nt += 0.01) {
        const double s = model_spectral_density(two, 1.0, nt, 1, 0.0, 2);
        if (s > best) {
            best = s;
            best_nt = nt;
        }
    }
    CHECK(best_nt == doctest::Approx(4 * kPi).epsilon(0.01));
    CHECK_THROWS(model_spectral_density(c, 1.0, 1.0, 1, 0.0, 3));
}
