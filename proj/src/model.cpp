#include "oscfield/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace oscfield {

// ---------------------------------------------------------------------------
// FrequencySchedule
// ---------------------------------------------------------------------------

FrequencySchedule FrequencySchedule::constant(double omega) {
    if (omega < 0.0 || !std::isfinite(omega)) {
        throw std::invalid_argument("frequency must be finite and >= 0");
    }
    FrequencySchedule s;
    s.values_ = {omega};
    return s;
}

FrequencySchedule FrequencySchedule::steps(std::vector<double> knots,
                                           std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("frequency schedule needs >= 1 value");
    if (knots.size() != values.size()) {
        throw std::invalid_argument("frequency schedule: one knot per value");
    }
    for (size_t i = 0; i < values.size(); ++i) {
        if (values[i] < 0.0 || !std::isfinite(values[i])) {
            throw std::invalid_argument("frequency values must be finite and >= 0");
        }
        if (i > 0 && !(knots[i] > knots[i - 1])) {
            throw std::invalid_argument("frequency knots must be strictly increasing");
        }
    }
    if (values.size() == 1) return constant(values[0]);
    FrequencySchedule s;
    s.knots_ = std::move(knots);
    s.values_ = std::move(values);
    return s;
}

double FrequencySchedule::at(double t) const {
    if (knots_.empty()) return values_[0];
    auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
    if (it == knots_.begin()) return values_[0];
    return values_[static_cast<size_t>(it - knots_.begin()) - 1];
}

// ---------------------------------------------------------------------------
// Specs
// ---------------------------------------------------------------------------

double ComponentSpec::harmonic_scale(int h) const {
    if (harmonic_scales.empty()) return 1.0;
    return harmonic_scales[static_cast<size_t>(h) - 1];
}

void ComponentSpec::validate() const {
    if (gamma < 0.0 || !std::isfinite(gamma)) {
        throw std::invalid_argument("component '" + name + "': gamma must be >= 0");
    }
    if (chi < 0.0 || !std::isfinite(chi)) {
        throw std::invalid_argument("component '" + name + "': chi must be >= 0");
    }
    if (harmonics < 1) {
        throw std::invalid_argument("component '" + name + "': harmonics must be >= 1");
    }
    if (!harmonic_scales.empty() &&
        harmonic_scales.size() != static_cast<size_t>(harmonics)) {
        throw std::invalid_argument("component '" + name +
                                    "': harmonic_scales must match harmonics");
    }
    for (double s : harmonic_scales) {
        if (!(s > 0.0)) {
            throw std::invalid_argument("component '" + name +
                                        "': harmonic scales must be > 0");
        }
    }
    if (n_modes < 0) {
        throw std::invalid_argument("component '" + name + "': n_modes must be >= 0");
    }
    kernel.validate();
}

void ModelSpec::validate() const {
    if (components.empty()) throw std::invalid_argument("model needs >= 1 component");
    if (n_modes < 1) throw std::invalid_argument("model n_modes must be >= 1");
    if (!(meas_noise_var > 0.0)) {
        throw std::invalid_argument("measurement noise variance must be > 0");
    }
    if (!(diffuse_variance > 0.0)) {
        throw std::invalid_argument("diffuse variance must be > 0");
    }
    for (const ComponentSpec& c : components) {
        c.validate();
        if (c.n_modes > n_modes) {
            throw std::invalid_argument("component '" + c.name +
                                        "': n_modes exceeds the model-wide count");
        }
    }
}

int ModelSpec::modes_of(int c) const {
    const int own = components[static_cast<size_t>(c)].n_modes;
    return own > 0 ? own : n_modes;
}

int ModelSpec::max_modes() const {
    int m = 0;
    for (size_t c = 0; c < components.size(); ++c)
        m = std::max(m, modes_of(static_cast<int>(c)));
    return m;
}

int ModelSpec::state_dim() const {
    int blocks = 0;
    for (size_t c = 0; c < components.size(); ++c)
        blocks += components[c].harmonics * modes_of(static_cast<int>(c));
    return 2 * blocks;
}

int ObservationBatch::n_total() const {
    int n = 0;
    for (const Eigen::VectorXd& v : values) n += static_cast<int>(v.size());
    return n;
}

void ObservationBatch::validate(const DomainSpec& domain) const {
    if (locations.size() != times.size() || values.size() != times.size()) {
        throw DataError("observation batch: per-step counts do not line up");
    }
    for (size_t k = 0; k < times.size(); ++k) {
        if (k > 0 && !(times[k] > times[k - 1])) {
            throw DataError("observation times must be strictly increasing (step " +
                            std::to_string(k) + ")");
        }
        if (locations[k].rows() != values[k].size()) {
            throw DataError("step " + std::to_string(k) +
                            ": location count differs from value count");
        }
        if (locations[k].rows() > 0 && locations[k].cols() != domain.coord_dim()) {
            throw DataError("step " + std::to_string(k) + ": locations have " +
                            std::to_string(locations[k].cols()) + " coordinates, expected " +
                            std::to_string(domain.coord_dim()));
        }
    }
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

namespace {

// One pool entry: every block discretized at (dt, per-component frequency).
void build_pool_entry(const ModelSpec& model, const DiscreteSystem& sys, double dt,
                      const std::vector<double>& omegas, std::vector<Eigen::Matrix2d>& a_out,
                      std::vector<Eigen::Matrix2d>& q_out) {
    a_out.resize(static_cast<size_t>(sys.n_blocks));
    q_out.resize(static_cast<size_t>(sys.n_blocks));
    for (int blk = 0; blk < sys.n_blocks; ++blk) {
        const int c = sys.block_component[static_cast<size_t>(blk)];
        const ComponentSpec& comp = model.components[static_cast<size_t>(c)];
        const int h = sys.block_harmonic[static_cast<size_t>(blk)];
        const double lambda = sys.cont_lambda_cache[static_cast<size_t>(blk)];
        const ModeCoefficients mc =
            mode_coefficients(comp.gamma, comp.chi, lambda, h * omegas[static_cast<size_t>(c)]);
        const double scale = comp.harmonic_scale(h);
        const double q = sys.cont_qbase_cache[static_cast<size_t>(blk)] * scale * scale;
        DiscreteBlock d = discretize_block(mc.a, mc.b, q, dt);
        a_out[static_cast<size_t>(blk)] = d.A;
        q_out[static_cast<size_t>(blk)] = d.Q;
    }
}

}  // namespace

Eigen::MatrixXd DiscreteSystem::measurement_matrix(int k) const {
    const Eigen::MatrixXd& p = phi[static_cast<size_t>(k)];
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(p.rows(), state_dim);
    for (int blk = 0; blk < n_blocks; ++blk) {
        h.col(2 * blk) = p.col(block_mode[static_cast<size_t>(blk)]);
    }
    return h;
}

DiscreteSystem assemble_system(const ModelSpec& model, const BasisSet& basis,
                               const std::vector<double>& times,
                               const std::vector<Eigen::MatrixXd>& locations) {
    model.validate();
    if (basis.domain().kind != model.domain.kind) {
        throw std::invalid_argument("assemble_system: basis domain does not match the model");
    }
    if (basis.size() < model.max_modes()) {
        throw std::invalid_argument("assemble_system: basis smaller than the model's mode count");
    }
    if (times.empty()) throw DataError("assemble_system: need at least one step");
    if (locations.size() != times.size()) {
        throw DataError("assemble_system: one location set per time step");
    }
    for (size_t k = 1; k < times.size(); ++k) {
        if (!(times[k] > times[k - 1])) {
            throw DataError("assemble_system: times must be strictly increasing (step " +
                            std::to_string(k) + ")");
        }
    }

    DiscreteSystem sys;
    sys.n_components = static_cast<int>(model.components.size());
    sys.meas_noise_var = model.meas_noise_var;
    sys.diffuse_variance = model.diffuse_variance;
    sys.times = times;

    // Static block metadata in state order.
    for (int c = 0; c < sys.n_components; ++c) {
        const ComponentSpec& comp = model.components[static_cast<size_t>(c)];
        sys.component_names.push_back(comp.name);
        for (int h = 1; h <= comp.harmonics; ++h) {
            for (int n = 0; n < model.modes_of(c); ++n) {
                sys.block_component.push_back(c);
                sys.block_harmonic.push_back(h);
                sys.block_mode.push_back(n);
            }
        }
    }
    sys.n_blocks = static_cast<int>(sys.block_component.size());
    sys.state_dim = 2 * sys.n_blocks;

    // Basis evaluations; empty steps keep a 0 x max_modes placeholder.
    const int max_modes = model.max_modes();
    sys.phi.reserve(times.size());
    for (size_t k = 0; k < times.size(); ++k) {
        if (locations[k].rows() == 0) {
            sys.phi.emplace_back(0, max_modes);
            continue;
        }
        Eigen::MatrixXd full = eval_basis(basis, locations[k]);
        sys.phi.push_back(full.leftCols(max_modes));
    }

    refresh_system(sys, model, basis);
    return sys;
}

void refresh_system(DiscreteSystem& sys, const ModelSpec& model, const BasisSet& basis) {
    model.validate();
    if (model.state_dim() != sys.state_dim) {
        throw std::invalid_argument("refresh_system: parameter set changes the state layout");
    }
    sys.meas_noise_var = model.meas_noise_var;
    sys.diffuse_variance = model.diffuse_variance;

    // Continuous-time per-block coefficients: eigenvalue, projected noise
    // intensity, and (a, b) at the first step's frequencies.
    sys.cont_lambda_cache.resize(static_cast<size_t>(sys.n_blocks));
    sys.cont_qbase_cache.resize(static_cast<size_t>(sys.n_blocks));
    sys.cont_a.resize(static_cast<size_t>(sys.n_blocks));
    sys.cont_b.resize(static_cast<size_t>(sys.n_blocks));
    sys.cont_q.resize(static_cast<size_t>(sys.n_blocks));
    const int dim = model.domain.kernel_dim();
    for (int blk = 0; blk < sys.n_blocks; ++blk) {
        const int c = sys.block_component[static_cast<size_t>(blk)];
        const ComponentSpec& comp = model.components[static_cast<size_t>(c)];
        const int h = sys.block_harmonic[static_cast<size_t>(blk)];
        const double lambda = basis.eigenvalue(sys.block_mode[static_cast<size_t>(blk)]);
        const double qbase = spectral_density(comp.kernel, std::sqrt(lambda), dim);
        sys.cont_lambda_cache[static_cast<size_t>(blk)] = lambda;
        sys.cont_qbase_cache[static_cast<size_t>(blk)] = qbase;
        const double w0 = comp.omega.at(sys.times.front());
        const ModeCoefficients mc = mode_coefficients(comp.gamma, comp.chi, lambda, h * w0);
        const double scale = comp.harmonic_scale(h);
        sys.cont_a[static_cast<size_t>(blk)] = mc.a;
        sys.cont_b[static_cast<size_t>(blk)] = mc.b;
        sys.cont_q[static_cast<size_t>(blk)] = qbase * scale * scale;
    }

    // Transition pools keyed on (dt, per-component frequency vector).
    sys.pool_A.clear();
    sys.pool_Q.clear();
    sys.pool_keys.clear();
    sys.transition_pool.assign(sys.times.size(), -1);
    std::map<std::pair<double, std::vector<double>>, int> index;
    for (size_t k = 1; k < sys.times.size(); ++k) {
        std::pair<double, std::vector<double>> key;
        key.first = sys.times[k] - sys.times[k - 1];
        key.second.reserve(static_cast<size_t>(sys.n_components));
        for (int c = 0; c < sys.n_components; ++c) {
            key.second.push_back(model.components[static_cast<size_t>(c)].omega.at(sys.times[k]));
        }
        auto [it, inserted] = index.try_emplace(key, static_cast<int>(sys.pool_A.size()));
        if (inserted) {
            sys.pool_A.emplace_back();
            sys.pool_Q.emplace_back();
            build_pool_entry(model, sys, key.first, key.second, sys.pool_A.back(),
                             sys.pool_Q.back());
            sys.pool_keys.push_back(key);
        }
        sys.transition_pool[k] = it->second;
    }
}

double model_spectral_density(const ComponentSpec& comp, double nu_x, double nu_t, int dim,
                              double at_time, int harmonic) {
    comp.validate();
    if (harmonic < 1 || harmonic > comp.harmonics) {
        throw std::invalid_argument("model_spectral_density: harmonic out of range");
    }
    const double w = harmonic * comp.omega.at(at_time);
    const double a = comp.gamma + comp.chi * nu_x * nu_x;
    const double scale = comp.harmonic_scale(harmonic);
    const double qn = spectral_density(comp.kernel, std::abs(nu_x), dim) * scale * scale;
    const double nt2 = nu_t * nu_t;
    const double den = std::pow(nt2 - a * a / 2 - w * w, 2) + nt2 * a * a;
    return qn / den;  // +inf on the undamped resonance ridge by IEEE division
}

}  // namespace oscfield
