#include "oscfield/estimate.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "oscfield/errors.hpp"
#include "oscfield/filter.hpp"

namespace oscfield {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

enum Field { kGamma = 0, kChi = 1, kNu = 2, kLength = 3, kMagnitude = 4, kSigmaMeas = 5 };
}  // namespace

// --- ParamVector --------------------------------------------------------------

ParamVector ParamVector::from_model(const ModelSpec& model) {
    model.validate();
    ParamVector p;
    auto add = [&p](const std::string& name, double value, bool nu_like, int comp,
                    int field) {
        ParamEntry e;
        e.name = name;
        e.value = value;
        e.active = !nu_like && value > 0.0;
        p.entries_.push_back(e);
        p.bindings_.push_back({comp, field});
    };
    for (int c = 0; c < static_cast<int>(model.components.size()); ++c) {
        const ComponentSpec& comp = model.components[c];
        const std::string prefix = comp.name + ".";
        add(prefix + "gamma", comp.gamma, false, c, kGamma);
        add(prefix + "chi", comp.chi, false, c, kChi);
        if (comp.kernel.family == KernelFamily::matern) {
            add(prefix + "nu", comp.kernel.nu, true, c, kNu);
        }
        add(prefix + "l", comp.kernel.length_scale, false, c, kLength);
        add(prefix + "s", comp.kernel.magnitude, false, c, kMagnitude);
    }
    add("sigma_meas", std::sqrt(model.meas_noise_var), false, -1, kSigmaMeas);
    return p;
}

int ParamVector::n_active() const {
    int n = 0;
    for (const auto& e : entries_) n += e.active ? 1 : 0;
    return n;
}

int ParamVector::find(const std::string& name) const {
    for (int i = 0; i < size(); ++i) {
        if (entries_[i].name == name) return i;
    }
    throw std::invalid_argument("unknown parameter: " + name);
}

bool ParamVector::has(const std::string& name) const {
    for (const auto& e : entries_) {
        if (e.name == name) return true;
    }
    return false;
}

double ParamVector::value(const std::string& name) const {
    return entries_[find(name)].value;
}

void ParamVector::set_value(const std::string& name, double v) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
        throw std::invalid_argument("parameter values must be finite and nonnegative");
    }
    entries_[find(name)].value = v;
}

void ParamVector::set_active(const std::string& name, bool active) {
    ParamEntry& e = entries_[find(name)];
    if (active && !(e.value > 0.0)) {
        throw std::invalid_argument("cannot activate parameter at value 0: " + e.name);
    }
    e.active = active;
}

Eigen::VectorXd ParamVector::active_log() const {
    Eigen::VectorXd x(n_active());
    int j = 0;
    for (const auto& e : entries_) {
        if (e.active) x[j++] = std::log(e.value);
    }
    return x;
}

void ParamVector::set_active_log(const Eigen::VectorXd& x) {
    if (x.size() != n_active()) {
        throw std::invalid_argument("active-parameter vector size mismatch");
    }
    int j = 0;
    for (auto& e : entries_) {
        if (e.active) e.value = std::exp(x[j++]);
    }
}

void ParamVector::apply_to(ModelSpec& model) const {
    for (int i = 0; i < size(); ++i) {
        const Binding& b = bindings_[i];
        const double v = entries_[i].value;
        if (b.component >= static_cast<int>(model.components.size())) {
            throw std::invalid_argument("parameter vector does not match the model structure");
        }
        switch (b.field) {
            case kGamma: model.components[b.component].gamma = v; break;
            case kChi: model.components[b.component].chi = v; break;
            case kNu: model.components[b.component].kernel.nu = v; break;
            case kLength: model.components[b.component].kernel.length_scale = v; break;
            case kMagnitude: model.components[b.component].kernel.magnitude = v; break;
            case kSigmaMeas: model.meas_noise_var = v * v; break;
        }
    }
}

// --- finite differences ---------------------------------------------------------

Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double h) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd probe = x;
    for (int i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + h;
        const double fp = f(probe);
        probe[i] = x[i] - h;
        const double fm = f(probe);
        probe[i] = x[i];
        if (std::isfinite(fp) && std::isfinite(fm)) {
            g[i] = (fp - fm) / (2.0 * h);
        } else if (std::isfinite(fp) || std::isfinite(fm)) {
            // One-sided fallback at the edge of the feasible region.
            const double f0 = f(x);
            g[i] = std::isfinite(fp) ? (fp - f0) / h : (f0 - fm) / h;
        } else {
            g[i] = 0.0;
        }
    }
    return g;
}

// --- conjugate gradient ----------------------------------------------------------

CgResult minimize_cg(const std::function<double(const Eigen::VectorXd&)>& f,
                     Eigen::VectorXd x0, const CgOptions& opts) {
    CgResult res;
    res.x = std::move(x0);
    auto eval = [&](const Eigen::VectorXd& x) {
        ++res.evaluations;
        return f(x);
    };

    double fx = eval(res.x);
    res.trace.push_back(fx);
    res.objective = fx;
    if (!std::isfinite(fx)) {
        res.failure = "objective not finite at the starting point";
        return res;
    }

    Eigen::VectorXd g = fd_gradient(eval, res.x, opts.fd_step);
    Eigen::VectorXd d = -g;

    double last_gain = kInf;  // f decrease of the previous accepted step
    int stalled = 0;
    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        if (g.size() == 0 || g.cwiseAbs().maxCoeff() < opts.gradient_tol) {
            res.converged = true;  // nothing to move, or a flat point
            break;
        }
        if (res.evaluations >= opts.max_evaluations) break;
        if (iter >= opts.prune_after && fx > opts.prune_above) {
            res.failure = "pruned: lagging behind the best restart";
            break;
        }
        if (d.dot(g) >= 0.0) d = -g;  // restore a descent direction

        // Armijo backtracking. The initial trial step matches the previous
        // iteration's first-order decrease (Nocedal-Wright style warm start),
        // and an expansion phase doubles an immediately-accepted step while
        // that keeps paying off - both save most of the halving churn on
        // long valley traversals.
        const double slope = d.dot(g);
        double t = 1.0;
        if (std::isfinite(last_gain) && slope < 0.0) {
            t = std::min(1e4, std::max(1e-10, 2.02 * last_gain / (-slope)));
        }
        double fnew = kInf;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            fnew = eval(res.x + t * d);
            if (std::isfinite(fnew) && fnew <= fx + 1e-4 * t * slope) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            if ((d + g).norm() > 0.0) {
                d = -g;  // retry along steepest descent next iteration
                last_gain = kInf;
                continue;
            }
            res.converged = true;  // no descent along -g: numerically stationary
            break;
        }
        for (int ex = 0; ex < 20 && res.evaluations < opts.max_evaluations; ++ex) {
            const double f2 = eval(res.x + 2.0 * t * d);
            if (!(std::isfinite(f2) && f2 < fnew &&
                  f2 <= fx + 1e-4 * 2.0 * t * slope)) {
                break;
            }
            t *= 2.0;
            fnew = f2;
        }

        res.x += t * d;
        const double gain = fx - fnew;
        fx = fnew;
        res.trace.push_back(fx);
        res.objective = fx;
        last_gain = gain;
        const double stall_gate =
            std::max(opts.objective_min_gain, opts.objective_rel_tol * (std::abs(fx) + 1.0));
        stalled = gain <= stall_gate ? stalled + 1 : 0;
        if (stalled >= opts.stall_patience) {
            res.converged = true;
            break;
        }

        Eigen::VectorXd gnew = fd_gradient(eval, res.x, opts.fd_step);
        const double denom = g.squaredNorm();
        double beta = denom > 0.0 ? gnew.dot(gnew - g) / denom : 0.0;
        beta = std::max(0.0, beta);  // Polak-Ribiere with automatic restart
        d = -gnew + beta * d;
        g = std::move(gnew);
    }
    res.objective = fx;
    return res;
}

// --- objective --------------------------------------------------------------------

Objective::Objective(const ModelSpec& template_model, const ObservationBatch& data)
    : model_(template_model),
      basis_(build_basis(template_model.domain, template_model.max_modes())),
      sys_(assemble_system(template_model, basis_, data.times, data.locations)),
      data_(data),
      params_(ParamVector::from_model(template_model)) {}

double Objective::operator()(const ParamVector& p) {
    try {
        p.apply_to(model_);
        refresh_system(sys_, model_, basis_);
        FilterOptions opts;
        opts.keep_history = false;
        const FilterResult fr = filter_pass(sys_, data_, stationary_prior(sys_), opts);
        last_error_.clear();
        return -fr.loglik;
    } catch (const NumericalError& err) {
        last_error_ = err.what();
        return kInf;
    } catch (const std::invalid_argument& err) {
        // Parameter combinations the model rejects (e.g. a value that
        // underflowed to zero on an aggressive line-search probe) are simply
        // infeasible points for the optimizer.
        last_error_ = err.what();
        return kInf;
    }
}

double Objective::eval_active_log(const Eigen::VectorXd& x) {
    // exp() must stay in (0, inf): beyond ~+-700 the transform leaves the
    // open positive orthant, so report the point as infeasible directly.
    if (!x.allFinite() || (x.size() > 0 && x.cwiseAbs().maxCoeff() > 600.0)) {
        last_error_ = "log-parameter out of the transform's range";
        return kInf;
    }
    params_.set_active_log(x);
    return (*this)(params_);
}

double objective_value(const ParamVector& p, const ModelSpec& template_model,
                       const ObservationBatch& data) {
    Objective obj(template_model, data);
    return obj(p);
}

// --- fitting ----------------------------------------------------------------------

DataScales compute_scales(const ObservationBatch& data, const DomainSpec& domain) {
    DataScales s;
    s.length = domain.length_scale();
    if (!data.times.empty()) {
        s.t_span = data.times.back() - data.times.front();
    }
    if (s.t_span <= 0.0) s.t_span = 1.0;

    double sum = 0.0, sum_sq = 0.0;
    long count = 0;
    for (const auto& y : data.values) {
        sum += y.sum();
        sum_sq += y.squaredNorm();
        count += y.size();
    }
    if (count > 1) {
        const double mean = sum / count;
        const double var = std::max(sum_sq / count - mean * mean, 0.0);
        s.std_y = std::sqrt(var);
    }
    if (!(s.std_y > 0.0)) s.std_y = 1.0;
    return s;
}

namespace {

double restart_center(const std::string& name, const DataScales& s) {
    const auto suffix = name.substr(name.rfind('.') + 1);
    if (name == "sigma_meas") return 0.1 * s.std_y;
    if (suffix == "gamma") return 1.0 / s.t_span;
    if (suffix == "chi") return s.length * s.length / s.t_span;
    if (suffix == "l") return s.length;
    if (suffix == "s") return s.std_y;
    if (suffix == "nu") return 1.5;
    return 1.0;
}

}  // namespace

ModelSpec data_derived_template(const ModelSpec& shape, const ObservationBatch& data) {
    const DataScales scales = compute_scales(data, shape.domain);
    ParamVector pv = ParamVector::from_model(shape);
    std::vector<std::string> active_names;
    for (const auto& e : pv.entries()) {
        if (e.active) active_names.push_back(e.name);
    }
    for (const auto& name : active_names) pv.set_value(name, restart_center(name, scales));
    ModelSpec out = shape;
    pv.apply_to(out);
    return out;
}

FitResult fit(const ObservationBatch& data, const ModelSpec& template_model,
              const FitOptions& opts) {
    if (opts.restarts < 1) throw std::invalid_argument("fit: need at least one restart");
    Objective obj(template_model, data);
    for (const auto& name : opts.freeze) obj.freeze(name);
    // With nothing free the "fit" is a single evaluation of the template.
    const int restarts = obj.n_active() == 0 ? 1 : opts.restarts;
    const ParamVector base = obj.params();
    const DataScales scales = compute_scales(data, template_model.domain);

    std::vector<double> centers;
    for (const auto& e : base.entries()) {
        if (e.active) centers.push_back(restart_center(e.name, scales));
    }
    // nu draws are clamped to a moderate band: extreme smoothness values are
    // numerically meaningless and stall the line search.
    std::vector<bool> is_nu;
    for (const auto& e : base.entries()) {
        if (e.active) is_nu.push_back(e.name.size() > 3 &&
                                      e.name.compare(e.name.size() - 3, 3, ".nu") == 0);
    }

    std::mt19937_64 rng(opts.seed);
    auto unit = [&rng]() { return (rng() >> 11) * 0x1.0p-53; };

    FitResult out;
    out.params = base;
    auto f = [&obj](const Eigen::VectorXd& x) { return obj.eval_active_log(x); };

    double best = kInf;
    for (int r = 0; r < restarts; ++r) {
        Eigen::VectorXd x0(base.n_active());
        if (r == 0 && opts.include_template_start) {
            x0 = base.active_log();
        } else {
            for (int i = 0; i < x0.size(); ++i) {
                if (is_nu[i]) {
                    x0[i] = std::log(0.5) + unit() * (std::log(4.0) - std::log(0.5));
                } else {
                    x0[i] = std::log(centers[i]) + std::log(10.0) * (4.0 * unit() - 2.0);
                }
            }
        }
        CgOptions copt = opts.optimizer;
        if (opts.prune_lagging_restarts && std::isfinite(best)) {
            copt.prune_above = best + std::max(100.0, 0.05 * std::abs(best));
        }
        RestartRecord rec;
        rec.initial_log = x0;
        rec.result = minimize_cg(f, x0, copt);
        if (rec.result.objective < best) {
            best = rec.result.objective;
            out.best_restart = r;
        }
        out.restarts.push_back(std::move(rec));
    }

    if (std::isfinite(best)) {
        out.success = true;
        out.loglik = -best;
        ParamVector p = base;
        p.set_active_log(out.restarts[out.best_restart].result.x);
        out.params = p;
    }
    return out;
}

// --- gradient check ------------------------------------------------------------

GradientCheckReport gradient_check(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h) {
    GradientCheckReport rep;
    rep.grad_h = fd_gradient(f, x, h);
    rep.grad_half = fd_gradient(f, x, 0.5 * h);
    rep.discrepancy = (rep.grad_h - rep.grad_half).cwiseAbs();
    for (int i = 0; i < x.size(); ++i) {
        const double rel = rep.discrepancy[i] / (std::abs(rep.grad_half[i]) + 1e-12);
        rep.max_relative_discrepancy = std::max(rep.max_relative_discrepancy, rel);
    }
    return rep;
}

GradientCheckReport gradient_check(const ParamVector& p, const ModelSpec& template_model,
                                   const ObservationBatch& data, double h) {
    Objective obj(template_model, data);
    ParamVector local = p;
    auto f = [&](const Eigen::VectorXd& x) {
        local.set_active_log(x);
        return obj(local);
    };
    return gradient_check(f, p.active_log(), h);
}

}  // namespace oscfield
