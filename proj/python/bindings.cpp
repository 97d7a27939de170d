// Python bindings: a thin layer over the C++ library exposing model
// construction, simulation, filtering/smoothing, fitting, spectra, and the
// key-value config format. Eigen types cross the boundary as numpy arrays.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "oscfield/domain.hpp"
#include "oscfield/errors.hpp"
#include "oscfield/estimate.hpp"
#include "oscfield/filter.hpp"
#include "oscfield/io.hpp"
#include "oscfield/kernels.hpp"
#include "oscfield/model.hpp"
#include "oscfield/simulate.hpp"

namespace py = pybind11;
using namespace oscfield;

namespace {

// Assemble + filter + smooth in one call; shared by smooth() and predict().
struct PosteriorBundle {
    PosteriorField field;
    double loglik = 0.0;
};

PosteriorBundle run_smoother(const ModelSpec& model, const ObservationBatch& data,
                             const Eigen::MatrixXd& points, int extra_steps,
                             double horizon) {
    model.validate();
    data.validate(model.domain);
    ObservationBatch batch = data;
    if (extra_steps > 0) {
        const double t_end = batch.times.back();
        const double dt = (horizon - t_end) / extra_steps;
        if (dt <= 0.0) {
            throw ConfigError("predict horizon must lie beyond the last data time");
        }
        const int coord_dim = model.domain.coord_dim();
        for (int k = 1; k <= extra_steps; ++k) {
            batch.times.push_back(t_end + dt * k);
            batch.locations.emplace_back(0, coord_dim);
            batch.values.emplace_back(0);
        }
    }
    const BasisSet basis = build_basis(model.domain, model.max_modes());
    const DiscreteSystem sys =
        assemble_system(model, basis, batch.times, batch.locations);
    const FilterResult fr = filter_pass(sys, batch, stationary_prior(sys));
    PosteriorBundle out;
    out.field = posterior_at(smooth_pass(sys, fr), sys, basis, points);
    out.loglik = fr.loglik;
    return out;
}

FitOptions make_fit_options(int restarts, unsigned long long seed,
                            bool include_template_start, bool prune,
                            const std::vector<std::string>& freeze,
                            int max_iterations, double fd_step, double gradient_tol,
                            double objective_rel_tol, double objective_min_gain,
                            int stall_patience, int max_evaluations) {
    FitOptions opts;
    opts.restarts = restarts;
    opts.seed = seed;
    opts.include_template_start = include_template_start;
    opts.prune_lagging_restarts = prune;
    opts.freeze = freeze;
    opts.optimizer.max_iterations = max_iterations;
    opts.optimizer.fd_step = fd_step;
    opts.optimizer.gradient_tol = gradient_tol;
    opts.optimizer.objective_rel_tol = objective_rel_tol;
    opts.optimizer.objective_min_gain = objective_min_gain;
    opts.optimizer.stall_patience = stall_patience;
    opts.optimizer.max_evaluations = max_evaluations;
    return opts;
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
    mod.doc() = "Spatio-temporal resonator fields: spectral state-space models "
                "with exact discretization, square-root smoothing, and "
                "marginal-likelihood fitting.";

    py::register_exception<ConfigError>(mod, "ConfigurationError", PyExc_ValueError);
    py::register_exception<DataError>(mod, "DataFormatError", PyExc_ValueError);
    py::register_exception<NumericalError>(mod, "NumericsError", PyExc_RuntimeError);

    // --- geometry ---------------------------------------------------------
    py::class_<DomainSpec>(mod, "Domain")
        .def_static("interval", &DomainSpec::interval, py::arg("half_length"))
        .def_static("rectangle", &DomainSpec::rectangle, py::arg("half_length_x"),
                    py::arg("half_length_y"))
        .def_static("disk", &DomainSpec::disk, py::arg("radius"))
        .def_static("sphere", &DomainSpec::sphere, py::arg("radius"))
        .def_property_readonly("coord_dim", &DomainSpec::coord_dim)
        .def_property_readonly("measure", &DomainSpec::measure)
        .def("contains",
             [](const DomainSpec& d, const Eigen::MatrixXd& pts) {
                 if (pts.cols() != d.coord_dim())
                     throw ConfigError("points have the wrong coordinate dimension");
                 std::vector<bool> inside(pts.rows());
                 for (int i = 0; i < pts.rows(); ++i) {
                     Eigen::VectorXd row = pts.row(i);
                     inside[i] = d.contains(row.data());
                 }
                 return inside;
             },
             py::arg("points"), "Row-wise domain membership.");

    py::class_<BasisSet>(mod, "Basis")
        .def_property_readonly("size", &BasisSet::size)
        .def("eigenvalue", &BasisSet::eigenvalue, py::arg("n"))
        .def_property_readonly("eigenvalues",
                               [](const BasisSet& b) { return b.eigenvalues(); })
        .def("label", &BasisSet::mode_label, py::arg("n"))
        .def("evaluate",
             [](const BasisSet& b, const Eigen::MatrixXd& pts) {
                 return eval_basis(b, pts);
             },
             py::arg("points"), "points x modes matrix of basis values.");

    mod.def("build_basis", &build_basis, py::arg("domain"), py::arg("n_modes"),
            py::arg("include_sphere_constant_mode") = false,
            "The n_modes lowest Laplacian eigenfunctions of the domain.");
    mod.def("grid_points", &grid_points, py::arg("domain"), py::arg("resolution"),
            "Evaluation grid covering the domain (points x coord_dim).");

    // --- model definition ---------------------------------------------------
    py::class_<KernelSpec>(mod, "Kernel")
        .def_static("matern", &KernelSpec::matern, py::arg("nu"),
                    py::arg("length_scale"), py::arg("magnitude"))
        .def_static("squared_exponential", &KernelSpec::squared_exponential,
                    py::arg("length_scale"), py::arg("magnitude"));

    py::class_<FrequencySchedule>(mod, "Schedule")
        .def_static("constant", &FrequencySchedule::constant, py::arg("omega"))
        .def_static("steps", &FrequencySchedule::steps, py::arg("knots"),
                    py::arg("values"))
        .def("at", &FrequencySchedule::at, py::arg("t"))
        .def_property_readonly("is_constant", &FrequencySchedule::is_constant);

    py::class_<ComponentSpec>(mod, "Component")
        .def(py::init([](const std::string& name, const FrequencySchedule& omega,
                         double gamma, double chi, const KernelSpec& kernel,
                         int harmonics, const std::vector<double>& harmonic_scales,
                         int n_modes) {
                 ComponentSpec c;
                 c.name = name;
                 c.omega = omega;
                 c.gamma = gamma;
                 c.chi = chi;
                 c.kernel = kernel;
                 c.harmonics = harmonics;
                 c.harmonic_scales = harmonic_scales;
                 c.n_modes = n_modes;
                 return c;
             }),
             py::arg("name"), py::arg("omega"), py::arg("gamma"), py::arg("chi"),
             py::arg("kernel"), py::arg("harmonics") = 1,
             py::arg("harmonic_scales") = std::vector<double>{},
             py::arg("n_modes") = 0)
        .def_readwrite("name", &ComponentSpec::name)
        .def_readwrite("omega", &ComponentSpec::omega)
        .def_readwrite("gamma", &ComponentSpec::gamma)
        .def_readwrite("chi", &ComponentSpec::chi)
        .def_readwrite("kernel", &ComponentSpec::kernel)
        .def_readwrite("harmonics", &ComponentSpec::harmonics)
        .def_readwrite("n_modes", &ComponentSpec::n_modes);

    py::class_<ModelSpec>(mod, "Model")
        .def(py::init([](const DomainSpec& domain, int n_modes,
                         const std::vector<ComponentSpec>& components,
                         double sigma_meas, double diffuse_variance) {
                 ModelSpec m;
                 m.domain = domain;
                 m.n_modes = n_modes;
                 m.components = components;
                 m.meas_noise_var = sigma_meas * sigma_meas;
                 m.diffuse_variance = diffuse_variance;
                 m.validate();
                 return m;
             }),
             py::arg("domain"), py::arg("n_modes"), py::arg("components"),
             py::arg("sigma_meas"), py::arg("diffuse_variance") = 1e4)
        .def_readwrite("domain", &ModelSpec::domain)
        .def_readwrite("n_modes", &ModelSpec::n_modes)
        .def_readwrite("components", &ModelSpec::components)
        .def_property(
            "sigma_meas",
            [](const ModelSpec& m) { return std::sqrt(m.meas_noise_var); },
            [](ModelSpec& m, double s) { m.meas_noise_var = s * s; })
        .def_readwrite("diffuse_variance", &ModelSpec::diffuse_variance)
        .def_property_readonly("state_dim", &ModelSpec::state_dim)
        .def("validate", &ModelSpec::validate);

    mod.def("load_model",
            [](const std::string& text) {
                ConfigMap cfg = ConfigMap::parse(text, "<string>");
                return model_from_config(cfg);
            },
            py::arg("text"), "Parse a model from key-value config text.");
    mod.def("dump_model",
            [](const ModelSpec& model) {
                ConfigMap cfg;
                model_to_config(model, cfg);
                return cfg.serialize();
            },
            py::arg("model"), "Serialize a model to key-value config text.");

    // --- observations -------------------------------------------------------
    py::class_<ObservationBatch>(mod, "Observations")
        .def(py::init([](const std::vector<double>& times,
                         const std::vector<Eigen::MatrixXd>& locations,
                         const std::vector<Eigen::VectorXd>& values) {
                 ObservationBatch b;
                 b.times = times;
                 b.locations = locations;
                 b.values = values;
                 return b;
             }),
             py::arg("times"), py::arg("locations"), py::arg("values"))
        .def_readwrite("times", &ObservationBatch::times)
        .def_readwrite("locations", &ObservationBatch::locations)
        .def_readwrite("values", &ObservationBatch::values)
        .def_property_readonly("n_steps", &ObservationBatch::n_steps)
        .def_property_readonly("n_total", &ObservationBatch::n_total)
        .def("validate", &ObservationBatch::validate, py::arg("domain"));

    mod.def("read_observations",
            [](const std::string& path) { return read_observations_csv(path); },
            py::arg("path"), "Load a t,x...,y observation CSV.");
    mod.def("write_observations",
            [](const std::string& path, const ObservationBatch& data, int coord_dim) {
                write_observations_csv(path, data, coord_dim);
            },
            py::arg("path"), py::arg("data"), py::arg("coord_dim"));

    // --- simulation ---------------------------------------------------------
    mod.def("scattered_times_and_locations",
            [](const ModelSpec& model, double t0, double t1, int n_steps,
               int n_per_step, unsigned long long seed) {
                const SimulationPlan plan =
                    scattered_plan(model, t0, t1, n_steps, n_per_step, seed);
                return py::make_tuple(plan.times, plan.locations);
            },
            py::arg("model"), py::arg("t0"), py::arg("t1"), py::arg("n_steps"),
            py::arg("n_per_step"), py::arg("seed"),
            "Evenly spaced times with uniformly scattered locations.");

    mod.def("simulate",
            [](const ModelSpec& model, const std::vector<double>& times,
               const std::vector<Eigen::MatrixXd>& locations,
               unsigned long long seed, double process_noise_scale,
               double measurement_noise_scale) {
                SimulationPlan plan;
                plan.model = model;
                plan.times = times;
                plan.locations = locations;
                plan.seed = seed;
                plan.process_noise_scale = process_noise_scale;
                plan.measurement_noise_scale = measurement_noise_scale;
                const SimulationResult res = simulate(plan);
                py::dict out;
                out["observations"] = res.observations;
                out["states"] = res.trajectory.states;
                return out;
            },
            py::arg("model"), py::arg("times"), py::arg("locations"),
            py::arg("seed") = 0, py::arg("process_noise_scale") = 1.0,
            py::arg("measurement_noise_scale") = 1.0,
            "Draw a trajectory and noisy observations from the model.");

    mod.def("field_from_states",
            [](const ModelSpec& model, const std::vector<double>& times,
               const Eigen::MatrixXd& states, const Eigen::MatrixXd& points,
               int component) {
                const BasisSet basis = build_basis(model.domain, model.max_modes());
                std::vector<Eigen::MatrixXd> locs(
                    times.size(), Eigen::MatrixXd(0, model.domain.coord_dim()));
                const DiscreteSystem sys = assemble_system(model, basis, times, locs);
                Trajectory traj;
                traj.times = times;
                traj.states = states;
                return trajectory_field(traj, sys, basis, points, component);
            },
            py::arg("model"), py::arg("times"), py::arg("states"), py::arg("points"),
            py::arg("component") = -1,
            "Project simulated coefficient states to field values (steps x points).");

    // --- posterior ----------------------------------------------------------
    py::class_<PosteriorField>(mod, "Posterior")
        .def_readonly("times", &PosteriorField::times)
        .def_readonly("component_names", &PosteriorField::component_names)
        .def_readonly("component_mean", &PosteriorField::component_mean)
        .def_readonly("component_var", &PosteriorField::component_var)
        .def_readonly("total_mean", &PosteriorField::total_mean)
        .def_readonly("total_var", &PosteriorField::total_var);

    mod.def("amplitude_maps", &amplitude_maps, py::arg("posterior"),
            "Per-component envelope sqrt(2 * time-mean of squared posterior mean), "
            "points x components.");

    mod.def("loglik",
            [](const ModelSpec& model, const ObservationBatch& data) {
                model.validate();
                data.validate(model.domain);
                const BasisSet basis = build_basis(model.domain, model.max_modes());
                const DiscreteSystem sys =
                    assemble_system(model, basis, data.times, data.locations);
                return filter_pass(sys, data, stationary_prior(sys),
                                   FilterOptions{false, false, 1e-12})
                    .loglik;
            },
            py::arg("model"), py::arg("data"),
            "Marginal log-likelihood of the data under the model.");

    mod.def("smooth",
            [](const ModelSpec& model, const ObservationBatch& data,
               const Eigen::MatrixXd& points) {
                PosteriorBundle b = run_smoother(model, data, points, 0, 0.0);
                return py::make_tuple(b.field, b.loglik);
            },
            py::arg("model"), py::arg("data"), py::arg("points"),
            "Full smoothing pass; returns (posterior, loglik).");

    mod.def("predict",
            [](const ModelSpec& model, const ObservationBatch& data,
               const Eigen::MatrixXd& points, double horizon, int n_steps) {
                PosteriorBundle b = run_smoother(model, data, points, n_steps, horizon);
                PosteriorField& f = b.field;
                const int total = static_cast<int>(f.times.size());
                const int keep = n_steps;
                PosteriorField out;
                out.component_names = f.component_names;
                out.times.assign(f.times.end() - keep, f.times.end());
                out.total_mean = f.total_mean.bottomRows(keep);
                out.total_var = f.total_var.bottomRows(keep);
                for (size_t c = 0; c < f.component_mean.size(); ++c) {
                    out.component_mean.push_back(f.component_mean[c].bottomRows(keep));
                    out.component_var.push_back(f.component_var[c].bottomRows(keep));
                }
                (void)total;
                return out;
            },
            py::arg("model"), py::arg("data"), py::arg("points"), py::arg("horizon"),
            py::arg("n_steps") = 25,
            "Posterior on n_steps future times up to the horizon.");

    // --- fitting ------------------------------------------------------------
    py::class_<FitResult>(mod, "FitReport")
        .def_property_readonly("params",
                               [](const FitResult& r) {
                                   py::dict d;
                                   for (const auto& e : r.params.entries()) {
                                       d[py::str(e.name)] = e.value;
                                   }
                                   return d;
                               })
        .def_readonly("loglik", &FitResult::loglik)
        .def_readonly("best_restart", &FitResult::best_restart)
        .def_readonly("success", &FitResult::success)
        .def_property_readonly("restarts", [](const FitResult& r) {
            py::list out;
            for (const auto& rec : r.restarts) {
                py::dict d;
                d["loglik"] = -rec.result.objective;
                d["converged"] = rec.result.converged;
                d["iterations"] = static_cast<int>(rec.result.trace.size());
                d["evaluations"] = rec.result.evaluations;
                d["failure"] = rec.result.failure;
                out.append(d);
            }
            return out;
        });

    mod.def("data_derived_template", &data_derived_template, py::arg("shape"),
            py::arg("data"),
            "Replace free parameters with data-derived starting values.");

    mod.def("fit",
            [](const ObservationBatch& data, const ModelSpec& template_model,
               int restarts, unsigned long long seed, bool include_template_start,
               bool prune, const std::vector<std::string>& freeze, int max_iterations,
               double fd_step, double gradient_tol, double objective_rel_tol,
               double objective_min_gain, int stall_patience, int max_evaluations) {
                const FitOptions opts = make_fit_options(
                    restarts, seed, include_template_start, prune, freeze,
                    max_iterations, fd_step, gradient_tol, objective_rel_tol,
                    objective_min_gain, stall_patience, max_evaluations);
                FitResult res = fit(data, template_model, opts);
                ModelSpec fitted = template_model;
                res.params.apply_to(fitted);
                return py::make_tuple(res, fitted);
            },
            py::arg("data"), py::arg("template_model"), py::arg("restarts") = 10,
            py::arg("seed") = 0, py::arg("include_template_start") = true,
            py::arg("prune") = true, py::arg("freeze") = std::vector<std::string>{},
            py::arg("max_iterations") = 60, py::arg("fd_step") = 1e-4,
            py::arg("gradient_tol") = 1e-2, py::arg("objective_rel_tol") = 1e-9,
            py::arg("objective_min_gain") = 1e-3, py::arg("stall_patience") = 2,
            py::arg("max_evaluations") = 2000,
            "Multi-restart marginal-likelihood fit; returns (report, fitted_model).");

    // --- spectra ------------------------------------------------------------
    mod.def("spectral_density", &model_spectral_density, py::arg("component"),
            py::arg("nu_x"), py::arg("nu_t"), py::arg("dim"), py::arg("at_time") = 0.0,
            py::arg("harmonic") = 1,
            "Space-time power spectral density of one component.");
}
