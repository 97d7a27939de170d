// oscfield: spatio-temporal resonator fields from the command line.
//
// Subcommands cover the full workflow on file-based inputs:
//   simulate    sample a synthetic field + noisy observations from a model
//   fit         maximize the marginal likelihood over free model parameters
//   smooth      filtered+smoothed posterior fields on an evaluation grid
//   predict     forecast the field beyond the last observation
//   spectrum    space-time spectral-density tables per component
//   basis-check orthonormality diagnostics of the spatial eigenbasis
//
// Every run writes `manifest.cfg`, the fully resolved configuration (inputs,
// overrides and materialized defaults), so outputs are self-describing and
// reruns from the manifest reproduce them byte for byte. Exit codes: 0 on
// success, 2 for configuration errors, 3 for data errors, 4 for numerical
// failures or nonconvergence.

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "oscfield/errors.hpp"
#include "oscfield/estimate.hpp"
#include "oscfield/filter.hpp"
#include "oscfield/io.hpp"
#include "oscfield/model.hpp"
#include "oscfield/simulate.hpp"

namespace {

using namespace oscfield;

// Generic renderer for the CSV artifacts; kept dependency-light and emitted
// next to the data so plots can be regenerated without this binary.
const char* kPlotScript = R"PY(#!/usr/bin/env python3
"""Render the CSV artifacts in this directory into PNG figures.

Usage: python3 plot.py [directory]   (default: the script's own directory)

Understands the files written by the oscfield tool: observations.csv,
truth.csv, field.csv, prediction.csv, amplitude.csv and spectrum_*.csv.
Only matplotlib + numpy are required; missing files are skipped.
"""
import glob
import os
import sys

import numpy as np

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt


def load(path):
    data = np.genfromtxt(path, delimiter=",", names=True)
    return np.atleast_1d(data)


def save(fig, directory, name):
    out = os.path.join(directory, name)
    fig.savefig(out, dpi=130, bbox_inches="tight")
    plt.close(fig)
    print("wrote", out)


def plot_observations(directory):
    path = os.path.join(directory, "observations.csv")
    if not os.path.exists(path):
        return
    d = load(path)
    d = d[np.isfinite(d["y"])]
    fig, ax = plt.subplots(figsize=(7, 4))
    sc = ax.scatter(d["t"], d["x1"], c=d["y"], s=12, cmap="RdBu_r")
    fig.colorbar(sc, ax=ax, label="y")
    ax.set_xlabel("t")
    ax.set_ylabel("x1")
    ax.set_title("observations")
    save(fig, directory, "observations.png")


def plot_field(directory, fname, value_cols=None):
    path = os.path.join(directory, fname)
    if not os.path.exists(path):
        return
    d = load(path)
    names = d.dtype.names
    if value_cols is None:
        value_cols = [n for n in names if n.startswith("mean") or n == "truth"]
    tg = np.unique(d["t"])
    xg = np.unique(d["x1"])
    two_d = "x2" in names and np.unique(d["x2"]).size > 1
    for col in value_cols:
        fig, ax = plt.subplots(figsize=(7, 4))
        if two_d:
            last = d[d["t"] == tg[-1]]
            sc = ax.scatter(last["x1"], last["x2"], c=last[col], s=14, cmap="RdBu_r")
            ax.set_xlabel("x1")
            ax.set_ylabel("x2")
            ax.set_title(f"{fname}: {col} at t={tg[-1]:g}")
            fig.colorbar(sc, ax=ax)
        elif tg.size > 1 and tg.size * xg.size == d.shape[0]:
            grid = d[col].reshape(tg.size, xg.size)
            pc = ax.pcolormesh(tg, xg, grid.T, shading="nearest", cmap="RdBu_r")
            ax.set_xlabel("t")
            ax.set_ylabel("x1")
            ax.set_title(f"{fname}: {col}")
            fig.colorbar(pc, ax=ax)
        else:
            ax.plot(d["t"], d[col], lw=0.8)
            ax.set_xlabel("t")
            ax.set_title(f"{fname}: {col}")
        save(fig, directory, f"{os.path.splitext(fname)[0]}_{col}.png")


def plot_amplitude(directory):
    path = os.path.join(directory, "amplitude.csv")
    if not os.path.exists(path):
        return
    d = load(path)
    names = d.dtype.names
    amp_cols = [n for n in names if n.startswith("amp_")]
    two_d = "x2" in names
    for col in amp_cols:
        fig, ax = plt.subplots(figsize=(6, 4.5))
        if two_d:
            sc = ax.scatter(d["x1"], d["x2"], c=d[col], s=16, cmap="magma")
            ax.set_xlabel("x1")
            ax.set_ylabel("x2")
            fig.colorbar(sc, ax=ax)
        else:
            ax.plot(d["x1"], d[col])
            ax.set_xlabel("x1")
        ax.set_title(col)
        save(fig, directory, f"amplitude_{col[4:]}.png")


def plot_spectra(directory):
    for path in glob.glob(os.path.join(directory, "spectrum_*.csv")):
        d = load(path)
        nx = np.unique(d["nu_x"])
        nt = np.unique(d["nu_t"])
        dens = np.clip(d["density"], 1e-300, None).reshape(nx.size, nt.size)
        fig, ax = plt.subplots(figsize=(6.5, 4.5))
        pc = ax.pcolormesh(nx, nt, np.log10(dens).T, shading="nearest", cmap="viridis")
        ax.set_xlabel("nu_x")
        ax.set_ylabel("nu_t")
        name = os.path.splitext(os.path.basename(path))[0]
        ax.set_title(f"log10 spectral density: {name[9:]}")
        fig.colorbar(pc, ax=ax)
        save(fig, directory, name + ".png")


def main():
    directory = sys.argv[1] if len(sys.argv) > 1 else os.path.dirname(os.path.abspath(__file__))
    plot_observations(directory)
    plot_field(directory, "truth.csv")
    plot_field(directory, "field.csv")
    plot_field(directory, "prediction.csv")
    plot_amplitude(directory)
    plot_spectra(directory)


if __name__ == "__main__":
    main()
)PY";

const std::vector<std::string> kNamespaces = {"sim.",      "fit.",     "grid.",
                                              "spectrum.", "predict.", "basis."};

// Commands share one configuration document; each consumes its own key
// namespaces and ignores the others so a single file can drive a whole
// simulate -> fit -> smooth pipeline. Typos inside consumed namespaces (and
// at the top level) still surface through require_all_used().
void ignore_foreign_namespaces(ConfigMap& cfg, const std::vector<std::string>& mine) {
    for (const std::string& ns : kNamespaces) {
        if (std::find(mine.begin(), mine.end(), ns) == mine.end()) cfg.mark_prefix_used(ns);
    }
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open file for writing: " + path);
    out << text;
}

void finish_run(ConfigMap& cfg, const std::string& command, const std::string& out_dir) {
    const std::string recorded = cfg.get_string("run.command", command);
    if (recorded != command) cfg.set_string("run.command", command);
    cfg.require_all_used();
    write_file(out_dir + "/manifest.cfg", cfg.serialize());
    write_file(out_dir + "/plot.py", kPlotScript);
}

int default_grid_resolution(DomainKind kind) {
    switch (kind) {
        case DomainKind::interval: return 101;
        case DomainKind::rectangle: return 41;
        case DomainKind::disk: return 41;
        case DomainKind::sphere: return 24;
    }
    return 41;
}

std::string data_path_from(ConfigMap& cfg) {
    if (!cfg.has("run.data")) {
        throw ConfigError("no observation file given: pass --data or set run.data");
    }
    return cfg.get_string("run.data");
}

std::vector<int> selected_components(ConfigMap& cfg, const ModelSpec& model) {
    std::vector<int> all(model.components.size());
    for (size_t c = 0; c < model.components.size(); ++c) all[c] = static_cast<int>(c);
    if (!cfg.has("run.components")) return all;
    const std::vector<std::string> names = cfg.get_strings("run.components");
    if (names.empty() || (names.size() == 1 && names[0] == "all")) return all;
    std::vector<int> chosen;
    for (const std::string& name : names) {
        bool found = false;
        for (size_t c = 0; c < model.components.size(); ++c) {
            if (model.components[c].name == name) {
                chosen.push_back(static_cast<int>(c));
                found = true;
                break;
            }
        }
        if (!found) {
            std::string known;
            for (size_t c = 0; c < model.components.size(); ++c) {
                if (c > 0) known += ", ";
                known += model.components[c].name;
            }
            throw ConfigError("unknown component `" + name + "` (model has: " + known + ")");
        }
    }
    return chosen;
}

PosteriorField select_field_components(const PosteriorField& field, const std::vector<int>& keep) {
    PosteriorField out;
    out.times = field.times;
    out.total_mean = field.total_mean;
    out.total_var = field.total_var;
    for (int c : keep) {
        out.component_names.push_back(field.component_names[c]);
        out.component_mean.push_back(field.component_mean[c]);
        out.component_var.push_back(field.component_var[c]);
    }
    return out;
}

PosteriorField tail_steps(const PosteriorField& field, int first_step) {
    PosteriorField out;
    const int t_steps = static_cast<int>(field.times.size());
    const int n = t_steps - first_step;
    out.times.assign(field.times.begin() + first_step, field.times.end());
    out.component_names = field.component_names;
    for (size_t c = 0; c < field.component_mean.size(); ++c) {
        out.component_mean.push_back(field.component_mean[c].bottomRows(n));
        out.component_var.push_back(field.component_var[c].bottomRows(n));
    }
    out.total_mean = field.total_mean.bottomRows(n);
    out.total_var = field.total_var.bottomRows(n);
    return out;
}

// --------------------------------------------------------------------------

int cmd_simulate(ConfigMap& cfg, const std::string& out_dir, bool verbose) {
    ModelSpec model = model_from_config(cfg);
    SimulationPlan plan = sim_plan_from_config(cfg, model);
    const int resolution = static_cast<int>(
        cfg.get_int("grid.resolution", default_grid_resolution(model.domain.kind)));

    SimulationResult result = simulate(plan);
    BasisSet basis = build_basis(model.domain, model.max_modes());
    DiscreteSystem sys = assemble_system(model, basis, plan.times, plan.locations);

    const int coord_dim = model.domain.coord_dim();
    write_observations_csv(out_dir + "/observations.csv", result.observations, coord_dim);

    const Eigen::MatrixXd pts = grid_points(model.domain, resolution);
    const int n_pts = static_cast<int>(pts.rows());
    const int n_steps = sys.n_steps();
    std::vector<std::string> columns;
    columns.push_back("t");
    for (int d = 0; d < coord_dim; ++d) columns.push_back("x" + std::to_string(d + 1));
    columns.push_back("truth");
    for (const auto& comp : model.components) columns.push_back("truth_" + comp.name);

    Eigen::MatrixXd total = trajectory_field(result.trajectory, sys, basis, pts);
    std::vector<Eigen::MatrixXd> per_comp;
    for (size_t c = 0; c < model.components.size(); ++c) {
        per_comp.push_back(
            trajectory_field(result.trajectory, sys, basis, pts, static_cast<int>(c)));
    }
    Eigen::MatrixXd rows(n_steps * n_pts, static_cast<int>(columns.size()));
    for (int k = 0; k < n_steps; ++k) {
        for (int i = 0; i < n_pts; ++i) {
            int col = 0;
            rows(k * n_pts + i, col++) = plan.times[static_cast<size_t>(k)];
            for (int d = 0; d < coord_dim; ++d) rows(k * n_pts + i, col++) = pts(i, d);
            rows(k * n_pts + i, col++) = total(k, i);
            for (const auto& m : per_comp) rows(k * n_pts + i, col++) = m(k, i);
        }
    }
    write_table_csv(out_dir + "/truth.csv", columns, rows);

    finish_run(cfg, "simulate", out_dir);
    std::cout << "simulated " << result.observations.n_total() << " observations over "
              << n_steps << " steps (seed " << plan.seed << ")\n";
    if (verbose) {
        std::cout << "state dimension " << sys.state_dim << ", truth grid " << n_pts
                  << " points\n";
    }
    std::cout << "wrote " << out_dir << "/observations.csv, truth.csv, manifest.cfg, plot.py\n";
    return 0;
}

int cmd_fit(ConfigMap& cfg, const std::string& out_dir, bool verbose) {
    ModelSpec shape = model_from_config(cfg);
    const std::string data_path = data_path_from(cfg);
    ObservationBatch data = read_observations_csv(data_path);
    data.validate(shape.domain);

    FitOptions fopts = fit_options_from_config(cfg);
    fopts.freeze = cfg.get_strings("fit.freeze", {});
    const std::string start = cfg.get_string("fit.start", "config");
    ModelSpec tmpl = shape;
    if (start == "data") {
        tmpl = data_derived_template(shape, data);
    } else if (start != "config") {
        throw ConfigError("fit.start must be `config` or `data`, got `" + start + "`");
    }

    FitResult result = fit(data, tmpl, fopts);
    write_fit_ndjson(out_dir + "/fit_report.ndjson", result);

    ModelSpec fitted = tmpl;
    if (result.success) result.params.apply_to(fitted);
    ConfigMap fitted_cfg;
    model_to_config(fitted, fitted_cfg);
    write_file(out_dir + "/fitted_model.cfg", fitted_cfg.serialize());

    bool any_converged = false;
    for (const auto& rec : result.restarts) {
        any_converged = any_converged || (rec.result.converged &&
                                          std::isfinite(rec.result.objective));
        if (verbose) {
            std::cout << "restart " << (&rec - result.restarts.data()) << ": loglik "
                      << -rec.result.objective << " after " << rec.result.evaluations
                      << " evaluations"
                      << (rec.result.failure.empty() ? "" : " [" + rec.result.failure + "]")
                      << "\n";
        }
    }

    finish_run(cfg, "fit", out_dir);
    if (result.success) {
        std::cout << "best restart " << result.best_restart << ": loglik " << result.loglik
                  << "\n";
        for (const auto& e : result.params.entries()) {
            std::cout << "  " << e.name << " = " << format_double(e.value)
                      << (e.active ? "" : " (fixed)") << "\n";
        }
    } else {
        std::cout << "fit failed: no restart produced a finite objective\n";
    }
    std::cout << "wrote " << out_dir << "/fit_report.ndjson, fitted_model.cfg, manifest.cfg\n";
    if (!result.success || !any_converged) {
        std::cerr << "no restart converged\n";
        return 4;
    }
    return 0;
}

// Shared by smooth (RTS pass over the data span) and predict (filter pass
// extended beyond it).
struct PosteriorRun {
    ModelSpec model;
    BasisSet basis;
    DiscreteSystem sys;
    FilterResult filtered;
};

PosteriorRun run_filter(ConfigMap& cfg, const ObservationBatch& data, int extra_steps = 0,
                        double horizon = 0.0) {
    ModelSpec model = model_from_config(cfg);
    data.validate(model.domain);
    ObservationBatch ext = data;
    const int coord_dim = model.domain.coord_dim();
    if (extra_steps > 0) {
        const double t_end = ext.times.back();
        const double dt = (horizon - t_end) / extra_steps;
        if (!(dt > 0.0)) throw ConfigError("predict.t1 must lie beyond the last data time");
        for (int j = 1; j <= extra_steps; ++j) {
            ext.times.push_back(t_end + j * dt);
            ext.locations.push_back(Eigen::MatrixXd(0, coord_dim));
            ext.values.push_back(Eigen::VectorXd(0));
        }
    }
    BasisSet basis = build_basis(model.domain, model.max_modes());
    DiscreteSystem sys = assemble_system(model, basis, ext.times, ext.locations);
    FilterResult fr = filter_pass(sys, ext, stationary_prior(sys));
    return PosteriorRun{std::move(model), std::move(basis), std::move(sys), std::move(fr)};
}

int cmd_smooth(ConfigMap& cfg, const std::string& out_dir, bool verbose) {
    const std::string data_path = data_path_from(cfg);
    const ObservationBatch data = read_observations_csv(data_path);
    PosteriorRun run = run_filter(cfg, data);
    const std::vector<GaussianBelief> smoothed = smooth_pass(run.sys, run.filtered);

    const int resolution = static_cast<int>(
        cfg.get_int("grid.resolution", default_grid_resolution(run.model.domain.kind)));
    const Eigen::MatrixXd pts = grid_points(run.model.domain, resolution);
    PosteriorField field = posterior_at(smoothed, run.sys, run.basis, pts);
    field = select_field_components(field, selected_components(cfg, run.model));

    write_posterior_csv(out_dir + "/field.csv", field, pts);
    write_posterior_ndjson(out_dir + "/field.ndjson", field, pts);
    write_amplitude_csv(out_dir + "/amplitude.csv", field, pts);

    finish_run(cfg, "smooth", out_dir);
    std::cout << "loglik " << run.filtered.loglik << " over " << data.n_total()
              << " observations in " << run.sys.n_steps() << " steps\n";
    if (verbose) {
        std::cout << "grid " << pts.rows() << " points, components:";
        for (const auto& name : field.component_names) std::cout << " " << name;
        std::cout << "\n";
    }
    std::cout << "wrote " << out_dir
              << "/field.csv, field.ndjson, amplitude.csv, manifest.cfg, plot.py\n";
    return 0;
}

int cmd_predict(ConfigMap& cfg, const std::string& out_dir, bool verbose) {
    const std::string data_path = data_path_from(cfg);
    const ObservationBatch data = read_observations_csv(data_path);
    if (data.times.empty()) throw DataError("prediction needs at least one data step");
    const double span = data.times.back() - data.times.front();
    const double default_t1 = data.times.back() + (span > 0.0 ? 0.25 * span : 1.0);
    const double t1 = cfg.get_double("predict.t1", default_t1);
    const int extra = static_cast<int>(cfg.get_int("predict.n_steps", 25));
    if (extra < 1) throw ConfigError("predict.n_steps must be >= 1");

    PosteriorRun run = run_filter(cfg, data, extra, t1);
    const int resolution = static_cast<int>(
        cfg.get_int("grid.resolution", default_grid_resolution(run.model.domain.kind)));
    const Eigen::MatrixXd pts = grid_points(run.model.domain, resolution);
    PosteriorField field = posterior_at(run.filtered.filtered, run.sys, run.basis, pts);
    field = select_field_components(field, selected_components(cfg, run.model));
    field = tail_steps(field, static_cast<int>(data.times.size()));

    write_posterior_csv(out_dir + "/prediction.csv", field, pts);
    write_posterior_ndjson(out_dir + "/prediction.ndjson", field, pts);

    finish_run(cfg, "predict", out_dir);
    std::cout << "predicted " << extra << " steps to t = " << format_double(t1) << "\n";
    if (verbose) std::cout << "grid " << pts.rows() << " points\n";
    std::cout << "wrote " << out_dir << "/prediction.csv, prediction.ndjson, manifest.cfg\n";
    return 0;
}

int cmd_spectrum(ConfigMap& cfg, const std::string& out_dir, bool verbose) {
    ModelSpec model = model_from_config(cfg);
    const std::vector<int> chosen = selected_components(cfg, model);
    const int resolution = static_cast<int>(cfg.get_int("spectrum.resolution", 101));
    if (resolution < 2) throw ConfigError("spectrum.resolution must be >= 2");
    const double at_time = cfg.get_double("spectrum.at_time", 0.0);

    BasisSet basis = build_basis(model.domain, model.max_modes());
    const double nu_x_default = std::sqrt(basis.eigenvalue(basis.size() - 1));
    double wmax = 0.0, gmax = 0.0;
    for (int c : chosen) {
        const ComponentSpec& comp = model.components[c];
        for (double w : comp.omega.values()) wmax = std::max(wmax, w * comp.harmonics);
        gmax = std::max(gmax, comp.gamma);
    }
    const double nu_x_max = cfg.get_double("spectrum.nu_x_max", nu_x_default);
    const double nu_t_max = cfg.get_double("spectrum.nu_t_max", 1.5 * wmax + 5.0 * gmax + 1.0);
    const int dim = model.domain.kernel_dim();

    for (int c : chosen) {
        const ComponentSpec& comp = model.components[c];
        std::vector<std::string> columns = {"nu_x", "nu_t", "density"};
        for (int h = 1; comp.harmonics > 1 && h <= comp.harmonics; ++h) {
            columns.push_back("density_h" + std::to_string(h));
        }
        Eigen::MatrixXd rows(resolution * resolution, static_cast<int>(columns.size()));
        for (int i = 0; i < resolution; ++i) {
            const double nu_x = nu_x_max * i / (resolution - 1);
            for (int j = 0; j < resolution; ++j) {
                const double nu_t = nu_t_max * j / (resolution - 1);
                int col = 0;
                Eigen::RowVectorXd row(columns.size());
                row(col++) = nu_x;
                row(col++) = nu_t;
                double total = 0.0;
                std::vector<double> per_h;
                for (int h = 1; h <= comp.harmonics; ++h) {
                    const double s = model_spectral_density(comp, nu_x, nu_t, dim, at_time, h);
                    per_h.push_back(s);
                    total += s;
                }
                row(col++) = total;
                if (comp.harmonics > 1) {
                    for (double s : per_h) row(col++) = s;
                }
                rows.row(i * resolution + j) = row;
            }
        }
        write_table_csv(out_dir + "/spectrum_" + comp.name + ".csv", columns, rows);
        if (verbose) {
            std::cout << "component " << comp.name << ": nu_x <= " << format_double(nu_x_max)
                      << ", nu_t <= " << format_double(nu_t_max) << "\n";
        }
    }

    finish_run(cfg, "spectrum", out_dir);
    std::cout << "wrote " << chosen.size() << " spectral table(s) to " << out_dir << "\n";
    return 0;
}

int cmd_basis_check(ConfigMap& cfg, const std::string& out_dir, bool verbose) {
    // Only the domain block and mode count matter here; the rest of the
    // document (components, noise, ...) is legitimate but irrelevant.
    ModelSpec model;
    const std::string kind_name = cfg.get_string("domain.kind");
    try {
        model.domain.kind = domain_kind_from_string(kind_name);
    } catch (const std::exception& e) {
        throw ConfigError(cfg.source() + ": key `domain.kind`: " + e.what());
    }
    switch (model.domain.kind) {
        case DomainKind::interval:
            model.domain.half_length = cfg.get_double("domain.half_length");
            break;
        case DomainKind::rectangle:
            model.domain.half_length_x = cfg.get_double("domain.half_length_x");
            model.domain.half_length_y = cfg.get_double("domain.half_length_y");
            break;
        case DomainKind::disk:
        case DomainKind::sphere:
            model.domain.radius = cfg.get_double("domain.radius");
            break;
    }
    const int n_modes = static_cast<int>(cfg.get_int("n_modes"));
    const int quad_res = static_cast<int>(cfg.get_int("basis.quadrature", 256));
    const double tol = cfg.get_double("basis.tol", 1e-6);
    const int resolution = static_cast<int>(
        cfg.get_int("grid.resolution", default_grid_resolution(model.domain.kind)));

    BasisSet basis = build_basis(model.domain, n_modes);
    const QuadratureGrid quad = quadrature_grid(model.domain, quad_res);
    const Eigen::MatrixXd phi = eval_basis(basis, quad.points);
    const Eigen::MatrixXd gram = phi.transpose() * quad.weights.asDiagonal() * phi;
    const double deviation =
        (gram - Eigen::MatrixXd::Identity(n_modes, n_modes)).cwiseAbs().maxCoeff();

    auto safe_label = [&](int n) {
        std::string label = basis.mode_label(n);
        std::replace(label.begin(), label.end(), ',', ';');
        return label;
    };

    {
        std::string text = "mode,eigenvalue,label\n";
        for (int n = 0; n < n_modes; ++n) {
            text += std::to_string(n) + "," + format_double(basis.eigenvalue(n)) + "," +
                    safe_label(n) + "\n";
        }
        write_file(out_dir + "/basis_modes.csv", text);
    }
    {
        const Eigen::MatrixXd pts = grid_points(model.domain, resolution);
        const Eigen::MatrixXd vals = eval_basis(basis, pts);
        std::vector<std::string> columns;
        for (int d = 0; d < model.domain.coord_dim(); ++d) {
            columns.push_back("x" + std::to_string(d + 1));
        }
        for (int n = 0; n < n_modes; ++n) columns.push_back("psi[" + safe_label(n) + "]");
        Eigen::MatrixXd rows(pts.rows(), pts.cols() + vals.cols());
        rows.leftCols(pts.cols()) = pts;
        rows.rightCols(vals.cols()) = vals;
        write_table_csv(out_dir + "/basis_grid.csv", columns, rows);
    }

    cfg.mark_all_used();
    finish_run(cfg, "basis-check", out_dir);
    std::cout << "basis " << to_string(model.domain.kind) << " N=" << n_modes
              << ": max |Gram - I| = " << deviation << " (tolerance " << format_double(tol)
              << ")\n";
    if (verbose) {
        std::cout << "eigenvalues " << format_double(basis.eigenvalue(0)) << " .. "
                  << format_double(basis.eigenvalue(n_modes - 1)) << ", quadrature resolution "
                  << quad_res << "\n";
    }
    std::cout << "wrote " << out_dir << "/basis_modes.csv, basis_grid.csv, manifest.cfg\n";
    if (!(deviation <= tol)) {
        std::cerr << "orthonormality deviation exceeds tolerance\n";
        return 4;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"oscfield: resonator-field modelling, inference and simulation"};
    app.require_subcommand(1);

    std::string config_path, data_path, out_dir = ".", components;
    long long seed = 0;
    int restarts = 0, grid = 0;
    bool verbose = false;

    struct SubSpec {
        CLI::App* sub = nullptr;
        CLI::Option *seed_opt = nullptr, *restarts_opt = nullptr, *grid_opt = nullptr,
                    *data_opt = nullptr, *components_opt = nullptr;
    };
    std::vector<std::pair<std::string, SubSpec>> subs;

    auto make_sub = [&](const std::string& name, const std::string& help, bool with_data,
                        bool with_seed, bool with_restarts, bool with_grid,
                        bool with_components) {
        SubSpec spec;
        spec.sub = app.add_subcommand(name, help);
        spec.sub->add_option("--config", config_path, "configuration file")->required();
        spec.sub->add_option("--out", out_dir, "output directory (default: current)");
        spec.sub->add_flag("--verbose", verbose, "more progress detail");
        if (with_data) {
            spec.data_opt = spec.sub->add_option("--data", data_path,
                                                 "observations CSV (overrides run.data)");
        }
        if (with_seed) {
            spec.seed_opt = spec.sub->add_option("--seed", seed, "override the configured seed");
        }
        if (with_restarts) {
            spec.restarts_opt =
                spec.sub->add_option("--restarts", restarts, "override fit.restarts");
        }
        if (with_grid) {
            spec.grid_opt = spec.sub->add_option(
                "--grid", grid, "per-axis output grid resolution (overrides grid.resolution)");
        }
        if (with_components) {
            spec.components_opt = spec.sub->add_option(
                "--components", components, "comma list of component names to report");
        }
        subs.emplace_back(name, spec);
    };

    make_sub("simulate", "sample a synthetic field and noisy observations", false, true, false,
             true, false);
    make_sub("fit", "maximum-likelihood parameter estimation from data", true, true, true, false,
             false);
    make_sub("smooth", "posterior field grids from filtering + smoothing", true, false, false,
             true, true);
    make_sub("predict", "forecast the field beyond the data window", true, false, false, true,
             true);
    make_sub("spectrum", "space-time spectral density tables", false, false, false, true, true);
    make_sub("basis-check", "spatial eigenbasis diagnostics", false, false, false, true, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        const SubSpec* active = nullptr;
        std::string name;
        for (const auto& [sub_name, spec] : subs) {
            if (spec.sub->parsed()) {
                active = &spec;
                name = sub_name;
                break;
            }
        }

        ConfigMap cfg = ConfigMap::load(config_path);
        if (active->data_opt != nullptr && active->data_opt->count() > 0) {
            cfg.set_string("run.data", data_path);
        }
        if (active->seed_opt != nullptr && active->seed_opt->count() > 0) {
            cfg.set_int(name == "fit" ? "fit.seed" : "sim.seed", seed);
        }
        if (active->restarts_opt != nullptr && active->restarts_opt->count() > 0) {
            cfg.set_int("fit.restarts", restarts);
        }
        if (active->grid_opt != nullptr && active->grid_opt->count() > 0) {
            cfg.set_int(name == "spectrum" ? "spectrum.resolution" : "grid.resolution", grid);
        }
        if (active->components_opt != nullptr && active->components_opt->count() > 0) {
            cfg.set_string("run.components", components);
        }
        std::filesystem::create_directories(out_dir);

        if (name == "simulate") {
            ignore_foreign_namespaces(cfg, {"sim.", "grid."});
            return cmd_simulate(cfg, out_dir, verbose);
        }
        if (name == "fit") {
            ignore_foreign_namespaces(cfg, {"fit."});
            return cmd_fit(cfg, out_dir, verbose);
        }
        if (name == "smooth") {
            ignore_foreign_namespaces(cfg, {"grid."});
            return cmd_smooth(cfg, out_dir, verbose);
        }
        if (name == "predict") {
            ignore_foreign_namespaces(cfg, {"grid.", "predict."});
            return cmd_predict(cfg, out_dir, verbose);
        }
        if (name == "spectrum") {
            ignore_foreign_namespaces(cfg, {"spectrum."});
            return cmd_spectrum(cfg, out_dir, verbose);
        }
        ignore_foreign_namespaces(cfg, {"grid.", "basis."});
        return cmd_basis_check(cfg, out_dir, verbose);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 4;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}
