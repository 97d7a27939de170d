#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "oscfield/estimate.hpp"
#include "oscfield/filter.hpp"
#include "oscfield/model.hpp"
#include "oscfield/simulate.hpp"

namespace oscfield {

// Plain key-value configuration document. One `key = value` pair per line;
// `#` starts a comment; blank lines are ignored. Keys are dotted paths
// (e.g. component.wave.kernel.lengthscale). Values are stored verbatim as
// strings and converted on access, so a document survives a parse/serialize
// round trip byte-for-byte up to ordering and whitespace normalization.
//
// Reads are tracked: getters mark keys used, and getters that take a
// fallback materialize the default into the map when the key is absent.
// After a command has consulted everything it understands, unused_keys()
// exposes typos and require_all_used() turns them into a ConfigError, and
// serialize() emits the fully-resolved document (suitable as a manifest).
class ConfigMap {
  public:
    ConfigMap() = default;

    static ConfigMap parse(const std::string& text, const std::string& source = "<config>");
    static ConfigMap load(const std::string& path);

    bool has(const std::string& key) const;

    // Getters throw ConfigError naming the key (and source line, if any) on
    // missing keys or unconvertible values.
    std::string get_string(const std::string& key);
    std::string get_string(const std::string& key, const std::string& fallback);
    double get_double(const std::string& key);
    double get_double(const std::string& key, double fallback);
    long long get_int(const std::string& key);
    long long get_int(const std::string& key, long long fallback);
    bool get_bool(const std::string& key);
    bool get_bool(const std::string& key, bool fallback);
    // Comma-separated lists; empty value = empty list.
    std::vector<double> get_doubles(const std::string& key);
    std::vector<std::string> get_strings(const std::string& key);
    std::vector<std::string> get_strings(const std::string& key,
                                         const std::vector<std::string>& fallback);

    void set_string(const std::string& key, const std::string& value);
    void set_double(const std::string& key, double value);  // shortest round-trip form
    void set_int(const std::string& key, long long value);
    void set_bool(const std::string& key, bool value);
    void erase(const std::string& key);  // no-op when absent

    std::vector<std::string> keys() const;  // insertion order
    std::vector<std::string> unused_keys() const;
    void require_all_used() const;  // ConfigError listing unrecognized keys
    void mark_all_used();
    // Treat a whole key namespace (e.g. "fit.") as consumed: one document can
    // carry settings for several commands, each ignoring the others' blocks.
    void mark_prefix_used(const std::string& prefix);

    // Canonical document: keys sorted lexicographically, `key = value` lines.
    std::string serialize() const;

    const std::string& source() const { return source_; }
    // Directory of the source path, used to resolve relative file references.
    std::string source_dir() const;

  private:
    struct Entry {
        std::string key;
        std::string value;
        int line = 0;  // 0 = synthesized
        mutable bool used = false;
    };
    Entry* find(const std::string& key);
    const Entry* find(const std::string& key) const;
    [[noreturn]] void fail(const std::string& key, const std::string& what) const;

    std::vector<Entry> entries_;
    std::string source_ = "<config>";
};

// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double value);

// ---------------------------------------------------------------------------
// Model documents.
//
// Layout:
//   domain.kind = interval|rectangle|disk|sphere
//   domain.half_length / domain.half_length_x + domain.half_length_y /
//   domain.radius                (per kind)
//   n_modes      = 32
//   sigma_meas   = 0.1           (measurement noise standard deviation)
//   diffuse_variance = 25        (optional, prior variance of undamped blocks)
//   components   = wave,bias     (ordered list of component names)
//   component.<name>.gamma / .chi
//   component.<name>.omega       (rad per time unit, constant)  -- or
//   component.<name>.omega_hz    (cycles per time unit)         -- or
//   component.<name>.omega_csv   (path to a t,omega step table) -- or
//   component.<name>.omega_knots + component.<name>.omega_values (inline)
//   component.<name>.harmonics / .harmonic_scales / .n_modes    (optional)
//   component.<name>.kernel.family = matern|squared_exponential
//   component.<name>.kernel.nu / .lengthscale / .magnitude

ModelSpec model_from_config(ConfigMap& cfg);
// Inverse of model_from_config; constant schedules serialize as `omega`,
// step schedules as `omega_knots`/`omega_values`.
void model_to_config(const ModelSpec& model, ConfigMap& cfg);

// Simulation recipe (`sim.*` keys, all with defaults):
//   sim.t0 = 0, sim.t1 = 1, sim.n_steps = 100, sim.obs_per_step = 25,
//   sim.seed = 1, sim.process_noise_scale = 1, sim.measurement_noise_scale = 1
SimulationPlan sim_plan_from_config(ConfigMap& cfg, const ModelSpec& model);

// Optimizer settings (`fit.*` keys, all with defaults):
//   fit.restarts, fit.seed, fit.include_template_start,
//   fit.prune_lagging_restarts, fit.max_iterations, fit.fd_step,
//   fit.gradient_tol, fit.objective_rel_tol, fit.objective_min_gain,
//   fit.stall_patience, fit.max_evaluations
FitOptions fit_options_from_config(ConfigMap& cfg);

// ---------------------------------------------------------------------------
// CSV. All files are UTF-8 with '.' decimals, a header row, and
// comma-separated numeric fields in shortest round-trip form.

// Observation schema: t,x1[,x2[,x3]],y with one row per scalar observation,
// rows grouped by equal consecutive t into steps. A row whose coordinate and
// value fields are all empty marks a prediction-only step (a time with no
// data). Times must be nondecreasing within the file and strictly increasing
// across distinct steps.
void write_observations_csv(const std::string& path, const ObservationBatch& data,
                            int coord_dim);
ObservationBatch read_observations_csv(const std::string& path, int* coord_dim_out = nullptr);

// Generic numeric table with named columns.
void write_table_csv(const std::string& path, const std::vector<std::string>& columns,
                     const Eigen::MatrixXd& rows);

// Frequency-schedule step table: columns t,omega (omega in rad per time unit).
FrequencySchedule read_schedule_csv(const std::string& path);

// Evaluation grid for field output: `resolution` nodes per axis.
//   interval   -> equispaced interior points on (-L, L)
//   rectangle  -> interior product grid
//   disk       -> bounding-box product grid restricted to the open disk
//   sphere     -> latitude-longitude product grid in Cartesian coordinates
Eigen::MatrixXd grid_points(const DomainSpec& domain, int resolution);

// ---------------------------------------------------------------------------
// NDJSON reports (one JSON object per line).

// Per-restart records (init point, iteration/evaluation counts, final
// parameters, final log-likelihood, convergence flag) followed by a summary
// record with the selected parameters.
void write_fit_ndjson(const std::string& path, const FitResult& fit);

// One `points` record with the evaluation locations, then one record per
// step: time, total mean/sd and per-component mean/sd at each point.
void write_posterior_ndjson(const std::string& path, const PosteriorField& field,
                            const Eigen::MatrixXd& points);

// Posterior field as a flat table: t, coordinates, total mean/sd, then
// mean_<comp>, sd_<comp> per component. One row per (step, point).
void write_posterior_csv(const std::string& path, const PosteriorField& field,
                         const Eigen::MatrixXd& points);

// Time-averaged per-component envelope table: coordinates then amp_<comp>.
void write_amplitude_csv(const std::string& path, const PosteriorField& field,
                         const Eigen::MatrixXd& points);

}  // namespace oscfield
