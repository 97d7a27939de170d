#include "oscfield/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>
#include <string>

#include "oscfield/errors.hpp"

namespace oscfield {

namespace {

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    if (trim(s).empty()) return out;
    std::string item;
    std::stringstream ss(s);
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

bool parse_double_strict(const std::string& s, double& out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    const char* begin = t.data();
    const char* end = begin + t.size();
    auto res = std::from_chars(begin, end, out);
    if (res.ec != std::errc() || res.ptr != end) {
        // from_chars rejects forms like "1e+3"? (it accepts them) but not
        // leading '+'; accept the common explicit-plus spelling too.
        if (!t.empty() && t[0] == '+') {
            return parse_double_strict(t.substr(1), out);
        }
        return false;
    }
    return true;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open file for writing: " + path);
    out << text;
    if (!out) throw ConfigError("failed writing file: " + path);
}

}  // namespace

std::string format_double(double value) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

// --------------------------------------------------------------------------
// ConfigMap

ConfigMap ConfigMap::parse(const std::string& text, const std::string& source) {
    ConfigMap cfg;
    cfg.source_ = source;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(source + ":" + std::to_string(lineno) +
                              ": expected `key = value`, got: " + line);
        }
        Entry entry;
        entry.key = trim(line.substr(0, eq));
        entry.value = trim(line.substr(eq + 1));
        entry.line = lineno;
        if (entry.key.empty()) {
            throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
        }
        if (cfg.find(entry.key) != nullptr) {
            throw ConfigError(source + ":" + std::to_string(lineno) + ": duplicate key `" +
                              entry.key + "`");
        }
        cfg.entries_.push_back(std::move(entry));
    }
    return cfg;
}

ConfigMap ConfigMap::load(const std::string& path) {
    return parse(read_text_file(path), path);
}

ConfigMap::Entry* ConfigMap::find(const std::string& key) {
    for (auto& e : entries_) {
        if (e.key == key) return &e;
    }
    return nullptr;
}

const ConfigMap::Entry* ConfigMap::find(const std::string& key) const {
    for (const auto& e : entries_) {
        if (e.key == key) return &e;
    }
    return nullptr;
}

void ConfigMap::fail(const std::string& key, const std::string& what) const {
    const Entry* e = find(key);
    std::string where = source_;
    if (e != nullptr && e->line > 0) where += ":" + std::to_string(e->line);
    throw ConfigError(where + ": key `" + key + "`: " + what);
}

bool ConfigMap::has(const std::string& key) const { return find(key) != nullptr; }

std::string ConfigMap::get_string(const std::string& key) {
    Entry* e = find(key);
    if (e == nullptr) fail(key, "missing");
    e->used = true;
    return e->value;
}

std::string ConfigMap::get_string(const std::string& key, const std::string& fallback) {
    if (!has(key)) set_string(key, fallback);
    return get_string(key);
}

double ConfigMap::get_double(const std::string& key) {
    const std::string raw = get_string(key);
    double v = 0.0;
    if (!parse_double_strict(raw, v)) fail(key, "not a number: `" + raw + "`");
    return v;
}

double ConfigMap::get_double(const std::string& key, double fallback) {
    if (!has(key)) set_double(key, fallback);
    return get_double(key);
}

long long ConfigMap::get_int(const std::string& key) {
    const std::string raw = trim(get_string(key));
    long long v = 0;
    auto res = std::from_chars(raw.data(), raw.data() + raw.size(), v);
    if (res.ec != std::errc() || res.ptr != raw.data() + raw.size()) {
        fail(key, "not an integer: `" + raw + "`");
    }
    return v;
}

long long ConfigMap::get_int(const std::string& key, long long fallback) {
    if (!has(key)) set_int(key, fallback);
    return get_int(key);
}

bool ConfigMap::get_bool(const std::string& key) {
    const std::string raw = trim(get_string(key));
    if (raw == "true" || raw == "1" || raw == "yes" || raw == "on") return true;
    if (raw == "false" || raw == "0" || raw == "no" || raw == "off") return false;
    fail(key, "not a boolean: `" + raw + "`");
}

bool ConfigMap::get_bool(const std::string& key, bool fallback) {
    if (!has(key)) set_bool(key, fallback);
    return get_bool(key);
}

std::vector<double> ConfigMap::get_doubles(const std::string& key) {
    std::vector<double> out;
    for (const std::string& item : split_commas(get_string(key))) {
        double v = 0.0;
        if (!parse_double_strict(item, v)) fail(key, "not a number: `" + item + "`");
        out.push_back(v);
    }
    return out;
}

std::vector<std::string> ConfigMap::get_strings(const std::string& key) {
    return split_commas(get_string(key));
}

std::vector<std::string> ConfigMap::get_strings(const std::string& key,
                                                const std::vector<std::string>& fallback) {
    if (!has(key)) {
        std::string joined;
        for (size_t i = 0; i < fallback.size(); ++i) {
            if (i > 0) joined += ",";
            joined += fallback[i];
        }
        set_string(key, joined);
    }
    return get_strings(key);
}

void ConfigMap::set_string(const std::string& key, const std::string& value) {
    // Programmatic writes (defaults, CLI overrides, run metadata) count as
    // consumed; only keys typed in the source document can be "unused".
    Entry* e = find(key);
    if (e != nullptr) {
        e->value = value;
        e->line = 0;
        e->used = true;
    } else {
        entries_.push_back(Entry{key, value, 0, true});
    }
}

void ConfigMap::set_double(const std::string& key, double value) {
    set_string(key, format_double(value));
}

void ConfigMap::set_int(const std::string& key, long long value) {
    set_string(key, std::to_string(value));
}

void ConfigMap::set_bool(const std::string& key, bool value) {
    set_string(key, value ? "true" : "false");
}

void ConfigMap::erase(const std::string& key) {
    for (auto it = entries_.begin(); it != entries_.end(); ++it) {
        if (it->key == key) {
            entries_.erase(it);
            return;
        }
    }
}

std::vector<std::string> ConfigMap::keys() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.key);
    return out;
}

std::vector<std::string> ConfigMap::unused_keys() const {
    std::vector<std::string> out;
    for (const auto& e : entries_) {
        if (!e.used) out.push_back(e.key);
    }
    return out;
}

void ConfigMap::require_all_used() const {
    const std::vector<std::string> stray = unused_keys();
    if (stray.empty()) return;
    std::string msg = source_ + ": unrecognized key";
    msg += stray.size() > 1 ? "s: " : ": ";
    for (size_t i = 0; i < stray.size(); ++i) {
        if (i > 0) msg += ", ";
        msg += "`" + stray[i] + "`";
    }
    throw ConfigError(msg);
}

void ConfigMap::mark_all_used() {
    for (auto& e : entries_) e.used = true;
}

void ConfigMap::mark_prefix_used(const std::string& prefix) {
    for (auto& e : entries_) {
        if (e.key.compare(0, prefix.size(), prefix) == 0) e.used = true;
    }
}

std::string ConfigMap::serialize() const {
    std::vector<const Entry*> sorted;
    sorted.reserve(entries_.size());
    for (const auto& e : entries_) sorted.push_back(&e);
    std::sort(sorted.begin(), sorted.end(),
              [](const Entry* a, const Entry* b) { return a->key < b->key; });
    std::string out;
    for (const Entry* e : sorted) {
        out += e->key;
        out += " = ";
        out += e->value;
        out += "\n";
    }
    return out;
}

std::string ConfigMap::source_dir() const {
    const size_t slash = source_.find_last_of('/');
    if (source_.empty() || source_[0] == '<') return ".";
    if (slash == std::string::npos) return ".";
    return source_.substr(0, slash);
}

// --------------------------------------------------------------------------
// Model documents.

namespace {

KernelSpec kernel_from_config(ConfigMap& cfg, const std::string& prefix) {
    KernelSpec kernel;
    const std::string family = cfg.get_string(prefix + ".family", "matern");
    try {
        kernel.family = kernel_family_from_string(family);
    } catch (const std::exception& e) {
        throw ConfigError(cfg.source() + ": key `" + prefix + ".family`: " + e.what());
    }
    if (kernel.family == KernelFamily::matern) {
        kernel.nu = cfg.get_double(prefix + ".nu", 1.5);
    } else if (cfg.has(prefix + ".nu")) {
        cfg.get_double(prefix + ".nu");  // consume; irrelevant for this family
    }
    kernel.length_scale = cfg.get_double(prefix + ".lengthscale");
    kernel.magnitude = cfg.get_double(prefix + ".magnitude");
    return kernel;
}

FrequencySchedule omega_from_config(ConfigMap& cfg, const std::string& prefix) {
    const bool has_omega = cfg.has(prefix + ".omega");
    const bool has_hz = cfg.has(prefix + ".omega_hz");
    const bool has_csv = cfg.has(prefix + ".omega_csv");
    const bool has_inline = cfg.has(prefix + ".omega_knots") || cfg.has(prefix + ".omega_values");
    const int n_forms = int(has_omega) + int(has_hz) + int(has_csv) + int(has_inline);
    if (n_forms > 1) {
        throw ConfigError(cfg.source() + ": component `" + prefix +
                          "`: give at most one of omega, omega_hz, omega_csv, "
                          "omega_knots/omega_values");
    }
    if (has_omega) return FrequencySchedule::constant(cfg.get_double(prefix + ".omega"));
    if (has_hz) {
        return FrequencySchedule::constant(2.0 * M_PI * cfg.get_double(prefix + ".omega_hz"));
    }
    if (has_csv) {
        std::string path = cfg.get_string(prefix + ".omega_csv");
        if (!path.empty() && path[0] != '/') path = cfg.source_dir() + "/" + path;
        FrequencySchedule sched = read_schedule_csv(path);
        // Fold the table into the document so a serialized copy (manifest)
        // is self-contained rather than referencing a side file.
        cfg.erase(prefix + ".omega_csv");
        if (sched.is_constant()) {
            cfg.set_double(prefix + ".omega", sched.values()[0]);
        } else {
            std::string knots, values;
            for (size_t i = 0; i < sched.knots().size(); ++i) {
                if (i > 0) {
                    knots += ",";
                    values += ",";
                }
                knots += format_double(sched.knots()[i]);
                values += format_double(sched.values()[i]);
            }
            cfg.set_string(prefix + ".omega_knots", knots);
            cfg.set_string(prefix + ".omega_values", values);
        }
        return sched;
    }
    if (has_inline) {
        const std::vector<double> knots = cfg.get_doubles(prefix + ".omega_knots");
        const std::vector<double> values = cfg.get_doubles(prefix + ".omega_values");
        try {
            return FrequencySchedule::steps(knots, values);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(cfg.source() + ": key `" + prefix + ".omega_knots`: " + e.what());
        }
    }
    return FrequencySchedule::constant(0.0);
}

}  // namespace

ModelSpec model_from_config(ConfigMap& cfg) {
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
    model.n_modes = static_cast<int>(cfg.get_int("n_modes"));
    const double sigma = cfg.get_double("sigma_meas");
    model.meas_noise_var = sigma * sigma;
    model.diffuse_variance = cfg.get_double("diffuse_variance", 1e4);

    const std::vector<std::string> names = cfg.get_strings("components");
    if (names.empty()) {
        throw ConfigError(cfg.source() + ": key `components`: empty component list");
    }
    for (const std::string& name : names) {
        const std::string prefix = "component." + name;
        ComponentSpec comp;
        comp.name = name;
        comp.gamma = cfg.get_double(prefix + ".gamma", 0.0);
        comp.chi = cfg.get_double(prefix + ".chi", 0.0);
        comp.omega = omega_from_config(cfg, prefix);
        comp.harmonics = static_cast<int>(cfg.get_int(prefix + ".harmonics", 1));
        if (cfg.has(prefix + ".harmonic_scales")) {
            comp.harmonic_scales = cfg.get_doubles(prefix + ".harmonic_scales");
        }
        comp.n_modes = static_cast<int>(cfg.get_int(prefix + ".n_modes", 0));
        comp.kernel = kernel_from_config(cfg, prefix + ".kernel");
        model.components.push_back(std::move(comp));
    }
    try {
        model.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(cfg.source() + ": invalid model: " + e.what());
    }
    return model;
}

void model_to_config(const ModelSpec& model, ConfigMap& cfg) {
    cfg.set_string("domain.kind", to_string(model.domain.kind));
    switch (model.domain.kind) {
        case DomainKind::interval:
            cfg.set_double("domain.half_length", model.domain.half_length);
            break;
        case DomainKind::rectangle:
            cfg.set_double("domain.half_length_x", model.domain.half_length_x);
            cfg.set_double("domain.half_length_y", model.domain.half_length_y);
            break;
        case DomainKind::disk:
        case DomainKind::sphere:
            cfg.set_double("domain.radius", model.domain.radius);
            break;
    }
    cfg.set_int("n_modes", model.n_modes);
    cfg.set_double("sigma_meas", std::sqrt(model.meas_noise_var));
    cfg.set_double("diffuse_variance", model.diffuse_variance);

    std::string names;
    for (size_t i = 0; i < model.components.size(); ++i) {
        if (i > 0) names += ",";
        names += model.components[i].name;
    }
    cfg.set_string("components", names);

    for (const ComponentSpec& comp : model.components) {
        const std::string prefix = "component." + comp.name;
        cfg.set_double(prefix + ".gamma", comp.gamma);
        cfg.set_double(prefix + ".chi", comp.chi);
        if (comp.omega.is_constant()) {
            cfg.set_double(prefix + ".omega", comp.omega.values()[0]);
        } else {
            std::string knots, values;
            for (size_t i = 0; i < comp.omega.knots().size(); ++i) {
                if (i > 0) {
                    knots += ",";
                    values += ",";
                }
                knots += format_double(comp.omega.knots()[i]);
                values += format_double(comp.omega.values()[i]);
            }
            cfg.set_string(prefix + ".omega_knots", knots);
            cfg.set_string(prefix + ".omega_values", values);
        }
        cfg.set_int(prefix + ".harmonics", comp.harmonics);
        if (!comp.harmonic_scales.empty()) {
            std::string scales;
            for (size_t i = 0; i < comp.harmonic_scales.size(); ++i) {
                if (i > 0) scales += ",";
                scales += format_double(comp.harmonic_scales[i]);
            }
            cfg.set_string(prefix + ".harmonic_scales", scales);
        }
        if (comp.n_modes != 0) cfg.set_int(prefix + ".n_modes", comp.n_modes);
        cfg.set_string(prefix + ".kernel.family", to_string(comp.kernel.family));
        if (comp.kernel.family == KernelFamily::matern) {
            cfg.set_double(prefix + ".kernel.nu", comp.kernel.nu);
        }
        cfg.set_double(prefix + ".kernel.lengthscale", comp.kernel.length_scale);
        cfg.set_double(prefix + ".kernel.magnitude", comp.kernel.magnitude);
    }
}

SimulationPlan sim_plan_from_config(ConfigMap& cfg, const ModelSpec& model) {
    const double t0 = cfg.get_double("sim.t0", 0.0);
    const double t1 = cfg.get_double("sim.t1", 1.0);
    const int n_steps = static_cast<int>(cfg.get_int("sim.n_steps", 100));
    const int obs_per_step = static_cast<int>(cfg.get_int("sim.obs_per_step", 25));
    const auto seed = static_cast<uint64_t>(cfg.get_int("sim.seed", 1));
    SimulationPlan plan = scattered_plan(model, t0, t1, n_steps, obs_per_step, seed);
    plan.process_noise_scale = cfg.get_double("sim.process_noise_scale", 1.0);
    plan.measurement_noise_scale = cfg.get_double("sim.measurement_noise_scale", 1.0);
    return plan;
}

FitOptions fit_options_from_config(ConfigMap& cfg) {
    FitOptions opts;
    opts.restarts = static_cast<int>(cfg.get_int("fit.restarts", opts.restarts));
    opts.seed = static_cast<uint64_t>(cfg.get_int("fit.seed", 0));
    opts.include_template_start =
        cfg.get_bool("fit.include_template_start", opts.include_template_start);
    opts.prune_lagging_restarts =
        cfg.get_bool("fit.prune_lagging_restarts", opts.prune_lagging_restarts);
    opts.optimizer.max_iterations =
        static_cast<int>(cfg.get_int("fit.max_iterations", opts.optimizer.max_iterations));
    opts.optimizer.fd_step = cfg.get_double("fit.fd_step", opts.optimizer.fd_step);
    opts.optimizer.gradient_tol = cfg.get_double("fit.gradient_tol", opts.optimizer.gradient_tol);
    opts.optimizer.objective_rel_tol =
        cfg.get_double("fit.objective_rel_tol", opts.optimizer.objective_rel_tol);
    opts.optimizer.objective_min_gain =
        cfg.get_double("fit.objective_min_gain", opts.optimizer.objective_min_gain);
    opts.optimizer.stall_patience =
        static_cast<int>(cfg.get_int("fit.stall_patience", opts.optimizer.stall_patience));
    opts.optimizer.max_evaluations =
        static_cast<int>(cfg.get_int("fit.max_evaluations", opts.optimizer.max_evaluations));
    return opts;
}

// --------------------------------------------------------------------------
// CSV.

namespace {

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            out.push_back(trim(field));
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    out.push_back(trim(field));
    return out;
}

}  // namespace

void write_observations_csv(const std::string& path, const ObservationBatch& data,
                            int coord_dim) {
    if (coord_dim < 1 || coord_dim > 3) {
        throw std::invalid_argument("write_observations_csv: coord_dim must be 1..3");
    }
    std::string out = "t";
    for (int d = 0; d < coord_dim; ++d) out += ",x" + std::to_string(d + 1);
    out += ",y\n";
    for (int k = 0; k < data.n_steps(); ++k) {
        const int d_k = static_cast<int>(data.values[k].size());
        if (d_k == 0) {
            // Prediction-only marker: a time with empty coordinate/value fields.
            out += format_double(data.times[k]);
            out += std::string(coord_dim + 1, ',');
            out += "\n";
            continue;
        }
        if (data.locations[k].cols() != coord_dim) {
            throw std::invalid_argument("write_observations_csv: coordinate dimension mismatch");
        }
        for (int i = 0; i < d_k; ++i) {
            out += format_double(data.times[k]);
            for (int d = 0; d < coord_dim; ++d) {
                out += ",";
                out += format_double(data.locations[k](i, d));
            }
            out += ",";
            out += format_double(data.values[k](i));
            out += "\n";
        }
    }
    write_text_file(path, out);
}

ObservationBatch read_observations_csv(const std::string& path, int* coord_dim_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open data file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file");
    const std::vector<std::string> header = split_csv_row(line);
    const int n_cols = static_cast<int>(header.size());
    if (n_cols < 3 || n_cols > 5 || header[0] != "t" || header.back() != "y") {
        throw DataError(path + ": expected header t,x1[,x2[,x3]],y");
    }
    const int coord_dim = n_cols - 2;
    for (int d = 0; d < coord_dim; ++d) {
        if (header[d + 1] != "x" + std::to_string(d + 1)) {
            throw DataError(path + ": expected header t,x1[,x2[,x3]],y");
        }
    }
    if (coord_dim_out != nullptr) *coord_dim_out = coord_dim;

    ObservationBatch data;
    std::vector<Eigen::RowVectorXd> step_coords;
    std::vector<double> step_values;
    auto flush_step = [&]() {
        Eigen::MatrixXd locs(static_cast<int>(step_coords.size()), coord_dim);
        Eigen::VectorXd vals(static_cast<int>(step_values.size()));
        for (size_t i = 0; i < step_coords.size(); ++i) {
            locs.row(static_cast<int>(i)) = step_coords[i];
            vals(static_cast<int>(i)) = step_values[i];
        }
        data.locations.push_back(std::move(locs));
        data.values.push_back(std::move(vals));
        step_coords.clear();
        step_values.clear();
    };

    int lineno = 1;
    bool have_step = false;
    double current_t = 0.0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const std::vector<std::string> fields = split_csv_row(line);
        const std::string where = path + ":" + std::to_string(lineno);
        if (static_cast<int>(fields.size()) != n_cols) {
            throw DataError(where + ": expected " + std::to_string(n_cols) + " fields, got " +
                            std::to_string(fields.size()));
        }
        double t = 0.0;
        if (!parse_double_strict(fields[0], t)) {
            throw DataError(where + ": bad time value `" + fields[0] + "`");
        }
        if (have_step && t < current_t) {
            throw DataError(where + ": time decreases (" + format_double(t) + " after " +
                            format_double(current_t) + ")");
        }
        if (!have_step || t != current_t) {
            if (have_step) flush_step();
            data.times.push_back(t);
            current_t = t;
            have_step = true;
        }
        bool all_empty = true;
        for (int c = 1; c < n_cols; ++c) all_empty = all_empty && fields[c].empty();
        if (all_empty) continue;  // prediction-only marker row
        Eigen::RowVectorXd coords(coord_dim);
        for (int d = 0; d < coord_dim; ++d) {
            double v = 0.0;
            if (!parse_double_strict(fields[d + 1], v)) {
                throw DataError(where + ": bad coordinate `" + fields[d + 1] + "`");
            }
            coords(d) = v;
        }
        double y = 0.0;
        if (!parse_double_strict(fields.back(), y)) {
            throw DataError(where + ": bad observation value `" + fields.back() + "`");
        }
        step_coords.push_back(coords);
        step_values.push_back(y);
    }
    if (have_step) flush_step();
    if (data.times.empty()) throw DataError(path + ": no data rows");
    return data;
}

void write_table_csv(const std::string& path, const std::vector<std::string>& columns,
                     const Eigen::MatrixXd& rows) {
    if (static_cast<int>(columns.size()) != rows.cols()) {
        throw std::invalid_argument("write_table_csv: header/column count mismatch");
    }
    std::string out;
    for (size_t c = 0; c < columns.size(); ++c) {
        if (c > 0) out += ",";
        out += columns[c];
    }
    out += "\n";
    for (int i = 0; i < rows.rows(); ++i) {
        for (int c = 0; c < rows.cols(); ++c) {
            if (c > 0) out += ",";
            out += format_double(rows(i, c));
        }
        out += "\n";
    }
    write_text_file(path, out);
}

FrequencySchedule read_schedule_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open schedule file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError(path + ": empty schedule file");
    const std::vector<std::string> header = split_csv_row(line);
    if (header.size() != 2 || header[0] != "t" || header[1] != "omega") {
        throw ConfigError(path + ": expected header t,omega");
    }
    std::vector<double> knots, values;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const std::vector<std::string> fields = split_csv_row(line);
        double t = 0.0, w = 0.0;
        if (fields.size() != 2 || !parse_double_strict(fields[0], t) ||
            !parse_double_strict(fields[1], w)) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected `t,omega` row");
        }
        knots.push_back(t);
        values.push_back(w);
    }
    if (knots.empty()) throw ConfigError(path + ": schedule has no rows");
    try {
        if (knots.size() == 1) return FrequencySchedule::constant(values[0]);
        return FrequencySchedule::steps(std::move(knots), std::move(values));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

Eigen::MatrixXd grid_points(const DomainSpec& domain, int resolution) {
    if (resolution < 2) throw std::invalid_argument("grid_points: resolution must be >= 2");
    const int n = resolution;
    auto axis = [n](double half) {
        // Interior nodes only: cell centers of a uniform partition of [-half, half].
        Eigen::VectorXd x(n);
        const double dx = 2.0 * half / n;
        for (int i = 0; i < n; ++i) x(i) = -half + (i + 0.5) * dx;
        return x;
    };
    switch (domain.kind) {
        case DomainKind::interval: {
            return axis(domain.half_length);
        }
        case DomainKind::rectangle: {
            const Eigen::VectorXd xs = axis(domain.half_length_x);
            const Eigen::VectorXd ys = axis(domain.half_length_y);
            Eigen::MatrixXd pts(n * n, 2);
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j) {
                    pts(i * n + j, 0) = xs(i);
                    pts(i * n + j, 1) = ys(j);
                }
            }
            return pts;
        }
        case DomainKind::disk: {
            const Eigen::VectorXd xs = axis(domain.radius);
            std::vector<Eigen::RowVector2d> inside;
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j) {
                    const double r2 = xs(i) * xs(i) + xs(j) * xs(j);
                    if (r2 < domain.radius * domain.radius) {
                        inside.emplace_back(xs(i), xs(j));
                    }
                }
            }
            Eigen::MatrixXd pts(static_cast<int>(inside.size()), 2);
            for (size_t i = 0; i < inside.size(); ++i) pts.row(static_cast<int>(i)) = inside[i];
            return pts;
        }
        case DomainKind::sphere: {
            // Latitude-longitude product grid, poles excluded, in Cartesian
            // coordinates on the sphere of the configured radius.
            Eigen::MatrixXd pts(n * n, 3);
            for (int i = 0; i < n; ++i) {
                const double theta = M_PI * (i + 0.5) / n;  // colatitude
                for (int j = 0; j < n; ++j) {
                    const double phi = 2.0 * M_PI * j / n;
                    pts(i * n + j, 0) = domain.radius * std::sin(theta) * std::cos(phi);
                    pts(i * n + j, 1) = domain.radius * std::sin(theta) * std::sin(phi);
                    pts(i * n + j, 2) = domain.radius * std::cos(theta);
                }
            }
            return pts;
        }
    }
    throw std::invalid_argument("grid_points: unknown domain kind");
}

// --------------------------------------------------------------------------
// NDJSON.

namespace {

using nlohmann::json;

json params_to_json(const ParamVector& params) {
    json obj = json::object();
    for (const ParamEntry& e : params.entries()) obj[e.name] = e.value;
    return obj;
}

json active_point_to_json(const ParamVector& params, const Eigen::VectorXd& log_point) {
    json obj = json::object();
    int i = 0;
    for (const ParamEntry& e : params.entries()) {
        if (!e.active) continue;
        obj[e.name] = std::exp(log_point(i));
        ++i;
    }
    return obj;
}

std::vector<double> row_to_vector(const Eigen::MatrixXd& m, int row) {
    std::vector<double> out(m.cols());
    for (int j = 0; j < m.cols(); ++j) out[static_cast<size_t>(j)] = m(row, j);
    return out;
}

std::vector<double> row_to_sd_vector(const Eigen::MatrixXd& var, int row) {
    std::vector<double> out(var.cols());
    for (int j = 0; j < var.cols(); ++j) {
        out[static_cast<size_t>(j)] = std::sqrt(std::max(0.0, var(row, j)));
    }
    return out;
}

}  // namespace

void write_fit_ndjson(const std::string& path, const FitResult& fit) {
    std::string out;
    for (size_t r = 0; r < fit.restarts.size(); ++r) {
        const RestartRecord& rec = fit.restarts[r];
        json line;
        line["record"] = "restart";
        line["index"] = r;
        line["init"] = active_point_to_json(fit.params, rec.initial_log);
        line["final"] = active_point_to_json(fit.params, rec.result.x);
        line["iterations"] = rec.result.trace.size();
        line["evaluations"] = rec.result.evaluations;
        line["loglik"] = -rec.result.objective;
        line["converged"] = rec.result.converged;
        if (!rec.result.failure.empty()) line["failure"] = rec.result.failure;
        out += line.dump();
        out += "\n";
    }
    json summary;
    summary["record"] = "summary";
    summary["success"] = fit.success;
    summary["best_restart"] = fit.best_restart;
    summary["loglik"] = fit.loglik;
    summary["params"] = params_to_json(fit.params);
    out += summary.dump();
    out += "\n";
    write_text_file(path, out);
}

void write_posterior_ndjson(const std::string& path, const PosteriorField& field,
                            const Eigen::MatrixXd& points) {
    std::string out;
    {
        json head;
        head["record"] = "points";
        std::vector<std::vector<double>> locs;
        for (int i = 0; i < points.rows(); ++i) {
            locs.push_back(row_to_vector(points, i));
        }
        head["locations"] = locs;
        head["components"] = field.component_names;
        out += head.dump();
        out += "\n";
    }
    const int t_steps = static_cast<int>(field.times.size());
    for (int k = 0; k < t_steps; ++k) {
        json line;
        line["record"] = "step";
        line["t"] = field.times[k];
        line["total"] = {{"mean", row_to_vector(field.total_mean, k)},
                         {"sd", row_to_sd_vector(field.total_var, k)}};
        json comps = json::object();
        for (size_t c = 0; c < field.component_names.size(); ++c) {
            comps[field.component_names[c]] = {
                {"mean", row_to_vector(field.component_mean[c], k)},
                {"sd", row_to_sd_vector(field.component_var[c], k)}};
        }
        line["components"] = comps;
        out += line.dump();
        out += "\n";
    }
    write_text_file(path, out);
}

void write_posterior_csv(const std::string& path, const PosteriorField& field,
                         const Eigen::MatrixXd& points) {
    const int t_steps = static_cast<int>(field.times.size());
    const int n_points = static_cast<int>(points.rows());
    const int coord_dim = static_cast<int>(points.cols());
    const int n_comp = static_cast<int>(field.component_names.size());
    std::vector<std::string> columns;
    columns.push_back("t");
    for (int d = 0; d < coord_dim; ++d) columns.push_back("x" + std::to_string(d + 1));
    columns.push_back("mean");
    columns.push_back("sd");
    for (const std::string& name : field.component_names) {
        columns.push_back("mean_" + name);
        columns.push_back("sd_" + name);
    }
    Eigen::MatrixXd rows(t_steps * n_points, static_cast<int>(columns.size()));
    for (int k = 0; k < t_steps; ++k) {
        for (int i = 0; i < n_points; ++i) {
            int col = 0;
            Eigen::RowVectorXd row(columns.size());
            row(col++) = field.times[k];
            for (int d = 0; d < coord_dim; ++d) row(col++) = points(i, d);
            row(col++) = field.total_mean(k, i);
            row(col++) = std::sqrt(std::max(0.0, field.total_var(k, i)));
            for (int c = 0; c < n_comp; ++c) {
                row(col++) = field.component_mean[c](k, i);
                row(col++) = std::sqrt(std::max(0.0, field.component_var[c](k, i)));
            }
            rows.row(k * n_points + i) = row;
        }
    }
    write_table_csv(path, columns, rows);
}

void write_amplitude_csv(const std::string& path, const PosteriorField& field,
                         const Eigen::MatrixXd& points) {
    const Eigen::MatrixXd amp = amplitude_maps(field);
    const int coord_dim = static_cast<int>(points.cols());
    std::vector<std::string> columns;
    for (int d = 0; d < coord_dim; ++d) columns.push_back("x" + std::to_string(d + 1));
    for (const std::string& name : field.component_names) columns.push_back("amp_" + name);
    Eigen::MatrixXd rows(points.rows(), coord_dim + amp.cols());
    rows.leftCols(coord_dim) = points;
    rows.rightCols(amp.cols()) = amp;
    write_table_csv(path, columns, rows);
}

}  // namespace oscfield
