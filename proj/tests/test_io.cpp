#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>

#include "oscfield/errors.hpp"
#include "oscfield/io.hpp"
#include "oscfield/simulate.hpp"

using namespace oscfield;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(bool(in));
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return text;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

const char* kDemoConfig = R"(
# one-dimensional demo model
domain.kind = interval
domain.half_length = 0.5
n_modes = 32
sigma_meas = 0.1
diffuse_variance = 25

components = wave
component.wave.gamma = 1
component.wave.chi = 0.01
component.wave.omega_hz = 6
component.wave.kernel.family = matern
component.wave.kernel.nu = 1.5
component.wave.kernel.lengthscale = 0.1
component.wave.kernel.magnitude = 25
)";

}  // namespace

TEST_CASE("config documents parse, track reads, and serialize canonically") {
    ConfigMap cfg = ConfigMap::parse("a = 1\nlist = 1, 2.5 ,3\nname = hello # trailing\n\n# x\n");
    CHECK(cfg.get_int("a") == 1);
    CHECK(cfg.get_doubles("list") == std::vector<double>{1.0, 2.5, 3.0});
    CHECK(cfg.get_string("name") == "hello");
    CHECK(cfg.unused_keys().empty());

    SUBCASE("fallback getters materialize defaults into the document") {
        CHECK(cfg.get_double("tol", 0.125) == 0.125);
        CHECK(cfg.has("tol"));
        CHECK(cfg.serialize().find("tol = 0.125\n") != std::string::npos);
    }

    SUBCASE("serialization is sorted and value-preserving") {
        const std::string text = cfg.serialize();
        CHECK(text == "a = 1\nlist = 1, 2.5 ,3\nname = hello\n");
        ConfigMap again = ConfigMap::parse(text);
        CHECK(again.get_string("list") == "1, 2.5 ,3");
        again.get_int("a");
        again.get_string("name");
        CHECK(again.serialize() == text);
    }

    SUBCASE("unused keys are reported") {
        ConfigMap c2 = ConfigMap::parse("good = 1\ntypo_key = 2\n");
        c2.get_int("good");
        CHECK(c2.unused_keys() == std::vector<std::string>{"typo_key"});
        CHECK_THROWS_AS(c2.require_all_used(), ConfigError);
        CHECK_THROWS_WITH_AS(c2.require_all_used(),
                             doctest::Contains("typo_key"), ConfigError);
    }
}

TEST_CASE("config errors carry the source location and key path") {
    CHECK_THROWS_WITH_AS(ConfigMap::parse("novalue\n", "f.cfg"), doctest::Contains("f.cfg:1"),
                         ConfigError);
    CHECK_THROWS_AS(ConfigMap::parse("a = 1\na = 2\n"), ConfigError);

    ConfigMap cfg = ConfigMap::parse("x = abc\n", "g.cfg");
    CHECK_THROWS_WITH_AS(cfg.get_double("x"), doctest::Contains("g.cfg:1"), ConfigError);
    CHECK_THROWS_WITH_AS(cfg.get_double("x"), doctest::Contains("`x`"), ConfigError);
    CHECK_THROWS_AS(cfg.get_string("missing"), ConfigError);
    CHECK_THROWS_AS(cfg.get_bool("x"), ConfigError);
    CHECK_THROWS_AS(ConfigMap::load("/nonexistent/path.cfg"), ConfigError);
}

TEST_CASE("model documents round trip through config mapping") {
    ConfigMap cfg = ConfigMap::parse(kDemoConfig, "demo.cfg");
    ModelSpec model = model_from_config(cfg);
    cfg.require_all_used();

    CHECK(model.domain.kind == DomainKind::interval);
    CHECK(model.domain.half_length == 0.5);
    CHECK(model.n_modes == 32);
    CHECK(model.meas_noise_var == doctest::Approx(0.01).epsilon(1e-15));
    CHECK(model.diffuse_variance == 25.0);
    REQUIRE(model.components.size() == 1);
    const ComponentSpec& comp = model.components[0];
    CHECK(comp.name == "wave");
    CHECK(comp.gamma == 1.0);
    CHECK(comp.chi == 0.01);
    CHECK(comp.omega.at(0.0) == doctest::Approx(2.0 * M_PI * 6.0).epsilon(1e-15));
    CHECK(comp.kernel.family == KernelFamily::matern);
    CHECK(comp.kernel.nu == 1.5);
    CHECK(comp.kernel.length_scale == 0.1);
    CHECK(comp.kernel.magnitude == 25.0);

    SUBCASE("serialize and reparse reproduces the model exactly") {
        ConfigMap out;
        model_to_config(model, out);
        ConfigMap in = ConfigMap::parse(out.serialize());
        ModelSpec model2 = model_from_config(in);
        CHECK(model2.domain.half_length == model.domain.half_length);
        CHECK(model2.n_modes == model.n_modes);
        CHECK(model2.meas_noise_var == doctest::Approx(model.meas_noise_var).epsilon(1e-15));
        REQUIRE(model2.components.size() == 1);
        CHECK(model2.components[0].omega.at(0.0) == comp.omega.at(0.0));
        CHECK(model2.components[0].kernel.length_scale == comp.kernel.length_scale);
        CHECK(model2.components[0].kernel.magnitude == comp.kernel.magnitude);
    }

    SUBCASE("every domain kind round trips") {
        for (DomainSpec domain :
             {DomainSpec::interval(2.0), DomainSpec::rectangle(1.0, 2.0), DomainSpec::disk(3.0),
              DomainSpec::sphere(1.5)}) {
            ModelSpec m = model;
            m.domain = domain;
            ConfigMap out;
            model_to_config(m, out);
            ConfigMap in = ConfigMap::parse(out.serialize());
            ModelSpec m2 = model_from_config(in);
            CHECK(m2.domain.kind == domain.kind);
            CHECK(m2.domain.half_length == domain.half_length);
            CHECK(m2.domain.half_length_x == domain.half_length_x);
            CHECK(m2.domain.half_length_y == domain.half_length_y);
            CHECK(m2.domain.radius == domain.radius);
        }
    }
}

TEST_CASE("model config validation failures name the offending key") {
    SUBCASE("missing required key") {
        ConfigMap cfg = ConfigMap::parse("domain.kind = interval\n", "m.cfg");
        CHECK_THROWS_WITH_AS(model_from_config(cfg), doctest::Contains("domain.half_length"),
                             ConfigError);
    }
    SUBCASE("bad domain kind") {
        ConfigMap cfg = ConfigMap::parse("domain.kind = hexagon\n", "m.cfg");
        CHECK_THROWS_WITH_AS(model_from_config(cfg), doctest::Contains("domain.kind"),
                             ConfigError);
    }
    SUBCASE("conflicting frequency forms") {
        std::string text = kDemoConfig;
        text += "component.wave.omega = 3\n";
        ConfigMap cfg = ConfigMap::parse(text, "m.cfg");
        CHECK_THROWS_WITH_AS(model_from_config(cfg), doctest::Contains("omega"), ConfigError);
    }
    SUBCASE("invalid parameter values surface as ConfigError") {
        std::string text = kDemoConfig;
        const size_t pos = text.find("component.wave.kernel.magnitude = 25");
        REQUIRE(pos != std::string::npos);
        text.replace(pos, std::string("component.wave.kernel.magnitude = 25").size(),
                     "component.wave.kernel.magnitude = -1");
        ConfigMap cfg = ConfigMap::parse(text, "m.cfg");
        CHECK_THROWS_AS(model_from_config(cfg), ConfigError);
    }
}

TEST_CASE("inline and tabulated frequency schedules agree") {
    std::string text = kDemoConfig;
    text += "component.chirp.omega_knots = 0,0.5\n";
    text += "component.chirp.omega_values = 6,9\n";
    text += "component.chirp.kernel.lengthscale = 0.2\n";
    text += "component.chirp.kernel.magnitude = 1\n";
    text += "component.chirp.gamma = 0.5\n";
    const size_t pos = text.find("components = wave");
    REQUIRE(pos != std::string::npos);
    std::string with_chirp = text;
    with_chirp.replace(pos, std::string("components = wave").size(), "components = wave,chirp");

    ConfigMap cfg = ConfigMap::parse(with_chirp, "m.cfg");
    ModelSpec model = model_from_config(cfg);
    REQUIRE(model.components.size() == 2);
    const FrequencySchedule& omega = model.components[1].omega;
    CHECK(omega.at(-1.0) == 6.0);
    CHECK(omega.at(0.25) == 6.0);
    CHECK(omega.at(0.5) == 9.0);
    CHECK(omega.at(2.0) == 9.0);

    const std::string csv_path = temp_path("oscfield_io_schedule.csv");
    {
        std::ofstream out(csv_path);
        out << "t,omega\n0,6\n0.5,9\n";
    }
    FrequencySchedule from_csv = read_schedule_csv(csv_path);
    CHECK(from_csv.knots() == omega.knots());
    CHECK(from_csv.values() == omega.values());

    SUBCASE("an omega_csv reference is folded inline for self-contained manifests") {
        std::string csv_cfg = with_chirp;
        const size_t kpos = csv_cfg.find("component.chirp.omega_knots = 0,0.5\n");
        REQUIRE(kpos != std::string::npos);
        csv_cfg.erase(kpos, std::string("component.chirp.omega_knots = 0,0.5\n").size());
        const size_t vpos = csv_cfg.find("component.chirp.omega_values = 6,9\n");
        REQUIRE(vpos != std::string::npos);
        csv_cfg.erase(vpos, std::string("component.chirp.omega_values = 6,9\n").size());
        csv_cfg += "component.chirp.omega_csv = " + csv_path + "\n";

        ConfigMap c = ConfigMap::parse(csv_cfg, "m.cfg");
        ModelSpec m = model_from_config(c);
        CHECK(m.components[1].omega.knots() == omega.knots());
        CHECK(!c.has("component.chirp.omega_csv"));
        CHECK(c.get_string("component.chirp.omega_knots") == "0,0.5");

        ConfigMap again = ConfigMap::parse(c.serialize(), "manifest.cfg");
        ModelSpec m2 = model_from_config(again);
        CHECK(m2.components[1].omega.knots() == omega.knots());
        CHECK(m2.components[1].omega.values() == omega.values());
    }

    CHECK_THROWS_AS(read_schedule_csv("/nonexistent/sched.csv"), ConfigError);
    {
        std::ofstream out(csv_path);
        out << "time,w\n0,6\n";
    }
    CHECK_THROWS_WITH_AS(read_schedule_csv(csv_path), doctest::Contains("t,omega"), ConfigError);
    std::remove(csv_path.c_str());
}

TEST_CASE("observation CSV round trips exactly, including empty steps") {
    ObservationBatch data;
    data.times = {0.0, 0.1, 0.2};
    data.locations.resize(3);
    data.values.resize(3);
    data.locations[0] = Eigen::MatrixXd(2, 1);
    data.locations[0] << -0.25, 1.0 / 3.0;
    data.values[0] = Eigen::VectorXd(2);
    data.values[0] << 1.5, -2.25e-7;
    data.locations[1] = Eigen::MatrixXd(0, 1);  // prediction-only step
    data.values[1] = Eigen::VectorXd(0);
    data.locations[2] = Eigen::MatrixXd(1, 1);
    data.locations[2] << 0.1;
    data.values[2] = Eigen::VectorXd(1);
    data.values[2] << 3.0;

    const std::string path = temp_path("oscfield_io_obs.csv");
    write_observations_csv(path, data, 1);

    const std::string text = slurp(path);
    CHECK(text.substr(0, text.find('\n')) == "t,x1,y");
    CHECK(text.find("0.1,,") != std::string::npos);  // marker row for the empty step

    int dim = 0;
    ObservationBatch back = read_observations_csv(path, &dim);
    CHECK(dim == 1);
    REQUIRE(back.n_steps() == 3);
    CHECK(back.times == data.times);
    CHECK(back.values[1].size() == 0);
    CHECK(back.locations[0](1, 0) == data.locations[0](1, 0));  // bitwise round trip
    CHECK(back.values[0](1) == data.values[0](1));
    CHECK(back.values[2](0) == 3.0);

    SUBCASE("rewriting the parsed batch reproduces the file byte for byte") {
        const std::string path2 = temp_path("oscfield_io_obs2.csv");
        write_observations_csv(path2, back, 1);
        CHECK(slurp(path2) == text);
        std::remove(path2.c_str());
    }
    std::remove(path.c_str());
}

TEST_CASE("observation CSV rejects malformed input with line numbers") {
    const std::string path = temp_path("oscfield_io_bad.csv");
    auto write_and_read = [&](const std::string& text) {
        std::ofstream out(path);
        out << text;
        out.close();
        return read_observations_csv(path);
    };
    CHECK_THROWS_WITH_AS(write_and_read("a,b\n"), doctest::Contains("t,x1"), DataError);
    CHECK_THROWS_WITH_AS(write_and_read("t,x1,y\n"), doctest::Contains("no data"), DataError);
    CHECK_THROWS_WITH_AS(write_and_read("t,x1,y\n0,0,1\n0,0\n"), doctest::Contains(":3"),
                         DataError);
    CHECK_THROWS_WITH_AS(write_and_read("t,x1,y\n0.2,0,1\n0.1,0,1\n"),
                         doctest::Contains("decreases"), DataError);
    CHECK_THROWS_WITH_AS(write_and_read("t,x1,y\n0,zzz,1\n"), doctest::Contains("coordinate"),
                         DataError);
    CHECK_THROWS_AS(read_observations_csv("/nonexistent/data.csv"), DataError);

    SUBCASE("3-D schema and grouping by equal consecutive times") {
        std::ofstream out(path);
        out << "t,x1,x2,x3,y\n0,1,0,0,5\n0,0,1,0,6\n1,0,0,1,7\n";
        out.close();
        int dim = 0;
        ObservationBatch b = read_observations_csv(path, &dim);
        CHECK(dim == 3);
        REQUIRE(b.n_steps() == 2);
        CHECK(b.values[0].size() == 2);
        CHECK(b.values[1].size() == 1);
        CHECK(b.locations[1](0, 2) == 1.0);
    }
    std::remove(path.c_str());
}

TEST_CASE("simulated observations survive a CSV round trip bitwise") {
    ConfigMap cfg = ConfigMap::parse(kDemoConfig, "demo.cfg");
    ModelSpec model = model_from_config(cfg);
    SimulationPlan plan = scattered_plan(model, 0.0, 1.0, 20, 5, 77);
    SimulationResult sim = simulate(plan);

    const std::string path = temp_path("oscfield_io_sim.csv");
    write_observations_csv(path, sim.observations, 1);
    ObservationBatch back = read_observations_csv(path);
    REQUIRE(back.n_steps() == sim.observations.n_steps());
    for (int k = 0; k < back.n_steps(); ++k) {
        CHECK(back.times[k] == sim.observations.times[k]);
        CHECK(back.locations[k] == sim.observations.locations[k]);
        CHECK(back.values[k] == sim.observations.values[k]);
    }
    std::remove(path.c_str());
}

TEST_CASE("simulation and fit options parse with materialized defaults") {
    ConfigMap cfg = ConfigMap::parse(std::string(kDemoConfig) + "sim.seed = 42\n", "demo.cfg");
    ModelSpec model = model_from_config(cfg);
    SimulationPlan plan = sim_plan_from_config(cfg, model);
    CHECK(plan.seed == 42);
    CHECK(plan.times.size() == 100);
    CHECK(plan.times.front() == 0.0);
    CHECK(plan.locations[0].rows() == 25);
    CHECK(cfg.get_int("sim.n_steps") == 100);  // default materialized

    FitOptions fopts = fit_options_from_config(cfg);
    CHECK(fopts.restarts == 10);
    CHECK(fopts.include_template_start == true);
    CHECK(cfg.has("fit.max_iterations"));
    cfg.require_all_used();

    ConfigMap override_cfg =
        ConfigMap::parse("fit.restarts = 3\nfit.max_evaluations = 123\nfit.seed = 9\n");
    FitOptions f2 = fit_options_from_config(override_cfg);
    CHECK(f2.restarts == 3);
    CHECK(f2.optimizer.max_evaluations == 123);
    CHECK(f2.seed == 9);
}

TEST_CASE("evaluation grids respect the domain geometry") {
    const Eigen::MatrixXd interval = grid_points(DomainSpec::interval(0.5), 11);
    CHECK(interval.rows() == 11);
    CHECK(interval.cols() == 1);
    CHECK(interval(0, 0) > -0.5);
    CHECK(interval(10, 0) < 0.5);
    CHECK(interval(5, 0) == doctest::Approx(0.0).epsilon(1e-15).scale(1.0));

    const Eigen::MatrixXd rect = grid_points(DomainSpec::rectangle(1.0, 2.0), 8);
    CHECK(rect.rows() == 64);
    CHECK(rect.cols() == 2);
    CHECK(rect.col(0).minCoeff() > -1.0);
    CHECK(rect.col(1).maxCoeff() < 2.0);

    const DomainSpec disk = DomainSpec::disk(1.0);
    const Eigen::MatrixXd dpts = grid_points(disk, 21);
    CHECK(dpts.rows() > 0);
    CHECK(dpts.rows() < 21 * 21);
    for (int i = 0; i < dpts.rows(); ++i) {
        CHECK(dpts.row(i).norm() < 1.0);
    }

    const DomainSpec sphere = DomainSpec::sphere(2.0);
    const Eigen::MatrixXd spts = grid_points(sphere, 6);
    CHECK(spts.rows() == 36);
    CHECK(spts.cols() == 3);
    for (int i = 0; i < spts.rows(); ++i) {
        CHECK(spts.row(i).norm() == doctest::Approx(2.0).epsilon(1e-12));
    }
}

TEST_CASE("table CSV writes named numeric columns") {
    Eigen::MatrixXd rows(2, 3);
    rows << 0.5, 1.0, -2.0, 0.25, 3.0, 4.0;
    const std::string path = temp_path("oscfield_io_table.csv");
    write_table_csv(path, {"nu_x", "nu_t", "density"}, rows);
    CHECK(slurp(path) == "nu_x,nu_t,density\n0.5,1,-2\n0.25,3,4\n");
    CHECK_THROWS_AS(write_table_csv(path, {"one"}, rows), std::invalid_argument);
    std::remove(path.c_str());
}

TEST_CASE("fit and posterior reports emit well-formed NDJSON") {
    ConfigMap cfg = ConfigMap::parse(kDemoConfig, "demo.cfg");
    ModelSpec model = model_from_config(cfg);
    model.n_modes = 8;
    SimulationPlan plan = scattered_plan(model, 0.0, 0.5, 12, 4, 5);
    SimulationResult sim = simulate(plan);

    FitOptions fopts;
    fopts.restarts = 1;
    fopts.include_template_start = true;
    fopts.optimizer.max_iterations = 2;
    fopts.optimizer.max_evaluations = 60;
    FitResult fit_res = fit(sim.observations, model, fopts);

    const std::string fit_path = temp_path("oscfield_io_fit.ndjson");
    write_fit_ndjson(fit_path, fit_res);
    {
        std::ifstream in(fit_path);
        std::string line;
        int restarts = 0, summaries = 0;
        while (std::getline(in, line)) {
            const auto parsed = nlohmann::json::parse(line);
            if (parsed.at("record") == "restart") {
                ++restarts;
                CHECK(parsed.at("init").contains("wave.gamma"));
                CHECK(parsed.at("final").contains("wave.l"));
                CHECK(parsed.at("loglik").is_number());
            } else {
                ++summaries;
                CHECK(parsed.at("record") == "summary");
                CHECK(parsed.at("params").contains("sigma_meas"));
                CHECK(parsed.at("best_restart") == 0);
            }
        }
        CHECK(restarts == 1);
        CHECK(summaries == 1);
    }
    std::remove(fit_path.c_str());

    BasisSet basis = build_basis(model.domain, model.max_modes());
    DiscreteSystem sys =
        assemble_system(model, basis, sim.observations.times, sim.observations.locations);
    FilterResult fr = filter_pass(sys, sim.observations, stationary_prior(sys));
    std::vector<GaussianBelief> smoothed = smooth_pass(sys, fr);
    const Eigen::MatrixXd pts = grid_points(model.domain, 9);
    PosteriorField field = posterior_at(smoothed, sys, basis, pts);

    const std::string post_path = temp_path("oscfield_io_post.ndjson");
    write_posterior_ndjson(post_path, field, pts);
    {
        std::ifstream in(post_path);
        std::string line;
        REQUIRE(std::getline(in, line));
        auto head = nlohmann::json::parse(line);
        CHECK(head.at("record") == "points");
        CHECK(head.at("locations").size() == 9);
        int steps = 0;
        while (std::getline(in, line)) {
            const auto parsed = nlohmann::json::parse(line);
            CHECK(parsed.at("record") == "step");
            CHECK(parsed.at("total").at("mean").size() == 9);
            CHECK(parsed.at("components").at("wave").at("sd").size() == 9);
            ++steps;
        }
        CHECK(steps == sys.n_steps());
    }
    std::remove(post_path.c_str());

    const std::string csv_path = temp_path("oscfield_io_field.csv");
    write_posterior_csv(csv_path, field, pts);
    {
        const std::string text = slurp(csv_path);
        CHECK(text.substr(0, text.find('\n')) == "t,x1,mean,sd,mean_wave,sd_wave");
        int lines = 0;
        for (char c : text) lines += c == '\n';
        CHECK(lines == 1 + sys.n_steps() * 9);
    }
    std::remove(csv_path.c_str());

    const std::string amp_path = temp_path("oscfield_io_amp.csv");
    write_amplitude_csv(amp_path, field, pts);
    {
        const std::string text = slurp(amp_path);
        CHECK(text.substr(0, text.find('\n')) == "x1,amp_wave");
        int lines = 0;
        for (char c : text) lines += c == '\n';
        CHECK(lines == 1 + 9);
    }
    std::remove(amp_path.c_str());
}

TEST_CASE("amplitude map calibrates a sinusoidal posterior mean") {
    PosteriorField field;
    field.component_names = {"osc"};
    const int t_steps = 400, n_points = 3;
    field.times.resize(t_steps);
    Eigen::MatrixXd mean(t_steps, n_points);
    for (int k = 0; k < t_steps; ++k) {
        const double t = k * 2.0 * M_PI / t_steps;
        field.times[k] = t;
        mean(k, 0) = 2.0 * std::sin(5.0 * t);   // amplitude 2
        mean(k, 1) = 0.5 * std::cos(3.0 * t);   // amplitude 0.5
        mean(k, 2) = 0.0;
    }
    field.component_mean = {mean};
    field.component_var = {Eigen::MatrixXd::Zero(t_steps, n_points)};
    field.total_mean = mean;
    field.total_var = Eigen::MatrixXd::Zero(t_steps, n_points);

    const Eigen::MatrixXd amp = amplitude_maps(field);
    REQUIRE(amp.rows() == 3);
    REQUIRE(amp.cols() == 1);
    CHECK(amp(0, 0) == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(amp(1, 0) == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(amp(2, 0) == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
}
