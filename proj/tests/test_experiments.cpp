#include <filesystem>
#include <fstream>
#include <sstream>

#include "deltavar/csv.hpp"
#include "deltavar/experiments.hpp"
#include "test_helpers.hpp"

using namespace deltavar;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("deltavar_test_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("dataset generation") {
    const ExperimentConfig cfg = default_config();
    const Dataset a = generate_dataset(cfg);
    const Dataset b = generate_dataset(cfg);
    REQUIRE(a.size() == 200);
    CHECK(a.inputs == b.inputs);
    CHECK(a.outputs == b.outputs);

    double sum = 0;
    double sq = 0;
    for (std::size_t n = 0; n < a.size(); ++n) {
        CHECK(a.inputs[n] >= -0.6);
        CHECK(a.inputs[n] < 0.6);
        const double e = a.outputs[n] - magic_formula(a.inputs[n], cfg.magic);
        sum += e;
        sq += e * e;
    }
    const double mean = sum / 200;
    const double var = sq / 200 - mean * mean;
    CHECK(var >= 0.006);
    CHECK(var <= 0.015);

    ExperimentConfig other = cfg;
    other.data.seed = 43;
    CHECK(generate_dataset(other).inputs != a.inputs);

    ExperimentConfig quiet = cfg;
    quiet.data.noise_variance = 0;
    const Dataset q = generate_dataset(quiet);
    CHECK(q.inputs == a.inputs);  // the noise draw does not shift the x stream
    for (std::size_t n = 0; n < q.size(); ++n) CHECK(q.outputs[n] == magic_formula(q.inputs[n], quiet.magic));
}

TEST_CASE("evaluation grid") {
    ExperimentConfig cfg = default_config();
    const std::vector<double> g = eval_grid(cfg);
    REQUIRE(g.size() == 100);
    CHECK(g.front() == -0.6);
    CHECK(g.back() == 0.6);
    CHECK(std::is_sorted(g.begin(), g.end()));
    cfg.eval.N_v = 1;
    CHECK(eval_grid(cfg) == std::vector<double>{0.0});
}

TEST_CASE("config parsing") {
    const ExperimentConfig cfg = parse_config(R"({
        "scenario": "cat2_mlp",
        "data": {"N": 50, "x_range": [-1, 1], "noise_variance": 0.02, "seed": 9},
        "fit": {"restarts": 3, "seed": 5},
        "eval": {"N_v": 11},
        "mlp_max_width": 4,
        "comparison_lambda": "per_model",
        "output": "results"
    })");
    CHECK(cfg.scenario == Scenario::cat2_mlp);
    CHECK(cfg.data.N == 50);
    CHECK(cfg.data.x_lo == -1);
    CHECK(cfg.data.noise_variance == 0.02);
    CHECK(cfg.fit.restarts == 3);
    CHECK(cfg.fit.seed == 5);
    CHECK(cfg.eval.N_v == 11);
    CHECK(cfg.comparison_lambda == ComparisonLambda::per_model);
    CHECK(cfg.output == "results");
    CHECK(scenario_models(cfg).size() == 3);

    const ExperimentConfig back = parse_config(config_to_json(cfg));
    CHECK(config_to_json(back) == config_to_json(cfg));

    const ExperimentConfig custom = parse_config(R"({
        "scenario": "custom",
        "models": ["canonical_linear",
                   {"id": "line", "kind": "linear_in_parameters",
                    "basis": [{"type": "constant"}, {"type": "power", "exponent": 1}]}]
    })");
    REQUIRE(custom.models.size() == 2);
    CHECK(custom.models[1].id == "line");
    CHECK(custom.models[1].spec.param_count() == 2);
    CHECK(parse_config(config_to_json(custom)).models[1].spec.param_count() == 2);

    const ModelSpec mlp = model_spec_from_json(model_spec_to_json(named_model("mlp_hidden:3")));
    CHECK(mlp.param_count() == 10);

    CHECK_THROWS_AS(parse_config("{"), ValidationError);
    CHECK_THROWS_AS(parse_config(R"({"scenaro": "cat1_nonlinear"})"), ValidationError);
    CHECK_THROWS_AS(parse_config(R"({"scenario": "nope"})"), ValidationError);
    CHECK_THROWS_AS(parse_config(R"({"data": {"N": "many"}})"), ValidationError);
    CHECK_THROWS_AS(parse_config(R"({"comparison_lambda": "mine"})"), ValidationError);
    CHECK_THROWS_AS(parse_config(R"({"data": {"x_range": [1, -1]}})").validate(), ValidationError);
    CHECK_THROWS_AS(parse_config(R"({"scenario": "custom"})").validate(), ValidationError);
    CHECK_THROWS_AS(parse_config(R"({"models": ["canonical_linear"]})").validate(), ValidationError);
    CHECK_THROWS_AS(parse_config(R"({"scenario": "cat2_linear", "data": {"N": 3}})").validate(), ValidationError);
    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), IoError);
}

TEST_CASE("dataset CSV round trip") {
    const auto dir = scratch("csv");
    std::filesystem::create_directories(dir);
    const Dataset d = generate_dataset(default_config());
    write_dataset(dir / "d.csv", d, "note");
    const Dataset r = read_dataset(dir / "d.csv");
    CHECK(r.inputs == d.inputs);
    CHECK(r.outputs == d.outputs);
    CHECK(slurp(dir / "d.csv").rfind("# note\nx,y\n", 0) == 0);

    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(-2.5e-10) == "-2.5e-10");

    std::ofstream(dir / "bad.csv") << "a,b\n1,2\n";
    CHECK_THROWS_AS(read_dataset(dir / "bad.csv"), ValidationError);
    std::ofstream(dir / "nan.csv") << "x,y\n1,nan\n";
    CHECK_THROWS(read_dataset(dir / "nan.csv"));
    CHECK_THROWS_AS(read_dataset(dir / "missing.csv"), IoError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("linear Category-2 scenario") {
    const ScenarioResult r = run_scenario(default_config(Scenario::cat2_linear));
    REQUIRE_FALSE(r.aborted);
    REQUIRE(r.models.size() == 4);
    for (const Check& c : r.checks) {
        INFO(c.name << ": " << c.detail);
        CHECK(c.pass);
    }
    CHECK(r.passed());
    for (std::size_t k = 1; k < r.cat2.size(); ++k) {
        CHECK(r.cat2[k].lambda == r.models[0].fit.lambda_N);
        CHECK(r.cat2[k].increase > 0);
        CHECK(r.models[k].uncertainty.information_rank == r.models[k].model.param_count());
    }
}

TEST_CASE("scenario output is byte-stable") {
    ExperimentConfig cfg = default_config(Scenario::cat2_linear);
    const auto a = scratch("emit_a");
    const auto b = scratch("emit_b");
    emit_csv(run_scenario(cfg), a);
    emit_csv(run_scenario(cfg), b);
    for (const char* f : {"dataset.csv", "predictions.csv", "summary.csv"}) {
        INFO(f);
        CHECK(slurp(a / f) == slurp(b / f));
    }
    const std::string summary = slurp(a / "summary.csv");
    CHECK(summary.rfind("# deltavar scenario=cat2_linear data_seed=42 fit_seed=1\n"
                        "model_id,n_params,lambda_N,info_rank,mean_variance\n",
                        0) == 0);
    // 100 grid points for each of the four models, plus comment and header.
    const std::string pred = slurp(a / "predictions.csv");
    CHECK(std::count(pred.begin(), pred.end(), '\n') == 402);
    std::filesystem::remove_all(a);
    std::filesystem::remove_all(b);
}

TEST_CASE("custom scenario on a supplied dataset") {
    ExperimentConfig cfg = default_config(Scenario::custom);
    cfg.models = {{"line", ModelSpec::linear({BasisFunction::constant(), BasisFunction::power(1)})}};
    const Dataset d{{0, 1, 2, 3}, {1, 3, 5, 7}};
    const ScenarioResult r = run_scenario(cfg, d);
    REQUIRE(r.models.size() == 1);
    CHECK(r.models[0].fit.theta_hat(0) == doctest::Approx(1));
    CHECK(r.models[0].fit.theta_hat(1) == doctest::Approx(2));
    // Noise-free fit: lambda_N and every variance vanish.
    CHECK(r.models[0].prediction.mean_variance == doctest::Approx(0).scale(1e-20));
    CHECK(r.passed());

    cfg.models = {{"quad", named_model("over_cat2_linear:3")}};
    CHECK_THROWS_AS(run_scenario(cfg, d), ValidationError);
}
