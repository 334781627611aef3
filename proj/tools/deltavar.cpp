// deltavar command line: generate | fit | run | verify.
//
// Exit codes: 0 success, 1 a check failed or a scenario aborted, 2 error.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "deltavar/csv.hpp"
#include "deltavar/experiments.hpp"
#include "deltavar/verify.hpp"

namespace {

using namespace deltavar;

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> fit_seed;
    std::optional<std::string> scenario;
    std::optional<std::string> out;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("-c,--config", f.config_path, "JSON experiment config")->check(CLI::ExistingFile);
    cmd->add_option("--seed", f.seed, "dataset seed (default 42)");
    cmd->add_option("--fit-seed", f.fit_seed, "optimizer restart seed (default 1)");
    cmd->add_option("-o,--out", f.out, "output directory");
}

ExperimentConfig resolve(const CommonFlags& f) {
    ExperimentConfig cfg = f.config_path.empty() ? default_config() : load_config(f.config_path);
    if (f.scenario) cfg.scenario = scenario_from_string(*f.scenario);
    if (f.seed) cfg.data.seed = *f.seed;
    if (f.fit_seed) cfg.fit.seed = *f.fit_seed;
    if (f.out) cfg.output = *f.out;
    return cfg;
}

int cmd_generate(const CommonFlags& f) {
    ExperimentConfig cfg = resolve(f);
    cfg.validate();
    const Dataset data = generate_dataset(cfg);
    std::filesystem::create_directories(cfg.output);
    const auto path = cfg.output / "dataset.csv";
    write_dataset(path, data, provenance_comment(cfg));
    std::cout << "wrote " << data.size() << " samples to " << path.string() << '\n';
    return 0;
}

int cmd_fit(const CommonFlags& f, const std::string& model_arg, const std::string& data_path) {
    ExperimentConfig cfg = resolve(f);
    if (model_arg.empty()) throw ValidationError("fit: --model is required");
    const auto entry = [&]() -> ModelEntry {
        if (model_arg.front() == '{') return {"model", model_spec_from_json(model_arg)};
        if (model_arg.ends_with(".json")) {
            std::ifstream in(model_arg);
            if (!in) throw IoError("cannot open " + model_arg);
            std::ostringstream text;
            text << in.rdbuf();
            return {std::filesystem::path(model_arg).stem().string(), model_spec_from_json(text.str())};
        }
        return {canonical_tag(model_arg), named_model(model_arg)};
    }();
    cfg.scenario = Scenario::custom;
    cfg.models = {entry};
    cfg.validate();

    const Dataset data = data_path.empty() ? generate_dataset(cfg) : read_dataset(data_path);
    const ScenarioResult result = run_scenario(cfg, data);
    emit_csv(result, cfg.output);
    std::cout << format_report(result);
    for (const ModelResult& m : result.models) {
        for (const std::string& w : m.fit.warnings) std::cout << "warning: " << m.id << ": " << w << '\n';
        std::cout << "theta_hat:";
        for (Eigen::Index i = 0; i < m.fit.theta_hat.size(); ++i) std::cout << ' ' << format_double(m.fit.theta_hat(i));
        std::cout << '\n';
    }
    std::cout << "wrote " << (cfg.output / "predictions.csv").string() << '\n';
    return result.aborted ? 1 : 0;
}

int cmd_run(const CommonFlags& f) {
    const ExperimentConfig cfg = resolve(f);
    const ScenarioResult result = run_scenario(cfg);
    emit_csv(result, cfg.output);
    std::cout << format_report(result);
    std::cout << "wrote " << (cfg.output / "predictions.csv").string() << " and summary.csv\n";
    return result.passed() ? 0 : 1;
}

int cmd_verify(const std::string& suite, std::uint64_t seed) {
    const std::vector<Check> checks = run_verify_suite(suite, seed);
    bool ok = true;
    for (const Check& c : checks) {
        const bool counts = c.required;
        ok = ok && (c.pass || !counts);
        std::cout << (c.pass ? "PASS " : (counts ? "FAIL " : "NOTE ")) << c.name;
        if (!c.detail.empty()) std::cout << ": " << c.detail;
        std::cout << '\n';
    }
    std::cout << (ok ? "verify: all checks passed\n" : "verify: FAILED\n");
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"delta-method prediction uncertainty for regression models"};
    app.require_subcommand(1);

    CommonFlags gen_flags, fit_flags, run_flags;
    auto* gen = app.add_subcommand("generate", "write a simulated dataset.csv");
    add_common(gen, gen_flags);

    auto* fit_cmd = app.add_subcommand("fit", "fit one model and report its prediction variance");
    add_common(fit_cmd, fit_flags);
    std::string model_arg, data_path;
    fit_cmd->add_option("-m,--model", model_arg, "model tag, inline JSON or a .json file")->required();
    fit_cmd->add_option("-d,--data", data_path, "x,y CSV (default: simulate from the config)")
        ->check(CLI::ExistingFile);

    auto* run = app.add_subcommand("run", "run a full scenario and write CSV results");
    add_common(run, run_flags);
    run->add_option("-s,--scenario", run_flags.scenario, "cat1_nonlinear | cat2_linear | cat2_mlp | custom");

    auto* verify = app.add_subcommand("verify", "run self-check suites");
    std::string suite = "fast";
    std::uint64_t verify_seed = 7;
    verify->add_option("--suite", suite, "linalg | jacobian | category1 | category2 | nonlinear | fast | all");
    verify->add_option("--seed", verify_seed, "seed for the randomized checks");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) return cmd_generate(gen_flags);
        if (*fit_cmd) return cmd_fit(fit_flags, model_arg, data_path);
        if (*run) return cmd_run(run_flags);
        if (*verify) return cmd_verify(suite, verify_seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}
