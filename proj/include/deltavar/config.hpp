#pragma once

// Experiment configuration, read from a JSON file. Every field has a default
// matching the magic-formula simulation study, so an empty object is valid.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "deltavar/estimation.hpp"
#include "deltavar/models.hpp"

namespace deltavar {

enum class Scenario { cat1_nonlinear, cat2_linear, cat2_mlp, custom };

std::string_view to_string(Scenario scenario);
Scenario scenario_from_string(std::string_view name);

/// Noise variance behind the Category-2 mean-variance comparisons: the first
/// (canonical) model's lambda_N for every model, or each model's own.
enum class ComparisonLambda { canonical, per_model };

std::string_view to_string(ComparisonLambda mode);
ComparisonLambda comparison_lambda_from_string(std::string_view name);

struct DataConfig {
    std::size_t N = 200;
    double x_lo = -0.6;
    double x_hi = 0.6;
    double noise_variance = 0.01;
    std::uint64_t seed = 42;
};

struct EvalConfig {
    std::size_t N_v = 100;  // uniform grid over [x_lo, x_hi], endpoints included
};

struct ModelEntry {
    std::string id;
    ModelSpec spec;
};

struct ExperimentConfig {
    Scenario scenario = Scenario::cat1_nonlinear;
    DataConfig data;
    MagicFormulaParams magic;
    FitOptions fit;
    EvalConfig eval;
    /// Only read by the custom scenario; the others fix their own model list.
    std::vector<ModelEntry> models;
    int mlp_max_width = 8;
    double nonlinear_tolerance = 0.05;  // relative, Category-1 curve agreement
    double loss_gap_tolerance = 0.01;   // relative, Category-1 fit losses
    /// Relative cutoff for information matrices; unset means N * n_theta * eps.
    std::optional<double> rank_tolerance;
    ComparisonLambda comparison_lambda = ComparisonLambda::canonical;
    std::filesystem::path output = "out";

    /// Throws ValidationError on inconsistent settings.
    void validate() const;
};

ExperimentConfig default_config(Scenario scenario = Scenario::cat1_nonlinear);

/// Models run by the configured scenario, in output order.
std::vector<ModelEntry> scenario_models(const ExperimentConfig& cfg);

ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& cfg);

std::string model_spec_to_json(const ModelSpec& model);
ModelSpec model_spec_from_json(std::string_view json_text);

}  // namespace deltavar
