#pragma once

// End-to-end scenarios on simulated magic-formula data: generate a dataset,
// fit every model of the scenario, compute delta-method variances on a
// uniform grid, compare the models and write CSV.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "deltavar/config.hpp"
#include "deltavar/uncertainty.hpp"

namespace deltavar {

/// x_n ~ U[x_lo, x_hi], y_n = magic(x_n) + e_n with e_n ~ N(0, noise_variance).
/// Draws alternate per sample (x_n, then e_n) from Rng(cfg.data.seed).
Dataset generate_dataset(const ExperimentConfig& cfg);

/// N_v evenly spaced points over [x_lo, x_hi] (endpoints included; the
/// midpoint when N_v = 1).
std::vector<double> eval_grid(const ExperimentConfig& cfg);

struct ModelResult {
    std::string id;
    ModelSpec model;
    FitResult fit;
    UncertaintyReport uncertainty;
    PredictionVariance prediction;
    std::vector<double> f_hat;  // on the eval grid
};

struct Check {
    std::string name;
    bool pass = false;
    std::string detail;
    bool required = true;  // informational checks do not fail the scenario
};

/// Category-1 pair. Both models end up at the same fitted function: the
/// lower-loss estimate of the two independent fits is mapped into the other
/// parameterization.
struct Cat1Comparison {
    EquivalenceReport equivalence;
    std::string shared_from;  // id of the model whose estimate was kept
    double loss_gap = 0;      // relative, after sharing
    double independent_loss_gap = 0;
    double independent_max_relative_difference = 0;
};

/// One step of a nested Category-2 family, relative to the first model.
/// Means are computed with the noise variance chosen by comparison_lambda.
struct Cat2Step {
    std::string id;
    Eigen::Index n_params = 0;
    double lambda = 0;
    double mean_variance = 0;
    double increase = 0;  // over the previous model's mean variance
    /// Per-point decomposition against the canonical model (linear family only).
    std::optional<double> min_excess;
    std::optional<double> strict_fraction;
    std::optional<double> max_identity_error;
};

struct ScenarioResult {
    ExperimentConfig config;
    Dataset data;
    std::vector<double> eval_inputs;
    std::vector<ModelResult> models;
    std::optional<Cat1Comparison> cat1;
    std::vector<Cat2Step> cat2;
    std::vector<Check> checks;

    bool aborted = false;
    std::string failed_model;
    std::string abort_reason;

    bool passed() const;
};

/// Fits one model and evaluates its uncertainty on the grid.
ModelResult analyze_model(const std::string& id, const ModelSpec& model, const Dataset& data,
                          std::span<const double> eval_inputs, const FitOptions& fit_opts,
                          std::optional<double> rank_tolerance);

/// Runs the configured scenario. A fit whose restarts all diverge aborts the
/// scenario; the models finished so far are kept in the result.
ScenarioResult run_scenario(const ExperimentConfig& cfg);

/// Runs the scenario's analysis on a given dataset instead of generating one.
ScenarioResult run_scenario(const ExperimentConfig& cfg, const Dataset& data);

/// Writes predictions.csv and summary.csv into dir (created if missing).
void emit_csv(const ScenarioResult& result, const std::filesystem::path& dir);

/// "deltavar scenario=... data_seed=... fit_seed=...", the comment line of every CSV.
std::string provenance_comment(const ExperimentConfig& cfg);

/// Human-readable report of fits, comparisons and checks.
std::string format_report(const ScenarioResult& result);

}  // namespace deltavar
