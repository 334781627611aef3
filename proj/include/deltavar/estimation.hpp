#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "deltavar/models.hpp"

namespace deltavar {

/// Paired observations y_n = f*(x_n) + e_n.
struct Dataset {
    std::vector<double> inputs;
    std::vector<double> outputs;

    std::size_t size() const { return inputs.size(); }
    /// Throws ValidationError unless sizes match, N >= 1 and entries are finite.
    void validate() const;
};

struct FitOptions {
    int restarts = 20;
    std::uint64_t seed = 1;
    int max_iterations = 500;
    double step_tolerance = 1e-10;      // relative step size
    double gradient_tolerance = 1e-8;   // relative to the initial gradient norm
    double init_stddev = 1.5;
    double initial_damping = 1e-3;
    /// A run whose largest |theta_i| exceeds this bound is treated as diverged
    /// (parameters escaping to infinity, e.g. a sigmoid sharpening into a step).
    double divergence_bound = 1e3;
    std::optional<double> rank_tolerance;  // for the linear least-norm solve
};

struct FitResult {
    Vector theta_hat;
    double loss_value = 0;  // V_N = sum of squared residuals
    double lambda_N = 0;    // loss_value / N
    bool converged = false;
    int iterations = 0;
    int restarts_used = 0;
    int restarts_diverged = 0;
    std::uint64_t best_restart_seed = 0;
    Eigen::Index design_rank = 0;  // linear models: rank of Phi
    std::vector<std::string> warnings;
};

/// One damped Gauss-Newton run from a given start.
struct LevenbergMarquardtRun {
    Vector theta;
    double loss = 0;
    double gradient_norm = 0;
    double initial_gradient_norm = 0;
    int iterations = 0;
    bool converged = false;
    bool diverged = false;
};

double loss(const ModelSpec& model, const Vector& theta, const Dataset& data);

/// (1/N) sum (y_n - f(x_n; theta))^2
double residual_variance(const ModelSpec& model, const Vector& theta, const Dataset& data);

LevenbergMarquardtRun levenberg_marquardt(const ModelSpec& model, const Dataset& data, Vector theta0,
                                          const FitOptions& opts);

/// Least-squares fit. Linear-in-parameter models get the least-norm solution
/// pinv(Phi^T) y; other models take the lowest-loss run over seeded restarts.
FitResult fit(const ModelSpec& model, const Dataset& data, const FitOptions& opts = {});

}  // namespace deltavar
