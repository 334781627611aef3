#include "deltavar/estimation.hpp"

#include <cmath>
#include <limits>

#include "deltavar/random.hpp"

namespace deltavar {

void Dataset::validate() const {
    if (inputs.size() != outputs.size()) throw ValidationError("dataset inputs and outputs differ in length");
    if (inputs.empty()) throw ValidationError("dataset is empty");
    for (std::size_t n = 0; n < inputs.size(); ++n) {
        if (!std::isfinite(inputs[n]) || !std::isfinite(outputs[n])) {
            throw ValidationError("dataset entry " + std::to_string(n) + " is not finite");
        }
    }
}

namespace {

Vector residuals(const ModelSpec& model, const Vector& theta, const Dataset& data) {
    Vector r(static_cast<Eigen::Index>(data.size()));
    for (std::size_t n = 0; n < data.size(); ++n) {
        r(static_cast<Eigen::Index>(n)) = data.outputs[n] - evaluate(model, theta, data.inputs[n]);
    }
    return r;
}

FitResult fit_linear(const ModelSpec& model, const Dataset& data, const FitOptions& opts) {
    const Vector zero = Vector::Zero(model.param_count());
    const Matrix phi = regressor_matrix(model, zero, data.inputs);
    const Eigen::Map<const Vector> y(data.outputs.data(), static_cast<Eigen::Index>(data.size()));
    const auto pinv = linalg::pseudo_inverse(phi.transpose(), opts.rank_tolerance);

    FitResult out;
    out.theta_hat = pinv.pinv * y;
    out.loss_value = loss(model, out.theta_hat, data);
    out.lambda_N = out.loss_value / static_cast<double>(data.size());
    out.converged = true;
    out.design_rank = pinv.numerical_rank;
    if (pinv.numerical_rank < model.param_count()) {
        out.warnings.push_back("rank-deficient design: rank " + std::to_string(pinv.numerical_rank) + " < " +
                               std::to_string(model.param_count()) + " parameters; least-norm solution returned");
    }
    return out;
}

}  // namespace

double loss(const ModelSpec& model, const Vector& theta, const Dataset& data) {
    data.validate();
    return residuals(model, theta, data).squaredNorm();
}

double residual_variance(const ModelSpec& model, const Vector& theta, const Dataset& data) {
    return loss(model, theta, data) / static_cast<double>(data.size());
}

LevenbergMarquardtRun levenberg_marquardt(const ModelSpec& model, const Dataset& data, Vector theta0,
                                          const FitOptions& opts) {
    LevenbergMarquardtRun run;
    run.theta = std::move(theta0);

    Vector r = residuals(model, run.theta, data);
    run.loss = r.squaredNorm();
    Matrix jt = regressor_matrix(model, run.theta, data.inputs);  // J^T, n x N
    Vector g = jt * r;
    run.initial_gradient_norm = run.gradient_norm = g.norm();
    if (!std::isfinite(run.loss)) return run;
    if (run.gradient_norm == 0.0) {
        run.converged = true;
        return run;
    }

    double damping = opts.initial_damping;
    Matrix normal = jt * jt.transpose();
    while (run.iterations < opts.max_iterations) {
        ++run.iterations;
        Matrix lhs = normal;
        lhs.diagonal().array() += damping;
        const Vector step = lhs.ldlt().solve(g);
        const Vector candidate = run.theta + step;
        const Vector r_new = residuals(model, candidate, data);
        const double loss_new = r_new.squaredNorm();

        if (std::isfinite(loss_new) && loss_new < run.loss) {
            if (candidate.cwiseAbs().maxCoeff() > opts.divergence_bound) {
                run.theta = candidate;
                run.loss = loss_new;
                run.diverged = true;
                break;
            }
            run.theta = candidate;
            run.loss = loss_new;
            r = r_new;
            jt = regressor_matrix(model, run.theta, data.inputs);
            g = jt * r;
            normal = jt * jt.transpose();
            run.gradient_norm = g.norm();
            damping = std::max(damping / 10.0, 1e-20);

            const bool small_step = step.norm() <= opts.step_tolerance * (run.theta.norm() + opts.step_tolerance);
            const bool small_gradient = run.gradient_norm <= opts.gradient_tolerance * run.initial_gradient_norm;
            if (small_step || small_gradient) {
                run.converged = true;
                break;
            }
        } else {
            damping *= 10.0;
            // No descent direction remains representable.
            if (damping > 1e20) {
                run.converged = run.gradient_norm <= opts.gradient_tolerance * run.initial_gradient_norm;
                break;
            }
        }
    }
    return run;
}

FitResult fit(const ModelSpec& model, const Dataset& data, const FitOptions& opts) {
    data.validate();
    if (model.kind() == ModelKind::linear_in_parameters) return fit_linear(model, data, opts);
    if (opts.restarts < 1) throw ValidationError("fit: restarts must be at least 1");
    if (opts.max_iterations < 1) throw ValidationError("fit: max_iterations must be at least 1");

    FitResult best;
    best.loss_value = std::numeric_limits<double>::infinity();
    int finite_runs = 0;
    for (int k = 0; k < opts.restarts; ++k) {
        const std::uint64_t seed = derive_seed(opts.seed, static_cast<std::uint64_t>(k));
        Rng rng(seed);
        Vector theta0(model.param_count());
        for (Eigen::Index i = 0; i < theta0.size(); ++i) theta0(i) = rng.normal(0.0, opts.init_stddev);

        const LevenbergMarquardtRun run = levenberg_marquardt(model, data, std::move(theta0), opts);
        if (run.diverged || !std::isfinite(run.loss)) {
            ++best.restarts_diverged;
            continue;
        }
        ++finite_runs;
        if (run.loss < best.loss_value) {
            best.theta_hat = run.theta;
            best.loss_value = run.loss;
            best.converged = run.converged;
            best.iterations = run.iterations;
            best.best_restart_seed = seed;
        }
    }
    if (finite_runs == 0) {
        throw NonConvergenceError("fit: all " + std::to_string(opts.restarts) + " restarts diverged");
    }
    best.restarts_used = opts.restarts;
    best.lambda_N = best.loss_value / static_cast<double>(data.size());
    best.design_rank = linalg::numerical_rank(regressor_matrix(model, best.theta_hat, data.inputs));
    if (!best.converged) best.warnings.push_back("best restart stopped at the iteration limit");
    return best;
}

}  // namespace deltavar
