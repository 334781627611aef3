#include "deltavar/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace deltavar {

Matrix information_matrix(const ModelSpec& model, const Vector& theta, const Dataset& data) {
    data.validate();
    const Matrix phi = regressor_matrix(model, theta, data.inputs);
    Matrix info = phi * phi.transpose();
    // Exact symmetry; the product is symmetric only up to rounding.
    return (info + info.transpose()) / 2.0;
}

UncertaintyReport parameter_covariance(const Matrix& info, double lambda_N, std::optional<double> rank_tolerance) {
    linalg::require_finite(info, "parameter_covariance");
    if (!linalg::is_symmetric(info)) throw ValidationError("parameter_covariance: information matrix is not symmetric");
    if (!(lambda_N >= 0) || !std::isfinite(lambda_N)) {
        throw ValidationError("parameter_covariance: lambda_N must be finite and nonnegative");
    }
    const auto pinv = linalg::pseudo_inverse(info, rank_tolerance);
    UncertaintyReport out;
    out.information_matrix = info;
    out.parameter_covariance = lambda_N * pinv.pinv;
    out.information_rank = pinv.numerical_rank;
    out.lambda_N = lambda_N;
    out.used_pseudo_inverse = pinv.numerical_rank < info.rows();
    return out;
}

double information_rank_tolerance(Eigen::Index n_params, std::size_t n_samples) {
    return static_cast<double>(n_samples) * static_cast<double>(n_params) * std::numeric_limits<double>::epsilon();
}

UncertaintyReport uncertainty_report(const ModelSpec& model, const Vector& theta, const Dataset& data,
                                     std::optional<double> rank_tolerance) {
    return parameter_covariance(information_matrix(model, theta, data), residual_variance(model, theta, data),
                                rank_tolerance.value_or(information_rank_tolerance(model.param_count(), data.size())));
}

double quadratic_variance(const Vector& psi, const Matrix& covariance) {
    if (covariance.rows() != psi.size() || covariance.cols() != psi.size()) {
        throw ValidationError("prediction_variance: covariance is not n_theta x n_theta");
    }
    const double v = psi.dot(covariance * psi);
    if (!std::isfinite(v)) throw ValidationError("prediction_variance: non-finite result");
    if (v >= 0) return v;
    if (v > -kNegativeVarianceClamp) return 0.0;
    std::ostringstream msg;
    msg << "prediction_variance: negative variance " << v << " (covariance is not PSD)";
    throw PsdViolationError(msg.str());
}

double prediction_variance(const ModelSpec& model, const Vector& theta, const Matrix& covariance, double x) {
    return quadratic_variance(jacobian(model, theta, x), covariance);
}

PredictionVariance mean_prediction_variance(const ModelSpec& model, const Vector& theta, const Matrix& covariance,
                                            std::span<const double> eval_inputs) {
    if (eval_inputs.empty()) throw ValidationError("mean_prediction_variance: no evaluation inputs");
    PredictionVariance out;
    out.eval_inputs.assign(eval_inputs.begin(), eval_inputs.end());
    out.variances.reserve(eval_inputs.size());
    double sum = 0;
    for (double x : eval_inputs) {
        out.variances.push_back(prediction_variance(model, theta, covariance, x));
        sum += out.variances.back();
    }
    out.mean_variance = sum / static_cast<double>(eval_inputs.size());
    return out;
}

Category1Transform Category1Transform::validate(Matrix T, std::optional<double> rank_tolerance) {
    linalg::require_finite(T, "Category1Transform");
    if (T.rows() > T.cols()) {
        throw RankDeficiencyError("Category1Transform: T must be wide (rows <= cols)", "T");
    }
    if (linalg::numerical_rank(T, rank_tolerance) < T.rows()) {
        throw RankDeficiencyError("Category1Transform: T does not have full row rank", "T");
    }
    return {std::move(T), true};
}

double relative_difference(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0 ? 0.0 : std::abs(a - b) / scale;
}

EquivalenceReport category1_equivalence(const FittedModel& canonical, const FittedModel& over,
                                        const Category1Transform& transform, const Dataset& data,
                                        std::span<const double> eval_inputs, const Category1Options& opts) {
    if (!transform.validated_full_row_rank) {
        throw RankDeficiencyError("category1_equivalence: transform has not been validated", "T");
    }
    const Matrix& T = transform.T;
    if (T.rows() != canonical.model.param_count() || T.cols() != over.model.param_count()) {
        throw ValidationError("category1_equivalence: T must be n_theta_c x n_theta");
    }
    if (eval_inputs.empty()) throw ValidationError("category1_equivalence: no evaluation inputs");

    double worst = -1;
    double worst_x = 0;
    for (double x : eval_inputs) {
        const Vector phi = jacobian(over.model, over.theta, x);
        const Vector mapped = T.transpose() * jacobian(canonical.model, canonical.theta, x);
        const double scale = std::max(phi.norm(), mapped.norm());
        const double mismatch = scale == 0 ? 0.0 : (phi - mapped).norm() / scale;
        if (mismatch > worst) {
            worst = mismatch;
            worst_x = x;
        }
    }
    if (worst > opts.compatibility_tolerance) {
        std::ostringstream msg;
        msg << "category1_equivalence: regressors are not related by T (relative mismatch " << worst << " at x = "
            << worst_x << ")";
        throw StructuralError(msg.str(), worst_x);
    }

    const double lambda_c = opts.common_lambda.value_or(residual_variance(canonical.model, canonical.theta, data));
    const double lambda_o = opts.common_lambda.value_or(residual_variance(over.model, over.theta, data));
    const auto tol = [&](const ModelSpec& m) {
        return opts.rank_tolerance.value_or(information_rank_tolerance(m.param_count(), data.size()));
    };
    const UncertaintyReport rc = parameter_covariance(information_matrix(canonical.model, canonical.theta, data),
                                                      lambda_c, tol(canonical.model));
    const UncertaintyReport ro =
        parameter_covariance(information_matrix(over.model, over.theta, data), lambda_o, tol(over.model));

    EquivalenceReport out;
    out.eval_inputs.assign(eval_inputs.begin(), eval_inputs.end());
    out.canonical_variance = mean_prediction_variance(canonical.model, canonical.theta, rc.parameter_covariance,
                                                      eval_inputs).variances;
    out.over_variance = mean_prediction_variance(over.model, over.theta, ro.parameter_covariance, eval_inputs).variances;
    for (std::size_t i = 0; i < eval_inputs.size(); ++i) {
        out.max_relative_difference =
            std::max(out.max_relative_difference, relative_difference(out.canonical_variance[i], out.over_variance[i]));
    }
    out.tolerance = opts.tolerance;
    out.pass = out.max_relative_difference <= opts.tolerance;
    out.canonical_rank = rc.information_rank;
    out.over_rank = ro.information_rank;
    return out;
}

Matrix BlockDecomposition::assembled_inverse() const {
    const Eigen::Index n = canonical_dim;
    const Eigen::Index k = extra_dim;
    Matrix out(n + k, n + k);
    out.topLeftCorner(n, n) = canonical_inverse + K.transpose() * R_o * K;
    out.topRightCorner(n, k) = -K.transpose() * R_o;
    out.bottomLeftCorner(k, n) = -R_o * K;
    out.bottomRightCorner(k, k) = R_o;
    return out;
}

BlockDecomposition block_decomposition(const Matrix& phi_c, const Matrix& phi_o, std::optional<double> rank_tolerance) {
    linalg::require_finite(phi_c, "block_decomposition(phi_c)");
    linalg::require_finite(phi_o, "block_decomposition(phi_o)");
    if (phi_c.cols() != phi_o.cols()) {
        throw ValidationError("block_decomposition: Phi_c and Phi_o must have the same number of columns");
    }

    BlockDecomposition d;
    d.canonical_dim = phi_c.rows();
    d.extra_dim = phi_o.rows();

    const Matrix gram_c = phi_c * phi_c.transpose();
    const auto gram_c_inv = linalg::pseudo_inverse(gram_c, rank_tolerance);
    if (gram_c_inv.numerical_rank < gram_c.rows()) {
        throw RankDeficiencyError("block_decomposition: Phi_c Phi_c^T is singular", "canonical");
    }
    d.canonical_inverse = gram_c_inv.pinv;
    d.K = phi_o * phi_c.transpose() * d.canonical_inverse;
    d.R_c = phi_c.transpose() * d.canonical_inverse * phi_c;

    // Phi_o (I - R_c) Phi_o^T = E E^T with E = Phi_o - K Phi_c, since I - R_c is
    // a symmetric projector and Phi_o R_c = K Phi_c.
    const Matrix residual = phi_o - d.K * phi_c;
    const Matrix inner = residual * residual.transpose();
    // Singularity is judged against the scale of Phi_o Phi_o^T: a projected
    // residual made of rounding noise must not look full rank on its own scale.
    const Matrix gram_o = phi_o * phi_o.transpose();
    const double reference = gram_o.norm();
    const double tol = rank_tolerance.value_or(linalg::default_rank_tolerance<double>(inner.rows(), inner.cols()));
    const auto inner_inv = linalg::pseudo_inverse_with_cutoff(inner, tol * reference);
    if (inner_inv.numerical_rank < inner.rows()) {
        throw CategoryOneDetected(
            "block_decomposition: added regressors are a linear map of the canonical ones (Category 1)", "R_o");
    }
    d.R_o = inner_inv.pinv;
    d.R_o = (d.R_o + d.R_o.transpose()) / 2.0;

    const Eigen::Index k = d.extra_dim;
    d.Q.resize(2 * k, 2 * k);
    d.Q << d.R_o, -d.R_o, -d.R_o, d.R_o;

    Matrix stacked(d.canonical_dim + k, phi_c.cols());
    stacked << phi_c, phi_o;
    const Matrix full = stacked * stacked.transpose();
    d.direct_inverse = linalg::pseudo_inverse((full + full.transpose()) / 2.0, rank_tolerance).pinv;
    return d;
}

BlockDecomposition block_decomposition(const Matrix& phi_c, const Matrix& phi_o, const Matrix& phi_c_eval,
                                       const Matrix& phi_o_eval, std::optional<double> rank_tolerance) {
    BlockDecomposition d = block_decomposition(phi_c, phi_o, rank_tolerance);
    if (phi_c_eval.rows() != d.canonical_dim || phi_o_eval.rows() != d.extra_dim ||
        phi_c_eval.cols() != phi_o_eval.cols()) {
        throw ValidationError("block_decomposition: evaluation regressors do not match the partition");
    }
    d.chi.resize(2 * d.extra_dim, phi_c_eval.cols());
    for (Eigen::Index i = 0; i < phi_c_eval.cols(); ++i) d.chi.col(i) = chi_vector(d, phi_c_eval.col(i), phi_o_eval.col(i));
    return d;
}

Vector chi_vector(const BlockDecomposition& decomp, const Vector& phi_c_x, const Vector& phi_o_x) {
    if (phi_c_x.size() != decomp.canonical_dim || phi_o_x.size() != decomp.extra_dim) {
        throw ValidationError("chi_vector: regressor sizes do not match the decomposition");
    }
    Vector chi(2 * decomp.extra_dim);
    chi << decomp.K * phi_c_x, phi_o_x;
    return chi;
}

Category2Terms category2_terms(const BlockDecomposition& decomp, const Vector& phi_c_x, const Vector& phi_o_x,
                               double lambda, double consistency_tolerance) {
    if (!(lambda >= 0) || !std::isfinite(lambda)) throw ValidationError("category2: lambda must be nonnegative");
    const Vector chi = chi_vector(decomp, phi_c_x, phi_o_x);

    Category2Terms t;
    t.canonical_variance = lambda * quadratic_variance(phi_c_x, decomp.canonical_inverse);
    // chi^T Q chi = d^T R_o d with d = K phi_c - phi_o; the reduced form avoids
    // the cancellation between the +R_o and -R_o blocks.
    const Eigen::Index k = decomp.extra_dim;
    t.excess = lambda * quadratic_variance(chi.head(k) - chi.tail(k), decomp.R_o);

    Vector phi(decomp.canonical_dim + decomp.extra_dim);
    phi << phi_c_x, phi_o_x;
    t.over_variance = lambda * quadratic_variance(phi, decomp.direct_inverse);

    const double split = t.canonical_variance + t.excess;
    if (relative_difference(t.over_variance, split) > consistency_tolerance) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "category2: direct variance " << t.over_variance << " != canonical + excess " << split;
        throw ConsistencyError(msg.str());
    }
    return t;
}

double category2_excess(const BlockDecomposition& decomp, const Vector& phi_c_x, const Vector& phi_o_x, double lambda,
                        double consistency_tolerance) {
    return category2_terms(decomp, phi_c_x, phi_o_x, lambda, consistency_tolerance).excess;
}

}  // namespace deltavar
