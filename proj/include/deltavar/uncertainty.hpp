#pragma once

// Delta-method prediction uncertainty and the machinery that compares a
// canonical model with an overparameterized one.
//
//   information matrix  I     = sum_n psi(x_n) psi(x_n)^T
//   parameter cov.      P     = lambda_N I^+
//   prediction var.     P_f(x) = psi(x)^T P psi(x)
//
// Category 1: the extra parameters add no flexibility (phi^T = phi_c^T T for a
// full-row-rank T). The two prediction variances coincide.
// Category 2: the extra regressors phi_o are not a linear map of phi_c. The
// overparameterized variance splits into the canonical variance plus a PSD
// quadratic form chi^T Q chi (see BlockDecomposition).

#include <optional>
#include <span>
#include <vector>

#include "deltavar/estimation.hpp"
#include "deltavar/models.hpp"

namespace deltavar {

/// Values in (-kNegativeVarianceClamp, 0) are rounded to zero; anything lower
/// raises PsdViolationError.
inline constexpr double kNegativeVarianceClamp = 1e-14;

/// Default relative rank cutoff for an information matrix built from N
/// samples: N * n_theta * eps, the rounding accumulated by summing N outer
/// products. Singular values below it carry no information.
double information_rank_tolerance(Eigen::Index n_params, std::size_t n_samples);

struct UncertaintyReport {
    Matrix information_matrix;
    Matrix parameter_covariance;
    Eigen::Index information_rank = 0;
    double lambda_N = 0;
    bool used_pseudo_inverse = false;
};

struct PredictionVariance {
    std::vector<double> eval_inputs;
    std::vector<double> variances;
    double mean_variance = 0;
};

/// A model together with its estimated parameters.
struct FittedModel {
    ModelSpec model;
    Vector theta;
};

Matrix information_matrix(const ModelSpec& model, const Vector& theta, const Dataset& data);

/// lambda_N * pinv(info); records the rank of info and whether it was singular.
UncertaintyReport parameter_covariance(const Matrix& info, double lambda_N,
                                       std::optional<double> rank_tolerance = std::nullopt);

/// information_matrix + parameter_covariance at theta, with lambda_N taken
/// from the residuals on data. The rank cutoff defaults to
/// information_rank_tolerance.
UncertaintyReport uncertainty_report(const ModelSpec& model, const Vector& theta, const Dataset& data,
                                     std::optional<double> rank_tolerance = std::nullopt);

/// psi^T P psi with the negative-rounding clamp.
double quadratic_variance(const Vector& psi, const Matrix& covariance);

double prediction_variance(const ModelSpec& model, const Vector& theta, const Matrix& covariance, double x);

PredictionVariance mean_prediction_variance(const ModelSpec& model, const Vector& theta, const Matrix& covariance,
                                            std::span<const double> eval_inputs);

struct Category1Transform {
    Matrix T;  // n_theta_c x n_theta
    bool validated_full_row_rank = false;

    /// Checks rows <= cols and full row rank; throws RankDeficiencyError otherwise.
    static Category1Transform validate(Matrix T, std::optional<double> rank_tolerance = std::nullopt);
};

struct Category1Options {
    double tolerance = 1e-8;                // on the max relative variance difference
    double compatibility_tolerance = 1e-8;  // on |phi - T^T phi_c| / |phi|
    /// Use one noise variance for both models instead of each model's lambda_N.
    std::optional<double> common_lambda;
    std::optional<double> rank_tolerance;  // default: information_rank_tolerance
};

struct EquivalenceReport {
    std::vector<double> eval_inputs;
    std::vector<double> canonical_variance;
    std::vector<double> over_variance;
    double max_relative_difference = 0;
    double tolerance = 0;
    bool pass = false;
    Eigen::Index canonical_rank = 0;
    Eigen::Index over_rank = 0;
};

/// |a - b| / max(|a|, |b|); zero when both are zero.
double relative_difference(double a, double b);

/// Compares phi_c^T P_c phi_c with phi^T P phi on eval_inputs. Requires
/// phi(x) = T^T phi_c(x) at every eval input (StructuralError names the worst).
EquivalenceReport category1_equivalence(const FittedModel& canonical, const FittedModel& over,
                                        const Category1Transform& transform, const Dataset& data,
                                        std::span<const double> eval_inputs, const Category1Options& opts = {});

/// Split of the overparameterized information matrix into canonical rows
/// Phi_c (n_c x N) and added rows Phi_o (n_o x N):
///
///   K   = Phi_o Phi_c^T (Phi_c Phi_c^T)^-1
///   R_c = Phi_c^T (Phi_c Phi_c^T)^-1 Phi_c
///   R_o = (Phi_o (I - R_c) Phi_o^T)^-1
///   Q   = [[R_o, -R_o], [-R_o, R_o]]
struct BlockDecomposition {
    Matrix K;
    Matrix R_o;
    Matrix R_c;
    Matrix Q;
    Matrix chi;  // one column per evaluation input, empty unless requested
    Eigen::Index canonical_dim = 0;
    Eigen::Index extra_dim = 0;

    Matrix canonical_inverse;  // (Phi_c Phi_c^T)^-1
    Matrix direct_inverse;     // pinv of the stacked Phi Phi^T, formed independently

    /// Block-wise inverse of the stacked information matrix built from K, R_o.
    Matrix assembled_inverse() const;
};

/// Throws RankDeficiencyError("canonical") if Phi_c Phi_c^T is singular and
/// CategoryOneDetected("R_o") if the added rows lie in the row space of Phi_c.
BlockDecomposition block_decomposition(const Matrix& phi_c, const Matrix& phi_o,
                                       std::optional<double> rank_tolerance = std::nullopt);

/// Same, with chi filled in for evaluation regressors (columns of phi_c_eval / phi_o_eval).
BlockDecomposition block_decomposition(const Matrix& phi_c, const Matrix& phi_o, const Matrix& phi_c_eval,
                                       const Matrix& phi_o_eval, std::optional<double> rank_tolerance = std::nullopt);

/// chi = [K phi_c(x); phi_o(x)]
Vector chi_vector(const BlockDecomposition& decomp, const Vector& phi_c_x, const Vector& phi_o_x);

struct Category2Terms {
    double canonical_variance = 0;  // lambda phi_c^T (Phi_c Phi_c^T)^-1 phi_c
    double excess = 0;              // lambda chi^T Q chi
    double over_variance = 0;       // lambda phi^T (Phi Phi^T)^-1 phi, direct route
};

/// Canonical term, excess and the directly computed overparameterized
/// variance. Throws ConsistencyError if over != canonical + excess within
/// consistency_tolerance (relative).
Category2Terms category2_terms(const BlockDecomposition& decomp, const Vector& phi_c_x, const Vector& phi_o_x,
                               double lambda, double consistency_tolerance = 1e-8);

/// lambda chi^T Q chi >= 0; zero iff phi_o(x) = K phi_c(x).
double category2_excess(const BlockDecomposition& decomp, const Vector& phi_c_x, const Vector& phi_o_x,
                        double lambda, double consistency_tolerance = 1e-8);

}  // namespace deltavar
