#pragma once

// Dense linear algebra used throughout deltavar: SVD pseudo-inverse with an
// explicit rank decision, Schur-complement block inverse and a minimum-norm
// symmetric PSD solve. Everything is a pure function of its arguments.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "deltavar/errors.hpp"

namespace deltavar {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

namespace linalg {

/// Symmetry tolerance (relative to the Frobenius norm) for symmetric inputs.
inline constexpr double kSymmetryTolerance = 1e-9;

template <typename Scalar>
struct PseudoInverseResult {
    MatrixX<Scalar> pinv;
    Eigen::Index numerical_rank = 0;
    VectorX<Scalar> singular_values;  // nonincreasing
    Scalar cutoff = 0;                // absolute threshold applied to singular values
};

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
    if (m.size() == 0) throw ValidationError(std::string(what) + ": empty matrix");
    if (!m.allFinite()) throw ValidationError(std::string(what) + ": non-finite entries");
}

/// Default relative rank tolerance: max(rows, cols) * machine epsilon.
template <typename Scalar>
Scalar default_rank_tolerance(Eigen::Index rows, Eigen::Index cols) {
    return static_cast<Scalar>(std::max(rows, cols)) * std::numeric_limits<Scalar>::epsilon();
}

namespace detail {

template <typename Scalar, typename CutoffFn>
PseudoInverseResult<Scalar> pseudo_inverse_impl(const MatrixX<Scalar>& a, CutoffFn&& cutoff_for) {
    Eigen::JacobiSVD<MatrixX<Scalar>> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) {
        throw NumericalError("pseudo_inverse: SVD did not converge",
                             "eigen_info=" + std::to_string(static_cast<int>(svd.info())) +
                                 " rows=" + std::to_string(a.rows()) + " cols=" + std::to_string(a.cols()));
    }

    PseudoInverseResult<Scalar> out;
    out.singular_values = svd.singularValues();
    const Scalar sigma_max = out.singular_values.size() > 0 ? out.singular_values(0) : Scalar(0);
    out.cutoff = cutoff_for(sigma_max);

    VectorX<Scalar> inv_sigma = VectorX<Scalar>::Zero(out.singular_values.size());
    for (Eigen::Index i = 0; i < out.singular_values.size(); ++i) {
        if (out.singular_values(i) > out.cutoff) {
            inv_sigma(i) = Scalar(1) / out.singular_values(i);
            ++out.numerical_rank;
        }
    }
    out.pinv = svd.matrixV() * inv_sigma.asDiagonal() * svd.matrixU().transpose();
    return out;
}

}  // namespace detail

/// Moore-Penrose pseudo-inverse via SVD. A singular value counts toward the
/// rank iff it is strictly above rank_tolerance * sigma_max.
template <typename Derived>
PseudoInverseResult<typename Derived::Scalar> pseudo_inverse(
    const Eigen::MatrixBase<Derived>& m,
    std::optional<typename Derived::RealScalar> rank_tolerance = std::nullopt) {
    using Scalar = typename Derived::Scalar;
    require_finite(m, "pseudo_inverse");
    const Scalar tol = rank_tolerance.value_or(default_rank_tolerance<Scalar>(m.rows(), m.cols()));
    return detail::pseudo_inverse_impl<Scalar>(m, [tol](Scalar sigma_max) { return tol * sigma_max; });
}

/// Pseudo-inverse with a caller-supplied absolute singular-value cutoff, for
/// matrices whose rank must be judged against an external scale.
template <typename Derived>
PseudoInverseResult<typename Derived::Scalar> pseudo_inverse_with_cutoff(const Eigen::MatrixBase<Derived>& m,
                                                                         typename Derived::RealScalar cutoff) {
    using Scalar = typename Derived::Scalar;
    require_finite(m, "pseudo_inverse");
    if (!(cutoff >= 0)) throw ValidationError("pseudo_inverse: cutoff must be nonnegative");
    return detail::pseudo_inverse_impl<Scalar>(m, [cutoff](Scalar) { return cutoff; });
}

/// Numerical rank under the pseudo-inverse cutoff rule.
template <typename Derived>
Eigen::Index numerical_rank(const Eigen::MatrixBase<Derived>& m,
                            std::optional<typename Derived::RealScalar> rank_tolerance = std::nullopt) {
    return pseudo_inverse(m, rank_tolerance).numerical_rank;
}

template <typename Derived>
bool is_symmetric(const Eigen::MatrixBase<Derived>& m,
                  typename Derived::RealScalar tolerance = kSymmetryTolerance) {
    if (m.rows() != m.cols()) return false;
    const auto scale = m.norm();
    return (m - m.transpose()).norm() <= tolerance * (scale > 0 ? scale : 1);
}

/// Inverse of [[a, b], [c, d]] through the Schur complement s = d - c a^-1 b:
///
///   [[a^-1 + a^-1 b s^-1 c a^-1, -a^-1 b s^-1],
///    [-s^-1 c a^-1,               s^-1       ]]
template <typename DA, typename DB, typename DC, typename DD>
MatrixX<typename DA::Scalar> block_inverse(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b,
                                           const Eigen::MatrixBase<DC>& c, const Eigen::MatrixBase<DD>& d) {
    using Scalar = typename DA::Scalar;
    require_finite(a, "block_inverse(a)");
    require_finite(b, "block_inverse(b)");
    require_finite(c, "block_inverse(c)");
    require_finite(d, "block_inverse(d)");
    if (a.rows() != a.cols()) throw ValidationError("block_inverse: block a must be square");
    if (d.rows() != d.cols()) throw ValidationError("block_inverse: block d must be square");
    if (b.rows() != a.rows() || b.cols() != d.cols() || c.rows() != d.rows() || c.cols() != a.cols()) {
        throw ValidationError("block_inverse: blocks are not conformable");
    }

    const auto a_inv = pseudo_inverse(a);
    if (a_inv.numerical_rank < a.rows()) {
        throw RankDeficiencyError("block_inverse: block a is singular", "a");
    }
    const MatrixX<Scalar> a_inv_b = a_inv.pinv * b;
    const MatrixX<Scalar> c_a_inv = c * a_inv.pinv;
    const MatrixX<Scalar> schur = d - c * a_inv_b;
    const auto s_inv = pseudo_inverse(schur);
    if (s_inv.numerical_rank < schur.rows()) {
        throw RankDeficiencyError("block_inverse: Schur complement d - c a^-1 b is singular", "schur");
    }

    const Eigen::Index n = a.rows();
    const Eigen::Index k = d.rows();
    MatrixX<Scalar> out(n + k, n + k);
    out.topLeftCorner(n, n) = a_inv.pinv + a_inv_b * s_inv.pinv * c_a_inv;
    out.topRightCorner(n, k) = -a_inv_b * s_inv.pinv;
    out.bottomLeftCorner(k, n) = -s_inv.pinv * c_a_inv;
    out.bottomRightCorner(k, k) = s_inv.pinv;
    return out;
}

/// Minimum-norm solution of m x = rhs for symmetric PSD m, via a
/// self-adjoint eigendecomposition with the same relative cutoff as
/// pseudo_inverse.
template <typename DM, typename DR>
MatrixX<typename DM::Scalar> solve_symmetric_psd(const Eigen::MatrixBase<DM>& m, const Eigen::MatrixBase<DR>& rhs,
                                                 std::optional<typename DM::RealScalar> rank_tolerance = std::nullopt) {
    using Scalar = typename DM::Scalar;
    require_finite(m, "solve_symmetric_psd(m)");
    require_finite(rhs, "solve_symmetric_psd(rhs)");
    if (m.rows() != m.cols()) throw ValidationError("solve_symmetric_psd: matrix must be square");
    if (rhs.rows() != m.rows()) throw ValidationError("solve_symmetric_psd: rhs row count mismatch");
    if (!is_symmetric(m)) throw ValidationError("solve_symmetric_psd: matrix is not symmetric");

    const MatrixX<Scalar> sym = (m + m.transpose()) / Scalar(2);
    Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(sym);
    if (eig.info() != Eigen::Success) {
        throw NumericalError("solve_symmetric_psd: eigendecomposition did not converge",
                             "eigen_info=" + std::to_string(static_cast<int>(eig.info())));
    }
    const VectorX<Scalar>& values = eig.eigenvalues();
    const Scalar largest = values.cwiseAbs().maxCoeff();
    const Scalar cutoff =
        rank_tolerance.value_or(default_rank_tolerance<Scalar>(m.rows(), m.cols())) * largest;
    if (values.minCoeff() < -cutoff) {
        throw ValidationError("solve_symmetric_psd: matrix is not positive semi-definite");
    }
    VectorX<Scalar> inv = VectorX<Scalar>::Zero(values.size());
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        if (values(i) > cutoff) inv(i) = Scalar(1) / values(i);
    }
    const auto& v = eig.eigenvectors();
    return v * inv.asDiagonal() * (v.transpose() * rhs);
}

}  // namespace linalg
}  // namespace deltavar
