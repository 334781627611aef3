#pragma once

#include <doctest.h>

#include "deltavar/linalg.hpp"
#include "deltavar/random.hpp"

namespace testing {

inline deltavar::Matrix random_matrix(deltavar::Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    deltavar::Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
    return m;
}

inline int random_int(deltavar::Rng& rng, int lo, int hi) {
    return lo + static_cast<int>(rng.uniform01() * (hi - lo + 1));
}

inline double rel_err(const deltavar::Matrix& a, const deltavar::Matrix& b) {
    const double scale = std::max(a.norm(), b.norm());
    return scale == 0 ? 0.0 : (a - b).norm() / scale;
}

inline double cond(const deltavar::Matrix& m) {
    const auto s = Eigen::JacobiSVD<deltavar::Matrix>(m).singularValues();
    return s(s.size() - 1) == 0 ? std::numeric_limits<double>::infinity() : s(0) / s(s.size() - 1);
}

}  // namespace testing
