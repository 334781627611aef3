#include "deltavar/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "deltavar/random.hpp"

namespace deltavar {

namespace {

std::string sci(double v) {
    std::ostringstream s;
    s.precision(3);
    s << std::scientific << v;
    return s.str();
}

Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
    return m;
}

Vector random_vector(Rng& rng, Eigen::Index n, double sd = 1.0) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal(0.0, sd);
    return v;
}

int random_int(Rng& rng, int lo, int hi) {
    return lo + static_cast<int>(rng.uniform01() * (hi - lo + 1));
}

std::vector<Check> linalg_checks(std::uint64_t seed) {
    Rng rng(derive_seed(seed, 1));
    double worst = 0;
    int deficient = 0;
    for (int t = 0; t < 200; ++t) {
        const Eigen::Index rows = random_int(rng, 1, 20);
        const Eigen::Index cols = random_int(rng, 1, 20);
        Matrix m;
        if (t % 2 == 1 && std::min(rows, cols) > 1) {
            const Eigen::Index r = random_int(rng, 1, static_cast<int>(std::min(rows, cols)) - 1);
            m = random_matrix(rng, rows, r) * random_matrix(rng, r, cols);
            ++deficient;
        } else {
            m = random_matrix(rng, rows, cols);
        }
        const Matrix p = linalg::pseudo_inverse(m).pinv;
        const Matrix mp = m * p;
        const Matrix pm = p * m;
        worst = std::max({worst, (mp * m - m).norm() / m.norm(), (pm * p - p).norm() / p.norm(),
                          (mp - mp.transpose()).norm() / std::max(1.0, mp.norm()),
                          (pm - pm.transpose()).norm() / std::max(1.0, pm.norm())});
    }

    double block_worst = 0;
    for (int t = 0; t < 100; ++t) {
        const Eigen::Index n = random_int(rng, 1, 6);
        const Eigen::Index k = random_int(rng, 1, 6);
        const Matrix full = random_matrix(rng, n + k, n + k);
        Eigen::JacobiSVD<Matrix> svd(full);
        const auto& s = svd.singularValues();
        if (s(s.size() - 1) == 0 || s(0) / s(s.size() - 1) > 1e8) continue;
        const Matrix inv = linalg::block_inverse(full.topLeftCorner(n, n), full.topRightCorner(n, k),
                                                 full.bottomLeftCorner(k, n), full.bottomRightCorner(k, k));
        const Matrix ref = linalg::pseudo_inverse(full).pinv;
        block_worst = std::max(block_worst, (inv - ref).norm() / ref.norm());
    }

    double psd_worst = 0;
    for (int t = 0; t < 50; ++t) {
        const Eigen::Index n = random_int(rng, 2, 10);
        const Eigen::Index r = random_int(rng, 1, static_cast<int>(n));
        const Matrix f = random_matrix(rng, n, r);
        const Matrix m = f * f.transpose();
        const Matrix rhs = m * random_matrix(rng, n, 2);
        const Matrix x = linalg::solve_symmetric_psd(m, rhs);
        const Matrix ref = linalg::pseudo_inverse(m).pinv * rhs;
        psd_worst = std::max(psd_worst, (x - ref).norm() / std::max(ref.norm(), 1e-300));
    }

    return {
        {"Penrose conditions", worst <= 1e-10,
         "200 matrices up to 20x20 (" + std::to_string(deficient) + " rank deficient), worst " + sci(worst)},
        {"block inverse matches pseudo-inverse", block_worst <= 1e-8, "worst " + sci(block_worst)},
        {"PSD solve is the minimum-norm solution", psd_worst <= 1e-8, "worst " + sci(psd_worst)},
    };
}

ModelSpec random_model(Rng& rng, int kind) {
    if (kind == 0) {
        std::vector<BasisFunction> basis;
        const int n = random_int(rng, 1, 5);
        for (int i = 0; i < n; ++i) {
            switch (random_int(rng, 0, 4)) {
                case 0: basis.push_back(BasisFunction::constant()); break;
                case 1: basis.push_back(BasisFunction::power(random_int(rng, 1, 3))); break;
                case 2: basis.push_back(BasisFunction::affine(rng.normal(), rng.normal())); break;
                case 3: basis.push_back(BasisFunction::logistic(rng.normal(0, 3), rng.normal())); break;
                default: basis.push_back(BasisFunction::hyperbolic(rng.normal(0, 3), rng.normal())); break;
            }
        }
        return ModelSpec::linear(std::move(basis));
    }
    if (kind == 1) {
        MlpDescriptor d;
        d.layer_sizes = {1, random_int(rng, 1, 4)};
        if (rng.uniform01() < 0.5) d.layer_sizes.push_back(random_int(rng, 1, 3));
        d.layer_sizes.push_back(1);
        d.activation = rng.uniform01() < 0.5 ? Activation::sigmoid : Activation::tanh;
        return ModelSpec::mlp(std::move(d));
    }
    return ModelSpec::fixed(kind == 2 ? FixedFunction::canonical_nonlinear : FixedFunction::over_cat1_nonlinear);
}

std::vector<Check> jacobian_checks(std::uint64_t seed) {
    Rng rng(derive_seed(seed, 2));
    const double h = 1e-6;
    double worst = 0;
    for (int t = 0; t < 100; ++t) {
        const ModelSpec model = random_model(rng, t % 4);
        const Vector theta = random_vector(rng, model.param_count());
        const double x = rng.uniform(-1.0, 1.0);
        const Vector analytic = jacobian(model, theta, x);
        Vector fd(theta.size());
        for (Eigen::Index i = 0; i < theta.size(); ++i) {
            Vector up = theta, down = theta;
            up(i) += h;
            down(i) -= h;
            fd(i) = (evaluate(model, up, x) - evaluate(model, down, x)) / (2 * h);
        }
        const double scale = std::max(analytic.cwiseAbs().maxCoeff(), 1e-300);
        worst = std::max(worst, (analytic - fd).cwiseAbs().maxCoeff() / scale);
    }
    return {{"analytic Jacobian matches central differences", worst <= 1e-5,
             "100 (model, theta, x) triples, worst relative error " + sci(worst)}};
}

/// Prediction variance of the polynomial pair [1, x, x^2] vs [1, x, x+1, x^2].
std::vector<Check> category1_checks(std::uint64_t seed) {
    Rng rng(derive_seed(seed, 3));
    const ModelSpec canon = ModelSpec::linear({BasisFunction::constant(), BasisFunction::power(1), BasisFunction::power(2)});
    const ModelSpec over = ModelSpec::linear({BasisFunction::constant(), BasisFunction::power(1),
                                              BasisFunction::affine(1.0, 1.0), BasisFunction::power(2)});
    Matrix t(3, 4);
    t << 1, 0, 1, 0, 0, 1, 1, 0, 0, 0, 0, 1;
    const Category1Transform transform = Category1Transform::validate(t);

    double poly_worst = 0;
    bool rank_deficient = true;
    for (int d = 0; d < 50; ++d) {
        Dataset data;
        for (int n = 0; n < 30; ++n) {
            const double x = rng.uniform(-1.0, 1.0);
            data.inputs.push_back(x);
            data.outputs.push_back(1 + 6 * x + x * x + rng.normal(0.0, 0.5));
        }
        std::vector<double> eval;
        for (int i = 0; i < 50; ++i) eval.push_back(rng.uniform(-1.5, 1.5));
        const FitResult fc = fit(canon, data);
        const FitResult fo = fit(over, data);
        Category1Options opts;
        const EquivalenceReport rep = category1_equivalence({canon, fc.theta_hat}, {over, fo.theta_hat}, transform,
                                                            data, eval, opts);
        poly_worst = std::max(poly_worst, rep.max_relative_difference);
        rank_deficient = rank_deficient && rep.over_rank < 4;
    }

    // Random sigmoid bases and random wide transforms, at the matrix level.
    // Agreement is limited by eps * cond, so ill-conditioned draws are skipped.
    const auto condition = [](const Matrix& m) {
        const Vector s = Eigen::JacobiSVD<Matrix>(m).singularValues();
        return s(0) / s(s.size() - 1);
    };
    double random_worst = 0;
    double invariance_worst = 0;
    int used = 0;
    for (int t_i = 0; used < 50 && t_i < 1000; ++t_i) {
        const int n_c = random_int(rng, 2, 5);
        std::vector<BasisFunction> basis{BasisFunction::constant()};
        for (int i = 1; i < n_c; ++i) basis.push_back(BasisFunction::logistic(rng.normal(0, 3), rng.normal()));
        const ModelSpec model = ModelSpec::linear(basis);
        std::vector<double> xs;
        for (int n = 0; n < 30; ++n) xs.push_back(rng.uniform(-1.0, 1.0));
        const Matrix phi_c = regressor_matrix(model, Vector::Zero(n_c), xs);
        const Vector phi_x = regressor_matrix(model, Vector::Zero(n_c), std::vector<double>{rng.uniform(-1.0, 1.0)}).col(0);
        const Matrix t_a = random_matrix(rng, n_c, n_c + random_int(rng, 1, 3));
        const Matrix t_b = random_matrix(rng, n_c, n_c + random_int(rng, 1, 3));
        if (condition(phi_c * phi_c.transpose()) > 1e6 || condition(t_a) > 1e3 || condition(t_b) > 1e3) continue;
        ++used;

        const double tol_c = information_rank_tolerance(n_c, xs.size());
        const Matrix cov_c = parameter_covariance(phi_c * phi_c.transpose(), 1.0, tol_c).parameter_covariance;
        const double v_c = quadratic_variance(phi_x, cov_c);

        std::vector<double> over_values;
        for (const Matrix* t_raw : {&t_a, &t_b}) {
            const Matrix tt = Category1Transform::validate(*t_raw).T;
            const Matrix phi = tt.transpose() * phi_c;
            const double tol = information_rank_tolerance(tt.cols(), xs.size());
            const Matrix cov = parameter_covariance(phi * phi.transpose(), 1.0, tol).parameter_covariance;
            over_values.push_back(quadratic_variance(tt.transpose() * phi_x, cov));
            random_worst = std::max(random_worst, relative_difference(v_c, over_values.back()));
        }
        invariance_worst = std::max(invariance_worst, relative_difference(over_values[0], over_values[1]));
    }

    return {
        {"polynomial pair variances agree", poly_worst <= 1e-8,
         "50 datasets, N=30, 50 eval points, worst " + sci(poly_worst)},
        {"redundant polynomial information matrix is singular", rank_deficient, ""},
        {"random bases and transforms agree", used == 50 && random_worst <= 1e-8,
         std::to_string(used) + " instances, worst " + sci(random_worst)},
        {"variance does not depend on the choice of T", invariance_worst <= 1e-8, "worst " + sci(invariance_worst)},
    };
}

std::vector<Check> category2_checks(std::uint64_t seed) {
    Rng rng(derive_seed(seed, 4));
    double identity_worst = 0;
    double min_excess = std::numeric_limits<double>::infinity();
    double null_worst = 0;
    for (int t = 0; t < 100; ++t) {
        const Eigen::Index n_c = random_int(rng, 1, 5);
        const Eigen::Index n_o = random_int(rng, 1, 3);
        const Eigen::Index n = random_int(rng, static_cast<int>(n_c + n_o) + 2, 40);
        const Matrix phi_c = random_matrix(rng, n_c, n);
        const Matrix phi_o = random_matrix(rng, n_o, n);
        const BlockDecomposition d = block_decomposition(phi_c, phi_o);
        const Vector pc = random_vector(rng, n_c);
        const Vector po = random_vector(rng, n_o);
        const double lambda = rng.uniform(0.1, 2.0);

        Matrix phi(n_c + n_o, n);
        phi << phi_c, phi_o;
        Vector p(n_c + n_o);
        p << pc, po;
        const double direct = lambda * p.dot((phi * phi.transpose()).ldlt().solve(p));
        const double canonical = lambda * pc.dot((phi_c * phi_c.transpose()).ldlt().solve(pc));
        const double excess = category2_excess(d, pc, po, lambda);
        identity_worst = std::max(identity_worst, relative_difference(direct, canonical + excess));
        min_excess = std::min(min_excess, excess);

        const double at_null = category2_excess(d, pc, d.K * pc, lambda);
        null_worst = std::max(null_worst, at_null / std::max(canonical, 1e-300));
    }

    std::vector<Check> out{
        {"variance = canonical + excess", identity_worst <= 1e-8,
         "100 random instances, worst relative error " + sci(identity_worst)},
        {"excess is nonnegative", min_excess >= 0, "minimum " + sci(min_excess)},
        {"excess vanishes when phi_o = K phi_c", null_worst <= 1e-10, "worst " + sci(null_worst)},
    };

    const ScenarioResult linear = run_scenario(default_config(Scenario::cat2_linear));
    for (const Check& c : linear.checks) out.push_back({"cat2_linear: " + c.name, c.pass, c.detail, c.required});
    return out;
}

std::vector<Check> nonlinear_checks() {
    std::vector<Check> out;
    for (Scenario s : {Scenario::cat1_nonlinear, Scenario::cat2_mlp}) {
        const ScenarioResult r = run_scenario(default_config(s));
        const std::string prefix = std::string(to_string(s)) + ": ";
        if (r.aborted) out.push_back({prefix + "fits", false, r.failed_model + ": " + r.abort_reason});
        for (const Check& c : r.checks) out.push_back({prefix + c.name, c.pass, c.detail, c.required});
    }
    return out;
}

}  // namespace

std::vector<std::string_view> verify_suite_names() {
    return {"linalg", "jacobian", "category1", "category2", "nonlinear", "fast", "all"};
}

std::vector<Check> run_verify_suite(std::string_view suite, std::uint64_t seed) {
    using Runner = std::function<std::vector<Check>()>;
    const std::vector<std::pair<std::string_view, Runner>> suites{
        {"linalg", [&] { return linalg_checks(seed); }},
        {"jacobian", [&] { return jacobian_checks(seed); }},
        {"category1", [&] { return category1_checks(seed); }},
        {"category2", [&] { return category2_checks(seed); }},
        {"nonlinear", [] { return nonlinear_checks(); }},
    };
    std::vector<Check> out;
    bool found = false;
    for (const auto& [name, run] : suites) {
        const bool selected = suite == name || suite == "all" || (suite == "fast" && name != "nonlinear");
        if (!selected) continue;
        found = true;
        for (Check& c : run()) {
            c.name = std::string(name) + "/" + c.name;
            out.push_back(std::move(c));
        }
    }
    if (!found) throw ValidationError("unknown verify suite '" + std::string(suite) + "'");
    return out;
}

}  // namespace deltavar
