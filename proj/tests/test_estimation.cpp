#include "deltavar/estimation.hpp"
#include "test_helpers.hpp"

using namespace deltavar;

namespace {

Dataset make_dataset(std::vector<double> x, std::vector<double> y) { return {std::move(x), std::move(y)}; }

ModelSpec poly(std::initializer_list<BasisFunction> b) { return ModelSpec::linear(b); }

}  // namespace

TEST_CASE("linear fit recovers noise-free parameters") {
    const ModelSpec m = poly({BasisFunction::constant(), BasisFunction::power(1)});
    const FitResult r = fit(m, make_dataset({0, 1, 2}, {1, 3, 5}));
    CHECK(r.theta_hat(0) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(r.theta_hat(1) == doctest::Approx(2.0).epsilon(1e-13));
    CHECK(r.loss_value < 1e-25);
    CHECK(r.converged);
    CHECK(r.restarts_used == 0);
    CHECK(r.warnings.empty());
}

TEST_CASE("redundant linear basis gives the least-norm solution") {
    // [1, x, x+1, x^2] on 1 + 6x + x^2: every solution satisfies T theta = [1, 6, 1].
    const ModelSpec m = poly({BasisFunction::constant(), BasisFunction::power(1), BasisFunction::affine(1, 1),
                              BasisFunction::power(2)});
    Dataset d;
    for (double x : {-1.0, -0.5, 0.0, 0.4, 1.0, 2.0}) {
        d.inputs.push_back(x);
        d.outputs.push_back(1 + 6 * x + x * x);
    }
    const FitResult r = fit(m, d);
    Matrix t(3, 4);
    t << 1, 0, 1, 0, 0, 1, 1, 0, 0, 0, 0, 1;
    const Vector theta_c = (Vector(3) << 1, 6, 1).finished();
    // Minimum-norm point of {theta : T theta = theta_c} is T^T (T T^T)^-1 theta_c.
    const Vector expected = t.transpose() * (t * t.transpose()).ldlt().solve(theta_c);
    CHECK(testing::rel_err(r.theta_hat, expected) < 1e-12);
    CHECK(r.loss_value < 1e-20);
    CHECK(r.design_rank == 3);
    CHECK(r.warnings.size() == 1);
}

TEST_CASE("degenerate inputs warn instead of failing") {
    const ModelSpec m = poly({BasisFunction::constant(), BasisFunction::power(1)});
    const FitResult r = fit(m, make_dataset({2, 2, 2}, {1, 2, 3}));
    CHECK(r.design_rank == 1);
    REQUIRE_FALSE(r.warnings.empty());
    CHECK(r.warnings[0].find("rank-deficient") != std::string::npos);
    CHECK(evaluate(m, r.theta_hat, 2.0) == doctest::Approx(2.0));
}

TEST_CASE("residual variance") {
    const ModelSpec c = poly({BasisFunction::constant()});
    CHECK(residual_variance(c, Vector::Zero(1), make_dataset({0, 1}, {1, -1})) == 1.0);
    CHECK(residual_variance(c, Vector::Constant(1, 4.0), make_dataset({0, 1}, {4, 4})) == 0.0);
    CHECK_THROWS_AS(residual_variance(c, Vector::Zero(1), make_dataset({0, 1}, {1})), ValidationError);
    CHECK_THROWS_AS(residual_variance(c, Vector::Zero(1), make_dataset({}, {})), ValidationError);
    CHECK_THROWS_AS(residual_variance(c, Vector::Zero(1), make_dataset({0}, {std::nan("")})), ValidationError);
}

TEST_CASE("lambda_N is loss / N") {
    Rng rng(31);
    Dataset d;
    for (int n = 0; n < 40; ++n) {
        d.inputs.push_back(rng.uniform(-1, 1));
        d.outputs.push_back(rng.normal());
    }
    const FitResult r = fit(poly({BasisFunction::constant(), BasisFunction::power(2)}), d);
    CHECK(r.lambda_N == r.loss_value / 40.0);
}

TEST_CASE("nested linear families have nonincreasing loss") {
    Rng rng(32);
    Dataset d;
    for (int n = 0; n < 200; ++n) {
        const double x = rng.uniform(-0.6, 0.6);
        d.inputs.push_back(x);
        d.outputs.push_back(magic_formula(x, {}) + rng.normal(0, 0.1));
    }
    double previous = fit(named_model("canonical_linear"), d).loss_value;
    for (int j = 1; j <= 3; ++j) {
        const double current = fit(named_model("over_cat2_linear:" + std::to_string(j)), d).loss_value;
        CHECK(current <= previous * (1 + 1e-12));
        previous = current;
    }
}

TEST_CASE("Levenberg-Marquardt converges on noise-free nonlinear data") {
    const ModelSpec m = named_model("canonical_nonlinear");
    const Vector truth = (Vector(7) << 0.5, -4.0, 0.3, -0.4, 3.0, -0.2, 0.1).finished();
    Dataset d;
    for (int n = 0; n < 60; ++n) {
        const double x = -0.6 + 1.2 * n / 59.0;
        d.inputs.push_back(x);
        d.outputs.push_back(evaluate(m, truth, x));
    }
    const Vector start = truth + 0.05 * Vector::Ones(7);
    const LevenbergMarquardtRun run = levenberg_marquardt(m, d, start, FitOptions{});
    CHECK(run.converged);
    CHECK_FALSE(run.diverged);
    CHECK(run.loss < 1e-12);
    CHECK(evaluate(m, run.theta, 0.25) == doctest::Approx(evaluate(m, truth, 0.25)).epsilon(1e-7));

    // gradient_norm reports |sum_n psi_n eps_n| at the returned theta.
    Vector r(60);
    for (Eigen::Index n = 0; n < 60; ++n) r(n) = d.outputs[n] - evaluate(m, run.theta, d.inputs[n]);
    const double g = (regressor_matrix(m, run.theta, d.inputs) * r).norm();
    CHECK(g == doctest::Approx(run.gradient_norm).epsilon(1e-6).scale(1e-12));
}

TEST_CASE("nonlinear fit is reproducible for a fixed seed") {
    Rng rng(33);
    Dataset d;
    for (int n = 0; n < 80; ++n) {
        const double x = rng.uniform(-0.6, 0.6);
        d.inputs.push_back(x);
        d.outputs.push_back(magic_formula(x, {}) + rng.normal(0, 0.1));
    }
    FitOptions opts;
    opts.restarts = 4;
    opts.max_iterations = 100;
    const FitResult a = fit(named_model("mlp_hidden:2"), d, opts);
    const FitResult b = fit(named_model("mlp_hidden:2"), d, opts);
    CHECK((a.theta_hat.array() == b.theta_hat.array()).all());
    CHECK(a.loss_value == b.loss_value);
    CHECK(a.best_restart_seed == b.best_restart_seed);
    CHECK(a.restarts_used == 4);
    opts.seed = 2;
    const FitResult c = fit(named_model("mlp_hidden:2"), d, opts);
    CHECK(c.best_restart_seed != a.best_restart_seed);
}

TEST_CASE("fit errors") {
    const Dataset d = make_dataset({0, 0.1, 0.2, 0.3}, {0, 1, 0, 1});
    FitOptions opts;
    opts.divergence_bound = 1e-3;  // every accepted step leaves the box
    CHECK_THROWS_AS(fit(named_model("canonical_nonlinear"), d, opts), NonConvergenceError);
    opts = {};
    opts.restarts = 0;
    CHECK_THROWS_AS(fit(named_model("canonical_nonlinear"), d, opts), ValidationError);
    CHECK_THROWS_AS(fit(named_model("canonical_linear"), make_dataset({0, 1}, {0})), ValidationError);
}
