#include <cmath>

#include "deltavar/models.hpp"
#include "test_helpers.hpp"

using namespace deltavar;

namespace {

double logistic(double a) { return 1.0 / (1.0 + std::exp(-a)); }

Vector central_difference(const ModelSpec& m, const Vector& theta, double x, double h = 1e-6) {
    Vector g(theta.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        Vector up = theta, down = theta;
        up(i) += h;
        down(i) -= h;
        g(i) = (evaluate(m, up, x) - evaluate(m, down, x)) / (2 * h);
    }
    return g;
}

Vector random_theta(Rng& rng, Eigen::Index n, double sd = 1.0) {
    Vector t(n);
    for (Eigen::Index i = 0; i < n; ++i) t(i) = rng.normal(0.0, sd);
    return t;
}

}  // namespace

TEST_CASE("magic formula") {
    const MagicFormulaParams p;
    CHECK(magic_formula(0.0, p) == 0.0);
    // mpmath, 30 digits: 0.6 sin(0.1 atan(1.4 + 0.2 (1.4 - atan 1.4)))
    CHECK(magic_formula(0.1, p) == doctest::Approx(0.0586861359898324).epsilon(1e-14));
    for (double x : {0.1, 0.3, 0.6}) CHECK(magic_formula(-x, p) == -magic_formula(x, p));
    const MagicFormulaParams other{3.0, 1.3, 2.0, 0.5};
    for (double x : {0.05, 0.7, 2.5}) CHECK(magic_formula(-x, other) == -magic_formula(x, other));
    CHECK_THROWS_AS(magic_formula(std::nan(""), p), ValidationError);
}

TEST_CASE("linear-in-parameters models") {
    const ModelSpec m = ModelSpec::linear({BasisFunction::constant(), BasisFunction::power(1)});
    CHECK(evaluate(m, Vector::LinSpaced(2, 1, 2), 3.0) == 7.0);

    const ModelSpec quad =
        ModelSpec::linear({BasisFunction::constant(), BasisFunction::power(1), BasisFunction::power(2)});
    const Vector psi = jacobian(quad, Vector::Constant(3, 0.3), 2.0);
    CHECK(psi(0) == 1.0);
    CHECK(psi(1) == 2.0);
    CHECK(psi(2) == 4.0);

    Rng rng(21);
    const ModelSpec mixed = ModelSpec::linear({BasisFunction::logistic(-40, 0.0061), BasisFunction::affine(2, -1),
                                               BasisFunction::hyperbolic(3, 0.5), BasisFunction::power(3)});
    for (int t = 0; t < 20; ++t) {
        const Vector a = random_theta(rng, 4);
        const Vector b = random_theta(rng, 4);
        const double x = rng.uniform(-1, 1);
        CHECK(evaluate(mixed, a + b, x) == doctest::Approx(evaluate(mixed, a, x) + evaluate(mixed, b, x)).epsilon(1e-13));
        const Vector ja = jacobian(mixed, a, x);
        const Vector jb = jacobian(mixed, b, x);
        CHECK((ja.array() == jb.array()).all());  // bitwise theta-independent
    }
}

TEST_CASE("mlp with zero weights") {
    const ModelSpec m = ModelSpec::mlp({{1, 2, 1}, Activation::sigmoid});
    REQUIRE(m.param_count() == 7);
    Vector theta = Vector::Zero(7);
    theta(2) = 0.75;  // output bias: last row of W^(1), which comes first
    CHECK(evaluate(m, theta, 0.4) == 0.75);
    const Vector g = jacobian(m, theta, 0.4);
    CHECK(g(0) == 0.5);  // output weights see h = sigmoid(0)
    CHECK(g(1) == 0.5);
    CHECK(g(2) == 1.0);
    CHECK(g.tail(4).isZero());
}

TEST_CASE("mlp forward pass matches a hand-written network") {
    Rng rng(22);
    const MlpDescriptor d{{1, 3, 2, 1}, Activation::tanh};
    const ModelSpec m = ModelSpec::mlp(d);
    REQUIRE(m.param_count() == (2 + 1) * 1 + (3 + 1) * 2 + (1 + 1) * 3);
    const Vector theta = random_theta(rng, m.param_count());
    // Output layer first, each W^(l) column-major with biases in the last row.
    const Eigen::Map<const Matrix> w2(theta.data(), 3, 1);
    const Eigen::Map<const Matrix> w1(theta.data() + 3, 4, 2);
    const Eigen::Map<const Matrix> w0(theta.data() + 11, 2, 3);
    for (double x : {-0.7, 0.0, 0.3}) {
        Eigen::Vector3d h1;
        for (int j = 0; j < 3; ++j) h1(j) = std::tanh(w0(0, j) * x + w0(1, j));
        Eigen::Vector2d h2;
        for (int j = 0; j < 2; ++j) h2(j) = std::tanh(w1.col(j).head(3).dot(h1) + w1(3, j));
        const double f = w2(0, 0) * h2(0) + w2(1, 0) * h2(1) + w2(2, 0);
        CHECK(evaluate(m, theta, x) == doctest::Approx(f).epsilon(1e-14));
    }
    CHECK(d.weight_offset(2) == 0);
    CHECK(d.weight_offset(1) == 3);
    CHECK(d.weight_offset(0) == 11);
}

TEST_CASE("canonical nonlinear model is the [1,2,1] sigmoid network") {
    Rng rng(23);
    const ModelSpec canon = named_model("canonical_nonlinear");
    const ModelSpec net = named_model("mlp_hidden:2");
    for (int t = 0; t < 20; ++t) {
        const Vector theta = random_theta(rng, 7, 2.0);
        const double x = rng.uniform(-0.6, 0.6);
        const double direct = theta(0) * logistic(theta(1) * x + theta(2)) + theta(3) * logistic(theta(4) * x + theta(5)) + theta(6);
        CHECK(evaluate(canon, theta, x) == doctest::Approx(direct).epsilon(1e-14));
        CHECK(evaluate(net, canonical_to_mlp_parameters(theta), x) == doctest::Approx(direct).epsilon(1e-14));
    }
}

TEST_CASE("redundant nonlinear model reduces to the canonical one") {
    Rng rng(24);
    const ModelSpec canon = named_model("canonical_nonlinear");
    const ModelSpec over = named_model("over_cat1_nonlinear");
    const Matrix t = cat1_nonlinear_transform();
    REQUIRE(t.rows() == 7);
    REQUIRE(t.cols() == 8);
    for (int i = 0; i < 20; ++i) {
        const Vector theta = random_theta(rng, 8);
        const double x = rng.uniform(-0.6, 0.6);
        const double direct = theta(0) * logistic(theta(1) * (x + 1) + theta(2) * (2 - x) + 5 * theta(3)) +
                              theta(4) * logistic(theta(5) * x + theta(6)) + theta(7);
        CHECK(evaluate(over, theta, x) == doctest::Approx(direct).epsilon(1e-14));
        CHECK(evaluate(canon, t * theta, x) == doctest::Approx(direct).epsilon(1e-13));
        // psi = T^T psi_c by the chain rule.
        CHECK(testing::rel_err(jacobian(over, theta, x), t.transpose() * jacobian(canon, t * theta, x)) < 1e-14);
    }
}

TEST_CASE("model zoo structure") {
    CHECK(named_model("canonical_nonlinear").param_count() == 7);
    CHECK(named_model("over_cat1_nonlinear").param_count() == 8);
    CHECK(named_model("canonical_linear").param_count() == 3);
    for (int j = 1; j <= 3; ++j) {
        const ModelSpec m = named_model("over_cat2_linear:" + std::to_string(j));
        CHECK(m.param_count() == 3 + j);
        CHECK(m.basis().back() == BasisFunction::logistic(j, j));
    }
    CHECK(named_model("over_cat2_linear(2)") == named_model("over_cat2_linear:2"));
    CHECK(named_model("mlp_hidden:5").param_count() == 16);
    CHECK(canonical_tag("mlp_hidden(4)") == "mlp_hidden:4");

    const Vector phi0 = jacobian(named_model("canonical_linear"), Vector::Zero(3), 0.0);
    CHECK(phi0(0) == doctest::Approx(0.501524995271247).epsilon(1e-14));  // mpmath sigmoid(0.0061)
    CHECK(phi0(1) == doctest::Approx(0.500899999028001).epsilon(1e-14));  // mpmath sigmoid(0.0036)
    CHECK(phi0(2) == 1.0);
}

TEST_CASE("model construction errors") {
    CHECK_THROWS_AS(named_model("nope"), ValidationError);
    CHECK_THROWS_AS(named_model("over_cat2_linear:0"), ValidationError);
    CHECK_THROWS_AS(named_model("over_cat2_linear:4"), ValidationError);
    CHECK_THROWS_AS(named_model("mlp_hidden:1"), ValidationError);
    CHECK_THROWS_AS(named_model("mlp_hidden"), ValidationError);
    CHECK_THROWS_AS(named_model("canonical_linear:2"), ValidationError);
    CHECK_THROWS_AS(named_model("mlp_hidden:x"), ValidationError);
    CHECK_THROWS_AS(ModelSpec::linear({}), ValidationError);
    CHECK_THROWS_AS(ModelSpec::mlp({{1, 0, 1}, Activation::sigmoid}), ValidationError);
    CHECK_THROWS_AS(ModelSpec::mlp({{2, 3, 1}, Activation::sigmoid}), ValidationError);
    CHECK_THROWS_AS(activation_from_string("relu"), ValidationError);

    const ModelSpec m = named_model("canonical_linear");
    CHECK_THROWS_AS(evaluate(m, Vector::Zero(2), 0.0), ValidationError);
    CHECK_THROWS_AS(jacobian(m, Vector::Zero(4), 0.0), ValidationError);
    CHECK_THROWS_AS(m.mlp_descriptor(), ValidationError);
}

TEST_CASE("analytic Jacobians match central differences for every model kind") {
    Rng rng(25);
    std::vector<ModelSpec> models = {
        named_model("canonical_nonlinear"), named_model("over_cat1_nonlinear"), named_model("canonical_linear"),
        named_model("over_cat2_linear:3"),  named_model("mlp_hidden:4"),
        ModelSpec::mlp({{1, 3, 2, 1}, Activation::tanh}),
        ModelSpec::mlp({{1, 2, 2, 2, 1}, Activation::sigmoid}),
    };
    for (int t = 0; t < 100; ++t) {
        const ModelSpec& m = models[static_cast<std::size_t>(t) % models.size()];
        const Vector theta = random_theta(rng, m.param_count());
        const double x = rng.uniform(-1, 1);
        const Vector analytic = jacobian(m, theta, x);
        const Vector fd = central_difference(m, theta, x);
        CAPTURE(t);
        CHECK((analytic - fd).cwiseAbs().maxCoeff() <= 1e-5 * analytic.cwiseAbs().maxCoeff());
    }
}

TEST_CASE("activations") {
    CHECK(activate(Activation::sigmoid, 0.0) == 0.5);
    CHECK(activate(Activation::sigmoid, -800.0) == 0.0);
    CHECK(activate(Activation::sigmoid, 800.0) == 1.0);
    CHECK(activate_derivative(Activation::sigmoid, 0.0) == 0.25);
    CHECK(activate_derivative(Activation::tanh, 0.0) == 1.0);
    CHECK(std::isfinite(activate_derivative(Activation::sigmoid, -1000.0)));
    CHECK(activation_from_string("tanh") == Activation::tanh);
}
