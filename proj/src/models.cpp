#include "deltavar/models.hpp"

#include <charconv>
#include <cmath>
#include <string>

namespace deltavar {

std::string_view to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::linear_in_parameters: return "linear_in_parameters";
        case ModelKind::mlp: return "mlp";
        case ModelKind::fixed_function: return "fixed_function";
    }
    return "unknown";
}

std::string_view to_string(Activation activation) {
    return activation == Activation::sigmoid ? "sigmoid" : "tanh";
}

Activation activation_from_string(std::string_view name) {
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "tanh") return Activation::tanh;
    throw ValidationError("unknown activation '" + std::string(name) + "'");
}

double activate(Activation activation, double a) {
    if (activation == Activation::tanh) return std::tanh(a);
    if (a >= 0) return 1.0 / (1.0 + std::exp(-a));
    const double e = std::exp(a);
    return e / (1.0 + e);
}

double activate_derivative(Activation activation, double a) {
    const double s = activate(activation, a);
    return activation == Activation::tanh ? 1.0 - s * s : s * (1.0 - s);
}

double BasisFunction::operator()(double x) const {
    switch (type) {
        case Type::constant: return 1.0;
        case Type::power: return std::pow(x, exponent);
        case Type::affine: return weight * x + offset;
        case Type::sigmoid: return activate(Activation::sigmoid, weight * x + offset);
        case Type::tanh: return activate(Activation::tanh, weight * x + offset);
    }
    return 0.0;
}

Eigen::Index MlpDescriptor::param_count() const {
    Eigen::Index n = 0;
    for (int l = 0; l < depth(); ++l) n += Eigen::Index(layer_sizes[l] + 1) * layer_sizes[l + 1];
    return n;
}

Eigen::Index MlpDescriptor::weight_offset(int layer) const {
    // Output layer first: W^(L-1) sits at offset 0.
    Eigen::Index offset = 0;
    for (int l = depth() - 1; l > layer; --l) offset += Eigen::Index(layer_sizes[l] + 1) * layer_sizes[l + 1];
    return offset;
}

std::string_view to_string(FixedFunction f) {
    return f == FixedFunction::canonical_nonlinear ? "canonical_nonlinear" : "over_cat1_nonlinear";
}

FixedFunction fixed_function_from_string(std::string_view name) {
    if (name == "canonical_nonlinear") return FixedFunction::canonical_nonlinear;
    if (name == "over_cat1_nonlinear") return FixedFunction::over_cat1_nonlinear;
    throw ValidationError("unknown fixed function '" + std::string(name) + "'");
}

ModelSpec ModelSpec::linear(std::vector<BasisFunction> basis) {
    if (basis.empty()) throw ValidationError("linear model needs at least one basis function");
    for (const auto& b : basis) {
        if (!std::isfinite(b.weight) || !std::isfinite(b.offset)) {
            throw ValidationError("basis function constants must be finite");
        }
        if (b.type == BasisFunction::Type::power && b.exponent < 0) {
            throw ValidationError("basis power exponent must be nonnegative");
        }
    }
    return ModelSpec(std::move(basis));
}

ModelSpec ModelSpec::mlp(MlpDescriptor descriptor) {
    const auto& sizes = descriptor.layer_sizes;
    if (sizes.size() < 2) throw ValidationError("mlp needs at least an input and an output layer");
    if (sizes.front() != 1) throw ValidationError("mlp input dimension must be 1");
    if (sizes.back() != 1) throw ValidationError("mlp output dimension must be 1");
    for (int s : sizes) {
        if (s < 1) throw ValidationError("mlp layer sizes must be positive");
    }
    return ModelSpec(std::move(descriptor));
}

ModelSpec ModelSpec::fixed(FixedFunction function) { return ModelSpec(function); }

ModelKind ModelSpec::kind() const {
    switch (descriptor_.index()) {
        case 0: return ModelKind::linear_in_parameters;
        case 1: return ModelKind::mlp;
        default: return ModelKind::fixed_function;
    }
}

Eigen::Index ModelSpec::param_count() const {
    switch (kind()) {
        case ModelKind::linear_in_parameters: return static_cast<Eigen::Index>(basis().size());
        case ModelKind::mlp: return mlp_descriptor().param_count();
        case ModelKind::fixed_function: return fixed_function() == FixedFunction::canonical_nonlinear ? 7 : 8;
    }
    return 0;
}

const std::vector<BasisFunction>& ModelSpec::basis() const {
    if (const auto* b = std::get_if<std::vector<BasisFunction>>(&descriptor_)) return *b;
    throw ValidationError("model is not linear in its parameters");
}

const MlpDescriptor& ModelSpec::mlp_descriptor() const {
    if (const auto* d = std::get_if<MlpDescriptor>(&descriptor_)) return *d;
    throw ValidationError("model is not an mlp");
}

FixedFunction ModelSpec::fixed_function() const {
    if (const auto* f = std::get_if<FixedFunction>(&descriptor_)) return *f;
    throw ValidationError("model is not a fixed function");
}

namespace {

void check_arguments(const ModelSpec& model, const Vector& theta, double x) {
    if (theta.size() != model.param_count()) {
        throw ValidationError("parameter vector has length " + std::to_string(theta.size()) + ", model expects " +
                              std::to_string(model.param_count()));
    }
    if (!theta.allFinite() || !std::isfinite(x)) throw ValidationError("non-finite model argument");
}

struct MlpPass {
    std::vector<Vector> pre;   // a^(l), l = 1..L (index l-1)
    std::vector<Vector> post;  // h^(l), l = 0..L-1
};

using ConstWeights = Eigen::Map<const Matrix>;

ConstWeights layer_weights(const MlpDescriptor& d, const Vector& theta, int layer) {
    return ConstWeights(theta.data() + d.weight_offset(layer), d.layer_sizes[layer] + 1, d.layer_sizes[layer + 1]);
}

MlpPass mlp_forward(const MlpDescriptor& d, const Vector& theta, double x) {
    MlpPass pass;
    Vector h = Vector::Constant(1, x);
    for (int l = 0; l < d.depth(); ++l) {
        const auto w = layer_weights(d, theta, l);
        const Eigen::Index n = d.layer_sizes[l];
        Vector a = w.topRows(n).transpose() * h + w.row(n).transpose();
        pass.post.push_back(h);
        if (l + 1 < d.depth()) h = a.unaryExpr([&](double v) { return activate(d.activation, v); });
        pass.pre.push_back(std::move(a));
    }
    return pass;
}

Vector mlp_gradient(const MlpDescriptor& d, const Vector& theta, double x) {
    const MlpPass pass = mlp_forward(d, theta, x);
    Vector grad(d.param_count());
    Vector delta = Vector::Ones(1);  // df/da^(L)
    for (int l = d.depth() - 1; l >= 0; --l) {
        const Eigen::Index n = d.layer_sizes[l];
        const Vector& h = pass.post[l];
        Eigen::Map<Matrix> g(grad.data() + d.weight_offset(l), n + 1, d.layer_sizes[l + 1]);
        g.topRows(n) = h * delta.transpose();
        g.row(n) = delta.transpose();
        if (l > 0) {
            const auto w = layer_weights(d, theta, l);
            const Vector slope = pass.pre[l - 1].unaryExpr([&](double v) { return activate_derivative(d.activation, v); });
            delta = slope.cwiseProduct(w.topRows(n) * delta);
        }
    }
    return grad;
}

double fixed_evaluate(FixedFunction f, const Vector& t, double x) {
    if (f == FixedFunction::canonical_nonlinear) {
        return t(0) * sigmoid(t(1) * x + t(2)) + t(3) * sigmoid(t(4) * x + t(5)) + t(6);
    }
    return t(0) * sigmoid(t(1) * (x + 1) + t(2) * (2 - x) + 5 * t(3)) + t(4) * sigmoid(t(5) * x + t(6)) + t(7);
}

Vector fixed_gradient(FixedFunction f, const Vector& t, double x) {
    const auto ds = [](double a) { return activate_derivative(Activation::sigmoid, a); };
    if (f == FixedFunction::canonical_nonlinear) {
        const double a1 = t(1) * x + t(2);
        const double a2 = t(4) * x + t(5);
        Vector g(7);
        g << sigmoid(a1), t(0) * ds(a1) * x, t(0) * ds(a1), sigmoid(a2), t(3) * ds(a2) * x, t(3) * ds(a2), 1.0;
        return g;
    }
    const double a1 = t(1) * (x + 1) + t(2) * (2 - x) + 5 * t(3);
    const double a2 = t(5) * x + t(6);
    const double s1 = t(0) * ds(a1);
    Vector g(8);
    g << sigmoid(a1), s1 * (x + 1), s1 * (2 - x), 5 * s1, sigmoid(a2), t(4) * ds(a2) * x, t(4) * ds(a2), 1.0;
    return g;
}

Vector basis_values(const std::vector<BasisFunction>& basis, double x) {
    Vector phi(static_cast<Eigen::Index>(basis.size()));
    for (std::size_t i = 0; i < basis.size(); ++i) phi(static_cast<Eigen::Index>(i)) = basis[i](x);
    return phi;
}

}  // namespace

double evaluate(const ModelSpec& model, const Vector& theta, double x) {
    check_arguments(model, theta, x);
    switch (model.kind()) {
        case ModelKind::linear_in_parameters: return basis_values(model.basis(), x).dot(theta);
        case ModelKind::mlp: return mlp_forward(model.mlp_descriptor(), theta, x).pre.back()(0);
        case ModelKind::fixed_function: return fixed_evaluate(model.fixed_function(), theta, x);
    }
    return 0.0;
}

Vector jacobian(const ModelSpec& model, const Vector& theta, double x) {
    check_arguments(model, theta, x);
    switch (model.kind()) {
        case ModelKind::linear_in_parameters: return basis_values(model.basis(), x);
        case ModelKind::mlp: return mlp_gradient(model.mlp_descriptor(), theta, x);
        case ModelKind::fixed_function: return fixed_gradient(model.fixed_function(), theta, x);
    }
    return {};
}

Matrix regressor_matrix(const ModelSpec& model, const Vector& theta, std::span<const double> inputs) {
    Matrix phi(model.param_count(), static_cast<Eigen::Index>(inputs.size()));
    for (std::size_t n = 0; n < inputs.size(); ++n) phi.col(static_cast<Eigen::Index>(n)) = jacobian(model, theta, inputs[n]);
    return phi;
}

double magic_formula(double x, const MagicFormulaParams& p) {
    if (!std::isfinite(x) || !std::isfinite(p.B) || !std::isfinite(p.C) || !std::isfinite(p.D) || !std::isfinite(p.E)) {
        throw ValidationError("magic_formula: non-finite argument");
    }
    const double bx = p.B * x;
    return p.D * std::sin(p.C * std::atan(bx - p.E * (bx - std::atan(bx))));
}

namespace {

struct ParsedTag {
    std::string name;
    int arg = 0;
    bool has_arg = false;
};

ParsedTag parse_tag(std::string_view tag) {
    ParsedTag out;
    std::string_view arg;
    if (const auto colon = tag.find(':'); colon != std::string_view::npos) {
        out.name = tag.substr(0, colon);
        arg = tag.substr(colon + 1);
    } else if (const auto paren = tag.find('('); paren != std::string_view::npos && tag.back() == ')') {
        out.name = tag.substr(0, paren);
        arg = tag.substr(paren + 1, tag.size() - paren - 2);
    } else {
        out.name = tag;
        return out;
    }
    const auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), out.arg);
    if (ec != std::errc{} || ptr != arg.data() + arg.size()) {
        throw ValidationError("malformed model tag '" + std::string(tag) + "'");
    }
    out.has_arg = true;
    return out;
}

std::vector<BasisFunction> canonical_linear_basis() {
    return {BasisFunction::logistic(-40.0, 0.0061), BasisFunction::logistic(-6.8, 0.0036), BasisFunction::constant()};
}

}  // namespace

std::string canonical_tag(std::string_view tag) {
    const ParsedTag p = parse_tag(tag);
    const bool wants_arg = p.name == "over_cat2_linear" || p.name == "mlp_hidden";
    const bool known = wants_arg || p.name == "canonical_nonlinear" || p.name == "over_cat1_nonlinear" ||
                       p.name == "canonical_linear";
    if (!known) throw ValidationError("unknown model tag '" + std::string(tag) + "'");
    if (wants_arg != p.has_arg) throw ValidationError("model tag '" + std::string(tag) + "' has wrong arity");
    if (p.name == "over_cat2_linear" && (p.arg < 1 || p.arg > 3)) {
        throw ValidationError("over_cat2_linear expects j in 1..3");
    }
    if (p.name == "mlp_hidden" && p.arg < 2) throw ValidationError("mlp_hidden expects k >= 2");
    return wants_arg ? p.name + ":" + std::to_string(p.arg) : p.name;
}

ModelSpec named_model(std::string_view tag) {
    const ParsedTag p = parse_tag(canonical_tag(tag));
    if (p.name == "canonical_nonlinear") return ModelSpec::fixed(FixedFunction::canonical_nonlinear);
    if (p.name == "over_cat1_nonlinear") return ModelSpec::fixed(FixedFunction::over_cat1_nonlinear);
    if (p.name == "canonical_linear") return ModelSpec::linear(canonical_linear_basis());
    if (p.name == "over_cat2_linear") {
        // Nested family: model j carries the sigmoid regressors of models 1..j-1.
        auto basis = canonical_linear_basis();
        for (int o = 1; o <= p.arg; ++o) basis.push_back(BasisFunction::logistic(o, o));
        return ModelSpec::linear(std::move(basis));
    }
    return ModelSpec::mlp({{1, p.arg, 1}, Activation::sigmoid});
}

Vector canonical_to_mlp_parameters(const Vector& theta_c) {
    if (theta_c.size() != 7) throw ValidationError("canonical_nonlinear has 7 parameters");
    // W^(1) = [th1; th4; th7], W^(0) = [[th2, th5], [th3, th6]]
    Vector out(7);
    out << theta_c(0), theta_c(3), theta_c(6), theta_c(1), theta_c(2), theta_c(4), theta_c(5);
    return out;
}

Matrix cat1_nonlinear_transform() {
    // inner argument: (th2 - th3) x + (th2 + 2 th3 + 5 th4)
    Matrix t = Matrix::Zero(7, 8);
    t(0, 0) = 1;
    t(1, 1) = 1;
    t(1, 2) = -1;
    t(2, 1) = 1;
    t(2, 2) = 2;
    t(2, 3) = 5;
    t(3, 4) = 1;
    t(4, 5) = 1;
    t(5, 6) = 1;
    t(6, 7) = 1;
    return t;
}

}  // namespace deltavar
