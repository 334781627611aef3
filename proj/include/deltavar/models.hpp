#pragma once

#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "deltavar/linalg.hpp"

namespace deltavar {

enum class ModelKind { linear_in_parameters, mlp, fixed_function };
enum class Activation { sigmoid, tanh };

std::string_view to_string(ModelKind kind);
std::string_view to_string(Activation activation);
Activation activation_from_string(std::string_view name);

double activate(Activation activation, double a);
/// d/da of activate(activation, a).
double activate_derivative(Activation activation, double a);

inline double sigmoid(double a) { return activate(Activation::sigmoid, a); }

/// One scalar regressor phi_i(x) of a model that is linear in its parameters.
struct BasisFunction {
    enum class Type { constant, power, affine, sigmoid, tanh };

    Type type = Type::constant;
    int exponent = 0;  // power: x^exponent
    double weight = 0; // affine: weight*x + offset; sigmoid/tanh: act(weight*x + offset)
    double offset = 0;

    static BasisFunction constant() { return {}; }
    static BasisFunction power(int k) { return {Type::power, k, 0, 0}; }
    static BasisFunction affine(double w, double b) { return {Type::affine, 0, w, b}; }
    static BasisFunction logistic(double w, double b) { return {Type::sigmoid, 0, w, b}; }
    static BasisFunction hyperbolic(double w, double b) { return {Type::tanh, 0, w, b}; }

    double operator()(double x) const;
    bool operator==(const BasisFunction&) const = default;
};

/// Fully connected network. layer_sizes = [n_x, hidden_1, ..., 1]; the output
/// layer is affine (no activation).
///
/// Layer l maps h^(l) to a^(l+1) = W^(l)^T [h^(l); 1], where W^(l) has shape
/// (n_l + 1) x n_{l+1} and its last row holds the biases. The parameter
/// vector stacks Vec(W^(L-1)), ..., Vec(W^(0)) (output layer first), each Vec
/// stacking columns.
struct MlpDescriptor {
    std::vector<int> layer_sizes;
    Activation activation = Activation::sigmoid;

    Eigen::Index param_count() const;
    /// Number of weight layers L.
    int depth() const { return static_cast<int>(layer_sizes.size()) - 1; }
    /// Offset of Vec(W^(layer)) inside theta.
    Eigen::Index weight_offset(int layer) const;
    bool operator==(const MlpDescriptor&) const = default;
};

/// Closed-form nonlinear models with hard-coded structure.
enum class FixedFunction {
    /// th1 s(th2 x + th3) + th4 s(th5 x + th6) + th7
    canonical_nonlinear,
    /// th1 s(th2 (x+1) + th3 (2-x) + 5 th4) + th5 s(th6 x + th7) + th8
    over_cat1_nonlinear,
};

std::string_view to_string(FixedFunction f);
FixedFunction fixed_function_from_string(std::string_view name);

/// A differentiable scalar model f(x; theta) with input dimension 1.
class ModelSpec {
public:
    static ModelSpec linear(std::vector<BasisFunction> basis);
    static ModelSpec mlp(MlpDescriptor descriptor);
    static ModelSpec fixed(FixedFunction function);

    ModelKind kind() const;
    Eigen::Index param_count() const;
    Eigen::Index input_dim() const { return 1; }

    const std::vector<BasisFunction>& basis() const;
    const MlpDescriptor& mlp_descriptor() const;
    FixedFunction fixed_function() const;

    bool operator==(const ModelSpec&) const = default;

private:
    using Descriptor = std::variant<std::vector<BasisFunction>, MlpDescriptor, FixedFunction>;
    explicit ModelSpec(Descriptor d) : descriptor_(std::move(d)) {}
    Descriptor descriptor_;
};

double evaluate(const ModelSpec& model, const Vector& theta, double x);

/// Exact d f / d theta in the model's parameter order.
Vector jacobian(const ModelSpec& model, const Vector& theta, double x);

/// Regressor matrix Phi = [psi(x_1) ... psi(x_N)] (param_count x N).
Matrix regressor_matrix(const ModelSpec& model, const Vector& theta, std::span<const double> inputs);

struct MagicFormulaParams {
    double B = 14.0;  // stiffness
    double C = 0.1;   // shape
    double D = 0.6;   // peak
    double E = -0.2;  // curvature
};

/// Pacejka's tire model D sin(C atan(Bx - E(Bx - atan(Bx)))).
double magic_formula(double x, const MagicFormulaParams& p);

/// Builds a named model: canonical_nonlinear, over_cat1_nonlinear,
/// canonical_linear, over_cat2_linear:j (j = 1..3), mlp_hidden:k (k >= 2).
/// The forms over_cat2_linear(j) and mlp_hidden(k) are accepted as well.
ModelSpec named_model(std::string_view tag);

/// Normalizes a tag to the "name:arg" form; throws on unknown tags.
std::string canonical_tag(std::string_view tag);

/// Parameters of canonical_nonlinear mapped to the [1, 2, 1] sigmoid MLP layout.
Vector canonical_to_mlp_parameters(const Vector& theta_c);

/// T (7 x 8) with theta_canonical = T theta_over for over_cat1_nonlinear.
Matrix cat1_nonlinear_transform();

}  // namespace deltavar
