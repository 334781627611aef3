#include "deltavar/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace deltavar {

using nlohmann::json;

std::string_view to_string(Scenario scenario) {
    switch (scenario) {
        case Scenario::cat1_nonlinear: return "cat1_nonlinear";
        case Scenario::cat2_linear: return "cat2_linear";
        case Scenario::cat2_mlp: return "cat2_mlp";
        case Scenario::custom: return "custom";
    }
    return "unknown";
}

Scenario scenario_from_string(std::string_view name) {
    for (Scenario s : {Scenario::cat1_nonlinear, Scenario::cat2_linear, Scenario::cat2_mlp, Scenario::custom}) {
        if (to_string(s) == name) return s;
    }
    throw ValidationError("unknown scenario '" + std::string(name) + "'");
}

std::string_view to_string(ComparisonLambda mode) {
    return mode == ComparisonLambda::canonical ? "canonical" : "per_model";
}

ComparisonLambda comparison_lambda_from_string(std::string_view name) {
    if (name == "canonical") return ComparisonLambda::canonical;
    if (name == "per_model") return ComparisonLambda::per_model;
    throw ValidationError("unknown comparison_lambda '" + std::string(name) + "' (canonical | per_model)");
}

void ExperimentConfig::validate() const {
    if (data.N < 1) throw ValidationError("config: data.N must be positive");
    if (!(data.x_lo < data.x_hi)) throw ValidationError("config: data.x_range needs lo < hi");
    if (!std::isfinite(data.x_lo) || !std::isfinite(data.x_hi)) throw ValidationError("config: data.x_range not finite");
    if (!(data.noise_variance >= 0) || !std::isfinite(data.noise_variance)) {
        throw ValidationError("config: data.noise_variance must be finite and nonnegative");
    }
    if (eval.N_v < 1) throw ValidationError("config: eval.N_v must be at least 1");
    for (double v : {magic.B, magic.C, magic.D, magic.E}) {
        if (!std::isfinite(v)) throw ValidationError("config: magic parameters must be finite");
    }
    if (scenario == Scenario::cat2_mlp && mlp_max_width < 2) {
        throw ValidationError("config: mlp_max_width must be at least 2");
    }
    if (scenario != Scenario::custom && !models.empty()) {
        throw ValidationError("config: models is only read by the custom scenario");
    }
    if (scenario == Scenario::custom && models.empty()) {
        throw ValidationError("config: the custom scenario needs a nonempty models list");
    }
    if (!(nonlinear_tolerance > 0) || !(loss_gap_tolerance >= 0)) {
        throw ValidationError("config: tolerances must be positive");
    }
    if (rank_tolerance && !(*rank_tolerance >= 0)) throw ValidationError("config: rank_tolerance must be nonnegative");
    if (fit.restarts < 1 || fit.max_iterations < 1) {
        throw ValidationError("config: fit.restarts and fit.max_iterations must be positive");
    }
    if (!(fit.init_stddev > 0) || !(fit.initial_damping > 0) || !(fit.divergence_bound > 0)) {
        throw ValidationError("config: fit.init_stddev, initial_damping and divergence_bound must be positive");
    }
    for (const ModelEntry& m : scenario_models(*this)) {
        if (static_cast<Eigen::Index>(data.N) < m.spec.param_count()) {
            throw ValidationError("config: data.N = " + std::to_string(data.N) + " is smaller than the " +
                                  std::to_string(m.spec.param_count()) + " parameters of " + m.id);
        }
    }
}

ExperimentConfig default_config(Scenario scenario) {
    ExperimentConfig cfg;
    cfg.scenario = scenario;
    return cfg;
}

std::vector<ModelEntry> scenario_models(const ExperimentConfig& cfg) {
    std::vector<std::string> tags;
    switch (cfg.scenario) {
        case Scenario::cat1_nonlinear:
            tags = {"canonical_nonlinear", "over_cat1_nonlinear"};
            break;
        case Scenario::cat2_linear:
            tags = {"canonical_linear", "over_cat2_linear:1", "over_cat2_linear:2", "over_cat2_linear:3"};
            break;
        case Scenario::cat2_mlp:
            for (int k = 2; k <= cfg.mlp_max_width; ++k) tags.push_back("mlp_hidden:" + std::to_string(k));
            break;
        case Scenario::custom:
            return cfg.models;
    }
    std::vector<ModelEntry> out;
    for (const std::string& tag : tags) out.push_back({tag, named_model(tag)});
    return out;
}

namespace {

std::string_view basis_type_name(BasisFunction::Type t) {
    switch (t) {
        case BasisFunction::Type::constant: return "constant";
        case BasisFunction::Type::power: return "power";
        case BasisFunction::Type::affine: return "affine";
        case BasisFunction::Type::sigmoid: return "sigmoid";
        case BasisFunction::Type::tanh: return "tanh";
    }
    return "unknown";
}

void reject_unknown_keys(const json& j, std::initializer_list<std::string_view> known, const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (std::string_view k : known) ok = ok || key == k;
        if (!ok) throw ValidationError("config: unknown key '" + key + "' in " + where);
    }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ValidationError("config: bad value for " + where + "." + key + ": " + e.what());
    }
}

json model_to_json(const ModelSpec& model) {
    json j;
    j["kind"] = std::string(to_string(model.kind()));
    switch (model.kind()) {
        case ModelKind::linear_in_parameters: {
            json basis = json::array();
            for (const BasisFunction& b : model.basis()) {
                json e;
                e["type"] = std::string(basis_type_name(b.type));
                if (b.type == BasisFunction::Type::power) e["exponent"] = b.exponent;
                if (b.type != BasisFunction::Type::constant && b.type != BasisFunction::Type::power) {
                    e["weight"] = b.weight;
                    e["offset"] = b.offset;
                }
                basis.push_back(e);
            }
            j["basis"] = basis;
            break;
        }
        case ModelKind::mlp:
            j["layer_sizes"] = model.mlp_descriptor().layer_sizes;
            j["activation"] = std::string(to_string(model.mlp_descriptor().activation));
            break;
        case ModelKind::fixed_function:
            j["function"] = std::string(to_string(model.fixed_function()));
            break;
    }
    return j;
}

ModelSpec model_from_json(const json& j) {
    if (!j.is_object() || !j.contains("kind")) throw ValidationError("config: a model needs a 'kind'");
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "linear_in_parameters") {
        reject_unknown_keys(j, {"kind", "basis", "id"}, "model");
        if (!j.contains("basis") || !j.at("basis").is_array()) throw ValidationError("config: linear model needs 'basis'");
        std::vector<BasisFunction> basis;
        for (const json& e : j.at("basis")) {
            reject_unknown_keys(e, {"type", "exponent", "weight", "offset"}, "basis");
            const std::string type = e.value("type", "");
            const double w = e.value("weight", 1.0);
            const double b = e.value("offset", 0.0);
            if (type == "constant") basis.push_back(BasisFunction::constant());
            else if (type == "power") basis.push_back(BasisFunction::power(e.value("exponent", 1)));
            else if (type == "affine") basis.push_back(BasisFunction::affine(w, b));
            else if (type == "sigmoid") basis.push_back(BasisFunction::logistic(w, b));
            else if (type == "tanh") basis.push_back(BasisFunction::hyperbolic(w, b));
            else throw ValidationError("config: unknown basis type '" + type + "'");
        }
        return ModelSpec::linear(std::move(basis));
    }
    if (kind == "mlp") {
        reject_unknown_keys(j, {"kind", "layer_sizes", "activation", "id"}, "model");
        MlpDescriptor d;
        d.layer_sizes = j.value("layer_sizes", std::vector<int>{});
        d.activation = activation_from_string(j.value("activation", std::string("sigmoid")));
        return ModelSpec::mlp(std::move(d));
    }
    if (kind == "fixed_function") {
        reject_unknown_keys(j, {"kind", "function", "id"}, "model");
        return ModelSpec::fixed(fixed_function_from_string(j.value("function", std::string())));
    }
    throw ValidationError("config: unknown model kind '" + kind + "'");
}

ExperimentConfig config_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("config: top level must be an object");
    reject_unknown_keys(j,
                        {"scenario", "data", "magic", "fit", "eval", "models", "mlp_max_width",
                         "nonlinear_tolerance", "loss_gap_tolerance", "rank_tolerance", "comparison_lambda",
                         "output"},
                        "config");
    ExperimentConfig cfg;
    if (j.contains("scenario")) cfg.scenario = scenario_from_string(j.at("scenario").get<std::string>());

    if (j.contains("data")) {
        const json& d = j.at("data");
        reject_unknown_keys(d, {"N", "x_range", "noise_variance", "seed"}, "data");
        read(d, "N", cfg.data.N, "data");
        read(d, "noise_variance", cfg.data.noise_variance, "data");
        read(d, "seed", cfg.data.seed, "data");
        if (d.contains("x_range")) {
            const json& r = d.at("x_range");
            if (!r.is_array() || r.size() != 2) throw ValidationError("config: data.x_range must be [lo, hi]");
            cfg.data.x_lo = r[0].get<double>();
            cfg.data.x_hi = r[1].get<double>();
        }
    }
    if (j.contains("magic")) {
        const json& m = j.at("magic");
        reject_unknown_keys(m, {"B", "C", "D", "E"}, "magic");
        read(m, "B", cfg.magic.B, "magic");
        read(m, "C", cfg.magic.C, "magic");
        read(m, "D", cfg.magic.D, "magic");
        read(m, "E", cfg.magic.E, "magic");
    }
    if (j.contains("fit")) {
        const json& f = j.at("fit");
        reject_unknown_keys(f,
                            {"restarts", "seed", "max_iterations", "step_tolerance", "gradient_tolerance",
                             "init_stddev", "initial_damping", "divergence_bound"},
                            "fit");
        read(f, "restarts", cfg.fit.restarts, "fit");
        read(f, "seed", cfg.fit.seed, "fit");
        read(f, "max_iterations", cfg.fit.max_iterations, "fit");
        read(f, "step_tolerance", cfg.fit.step_tolerance, "fit");
        read(f, "gradient_tolerance", cfg.fit.gradient_tolerance, "fit");
        read(f, "init_stddev", cfg.fit.init_stddev, "fit");
        read(f, "initial_damping", cfg.fit.initial_damping, "fit");
        read(f, "divergence_bound", cfg.fit.divergence_bound, "fit");
    }
    if (j.contains("eval")) {
        reject_unknown_keys(j.at("eval"), {"N_v"}, "eval");
        read(j.at("eval"), "N_v", cfg.eval.N_v, "eval");
    }
    if (j.contains("models")) {
        const json& models = j.at("models");
        if (!models.is_array()) throw ValidationError("config: models must be a list");
        for (std::size_t i = 0; i < models.size(); ++i) {
            const json& m = models[i];
            if (m.is_string()) {
                const std::string tag = m.get<std::string>();
                cfg.models.push_back({canonical_tag(tag), named_model(tag)});
            } else {
                const std::string id = m.value("id", "model_" + std::to_string(i));
                cfg.models.push_back({id, model_from_json(m)});
            }
        }
    }
    read(j, "mlp_max_width", cfg.mlp_max_width, "config");
    read(j, "nonlinear_tolerance", cfg.nonlinear_tolerance, "config");
    read(j, "loss_gap_tolerance", cfg.loss_gap_tolerance, "config");
    if (j.contains("rank_tolerance") && !j.at("rank_tolerance").is_null()) {
        cfg.rank_tolerance = j.at("rank_tolerance").get<double>();
    }
    if (j.contains("comparison_lambda")) {
        cfg.comparison_lambda = comparison_lambda_from_string(j.at("comparison_lambda").get<std::string>());
    }
    if (j.contains("output")) cfg.output = j.at("output").get<std::string>();
    return cfg;
}

}  // namespace

ExperimentConfig parse_config(std::string_view json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    try {
        return config_from_json(j);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    try {
        return parse_config(text.str());
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

std::string config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["scenario"] = std::string(to_string(cfg.scenario));
    j["data"] = {{"N", cfg.data.N},
                 {"x_range", {cfg.data.x_lo, cfg.data.x_hi}},
                 {"noise_variance", cfg.data.noise_variance},
                 {"seed", cfg.data.seed}};
    j["magic"] = {{"B", cfg.magic.B}, {"C", cfg.magic.C}, {"D", cfg.magic.D}, {"E", cfg.magic.E}};
    j["fit"] = {{"restarts", cfg.fit.restarts},
                {"seed", cfg.fit.seed},
                {"max_iterations", cfg.fit.max_iterations},
                {"step_tolerance", cfg.fit.step_tolerance},
                {"gradient_tolerance", cfg.fit.gradient_tolerance},
                {"init_stddev", cfg.fit.init_stddev},
                {"initial_damping", cfg.fit.initial_damping},
                {"divergence_bound", cfg.fit.divergence_bound}};
    j["eval"] = {{"N_v", cfg.eval.N_v}};
    if (!cfg.models.empty()) {
        json models = json::array();
        for (const ModelEntry& m : cfg.models) {
            json e = model_to_json(m.spec);
            e["id"] = m.id;
            models.push_back(e);
        }
        j["models"] = models;
    }
    j["mlp_max_width"] = cfg.mlp_max_width;
    j["nonlinear_tolerance"] = cfg.nonlinear_tolerance;
    j["loss_gap_tolerance"] = cfg.loss_gap_tolerance;
    j["rank_tolerance"] = cfg.rank_tolerance ? json(*cfg.rank_tolerance) : json(nullptr);
    j["comparison_lambda"] = std::string(to_string(cfg.comparison_lambda));
    j["output"] = cfg.output.string();
    return j.dump(2);
}

std::string model_spec_to_json(const ModelSpec& model) { return model_to_json(model).dump(); }

ModelSpec model_spec_from_json(std::string_view json_text) {
    try {
        return model_from_json(json::parse(json_text));
    } catch (const json::exception& e) {
        throw ValidationError(std::string("model json: ") + e.what());
    }
}

}  // namespace deltavar
