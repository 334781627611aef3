#include "deltavar/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "deltavar/csv.hpp"
#include "deltavar/random.hpp"

namespace deltavar {

Dataset generate_dataset(const ExperimentConfig& cfg) {
    if (cfg.data.N < 1) throw ValidationError("generate_dataset: N must be positive");
    if (!(cfg.data.x_lo < cfg.data.x_hi)) throw ValidationError("generate_dataset: x_range needs lo < hi");
    if (!(cfg.data.noise_variance >= 0)) throw ValidationError("generate_dataset: negative noise variance");

    Rng rng(cfg.data.seed);
    const double sd = std::sqrt(cfg.data.noise_variance);
    Dataset data;
    data.inputs.reserve(cfg.data.N);
    data.outputs.reserve(cfg.data.N);
    for (std::size_t n = 0; n < cfg.data.N; ++n) {
        const double x = rng.uniform(cfg.data.x_lo, cfg.data.x_hi);
        const double e = rng.normal(0.0, sd);
        data.inputs.push_back(x);
        data.outputs.push_back(magic_formula(x, cfg.magic) + e);
    }
    return data;
}

std::vector<double> eval_grid(const ExperimentConfig& cfg) {
    const std::size_t n = cfg.eval.N_v;
    if (n < 1) throw ValidationError("eval_grid: N_v must be at least 1");
    const double lo = cfg.data.x_lo;
    const double hi = cfg.data.x_hi;
    if (n == 1) return {0.5 * (lo + hi)};
    std::vector<double> grid(n);
    for (std::size_t i = 0; i < n; ++i) {
        grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    grid.back() = hi;
    return grid;
}

bool ScenarioResult::passed() const {
    if (aborted) return false;
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass || !c.required; });
}

namespace {

ModelResult finish_model(std::string id, const ModelSpec& model, FitResult fit, const Dataset& data,
                         std::span<const double> eval_inputs, std::optional<double> rank_tolerance) {
    ModelResult r{std::move(id), model, std::move(fit), {}, {}, {}};
    r.uncertainty = uncertainty_report(model, r.fit.theta_hat, data, rank_tolerance);
    r.prediction = mean_prediction_variance(model, r.fit.theta_hat, r.uncertainty.parameter_covariance, eval_inputs);
    r.f_hat.reserve(eval_inputs.size());
    for (double x : eval_inputs) r.f_hat.push_back(evaluate(model, r.fit.theta_hat, x));
    return r;
}

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(4);
    s << v;
    return s.str();
}

double relative_gap(double a, double b) {
    const double scale = std::min(std::abs(a), std::abs(b));
    if (scale == 0) return a == b ? 0.0 : std::numeric_limits<double>::infinity();
    return std::abs(a - b) / scale;
}

/// Re-expresses a fit at new parameters of the same fitted function.
FitResult adopt_estimate(const FitResult& source, const ModelSpec& model, Vector theta, const Dataset& data,
                         const std::string& source_id) {
    FitResult out = source;
    out.theta_hat = std::move(theta);
    out.loss_value = loss(model, out.theta_hat, data);
    out.lambda_N = out.loss_value / static_cast<double>(data.size());
    out.design_rank = linalg::numerical_rank(regressor_matrix(model, out.theta_hat, data.inputs));
    out.warnings.push_back("estimate mapped from " + source_id);
    return out;
}

void add_noise_check(ScenarioResult& result, bool required) {
    const double s2 = result.config.data.noise_variance;
    if (s2 <= 0) return;
    bool ok = true;
    std::string worst;
    for (const ModelResult& m : result.models) {
        const double l = m.fit.lambda_N;
        if (l < 0.5 * s2 || l > 2.0 * s2) {
            ok = false;
            worst += " " + m.id + "=" + fmt(l);
        }
    }
    result.checks.push_back({"noise variance recovered", ok,
                             ok ? "every lambda_N in [" + fmt(0.5 * s2) + ", " + fmt(2.0 * s2) + "]"
                                : "outside [" + fmt(0.5 * s2) + ", " + fmt(2.0 * s2) + "]:" + worst,
                             required});
}

void run_cat1(ScenarioResult& result, const std::vector<FitResult>& fits) {
    const ExperimentConfig& cfg = result.config;
    const std::vector<ModelEntry> entries = scenario_models(cfg);
    const ModelEntry& canon = entries[0];
    const ModelEntry& over = entries[1];
    const Matrix T = cat1_nonlinear_transform();

    Cat1Comparison cmp;

    // Independent fits, compared as they came out of the optimizer.
    const ModelResult ind_c = finish_model(canon.id, canon.spec, fits[0], result.data, result.eval_inputs,
                                           cfg.rank_tolerance);
    const ModelResult ind_o = finish_model(over.id, over.spec, fits[1], result.data, result.eval_inputs,
                                           cfg.rank_tolerance);
    cmp.independent_loss_gap = relative_gap(fits[0].loss_value, fits[1].loss_value);
    for (std::size_t i = 0; i < result.eval_inputs.size(); ++i) {
        cmp.independent_max_relative_difference =
            std::max(cmp.independent_max_relative_difference,
                     relative_difference(ind_c.prediction.variances[i], ind_o.prediction.variances[i]));
    }

    // theta_c = T theta maps over -> canonical exactly; T^+ theta_c is a preimage
    // because T has full row rank.
    FitResult fc = fits[0];
    FitResult fo = fits[1];
    if (fits[1].loss_value < fits[0].loss_value) {
        cmp.shared_from = over.id;
        fc = adopt_estimate(fits[1], canon.spec, T * fits[1].theta_hat, result.data, over.id);
    } else {
        cmp.shared_from = canon.id;
        fo = adopt_estimate(fits[0], over.spec, linalg::pseudo_inverse(T).pinv * fits[0].theta_hat, result.data,
                            canon.id);
    }
    result.models.push_back(finish_model(canon.id, canon.spec, fc, result.data, result.eval_inputs, cfg.rank_tolerance));
    result.models.push_back(finish_model(over.id, over.spec, fo, result.data, result.eval_inputs, cfg.rank_tolerance));
    cmp.loss_gap = relative_gap(fc.loss_value, fo.loss_value);

    Category1Options opts;
    opts.tolerance = cfg.nonlinear_tolerance;
    opts.rank_tolerance = cfg.rank_tolerance;
    cmp.equivalence = category1_equivalence({canon.spec, fc.theta_hat}, {over.spec, fo.theta_hat},
                                            Category1Transform::validate(T), result.data, result.eval_inputs, opts);

    result.checks.push_back({"fit losses agree", cmp.loss_gap <= cfg.loss_gap_tolerance,
                             "relative gap " + fmt(cmp.loss_gap) + " (tolerance " + fmt(cfg.loss_gap_tolerance) + ")"});
    result.checks.push_back({"variance curves agree", cmp.equivalence.pass,
                             "max relative difference " + fmt(cmp.equivalence.max_relative_difference) +
                                 " (tolerance " + fmt(cfg.nonlinear_tolerance) + ")"});
    const Eigen::Index over_rank = result.models[1].uncertainty.information_rank;
    result.checks.push_back({"redundant model information matrix is singular", over_rank < over.spec.param_count(),
                             "rank " + std::to_string(over_rank) + " of " + std::to_string(over.spec.param_count())});
    result.checks.push_back(
        {"independent fits agree",
         cmp.independent_loss_gap <= cfg.loss_gap_tolerance &&
             cmp.independent_max_relative_difference <= cfg.nonlinear_tolerance,
         "loss gap " + fmt(cmp.independent_loss_gap) + ", max relative difference " +
             fmt(cmp.independent_max_relative_difference),
         false});
    result.cat1 = std::move(cmp);
}

void tabulate_means(ScenarioResult& result) {
    const ExperimentConfig& cfg = result.config;
    for (std::size_t k = 0; k < result.models.size(); ++k) {
        const ModelResult& m = result.models[k];
        Cat2Step step;
        step.id = m.id;
        step.n_params = m.model.param_count();
        step.lambda = cfg.comparison_lambda == ComparisonLambda::canonical ? result.models[0].fit.lambda_N
                                                                           : m.fit.lambda_N;
        if (step.lambda == m.fit.lambda_N) {
            step.mean_variance = m.prediction.mean_variance;
        } else {
            const double tol = cfg.rank_tolerance.value_or(
                information_rank_tolerance(m.model.param_count(), result.data.size()));
            const UncertaintyReport u = parameter_covariance(m.uncertainty.information_matrix, step.lambda, tol);
            step.mean_variance =
                mean_prediction_variance(m.model, m.fit.theta_hat, u.parameter_covariance, result.eval_inputs)
                    .mean_variance;
        }
        if (k > 0) step.increase = step.mean_variance - result.cat2[k - 1].mean_variance;
        result.cat2.push_back(step);
    }
}

void run_cat2_linear(ScenarioResult& result) {
    tabulate_means(result);
    const ModelResult& canon = result.models[0];
    const Eigen::Index n_c = canon.model.param_count();
    const Matrix phi_c = regressor_matrix(canon.model, canon.fit.theta_hat, result.data.inputs);
    const Matrix phi_c_eval = regressor_matrix(canon.model, canon.fit.theta_hat, result.eval_inputs);
    const double lambda = canon.fit.lambda_N;

    bool increasing = true;
    bool dominated = true;
    bool strict = true;
    bool identity = true;
    bool full_rank = true;
    std::string rank_detail;
    for (std::size_t k = 1; k < result.models.size(); ++k) {
        const ModelResult& m = result.models[k];
        Cat2Step& step = result.cat2[k];
        increasing = increasing && step.increase > 0;

        const Matrix phi = regressor_matrix(m.model, m.fit.theta_hat, result.data.inputs);
        const Matrix phi_eval = regressor_matrix(m.model, m.fit.theta_hat, result.eval_inputs);
        const Eigen::Index n_o = phi.rows() - n_c;
        const BlockDecomposition decomp =
            block_decomposition(phi_c, phi.bottomRows(n_o), phi_c_eval, phi_eval.bottomRows(n_o));

        double min_excess = std::numeric_limits<double>::infinity();
        double max_err = 0;
        std::size_t strict_count = 0;
        for (Eigen::Index i = 0; i < phi_eval.cols(); ++i) {
            Category2Terms t;
            try {
                t = category2_terms(decomp, phi_c_eval.col(i), phi_eval.col(i).tail(n_o), lambda);
            } catch (const ConsistencyError&) {
                identity = false;
                t = category2_terms(decomp, phi_c_eval.col(i), phi_eval.col(i).tail(n_o), lambda,
                                    std::numeric_limits<double>::infinity());
            }
            min_excess = std::min(min_excess, t.over_variance - t.canonical_variance);
            max_err = std::max(max_err, relative_difference(t.over_variance, t.canonical_variance + t.excess));
            if (t.excess > 0) ++strict_count;
        }
        step.min_excess = min_excess;
        step.max_identity_error = max_err;
        step.strict_fraction = static_cast<double>(strict_count) / static_cast<double>(phi_eval.cols());
        dominated = dominated && min_excess >= -1e-12;
        strict = strict && *step.strict_fraction >= 0.95;
        identity = identity && max_err <= 1e-8;

        const Eigen::Index rank = m.uncertainty.information_rank;
        if (rank < m.model.param_count()) {
            full_rank = false;
            rank_detail += " " + m.id + " rank " + std::to_string(rank);
        }
    }

    std::string means;
    for (const Cat2Step& s : result.cat2) means += (means.empty() ? "" : " < ") + fmt(s.mean_variance);
    result.checks.push_back({"mean variance strictly increasing", increasing, means});
    result.checks.push_back({"overparameterized variance dominates pointwise", dominated, "slack -1e-12"});
    result.checks.push_back({"strict excess on at least 95% of the grid", strict, ""});
    result.checks.push_back({"variance = canonical + excess", identity, "relative 1e-8"});
    result.checks.push_back({"extended information matrices full rank", full_rank,
                             full_rank ? "all full rank" : rank_detail});
}

void run_cat2_mlp(ScenarioResult& result) {
    tabulate_means(result);
    const double first = result.cat2.front().mean_variance;
    bool minimum = true;
    bool nondecreasing = true;
    std::string means;
    for (const Cat2Step& s : result.cat2) {
        minimum = minimum && s.mean_variance >= first;
        means += (means.empty() ? "" : ", ") + s.id + "=" + fmt(s.mean_variance);
    }
    for (std::size_t k = 1; k < result.cat2.size(); ++k) nondecreasing = nondecreasing && result.cat2[k].increase >= 0;
    result.checks.push_back({"smallest network has the lowest mean variance", minimum, means});
    if (result.cat2.size() > 1) {
        const double last = result.cat2.back().mean_variance;
        result.checks.push_back({"largest network exceeds the smallest", last > first,
                                 fmt(last) + " vs " + fmt(first)});
        result.checks.push_back({"mean variance nondecreasing in width", nondecreasing, "", false});
    }
}

}  // namespace

ModelResult analyze_model(const std::string& id, const ModelSpec& model, const Dataset& data,
                          std::span<const double> eval_inputs, const FitOptions& fit_opts,
                          std::optional<double> rank_tolerance) {
    return finish_model(id, model, fit(model, data, fit_opts), data, eval_inputs, rank_tolerance);
}

ScenarioResult run_scenario(const ExperimentConfig& cfg) {
    cfg.validate();
    return run_scenario(cfg, generate_dataset(cfg));
}

ScenarioResult run_scenario(const ExperimentConfig& cfg, const Dataset& data) {
    data.validate();
    ScenarioResult result;
    result.config = cfg;
    result.data = data;
    result.eval_inputs = eval_grid(cfg);

    const std::vector<ModelEntry> entries = scenario_models(cfg);
    for (const ModelEntry& e : entries) {
        if (static_cast<Eigen::Index>(data.size()) < e.spec.param_count()) {
            throw ValidationError("dataset has " + std::to_string(data.size()) + " samples, fewer than the " +
                                  std::to_string(e.spec.param_count()) + " parameters of " + e.id);
        }
    }

    std::vector<FitResult> fits;
    for (const ModelEntry& e : entries) {
        try {
            fits.push_back(fit(e.spec, data, cfg.fit));
        } catch (const NonConvergenceError& err) {
            result.aborted = true;
            result.failed_model = e.id;
            result.abort_reason = err.what();
            break;
        }
        // The Category-1 pair is analyzed jointly once both fits exist.
        if (cfg.scenario != Scenario::cat1_nonlinear) {
            result.models.push_back(
                finish_model(e.id, e.spec, fits.back(), data, result.eval_inputs, cfg.rank_tolerance));
        }
    }
    if (result.aborted) {
        if (cfg.scenario == Scenario::cat1_nonlinear) {
            for (std::size_t k = 0; k < fits.size(); ++k) {
                result.models.push_back(finish_model(entries[k].id, entries[k].spec, fits[k], data,
                                                     result.eval_inputs, cfg.rank_tolerance));
            }
        }
        return result;
    }

    switch (cfg.scenario) {
        case Scenario::cat1_nonlinear:
            run_cat1(result, fits);
            add_noise_check(result, true);
            break;
        case Scenario::cat2_linear:
            run_cat2_linear(result);
            add_noise_check(result, true);
            break;
        case Scenario::cat2_mlp:
            run_cat2_mlp(result);
            add_noise_check(result, true);
            break;
        case Scenario::custom:
            tabulate_means(result);
            add_noise_check(result, false);
            break;
    }
    return result;
}

std::string provenance_comment(const ExperimentConfig& cfg) {
    return "deltavar scenario=" + std::string(to_string(cfg.scenario)) +
           " data_seed=" + std::to_string(cfg.data.seed) + " fit_seed=" + std::to_string(cfg.fit.seed);
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

void close_csv(std::ofstream& out, const std::filesystem::path& path) {
    out.close();
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

void emit_csv(const ScenarioResult& result, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    const std::string comment = "# " + provenance_comment(result.config) + "\n";

    write_dataset(dir / "dataset.csv", result.data, provenance_comment(result.config));

    const auto pred_path = dir / "predictions.csv";
    std::ofstream pred = open_csv(pred_path);
    pred << comment << "x,model_id,f_hat,variance,stddev_band_lo,stddev_band_hi\n";
    for (const ModelResult& m : result.models) {
        for (std::size_t i = 0; i < result.eval_inputs.size(); ++i) {
            const double f = m.f_hat[i];
            const double half = 1.96 * std::sqrt(m.prediction.variances[i]);
            pred << format_double(result.eval_inputs[i]) << ',' << m.id << ',' << format_double(f) << ','
                 << format_double(m.prediction.variances[i]) << ',' << format_double(f - half) << ','
                 << format_double(f + half) << '\n';
        }
    }
    close_csv(pred, pred_path);

    const auto sum_path = dir / "summary.csv";
    std::ofstream sum = open_csv(sum_path);
    sum << comment << "model_id,n_params,lambda_N,info_rank,mean_variance\n";
    for (const ModelResult& m : result.models) {
        sum << m.id << ',' << m.model.param_count() << ',' << format_double(m.fit.lambda_N) << ','
            << m.uncertainty.information_rank << ',' << format_double(m.prediction.mean_variance) << '\n';
    }
    close_csv(sum, sum_path);
}

std::string format_report(const ScenarioResult& result) {
    std::ostringstream out;
    out << "scenario " << to_string(result.config.scenario) << ": N=" << result.data.size()
        << " N_v=" << result.eval_inputs.size() << " data_seed=" << result.config.data.seed
        << " fit_seed=" << result.config.fit.seed << '\n';
    for (const ModelResult& m : result.models) {
        out << "  " << m.id << ": n_params=" << m.model.param_count() << " lambda_N=" << fmt(m.fit.lambda_N)
            << " info_rank=" << m.uncertainty.information_rank << " mean_variance=" << fmt(m.prediction.mean_variance)
            << (m.fit.converged ? "" : " (iteration limit)") << '\n';
        if (m.fit.restarts_diverged > 0) {
            out << "    " << m.fit.restarts_diverged << " of " << m.fit.restarts_used << " restarts diverged\n";
        }
    }
    if (result.cat1) {
        const Cat1Comparison& c = *result.cat1;
        out << "  shared estimate from " << c.shared_from << "; independent fits: loss gap "
            << fmt(c.independent_loss_gap) << ", max relative variance difference "
            << fmt(c.independent_max_relative_difference) << '\n';
    }
    if (!result.cat2.empty()) {
        out << "  mean variance at lambda=" << to_string(result.config.comparison_lambda) << ":";
        for (const Cat2Step& s : result.cat2) out << ' ' << s.id << '=' << fmt(s.mean_variance);
        out << '\n';
    }
    for (const Cat2Step& s : result.cat2) {
        if (!s.min_excess) continue;
        out << "  " << s.id << ": increase " << fmt(s.increase) << ", min pointwise excess " << fmt(*s.min_excess)
            << ", strict on " << fmt(100.0 * *s.strict_fraction) << "% of grid\n";
    }
    if (result.aborted) out << "ABORTED at " << result.failed_model << ": " << result.abort_reason << '\n';
    for (const Check& c : result.checks) {
        out << (c.pass ? "PASS " : (c.required ? "FAIL " : "NOTE ")) << c.name;
        if (!c.detail.empty()) out << ": " << c.detail;
        out << '\n';
    }
    return out.str();
}

}  // namespace deltavar
