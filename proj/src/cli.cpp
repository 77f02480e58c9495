#include "ivsel/cli.hpp"

#include "ivsel/config.hpp"
#include "ivsel/error.hpp"
#include "ivsel/evaluation.hpp"
#include "ivsel/identification.hpp"
#include "ivsel/learner.hpp"
#include "ivsel/nuisance.hpp"
#include "ivsel/parallel.hpp"
#include "ivsel/rng.hpp"
#include "ivsel/synthetic.hpp"
#include "ivsel/textio.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>

namespace ivsel {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    unsigned jobs = 0;
};

struct FitArgs {
    std::string mode = "partial";
    std::optional<std::string> loss, feature_map;
    std::optional<double> lambda;
    std::optional<int> folds;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "configuration JSON file (defaults when omitted)");
    cmd->add_option("--seed", c.seed, "overrides the configured seed");
    cmd->add_option("--jobs", c.jobs, "worker threads (default: logical cores)");
}

ToolConfig load_config(const Common& c) {
    ToolConfig cfg = c.config.empty() ? ToolConfig::from_json(json::object()) : ToolConfig::load(c.config);
    if (c.seed) cfg.seed = *c.seed;
    return cfg;
}

void log_config(const ToolConfig& cfg, std::ostream& err) {
    err << "ivsel: config hash " << cfg.hash() << '\n';
    err << "ivsel: resolved config " << cfg.to_json().dump() << '\n';
}

ToolConfig resolve(const Common& c, std::ostream& err) {
    ToolConfig cfg = load_config(c);
    log_config(cfg, err);
    return cfg;
}

unsigned jobs_of(const Common& c) { return c.jobs ? c.jobs : default_jobs(); }

void ensure_parent(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

SelectiveDataset load_dataset(const ToolConfig& cfg) {
    return load_csv(cfg.dataset_csv(), Schema::from_json_file(cfg.dataset_schema()));
}

/// Train or test part of the configured split; the whole dataset when no
/// split is configured.
SelectiveDataset dataset_part(const ToolConfig& cfg, bool train) {
    SelectiveDataset ds = load_dataset(cfg);
    if (cfg.dataset.test_fraction <= 0.0) return ds;
    auto [tr, te] = split_train_test(ds, cfg.dataset.test_fraction, derive_seed(cfg.seed, "cli-split"));
    return train ? std::move(tr) : std::move(te);
}

int cmd_generate(const Common& c, std::ostream& out, std::ostream& err) {
    const ToolConfig cfg = resolve(c, err);
    const Simulation sim = simulate(cfg.generate, cfg.seed);
    const fs::path data = cfg.output.resolve(cfg.output.data);
    const fs::path schema = cfg.output.resolve(cfg.output.schema);
    ensure_parent(data);
    ensure_parent(schema);
    save_csv(sim.data, data);
    schema_for(sim.data).to_json_file(schema);
    if (!cfg.output.truth.empty()) {
        const fs::path truth = cfg.output.resolve(cfg.output.truth);
        ensure_parent(truth);
        std::ofstream t(truth);
        if (!t) throw DataError("cannot write " + truth.string());
        t << "row,p_decision,unobservable" << (sim.mu_star ? ",mu_star" : "") << '\n';
        for (Eigen::Index i = 0; i < sim.p_decision.size(); ++i) {
            t << i + 1 << ',' << format_double(sim.p_decision(i)) << ',' << format_double(sim.unobservable(i));
            if (sim.mu_star) t << ',' << format_double((*sim.mu_star)(i));
            t << '\n';
        }
        out << "truth: " << truth.string() << '\n';
    }
    out << "rows: " << sim.data.size() << ", judges: " << sim.data.judge_count()
        << ", labeled: " << sim.data.labeled_count() << '\n';
    out << "data: " << data.string() << "\nschema: " << schema.string() << '\n';
    return 0;
}

int cmd_fit(const Common& c, const FitArgs& a, std::ostream& out, std::ostream& err) {
    ToolConfig cfg = load_config(c);
    // learner overrides are folded in before the hash is taken
    json overrides = cfg.learner.to_json();
    if (a.loss) overrides["loss"] = *a.loss;
    if (a.feature_map) overrides["feature_map"] = *a.feature_map;
    if (a.lambda) overrides["lambda"] = *a.lambda;
    if (a.folds) overrides["K"] = *a.folds;
    cfg.learner = LearnerConfig::from_json(overrides);
    log_config(cfg, err);

    const LearningMode mode = parse_mode(a.mode);
    const SelectiveDataset ds = dataset_part(cfg, true);
    PipelineResult res = fit_pipeline(ds, mode, cfg.pipeline(jobs_of(c)));
    res.model.metadata["config_hash"] = cfg.hash();
    res.model.metadata["nuisance_hash"] = hex_digest(cfg.nuisance.to_json().dump());
    res.model.metadata["seed"] = cfg.seed;
    res.model.metadata["rows"] = ds.size();
    res.model.metadata["weight_flag_rate"] = res.weight_flag_rate;
    const fs::path path = cfg.output.resolve(cfg.output.model);
    ensure_parent(path);
    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path.string());
    f << res.model.to_json().dump(2) << '\n';
    out << "mode: " << to_string(mode) << ", rows: " << ds.size() << ", iterations: " << res.diagnostics.iterations
        << (res.diagnostics.converged ? " (converged)" : res.diagnostics.stalled ? " (stalled)" : " (max_iters)")
        << ", objective: " << format_double(res.diagnostics.objective)
        << ", weight flag rate: " << format_double(res.weight_flag_rate) << '\n';
    out << "model: " << path.string() << '\n';
    return 0;
}

int cmd_bounds(const Common& c, std::ostream& out, std::ostream& err) {
    const ToolConfig cfg = resolve(c, err);
    const SelectiveDataset ds = load_dataset(cfg);
    const FoldPlan folds = make_folds(ds.size(), cfg.learner.folds, derive_seed(cfg.seed, "folds"));
    const NuisanceSet nuis = crossfit_nuisances(ds, folds, cfg.nuisance, NuisanceComponents{true, true}, jobs_of(c));
    const WeightVector wp = point_weight(nuis, cfg.identification.eps_denom);
    const IntervalBounds b = partial_bounds(nuis, cfg.identification.a, cfg.identification.b);
    const WeightVector wq = partial_weight(b);

    const fs::path path = cfg.output.resolve(cfg.output.bounds);
    ensure_parent(path);
    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path.string());
    // flags: 1 denominator floored, 2 ratio clipped, 4 interval crossed
    f << "row,fold,l,u,r,w_point,w_partial,flags\n";
    double mean_l = 0, mean_u = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const int flags = wp.flags[i] | (b.crossed[i] ? 4 : 0);
        f << i + 1 << ',' << folds.assignment[i] << ',' << format_double(b.l[i]) << ',' << format_double(b.u[i])
          << ',' << format_double(wp.ratio[i]) << ',' << format_double(wp.w[i]) << ',' << format_double(wq.w[i])
          << ',' << flags << '\n';
        mean_l += b.l[i];
        mean_u += b.u[i];
    }
    if (!cfg.output.nuisances.empty()) {
        const fs::path np = cfg.output.resolve(cfg.output.nuisances);
        ensure_parent(np);
        nuis.write_csv(np);
        out << "nuisances: " << np.string() << '\n';
    }
    const auto n = static_cast<double>(ds.size());
    out << "rows: " << ds.size() << ", mean l: " << format_double(mean_l / n) << ", mean u: "
        << format_double(mean_u / n) << ", point flag rate: " << format_double(wp.flag_rate())
        << ", crossed rate: " << format_double(b.crossed_rate()) << '\n';
    if (ds.judge_count() == 2) {
        const ObservableDistribution p = observable_from_dataset(ds);
        const MeanBounds cf = manski_closed_form(p);
        out << "closed form (L,U): (" << format_double(cf.lower) << ", " << format_double(cf.upper) << ")\n";
        try {
            const MeanBounds lp = balke_pearl_lp(p);
            out << "LP (L,U): (" << format_double(lp.lower) << ", " << format_double(lp.upper) << ")\n";
        } catch (const NumericError& e) {
            // sampling noise can push the empirical distribution outside the IV polytope
            out << "LP: " << e.what() << '\n';
        }
    }
    out << "bounds: " << path.string() << '\n';
    return 0;
}

int cmd_evaluate(const Common& c, std::ostream& out, std::ostream& err) {
    const ToolConfig cfg = resolve(c, err);
    const fs::path model_path = cfg.output.resolve(cfg.output.model);
    std::ifstream mf(model_path);
    if (!mf) throw DataError("cannot open model " + model_path.string());
    json mj;
    try {
        mj = json::parse(mf);
    } catch (const json::exception& e) {
        throw DataError("model file is not valid JSON: " + std::string(e.what()));
    }
    const ScoreModel model = ScoreModel::from_json(mj);
    const SelectiveDataset ds = dataset_part(cfg, false);
    const Vector scores = model.scores(model.design(ds));
    const std::vector<std::uint8_t> pred = predict_class(model, ds);

    json metrics;
    metrics["rows"] = ds.size();
    metrics["model_mode"] = model.metadata.value("mode", "");
    std::size_t positive = 0;
    for (auto p : pred) positive += p;
    metrics["predicted_positive_rate"] = static_cast<double>(positive) / static_cast<double>(pred.size());
    if (ds.has_oracle()) metrics["accuracy"] = zero_one_accuracy(pred, ds.oracle_outcome());
    std::vector<std::uint8_t> lp, ly;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (ds.decision()[i]) {
            lp.push_back(pred[i]);
            ly.push_back(*ds.outcome()[i]);
        }
    if (!lp.empty()) metrics["labeled_accuracy"] = zero_one_accuracy(lp, ly);

    const FoldPlan folds = make_folds(ds.size(), cfg.learner.folds, derive_seed(cfg.seed, "folds"));
    const NuisanceSet nuis = crossfit_nuisances(ds, folds, cfg.nuisance, NuisanceComponents{true, true}, jobs_of(c));
    const RiskInterval rb = risk_bounds(partial_bounds(nuis, cfg.identification.a, cfg.identification.b), pred);
    metrics["risk_bounds"] = {{"lower", rb.lower}, {"upper", rb.upper}};
    const WeightVector wp = point_weight(nuis, cfg.identification.eps_denom);
    Vector mu(static_cast<Eigen::Index>(ds.size()));
    for (std::size_t i = 0; i < ds.size(); ++i) mu(static_cast<Eigen::Index>(i)) = wp.w[i] + 0.5;
    metrics["risk_point_plugin"] = oracle_risk_from_mu(mu, pred);

    const fs::path mpath = cfg.output.resolve(cfg.output.metrics);
    ensure_parent(mpath);
    std::ofstream m(mpath);
    if (!m) throw DataError("cannot write " + mpath.string());
    m << metrics.dump(2) << '\n';
    if (!cfg.output.predictions.empty()) {
        const fs::path ppath = cfg.output.resolve(cfg.output.predictions);
        ensure_parent(ppath);
        std::ofstream p(ppath);
        if (!p) throw DataError("cannot write " + ppath.string());
        p << "row,score,class\n";
        for (std::size_t i = 0; i < ds.size(); ++i)
            p << i + 1 << ',' << format_double(scores(static_cast<Eigen::Index>(i))) << ',' << int(pred[i]) << '\n';
    }
    out << metrics.dump(2) << '\n';
    return 0;
}

int cmd_experiment(const Common& c, std::optional<int> reps, std::optional<std::string> format,
                   std::ostream& out, std::ostream& err) {
    ToolConfig cfg = load_config(c);
    if (reps) cfg.experiment.replications = *reps;
    if (format) cfg.output.report_format = parse_report_format(*format);
    cfg.experiment_config(1).validate();
    log_config(cfg, err);
    const ExperimentConfig ec = cfg.experiment_config(jobs_of(c));
    const ExperimentReport report = run_experiment(ec);
    const fs::path path = cfg.output.resolve(cfg.output.report);
    ensure_parent(path);
    write_report(report, path, cfg.output.report_format);
    out << format_summary(summarize(report));
    char line[96];
    std::snprintf(line, sizeof line, "records: %zu, failures: %zu, wall time: %.1f s\n", report.records.size(),
                  report.failures(), report.wall_seconds);
    out << line << "report: " << path.string() << " (config hash " << report.config_hash << ")\n";
    return report.failures() == report.records.size() && !report.records.empty() ? 1 : 0;
}

int exit_code(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::config:
        case ErrorCategory::argument: return 3;
        case ErrorCategory::data: return 4;
        case ErrorCategory::numeric: return 5;
        case ErrorCategory::contract: return 6;
    }
    return 1;
}

std::string_view reported(ErrorCategory c) {
    return c == ErrorCategory::argument ? "config" : to_string(c);
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"ivsel: learning classifiers from selectively labeled data with a judge instrument"};
    app.name("ivsel");
    app.require_subcommand(1);
    Common common;
    FitArgs fit;
    std::optional<int> reps;
    std::optional<std::string> format;

    auto* gen = app.add_subcommand("generate", "simulate a selectively labeled dataset");
    add_common(gen, common);
    auto* fitc = app.add_subcommand("fit", "fit a classifier and save it as JSON");
    add_common(fitc, common);
    fitc->add_option("--mode", fit.mode, "point | partial | selected | full")->capture_default_str();
    fitc->add_option("--loss", fit.loss, "hinge | logistic | exponential");
    fitc->add_option("--feature-map", fit.feature_map, "raw | raw+intercept | poly2");
    fitc->add_option("--lambda", fit.lambda, "L2 penalty");
    fitc->add_option("--K", fit.folds, "cross-fitting folds");
    auto* bnd = app.add_subcommand("bounds", "per-row identification bounds and weights");
    add_common(bnd, common);
    auto* evl = app.add_subcommand("evaluate", "score a saved model on a dataset");
    add_common(evl, common);
    auto* exp = app.add_subcommand("experiment", "replicated semi-synthetic comparison");
    add_common(exp, common);
    exp->add_option("--replications", reps, "overrides experiment.replications");
    exp->add_option("--format", format, "csv | json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (*gen) return cmd_generate(common, out, err);
        if (*fitc) return cmd_fit(common, fit, out, err);
        if (*bnd) return cmd_bounds(common, out, err);
        if (*evl) return cmd_evaluate(common, out, err);
        if (*exp) return cmd_experiment(common, reps, format, out, err);
    } catch (const Error& e) {
        err << "error[" << reported(e.category()) << "]: " << e.what() << '\n';
        return exit_code(e.category());
    } catch (const fs::filesystem_error& e) {
        err << "error[data]: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        err << "error[internal]: " << e.what() << '\n';
        return 1;
    }
    err << app.help();
    return 2;
}

}  // namespace ivsel
