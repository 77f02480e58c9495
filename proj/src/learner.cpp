#include "ivsel/learner.hpp"

#include "ivsel/error.hpp"
#include "ivsel/rng.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ivsel {

using nlohmann::json;

std::string_view to_string(LossKind k) {
    switch (k) {
        case LossKind::hinge: return "hinge";
        case LossKind::logistic: return "logistic";
        case LossKind::exponential: return "exponential";
    }
    return "unknown";
}

LossKind parse_loss(std::string_view s) {
    if (s == "hinge") return LossKind::hinge;
    if (s == "logistic") return LossKind::logistic;
    if (s == "exponential") return LossKind::exponential;
    throw ConfigError("unknown loss '" + std::string(s) + "'");
}

double surrogate_value(LossKind loss, double alpha) {
    switch (loss) {
        case LossKind::hinge: return std::max(1.0 - alpha, 0.0);
        case LossKind::logistic:
            return alpha > 0 ? std::log1p(std::exp(-alpha)) : -alpha + std::log1p(std::exp(alpha));
        case LossKind::exponential: return std::exp(-alpha);
    }
    return 0.0;
}

double surrogate_derivative(LossKind loss, double alpha) {
    switch (loss) {
        case LossKind::hinge: return alpha < 1.0 ? -1.0 : 0.0;
        case LossKind::logistic:
            // -1 / (1 + e^alpha)
            return alpha > 0 ? -std::exp(-alpha) / (1.0 + std::exp(-alpha)) : -1.0 / (1.0 + std::exp(alpha));
        case LossKind::exponential: return -std::exp(-alpha);
    }
    return 0.0;
}

std::string_view to_string(FeatureMapKind k) {
    switch (k) {
        case FeatureMapKind::raw: return "raw";
        case FeatureMapKind::raw_intercept: return "raw+intercept";
        case FeatureMapKind::poly2: return "poly2";
    }
    return "unknown";
}

FeatureMapKind parse_feature_map(std::string_view s) {
    if (s == "raw") return FeatureMapKind::raw;
    if (s == "raw+intercept") return FeatureMapKind::raw_intercept;
    if (s == "poly2") return FeatureMapKind::poly2;
    throw ConfigError("unknown feature map '" + std::string(s) + "'");
}

FeatureMap FeatureMap::fit(FeatureMapKind kind, const Matrix& raw) {
    return FeatureMap{kind, Standardizer::fit(raw)};
}

Eigen::Index FeatureMap::output_dim(Eigen::Index d) const {
    switch (kind) {
        case FeatureMapKind::raw: return d;
        case FeatureMapKind::raw_intercept: return d + 1;
        case FeatureMapKind::poly2: return 1 + d + d * (d + 1) / 2;
    }
    return d;
}

Matrix FeatureMap::apply(const Matrix& raw) const {
    const Matrix x = standardizer.apply(raw);
    const Eigen::Index n = x.rows(), d = x.cols();
    Matrix out(n, output_dim(d));
    switch (kind) {
        case FeatureMapKind::raw: out = x; break;
        case FeatureMapKind::raw_intercept:
            out.col(0).setOnes();
            out.rightCols(d) = x;
            break;
        case FeatureMapKind::poly2: {
            out.col(0).setOnes();
            out.middleCols(1, d) = x;
            Eigen::Index c = 1 + d;
            for (Eigen::Index a = 0; a < d; ++a)
                for (Eigen::Index b = a; b < d; ++b) out.col(c++) = x.col(a).cwiseProduct(x.col(b));
            break;
        }
    }
    return out;
}

Vector ScoreModel::scores(const Matrix& raw) const {
    const Vector h = map.apply(raw) * theta;
    if (!h.allFinite()) throw NumericError("non-finite score");
    return h;
}

Matrix ScoreModel::design(const SelectiveDataset& ds) const {
    return uses_judge ? features_with_judge(ds) : ds.features();
}

json ScoreModel::to_json() const {
    json j;
    j["feature_map"] = std::string(to_string(map.kind));
    j["standardizer"] = {{"mean", std::vector<double>(map.standardizer.mean.data(),
                                                      map.standardizer.mean.data() + map.standardizer.mean.size())},
                         {"scale", std::vector<double>(map.standardizer.scale.data(),
                                                       map.standardizer.scale.data() + map.standardizer.scale.size())}};
    j["theta"] = std::vector<double>(theta.data(), theta.data() + theta.size());
    j["bound"] = bound ? json(*bound) : json(nullptr);
    j["uses_judge"] = uses_judge;
    j["metadata"] = metadata;
    return j;
}

ScoreModel ScoreModel::from_json(const json& j) {
    try {
        ScoreModel h;
        h.map.kind = parse_feature_map(j.at("feature_map").get<std::string>());
        const auto mean = j.at("standardizer").at("mean").get<std::vector<double>>();
        const auto scale = j.at("standardizer").at("scale").get<std::vector<double>>();
        if (mean.size() != scale.size()) throw ConfigError("model: standardizer size mismatch");
        h.map.standardizer.mean = Eigen::Map<const Vector>(mean.data(), static_cast<Eigen::Index>(mean.size()));
        h.map.standardizer.scale = Eigen::Map<const Vector>(scale.data(), static_cast<Eigen::Index>(scale.size()));
        const auto theta = j.at("theta").get<std::vector<double>>();
        h.theta = Eigen::Map<const Vector>(theta.data(), static_cast<Eigen::Index>(theta.size()));
        if (h.theta.size() != h.map.output_dim(h.map.standardizer.mean.size()))
            throw ConfigError("model: theta length does not match the feature map");
        if (j.contains("bound") && !j["bound"].is_null()) h.bound = j["bound"].get<double>();
        h.uses_judge = j.value("uses_judge", false);
        h.metadata = j.value("metadata", json::object());
        return h;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("model file: ") + e.what());
    }
}

std::vector<std::uint8_t> predict_class(const ScoreModel& h, const Matrix& raw) {
    const Vector s = h.scores(raw);
    std::vector<std::uint8_t> out(static_cast<std::size_t>(s.size()));
    for (Eigen::Index i = 0; i < s.size(); ++i) out[static_cast<std::size_t>(i)] = s(i) >= 0.0 ? 1 : 0;
    return out;
}

std::vector<std::uint8_t> predict_class(const ScoreModel& h, const SelectiveDataset& ds) {
    return predict_class(h, h.design(ds));
}

double weighted_surrogate_risk(const ScoreModel& h, const std::vector<double>& w, const Matrix& raw,
                               LossKind loss) {
    if (static_cast<std::size_t>(raw.rows()) != w.size()) throw ArgumentError("weights and rows differ in length");
    if (w.empty()) return 0.0;
    const Vector s = h.scores(raw);
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] == 0.0) continue;
        total += std::abs(w[i]) * surrogate_value(loss, sign_of(w[i]) * s(static_cast<Eigen::Index>(i)));
    }
    return total / static_cast<double>(w.size());
}

json FitDiagnostics::to_json() const {
    return {{"iterations", iterations},   {"converged", converged},
            {"stalled", stalled},         {"objective", objective},
            {"gradient_norm", gradient_norm}, {"weight_mass", weight_mass}};
}

json LearnerConfig::to_json() const {
    return {{"loss", std::string(to_string(loss))},
            {"feature_map", std::string(to_string(feature_map))},
            {"lambda", reg_lambda},
            {"K", folds},
            {"bound", bound ? json(*bound) : json(nullptr)},
            {"tol", optimizer.tol},
            {"max_iters", optimizer.max_iters}};
}

LearnerConfig LearnerConfig::from_json(const json& j) {
    LearnerConfig c;
    for (const auto& [key, value] : j.items()) {
        if (key == "loss")
            c.loss = parse_loss(value.get<std::string>());
        else if (key == "feature_map")
            c.feature_map = parse_feature_map(value.get<std::string>());
        else if (key == "lambda")
            c.reg_lambda = value.get<double>();
        else if (key == "K")
            c.folds = value.get<int>();
        else if (key == "bound")
            c.bound = value.is_null() ? std::nullopt : std::optional<double>(value.get<double>());
        else if (key == "tol")
            c.optimizer.tol = value.get<double>();
        else if (key == "max_iters")
            c.optimizer.max_iters = value.get<int>();
        else
            throw ConfigError("learner: unknown key '" + key + "'");
    }
    if (c.reg_lambda < 0) throw ConfigError("learner: lambda must be non-negative");
    if (c.folds < 2) throw ConfigError("learner: K must be at least 2");
    if (c.bound && !(*c.bound > 0)) throw ConfigError("learner: bound must be positive");
    if (!(c.optimizer.tol > 0) || c.optimizer.max_iters < 1) throw ConfigError("learner: bad optimizer settings");
    return c;
}

namespace {

struct Objective {
    const Matrix& phi;
    std::vector<double> coef;  // |w_i| / (K * n_k)
    std::vector<double> sgn;
    LossKind loss;
    double lambda;

    double value(const Vector& theta, const Vector& margin_base) const {
        double f = 0.0;
        for (std::size_t i = 0; i < coef.size(); ++i) {
            if (coef[i] == 0.0) continue;
            f += coef[i] * surrogate_value(loss, sgn[i] * margin_base(static_cast<Eigen::Index>(i)));
        }
        return f + 0.5 * lambda * theta.squaredNorm();
    }

    Vector gradient(const Vector& theta, const Vector& scores) const {
        Vector r(scores.size());
        for (std::size_t i = 0; i < coef.size(); ++i) {
            const auto e = static_cast<Eigen::Index>(i);
            r(e) = coef[i] == 0.0 ? 0.0 : coef[i] * sgn[i] * surrogate_derivative(loss, sgn[i] * scores(e));
        }
        return phi.transpose() * r + lambda * theta;
    }
};

Vector project(const Matrix& phi, Vector theta, std::optional<double> bound) {
    if (!bound) return theta;
    const double top = (phi * theta).cwiseAbs().maxCoeff();
    if (top > *bound) theta *= *bound / top;
    return theta;
}

}  // namespace

Vector minimize_weighted_surrogate(const Matrix& phi, const std::vector<double>& w,
                                   const std::vector<int>& group, int K, LossKind loss,
                                   double reg_lambda, const OptimizerConfig& opt,
                                   std::optional<double> bound, FitDiagnostics* diag) {
    const std::size_t n = w.size();
    if (static_cast<std::size_t>(phi.rows()) != n || group.size() != n)
        throw ArgumentError("ERM: weights, groups and design rows differ in length");
    if (n == 0) throw ArgumentError("ERM: empty training set");
    if (K < 1) throw ArgumentError("ERM: need at least one group");
    std::vector<std::size_t> group_size(static_cast<std::size_t>(K), 0);
    for (int g : group) {
        if (g < 1 || g > K) throw ContractError("ERM: group index outside 1..K");
        ++group_size[static_cast<std::size_t>(g - 1)];
    }

    Objective obj{phi, std::vector<double>(n), std::vector<double>(n), loss, reg_lambda};
    double mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(w[i])) throw NumericError("ERM: non-finite weight at row " + std::to_string(i + 1));
        const auto nk = static_cast<double>(group_size[static_cast<std::size_t>(group[i] - 1)]);
        obj.coef[i] = std::abs(w[i]) / (static_cast<double>(K) * nk);
        obj.sgn[i] = sign_of(w[i]);
        mass += std::abs(w[i]);
    }

    FitDiagnostics local;
    FitDiagnostics& d = diag ? *diag : local;
    d = FitDiagnostics{};
    d.weight_mass = mass / static_cast<double>(n);

    Vector theta = Vector::Zero(phi.cols());
    Vector scores = phi * theta;
    double f = obj.value(theta, scores);
    Vector g = obj.gradient(theta, scores);
    std::vector<double> recent;  // for the failure trace
    auto fail = [&](const std::string& what) {
        std::ostringstream msg;
        msg << "ERM: " << what << " at iteration " << d.iterations << "; recent objectives:";
        for (double v : recent) msg << ' ' << v;
        throw NumericError(msg.str());
    };
    if (!std::isfinite(f)) fail("non-finite objective");
    if (opt.record_trace) d.trace.push_back(f);

    double step = 1.0;
    Vector prev_theta, prev_g;
    for (d.iterations = 0; d.iterations < opt.max_iters; ++d.iterations) {
        d.gradient_norm = g.norm();
        if (d.gradient_norm < opt.tol) {
            d.converged = true;
            break;
        }
        if (prev_theta.size() > 0) {
            // Barzilai-Borwein initial step, then backtrack to sufficient decrease.
            const Vector s = theta - prev_theta;
            const Vector y = g - prev_g;
            const double sy = s.dot(y);
            step = sy > 0 ? s.squaredNorm() / sy : 2.0 * step;
            step = std::clamp(step, 1e-12, 1e12);
        }
        bool accepted = false;
        Vector cand, cand_scores;
        double f_cand = f;
        for (int ls = 0; ls < 80; ++ls) {
            cand = project(phi, theta - step * g, bound);
            cand_scores = phi * cand;
            f_cand = obj.value(cand, cand_scores);
            const double decrease = bound ? (cand - theta).squaredNorm() / step : step * g.squaredNorm();
            if (std::isfinite(f_cand) && f_cand <= f - opt.armijo * decrease) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            d.stalled = true;
            break;
        }
        if (bound && (cand - theta).norm() / step < opt.tol) {
            theta = cand;
            scores = cand_scores;
            f = f_cand;
            d.converged = true;
            break;
        }
        prev_theta = theta;
        prev_g = g;
        theta = cand;
        scores = cand_scores;
        f = f_cand;
        g = obj.gradient(theta, scores);
        if (!g.allFinite()) fail("non-finite gradient");
        recent.push_back(f);
        if (recent.size() > 5) recent.erase(recent.begin());
        if (opt.record_trace) d.trace.push_back(f);
    }
    d.objective = f;
    d.gradient_norm = g.norm();
    return theta;
}

ScoreModel fit_weighted_erm(const SelectiveDataset& ds, const FoldPlan& folds,
                            const WeightVector& weights, const LearnerConfig& config,
                            FitDiagnostics* diag) {
    if (weights.size() != ds.size() || folds.assignment.size() != ds.size())
        throw ArgumentError("ERM: weights, folds and dataset differ in length");
    if (weights.fold.size() != ds.size()) throw ContractError("ERM: weights carry no fold provenance");
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (weights.fold[i] != folds.assignment[i] || weights.fold[i] < 1)
            throw ContractError("ERM: weight for row " + std::to_string(i + 1) +
                                " was not estimated out of its own fold");
    ScoreModel h;
    h.map = FeatureMap::fit(config.feature_map, ds.features());
    h.bound = config.bound;
    const Matrix phi = h.map.apply(ds.features());
    FitDiagnostics local;
    FitDiagnostics& d = diag ? *diag : local;
    h.theta = minimize_weighted_surrogate(phi, weights.w, folds.assignment, folds.K, config.loss,
                                          config.reg_lambda, config.optimizer, config.bound, &d);
    h.metadata["mode"] = std::string(to_string(weights.mode));
    h.metadata["learner"] = config.to_json();
    h.metadata["diagnostics"] = d.to_json();
    return h;
}

ScoreModel fit_baseline(const SelectiveDataset& ds, BaselineKind which, const LearnerConfig& config,
                        FitDiagnostics* diag) {
    std::vector<std::size_t> rows;
    std::vector<double> w;
    if (which == BaselineKind::full_sample) {
        if (!ds.has_oracle()) throw ArgumentError("full-sample baseline needs oracle outcomes");
        for (std::size_t i = 0; i < ds.size(); ++i) {
            rows.push_back(i);
            w.push_back(ds.oracle_outcome()[i] ? 1.0 : -1.0);
        }
    } else {
        for (std::size_t i = 0; i < ds.size(); ++i) {
            if (!ds.decision()[i]) continue;
            rows.push_back(i);
            w.push_back(*ds.outcome()[i] ? 1.0 : -1.0);
        }
    }
    if (rows.empty()) throw DataError("baseline: no labeled rows to train on");
    const Matrix all = features_with_judge(ds);
    Matrix raw(static_cast<Eigen::Index>(rows.size()), all.cols());
    for (std::size_t r = 0; r < rows.size(); ++r)
        raw.row(static_cast<Eigen::Index>(r)) = all.row(static_cast<Eigen::Index>(rows[r]));

    ScoreModel h;
    h.uses_judge = true;
    h.map = FeatureMap::fit(config.feature_map, raw);
    h.bound = config.bound;
    FitDiagnostics local;
    FitDiagnostics& d = diag ? *diag : local;
    h.theta = minimize_weighted_surrogate(h.map.apply(raw), w, std::vector<int>(rows.size(), 1), 1,
                                          config.loss, config.reg_lambda, config.optimizer,
                                          config.bound, &d);
    h.metadata["mode"] = which == BaselineKind::full_sample ? "full" : "selected";
    h.metadata["learner"] = config.to_json();
    h.metadata["diagnostics"] = d.to_json();
    return h;
}

std::string_view to_string(LearningMode m) {
    switch (m) {
        case LearningMode::point: return "point";
        case LearningMode::partial: return "partial";
        case LearningMode::selected: return "selected";
        case LearningMode::full: return "full";
    }
    return "unknown";
}

LearningMode parse_mode(std::string_view s) {
    if (s == "point") return LearningMode::point;
    if (s == "partial") return LearningMode::partial;
    if (s == "selected") return LearningMode::selected;
    if (s == "full") return LearningMode::full;
    throw ConfigError("unknown mode '" + std::string(s) + "'");
}

PipelineResult fit_pipeline(const SelectiveDataset& ds, LearningMode mode, const PipelineConfig& config,
                            const NuisanceSet* nuisances, const FoldPlan* folds) {
    PipelineResult out;
    if (mode == LearningMode::selected || mode == LearningMode::full) {
        out.model = fit_baseline(ds, mode == LearningMode::full ? BaselineKind::full_sample
                                                                : BaselineKind::selected_sample,
                                 config.learner, &out.diagnostics);
        return out;
    }
    FoldPlan plan = folds ? *folds : make_folds(ds.size(), config.learner.folds, derive_seed(config.seed, "folds"));
    NuisanceSet local;
    if (!nuisances) {
        NuisanceComponents comp;
        comp.per_judge = mode == LearningMode::partial;
        comp.pooled = mode == LearningMode::point;
        local = crossfit_nuisances(ds, plan, config.nuisance, comp, config.jobs);
        nuisances = &local;
    }
    WeightVector w;
    if (mode == LearningMode::point) {
        w = point_weight(*nuisances, config.eps_denom);
        out.weight_flag_rate = w.flag_rate();
    } else {
        const IntervalBounds b = partial_bounds(*nuisances, config.bound_a, config.bound_b);
        out.weight_flag_rate = b.crossed_rate();
        w = partial_weight(b);
    }
    out.model = fit_weighted_erm(ds, plan, w, config.learner, &out.diagnostics);
    out.model.metadata["nuisance"] = config.nuisance.to_json();
    return out;
}

}  // namespace ivsel
