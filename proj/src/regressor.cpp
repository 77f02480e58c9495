#include "ivsel/regressor.hpp"

#include "ivsel/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace ivsel {

using nlohmann::json;

std::string_view to_string(RegressorKind k) {
    switch (k) {
        case RegressorKind::ridge_linear: return "ridge-linear";
        case RegressorKind::logistic: return "logistic";
        case RegressorKind::gbm_stumps: return "gbm-stumps";
    }
    return "unknown";
}

RegressorKind parse_regressor_kind(std::string_view s) {
    if (s == "ridge-linear") return RegressorKind::ridge_linear;
    if (s == "logistic") return RegressorKind::logistic;
    if (s == "gbm-stumps") return RegressorKind::gbm_stumps;
    throw ConfigError("unknown regressor kind '" + std::string(s) + "'");
}

namespace {

constexpr const char* kGridKeys[] = {"ridge_lambda", "logistic_lambda", "rounds", "learning_rate", "max_depth",
                                     "min_leaf"};

void set_hyper(RegressorConfig& c, const std::string& key, double v) {
    if (key == "ridge_lambda")
        c.ridge_lambda = v;
    else if (key == "logistic_lambda")
        c.logistic_lambda = v;
    else if (key == "rounds")
        c.rounds = static_cast<int>(v);
    else if (key == "learning_rate")
        c.learning_rate = v;
    else if (key == "max_depth")
        c.max_depth = static_cast<int>(v);
    else if (key == "min_leaf")
        c.min_leaf = static_cast<int>(v);
    else
        throw ConfigError("nuisance: unknown grid key '" + key + "'");
}

}  // namespace

void RegressorConfig::validate() const {
    if (ridge_lambda < 0 || logistic_lambda < 0) throw ConfigError("nuisance: negative penalty");
    if (rounds < 0 || max_depth < 1 || min_leaf < 1)
        throw ConfigError("nuisance: rounds >= 0, max_depth >= 1, min_leaf >= 1 required");
    if (!(learning_rate > 0 && learning_rate <= 1))
        throw ConfigError("nuisance: learning_rate must lie in (0, 1]");
    if (tune_folds < 2) throw ConfigError("nuisance: tune_folds must be at least 2");
    for (const auto& [key, values] : grid) {
        if (values.empty()) throw ConfigError("nuisance: grid '" + key + "' is empty");
        for (double v : values) {
            RegressorConfig c = *this;
            c.grid.clear();
            set_hyper(c, key, v);
            c.validate();
        }
    }
}

json RegressorConfig::to_json() const {
    json j = {{"kind", std::string(to_string(kind))},
              {"ridge_lambda", ridge_lambda},
              {"logistic_lambda", logistic_lambda},
              {"rounds", rounds},
              {"learning_rate", learning_rate},
              {"max_depth", max_depth},
              {"min_leaf", min_leaf},
              {"tune", tune}};
    if (tune) {
        j["tune_folds"] = tune_folds;
        j["grid"] = grid;
    }
    return j;
}

RegressorConfig RegressorConfig::from_json(const json& j) {
    RegressorConfig c;
    for (const auto& [key, value] : j.items()) {
        if (key == "kind")
            c.kind = parse_regressor_kind(value.get<std::string>());
        else if (key == "tune")
            c.tune = value.get<bool>();
        else if (key == "tune_folds")
            c.tune_folds = value.get<int>();
        else if (key == "grid") {
            for (const auto& [g, vals] : value.items()) {
                if (std::find(std::begin(kGridKeys), std::end(kGridKeys), g) == std::end(kGridKeys))
                    throw ConfigError("nuisance: unknown grid key '" + g + "'");
                c.grid[g] = vals.get<std::vector<double>>();
            }
        } else if (std::find(std::begin(kGridKeys), std::end(kGridKeys), key) != std::end(kGridKeys))
            set_hyper(c, key, value.get<double>());
        else
            throw ConfigError("nuisance: unknown key '" + key + "'");
    }
    c.validate();
    return c;
}

namespace {

double sigmoid(double t) {
    if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

struct LinearFit {
    double intercept;
    Vector slope;
};

LinearFit fit_ridge(const Matrix& xs, const Vector& y, double lambda) {
    const double n = static_cast<double>(xs.rows());
    const double ybar = y.mean();
    const Vector yc = y.array() - ybar;
    if (xs.cols() == 0) return {ybar, Vector()};
    // xs is already centered by the standardizer.
    Matrix gram = xs.transpose() * xs / n;
    gram.diagonal().array() += lambda;
    Eigen::LDLT<Matrix> ldlt(gram);
    const Vector piv = ldlt.vectorD().cwiseAbs();
    if (ldlt.info() != Eigen::Success || !(piv.minCoeff() > 1e-12 * piv.maxCoeff()))
        throw NumericError("ridge: singular design (increase ridge_lambda)");
    const Vector slope = ldlt.solve(xs.transpose() * yc / n);
    if (!slope.allFinite()) throw NumericError("ridge: non-finite coefficients");
    return {ybar, slope};
}

LinearFit fit_logistic(const Matrix& xs, const Vector& y, double lambda) {
    const auto n = xs.rows();
    const auto p = xs.cols();
    Matrix design(n, p + 1);
    design.col(0).setOnes();
    design.rightCols(p) = xs;
    Vector beta = Vector::Zero(p + 1);
    const double ybar = std::clamp(y.mean(), 1e-6, 1 - 1e-6);
    beta(0) = std::log(ybar / (1 - ybar));

    auto objective = [&](const Vector& b) {
        const Vector eta = design * b;
        double loss = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            // log(1 + e^eta) - y * eta, evaluated stably
            const double e = eta(i);
            const double softplus = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
            loss += softplus - y(i) * e;
        }
        return loss / static_cast<double>(n) + 0.5 * lambda * b.tail(p).squaredNorm();
    };

    double f = objective(beta);
    for (int iter = 0; iter < 100; ++iter) {
        const Vector eta = design * beta;
        Vector mu(n), wts(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            mu(i) = sigmoid(eta(i));
            wts(i) = std::max(mu(i) * (1 - mu(i)), 1e-12);
        }
        Vector grad = design.transpose() * (mu - y) / static_cast<double>(n);
        grad.tail(p) += lambda * beta.tail(p);
        if (grad.norm() < 1e-10) break;
        Matrix hess = design.transpose() * wts.asDiagonal() * design / static_cast<double>(n);
        hess.diagonal().tail(p).array() += lambda;
        hess.diagonal().array() += 1e-12;
        const Vector step = hess.ldlt().solve(grad);
        double t = 1.0;
        bool moved = false;
        for (int ls = 0; ls < 50; ++ls) {
            const Vector cand = beta - t * step;
            const double fc = objective(cand);
            if (std::isfinite(fc) && fc <= f - 1e-4 * t * grad.dot(step)) {
                beta = cand;
                f = fc;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if (!moved) break;
    }
    if (!beta.allFinite()) throw NumericError("logistic: non-finite coefficients");
    return {beta(0), beta.tail(p)};
}

// Squared-loss regression tree grown level by level over presorted columns.
class TreeBuilder {
public:
    TreeBuilder(const Matrix& x, int max_depth, int min_leaf)
        : x_(x), max_depth_(max_depth), min_leaf_(min_leaf) {
        const auto n = static_cast<std::size_t>(x.rows());
        const auto d = static_cast<std::size_t>(x.cols());
        order_.resize(d);
        sorted_.resize(d);
        for (std::size_t j = 0; j < d; ++j) {
            auto& ord = order_[j];
            ord.resize(n);
            std::iota(ord.begin(), ord.end(), 0u);
            const auto col = x.col(static_cast<Eigen::Index>(j));
            std::stable_sort(ord.begin(), ord.end(), [&](std::uint32_t a, std::uint32_t b) {
                return col(a) < col(b);
            });
            sorted_[j].resize(n);
            for (std::size_t pos = 0; pos < n; ++pos) sorted_[j][pos] = col(ord[pos]);
        }
        node_of_.resize(n);
    }

    // Fits one tree to `residual`; leaf outputs are scaled by `shrink` and
    // added to `fitted` in place.
    Regressor::Tree grow(const Vector& residual, double shrink, Vector& fitted) {
        const std::size_t n = node_of_.size();
        Regressor::Tree tree(1);
        std::fill(node_of_.begin(), node_of_.end(), 0);
        std::vector<int> active = {0};

        for (int depth = 0; depth < max_depth_ && !active.empty(); ++depth) {
            const std::size_t nodes = tree.size();
            cnt_.assign(nodes, 0);
            sum_.assign(nodes, 0.0);
            is_active_.assign(nodes, 0);
            for (int k : active) is_active_[static_cast<std::size_t>(k)] = 1;
            for (std::size_t i = 0; i < n; ++i) {
                const auto k = static_cast<std::size_t>(node_of_[i]);
                ++cnt_[k];
                sum_[k] += residual(static_cast<Eigen::Index>(i));
            }
            best_gain_.assign(nodes, kMinGain);
            best_feature_.assign(nodes, -1);
            best_threshold_.assign(nodes, 0.0);

            for (std::size_t j = 0; j < order_.size(); ++j) {
                cnt_left_.assign(nodes, 0);
                sum_left_.assign(nodes, 0.0);
                has_last_.assign(nodes, 0);
                last_.assign(nodes, 0.0);
                const auto& ord = order_[j];
                const auto& vals = sorted_[j];
                for (std::size_t pos = 0; pos < n; ++pos) {
                    const std::uint32_t i = ord[pos];
                    const auto k = static_cast<std::size_t>(node_of_[i]);
                    if (!is_active_[k]) continue;
                    const double v = vals[pos];
                    if (has_last_[k] && v > last_[k]) {
                        const long nl = cnt_left_[k];
                        const long nr = cnt_[k] - nl;
                        if (nl >= min_leaf_ && nr >= min_leaf_) {
                            const double sl = sum_left_[k];
                            const double sr = sum_[k] - sl;
                            const double gain = sl * sl / static_cast<double>(nl) +
                                                sr * sr / static_cast<double>(nr) -
                                                sum_[k] * sum_[k] / static_cast<double>(cnt_[k]);
                            if (gain > best_gain_[k]) {
                                best_gain_[k] = gain;
                                best_feature_[k] = static_cast<int>(j);
                                double thr = 0.5 * (last_[k] + v);
                                if (!(thr < v)) thr = last_[k];
                                best_threshold_[k] = thr;
                            }
                        }
                    }
                    ++cnt_left_[k];
                    sum_left_[k] += residual(i);
                    last_[k] = v;
                    has_last_[k] = 1;
                }
            }

            std::vector<int> next;
            for (int k : active) {
                const auto ku = static_cast<std::size_t>(k);
                if (best_feature_[ku] < 0) continue;
                const int left = static_cast<int>(tree.size());
                tree.emplace_back();
                tree.emplace_back();
                tree[ku].feature = best_feature_[ku];
                tree[ku].threshold = best_threshold_[ku];
                tree[ku].left = left;
                tree[ku].right = left + 1;
                next.push_back(left);
                next.push_back(left + 1);
            }
            if (next.empty()) break;
            for (std::size_t i = 0; i < n; ++i) {
                const auto& node = tree[static_cast<std::size_t>(node_of_[i])];
                if (node.feature < 0) continue;
                node_of_[i] = x_(static_cast<Eigen::Index>(i), node.feature) <= node.threshold
                                  ? node.left
                                  : node.right;
            }
            active = std::move(next);
        }

        std::vector<double> leaf_sum(tree.size(), 0.0);
        std::vector<long> leaf_cnt(tree.size(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto k = static_cast<std::size_t>(node_of_[i]);
            leaf_sum[k] += residual(static_cast<Eigen::Index>(i));
            ++leaf_cnt[k];
        }
        for (std::size_t k = 0; k < tree.size(); ++k)
            if (tree[k].feature < 0 && leaf_cnt[k] > 0)
                tree[k].value = shrink * leaf_sum[k] / static_cast<double>(leaf_cnt[k]);
        for (std::size_t i = 0; i < n; ++i)
            fitted(static_cast<Eigen::Index>(i)) += tree[static_cast<std::size_t>(node_of_[i])].value;
        return tree;
    }

private:
    static constexpr double kMinGain = 1e-12;

    const Matrix& x_;
    int max_depth_;
    int min_leaf_;
    std::vector<std::vector<std::uint32_t>> order_;
    std::vector<std::vector<double>> sorted_;
    std::vector<int> node_of_;
    std::vector<long> cnt_, cnt_left_;
    std::vector<double> sum_, sum_left_, last_, best_gain_, best_threshold_;
    std::vector<int> best_feature_;
    std::vector<char> is_active_, has_last_;
};

}  // namespace

namespace {

std::map<std::string, std::vector<double>> default_grid(RegressorKind kind) {
    switch (kind) {
        case RegressorKind::ridge_linear: return {{"ridge_lambda", {1e-6, 1e-3, 1e-1, 10.0}}};
        case RegressorKind::logistic: return {{"logistic_lambda", {1e-4, 1e-2, 1.0}}};
        case RegressorKind::gbm_stumps: return {{"rounds", {100, 200, 400}}, {"max_depth", {1, 2, 3}}};
    }
    return {};
}

// Lowest inner-CV squared error over the grid; rows go to inner fold i mod k.
RegressorConfig tune_config(const RegressorConfig& config, const Matrix& x, const Vector& y) {
    const auto grid = config.grid.empty() ? default_grid(config.kind) : config.grid;
    RegressorConfig base = config;
    base.tune = false;
    base.grid.clear();
    std::vector<RegressorConfig> candidates{base};
    for (const auto& [key, values] : grid) {
        std::vector<RegressorConfig> next;
        for (const auto& c : candidates)
            for (double v : values) {
                RegressorConfig d = c;
                set_hyper(d, key, v);
                next.push_back(d);
            }
        candidates = std::move(next);
    }
    const auto n = x.rows();
    const int k = config.tune_folds;
    if (n < 2 * k) return base;
    std::vector<std::vector<Eigen::Index>> train(static_cast<std::size_t>(k)), held(static_cast<std::size_t>(k));
    for (Eigen::Index i = 0; i < n; ++i)
        for (int f = 0; f < k; ++f) (i % k == f ? held : train)[static_cast<std::size_t>(f)].push_back(i);

    double best = INFINITY;
    RegressorConfig chosen = base;
    for (const auto& c : candidates) {
        double sse = 0;
        for (int f = 0; f < k; ++f) {
            const auto& tr = train[static_cast<std::size_t>(f)];
            const auto& ho = held[static_cast<std::size_t>(f)];
            const Regressor r = Regressor::fit(c, x(tr, Eigen::all), y(tr));
            const Vector p = r.predict(x(ho, Eigen::all));
            sse += (p - y(ho)).squaredNorm();
        }
        if (sse < best) {
            best = sse;
            chosen = c;
        }
    }
    return chosen;
}

}  // namespace

Regressor Regressor::fit(const RegressorConfig& requested, const Matrix& x, const Vector& y) {
    if (x.rows() != y.size()) throw ArgumentError("regressor: rows(X) != len(y)");
    if (y.size() < 2) throw ArgumentError("regressor: need at least two rows");
    if (!x.allFinite() || !y.allFinite()) throw ArgumentError("regressor: non-finite input");

    const RegressorConfig config = requested.tune ? tune_config(requested, x, y) : requested;
    Regressor r;
    r.kind_ = config.kind;
    r.config_ = config;
    r.probability_ = std::all_of(y.data(), y.data() + y.size(),
                                 [](double v) { return v == 0.0 || v == 1.0; });
    if (r.probability_) {
        r.lo_ = kProbabilityClip;
        r.hi_ = 1.0 - kProbabilityClip;
    } else {
        r.lo_ = y.minCoeff();
        r.hi_ = y.maxCoeff();
    }

    switch (config.kind) {
        case RegressorKind::ridge_linear: {
            r.std_ = Standardizer::fit(x);
            const auto fit = fit_ridge(r.std_.apply(x), y, config.ridge_lambda);
            r.intercept_ = fit.intercept;
            r.slope_ = fit.slope;
            break;
        }
        case RegressorKind::logistic: {
            // bounded targets outside [0, 1] are fitted on their observed range
            Vector ys = y;
            if (y.minCoeff() < 0.0 || y.maxCoeff() > 1.0) {
                r.link_offset_ = y.minCoeff();
                r.link_scale_ = y.maxCoeff() - y.minCoeff();
                ys = (y.array() - r.link_offset_) / r.link_scale_;
            }
            r.std_ = Standardizer::fit(x);
            const auto fit = fit_logistic(r.std_.apply(x), ys, config.logistic_lambda);
            r.intercept_ = fit.intercept;
            r.slope_ = fit.slope;
            break;
        }
        case RegressorKind::gbm_stumps: {
            r.base_ = y.mean();
            Vector fitted = Vector::Constant(y.size(), r.base_);
            TreeBuilder builder(x, config.max_depth, config.min_leaf);
            r.trees_.reserve(static_cast<std::size_t>(config.rounds));
            for (int round = 0; round < config.rounds; ++round) {
                const Vector residual = y - fitted;
                r.trees_.push_back(builder.grow(residual, config.learning_rate, fitted));
            }
            break;
        }
    }
    return r;
}

double Regressor::raw_predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    switch (kind_) {
        case RegressorKind::ridge_linear:
        case RegressorKind::logistic: {
            double eta = intercept_;
            for (Eigen::Index j = 0; j < slope_.size(); ++j)
                eta += slope_(j) * (row(j) - std_.mean(j)) / std_.scale(j);
            return kind_ == RegressorKind::logistic ? link_offset_ + link_scale_ * sigmoid(eta) : eta;
        }
        case RegressorKind::gbm_stumps: {
            double out = base_;
            for (const auto& tree : trees_) {
                std::size_t k = 0;
                while (tree[k].feature >= 0)
                    k = static_cast<std::size_t>(row(tree[k].feature) <= tree[k].threshold
                                                     ? tree[k].left
                                                     : tree[k].right);
                out += tree[k].value;
            }
            return out;
        }
    }
    return 0.0;
}

double Regressor::predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    const double v = raw_predict(row);
    if (!std::isfinite(v)) throw NumericError("regressor produced a non-finite prediction");
    if (probability_ || kind_ != RegressorKind::ridge_linear) return std::clamp(v, lo_, hi_);
    return v;
}

Vector Regressor::predict(const Matrix& x) const {
    Vector out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = predict_row(x.row(i));
    return out;
}

}  // namespace ivsel
