#pragma once

#include "ivsel/dataset.hpp"
#include "ivsel/identification.hpp"
#include "ivsel/nuisance.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ivsel {

enum class LossKind { hinge, logistic, exponential };
std::string_view to_string(LossKind k);
LossKind parse_loss(std::string_view s);

/// Convex surrogate Phi(alpha) for the 0-1 loss on margin alpha.
double surrogate_value(LossKind loss, double alpha);
/// Derivative (a subgradient for hinge, taking 0 at the kink).
double surrogate_derivative(LossKind loss, double alpha);

/// sign with the tie broken towards +1.
inline double sign_of(double v) { return v >= 0.0 ? 1.0 : -1.0; }

enum class FeatureMapKind { raw, raw_intercept, poly2 };
std::string_view to_string(FeatureMapKind k);
FeatureMapKind parse_feature_map(std::string_view s);

/// Standardization followed by the chosen basis expansion.
struct FeatureMap {
    FeatureMapKind kind = FeatureMapKind::raw_intercept;
    Standardizer standardizer;

    static FeatureMap fit(FeatureMapKind kind, const Matrix& raw);
    Matrix apply(const Matrix& raw) const;
    Eigen::Index output_dim(Eigen::Index raw_dim) const;
};

/// Linear score h(x) = theta . phi(x); classifier f = (sign(h) + 1) / 2.
struct ScoreModel {
    FeatureMap map;
    Vector theta;
    std::optional<double> bound;  // cap B on |h| over the training rows
    bool uses_judge = false;      // judge code appended as a raw feature
    nlohmann::json metadata = nlohmann::json::object();

    Vector scores(const Matrix& raw) const;
    /// Raw design for a dataset, honouring `uses_judge`.
    Matrix design(const SelectiveDataset& ds) const;

    nlohmann::json to_json() const;
    static ScoreModel from_json(const nlohmann::json& j);
};

std::vector<std::uint8_t> predict_class(const ScoreModel& h, const Matrix& raw);
std::vector<std::uint8_t> predict_class(const ScoreModel& h, const SelectiveDataset& ds);

/// Mean over rows of |w_i| * Phi(sign(w_i) * h(x_i)).
double weighted_surrogate_risk(const ScoreModel& h, const std::vector<double>& w,
                               const Matrix& raw, LossKind loss);

struct OptimizerConfig {
    double tol = 1e-8;     // on the gradient norm
    int max_iters = 10000;
    double armijo = 1e-4;  // sufficient-decrease constant
    bool record_trace = false;
};

struct FitDiagnostics {
    int iterations = 0;
    bool converged = false;
    bool stalled = false;  // line search found no further decrease
    double objective = 0.0;
    double gradient_norm = 0.0;
    double weight_mass = 0.0;  // mean |w|
    std::vector<double> trace;  // objective per accepted iterate when recorded

    nlohmann::json to_json() const;
};

struct LearnerConfig {
    LossKind loss = LossKind::logistic;
    FeatureMapKind feature_map = FeatureMapKind::raw_intercept;
    double reg_lambda = 1e-3;
    int folds = 5;
    std::optional<double> bound;
    OptimizerConfig optimizer;

    nlohmann::json to_json() const;
    static LearnerConfig from_json(const nlohmann::json& j);
};

/// Solves  min_theta (1/K) sum_k mean_{i in fold k} |w_i| Phi(s_i theta.phi_i)
///                  + (lambda/2) |theta|^2
/// by gradient descent with backtracking line search. `group` holds the fold
/// (1..K) of each row.
Vector minimize_weighted_surrogate(const Matrix& phi, const std::vector<double>& w,
                                   const std::vector<int>& group, int K, LossKind loss,
                                   double reg_lambda, const OptimizerConfig& opt,
                                   std::optional<double> bound, FitDiagnostics* diag);

/// Cross-fitted weighted ERM over the dataset's features. Every weight must
/// come from the fold it is evaluated on.
ScoreModel fit_weighted_erm(const SelectiveDataset& ds, const FoldPlan& folds,
                            const WeightVector& weights, const LearnerConfig& config,
                            FitDiagnostics* diag = nullptr);

enum class BaselineKind { selected_sample, full_sample };

/// Unit-weight surrogate classification on labeled rows (Y) or on all rows
/// (Y*), with the judge code included as a feature.
ScoreModel fit_baseline(const SelectiveDataset& ds, BaselineKind which, const LearnerConfig& config,
                        FitDiagnostics* diag = nullptr);

enum class LearningMode { point, partial, selected, full };
std::string_view to_string(LearningMode m);
LearningMode parse_mode(std::string_view s);

struct PipelineConfig {
    LearnerConfig learner;
    RegressorConfig nuisance;
    double eps_denom = kDefaultEpsDenom;
    double bound_a = 0.0;
    double bound_b = 1.0;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
};

struct PipelineResult {
    ScoreModel model;
    FitDiagnostics diagnostics;
    double weight_flag_rate = 0.0;  // floored/clipped (point) or crossed (partial)
};

/// Whole learning procedure: K-fold partition, out-of-fold nuisances and
/// weights, then the cross-fitted weighted ERM. Baseline modes skip the
/// nuisance stage. `nuisances` may carry precomputed out-of-fold estimates
/// made with the same fold plan.
PipelineResult fit_pipeline(const SelectiveDataset& ds, LearningMode mode,
                            const PipelineConfig& config, const NuisanceSet* nuisances = nullptr,
                            const FoldPlan* folds = nullptr);

}  // namespace ivsel
