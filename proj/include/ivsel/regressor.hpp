#pragma once

#include "ivsel/dataset.hpp"

#include <json.hpp>

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace ivsel {

enum class RegressorKind { ridge_linear, logistic, gbm_stumps };

std::string_view to_string(RegressorKind k);
RegressorKind parse_regressor_kind(std::string_view s);

struct RegressorConfig {
    RegressorKind kind = RegressorKind::gbm_stumps;
    double ridge_lambda = 1e-6;     // ridge penalty on standardized slopes
    double logistic_lambda = 1e-4;  // L2 penalty for the logistic link
    int rounds = 200;
    double learning_rate = 0.1;
    int max_depth = 2;
    int min_leaf = 20;

    // Grid search by inner cross-validation on whatever sample fit() sees.
    // Keys are hyperparameter names above; an empty grid uses a small
    // default grid for the kind.
    bool tune = false;
    int tune_folds = 5;
    std::map<std::string, std::vector<double>> grid;

    void validate() const;
    nlohmann::json to_json() const;
    static RegressorConfig from_json(const nlohmann::json& j);
};

/// Probability targets (all labels in {0,1}) are clipped to this interval.
inline constexpr double kProbabilityClip = 1e-6;

/// A fitted conditional-mean model. Predictions are always finite; boosted and
/// logistic fits stay inside the range of the training targets.
class Regressor {
public:
    static Regressor fit(const RegressorConfig& config, const Matrix& x, const Vector& y);

    Vector predict(const Matrix& x) const;
    double predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;

    RegressorKind kind() const { return kind_; }
    /// Hyperparameters actually used (the tuned ones when tuning ran).
    const RegressorConfig& config() const { return config_; }
    bool probability_target() const { return probability_; }

    struct Node {
        int feature = -1;  // -1 marks a leaf
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        double value = 0.0;
    };
    using Tree = std::vector<Node>;

    const std::vector<Tree>& trees() const { return trees_; }

private:
    double raw_predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;

    RegressorKind kind_ = RegressorKind::gbm_stumps;
    RegressorConfig config_;
    bool probability_ = false;
    double lo_ = 0.0, hi_ = 0.0;

    // linear kinds: prediction = link(intercept + slope . (x - mean) / scale)
    Standardizer std_;
    double intercept_ = 0.0;
    Vector slope_;
    double link_offset_ = 0.0, link_scale_ = 1.0;  // logistic output range

    // boosting: base + sum of tree outputs (already scaled by the learning rate)
    double base_ = 0.0;
    std::vector<Tree> trees_;
};

}  // namespace ivsel
