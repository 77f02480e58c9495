#pragma once

#include "ivsel/dataset.hpp"
#include "ivsel/regressor.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace ivsel {

/// Which groups of conditional expectations to estimate.
struct NuisanceComponents {
    bool per_judge = true;  // E[DY | X, Z=z], E[D | X, Z=z]
    bool pooled = true;     // E[DYZ|X], E[DY|X], E[Z|X], E[DZ|X], E[D|X]
};

/// Row-aligned nuisance predictions. Empty members mean "not estimated".
/// `fold[i]` names the fold row i belongs to; its predictions come from
/// models trained without that fold (0 = models trained on another sample).
struct NuisanceSet {
    int m = 0;
    Matrix dy_by_judge;  // n x m
    Matrix d_by_judge;   // n x m
    Vector dyz, dy, z, dz, d;
    std::vector<int> fold;
    std::size_t projected_rows = 0;  // rows where E[DY|X,Z=z] was clipped into [0, E[D|X,Z=z]]

    std::size_t size() const { return fold.size(); }
    bool has_per_judge() const { return d_by_judge.size() > 0; }
    bool has_pooled() const { return d.size() > 0; }

    void write_csv(const std::filesystem::path& path) const;
};

/// Models for every requested component, fitted on one training sample.
class NuisanceModels {
public:
    static NuisanceModels fit(const SelectiveDataset& ds, const std::vector<std::size_t>& rows,
                              const RegressorConfig& config, NuisanceComponents components,
                              unsigned jobs = 1);

    /// Predictions for the given rows of x, with the monotone projection applied.
    NuisanceSet predict(const Matrix& x) const;

    int judge_count() const { return m_; }
    const std::vector<Regressor>& per_judge_dy() const { return dy_z_; }
    const std::vector<Regressor>& per_judge_d() const { return d_z_; }

private:
    int m_ = 0;
    NuisanceComponents components_;
    std::vector<Regressor> dy_z_, d_z_;
    std::optional<Regressor> dyz_, dy_, z_, dz_, d_;
};

/// Out-of-fold nuisance estimates: rows of fold k are predicted by models
/// trained on the complement of fold k.
NuisanceSet crossfit_nuisances(const SelectiveDataset& ds, const FoldPlan& folds,
                               const RegressorConfig& config,
                               NuisanceComponents components = {}, unsigned jobs = 1);

/// Same, also returning the per-fold models (index k-1 for fold k).
NuisanceSet crossfit_nuisances(const SelectiveDataset& ds, const FoldPlan& folds,
                               const RegressorConfig& config, NuisanceComponents components,
                               unsigned jobs, std::vector<NuisanceModels>* models_out);

}  // namespace ivsel
