#include "ivsel/nuisance.hpp"

#include "ivsel/error.hpp"
#include "ivsel/parallel.hpp"
#include "ivsel/textio.hpp"

#include <algorithm>
#include <fstream>
#include <functional>

namespace ivsel {

namespace {

Matrix gather_rows(const Matrix& x, const std::vector<std::size_t>& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t r = 0; r < rows.size(); ++r)
        out.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(rows[r]));
    return out;
}

}  // namespace

NuisanceModels NuisanceModels::fit(const SelectiveDataset& ds,
                                   const std::vector<std::size_t>& rows,
                                   const RegressorConfig& config, NuisanceComponents components,
                                   unsigned jobs) {
    NuisanceModels out;
    out.m_ = ds.judge_count();
    out.components_ = components;
    const auto m = static_cast<std::size_t>(out.m_);

    std::vector<std::vector<std::size_t>> by_judge(m);
    for (std::size_t i : rows) by_judge[static_cast<std::size_t>(ds.judge()[i] - 1)].push_back(i);
    if (components.per_judge) {
        for (std::size_t z = 0; z < m; ++z)
            if (by_judge[z].size() < 2)
                throw DataError("judge " + std::to_string(z + 1) +
                                " has fewer than two training rows; use larger folds or fewer judges");
    }

    // Each task fits one regressor; slots are fixed so the result does not
    // depend on scheduling.
    std::vector<std::function<Regressor()>> tasks;
    const Matrix& x = ds.features();
    if (components.per_judge) {
        for (std::size_t z = 0; z < m; ++z) {
            tasks.emplace_back([&, z] {
                const auto& idx = by_judge[z];
                Vector y(static_cast<Eigen::Index>(idx.size()));
                for (std::size_t r = 0; r < idx.size(); ++r)
                    y(static_cast<Eigen::Index>(r)) = ds.labeled_positive(idx[r]);
                return Regressor::fit(config, gather_rows(x, idx), y);
            });
            tasks.emplace_back([&, z] {
                const auto& idx = by_judge[z];
                Vector y(static_cast<Eigen::Index>(idx.size()));
                for (std::size_t r = 0; r < idx.size(); ++r)
                    y(static_cast<Eigen::Index>(r)) = ds.decision()[idx[r]];
                return Regressor::fit(config, gather_rows(x, idx), y);
            });
        }
    }
    if (components.pooled) {
        // targets: DYZ, DY, Z, DZ, D with Z entering by its judge code
        for (int target = 0; target < 5; ++target) {
            tasks.emplace_back([&, target] {
                Vector y(static_cast<Eigen::Index>(rows.size()));
                for (std::size_t r = 0; r < rows.size(); ++r) {
                    const std::size_t i = rows[r];
                    const double dy = ds.labeled_positive(i);
                    const double d = ds.decision()[i];
                    const double z = ds.judge()[i];
                    const double v[5] = {dy * z, dy, z, d * z, d};
                    y(static_cast<Eigen::Index>(r)) = v[target];
                }
                return Regressor::fit(config, gather_rows(x, rows), y);
            });
        }
    }
    std::vector<std::optional<Regressor>> fitted(tasks.size());
    parallel_for(tasks.size(), jobs, [&](std::size_t t) { fitted[t] = tasks[t](); });

    std::size_t t = 0;
    if (components.per_judge) {
        for (std::size_t z = 0; z < m; ++z) {
            out.dy_z_.push_back(std::move(*fitted[t++]));
            out.d_z_.push_back(std::move(*fitted[t++]));
        }
    }
    if (components.pooled) {
        out.dyz_ = std::move(fitted[t++]);
        out.dy_ = std::move(fitted[t++]);
        out.z_ = std::move(fitted[t++]);
        out.dz_ = std::move(fitted[t++]);
        out.d_ = std::move(fitted[t++]);
    }
    return out;
}

NuisanceSet NuisanceModels::predict(const Matrix& x) const {
    NuisanceSet s;
    s.m = m_;
    const auto n = x.rows();
    s.fold.assign(static_cast<std::size_t>(n), 0);
    if (components_.per_judge) {
        s.dy_by_judge.resize(n, m_);
        s.d_by_judge.resize(n, m_);
        for (int z = 0; z < m_; ++z) {
            s.dy_by_judge.col(z) = dy_z_[static_cast<std::size_t>(z)].predict(x);
            s.d_by_judge.col(z) = d_z_[static_cast<std::size_t>(z)].predict(x);
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            bool projected = false;
            for (int z = 0; z < m_; ++z) {
                double& d = s.d_by_judge(i, z);
                double& dy = s.dy_by_judge(i, z);
                d = std::clamp(d, 0.0, 1.0);
                const double clipped = std::clamp(dy, 0.0, d);
                projected |= clipped != dy;
                dy = clipped;
            }
            s.projected_rows += projected ? 1 : 0;
        }
    }
    if (components_.pooled) {
        s.dyz = dyz_->predict(x);
        s.dy = dy_->predict(x);
        s.z = z_->predict(x);
        s.dz = dz_->predict(x);
        s.d = d_->predict(x);
    }
    return s;
}

NuisanceSet crossfit_nuisances(const SelectiveDataset& ds, const FoldPlan& folds,
                               const RegressorConfig& config, NuisanceComponents components,
                               unsigned jobs) {
    return crossfit_nuisances(ds, folds, config, components, jobs, nullptr);
}

NuisanceSet crossfit_nuisances(const SelectiveDataset& ds, const FoldPlan& folds,
                               const RegressorConfig& config, NuisanceComponents components,
                               unsigned jobs, std::vector<NuisanceModels>* models_out) {
    if (folds.assignment.size() != ds.size())
        throw ArgumentError("fold plan does not match dataset size");
    const int m = ds.judge_count();
    const auto n = static_cast<Eigen::Index>(ds.size());

    for (int k = 1; k <= folds.K; ++k) {
        std::vector<char> seen(static_cast<std::size_t>(m) + 1, 0);
        for (std::size_t i = 0; i < ds.size(); ++i)
            if (folds.assignment[i] != k) seen[static_cast<std::size_t>(ds.judge()[i])] = 1;
        for (int z = 1; z <= m; ++z)
            if (!seen[static_cast<std::size_t>(z)])
                throw DataError("judge " + std::to_string(z) + " is absent outside fold " +
                                std::to_string(k) + "; use larger folds or fewer judges");
    }

    std::vector<NuisanceModels> models(static_cast<std::size_t>(folds.K));
    // Parallelism goes to the fold level; the per-fold fits run serially.
    parallel_for(models.size(), jobs, [&](std::size_t k) {
        models[k] = NuisanceModels::fit(ds, folds.rows_outside(static_cast<int>(k) + 1), config,
                                        components, 1);
    });

    NuisanceSet out;
    out.m = m;
    out.fold = folds.assignment;
    if (components.per_judge) {
        out.dy_by_judge.resize(n, m);
        out.d_by_judge.resize(n, m);
    }
    if (components.pooled) {
        for (Vector* v : {&out.dyz, &out.dy, &out.z, &out.dz, &out.d}) v->resize(n);
    }
    for (int k = 1; k <= folds.K; ++k) {
        const auto rows = folds.rows_in(k);
        const NuisanceSet part = models[static_cast<std::size_t>(k - 1)].predict(
            gather_rows(ds.features(), rows));
        out.projected_rows += part.projected_rows;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const auto i = static_cast<Eigen::Index>(rows[r]);
            const auto ri = static_cast<Eigen::Index>(r);
            if (components.per_judge) {
                out.dy_by_judge.row(i) = part.dy_by_judge.row(ri);
                out.d_by_judge.row(i) = part.d_by_judge.row(ri);
            }
            if (components.pooled) {
                out.dyz(i) = part.dyz(ri);
                out.dy(i) = part.dy(ri);
                out.z(i) = part.z(ri);
                out.dz(i) = part.dz(ri);
                out.d(i) = part.d(ri);
            }
        }
    }
    if (models_out) *models_out = std::move(models);
    return out;
}

void NuisanceSet::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "row,fold";
    if (has_per_judge())
        for (int z = 1; z <= m; ++z) out << ",dy_z" << z << ",d_z" << z;
    if (has_pooled()) out << ",dyz,dy,z,dz,d";
    out << '\n';
    for (std::size_t i = 0; i < size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        out << i + 1 << ',' << fold[i];
        if (has_per_judge())
            for (int z = 0; z < m; ++z)
                out << ',' << format_double(dy_by_judge(r, z)) << ','
                    << format_double(d_by_judge(r, z));
        if (has_pooled())
            out << ',' << format_double(dyz(r)) << ',' << format_double(dy(r)) << ','
                << format_double(z(r)) << ',' << format_double(dz(r)) << ','
                << format_double(d(r));
        out << '\n';
    }
}

}  // namespace ivsel
