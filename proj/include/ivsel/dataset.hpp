#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ivsel {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Column-role mapping for CSV ingestion. Saved next to the CSV as JSON.
struct Schema {
    std::vector<std::string> features;
    std::string judge = "judge";
    std::string decision = "decision";
    std::string outcome = "outcome";
    std::optional<std::string> oracle_outcome;
    std::optional<int> m;  // declared judge count

    static Schema from_json_file(const std::filesystem::path& path);
    void to_json_file(const std::filesystem::path& path) const;
};

/// Rows of (X, Z, D, Y) with Y present exactly when D = 1, plus the full
/// outcome Y* when the data is synthetic. Validated on construction and
/// immutable afterwards.
class SelectiveDataset {
public:
    SelectiveDataset(std::vector<std::string> feature_names, Matrix features,
                     std::vector<int> judge, std::vector<std::uint8_t> decision,
                     std::vector<std::optional<std::uint8_t>> outcome,
                     std::optional<std::vector<std::uint8_t>> oracle_outcome,
                     std::optional<int> declared_m = std::nullopt);

    std::size_t size() const { return judge_.size(); }
    std::size_t dim() const { return static_cast<std::size_t>(features_.cols()); }
    int judge_count() const { return m_; }

    const std::vector<std::string>& feature_names() const { return feature_names_; }
    const Matrix& features() const { return features_; }
    const std::vector<int>& judge() const { return judge_; }
    const std::vector<std::uint8_t>& decision() const { return decision_; }
    const std::vector<std::optional<std::uint8_t>>& outcome() const { return outcome_; }
    bool has_oracle() const { return oracle_.has_value(); }
    const std::vector<std::uint8_t>& oracle_outcome() const;

    /// D·Y with the product defined as 0 when the outcome is missing.
    double labeled_positive(std::size_t i) const {
        return outcome_[i].has_value() ? static_cast<double>(*outcome_[i]) : 0.0;
    }
    std::size_t labeled_count() const;

    /// Rows in the given order; m is carried over unchanged.
    SelectiveDataset subset(const std::vector<std::size_t>& rows) const;

private:
    std::vector<std::string> feature_names_;
    Matrix features_;
    std::vector<int> judge_;
    std::vector<std::uint8_t> decision_;
    std::vector<std::optional<std::uint8_t>> outcome_;
    std::optional<std::vector<std::uint8_t>> oracle_;
    int m_ = 0;
};

SelectiveDataset load_csv(const std::filesystem::path& path, const Schema& schema);

/// Writes the CSV in the column order of `schema_for(ds)`; doubles use the
/// shortest round-trip representation so save/load is bit-exact.
void save_csv(const SelectiveDataset& ds, const std::filesystem::path& path);
Schema schema_for(const SelectiveDataset& ds);

struct FoldPlan {
    std::vector<int> assignment;  // fold index in 1..K per row
    int K = 0;

    std::vector<std::size_t> rows_in(int fold) const;
    std::vector<std::size_t> rows_outside(int fold) const;
    std::vector<std::size_t> sizes() const;
};

/// Random partition of n rows into K folds whose sizes differ by at most 1.
FoldPlan make_folds(std::size_t n, int K, std::uint64_t seed);

/// Returns (train, test). The train set holds floor(n * (1 - test_fraction))
/// rows and both parts are non-empty.
std::pair<SelectiveDataset, SelectiveDataset> split_train_test(const SelectiveDataset& ds,
                                                               double test_fraction,
                                                               std::uint64_t seed);

/// Row indices behind split_train_test, in ascending order.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n,
                                                                            double test_fraction,
                                                                            std::uint64_t seed);

/// Per-column z-scoring with statistics from one (training) matrix.
struct Standardizer {
    Vector mean;
    Vector scale;  // standard deviation, 1 for constant columns

    static Standardizer fit(const Matrix& x);
    Matrix apply(const Matrix& x) const;
};

/// Features with the judge code appended as the last column.
Matrix features_with_judge(const SelectiveDataset& ds);

}  // namespace ivsel
