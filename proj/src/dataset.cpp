#include "ivsel/dataset.hpp"

#include "ivsel/error.hpp"
#include "ivsel/rng.hpp"
#include "ivsel/textio.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace ivsel {

using nlohmann::json;

Schema Schema::from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open schema file " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("schema " + path.string() + ": " + e.what());
    }
    static const std::vector<std::string> known = {"features", "judge", "decision", "outcome",
                                                   "oracle_outcome", "m"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError("schema: unknown key '" + key + "'");
    }
    Schema s;
    try {
        s.features = j.at("features").get<std::vector<std::string>>();
        s.judge = j.value("judge", s.judge);
        s.decision = j.value("decision", s.decision);
        s.outcome = j.value("outcome", s.outcome);
        if (j.contains("oracle_outcome") && !j["oracle_outcome"].is_null())
            s.oracle_outcome = j["oracle_outcome"].get<std::string>();
        if (j.contains("m") && !j["m"].is_null()) s.m = j["m"].get<int>();
    } catch (const json::exception& e) {
        throw ConfigError("schema " + path.string() + ": " + e.what());
    }
    if (s.features.empty()) throw ConfigError("schema: no feature columns");
    return s;
}

void Schema::to_json_file(const std::filesystem::path& path) const {
    json j;
    j["features"] = features;
    j["judge"] = judge;
    j["decision"] = decision;
    j["outcome"] = outcome;
    if (oracle_outcome) j["oracle_outcome"] = *oracle_outcome;
    if (m) j["m"] = *m;
    std::ofstream out(path);
    if (!out) throw DataError("cannot write schema file " + path.string());
    out << j.dump(2) << '\n';
}

SelectiveDataset::SelectiveDataset(std::vector<std::string> feature_names, Matrix features,
                                   std::vector<int> judge, std::vector<std::uint8_t> decision,
                                   std::vector<std::optional<std::uint8_t>> outcome,
                                   std::optional<std::vector<std::uint8_t>> oracle_outcome,
                                   std::optional<int> declared_m)
    : feature_names_(std::move(feature_names)),
      features_(std::move(features)),
      judge_(std::move(judge)),
      decision_(std::move(decision)),
      outcome_(std::move(outcome)),
      oracle_(std::move(oracle_outcome)) {
    const std::size_t n = judge_.size();
    if (n == 0) throw DataError("no rows");
    if (static_cast<std::size_t>(features_.rows()) != n || decision_.size() != n ||
        outcome_.size() != n || (oracle_ && oracle_->size() != n))
        throw DataError("column lengths disagree");
    if (feature_names_.size() != dim()) throw DataError("feature name count mismatch");
    if (!features_.allFinite()) throw DataError("non-finite feature value");

    const int max_judge = *std::max_element(judge_.begin(), judge_.end());
    m_ = declared_m.value_or(max_judge);
    if (m_ < 1) throw DataError("judge count must be positive");
    std::vector<char> seen(static_cast<std::size_t>(m_) + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (judge_[i] < 1 || judge_[i] > m_)
            throw DataError("row " + std::to_string(i + 1) + ": judge " +
                            std::to_string(judge_[i]) + " outside 1.." + std::to_string(m_));
        seen[static_cast<std::size_t>(judge_[i])] = 1;
        if (decision_[i] > 1)
            throw DataError("row " + std::to_string(i + 1) + ": decision must be 0 or 1");
        if (decision_[i] == 0 && outcome_[i].has_value())
            throw DataError("row " + std::to_string(i + 1) + ": outcome present while decision=0");
        if (decision_[i] == 1 && !outcome_[i].has_value())
            throw DataError("row " + std::to_string(i + 1) + ": outcome missing while decision=1");
        if (outcome_[i] && *outcome_[i] > 1)
            throw DataError("row " + std::to_string(i + 1) + ": outcome must be 0 or 1");
        if (oracle_ && (*oracle_)[i] > 1)
            throw DataError("row " + std::to_string(i + 1) + ": oracle outcome must be 0 or 1");
        if (oracle_ && outcome_[i] && *outcome_[i] != (*oracle_)[i])
            throw DataError("row " + std::to_string(i + 1) + ": outcome disagrees with oracle");
    }
    if (declared_m) {
        for (int z = 1; z <= m_; ++z)
            if (!seen[static_cast<std::size_t>(z)])
                throw DataError("declared judge " + std::to_string(z) + " never appears");
    }
}

const std::vector<std::uint8_t>& SelectiveDataset::oracle_outcome() const {
    if (!oracle_) throw ArgumentError("dataset has no oracle outcomes");
    return *oracle_;
}

std::size_t SelectiveDataset::labeled_count() const {
    return static_cast<std::size_t>(std::count(decision_.begin(), decision_.end(), 1));
}

SelectiveDataset SelectiveDataset::subset(const std::vector<std::size_t>& rows) const {
    Matrix x(static_cast<Eigen::Index>(rows.size()), features_.cols());
    std::vector<int> z;
    std::vector<std::uint8_t> d;
    std::vector<std::optional<std::uint8_t>> y;
    std::optional<std::vector<std::uint8_t>> ystar;
    if (oracle_) ystar.emplace();
    z.reserve(rows.size());
    d.reserve(rows.size());
    y.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const std::size_t i = rows[r];
        x.row(static_cast<Eigen::Index>(r)) = features_.row(static_cast<Eigen::Index>(i));
        z.push_back(judge_[i]);
        d.push_back(decision_[i]);
        y.push_back(outcome_[i]);
        if (oracle_) ystar->push_back((*oracle_)[i]);
    }
    // Subsets keep m but may miss judges, so m is passed as the maximum only.
    SelectiveDataset out = *this;
    out.features_ = std::move(x);
    out.judge_ = std::move(z);
    out.decision_ = std::move(d);
    out.outcome_ = std::move(y);
    out.oracle_ = std::move(ystar);
    if (out.judge_.empty()) throw DataError("no rows");
    return out;
}

namespace {

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("column '" + name + "' not found in header");
    return static_cast<std::size_t>(it - header.begin());
}

bool is_missing(std::string_view cell) { return cell.empty() || cell == "NA"; }

std::uint8_t parse_binary(std::string_view cell, std::size_t row, const std::string& col) {
    const double v = parse_double(cell, row, col);
    if (v != 0.0 && v != 1.0)
        throw DataError("row " + std::to_string(row) + ", column '" + col +
                        "': expected 0 or 1, got '" + std::string(cell) + "'");
    return static_cast<std::uint8_t>(v);
}

}  // namespace

SelectiveDataset load_csv(const std::filesystem::path& path, const Schema& schema) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError("no rows");
    const auto header = split_csv_line(line);

    std::vector<std::size_t> feature_cols;
    for (const auto& f : schema.features) feature_cols.push_back(column_index(header, f));
    const std::size_t judge_col = column_index(header, schema.judge);
    const std::size_t decision_col = column_index(header, schema.decision);
    const std::size_t outcome_col = column_index(header, schema.outcome);
    std::optional<std::size_t> oracle_col;
    if (schema.oracle_outcome) oracle_col = column_index(header, *schema.oracle_outcome);

    std::vector<double> values;
    std::vector<int> judge;
    std::vector<std::uint8_t> decision;
    std::vector<std::optional<std::uint8_t>> outcome;
    std::optional<std::vector<std::uint8_t>> oracle;
    if (oracle_col) oracle.emplace();

    std::size_t row = 1;  // data rows are 1-based in messages; the header is row 0
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw DataError("row " + std::to_string(row) + ": expected " +
                            std::to_string(header.size()) + " cells, got " +
                            std::to_string(cells.size()));
        for (std::size_t c : feature_cols) {
            if (is_missing(cells[c]))
                throw DataError("row " + std::to_string(row) + ", column '" + header[c] +
                                "': missing feature value");
            values.push_back(parse_double(cells[c], row, header[c]));
        }
        const double z = parse_double(cells[judge_col], row, header[judge_col]);
        if (z != std::floor(z))
            throw DataError("row " + std::to_string(row) + ": judge must be an integer");
        judge.push_back(static_cast<int>(z));
        const auto d = parse_binary(cells[decision_col], row, header[decision_col]);
        decision.push_back(d);
        if (is_missing(cells[outcome_col]))
            outcome.emplace_back(std::nullopt);
        else
            outcome.emplace_back(parse_binary(cells[outcome_col], row, header[outcome_col]));
        if (d == 0 && outcome.back().has_value())
            throw DataError("row " + std::to_string(row) + ": outcome present while decision=0");
        if (oracle_col) oracle->push_back(parse_binary(cells[*oracle_col], row, header[*oracle_col]));
        ++row;
    }
    if (judge.empty()) throw DataError("no rows");

    const auto n = static_cast<Eigen::Index>(judge.size());
    const auto d = static_cast<Eigen::Index>(feature_cols.size());
    Matrix x(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j) x(i, j) = values[static_cast<std::size_t>(i * d + j)];
    return SelectiveDataset(schema.features, std::move(x), std::move(judge), std::move(decision),
                            std::move(outcome), std::move(oracle), schema.m);
}

Schema schema_for(const SelectiveDataset& ds) {
    Schema s;
    s.features = ds.feature_names();
    if (ds.has_oracle()) s.oracle_outcome = "oracle_outcome";
    s.m = ds.judge_count();
    return s;
}

void save_csv(const SelectiveDataset& ds, const std::filesystem::path& path) {
    const Schema s = schema_for(ds);
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    for (const auto& f : s.features) out << f << ',';
    out << s.judge << ',' << s.decision << ',' << s.outcome;
    if (s.oracle_outcome) out << ',' << *s.oracle_outcome;
    out << '\n';
    const auto& x = ds.features();
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j)
            out << format_double(x(static_cast<Eigen::Index>(i), j)) << ',';
        out << ds.judge()[i] << ',' << int(ds.decision()[i]) << ',';
        if (ds.outcome()[i])
            out << int(*ds.outcome()[i]);
        else
            out << "NA";
        if (ds.has_oracle()) out << ',' << int(ds.oracle_outcome()[i]);
        out << '\n';
    }
    if (!out) throw DataError("write failed for " + path.string());
}

std::vector<std::size_t> FoldPlan::rows_in(int fold) const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < assignment.size(); ++i)
        if (assignment[i] == fold) rows.push_back(i);
    return rows;
}

std::vector<std::size_t> FoldPlan::rows_outside(int fold) const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < assignment.size(); ++i)
        if (assignment[i] != fold) rows.push_back(i);
    return rows;
}

std::vector<std::size_t> FoldPlan::sizes() const {
    std::vector<std::size_t> out(static_cast<std::size_t>(K), 0);
    for (int a : assignment) ++out[static_cast<std::size_t>(a - 1)];
    return out;
}

FoldPlan make_folds(std::size_t n, int K, std::uint64_t seed) {
    if (K < 2) throw ArgumentError("fold count must be at least 2");
    if (static_cast<std::size_t>(K) > n) throw ArgumentError("fold count exceeds row count");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, "folds"));
    rng.shuffle(order.begin(), order.end());
    FoldPlan plan;
    plan.K = K;
    plan.assignment.assign(n, 0);
    for (std::size_t pos = 0; pos < n; ++pos)
        plan.assignment[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(K)) + 1;
    return plan;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n,
                                                                            double test_fraction,
                                                                            std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ArgumentError("test fraction must lie in (0, 1)");
    if (n < 2) throw ArgumentError("need at least two rows to split");
    auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * (1.0 - test_fraction) + 1e-9));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
    const std::size_t n_test = n - n_train;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, "split"));
    rng.shuffle(order.begin(), order.end());
    std::vector<std::size_t> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
    std::sort(test.begin(), test.end());
    std::sort(train.begin(), train.end());
    return {std::move(train), std::move(test)};
}

std::pair<SelectiveDataset, SelectiveDataset> split_train_test(const SelectiveDataset& ds,
                                                               double test_fraction,
                                                               std::uint64_t seed) {
    auto [train, test] = split_indices(ds.size(), test_fraction, seed);
    return {ds.subset(train), ds.subset(test)};
}

Standardizer Standardizer::fit(const Matrix& x) {
    Standardizer s;
    const double n = static_cast<double>(x.rows());
    s.mean = x.colwise().mean().transpose();
    s.scale.resize(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double var = (x.col(j).array() - s.mean(j)).square().sum() / n;
        s.scale(j) = var > 1e-24 ? std::sqrt(var) : 1.0;
    }
    return s;
}

Matrix Standardizer::apply(const Matrix& x) const {
    if (x.cols() != mean.size()) throw ArgumentError("standardizer dimension mismatch");
    Matrix out = x;
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        out.col(j) = (x.col(j).array() - mean(j)) / scale(j);
    return out;
}

Matrix features_with_judge(const SelectiveDataset& ds) {
    Matrix out(ds.features().rows(), ds.features().cols() + 1);
    out.leftCols(ds.features().cols()) = ds.features();
    for (std::size_t i = 0; i < ds.size(); ++i)
        out(static_cast<Eigen::Index>(i), ds.features().cols()) = ds.judge()[i];
    return out;
}

}  // namespace ivsel
