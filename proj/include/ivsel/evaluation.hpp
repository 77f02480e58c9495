#pragma once

#include "ivsel/identification.hpp"
#include "ivsel/learner.hpp"
#include "ivsel/synthetic.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ivsel {

/// Fraction of positions where the two label vectors agree.
double zero_one_accuracy(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& truth);

/// mean(mu) + mean((1 - 2 mu) f): misclassification risk of f when
/// Y* ~ Bernoulli(mu) row-wise.
double oracle_risk_from_mu(const Vector& mu, const std::vector<std::uint8_t>& f);

struct RiskInterval {
    double lower = 0.0;
    double upper = 0.0;
};

/// Range of the oracle risk of f over all mu with l <= mu <= u row-wise.
RiskInterval risk_bounds(const IntervalBounds& bounds, const std::vector<std::uint8_t>& f);

struct ExperimentConfig {
    WorldSpec world;  // model, alpha and beta are overwritten per grid cell
    std::vector<DecisionModel> models{DecisionModel::model2};
    std::vector<double> alphas{0.5, 0.7, 0.9};
    std::vector<double> betas{1.0};
    std::vector<LearningMode> methods{LearningMode::point, LearningMode::partial,
                                      LearningMode::selected, LearningMode::full};
    int replications = 20;
    double test_fraction = 0.3;
    PipelineConfig pipeline;  // pipeline.seed is the master seed
    unsigned jobs = 1;

    void validate() const;
    /// Everything that influences the report; worker count is left out.
    nlohmann::json to_json() const;
    std::string hash() const;
};

struct ExperimentRecord {
    DecisionModel model = DecisionModel::model2;
    double alpha = 0.0;
    double beta = 0.0;
    int replication = 0;
    std::uint64_t seed = 0;
    LearningMode method = LearningMode::partial;
    bool ok = true;
    double accuracy = 0.0;
    double labeled_fraction = 0.0;
    double flag_rate = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string error;  // "<category>: <message>" when !ok
};

struct ExperimentReport {
    std::string config_hash;
    nlohmann::json config = nlohmann::json::object();
    std::vector<ExperimentRecord> records;  // ordered by cell, replication, method
    double wall_seconds = 0.0;              // not serialized

    std::size_t failures() const;
};

/// Runs every (model, alpha, beta) cell for every replication. Replication r
/// uses seed derive_seed(master, "replication", r) in every cell, so cells
/// share the base population, U and judge assignment. A failing task is
/// recorded and the run continues.
ExperimentReport run_experiment(const ExperimentConfig& config);

enum class ReportFormat { csv, json };
ReportFormat parse_report_format(std::string_view s);

void write_report(const ExperimentReport& report, const std::filesystem::path& path,
                  ReportFormat format);
/// Reads the records of a CSV report back.
ExperimentReport read_report_csv(const std::filesystem::path& path);

struct SummaryRow {
    DecisionModel model;
    double alpha, beta;
    LearningMode method;
    std::size_t count = 0;
    std::size_t failures = 0;
    double mean = 0.0;
    double sd = 0.0;
};

/// Mean and sample sd of accuracy per (cell, method), in report order.
std::vector<SummaryRow> summarize(const ExperimentReport& report);
std::string format_summary(const std::vector<SummaryRow>& rows);

}  // namespace ivsel
