#pragma once

#include "ivsel/dataset.hpp"
#include "ivsel/evaluation.hpp"
#include "ivsel/learner.hpp"
#include "ivsel/regressor.hpp"
#include "ivsel/synthetic.hpp"
#include "ivsel/textio.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace ivsel {

struct DatasetConfig {
    std::filesystem::path csv;     // empty: the generated data under output.dir
    std::filesystem::path schema;  // empty: <csv stem>.schema.json next to the csv
    double test_fraction = 0.0;    // > 0: fit on the train part, evaluate on the test part
};

struct IdentificationConfig {
    double eps_denom = kDefaultEpsDenom;
    double a = 0.0;
    double b = 1.0;
};

struct ExperimentGrid {
    std::vector<DecisionModel> models{DecisionModel::model2};
    std::vector<double> alphas{0.5, 0.7, 0.9};
    std::vector<double> betas{1.0};
    std::vector<LearningMode> methods{LearningMode::point, LearningMode::partial,
                                      LearningMode::selected, LearningMode::full};
    int replications = 20;
    double test_fraction = 0.3;
};

/// Output file names; relative names resolve against `dir`.
struct OutputConfig {
    std::filesystem::path dir = "out";
    std::filesystem::path data = "data.csv";
    std::filesystem::path schema = "data.schema.json";
    std::filesystem::path truth = "truth.csv";
    std::filesystem::path model = "model.json";
    std::filesystem::path bounds = "bounds.csv";
    std::filesystem::path nuisances;  // empty: not written
    std::filesystem::path predictions = "predictions.csv";
    std::filesystem::path metrics = "metrics.json";
    std::filesystem::path report = "report.csv";
    ReportFormat report_format = ReportFormat::csv;

    std::filesystem::path resolve(const std::filesystem::path& p) const;
};

/// Whole tool configuration. Every section is optional in the file and
/// falls back to the defaults above; unknown keys are rejected.
struct ToolConfig {
    DatasetConfig dataset;
    WorldSpec generate;
    RegressorConfig nuisance;
    IdentificationConfig identification;
    LearnerConfig learner;
    ExperimentGrid experiment;
    std::uint64_t seed = 0;
    OutputConfig output;

    static ToolConfig from_json(const nlohmann::json& j);
    static ToolConfig load(const std::filesystem::path& path);

    /// Resolved configuration with every default filled in.
    nlohmann::json to_json() const;
    /// FNV-1a of the canonical dump of to_json(), as 16 hex digits.
    std::string hash() const;

    std::filesystem::path dataset_csv() const;
    std::filesystem::path dataset_schema() const;
    PipelineConfig pipeline(unsigned jobs) const;
    ExperimentConfig experiment_config(unsigned jobs) const;
};

}  // namespace ivsel
