#include "ivsel/config.hpp"

#include "ivsel/error.hpp"

#include <fstream>

namespace ivsel {

using nlohmann::json;
namespace fs = std::filesystem;

fs::path OutputConfig::resolve(const fs::path& p) const {
    if (p.empty() || p.is_absolute()) return p;
    return dir / p;
}

namespace {

void require_object(const json& j, const char* section) {
    if (!j.is_object()) throw ConfigError(std::string(section) + ": expected an object");
}

DatasetConfig parse_dataset(const json& j) {
    require_object(j, "dataset");
    DatasetConfig d;
    for (const auto& [key, value] : j.items()) {
        if (key == "csv")
            d.csv = value.get<std::string>();
        else if (key == "schema")
            d.schema = value.get<std::string>();
        else if (key == "test_fraction")
            d.test_fraction = value.get<double>();
        else
            throw ConfigError("dataset: unknown key '" + key + "'");
    }
    if (!(d.test_fraction >= 0.0 && d.test_fraction < 1.0))
        throw ConfigError("dataset: test_fraction must lie in [0, 1)");
    return d;
}

IdentificationConfig parse_identification(const json& j) {
    require_object(j, "identification");
    IdentificationConfig c;
    for (const auto& [key, value] : j.items()) {
        if (key == "eps_denom")
            c.eps_denom = value.get<double>();
        else if (key == "a")
            c.a = value.get<double>();
        else if (key == "b")
            c.b = value.get<double>();
        else
            throw ConfigError("identification: unknown key '" + key + "'");
    }
    if (!(c.eps_denom > 0.0)) throw ConfigError("identification: eps_denom must be positive");
    if (!(c.a >= 0.0 && c.b <= 1.0 && c.a <= c.b)) throw ConfigError("identification: need 0 <= a <= b <= 1");
    return c;
}

ExperimentGrid parse_experiment(const json& j) {
    require_object(j, "experiment");
    ExperimentGrid g;
    for (const auto& [key, value] : j.items()) {
        if (key == "models") {
            g.models.clear();
            for (const auto& v : value) g.models.push_back(parse_decision_model(v.get<std::string>()));
        } else if (key == "alphas") {
            g.alphas = value.get<std::vector<double>>();
        } else if (key == "betas") {
            g.betas = value.get<std::vector<double>>();
        } else if (key == "methods") {
            g.methods.clear();
            for (const auto& v : value) g.methods.push_back(parse_mode(v.get<std::string>()));
        } else if (key == "replications") {
            g.replications = value.get<int>();
        } else if (key == "test_fraction") {
            g.test_fraction = value.get<double>();
        } else {
            throw ConfigError("experiment: unknown key '" + key + "'");
        }
    }
    return g;
}

OutputConfig parse_output(const json& j) {
    require_object(j, "output");
    OutputConfig o;
    for (const auto& [key, value] : j.items()) {
        if (key == "report_format") {
            o.report_format = parse_report_format(value.get<std::string>());
            continue;
        }
        fs::path* target = nullptr;
        if (key == "dir") target = &o.dir;
        else if (key == "data") target = &o.data;
        else if (key == "schema") target = &o.schema;
        else if (key == "truth") target = &o.truth;
        else if (key == "model") target = &o.model;
        else if (key == "bounds") target = &o.bounds;
        else if (key == "nuisances") target = &o.nuisances;
        else if (key == "predictions") target = &o.predictions;
        else if (key == "metrics") target = &o.metrics;
        else if (key == "report") target = &o.report;
        if (!target) throw ConfigError("output: unknown key '" + key + "'");
        *target = value.get<std::string>();
    }
    return o;
}

}  // namespace

ToolConfig ToolConfig::from_json(const json& j) {
    require_object(j, "config");
    ToolConfig c;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "dataset")
                c.dataset = parse_dataset(value);
            else if (key == "generate")
                c.generate = WorldSpec::from_json(value);
            else if (key == "nuisance")
                c.nuisance = RegressorConfig::from_json(value);
            else if (key == "identification")
                c.identification = parse_identification(value);
            else if (key == "learner")
                c.learner = LearnerConfig::from_json(value);
            else if (key == "experiment")
                c.experiment = parse_experiment(value);
            else if (key == "seed")
                c.seed = value.get<std::uint64_t>();
            else if (key == "output")
                c.output = parse_output(value);
            else
                throw ConfigError("unknown top-level key '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value type: ") + e.what());
    }
    c.experiment_config(1).validate();
    return c;
}

ToolConfig ToolConfig::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return from_json(j);
}

json ToolConfig::to_json() const {
    json j;
    j["dataset"] = {{"csv", dataset.csv.string()},
                    {"schema", dataset.schema.string()},
                    {"test_fraction", dataset.test_fraction}};
    j["generate"] = generate.to_json();
    j["nuisance"] = nuisance.to_json();
    j["identification"] = {{"eps_denom", identification.eps_denom}, {"a", identification.a}, {"b", identification.b}};
    j["learner"] = learner.to_json();
    std::vector<std::string> models, methods;
    for (auto m : experiment.models) models.emplace_back(to_string(m));
    for (auto m : experiment.methods) methods.emplace_back(to_string(m));
    j["experiment"] = {{"models", models},
                       {"alphas", experiment.alphas},
                       {"betas", experiment.betas},
                       {"methods", methods},
                       {"replications", experiment.replications},
                       {"test_fraction", experiment.test_fraction}};
    j["seed"] = seed;
    j["output"] = {{"dir", output.dir.string()},
                   {"data", output.data.string()},
                   {"schema", output.schema.string()},
                   {"truth", output.truth.string()},
                   {"model", output.model.string()},
                   {"bounds", output.bounds.string()},
                   {"nuisances", output.nuisances.string()},
                   {"predictions", output.predictions.string()},
                   {"metrics", output.metrics.string()},
                   {"report", output.report.string()},
                   {"report_format", output.report_format == ReportFormat::csv ? "csv" : "json"}};
    return j;
}

std::string ToolConfig::hash() const { return hex_digest(to_json().dump()); }

fs::path ToolConfig::dataset_csv() const {
    return dataset.csv.empty() ? output.resolve(output.data) : dataset.csv;
}

fs::path ToolConfig::dataset_schema() const {
    if (!dataset.schema.empty()) return dataset.schema;
    if (dataset.csv.empty()) return output.resolve(output.schema);
    fs::path p = dataset.csv;
    return p.replace_filename(p.stem().string() + ".schema.json");
}

PipelineConfig ToolConfig::pipeline(unsigned jobs) const {
    PipelineConfig p;
    p.learner = learner;
    p.nuisance = nuisance;
    p.eps_denom = identification.eps_denom;
    p.bound_a = identification.a;
    p.bound_b = identification.b;
    p.seed = seed;
    p.jobs = jobs;
    return p;
}

ExperimentConfig ToolConfig::experiment_config(unsigned jobs) const {
    ExperimentConfig e;
    e.world = generate;
    e.models = experiment.models;
    e.alphas = experiment.alphas;
    e.betas = experiment.betas;
    e.methods = experiment.methods;
    e.replications = experiment.replications;
    e.test_fraction = experiment.test_fraction;
    e.pipeline = pipeline(jobs);
    e.jobs = jobs;
    return e;
}

}  // namespace ivsel
