#include "ivsel/evaluation.hpp"

#include "ivsel/error.hpp"
#include "ivsel/parallel.hpp"
#include "ivsel/rng.hpp"
#include "ivsel/textio.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <tuple>

namespace ivsel {

using nlohmann::json;

double zero_one_accuracy(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& truth) {
    if (pred.size() != truth.size()) throw ArgumentError("accuracy: prediction and truth lengths differ");
    if (pred.empty()) throw ArgumentError("accuracy: empty input");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += (pred[i] != 0) == (truth[i] != 0);
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

double oracle_risk_from_mu(const Vector& mu, const std::vector<std::uint8_t>& f) {
    if (static_cast<std::size_t>(mu.size()) != f.size()) throw ArgumentError("risk: mu and f lengths differ");
    if (f.empty()) throw ArgumentError("risk: empty input");
    double base = 0.0, tilt = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double m = mu(static_cast<Eigen::Index>(i));
        if (!(m >= 0.0 && m <= 1.0)) throw ArgumentError("risk: mu outside [0, 1] at row " + std::to_string(i + 1));
        base += m;
        tilt += (1.0 - 2.0 * m) * (f[i] ? 1.0 : 0.0);
    }
    const auto n = static_cast<double>(f.size());
    return base / n + tilt / n;
}

RiskInterval risk_bounds(const IntervalBounds& bounds, const std::vector<std::uint8_t>& f) {
    if (bounds.size() != f.size() || bounds.u.size() != f.size())
        throw ArgumentError("risk bounds: bounds and f lengths differ");
    if (f.empty()) throw ArgumentError("risk bounds: empty input");
    RiskInterval r;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double l = bounds.l[i], u = bounds.u[i];
        if (!(l <= u)) throw ArgumentError("risk bounds: l > u at row " + std::to_string(i + 1));
        if (f[i]) {
            r.lower += 1.0 - u;
            r.upper += 1.0 - l;
        } else {
            r.lower += l;
            r.upper += u;
        }
    }
    const auto n = static_cast<double>(f.size());
    r.lower /= n;
    r.upper /= n;
    return r;
}

void ExperimentConfig::validate() const {
    if (models.empty() || alphas.empty() || betas.empty()) throw ConfigError("experiment: empty grid");
    if (methods.empty()) throw ConfigError("experiment: no methods");
    if (replications < 1) throw ConfigError("experiment: replications must be positive");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("experiment: test_fraction must lie in (0, 1)");
    for (double a : alphas)
        if (!(a > 0.0 && a < 1.0)) throw ConfigError("experiment: alpha must lie in (0, 1)");
    for (double b : betas)
        if (!(b > 0.0 && b <= 1.0)) throw ConfigError("experiment: beta must lie in (0, 1]");
}

json ExperimentConfig::to_json() const {
    json j;
    j["world"] = world.to_json();
    j["world"].erase("model");
    j["world"].erase("alpha");
    j["world"].erase("beta");
    std::vector<std::string> ms, me;
    for (auto m : models) ms.emplace_back(to_string(m));
    for (auto m : methods) me.emplace_back(to_string(m));
    j["models"] = ms;
    j["alphas"] = alphas;
    j["betas"] = betas;
    j["methods"] = me;
    j["replications"] = replications;
    j["test_fraction"] = test_fraction;
    j["learner"] = pipeline.learner.to_json();
    j["nuisance"] = pipeline.nuisance.to_json();
    j["identification"] = {{"eps_denom", pipeline.eps_denom}, {"a", pipeline.bound_a}, {"b", pipeline.bound_b}};
    j["seed"] = pipeline.seed;
    return j;
}

std::string ExperimentConfig::hash() const { return hex_digest(to_json().dump()); }

std::size_t ExperimentReport::failures() const {
    return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const auto& r) { return !r.ok; }));
}

namespace {

std::string describe(const std::exception& e) {
    if (const auto* ie = dynamic_cast<const Error*>(&e)) return std::string(to_string(ie->category())) + ": " + e.what();
    return std::string("internal: ") + e.what();
}

struct Cell {
    DecisionModel model;
    double alpha, beta;
};

std::vector<ExperimentRecord> blank_records(const ExperimentConfig& config, const Cell& cell, int rep) {
    const std::uint64_t seed = derive_seed(config.pipeline.seed, "replication", static_cast<std::uint64_t>(rep));
    std::vector<ExperimentRecord> out;
    for (auto method : config.methods) {
        ExperimentRecord r;
        r.model = cell.model;
        r.alpha = cell.alpha;
        r.beta = cell.beta;
        r.replication = rep;
        r.seed = seed;
        r.method = method;
        out.push_back(r);
    }
    return out;
}

std::vector<ExperimentRecord> run_task(const ExperimentConfig& config, const Cell& cell, int rep,
                                       const BasePopulation* base, const Vector* u) {
    std::vector<ExperimentRecord> out = blank_records(config, cell, rep);
    const std::uint64_t seed = out.front().seed;
    try {
        WorldSpec spec = config.world;
        spec.model = cell.model;
        spec.alpha = cell.alpha;
        spec.beta = cell.beta;
        const Simulation sim = base ? simulate_over_base(spec, *base, *u, seed) : simulate(spec, seed);
        const SelectiveDataset& data = sim.data;
        if (!data.has_oracle()) throw DataError("experiment needs oracle outcomes for the test split");
        const double labeled = static_cast<double>(data.labeled_count()) / static_cast<double>(data.size());
        for (auto& r : out) r.labeled_fraction = labeled;

        const auto [train_rows, test_rows] = split_indices(data.size(), config.test_fraction, derive_seed(seed, "split"));
        const SelectiveDataset train = data.subset(train_rows);
        const SelectiveDataset test = data.subset(test_rows);
        const FoldPlan folds = make_folds(train.size(), config.pipeline.learner.folds, derive_seed(seed, "folds"));

        NuisanceComponents comp{false, false};
        for (auto m : config.methods) {
            comp.per_judge = comp.per_judge || m == LearningMode::partial;
            comp.pooled = comp.pooled || m == LearningMode::point;
        }
        std::optional<NuisanceSet> nuis;
        std::string nuis_error;
        if (comp.per_judge || comp.pooled) {
            try {
                nuis = crossfit_nuisances(train, folds, config.pipeline.nuisance, comp, 1);
            } catch (const std::exception& e) {
                nuis_error = describe(e);
            }
        }

        for (auto& r : out) {
            const bool weighted = r.method == LearningMode::point || r.method == LearningMode::partial;
            if (weighted && !nuis) {
                r.ok = false;
                r.error = nuis_error;
                continue;
            }
            try {
                PipelineConfig pc = config.pipeline;
                pc.seed = seed;
                pc.jobs = 1;
                const PipelineResult res = fit_pipeline(train, r.method, pc, weighted ? &*nuis : nullptr, &folds);
                r.accuracy = zero_one_accuracy(predict_class(res.model, test), test.oracle_outcome());
                r.flag_rate = res.weight_flag_rate;
                r.iterations = res.diagnostics.iterations;
                r.converged = res.diagnostics.converged;
            } catch (const std::exception& e) {
                r.ok = false;
                r.error = describe(e);
            }
        }
    } catch (const std::exception& e) {
        for (auto& r : out) {
            r.ok = false;
            r.error = describe(e);
        }
    }
    return out;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    ExperimentReport report;
    report.config = config.to_json();
    report.config_hash = config.hash();

    std::vector<Cell> cells;
    for (auto m : config.models)
        for (double a : config.alphas)
            for (double b : config.betas) cells.push_back({m, a, b});
    const auto reps = static_cast<std::size_t>(config.replications);

    // Shared base populations, one per replication.
    std::vector<std::optional<BasePopulation>> bases(reps);
    std::vector<Vector> us(reps);
    std::vector<std::string> base_errors(reps);
    if (config.world.base != BaseKind::discrete_fixture) {
        std::optional<BasePopulation> external;
        if (config.world.base == BaseKind::external_csv) external = load_external_base(config.world);
        parallel_for(reps, config.jobs, [&](std::size_t r) {
            try {
                const std::uint64_t seed = derive_seed(config.pipeline.seed, "replication", r);
                bases[r] = external ? *external : generate_continuous_base(config.world.n, derive_seed(seed, "base"));
                us[r] = construct_unobservable(bases[r]->features, bases[r]->oracle, config.world.unobservable_regressor);
            } catch (const std::exception& e) {
                bases[r].reset();
                base_errors[r] = describe(e);
            }
        });
    }

    std::vector<std::vector<ExperimentRecord>> slots(cells.size() * reps);
    parallel_for(slots.size(), config.jobs, [&](std::size_t t) {
        const std::size_t c = t / reps, r = t % reps;
        if (!base_errors[r].empty()) {
            slots[t] = blank_records(config, cells[c], static_cast<int>(r));
            for (auto& rec : slots[t]) {
                rec.ok = false;
                rec.error = base_errors[r];
            }
            return;
        }
        const BasePopulation* base = bases[r] ? &*bases[r] : nullptr;
        slots[t] = run_task(config, cells[c], static_cast<int>(r), base, base ? &us[r] : nullptr);
    });
    for (auto& s : slots)
        for (auto& rec : s) report.records.push_back(std::move(rec));
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

ReportFormat parse_report_format(std::string_view s) {
    if (s == "csv") return ReportFormat::csv;
    if (s == "json") return ReportFormat::json;
    throw ConfigError("unknown report format '" + std::string(s) + "'");
}

namespace {

constexpr const char* kReportHeader =
    "model,alpha,beta,replication,seed,method,status,accuracy,labeled_fraction,flag_rate,iterations,converged,error";

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + '"';
}

}  // namespace

void write_report(const ExperimentReport& report, const std::filesystem::path& path, ReportFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write report '" + path.string() + "'");
    if (format == ReportFormat::csv) {
        out << kReportHeader << '\n';
        for (const auto& r : report.records) {
            out << to_string(r.model) << ',' << format_double(r.alpha) << ',' << format_double(r.beta) << ','
                << r.replication << ',' << r.seed << ',' << to_string(r.method) << ','
                << (r.ok ? "ok" : "failed") << ',' << (r.ok ? format_double(r.accuracy) : "NA") << ','
                << format_double(r.labeled_fraction) << ',' << format_double(r.flag_rate) << ','
                << r.iterations << ',' << (r.converged ? 1 : 0) << ',' << quote(r.error) << '\n';
        }
    } else {
        json j;
        j["config_hash"] = report.config_hash;
        j["config"] = report.config;
        j["records"] = json::array();
        for (const auto& r : report.records) {
            j["records"].push_back({{"model", std::string(to_string(r.model))},
                                    {"alpha", r.alpha},
                                    {"beta", r.beta},
                                    {"replication", r.replication},
                                    {"seed", r.seed},
                                    {"method", std::string(to_string(r.method))},
                                    {"status", r.ok ? "ok" : "failed"},
                                    {"accuracy", r.ok ? json(r.accuracy) : json(nullptr)},
                                    {"labeled_fraction", r.labeled_fraction},
                                    {"flag_rate", r.flag_rate},
                                    {"iterations", r.iterations},
                                    {"converged", r.converged},
                                    {"error", r.error}});
        }
        out << j.dump(2) << '\n';
    }
    if (!out) throw DataError("failed writing report '" + path.string() + "'");
}

ExperimentReport read_report_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read report '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line) || line != kReportHeader) throw DataError("report: unexpected header");
    ExperimentReport rep;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const auto c = split_csv_line(line);
        if (c.size() != 13) throw DataError("report: row " + std::to_string(row) + " has the wrong width");
        ExperimentRecord r;
        r.model = parse_decision_model(c[0]);
        r.alpha = parse_double(c[1], row, "alpha");
        r.beta = parse_double(c[2], row, "beta");
        r.replication = std::stoi(c[3]);
        r.seed = std::stoull(c[4]);
        r.method = parse_mode(c[5]);
        r.ok = c[6] == "ok";
        r.accuracy = r.ok ? parse_double(c[7], row, "accuracy") : 0.0;
        r.labeled_fraction = parse_double(c[8], row, "labeled_fraction");
        r.flag_rate = parse_double(c[9], row, "flag_rate");
        r.iterations = std::stoi(c[10]);
        r.converged = c[11] == "1";
        r.error = c[12];
        rep.records.push_back(std::move(r));
    }
    return rep;
}

std::vector<SummaryRow> summarize(const ExperimentReport& report) {
    std::vector<SummaryRow> rows;
    std::map<std::tuple<int, double, double, int>, std::size_t> index;
    std::vector<std::vector<double>> values;
    for (const auto& r : report.records) {
        const auto key = std::make_tuple(static_cast<int>(r.model), r.alpha, r.beta, static_cast<int>(r.method));
        auto it = index.find(key);
        if (it == index.end()) {
            it = index.emplace(key, rows.size()).first;
            rows.push_back(SummaryRow{r.model, r.alpha, r.beta, r.method});
            values.emplace_back();
        }
        SummaryRow& s = rows[it->second];
        if (r.ok) {
            ++s.count;
            values[it->second].push_back(r.accuracy);
        } else {
            ++s.failures;
        }
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& v = values[i];
        if (v.empty()) continue;
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        rows[i].mean = mean;
        rows[i].sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    }
    return rows;
}

std::string format_summary(const std::vector<SummaryRow>& rows) {
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof line, "%-7s %6s %6s %-9s %5s %5s %9s %9s\n", "model", "alpha", "beta", "method", "n",
                  "fail", "mean_acc", "sd_acc");
    os << line;
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%-7s %6.3g %6.3g %-9s %5zu %5zu %9.4f %9.4f\n",
                      std::string(to_string(r.model)).c_str(), r.alpha, r.beta,
                      std::string(to_string(r.method)).c_str(), r.count, r.failures, r.mean, r.sd);
        os << line;
    }
    return os.str();
}

}  // namespace ivsel
