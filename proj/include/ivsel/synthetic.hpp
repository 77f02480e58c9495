#pragma once

#include "ivsel/dataset.hpp"
#include "ivsel/nuisance.hpp"
#include "ivsel/regressor.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ivsel {

/// Logistic function, evaluated without overflow for any finite t.
double expit(double t);

enum class DecisionModel { model1, model2 };
enum class BaseKind { discrete_fixture, synthetic_continuous, external_csv };

std::string_view to_string(DecisionModel m);
DecisionModel parse_decision_model(std::string_view s);
std::string_view to_string(BaseKind b);
BaseKind parse_base_kind(std::string_view s);

/// Labeling-process parameters plus the choice of base population.
struct WorldSpec {
    DecisionModel model = DecisionModel::model2;
    double alpha = 0.5;  // weight of the unobservable in the decision
    double beta = 1.0;   // overall labeling rate multiplier
    int m = 10;
    std::size_t n = 10459;
    BaseKind base = BaseKind::synthetic_continuous;

    // external-csv base: features plus a fully observed outcome column
    std::filesystem::path external_csv;
    std::vector<std::string> external_features;
    std::string external_outcome;
    std::string score_column;  // risk-score feature entering the decision model

    RegressorConfig unobservable_regressor;  // fitted to build U

    void validate() const;

    nlohmann::json to_json() const;
    /// Starts from the defaults; unknown keys are a ConfigError.
    static WorldSpec from_json(const nlohmann::json& j);
};

/// Decision probability for one unit. `judge0` is the 0-based judge code.
double decision_probability(DecisionModel model, double alpha, double beta, double u,
                            int judge0, double score);

/// Fully labeled base population the selective labels are drawn over.
struct BasePopulation {
    std::vector<std::string> names;
    Matrix features;
    std::vector<std::uint8_t> oracle;
    std::optional<Vector> mu_star;  // E[Y*|X], known for generated bases
    std::size_t score_column = 0;
};

/// Continuous base population: correlated Gaussian features, a standardized
/// risk score in column 0, and Y* ~ Bernoulli(expit(linear index)).
BasePopulation generate_continuous_base(std::size_t n, std::uint64_t seed);
BasePopulation load_external_base(const WorldSpec& spec);

/// U_i = Y*_i - g(X_i) for a regression g of Y* on X over the whole base.
Vector construct_unobservable(const Matrix& features, const std::vector<std::uint8_t>& oracle,
                              const RegressorConfig& config);

/// Generated data together with the quantities only a simulator knows.
struct Simulation {
    SelectiveDataset data;
    Vector unobservable;
    Vector p_decision;
    std::optional<Vector> mu_star;
};

/// Finite world with exact conditional tables. Z is independent of (U, Y*)
/// given X because P(Z|X) has no U argument.
struct DiscreteWorld {
    std::vector<Vector> x_values;
    std::vector<double> p_x;
    std::vector<double> u_values;
    Matrix p_u_given_x;             // |X| x |U|
    std::vector<double> z_values;   // numeric instrument values
    Matrix p_z_given_x;             // |X| x |Z|
    std::vector<Matrix> p_d;        // per x: |U| x |Z|, P(D=1 | x, u, z)
    Matrix p_y;                     // |X| x |U|, P(Y*=1 | x, u)

    void validate() const;
    std::size_t cell_count() const;
};

/// The two-judge fixture: X constant, U ~ Bern(0.5), Z uniform on {0,1},
/// P(D=1|Z,U) = 0.2 + 0.5Z + 0.2U, P(Y*=1|U) = 0.3 + 0.4U.
DiscreteWorld fixture_w1();

/// Discrete analogue of the continuous generator: a few x support points with
/// risk scores, binary U, and P(D=1|x,u,z) from the chosen decision model.
DiscreteWorld discrete_world_from_spec(const WorldSpec& spec);

struct JointCell {
    std::size_t x, u, z;
    int d, y;
    double p;
};

/// Exact joint distribution over (X, U, Z, D, Y*).
class JointTable {
public:
    explicit JointTable(DiscreteWorld world, std::vector<JointCell> cells)
        : world_(std::move(world)), cells_(std::move(cells)) {}

    const std::vector<JointCell>& cells() const { return cells_; }
    const DiscreteWorld& world() const { return world_; }

    double total() const;
    /// E[f | pred]; throws when the conditioning event has probability zero.
    template <class F, class P>
    double expect(F f, P pred) const {
        double num = 0, den = 0;
        for (const auto& c : cells_) {
            if (!pred(c)) continue;
            num += c.p * f(c);
            den += c.p;
        }
        return conditional(num, den);
    }

    double mu_star(std::size_t x) const;
    double mean_outcome() const;
    double e_d_given_xz(std::size_t x, std::size_t z) const;
    double e_dy_given_xz(std::size_t x, std::size_t z) const;
    double e_d_given_xuz(std::size_t x, std::size_t u, std::size_t z) const;
    double cov_dz_given_x(std::size_t x) const;
    double cov_dyz_given_x(std::size_t x) const;
    double cov_dz_given_xu(std::size_t x, std::size_t u) const;

    /// Covariance-ratio r(x) from the observed-data joint.
    double covariance_ratio(std::size_t x) const;

    /// Population nuisances, one row per x support point, with Z entering
    /// pooled targets by its numeric value.
    NuisanceSet population_nuisances() const;

private:
    static double conditional(double num, double den);
    DiscreteWorld world_;
    std::vector<JointCell> cells_;
};

JointTable enumerate_world(const DiscreteWorld& world);

/// Draws n iid rows; judge codes are the Z index + 1.
Simulation sample_world(const DiscreteWorld& world, std::size_t n, std::uint64_t seed);

/// Full generator: base population, U, random judges, decisions, masking.
Simulation simulate(const WorldSpec& spec, std::uint64_t seed);

/// Selective labels over a given base with precomputed U; used for
/// replications that share the base across decision models.
Simulation simulate_over_base(const WorldSpec& spec, const BasePopulation& base,
                              const Vector& unobservable, std::uint64_t seed);

}  // namespace ivsel
