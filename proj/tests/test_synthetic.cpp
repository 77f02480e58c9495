#include "ivsel/error.hpp"
#include "ivsel/rng.hpp"
#include "ivsel/synthetic.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace ivsel;

namespace {

// Direct W1 tables, written out independently of fixture_w1().
struct W1Cell {
    int u, z, d, y;
    double p;
};

std::vector<W1Cell> w1_cells() {
    std::vector<W1Cell> cells;
    for (int u = 0; u < 2; ++u)
        for (int z = 0; z < 2; ++z)
            for (int d = 0; d < 2; ++d)
                for (int y = 0; y < 2; ++y) {
                    const double pd = 0.2 + 0.5 * z + 0.2 * u;
                    const double py = 0.3 + 0.4 * u;
                    cells.push_back({u, z, d, y, 0.25 * (d ? pd : 1 - pd) * (y ? py : 1 - py)});
                }
    return cells;
}

double pearson(const Vector& a, const Vector& b) {
    const double ma = a.mean(), mb = b.mean();
    const double cov = ((a.array() - ma) * (b.array() - mb)).mean();
    return cov / std::sqrt((a.array() - ma).square().mean() * (b.array() - mb).square().mean());
}

}  // namespace

TEST_CASE("expit values") {
    CHECK(expit(0.0) == 0.5);
    CHECK(std::abs(expit(1000.0) - 1.0) <= 1e-12);
    CHECK(expit(-1000.0) >= 0.0);
    for (double t : {-3.0, -1.0, 0.0, 2.0}) CHECK(expit(t) + expit(-t) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(expit(1.0) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
}

TEST_CASE("decision model formulas") {
    // no confounding limit of model 1
    for (double s : {-1.0, 0.3, 2.0})
        for (int z : {0, 3})
            CHECK(decision_probability(DecisionModel::model1, 1e-12, 1.0, 5.0, z, s) ==
                  doctest::Approx(expit((1 + z) * s)).epsilon(1e-9));
    CHECK(decision_probability(DecisionModel::model1, 0.5, 1.0, 0.0, 0, 0.0) == doctest::Approx(0.5));
    const double a = 0.3, b = 0.5, u = 0.4, s = -0.7;
    const int z = 2;
    CHECK(decision_probability(DecisionModel::model1, a, b, u, z, s) ==
          doctest::Approx(b * (a * expit(u) + (1 - a) * expit((1 + z) * s))));
    CHECK(decision_probability(DecisionModel::model2, a, b, u, z, s) ==
          doctest::Approx(b * expit(a * u + (1 - a) * (1 + z) * s)));
}

TEST_CASE("world spec validation") {
    WorldSpec w;
    w.alpha = 0.0;
    CHECK_THROWS_AS(w.validate(), ArgumentError);
    w.alpha = 0.5;
    w.beta = 1.5;
    CHECK_THROWS_AS(w.validate(), ArgumentError);
    w.beta = 1.0;
    w.m = 1;
    CHECK_THROWS_AS(w.validate(), ArgumentError);
    w.m = 2;
    CHECK_NOTHROW(w.validate());
    CHECK_THROWS_AS(simulate(WorldSpec{.alpha = 1.0}, 1), ArgumentError);
}

TEST_CASE("world spec json rejects unknown keys and round trips") {
    CHECK_THROWS_AS(WorldSpec::from_json({{"gamma", 1}}), ConfigError);
    CHECK_THROWS_AS(WorldSpec::from_json({{"alpha", 2.0}}), ConfigError);
    WorldSpec w;
    w.model = DecisionModel::model1;
    w.alpha = 0.25;
    w.m = 4;
    w.n = 333;
    const WorldSpec back = WorldSpec::from_json(w.to_json());
    CHECK(back.to_json() == w.to_json());
}

TEST_CASE("W1 enumeration against the direct tables") {
    const JointTable t = enumerate_world(fixture_w1());
    double ey = 0, ed = 0, ez = 0, edz = 0, edy = 0, edyz = 0, total = 0;
    for (const auto& c : w1_cells()) {
        total += c.p;
        ey += c.p * c.y;
        ed += c.p * c.d;
        ez += c.p * c.z;
        edz += c.p * c.d * c.z;
        edy += c.p * c.d * c.y;
        edyz += c.p * c.d * c.y * c.z;
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
    CHECK(std::abs(t.total() - 1.0) < 1e-12);
    CHECK(std::abs(ey - 0.5) < 1e-12);
    CHECK(std::abs(t.mean_outcome() - 0.5) < 1e-12);
    const double cov_dz = edz - ed * ez, cov_dyz = edyz - edy * ez;
    CHECK(std::abs(cov_dz - 0.125) < 1e-12);
    CHECK(std::abs(cov_dyz - 0.0625) < 1e-12);
    CHECK(std::abs(t.cov_dz_given_x(0) - 0.125) < 1e-12);
    CHECK(std::abs(t.cov_dyz_given_x(0) - 0.0625) < 1e-12);
    CHECK(std::abs(t.covariance_ratio(0) - 0.5) < 1e-12);
    CHECK(std::abs(t.e_d_given_xz(0, 1) - 0.8) < 1e-12);
    CHECK(std::abs(t.e_d_given_xz(0, 0) - 0.3) < 1e-12);
    CHECK(std::abs(t.e_dy_given_xz(0, 1) - 0.42) < 1e-12);
    CHECK(std::abs(t.e_dy_given_xz(0, 0) - 0.17) < 1e-12);
}

TEST_CASE("W1 has constant cov(D,Z|U)") {
    const JointTable t = enumerate_world(fixture_w1());
    CHECK(std::abs(t.cov_dz_given_xu(0, 0) - t.cov_dz_given_xu(0, 1)) < 1e-12);
}

TEST_CASE("enumerated cells sum to one for generated worlds") {
    for (auto model : {DecisionModel::model1, DecisionModel::model2})
        for (double alpha : {0.1, 0.5, 0.9}) {
            WorldSpec spec;
            spec.model = model;
            spec.alpha = alpha;
            spec.beta = 0.5;
            spec.m = 5;
            const JointTable t = enumerate_world(discrete_world_from_spec(spec));
            CHECK(std::abs(t.total() - 1.0) < 1e-12);
        }
}

TEST_CASE("model 1 differences across judges do not depend on U") {
    WorldSpec spec;
    spec.model = DecisionModel::model1;
    spec.alpha = 0.6;
    spec.beta = 0.8;
    spec.m = 4;
    const DiscreteWorld w = discrete_world_from_spec(spec);
    for (std::size_t x = 0; x < w.x_values.size(); ++x)
        for (int j = 0; j < spec.m; ++j)
            for (int k = 0; k < spec.m; ++k) {
                const double d0 = w.p_d[x](0, j) - w.p_d[x](0, k);
                const double d1 = w.p_d[x](1, j) - w.p_d[x](1, k);
                CHECK(std::abs(d0 - d1) < 1e-12);
            }
}

TEST_CASE("oversized worlds are refused") {
    DiscreteWorld w = fixture_w1();
    w.u_values.assign(2000, 0.0);
    w.p_u_given_x = Matrix::Constant(1, 2000, 1.0 / 2000);
    w.z_values.assign(300, 0.0);
    for (std::size_t i = 0; i < 300; ++i) w.z_values[i] = static_cast<double>(i);
    w.p_z_given_x = Matrix::Constant(1, 300, 1.0 / 300);
    w.p_d = {Matrix::Constant(2000, 300, 0.5)};
    w.p_y = Matrix::Constant(1, 2000, 0.5);
    CHECK_THROWS_AS(enumerate_world(w), ArgumentError);
}

TEST_CASE("unobservable construction") {
    const std::size_t n = 2000;
    Matrix x(static_cast<Eigen::Index>(n), 1);
    std::vector<std::uint8_t> step(n), noise(n);
    Rng rng(5);
    for (std::size_t i = 0; i < n; ++i) {
        x(static_cast<Eigen::Index>(i), 0) = rng.uniform() * 2 - 1;
        step[i] = x(static_cast<Eigen::Index>(i), 0) > 0 ? 1 : 0;
        noise[i] = rng.bernoulli(0.3) ? 1 : 0;
    }
    RegressorConfig gbm;
    const Vector u0 = construct_unobservable(x, step, gbm);
    CHECK(u0.cwiseAbs().maxCoeff() < 0.05);

    RegressorConfig constant;
    constant.rounds = 0;
    const Vector u1 = construct_unobservable(x, noise, constant);
    double mean = 0;
    for (auto v : noise) mean += v;
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) CHECK(u1(static_cast<Eigen::Index>(i)) == doctest::Approx(noise[i] - mean));
}

TEST_CASE("U is positively correlated with Y* in the continuous generator") {
    WorldSpec spec;
    spec.n = 5000;
    const Simulation sim = simulate(spec, 21);
    Vector y(static_cast<Eigen::Index>(spec.n));
    for (std::size_t i = 0; i < spec.n; ++i) y(static_cast<Eigen::Index>(i)) = sim.data.oracle_outcome()[i];
    CHECK(pearson(sim.unobservable, y) > 0.5);
}

TEST_CASE("simulated data obeys the masking rule and judge balance") {
    WorldSpec spec;
    spec.n = 100000;
    spec.m = 10;
    spec.beta = 0.5;
    spec.model = DecisionModel::model1;
    const Simulation sim = simulate(spec, 3);
    const auto& ds = sim.data;
    REQUIRE(ds.size() == spec.n);
    CHECK(ds.judge_count() == 10);
    std::vector<double> counts(10, 0);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        counts[static_cast<std::size_t>(ds.judge()[i] - 1)] += 1;
        CHECK(ds.outcome()[i].has_value() == (ds.decision()[i] == 1));
        if (ds.outcome()[i]) CHECK(*ds.outcome()[i] == ds.oracle_outcome()[i]);
    }
    const double n = static_cast<double>(spec.n), p = 0.1;
    const double sigma = std::sqrt(n * p * (1 - p));
    for (double c : counts) CHECK(std::abs(c - n * p) <= 3 * sigma);
    const double labeled = static_cast<double>(ds.labeled_count()) / n;
    CHECK(std::abs(labeled - sim.p_decision.mean()) <= 0.01);
}

TEST_CASE("labeling rate converges for both models") {
    for (auto model : {DecisionModel::model1, DecisionModel::model2}) {
        WorldSpec spec;
        spec.model = model;
        spec.n = 100000;
        spec.alpha = 0.7;
        spec.beta = 0.25;
        const Simulation sim = simulate(spec, 8);
        // recompute p_D from the published formula as the reference
        double expected = 0;
        for (std::size_t i = 0; i < spec.n; ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            expected += decision_probability(model, spec.alpha, spec.beta, sim.unobservable(r), sim.data.judge()[i] - 1,
                                             sim.data.features()(r, 0));
        }
        expected /= static_cast<double>(spec.n);
        CHECK(sim.p_decision.mean() == doctest::Approx(expected).epsilon(1e-12));
        CHECK(std::abs(static_cast<double>(sim.data.labeled_count()) / spec.n - expected) <= 0.01);
    }
}

TEST_CASE("simulation is deterministic per seed") {
    WorldSpec spec;
    spec.n = 500;
    const Simulation a = simulate(spec, 99), b = simulate(spec, 99), c = simulate(spec, 100);
    CHECK(a.data.features() == b.data.features());
    CHECK(a.data.decision() == b.data.decision());
    CHECK(a.data.judge() == b.data.judge());
    CHECK(a.data.judge() != c.data.judge());
}

TEST_CASE("sampling W1 recovers the tables") {
    const Simulation sim = sample_world(fixture_w1(), 100000, 4);
    const auto& ds = sim.data;
    CHECK(ds.judge_count() == 2);
    double d1 = 0, n1 = 0;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (ds.judge()[i] == 2) {
            n1 += 1;
            d1 += ds.decision()[i];
        }
    CHECK(std::abs(d1 / n1 - 0.8) < 0.01);
}
