#include "ivsel/synthetic.hpp"

#include "ivsel/error.hpp"
#include "ivsel/rng.hpp"
#include "ivsel/textio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace ivsel {

double expit(double t) {
    if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

std::string_view to_string(BaseKind b) {
    switch (b) {
        case BaseKind::discrete_fixture: return "discrete-fixture";
        case BaseKind::synthetic_continuous: return "synthetic-continuous";
        case BaseKind::external_csv: return "external-csv";
    }
    return "unknown";
}

BaseKind parse_base_kind(std::string_view s) {
    if (s == "discrete-fixture") return BaseKind::discrete_fixture;
    if (s == "synthetic-continuous") return BaseKind::synthetic_continuous;
    if (s == "external-csv") return BaseKind::external_csv;
    throw ConfigError("unknown base population '" + std::string(s) + "'");
}

std::string_view to_string(DecisionModel m) {
    return m == DecisionModel::model1 ? "model1" : "model2";
}

DecisionModel parse_decision_model(std::string_view s) {
    if (s == "model1") return DecisionModel::model1;
    if (s == "model2") return DecisionModel::model2;
    throw ConfigError("unknown decision model '" + std::string(s) + "'");
}

nlohmann::json WorldSpec::to_json() const {
    nlohmann::json j{{"model", std::string(to_string(model))},
                     {"alpha", alpha},
                     {"beta", beta},
                     {"m", m},
                     {"n", n},
                     {"base", std::string(to_string(base))},
                     {"unobservable", unobservable_regressor.to_json()}};
    if (base == BaseKind::external_csv) {
        j["external_csv"] = external_csv.string();
        j["external_features"] = external_features;
        j["external_outcome"] = external_outcome;
        j["score_column"] = score_column;
    }
    return j;
}

WorldSpec WorldSpec::from_json(const nlohmann::json& j) {
    WorldSpec w;
    for (const auto& [key, value] : j.items()) {
        if (key == "model")
            w.model = parse_decision_model(value.get<std::string>());
        else if (key == "alpha")
            w.alpha = value.get<double>();
        else if (key == "beta")
            w.beta = value.get<double>();
        else if (key == "m")
            w.m = value.get<int>();
        else if (key == "n")
            w.n = value.get<std::size_t>();
        else if (key == "base")
            w.base = parse_base_kind(value.get<std::string>());
        else if (key == "external_csv")
            w.external_csv = value.get<std::string>();
        else if (key == "external_features")
            w.external_features = value.get<std::vector<std::string>>();
        else if (key == "external_outcome")
            w.external_outcome = value.get<std::string>();
        else if (key == "score_column")
            w.score_column = value.get<std::string>();
        else if (key == "unobservable")
            w.unobservable_regressor = RegressorConfig::from_json(value);
        else
            throw ConfigError("generate: unknown key '" + key + "'");
    }
    try {
        w.validate();
    } catch (const ArgumentError& e) {
        throw ConfigError(std::string("generate: ") + e.what());
    }
    return w;
}

void WorldSpec::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("alpha must lie in (0, 1)");
    if (!(beta > 0.0 && beta <= 1.0)) throw ArgumentError("beta must lie in (0, 1]");
    if (m < 2) throw ArgumentError("need at least two judges");
    if (base != BaseKind::external_csv && n < 2) throw ArgumentError("need at least two rows");
    if (base == BaseKind::external_csv &&
        (external_csv.empty() || external_outcome.empty() || score_column.empty()))
        throw ArgumentError("external-csv base needs a path, an outcome column and a score column");
}

double decision_probability(DecisionModel model, double alpha, double beta, double u,
                            int judge0, double score) {
    const double lean = (1.0 + judge0) * score;
    if (model == DecisionModel::model1)
        return beta * (alpha * expit(u) + (1.0 - alpha) * expit(lean));
    return beta * expit(alpha * u + (1.0 - alpha) * lean);
}

BasePopulation generate_continuous_base(std::size_t n, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "continuous-base"));
    constexpr int d = 6;
    BasePopulation base;
    base.names = {"risk_score", "x1", "x2", "x3", "x4", "x5"};
    base.features.resize(static_cast<Eigen::Index>(n), d);
    Vector mu(static_cast<Eigen::Index>(n));
    base.oracle.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double lat[d];
        for (double& v : lat) v = rng.normal();
        const auto r = static_cast<Eigen::Index>(i);
        base.features(r, 0) = lat[0];
        base.features(r, 1) = 0.5 * lat[0] + std::sqrt(0.75) * lat[1];
        base.features(r, 2) = lat[2];
        base.features(r, 3) = 0.3 * lat[0] + std::sqrt(0.91) * lat[3];
        base.features(r, 4) = lat[4];
        base.features(r, 5) = lat[5];
    }
    // The score column is standardized over the drawn sample.
    const auto col0 = base.features.col(0);
    const double mean = col0.mean();
    const double sd = std::sqrt((col0.array() - mean).square().mean());
    base.features.col(0) = (col0.array() - mean) / sd;
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        const auto x = base.features.row(r);
        const double index = 0.9 * x(0) + 0.6 * x(1) - 0.5 * x(2) + 0.3 * x(3);
        mu(r) = expit(index);
        base.oracle[i] = rng.bernoulli(mu(r)) ? 1 : 0;
    }
    base.mu_star = std::move(mu);
    base.score_column = 0;
    return base;
}

BasePopulation load_external_base(const WorldSpec& spec) {
    // Fully labeled table: features plus the outcome column. An empty feature
    // list means every column except the outcome.
    const auto& path = spec.external_csv;
    std::ifstream probe(path);
    if (!probe) throw DataError("cannot open " + path.string());
    std::string header_line;
    std::getline(probe, header_line);
    const auto header = split_csv_line(header_line);
    auto find = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw DataError("column '" + name + "' not found in " + path.string());
        return static_cast<std::size_t>(it - header.begin());
    };
    std::vector<std::string> names = spec.external_features;
    if (names.empty()) {
        for (const auto& h : header)
            if (h != spec.external_outcome) names.push_back(h);
    }
    std::vector<std::size_t> cols;
    for (const auto& f : names) cols.push_back(find(f));
    const std::size_t ycol = find(spec.external_outcome);
    const auto score_it = std::find(names.begin(), names.end(), spec.score_column);
    if (score_it == names.end()) throw DataError("score column must be one of the features");

    std::vector<double> values;
    BasePopulation base;
    base.names = names;
    std::string line;
    std::size_t row = 1;
    while (std::getline(probe, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw DataError("row " + std::to_string(row) + ": wrong cell count");
        for (std::size_t c : cols) values.push_back(parse_double(cells[c], row, header[c]));
        const double y = parse_double(cells[ycol], row, header[ycol]);
        if (y != 0.0 && y != 1.0) throw DataError("row " + std::to_string(row) + ": outcome must be 0/1");
        base.oracle.push_back(static_cast<std::uint8_t>(y));
        ++row;
    }
    if (base.oracle.empty()) throw DataError("no rows");
    const auto n = static_cast<Eigen::Index>(base.oracle.size());
    const auto d = static_cast<Eigen::Index>(cols.size());
    base.features.resize(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j) base.features(i, j) = values[static_cast<std::size_t>(i * d + j)];
    if (!base.features.allFinite()) throw DataError("non-finite feature value");
    base.score_column = static_cast<std::size_t>(score_it - names.begin());
    auto score = base.features.col(static_cast<Eigen::Index>(base.score_column));
    const double mean = score.mean();
    const double sd = std::sqrt((score.array() - mean).square().mean());
    if (!(sd > 0)) throw DataError("score column is constant");
    score = (score.array() - mean) / sd;
    return base;
}

Vector construct_unobservable(const Matrix& features, const std::vector<std::uint8_t>& oracle,
                              const RegressorConfig& config) {
    Vector y(static_cast<Eigen::Index>(oracle.size()));
    for (std::size_t i = 0; i < oracle.size(); ++i) y(static_cast<Eigen::Index>(i)) = oracle[i];
    const Regressor g = Regressor::fit(config, features, y);
    return y - g.predict(features);
}

Simulation simulate_over_base(const WorldSpec& spec, const BasePopulation& base,
                              const Vector& unobservable, std::uint64_t seed) {
    spec.validate();
    const std::size_t n = base.oracle.size();
    if (static_cast<std::size_t>(unobservable.size()) != n)
        throw ArgumentError("unobservable length does not match base population");
    Rng assign(derive_seed(seed, "assign"));
    Rng decide(derive_seed(seed, "decision"));
    std::vector<int> judge(n);
    std::vector<std::uint8_t> decision(n);
    std::vector<std::optional<std::uint8_t>> outcome(n);
    Vector p(static_cast<Eigen::Index>(n));
    const auto score = base.features.col(static_cast<Eigen::Index>(base.score_column));
    for (std::size_t i = 0; i < n; ++i) {
        judge[i] = static_cast<int>(assign.uniform_index(static_cast<std::uint64_t>(spec.m))) + 1;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        p(r) = decision_probability(spec.model, spec.alpha, spec.beta, unobservable(r), judge[i] - 1,
                                    score(r));
        decision[i] = decide.bernoulli(p(r)) ? 1 : 0;
        if (decision[i]) outcome[i] = base.oracle[i];
    }
    SelectiveDataset data(base.names, base.features, std::move(judge), std::move(decision),
                          std::move(outcome), base.oracle, spec.m);
    return Simulation{std::move(data), unobservable, std::move(p), base.mu_star};
}

Simulation simulate(const WorldSpec& spec, std::uint64_t seed) {
    spec.validate();
    switch (spec.base) {
        case BaseKind::discrete_fixture:
            return sample_world(discrete_world_from_spec(spec), spec.n, derive_seed(seed, "sample"));
        case BaseKind::synthetic_continuous: {
            const BasePopulation base = generate_continuous_base(spec.n, derive_seed(seed, "base"));
            const Vector u = construct_unobservable(base.features, base.oracle, spec.unobservable_regressor);
            return simulate_over_base(spec, base, u, seed);
        }
        case BaseKind::external_csv: {
            const BasePopulation base = load_external_base(spec);
            const Vector u = construct_unobservable(base.features, base.oracle, spec.unobservable_regressor);
            return simulate_over_base(spec, base, u, seed);
        }
    }
    throw ArgumentError("unknown base kind");
}

// ---------------------------------------------------------------------------
// Discrete worlds

void DiscreteWorld::validate() const {
    const std::size_t nx = x_values.size();
    const std::size_t nu = u_values.size();
    const std::size_t nz = z_values.size();
    auto bad = [](const std::string& what) { throw ArgumentError("discrete world: " + what); };
    if (nx == 0 || nu == 0 || nz == 0) bad("empty support");
    if (p_x.size() != nx) bad("P(X) size");
    if (p_u_given_x.rows() != static_cast<Eigen::Index>(nx) ||
        p_u_given_x.cols() != static_cast<Eigen::Index>(nu))
        bad("P(U|X) shape");
    if (p_z_given_x.rows() != static_cast<Eigen::Index>(nx) ||
        p_z_given_x.cols() != static_cast<Eigen::Index>(nz))
        bad("P(Z|X) shape");
    if (p_d.size() != nx) bad("P(D|X,U,Z) size");
    if (p_y.rows() != static_cast<Eigen::Index>(nx) || p_y.cols() != static_cast<Eigen::Index>(nu))
        bad("P(Y*|X,U) shape");
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    double sx = 0;
    for (double v : p_x) {
        if (!in_unit(v)) bad("P(X) outside [0,1]");
        sx += v;
    }
    if (std::abs(sx - 1.0) > 1e-12) bad("P(X) does not sum to 1");
    for (std::size_t x = 0; x < nx; ++x) {
        const auto xi = static_cast<Eigen::Index>(x);
        if (std::abs(p_u_given_x.row(xi).sum() - 1.0) > 1e-12) bad("P(U|X) row does not sum to 1");
        if (std::abs(p_z_given_x.row(xi).sum() - 1.0) > 1e-12) bad("P(Z|X) row does not sum to 1");
        if ((p_u_given_x.row(xi).array() < 0).any() || (p_z_given_x.row(xi).array() < 0).any())
            bad("negative probability");
        if (p_d[x].rows() != static_cast<Eigen::Index>(nu) || p_d[x].cols() != static_cast<Eigen::Index>(nz))
            bad("P(D|X,U,Z) shape");
        if ((p_d[x].array() < 0).any() || (p_d[x].array() > 1).any()) bad("P(D) outside [0,1]");
        if ((p_y.row(xi).array() < 0).any() || (p_y.row(xi).array() > 1).any()) bad("P(Y*) outside [0,1]");
    }
}

std::size_t DiscreteWorld::cell_count() const {
    return x_values.size() * u_values.size() * z_values.size() * 4;
}

DiscreteWorld fixture_w1() {
    DiscreteWorld w;
    w.x_values = {Vector::Zero(1)};
    w.p_x = {1.0};
    w.u_values = {0.0, 1.0};
    w.p_u_given_x = Matrix::Constant(1, 2, 0.5);
    w.z_values = {0.0, 1.0};
    w.p_z_given_x = Matrix::Constant(1, 2, 0.5);
    Matrix pd(2, 2);
    for (int u = 0; u < 2; ++u)
        for (int z = 0; z < 2; ++z) pd(u, z) = 0.2 + 0.5 * z + 0.2 * u;
    w.p_d = {pd};
    w.p_y.resize(1, 2);
    w.p_y << 0.3, 0.7;
    return w;
}

DiscreteWorld discrete_world_from_spec(const WorldSpec& spec) {
    spec.validate();
    DiscreteWorld w;
    const std::vector<double> scores = {-1.2, -0.4, 0.4, 1.2};
    for (double s : scores) {
        Vector x(1);
        x << s;
        w.x_values.push_back(x);
        w.p_x.push_back(1.0 / static_cast<double>(scores.size()));
    }
    const auto nx = static_cast<Eigen::Index>(scores.size());
    w.u_values = {-0.5, 0.5};
    w.p_u_given_x = Matrix::Constant(nx, 2, 0.5);
    for (int z = 0; z < spec.m; ++z) w.z_values.push_back(z + 1.0);
    w.p_z_given_x = Matrix::Constant(nx, spec.m, 1.0 / spec.m);
    w.p_y.resize(nx, 2);
    for (Eigen::Index x = 0; x < nx; ++x) {
        Matrix pd(2, spec.m);
        for (int u = 0; u < 2; ++u) {
            w.p_y(x, u) = expit(scores[static_cast<std::size_t>(x)] + 2.0 * w.u_values[static_cast<std::size_t>(u)]);
            for (int z = 0; z < spec.m; ++z)
                pd(u, z) = decision_probability(spec.model, spec.alpha, spec.beta,
                                                w.u_values[static_cast<std::size_t>(u)], z,
                                                scores[static_cast<std::size_t>(x)]);
        }
        w.p_d.push_back(pd);
    }
    return w;
}

JointTable enumerate_world(const DiscreteWorld& world) {
    world.validate();
    if (world.cell_count() > 1'000'000) throw ArgumentError("discrete world too large to enumerate");
    std::vector<JointCell> cells;
    cells.reserve(world.cell_count());
    for (std::size_t x = 0; x < world.x_values.size(); ++x) {
        const auto xi = static_cast<Eigen::Index>(x);
        for (std::size_t u = 0; u < world.u_values.size(); ++u) {
            const auto ui = static_cast<Eigen::Index>(u);
            const double pxu = world.p_x[x] * world.p_u_given_x(xi, ui);
            const double py = world.p_y(xi, ui);
            for (std::size_t z = 0; z < world.z_values.size(); ++z) {
                const auto zi = static_cast<Eigen::Index>(z);
                const double pxuz = pxu * world.p_z_given_x(xi, zi);
                const double pd = world.p_d[x](ui, zi);
                // D and Y* are independent given (X, U).
                for (int d = 0; d < 2; ++d)
                    for (int y = 0; y < 2; ++y)
                        cells.push_back({x, u, z, d, y,
                                         pxuz * (d ? pd : 1 - pd) * (y ? py : 1 - py)});
            }
        }
    }
    return JointTable(world, std::move(cells));
}

double JointTable::conditional(double num, double den) {
    if (!(den > 0)) throw ArgumentError("conditioning event has probability zero");
    return num / den;
}

double JointTable::total() const {
    double s = 0;
    for (const auto& c : cells_) s += c.p;
    return s;
}

double JointTable::mu_star(std::size_t x) const {
    return expect([](const JointCell& c) { return c.y; }, [x](const JointCell& c) { return c.x == x; });
}

double JointTable::mean_outcome() const {
    return expect([](const JointCell& c) { return c.y; }, [](const JointCell&) { return true; });
}

double JointTable::e_d_given_xz(std::size_t x, std::size_t z) const {
    return expect([](const JointCell& c) { return c.d; },
                  [=](const JointCell& c) { return c.x == x && c.z == z; });
}

double JointTable::e_dy_given_xz(std::size_t x, std::size_t z) const {
    return expect([](const JointCell& c) { return c.d * c.y; },
                  [=](const JointCell& c) { return c.x == x && c.z == z; });
}

double JointTable::e_d_given_xuz(std::size_t x, std::size_t u, std::size_t z) const {
    return expect([](const JointCell& c) { return c.d; },
                  [=](const JointCell& c) { return c.x == x && c.u == u && c.z == z; });
}

double JointTable::cov_dz_given_x(std::size_t x) const {
    const auto& zv = world_.z_values;
    auto in_x = [x](const JointCell& c) { return c.x == x; };
    const double edz = expect([&](const JointCell& c) { return c.d * zv[c.z]; }, in_x);
    const double ed = expect([](const JointCell& c) { return c.d; }, in_x);
    const double ez = expect([&](const JointCell& c) { return zv[c.z]; }, in_x);
    return edz - ed * ez;
}

double JointTable::cov_dyz_given_x(std::size_t x) const {
    const auto& zv = world_.z_values;
    auto in_x = [x](const JointCell& c) { return c.x == x; };
    const double edyz = expect([&](const JointCell& c) { return c.d * c.y * zv[c.z]; }, in_x);
    const double edy = expect([](const JointCell& c) { return c.d * c.y; }, in_x);
    const double ez = expect([&](const JointCell& c) { return zv[c.z]; }, in_x);
    return edyz - edy * ez;
}

double JointTable::cov_dz_given_xu(std::size_t x, std::size_t u) const {
    const auto& zv = world_.z_values;
    auto in_xu = [x, u](const JointCell& c) { return c.x == x && c.u == u; };
    const double edz = expect([&](const JointCell& c) { return c.d * zv[c.z]; }, in_xu);
    const double ed = expect([](const JointCell& c) { return c.d; }, in_xu);
    const double ez = expect([&](const JointCell& c) { return zv[c.z]; }, in_xu);
    return edz - ed * ez;
}

double JointTable::covariance_ratio(std::size_t x) const {
    return cov_dyz_given_x(x) / cov_dz_given_x(x);
}

NuisanceSet JointTable::population_nuisances() const {
    const auto nx = static_cast<Eigen::Index>(world_.x_values.size());
    const auto m = static_cast<int>(world_.z_values.size());
    const auto& zv = world_.z_values;
    NuisanceSet s;
    s.m = m;
    s.fold.assign(world_.x_values.size(), 0);
    s.dy_by_judge.resize(nx, m);
    s.d_by_judge.resize(nx, m);
    for (Vector* v : {&s.dyz, &s.dy, &s.z, &s.dz, &s.d}) v->resize(nx);
    for (Eigen::Index x = 0; x < nx; ++x) {
        const auto xs = static_cast<std::size_t>(x);
        for (int z = 0; z < m; ++z) {
            s.dy_by_judge(x, z) = e_dy_given_xz(xs, static_cast<std::size_t>(z));
            s.d_by_judge(x, z) = e_d_given_xz(xs, static_cast<std::size_t>(z));
        }
        auto in_x = [xs](const JointCell& c) { return c.x == xs; };
        s.dyz(x) = expect([&](const JointCell& c) { return c.d * c.y * zv[c.z]; }, in_x);
        s.dy(x) = expect([](const JointCell& c) { return c.d * c.y; }, in_x);
        s.z(x) = expect([&](const JointCell& c) { return zv[c.z]; }, in_x);
        s.dz(x) = expect([&](const JointCell& c) { return c.d * zv[c.z]; }, in_x);
        s.d(x) = expect([](const JointCell& c) { return c.d; }, in_x);
    }
    return s;
}

Simulation sample_world(const DiscreteWorld& world, std::size_t n, std::uint64_t seed) {
    world.validate();
    if (n == 0) throw ArgumentError("sample size must be positive");
    Rng rng(derive_seed(seed, "discrete-sample"));
    auto draw = [&rng](auto&& probs, std::size_t k) {
        double u = rng.uniform();
        for (std::size_t i = 0; i + 1 < k; ++i) {
            u -= probs(i);
            if (u < 0) return i;
        }
        return k - 1;
    };
    const std::size_t nx = world.x_values.size();
    const std::size_t nu = world.u_values.size();
    const std::size_t nz = world.z_values.size();
    const auto dim = world.x_values.front().size();
    Matrix x(static_cast<Eigen::Index>(n), dim);
    std::vector<int> judge(n);
    std::vector<std::uint8_t> decision(n), oracle(n);
    std::vector<std::optional<std::uint8_t>> outcome(n);
    Vector u_out(static_cast<Eigen::Index>(n)), p_out(static_cast<Eigen::Index>(n)),
        mu_out(static_cast<Eigen::Index>(n));
    const JointTable table = enumerate_world(world);
    std::vector<double> mu(nx);
    for (std::size_t k = 0; k < nx; ++k) mu[k] = table.mu_star(k);

    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        const std::size_t xi = draw([&](std::size_t k) { return world.p_x[k]; }, nx);
        const auto xe = static_cast<Eigen::Index>(xi);
        const std::size_t ui = draw([&](std::size_t k) { return world.p_u_given_x(xe, static_cast<Eigen::Index>(k)); }, nu);
        const std::size_t zi = draw([&](std::size_t k) { return world.p_z_given_x(xe, static_cast<Eigen::Index>(k)); }, nz);
        const double pd = world.p_d[xi](static_cast<Eigen::Index>(ui), static_cast<Eigen::Index>(zi));
        const double py = world.p_y(xe, static_cast<Eigen::Index>(ui));
        x.row(r) = world.x_values[xi].transpose();
        judge[i] = static_cast<int>(zi) + 1;
        decision[i] = rng.bernoulli(pd) ? 1 : 0;
        oracle[i] = rng.bernoulli(py) ? 1 : 0;
        if (decision[i]) outcome[i] = oracle[i];
        u_out(r) = world.u_values[ui];
        p_out(r) = pd;
        mu_out(r) = mu[xi];
    }
    std::vector<std::string> names;
    for (Eigen::Index j = 0; j < dim; ++j) names.push_back("x" + std::to_string(j + 1));
    SelectiveDataset data(std::move(names), std::move(x), std::move(judge), std::move(decision),
                          std::move(outcome), std::move(oracle), static_cast<int>(nz));
    return Simulation{std::move(data), std::move(u_out), std::move(p_out), std::move(mu_out)};
}

}  // namespace ivsel
