// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--allow-red N]... [N]...
//
// With no criterion numbers every criterion runs. The exit status is 0 when
// every failing criterion was named with --allow-red.

#include "ivsel/cli.hpp"
#include "ivsel/evaluation.hpp"
#include "ivsel/identification.hpp"
#include "ivsel/learner.hpp"
#include "ivsel/nuisance.hpp"
#include "ivsel/rng.hpp"
#include "ivsel/synthetic.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace ivsel;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
    std::vector<std::string> info;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::path(IVSEL_TEST_TMP) / "acceptance" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

// ---------------------------------------------------------------------------

Outcome c1_w1_identification() {
    Outcome o;
    const JointTable t = enumerate_world(fixture_w1());
    const NuisanceSet pop = t.population_nuisances();
    const double r = point_weight(pop).ratio[0];
    const IntervalBounds pb = partial_bounds(pop);
    const double enum_err = std::max({std::abs(r - 0.5), std::abs(pb.l[0] - 0.42), std::abs(pb.u[0] - 0.62)});

    const Simulation sim = sample_world(fixture_w1(), 200000, 101);
    const FoldPlan folds = make_folds(sim.data.size(), 5, 102);
    const NuisanceSet ns = crossfit_nuisances(sim.data, folds, RegressorConfig{});
    const WeightVector w = point_weight(ns);
    const IntervalBounds b = partial_bounds(ns);
    double dr = 0, dl = 0, du = 0;
    for (std::size_t i = 0; i < ns.size(); ++i) {
        dr = std::max(dr, std::abs(w.ratio[i] - 0.5));
        dl = std::max(dl, std::abs(b.l[i] - 0.42));
        du = std::max(du, std::abs(b.u[i] - 0.62));
    }
    o.pass = enum_err <= 1e-12 && dr <= 0.02 && dl <= 0.02 && du <= 0.02;
    o.detail = fmt("enumeration error %.2e; sample max |r-0.5| %.4f, |l-0.42| %.4f, |u-0.62| %.4f (tol 0.02)",
                   enum_err, dr, dl, du);
    return o;
}

Outcome c2_lp_equivalence() {
    Outcome o;
    Rng rng(202);
    double worst = 0;
    int solved = 0;
    for (int t = 0; t < 200; ++t) {
        // Dirichlet(1) mass on the eight response types (D(0), D(1), Y*)
        double q[8], total = 0;
        for (double& v : q) total += (v = -std::log(1.0 - rng.uniform()));
        ObservableDistribution p;
        for (int d0 = 0; d0 < 2; ++d0)
            for (int d1 = 0; d1 < 2; ++d1)
                for (int y = 0; y < 2; ++y) {
                    const double mass = q[d0 + 2 * d1 + 4 * y] / total;
                    for (int z = 0; z < 2; ++z) {
                        const int d = z ? d1 : d0;
                        (d ? (y ? p.p_11[z] : p.p_01[z]) : p.p_na[z]) += mass;
                    }
                }
        for (int z = 0; z < 2; ++z) p.p_na[z] = 1.0 - p.p_01[z] - p.p_11[z];
        const MeanBounds lp = balke_pearl_lp(p), cf = manski_closed_form(p);
        worst = std::max({worst, std::abs(lp.lower - cf.lower), std::abs(lp.upper - cf.upper)});
        ++solved;
    }
    o.pass = solved == 200 && worst <= 1e-8;
    o.detail = fmt("%d distributions, max endpoint difference %.2e (tol 1e-8)", solved, worst);
    return o;
}

double coverage(const IntervalBounds& b, const Vector& mu, double slack, double* width) {
    std::size_t hit = 0;
    double wsum = 0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        const double m = mu(static_cast<Eigen::Index>(i));
        if (b.l[i] - slack <= m && m <= b.u[i] + slack) ++hit;
        wsum += b.u[i] - b.l[i];
    }
    if (width) *width = wsum / static_cast<double>(b.size());
    return static_cast<double>(hit) / static_cast<double>(b.size());
}

Outcome c3_bound_coverage() {
    Outcome o;
    WorldSpec spec;
    spec.model = DecisionModel::model2;
    spec.alpha = 0.7;
    spec.beta = 1.0;
    spec.m = 10;
    spec.n = 20000;
    const Simulation sim = simulate(spec, 303);
    const auto [train, test] = split_indices(sim.data.size(), 0.3, 304);
    Matrix xt(static_cast<Eigen::Index>(test.size()), sim.data.features().cols());
    Vector mu(static_cast<Eigen::Index>(test.size()));
    for (std::size_t i = 0; i < test.size(); ++i) {
        xt.row(static_cast<Eigen::Index>(i)) = sim.data.features().row(static_cast<Eigen::Index>(test[i]));
        mu(static_cast<Eigen::Index>(i)) = (*sim.mu_star)(static_cast<Eigen::Index>(test[i]));
    }
    auto run = [&](const RegressorConfig& rc, double* width) {
        const NuisanceModels models = NuisanceModels::fit(sim.data, train, rc, NuisanceComponents{true, false});
        return coverage(partial_bounds(models.predict(xt)), mu, 0.02, width);
    };
    double width = 0;
    const double cov = run(RegressorConfig{}, &width);
    o.pass = cov >= 0.95;
    o.detail = fmt("default nuisance learner covers %.4f of %zu test rows (need >= 0.95), mean width %.3f", cov,
                   test.size(), width);
    RegressorConfig logit;
    logit.kind = RegressorKind::logistic;
    double lw = 0;
    const double lc = run(logit, &lw);
    o.info.push_back(fmt("logistic nuisance learner: coverage %.4f, mean width %.3f", lc, lw));
    return o;
}

Outcome c4_surrogate_dominance() {
    Outcome o;
    const LossKind losses[] = {LossKind::hinge, LossKind::logistic, LossKind::exponential};
    double worst[3] = {-INFINITY, -INFINITY, -INFINITY};
    int bad[3] = {0, 0, 0};
    int bad_log2 = 0;
    for (int inst = 0; inst < 50; ++inst) {
        Rng rng(derive_seed(404, "instance", static_cast<std::uint64_t>(inst)));
        const int k = 1 + static_cast<int>(rng.uniform_index(8));
        const int n = 240;
        Matrix values(k, 2);
        std::vector<double> wv(static_cast<std::size_t>(k));
        for (int v = 0; v < k; ++v) {
            values.row(v) << 4 * rng.uniform() - 2, 4 * rng.uniform() - 2;
            wv[static_cast<std::size_t>(v)] = rng.uniform() - 0.5;
        }
        Matrix x(n, 2);
        std::vector<int> which(n);
        std::vector<double> w(n);
        for (int i = 0; i < n; ++i) {
            which[static_cast<std::size_t>(i)] = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(k)));
            x.row(i) = values.row(which[static_cast<std::size_t>(i)]);
            w[static_cast<std::size_t>(i)] = wv[static_cast<std::size_t>(which[static_cast<std::size_t>(i)])];
        }
        const SelectiveDataset ds({"a", "b"}, x, std::vector<int>(n, 1), std::vector<std::uint8_t>(n, 0),
                                  std::vector<std::optional<std::uint8_t>>(n), std::nullopt, 1);
        const FoldPlan folds = make_folds(n, 5, derive_seed(405, "folds", static_cast<std::uint64_t>(inst)));
        WeightVector wvec;
        wvec.w = w;
        wvec.fold = folds.assignment;
        wvec.flags.assign(n, 0);

        // mass per distinct value, split by weight sign
        std::vector<double> pos(static_cast<std::size_t>(k), 0.0), neg(static_cast<std::size_t>(k), 0.0);
        for (int i = 0; i < n; ++i) (w[static_cast<std::size_t>(i)] >= 0 ? pos : neg)[static_cast<std::size_t>(which[static_cast<std::size_t>(i)])] += std::abs(w[static_cast<std::size_t>(i)]) / n;

        for (int li = 0; li < 3; ++li) {
            LearnerConfig lc;
            lc.loss = losses[li];
            const ScoreModel h = fit_weighted_erm(ds, folds, wvec, lc);
            const Vector s = h.scores(x);
            double rm = 0, rphi = 0;
            for (int i = 0; i < n; ++i) {
                const double wi = w[static_cast<std::size_t>(i)], si = s(i);
                if (sign_of(si) != sign_of(wi)) rm += std::abs(wi);
                rphi += std::abs(wi) * surrogate_value(losses[li], sign_of(wi) * si);
            }
            rm /= n;
            rphi /= n;
            // optimal sign pattern by enumeration, optimal per-point score by grid search
            double rm_star = INFINITY;
            for (unsigned pat = 0; pat < (1u << k); ++pat) {
                double r = 0;
                for (int v = 0; v < k; ++v) r += (pat >> v) & 1u ? neg[static_cast<std::size_t>(v)] : pos[static_cast<std::size_t>(v)];
                rm_star = std::min(rm_star, r);
            }
            double rphi_star = 0;
            for (int v = 0; v < k; ++v) {
                double best = INFINITY;
                for (int g = -30000; g <= 30000; ++g) {
                    const double a = g * 1e-3;
                    best = std::min(best, pos[static_cast<std::size_t>(v)] * surrogate_value(losses[li], a) +
                                              neg[static_cast<std::size_t>(v)] * surrogate_value(losses[li], -a));
                }
                rphi_star += best;
            }
            const double gap = (rm - rm_star) - (rphi - rphi_star);
            worst[li] = std::max(worst[li], gap);
            if (gap > 1e-6) ++bad[li];
            if (li == 1 && (rm - rm_star) - (rphi - rphi_star) / std::log(2.0) > 1e-6) ++bad_log2;
        }
    }
    o.pass = bad[0] == 0 && bad[1] == 0 && bad[2] == 0;
    o.detail = fmt("violations hinge %d, logistic %d, exponential %d of 50; max (excess 0-1) - (excess surrogate): "
                   "%.2e, %.2e, %.2e (tol 1e-6)",
                   bad[0], bad[1], bad[2], worst[0], worst[1], worst[2]);

    o.info.push_back(fmt("logistic loss measured in bits, log2(1 + e^-a): %d violations of 50", bad_log2));
    o.info.push_back(fmt("a wrong-signed score with |h| < %.4f costs less than 1 under the natural-log logistic loss",
                         std::log(std::exp(1.0) - 1.0)));
    return o;
}

Outcome c5_two_cluster() {
    Outcome o;
    Rng rng(505);
    const int n = 5000;
    Matrix x(n, 1);
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i) {
        const double centre = rng.bernoulli(0.5) ? 1.0 : -1.0;
        x(i, 0) = centre + 0.5 * rng.normal();
        w[static_cast<std::size_t>(i)] = x(i, 0) > 0 ? 0.4 : -0.4;
    }
    const SelectiveDataset ds({"x"}, x, std::vector<int>(n, 1), std::vector<std::uint8_t>(n, 0),
                              std::vector<std::optional<std::uint8_t>>(n), std::nullopt, 1);
    const FoldPlan folds = make_folds(n, 5, 506);
    WeightVector wv;
    wv.w = w;
    wv.fold = folds.assignment;
    wv.flags.assign(n, 0);
    LearnerConfig lc;
    lc.loss = LossKind::logistic;
    lc.feature_map = FeatureMapKind::raw_intercept;
    const ScoreModel h = fit_weighted_erm(ds, folds, wv, lc);
    std::vector<double> grid;
    for (int g = -300; g <= 300; ++g)
        if (std::abs(g * 0.01) >= 0.05) grid.push_back(g * 0.01);
    Matrix gx(static_cast<Eigen::Index>(grid.size()), 1);
    for (std::size_t i = 0; i < grid.size(); ++i) gx(static_cast<Eigen::Index>(i), 0) = grid[i];
    const Vector s = h.scores(gx);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (sign_of(s(static_cast<Eigen::Index>(i))) == (grid[i] > 0 ? 1.0 : -1.0)) ++agree;
    const double rate = static_cast<double>(agree) / static_cast<double>(grid.size());
    o.pass = rate >= 0.99;
    o.detail = fmt("sign agreement %.4f on %zu grid points in [-3, 3] with |x| >= 0.05 (need >= 0.99)", rate,
                   grid.size());
    return o;
}

struct CliRun {
    int code;
    std::string out, err;
};

CliRun cli(std::vector<std::string> args) {
    args.insert(args.begin(), "ivsel");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

// Criterion 8 reuses the report written for criterion 6.
struct ExperimentRuns {
    bool done = false;
    bool ok = false;
    std::string error;
    fs::path first, second;
    double seconds = 0;
};
ExperimentRuns g_runs;

const ExperimentRuns& experiment_runs() {
    if (g_runs.done) return g_runs;
    g_runs.done = true;
    const fs::path dir = scratch("experiment");
    const json cfg = {
        {"generate", {{"model", "model2"}, {"beta", 1.0}, {"m", 10}, {"n", 10459}}},
        {"experiment",
         {{"models", {"model2"}},
          {"alphas", {0.5, 0.9}},
          {"betas", {1.0}},
          {"methods", {"partial", "selected"}},
          {"replications", 20},
          {"test_fraction", 0.3}}},
        {"seed", 606},
        {"output", {{"dir", (dir / "run1").string()}}}};
    std::ofstream(dir / "c1.json") << cfg.dump(2);
    json cfg2 = cfg;
    cfg2["output"]["dir"] = (dir / "run2").string();
    std::ofstream(dir / "c2.json") << cfg2.dump(2);
    const auto t0 = std::chrono::steady_clock::now();
    const CliRun a = cli({"experiment", "--config", (dir / "c1.json").string()});
    const CliRun b = cli({"experiment", "--config", (dir / "c2.json").string(), "--jobs", "2"});
    g_runs.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    g_runs.first = dir / "run1" / "report.csv";
    g_runs.second = dir / "run2" / "report.csv";
    g_runs.ok = a.code == 0 && b.code == 0;
    if (!g_runs.ok) g_runs.error = a.err + b.err;
    return g_runs;
}

Outcome c6_directional() {
    Outcome o;
    const ExperimentRuns& runs = experiment_runs();
    if (!runs.ok) {
        o.detail = "experiment run failed: " + runs.error;
        return o;
    }
    const ExperimentReport report = read_report_csv(runs.first);
    std::map<std::pair<double, LearningMode>, std::pair<double, int>> acc;
    std::size_t failed = 0;
    for (const auto& r : report.records) {
        if (!r.ok) {
            ++failed;
            continue;
        }
        auto& slot = acc[{r.alpha, r.method}];
        slot.first += r.accuracy;
        slot.second += 1;
    }
    auto mean = [&](double alpha, LearningMode m) {
        const auto& s = acc[{alpha, m}];
        return s.second ? s.first / s.second : NAN;
    };
    const double p9 = mean(0.9, LearningMode::partial), s9 = mean(0.9, LearningMode::selected);
    const double p5 = mean(0.5, LearningMode::partial), s5 = mean(0.5, LearningMode::selected);
    const double gap9 = p9 - s9, gap5 = p5 - s5;
    o.pass = failed == 0 && report.records.size() == 80 && gap9 > 0 && gap9 >= gap5;
    o.detail = fmt("alpha=0.9: partial %.4f vs selected %.4f (gap %+.4f); alpha=0.5: partial %.4f vs selected %.4f "
                   "(gap %+.4f); %zu failed records",
                   p9, s9, gap9, p5, s5, gap5, failed);
    // paired by replication, since both methods see the same data
    for (double alpha : {0.5, 0.9}) {
        std::map<int, double> part, sel;
        for (const auto& r : report.records)
            if (r.ok && r.alpha == alpha) (r.method == LearningMode::partial ? part : sel)[r.replication] = r.accuracy;
        std::vector<double> d;
        for (const auto& [rep, a] : part)
            if (sel.count(rep)) d.push_back(a - sel[rep]);
        double m = 0, v = 0;
        for (double x : d) m += x;
        m /= static_cast<double>(d.size());
        for (double x : d) v += (x - m) * (x - m);
        const double se = std::sqrt(v / static_cast<double>(d.size() - 1) / static_cast<double>(d.size()));
        o.info.push_back(fmt("alpha=%.1f paired gap %+.4f, standard error %.4f over %zu replications", alpha, m, se,
                             d.size()));
    }
    o.info.push_back(fmt("two experiment runs took %.1f s", runs.seconds));
    return o;
}

Outcome c7_formula_examples() {
    Outcome o;
    int total = 0;
    std::vector<std::string> failed;
    auto check = [&](const char* name, bool ok) {
        ++total;
        if (!ok) failed.push_back(name);
    };
    auto near = [](double a, double b, double tol = 1e-12) { return std::abs(a - b) <= tol; };

    auto pooled = [](double dyz, double dy, double z, double dz, double d) {
        NuisanceSet s;
        s.m = 2;
        s.dyz = Vector::Constant(1, dyz);
        s.dy = Vector::Constant(1, dy);
        s.z = Vector::Constant(1, z);
        s.dz = Vector::Constant(1, dz);
        s.d = Vector::Constant(1, d);
        s.fold = {1};
        return s;
    };
    auto per_judge = [](std::vector<double> dy, std::vector<double> d) {
        NuisanceSet s;
        s.m = static_cast<int>(dy.size());
        s.dy_by_judge = Eigen::Map<Eigen::RowVectorXd>(dy.data(), s.m);
        s.d_by_judge = Eigen::Map<Eigen::RowVectorXd>(d.data(), s.m);
        s.fold = {1};
        return s;
    };
    auto interval = [](double l, double u) {
        IntervalBounds b;
        b.l = {l};
        b.u = {u};
        b.crossed = {false};
        b.fold = {1};
        return b;
    };

    // weights
    const WeightVector w1 = point_weight(pooled(0.0625 + 0.25, 0.5, 0.5, 0.125 + 0.25, 0.5));
    check("point weight W1", near(w1.ratio[0], 0.5) && near(w1.w[0], 0.0) && w1.flags[0] == 0);
    const WeightVector fl = point_weight(pooled(0.0001, 0.0, 0.5, 0.0002, 0.0), 1e-3);
    check("floored denominator", (fl.flags[0] & kDenominatorFloored) != 0 && near(fl.ratio[0], 0.1));
    const WeightVector cl = point_weight(pooled(0.12 + 0.1, 0.2, 0.5, 0.1 + 0.2, 0.4));
    check("clipped ratio", near(cl.ratio[0], 1.2) && cl.w[0] == 0.5 && (cl.flags[0] & kRatioClipped) != 0);
    const IntervalBounds wb = partial_bounds(per_judge({0.17, 0.42}, {0.3, 0.8}));
    check("W1 bounds", near(wb.l[0], 0.42) && near(wb.u[0], 0.62));
    const IntervalBounds full = partial_bounds(per_judge({0.17, 0.35}, {0.3, 1.0}));
    check("full labeling", near(full.l[0], 0.35) && near(full.u[0], 0.35));
    const IntervalBounds vac = partial_bounds(per_judge({0.0, 0.0}, {0.0, 0.0}));
    check("vacuous bounds", vac.l[0] == 0.0 && vac.u[0] == 1.0);
    check("partial weight 0.04", near(partial_weight(interval(0.42, 0.62)).w[0], 0.04));
    check("partial weight 0.3", near(partial_weight(interval(0.6, 0.8)).w[0], 0.3));
    check("partial weight 0", near(partial_weight(interval(0.4, 0.6)).w[0], 0.0));
    ObservableDistribution p;
    p.p_na[0] = 0.7, p.p_01[0] = 0.13, p.p_11[0] = 0.17, p.p_na[1] = 0.2, p.p_01[1] = 0.38, p.p_11[1] = 0.42;
    const MeanBounds lp = balke_pearl_lp(p), cf = manski_closed_form(p);
    check("LP W1", near(lp.lower, 0.42, 1e-9) && near(lp.upper, 0.62, 1e-9));
    check("closed form W1", near(cf.lower, 0.42) && near(cf.upper, 0.62));
    ObservableDistribution ones;
    ones.p_11[0] = ones.p_11[1] = 1.0;
    const MeanBounds lp1 = balke_pearl_lp(ones);
    check("LP all positive", near(lp1.lower, 1.0, 1e-9) && near(lp1.upper, 1.0, 1e-9));
    ObservableDistribution lab;
    lab.p_11[0] = lab.p_11[1] = lab.p_01[0] = lab.p_01[1] = 0.5;
    const MeanBounds cl5 = manski_closed_form(lab);
    check("closed form fully labeled", cl5.lower == 0.5 && cl5.upper == 0.5);

    // risk identity and bounds
    check("risk at mu=0.5", near(oracle_risk_from_mu(Vector::Constant(4, 0.5), {1, 0, 1, 1}), 0.5));
    Vector mu3(3);
    mu3 << 0.2, 0.7, 0.4;
    check("risk with f=0", near(oracle_risk_from_mu(mu3, {0, 0, 0}), mu3.mean()));
    Vector mu2(2);
    mu2 << 0.9, 0.1;
    check("risk two rows", near(oracle_risk_from_mu(mu2, {1, 0}), 0.1));
    const RiskInterval rb = risk_bounds(interval(0.42, 0.62), {1});
    check("risk bounds W1", near(rb.lower, 0.38) && near(rb.upper, 0.58));
    const RiskInterval rv = risk_bounds(interval(0.0, 1.0), {0});
    check("risk bounds vacuous", rv.lower == 0.0 && rv.upper == 1.0);
    const RiskInterval rd = risk_bounds(interval(0.3, 0.3), {1});
    check("risk bounds degenerate", near(rd.lower, 0.7) && near(rd.upper, 0.7));
    check("accuracy identity", zero_one_accuracy({1, 0}, {1, 0}) == 1.0);
    check("accuracy complement", zero_one_accuracy({0, 1}, {1, 0}) == 0.0);
    check("accuracy half", zero_one_accuracy({1, 1}, {1, 0}) == 0.5);

    // surrogate risk
    check("hinge(1)", surrogate_value(LossKind::hinge, 1.0) == 0.0);
    check("exponential(0)", surrogate_value(LossKind::exponential, 0.0) == 1.0);
    check("logistic(0)", near(surrogate_value(LossKind::logistic, 0.0), std::log(2.0)));
    ScoreModel h;
    h.map.kind = FeatureMapKind::raw;
    h.map.standardizer.mean = Vector::Zero(1);
    h.map.standardizer.scale = Vector::Ones(1);
    h.theta = Vector::Ones(1);
    check("surrogate risk single row", near(weighted_surrogate_risk(h, {-0.2}, Matrix::Ones(1, 1), LossKind::hinge), 0.4));
    check("surrogate risk zero weights", weighted_surrogate_risk(h, {0.0, 0.0}, Matrix::Ones(2, 1), LossKind::logistic) == 0.0);
    h.theta(0) = 1000.0;
    check("surrogate risk saturated", weighted_surrogate_risk(h, {0.3, 0.3}, Matrix::Ones(2, 1), LossKind::hinge) == 0.0);
    Matrix ties(2, 1);
    ties << 0.0, -3.2;
    h.theta(0) = 1.0;
    check("sign tie-break", predict_class(h, ties) == std::vector<std::uint8_t>{1, 0});

    // decision models
    check("expit(0)", expit(0.0) == 0.5);
    check("expit saturation", near(expit(1000.0), 1.0));
    bool sym = true;
    for (double t : {-3.0, -1.0, 0.0, 2.0}) sym = sym && near(expit(t) + expit(-t), 1.0);
    check("expit symmetry", sym);
    check("model 1 example", near(decision_probability(DecisionModel::model1, 0.5, 1.0, 0.0, 0, 0.0), 0.5));
    bool limit = true;
    for (int z = 0; z < 4; ++z)
        for (double u : {-0.7, 0.0, 0.4})
            limit = limit && near(decision_probability(DecisionModel::model1, 0.0, 1.0, u, z, 0.8), expit((1 + z) * 0.8));
    check("model 1 without confounding", limit);
    check("model 2 formula",
          near(decision_probability(DecisionModel::model2, 0.7, 0.8, 0.3, 2, -0.5), 0.8 * expit(0.7 * 0.3 + 0.3 * 3 * -0.5)));

    // folds and splits
    check("five folds of two", make_folds(10, 5, 1).sizes() == std::vector<std::size_t>(5, 2));
    auto s3 = make_folds(10, 3, 1).sizes();
    std::sort(s3.rbegin(), s3.rend());
    check("three folds", s3 == std::vector<std::size_t>{4, 3, 3});
    const auto [tr, te] = split_indices(10, 0.999, 1);
    check("split floor on train", tr.size() == 1 && te.size() == 9);

    o.pass = failed.empty();
    std::string names;
    for (const auto& f : failed) names += (names.empty() ? "" : ", ") + f;
    o.detail = fmt("%d of %d examples reproduced", total - static_cast<int>(failed.size()), total) +
               (failed.empty() ? "" : "; failing: " + names);
    return o;
}

Outcome c8_determinism() {
    Outcome o;
    const ExperimentRuns& runs = experiment_runs();
    if (!runs.ok) {
        o.detail = "experiment run failed: " + runs.error;
        return o;
    }
    const std::string a = slurp(runs.first), b = slurp(runs.second);
    o.pass = !a.empty() && a == b;
    o.detail = fmt("report files of %zu and %zu bytes are %s (second run with --jobs 2)", a.size(), b.size(),
                   a == b ? "identical" : "different");
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"W1 identification", c1_w1_identification},
        {"LP and closed form agree", c2_lp_equivalence},
        {"bound coverage under estimation", c3_bound_coverage},
        {"surrogate dominance", c4_surrogate_dominance},
        {"two-cluster ERM", c5_two_cluster},
        {"partial beats selected as confounding grows", c6_directional},
        {"formula examples", c7_formula_examples},
        {"experiment determinism", c8_determinism},
    };
    std::set<int> selected, allowed;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--allow-red") == 0 && i + 1 < argc)
            allowed.insert(std::atoi(argv[++i]));
        else
            selected.insert(std::atoi(argv[i]));
    }
    int unexpected = 0;
    for (std::size_t c = 0; c < criteria.size(); ++c) {
        const int id = static_cast<int>(c) + 1;
        if (!selected.empty() && !selected.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[c].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("threw: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %d %s: %s (%.1f s) %s\n", id, criteria[c].first, o.pass ? "PASS" : "FAIL", secs,
                    o.detail.c_str());
        for (const auto& line : o.info) std::printf("    info: %s\n", line.c_str());
        if (!o.pass && !allowed.count(id)) ++unexpected;
        if (!o.pass && allowed.count(id)) std::printf("    allowed to fail by --allow-red\n");
        std::fflush(stdout);
    }
    return unexpected == 0 ? 0 : 1;
}
