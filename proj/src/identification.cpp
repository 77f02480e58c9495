#include "ivsel/identification.hpp"

#include "ivsel/error.hpp"
#include "ivsel/simplex.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

namespace ivsel {

std::string_view to_string(WeightMode m) { return m == WeightMode::point ? "point" : "partial"; }

double WeightVector::flag_rate() const {
    if (flags.empty()) return 0.0;
    return static_cast<double>(std::count_if(flags.begin(), flags.end(),
                                             [](std::uint8_t f) { return f != 0; })) /
           static_cast<double>(flags.size());
}

double IntervalBounds::crossed_rate() const {
    if (crossed.empty()) return 0.0;
    return static_cast<double>(std::count(crossed.begin(), crossed.end(), true)) /
           static_cast<double>(crossed.size());
}

WeightVector point_weight(const NuisanceSet& nuis, double eps_denom) {
    if (!nuis.has_pooled()) throw ArgumentError("point weights need the pooled nuisances");
    if (!(eps_denom > 0)) throw ArgumentError("eps_denom must be positive");
    const std::size_t n = nuis.size();
    WeightVector out;
    out.mode = WeightMode::point;
    out.fold = nuis.fold;
    out.w.resize(n);
    out.flags.assign(n, 0);
    out.ratio.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        const double num = nuis.dyz(r) - nuis.dy(r) * nuis.z(r);
        double den = nuis.dz(r) - nuis.d(r) * nuis.z(r);
        if (std::abs(den) < eps_denom) {
            den = den < 0 ? -eps_denom : eps_denom;
            out.flags[i] |= kDenominatorFloored;
        }
        const double ratio = num / den;
        if (!std::isfinite(ratio)) throw NumericError("non-finite covariance ratio at row " + std::to_string(i + 1));
        const double clipped = std::clamp(ratio, 0.0, 1.0);
        if (clipped != ratio) out.flags[i] |= kRatioClipped;
        out.ratio[i] = ratio;
        out.w[i] = clipped - 0.5;
    }
    return out;
}

IntervalBounds partial_bounds(const NuisanceSet& nuis, const std::vector<double>& a,
                              const std::vector<double>& b) {
    if (!nuis.has_per_judge()) throw ArgumentError("partial bounds need the per-judge nuisances");
    const std::size_t n = nuis.size();
    if (a.size() != n || b.size() != n) throw ArgumentError("bound functions must align with rows");
    IntervalBounds out;
    out.fold = nuis.fold;
    out.l.resize(n);
    out.u.resize(n);
    out.crossed.assign(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(a[i] >= 0.0 && b[i] <= 1.0 && a[i] <= b[i]))
            throw ArgumentError("need 0 <= a <= b <= 1 at row " + std::to_string(i + 1));
        const auto r = static_cast<Eigen::Index>(i);
        double lo = -INFINITY, hi = INFINITY;
        for (int z = 0; z < nuis.m; ++z) {
            const double dy = nuis.dy_by_judge(r, z);
            const double unlabeled = 1.0 - nuis.d_by_judge(r, z);
            lo = std::max(lo, dy + a[i] * unlabeled);
            hi = std::min(hi, dy + b[i] * unlabeled);
        }
        lo = std::clamp(lo, a[i], b[i]);
        hi = std::clamp(hi, a[i], b[i]);
        if (lo > hi) {
            lo = hi = 0.5 * (lo + hi);
            out.crossed[i] = true;
        }
        out.l[i] = lo;
        out.u[i] = hi;
    }
    return out;
}

IntervalBounds partial_bounds(const NuisanceSet& nuis, double a, double b) {
    return partial_bounds(nuis, std::vector<double>(nuis.size(), a), std::vector<double>(nuis.size(), b));
}

WeightVector partial_weight(const IntervalBounds& bounds) {
    const std::size_t n = bounds.size();
    if (bounds.u.size() != n) throw ArgumentError("bounds: l and u lengths differ");
    WeightVector out;
    out.mode = WeightMode::partial;
    out.fold = bounds.fold;
    out.w.resize(n);
    out.flags.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(bounds.l[i] <= bounds.u[i])) throw ArgumentError("bounds: l > u at row " + std::to_string(i + 1));
        out.w[i] = std::max(bounds.u[i] - 0.5, 0.0) + std::min(bounds.l[i] - 0.5, 0.0);
    }
    return out;
}

void ObservableDistribution::validate() const {
    for (int z = 0; z < 2; ++z) {
        for (double v : {p_na[z], p_01[z], p_11[z]})
            if (!(v >= 0.0 && v <= 1.0)) throw ArgumentError("observable probability outside [0,1]");
        if (std::abs(p_na[z] + p_01[z] + p_11[z] - 1.0) > 1e-12)
            throw ArgumentError("observable probabilities for z=" + std::to_string(z) + " do not sum to 1");
    }
}

ObservableDistribution observable_from_dataset(const SelectiveDataset& ds) {
    if (ds.judge_count() != 2) throw ArgumentError("binary-instrument summary needs exactly two judges");
    double count[2] = {0, 0}, na[2] = {0, 0}, y0[2] = {0, 0};
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const int z = ds.judge()[i] - 1;
        count[z] += 1;
        if (!ds.decision()[i])
            na[z] += 1;
        else if (!*ds.outcome()[i])
            y0[z] += 1;
    }
    ObservableDistribution p;
    for (int z = 0; z < 2; ++z) {
        if (count[z] == 0) throw DataError("judge " + std::to_string(z + 1) + " has no rows");
        p.p_na[z] = na[z] / count[z];
        p.p_01[z] = y0[z] / count[z];
        p.p_11[z] = 1.0 - p.p_na[z] - p.p_01[z];
    }
    return p;
}

namespace {

// Rows: p_na,0, p_01,0, p_11,0, p_na,1, p_01,1, p_11,1, then sum(q) = 1.
// Columns: q00, q10, q20, q30, q01, q11, q21, q31 where q_kj = P(r_D = k, Y* = j)
// and r_D in {never, complier, defier, always} indexes (D(0), D(1)).
Eigen::MatrixXd response_type_system() {
    Eigen::MatrixXd a(7, 8);
    a << 1, 1, 0, 0, 1, 1, 0, 0,  //
        0, 0, 1, 1, 0, 0, 0, 0,   //
        0, 0, 0, 0, 0, 0, 1, 1,   //
        1, 0, 1, 0, 1, 0, 1, 0,   //
        0, 1, 0, 1, 0, 0, 0, 0,   //
        0, 0, 0, 0, 0, 1, 0, 1,   //
        1, 1, 1, 1, 1, 1, 1, 1;
    return a;
}

}  // namespace

MeanBounds balke_pearl_lp(const ObservableDistribution& p) {
    p.validate();
    const Eigen::MatrixXd a = response_type_system();
    Eigen::VectorXd b(7);
    const auto pv = p.as_vector();
    for (int i = 0; i < 6; ++i) b(i) = pv[static_cast<std::size_t>(i)];
    b(6) = 1.0;
    Eigen::VectorXd c = Eigen::VectorXd::Zero(8);
    c.tail(4).setOnes();  // q01 + q11 + q21 + q31 = E[Y*]

    const LpResult lo = solve_lp(c, a, b);
    if (lo.status == LpStatus::infeasible) {
        std::ostringstream msg;
        msg << "observed distribution is incompatible with the instrument model (residual "
            << lo.infeasibility << ")";
        throw NumericError(msg.str());
    }
    const LpResult hi = solve_lp(-c, a, b);
    if (lo.status != LpStatus::optimal || hi.status != LpStatus::optimal)
        throw NumericError("response-type LP did not reach an optimum");
    return {lo.objective, -hi.objective};
}

MeanBounds manski_closed_form(const ObservableDistribution& p) {
    return {std::max(p.p_11[0], p.p_11[1]),
            std::min(p.p_11[0] + p.p_na[0], p.p_11[1] + p.p_na[1])};
}

}  // namespace ivsel
