#include "ivsel/simplex.hpp"

#include "ivsel/error.hpp"

#include <cmath>
#include <vector>

namespace ivsel {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Tableau layout: rows 0..m-1 are constraints, row m holds reduced costs;
// the last column is the right-hand side (objective row: minus the value).
struct Tableau {
    MatrixXd t;
    std::vector<Index> basis;

    Index rows() const { return t.rows() - 1; }
    Index cols() const { return t.cols() - 1; }

    void pivot(Index r, Index c) {
        t.row(r) /= t(r, c);
        for (Index i = 0; i < t.rows(); ++i) {
            if (i == r) continue;
            const double f = t(i, c);
            if (f != 0.0) t.row(i) -= f * t.row(r);
        }
        basis[static_cast<std::size_t>(r)] = c;
    }

    // Returns false when the problem is unbounded along an entering column.
    bool optimize(Index usable_cols, double tol) {
        for (int iter = 0; iter < 10000; ++iter) {
            Index enter = -1;
            for (Index j = 0; j < usable_cols; ++j) {
                if (t(rows(), j) < -tol) {
                    enter = j;
                    break;
                }
            }
            if (enter < 0) return true;
            Index leave = -1;
            double best = 0.0;
            for (Index i = 0; i < rows(); ++i) {
                if (t(i, enter) <= tol) continue;
                const double ratio = t(i, cols()) / t(i, enter);
                if (leave < 0 || ratio < best - tol ||
                    (std::abs(ratio - best) <= tol &&
                     basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)])) {
                    leave = i;
                    best = ratio;
                }
            }
            if (leave < 0) return false;
            pivot(leave, enter);
        }
        throw NumericError("simplex: iteration limit reached");
    }
};

}  // namespace

LpResult solve_lp(const VectorXd& c, const MatrixXd& a, const VectorXd& b, double tol) {
    const Index m = a.rows();
    const Index n = a.cols();
    if (c.size() != n || b.size() != m) throw ArgumentError("solve_lp: dimension mismatch");

    Tableau tab;
    tab.t = MatrixXd::Zero(m + 1, n + m + 1);
    tab.basis.resize(static_cast<std::size_t>(m));
    for (Index i = 0; i < m; ++i) {
        const double sgn = b(i) < 0 ? -1.0 : 1.0;
        tab.t.row(i).head(n) = sgn * a.row(i);
        tab.t(i, n + i) = 1.0;
        tab.t(i, n + m) = sgn * b(i);
        tab.basis[static_cast<std::size_t>(i)] = n + i;
    }
    // Phase one: minimize the sum of artificials.
    for (Index i = 0; i < m; ++i) {
        tab.t.row(m).head(n) -= tab.t.row(i).head(n);
        tab.t(m, n + m) -= tab.t(i, n + m);
    }
    tab.optimize(n + m, tol);
    const double residual = -tab.t(m, n + m);
    if (residual > 1e-9) {
        LpResult r{LpStatus::infeasible, 0.0, VectorXd::Zero(n), residual};
        return r;
    }

    // Drive artificials out of the basis; rows where that is impossible are
    // linear combinations of others and are dropped.
    std::vector<Index> keep;
    for (Index i = 0; i < m; ++i) {
        if (tab.basis[static_cast<std::size_t>(i)] >= n) {
            Index col = -1;
            for (Index j = 0; j < n; ++j)
                if (std::abs(tab.t(i, j)) > 1e-9) {
                    col = j;
                    break;
                }
            if (col >= 0) tab.pivot(i, col);
        }
    }
    for (Index i = 0; i < m; ++i)
        if (tab.basis[static_cast<std::size_t>(i)] < n) keep.push_back(i);

    Tableau p2;
    const auto rows = static_cast<Index>(keep.size());
    p2.t = MatrixXd::Zero(rows + 1, n + 1);
    for (Index r = 0; r < rows; ++r) {
        const Index i = keep[static_cast<std::size_t>(r)];
        p2.t.row(r).head(n) = tab.t.row(i).head(n);
        p2.t(r, n) = tab.t(i, n + m);
        p2.basis.push_back(tab.basis[static_cast<std::size_t>(i)]);
    }
    p2.t.row(rows).head(n) = c.transpose();
    for (Index r = 0; r < rows; ++r) {
        const Index bcol = p2.basis[static_cast<std::size_t>(r)];
        const double cb = c(bcol);
        if (cb != 0.0) p2.t.row(rows) -= cb * p2.t.row(r);
    }
    LpResult result{LpStatus::optimal, 0.0, VectorXd::Zero(n), residual};
    if (!p2.optimize(n, tol)) {
        result.status = LpStatus::unbounded;
        return result;
    }
    for (Index r = 0; r < rows; ++r) {
        result.x(p2.basis[static_cast<std::size_t>(r)]) = p2.t(r, n);
    }
    result.objective = c.dot(result.x);
    return result;
}

}  // namespace ivsel
