#pragma once

#include <Eigen/Dense>

namespace ivsel {

enum class LpStatus { optimal, infeasible, unbounded };

struct LpResult {
    LpStatus status;
    double objective = 0.0;
    Eigen::VectorXd x;
    double infeasibility = 0.0;  // phase-one residual (sum of artificials)
};

/// Dense two-phase tableau simplex for: minimize c.x s.t. A x = b, x >= 0.
/// Bland's rule prevents cycling; redundant equality rows are dropped.
LpResult solve_lp(const Eigen::VectorXd& c, const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                  double tol = 1e-11);

}  // namespace ivsel
