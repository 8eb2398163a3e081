#pragma once

// Gauss-Legendre rules, rescaled to [0, 1].  All integrands in this project
// are smooth on the closed interval (removable singularities are evaluated
// away from the endpoints), so node doubling is the convergence certificate.

#include <Eigen/Dense>

namespace splitform {

struct GaussLegendre {
  Eigen::VectorXd nodes;    // strictly inside (0, 1)
  Eigen::VectorXd weights;  // sum to 1
};

GaussLegendre gauss_legendre(int n);

}  // namespace splitform
