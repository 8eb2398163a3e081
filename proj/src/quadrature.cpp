#include "splitform/quadrature.hpp"

#include <cmath>

#include "splitform/errors.hpp"

namespace splitform {

// Golub-Welsch: nodes are eigenvalues of the Jacobi matrix of the Legendre
// recurrence, weights come from the first eigenvector components.
GaussLegendre gauss_legendre(int n) {
  if (n < 1) throw PreconditionError("gauss_legendre: need at least one node");
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    J(k - 1, k) = b;
    J(k, k - 1) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  GaussLegendre out;
  out.nodes.resize(n);
  out.weights.resize(n);
  for (int k = 0; k < n; ++k) {
    out.nodes[k] = 0.5 * (es.eigenvalues()[k] + 1.0);
    const double v0 = es.eigenvectors()(0, k);
    out.weights[k] = v0 * v0;  // 2 v0^2 on [-1,1], halved by the rescale
  }
  return out;
}

}  // namespace splitform
