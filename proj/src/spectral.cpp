#include "cfmimo/spectral.hpp"

#include <algorithm>
#include <cmath>

namespace cfmimo {

double bisect_multiplier(const std::function<double(double)>& power_of_mu, double p_max,
                         double tol) {
  if (!(p_max > 0.0)) throw std::invalid_argument("bisect_multiplier: p_max must be positive");
  const double p0 = power_of_mu(0.0);
  if (!std::isfinite(p0)) throw NumericError("bisect_multiplier: non-finite power at mu = 0");
  if (p0 <= p_max) return 0.0;

  double lo = 0.0;
  double hi = 1.0;
  int doublings = 0;
  while (power_of_mu(hi) > p_max) {
    lo = hi;
    hi *= 2.0;
    if (++doublings > 128) {
      throw NumericError("bisect_multiplier: no upper bracket within 128 doublings");
    }
  }
  // Endpoint check of the monotonicity assumption.
  if (power_of_mu(lo) < power_of_mu(hi)) {
    throw NumericError("bisect_multiplier: power map is not nonincreasing");
  }
  for (int it = 0; it < 2000; ++it) {
    const double p_hi = power_of_mu(hi);
    if (p_max - p_hi <= tol * p_max) break;
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (power_of_mu(mid) > p_max) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

namespace detail {

ShiftedSystem::ShiftedSystem(const CMat& c, const CMat& rhs, double null_tol) {
  if (c.rows() == 0) {
    basis_.resize(0, 0);
    eigvals_.resize(0);
    coeffs_.resize(0, rhs.cols());
    row_energy_.resize(0);
    return;
  }
  Eigen::SelfAdjointEigenSolver<CMat> eig(0.5 * (c + c.adjoint()));
  if (eig.info() != Eigen::Success) throw NumericError("ShiftedSystem: eigensolver failed");
  basis_ = eig.eigenvectors();
  eigvals_ = eig.eigenvalues();
  // Directions at or below the cutoff are exact zeros of C.  They only take
  // part once mu > 0, where the shifted system is definite.
  const double cutoff = null_tol * std::max(eigvals_.maxCoeff(), 0.0);
  for (Eigen::Index j = 0; j < eigvals_.size(); ++j) {
    if (!(eigvals_(j) > cutoff)) eigvals_(j) = 0.0;
  }
  coeffs_ = basis_.adjoint() * rhs;
  row_energy_ = coeffs_.rowwise().squaredNorm();
}

double ShiftedSystem::power(double mu) const {
  double p = 0.0;
  for (Eigen::Index j = 0; j < eigvals_.size(); ++j) {
    const double d = eigvals_(j) + mu;
    if (d > 0.0) p += row_energy_(j) / (d * d);
  }
  return p;
}

CMat ShiftedSystem::solve(double mu) const {
  RVec inv(eigvals_.size());
  for (Eigen::Index j = 0; j < inv.size(); ++j) {
    const double d = eigvals_(j) + mu;
    inv(j) = d > 0.0 ? 1.0 / d : 0.0;
  }
  return basis_ * (inv.asDiagonal() * coeffs_);
}

}  // namespace detail
}  // namespace cfmimo
