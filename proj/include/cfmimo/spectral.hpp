#pragma once

#include <functional>

#include "cfmimo/types.hpp"

namespace cfmimo {

/// Smallest mu >= 0 with power_of_mu(mu) <= p_max, for a continuous
/// nonincreasing power map.  Returns 0 when the constraint is inactive;
/// otherwise brackets by doubling from 1 and bisects until
/// p_max - power(mu) <= tol * p_max.  The returned multiplier is always on the
/// feasible side.  Throws NumericError when no bracket is found in 128
/// doublings.
double bisect_multiplier(const std::function<double(double)>& power_of_mu, double p_max,
                         double tol);

namespace detail {

/// Family of Hermitian systems (C + mu I) Y = R sharing one eigendecomposition
/// of C.  Eigenvalues at or below null_tol * lambda_max are treated as exact
/// zeros: they are skipped at mu = 0, so Y(0) is the minimum-norm solution,
/// and enter as 1 / mu once mu > 0.
class ShiftedSystem {
 public:
  ShiftedSystem(const CMat& c, const CMat& rhs, double null_tol);

  /// ||Y(mu)||_F^2.
  double power(double mu) const;
  CMat solve(double mu) const;

 private:
  CMat basis_;
  RVec eigvals_;
  CMat coeffs_;        // basis^H R
  RVec row_energy_;    // squared row norms of coeffs_
};

}  // namespace detail
}  // namespace cfmimo
