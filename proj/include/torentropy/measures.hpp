#ifndef TORENTROPY_MEASURES_HPP
#define TORENTROPY_MEASURES_HPP

#include <nlohmann/json_fwd.hpp>

#include <string>
#include <vector>

#include "torentropy/bergman.hpp"
#include "torentropy/numerics.hpp"
#include "torentropy/potentials.hpp"
#include "torentropy/report.hpp"

namespace torentropy {

/// Discrete probability measure on P intersect (1/k)Z^m: integer support
/// points alpha (representing alpha/k) with aligned log-weights that
/// log-sum-exp to zero.
class LatticeMeasure {
 public:
  LatticeMeasure(long level, std::vector<IntVector> support, Vector log_weights,
                 bool normalize = false);

  long level() const { return level_; }
  const std::vector<IntVector>& support() const { return support_; }
  const Vector& log_weights() const { return log_weights_; }
  long size() const { return long(support_.size()); }

  /// Support point i as alpha/k.
  Vector point(long i) const { return support_[size_t(i)].cast<double>() / double(level_); }
  double weight(long i) const { return std::exp(log_weights_[i]); }

  static LatticeMeasure dirac(long level, const IntVector& alpha);

  nlohmann::json to_json() const;
  std::string to_csv() const;

 private:
  long level_;
  std::vector<IntVector> support_;
  Vector log_weights_;
};

/// mu_k^x: atoms exp(log weight - log density) on the level-k lattice.
LatticeMeasure bergman_measure(const PotentialPair& pair,
                               const NormingTable& table, const Vector& x,
                               double margin = kInteriorMargin);

/// Shannon entropy -sum p log p, accumulated from log-weights.
double entropy(const LatticeMeasure& mu);

struct Moments {
  Vector mean;
  Matrix covariance;
};
/// First and second central moments of the points alpha/k.
Moments moments(const LatticeMeasure& mu);

/// Distribution of the sum of independent draws; integer supports add, the
/// level of the result is the sum of levels.
LatticeMeasure convolve(const LatticeMeasure& a, const LatticeMeasure& b);
LatticeMeasure convolution_power(const LatticeMeasure& mu, long k);

struct ConvolutionCheckOptions {
  double tol = 1e-6;
};

/// Atomwise comparison of mu_k^x against the k-th convolution power of
/// mu_1^x over all levels and grid points. Verdict matches balanced_check
/// on the same metric.
CheckReport convolution_power_check(const PotentialPair& pair,
                                    const std::vector<NormingTable>& tables,
                                    const std::vector<Vector>& x_grid,
                                    const ConvolutionCheckOptions& opts = {});

/// Large-deviations rate function I(x) = u(x) - <x, rho0> + phi(rho0) with
/// rho0 = grad u(x0); zero at x0, convex, Hessian that of u.
class RateFunction {
 public:
  RateFunction(PotentialPair pair, Vector x0, double margin = kInteriorMargin);

  double operator()(const Vector& x) const;
  Vector grad(const Vector& x) const;
  Matrix hess(const Vector& x) const;
  const Vector& base_point() const { return x0_; }

 private:
  PotentialPair pair_;
  Vector x0_;
  Vector rho0_;
  double phi0_;  // phi(rho0) reconstructed through the pairing
};

RateFunction rate_function(const PotentialPair& pair, const Vector& x0,
                           double margin = kInteriorMargin);

struct LdpOptions {
  double interior_margin = kInteriorMargin;
  double rate_cutoff = 1.0;  // restrict to atoms with I(alpha/k) <= cutoff
};

/// max over admissible alpha of |(1/k) log mu_k^x(alpha) + I(alpha/k)|.
double ldp_residual(const PotentialPair& pair, const NormingTable& table,
                    const Vector& x0, const LdpOptions& opts = {});

/// Expectation of f under mu_k^x (the Bernstein polynomial value at x).
double bernstein(const PotentialPair& pair, const NormingTable& table,
                 const ScalarField& f, const Vector& x,
                 double margin = kInteriorMargin);

/// Right-stochastic transition matrix: row per state, entries
/// mu_N^{x_state}(alpha) over all alpha of the N-dilate; rows sum to one.
Matrix wright_fisher_matrix(const PotentialPair& pair, const NormingTable& table,
                            const std::vector<Vector>& states,
                            double margin = kInteriorMargin);

/// Chain restricted to the given lattice states (x = alpha/N must be
/// interior): entries are row-normalized over the chosen columns, so a
/// single state yields the 1x1 matrix [1].
Matrix wright_fisher_matrix(const PotentialPair& pair, const NormingTable& table,
                            const std::vector<IntVector>& lattice_states,
                            double margin = kInteriorMargin);

}  // namespace torentropy

#endif  // TORENTROPY_MEASURES_HPP
