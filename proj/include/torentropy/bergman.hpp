#ifndef TORENTROPY_BERGMAN_HPP
#define TORENTROPY_BERGMAN_HPP

#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <string>
#include <vector>

#include "torentropy/numerics.hpp"
#include "torentropy/polytope.hpp"
#include "torentropy/potentials.hpp"
#include "torentropy/report.hpp"

namespace torentropy {

enum class TableMethod { Quadrature, Laplace, ClosedFormOracle };

std::string to_string(TableMethod m);
TableMethod table_method_from_string(const std::string& s);

/// Level-k table of log norming constants, indexed exactly by
/// lattice_points(P, k) in lexicographic order. Immutable once built.
class NormingTable {
 public:
  NormingTable(PotentialPair pair, LatticePointSet points, Vector log_q,
               TableMethod method);

  long k() const { return points_.k; }
  const PotentialPair& pair() const { return pair_; }
  const LatticePointSet& points() const { return points_; }
  const Vector& log_q_all() const { return log_q_; }
  TableMethod method() const { return method_; }

  double log_q(long index) const { return log_q_[index]; }
  double log_q(const IntVector& alpha) const;

  nlohmann::json to_json() const;

 private:
  PotentialPair pair_;
  LatticePointSet points_;
  Vector log_q_;
  TableMethod method_;
};

struct NormingOptions {
  QuadratureOptions quadrature;
  /// Laplace-method tables switch to quadrature for points closer to the
  /// boundary than this many facet-value units.
  double laplace_margin = 0.05;
};

/// log Q_k(alpha): log of the integral over P of
/// exp(k (u(x) + <alpha/k - x, grad u(x)>)), accumulated in the log domain.
double norming_constant(const PotentialPair& pair, long k,
                        const IntVector& alpha,
                        const QuadratureOptions& opts = {});

/// Leading Laplace term: (m/2) log(2 pi / k) - 1/2 log det hess u(alpha/k)
/// + k u(alpha/k). Requires alpha/k interior.
double norming_laplace(const PotentialPair& pair, long k,
                       const IntVector& alpha,
                       double margin = kInteriorMargin);

/// Independent cross-check of the norming constant: the squared-norm
/// integral in log coordinates, truncated to |rho_i| <= radius. Shares no
/// code path with the moment-coordinate quadrature above.
double norming_constant_rho(const PotentialPair& pair, long k,
                            const IntVector& alpha, double radius = 60.0,
                            const QuadratureOptions& opts = {});

/// True when closed-form norming constants are available for this pair
/// (fs-cp1, fs-cpm, round-sphere, ke-cp1, possibly gauge-shifted).
bool has_closed_form_norming(const PotentialPair& pair);
double norming_closed_form(const PotentialPair& pair, long k,
                           const IntVector& alpha);

NormingTable make_norming_table(const PotentialPair& pair, long k,
                                TableMethod method = TableMethod::Quadrature,
                                const NormingOptions& opts = {});

/// log of the density of states at x: log sum over alpha of
/// exp(k (u(x) + <alpha/k - x, grad u(x)>) - log Q(alpha)).
double log_density_of_states(const PotentialPair& pair,
                             const NormingTable& table, const Vector& x,
                             double margin = kInteriorMargin);

/// Callable form of the density of states at a fixed level.
struct DensityOfStates {
  PotentialPair pair;
  const NormingTable* table;
  double operator()(const Vector& x) const {
    return log_density_of_states(pair, *table, x);
  }
};

/// log P_{h^k}(alpha, x) = k (u(x) + <alpha/k - x, grad u(x)>) - log Q(alpha).
double log_weight(const PotentialPair& pair, const NormingTable& table,
                  const IntVector& alpha, const Vector& x,
                  double margin = kInteriorMargin);

struct PartitionOptions {
  long max_k = 64;  // exact-convolution cap in dimension <= 2
};

/// Lattice-path partition function at level k from a complete level-1 table:
/// log of the sum over compositions beta_1+...+beta_k = alpha of
/// prod 1/Q(beta_j), computed by k-1 discrete self-convolutions in the log
/// domain. Entries align with lattice_points(P, k); unreachable points are
/// -inf.
Vector partition_function_all(const NormingTable& level1, long k,
                              const PartitionOptions& opts = {});
double partition_function(const NormingTable& level1, long k,
                          const IntVector& alpha,
                          const PartitionOptions& opts = {});

struct BalancedOptions {
  double tol_balanced = 1e-6;
  PartitionOptions partition;
};

/// Balanced-metric verification across levels: (i) grid variation of the
/// density of states per level, (ii) grid variation of Pi_k / Pi_1^k,
/// (iii) spread of P_k(alpha) Q_k(alpha) over alpha, plus the constant-level
/// cross identity P_k Q_k = Pi_1^k / Pi_k. Verdict: balanced iff every
/// variation is within tol_balanced. Tables must share the pair's gauge;
/// tables[0] must be level 1.
CheckReport balanced_check(const PotentialPair& pair,
                           const std::vector<NormingTable>& tables,
                           const std::vector<Vector>& x_grid,
                           const BalancedOptions& opts = {});

}  // namespace torentropy

#endif  // TORENTROPY_BERGMAN_HPP
