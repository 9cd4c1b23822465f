#ifndef TORENTROPY_POTENTIALS_HPP
#define TORENTROPY_POTENTIALS_HPP

#include <nlohmann/json_fwd.hpp>

#include <memory>
#include <optional>
#include <string>

#include "torentropy/numerics.hpp"
#include "torentropy/polytope.hpp"

namespace torentropy {

/// Interior margin, in facet-value units; boundary-sensitive operations
/// reject points closer to the boundary than this.
inline constexpr double kInteriorMargin = 1e-6;

enum class PairKind { ClosedFormFamily, BergmanSum, GuilleminCanonical };

/// Gauge freedom of a potential pair: additive constant c, linear shift b of
/// the log-coordinate potential (translates the polytope by b), and integer
/// linear shift kv of the moment-coordinate potential (translates rho by kv).
struct GaugeShift {
  double c = 0.0;
  Vector b;      // empty means zero
  IntVector kv;  // empty means zero

  GaugeShift inverse(int dimension) const;
  GaugeShift compose_after(const GaugeShift& first, int dimension) const;
  bool is_identity() const;
  nlohmann::json to_json() const;
};

/// Convex function with analytic gradient and Hessian; the building block
/// for both sides of a potential pair.
struct ConvexField {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  std::function<Matrix(const Vector&)> hessian;
};

/// A convex potential phi on R^m (log coordinates) together with its
/// Legendre-dual symplectic potential u on the polytope. Immutable and
/// cheap to copy; evaluations are pure and thread-safe.
class PotentialPair {
 public:
  double phi(const Vector& rho) const;
  Vector grad_phi(const Vector& rho) const;
  Matrix hess_phi(const Vector& rho) const;

  double u(const Vector& x) const;
  Vector grad_u(const Vector& x) const;
  Matrix hess_u(const Vector& x) const;

  const DelzantPolytope& polytope() const;
  int dimension() const { return polytope().dimension(); }
  PairKind kind() const;
  const std::string& name() const;
  const GaugeShift& gauge() const;

  /// Throws unless x is interior with the given facet-value margin.
  void require_interior(const Vector& x, double margin = kInteriorMargin) const;

  /// Builds a pair from phi-side closures; the u side is derived by Newton
  /// inversion of grad phi. An omitted Hessian falls back to differencing
  /// the gradient.
  static PotentialPair from_phi(DelzantPolytope P, ConvexField phi,
                                PairKind kind, std::string name,
                                bool validate = true);
  /// Builds a pair from u-side closures; the phi side is derived.
  static PotentialPair from_u(DelzantPolytope P, ConvexField u, PairKind kind,
                              std::string name, bool validate = true);
  static PotentialPair from_closed_form(DelzantPolytope P, ConvexField phi,
                                        ConvexField u, PairKind kind,
                                        std::string name, bool validate = true);

  nlohmann::json describe() const;  // kind/name/gauge provenance

 private:
  struct Impl;
  explicit PotentialPair(std::shared_ptr<const Impl> impl);
  std::shared_ptr<const Impl> impl_;

  friend PotentialPair apply_gauge(const PotentialPair&, const GaugeShift&);
};

// Built-in families ------------------------------------------------------

PotentialPair make_fs_cp1();
PotentialPair make_fs_cpm(int m);
PotentialPair make_round_sphere(double r2);
PotentialPair make_guillemin(const DelzantPolytope& P);
/// Pair induced by level-1 norming data: phi(rho) = log sum exp(<a,rho>-logQ_a),
/// evaluated in log-sum-exp form; gradient/Hessian are the softmax mean and
/// covariance of the exponent family.
PotentialPair make_bergman_sum(const DelzantPolytope& P,
                               const LatticePointSet& level1,
                               const Vector& log_q);
/// Monge-Ampere normalized gauge on [-1,1]: phi = -log det hess(phi) holds
/// identically.
PotentialPair make_ke_cp1();
/// Non-balanced fixture on [0,2]: level-1 norming constants of the quadratic
/// round metric, perturbed by (1 + 0.1 sin a).
PotentialPair make_tampered_o2();

/// Factory by tag; accepted names are listed in the README
/// (fs-cp1, fs-cpm, round-sphere, guillemin, bergman-sum, ke-cp1, tampered-o2).
PotentialPair builtin_pair(const std::string& kind, const nlohmann::json& params);

// Operations --------------------------------------------------------------

struct LegendreOptions {
  Vector initial_point;  // empty: origin
  double newton_tol = 1e-12;
  int max_iterations = 200;
};

/// Numerical Legendre dual of a strictly convex smooth field: each query
/// solves grad f = x by safeguarded Newton. Non-convergence reports the
/// query point and last iterate.
ConvexField legendre_transform(const ConvexField& f, int dimension,
                               const LegendreOptions& opts = {});

/// x = grad phi(rho); lands strictly inside the polytope.
Vector moment_map(const PotentialPair& pair, const Vector& rho);

/// rho with grad phi(rho) = x; equals grad u(x). Rejects x within the
/// interior margin of the boundary.
Vector inverse_moment_map(const PotentialPair& pair, const Vector& x,
                          double margin = kInteriorMargin);

/// L(x) = 1/2 log det hess u(x); diverges toward the boundary.
double curvature_scalar_L(const PotentialPair& pair, const Vector& x,
                          double margin = kInteriorMargin);

PotentialPair apply_gauge(const PotentialPair& pair, const GaugeShift& g);

/// max over the grid of |-log det hess phi(rho) - a phi(rho) - <b,rho> - c|
/// (the real Monge-Ampere form of the Einstein gauge identity).
double ke_gauge_residual(const PotentialPair& pair, double a, const Vector& b,
                         double c, const std::vector<Vector>& rho_grid);

/// Uniform grid |rho_i| <= radius with n points per axis.
std::vector<Vector> make_rho_grid(int dimension, double radius, int n);

}  // namespace torentropy

#endif  // TORENTROPY_POTENTIALS_HPP
