#ifndef TORENTROPY_POLYTOPE_HPP
#define TORENTROPY_POLYTOPE_HPP

#include <nlohmann/json_fwd.hpp>

#include <string>
#include <vector>

#include "torentropy/numerics.hpp"

namespace torentropy {

/// One linear inequality l(x) = <x, normal> - offset >= 0 with a primitive
/// integer inward normal.
struct Facet {
  IntVector normal;
  double offset = 0.0;
};

/// Convention for the surface measure d(sigma) used by boundary integrals.
/// LatticeNormalized divides facet Lebesgue measure by the Euclidean norm of
/// the primitive normal; Euclidean uses plain facet Lebesgue measure.
enum class SurfaceMeasure { LatticeNormalized, Euclidean };

/// Compact convex polytope cut out by facet inequalities, validated at
/// construction: primitive normals, boundedness, nonempty interior, and the
/// vertex condition (exactly dim facets meet at each vertex with unimodular
/// normal matrix).
class DelzantPolytope {
 public:
  DelzantPolytope(int dimension, std::vector<Facet> facets);

  int dimension() const { return dim_; }
  const std::vector<Facet>& facets() const { return facets_; }
  const std::vector<Vector>& vertices() const { return vertices_; }

  /// (l_1(x), ..., l_d(x)); x is in the closed polytope iff all >= 0.
  Vector facet_values(const Vector& x) const;
  double min_facet_value(const Vector& x) const;
  bool contains(const Vector& x, double margin = 0.0) const;

  /// Exact membership of alpha/k, decided in integer arithmetic (doubles are
  /// dyadic rationals, so no floating tolerance is involved).
  bool lattice_member(const IntVector& alpha, long k) const;

  double volume() const { return volume_; }
  Vector center_of_mass() const { return center_of_mass_; }

  /// Simplices of the fan decomposition from the vertex centroid; each entry
  /// lists dim+1 vertices. Shared by volume, center of mass and quadrature.
  const std::vector<std::vector<Vector>>& fan_simplices() const {
    return fan_simplices_;
  }
  /// Vertices of each facet, in facet order (for dim <= 2).
  const std::vector<std::vector<Vector>>& facet_vertices() const {
    return facet_vertices_;
  }

  nlohmann::json to_json() const;
  static DelzantPolytope from_json(const nlohmann::json& j);

  /// Built-in shapes: "interval01", "interval_sym(r2)", "simplex(m)".
  static DelzantPolytope named(const std::string& name);

 private:
  void validate_and_build();

  int dim_ = 0;
  std::vector<Facet> facets_;
  std::vector<Vector> vertices_;
  std::vector<std::vector<Vector>> facet_vertices_;
  std::vector<std::vector<Vector>> fan_simplices_;
  double volume_ = 0.0;
  Vector center_of_mass_;
};

/// Integer lattice points of the k-th dilate, in lexicographic order. All
/// downstream tables index by this order.
struct LatticePointSet {
  long k = 1;
  std::vector<IntVector> points;

  long size() const { return long(points.size()); }
  /// Index of alpha in the lexicographic order, or -1.
  long index_of(const IntVector& alpha) const;
};

LatticePointSet lattice_points(const DelzantPolytope& P, long k);

double volume(const DelzantPolytope& P);
Vector center_of_mass(const DelzantPolytope& P);

/// Integral of g over the boundary of P with the chosen surface measure.
/// A non-finite sample raises an error naming the facet and the point.
double boundary_integral(const DelzantPolytope& P, const ScalarField& g,
                         SurfaceMeasure measure = SurfaceMeasure::LatticeNormalized,
                         const SignedQuadOptions& opts = {});

/// Signed integral of g over the interior of P (dim <= 2), graded toward the
/// boundary so integrable log singularities converge.
double polytope_integral(const DelzantPolytope& P, const ScalarField& g,
                         const SignedQuadOptions& opts = {},
                         double collar_width = 1e-3);

}  // namespace torentropy

#endif  // TORENTROPY_POLYTOPE_HPP
