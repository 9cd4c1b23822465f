#include "torentropy/polytope.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace torentropy {

namespace {

using int128 = __int128;

long long gcd_ll(long long a, long long b) {
  a = std::llabs(a);
  b = std::llabs(b);
  while (b != 0) {
    const long long t = a % b;
    a = b;
    b = t;
  }
  return a;
}

// Exact integer determinant by fraction-free (Bareiss) elimination.
int128 integer_determinant(std::vector<std::vector<int128>> m) {
  const size_t n = m.size();
  int128 prev = 1;
  int sign = 1;
  for (size_t k = 0; k + 1 < n; ++k) {
    if (m[k][k] == 0) {
      size_t swap_row = k + 1;
      while (swap_row < n && m[swap_row][k] == 0) ++swap_row;
      if (swap_row == n) return 0;
      std::swap(m[k], m[swap_row]);
      sign = -sign;
    }
    for (size_t i = k + 1; i < n; ++i) {
      for (size_t j = k + 1; j < n; ++j) {
        m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) / prev;
      }
      m[i][k] = 0;
    }
    prev = m[k][k];
  }
  return sign * m[n - 1][n - 1];
}

int128 normal_matrix_det(const std::vector<const IntVector*>& normals) {
  const size_t n = normals.size();
  std::vector<std::vector<int128>> m(n, std::vector<int128>(n));
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) m[i][j] = (*normals[i])[long(j)];
  return integer_determinant(std::move(m));
}

// Enumerates subsets of size r from {0..n-1} in lexicographic order.
template <typename Fn>
void for_each_subset(int n, int r, Fn&& fn) {
  if (r > n || r < 0) return;
  std::vector<int> idx(size_t(r));
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    fn(idx);
    int i = r - 1;
    while (i >= 0 && idx[size_t(i)] == n - r + i) --i;
    if (i < 0) break;
    ++idx[size_t(i)];
    for (int j = i + 1; j < r; ++j) idx[size_t(j)] = idx[size_t(j - 1)] + 1;
  }
}

// A double is the dyadic rational num / 2^shift (shift >= 0) exactly,
// provided the exponent is in a sane range.
bool dyadic_decompose(double a, int128& num, int& shift) {
  if (!std::isfinite(a)) return false;
  int exp = 0;
  const double mant = std::frexp(a, &exp);            // a = mant * 2^exp
  const double scaled = std::ldexp(mant, 53);         // integer by IEEE754
  if (std::abs(exp) > 400) return false;
  num = int128(static_cast<long long>(scaled));
  const int e = exp - 53;  // a = num * 2^e
  if (e >= 0) {
    for (int i = 0; i < e; ++i) num *= 2;
    shift = 0;
  } else {
    shift = -e;
  }
  return true;
}

}  // namespace

DelzantPolytope::DelzantPolytope(int dimension, std::vector<Facet> facets)
    : dim_(dimension), facets_(std::move(facets)) {
  validate_and_build();
}

void DelzantPolytope::validate_and_build() {
  if (dim_ < 1) throw std::invalid_argument("polytope: dimension must be >= 1");
  if (long(facets_.size()) < dim_ + 1)
    throw std::invalid_argument("polytope: needs at least dim+1 facets");
  for (const Facet& f : facets_) {
    if (f.normal.size() != dim_)
      throw std::invalid_argument("polytope: facet normal has wrong dimension");
    long long g = 0;
    for (long i = 0; i < dim_; ++i) g = gcd_ll(g, f.normal[i]);
    if (g != 1)
      throw std::invalid_argument("polytope: facet normal is not primitive");
  }

  // Unboundedness = nontrivial recession cone. Extreme rays lie in the
  // intersection of dim-1 independent facet hyperplanes; integer candidates
  // are available up to dim 3.
  const int d = int(facets_.size());
  auto recession_ray = [&](const Vector& dir) {
    if (dir.lpNorm<Eigen::Infinity>() < 1e-12) return false;
    for (const Facet& f : facets_) {
      double s = 0.0;
      for (long i = 0; i < dim_; ++i) s += dir[i] * double(f.normal[i]);
      if (s < -1e-9 * dir.lpNorm<Eigen::Infinity>()) return false;
    }
    return true;
  };
  std::vector<Vector> ray_candidates;
  if (dim_ == 1) {
    Vector e(1);
    e[0] = 1.0;
    ray_candidates.push_back(e);
  } else if (dim_ == 2) {
    for (const Facet& f : facets_) {
      Vector r(2);
      r[0] = -double(f.normal[1]);
      r[1] = double(f.normal[0]);
      ray_candidates.push_back(r);
    }
  } else if (dim_ == 3) {
    for (size_t a = 0; a < facets_.size(); ++a)
      for (size_t b = a + 1; b < facets_.size(); ++b) {
        const IntVector& u = facets_[a].normal;
        const IntVector& v = facets_[b].normal;
        Vector r(3);
        r[0] = double(u[1]) * v[2] - double(u[2]) * v[1];
        r[1] = double(u[2]) * v[0] - double(u[0]) * v[2];
        r[2] = double(u[0]) * v[1] - double(u[1]) * v[0];
        ray_candidates.push_back(r);
      }
  } else {
    throw std::invalid_argument(
        "polytope: geometric construction supports dimension <= 3");
  }
  for (const Vector& r : ray_candidates) {
    if (recession_ray(r) || recession_ray(Vector(-r)))
      throw std::invalid_argument("polytope: unbounded (nontrivial recession cone)");
  }

  // Vertex enumeration over dim-subsets of facets.
  double scale = 1.0;
  for (const Facet& f : facets_) scale = std::max(scale, std::abs(f.offset));
  const double tol = 1e-9 * scale;
  std::vector<std::vector<int>> vertex_active;
  for_each_subset(d, dim_, [&](const std::vector<int>& idx) {
    Matrix A(dim_, dim_);
    Vector rhs(dim_);
    for (int r = 0; r < dim_; ++r) {
      const Facet& f = facets_[size_t(idx[size_t(r)])];
      for (long c = 0; c < dim_; ++c) A(r, c) = double(f.normal[c]);
      rhs[r] = f.offset;
    }
    Eigen::FullPivLU<Matrix> lu(A);
    if (!lu.isInvertible()) return;
    Vector x = lu.solve(rhs);
    Vector vals = facet_values(x);
    if (vals.minCoeff() < -tol) return;
    for (const Vector& v : vertices_)
      if ((v - x).lpNorm<Eigen::Infinity>() < 10 * tol) return;
    std::vector<int> active;
    for (int r = 0; r < d; ++r)
      if (std::abs(vals[r]) <= tol) active.push_back(r);
    vertices_.push_back(x);
    vertex_active.push_back(active);
  });
  if (vertices_.empty())
    throw std::invalid_argument("polytope: empty (no vertices)");

  // Delzant condition: exactly dim facets meet at each vertex, and their
  // normals have determinant +-1.
  for (size_t v = 0; v < vertices_.size(); ++v) {
    const auto& active = vertex_active[v];
    if (long(active.size()) != dim_) {
      std::ostringstream os;
      os << "polytope: vertex " << v << " lies on " << active.size()
         << " facets, expected " << dim_;
      throw std::invalid_argument(os.str());
    }
    std::vector<const IntVector*> normals;
    for (int r : active) normals.push_back(&facets_[size_t(r)].normal);
    const int128 det = normal_matrix_det(normals);
    if (det != 1 && det != -1)
      throw std::invalid_argument(
          "polytope: vertex normals are not a lattice basis (Delzant condition)");
  }

  // Nonempty interior.
  Vector centroid = Vector::Zero(dim_);
  for (const Vector& v : vertices_) centroid += v;
  centroid /= double(vertices_.size());
  if (min_facet_value(centroid) <= tol)
    throw std::invalid_argument("polytope: empty interior");

  // Facet vertex lists; for dim 2 order each facet's vertices along the edge.
  facet_vertices_.assign(facets_.size(), {});
  for (size_t v = 0; v < vertices_.size(); ++v)
    for (int r : vertex_active[v])
      facet_vertices_[size_t(r)].push_back(vertices_[v]);
  if (dim_ == 2) {
    for (auto& fv : facet_vertices_) {
      std::sort(fv.begin(), fv.end(), [](const Vector& a, const Vector& b) {
        return a[0] != b[0] ? a[0] < b[0] : a[1] < b[1];
      });
    }
  } else if (dim_ == 3) {
    // Order facet polygons by angle around the facet centroid.
    auto cross = [](const Vector& a, const Vector& b) {
      Vector c(3);
      c[0] = a[1] * b[2] - a[2] * b[1];
      c[1] = a[2] * b[0] - a[0] * b[2];
      c[2] = a[0] * b[1] - a[1] * b[0];
      return c;
    };
    for (auto& fv : facet_vertices_) {
      if (fv.size() < 3) continue;
      Vector fc = Vector::Zero(3);
      for (const Vector& p : fv) fc += p;
      fc /= double(fv.size());
      Vector e1 = (fv[0] - fc).normalized();
      Vector n = cross(e1, fv[1] - fc).normalized();
      Vector e2 = cross(n, e1);
      std::sort(fv.begin(), fv.end(), [&](const Vector& p, const Vector& q) {
        const double ap = std::atan2((p - fc).dot(e2), (p - fc).dot(e1));
        const double aq = std::atan2((q - fc).dot(e2), (q - fc).dot(e1));
        return ap < aq;
      });
    }
  }

  // Fan decomposition from the vertex centroid; exact volume and first
  // moment for convex polytopes.
  double total = 0.0;
  Vector moment = Vector::Zero(dim_);
  double factorial = 1.0;
  for (int i = 2; i <= dim_; ++i) factorial *= i;
  if (dim_ == 1) {
    std::vector<Vector> sorted = vertices_;
    std::sort(sorted.begin(), sorted.end(),
              [](const Vector& a, const Vector& b) { return a[0] < b[0]; });
    fan_simplices_.push_back({sorted.front(), sorted.back()});
    total = sorted.back()[0] - sorted.front()[0];
    moment = 0.5 * (sorted.back() + sorted.front()) * total;
  } else {
    auto add_simplex = [&](const std::vector<Vector>& simplex) {
      Matrix edges(dim_, dim_);
      for (int c = 0; c < dim_; ++c)
        edges.col(c) = simplex[size_t(c) + 1] - simplex[0];
      const double vol = std::abs(edges.determinant()) / factorial;
      if (vol <= 0.0) return;
      Vector bary = Vector::Zero(dim_);
      for (const Vector& p : simplex) bary += p;
      bary /= double(dim_ + 1);
      fan_simplices_.push_back(simplex);
      total += vol;
      moment += vol * bary;
    };
    for (size_t r = 0; r < facets_.size(); ++r) {
      const auto& fv = facet_vertices_[r];
      if (long(fv.size()) < dim_) continue;
      if (dim_ == 2) {
        add_simplex({centroid, fv[0], fv[1]});
      } else {  // dim 3: fan the ordered facet polygon from its first vertex
        for (size_t j = 1; j + 1 < fv.size(); ++j)
          add_simplex({centroid, fv[0], fv[j], fv[j + 1]});
      }
    }
  }
  volume_ = total;
  center_of_mass_ = moment / total;
}

Vector DelzantPolytope::facet_values(const Vector& x) const {
  if (x.size() != dim_)
    throw std::invalid_argument("facet_values: point has wrong dimension");
  Vector out(long(facets_.size()));
  for (size_t r = 0; r < facets_.size(); ++r) {
    double s = -facets_[r].offset;
    for (long i = 0; i < dim_; ++i) s += x[i] * double(facets_[r].normal[i]);
    out[long(r)] = s;
  }
  return out;
}

double DelzantPolytope::min_facet_value(const Vector& x) const {
  return facet_values(x).minCoeff();
}

bool DelzantPolytope::contains(const Vector& x, double margin) const {
  return min_facet_value(x) >= margin;
}

bool DelzantPolytope::lattice_member(const IntVector& alpha, long k) const {
  if (alpha.size() != dim_)
    throw std::invalid_argument("lattice_member: point has wrong dimension");
  for (const Facet& f : facets_) {
    int128 dot = 0;
    for (long i = 0; i < dim_; ++i)
      dot += int128(alpha[i]) * int128(f.normal[i]);
    // Test dot >= k * offset exactly: offset = num / 2^shift.
    int128 num;
    int shift;
    if (dyadic_decompose(f.offset, num, shift)) {
      int128 lhs = dot;
      for (int s = 0; s < shift; ++s) lhs *= 2;
      if (lhs < int128(k) * num) return false;
    } else {
      if (double(static_cast<long long>(dot)) < double(k) * f.offset) return false;
    }
  }
  return true;
}

long LatticePointSet::index_of(const IntVector& alpha) const {
  auto cmp = [](const IntVector& a, const IntVector& b) {
    for (long i = 0; i < a.size(); ++i) {
      if (a[i] != b[i]) return a[i] < b[i];
    }
    return false;
  };
  auto it = std::lower_bound(points.begin(), points.end(), alpha, cmp);
  if (it == points.end()) return -1;
  if (*it == alpha) return long(it - points.begin());
  return -1;
}

LatticePointSet lattice_points(const DelzantPolytope& P, long k) {
  if (k < 1) throw std::invalid_argument("lattice_points: k must be >= 1");
  const int m = P.dimension();
  Vector lo = Vector::Constant(m, std::numeric_limits<double>::infinity());
  Vector hi = Vector::Constant(m, -std::numeric_limits<double>::infinity());
  for (const Vector& v : P.vertices()) {
    lo = lo.cwiseMin(v * double(k));
    hi = hi.cwiseMax(v * double(k));
  }
  IntVector lo_i(m), hi_i(m);
  for (int i = 0; i < m; ++i) {
    lo_i[i] = int(std::ceil(lo[i] - 1e-9));
    hi_i[i] = int(std::floor(hi[i] + 1e-9));
  }
  LatticePointSet out;
  out.k = k;
  IntVector alpha = lo_i;
  if ((hi_i - lo_i).minCoeff() < 0) return out;
  while (true) {
    if (P.lattice_member(alpha, k)) out.points.push_back(alpha);
    int i = m - 1;
    while (i >= 0) {
      if (alpha[i] < hi_i[i]) {
        ++alpha[i];
        for (int j = i + 1; j < m; ++j) alpha[j] = lo_i[j];
        break;
      }
      --i;
    }
    if (i < 0) break;
  }
  return out;
}

double volume(const DelzantPolytope& P) { return P.volume(); }

Vector center_of_mass(const DelzantPolytope& P) { return P.center_of_mass(); }

double boundary_integral(const DelzantPolytope& P, const ScalarField& g,
                         SurfaceMeasure measure,
                         const SignedQuadOptions& opts) {
  const int m = P.dimension();
  auto sample = [&](size_t facet, const Vector& x) {
    const double val = g(x);
    if (!std::isfinite(val)) {
      std::ostringstream os;
      os << "boundary_integral: non-finite sample on facet " << facet
         << " at point (";
      for (long i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
      os << ")";
      throw std::runtime_error(os.str());
    }
    return val;
  };
  double total = 0.0;
  if (m == 1) {
    for (size_t r = 0; r < P.facets().size(); ++r) {
      const auto& fv = P.facet_vertices()[r];
      if (fv.empty()) continue;
      total += sample(r, fv.front());  // |normal| = 1 in dimension 1
    }
    return total;
  }
  if (m != 2)
    throw std::invalid_argument("boundary_integral: dimension <= 2 only");
  for (size_t r = 0; r < P.facets().size(); ++r) {
    const auto& fv = P.facet_vertices()[r];
    if (fv.size() != 2) continue;
    const Vector a = fv[0], b = fv[1];
    const double len = (b - a).norm();
    double density = 1.0;
    if (measure == SurfaceMeasure::LatticeNormalized) {
      density = 1.0 / P.facets()[r].normal.cast<double>().norm();
    }
    auto line = [&](double t) { return sample(r, Vector(a + t * (b - a))); };
    total += len * density * integrate_interval(line, 0.0, 1.0, opts);
  }
  return total;
}

double polytope_integral(const DelzantPolytope& P, const ScalarField& g,
                         const SignedQuadOptions& opts, double collar_width) {
  const int m = P.dimension();
  auto f = [&](const Vector& x) { return g(x); };
  if (m == 1) {
    const double a = P.vertices()[0][0];
    const double b = P.vertices()[1][0];
    const double lo = std::min(a, b), hi = std::max(a, b);
    auto f1 = [&](double t) {
      Vector x(1);
      x[0] = t;
      return g(x);
    };
    // Collar splits seed the grading at both endpoints.
    const double w = collar_width * (hi - lo);
    return integrate_interval(f1, lo, lo + w, opts) +
           integrate_interval(f1, lo + w, hi - w, opts) +
           integrate_interval(f1, hi - w, hi, opts);
  }
  if (m != 2)
    throw std::invalid_argument("polytope_integral: dimension <= 2 only");
  double total = 0.0;
  for (const auto& simplex : P.fan_simplices()) {
    total += integrate_triangle_nested(f, simplex[0], simplex[1], simplex[2],
                                       opts, collar_width);
  }
  return total;
}

nlohmann::json DelzantPolytope::to_json() const {
  nlohmann::json j;
  j["dimension"] = dim_;
  j["facets"] = nlohmann::json::array();
  for (const Facet& f : facets_) {
    nlohmann::json jf;
    jf["normal"] = std::vector<int>(f.normal.data(), f.normal.data() + f.normal.size());
    jf["offset"] = f.offset;
    j["facets"].push_back(jf);
  }
  return j;
}

DelzantPolytope DelzantPolytope::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("dimension") || !j.contains("facets"))
    throw std::invalid_argument("polytope JSON: expected {dimension, facets}");
  const int m = j.at("dimension").get<int>();
  std::vector<Facet> facets;
  for (const auto& jf : j.at("facets")) {
    Facet f;
    const auto nv = jf.at("normal").get<std::vector<int>>();
    f.normal = Eigen::Map<const IntVector>(nv.data(), long(nv.size()));
    f.offset = jf.at("offset").get<double>();
    facets.push_back(std::move(f));
  }
  return DelzantPolytope(m, std::move(facets));
}

DelzantPolytope DelzantPolytope::named(const std::string& name) {
  auto make_interval = [](double lo, double hi) {
    Facet left, right;
    left.normal = IntVector::Constant(1, 1);
    left.offset = lo;
    right.normal = IntVector::Constant(1, -1);
    right.offset = -hi;
    return DelzantPolytope(1, {left, right});
  };
  if (name == "interval01") return make_interval(0.0, 1.0);
  if (name.rfind("interval_sym(", 0) == 0 && name.back() == ')') {
    const double r2 = std::stod(name.substr(13, name.size() - 14));
    if (!(r2 > 0.0))
      throw std::invalid_argument("interval_sym: r2 must be positive");
    return make_interval(-r2, r2);
  }
  if (name.rfind("simplex(", 0) == 0 && name.back() == ')') {
    const int m = std::stoi(name.substr(8, name.size() - 9));
    if (m < 1) throw std::invalid_argument("simplex: dimension must be >= 1");
    std::vector<Facet> facets;
    for (int i = 0; i < m; ++i) {
      Facet f;
      f.normal = IntVector::Zero(m);
      f.normal[i] = 1;
      f.offset = 0.0;
      facets.push_back(f);
    }
    Facet diag;
    diag.normal = IntVector::Constant(m, -1);
    diag.offset = -1.0;
    facets.push_back(diag);
    return DelzantPolytope(m, std::move(facets));
  }
  throw std::invalid_argument("unknown polytope name: " + name);
}

}  // namespace torentropy
