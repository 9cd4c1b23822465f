#include "torentropy/potentials.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace torentropy {

namespace {

Vector zero_if_empty(const Vector& v, int m) {
  return v.size() == m ? v : Vector(Vector::Zero(m));
}

IntVector izero_if_empty(const IntVector& v, int m) {
  return v.size() == m ? v : IntVector(IntVector::Zero(m));
}

double stable_log1p_exp(double t) {
  // log(1 + e^t)
  return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

}  // namespace

GaugeShift GaugeShift::inverse(int m) const {
  GaugeShift inv;
  const Vector bb = zero_if_empty(b, m);
  const IntVector kk = izero_if_empty(kv, m);
  inv.b = -bb;
  inv.kv = -kk;
  inv.c = -c + bb.dot(kk.cast<double>());
  return inv;
}

GaugeShift GaugeShift::compose_after(const GaugeShift& first, int m) const {
  // first is applied to the pair, then *this. Composition law:
  //   phi''(rho) = phi((rho - kv1) - kv2) + (b1 + b2) . (rho - kv1 - kv2)
  //                + c1 + c2 + b2 . kv1
  GaugeShift out;
  const Vector b1 = zero_if_empty(first.b, m), b2 = zero_if_empty(b, m);
  const IntVector k1 = izero_if_empty(first.kv, m), k2 = izero_if_empty(kv, m);
  out.b = b1 + b2;
  out.kv = k1 + k2;
  out.c = first.c + c + b2.dot(k1.cast<double>());
  return out;
}

bool GaugeShift::is_identity() const {
  if (c != 0.0) return false;
  if (b.size() && b.lpNorm<Eigen::Infinity>() != 0.0) return false;
  if (kv.size() && kv.lpNorm<Eigen::Infinity>() != 0) return false;
  return true;
}

nlohmann::json GaugeShift::to_json() const {
  nlohmann::json j;
  j["c"] = c;
  j["b"] = std::vector<double>(b.data(), b.data() + b.size());
  j["kv"] = std::vector<int>(kv.data(), kv.data() + kv.size());
  return j;
}

struct PotentialPair::Impl {
  DelzantPolytope polytope;
  ConvexField phi;
  ConvexField u;
  PairKind kind = PairKind::ClosedFormFamily;
  std::string name;
  GaugeShift gauge;

  Impl(DelzantPolytope P, ConvexField phi_in, ConvexField u_in, PairKind k,
       std::string n)
      : polytope(std::move(P)),
        phi(std::move(phi_in)),
        u(std::move(u_in)),
        kind(k),
        name(std::move(n)) {}
};

PotentialPair::PotentialPair(std::shared_ptr<const Impl> impl)
    : impl_(std::move(impl)) {}

double PotentialPair::phi(const Vector& rho) const { return impl_->phi.value(rho); }
Vector PotentialPair::grad_phi(const Vector& rho) const { return impl_->phi.gradient(rho); }
Matrix PotentialPair::hess_phi(const Vector& rho) const { return impl_->phi.hessian(rho); }
double PotentialPair::u(const Vector& x) const { return impl_->u.value(x); }
Vector PotentialPair::grad_u(const Vector& x) const { return impl_->u.gradient(x); }
Matrix PotentialPair::hess_u(const Vector& x) const { return impl_->u.hessian(x); }
const DelzantPolytope& PotentialPair::polytope() const { return impl_->polytope; }
PairKind PotentialPair::kind() const { return impl_->kind; }
const std::string& PotentialPair::name() const { return impl_->name; }
const GaugeShift& PotentialPair::gauge() const { return impl_->gauge; }

void PotentialPair::require_interior(const Vector& x, double margin) const {
  if (polytope().min_facet_value(x) < margin) {
    std::ostringstream os;
    os << name() << ": point too close to the polytope boundary (margin "
       << margin << ")";
    throw std::domain_error(os.str());
  }
}

namespace {

void validate_pair(const DelzantPolytope& P, const ConvexField& phi,
                   const ConvexField& u, const std::string& name) {
  // Sparse sanity grid; property tests cover the full invariants.
  const int m = P.dimension();
  std::vector<double> ticks = {-1.5, 0.0, 1.5};
  std::vector<Vector> grid;
  if (m == 1) {
    for (double t : ticks) grid.push_back(Vector::Constant(1, t));
  } else {
    for (double t0 : ticks)
      for (double t1 : ticks) {
        Vector rho = Vector::Zero(m);
        rho[0] = t0;
        rho[1] = t1;
        grid.push_back(rho);
      }
  }
  for (const Vector& rho : grid) {
    const Matrix H = phi.hessian(rho);
    Eigen::LLT<Matrix> llt(H);
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument(name + ": hess phi not positive definite");
    const Vector x = phi.gradient(rho);
    if (P.min_facet_value(x) <= 0.0)
      throw std::invalid_argument(name + ": moment image leaves the polytope interior");
    const double pairing = u.value(x) + phi.value(rho) - x.dot(rho);
    if (std::abs(pairing) > 1e-7 * std::max(1.0, std::abs(phi.value(rho))))
      throw std::invalid_argument(name + ": Legendre pairing violated");
    const Matrix Hu = u.hessian(x);
    if (std::abs((H * Hu).determinant() - 1.0) > 1e-5)
      throw std::invalid_argument(name + ": Hessian duality violated");
  }
}

// Newton inversion of grad phi: minimizes phi(rho) - <x, rho>.
Vector invert_grad(const ConvexField& f, const Vector& x, const Vector& init,
                   const char* what) {
  NewtonOptions nopts;
  nopts.grad_tol = 1e-12;
  auto val = [&](const Vector& r) { return f.value(r) - x.dot(r); };
  auto grd = [&](const Vector& r) { return Vector(f.gradient(r) - x); };
  auto hes = [&](const Vector& r) { return f.hessian(r); };
  NewtonResult res = newton_minimize(val, grd, hes, init, nullptr, nopts);
  if (!res.converged) {
    std::ostringstream os;
    os << what << ": Newton inversion failed at query (";
    for (long i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
    os << "), last iterate (";
    for (long i = 0; i < res.x.size(); ++i) os << (i ? ", " : "") << res.x[i];
    os << ")";
    throw std::runtime_error(os.str());
  }
  return res.x;
}

}  // namespace

ConvexField legendre_transform(const ConvexField& f, int dimension,
                               const LegendreOptions& opts) {
  ConvexField g = f;
  if (!g.hessian) {
    auto grad = g.gradient;
    g.hessian = [grad](const Vector& x) {
      ScalarField sf;
      sf.gradient = grad;
      sf.value = nullptr;
      return sf.hess(x);
    };
  }
  Vector init = opts.initial_point.size() == dimension
                    ? opts.initial_point
                    : Vector(Vector::Zero(dimension));
  auto solve = [g, init](const Vector& x) {
    return invert_grad(g, x, init, "legendre_transform");
  };
  ConvexField dual;
  dual.value = [g, solve](const Vector& x) {
    const Vector rho = solve(x);
    return x.dot(rho) - g.value(rho);
  };
  dual.gradient = [solve](const Vector& x) { return solve(x); };
  dual.hessian = [g, solve](const Vector& x) {
    const Vector rho = solve(x);
    return Matrix(g.hessian(rho).inverse());
  };
  return dual;
}

PotentialPair PotentialPair::from_closed_form(DelzantPolytope P,
                                              ConvexField phi, ConvexField u,
                                              PairKind kind, std::string name,
                                              bool validate) {
  if (validate) validate_pair(P, phi, u, name);
  return PotentialPair(std::make_shared<const Impl>(
      std::move(P), std::move(phi), std::move(u), kind, std::move(name)));
}

PotentialPair PotentialPair::from_phi(DelzantPolytope P, ConvexField phi,
                                      PairKind kind, std::string name,
                                      bool validate) {
  if (!phi.hessian) {
    auto grad = phi.gradient;
    phi.hessian = [grad](const Vector& rho) {
      ScalarField sf;
      sf.gradient = grad;
      return sf.hess(rho);
    };
  }
  ConvexField u = legendre_transform(phi, P.dimension());
  return from_closed_form(std::move(P), std::move(phi), std::move(u), kind,
                          std::move(name), validate);
}

PotentialPair PotentialPair::from_u(DelzantPolytope P, ConvexField u,
                                    PairKind kind, std::string name,
                                    bool validate) {
  if (!u.hessian) {
    auto grad = u.gradient;
    u.hessian = [grad](const Vector& x) {
      ScalarField sf;
      sf.gradient = grad;
      return sf.hess(x);
    };
  }
  // Invert grad u by maximizing <x, rho> - u(x) over the interior; the
  // barrier behavior of u at the boundary keeps iterates inside.
  DelzantPolytope poly = P;
  Vector start = poly.center_of_mass();
  ConvexField uc = u;
  auto solve = [uc, poly, start](const Vector& rho) {
    NewtonOptions nopts;
    nopts.grad_tol = 1e-12;
    auto val = [&](const Vector& x) { return uc.value(x) - rho.dot(x); };
    auto grd = [&](const Vector& x) { return Vector(uc.gradient(x) - rho); };
    auto hes = [&](const Vector& x) { return uc.hessian(x); };
    auto inside = [&](const Vector& x) { return poly.min_facet_value(x) > 0.0; };
    NewtonResult res = newton_minimize(val, grd, hes, start, inside, nopts);
    if (!res.converged)
      throw std::runtime_error("potential pair: inversion of grad u failed");
    return res.x;
  };
  ConvexField phi;
  phi.value = [uc, solve](const Vector& rho) {
    const Vector x = solve(rho);
    return x.dot(rho) - uc.value(x);
  };
  phi.gradient = [solve](const Vector& rho) { return solve(rho); };
  phi.hessian = [uc, solve](const Vector& rho) {
    const Vector x = solve(rho);
    return Matrix(uc.hessian(x).inverse());
  };
  return from_closed_form(std::move(P), std::move(phi), std::move(u), kind,
                          std::move(name), validate);
}

nlohmann::json PotentialPair::describe() const {
  nlohmann::json j;
  j["name"] = name();
  switch (kind()) {
    case PairKind::ClosedFormFamily: j["kind"] = "closed-form-family"; break;
    case PairKind::BergmanSum: j["kind"] = "bergman-sum"; break;
    case PairKind::GuilleminCanonical: j["kind"] = "guillemin-canonical"; break;
  }
  j["gauge"] = gauge().to_json();
  j["polytope"] = polytope().to_json();
  return j;
}

// --- Built-in families ----------------------------------------------------

PotentialPair make_fs_cp1() {
  ConvexField phi;
  phi.value = [](const Vector& rho) { return stable_log1p_exp(rho[0]); };
  phi.gradient = [](const Vector& rho) {
    Vector g(1);
    const double t = rho[0];
    g[0] = t > 0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
    return g;
  };
  phi.hessian = [phi](const Vector& rho) {
    const double s = phi.gradient(rho)[0];
    Matrix h(1, 1);
    h(0, 0) = s * (1.0 - s);
    return h;
  };
  ConvexField u;
  u.value = [](const Vector& x) { return xlogx(x[0]) + xlogx(1.0 - x[0]); };
  u.gradient = [](const Vector& x) {
    Vector g(1);
    g[0] = std::log(x[0]) - std::log(1.0 - x[0]);
    return g;
  };
  u.hessian = [](const Vector& x) {
    Matrix h(1, 1);
    h(0, 0) = 1.0 / (x[0] * (1.0 - x[0]));
    return h;
  };
  return PotentialPair::from_closed_form(DelzantPolytope::named("interval01"),
                                         phi, u, PairKind::ClosedFormFamily,
                                         "fs-cp1");
}

PotentialPair make_fs_cpm(int m) {
  if (m < 1) throw std::invalid_argument("fs-cpm: m must be >= 1");
  auto probabilities = [m](const Vector& rho) {
    // p_i = e^{rho_i} / (1 + sum e^{rho_j}), p_last = 1/(1 + sum).
    Vector ext(m + 1);
    ext.head(m) = rho;
    ext[m] = 0.0;
    const double lse = log_sum_exp(ext);
    Vector p(m + 1);
    for (int i = 0; i <= m; ++i) p[i] = std::exp(ext[i] - lse);
    return p;
  };
  ConvexField phi;
  phi.value = [m](const Vector& rho) {
    Vector ext(m + 1);
    ext.head(m) = rho;
    ext[m] = 0.0;
    return log_sum_exp(ext);
  };
  phi.gradient = [probabilities, m](const Vector& rho) {
    return Vector(probabilities(rho).head(m));
  };
  phi.hessian = [probabilities, m](const Vector& rho) {
    const Vector p = probabilities(rho).head(m);
    Matrix h = Matrix(p.asDiagonal()) - p * p.transpose();
    return h;
  };
  ConvexField u;
  u.value = [](const Vector& x) {
    double s = 0.0;
    for (long i = 0; i < x.size(); ++i) s += xlogx(x[i]);
    return s + xlogx(1.0 - x.sum());
  };
  u.gradient = [](const Vector& x) {
    const double rest = 1.0 - x.sum();
    Vector g(x.size());
    for (long i = 0; i < x.size(); ++i) g[i] = std::log(x[i]) - std::log(rest);
    return g;
  };
  u.hessian = [](const Vector& x) {
    const double rest = 1.0 - x.sum();
    Matrix h = Matrix::Constant(x.size(), x.size(), 1.0 / rest);
    for (long i = 0; i < x.size(); ++i) h(i, i) += 1.0 / x[i];
    return h;
  };
  std::ostringstream os;
  os << "fs-cp" << m;
  return PotentialPair::from_closed_form(
      DelzantPolytope::named("simplex(" + std::to_string(m) + ")"), phi, u,
      PairKind::ClosedFormFamily, os.str());
}

PotentialPair make_round_sphere(double r2) {
  if (!(r2 > 0.0)) throw std::invalid_argument("round-sphere: r2 must be positive");
  ConvexField phi;
  phi.value = [r2](const Vector& rho) {
    // r2 * log cosh(rho), overflow-safe
    const double a = std::abs(rho[0]);
    return r2 * (a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0));
  };
  phi.gradient = [r2](const Vector& rho) {
    Vector g(1);
    g[0] = r2 * std::tanh(rho[0]);
    return g;
  };
  phi.hessian = [r2](const Vector& rho) {
    Matrix h(1, 1);
    const double c = std::cosh(std::min(std::abs(rho[0]), 350.0));
    h(0, 0) = r2 / (c * c);
    return h;
  };
  // Exact Legendre dual; differs from the usual display by the constant
  // r2 log r2 (a pure gauge) so the pairing holds identically.
  ConvexField u;
  u.value = [r2](const Vector& x) {
    return 0.5 * (xlogx(r2 + x[0]) + xlogx(r2 - x[0])) - r2 * std::log(r2);
  };
  u.gradient = [r2](const Vector& x) {
    Vector g(1);
    g[0] = 0.5 * (std::log(r2 + x[0]) - std::log(r2 - x[0]));
    return g;
  };
  u.hessian = [r2](const Vector& x) {
    Matrix h(1, 1);
    h(0, 0) = r2 / ((r2 + x[0]) * (r2 - x[0]));
    return h;
  };
  std::ostringstream os;
  os << "round-sphere(r2=" << r2 << ")";
  return PotentialPair::from_closed_form(
      DelzantPolytope::named("interval_sym(" + std::to_string(r2) + ")"), phi,
      u, PairKind::ClosedFormFamily, os.str());
}

PotentialPair make_guillemin(const DelzantPolytope& P) {
  DelzantPolytope poly = P;
  ConvexField u;
  u.value = [poly](const Vector& x) {
    const Vector ell = poly.facet_values(x);
    double s = 0.0;
    for (long r = 0; r < ell.size(); ++r) s += xlogx(ell[r]);
    return s;
  };
  u.gradient = [poly](const Vector& x) {
    const Vector ell = poly.facet_values(x);
    Vector g = Vector::Zero(poly.dimension());
    for (size_t r = 0; r < poly.facets().size(); ++r)
      g += (std::log(ell[long(r)]) + 1.0) * poly.facets()[r].normal.cast<double>();
    return g;
  };
  u.hessian = [poly](const Vector& x) {
    const Vector ell = poly.facet_values(x);
    Matrix h = Matrix::Zero(poly.dimension(), poly.dimension());
    for (size_t r = 0; r < poly.facets().size(); ++r) {
      const Vector n = poly.facets()[r].normal.cast<double>();
      h += n * n.transpose() / ell[long(r)];
    }
    return h;
  };
  return PotentialPair::from_u(P, u, PairKind::GuilleminCanonical, "guillemin");
}

PotentialPair make_bergman_sum(const DelzantPolytope& P,
                               const LatticePointSet& level1,
                               const Vector& log_q) {
  if (level1.size() != log_q.size())
    throw std::invalid_argument("bergman-sum: table size mismatch");
  if (level1.size() < P.dimension() + 1)
    throw std::invalid_argument("bergman-sum: needs at least dim+1 lattice atoms");
  const int m = P.dimension();
  std::vector<Vector> atoms;
  for (const IntVector& a : level1.points) atoms.push_back(a.cast<double>());
  const Vector lq = log_q;

  auto exponents = [atoms, lq](const Vector& rho) {
    Vector e(long(atoms.size()));
    for (size_t i = 0; i < atoms.size(); ++i)
      e[long(i)] = atoms[i].dot(rho) - lq[long(i)];
    return e;
  };
  ConvexField phi;
  phi.value = [exponents](const Vector& rho) { return log_sum_exp(exponents(rho)); };
  phi.gradient = [exponents, atoms, m](const Vector& rho) {
    const Vector e = exponents(rho);
    const double lse = log_sum_exp(e);
    Vector g = Vector::Zero(m);
    for (size_t i = 0; i < atoms.size(); ++i)
      g += std::exp(e[long(i)] - lse) * atoms[i];
    return g;
  };
  phi.hessian = [exponents, atoms, m](const Vector& rho) {
    const Vector e = exponents(rho);
    const double lse = log_sum_exp(e);
    Vector mean = Vector::Zero(m);
    Matrix second = Matrix::Zero(m, m);
    for (size_t i = 0; i < atoms.size(); ++i) {
      const double w = std::exp(e[long(i)] - lse);
      mean += w * atoms[i];
      second += w * atoms[i] * atoms[i].transpose();
    }
    return Matrix(second - mean * mean.transpose());
  };
  return PotentialPair::from_phi(P, phi, PairKind::BergmanSum, "bergman-sum");
}

PotentialPair make_ke_cp1() {
  // phi = 2 log(1+e^rho) - rho - log 2 on [-1,1]; -log det hess phi = phi.
  ConvexField phi;
  phi.value = [](const Vector& rho) {
    return 2.0 * stable_log1p_exp(rho[0]) - rho[0] - std::log(2.0);
  };
  phi.gradient = [](const Vector& rho) {
    const double t = rho[0];
    const double s = t > 0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
    Vector g(1);
    g[0] = 2.0 * s - 1.0;
    return g;
  };
  phi.hessian = [phi](const Vector& rho) {
    const double x = phi.gradient(rho)[0];
    Matrix h(1, 1);
    h(0, 0) = 0.5 * (1.0 - x * x);
    return h;
  };
  ConvexField u;
  u.value = [](const Vector& x) {
    return xlogx(1.0 + x[0]) + xlogx(1.0 - x[0]) - std::log(2.0);
  };
  u.gradient = [](const Vector& x) {
    Vector g(1);
    g[0] = std::log(1.0 + x[0]) - std::log(1.0 - x[0]);
    return g;
  };
  u.hessian = [](const Vector& x) {
    Matrix h(1, 1);
    h(0, 0) = 2.0 / (1.0 - x[0] * x[0]);
    return h;
  };
  return PotentialPair::from_closed_form(DelzantPolytope::named("interval_sym(1)"),
                                         phi, u, PairKind::ClosedFormFamily,
                                         "ke-cp1");
}

PotentialPair make_tampered_o2() {
  // Base level-1 constants on [0,2] are those of the quadratic round metric
  // (Q = 1/(3 C(2,a))); the sine tamper is not a gauge shift there because
  // the interval carries three atoms.
  std::vector<Facet> facets;
  {
    Facet left, right;
    left.normal = IntVector::Constant(1, 1);
    left.offset = 0.0;
    right.normal = IntVector::Constant(1, -1);
    right.offset = -2.0;
    facets = {left, right};
  }
  DelzantPolytope P02(1, facets);
  LatticePointSet pts = lattice_points(P02, 1);
  Vector log_q(pts.size());
  for (long i = 0; i < pts.size(); ++i) {
    const double a = double(pts.points[size_t(i)][0]);
    const double binom = (a == 1.0) ? 2.0 : 1.0;
    const double q_base = 1.0 / (3.0 * binom);
    log_q[i] = std::log(q_base * (1.0 + 0.1 * std::sin(a)));
  }
  PotentialPair pair = make_bergman_sum(P02, pts, log_q);
  return pair;
}

PotentialPair builtin_pair(const std::string& kind, const nlohmann::json& params) {
  if (kind == "fs-cp1") return make_fs_cp1();
  if (kind == "fs-cpm") {
    if (!params.contains("m")) throw std::invalid_argument("fs-cpm: missing param m");
    return make_fs_cpm(params.at("m").get<int>());
  }
  if (kind == "fs-cp2") return make_fs_cpm(2);
  if (kind == "round-sphere") {
    if (!params.contains("r2"))
      throw std::invalid_argument("round-sphere: missing param r2");
    return make_round_sphere(params.at("r2").get<double>());
  }
  if (kind == "ke-cp1") return make_ke_cp1();
  if (kind == "tampered-o2") return make_tampered_o2();
  if (kind == "guillemin") {
    if (!params.contains("polytope"))
      throw std::invalid_argument("guillemin: missing param polytope");
    if (params.at("polytope").is_string())
      return make_guillemin(DelzantPolytope::named(params.at("polytope").get<std::string>()));
    return make_guillemin(DelzantPolytope::from_json(params.at("polytope")));
  }
  if (kind == "bergman-sum") {
    if (!params.contains("polytope") || !params.contains("table"))
      throw std::invalid_argument("bergman-sum: missing polytope or table");
    DelzantPolytope P = params.at("polytope").is_string()
                            ? DelzantPolytope::named(params.at("polytope").get<std::string>())
                            : DelzantPolytope::from_json(params.at("polytope"));
    const auto& jt = params.at("table");
    LatticePointSet pts;
    pts.k = 1;
    std::vector<double> lq;
    for (const auto& e : jt.at("entries")) {
      const auto av = e.at("alpha").get<std::vector<int>>();
      IntVector a = Eigen::Map<const IntVector>(av.data(), long(av.size()));
      pts.points.push_back(a);
      lq.push_back(e.at("logQ").get<double>());
    }
    return make_bergman_sum(P, pts, Eigen::Map<const Vector>(lq.data(), long(lq.size())));
  }
  throw std::invalid_argument("unknown potential kind: " + kind);
}

// --- Operations ------------------------------------------------------------

Vector moment_map(const PotentialPair& pair, const Vector& rho) {
  if (rho.size() != pair.dimension())
    throw std::invalid_argument("moment_map: wrong dimension");
  return pair.grad_phi(rho);
}

Vector inverse_moment_map(const PotentialPair& pair, const Vector& x,
                          double margin) {
  pair.require_interior(x, margin);
  return pair.grad_u(x);
}

double curvature_scalar_L(const PotentialPair& pair, const Vector& x,
                          double margin) {
  pair.require_interior(x, margin);
  const Matrix H = pair.hess_u(x);
  Eigen::LLT<Matrix> llt(H);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("curvature_scalar_L: hess u not positive definite");
  double log_det = 0.0;
  for (long i = 0; i < H.rows(); ++i)
    log_det += 2.0 * std::log(llt.matrixL()(i, i));
  return 0.5 * log_det;
}

PotentialPair apply_gauge(const PotentialPair& pair, const GaugeShift& g) {
  const int m = pair.dimension();
  const Vector b = zero_if_empty(g.b, m);
  const Vector kv = izero_if_empty(g.kv, m).cast<double>();
  const double c = g.c;

  // Translated polytope: offsets gain <b, normal>.
  std::vector<Facet> facets = pair.polytope().facets();
  for (Facet& f : facets) f.offset += b.dot(f.normal.cast<double>());
  DelzantPolytope poly(m, facets);

  PotentialPair base = pair;
  ConvexField phi;
  phi.value = [base, b, kv, c](const Vector& rho) {
    const Vector r = rho - kv;
    return base.phi(r) + b.dot(r) + c;
  };
  phi.gradient = [base, b, kv](const Vector& rho) {
    return Vector(base.grad_phi(rho - kv) + b);
  };
  phi.hessian = [base, kv](const Vector& rho) { return base.hess_phi(rho - kv); };

  ConvexField u;
  u.value = [base, b, kv, c](const Vector& x) {
    return base.u(x - b) + kv.dot(x) - c;
  };
  u.gradient = [base, b, kv](const Vector& x) {
    return Vector(base.grad_u(x - b) + kv);
  };
  u.hessian = [base, b](const Vector& x) { return base.hess_u(x - b); };

  auto impl = std::make_shared<PotentialPair::Impl>(
      std::move(poly), std::move(phi), std::move(u), pair.kind(), pair.name());
  impl->gauge = g.compose_after(pair.gauge(), m);
  return PotentialPair(std::shared_ptr<const PotentialPair::Impl>(impl));
}

double ke_gauge_residual(const PotentialPair& pair, double a, const Vector& b,
                         double c, const std::vector<Vector>& rho_grid) {
  const int m = pair.dimension();
  const Vector bb = zero_if_empty(b, m);
  double worst = 0.0;
  for (const Vector& rho : rho_grid) {
    const Matrix H = pair.hess_phi(rho);
    const double log_det = std::log(H.determinant());
    const double resid = -log_det - a * pair.phi(rho) - bb.dot(rho) - c;
    worst = std::max(worst, std::abs(resid));
  }
  return worst;
}

std::vector<Vector> make_rho_grid(int dimension, double radius, int n) {
  std::vector<Vector> grid;
  if (n < 1) return grid;
  std::vector<double> ticks;
  for (int i = 0; i < n; ++i)
    ticks.push_back(n == 1 ? 0.0 : -radius + 2.0 * radius * i / (n - 1));
  std::vector<long> idx(size_t(dimension), 0);
  while (true) {
    Vector rho(dimension);
    for (int i = 0; i < dimension; ++i) rho[i] = ticks[size_t(idx[size_t(i)])];
    grid.push_back(rho);
    int i = dimension - 1;
    while (i >= 0 && idx[size_t(i)] == n - 1) {
      idx[size_t(i)] = 0;
      --i;
    }
    if (i < 0) break;
    ++idx[size_t(i)];
  }
  return grid;
}

}  // namespace torentropy
