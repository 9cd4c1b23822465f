#include "torentropy/asymptotics.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace torentropy {

double asymptotic_entropy(const PotentialPair& pair, const Vector& x, long k,
                          double margin) {
  const double m = pair.dimension();
  return 0.5 * m * std::log(2.0 * M_PI * M_E * double(k)) -
         curvature_scalar_L(pair, x, margin);
}

std::vector<EntropyCurveRow> entropy_error_curve(
    const PotentialPair& pair, const std::vector<NormingTable>& tables,
    const Vector& x) {
  std::vector<EntropyCurveRow> rows(tables.size());
  parallel_for(long(tables.size()), [&](long i) {
    const NormingTable& t = tables[size_t(i)];
    EntropyCurveRow row;
    row.k = t.k();
    row.exact = entropy(bergman_measure(pair, t, x));
    row.asymptotic = asymptotic_entropy(pair, x, t.k());
    row.diff = row.asymptotic - row.exact;
    rows[size_t(i)] = row;
  });
  std::sort(rows.begin(), rows.end(),
            [](const EntropyCurveRow& a, const EntropyCurveRow& b) {
              return a.k < b.k;
            });
  return rows;
}

double multinomial_refinement(const Vector& p, long k) {
  if (p.size() < 2) throw std::invalid_argument("multinomial_refinement: need length >= 2");
  if (std::abs(p.sum() - 1.0) > 1e-9)
    throw std::invalid_argument("multinomial_refinement: probabilities must sum to 1");
  const long m = p.size() - 1;
  double log_prod = 0.0;
  double inv_sum = 0.0;
  for (long j = 0; j < p.size(); ++j) {
    if (!(p[j] > 0.0))
      throw std::invalid_argument("multinomial_refinement: degenerate probability vector");
    log_prod += std::log(p[j]);
    inv_sum += 1.0 / p[j];
  }
  const double lead =
      0.5 * (double(m) * std::log(2.0 * M_PI * double(k) * M_E) + log_prod);
  const double corr =
      (3.0 * double(m + 1) - 2.0 - inv_sum) / (12.0 * double(k));
  return lead + corr;
}

MaxEntropyResult max_entropy_point(const PotentialPair& pair) {
  const DelzantPolytope& P = pair.polytope();
  const int m = P.dimension();
  auto L = [&](const Vector& x) { return curvature_scalar_L(pair, x, 0.0); };
  auto inside = [&](const Vector& x) {
    return P.min_facet_value(x) > kInteriorMargin;
  };
  // Differenced derivatives of L; analytic ones would need fourth
  // derivatives of u.
  auto grad = [&](const Vector& x) { return central_diff_gradient(L, x, 1e-5); };
  bool spd_everywhere = true;
  auto hess = [&](const Vector& x) {
    Matrix H = central_diff_hessian(L, x, 1e-5);
    Eigen::SelfAdjointEigenSolver<Matrix> es(H);
    if (es.eigenvalues().minCoeff() <= 0.0) spd_everywhere = false;
    return H;
  };
  NewtonOptions nopts;
  nopts.grad_tol = 1e-10;
  NewtonResult res =
      newton_minimize(L, grad, hess, P.center_of_mass(), inside, nopts);
  if (!res.converged) {
    std::ostringstream os;
    os << "max_entropy_point: Newton did not converge after " << res.iterations
       << " iterations at (";
    for (int i = 0; i < m; ++i) os << (i ? ", " : "") << res.x[i];
    os << ")";
    throw std::runtime_error(os.str());
  }
  MaxEntropyResult out;
  out.x = res.x;
  out.L = res.value;
  out.iterations = res.iterations;
  Matrix H = central_diff_hessian(L, res.x, 1e-5);
  Eigen::SelfAdjointEigenSolver<Matrix> es(H);
  out.unique = spd_everywhere && es.eigenvalues().minCoeff() > 0.0;
  return out;
}

CheckReport ke_center_check(const PotentialPair& pair, double a,
                            const KeCheckOptions& opts) {
  const int m = pair.dimension();
  CheckReport report;
  report.name = "ke_center_check";
  {
    std::ostringstream os;
    os << pair.describe() << "|a=" << a;
    report.inputs_digest = fnv1a_hex(os.str());
  }

  // Least-squares fit of -log det hess phi - a phi = <b, rho> + c.
  const std::vector<Vector> grid = make_rho_grid(m, opts.rho_radius, opts.rho_points);
  Matrix A(long(grid.size()), m + 1);
  Vector rhs(long(grid.size()));
  for (size_t i = 0; i < grid.size(); ++i) {
    const Vector& rho = grid[i];
    for (int j = 0; j < m; ++j) A(long(i), j) = rho[j];
    A(long(i), m) = 1.0;
    rhs[long(i)] = -std::log(pair.hess_phi(rho).determinant()) - a * pair.phi(rho);
  }
  const Vector fit = A.colPivHouseholderQr().solve(rhs);
  const Vector b = fit.head(m);
  const double c = fit[m];
  const double residual = (A * fit - rhs).lpNorm<Eigen::Infinity>();
  report.add_residual("ke_gauge_residual", residual, opts.ke_residual_tol);
  for (int j = 0; j < m; ++j) {
    std::ostringstream os;
    os << "fitted_b_" << j;
    report.add_metric(os.str(), b[j]);
  }
  report.add_metric("fitted_c", c);
  if (residual > opts.ke_residual_tol) {
    report.notes.push_back("not Kahler-Einstein within tolerance");
    return report;
  }

  const MaxEntropyResult max_ent = max_entropy_point(pair);
  const Vector predicted = -b / a;
  report.add_residual("maxent_vs_minus_b_over_a",
                      (max_ent.x - predicted).lpNorm<Eigen::Infinity>(),
                      opts.center_tol);
  report.add_residual(
      "maxent_vs_center_of_mass",
      (max_ent.x - pair.polytope().center_of_mass()).lpNorm<Eigen::Infinity>(),
      opts.center_tol);

  // Moment-coordinate form of the same identity, with the same constants:
  // 2 L(x) = a (<x, grad u> - u) + <b, grad u> + c on an interior grid.
  double alt = 0.0;
  const Vector com = pair.polytope().center_of_mass();
  for (const Vector& rho : grid) {
    const Vector x = 0.35 * pair.grad_phi(rho) + 0.65 * com;
    const Vector gu = pair.grad_u(x);
    const double lhs = 2.0 * curvature_scalar_L(pair, x);
    const double rhs_val = a * (x.dot(gu) - pair.u(x)) + b.dot(gu) + c;
    alt = std::max(alt, std::abs(lhs - rhs_val));
  }
  report.add_residual("symplectic_side_residual", alt, 100.0 * opts.ke_residual_tol);
  for (int j = 0; j < m; ++j) {
    std::ostringstream os;
    os << "maxent_x_" << j;
    report.add_metric(os.str(), max_ent.x[j]);
  }
  return report;
}

MabuchiTerms mabuchi_terms(const PotentialPair& pair, std::optional<double> a,
                           const SignedQuadOptions& opts) {
  const DelzantPolytope& P = pair.polytope();
  MabuchiTerms out;

  ScalarField L_field;
  PotentialPair p = pair;
  L_field.value = [p](const Vector& x) { return curvature_scalar_L(p, x, 0.0); };
  out.interior_L = polytope_integral(P, L_field, opts);

  ScalarField u_field;
  u_field.value = [p](const Vector& x) { return p.u(x); };
  out.boundary_u = boundary_integral(P, u_field, SurfaceMeasure::LatticeNormalized, opts);
  out.interior_u = polytope_integral(P, u_field, opts);

  if (a.has_value()) {
    out.a = *a;
  } else {
    ScalarField one;
    one.value = [](const Vector&) { return 1.0; };
    out.a = boundary_integral(P, one, SurfaceMeasure::LatticeNormalized, opts) /
            P.volume();
  }
  out.value = out.interior_L + out.boundary_u - out.a * out.interior_u;
  return out;
}

double mabuchi_functional(const PotentialPair& pair, std::optional<double> a,
                          const SignedQuadOptions& opts) {
  return mabuchi_terms(pair, a, opts).value;
}

double gaussian_entropy(const NormingTable& table) {
  return -table.log_q_all().sum();
}

double balanced_criticality(const PotentialPair& pair, long k,
                            const ScalarField& eta, double h,
                            const QuadratureOptions& quad) {
  if (!(h > 0.0)) throw std::invalid_argument("balanced_criticality: h must be positive");
  const DelzantPolytope& P = pair.polytope();

  // Recentre eta to zero mean under Lebesgue measure on P.
  ScalarField eta_copy = eta;
  const double mean =
      polytope_integral(P, eta_copy, SignedQuadOptions{}) / P.volume();

  auto perturbed = [&](double t) {
    PotentialPair base = pair;
    ScalarField et = eta;
    ConvexField phi_t;
    phi_t.value = [base, et, mean, t](const Vector& rho) {
      const Vector x = base.grad_phi(rho);
      return base.phi(rho) + t * (et(x) - mean);
    };
    phi_t.gradient = [base, et, mean, t](const Vector& rho) {
      const Vector x = base.grad_phi(rho);
      return Vector(base.grad_phi(rho) + t * (base.hess_phi(rho) * et.grad(x)));
    };
    // Hessian by differencing the composite gradient (third derivatives of
    // phi are not available analytically).
    phi_t.hessian = nullptr;
    return PotentialPair::from_phi(P, phi_t, pair.kind(),
                                   pair.name() + "+perturbation",
                                   /*validate=*/false);
  };

  NormingOptions nopts;
  nopts.quadrature = quad;
  const PotentialPair plus = perturbed(h);
  const PotentialPair minus = perturbed(-h);
  const double e_plus =
      gaussian_entropy(make_norming_table(plus, k, TableMethod::Quadrature, nopts));
  const double e_minus =
      gaussian_entropy(make_norming_table(minus, k, TableMethod::Quadrature, nopts));
  return (e_plus - e_minus) / (2.0 * h);
}

}  // namespace torentropy
