#ifndef TORENTROPY_NUMERICS_HPP
#define TORENTROPY_NUMERICS_HPP

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace torentropy {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IntVector = Eigen::VectorXi;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// t * log(t) extended by continuity with 0 at t = 0.
inline double xlogx(double t) { return t > 0.0 ? t * std::log(t) : 0.0; }

/// log(sum_i exp(v[i])) with the running-max shift. Empty input gives -inf.
template <typename Derived>
double log_sum_exp(const Eigen::DenseBase<Derived>& v) {
  const auto n = v.size();
  if (n == 0) return kNegInf;
  double m = kNegInf;
  for (Eigen::Index i = 0; i < n; ++i) m = std::max(m, double(v(i)));
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) s += std::exp(double(v(i)) - m);
  return m + std::log(s);
}

double log_sum_exp(const std::vector<double>& v);

/// Streaming log-domain accumulator: absorbs log-terms one at a time and
/// reports log of the running sum. Order of absorption is fixed by the
/// caller, so results are bit-reproducible.
class LogAccumulator {
 public:
  void add(double log_term);
  double log_sum() const;
  bool empty() const { return empty_; }

 private:
  double max_ = kNegInf;
  double scaled_sum_ = 0.0;
  bool empty_ = true;
};

/// Scalar field on (a subset of) R^m with optional analytic derivatives.
/// Missing derivatives fall back to central differences with step
/// h = fd_step_scale * max(1, |x|_inf).
struct ScalarField {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;  // optional
  std::function<Matrix(const Vector&)> hessian;   // optional
  double fd_step_scale = 1e-5;

  double operator()(const Vector& x) const { return value(x); }
  Vector grad(const Vector& x) const;
  Matrix hess(const Vector& x) const;
};

Vector central_diff_gradient(const std::function<double(const Vector&)>& f,
                             const Vector& x, double step_scale = 1e-5);
Matrix central_diff_hessian(const std::function<double(const Vector&)>& f,
                            const Vector& x, double step_scale = 1e-5);

/// Gauss-Legendre nodes and weights on [-1, 1]; cached per order.
struct GaussRule {
  Vector nodes;
  Vector weights;
};
const GaussRule& gauss_legendre(int order);

struct QuadratureOptions {
  double rel_tol = 1e-8;
  int max_depth = 12;
  int order_1d = 15;      // panel order on intervals
  int order_tri = 12;     // per-axis order on triangles
};

struct LogQuadResult {
  double log_integral = kNegInf;
  bool converged = true;
  long evaluations = 0;
};

/// Integral of exp(log_f) over [a, b], returned as a logarithm.
/// Adaptive bisection of Gauss-Legendre panels; the error test compares a
/// panel against its two halves in the log domain.
LogQuadResult log_integrate_interval(
    const std::function<double(double)>& log_f, double a, double b,
    const QuadratureOptions& opts = {});

/// Integral of exp(log_f) over the triangle (v0, v1, v2), as a logarithm.
/// Tensor Gauss-Legendre through the collapsed-square map, with adaptive
/// 4-way congruent subdivision (dyadic refinement toward the sides).
LogQuadResult log_integrate_triangle(
    const std::function<double(const Vector&)>& log_f, const Vector& v0,
    const Vector& v1, const Vector& v2, const QuadratureOptions& opts = {});

struct SignedQuadOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  int max_depth = 48;  // deep grading for integrable log singularities
  int order = 15;
};

/// Plain adaptive Gauss-Legendre for signed integrands on [a, b].
double integrate_interval(const std::function<double(double)>& f, double a,
                          double b, const SignedQuadOptions& opts = {});

/// Signed integral over the triangle (v0, v1, v2) by nested adaptive 1-D
/// passes: outer coordinate runs from v0 toward the (v1, v2) side, so
/// grading concentrates at that side. Seeded with a split at the boundary
/// collar 1 - collar_width.
double integrate_triangle_nested(const std::function<double(const Vector&)>& f,
                                 const Vector& v0, const Vector& v1,
                                 const Vector& v2,
                                 const SignedQuadOptions& opts = {},
                                 double collar_width = 1e-3);

struct NewtonOptions {
  double grad_tol = 1e-12;
  int max_iterations = 200;
  double damping_condition = 1e8;  // add lambda*I beyond this condition number
  double armijo = 1e-4;
  double min_step = 1e-14;
};

struct NewtonResult {
  Vector x;
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// Damped Newton minimization of a smooth convex function with backtracking
/// line search. `inside` guards an open domain: steps are shortened until the
/// trial point satisfies it (fraction-to-boundary style).
NewtonResult newton_minimize(
    const std::function<double(const Vector&)>& f,
    const std::function<Vector(const Vector&)>& grad,
    const std::function<Matrix(const Vector&)>& hess, const Vector& x0,
    const std::function<bool(const Vector&)>& inside = nullptr,
    const NewtonOptions& opts = {});

/// Scalar strictly-increasing root solve g(t) = target with a maintained
/// bracket; Newton step with bisection fallback.
double solve_increasing(const std::function<double(double)>& g,
                        const std::function<double(double)>& dg, double target,
                        double lo, double hi, double tol = 1e-13,
                        int max_iter = 200);

/// Runs fn(i) for i in [0, n). Parallel degree is capped by the
/// TORENTROPY_THREADS environment variable (default: hardware concurrency);
/// results must be written to disjoint slots, so the outcome is independent
/// of the degree.
void parallel_for(long n, const std::function<void(long)>& fn);

/// FNV-1a 64-bit digest rendered as fixed-width hex; used to tag report
/// inputs deterministically.
std::string fnv1a_hex(const std::string& data);

/// Prints a double with round-trip precision, identically across runs.
std::string format_double(double v);

}  // namespace torentropy

#endif  // TORENTROPY_NUMERICS_HPP
