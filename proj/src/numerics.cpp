#include "torentropy/numerics.hpp"

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace torentropy {

double log_sum_exp(const std::vector<double>& v) {
  return log_sum_exp(Eigen::Map<const Vector>(v.data(), long(v.size())));
}

void LogAccumulator::add(double log_term) {
  if (log_term == kNegInf) return;
  if (empty_) {
    max_ = log_term;
    scaled_sum_ = 1.0;
    empty_ = false;
    return;
  }
  if (log_term <= max_) {
    scaled_sum_ += std::exp(log_term - max_);
  } else {
    scaled_sum_ = scaled_sum_ * std::exp(max_ - log_term) + 1.0;
    max_ = log_term;
  }
}

double LogAccumulator::log_sum() const {
  if (empty_) return kNegInf;
  return max_ + std::log(scaled_sum_);
}

Vector ScalarField::grad(const Vector& x) const {
  if (gradient) return gradient(x);
  return central_diff_gradient(value, x, fd_step_scale);
}

Matrix ScalarField::hess(const Vector& x) const {
  if (hessian) return hessian(x);
  if (gradient) {
    // central differences of the analytic gradient
    const long m = x.size();
    const double h = fd_step_scale * std::max(1.0, x.lpNorm<Eigen::Infinity>());
    Matrix H(m, m);
    for (long j = 0; j < m; ++j) {
      Vector xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      H.col(j) = (gradient(xp) - gradient(xm)) / (2.0 * h);
    }
    return 0.5 * (H + H.transpose());
  }
  return central_diff_hessian(value, x, fd_step_scale);
}

Vector central_diff_gradient(const std::function<double(const Vector&)>& f,
                             const Vector& x, double step_scale) {
  const long m = x.size();
  const double h = step_scale * std::max(1.0, x.lpNorm<Eigen::Infinity>());
  Vector g(m);
  for (long j = 0; j < m; ++j) {
    Vector xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    g[j] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

Matrix central_diff_hessian(const std::function<double(const Vector&)>& f,
                            const Vector& x, double step_scale) {
  const long m = x.size();
  const double h = step_scale * std::max(1.0, x.lpNorm<Eigen::Infinity>());
  Matrix H(m, m);
  const double f0 = f(x);
  for (long i = 0; i < m; ++i) {
    Vector xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    H(i, i) = (f(xp) - 2.0 * f0 + f(xm)) / (h * h);
    for (long j = i + 1; j < m; ++j) {
      Vector xpp = x, xpm = x, xmp = x, xmm = x;
      xpp[i] += h;
      xpp[j] += h;
      xpm[i] += h;
      xpm[j] -= h;
      xmp[i] -= h;
      xmp[j] += h;
      xmm[i] -= h;
      xmm[j] -= h;
      H(i, j) = H(j, i) =
          (f(xpp) - f(xpm) - f(xmp) + f(xmm)) / (4.0 * h * h);
    }
  }
  return H;
}

const GaussRule& gauss_legendre(int order) {
  static std::mutex mtx;
  static std::map<int, GaussRule> cache;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(order);
  if (it != cache.end()) return it->second;
  if (order < 1 || order > 256) throw std::invalid_argument("gauss_legendre: bad order");

  GaussRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  const int n = order;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Chebyshev initial guess, then Newton on P_n.
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= n; ++j) {
        double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      pp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * pp * pp);
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  auto [pos, ok] = cache.emplace(order, std::move(rule));
  (void)ok;
  return pos->second;
}

namespace {

// One Gauss-Legendre panel of exp(log_f) on [a, b], in the log domain.
double log_panel(const std::function<double(double)>& log_f, double a,
                 double b, const GaussRule& rule, long& evals) {
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  LogAccumulator acc;
  for (long i = 0; i < rule.nodes.size(); ++i) {
    const double x = mid + half * rule.nodes[i];
    const double lf = log_f(x);
    ++evals;
    if (lf == kNegInf) continue;
    acc.add(std::log(rule.weights[i] * half) + lf);
  }
  return acc.log_sum();
}

// |e^la - e^lb| <= rel * e^ref, evaluated without leaving the log domain.
bool log_close(double la, double lb, double log_ref, double rel) {
  if (la == kNegInf && lb == kNegInf) return true;
  const double hi = std::max(la, lb);
  double log_abs_diff;
  if (la == kNegInf || lb == kNegInf) {
    log_abs_diff = hi;
  } else {
    const double d = std::min(la, lb) - hi;  // <= 0
    const double one_minus = -std::expm1(d);
    log_abs_diff = one_minus > 0 ? hi + std::log(one_minus) : kNegInf;
  }
  return log_abs_diff <= log_ref + std::log(rel);
}

}  // namespace

LogQuadResult log_integrate_interval(
    const std::function<double(double)>& log_f, double a, double b,
    const QuadratureOptions& opts) {
  LogQuadResult result;
  if (!(b > a)) throw std::invalid_argument("log_integrate_interval: empty interval");
  const GaussRule& rule = gauss_legendre(opts.order_1d);

  struct Panel {
    double a, b, estimate;
    int depth;
  };
  long evals = 0;
  // First estimate over a modest uniform split; refined below.
  double log_total = kNegInf;
  {
    LogAccumulator acc;
    const int n0 = 8;
    for (int i = 0; i < n0; ++i) {
      const double pa = a + (b - a) * i / n0;
      const double pb = a + (b - a) * (i + 1) / n0;
      acc.add(log_panel(log_f, pa, pb, rule, evals));
    }
    log_total = acc.log_sum();
  }

  std::vector<Panel> stack;
  stack.push_back({a, b, log_panel(log_f, a, b, rule, evals), 0});
  LogAccumulator accepted;
  bool converged = true;
  // Each accepted panel agrees with its bisection to rel_tol/4 of the whole
  // integral, or is individually negligible.
  while (!stack.empty()) {
    Panel p = stack.back();
    stack.pop_back();
    const double mid = 0.5 * (p.a + p.b);
    const double left = log_panel(log_f, p.a, mid, rule, evals);
    const double right = log_panel(log_f, mid, p.b, rule, evals);
    LogAccumulator sum2;
    sum2.add(left);
    sum2.add(right);
    const double split = sum2.log_sum();
    const double negligible = log_total + std::log(opts.rel_tol) - std::log(64.0);
    const bool ok = log_close(split, p.estimate, log_total, opts.rel_tol / 4.0) ||
                    std::max(split, p.estimate) <= negligible;
    if (ok || p.depth >= opts.max_depth) {
      if (!ok) converged = false;
      accepted.add(split);
      if (split > log_total) log_total = std::max(log_total, accepted.log_sum());
    } else {
      stack.push_back({mid, p.b, right, p.depth + 1});
      stack.push_back({p.a, mid, left, p.depth + 1});
    }
  }
  result.log_integral = accepted.log_sum();
  result.converged = converged;
  result.evaluations = evals;
  return result;
}

namespace {

// Tensor panel over a triangle through the collapsed-square map
//   x(s, t) = v0 + s * ((1 - t) (v1 - v0) + t (v2 - v0)),  jacobian 2A s.
double log_tri_panel(const std::function<double(const Vector&)>& log_f,
                     const Vector& v0, const Vector& v1, const Vector& v2,
                     const GaussRule& rule, long& evals) {
  const double e1x = v1[0] - v0[0], e1y = v1[1] - v0[1];
  const double e2x = v2[0] - v0[0], e2y = v2[1] - v0[1];
  const double two_area = std::abs(e1x * e2y - e1y * e2x);
  if (two_area == 0.0) return kNegInf;
  LogAccumulator acc;
  Vector x(2);
  for (long i = 0; i < rule.nodes.size(); ++i) {
    const double s = 0.5 * (rule.nodes[i] + 1.0);
    const double ws = 0.5 * rule.weights[i];
    for (long j = 0; j < rule.nodes.size(); ++j) {
      const double t = 0.5 * (rule.nodes[j] + 1.0);
      const double wt = 0.5 * rule.weights[j];
      const double dx = (1.0 - t) * e1x + t * e2x;
      const double dy = (1.0 - t) * e1y + t * e2y;
      x[0] = v0[0] + s * dx;
      x[1] = v0[1] + s * dy;
      const double lf = log_f(x);
      ++evals;
      if (lf == kNegInf) continue;
      acc.add(std::log(ws * wt * two_area * s) + lf);
    }
  }
  return acc.log_sum();
}

}  // namespace

LogQuadResult log_integrate_triangle(
    const std::function<double(const Vector&)>& log_f, const Vector& v0,
    const Vector& v1, const Vector& v2, const QuadratureOptions& opts) {
  if (v0.size() != 2) throw std::invalid_argument("log_integrate_triangle: 2-D only");
  const GaussRule& rule = gauss_legendre(opts.order_tri);
  long evals = 0;

  struct Tri {
    Vector a, b, c;
    double estimate;
    int depth;
  };
  double log_total = log_tri_panel(log_f, v0, v1, v2, rule, evals);
  std::vector<Tri> stack;
  stack.push_back({v0, v1, v2, log_total, 0});
  LogAccumulator accepted;
  bool converged = true;
  while (!stack.empty()) {
    Tri t = stack.back();
    stack.pop_back();
    const Vector mab = 0.5 * (t.a + t.b);
    const Vector mbc = 0.5 * (t.b + t.c);
    const Vector mca = 0.5 * (t.c + t.a);
    const double p0 = log_tri_panel(log_f, t.a, mab, mca, rule, evals);
    const double p1 = log_tri_panel(log_f, mab, t.b, mbc, rule, evals);
    const double p2 = log_tri_panel(log_f, mca, mbc, t.c, rule, evals);
    const double p3 = log_tri_panel(log_f, mab, mbc, mca, rule, evals);
    LogAccumulator sum4;
    sum4.add(p0);
    sum4.add(p1);
    sum4.add(p2);
    sum4.add(p3);
    const double split = sum4.log_sum();
    const double negligible = log_total + std::log(opts.rel_tol) - std::log(256.0);
    const bool ok = log_close(split, t.estimate, log_total, opts.rel_tol / 4.0) ||
                    std::max(split, t.estimate) <= negligible;
    if (ok || t.depth >= opts.max_depth) {
      if (!ok) converged = false;
      accepted.add(split);
      log_total = std::max(log_total, accepted.log_sum());
    } else {
      stack.push_back({t.a, mab, mca, p0, t.depth + 1});
      stack.push_back({mab, t.b, mbc, p1, t.depth + 1});
      stack.push_back({mca, mbc, t.c, p2, t.depth + 1});
      stack.push_back({mab, mbc, mca, p3, t.depth + 1});
    }
  }
  LogQuadResult result;
  result.log_integral = accepted.log_sum();
  result.converged = converged;
  result.evaluations = evals;
  return result;
}

namespace {

double signed_panel(const std::function<double(double)>& f, double a, double b,
                    const GaussRule& rule) {
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  double s = 0.0;
  for (long i = 0; i < rule.nodes.size(); ++i)
    s += rule.weights[i] * f(mid + half * rule.nodes[i]);
  return s * half;
}

double integrate_recursive(const std::function<double(double)>& f, double a,
                           double b, double whole, const GaussRule& rule,
                           const SignedQuadOptions& opts, double scale,
                           int depth) {
  const double mid = 0.5 * (a + b);
  const double left = signed_panel(f, a, mid, rule);
  const double right = signed_panel(f, mid, b, rule);
  const double split = left + right;
  const double err = std::abs(split - whole);
  if (err <= opts.abs_tol + opts.rel_tol * std::abs(scale) ||
      depth >= opts.max_depth)
    return split;
  return integrate_recursive(f, a, mid, left, rule, opts, scale, depth + 1) +
         integrate_recursive(f, mid, b, right, rule, opts, scale, depth + 1);
}

}  // namespace

double integrate_interval(const std::function<double(double)>& f, double a,
                          double b, const SignedQuadOptions& opts) {
  if (a == b) return 0.0;
  const GaussRule& rule = gauss_legendre(opts.order);
  const double whole = signed_panel(f, a, b, rule);
  return integrate_recursive(f, a, b, whole, rule, opts,
                             std::max(1.0, std::abs(whole)), 0);
}

double integrate_triangle_nested(const std::function<double(const Vector&)>& f,
                                 const Vector& v0, const Vector& v1,
                                 const Vector& v2,
                                 const SignedQuadOptions& opts,
                                 double collar_width) {
  if (v0.size() != 2) throw std::invalid_argument("integrate_triangle_nested: 2-D only");
  const double e1x = v1[0] - v0[0], e1y = v1[1] - v0[1];
  const double e2x = v2[0] - v0[0], e2y = v2[1] - v0[1];
  const double two_area = std::abs(e1x * e2y - e1y * e2x);
  if (two_area == 0.0) return 0.0;

  auto outer = [&](double s) {
    auto inner = [&](double t) {
      Vector x(2);
      x[0] = v0[0] + s * ((1.0 - t) * e1x + t * e2x);
      x[1] = v0[1] + s * ((1.0 - t) * e1y + t * e2y);
      return f(x);
    };
    return integrate_interval(inner, 0.0, 1.0, opts) * two_area * s;
  };
  // Seed the grading with an explicit split at the boundary collar.
  const double c = std::clamp(1.0 - collar_width, 0.5, 1.0 - 1e-12);
  return integrate_interval(outer, 0.0, c, opts) +
         integrate_interval(outer, c, 1.0, opts);
}

NewtonResult newton_minimize(
    const std::function<double(const Vector&)>& f,
    const std::function<Vector(const Vector&)>& grad,
    const std::function<Matrix(const Vector&)>& hess, const Vector& x0,
    const std::function<bool(const Vector&)>& inside,
    const NewtonOptions& opts) {
  NewtonResult res;
  res.x = x0;
  if (inside && !inside(res.x))
    throw std::invalid_argument("newton_minimize: start point outside domain");
  double fx = f(res.x);
  for (int it = 0; it < opts.max_iterations; ++it) {
    res.iterations = it;
    Vector g = grad(res.x);
    if (g.lpNorm<Eigen::Infinity>() <= opts.grad_tol) {
      res.converged = true;
      break;
    }
    Matrix H = hess(res.x);
    // Condition-based damping.
    Eigen::SelfAdjointEigenSolver<Matrix> es(H);
    const double lmin = es.eigenvalues().minCoeff();
    const double lmax = es.eigenvalues().maxCoeff();
    if (!(lmin > 0.0) || lmax / std::max(lmin, 1e-300) > opts.damping_condition) {
      const double lambda = std::max(1e-10, lmax / opts.damping_condition - lmin);
      H.diagonal().array() += lambda;
    }
    Vector step = -H.ldlt().solve(g);
    if (!step.allFinite() || g.dot(step) >= 0.0) step = -g;  // descent fallback
    double alpha = 1.0;
    bool moved = false;
    const double slope = g.dot(step);
    while (alpha >= opts.min_step) {
      Vector trial = res.x + alpha * step;
      if (!inside || inside(trial)) {
        const double ft = f(trial);
        if (std::isfinite(ft) && ft <= fx + opts.armijo * alpha * slope) {
          res.x = trial;
          fx = ft;
          moved = true;
          break;
        }
      }
      alpha *= 0.5;
    }
    if (!moved) break;  // line search stalled; gradient test decides below
  }
  if (!res.converged) {
    res.converged = grad(res.x).lpNorm<Eigen::Infinity>() <= 1e3 * opts.grad_tol;
  }
  res.value = fx;
  return res;
}

double solve_increasing(const std::function<double(double)>& g,
                        const std::function<double(double)>& dg, double target,
                        double lo, double hi, double tol, int max_iter) {
  double flo = g(lo) - target;
  double fhi = g(hi) - target;
  // Expand the bracket if needed.
  int guard = 0;
  while (flo > 0.0 && guard++ < 200) {
    const double w = hi - lo;
    lo -= w;
    flo = g(lo) - target;
  }
  guard = 0;
  while (fhi < 0.0 && guard++ < 200) {
    const double w = hi - lo;
    hi += w;
    fhi = g(hi) - target;
  }
  if (flo > 0.0 || fhi < 0.0)
    throw std::runtime_error("solve_increasing: could not bracket the root");
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < max_iter; ++it) {
    const double fx = g(x) - target;
    if (fx > 0.0)
      hi = x;
    else
      lo = x;
    const double d = dg(x);
    double next = d > 0.0 ? x - fx / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= tol * std::max(1.0, std::abs(x))) return next;
    x = next;
  }
  return x;
}

void parallel_for(long n, const std::function<void(long)>& fn) {
  if (n <= 0) return;
  long max_threads = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("TORENTROPY_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap >= 1) max_threads = cap;
  }
  const long workers = std::min<long>(max_threads, n);
  if (workers <= 1) {
    for (long i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<long> next{0};
  std::vector<std::thread> pool;
  pool.reserve(size_t(workers));
  std::atomic<bool> failed{false};
  for (long w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      long i;
      while ((i = next.fetch_add(1)) < n) {
        if (failed.load()) return;
        try {
          fn(i);
        } catch (...) {
          failed.store(true);
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failed.load())
    throw std::runtime_error("parallel_for: a work item threw");
}

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

}  // namespace torentropy
