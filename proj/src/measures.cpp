#include "torentropy/measures.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace torentropy {

namespace {

bool lex_less(const IntVector& a, const IntVector& b) {
  for (long i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return a[i] < b[i];
  return false;
}

}  // namespace

LatticeMeasure::LatticeMeasure(long level, std::vector<IntVector> support,
                               Vector log_weights, bool normalize)
    : level_(level), support_(std::move(support)), log_weights_(std::move(log_weights)) {
  if (level_ < 1) throw std::invalid_argument("LatticeMeasure: level must be >= 1");
  if (long(support_.size()) != log_weights_.size())
    throw std::invalid_argument("LatticeMeasure: support/weight size mismatch");
  for (size_t i = 1; i < support_.size(); ++i)
    if (!lex_less(support_[i - 1], support_[i]))
      throw std::invalid_argument("LatticeMeasure: support not sorted or has duplicates");
  const double total = log_sum_exp(log_weights_);
  if (normalize) {
    log_weights_.array() -= total;
  } else if (std::abs(total) > 1e-12) {
    throw std::invalid_argument("LatticeMeasure: weights do not sum to one");
  }
}

LatticeMeasure LatticeMeasure::dirac(long level, const IntVector& alpha) {
  return LatticeMeasure(level, {alpha}, Vector::Zero(1));
}

nlohmann::json LatticeMeasure::to_json() const {
  nlohmann::json j;
  j["k"] = level_;
  j["atoms"] = nlohmann::json::array();
  for (size_t i = 0; i < support_.size(); ++i) {
    const IntVector& a = support_[i];
    j["atoms"].push_back(
        {{"alpha", std::vector<int>(a.data(), a.data() + a.size())},
         {"weight", std::exp(log_weights_[long(i)])}});
  }
  return j;
}

std::string LatticeMeasure::to_csv() const {
  std::ostringstream os;
  const long m = support_.empty() ? 0 : support_[0].size();
  for (long i = 0; i < m; ++i) os << "alpha_" << i << ",";
  os << "weight\n";
  for (size_t i = 0; i < support_.size(); ++i) {
    for (long c = 0; c < m; ++c) os << support_[i][c] << ",";
    os << format_double(std::exp(log_weights_[long(i)])) << "\n";
  }
  return os.str();
}

LatticeMeasure bergman_measure(const PotentialPair& pair,
                               const NormingTable& table, const Vector& x,
                               double margin) {
  const double log_pi = log_density_of_states(pair, table, x, margin);
  const long k = table.k();
  const Vector g = pair.grad_u(x);
  const double base = double(k) * (pair.u(x) - x.dot(g));
  Vector lw(table.points().size());
  for (long i = 0; i < table.points().size(); ++i) {
    const Vector a = table.points().points[size_t(i)].cast<double>();
    lw[i] = base + a.dot(g) - table.log_q(i) - log_pi;
  }
  return LatticeMeasure(k, table.points().points, std::move(lw),
                        /*normalize=*/true);
}

double entropy(const LatticeMeasure& mu) {
  double h = 0.0;
  const Vector& lw = mu.log_weights();
  for (long i = 0; i < lw.size(); ++i) {
    if (lw[i] == kNegInf) continue;
    h -= std::exp(lw[i]) * lw[i];
  }
  return h;
}

Moments moments(const LatticeMeasure& mu) {
  const long m = mu.size() ? mu.support()[0].size() : 0;
  Moments out;
  out.mean = Vector::Zero(m);
  for (long i = 0; i < mu.size(); ++i) out.mean += mu.weight(i) * mu.point(i);
  out.covariance = Matrix::Zero(m, m);
  for (long i = 0; i < mu.size(); ++i) {
    const Vector d = mu.point(i) - out.mean;
    out.covariance += mu.weight(i) * d * d.transpose();
  }
  return out;
}

LatticeMeasure convolve(const LatticeMeasure& a, const LatticeMeasure& b) {
  if (a.size() == 0 || b.size() == 0)
    throw std::invalid_argument("convolve: empty measure");
  if (a.support()[0].size() != b.support()[0].size())
    throw std::invalid_argument("convolve: lattice scale mismatch");
  std::map<std::vector<int>, LogAccumulator> sums;
  for (long i = 0; i < a.size(); ++i) {
    for (long j = 0; j < b.size(); ++j) {
      IntVector s = a.support()[size_t(i)] + b.support()[size_t(j)];
      std::vector<int> key(s.data(), s.data() + s.size());
      sums[key].add(a.log_weights()[i] + b.log_weights()[j]);
    }
  }
  std::vector<IntVector> support;
  Vector lw(long(sums.size()));
  long idx = 0;
  for (const auto& [key, acc] : sums) {
    IntVector s = Eigen::Map<const IntVector>(key.data(), long(key.size()));
    support.push_back(s);
    lw[idx++] = acc.log_sum();
  }
  return LatticeMeasure(a.level() + b.level(), std::move(support), std::move(lw),
                        /*normalize=*/true);
}

LatticeMeasure convolution_power(const LatticeMeasure& mu, long k) {
  if (k < 1) throw std::invalid_argument("convolution_power: k must be >= 1");
  LatticeMeasure out = mu;
  for (long j = 1; j < k; ++j) out = convolve(out, mu);
  return out;
}

CheckReport convolution_power_check(const PotentialPair& pair,
                                    const std::vector<NormingTable>& tables,
                                    const std::vector<Vector>& x_grid,
                                    const ConvolutionCheckOptions& opts) {
  const NormingTable* level1 = nullptr;
  for (const NormingTable& t : tables)
    if (t.k() == 1) level1 = &t;
  if (!level1)
    throw std::invalid_argument("convolution_power_check: level-1 table required");
  if (x_grid.empty())
    throw std::invalid_argument("convolution_power_check: empty x grid");

  CheckReport report;
  report.name = "convolution_power_check";
  {
    std::ostringstream os;
    os << pair.describe() << "|K=" << tables.size() << "|grid=" << x_grid.size();
    report.inputs_digest = fnv1a_hex(os.str());
  }
  std::vector<const NormingTable*> ordered;
  for (const NormingTable& t : tables) ordered.push_back(&t);
  std::sort(ordered.begin(), ordered.end(),
            [](const NormingTable* a, const NormingTable* b) {
              return a->k() < b->k();
            });
  double worst = 0.0;
  for (const Vector& x : x_grid) {
    const LatticeMeasure mu1 = bergman_measure(pair, *level1, x);
    LatticeMeasure power = mu1;
    for (const NormingTable* tp : ordered) {
      const NormingTable& t = *tp;
      const long k = t.k();
      if (k == 1) continue;
      while (power.level() < k) power = convolve(power, mu1);
      if (power.level() != k)
        throw std::invalid_argument("convolution_power_check: table levels must be 1..K");
      const LatticeMeasure muk = bergman_measure(pair, t, x);
      // Atomwise comparison over the union of supports.
      std::map<std::vector<int>, double> w;
      for (long i = 0; i < muk.size(); ++i) {
        const IntVector& s = muk.support()[size_t(i)];
        w[std::vector<int>(s.data(), s.data() + s.size())] = muk.weight(i);
      }
      for (long i = 0; i < power.size(); ++i) {
        const IntVector& s = power.support()[size_t(i)];
        std::vector<int> key(s.data(), s.data() + s.size());
        auto it = w.find(key);
        const double other = it == w.end() ? 0.0 : it->second;
        worst = std::max(worst, std::abs(other - power.weight(i)));
        if (it != w.end()) w.erase(it);
      }
      for (const auto& [key, val] : w) worst = std::max(worst, std::abs(val));
    }
  }
  report.add_residual("max_atom_deviation", worst, opts.tol);
  report.notes.push_back(report.passed() ? "convolution sequence"
                                         : "not a convolution sequence");
  return report;
}

RateFunction::RateFunction(PotentialPair pair, Vector x0, double margin)
    : pair_(std::move(pair)), x0_(std::move(x0)) {
  pair_.require_interior(x0_, margin);
  rho0_ = pair_.grad_u(x0_);
  phi0_ = x0_.dot(rho0_) - pair_.u(x0_);  // Legendre pairing at x0
}

double RateFunction::operator()(const Vector& x) const {
  return pair_.u(x) - x.dot(rho0_) + phi0_;
}

Vector RateFunction::grad(const Vector& x) const {
  return pair_.grad_u(x) - rho0_;
}

Matrix RateFunction::hess(const Vector& x) const { return pair_.hess_u(x); }

RateFunction rate_function(const PotentialPair& pair, const Vector& x0,
                           double margin) {
  return RateFunction(pair, x0, margin);
}

double ldp_residual(const PotentialPair& pair, const NormingTable& table,
                    const Vector& x0, const LdpOptions& opts) {
  const RateFunction rate(pair, x0);
  const LatticeMeasure mu = bergman_measure(pair, table, x0);
  const long k = table.k();
  double worst = 0.0;
  for (long i = 0; i < mu.size(); ++i) {
    const Vector y = mu.point(i);
    if (pair.polytope().min_facet_value(y) < opts.interior_margin) continue;
    const double rate_val = rate(y);
    if (rate_val > opts.rate_cutoff) continue;
    const double lw = mu.log_weights()[i];
    worst = std::max(worst, std::abs(lw / double(k) + rate_val));
  }
  return worst;
}

double bernstein(const PotentialPair& pair, const NormingTable& table,
                 const ScalarField& f, const Vector& x, double margin) {
  const LatticeMeasure mu = bergman_measure(pair, table, x, margin);
  double s = 0.0;
  for (long i = 0; i < mu.size(); ++i) s += mu.weight(i) * f(mu.point(i));
  return s;
}

Matrix wright_fisher_matrix(const PotentialPair& pair, const NormingTable& table,
                            const std::vector<Vector>& states, double margin) {
  if (states.empty())
    throw std::invalid_argument("wright_fisher_matrix: no states");
  Matrix P(long(states.size()), table.points().size());
  for (size_t r = 0; r < states.size(); ++r) {
    const LatticeMeasure mu = bergman_measure(pair, table, states[r], margin);
    for (long c = 0; c < mu.size(); ++c) P(long(r), c) = mu.weight(c);
  }
  return P;
}

Matrix wright_fisher_matrix(const PotentialPair& pair, const NormingTable& table,
                            const std::vector<IntVector>& lattice_states,
                            double margin) {
  if (lattice_states.empty())
    throw std::invalid_argument("wright_fisher_matrix: no states");
  const long n = long(lattice_states.size());
  std::vector<long> cols;
  for (const IntVector& a : lattice_states) {
    const long idx = table.points().index_of(a);
    if (idx < 0)
      throw std::invalid_argument("wright_fisher_matrix: state not in the dilate");
    cols.push_back(idx);
  }
  Matrix P(n, n);
  for (long r = 0; r < n; ++r) {
    const Vector x =
        lattice_states[size_t(r)].cast<double>() / double(table.k());
    const LatticeMeasure mu = bergman_measure(pair, table, x, margin);
    for (long c = 0; c < n; ++c) P(r, c) = mu.weight(cols[size_t(c)]);
    const double row_sum = P.row(r).sum();
    P.row(r) /= row_sum;  // conditional chain on the chosen state space
  }
  return P;
}

}  // namespace torentropy
