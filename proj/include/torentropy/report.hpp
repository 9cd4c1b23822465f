#ifndef TORENTROPY_REPORT_HPP
#define TORENTROPY_REPORT_HPP

#include <nlohmann/json_fwd.hpp>

#include <string>
#include <vector>

namespace torentropy {

/// Structured pass/fail record for a theorem-level verification. `residuals`
/// are gated against their tolerances; `metrics` are informational only.
/// The verdict is pass iff every residual is within tolerance.
struct CheckReport {
  struct Residual {
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
  };
  struct Metric {
    std::string name;
    double value = 0.0;
  };

  std::string name;
  std::string inputs_digest;
  std::vector<Residual> residuals;
  std::vector<Metric> metrics;
  std::vector<std::string> notes;

  void add_residual(const std::string& n, double value, double tolerance);
  void add_metric(const std::string& n, double value);
  bool passed() const;
  std::string verdict() const { return passed() ? "pass" : "fail"; }

  nlohmann::json to_json() const;
};

}  // namespace torentropy

#endif  // TORENTROPY_REPORT_HPP
