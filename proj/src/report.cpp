#include "torentropy/report.hpp"

#include <nlohmann/json.hpp>

namespace torentropy {

void CheckReport::add_residual(const std::string& n, double value,
                               double tolerance) {
  residuals.push_back({n, value, tolerance});
}

void CheckReport::add_metric(const std::string& n, double value) {
  metrics.push_back({n, value});
}

bool CheckReport::passed() const {
  for (const Residual& r : residuals)
    if (!(r.value <= r.tolerance)) return false;
  return true;
}

nlohmann::json CheckReport::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  j["inputs_digest"] = inputs_digest;
  j["residuals"] = nlohmann::json::array();
  for (const Residual& r : residuals) {
    j["residuals"].push_back(
        {{"name", r.name}, {"value", r.value}, {"tolerance", r.tolerance}});
  }
  j["metrics"] = nlohmann::json::array();
  for (const Metric& m : metrics)
    j["metrics"].push_back({{"name", m.name}, {"value", m.value}});
  j["notes"] = notes;
  j["verdict"] = verdict();
  return j;
}

}  // namespace torentropy
