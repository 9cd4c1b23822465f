#include "torentropy/manifold.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace torentropy {

PotentialPair manifold_from_json(const nlohmann::json& spec) {
  if (!spec.is_object() || !spec.contains("potential"))
    throw std::invalid_argument("manifold spec: expected {polytope, potential}");
  const auto& pot = spec.at("potential");
  if (!pot.is_object() || !pot.contains("kind"))
    throw std::invalid_argument("manifold spec: potential needs a kind");
  const std::string kind = pot.at("kind").get<std::string>();
  nlohmann::json params =
      pot.contains("params") ? pot.at("params") : nlohmann::json::object();
  if ((kind == "guillemin" || kind == "bergman-sum") &&
      !params.contains("polytope") && spec.contains("polytope")) {
    params["polytope"] = spec.at("polytope");
  }
  return builtin_pair(kind, params);
}

PotentialPair load_manifold(const std::string& source) {
  if (source.rfind("builtin:", 0) == 0) {
    std::string rest = source.substr(8);
    std::string kind = rest;
    nlohmann::json params = nlohmann::json::object();
    const auto colon = rest.find(':');
    if (colon != std::string::npos) {
      kind = rest.substr(0, colon);
      // key=value pairs separated by commas
      std::stringstream ss(rest.substr(colon + 1));
      std::string item;
      while (std::getline(ss, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos)
          throw std::invalid_argument("builtin manifold: expected key=value, got " + item);
        const std::string key = item.substr(0, eq);
        const std::string val = item.substr(eq + 1);
        if (key == "m") {
          params[key] = std::stoi(val);
        } else if (key == "r2") {
          params[key] = std::stod(val);
        } else {
          params[key] = val;  // polytope names etc.
        }
      }
    }
    return builtin_pair(kind, params);
  }
  std::ifstream in(source);
  if (!in) throw std::invalid_argument("manifold file not found: " + source);
  nlohmann::json spec;
  try {
    in >> spec;
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("manifold file: invalid JSON: ") + e.what());
  }
  return manifold_from_json(spec);
}

}  // namespace torentropy
