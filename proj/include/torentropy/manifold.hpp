#ifndef TORENTROPY_MANIFOLD_HPP
#define TORENTROPY_MANIFOLD_HPP

#include <nlohmann/json_fwd.hpp>

#include <string>

#include "torentropy/potentials.hpp"

namespace torentropy {

/// Builds a potential pair from a manifold spec
/// {"polytope": ..., "potential": {"kind": ..., "params": {...}}}.
/// Closed-form kinds ignore the polytope block (they carry their own);
/// "guillemin" and "bergman-sum" read it.
PotentialPair manifold_from_json(const nlohmann::json& spec);

/// Accepts "builtin:NAME" (fs-cp1, fs-cp2, fs-cpm:m=3, round-sphere:r2=1,
/// guillemin:polytope=interval01, ke-cp1, tampered-o2) or a path to a
/// manifold spec JSON file.
PotentialPair load_manifold(const std::string& source);

}  // namespace torentropy

#endif  // TORENTROPY_MANIFOLD_HPP
