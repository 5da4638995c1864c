#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "switchcert/bundle.hpp"

namespace switchcert {

nlohmann::json mlp_to_json(const Mlp& net);
Mlp mlp_from_json(const nlohmann::json& j);

/// Bundle checkpoint: network shapes, activations and row-major weights, the
/// certificate parameters, and the config hash. Doubles are written in
/// shortest round-trip form, so save/load is bit-exact.
nlohmann::json bundle_to_json(const CertificateBundle& bundle);
CertificateBundle bundle_from_json(const nlohmann::json& j);

void save_bundle(const CertificateBundle& bundle, const std::string& path);
/// Throws ConfigError for unreadable or malformed files.
CertificateBundle load_bundle(const std::string& path);

}  // namespace switchcert
