#pragma once

#include "psiland/geometry.hpp"

#include <json.hpp>

#include <filesystem>

namespace psiland {

// {"dimension": n, "root": {"type": "ball" | "capsule" | "union" | ...}}
Domain domain_from_json(const nlohmann::ordered_json& doc);
nlohmann::ordered_json domain_to_json(const Domain& domain);

Domain load_domain(const std::filesystem::path& path);

}  // namespace psiland
