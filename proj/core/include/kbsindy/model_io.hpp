#pragma once

#include "kbsindy/kernel.hpp"
#include "kbsindy/regression.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>

namespace kbsindy {

inline constexpr int kModelSchemaVersion = 1;

nlohmann::ordered_json kernel_to_json(const KernelSpec& spec);
KernelSpec kernel_from_json(const nlohmann::ordered_json& j);

nlohmann::ordered_json library_to_json(const MonomialLibrary& library);
/// Accepts either an explicit "terms" list or (n, order, include_constant).
MonomialLibrary library_from_json(const nlohmann::ordered_json& j);

/// Schema-versioned document; doubles are written with round-trip precision.
nlohmann::ordered_json model_to_json(const ModelEstimate& model);
ModelEstimate model_from_json(const nlohmann::ordered_json& j);

void save_model(const std::filesystem::path& path, const ModelEstimate& model);
ModelEstimate load_model(const std::filesystem::path& path);

/// Reads a JSON file, mapping I/O and syntax failures to library errors.
nlohmann::ordered_json read_json(const std::filesystem::path& path);
/// Writes with two-space indentation and a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j);

}  // namespace kbsindy
