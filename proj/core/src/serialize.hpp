#pragma once

#include <json.hpp>

#include "cfsdcn/network.hpp"

namespace cfsdcn::detail {

nlohmann::json to_json(const ModelConfig& config);
/// Missing keys keep their defaults; unknown keys throw FormatError.
ModelConfig model_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const CassiConfig& config);
CassiConfig cassi_config_from_json(const nlohmann::json& j);

std::string mask3d_mode_name(Mask3DMode mode);
Mask3DMode parse_mask3d_mode(const std::string& text);

}  // namespace cfsdcn::detail
