#pragma once

#include <json.hpp>

#include "mippc/imputers.hpp"

namespace mippc::detail {

ImputerSpec imputer_spec_from_json(const nlohmann::json& j);

}  // namespace mippc::detail
