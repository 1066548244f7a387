#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "numkit/tensor.hpp"

namespace numkit {

// Named parameters in registration order. Registration order is the
// optimizer's traversal order, so it is part of the reproducibility contract.
using ParamList = std::vector<std::pair<std::string, Tensor>>;

// JSON checkpoint: {"<path>": {"shape": [...], "data": [...]}, ...}.
// Serialization uses shortest-round-trip doubles, so load(save(p)) is
// bit-exact.
nlohmann::json params_to_json(const ParamList& params);
ParamList params_from_json(const nlohmann::json& j);

Tensor* find_param(ParamList& params, const std::string& path);
const Tensor* find_param(const ParamList& params, const std::string& path);

}  // namespace numkit
