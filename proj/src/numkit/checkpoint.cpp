#include "numkit/checkpoint.hpp"

namespace numkit {

nlohmann::json params_to_json(const ParamList& params) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [path, t] : params) {
        nlohmann::json entry;
        entry["shape"] = t.shape;
        entry["data"] = t.data;
        j[path] = std::move(entry);
    }
    return j;
}

ParamList params_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("checkpoint: parameter block must be a JSON object");
    ParamList out;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const nlohmann::json& entry = it.value();
        if (!entry.contains("shape") || !entry.contains("data"))
            throw ConfigError("checkpoint: parameter '" + it.key() + "' missing shape/data");
        Tensor t(entry["shape"].get<std::vector<int>>(), entry["data"].get<std::vector<double>>());
        require_finite(t, "checkpoint '" + it.key() + "'");
        out.emplace_back(it.key(), std::move(t));
    }
    return out;
}

Tensor* find_param(ParamList& params, const std::string& path) {
    for (auto& [p, t] : params)
        if (p == path) return &t;
    return nullptr;
}

const Tensor* find_param(const ParamList& params, const std::string& path) {
    for (const auto& [p, t] : params)
        if (p == path) return &t;
    return nullptr;
}

}  // namespace numkit
