#pragma once

#include <nlohmann/json.hpp>
#include <string>

#include "vitoria/time.hpp"

namespace vitoria {

using Json = nlohmann::json;

/// Canonical envelope for everything a participant device emits.
struct SensorEvent {
    std::string user;
    std::string kind;
    Json payload;
    Timestamp t;

    Json to_json() const;
    static SensorEvent from_json(const Json& j);

    bool operator==(const SensorEvent&) const = default;
};

}  // namespace vitoria
