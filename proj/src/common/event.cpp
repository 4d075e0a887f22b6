#include "vitoria/event.hpp"

#include "vitoria/error.hpp"

namespace vitoria {

Json SensorEvent::to_json() const {
    return Json{{"user", user}, {"kind", kind}, {"payload", payload}, {"t", format_timestamp(t)}};
}

SensorEvent SensorEvent::from_json(const Json& j) {
    if (!j.is_object() || !j.contains("user") || !j.contains("kind") || !j.contains("t")) {
        throw Error(ErrorCode::Malformed, "sensor event needs user, kind and t");
    }
    SensorEvent ev;
    ev.user = j.at("user").get<std::string>();
    ev.kind = j.at("kind").get<std::string>();
    ev.payload = j.value("payload", Json::object());
    ev.t = parse_timestamp(j.at("t").get<std::string>());
    return ev;
}

}  // namespace vitoria
