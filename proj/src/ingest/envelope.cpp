#include "vitoria/ingest/envelope.hpp"

#include "vitoria/attributes.hpp"

namespace vitoria::ingest {

std::map<std::string, std::string> participant_aliases() {
    return {
        {"loc", std::string(attr::kLocation)},       {"act", std::string(attr::kActivity)},
        {"slp", std::string(attr::kSleeping)},       {"bt", std::string(attr::kPersonDevices)},
        {"wifi", std::string(attr::kWifi)},          {"nz", std::string(attr::kNoise)},
        {"app", std::string(attr::kAppUsage)},       {"st", std::string(attr::kSteps)},
        {"hr", std::string(attr::kHeartRate)},       {"geo", std::string(attr::kGeo)},
        {"rsk", std::string(attr::kMunicipalRisk)},  {"val", std::string(attr::kValence)},
        {"aro", std::string(attr::kArousal)},        {"sh", std::string(attr::kSleepHours)},
        {"sq", std::string(attr::kSleepQuality)},    {"pur", std::string(attr::kAppPurpose)},
        {"prox", std::string(attr::kProximity)},     {"trn", std::string(attr::kTransport)},
    };
}

MeasurementBatch to_batch(const SensorEvent& ev) {
    const auto& p = ev.payload;
    MeasurementBatch b;
    auto add = [&](const char* alias, Json v) { b.push_back({alias, std::move(v), ev.t}); };
    if (ev.kind == "location") {
        add("loc", p.at("label"));
    } else if (ev.kind == "activity") {
        add("act", p.at("label"));
    } else if (ev.kind == "sleep_state") {
        add("slp", p.at("sleeping"));
    } else if (ev.kind == "bt_scan") {
        add("bt", p.at("person_devices"));
    } else if (ev.kind == "wifi") {
        add("wifi", p.at("aps"));
    } else if (ev.kind == "noise") {
        add("nz", p.at("db"));
    } else if (ev.kind == "app_usage") {
        add("app", p);
    } else if (ev.kind == "steps") {
        add("st", p.at("count"));
    } else if (ev.kind == "heart_rate") {
        add("hr", p.at("bpm"));
    } else if (ev.kind == "geo") {
        add("geo", Json{{"district", p.at("district_token")},
                        {"municipality", p.at("municipality_token")},
                        {"parish", p.at("parish_token")}});
        if (p.contains("risk")) add("rsk", p.at("risk"));
    } else if (ev.kind == "answer") {
        const auto q = p.value("questionnaire", "");
        if (q == "sam_emotion") {
            add("val", p.at("valence"));
            add("aro", p.at("arousal"));
        } else if (q == "sleep_report") {
            add("sh", p.at("hours"));
            add("sq", p.at("quality"));
        } else if (q == "app_purpose") {
            add("pur", p.at("purposes"));
        } else if (q == "proximity") {
            add("prox", p.at("people_within_2m"));
        } else if (q == "transport") {
            add("trn", Json{{"transport", p.at("transport")},
                            {"people", p.at("people")},
                            {"trip_id", p.at("trip_id")},
                            {"trip_seconds", p.value("trip_seconds", 0.0)}});
        }
    }
    return b;
}

Json batch_to_json(const MeasurementBatch& batch) {
    Json body = Json::array();
    for (const auto& m : batch) body.push_back({{"a", m.alias}, {"v", m.value}, {"t", format_timestamp(m.observed_at)}});
    return body;
}

}  // namespace vitoria::ingest
