#include "vitoria/ingest/gateway.hpp"

#include <fstream>
#include <mutex>
#include <set>

#include "vitoria/digest.hpp"
#include "vitoria/error.hpp"

namespace vitoria::ingest {

Json IngestResult::to_json() const {
    Json rej = Json::array();
    for (const auto& r : rejected) rej.push_back({{"a", r.alias}, {"reason", r.reason}});
    return Json{{"accepted", accepted_count}, {"skipped", skipped}, {"rejected", rej}};
}

MeasurementBatch parse_batch(const Json& body) {
    if (!body.is_array()) throw Error(ErrorCode::Malformed, "measurement body must be an array");
    MeasurementBatch batch;
    for (const auto& item : body) {
        if (!item.is_object() || !item.contains("a") || !item.contains("v") || !item.contains("t") ||
            !item.at("a").is_string() || !item.at("t").is_string()) {
            throw Error(ErrorCode::Malformed, "measurement needs string a, v and string t");
        }
        batch.push_back({item.at("a").get<std::string>(), item.at("v"),
                         parse_timestamp(item.at("t").get<std::string>())});
    }
    return batch;
}

Gateway::Gateway(broker::ContextBroker& broker, std::function<Timestamp()> clock)
    : broker_(broker), clock_(std::move(clock)) {}

Timestamp Gateway::now() const {
    if (clock_) return clock_();
    return std::chrono::floor<Seconds>(std::chrono::system_clock::now());
}

std::string Gateway::digest(const std::string& salt, const std::string& api_key) {
    return sha256_hex(salt + ":" + api_key);
}

void Gateway::insert(Entry entry) {
    const auto& reg = entry.reg;
    if (reg.device_id.empty() || reg.target_entity_id.empty() || reg.target_entity_type.empty()) {
        throw Error(ErrorCode::Malformed, "device id and target entity must be non-empty");
    }
    std::set<std::string> targets;
    for (const auto& [alias, attr] : reg.attribute_aliases) {
        if (alias.empty() || attr.empty()) throw Error(ErrorCode::Malformed, "empty alias or attribute name");
        if (!targets.insert(attr).second) {
            throw Error(ErrorCode::Malformed, "aliases must map to distinct attributes ('" + attr + "')");
        }
    }
    std::unique_lock lock(mutex_);
    if (devices_.count(reg.device_id)) throw Error(ErrorCode::DuplicateDevice, reg.device_id);
    auto id = reg.device_id;
    devices_.emplace(std::move(id), std::move(entry));
}

void Gateway::register_device(const DeviceRegistration& reg) {
    if (reg.api_key.empty()) throw Error(ErrorCode::Malformed, "api key must be non-empty");
    Entry entry{reg, {}, {}};
    {
        std::unique_lock lock(mutex_);
        entry.salt = sha256_hex(reg.device_id + "#" + std::to_string(++salt_counter_)).substr(0, 16);
    }
    entry.key_digest = digest(entry.salt, reg.api_key);
    entry.reg.api_key.clear();
    insert(std::move(entry));
}

DeviceRegistration Gateway::authenticate(const std::string& api_key, const std::string& device_id) const {
    std::shared_lock lock(mutex_);
    auto it = devices_.find(device_id);
    if (it == devices_.end() || digest(it->second.salt, api_key) != it->second.key_digest) {
        throw Error(ErrorCode::Unauthorized, "device '" + device_id + "'");
    }
    return it->second.reg;
}

IngestResult Gateway::ingest(const std::string& api_key, const std::string& device_id, const MeasurementBatch& batch) {
    const auto reg = authenticate(api_key, device_id);
    if (batch.empty()) throw Error(ErrorCode::Malformed, "empty measurement batch");
    const Timestamp limit = now() + kClockSkew;
    IngestResult result;
    for (const auto& m : batch) {
        auto alias = reg.attribute_aliases.find(m.alias);
        if (alias == reg.attribute_aliases.end()) {
            result.skipped.push_back(m.alias);
            continue;
        }
        if (m.observed_at > limit) {
            result.rejected.push_back({m.alias, "ClockSkew"});
            continue;
        }
        broker::ContextEntity update{reg.target_entity_id, reg.target_entity_type, {}};
        update.attributes.emplace(alias->second, broker::AttributeValue{m.value, m.observed_at, Json::object()});
        try {
            broker_.upsert_entity(update);
            ++result.accepted_count;
        } catch (const Error& e) {
            result.rejected.push_back({m.alias, std::string(to_string(e.code()))});
        }
    }
    return result;
}

void Gateway::save_registry(const std::filesystem::path& path) const {
    Json list = Json::array();
    {
        std::shared_lock lock(mutex_);
        for (const auto& [id, e] : devices_) {
            list.push_back({{"device_id", e.reg.device_id},
                            {"salt", e.salt},
                            {"api_key_digest", e.key_digest},
                            {"target_entity_id", e.reg.target_entity_id},
                            {"target_entity_type", e.reg.target_entity_type},
                            {"attribute_aliases", e.reg.attribute_aliases}});
        }
    }
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::ConfigError, "cannot write " + path.string());
    out << list.dump(2) << '\n';
}

void Gateway::load_registry(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ConfigError, "cannot read " + path.string());
    Json list;
    try {
        list = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
    if (!list.is_array()) throw Error(ErrorCode::Malformed, "registry must be a JSON list");
    for (const auto& item : list) {
        Entry e;
        e.reg.device_id = item.value("device_id", "");
        e.reg.target_entity_id = item.value("target_entity_id", "");
        e.reg.target_entity_type = item.value("target_entity_type", "Participant");
        e.reg.attribute_aliases = item.value("attribute_aliases", std::map<std::string, std::string>{});
        if (item.contains("api_key")) {
            // Plaintext keys in hand-written registries are digested on load.
            e.salt = sha256_hex(e.reg.device_id + "#load").substr(0, 16);
            e.key_digest = digest(e.salt, item.at("api_key").get<std::string>());
        } else {
            e.salt = item.value("salt", "");
            e.key_digest = item.value("api_key_digest", "");
        }
        if (e.key_digest.empty()) throw Error(ErrorCode::Malformed, "registration without key for " + e.reg.device_id);
        insert(std::move(e));
    }
}

std::size_t Gateway::device_count() const {
    std::shared_lock lock(mutex_);
    return devices_.size();
}

}  // namespace vitoria::ingest
