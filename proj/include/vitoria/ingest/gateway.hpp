#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <shared_mutex>
#include <string>
#include <vector>

#include "vitoria/broker/context_broker.hpp"

namespace vitoria::ingest {

struct DeviceRegistration {
    std::string device_id;
    std::string api_key;  // plaintext only in memory while registering; the registry keeps a salted digest
    std::string target_entity_id;
    std::string target_entity_type{"Participant"};
    std::map<std::string, std::string> attribute_aliases;  // short name -> broker attribute
};

struct Measurement {
    std::string alias;
    Json value;
    Timestamp observed_at{};
};

using MeasurementBatch = std::vector<Measurement>;

struct RejectedItem {
    std::string alias;
    std::string reason;
};

struct IngestResult {
    std::size_t accepted_count{0};
    std::vector<std::string> skipped;  // unknown aliases
    std::vector<RejectedItem> rejected;  // stale or clock-skewed items

    Json to_json() const;
};

/// Decodes the wire body [{"a": alias, "v": value, "t": iso8601}, ...].
MeasurementBatch parse_batch(const Json& body);

class Gateway {
public:
    static constexpr Seconds kClockSkew{300};

    Gateway(broker::ContextBroker& broker, std::function<Timestamp()> clock = {});

    void register_device(const DeviceRegistration& reg);

    /// Returns the registration (with api_key cleared) or throws Unauthorized.
    DeviceRegistration authenticate(const std::string& api_key, const std::string& device_id) const;

    IngestResult ingest(const std::string& api_key, const std::string& device_id, const MeasurementBatch& batch);

    /// JSON list of registrations; keys are stored as {"salt","api_key_digest"}.
    void save_registry(const std::filesystem::path& path) const;
    void load_registry(const std::filesystem::path& path);

    std::size_t device_count() const;

private:
    struct Entry {
        DeviceRegistration reg;  // api_key empty
        std::string salt;
        std::string key_digest;
    };

    static std::string digest(const std::string& salt, const std::string& api_key);
    void insert(Entry entry);
    Timestamp now() const;

    broker::ContextBroker& broker_;
    std::function<Timestamp()> clock_;
    mutable std::shared_mutex mutex_;
    std::map<std::string, Entry> devices_;
    std::uint64_t salt_counter_{0};
};

}  // namespace vitoria::ingest
