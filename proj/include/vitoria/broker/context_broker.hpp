#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "vitoria/event.hpp"
#include "vitoria/time.hpp"

namespace vitoria::broker {

struct AttributeValue {
    Json value;
    Timestamp observed_at{};
    Json metadata = Json::object();

    bool operator==(const AttributeValue&) const = default;
};

struct ContextEntity {
    std::string id;
    std::string type;
    std::map<std::string, AttributeValue> attributes;

    /// NGSI v2 normalized shape: {"id","type", attr: {"value","observedAt","metadata"}}.
    Json to_json() const;
    static ContextEntity from_json(const Json& j);

    bool operator==(const ContextEntity&) const = default;
};

struct Notification {
    std::string sub_id;
    ContextEntity data;  // only the changed, watched attributes
    Timestamp emitted_at{};

    /// Wire form: {"subscriptionId": ..., "data": [entity fragment], "emittedAt": ...}.
    Json to_json() const;
    static Notification from_json(const Json& j);
};

/// Receives notifications. Returning false (or throwing) counts as a failed attempt.
class NotificationSink {
public:
    virtual ~NotificationSink() = default;
    virtual bool deliver(const Notification& n) = 0;
    virtual std::string describe() const = 0;
};

class CallbackSink final : public NotificationSink {
public:
    using Callback = std::function<bool(const Notification&)>;
    explicit CallbackSink(Callback cb, std::string name = "callback")
        : cb_(std::move(cb)), name_(std::move(name)) {}
    bool deliver(const Notification& n) override { return cb_(n); }
    std::string describe() const override { return name_; }

private:
    Callback cb_;
    std::string name_;
};

inline constexpr std::string_view kAnyType = "*";

struct Subscription {
    std::string sub_id;  // assigned by the broker when empty
    std::string entity_type_filter{kAnyType};
    std::set<std::string> watched_attributes;  // empty = all
    std::shared_ptr<NotificationSink> sink;
    Seconds throttling{0};
};

enum class Comparator { Equal, NotEqual, Less, LessEqual, Greater, GreaterEqual };

struct AttributePredicate {
    std::string attribute;
    Comparator op{Comparator::Equal};
    Json value;

    bool matches(const Json& candidate) const;
};

/// Parses the simple query language "steps>110;noise<=50;activity==still".
std::vector<AttributePredicate> parse_query(std::string_view q);

struct DeadLetter {
    Notification notification;
    std::string sink;
    int attempts{0};
};

struct BrokerOptions {
    std::function<Timestamp()> clock;  // defaults to the system clock
    bool async_dispatch{false};
    int retries{3};
    std::optional<std::filesystem::path> wal_path;
    std::optional<std::filesystem::path> dead_letter_path;
};

class ContextBroker {
public:
    explicit ContextBroker(BrokerOptions options = {});
    ~ContextBroker();

    ContextBroker(const ContextBroker&) = delete;
    ContextBroker& operator=(const ContextBroker&) = delete;

    /// Creates or merges the entity. Returns the new version (1 on create).
    std::uint64_t upsert_entity(const ContextEntity& entity);

    ContextEntity get_entity(const std::string& id) const;
    std::uint64_t version(const std::string& id) const;

    /// Matching entities ordered by id. An empty filter or "*" matches every type.
    std::vector<ContextEntity> query_entities(std::string_view type_filter,
                                              const std::vector<AttributePredicate>& predicates) const;

    std::string create_subscription(Subscription sub);
    bool remove_subscription(const std::string& sub_id);

    /// Blocks until every queued notification has been delivered or dead-lettered.
    void drain();

    std::vector<DeadLetter> dead_letters() const;
    std::uint64_t delivered(const std::string& sub_id) const;
    std::size_t entity_count() const;

private:
    struct SubState {
        Subscription sub;
        std::optional<Timestamp> last_emitted;
        std::uint64_t delivered{0};
    };
    struct StoredEntity {
        ContextEntity entity;
        std::uint64_t version{0};
    };
    struct Pending {
        std::shared_ptr<SubState> target;
        Notification notification;
    };

    std::uint64_t apply_locked(const ContextEntity& update, bool notify);
    void dispatch_one(Pending& p);
    void pump();
    void worker_loop();
    Timestamp now() const;

    BrokerOptions options_;

    mutable std::mutex state_mutex_;
    std::map<std::string, StoredEntity> entities_;
    std::map<std::string, std::shared_ptr<SubState>> subscriptions_;
    std::uint64_t next_sub_{1};
    std::ofstream wal_;

    mutable std::mutex queue_mutex_;
    std::condition_variable queue_cv_;
    std::condition_variable idle_cv_;
    std::deque<Pending> queue_;
    bool in_flight_{false};
    bool stopping_{false};
    std::mutex delivery_mutex_;
    std::vector<DeadLetter> dead_letters_;
    std::thread worker_;
};

}  // namespace vitoria::broker
