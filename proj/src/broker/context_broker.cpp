#include "vitoria/broker/context_broker.hpp"

#include <algorithm>
#include <charconv>
#include <iostream>

#include "vitoria/error.hpp"

namespace vitoria::broker {
namespace {

Json attribute_to_json(const AttributeValue& a) {
    Json j{{"value", a.value}, {"observedAt", format_timestamp(a.observed_at)}};
    if (!a.metadata.empty()) j["metadata"] = a.metadata;
    return j;
}

AttributeValue attribute_from_json(const Json& j) {
    AttributeValue a;
    if (j.is_object() && j.contains("value")) {
        a.value = j.at("value");
        if (!j.contains("observedAt")) {
            throw Error(ErrorCode::Malformed, "attribute lacks observedAt");
        }
        a.observed_at = parse_timestamp(j.at("observedAt").get<std::string>());
        a.metadata = j.value("metadata", Json::object());
    } else {
        throw Error(ErrorCode::Malformed, "attribute must be an object with value and observedAt");
    }
    return a;
}

Json parse_scalar(std::string_view text) {
    if (text == "true") return true;
    if (text == "false") return false;
    double d = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), d);
    if (ec == std::errc{} && ptr == text.data() + text.size() && !text.empty()) {
        long long i = 0;
        auto [iptr, iec] = std::from_chars(text.data(), text.data() + text.size(), i);
        if (iec == std::errc{} && iptr == text.data() + text.size()) return i;
        return d;
    }
    if (text.size() >= 2 && (text.front() == '\'' || text.front() == '"') && text.back() == text.front()) {
        text = text.substr(1, text.size() - 2);
    }
    return std::string(text);
}

}  // namespace

Json ContextEntity::to_json() const {
    Json j{{"id", id}, {"type", type}};
    for (const auto& [name, attr] : attributes) j[name] = attribute_to_json(attr);
    return j;
}

ContextEntity ContextEntity::from_json(const Json& j) {
    if (!j.is_object()) throw Error(ErrorCode::Malformed, "entity must be an object");
    ContextEntity e;
    e.id = j.value("id", "");
    e.type = j.value("type", "");
    for (const auto& [key, val] : j.items()) {
        if (key == "id" || key == "type") continue;
        e.attributes.emplace(key, attribute_from_json(val));
    }
    return e;
}

Json Notification::to_json() const {
    return Json{{"subscriptionId", sub_id},
                {"data", Json::array({data.to_json()})},
                {"emittedAt", format_timestamp(emitted_at)}};
}

Notification Notification::from_json(const Json& j) {
    if (!j.is_object() || !j.contains("subscriptionId") || !j.contains("data") ||
        !j.at("data").is_array() || j.at("data").size() != 1) {
        throw Error(ErrorCode::Malformed, "notification needs subscriptionId and a one-element data array");
    }
    Notification n;
    n.sub_id = j.at("subscriptionId").get<std::string>();
    n.data = ContextEntity::from_json(j.at("data").at(0));
    n.emitted_at = j.contains("emittedAt") ? parse_timestamp(j.at("emittedAt").get<std::string>())
                                           : Timestamp{};
    return n;
}

bool AttributePredicate::matches(const Json& candidate) const {
    auto ordered = [&](auto cmp) {
        if (candidate.is_number() && value.is_number()) {
            return cmp(candidate.get<double>(), value.get<double>());
        }
        if (candidate.is_string() && value.is_string()) {
            return cmp(candidate.get<std::string>(), value.get<std::string>());
        }
        return false;
    };
    switch (op) {
        case Comparator::Equal:
            if (candidate.is_number() && value.is_number()) return candidate.get<double>() == value.get<double>();
            return candidate == value;
        case Comparator::NotEqual:
            if (candidate.is_number() && value.is_number()) return candidate.get<double>() != value.get<double>();
            return candidate != value;
        case Comparator::Less: return ordered([](const auto& a, const auto& b) { return a < b; });
        case Comparator::LessEqual: return ordered([](const auto& a, const auto& b) { return a <= b; });
        case Comparator::Greater: return ordered([](const auto& a, const auto& b) { return a > b; });
        case Comparator::GreaterEqual: return ordered([](const auto& a, const auto& b) { return a >= b; });
    }
    return false;
}

std::vector<AttributePredicate> parse_query(std::string_view q) {
    static constexpr std::pair<std::string_view, Comparator> kOps[] = {
        {"==", Comparator::Equal},         {"!=", Comparator::NotEqual}, {"<=", Comparator::LessEqual},
        {">=", Comparator::GreaterEqual}, {"<", Comparator::Less},      {">", Comparator::Greater},
    };
    std::vector<AttributePredicate> out;
    while (!q.empty()) {
        const auto semi = q.find(';');
        std::string_view term = q.substr(0, semi);
        q = semi == std::string_view::npos ? std::string_view{} : q.substr(semi + 1);
        if (term.empty()) continue;
        bool parsed = false;
        for (const auto& [token, op] : kOps) {
            const auto pos = term.find(token);
            if (pos == std::string_view::npos || pos == 0) continue;
            AttributePredicate p;
            p.attribute = std::string(term.substr(0, pos));
            p.op = op;
            p.value = parse_scalar(term.substr(pos + token.size()));
            out.push_back(std::move(p));
            parsed = true;
            break;
        }
        if (!parsed) throw Error(ErrorCode::Malformed, "bad query term '" + std::string(term) + "'");
    }
    return out;
}

ContextBroker::ContextBroker(BrokerOptions options) : options_(std::move(options)) {
    if (options_.wal_path) {
        std::ifstream in(*options_.wal_path);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            try {
                apply_locked(ContextEntity::from_json(Json::parse(line)), false);
            } catch (const std::exception& e) {
                throw ParseError(lineno, std::string("write-ahead log: ") + e.what());
            }
        }
        wal_.open(*options_.wal_path, std::ios::app);
        if (!wal_) throw Error(ErrorCode::ConfigError, "cannot open write-ahead log " + options_.wal_path->string());
    }
    if (options_.async_dispatch) {
        worker_ = std::thread([this] { worker_loop(); });
    }
}

ContextBroker::~ContextBroker() {
    {
        std::lock_guard lock(queue_mutex_);
        stopping_ = true;
    }
    queue_cv_.notify_all();
    if (worker_.joinable()) worker_.join();
}

Timestamp ContextBroker::now() const {
    if (options_.clock) return options_.clock();
    return std::chrono::floor<Seconds>(std::chrono::system_clock::now());
}

std::uint64_t ContextBroker::apply_locked(const ContextEntity& update, bool notify) {
    if (update.id.empty() || update.type.empty()) {
        throw Error(ErrorCode::Malformed, "entity id and type must be non-empty");
    }
    auto it = entities_.find(update.id);
    if (it != entities_.end()) {
        if (it->second.entity.type != update.type) {
            throw Error(ErrorCode::Malformed, "entity '" + update.id + "' already has type '" +
                                                  it->second.entity.type + "'");
        }
        for (const auto& [name, attr] : update.attributes) {
            auto old = it->second.entity.attributes.find(name);
            if (old != it->second.entity.attributes.end() && attr.observed_at < old->second.observed_at) {
                throw Error(ErrorCode::StaleUpdate, update.id + "." + name + " observed at " +
                                                        format_timestamp(attr.observed_at) + " precedes " +
                                                        format_timestamp(old->second.observed_at));
            }
        }
    }
    for (const auto& [name, attr] : update.attributes) {
        if (name.empty()) throw Error(ErrorCode::Malformed, "empty attribute name");
    }

    if (it == entities_.end()) {
        it = entities_.emplace(update.id, StoredEntity{ContextEntity{update.id, update.type, {}}, 0}).first;
    }
    auto& stored = it->second;
    Timestamp newest{};
    std::set<std::string> changed;
    for (const auto& [name, attr] : update.attributes) {
        auto& slot = stored.entity.attributes[name];
        if (slot != attr) changed.insert(name);
        slot = attr;
        newest = std::max(newest, attr.observed_at);
    }
    ++stored.version;

    if (wal_.is_open() && notify) {
        wal_ << update.to_json().dump() << '\n';
        wal_.flush();
    }
    if (!notify) return stored.version;

    const Timestamp emitted = std::max(now(), newest);
    std::vector<Pending> batch;
    for (auto& [id, state] : subscriptions_) {
        const auto& sub = state->sub;
        if (sub.entity_type_filter != kAnyType && sub.entity_type_filter != update.type) continue;
        ContextEntity fragment{update.id, update.type, {}};
        for (const auto& [name, attr] : update.attributes) {
            if (!changed.count(name)) continue;
            if (sub.watched_attributes.empty() || sub.watched_attributes.count(name)) {
                fragment.attributes.emplace(name, attr);
            }
        }
        if (fragment.attributes.empty()) continue;
        if (state->last_emitted && emitted - *state->last_emitted < sub.throttling) continue;
        state->last_emitted = emitted;
        batch.push_back(Pending{state, Notification{sub.sub_id, std::move(fragment), emitted}});
    }
    if (!batch.empty()) {
        std::lock_guard lock(queue_mutex_);
        for (auto& p : batch) queue_.push_back(std::move(p));
    }
    return stored.version;
}

std::uint64_t ContextBroker::upsert_entity(const ContextEntity& entity) {
    std::uint64_t version = 0;
    {
        std::lock_guard lock(state_mutex_);
        version = apply_locked(entity, true);
    }
    if (options_.async_dispatch) {
        queue_cv_.notify_one();
    } else {
        pump();
    }
    return version;
}

void ContextBroker::dispatch_one(Pending& p) {
    const int attempts_allowed = 1 + std::max(0, options_.retries);
    int attempts = 0;
    bool ok = false;
    while (!ok && attempts < attempts_allowed) {
        ++attempts;
        try {
            ok = p.target->sub.sink && p.target->sub.sink->deliver(p.notification);
        } catch (const std::exception& e) {
            std::cerr << "broker: sink " << p.target->sub.sink->describe() << " threw: " << e.what() << '\n';
            ok = false;
        }
    }
    std::lock_guard lock(queue_mutex_);
    if (ok) {
        ++p.target->delivered;
        return;
    }
    DeadLetter dl{p.notification, p.target->sub.sink ? p.target->sub.sink->describe() : "<none>", attempts};
    if (options_.dead_letter_path) {
        std::ofstream out(*options_.dead_letter_path, std::ios::app);
        out << Json{{"sink", dl.sink}, {"attempts", attempts}, {"notification", dl.notification.to_json()}}.dump()
            << '\n';
    }
    dead_letters_.push_back(std::move(dl));
}

void ContextBroker::pump() {
    // One deliverer at a time keeps per-subscription order.
    std::lock_guard delivery(delivery_mutex_);
    for (;;) {
        Pending p;
        {
            std::lock_guard lock(queue_mutex_);
            if (queue_.empty()) return;
            p = std::move(queue_.front());
            queue_.pop_front();
        }
        dispatch_one(p);
    }
}

void ContextBroker::worker_loop() {
    for (;;) {
        Pending p;
        {
            std::unique_lock lock(queue_mutex_);
            queue_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
            if (queue_.empty()) {
                if (stopping_) return;
                continue;
            }
            p = std::move(queue_.front());
            queue_.pop_front();
            in_flight_ = true;
        }
        dispatch_one(p);
        {
            std::lock_guard lock(queue_mutex_);
            in_flight_ = false;
        }
        idle_cv_.notify_all();
    }
}

void ContextBroker::drain() {
    if (!options_.async_dispatch) {
        pump();
        return;
    }
    std::unique_lock lock(queue_mutex_);
    queue_cv_.notify_one();
    idle_cv_.wait(lock, [&] { return queue_.empty() && !in_flight_; });
}

ContextEntity ContextBroker::get_entity(const std::string& id) const {
    std::lock_guard lock(state_mutex_);
    auto it = entities_.find(id);
    if (it == entities_.end()) throw Error(ErrorCode::NotFound, "entity '" + id + "'");
    return it->second.entity;
}

std::uint64_t ContextBroker::version(const std::string& id) const {
    std::lock_guard lock(state_mutex_);
    auto it = entities_.find(id);
    if (it == entities_.end()) throw Error(ErrorCode::NotFound, "entity '" + id + "'");
    return it->second.version;
}

std::vector<ContextEntity> ContextBroker::query_entities(std::string_view type_filter,
                                                         const std::vector<AttributePredicate>& predicates) const {
    std::lock_guard lock(state_mutex_);
    std::vector<ContextEntity> out;
    for (const auto& [id, stored] : entities_) {
        const auto& e = stored.entity;
        if (!type_filter.empty() && type_filter != kAnyType && e.type != type_filter) continue;
        const bool all = std::all_of(predicates.begin(), predicates.end(), [&](const AttributePredicate& p) {
            auto it = e.attributes.find(p.attribute);
            return it != e.attributes.end() && p.matches(it->second.value);
        });
        if (all) out.push_back(e);
    }
    return out;
}

std::string ContextBroker::create_subscription(Subscription sub) {
    if (!sub.sink) throw Error(ErrorCode::Malformed, "subscription needs a sink");
    if (sub.throttling < Seconds{0}) throw Error(ErrorCode::Malformed, "negative throttling");
    if (sub.entity_type_filter.empty()) sub.entity_type_filter = std::string(kAnyType);
    std::lock_guard lock(state_mutex_);
    if (sub.sub_id.empty()) sub.sub_id = "sub-" + std::to_string(next_sub_++);
    if (subscriptions_.count(sub.sub_id)) throw Error(ErrorCode::Malformed, "duplicate subscription id " + sub.sub_id);
    auto id = sub.sub_id;
    subscriptions_.emplace(id, std::make_shared<SubState>(SubState{std::move(sub), std::nullopt, 0}));
    return id;
}

bool ContextBroker::remove_subscription(const std::string& sub_id) {
    std::lock_guard lock(state_mutex_);
    return subscriptions_.erase(sub_id) > 0;
}

std::vector<DeadLetter> ContextBroker::dead_letters() const {
    std::lock_guard lock(queue_mutex_);
    return dead_letters_;
}

std::uint64_t ContextBroker::delivered(const std::string& sub_id) const {
    std::shared_ptr<SubState> state;
    {
        std::lock_guard lock(state_mutex_);
        auto it = subscriptions_.find(sub_id);
        if (it == subscriptions_.end()) throw Error(ErrorCode::NotFound, "subscription '" + sub_id + "'");
        state = it->second;
    }
    std::lock_guard lock(queue_mutex_);
    return state->delivered;
}

std::size_t ContextBroker::entity_count() const {
    std::lock_guard lock(state_mutex_);
    return entities_.size();
}

}  // namespace vitoria::broker
