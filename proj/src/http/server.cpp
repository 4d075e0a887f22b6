#include "vitoria/http/server.hpp"

#include <httplib.h>

#include <charconv>
#include <limits>

namespace vitoria::http {

namespace {

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

void send_json(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& description) {
    send_json(res, status_for(code), Json{{"error", std::string(to_string(code))}, {"description", description}});
}

Handler guarded(Handler h) {
    return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
        try {
            h(req, res);
        } catch (const Error& e) {
            send_error(res, e.code(), e.what());
        } catch (const Json::exception& e) {
            send_error(res, ErrorCode::Malformed, e.what());
        }
    };
}

Json parse_body(const httplib::Request& req) {
    if (req.body.empty()) throw Error(ErrorCode::Malformed, "empty body");
    try {
        return Json::parse(req.body);
    } catch (const Json::parse_error& e) {
        throw Error(ErrorCode::Malformed, e.what());
    }
}

std::string required_param(const httplib::Request& req, const std::string& name) {
    if (!req.has_param(name) || req.get_param_value(name).empty())
        throw Error(ErrorCode::Malformed, "missing query parameter " + name);
    return req.get_param_value(name);
}

std::size_t size_param(const httplib::Request& req, const std::string& name, std::size_t fallback) {
    if (!req.has_param(name)) return fallback;
    const auto text = req.get_param_value(name);
    std::size_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw Error(ErrorCode::Malformed, name + " must be a non-negative integer");
    return value;
}

// Attributes sent without observedAt are stamped with the server clock.
void stamp(Json& body, Timestamp now) {
    if (!body.is_object()) throw Error(ErrorCode::Malformed, "entity must be an object");
    for (auto& [name, attr] : body.items()) {
        if (name == "id" || name == "type") continue;
        if (!attr.is_object()) attr = Json{{"value", attr}};
        if (!attr.contains("observedAt")) attr["observedAt"] = format_timestamp(now);
    }
}

template <typename T>
T& need(T* service, const char* name) {
    if (!service) throw Error(ErrorCode::NotConfigured, std::string(name) + " is not available");
    return *service;
}

}  // namespace

int status_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::Malformed:
        case ErrorCode::NonNumeric:
        case ErrorCode::ParseError:
        case ErrorCode::InvalidInput:
        case ErrorCode::Unordered:
            return 400;
        case ErrorCode::Unauthorized:
            return 401;
        case ErrorCode::NotFound:
        case ErrorCode::UnknownSeries:
        case ErrorCode::UnknownPrompt:
            return 404;
        case ErrorCode::StaleUpdate:
        case ErrorCode::DuplicateDevice:
            return 409;
        case ErrorCode::Expired:
            return 410;
        case ErrorCode::ValidationFailed:
        case ErrorCode::InsufficientOverlap:
        case ErrorCode::EmptyWindow:
        case ErrorCode::OutOfSpan:
            return 422;
        case ErrorCode::NotConfigured:
        case ErrorCode::Offline:
            return 503;
        case ErrorCode::ConfigError:
            return 500;
    }
    return 500;
}

HttpSink::HttpSink(std::string url, int timeout_seconds) : url_(std::move(url)), timeout_seconds_(timeout_seconds) {
    const auto scheme = url_.find("://");
    if (scheme == std::string::npos || url_.substr(0, scheme) != "http")
        throw Error(ErrorCode::Malformed, "sink url must start with http://: " + url_);
    const auto slash = url_.find('/', scheme + 3);
    origin_ = url_.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : url_.substr(slash);
    if (origin_.size() <= scheme + 3) throw Error(ErrorCode::Malformed, "sink url has no host: " + url_);
}

bool HttpSink::deliver(const broker::Notification& n) {
    httplib::Client client(origin_);
    client.set_connection_timeout(timeout_seconds_);
    client.set_read_timeout(timeout_seconds_);
    auto res = client.Post(path_, n.to_json().dump(), "application/json");
    return res && res->status >= 200 && res->status < 300;
}

Server::Server(Services services, ServerOptions options)
    : services_(services), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
    routes();
}

Server::~Server() { stop(); }

Timestamp Server::now() const {
    if (options_.clock) return options_.clock();
    return std::chrono::floor<Seconds>(std::chrono::system_clock::now());
}

int Server::bind_any_port(const std::string& host) { return server_->bind_to_any_port(host); }
bool Server::listen_after_bind() { return server_->listen_after_bind(); }
bool Server::listen(const std::string& host, int port) { return server_->listen(host, port); }
void Server::stop() {
    if (server_ && server_->is_running()) server_->stop();
}
void Server::wait_until_ready() const { server_->wait_until_ready(); }

void Server::routes() {
    auto& s = *server_;

    auto authorize = [this](const httplib::Request& req, const std::string& user) {
        if (options_.user_tokens.empty()) return;
        auto it = options_.user_tokens.find(user);
        const auto header = req.get_header_value("Authorization");
        if (it == options_.user_tokens.end() || header != "Bearer " + it->second)
            throw Error(ErrorCode::Unauthorized, "bad or missing bearer token");
    };

    s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            send_json(res, 500, Json{{"error", "Internal"}, {"description", e.what()}});
        } catch (...) {
            send_json(res, 500, Json{{"error", "Internal"}});
        }
    });

    // Context broker.
    s.Post("/v2/entities", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto& broker = need(services_.broker, "broker");
        auto body = parse_body(req);
        stamp(body, now());
        auto entity = broker::ContextEntity::from_json(body);
        if (entity.id.empty() || entity.type.empty()) throw Error(ErrorCode::Malformed, "id and type are required");
        bool exists = true;
        try {
            broker.get_entity(entity.id);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NotFound) throw;
            exists = false;
        }
        if (exists) throw Error(ErrorCode::ValidationFailed, "entity already exists: " + entity.id);
        broker.upsert_entity(entity);
        res.set_header("Location", "/v2/entities/" + entity.id);
        res.status = 201;
    }));

    s.Patch("/v2/entities/:id/attrs", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto& broker = need(services_.broker, "broker");
        const auto id = req.path_params.at("id");
        const auto current = broker.get_entity(id);
        auto body = parse_body(req);
        if (!body.is_object() || body.empty()) throw Error(ErrorCode::Malformed, "body must be a non-empty object");
        stamp(body, now());
        body["id"] = id;
        body["type"] = current.type;
        auto update = broker::ContextEntity::from_json(body);
        broker.upsert_entity(update);
        res.status = 204;
    }));

    s.Get("/v2/entities/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto& broker = need(services_.broker, "broker");
        send_json(res, 200, broker.get_entity(req.path_params.at("id")).to_json());
    }));

    s.Get("/v2/entities", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto& broker = need(services_.broker, "broker");
        const auto type = req.get_param_value("type");
        const auto predicates = broker::parse_query(req.get_param_value("q"));
        Json out = Json::array();
        for (const auto& e : broker.query_entities(type, predicates)) out.push_back(e.to_json());
        send_json(res, 200, out);
    }));

    // Accepts {"subject": {"entities": [{"type"}], "condition": {"attrs": [...]}},
    //          "notification": {"http": {"url"}}, "throttling": seconds}.
    s.Post("/v2/subscriptions", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto& broker = need(services_.broker, "broker");
        auto body = parse_body(req);
        broker::Subscription sub;
        if (auto subj = body.find("subject"); subj != body.end()) {
            if (auto ents = subj->find("entities"); ents != subj->end() && !ents->empty())
                sub.entity_type_filter = ents->at(0).value("type", std::string(broker::kAnyType));
            if (auto cond = subj->find("condition"); cond != subj->end())
                for (const auto& a : cond->value("attrs", Json::array())) sub.watched_attributes.insert(a.get<std::string>());
        }
        const auto url = body.at("notification").at("http").at("url").get<std::string>();
        sub.sink = std::make_shared<HttpSink>(url);
        sub.throttling = Seconds{body.value("throttling", 0)};
        if (sub.throttling.count() < 0) throw Error(ErrorCode::Malformed, "throttling must be >= 0");
        const auto id = broker.create_subscription(std::move(sub));
        res.set_header("Location", "/v2/subscriptions/" + id);
        send_json(res, 201, Json{{"id", id}});
    }));

    s.Delete("/v2/subscriptions/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto& broker = need(services_.broker, "broker");
        if (!broker.remove_subscription(req.path_params.at("id")))
            throw Error(ErrorCode::NotFound, "no subscription " + req.path_params.at("id"));
        res.status = 204;
    }));

    // Ingest gateway.
    s.Post("/iot/measures", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto& gateway = need(services_.gateway, "gateway");
        const auto key = required_param(req, "k");
        const auto device = required_param(req, "i");
        gateway.authenticate(key, device);
        const auto batch = ingest::parse_batch(parse_body(req));
        send_json(res, 200, gateway.ingest(key, device, batch).to_json());
    }));

    // History store.
    s.Get("/sth/:entity/attrs/:attr", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto& history = need(services_.history, "history");
        history::SeriesKey key{req.path_params.at("entity"), req.path_params.at("attr")};
        history::TimeRange range{Timestamp{Seconds{std::numeric_limits<std::int32_t>::min()}},
                                 Timestamp{Seconds{std::numeric_limits<std::int32_t>::max()}}};
        if (req.has_param("dateFrom")) range.from = parse_timestamp(req.get_param_value("dateFrom"));
        if (req.has_param("dateTo")) range.to = parse_timestamp(req.get_param_value("dateTo"));
        if (!(range.from < range.to)) throw Error(ErrorCode::Malformed, "dateFrom must precede dateTo");

        Json out{{"entityId", key.entity_id}, {"attribute", key.attribute}};
        if (req.has_param("aggrMethod")) {
            history::AggregateQuery q{key, range, history::parse_method(req.get_param_value("aggrMethod")),
                                      history::parse_resolution(req.has_param("aggrPeriod")
                                                                    ? req.get_param_value("aggrPeriod")
                                                                    : std::string("day"))};
            out["aggrMethod"] = std::string(history::to_string(q.method));
            out["aggrPeriod"] = std::string(history::to_string(q.resolution));
            Json buckets = Json::array();
            for (const auto& b : history.query_aggregate(q)) {
                Json row{{"start", format_timestamp(b.bucket_start)}, {"value", b.value}};
                if (q.method == history::AggregateMethod::Occurrences) row["occurrences"] = b.occurrences;
                buckets.push_back(std::move(row));
            }
            out["buckets"] = std::move(buckets);
        } else {
            const auto limit = size_param(req, "hLimit", options_.default_history_limit);
            const auto page = history.query_raw(key, range, limit, req.get_param_value("hOffset"));
            Json values = Json::array();
            for (const auto& p : page.points) values.push_back(Json{{"t", format_timestamp(p.observed_at)}, {"v", p.value}});
            out["values"] = std::move(values);
            if (page.next_token) out["next"] = *page.next_token;
        }
        send_json(res, 200, out);
    }));

    // Engagement engine.
    s.Get("/prompts", guarded([this, authorize](const httplib::Request& req, httplib::Response& res) {
        auto& engine = need(services_.engine, "engine");
        const auto user = required_param(req, "user");
        authorize(req, user);
        Json out = Json::array();
        for (const auto& p : engine.list_pending(user, now())) out.push_back(p.to_json());
        send_json(res, 200, out);
    }));

    s.Post("/prompts/:id/answer", guarded([this, authorize](const httplib::Request& req, httplib::Response& res) {
        auto& engine = need(services_.engine, "engine");
        const auto id = req.path_params.at("id");
        const auto prompt = engine.find_pending(id);
        if (prompt) authorize(req, prompt->user);
        const auto record = engine.submit_answer(id, parse_body(req), now());
        send_json(res, 201, record.to_event().to_json());
    }));

    // Device-side triggers: bt_scan {person_devices} and vehicle_episode {start, end}.
    // Other kinds are only logged.
    s.Post("/events", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto& engine = need(services_.engine, "engine");
        auto body = parse_body(req);
        if (!body.is_array()) body = Json::array({body});
        std::vector<SensorEvent> events;
        for (const auto& j : body) events.push_back(SensorEvent::from_json(j));
        Json prompts = Json::array();
        for (const auto& ev : events) {
            std::optional<engagement::PendingPrompt> raised;
            if (ev.kind == "bt_scan") {
                raised = engine.on_proximity(ev.user, ev.payload.at("person_devices").get<int>(), ev.t);
            } else if (ev.kind == "vehicle_episode") {
                sensing::ActivitySegment seg{sensing::ActivityLabel::InVehicle,
                                             parse_timestamp(ev.payload.at("start").get<std::string>()),
                                             parse_timestamp(ev.payload.at("end").get<std::string>())};
                raised = engine.on_vehicle_episode(ev.user, seg, ev.t);
            }
            if (options_.event_log) options_.event_log(ev);
            if (raised) prompts.push_back(raised->to_json());
        }
        send_json(res, 202, Json{{"accepted", events.size()}, {"prompts", prompts}});
    }));

    // Risk feed.
    s.Get("/risk", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto& risk = need(services_.risk, "risk");
        const auto municipality = required_param(req, "municipality");
        const Date date = req.has_param("date") ? parse_date(req.get_param_value("date")) : date_of(now());
        const auto level = risk.lookup_risk(municipality, date);
        send_json(res, 200,
                  Json{{"municipality", municipality},
                       {"date", format_date(date)},
                       {"level", std::string(risk::to_string(level))},
                       {"display", std::string(risk::display_name(level))}});
    }));

    // Feedback granter.
    s.Get("/feedback", guarded([this, authorize](const httplib::Request& req, httplib::Response& res) {
        auto& granter = need(services_.granter, "granter");
        const auto user = required_param(req, "user");
        authorize(req, user);
        const auto latest = granter.latest_metrics(user);
        if (!latest) throw Error(ErrorCode::NotFound, "no feedback published for " + user);
        Json out{{"user", user}, {"group", std::string(feedback::to_string(feedback::assign_group(user)))}};
        if (req.has_param("window")) {
            const auto w = feedback::parse_window(req.get_param_value("window"));
            for (const auto& m : *latest)
                if (m.window == w) out["metrics"] = m.to_json();
        } else {
            Json all = Json::object();
            for (const auto& m : *latest) all[std::string(feedback::to_string(m.window))] = m.to_json();
            out["metrics"] = std::move(all);
        }
        send_json(res, 200, out);
    }));

    s.Get("/weekly", guarded([this, authorize](const httplib::Request& req, httplib::Response& res) {
        auto& granter = need(services_.granter, "granter");
        const auto user = required_param(req, "user");
        authorize(req, user);
        const auto report = granter.latest_report(user);
        if (!report) throw Error(ErrorCode::NotFound, "no weekly report for " + user);
        send_json(res, 200, report->to_json());
    }));
}

}  // namespace vitoria::http
