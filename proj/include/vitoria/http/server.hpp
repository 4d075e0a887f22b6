#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>

#include "vitoria/broker/context_broker.hpp"
#include "vitoria/engagement/engine.hpp"
#include "vitoria/error.hpp"
#include "vitoria/feedback/granter.hpp"
#include "vitoria/history/history_store.hpp"
#include "vitoria/ingest/gateway.hpp"
#include "vitoria/risk/risk_feed.hpp"

namespace httplib {
class Server;
}

namespace vitoria::http {

/// HTTP status for an error code.
int status_for(ErrorCode code);

/// Posts notifications as JSON to a URL of the form http://host[:port]/path.
class HttpSink final : public broker::NotificationSink {
public:
    explicit HttpSink(std::string url, int timeout_seconds = 5);

    bool deliver(const broker::Notification& n) override;
    std::string describe() const override { return url_; }

private:
    std::string url_;
    std::string origin_;
    std::string path_;
    int timeout_seconds_;
};

/// The services a server exposes. Any pointer may be null; its routes then answer 503.
struct Services {
    broker::ContextBroker* broker{nullptr};
    ingest::Gateway* gateway{nullptr};
    history::HistoryStore* history{nullptr};
    engagement::EngagementEngine* engine{nullptr};
    feedback::FeedbackGranter* granter{nullptr};
    risk::RiskService* risk{nullptr};
};

struct ServerOptions {
    std::function<Timestamp()> clock;
    /// user -> bearer token. When non-empty, participant routes require
    /// "Authorization: Bearer <token>" matching the user they touch.
    std::map<std::string, std::string> user_tokens;
    /// Receives every event accepted through POST /events.
    std::function<void(const SensorEvent&)> event_log;
    std::size_t default_history_limit{100};
};

class Server {
public:
    Server(Services services, ServerOptions options = {});
    ~Server();

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Binds to a free port and returns it; call listen_after_bind() to serve.
    int bind_any_port(const std::string& host = "127.0.0.1");
    bool listen_after_bind();
    bool listen(const std::string& host, int port);
    void stop();
    void wait_until_ready() const;

private:
    void routes();
    Timestamp now() const;

    Services services_;
    ServerOptions options_;
    std::unique_ptr<httplib::Server> server_;
};

}  // namespace vitoria::http
