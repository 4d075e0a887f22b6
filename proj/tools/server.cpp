// Wall-clock deployment of the platform services behind one HTTP listener.

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "vitoria/http/server.hpp"
#include "vitoria/ingest/envelope.hpp"

using namespace vitoria;

namespace {

std::atomic<http::Server*> g_server{nullptr};

void on_signal(int) {
    if (auto* s = g_server.load()) s->stop();
}

std::vector<std::string> split_users(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream in(text);
    for (std::string item; std::getline(in, item, ',');)
        if (!item.empty()) out.push_back(item);
    return out;
}

Timestamp wall_now() { return std::chrono::floor<Seconds>(std::chrono::system_clock::now()); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Serve the sensing platform over HTTP"};
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string registry, risk_file, templates, history_dir, wal, tokens_file, users_arg, log_file;
    bool baseline = false;
    int tick_seconds = 30;
    app.add_option("--host", host);
    app.add_option("--port", port);
    app.add_option("--registry", registry, "device registry JSON")->check(CLI::ExistingFile);
    app.add_option("--risk", risk_file, "municipality,level,effective_date CSV")->check(CLI::ExistingFile);
    app.add_option("--templates", templates, "report message templates")->check(CLI::ExistingFile);
    app.add_option("--history-dir", history_dir, "persist time series here");
    app.add_option("--wal", wal, "broker write-ahead log");
    app.add_option("--tokens", tokens_file, "JSON object user -> bearer token")->check(CLI::ExistingFile);
    app.add_option("--users", users_arg, "comma-separated participants to schedule");
    app.add_option("--events-log", log_file, "append accepted events here");
    app.add_flag("--baseline", baseline, "withhold all feedback");
    app.add_option("--tick", tick_seconds, "scheduler period in seconds")->check(CLI::PositiveNumber);
    CLI11_PARSE(app, argc, argv);

    try {
        broker::BrokerOptions bo;
        bo.async_dispatch = true;
        if (!wal.empty()) bo.wal_path = wal;
        broker::ContextBroker broker(bo);

        history::HistoryStore history(history_dir.empty() ? std::nullopt
                                                          : std::optional<std::filesystem::path>(history_dir));
        broker.create_subscription({"", "Participant", {}, history.sink(), Seconds{0}});

        ingest::Gateway gateway(broker);
        if (!registry.empty()) gateway.load_registry(registry);

        risk::RiskService risk;
        if (!risk_file.empty()) risk.reload(risk_file);

        std::ofstream events_out;
        if (!log_file.empty()) events_out.open(log_file, std::ios::app);
        std::mutex log_mutex;
        auto log_event = [&](const SensorEvent& ev) {
            if (!events_out.is_open()) return;
            std::lock_guard lock(log_mutex);
            events_out << ev.to_json().dump() << '\n';
            events_out.flush();
        };

        const auto aliases = ingest::participant_aliases();
        engagement::EngineOptions eo;
        eo.seed = 1;
        eo.answer_sink = [&](const SensorEvent& ev) {
            log_event(ev);
            broker::ContextEntity update{ev.user, "Participant", {}};
            for (const auto& m : ingest::to_batch(ev)) {
                auto it = aliases.find(m.alias);
                if (it != aliases.end()) update.attributes[it->second] = {m.value, m.observed_at, Json::object()};
            }
            if (!update.attributes.empty()) broker.upsert_entity(update);
        };
        eo.platform_log = log_event;
        engagement::EngagementEngine engine(std::move(eo));

        feedback::GranterOptions go;
        go.baseline_phase = baseline;
        if (!templates.empty()) go.templates = feedback::MessageTemplates::load(templates);
        feedback::FeedbackGranter granter(history, broker, std::move(go));

        const auto users = split_users(users_arg);
        for (const auto& u : users) granter.add_user(u);

        http::ServerOptions so;
        so.event_log = log_event;
        if (!tokens_file.empty()) {
            std::ifstream in(tokens_file);
            so.user_tokens = Json::parse(in).get<std::map<std::string, std::string>>();
        }
        http::Server server({&broker, &gateway, &history, &engine, &granter, &risk}, std::move(so));

        std::atomic<bool> running{true};
        std::thread scheduler([&] {
            std::set<Date> scheduled;
            while (running) {
                const auto now = wall_now();
                for (const Date d : {date_of(now), add_days(date_of(now), 1)}) {
                    if (!scheduled.insert(d).second) continue;
                    for (const auto& u : users) engine.schedule_day(u, d);
                }
                engine.advance(now);
                granter.on_tick(now);
                for (int i = 0; i < tick_seconds * 10 && running; ++i)
                    std::this_thread::sleep_for(std::chrono::milliseconds(100));
            }
        });

        g_server = &server;
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        std::cerr << "listening on " << host << ':' << port << '\n';
        const bool ok = server.listen(host, port);
        running = false;
        scheduler.join();
        g_server = nullptr;
        broker.drain();
        history.flush();
        if (!ok) {
            std::cerr << "could not listen on " << host << ':' << port << '\n';
            return 1;
        }
    } catch (const std::exception& e) {
        std::cerr << e.what() << '\n';
        return 1;
    }
    return 0;
}
