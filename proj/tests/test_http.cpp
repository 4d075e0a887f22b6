#include "support.hpp"

#include <httplib.h>

#include <condition_variable>
#include <thread>

#include "vitoria/attributes.hpp"
#include "vitoria/http/server.hpp"

using namespace vitoria;
using namespace vitoria::testing;

namespace {

struct Stack {
    Timestamp now = ts(2021, 2, 6, 12);
    broker::ContextBroker broker{{[this] { return now; }}};
    history::HistoryStore history;
    ingest::Gateway gateway{broker, [this] { return now; }};
    engagement::EngagementEngine engine;
    feedback::FeedbackGranter granter{history, broker};
    risk::RiskService risk;
    std::vector<SensorEvent> logged;
    std::unique_ptr<http::Server> server;
    std::thread thread;
    int port{0};

    explicit Stack(std::map<std::string, std::string> tokens = {}) {
        broker.create_subscription({"", "Participant", {}, history.sink(), Seconds{0}});
        std::istringstream rows("Lisboa,high,2021-01-01\nLisboa,moderated,2021-03-01\n");
        risk.replace(risk::RiskTable::parse(rows));
        http::ServerOptions o;
        o.clock = [this] { return now; };
        o.user_tokens = std::move(tokens);
        o.event_log = [this](const SensorEvent& ev) { logged.push_back(ev); };
        server = std::make_unique<http::Server>(http::Services{&broker, &gateway, &history, &engine, &granter, &risk},
                                                std::move(o));
        port = server->bind_any_port();
        thread = std::thread([this] { server->listen_after_bind(); });
        server->wait_until_ready();
    }
    ~Stack() {
        server->stop();
        thread.join();
    }
    httplib::Client client() const { return httplib::Client("127.0.0.1", port); }
};

Json body_of(const httplib::Result& r) { return Json::parse(r->body); }

}  // namespace

TEST_CASE("entity lifecycle over HTTP") {
    Stack s;
    auto c = s.client();
    auto r = c.Post("/v2/entities", R"({"id":"u1","type":"Participant","steps":{"value":100}})", "application/json");
    REQUIRE(r);
    CHECK(r->status == 201);
    CHECK(r->get_header_value("Location") == "/v2/entities/u1");
    CHECK(c.Post("/v2/entities", R"({"id":"u1","type":"Participant","steps":{"value":1}})", "application/json")->status == 422);

    s.now += Seconds{60};
    r = c.Patch("/v2/entities/u1/attrs", R"({"steps":{"value":120}})", "application/json");
    CHECK(r->status == 204);
    r = c.Get("/v2/entities/u1");
    REQUIRE(r->status == 200);
    CHECK(body_of(r).at("steps").at("value") == 120);
    CHECK(c.Get("/v2/entities/ghost")->status == 404);
    CHECK(c.Patch("/v2/entities/ghost/attrs", R"({"steps":{"value":1}})", "application/json")->status == 404);

    r = c.Patch("/v2/entities/u1/attrs", R"({"steps":{"value":5,"observedAt":"2021-01-01T00:00:00Z"}})",
                "application/json");
    CHECK(r->status == 409);

    c.Post("/v2/entities", R"({"id":"u2","type":"Participant","steps":{"value":90}})", "application/json");
    c.Post("/v2/entities", R"({"id":"d1","type":"Device","battery":{"value":50}})", "application/json");
    r = c.Get("/v2/entities?type=Participant&q=steps%3E110");
    REQUIRE(r->status == 200);
    auto list = body_of(r);
    REQUIRE(list.size() == 1);
    CHECK(list[0].at("id") == "u1");
    CHECK(body_of(c.Get("/v2/entities?type=Participant")).size() == 2);
    CHECK(c.Post("/v2/entities", "{not json", "application/json")->status == 400);
}

TEST_CASE("subscriptions notify an HTTP sink") {
    httplib::Server sink;
    std::mutex m;
    std::condition_variable cv;
    std::vector<Json> received;
    sink.Post("/notify", [&](const httplib::Request& req, httplib::Response& res) {
        {
            std::lock_guard lock(m);
            received.push_back(Json::parse(req.body));
        }
        cv.notify_all();
        res.status = 200;
    });
    const int sink_port = sink.bind_to_any_port("127.0.0.1");
    std::thread sink_thread([&] { sink.listen_after_bind(); });
    sink.wait_until_ready();

    {
        Stack s;
        auto c = s.client();
        const Json sub{{"subject", {{"entities", {{{"type", "Participant"}}}}, {"condition", {{"attrs", {"steps"}}}}}},
                       {"notification", {{"http", {{"url", "http://127.0.0.1:" + std::to_string(sink_port) + "/notify"}}}}}};
        auto r = c.Post("/v2/subscriptions", sub.dump(), "application/json");
        REQUIRE(r->status == 201);
        const auto id = body_of(r).at("id").get<std::string>();
        c.Post("/v2/entities", R"({"id":"u1","type":"Participant","steps":{"value":7},"noise":{"value":40}})",
               "application/json");
        {
            std::unique_lock lock(m);
            cv.wait_for(lock, std::chrono::seconds(5), [&] { return !received.empty(); });
        }
        REQUIRE(received.size() == 1);
        CHECK(received[0].at("subscriptionId") == id);
        CHECK(received[0].at("data").at(0).at("steps").at("value") == 7);
        CHECK_FALSE(received[0].at("data").at(0).contains("noise"));
        CHECK(c.Delete("/v2/subscriptions/" + id)->status == 204);
        CHECK(c.Delete("/v2/subscriptions/" + id)->status == 404);
        CHECK(c.Post("/v2/subscriptions", R"({"notification":{"http":{"url":"ftp://x"}}})", "application/json")->status ==
              400);
    }
    sink.stop();
    sink_thread.join();
}

TEST_CASE("device measurements over HTTP") {
    Stack s;
    s.gateway.register_device({"phone-u1", "secret", "u1", "Participant", {{"hr", "heart_rate"}}});
    auto c = s.client();
    const std::string body = R"([{"a":"hr","v":72,"t":"2021-02-06T11:59:00Z"},{"a":"xx","v":1,"t":"2021-02-06T11:59:00Z"}])";
    auto r = c.Post("/iot/measures?k=secret&i=phone-u1", body, "application/json");
    REQUIRE(r->status == 200);
    auto j = body_of(r);
    CHECK(j.at("accepted") == 1);
    CHECK(j.at("skipped") == Json::array({"xx"}));
    CHECK(c.Post("/iot/measures?k=wrong&i=phone-u1", body, "application/json")->status == 401);
    CHECK(c.Post("/iot/measures?i=phone-u1", body, "application/json")->status == 400);
    CHECK(s.broker.get_entity("u1").attributes.at("heart_rate").value == 72);
}

TEST_CASE("historic queries over HTTP") {
    Stack s;
    for (int i = 0; i < 5; ++i) s.history.append({"u1", "steps"}, {ts(2021, 2, 1, 8 + i), 10 * (i + 1)});
    s.history.append({"u1", "steps"}, {ts(2021, 2, 2, 8), 100});
    auto c = s.client();
    auto r = c.Get("/sth/u1/attrs/steps?hLimit=2");
    REQUIRE(r->status == 200);
    auto j = body_of(r);
    CHECK(j.at("values").size() == 2);
    REQUIRE(j.contains("next"));
    r = c.Get("/sth/u1/attrs/steps?hLimit=10&hOffset=" + j.at("next").get<std::string>());
    CHECK(body_of(r).at("values").size() == 4);

    r = c.Get("/sth/u1/attrs/steps?aggrMethod=mean&aggrPeriod=day&dateFrom=2021-02-01T00:00:00Z&dateTo=2021-02-03T00:00:00Z");
    REQUIRE(r->status == 200);
    j = body_of(r);
    REQUIRE(j.at("buckets").size() == 2);
    CHECK(j.at("buckets")[0].at("value") == 30.0);
    CHECK(j.at("buckets")[1].at("value") == 100.0);
    CHECK(c.Get("/sth/u1/attrs/nothing")->status == 404);
    CHECK(c.Get("/sth/u1/attrs/steps?aggrMethod=median")->status == 400);
}

TEST_CASE("prompts, answers and device triggers over HTTP") {
    Stack s;
    auto c = s.client();
    const Json scan{{"user", "u1"}, {"kind", "bt_scan"}, {"payload", {{"person_devices", 4}}},
                    {"t", format_timestamp(s.now)}};
    auto r = c.Post("/events", scan.dump(), "application/json");
    REQUIRE(r->status == 202);
    auto j = body_of(r);
    REQUIRE(j.at("prompts").size() == 1);
    const auto prompt_id = j.at("prompts")[0].at("prompt_id").get<std::string>();
    CHECK(s.logged.size() == 1);

    const Json drive{{"user", "u1"},
                     {"kind", "vehicle_episode"},
                     {"payload", {{"start", "2021-02-06T11:40:00Z"}, {"end", "2021-02-06T11:45:00Z"}}},
                     {"t", format_timestamp(s.now)}};
    CHECK(body_of(c.Post("/events", drive.dump(), "application/json")).at("prompts").size() == 1);

    r = c.Get("/prompts?user=u1");
    REQUIRE(r->status == 200);
    CHECK(body_of(r).size() == 2);

    CHECK(c.Post("/prompts/" + prompt_id + "/answer", R"({"people_within_2m":-1})", "application/json")->status == 422);
    r = c.Post("/prompts/" + prompt_id + "/answer", R"({"people_within_2m":2})", "application/json");
    REQUIRE(r->status == 201);
    CHECK(body_of(r).at("payload").at("people_within_2m") == 2);
    CHECK(body_of(c.Get("/prompts?user=u1")).size() == 1);
    CHECK(c.Post("/prompts/q999/answer", R"({"people_within_2m":2})", "application/json")->status == 404);

    auto later = s.engine.on_proximity("u1", 5, s.now + Seconds{7200});
    s.now += Seconds{7200 + 25 * 3600};
    CHECK(c.Post("/prompts/" + later->prompt_id + "/answer", R"({"people_within_2m":1})", "application/json")->status ==
          410);
}

TEST_CASE("risk lookups over HTTP") {
    Stack s;
    auto c = s.client();
    auto r = c.Get("/risk?municipality=Lisboa&date=2021-02-15");
    REQUIRE(r->status == 200);
    CHECK(body_of(r).at("level") == "high");
    CHECK(body_of(c.Get("/risk?municipality=Lisboa&date=2021-03-02")).at("level") == "moderated");
    CHECK(body_of(c.Get("/risk?municipality=Lisboa")).at("date") == "2021-02-06");
    CHECK(c.Get("/risk?municipality=Faro&date=2021-02-15")->status == 404);
    CHECK(c.Get("/risk")->status == 400);
}

TEST_CASE("feedback and weekly report over HTTP") {
    Stack s;
    std::string active, control;
    for (int i = 0; active.empty() || control.empty(); ++i) {
        const auto id = "user-" + std::to_string(i);
        (feedback::assign_group(id) == feedback::FeedbackGroup::Active ? active : control) = id;
    }
    s.granter.add_user(active);
    s.granter.add_user(control);
    s.history.append({active, std::string(attr::kProximity)}, {ts(2021, 2, 5, 12), 3});
    auto c = s.client();
    CHECK(c.Get(("/feedback?user=" + active).c_str())->status == 404);

    s.granter.on_tick(ts(2021, 2, 6, 20, 50));
    s.granter.on_tick(ts(2021, 2, 6, 21));
    auto r = c.Get(("/feedback?user=" + active + "&window=last_8d").c_str());
    REQUIRE(r->status == 200);
    auto j = body_of(r);
    CHECK(j.at("group") == "active");
    CHECK(j.at("metrics").at("contacts_mean").get<double>() == doctest::Approx(3.0 / 8.0));

    r = c.Get(("/feedback?user=" + control).c_str());
    REQUIRE(r->status == 200);
    for (auto f : feedback::kActiveOnlyFields) CHECK(r->body.find(f) == std::string::npos);

    r = c.Get(("/weekly?user=" + active).c_str());
    REQUIRE(r->status == 200);
    CHECK(body_of(r).at("contacts_estimate") == 3);
    r = c.Get(("/weekly?user=" + control).c_str());
    REQUIRE(r->status == 200);
    for (auto f : feedback::kActiveOnlyFields) CHECK(r->body.find(f) == std::string::npos);
}

TEST_CASE("bearer tokens guard participant routes") {
    Stack s({{"u1", "tok-1"}, {"u2", "tok-2"}});
    auto c = s.client();
    CHECK(c.Get("/prompts?user=u1")->status == 401);
    httplib::Headers good{{"Authorization", "Bearer tok-1"}};
    httplib::Headers other{{"Authorization", "Bearer tok-2"}};
    CHECK(c.Get("/prompts?user=u1", good)->status == 200);
    CHECK(c.Get("/prompts?user=u1", other)->status == 401);
    auto p = s.engine.on_proximity("u1", 4, s.now);
    CHECK(c.Post("/prompts/" + p->prompt_id + "/answer", other, R"({"people_within_2m":1})", "application/json")->status ==
          401);
    CHECK(c.Post("/prompts/" + p->prompt_id + "/answer", good, R"({"people_within_2m":1})", "application/json")->status ==
          201);
}

TEST_CASE("missing services answer 503") {
    http::Server server(http::Services{}, {});
    const int port = server.bind_any_port();
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    httplib::Client c("127.0.0.1", port);
    CHECK(c.Get("/risk?municipality=Lisboa")->status == 503);
    server.stop();
    t.join();
}
