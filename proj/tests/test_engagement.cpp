#include "support.hpp"

#include "vitoria/engagement/engine.hpp"

using namespace vitoria;
using namespace vitoria::testing;
using namespace vitoria::engagement;

namespace {

sensing::ActivitySegment drive(Timestamp start, int seconds) {
    return {sensing::ActivityLabel::InVehicle, start, start + Seconds{seconds}};
}

PendingPrompt raise_sam(EngagementEngine& e, const std::string& user, Date day) {
    e.schedule_day(user, day);
    for (const auto& p : e.advance(at(day, 20)))
        if (p.kind == QuestionnaireKind::SamEmotion) return p;
    FAIL("no SAM prompt raised");
    return {};
}

}  // namespace

TEST_CASE("daily plan") {
    EngagementEngine e({42});
    const Date d = ymd(2021, 2, 1);
    const auto plan = e.plan_daily_prompts("u1", d);
    CHECK(plan == EngagementEngine({42}).plan_daily_prompts("u1", d));
    int sam = 0, purpose = 0, sleep = 0, reminders = 0;
    for (const auto& p : plan) {
        if (p.is_reminder()) {
            ++reminders;
            CHECK(p.at == at(d, 16));
        } else if (*p.kind == QuestionnaireKind::SamEmotion) {
            ++sam;
            CHECK(p.at >= at(d, 14));
            CHECK(p.at < at(d, 20));
        } else if (*p.kind == QuestionnaireKind::AppPurpose) {
            ++purpose;
            CHECK(p.at == at(d, 14));
        } else if (*p.kind == QuestionnaireKind::SleepReport) {
            ++sleep;
        }
    }
    CHECK(sam == 1);
    CHECK(purpose == 1);
    CHECK(sleep == 1);
    CHECK(reminders == 1);
}

TEST_CASE("SAM minute varies across days and users") {
    EngagementEngine e({42});
    std::set<Timestamp> minutes;
    for (int i = 0; i < 30; ++i) {
        const Date d = add_days(ymd(2021, 2, 1), i);
        for (const auto& p : e.plan_daily_prompts("u" + std::to_string(i % 3), d))
            if (!p.is_reminder() && *p.kind == QuestionnaireKind::SamEmotion)
                minutes.insert(Timestamp{Seconds{seconds_of_day(p.at)}});
    }
    CHECK(minutes.size() > 10);
}

TEST_CASE("reminder lists unanswered prompts") {
    EngagementEngine e({1});
    const Date d = ymd(2021, 2, 1);
    e.advance(at(d, 14, 59));
    auto p = e.on_proximity("u1", 4, at(d, 15));
    REQUIRE(p);
    e.schedule_day("u1", d);
    e.advance(at(d, 16, 0, 1));
    REQUIRE(!e.reminders().empty());
    const auto ids = e.reminders().back().prompt_ids;
    CHECK(std::find(ids.begin(), ids.end(), p->prompt_id) != ids.end());
}

TEST_CASE("proximity trigger and cooldown") {
    EngagementEngine e;
    const auto t = ts(2021, 2, 1, 12);
    CHECK_FALSE(e.on_proximity("u1", 2, t));
    CHECK(e.on_proximity("u1", 3, t));
    CHECK_FALSE(e.on_proximity("u1", 5, t + Seconds{30 * 60}));
    CHECK(e.on_proximity("u1", 5, t + Seconds{3600}));
    CHECK(e.on_proximity("u2", 5, t + Seconds{60}));
}

TEST_CASE("vehicle episodes chain into trips") {
    EngagementEngine e;
    const auto t = ts(2021, 2, 1, 8);
    auto first = e.on_vehicle_episode("u1", drive(t, 180), t + Seconds{180});
    REQUIRE(first);
    const auto trip = first->context.at("trip_id").get<std::string>();
    const auto second_start = t + Seconds{180 + 5 * 60};
    auto second = e.on_vehicle_episode("u1", drive(second_start, 300), second_start + Seconds{300});
    REQUIRE(second);
    CHECK(second->context.at("trip_id") == trip);
    CHECK(second->context.at("trip_seconds") == 480.0);
    CHECK_FALSE(e.on_vehicle_episode("u1", drive(t + Seconds{3600}, 90), t + Seconds{3700}));
    const auto later = t + Seconds{3 * 3600};
    auto third = e.on_vehicle_episode("u1", drive(later, 200), later + Seconds{200});
    REQUIRE(third);
    CHECK(third->context.at("trip_id") != trip);
}

TEST_CASE("answer validation") {
    EngagementEngine e({3});
    const Date d = ymd(2021, 2, 1);
    auto sam = raise_sam(e, "u1", d);
    auto rec = e.submit_answer(sam.prompt_id, Json{{"valence", 4}, {"arousal", 2}}, at(d, 21));
    CHECK(std::get<SamAnswer>(rec.answer).valence == 4);
    CHECK_CODE(e.submit_answer(sam.prompt_id, Json{{"valence", 4}, {"arousal", 2}}, at(d, 21)), ErrorCode::UnknownPrompt);

    auto sam2 = raise_sam(e, "u1", add_days(d, 1));
    CHECK_CODE(e.submit_answer(sam2.prompt_id, Json{{"valence", 6}, {"arousal", 2}}, at(add_days(d, 1), 21)),
               ErrorCode::ValidationFailed);
    CHECK_CODE(e.submit_answer(sam2.prompt_id, Json{{"valence", 3}}, at(add_days(d, 1), 21)), ErrorCode::ValidationFailed);

    const auto t = ts(2021, 2, 1, 8);
    auto trip = e.on_vehicle_episode("u1", drive(t, 200), t + Seconds{200});
    CHECK_CODE(e.submit_answer(trip->prompt_id, Json{{"transport", "bus"}, {"people", "2"}}, t + Seconds{300}),
               ErrorCode::ValidationFailed);
    CHECK_NOTHROW(e.submit_answer(trip->prompt_id, Json{{"transport", "bus"}, {"people", "10-20"}}, t + Seconds{300}));
}

TEST_CASE("24 hour validity") {
    EngagementEngine e;
    const auto t = ts(2021, 2, 1, 10);
    auto p = e.on_proximity("u1", 4, t);
    REQUIRE(p);
    CHECK(e.expire_pending(t + Seconds{24 * 3600 - 60}).empty());
    CHECK(e.list_pending("u1", t + Seconds{24 * 3600 - 60}).size() == 1);
    CHECK(e.expire_pending(t + Seconds{24 * 3600}) == std::vector<std::string>{p->prompt_id});
    CHECK(e.expire_pending(t + Seconds{24 * 3600}).empty());

    auto q = e.on_proximity("u1", 4, t + Seconds{2 * 3600});
    CHECK_CODE(e.submit_answer(q->prompt_id, Json{{"people_within_2m", 1}}, q->raised_at + Seconds{25 * 3600}),
               ErrorCode::Expired);
}

TEST_CASE("pending list ordering and removal") {
    EngagementEngine e;
    const auto t = ts(2021, 2, 1, 10);
    auto a = e.on_proximity("u1", 4, t + Seconds{7200});
    auto b = e.on_vehicle_episode("u1", drive(t, 200), t + Seconds{200});
    auto gone = e.on_proximity("u1", 4, t - Seconds{30 * 3600});
    CHECK(e.list_pending("nobody", t).empty());
    auto listed = e.list_pending("u1", t + Seconds{8000});
    REQUIRE(listed.size() == 2);
    CHECK(listed[0].prompt_id == b->prompt_id);
    CHECK(listed[1].prompt_id == a->prompt_id);
    e.submit_answer(a->prompt_id, Json{{"people_within_2m", 3}}, t + Seconds{8000});
    listed = e.list_pending("u1", t + Seconds{8000});
    REQUIRE(listed.size() == 1);
    CHECK(listed[0].prompt_id == b->prompt_id);
    (void)gone;
}

TEST_CASE("newest transport answer of a trip wins") {
    const auto t = ts(2021, 2, 1, 8);
    std::vector<TransportObservation> chain{{"trip-1", TransportType::Bus, "<10", 300, t + Seconds{60}},
                                            {"trip-1", TransportType::Bus, "10-20", 300, t + Seconds{600}},
                                            {"trip-1", TransportType::Boat, ">50", 300, t + Seconds{120}}};
    CHECK(dedupe_transport(chain).people_bucket == "10-20");
    CHECK(dedupe_transport(std::span(chain).first(1)).people_bucket == "<10");
    chain.push_back({"trip-2", TransportType::OwnCar, "1", 200, t + Seconds{30}});
    auto latest = latest_per_trip(chain);
    REQUIRE(latest.size() == 2);
    CHECK(latest[0].trip_id == "trip-2");
    CHECK(latest[1].people_bucket == "10-20");

    EngagementEngine e;
    auto p1 = e.on_vehicle_episode("u1", drive(t, 200), t + Seconds{200});
    auto p2 = e.on_vehicle_episode("u1", drive(t + Seconds{300}, 200), t + Seconds{500});
    e.submit_answer(p1->prompt_id, Json{{"transport", "own_car"}, {"people", "1"}}, t + Seconds{600});
    e.submit_answer(p2->prompt_id, Json{{"transport", "own_car"}, {"people", "2"}}, t + Seconds{700});
    auto log = e.transport_log();
    REQUIRE(log.size() == 2);
    CHECK(log[0].discarded);
    CHECK_FALSE(log[1].discarded);
}

TEST_CASE("transport buckets per type") {
    CHECK(bucket_options(TransportType::Bus).size() == 4);
    CHECK(valid_bucket(TransportType::Boat, "30-50"));
    CHECK_FALSE(valid_bucket(TransportType::Bus, "30-50"));
    CHECK(valid_bucket(TransportType::TaxiTvde, ">2"));
}

TEST_CASE("sleep answers") {
    SleepAnswer s{parse_clock("23:30"), parse_clock("07:00"), SleepQuality::Good};
    CHECK(s.duration_hours() == doctest::Approx(7.5));
    CHECK(format_clock(parse_clock("06:05")) == "06:05");
    CHECK_CODE(parse_clock("25:00"), ErrorCode::ValidationFailed);
    auto back = answer_from_json(QuestionnaireKind::SleepReport, answer_to_json(Answer{s}));
    CHECK(std::get<SleepAnswer>(back).quality == SleepQuality::Good);
}

TEST_CASE("app purpose answers must cover the prompted apps") {
    EngineOptions o;
    o.top_apps = [](const std::string&, Timestamp) {
        return std::vector<std::string>{"com.whatsapp", "com.netflix.mediaclient"};
    };
    EngagementEngine e(o);
    const Date d = ymd(2021, 2, 1);
    e.schedule_day("u1", d);
    std::optional<PendingPrompt> purpose;
    for (const auto& p : e.advance(at(d, 14)))
        if (p.kind == QuestionnaireKind::AppPurpose) purpose = p;
    REQUIRE(purpose);
    CHECK(purpose->context.at("apps").size() == 2);
    CHECK_CODE(e.submit_answer(purpose->prompt_id, Json{{"purposes", {{"com.whatsapp", "communication"}}}}, at(d, 15)),
               ErrorCode::ValidationFailed);
    CHECK_NOTHROW(e.submit_answer(
        purpose->prompt_id,
        Json{{"purposes", {{"com.whatsapp", "communication"}, {"com.netflix.mediaclient", "leisure"}}}}, at(d, 15)));
}

TEST_CASE("accepted answers reach the sink as events") {
    std::vector<SensorEvent> sunk;
    EngineOptions o;
    o.answer_sink = [&](const SensorEvent& ev) { sunk.push_back(ev); };
    EngagementEngine e(o);
    const auto t = ts(2021, 2, 1, 12);
    auto p = e.on_proximity("u1", 3, t);
    e.submit_answer(p->prompt_id, Json{{"people_within_2m", 2}}, t + Seconds{60});
    REQUIRE(sunk.size() == 1);
    CHECK(sunk[0].kind == "answer");
    CHECK(sunk[0].payload.at("questionnaire") == "proximity");
    CHECK(sunk[0].payload.at("raised_at") == format_timestamp(t));
}
