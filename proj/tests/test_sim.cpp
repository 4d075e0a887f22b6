#include "support.hpp"

#include <cmath>

#include "vitoria/sim/simulator.hpp"

using namespace vitoria;
using namespace vitoria::testing;
using namespace vitoria::sim;

namespace {

// The default cohort cut down to a couple of weeks, keeping every participant.
ScenarioConfig short_scenario(int days = 14) {
    auto c = default_scenario();
    const auto start = c.timeline.span_start();
    c.timeline = ScenarioTimeline(c.timeline.entries(), start, add_days(start, days - 1));
    return c;
}

struct Tally {
    std::map<std::string, int> device_events;
    std::map<std::string, int> sam_raised;
    std::map<std::string, int> sam_answered;
};

Tally tally(const ScenarioConfig& c, std::uint64_t seed, RunSummary* summary = nullptr) {
    Tally t;
    RunOptions o;
    o.on_event = [&](const SensorEvent& ev) {
        if (ev.kind == "prompt" && ev.payload.at("kind") == "sam_emotion") ++t.sam_raised[ev.user];
        if (ev.kind == "answer" && ev.payload.at("questionnaire") == "sam_emotion") ++t.sam_answered[ev.user];
        if (ev.kind != "prompt" && ev.kind != "reminder" && ev.kind != "prompt_expired") ++t.device_events[ev.user];
    };
    auto r = run_scenario(c, seed, o);
    if (summary) *summary = r.summary;
    return t;
}

}  // namespace

TEST_CASE("same seed gives the same event log") {
    const auto c = short_scenario(7);
    RunSummary a, b, other;
    tally(c, 7, &a);
    tally(c, 7, &b);
    tally(c, 8, &other);
    CHECK(a.event_log_digest == b.event_log_digest);
    CHECK(a.events_logged == b.events_logged);
    CHECK(a.event_log_digest != other.event_log_digest);
}

TEST_CASE("active users get daily SAM prompts and answer at their compliance rate") {
    const auto c = short_scenario(14);
    const auto t = tally(c, 3);
    int active = 0;
    for (const auto& p : c.participants) {
        if (p.silent) {
            CHECK(t.device_events.count(p.id) == 0);
            continue;
        }
        ++active;
        const int n = t.sam_raised.at(p.id);
        CHECK(n >= 14);
        const double mean = n * p.compliance;
        const double sd = std::sqrt(n * p.compliance * (1 - p.compliance));
        const int k = t.sam_answered.count(p.id) ? t.sam_answered.at(p.id) : 0;
        CHECK_MESSAGE(std::abs(k - mean) <= 4 * sd + 1, p.id << " answered " << k << " of " << n);
    }
    CHECK(active == 14);
}

TEST_CASE("outing count follows the phase rate") {
    auto c = default_scenario();
    auto p = c.participants.front();
    p.outing_rate = PhaseValue{{{"confinement", 0.3}}, 0.3};
    c.participants = {p};
    c.timeline = ScenarioTimeline(c.timeline.entries(), ymd(2021, 1, 20), ymd(2021, 2, 18));
    int outings = 0, person_scans_out = 0, empty_scans_out = 0, sleep_bad = 0;
    std::string location = "home";
    RunOptions o;
    o.on_event = [&](const SensorEvent& ev) {
        if (ev.kind == "location") {
            const auto label = ev.payload.at("label").get<std::string>();
            if (label == "other" && location == "home") ++outings;
            location = label;
        }
        if (ev.kind == "bt_scan" && location == "other")
            (ev.payload.at("person_devices").get<int>() >= 1 ? person_scans_out : empty_scans_out)++;
        if (ev.kind == "sleep_state" && ev.payload.at("sleeping") == true && ev.payload.at("confidence").get<int>() < 70)
            ++sleep_bad;
    };
    run_scenario(c, 11, o);
    CHECK(std::abs(outings - 9) <= 5);
    CHECK(empty_scans_out == 0);
    CHECK(sleep_bad == 0);
}

TEST_CASE("sleep quality coupling") {
    const auto c = default_scenario();
    auto p = c.participants.front();
    p.sleep.quality_coupling = 0;
    std::set<double> means;
    for (Date d = c.timeline.span_start(); d <= c.timeline.span_end(); d = add_days(d, 1))
        means.insert(couple_to_timeline(p, c.timeline, d).sleep_quality_mean);
    CHECK(means.size() == 1);

    p.sleep.quality_coupling = 0.4;
    for (Date d = add_days(c.timeline.span_start(), 1); d <= c.timeline.span_end(); d = add_days(d, 1)) {
        const Date prev = add_days(d, -1);
        const int dp = c.timeline.positiveness_before(add_days(d, -3)) - c.timeline.positiveness_before(add_days(prev, -3));
        const double dq = couple_to_timeline(p, c.timeline, d).sleep_quality_mean -
                          couple_to_timeline(p, c.timeline, prev).sleep_quality_mean;
        if (dp > 0) CHECK(dq > 0);
        if (dp < 0) CHECK(dq < 0);
        if (dp == 0) CHECK(dq == doctest::Approx(0));
    }
    CHECK_CODE(couple_to_timeline(p, c.timeline, add_days(c.timeline.span_start(), -1)), ErrorCode::OutOfSpan);
}

TEST_CASE("scenario config roundtrip and validation") {
    const auto c = default_scenario();
    CHECK(c.participants.size() == 19);
    CHECK(c.timeline.span_days() == 104);
    const auto j = c.to_json();
    CHECK(j.at("synthetic") == true);
    CHECK(ScenarioConfig::from_json(j).to_json() == j);
    CHECK(ScenarioConfig::load(VITORIA_DATA_DIR "/scenario_default.json").to_json() == j);

    auto bad = c.participants.front();
    bad.compliance = 1.5;
    CHECK_CODE(bad.validate(), ErrorCode::ConfigError);
    auto entries = c.timeline.entries();
    std::swap(entries[0], entries[1]);
    CHECK_CODE(ScenarioTimeline(entries, c.timeline.span_start(), c.timeline.span_end()), ErrorCode::ConfigError);
}

TEST_CASE("step-wise driving matches a full run") {
    const auto c = short_scenario(3);
    Simulator sim(c, 5);
    while (!sim.done()) sim.tick();
    auto r = sim.run();
    RunSummary direct;
    tally(c, 5, &direct);
    CHECK(r.summary.event_log_digest == direct.event_log_digest);
}
