// Acceptance checks for the platform. One PASS/FAIL line per criterion; the
// exit status is the number of failures. Oracles here are written out
// independently of the library code they check.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "vitoria/analysis/analysis.hpp"
#include "vitoria/attributes.hpp"
#include "vitoria/engagement/engine.hpp"
#include "vitoria/error.hpp"
#include "vitoria/feedback/granter.hpp"
#include "vitoria/history/history_store.hpp"
#include "vitoria/risk/risk_feed.hpp"
#include "vitoria/rng.hpp"
#include "vitoria/sensing/sensing.hpp"
#include "vitoria/sim/simulator.hpp"

#ifndef VITORIA_DATA_DIR
#define VITORIA_DATA_DIR "data"
#endif

using namespace vitoria;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kZoneBudgetSeconds = 1.0;
constexpr double kPearsonTolerance = 1e-12;
constexpr double kSchedulerBudgetSeconds = 30.0;
constexpr double kSeedBudgetSeconds = 60.0;
constexpr double kStoreRelativeTolerance = 1e-9;
constexpr double kValenceArousalCeiling = -0.5;
constexpr double kSleepPositivenessFloor = 0.4;
constexpr int kExpectedSleepLag = 3;
constexpr int kSeeds = 10;
constexpr int kUsers = 14;
constexpr int kDays = 104;
constexpr int kAnonymizationSamples = 10000;
constexpr int kStoreSeries = 50;

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
    if (!ok) ++failures;
}

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int precision = 3) {
    std::ostringstream o;
    o.precision(precision);
    o << v;
    return o.str();
}

Date ymd(int y, unsigned m, unsigned d) { return Date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}}; }

// ---------------------------------------------------------------- risk zone

void check_zone_grid() {
    const auto t0 = Clock::now();
    int mismatches = 0;
    int cells = 0;
    bool corner_ok = false;
    for (int i = 0; i < 100; ++i) {
        const double incidence = 3.0 * i;  // 120 at i = 40
        for (int j = 0; j < 100; ++j) {
            const double rt = j / 40.0;  // 1.0 at j = 40
            int expected = 0;
            if (incidence > 120.0) ++expected;
            if (rt > 1.0) ++expected;
            const int got = static_cast<int>(risk::matrix_zone(incidence, rt));
            if (got != expected) ++mismatches;
            if (incidence == 120.0 && rt == 1.0) corner_ok = got == 0;
            ++cells;
        }
    }
    const double elapsed = seconds_since(t0);
    report("risk_matrix_zone", mismatches == 0 && corner_ok && cells == 10000 && elapsed < kZoneBudgetSeconds,
           std::to_string(cells) + " cells, " + std::to_string(mismatches) + " mismatches, (120,1.0)->" +
               (corner_ok ? "0" : "nonzero") + ", " + fmt(elapsed) + " s (< " + fmt(kZoneBudgetSeconds) + " s)");
}

// ------------------------------------------------------------ positiveness

void check_positiveness() {
    struct Row {
        const char* date;
        int sign;
    };
    // Transcribed from the event table.
    const Row table[] = {
        {"2021-01-08", -1}, {"2021-01-12", -1}, {"2021-01-14", -1}, {"2021-01-18", -1}, {"2021-01-21", -1},
        {"2021-01-28", -1}, {"2021-02-09", +1}, {"2021-02-12", -1}, {"2021-02-22", +1}, {"2021-03-01", +1},
        {"2021-03-03", -1}, {"2021-03-08", -1}, {"2021-03-12", +1}, {"2021-03-13", -1}, {"2021-03-15", +1},
        {"2021-03-22", +1}, {"2021-03-26", +1}, {"2021-04-05", +1}, {"2021-04-13", -1}, {"2021-04-19", +1},
        {"2021-04-23", +1}, {"2021-04-26", +1}, {"2021-05-03", +1}, {"2021-05-11", -1}, {"2021-05-23", -1},
    };
    const auto events = analysis::EventTable::load(fs::path(VITORIA_DATA_DIR) / "events_pt_2021.csv");
    const Date from = ymd(2021, 1, 1);
    const Date to = ymd(2021, 5, 31);
    const auto series = analysis::positiveness_series(events, from, to);

    int days = 0;
    int mismatches = 0;
    for (Date d = from; d <= to; d = add_days(d, 1)) {
        int oracle = 0;
        for (const auto& row : table) {
            if (parse_date(row.date) < d) oracle += row.sign;
        }
        auto it = series.values.find(d);
        if (it == series.values.end() || it->second != oracle) ++mismatches;
        ++days;
    }
    const auto spot = [&](Date d) {
        auto it = series.values.find(d);
        return it == series.values.end() ? std::nan("") : it->second;
    };
    const double feb1 = spot(ymd(2021, 2, 1));
    const double may12 = spot(ymd(2021, 5, 12));
    report("positiveness_trajectory",
           days == 151 && mismatches == 0 && series.values.size() == 151 && feb1 == -6 && may12 == 0,
           std::to_string(days) + " days, " + std::to_string(mismatches) + " mismatches, 2021-02-01=" + fmt(feb1) +
               ", 2021-05-12=" + fmt(may12));
}

// ----------------------------------------------------------------- pearson

double oracle_lagged_r(const analysis::DailySeries& behavior, const analysis::DailySeries& covid, int lag) {
    std::vector<long double> xs, ys;
    for (const auto& [d, x] : behavior.values) {
        auto it = covid.values.find(add_days(d, -lag));
        if (it == covid.values.end()) continue;
        xs.push_back(x);
        ys.push_back(it->second);
    }
    const long double n = static_cast<long double>(xs.size());
    long double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    long double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

void check_pearson() {
    Rng rng(20210323);
    double worst = 0;
    int pairs = 0;
    int errors = 0;
    for (int k = 0; k < 1000; ++k) {
        const int lag = k % 5;
        const Date start = add_days(ymd(2021, 1, 1), static_cast<int>(rng.integer(0, 30)));
        const int len = static_cast<int>(rng.integer(20, 150));
        const double coupling = rng.uniform(-2, 2);
        const double scale = std::pow(10.0, rng.uniform(-1, 2));
        const double offset = rng.uniform(-50, 50);
        analysis::DailySeries covid{"c", {}}, behavior{"b", {}};
        std::map<Date, double> latent;
        // Keep at least ten overlapping days; fewer is an input the library refuses.
        for (;;) {
            covid.values.clear();
            behavior.values.clear();
            latent.clear();
            for (int i = 0; i < len; ++i) {
                const Date d = add_days(start, i);
                latent[d] = rng.normal();
                if (rng.bernoulli(0.85)) covid.values[d] = offset + scale * latent[d];
            }
            for (int i = 0; i < len; ++i) {
                const Date d = add_days(start, i);
                if (!rng.bernoulli(0.85)) continue;
                auto it = latent.find(add_days(d, -lag));
                const double base = it == latent.end() ? 0.0 : it->second;
                behavior.values[d] = coupling * base + rng.normal(0, 0.7);
            }
            int overlap = 0;
            for (const auto& [d, x] : behavior.values) overlap += covid.values.count(add_days(d, -lag)) ? 1 : 0;
            if (overlap >= 10) break;
        }
        try {
            const double got = analysis::lagged_pearson(behavior, covid, lag);
            const double want = oracle_lagged_r(behavior, covid, lag);
            worst = std::max(worst, std::abs(got - want));
            ++pairs;
        } catch (const Error&) {
            ++errors;
        }
    }
    report("pearson_oracle", pairs == 1000 && errors == 0 && worst < kPearsonTolerance,
           std::to_string(pairs) + " pairs over lags 0-4, max |dr|=" + fmt(worst) + " (< " + fmt(kPearsonTolerance) +
               ")");
}

// --------------------------------------------------------------- scheduler

void check_scheduler() {
    const auto t0 = Clock::now();
    const std::vector<std::string> apps{"com.whatsapp", "us.zoom.videomeetings", "com.instagram.android"};
    engagement::EngineOptions eo;
    eo.seed = 11;
    eo.top_apps = [&](const std::string&, Timestamp) { return apps; };
    engagement::EngagementEngine engine(std::move(eo));

    std::vector<std::string> users;
    for (int u = 1; u <= kUsers; ++u) users.push_back((u < 10 ? "p0" : "p") + std::to_string(u));
    const Date first = ymd(2021, 2, 1);
    for (const auto& u : users)
        for (int d = 0; d < kDays; ++d) engine.schedule_day(u, add_days(first, d));

    struct Action {
        Timestamp t;
        int seq;
        bool submission;
        std::string user_or_prompt;
        int count;
        bool late;
        engagement::QuestionnaireKind kind;
        bool operator>(const Action& o) const { return t != o.t ? t > o.t : seq > o.seq; }
    };
    std::priority_queue<Action, std::vector<Action>, std::greater<>> queue;
    int seq = 0;
    Rng rng(404);

    // Adversarial proximity traffic: bursts of qualifying scans, plus probes
    // one second either side of the cooldown edge.
    for (const auto& u : users) {
        for (int d = 0; d < kDays; ++d) {
            const Date day = add_days(first, d);
            const int bursts = static_cast<int>(rng.integer(0, 6));
            for (int b = 0; b < bursts; ++b) {
                Timestamp t = at(day, 0) + Seconds{rng.integer(0, 86399)};
                const int calls = static_cast<int>(rng.integer(1, 30));
                for (int c = 0; c < calls; ++c) {
                    queue.push({t, seq++, false, u, static_cast<int>(rng.integer(0, 15)), false, {}});
                    t += Seconds{rng.integer(0, 120)};
                }
            }
            if (d % 7 == 0) {
                const Timestamp t = at(day, 3, 0, 0);
                for (int off : {0, 3599, 3600, 7199, 7200})
                    queue.push({t + Seconds{off}, seq++, false, u, 3, false, {}});
            }
        }
    }

    std::map<std::pair<std::string, Date>, int> sam_per_day;
    int sam = 0, sam_out_of_window = 0, purpose = 0, purpose_off_time = 0;
    std::map<std::string, std::vector<Timestamp>> proximity_at;
    int late_accepted = 0, late_attempts = 0, timely_refused = 0, timely_attempts = 0;

    auto answer_for = [&](engagement::QuestionnaireKind kind) -> engagement::Answer {
        using K = engagement::QuestionnaireKind;
        switch (kind) {
            case K::SamEmotion: return engagement::SamAnswer{3, 4};
            case K::AppPurpose: {
                engagement::PurposeAnswer a;
                for (const auto& p : apps) a.purposes[p] = engagement::Purpose::Leisure;
                return a;
            }
            case K::Proximity: return engagement::ProximityAnswer{2};
            default: return engagement::SleepAnswer{23 * 60, 7 * 60, engagement::SleepQuality::Good};
        }
    };
    auto queue_answer = [&](const engagement::PendingPrompt& p) {
        const bool late = rng.bernoulli(0.5);
        const Seconds delay = late ? Seconds{rng.integer(24 * 3600, 48 * 3600)} : Seconds{rng.integer(60, 24 * 3600 - 1)};
        queue.push({p.raised_at + delay, seq++, true, p.prompt_id, 0, late, p.kind});
    };

    const Timestamp end = at(add_days(first, kDays + 2), 0);
    for (Timestamp now = at(first, 0); now <= end; now += Seconds{60}) {
        while (!queue.empty() && queue.top().t <= now) {
            const Action a = queue.top();
            queue.pop();
            if (!a.submission) {
                if (auto p = engine.on_proximity(a.user_or_prompt, a.count, a.t)) {
                    proximity_at[p->user].push_back(p->raised_at);
                    queue_answer(*p);
                }
                continue;
            }
            (a.late ? late_attempts : timely_attempts)++;
            try {
                engine.submit_answer(a.user_or_prompt, answer_for(a.kind), a.t);
                if (a.late) ++late_accepted;
            } catch (const Error&) {
                if (!a.late) ++timely_refused;
            }
        }
        for (const auto& p : engine.advance(now)) {
            const Date day = date_of(p.raised_at);
            const long sod = seconds_of_day(p.raised_at);
            if (p.kind == engagement::QuestionnaireKind::SamEmotion) {
                ++sam;
                ++sam_per_day[{p.user, day}];
                if (sod < 14 * 3600 || sod >= 20 * 3600) ++sam_out_of_window;
            } else if (p.kind == engagement::QuestionnaireKind::AppPurpose) {
                ++purpose;
                if (sod != 14 * 3600) ++purpose_off_time;
            }
            queue_answer(p);
        }
    }

    bool one_per_day = sam_per_day.size() == static_cast<std::size_t>(kUsers * kDays);
    for (const auto& [k, n] : sam_per_day) one_per_day = one_per_day && n == 1;
    long min_gap = -1;
    std::size_t proximity_prompts = 0;
    for (const auto& [u, times] : proximity_at) {
        proximity_prompts += times.size();
        for (std::size_t i = 1; i < times.size(); ++i) {
            const long gap = (times[i] - times[i - 1]).count();
            if (min_gap < 0 || gap < min_gap) min_gap = gap;
        }
    }
    const double elapsed = seconds_since(t0);
    const int expected = kUsers * kDays;
    const bool ok = sam == expected && sam_out_of_window == 0 && one_per_day && purpose == expected &&
                    purpose_off_time == 0 && proximity_prompts > 0 && min_gap >= 3600 && late_attempts > 0 &&
                    late_accepted == 0 && timely_refused == 0 && elapsed < kSchedulerBudgetSeconds;
    report("scheduler_contract", ok,
           "SAM " + std::to_string(sam) + "/" + std::to_string(expected) + " (" + std::to_string(sam_out_of_window) +
               " outside 14-20h), purpose " + std::to_string(purpose) + "/" + std::to_string(expected) + " (" +
               std::to_string(purpose_off_time) + " off 14:00), " + std::to_string(proximity_prompts) +
               " proximity prompts min gap " + std::to_string(min_gap) + " s (>= 3600), late answers accepted " +
               std::to_string(late_accepted) + "/" + std::to_string(late_attempts) + ", timely refused " +
               std::to_string(timely_refused) + "/" + std::to_string(timely_attempts) + ", " + fmt(elapsed) +
               " s (< " + fmt(kSchedulerBudgetSeconds) + " s)");
}

// ----------------------------------------------------------------- feedback

std::string user_in(feedback::FeedbackGroup g) {
    for (int i = 0;; ++i) {
        const std::string id = "u" + std::to_string(i);
        if (feedback::assign_group(id) == g) return id;
    }
}

bool has_active_only_field(const Json& j) {
    if (j.is_object()) {
        for (const auto& [k, v] : j.items()) {
            for (auto f : feedback::kActiveOnlyFields)
                if (k == f) return true;
            if (has_active_only_field(v)) return true;
        }
    } else if (j.is_array()) {
        for (const auto& v : j)
            if (has_active_only_field(v)) return true;
    }
    return false;
}

void check_thresholds() {
    using feedback::Polarity;
    const auto templates = feedback::MessageTemplates::defaults();
    const std::string user = user_in(feedback::FeedbackGroup::Active);
    const Timestamp week_end = at(ymd(2021, 2, 6), 21);  // a Saturday
    broker::ContextBroker broker;

    std::vector<std::string> contacts_got, mobility_got;
    for (int contacts : {9, 10, 11}) {
        history::HistoryStore store;
        // Spread the total over a few answers inside the week.
        const int parts[] = {contacts / 3, contacts / 3, contacts - 2 * (contacts / 3)};
        for (int i = 0; i < 3; ++i)
            store.append({user, std::string(attr::kProximity)}, {week_end - Seconds{(5 - i) * 24 * 3600}, Json(parts[i])});
        feedback::FeedbackGranter granter(store, broker);
        const auto r = granter.compose_weekly_report(user, week_end);
        std::string polarity = "?";
        for (auto p : {Polarity::Positive, Polarity::Negative}) {
            const auto key = "active.contacts." + std::string(feedback::to_string(p));
            if (r.contacts_estimate == contacts && r.contacts_message == templates.render(key, std::to_string(contacts)))
                polarity = feedback::to_string(p);
        }
        contacts_got.push_back(polarity);
    }
    for (int minutes : {59, 60, 61}) {
        history::HistoryStore store;
        const history::SeriesKey k{user, std::string(attr::kLocation)};
        const Timestamp leave = week_end - Seconds{3 * 24 * 3600};
        store.append(k, {week_end - Seconds{6 * 24 * 3600}, Json("home")});
        store.append(k, {leave, Json("other")});
        store.append(k, {leave + Seconds{minutes * 60}, Json("home")});
        feedback::FeedbackGranter granter(store, broker);
        const auto r = granter.compose_weekly_report(user, week_end);
        std::string polarity = "?";
        for (auto p : {Polarity::Positive, Polarity::Negative}) {
            const auto key = "active.mobility." + std::string(feedback::to_string(p));
            if (r.mobility_mean_minutes && std::abs(*r.mobility_mean_minutes - minutes) < 1e-9 &&
                r.mobility_message == templates.render(key, ""))
                polarity = feedback::to_string(p);
        }
        mobility_got.push_back(polarity);
    }
    const std::vector<std::string> contacts_want{"positive", "positive", "negative"};
    const std::vector<std::string> mobility_want{"positive", "negative", "negative"};
    auto join = [](const std::vector<std::string>& v) {
        std::string s;
        for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
        return s;
    };
    report("feedback_thresholds", contacts_got == contacts_want && mobility_got == mobility_want,
           "contacts {9,10,11}->{" + join(contacts_got) + "}, mobility {59,60,61}->{" + join(mobility_got) + "}");
}

// ------------------------------------------------------- the reference run

struct ReferenceRun {
    sim::ScenarioConfig config;
    fs::path dir;
    std::unique_ptr<sim::Platform> platform;
    std::vector<std::string> notification_log;
    std::size_t control_payloads = 0;
    std::size_t control_violations = 0;
    std::size_t active_payloads_with_fields = 0;
};

ReferenceRun reference_run(const fs::path& dir) {
    ReferenceRun ref;
    ref.config = sim::default_scenario();
    ref.dir = dir;
    sim::RunOptions options;
    options.out_dir = dir;
    options.on_feedback = [&](const std::string& user, const Json& published) {
        if (feedback::assign_group(user) == feedback::FeedbackGroup::Control) {
            ++ref.control_payloads;
            if (has_active_only_field(published)) ++ref.control_violations;
        } else if (has_active_only_field(published)) {
            ++ref.active_payloads_with_fields;
        }
    };
    sim::Simulator simulator(ref.config, 7, options);
    auto log_sink = std::make_shared<broker::CallbackSink>([&](const broker::Notification& n) {
        ref.notification_log.push_back(n.to_json().dump());
        return true;
    });
    simulator.platform().broker->create_subscription(
        broker::Subscription{"", std::string(attr::kParticipantType), {}, log_sink, Seconds{0}});
    auto result = simulator.run();
    result.platform->broker->drain();
    ref.platform = std::move(result.platform);
    return ref;
}

void check_control_group(const ReferenceRun& ref) {
    report("control_group_isolation",
           ref.control_payloads > 0 && ref.control_violations == 0 && ref.active_payloads_with_fields > 0,
           std::to_string(ref.control_payloads) + " control payloads, " + std::to_string(ref.control_violations) +
               " carrying active-only fields (" + std::to_string(ref.active_payloads_with_fields) +
               " active payloads carry them)");
}

// -------------------------------------------------------------- the store

std::vector<history::SeriesPoint> drain_raw(const history::HistoryStore& store, const history::SeriesKey& key,
                                            history::TimeRange range, std::size_t limit) {
    std::vector<history::SeriesPoint> out;
    std::string token;
    for (;;) {
        auto page = store.query_raw(key, range, limit, token);
        out.insert(out.end(), page.points.begin(), page.points.end());
        if (!page.next_token) break;
        token = *page.next_token;
    }
    return out;
}

void check_store(const ReferenceRun& ref) {
    const auto& store = *ref.platform->history;
    std::vector<history::SeriesKey> numeric;
    for (const auto& k : store.series()) {
        const auto pts = store.points(k, {Timestamp{}, Timestamp{Seconds{1L << 40}}});
        if (!pts.empty() && pts.front().value.is_number()) numeric.push_back(k);
    }
    Rng rng(77);
    const Timestamp span_start = at(ref.config.timeline.span_start(), 0);
    const long span_seconds = static_cast<long>(ref.config.timeline.span_days()) * 86400;
    double worst = 0;
    int bucket_mismatches = 0;
    std::size_t points_checked = 0;
    for (int i = 0; i < kStoreSeries && !numeric.empty(); ++i) {
        const auto& key = numeric[static_cast<std::size_t>(rng.integer(0, static_cast<long long>(numeric.size()) - 1))];
        const Timestamp from = span_start + Seconds{rng.integer(0, span_seconds - 1)};
        const Timestamp to = from + Seconds{rng.integer(3600, 30L * 86400)};
        const auto raw = drain_raw(store, key, {from, to}, static_cast<std::size_t>(rng.integer(1, 500)));
        points_checked += raw.size();
        std::map<Date, std::pair<long double, long>> brute;
        for (const auto& p : raw) {
            auto& [sum, n] = brute[date_of(p.observed_at)];
            sum += p.value.get<double>();
            ++n;
        }
        const auto buckets = store.query_aggregate({key, {from, to}, history::AggregateMethod::Mean, history::Resolution::Day});
        if (buckets.size() != brute.size()) {
            ++bucket_mismatches;
            continue;
        }
        auto it = brute.begin();
        for (const auto& b : buckets) {
            if (start_of(it->first) != b.bucket_start) ++bucket_mismatches;
            const double want = static_cast<double>(it->second.first / it->second.second);
            const double rel = std::abs(b.value - want) / std::max(1.0, std::abs(want));
            worst = std::max(worst, rel);
            ++it;
        }
    }
    report("store_aggregate_equivalence",
           numeric.size() >= 10 && points_checked > 0 && bucket_mismatches == 0 && worst <= kStoreRelativeTolerance,
           std::to_string(kStoreSeries) + " random series windows, " + std::to_string(points_checked) +
               " points, " + std::to_string(bucket_mismatches) + " bucket mismatches, max rel err " + fmt(worst) +
               " (<= " + fmt(kStoreRelativeTolerance) + ")");

    // Replay the logged notifications into an empty store.
    history::HistoryStore replay;
    for (const auto& line : ref.notification_log) replay.on_notification(broker::Notification::from_json(Json::parse(line)));
    const history::TimeRange all{Timestamp{}, Timestamp{Seconds{1L << 40}}};
    const auto original_keys = store.series();
    bool same_keys = original_keys == replay.series();
    int differing = 0;
    for (const auto& k : original_keys) {
        if (!replay.has_series(k)) {
            ++differing;
            continue;
        }
        if (drain_raw(store, k, all, 1000) != drain_raw(replay, k, all, 1000)) {
            ++differing;
            continue;
        }
        const auto first = store.points(k, all).front().value;
        const auto method = first.is_number() ? history::AggregateMethod::Mean : history::AggregateMethod::Occurrences;
        for (auto res : {history::Resolution::Hour, history::Resolution::Day, history::Resolution::Week}) {
            if (store.query_aggregate({k, all, method, res}) != replay.query_aggregate({k, all, method, res})) {
                ++differing;
                break;
            }
        }
    }
    report("store_replay", same_keys && differing == 0 && !ref.notification_log.empty(),
           std::to_string(ref.notification_log.size()) + " notifications replayed, " +
               std::to_string(original_keys.size()) + " series, " + std::to_string(differing) + " differing");
}

// ----------------------------------------------------------------- privacy

void collect_keys(const Json& j, std::set<std::string>& keys) {
    if (j.is_object()) {
        for (const auto& [k, v] : j.items()) {
            keys.insert(k);
            collect_keys(v, keys);
        }
    } else if (j.is_array()) {
        for (const auto& v : j) collect_keys(v, keys);
    }
}

void check_privacy(const ReferenceRun& ref) {
    std::set<std::string> names;
    for (const auto& p : ref.config.places) {
        names.insert(p.names.district);
        names.insert(p.names.municipality);
        names.insert(p.names.parish);
    }
    for (const auto& p : ref.config.participants) names.insert(p.municipality);
    std::set<std::string> ssids;
    for (const auto& p : ref.config.participants) ssids.insert(p.home_ssid);
    const std::set<std::string> forbidden_keys{"lat", "lon", "latitude", "longitude", "ssid", "home_ssid"};

    std::size_t lines = 0;
    int coordinate_hits = 0, ssid_hits = 0, name_hits = 0;
    for (const char* file : {"events.jsonl", "feedback.jsonl"}) {
        std::ifstream in(ref.dir / file);
        for (std::string line; std::getline(in, line);) {
            ++lines;
            std::set<std::string> keys;
            collect_keys(Json::parse(line), keys);
            for (const auto& k : keys)
                if (forbidden_keys.count(k)) (k.find("ssid") != std::string::npos ? ssid_hits : coordinate_hits)++;
            for (const auto& s : ssids)
                if (line.find(s) != std::string::npos) ++ssid_hits;
            if (line.find("NET-") != std::string::npos) ++ssid_hits;
            for (const auto& n : names)
                if (!n.empty() && line.find(n) != std::string::npos) ++name_hits;
        }
    }
    report("privacy_event_logs", lines > 0 && coordinate_hits == 0 && ssid_hits == 0 && name_hits == 0,
           std::to_string(lines) + " log lines, coordinates " + std::to_string(coordinate_hits) + ", SSIDs " +
               std::to_string(ssid_hits) + ", place names " + std::to_string(name_hits));

    Rng rng(99);
    const std::vector<std::string> parishes{"Arroios", "Carnaxide", "Laranjeiro", "Bonfim", "Alvalade", "Belem"};
    const std::vector<std::string> municipalities{"Lisboa", "Oeiras", "Almada", "Porto", "Sintra", "Cascais"};
    auto random_key = [&] {
        sensing::UserKey k{};
        for (auto& b : k) b = static_cast<std::uint8_t>(rng.integer(0, 255));
        return k;
    };
    int violations = 0;
    for (int i = 0; i < kAnonymizationSamples; ++i) {
        const auto a = random_key();
        auto b = random_key();
        if (b == a) b[0] ^= 1;
        const auto& m = municipalities[static_cast<std::size_t>(rng.integer(0, 5))];
        const auto& p = parishes[static_cast<std::size_t>(rng.integer(0, 5))];
        const std::string district = m == "Porto" ? "Porto" : "Lisboa";
        const auto t1 = sensing::anonymize_geo(a, district, m, p);
        const auto a_copy = a;
        const auto t2 = sensing::anonymize_geo(a_copy, district, m, p);
        const auto other = sensing::anonymize_geo(b, district, m, p);
        const bool deterministic = t1.district_token == t2.district_token &&
                                   t1.municipality_token == t2.municipality_token && t1.parish_token == t2.parish_token;
        const bool separated = t1.district_token != other.district_token &&
                               t1.municipality_token != other.municipality_token &&
                               t1.parish_token != other.parish_token;
        const bool opaque = t1.municipality_token.find(m) == std::string::npos && t1.parish_token.find(p) == std::string::npos;
        if (!deterministic || !separated || !opaque) ++violations;
    }
    report("privacy_anonymization", violations == 0,
           std::to_string(kAnonymizationSamples) + " samples, " + std::to_string(violations) + " violations");
}

// ---------------------------------------------------------------- pipeline

void check_pipeline(const fs::path& root) {
    int passing = 0;
    double slowest = 0;
    std::string detail;
    for (int seed = 1; seed <= kSeeds; ++seed) {
        const auto t0 = Clock::now();
        const fs::path dir = root / ("seed" + std::to_string(seed));
        sim::RunOptions options;
        options.out_dir = dir;
        sim::Simulator simulator(sim::default_scenario(), static_cast<std::uint64_t>(seed), options);
        simulator.run();

        const auto run = analysis::RunData::load_event_log(dir / "events.jsonl");
        const auto covid = analysis::load_covid_dataset(dir / "covid.csv");
        const auto events = analysis::EventTable::load(dir / "events.csv");
        const auto features = analysis::correlation_features(run, covid, events);
        int best_lag = -1;
        double best_r = -2;
        for (int lag = 0; lag <= 4; ++lag) {
            const auto m = analysis::build_matrix(features, lag);
            const auto r = m.at("sleep_quality", "positiveness");
            if (r && *r > best_r) {
                best_r = *r;
                best_lag = lag;
            }
        }
        const auto va = analysis::build_matrix(features, 0).at("valence", "arousal");
        const double elapsed = seconds_since(t0);
        slowest = std::max(slowest, elapsed);
        const bool ok = va && *va <= kValenceArousalCeiling && best_lag == kExpectedSleepLag &&
                        best_r >= kSleepPositivenessFloor && elapsed < kSeedBudgetSeconds;
        if (ok) ++passing;
        detail += " s" + std::to_string(seed) + "[va=" + (va ? fmt(*va, 3) : std::string("na")) +
                  " lag=" + std::to_string(best_lag) + " r=" + fmt(best_r, 3) + " " + fmt(elapsed, 3) + "s]";
    }
    report("pipeline_self_consistency", passing == kSeeds,
           std::to_string(passing) + "/" + std::to_string(kSeeds) + " seeds (r(valence,arousal) <= " +
               fmt(kValenceArousalCeiling) + ", argmax lag " + std::to_string(kExpectedSleepLag) + " with r >= " +
               fmt(kSleepPositivenessFloor) + ", < " + fmt(kSeedBudgetSeconds) + " s each; slowest " +
               fmt(slowest) + " s):" + detail);
}

}  // namespace

int main() {
    const fs::path root = fs::temp_directory_path() / ("vitoria-acceptance-" + std::to_string(::getpid()));
    fs::create_directories(root);
    try {
        check_zone_grid();
        check_positiveness();
        check_pearson();
        check_scheduler();
        check_thresholds();
        {
            auto ref = reference_run(root / "reference");
            check_control_group(ref);
            check_store(ref);
            check_privacy(ref);
        }
        check_pipeline(root);
    } catch (const std::exception& e) {
        report("acceptance_harness", false, e.what());
    }
    std::error_code ec;
    fs::remove_all(root, ec);
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
