#include "vitoria/sim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vitoria/attributes.hpp"
#include "vitoria/csv.hpp"
#include "vitoria/error.hpp"
#include "vitoria/ingest/envelope.hpp"

namespace vitoria::sim {

using engagement::QuestionnaireKind;
using sensing::ActivityLabel;

struct Simulator::Item {
    enum class Kind { Event, Vehicle, Answer };
    Timestamp t{};
    std::uint64_t seq{0};
    Kind kind{Kind::Event};
    SensorEvent ev;
    sensing::ActivitySegment segment;
    std::string prompt_id;
};

bool Simulator::ItemLater::operator()(const Item& a, const Item& b) const {
    if (a.t != b.t) return a.t > b.t;
    return a.seq > b.seq;
}

namespace {

struct Night {
    Timestamp bed{};
    Timestamp wake{};
};

std::uint64_t day_number(Date d) {
    return static_cast<std::uint64_t>(std::chrono::sys_days{d}.time_since_epoch().count());
}

int minute_of_day(Timestamp t) { return static_cast<int>(seconds_of_day(t) / 60); }

Timestamp plus_minutes(Timestamp t, double minutes) { return t + Seconds{static_cast<long long>(std::llround(minutes * 60))}; }

int clamp_round(double x, int lo, int hi) { return std::clamp(static_cast<int>(std::lround(x)), lo, hi); }

}  // namespace

struct Simulator::Agent {
    ParticipantProfile profile;
    Rng answers{0};
    sensing::HomeNetworkConfig home;
    std::string device_id;
    std::string api_key;
    std::priority_queue<Item, std::vector<Item>, ItemLater> queue;
    std::uint64_t seq{0};
    std::map<std::string, Timestamp> last_series_t;
    std::string planned_location;  // location label at the end of the last planned day
    std::uint64_t run_seed{0};

    Night night(Date d) const {
        // Night ending on the morning of d.
        Rng rng(mix_seed({run_seed, stable_hash(profile.id), profile.seed, day_number(d), 1}));
        const double wake = rng.normal(profile.sleep.wake_minute, profile.sleep.wake_sd_minutes);
        const double hours = std::clamp(rng.normal(profile.sleep.mean_hours, profile.sleep.hours_sd), 3.0, 11.0);
        const Timestamp wake_t = plus_minutes(start_of(d), std::clamp(wake, 5 * 60.0, 11 * 60.0));
        return Night{plus_minutes(wake_t, -hours * 60), wake_t};
    }

    void push(Item item) {
        item.seq = seq++;
        queue.push(std::move(item));
    }
};

Json RunSummary::to_json() const {
    return Json{{"synthetic", true},
                {"event_log_digest", event_log_digest},
                {"events_logged", events_logged},
                {"device_events_by_user", device_events_by_user},
                {"events_by_kind", events_by_kind},
                {"measurements_accepted", measurements_accepted},
                {"measurements_rejected", measurements_rejected},
                {"prompts_raised", prompts_raised},
                {"answers_accepted", answers_accepted},
                {"answers_refused", answers_refused},
                {"feedback_published", feedback_published}};
}

Simulator::Simulator(ScenarioConfig config, std::uint64_t seed, RunOptions options)
    : config_(std::move(config)),
      seed_(seed),
      options_(std::move(options)),
      clock_(start_of(config_.timeline.span_start()), config_.tick),
      end_(start_of(add_days(config_.timeline.span_end(), 1))),
      current_day_(config_.timeline.span_start()) {
    config_.validate();

    if (options_.out_dir) {
        std::filesystem::create_directories(*options_.out_dir);
        events_out_.open(*options_.out_dir / "events.jsonl", std::ios::trunc);
        feedback_out_.open(*options_.out_dir / "feedback.jsonl", std::ios::trunc);
        if (!events_out_ || !feedback_out_) throw Error(ErrorCode::ConfigError, "cannot write to " + options_.out_dir->string());
    }

    platform_ = std::make_unique<Platform>();
    auto& pf = *platform_;
    auto now = [this] { return clock_.now(); };
    pf.broker = std::make_unique<broker::ContextBroker>(broker::BrokerOptions{now, false, 3, std::nullopt, std::nullopt});
    std::optional<std::filesystem::path> history_dir;
    if (options_.out_dir && options_.persist_history) history_dir = *options_.out_dir / "history";
    pf.history = std::make_unique<history::HistoryStore>(history_dir);
    pf.broker->create_subscription(broker::Subscription{"", std::string(attr::kParticipantType), {}, pf.history->sink(), Seconds{0}});
    pf.gateway = std::make_unique<ingest::Gateway>(*pf.broker, now);

    std::vector<risk::MunicipalityRecord> records;
    for (const auto& r : config_.risk) records.push_back({r.municipality, risk::parse_level(r.level), r.effective_date});
    pf.risk.replace(risk::RiskTable(std::move(records)));
    for (const auto& p : config_.places) pf.gazetteer.add_cell(p.cell_lat, p.cell_lon, p.names);

    engagement::EngineOptions eo;
    eo.seed = seed_;
    eo.top_apps = [this](const std::string& user, Timestamp t) { return top_apps(user, t); };
    eo.answer_sink = [this](const SensorEvent& ev) { record(ev, true); };
    eo.platform_log = [this](const SensorEvent& ev) { record(ev, false); };
    pf.engine = std::make_unique<engagement::EngagementEngine>(std::move(eo));

    feedback::GranterOptions go;
    go.measures_url = config_.measures_url;
    go.baseline_phase = options_.feedback_from && config_.timeline.span_start() < *options_.feedback_from;
    pf.granter = std::make_unique<feedback::FeedbackGranter>(*pf.history, *pf.broker, std::move(go));
    pf.granter->set_listener([this](const std::string& user, const Json& published) {
        ++summary_.feedback_published;
        if (feedback_out_.is_open()) feedback_out_ << published.dump() << '\n';
        if (options_.on_feedback) options_.on_feedback(user, published);
    });

    for (const auto& profile : config_.participants) {
        auto agent = std::make_unique<Agent>();
        agent->profile = profile;
        agent->run_seed = seed_;
        agent->answers = Rng(mix_seed({seed_, stable_hash(profile.id), profile.seed, 0xA45}));
        Rng keys(mix_seed({seed_, stable_hash(profile.id), profile.seed, 0xCE7}));
        for (std::size_t i = 0; i < agent->home.user_key.size(); i += 8) {
            const auto word = keys.next();
            for (std::size_t b = 0; b < 8; ++b) agent->home.user_key[i + b] = static_cast<std::uint8_t>(word >> (8 * b));
        }
        agent->home.home_ssid = profile.home_ssid;
        agent->device_id = "phone-" + profile.id;
        {
            const std::array<std::uint64_t, 2> words{keys.next(), keys.next()};
            agent->api_key = to_hex(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(words.data()), 16));
        }
        pf.gateway->register_device(
            ingest::DeviceRegistration{agent->device_id, agent->api_key, profile.id, std::string(attr::kParticipantType),
                                       ingest::participant_aliases()});
        summary_.device_events_by_user[profile.id] = 0;
        by_id_[profile.id] = agent.get();
        if (!profile.silent) pf.granter->add_user(profile.id);
        agents_.push_back(std::move(agent));
    }

    const Date first = config_.timeline.span_start();
    for (auto& agent : agents_) {
        if (agent->profile.silent) continue;
        pf.engine->schedule_day(agent->profile.id, first);
        plan_day(*agent, first);
        if (config_.timeline.in_span(add_days(first, 1))) plan_day(*agent, add_days(first, 1));
    }
    pf.granter->on_tick(clock_.now());
}

Simulator::~Simulator() = default;

bool Simulator::done() const { return clock_.now() >= end_; }

std::vector<std::string> Simulator::top_apps(const std::string& user, Timestamp now) const {
    std::map<std::string, double> minutes;
    for (const auto& p : platform_->history->points({user, std::string(attr::kAppUsage)}, {now - Seconds{86400}, now})) {
        if (!p.value.is_object()) continue;
        minutes[p.value.value("package", "")] += p.value.value("foreground_minutes", 0.0);
    }
    std::vector<std::pair<std::string, double>> ranked(minutes.begin(), minutes.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::string> out;
    for (const auto& [pkg, m] : ranked) {
        if (out.size() == engagement::kTopApps) break;
        out.push_back(pkg);
    }
    return out;
}

void Simulator::record(const SensorEvent& ev, bool device) {
    const auto line = ev.to_json().dump();
    log_hash_.update(line);
    log_hash_.update("\n");
    if (events_out_.is_open()) events_out_ << line << '\n';
    ++summary_.events_logged;
    ++summary_.events_by_kind[ev.kind];
    if (options_.on_event) options_.on_event(ev);
    if (!device) return;
    auto it = by_id_.find(ev.user);
    if (it == by_id_.end()) return;
    ++summary_.device_events_by_user[ev.user];
    const auto batch = ingest::to_batch(ev);
    if (batch.empty()) return;
    const auto result = platform_->gateway->ingest(it->second->api_key, it->second->device_id, batch);
    summary_.measurements_accepted += result.accepted_count;
    summary_.measurements_rejected += result.rejected.size() + result.skipped.size();
}

SensorEvent Simulator::unique_time(Agent& agent, SensorEvent ev, const std::string& series) {
    auto& last = agent.last_series_t[series];
    if (ev.t <= last) ev.t = last + Seconds{1};
    last = ev.t;
    return ev;
}

void Simulator::plan_day(Agent& agent, Date day) {
    const auto& p = agent.profile;
    const DayParameters dp = couple_to_timeline(p, config_.timeline, day);
    Rng rng(mix_seed({seed_, stable_hash(p.id), p.seed, day_number(day), 2}));
    const Night tonight = agent.night(add_days(day, 1));
    const Night last_night = agent.night(day);
    const Timestamp wake = last_night.wake;
    const Timestamp bed = tonight.bed;
    const Timestamp sim_start = start_of(config_.timeline.span_start());

    std::vector<Item> items;
    auto event = [&](Timestamp t, std::string kind, Json payload) {
        if (t < sim_start) return;
        Item item;
        item.t = t;
        item.ev = SensorEvent{p.id, std::move(kind), std::move(payload), t};
        items.push_back(std::move(item));
    };

    event(wake, "sleep_state", Json{{"sleeping", false}, {"confidence", static_cast<int>(rng.integer(70, 100))}});
    event(bed, "sleep_state", Json{{"sleeping", true}, {"confidence", static_cast<int>(rng.integer(70, 100))}});

    auto home_fix = [&] { return sensing::GeoFix{p.home.lat, p.home.lon}; };
    auto geo_event = [&](Timestamp t, const sensing::GeoFix& fix) {
        const Date date = date_of(t);
        const auto tokens = sensing::resolve_geo_context(
            fix, platform_->gazetteer,
            [&](const std::string& municipality) -> std::optional<risk::MunicipalRiskLevel> {
                try {
                    return platform_->risk.lookup_risk(municipality, date);
                } catch (const Error&) {
                    return std::nullopt;
                }
            },
            agent.home);
        Json payload{{"district_token", tokens.district_token},
                     {"municipality_token", tokens.municipality_token},
                     {"parish_token", tokens.parish_token}};
        if (tokens.risk_level) payload["risk"] = risk::to_string(*tokens.risk_level);
        event(t, "geo", std::move(payload));
    };
    auto wifi_event = [&](Timestamp t, bool at_home) {
        sensing::WifiScanResult scan;
        const int neighbours = static_cast<int>(rng.integer(1, 4));
        for (int i = 0; i < neighbours; ++i) {
            char bssid[18];
            std::snprintf(bssid, sizeof bssid, "02:%02x:%02x:%02x:%02x:%02x", static_cast<int>(rng.integer(0, 255)),
                          static_cast<int>(rng.integer(0, 255)), static_cast<int>(rng.integer(0, 255)),
                          static_cast<int>(rng.integer(0, 255)), static_cast<int>(rng.integer(0, 255)));
            scan.push_back({"NET-" + std::to_string(rng.integer(100, 999)), bssid, static_cast<int>(rng.integer(-90, -50))});
        }
        if (at_home) scan.push_back({p.home_ssid, "02:00:00:00:00:01", static_cast<int>(rng.integer(-60, -35))});
        Json aps = Json::array();
        for (const auto& ap : sensing::sanitize_wifi(scan)) aps.push_back({{"bssid", ap.bssid}, {"rssi", ap.rssi}});
        event(t, "wifi", Json{{"aps", aps}});
        const auto label = std::string(sensing::to_string(sensing::infer_discrete_location(scan, agent.home)));
        if (label != agent.planned_location) {
            event(t, "location", Json{{"label", label}});
            agent.planned_location = label;
        }
    };
    auto bt_event = [&](Timestamp t, int people, double extra_rate) {
        std::vector<sensing::BluetoothSighting> scan;
        for (int i = 0; i < people; ++i) {
            const auto cls = std::array{sensing::DeviceClass::Smartphone, sensing::DeviceClass::Wearable,
                                        sensing::DeviceClass::Headphones}[static_cast<std::size_t>(rng.integer(0, 2))];
            scan.push_back({cls, static_cast<int>(rng.integer(-95, -50)), false});
        }
        const int others = static_cast<int>(rng.poisson(extra_rate));
        for (int i = 0; i < others; ++i) {
            const auto cls = std::array{sensing::DeviceClass::Tv, sensing::DeviceClass::Car,
                                        sensing::DeviceClass::Other}[static_cast<std::size_t>(rng.integer(0, 2))];
            scan.push_back({cls, static_cast<int>(rng.integer(-95, -50)), false});
        }
        // The participant's own paired earbuds are connected and never counted.
        if (rng.bernoulli(0.3)) scan.push_back({sensing::DeviceClass::Headphones, -40, true});
        event(t, "bt_scan", Json{{"person_devices", sensing::count_person_devices(scan)}});
    };

    wifi_event(plus_minutes(wake, 2), true);
    geo_event(plus_minutes(wake, 10), home_fix());

    // Outings: Poisson count, placed in the waking day without overlap.
    struct Outing {
        Timestamp start;
        Timestamp end;
        bool vehicle;
    };
    std::vector<Outing> outings;
    {
        const Timestamp first = plus_minutes(wake, 30);
        const Timestamp last = plus_minutes(bed, -60);
        const auto n = rng.poisson(dp.outing_rate);
        std::vector<std::pair<Timestamp, double>> drafts;
        for (long long i = 0; i < n; ++i) {
            const double span = static_cast<double>((last - first).count());
            const Timestamp s = first + Seconds{static_cast<long long>(rng.uniform() * std::max(span, 0.0))};
            const double minutes = std::clamp(rng.exponential(55.0), 10.0, 240.0);
            drafts.emplace_back(s, minutes);
        }
        std::sort(drafts.begin(), drafts.end());
        Timestamp free_from = first;
        for (const auto& [s0, minutes] : drafts) {
            const Timestamp s = std::max(s0, free_from);
            const Timestamp e = plus_minutes(s, minutes);
            if (e > last) continue;
            outings.push_back({s, e, rng.bernoulli(p.vehicle_share)});
            free_from = plus_minutes(e, 15);
        }
    }

    // Raw activity classifications for the whole waking day.
    std::vector<sensing::ActivityClassification> stream;
    auto classify = [&](Timestamp t, ActivityLabel label) {
        int confidence = static_cast<int>(rng.integer(60, 100));
        if (rng.bernoulli(0.08)) {
            label = static_cast<ActivityLabel>(rng.integer(0, 6));
            confidence = static_cast<int>(rng.integer(10, 45));
        }
        stream.push_back({label, confidence, t});
    };

    for (const auto& o : outings) {
        const double length = static_cast<double>((o.end - o.start).count()) / 60.0;
        const double drive = o.vehicle ? std::min(rng.uniform(4, 25), length / 3) : 0.0;
        for (Timestamp m = o.start; m < o.end; m += Seconds{60}) {
            const double into = static_cast<double>((m - o.start).count()) / 60.0;
            const double left = static_cast<double>((o.end - m).count()) / 60.0;
            ActivityLabel label = ActivityLabel::OnFoot;
            if (into < 1 || left <= 1) {
                label = ActivityLabel::Walking;
            } else if (o.vehicle && (into < 1 + drive || left <= 1 + drive)) {
                label = ActivityLabel::InVehicle;
            } else {
                label = ((m - o.start).count() / 600 % 3 == 1) ? ActivityLabel::Still : ActivityLabel::Walking;
            }
            classify(m, label);
        }
        wifi_event(o.start, false);
        sensing::GeoFix fix{p.home.lat + rng.uniform(-0.02, 0.02), p.home.lon + rng.uniform(-0.02, 0.02)};
        geo_event(plus_minutes(o.start, 5), fix);
        for (Timestamp m = plus_minutes(o.start, 3); m < o.end; m = plus_minutes(m, 10)) {
            bt_event(m, 1 + static_cast<int>(rng.poisson(dp.contacts_level)), 1.0);
        }
        for (Timestamp m = plus_minutes(o.start, 7); m < o.end; m = plus_minutes(m, 30)) {
            event(m, "noise", Json{{"db", rng.normal(62, 6)}});
        }
        event(o.end, "steps", Json{{"count", static_cast<int>(rng.poisson(90.0 * length))}});
        wifi_event(o.end, true);
    }

    auto at_home = [&](Timestamp t) {
        return std::none_of(outings.begin(), outings.end(),
                            [&](const Outing& o) { return o.start <= t && t <= o.end; });
    };
    for (Timestamp t = wake; t < bed; t += Seconds{60}) {
        const auto since_wake = (t - wake).count();
        if (!at_home(t)) continue;
        if (since_wake % (5 * 60) == 0) classify(t, rng.bernoulli(0.2) ? ActivityLabel::Tilting : ActivityLabel::Still);
        if (since_wake % (20 * 60) == 0) {
            const int visitors = rng.bernoulli(0.04) ? static_cast<int>(rng.integer(1, 3)) : 0;
            bt_event(t + Seconds{30}, p.household_devices + visitors, 1.5);
        }
        if (since_wake % (30 * 60) == 0) {
            std::array<double, 5> window{};
            for (auto& db : window) db = rng.normal(42, 5);
            event(t + Seconds{45}, "noise", Json{{"db", sensing::mean_noise(window)}});
        }
        if (since_wake % 3600 == 0) event(t + Seconds{55}, "steps", Json{{"count", static_cast<int>(rng.poisson(150))}});
    }
    for (Timestamp t = plus_minutes(wake, 20); t < bed; t = plus_minutes(t, 30)) {
        sensing::WatchSample hr{sensing::WatchKind::HeartRate,
                                std::clamp(std::lround(rng.normal(at_home(t) ? 72 : 88, 7)), 40L, 180L), t};
        hr.validate();
        event(hr.observed_at, "heart_rate", Json{{"bpm", hr.value}});
    }
    std::sort(stream.begin(), stream.end(),
              [](const auto& a, const auto& b) { return a.observed_at < b.observed_at; });
    classify(bed, ActivityLabel::Still);

    const auto segments = sensing::smooth_activity(stream, sensing::kDefaultConfidenceThreshold, bed);
    for (const auto& seg : segments) event(seg.start, "activity", Json{{"label", sensing::to_string(seg.label)}});
    for (const auto& episode : sensing::detect_in_vehicle_episodes(segments)) {
        if (*episode.end < sim_start) continue;
        Item item;
        item.t = *episode.end;
        item.kind = Item::Kind::Vehicle;
        item.segment = episode;
        items.push_back(std::move(item));
    }

    // Foreground app sessions.
    const double awake_seconds = static_cast<double>((bed - wake).count());
    for (const auto& [pkg, mean_minutes] : dp.app_minutes) {
        if (mean_minutes <= 0) continue;
        const double total = mean_minutes * std::exp(rng.normal(0, 0.35));
        const int sessions = static_cast<int>(rng.integer(1, 3));
        for (int s = 0; s < sessions; ++s) {
            const double minutes = std::round(total / sessions * 10) / 10;
            const Timestamp start = wake + Seconds{static_cast<long long>(rng.uniform() * std::max(0.0, awake_seconds - minutes * 60))};
            sensing::AppUsageRecord rec{pkg, minutes, start, plus_minutes(start, minutes)};
            rec.validate();
            event(rec.window_end, "app_usage",
                  Json{{"package", rec.package},
                       {"foreground_minutes", rec.foreground_minutes},
                       {"window_start", format_timestamp(rec.window_start)},
                       {"window_end", format_timestamp(rec.window_end)}});
        }
    }

    for (auto& item : items) agent.push(std::move(item));
}

engagement::Answer Simulator::answer_for(Agent& agent, const engagement::PendingPrompt& prompt) {
    auto& rng = agent.answers;
    const auto& p = agent.profile;
    const Date day = date_of(prompt.raised_at);
    const DayParameters dp = couple_to_timeline(p, config_.timeline, day);
    switch (prompt.kind) {
        case QuestionnaireKind::SamEmotion: {
            const double valence = dp.valence_mean + rng.normal(0, p.emotion.valence_noise);
            const double arousal =
                p.emotion.arousal_base - p.emotion.arousal_coupling * (valence - 3.0) + rng.normal(0, p.emotion.arousal_noise);
            return engagement::SamAnswer{clamp_round(valence, 1, engagement::kSamPoints),
                                         clamp_round(arousal, 1, engagement::kSamPoints)};
        }
        case QuestionnaireKind::SleepReport: {
            const Night n = agent.night(day);
            const int quality = clamp_round(dp.sleep_quality_mean + rng.normal(0, p.sleep.quality_noise), 1, 5);
            engagement::SleepAnswer a;
            a.bed_minute = minute_of_day(n.bed);
            a.wake_minute = minute_of_day(n.wake);
            if (a.bed_minute == a.wake_minute) a.bed_minute = (a.bed_minute + 1439) % 1440;
            a.quality = static_cast<engagement::SleepQuality>(quality);
            return a;
        }
        case QuestionnaireKind::AppPurpose: {
            engagement::PurposeAnswer a;
            for (const auto& app : prompt.context.value("apps", Json::array())) {
                const auto pkg = app.get<std::string>();
                PurposeWeights w;
                if (auto it = p.apps.find(pkg); it != p.apps.end()) w = it->second.purposes;
                const std::array<double, 4> weights{w.communication, w.leisure, w.research, w.work};
                double total = weights[0] + weights[1] + weights[2] + weights[3];
                if (total <= 0) total = 1;
                double u = rng.uniform() * total;
                int pick = 0;
                for (; pick < 3; ++pick) {
                    if (u < weights[static_cast<std::size_t>(pick)]) break;
                    u -= weights[static_cast<std::size_t>(pick)];
                }
                a.purposes[pkg] = static_cast<engagement::Purpose>(pick);
            }
            return a;
        }
        case QuestionnaireKind::Proximity: {
            const int seen = prompt.context.value("person_devices", 0);
            return engagement::ProximityAnswer{static_cast<int>(rng.poisson(0.5 * seen))};
        }
        case QuestionnaireKind::Transport: {
            const auto& name = p.transports[static_cast<std::size_t>(rng.integer(0, static_cast<long long>(p.transports.size()) - 1))];
            const auto type = engagement::parse_transport(name);
            const auto options = engagement::bucket_options(type);
            const auto index = std::min<std::size_t>(options.size() - 1, static_cast<std::size_t>(rng.poisson(0.8)));
            return engagement::TransportAnswer{type, std::string(options[index]), prompt.context.value("trip_id", "")};
        }
    }
    throw Error(ErrorCode::UnknownPrompt, prompt.prompt_id);
}

void Simulator::schedule_answer(Agent& agent, const engagement::PendingPrompt& prompt) {
    ++summary_.prompts_raised;
    if (!agent.answers.bernoulli(agent.profile.compliance)) return;
    const double mean = std::max(agent.profile.answer_delay_mean_minutes, 1.0);
    const double delay = std::clamp(agent.answers.exponential(mean), 1.0, 23.0 * 60);
    Item item;
    item.t = plus_minutes(prompt.raised_at, delay);
    item.kind = Item::Kind::Answer;
    item.prompt_id = prompt.prompt_id;
    agent.push(std::move(item));
}

std::vector<SensorEvent> Simulator::step(const std::string& participant) {
    auto it = by_id_.find(participant);
    if (it == by_id_.end()) throw Error(ErrorCode::NotFound, "participant " + participant);
    Agent& agent = *it->second;
    auto& engine = *platform_->engine;
    const Timestamp now = clock_.now();
    std::vector<SensorEvent> out;
    while (!agent.queue.empty() && agent.queue.top().t <= now) {
        Item item = agent.queue.top();
        agent.queue.pop();
        switch (item.kind) {
            case Item::Kind::Event: {
                const auto series = item.ev.kind;
                auto ev = unique_time(agent, std::move(item.ev), series);
                record(ev, true);
                if (ev.kind == "bt_scan") {
                    if (auto prompt = engine.on_proximity(agent.profile.id, ev.payload.at("person_devices").get<int>(), ev.t)) {
                        schedule_answer(agent, *prompt);
                    }
                }
                out.push_back(std::move(ev));
                break;
            }
            case Item::Kind::Vehicle:
                if (auto prompt = engine.on_vehicle_episode(agent.profile.id, item.segment, item.t)) {
                    schedule_answer(agent, *prompt);
                }
                break;
            case Item::Kind::Answer: {
                auto prompt = engine.find_pending(item.prompt_id);
                if (!prompt) {
                    ++summary_.answers_refused;
                    break;
                }
                const auto series = "answer:" + std::string(engagement::to_string(prompt->kind));
                auto& last = agent.last_series_t[series];
                const Timestamp t = item.t <= last ? last + Seconds{1} : item.t;
                last = t;
                try {
                    auto record = engine.submit_answer(item.prompt_id, answer_for(agent, *prompt), t);
                    ++summary_.answers_accepted;
                    out.push_back(record.to_event());
                } catch (const Error&) {
                    ++summary_.answers_refused;
                }
                break;
            }
        }
    }
    return out;
}

void Simulator::tick() {
    if (done()) return;
    auto& pf = *platform_;
    const Timestamp now = clock_.advance();
    const Date today = date_of(now);
    if (today != current_day_) {
        current_day_ = today;
        if (options_.feedback_from && today >= *options_.feedback_from) pf.granter->set_baseline_phase(false);
        if (config_.timeline.in_span(today)) {
            for (auto& agent : agents_) {
                if (agent->profile.silent) continue;
                pf.engine->schedule_day(agent->profile.id, today);
                if (config_.timeline.in_span(add_days(today, 1))) plan_day(*agent, add_days(today, 1));
            }
        }
    }
    for (const auto& prompt : pf.engine->advance(now)) schedule_answer(*by_id_.at(prompt.user), prompt);
    for (auto& agent : agents_) {
        if (!agent->profile.silent) step(agent->profile.id);
    }
    pf.granter->on_tick(now);
}

void Simulator::finish() {
    if (finished_) return;
    finished_ = true;
    summary_.event_log_digest = log_hash_.hex_final();
    platform_->history->flush();
    if (!options_.out_dir) return;
    events_out_.close();
    feedback_out_.close();
    const auto& dir = *options_.out_dir;
    std::ofstream(dir / "summary.json") << summary_.to_json().dump(2) << '\n';
    std::ofstream(dir / "scenario.json") << config_.to_json().dump(2) << '\n';
    {
        std::ofstream covid(dir / "covid.csv");
        const Date from{std::chrono::year{2021}, std::chrono::January, std::chrono::day{1}};
        write_epi_csv(covid, synthetic_epi_series(seed_, std::min(from, config_.timeline.span_start()),
                                                  std::max(add_days(from, 150), config_.timeline.span_end())));
    }
    std::ofstream events_csv(dir / "events.csv");
    write_events_csv(events_csv, config_.timeline);
}

RunResult Simulator::run() {
    while (!done()) tick();
    finish();
    return RunResult{std::move(platform_), summary_};
}

RunResult run_scenario(const ScenarioConfig& config, std::uint64_t seed, RunOptions options) {
    Simulator sim(config, seed, std::move(options));
    return sim.run();
}

std::vector<risk::EpiSnapshot> synthetic_epi_series(std::uint64_t seed, Date from, Date to) {
    // A winter wave peaking late January, then a long decline to a low plateau.
    Rng rng(mix_seed({seed, 0xC0F1D}));
    const Date peak{std::chrono::year{2021}, std::chrono::January, std::chrono::day{28}};
    const Date warmup = add_days(from, -30);
    std::vector<double> daily;
    std::vector<Date> dates;
    for (Date d = warmup; d <= to; d = add_days(d, 1)) {
        const int k = days_between(peak, d);
        double level = k < 0 ? 12000.0 * std::exp(0.045 * k) : 400.0 + 11600.0 * std::exp(-0.075 * k);
        if (weekday_index(d) == 6 || weekday_index(d) == 0) level *= 0.75;
        daily.push_back(std::max(0.0, std::round(level * std::exp(rng.normal(0, 0.08)))));
        dates.push_back(d);
    }
    std::vector<risk::EpiSnapshot> out;
    double total = 420000;
    for (std::size_t i = 0; i < daily.size(); ++i) {
        total += daily[i];
        if (dates[i] < from) continue;
        double last14 = 0, last7 = 0, prev7 = 0;
        for (std::size_t j = 0; j < 14; ++j) last14 += daily[i - j];
        for (std::size_t j = 0; j < 7; ++j) last7 += daily[i - j];
        for (std::size_t j = 7; j < 14; ++j) prev7 += daily[i - j];
        risk::EpiSnapshot s;
        s.date = dates[i];
        s.new_confirmed = daily[i];
        s.total_confirmed = total;
        s.active_cases = std::round(1.4 * last14);
        s.new_deaths = std::round(std::max(0.0, 0.017 * daily[i - 10] * std::exp(rng.normal(0, 0.15))));
        s.incidence = std::round(last14 / 102.95 * 10) / 10;
        s.rt = prev7 > 0 ? std::round(std::pow(last7 / prev7, 5.0 / 7.0) * 100) / 100 : 1.0;
        out.push_back(s);
    }
    return out;
}

void write_epi_csv(std::ostream& out, const std::vector<risk::EpiSnapshot>& rows) {
    out << "# synthetic epidemic series generated by the cohort simulator; not an official dataset\n";
    out << "date,active_cases,new_confirmed,total_confirmed,new_deaths,incidence,rt\n";
    auto cell = [&](const std::optional<double>& v) {
        if (!v) return std::string{};
        std::ostringstream s;
        s << *v;
        return s.str();
    };
    for (const auto& r : rows) {
        out << format_date(r.date) << ',' << cell(r.active_cases) << ',' << cell(r.new_confirmed) << ','
            << cell(r.total_confirmed) << ',' << cell(r.new_deaths) << ',' << cell(r.incidence) << ',' << cell(r.rt)
            << '\n';
    }
}

void write_events_csv(std::ostream& out, const ScenarioTimeline& timeline) {
    out << "date,sign,description\n";
    for (const auto& e : timeline.entries()) {
        if (e.sign == 0) continue;
        out << format_date(e.date) << ',' << (e.sign > 0 ? "+1" : "-1") << ',' << csv_escape(e.description) << '\n';
    }
}

}  // namespace vitoria::sim
