#include "vitoria/sim/scenario.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <set>
#include <cmath>
#include <fstream>

#include "vitoria/error.hpp"
#include "vitoria/rng.hpp"

namespace vitoria::sim {
namespace {

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); }

Date date_field(const Json& j, const char* key) {
    try {
        return parse_date(j.at(key).get<std::string>());
    } catch (const Json::exception& e) {
        config_error(std::string("field '") + key + "': " + e.what());
    } catch (const Error& e) {
        config_error(std::string("field '") + key + "': " + e.what());
    }
}

Json phase_value_json(const PhaseValue& v) { return Json{{"by_phase", v.by_phase}, {"default", v.fallback}}; }

PhaseValue phase_value_from(const Json& j) {
    PhaseValue v;
    if (j.is_number()) {
        v.fallback = j.get<double>();
        return v;
    }
    v.fallback = j.value("default", 0.0);
    if (j.contains("by_phase")) v.by_phase = j.at("by_phase").get<std::map<std::string, double>>();
    return v;
}

void check_probability(double p, const std::string& what) {
    if (!(p >= 0.0 && p <= 1.0)) config_error(what + " must lie in [0, 1]");
}

void check_rate(const PhaseValue& v, const std::string& what) {
    if (!(v.fallback >= 0)) config_error(what + " must be >= 0");
    for (const auto& [phase, x] : v.by_phase) {
        if (!(x >= 0)) config_error(what + " for phase '" + phase + "' must be >= 0");
    }
}

PhaseValue phased(double confinement, double d1, double d2, double d3, double d4) {
    return PhaseValue{{{"confinement", confinement},
                       {"deconfinement_1", d1},
                       {"deconfinement_2", d2},
                       {"deconfinement_3", d3},
                       {"deconfinement_4", d4}},
                      confinement};
}

}  // namespace

double PhaseValue::at(const std::string& phase) const {
    auto it = by_phase.find(phase);
    return it == by_phase.end() ? fallback : it->second;
}

void ParticipantProfile::validate() const {
    if (id.empty()) config_error("participant without id");
    check_probability(compliance, id + ".compliance");
    check_probability(vehicle_share, id + ".vehicle_share");
    check_rate(outing_rate, id + ".outing_rate");
    check_rate(contacts_level, id + ".contacts_level");
    for (const auto& [pkg, app] : apps) check_rate(app.daily_minutes, id + ".apps." + pkg);
    if (household_devices < 0) config_error(id + ".household_devices must be >= 0");
    if (!(answer_delay_mean_minutes >= 0)) config_error(id + ".answer_delay_mean_minutes must be >= 0");
    if (!(sleep.mean_hours > 0 && sleep.mean_hours < 16)) config_error(id + ".sleep.mean_hours out of range");
    if (sleep.hours_sd < 0 || sleep.wake_sd_minutes < 0 || sleep.quality_noise < 0) {
        config_error(id + ".sleep spreads must be >= 0");
    }
    if (emotion.valence_noise < 0 || emotion.arousal_noise < 0) config_error(id + ".emotion noise must be >= 0");
    if (transports.empty()) config_error(id + ".transports must not be empty");
    if (!silent && home_ssid.empty()) config_error(id + ".home_ssid required for emitting participants");
}

ScenarioTimeline::ScenarioTimeline(std::vector<TimelineEntry> entries, Date span_start, Date span_end)
    : entries_(std::move(entries)), start_(span_start), end_(span_end) {
    if (!span_start.ok() || !span_end.ok() || span_end < span_start) config_error("timeline span is empty");
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].sign < -1 || entries_[i].sign > 1) config_error("timeline sign must be -1, 0 or +1");
        if (i > 0 && entries_[i].date < entries_[i - 1].date) config_error("timeline dates must ascend");
    }
}

std::string ScenarioTimeline::phase_at(Date d) const {
    std::string phase = "baseline";
    for (const auto& e : entries_) {
        if (e.date > d) break;
        if (!e.phase.empty()) phase = e.phase;
    }
    return phase;
}

int ScenarioTimeline::positiveness_before(Date d) const {
    int sum = 0;
    for (const auto& e : entries_) {
        if (e.date >= d) break;
        sum += e.sign;
    }
    return sum;
}

double ScenarioTimeline::mean_positiveness() const {
    double sum = 0;
    for (Date d = start_; d <= end_; d = add_days(d, 1)) sum += positiveness_before(d);
    return sum / span_days();
}

void ScenarioConfig::validate() const {
    if (participants.empty()) config_error("no participants");
    if (tick <= Seconds{0} || tick > Seconds{3600}) config_error("tick must lie in (0, 3600] seconds");
    std::set<std::string> ids;
    for (const auto& p : participants) {
        p.validate();
        if (!ids.insert(p.id).second) config_error("duplicate participant '" + p.id + "'");
    }
}

Json ScenarioConfig::to_json() const {
    Json ps = Json::array();
    for (const auto& p : participants) {
        Json apps = Json::object();
        for (const auto& [pkg, a] : p.apps) {
            apps[pkg] = {{"daily_minutes", phase_value_json(a.daily_minutes)},
                         {"purposes",
                          {{"communication", a.purposes.communication},
                           {"leisure", a.purposes.leisure},
                           {"research", a.purposes.research},
                           {"work", a.purposes.work}}}};
        }
        ps.push_back({{"id", p.id},
                      {"seed", p.seed},
                      {"silent", p.silent},
                      {"home_ssid", p.home_ssid},
                      {"municipality", p.municipality},
                      {"home", {{"lat", p.home.lat}, {"lon", p.home.lon}}},
                      {"outing_rate", phase_value_json(p.outing_rate)},
                      {"contacts_level", phase_value_json(p.contacts_level)},
                      {"vehicle_share", p.vehicle_share},
                      {"transports", p.transports},
                      {"household_devices", p.household_devices},
                      {"sleep_model",
                       {{"mean_hours", p.sleep.mean_hours},
                        {"hours_sd", p.sleep.hours_sd},
                        {"wake_minute", p.sleep.wake_minute},
                        {"wake_sd_minutes", p.sleep.wake_sd_minutes},
                        {"quality_base", p.sleep.quality_base},
                        {"quality_coupling", p.sleep.quality_coupling},
                        {"quality_noise", p.sleep.quality_noise}}},
                      {"emotion_model",
                       {{"valence_base", p.emotion.valence_base},
                        {"weekday_slope", p.emotion.weekday_slope},
                        {"valence_noise", p.emotion.valence_noise},
                        {"arousal_base", p.emotion.arousal_base},
                        {"arousal_coupling", p.emotion.arousal_coupling},
                        {"arousal_noise", p.emotion.arousal_noise}}},
                      {"app_profile", apps},
                      {"compliance", p.compliance},
                      {"answer_delay_mean_minutes", p.answer_delay_mean_minutes}});
    }
    Json tl = Json::array();
    for (const auto& e : timeline.entries()) {
        Json entry{{"date", format_date(e.date)}, {"sign", e.sign}, {"description", e.description}};
        if (!e.phase.empty()) entry["phase"] = e.phase;
        tl.push_back(entry);
    }
    Json places_json = Json::array();
    for (const auto& p : places) {
        places_json.push_back({{"cell_lat", p.cell_lat},
                               {"cell_lon", p.cell_lon},
                               {"district", p.names.district},
                               {"municipality", p.names.municipality},
                               {"parish", p.names.parish}});
    }
    Json risk_json = Json::array();
    for (const auto& r : risk) {
        risk_json.push_back(
            {{"municipality", r.municipality}, {"level", r.level}, {"effective_date", format_date(r.effective_date)}});
    }
    return Json{{"synthetic", true},
                {"span", {{"start", format_date(timeline.span_start())}, {"end", format_date(timeline.span_end())}}},
                {"tick_seconds", tick.count()},
                {"measures_url", measures_url},
                {"participants", ps},
                {"timeline", tl},
                {"places", places_json},
                {"risk", risk_json}};
}

ScenarioConfig ScenarioConfig::from_json(const Json& j) {
    if (!j.is_object()) config_error("scenario must be a JSON object");
    ScenarioConfig c;
    try {
        for (const auto& pj : j.at("participants")) {
            ParticipantProfile p;
            p.id = pj.at("id").get<std::string>();
            p.seed = pj.value("seed", std::uint64_t{0});
            p.silent = pj.value("silent", false);
            p.home_ssid = pj.value("home_ssid", "");
            p.municipality = pj.value("municipality", "");
            if (pj.contains("home")) p.home = {pj["home"].at("lat").get<double>(), pj["home"].at("lon").get<double>()};
            if (pj.contains("outing_rate")) p.outing_rate = phase_value_from(pj["outing_rate"]);
            if (pj.contains("contacts_level")) p.contacts_level = phase_value_from(pj["contacts_level"]);
            p.vehicle_share = pj.value("vehicle_share", p.vehicle_share);
            if (pj.contains("transports")) p.transports = pj["transports"].get<std::vector<std::string>>();
            p.household_devices = pj.value("household_devices", p.household_devices);
            if (pj.contains("sleep_model")) {
                const auto& s = pj["sleep_model"];
                p.sleep.mean_hours = s.value("mean_hours", p.sleep.mean_hours);
                p.sleep.hours_sd = s.value("hours_sd", p.sleep.hours_sd);
                p.sleep.wake_minute = s.value("wake_minute", p.sleep.wake_minute);
                p.sleep.wake_sd_minutes = s.value("wake_sd_minutes", p.sleep.wake_sd_minutes);
                p.sleep.quality_base = s.value("quality_base", p.sleep.quality_base);
                p.sleep.quality_coupling = s.value("quality_coupling", p.sleep.quality_coupling);
                p.sleep.quality_noise = s.value("quality_noise", p.sleep.quality_noise);
            }
            if (pj.contains("emotion_model")) {
                const auto& e = pj["emotion_model"];
                p.emotion.valence_base = e.value("valence_base", p.emotion.valence_base);
                p.emotion.weekday_slope = e.value("weekday_slope", p.emotion.weekday_slope);
                p.emotion.valence_noise = e.value("valence_noise", p.emotion.valence_noise);
                p.emotion.arousal_base = e.value("arousal_base", p.emotion.arousal_base);
                p.emotion.arousal_coupling = e.value("arousal_coupling", p.emotion.arousal_coupling);
                p.emotion.arousal_noise = e.value("arousal_noise", p.emotion.arousal_noise);
            }
            if (pj.contains("app_profile")) {
                for (const auto& [pkg, aj] : pj["app_profile"].items()) {
                    AppProfile a;
                    a.daily_minutes = phase_value_from(aj.at("daily_minutes"));
                    if (aj.contains("purposes")) {
                        const auto& w = aj["purposes"];
                        a.purposes = {w.value("communication", 0.0), w.value("leisure", 0.0),
                                      w.value("research", 0.0), w.value("work", 0.0)};
                    }
                    p.apps[pkg] = a;
                }
            }
            p.compliance = pj.value("compliance", p.compliance);
            p.answer_delay_mean_minutes = pj.value("answer_delay_mean_minutes", p.answer_delay_mean_minutes);
            c.participants.push_back(std::move(p));
        }
        std::vector<TimelineEntry> entries;
        for (const auto& e : j.value("timeline", Json::array())) {
            entries.push_back({date_field(e, "date"), e.value("phase", ""), e.value("sign", 0),
                               e.value("description", "")});
        }
        const auto& span = j.at("span");
        c.timeline = ScenarioTimeline(std::move(entries), date_field(span, "start"), date_field(span, "end"));
        c.tick = Seconds{j.value("tick_seconds", 60)};
        c.measures_url = j.value("measures_url", c.measures_url);
        for (const auto& pj : j.value("places", Json::array())) {
            c.places.push_back({pj.at("cell_lat").get<double>(), pj.at("cell_lon").get<double>(),
                                {pj.at("district").get<std::string>(), pj.at("municipality").get<std::string>(),
                                 pj.at("parish").get<std::string>()}});
        }
        for (const auto& rj : j.value("risk", Json::array())) {
            c.risk.push_back({rj.at("municipality").get<std::string>(), rj.at("level").get<std::string>(),
                              date_field(rj, "effective_date")});
        }
    } catch (const Json::exception& e) {
        config_error(std::string("scenario: ") + e.what());
    }
    c.validate();
    return c;
}

ScenarioConfig ScenarioConfig::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) config_error("cannot open scenario " + file.string());
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::exception& e) {
        config_error(file.string() + ": " + e.what());
    }
    return from_json(j);
}

std::vector<TimelineEntry> portugal_2021_events() {
    using std::chrono::January, std::chrono::February, std::chrono::March, std::chrono::April, std::chrono::May;
    auto d = [](int day, std::chrono::month m) { return Date{std::chrono::year{2021}, m, std::chrono::day(day)}; };
    return {
        {d(8, January), "", -1, "daily cases above 10000"},
        {d(12, January), "", -1, "cases rising in every age group"},
        {d(14, January), "", -1, "new containment measures announced"},
        {d(18, January), "confinement", -1, "containment measures in force"},
        {d(21, January), "", -1, "schools closed"},
        {d(28, January), "", -1, "record daily deaths and cases"},
        {d(9, February), "", +1, "downward trend reported"},
        {d(12, February), "", -1, "confinement extended through March"},
        {d(22, February), "", +1, "health ministry notes the decline"},
        {d(1, March), "", +1, "vaccination progress among the oldest"},
        {d(3, March), "", -1, "one year since the first case"},
        {d(8, March), "", -1, "survey on public concern"},
        {d(12, March), "", +1, "staged reopening plan published"},
        {d(13, March), "", -1, "intervention thresholds proposed"},
        {d(15, March), "deconfinement_1", +1, "first reopening stage"},
        {d(22, March), "", +1, "suspended vaccine brand resumed"},
        {d(26, March), "", +1, "one million first doses"},
        {d(5, April), "deconfinement_2", +1, "second reopening stage"},
        {d(13, April), "", -1, "incidence up among young children"},
        {d(19, April), "deconfinement_3", +1, "third reopening stage"},
        {d(23, April), "", +1, "vaccination booking opens to over-65"},
        {d(26, April), "", +1, "first day without deaths"},
        {d(3, May), "deconfinement_4", +1, "fourth reopening stage"},
        {d(11, May), "", -1, "street celebrations after league final"},
        {d(23, May), "", -1, "street celebrations after cup final"},
    };
}

ScenarioConfig default_scenario() {
    ScenarioConfig c;
    const Date start{std::chrono::year{2021}, std::chrono::February, std::chrono::day{1}};
    c.timeline = ScenarioTimeline(portugal_2021_events(), start, add_days(start, 103));

    struct Town {
        const char* district;
        const char* municipality;
        const char* parish;
        double lat;
        double lon;
    };
    // Cell south-west corners on the 0.05 degree grid.
    const std::array<Town, 4> towns{{
        {"Lisboa", "Lisboa", "Arroios", 38.70, -9.15},
        {"Lisboa", "Oeiras", "Carnaxide", 38.70, -9.25},
        {"Setubal", "Almada", "Laranjeiro", 38.65, -9.20},
        {"Porto", "Porto", "Bonfim", 41.15, -8.60},
    }};
    for (const auto& t : towns) c.places.push_back({t.lat, t.lon, {t.district, t.municipality, t.parish}});

    auto risk = [&](const char* m, const char* level, int y, unsigned mo, unsigned day) {
        c.risk.push_back({m, level, Date{std::chrono::year{y}, std::chrono::month{mo}, std::chrono::day{day}}});
    };
    for (const auto& t : towns) risk(t.municipality, "extremely_high", 2021, 1, 15);
    for (const auto& t : towns) risk(t.municipality, "very_high", 2021, 3, 1);
    risk("Lisboa", "high", 2021, 4, 1);
    risk("Oeiras", "moderated", 2021, 4, 1);
    risk("Almada", "high", 2021, 4, 1);
    risk("Porto", "moderated", 2021, 4, 15);
    risk("Lisboa", "very_high", 2021, 5, 10);

    const std::array<const char*, 3> transports_a{"own_car", "friend_vehicle", "taxi_tvde"};
    const std::array<const char*, 3> transports_b{"bus", "subway_train_tram", "boat"};

    Rng knobs(mix_seed({0x5eed, 19}));
    for (int i = 0; i < 19; ++i) {
        ParticipantProfile p;
        char id[8];
        std::snprintf(id, sizeof id, "p%02d", i + 1);
        p.id = id;
        p.seed = 1000 + static_cast<std::uint64_t>(i);
        p.silent = i >= 14;
        p.home_ssid = "HOME-" + p.id + "-5G";
        const auto& town = towns[static_cast<std::size_t>(i) % towns.size()];
        p.municipality = town.municipality;
        p.home = {town.lat + 0.025, town.lon + 0.025};
        const double mobility = knobs.uniform(0.7, 1.4);
        p.outing_rate = phased(0.6 * mobility, 0.8 * mobility, 1.0 * mobility, 1.2 * mobility, 1.4 * mobility);
        const double sociability = knobs.uniform(0.8, 1.6);
        p.contacts_level = phased(1.5 * sociability, 2.0 * sociability, 2.5 * sociability, 3.0 * sociability,
                                  3.5 * sociability);
        p.vehicle_share = knobs.uniform(0.2, 0.6);
        p.transports = {transports_a[static_cast<std::size_t>(i) % 3]};
        if (i % 2 == 1) p.transports.push_back(transports_b[static_cast<std::size_t>(i) % 3]);
        p.household_devices = static_cast<int>(knobs.integer(0, 2));
        p.sleep.mean_hours = knobs.uniform(6.5, 8.0);
        p.sleep.quality_base = knobs.uniform(2.7, 3.3);
        p.sleep.quality_coupling = 0.45;
        p.sleep.quality_noise = 0.45;
        p.emotion.valence_base = knobs.uniform(2.8, 3.4);
        p.emotion.weekday_slope = 0.12;
        p.emotion.valence_noise = 0.6;
        p.emotion.arousal_base = knobs.uniform(2.8, 3.2);
        p.emotion.arousal_coupling = 0.9;
        p.emotion.arousal_noise = 0.35;
        p.compliance = knobs.uniform(0.75, 0.95);
        p.answer_delay_mean_minutes = knobs.uniform(30, 150);

        const double screen = knobs.uniform(0.7, 1.3);
        auto app = [&](const char* pkg, PhaseValue minutes, PurposeWeights w) {
            for (auto& [phase, v] : minutes.by_phase) v *= screen;
            minutes.fallback *= screen;
            p.apps[pkg] = AppProfile{std::move(minutes), w};
        };
        app("com.whatsapp", phased(55, 52, 50, 48, 46), {0.85, 0.1, 0.0, 0.05});
        app("com.instagram.android", phased(35, 40, 44, 47, 49), {0.2, 0.8, 0.0, 0.0});
        app("com.google.android.youtube", phased(40, 36, 33, 30, 28), {0.0, 0.85, 0.15, 0.0});
        app("com.android.chrome", phased(30, 30, 29, 28, 28), {0.05, 0.2, 0.6, 0.15});
        app("com.google.android.gm", phased(15, 15, 14, 14, 13), {0.3, 0.0, 0.05, 0.65});
        app("com.android.camera", phased(3, 4, 5, 6, 7), {0.2, 0.8, 0.0, 0.0});
        if (i % 3 == 0) app("com.netflix.mediaclient", phased(45, 40, 35, 30, 28), {0.0, 1.0, 0.0, 0.0});
        if (i % 3 == 1) app("us.zoom.videomeetings", phased(35, 33, 28, 24, 20), {0.25, 0.0, 0.1, 0.65});
        if (i % 4 == 2) app("com.supercell.clashroyale", phased(30, 28, 25, 22, 20), {0.0, 1.0, 0.0, 0.0});
        c.participants.push_back(std::move(p));
    }
    c.validate();
    return c;
}

DayParameters couple_to_timeline(const ParticipantProfile& profile, const ScenarioTimeline& timeline, Date date) {
    if (!timeline.in_span(date)) {
        throw Error(ErrorCode::OutOfSpan, format_date(date) + " outside " + format_date(timeline.span_start()) + ".." +
                                              format_date(timeline.span_end()));
    }
    DayParameters d;
    d.date = date;
    d.phase = timeline.phase_at(date);
    d.outing_rate = profile.outing_rate.at(d.phase);
    d.contacts_level = profile.contacts_level.at(d.phase);
    for (const auto& [pkg, app] : profile.apps) d.app_minutes[pkg] = app.daily_minutes.at(d.phase);
    const double centred = timeline.positiveness_before(add_days(date, -3)) - timeline.mean_positiveness();
    d.sleep_quality_mean = profile.sleep.quality_base + profile.sleep.quality_coupling * centred;
    d.valence_mean = profile.emotion.valence_base + profile.emotion.weekday_slope * weekday_index(date);
    return d;
}

}  // namespace vitoria::sim
