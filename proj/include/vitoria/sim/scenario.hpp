#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vitoria/event.hpp"
#include "vitoria/sensing/sensing.hpp"

namespace vitoria::sim {

/// Per-phase value with a fallback for phases not listed.
struct PhaseValue {
    std::map<std::string, double> by_phase;
    double fallback{0};

    double at(const std::string& phase) const;
};

struct SleepModel {
    double mean_hours{7.2};
    double hours_sd{0.6};
    double wake_minute{7 * 60 + 15};
    double wake_sd_minutes{35};
    double quality_base{3.0};
    double quality_coupling{0.0};  // per unit of positiveness three days earlier
    double quality_noise{0.5};
};

struct EmotionModel {
    double valence_base{3.2};
    double weekday_slope{0.1};  // added per weekday index, 0 = Monday
    double valence_noise{0.5};
    double arousal_base{3.0};
    double arousal_coupling{0.9};  // arousal moves by -coupling per unit of valence above 3
    double arousal_noise{0.3};
};

struct PurposeWeights {
    double communication{0.25};
    double leisure{0.25};
    double research{0.25};
    double work{0.25};
};

struct AppProfile {
    PhaseValue daily_minutes;
    PurposeWeights purposes;
};

struct ParticipantProfile {
    std::string id;
    std::uint64_t seed{0};
    bool silent{false};  // enrolled but never started the app
    std::string home_ssid;
    std::string municipality;
    sensing::GeoFix home;
    PhaseValue outing_rate;     // outings per day
    PhaseValue contacts_level;  // mean person-devices met per scan while out
    double vehicle_share{0.4};  // probability an outing uses a vehicle
    std::vector<std::string> transports{"own_car"};
    int household_devices{1};
    SleepModel sleep;
    EmotionModel emotion;
    std::map<std::string, AppProfile> apps;
    double compliance{0.8};
    double answer_delay_mean_minutes{90};

    /// Throws ConfigError on probabilities outside [0,1] or negative rates.
    void validate() const;
};

struct TimelineEntry {
    Date date;
    std::string phase;  // phase in force from this date on; empty keeps the previous one
    int sign{0};        // +1 / -1 perception of the event, 0 for phase changes only
    std::string description;
};

class ScenarioTimeline {
public:
    ScenarioTimeline() = default;
    /// Throws ConfigError when dates are not ascending or signs fall outside {-1, 0, +1}.
    ScenarioTimeline(std::vector<TimelineEntry> entries, Date span_start, Date span_end);

    const std::vector<TimelineEntry>& entries() const { return entries_; }
    Date span_start() const { return start_; }
    Date span_end() const { return end_; }  // inclusive
    int span_days() const { return days_between(start_, end_) + 1; }
    bool in_span(Date d) const { return start_ <= d && d <= end_; }

    std::string phase_at(Date d) const;
    /// Sum of signs of events dated strictly before d.
    int positiveness_before(Date d) const;
    /// Mean of positiveness_before over the span.
    double mean_positiveness() const;

private:
    std::vector<TimelineEntry> entries_;
    Date start_{};
    Date end_{};
};

struct PlaceRow {
    double cell_lat{0};
    double cell_lon{0};
    sensing::PlaceNames names;
};

struct RiskRow {
    std::string municipality;
    std::string level;
    Date effective_date;
};

struct ScenarioConfig {
    std::vector<ParticipantProfile> participants;
    ScenarioTimeline timeline;
    Seconds tick{60};
    std::vector<PlaceRow> places;
    std::vector<RiskRow> risk;
    std::string measures_url{"https://covid19estamoson.gov.pt/"};

    void validate() const;
    Json to_json() const;
    /// Throws ConfigError on missing or ill-typed fields.
    static ScenarioConfig from_json(const Json& j);
    static ScenarioConfig load(const std::filesystem::path& file);
};

/// The built-in trial shape: 19 enrolled, 14 emitting data, over 104 days from 2021-02-01.
ScenarioConfig default_scenario();
/// Dated pandemic events with perception signs, January to May 2021.
std::vector<TimelineEntry> portugal_2021_events();

struct DayParameters {
    Date date;
    std::string phase;
    double outing_rate{0};
    double contacts_level{0};
    std::map<std::string, double> app_minutes;
    double sleep_quality_mean{3};
    double valence_mean{3};
};

/// Day parameters for one participant; throws OutOfSpan outside the timeline span.
DayParameters couple_to_timeline(const ParticipantProfile& profile, const ScenarioTimeline& timeline, Date date);

}  // namespace vitoria::sim
