#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vitoria/engagement/answers.hpp"
#include "vitoria/event.hpp"
#include "vitoria/sensing/sensing.hpp"

namespace vitoria::engagement {

inline constexpr Seconds kPromptValidity{24 * 3600};
inline constexpr Seconds kProximityCooldown{3600};
inline constexpr Seconds kTripChainGap{15 * 60};
inline constexpr int kProximityTrigger = 2;  // prompt when strictly more devices are seen
inline constexpr int kSamWindowStartHour = 14;
inline constexpr int kSamWindowMinutes = 6 * 60;
inline constexpr int kPurposeHour = 14;
inline constexpr int kSleepReportHour = 10;
inline constexpr int kReminderHour = 16;
inline constexpr std::size_t kTopApps = 5;

struct PendingPrompt {
    std::string prompt_id;
    std::string user;
    QuestionnaireKind kind{QuestionnaireKind::SamEmotion};
    Timestamp raised_at{};
    Timestamp expires_at{};
    Json context = Json::object();  // {"apps": [...]} or {"trip_id", "trip_seconds"}

    Json to_json() const;
};

/// A planned daily item; `kind` is empty for the 16:00 reminder.
struct ScheduledPrompt {
    std::string user;
    std::optional<QuestionnaireKind> kind;
    Timestamp at{};

    bool is_reminder() const { return !kind.has_value(); }
    bool operator==(const ScheduledPrompt&) const = default;
};

struct Reminder {
    std::string user;
    Timestamp at{};
    std::vector<std::string> prompt_ids;
};

struct AnswerRecord {
    std::string prompt_id;
    std::string user;
    QuestionnaireKind kind{QuestionnaireKind::SamEmotion};
    Answer answer;
    Timestamp raised_at{};
    Timestamp answered_at{};
    Json context = Json::object();

    /// {"user", "kind": "answer", "payload": {"prompt_id", "questionnaire", "raised_at", ...answer}, "t"}.
    SensorEvent to_event() const;
};

/// Per-user trigger bookkeeping.
struct TriggerState {
    std::optional<Timestamp> last_proximity_prompt_at;
    std::optional<std::string> open_trip_id;
    Timestamp trip_last_end{};
    double trip_seconds{0};
};

struct EngineOptions {
    std::uint64_t seed{0};
    /// Most used packages over the 24 h before `now`, most used first.
    std::function<std::vector<std::string>(const std::string& user, Timestamp now)> top_apps;
    /// Receives accepted answers as sensor events (normally forwarded to the gateway).
    std::function<void(const SensorEvent&)> answer_sink;
    /// Receives prompt and reminder lifecycle events.
    std::function<void(const SensorEvent&)> platform_log;
};

class EngagementEngine {
public:
    explicit EngagementEngine(EngineOptions options = {});

    /// SAM at a seeded uniform minute in [14:00, 20:00), purpose at 14:00,
    /// sleep report at 10:00, reminder at 16:00. Pure in (seed, user, date).
    std::vector<ScheduledPrompt> plan_daily_prompts(const std::string& user, Date date) const;

    /// Stores the day's plan; items fire from advance().
    void schedule_day(const std::string& user, Date date);

    /// Expires due prompts, then raises every scheduled item with at <= now.
    /// Returns the prompts raised by this call.
    std::vector<PendingPrompt> advance(Timestamp now);

    std::optional<PendingPrompt> on_proximity(const std::string& user, int person_count, Timestamp now);
    std::optional<PendingPrompt> on_vehicle_episode(const std::string& user, const sensing::ActivitySegment& episode,
                                                    Timestamp now);

    AnswerRecord submit_answer(const std::string& prompt_id, Answer answer, Timestamp now);
    AnswerRecord submit_answer(const std::string& prompt_id, const Json& body, Timestamp now);

    std::vector<std::string> expire_pending(Timestamp now);
    std::vector<PendingPrompt> list_pending(const std::string& user, Timestamp now) const;
    std::optional<PendingPrompt> find_pending(const std::string& prompt_id) const;

    std::vector<Reminder> reminders() const;
    std::vector<AnswerRecord> answers() const;
    TriggerState trigger_state(const std::string& user) const;

    /// Transport answers with the discarded flag set for superseded answers of a trip.
    struct TransportLogEntry {
        AnswerRecord record;
        bool discarded{false};
    };
    std::vector<TransportLogEntry> transport_log() const;

    std::uint64_t raised_count(QuestionnaireKind k) const;

private:
    PendingPrompt raise_locked(const std::string& user, QuestionnaireKind kind, Timestamp at, Json context);
    std::vector<std::string> expire_locked(Timestamp now);
    void log(const SensorEvent& ev) const;

    EngineOptions options_;
    mutable std::mutex mutex_;
    std::uint64_t next_prompt_{1};
    std::multimap<Timestamp, ScheduledPrompt> schedule_;
    std::map<std::string, PendingPrompt> pending_;
    std::set<std::string> expired_;
    std::set<std::string> closed_;
    std::map<std::string, TriggerState> triggers_;
    std::vector<Reminder> reminders_;
    std::vector<AnswerRecord> answers_;
    std::vector<TransportLogEntry> transport_log_;
    std::map<QuestionnaireKind, std::uint64_t> raised_;
};

}  // namespace vitoria::engagement
