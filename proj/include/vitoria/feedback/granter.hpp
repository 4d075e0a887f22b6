#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vitoria/broker/context_broker.hpp"
#include "vitoria/history/history_store.hpp"

namespace vitoria::feedback {

enum class FeedbackGroup { Control, Active };
std::string_view to_string(FeedbackGroup g);

/// Stable FNV-1a parity of the id: even -> control, odd -> active. Throws Malformed on "".
FeedbackGroup assign_group(std::string_view user_id);

enum class Window { Last24h, Last4d, Last8d };
inline constexpr std::array<Window, 3> kWindows{Window::Last24h, Window::Last4d, Window::Last8d};
std::string_view to_string(Window w);
Window parse_window(std::string_view text);
Seconds length(Window w);

/// Field names that only the active group may ever see.
inline constexpr std::array<std::string_view, 9> kActiveOnlyFields{
    "municipal_risk",      "contacts_mean",     "outings_count",         "outings_mean_minutes", "transport_pct",
    "contacts_estimate",   "contacts_message",  "mobility_mean_minutes", "mobility_message"};

struct Outing {
    Timestamp start{};
    Timestamp end{};
    bool observed_departure{false};  // false when the run starts at the window edge

    double minutes() const { return static_cast<double>((end - start).count()) / 60.0; }
};

struct OutingSummary {
    std::vector<Outing> episodes;
    int outings_count{0};  // home -> other transitions inside the window
};

/// Maximal runs of "other" within the window. `initial` is the location
/// label in force at window.from (the last point before it), if known.
OutingSummary derive_outings(std::span<const history::SeriesPoint> points, history::TimeRange window,
                             std::optional<std::string> initial = std::nullopt);

struct WindowMetrics {
    Window window{Window::Last24h};
    Timestamp computed_at{};
    std::map<std::string, double> activity_pct;  // empty when no activity data
    std::optional<double> sleep_mean_hours;
    std::optional<double> sleep_mean_quality;  // ordinal 1..5
    std::optional<std::string> sleep_quality_label;
    std::optional<double> valence_mean;
    std::optional<double> arousal_mean;
    // Active group only.
    std::optional<std::string> municipal_risk;
    std::optional<double> contacts_mean;
    std::optional<int> outings_count;
    std::optional<double> outings_mean_minutes;
    std::optional<std::map<std::string, double>> transport_pct;

    /// Absent fields are omitted, never zero-filled.
    Json to_json() const;
};

/// Round-half-up of an ordinal sleep-quality mean to its label.
std::string_view quality_label_for(double ordinal_mean);

enum class Polarity { Positive, Negative };
std::string_view to_string(Polarity p);

inline constexpr int kContactsLimit = 10;            // "10 or less" is positive
inline constexpr double kMobilityLimitMinutes = 60;  // 60 min and above is negative

Polarity contacts_polarity(int contacts_estimate);
Polarity mobility_polarity(double mean_outing_minutes);

/// Report templates keyed "group.metric.polarity"; `<N>` is substituted.
class MessageTemplates {
public:
    static MessageTemplates defaults();
    /// Lines `key = text`; '#' starts a comment. Unlisted keys keep their defaults.
    static MessageTemplates load(const std::filesystem::path& file);

    std::string render(std::string_view key, std::string_view n) const;
    void set(std::string key, std::string text) { templates_[std::move(key)] = std::move(text); }

private:
    std::map<std::string, std::string, std::less<>> templates_;
};

struct WeeklyReport {
    std::string user;
    FeedbackGroup group{FeedbackGroup::Control};
    Timestamp week_end{};
    // Active group only.
    std::optional<int> contacts_estimate;
    std::optional<std::string> contacts_message;
    std::optional<double> mobility_mean_minutes;
    std::optional<std::string> mobility_message;
    // Both groups.
    std::string risk_line;
    std::string measures_link;
    std::vector<std::string> notes;  // estimation basis when data is missing

    Json to_json() const;
};

/// True when t is a Saturday at 21:00:00.
bool is_report_instant(Timestamp t);

struct GranterOptions {
    bool baseline_phase{false};  // suppresses all computation and publication
    Seconds cadence{30 * 60};
    MessageTemplates templates = MessageTemplates::defaults();
    std::string measures_url{"https://covid19estamoson.gov.pt/"};
};

class FeedbackGranter {
public:
    FeedbackGranter(const history::HistoryStore& store, broker::ContextBroker& broker, GranterOptions options = {});

    void add_user(const std::string& user);
    std::vector<std::string> users() const;

    WindowMetrics compute_window_metrics(const std::string& user, Window window, Timestamp now) const;
    WeeklyReport compose_weekly_report(const std::string& user, Timestamp week_end) const;

    /// One step of the recompute loop: every cadence boundary crossed since the
    /// previous tick recomputes all three windows per user and publishes them;
    /// Saturday 21:00 additionally publishes the weekly report. The first call
    /// only anchors the loop.
    void on_tick(Timestamp now);

    void set_baseline_phase(bool baseline);
    /// Observer of every published payload, as serialized.
    void set_listener(std::function<void(const std::string& user, const Json& published)> listener);

    std::optional<std::array<WindowMetrics, 3>> latest_metrics(const std::string& user) const;
    std::optional<WeeklyReport> latest_report(const std::string& user) const;
    std::uint64_t recompute_count(const std::string& user) const;
    std::uint64_t report_count(const std::string& user) const;

    static std::string snapshot_entity_id(const std::string& user) { return "feedback:" + user; }
    static std::string report_entity_id(const std::string& user) { return "weekly:" + user; }

private:
    void recompute(Timestamp at);
    void publish_reports(Timestamp at);

    const history::HistoryStore& store_;
    broker::ContextBroker& broker_;
    GranterOptions options_;

    mutable std::mutex mutex_;
    std::vector<std::string> users_;
    std::optional<Timestamp> last_tick_;
    std::map<std::string, std::array<WindowMetrics, 3>> latest_;
    std::map<std::string, WeeklyReport> reports_;
    std::map<std::string, std::uint64_t> recomputes_;
    std::map<std::string, std::uint64_t> report_counts_;
    std::function<void(const std::string&, const Json&)> listener_;
};

}  // namespace vitoria::feedback
