#include "vitoria/feedback/granter.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "vitoria/attributes.hpp"
#include "vitoria/engagement/answers.hpp"
#include "vitoria/error.hpp"
#include "vitoria/risk/risk_feed.hpp"
#include "vitoria/rng.hpp"

namespace vitoria::feedback {
namespace {

using history::SeriesKey;
using history::SeriesPoint;
using history::TimeRange;

SeriesKey key(const std::string& user, std::string_view attribute) { return {user, std::string(attribute)}; }

std::optional<double> mean_of(const std::vector<SeriesPoint>& points) {
    double sum = 0;
    std::size_t n = 0;
    for (const auto& p : points) {
        if (!p.value.is_number()) continue;
        sum += p.value.get<double>();
        ++n;
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

std::string label_of(const Json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

}  // namespace

std::string_view to_string(FeedbackGroup g) { return g == FeedbackGroup::Control ? "control" : "active"; }

FeedbackGroup assign_group(std::string_view user_id) {
    if (user_id.empty()) throw Error(ErrorCode::Malformed, "empty user id");
    return (stable_hash(user_id) & 1U) == 0 ? FeedbackGroup::Control : FeedbackGroup::Active;
}

std::string_view to_string(Window w) {
    switch (w) {
        case Window::Last24h: return "last_24h";
        case Window::Last4d: return "last_4d";
        case Window::Last8d: return "last_8d";
    }
    return "?";
}

Window parse_window(std::string_view text) {
    for (auto w : kWindows) {
        if (to_string(w) == text) return w;
    }
    if (text == "24h") return Window::Last24h;
    if (text == "4d") return Window::Last4d;
    if (text == "8d") return Window::Last8d;
    throw Error(ErrorCode::Malformed, "unknown window '" + std::string(text) + "'");
}

Seconds length(Window w) {
    switch (w) {
        case Window::Last24h: return Seconds{24 * 3600};
        case Window::Last4d: return Seconds{4 * 24 * 3600};
        case Window::Last8d: return Seconds{8 * 24 * 3600};
    }
    return Seconds{0};
}

OutingSummary derive_outings(std::span<const SeriesPoint> points, TimeRange window, std::optional<std::string> initial) {
    OutingSummary out;
    std::optional<Outing> open;
    std::optional<std::string> state = std::move(initial);
    if (state && *state == "other") open = Outing{window.from, window.from, false};
    for (const auto& p : points) {
        if (!window.contains(p.observed_at)) continue;
        const auto label = label_of(p.value);
        if (label == "other" && !open) {
            const bool departure = state.has_value() && *state == "home";
            open = Outing{p.observed_at, p.observed_at, departure};
            if (departure) ++out.outings_count;
        } else if (label == "home" && open) {
            open->end = p.observed_at;
            out.episodes.push_back(*open);
            open.reset();
        }
        state = label;
    }
    if (open) {
        open->end = window.to;
        out.episodes.push_back(*open);
    }
    return out;
}

Json WindowMetrics::to_json() const {
    Json j{{"window", to_string(window)}, {"computed_at", format_timestamp(computed_at)}};
    if (!activity_pct.empty()) j["activity_pct"] = activity_pct;
    if (sleep_mean_hours) j["sleep_mean_hours"] = *sleep_mean_hours;
    if (sleep_mean_quality) j["sleep_mean_quality"] = *sleep_mean_quality;
    if (sleep_quality_label) j["sleep_quality_label"] = *sleep_quality_label;
    if (valence_mean) j["valence_mean"] = *valence_mean;
    if (arousal_mean) j["arousal_mean"] = *arousal_mean;
    if (municipal_risk) j["municipal_risk"] = *municipal_risk;
    if (contacts_mean) j["contacts_mean"] = *contacts_mean;
    if (outings_count) j["outings_count"] = *outings_count;
    if (outings_mean_minutes) j["outings_mean_minutes"] = *outings_mean_minutes;
    if (transport_pct) j["transport_pct"] = *transport_pct;
    return j;
}

std::string_view quality_label_for(double ordinal_mean) {
    const int rounded = static_cast<int>(std::floor(ordinal_mean + 0.5));
    return history::sleep_quality_label(std::clamp(rounded, 1, 5));
}

std::string_view to_string(Polarity p) { return p == Polarity::Positive ? "positive" : "negative"; }

Polarity contacts_polarity(int contacts_estimate) {
    return contacts_estimate <= kContactsLimit ? Polarity::Positive : Polarity::Negative;
}

Polarity mobility_polarity(double mean_outing_minutes) {
    return mean_outing_minutes < kMobilityLimitMinutes ? Polarity::Positive : Polarity::Negative;
}

MessageTemplates MessageTemplates::defaults() {
    MessageTemplates t;
    t.set("active.contacts.positive",
          "We estimate you were in contact with <N> people during the last week, what is within what is "
          "recommended. Well done, keep limiting your contacts to your household.");
    t.set("active.contacts.negative",
          "We estimate you were in contact with <N> people during the last week. That is above the "
          "recommendation, so you are more exposed to the risk of infection. Try to keep contacts to your "
          "household.");
    t.set("active.mobility.positive",
          "On average your trips away from home lasted less than 1 hour last week, what is within what is "
          "recommended. Well done, keep leaving home only for essential trips.");
    t.set("active.mobility.negative",
          "On average your trips away from home lasted 1 hour or more last week. That is above the "
          "recommendation, so you are more exposed to the risk of infection. Try to stay home except for "
          "essential trips.");
    t.set("active.risk.line",
          "The risk level in the municipality where you live is <N>. See the measures for your municipality at "
          "https://covid19estamoson.gov.pt");
    t.set("control.risk.line",
          "See the measures recommended for the municipality where you live at https://covid19estamoson.gov.pt/");
    t.set("any.measures.line", "See the general measures currently in force at <N>");
    return t;
}

MessageTemplates MessageTemplates::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorCode::NotFound, "message templates " + file.string());
    auto t = defaults();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(lineno, "expected 'key = text'");
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        t.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return t;
}

std::string MessageTemplates::render(std::string_view key, std::string_view n) const {
    auto it = templates_.find(key);
    if (it == templates_.end()) throw Error(ErrorCode::NotFound, "message template '" + std::string(key) + "'");
    std::string text = it->second;
    for (auto pos = text.find("<N>"); pos != std::string::npos; pos = text.find("<N>", pos + n.size())) {
        text.replace(pos, 3, n);
    }
    return text;
}

Json WeeklyReport::to_json() const {
    Json j{{"user", user},
           {"group", to_string(group)},
           {"week_end", format_timestamp(week_end)},
           {"risk_line", risk_line},
           {"measures_link", measures_link}};
    if (contacts_estimate) j["contacts_estimate"] = *contacts_estimate;
    if (contacts_message) j["contacts_message"] = *contacts_message;
    if (mobility_mean_minutes) j["mobility_mean_minutes"] = *mobility_mean_minutes;
    if (mobility_message) j["mobility_message"] = *mobility_message;
    if (!notes.empty()) j["notes"] = notes;
    return j;
}

bool is_report_instant(Timestamp t) {
    return weekday_index(date_of(t)) == 5 && seconds_of_day(t) == 21 * 3600;
}

FeedbackGranter::FeedbackGranter(const history::HistoryStore& store, broker::ContextBroker& broker,
                                 GranterOptions options)
    : store_(store), broker_(broker), options_(std::move(options)) {
    if (options_.cadence <= Seconds{0}) throw Error(ErrorCode::ConfigError, "cadence must be positive");
}

void FeedbackGranter::add_user(const std::string& user) {
    assign_group(user);
    std::lock_guard lock(mutex_);
    if (std::find(users_.begin(), users_.end(), user) == users_.end()) users_.push_back(user);
}

std::vector<std::string> FeedbackGranter::users() const {
    std::lock_guard lock(mutex_);
    return users_;
}

WindowMetrics FeedbackGranter::compute_window_metrics(const std::string& user, Window window, Timestamp now) const {
    const TimeRange range{now - length(window), now};
    const double window_seconds = static_cast<double>(length(window).count());
    WindowMetrics m;
    m.window = window;
    m.computed_at = now;

    // Each activity label holds until the next point; "unknown" marks uncovered time.
    {
        const auto k = key(user, attr::kActivity);
        auto points = store_.points(k, range);
        std::optional<std::string> current;
        if (auto before = store_.last_before(k, range.from)) current = label_of(before->value);
        Timestamp cursor = range.from;
        std::map<std::string, long long> seconds;
        auto close = [&](Timestamp until) {
            if (current && *current != attr::kUnknownActivity) seconds[*current] += (until - cursor).count();
            cursor = until;
        };
        for (const auto& p : points) {
            close(p.observed_at);
            current = label_of(p.value);
        }
        close(range.to);
        for (const auto& [label, secs] : seconds) {
            if (secs > 0) m.activity_pct[label] = 100.0 * static_cast<double>(secs) / window_seconds;
        }
    }

    m.sleep_mean_hours = mean_of(store_.points(key(user, attr::kSleepHours), range));
    {
        double sum = 0;
        std::size_t n = 0;
        for (const auto& p : store_.points(key(user, attr::kSleepQuality), range)) {
            if (int o = p.value.is_string() ? history::sleep_quality_ordinal(p.value.get<std::string>()) : 0; o > 0) {
                sum += o;
                ++n;
            }
        }
        if (n > 0) {
            m.sleep_mean_quality = sum / static_cast<double>(n);
            m.sleep_quality_label = std::string(quality_label_for(*m.sleep_mean_quality));
        }
    }
    m.valence_mean = mean_of(store_.points(key(user, attr::kValence), range));
    m.arousal_mean = mean_of(store_.points(key(user, attr::kArousal), range));

    if (assign_group(user) == FeedbackGroup::Control) return m;

    if (auto risk = store_.last_before(key(user, attr::kMunicipalRisk), now)) m.municipal_risk = label_of(risk->value);

    {
        const auto answers = store_.points(key(user, attr::kProximity), range);
        if (!answers.empty()) {
            double total = 0;
            for (const auto& p : answers) total += p.value.get<double>();
            m.contacts_mean = total / (window_seconds / 86400.0);
        }
    }

    {
        const auto k = key(user, attr::kLocation);
        const auto points = store_.points(k, range);
        std::optional<std::string> initial;
        if (auto before = store_.last_before(k, range.from)) initial = label_of(before->value);
        if (!points.empty() || initial) {
            const auto outings = derive_outings(points, range, initial);
            m.outings_count = outings.outings_count;
            if (!outings.episodes.empty()) {
                double total = 0;
                for (const auto& e : outings.episodes) total += e.minutes();
                m.outings_mean_minutes = total / static_cast<double>(outings.episodes.size());
            }
        }
    }

    {
        std::vector<engagement::TransportObservation> observations;
        for (const auto& p : store_.points(key(user, attr::kTransport), range)) {
            if (!p.value.is_object()) continue;
            observations.push_back({p.value.value("trip_id", ""),
                                    engagement::parse_transport(p.value.value("transport", "own_car")),
                                    p.value.value("people", ""), p.value.value("trip_seconds", 0.0), p.observed_at});
        }
        if (!observations.empty()) {
            const auto trips = engagement::latest_per_trip(observations);
            double total = 0;
            for (const auto& t : trips) total += t.trip_seconds;
            std::map<std::string, double> pct;
            for (const auto& t : trips) {
                const double w = total > 0 ? t.trip_seconds / total : 1.0 / static_cast<double>(trips.size());
                pct[std::string(engagement::to_string(t.transport))] += 100.0 * w;
            }
            m.transport_pct = std::move(pct);
        }
    }
    return m;
}

WeeklyReport FeedbackGranter::compose_weekly_report(const std::string& user, Timestamp week_end) const {
    if (!is_report_instant(week_end)) {
        throw Error(ErrorCode::InvalidInput, "weekly reports close on Saturday 21:00, not " + format_timestamp(week_end));
    }
    WeeklyReport r;
    r.user = user;
    r.group = assign_group(user);
    r.week_end = week_end;
    r.measures_link = options_.templates.render("any.measures.line", options_.measures_url);
    if (r.group == FeedbackGroup::Control) {
        r.risk_line = options_.templates.render("control.risk.line", "");
        return r;
    }

    const TimeRange week{week_end - Seconds{7 * 24 * 3600}, week_end};
    int contacts = 0;
    const auto answers = store_.points(key(user, attr::kProximity), week);
    for (const auto& p : answers) contacts += static_cast<int>(std::lround(p.value.get<double>()));
    if (answers.empty()) r.notes.push_back("no proximity answers this week; contact estimate is 0");
    r.contacts_estimate = contacts;
    r.contacts_message = options_.templates.render(
        std::string("active.contacts.") + std::string(to_string(contacts_polarity(contacts))), std::to_string(contacts));

    const auto k = key(user, attr::kLocation);
    std::optional<std::string> initial;
    if (auto before = store_.last_before(k, week.from)) initial = label_of(before->value);
    const auto outings = derive_outings(store_.points(k, week), week, initial);
    double mean_minutes = 0;
    if (outings.episodes.empty()) {
        r.notes.push_back("no time away from home recorded this week");
    } else {
        for (const auto& e : outings.episodes) mean_minutes += e.minutes();
        mean_minutes /= static_cast<double>(outings.episodes.size());
    }
    r.mobility_mean_minutes = mean_minutes;
    r.mobility_message = options_.templates.render(
        std::string("active.mobility.") + std::string(to_string(mobility_polarity(mean_minutes))), "");

    std::string level = "unknown";
    if (auto risk = store_.last_before(key(user, attr::kMunicipalRisk), week_end)) {
        try {
            level = std::string(risk::display_name(risk::parse_level(label_of(risk->value))));
        } catch (const Error&) {
            level = label_of(risk->value);
        }
    } else {
        r.notes.push_back("municipality risk level not yet known");
    }
    r.risk_line = options_.templates.render("active.risk.line", level);
    return r;
}

void FeedbackGranter::recompute(Timestamp at) {
    for (const auto& user : users()) {
        std::array<WindowMetrics, 3> metrics{compute_window_metrics(user, Window::Last24h, at),
                                             compute_window_metrics(user, Window::Last4d, at),
                                             compute_window_metrics(user, Window::Last8d, at)};
        broker::ContextEntity entity{snapshot_entity_id(user), "FeedbackSnapshot", {}};
        Json published{{"type", "FeedbackSnapshot"}, {"user", user}, {"group", to_string(assign_group(user))},
                       {"t", format_timestamp(at)}};
        for (const auto& m : metrics) {
            entity.attributes[std::string(to_string(m.window))] = broker::AttributeValue{m.to_json(), at, {}};
            published[std::string(to_string(m.window))] = m.to_json();
        }
        broker_.upsert_entity(entity);
        std::function<void(const std::string&, const Json&)> listener;
        {
            std::lock_guard lock(mutex_);
            latest_[user] = metrics;
            ++recomputes_[user];
            listener = listener_;
        }
        if (listener) listener(user, published);
    }
}

void FeedbackGranter::publish_reports(Timestamp at) {
    for (const auto& user : users()) {
        auto report = compose_weekly_report(user, at);
        const Json j = report.to_json();
        broker_.upsert_entity(broker::ContextEntity{
            report_entity_id(user), "WeeklyReport", {{"report", broker::AttributeValue{j, at, {}}}}});
        Json published = j;
        published["type"] = "WeeklyReport";
        std::function<void(const std::string&, const Json&)> listener;
        {
            std::lock_guard lock(mutex_);
            reports_[user] = std::move(report);
            ++report_counts_[user];
            listener = listener_;
        }
        if (listener) listener(user, published);
    }
}

void FeedbackGranter::on_tick(Timestamp now) {
    std::optional<Timestamp> previous;
    bool baseline = false;
    {
        std::lock_guard lock(mutex_);
        previous = last_tick_;
        if (previous && now <= *previous) return;
        last_tick_ = now;
        baseline = options_.baseline_phase;
    }
    if (!previous || baseline) return;

    const auto cadence = options_.cadence.count();
    const auto since = previous->time_since_epoch().count();
    for (auto b = (since / cadence + 1) * cadence; b <= now.time_since_epoch().count(); b += cadence) {
        const Timestamp at{Seconds{b}};
        recompute(at);
        if (is_report_instant(at)) publish_reports(at);
    }
    // Report instants that do not fall on a cadence boundary.
    if ((21 * 3600) % cadence != 0) {
        for (Date d = date_of(*previous); start_of(d) <= now; d = add_days(d, 1)) {
            const auto instant = vitoria::at(d, 21);
            if (instant > *previous && instant <= now && is_report_instant(instant)) publish_reports(instant);
        }
    }
}

void FeedbackGranter::set_baseline_phase(bool baseline) {
    std::lock_guard lock(mutex_);
    options_.baseline_phase = baseline;
}

void FeedbackGranter::set_listener(std::function<void(const std::string&, const Json&)> listener) {
    std::lock_guard lock(mutex_);
    listener_ = std::move(listener);
}

std::optional<std::array<WindowMetrics, 3>> FeedbackGranter::latest_metrics(const std::string& user) const {
    std::lock_guard lock(mutex_);
    auto it = latest_.find(user);
    if (it == latest_.end()) return std::nullopt;
    return it->second;
}

std::optional<WeeklyReport> FeedbackGranter::latest_report(const std::string& user) const {
    std::lock_guard lock(mutex_);
    auto it = reports_.find(user);
    if (it == reports_.end()) return std::nullopt;
    return it->second;
}

std::uint64_t FeedbackGranter::recompute_count(const std::string& user) const {
    std::lock_guard lock(mutex_);
    auto it = recomputes_.find(user);
    return it == recomputes_.end() ? 0 : it->second;
}

std::uint64_t FeedbackGranter::report_count(const std::string& user) const {
    std::lock_guard lock(mutex_);
    auto it = report_counts_.find(user);
    return it == report_counts_.end() ? 0 : it->second;
}

}  // namespace vitoria::feedback
