#pragma once

#include <compare>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "vitoria/broker/context_broker.hpp"

namespace vitoria::history {

struct SeriesKey {
    std::string entity_id;
    std::string attribute;

    auto operator<=>(const SeriesKey&) const = default;
};

struct SeriesPoint {
    Timestamp observed_at{};
    Json value;

    bool operator==(const SeriesPoint&) const = default;
};

/// Half-open [from, to).
struct TimeRange {
    Timestamp from{};
    Timestamp to{};

    bool contains(Timestamp t) const { return from <= t && t < to; }
};

enum class AggregateMethod { Min, Max, Sum, Mean, Count, Occurrences };
enum class Resolution { Hour, Day, Week };

AggregateMethod parse_method(std::string_view name);
Resolution parse_resolution(std::string_view name);
std::string_view to_string(AggregateMethod m);
std::string_view to_string(Resolution r);

struct AggregateQuery {
    SeriesKey key;
    TimeRange range;
    AggregateMethod method{AggregateMethod::Mean};
    Resolution resolution{Resolution::Day};
};

struct AggregateBucket {
    Timestamp bucket_start{};
    double value{0.0};
    std::map<std::string, std::uint64_t> occurrences;  // Occurrences method only

    bool operator==(const AggregateBucket&) const = default;
};

struct RawPage {
    std::vector<SeriesPoint> points;
    std::optional<std::string> next_token;
};

/// Sleep-quality label -> 1 (very_bad) .. 5 (very_good); 0 for other labels.
int sleep_quality_ordinal(std::string_view label);
std::string_view sleep_quality_label(int ordinal);

/// Start of the UTC bucket containing t; weeks start Monday 00:00.
Timestamp bucket_start(Timestamp t, Resolution r);

class HistoryStore {
public:
    /// With a directory, series are loaded from and appended to
    /// <dir>/<entity>/<attribute>.jsonl as {"t": iso8601, "v": value} lines.
    explicit HistoryStore(std::optional<std::filesystem::path> dir = std::nullopt);
    ~HistoryStore();

    HistoryStore(const HistoryStore&) = delete;
    HistoryStore& operator=(const HistoryStore&) = delete;

    /// One point per attribute in the notification; duplicates (same series and
    /// timestamp) and points older than the series head are ignored.
    std::size_t on_notification(const broker::Notification& n);
    bool append(const SeriesKey& key, const SeriesPoint& point);

    /// The continuation token is the opaque offset of the next point.
    RawPage query_raw(const SeriesKey& key, TimeRange range, std::size_t limit, std::string_view token = {}) const;

    std::vector<SeriesPoint> points(const SeriesKey& key, TimeRange range) const;
    std::optional<SeriesPoint> last_before(const SeriesKey& key, Timestamp t) const;
    std::vector<AggregateBucket> query_aggregate(const AggregateQuery& q) const;

    bool has_series(const SeriesKey& key) const;
    std::vector<SeriesKey> series() const;
    std::size_t point_count() const;
    void flush();

    /// Sink that feeds broker notifications into this store.
    std::shared_ptr<broker::NotificationSink> sink();

private:
    using Series = std::vector<SeriesPoint>;

    const Series& series_or_throw(const SeriesKey& key) const;
    std::ofstream& writer_for(const SeriesKey& key);
    void load();

    std::optional<std::filesystem::path> dir_;
    mutable std::shared_mutex mutex_;
    std::map<SeriesKey, Series> series_;
    std::map<SeriesKey, std::ofstream> writers_;
};

}  // namespace vitoria::history
