#include "vitoria/history/history_store.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <iostream>
#include <mutex>

#include "vitoria/error.hpp"

namespace vitoria::history {
namespace fs = std::filesystem;
namespace {

constexpr std::string_view kQualityLabels[] = {"very_bad", "bad", "neutral", "good", "very_good"};

std::string encode_component(std::string_view s) {
    std::string out;
    for (unsigned char c : s) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.') {
            out.push_back(static_cast<char>(c));
        } else {
            char buf[4];
            std::snprintf(buf, sizeof buf, "%%%02X", c);
            out += buf;
        }
    }
    return out;
}

std::string decode_component(std::string_view s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '%' && i + 2 < s.size()) {
            out.push_back(static_cast<char>(std::stoi(std::string(s.substr(i + 1, 2)), nullptr, 16)));
            i += 2;
        } else {
            out.push_back(s[i]);
        }
    }
    return out;
}

std::string label_of(const Json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

/// Numeric view of a point: numbers as-is, sleep-quality labels as ordinals.
std::optional<double> numeric(const Json& v, bool allow_ordinal) {
    if (v.is_number()) return v.get<double>();
    if (allow_ordinal && v.is_string()) {
        if (int o = sleep_quality_ordinal(v.get<std::string>()); o > 0) return o;
    }
    return std::nullopt;
}

auto lower(const std::vector<SeriesPoint>& s, Timestamp t) {
    return std::lower_bound(s.begin(), s.end(), t,
                            [](const SeriesPoint& p, Timestamp v) { return p.observed_at < v; });
}

class StoreSink final : public broker::NotificationSink {
public:
    explicit StoreSink(HistoryStore& store) : store_(store) {}
    bool deliver(const broker::Notification& n) override {
        store_.on_notification(n);
        return true;
    }
    std::string describe() const override { return "history-store"; }

private:
    HistoryStore& store_;
};

}  // namespace

int sleep_quality_ordinal(std::string_view label) {
    for (int i = 0; i < 5; ++i) {
        if (kQualityLabels[i] == label) return i + 1;
    }
    return 0;
}

std::string_view sleep_quality_label(int ordinal) {
    if (ordinal < 1 || ordinal > 5) throw Error(ErrorCode::InvalidInput, "sleep quality ordinal out of range");
    return kQualityLabels[ordinal - 1];
}

AggregateMethod parse_method(std::string_view name) {
    if (name == "min") return AggregateMethod::Min;
    if (name == "max") return AggregateMethod::Max;
    if (name == "sum") return AggregateMethod::Sum;
    if (name == "mean") return AggregateMethod::Mean;
    if (name == "count") return AggregateMethod::Count;
    if (name == "occur" || name == "occurrences") return AggregateMethod::Occurrences;
    throw Error(ErrorCode::Malformed, "unknown aggregation method '" + std::string(name) + "'");
}

Resolution parse_resolution(std::string_view name) {
    if (name == "hour") return Resolution::Hour;
    if (name == "day") return Resolution::Day;
    if (name == "week") return Resolution::Week;
    throw Error(ErrorCode::Malformed, "unknown aggregation period '" + std::string(name) + "'");
}

std::string_view to_string(AggregateMethod m) {
    switch (m) {
        case AggregateMethod::Min: return "min";
        case AggregateMethod::Max: return "max";
        case AggregateMethod::Sum: return "sum";
        case AggregateMethod::Mean: return "mean";
        case AggregateMethod::Count: return "count";
        case AggregateMethod::Occurrences: return "occur";
    }
    return "?";
}

std::string_view to_string(Resolution r) {
    switch (r) {
        case Resolution::Hour: return "hour";
        case Resolution::Day: return "day";
        case Resolution::Week: return "week";
    }
    return "?";
}

Timestamp bucket_start(Timestamp t, Resolution r) {
    switch (r) {
        case Resolution::Hour: return std::chrono::floor<std::chrono::hours>(t);
        case Resolution::Day: return std::chrono::floor<std::chrono::days>(t);
        case Resolution::Week: {
            const Date d = date_of(t);
            return start_of(add_days(d, -weekday_index(d)));
        }
    }
    return t;
}

HistoryStore::HistoryStore(std::optional<fs::path> dir) : dir_(std::move(dir)) {
    if (dir_) {
        fs::create_directories(*dir_);
        load();
    }
}

HistoryStore::~HistoryStore() { flush(); }

void HistoryStore::load() {
    for (const auto& entity_dir : fs::directory_iterator(*dir_)) {
        if (!entity_dir.is_directory()) continue;
        const auto entity = decode_component(entity_dir.path().filename().string());
        for (const auto& file : fs::directory_iterator(entity_dir.path())) {
            if (file.path().extension() != ".jsonl") continue;
            SeriesKey key{entity, decode_component(file.path().stem().string())};
            auto& s = series_[key];
            std::ifstream in(file.path());
            std::string line;
            std::size_t lineno = 0;
            while (std::getline(in, line)) {
                ++lineno;
                if (line.empty()) continue;
                try {
                    const auto j = Json::parse(line);
                    SeriesPoint p{parse_timestamp(j.at("t").get<std::string>()), j.at("v")};
                    if (s.empty() || s.back().observed_at < p.observed_at) s.push_back(std::move(p));
                } catch (const std::exception& e) {
                    throw ParseError(lineno, file.path().string() + ": " + e.what());
                }
            }
        }
    }
}

std::ofstream& HistoryStore::writer_for(const SeriesKey& key) {
    auto it = writers_.find(key);
    if (it != writers_.end()) return it->second;
    const auto dir = *dir_ / encode_component(key.entity_id);
    fs::create_directories(dir);
    std::ofstream out(dir / (encode_component(key.attribute) + ".jsonl"), std::ios::app);
    if (!out) throw Error(ErrorCode::ConfigError, "cannot open series file under " + dir.string());
    return writers_.emplace(key, std::move(out)).first->second;
}

bool HistoryStore::append(const SeriesKey& key, const SeriesPoint& point) {
    if (key.entity_id.empty() || key.attribute.empty()) {
        throw Error(ErrorCode::Malformed, "series key needs entity and attribute");
    }
    std::unique_lock lock(mutex_);
    auto& s = series_[key];
    if (!s.empty() && point.observed_at <= s.back().observed_at) return false;
    s.push_back(point);
    if (dir_) {
        writer_for(key) << Json{{"t", format_timestamp(point.observed_at)}, {"v", point.value}}.dump() << '\n';
    }
    return true;
}

std::size_t HistoryStore::on_notification(const broker::Notification& n) {
    if (n.data.id.empty()) {
        std::cerr << "history: dropping notification " << n.sub_id << " without entity id\n";
        return 0;
    }
    std::size_t appended = 0;
    for (const auto& [name, attr] : n.data.attributes) {
        try {
            if (append({n.data.id, name}, {attr.observed_at, attr.value})) ++appended;
        } catch (const Error& e) {
            std::cerr << "history: dropping " << n.data.id << "." << name << ": " << e.what() << '\n';
        }
    }
    return appended;
}

const HistoryStore::Series& HistoryStore::series_or_throw(const SeriesKey& key) const {
    auto it = series_.find(key);
    if (it == series_.end()) {
        throw Error(ErrorCode::UnknownSeries, key.entity_id + "/" + key.attribute);
    }
    return it->second;
}

RawPage HistoryStore::query_raw(const SeriesKey& key, TimeRange range, std::size_t limit,
                                std::string_view token) const {
    if (limit < 1) throw Error(ErrorCode::InvalidInput, "limit must be at least 1");
    std::size_t offset = 0;
    if (!token.empty()) {
        try {
            offset = std::stoul(std::string(token));
        } catch (const std::exception&) {
            throw Error(ErrorCode::Malformed, "bad continuation token");
        }
    }
    std::shared_lock lock(mutex_);
    const auto& s = series_or_throw(key);
    RawPage page;
    if (!(range.from < range.to)) return page;
    auto first = lower(s, range.from);
    auto last = lower(s, range.to);
    const auto available = static_cast<std::size_t>(last - first);
    if (offset >= available) return page;
    const auto take = std::min(limit, available - offset);
    page.points.assign(first + static_cast<std::ptrdiff_t>(offset),
                       first + static_cast<std::ptrdiff_t>(offset + take));
    if (offset + take < available) page.next_token = std::to_string(offset + take);
    return page;
}

std::vector<SeriesPoint> HistoryStore::points(const SeriesKey& key, TimeRange range) const {
    std::shared_lock lock(mutex_);
    auto it = series_.find(key);
    if (it == series_.end() || !(range.from < range.to)) return {};
    return {lower(it->second, range.from), lower(it->second, range.to)};
}

std::optional<SeriesPoint> HistoryStore::last_before(const SeriesKey& key, Timestamp t) const {
    std::shared_lock lock(mutex_);
    auto it = series_.find(key);
    if (it == series_.end()) return std::nullopt;
    auto pos = lower(it->second, t);
    if (pos == it->second.begin()) return std::nullopt;
    return *std::prev(pos);
}

std::vector<AggregateBucket> HistoryStore::query_aggregate(const AggregateQuery& q) const {
    if (!(q.range.from < q.range.to)) throw Error(ErrorCode::InvalidInput, "aggregate range needs from < to");
    std::shared_lock lock(mutex_);
    const auto& s = series_or_throw(q.key);
    auto first = lower(s, q.range.from);
    auto last = lower(s, q.range.to);

    const bool numeric_method = q.method == AggregateMethod::Min || q.method == AggregateMethod::Max ||
                                q.method == AggregateMethod::Sum || q.method == AggregateMethod::Mean;
    const bool allow_ordinal = q.method == AggregateMethod::Mean;

    std::vector<AggregateBucket> out;
    std::size_t count = 0;
    double sum = 0;
    auto close = [&] {
        if (out.empty()) return;
        auto& b = out.back();
        if (q.method == AggregateMethod::Sum) b.value = sum;
        if (q.method == AggregateMethod::Mean) b.value = sum / static_cast<double>(count);
        if (q.method == AggregateMethod::Count) b.value = static_cast<double>(count);
    };
    for (auto p = first; p != last; ++p) {
        const auto start = bucket_start(p->observed_at, q.resolution);
        std::optional<double> v;
        if (numeric_method) {
            v = numeric(p->value, allow_ordinal);
            if (!v) {
                throw Error(ErrorCode::NonNumeric, q.key.entity_id + "/" + q.key.attribute + " holds " +
                                                       p->value.dump());
            }
        }
        if (out.empty() || out.back().bucket_start != start) {
            close();
            out.push_back(AggregateBucket{start, v.value_or(0.0), {}});
            count = 0;
            sum = 0;
        }
        auto& b = out.back();
        ++count;
        if (v) {
            sum += *v;
            if (q.method == AggregateMethod::Min) b.value = std::min(b.value, *v);
            if (q.method == AggregateMethod::Max) b.value = std::max(b.value, *v);
        }
        if (q.method == AggregateMethod::Occurrences) ++b.occurrences[label_of(p->value)];
    }
    close();
    return out;
}

bool HistoryStore::has_series(const SeriesKey& key) const {
    std::shared_lock lock(mutex_);
    return series_.count(key) > 0;
}

std::vector<SeriesKey> HistoryStore::series() const {
    std::shared_lock lock(mutex_);
    std::vector<SeriesKey> keys;
    for (const auto& [k, v] : series_) keys.push_back(k);
    return keys;
}

std::size_t HistoryStore::point_count() const {
    std::shared_lock lock(mutex_);
    std::size_t n = 0;
    for (const auto& [k, v] : series_) n += v.size();
    return n;
}

void HistoryStore::flush() {
    std::unique_lock lock(mutex_);
    for (auto& [k, w] : writers_) w.flush();
}

std::shared_ptr<broker::NotificationSink> HistoryStore::sink() { return std::make_shared<StoreSink>(*this); }

}  // namespace vitoria::history
