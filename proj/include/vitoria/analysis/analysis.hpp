#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "vitoria/event.hpp"
#include "vitoria/risk/risk_feed.hpp"

namespace vitoria::analysis {

/// One value per date; dates without data are absent.
struct DailySeries {
    std::string metric;
    std::map<Date, double> values;
};

struct UserRecord {
    std::string user;
    Timestamp t{};
    double value{0};
};

/// Mean per (user, date), then the unweighted mean over users present that date.
DailySeries daily_mean_by_user(std::string metric, std::span<const UserRecord> records);

class AppCategoryMap {
public:
    AppCategoryMap() = default;
    explicit AppCategoryMap(std::map<std::string, std::string> categories) : categories_(std::move(categories)) {}

    /// CSV `package,category`; an optional header row is skipped.
    static AppCategoryMap parse(std::istream& in);
    static AppCategoryMap load(const std::filesystem::path& file);

    /// Unmapped packages pass through as their own category.
    std::string category(const std::string& package) const;
    std::size_t size() const { return categories_.size(); }

private:
    std::map<std::string, std::string> categories_;
};

struct UsageRecord {
    std::string user;
    std::string package;
    double minutes{0};
    Timestamp start{};
    Timestamp end{};
};

/// Mean daily minutes per user for each category. A user's days are the dates
/// on which any usage was recorded for them; users of `users` without a
/// category contribute 0 to its mean.
std::map<std::string, double> aggregate_app_usage(std::span<const UsageRecord> usage, const AppCategoryMap& categories,
                                                  const std::set<std::string>& users);

inline const Date kPeriodCut{std::chrono::year{2021}, std::chrono::March, std::chrono::day{23}};

/// before: dates < cut; after: dates >= cut.
std::pair<DailySeries, DailySeries> split_periods(const DailySeries& series, Date cut = kPeriodCut);
std::pair<std::vector<UsageRecord>, std::vector<UsageRecord>> split_usage(std::span<const UsageRecord> usage,
                                                                          Date cut = kPeriodCut);

struct WorkSplit {
    double work_minutes{0};
    double nonwork_minutes{0};
};

/// True for Monday..Friday within 08:00-12:00 or 14:00-18:00.
bool is_work_time(Timestamp t);

/// Work and non-work minutes of one record; a record straddling a boundary is
/// split in proportion to the time on each side.
WorkSplit work_split(const UsageRecord& record);
std::map<std::string, WorkSplit> work_split(std::span<const UsageRecord> usage);

struct PurposeRecord {
    std::string user;
    std::string package;
    std::string purpose;  // communication | leisure | research | work
};

/// Per app, the share of answers naming each purpose, in percent.
std::map<std::string, std::map<std::string, double>> purpose_percentages(std::span<const PurposeRecord> answers);

struct PandemicEvent {
    Date date;
    int sign{0};
    std::string description;
};

class EventTable {
public:
    EventTable() = default;
    /// Throws InvalidInput unless dates are unique and ascending and signs are +-1.
    explicit EventTable(std::vector<PandemicEvent> events);

    /// CSV `date,sign,description`; sign is "+", "-", "+1", "-1" or "1". ParseError with line.
    static EventTable parse(std::istream& in);
    static EventTable load(const std::filesystem::path& file);

    const std::vector<PandemicEvent>& events() const { return events_; }

private:
    std::vector<PandemicEvent> events_;
};

/// Sum of signs of events dated strictly before `date` (or on it, when inclusive).
int positiveness_index(const EventTable& events, Date date, bool inclusive = false);
DailySeries positiveness_series(const EventTable& events, Date from, Date to, bool inclusive = false);

/// Standard Pearson r with two-pass centring; NaN when either side has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

struct LaggedR {
    double r{0};
    std::size_t n{0};
};

/// Pairs behavior(d) with covid(d - lag), dropping dates missing on either side.
/// Throws InsufficientOverlap with fewer than 3 pairs.
LaggedR lagged_pearson_n(const DailySeries& behavior, const DailySeries& covid, int lag_days);
double lagged_pearson(const DailySeries& behavior, const DailySeries& covid, int lag_days);

struct Feature {
    DailySeries series;
    bool covid_side{false};
};

struct CorrelationMatrix {
    int lag{0};
    std::vector<std::string> names;
    std::vector<std::vector<std::optional<double>>> r;  // empty cell when overlap is insufficient
    std::vector<std::vector<std::size_t>> n_effective;

    std::optional<double> at(const std::string& a, const std::string& b) const;
    void write_csv(std::ostream& out) const;
    void write_n_csv(std::ostream& out) const;
};

/// Lag shifts only covid-side features against behavior-side ones.
CorrelationMatrix build_matrix(const std::vector<Feature>& features, int lag_days);

struct CovidColumnMap {
    std::string date{"date"};
    std::string incidence{"incidence"};
    std::string rt{"rt"};
    std::string active_cases{"active_cases"};
    std::string new_confirmed{"new_confirmed"};
    std::string total_confirmed{"total_confirmed"};
    std::string new_deaths{"new_deaths"};

    static CovidColumnMap from_json(const Json& j);
};

/// Lines starting with '#' are comments. Missing columns or empty cells leave
/// the field absent. ParseError with line on bad numbers or a duplicate date.
std::map<Date, risk::EpiSnapshot> load_covid_dataset(std::istream& in, const CovidColumnMap& columns = {});
std::map<Date, risk::EpiSnapshot> load_covid_dataset(const std::filesystem::path& file,
                                                     const CovidColumnMap& columns = {});

/// Representative head count of a transport people bucket.
double bucket_representative(const std::string& transport, const std::string& bucket);

/// Everything the analyses need from a run's event log.
struct RunData {
    std::vector<UserRecord> valence;
    std::vector<UserRecord> arousal;
    std::vector<UserRecord> sleep_hours;
    std::vector<UserRecord> sleep_quality;
    std::vector<UserRecord> contacts;
    std::vector<UsageRecord> usage;
    std::vector<PurposeRecord> purposes;
    std::set<std::string> users;  // users with at least one device event

    /// Questionnaire answers are dated by the day their prompt was raised.
    void add(const SensorEvent& ev);
    /// Collapses transport answers to the latest per trip and folds them into contacts.
    void finalize();

    static RunData load_event_log(const std::filesystem::path& file);

private:
    struct TripAnswer {
        std::string user;
        Timestamp raised{};
        Timestamp answered{};
        double people{0};
    };
    std::map<std::string, TripAnswer> trips_;
    bool finalized_{false};
};

/// The twelve correlation features, behavior side first.
std::vector<Feature> correlation_features(const RunData& run, const std::map<Date, risk::EpiSnapshot>& covid,
                                          const EventTable& events);

}  // namespace vitoria::analysis
