#include "vitoria/analysis/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "vitoria/csv.hpp"
#include "vitoria/error.hpp"

namespace vitoria::analysis {
namespace {

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

std::optional<double> parse_number(const std::string& cell, std::size_t line) {
    const auto text = trim(cell);
    if (text.empty()) return std::nullopt;
    double v = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc{} || ptr != end || !std::isfinite(v)) throw ParseError(line, "not a number: '" + text + "'");
    return v;
}

bool looks_like_date(const std::string& s) {
    try {
        parse_date(trim(s));
        return true;
    } catch (const Error&) {
        return false;
    }
}

}  // namespace

DailySeries daily_mean_by_user(std::string metric, std::span<const UserRecord> records) {
    std::map<Date, std::map<std::string, std::pair<double, std::size_t>>> per_day;
    for (const auto& r : records) {
        auto& [sum, n] = per_day[date_of(r.t)][r.user];
        sum += r.value;
        ++n;
    }
    DailySeries out{std::move(metric), {}};
    for (const auto& [date, users] : per_day) {
        double total = 0;
        for (const auto& [user, acc] : users) total += acc.first / static_cast<double>(acc.second);
        out.values[date] = total / static_cast<double>(users.size());
    }
    return out;
}

AppCategoryMap AppCategoryMap::parse(std::istream& in) {
    std::vector<std::size_t> lines;
    const auto rows = read_csv(in, &lines);
    std::map<std::string, std::string> categories;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (!row.empty() && trim(row[0]).starts_with('#')) continue;
        if (row.size() < 2) throw ParseError(lines[i], "expected package,category");
        const auto package = trim(row[0]);
        if (i == 0 && package == "package") continue;
        categories[package] = trim(row[1]);
    }
    return AppCategoryMap(std::move(categories));
}

AppCategoryMap AppCategoryMap::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorCode::NotFound, "category map " + file.string());
    return parse(in);
}

std::string AppCategoryMap::category(const std::string& package) const {
    auto it = categories_.find(package);
    return it == categories_.end() ? package : it->second;
}

std::map<std::string, double> aggregate_app_usage(std::span<const UsageRecord> usage, const AppCategoryMap& categories,
                                                  const std::set<std::string>& users) {
    std::map<std::string, std::set<Date>> days;
    std::map<std::string, std::map<std::string, double>> minutes;  // category -> user -> total
    for (const auto& r : usage) {
        if (!users.count(r.user)) continue;
        days[r.user].insert(date_of(r.start));
        minutes[categories.category(r.package)][r.user] += r.minutes;
    }
    std::map<std::string, double> out;
    if (users.empty()) return out;
    for (const auto& [category, per_user] : minutes) {
        double total = 0;
        for (const auto& [user, m] : per_user) total += m / static_cast<double>(days[user].size());
        out[category] = total / static_cast<double>(users.size());
    }
    return out;
}

std::pair<DailySeries, DailySeries> split_periods(const DailySeries& series, Date cut) {
    DailySeries before{series.metric, {}};
    DailySeries after{series.metric, {}};
    for (const auto& [date, v] : series.values) (date < cut ? before : after).values.emplace(date, v);
    return {std::move(before), std::move(after)};
}

std::pair<std::vector<UsageRecord>, std::vector<UsageRecord>> split_usage(std::span<const UsageRecord> usage, Date cut) {
    std::pair<std::vector<UsageRecord>, std::vector<UsageRecord>> out;
    for (const auto& r : usage) (date_of(r.start) < cut ? out.first : out.second).push_back(r);
    return out;
}

bool is_work_time(Timestamp t) {
    if (weekday_index(date_of(t)) >= 5) return false;
    const auto s = seconds_of_day(t);
    return (s >= 8 * 3600 && s < 12 * 3600) || (s >= 14 * 3600 && s < 18 * 3600);
}

WorkSplit work_split(const UsageRecord& record) {
    if (record.end <= record.start) {
        return is_work_time(record.start) ? WorkSplit{record.minutes, 0} : WorkSplit{0, record.minutes};
    }
    // Walk the interval through its boundary crossings.
    long long work = 0;
    long long total = 0;
    for (Timestamp t = record.start; t < record.end;) {
        const Timestamp midnight = start_of(date_of(t));
        Timestamp next = record.end;
        for (int h : {8, 12, 14, 18, 24}) {
            const Timestamp b = midnight + std::chrono::hours{h};
            if (b > t) {
                next = std::min(next, b);
                break;
            }
        }
        const auto len = (next - t).count();
        if (is_work_time(t)) work += len;
        total += len;
        t = next;
    }
    const double work_minutes = record.minutes * static_cast<double>(work) / static_cast<double>(total);
    return WorkSplit{work_minutes, record.minutes - work_minutes};
}

std::map<std::string, WorkSplit> work_split(std::span<const UsageRecord> usage) {
    std::map<std::string, WorkSplit> out;
    for (const auto& r : usage) {
        const auto s = work_split(r);
        auto& acc = out[r.package];
        acc.work_minutes += s.work_minutes;
        acc.nonwork_minutes += s.nonwork_minutes;
    }
    return out;
}

std::map<std::string, std::map<std::string, double>> purpose_percentages(std::span<const PurposeRecord> answers) {
    std::map<std::string, std::map<std::string, std::size_t>> counts;
    std::map<std::string, std::size_t> totals;
    for (const auto& a : answers) {
        ++counts[a.package][a.purpose];
        ++totals[a.package];
    }
    std::map<std::string, std::map<std::string, double>> out;
    for (const auto& [app, by_purpose] : counts) {
        for (const auto& [purpose, n] : by_purpose) {
            out[app][purpose] = 100.0 * static_cast<double>(n) / static_cast<double>(totals[app]);
        }
    }
    return out;
}

EventTable::EventTable(std::vector<PandemicEvent> events) : events_(std::move(events)) {
    for (std::size_t i = 0; i < events_.size(); ++i) {
        if (events_[i].sign != 1 && events_[i].sign != -1) throw Error(ErrorCode::InvalidInput, "event sign must be +1 or -1");
        if (i > 0 && !(events_[i - 1].date < events_[i].date)) {
            throw Error(ErrorCode::InvalidInput, "event dates must be unique and ascending at " + format_date(events_[i].date));
        }
    }
}

EventTable EventTable::parse(std::istream& in) {
    std::vector<std::size_t> lines;
    const auto rows = read_csv(in, &lines);
    std::vector<PandemicEvent> events;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (row.empty() || trim(row[0]).starts_with('#')) continue;
        if (i == 0 && !looks_like_date(row[0])) continue;
        if (row.size() < 2) throw ParseError(lines[i], "expected date,sign,description");
        PandemicEvent e;
        try {
            e.date = parse_date(trim(row[0]));
        } catch (const Error& err) {
            throw ParseError(lines[i], err.what());
        }
        const auto sign = trim(row[1]);
        if (sign == "+" || sign == "+1" || sign == "1") {
            e.sign = 1;
        } else if (sign == "-" || sign == "-1") {
            e.sign = -1;
        } else {
            throw ParseError(lines[i], "sign must be + or -, got '" + sign + "'");
        }
        e.description = row.size() > 2 ? trim(row[2]) : "";
        if (!events.empty() && !(events.back().date < e.date)) {
            throw ParseError(lines[i], "dates must be unique and ascending");
        }
        events.push_back(std::move(e));
    }
    return EventTable(std::move(events));
}

EventTable EventTable::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorCode::NotFound, "events file " + file.string());
    return parse(in);
}

int positiveness_index(const EventTable& events, Date date, bool inclusive) {
    int sum = 0;
    for (const auto& e : events.events()) {
        if (e.date > date || (!inclusive && e.date == date)) break;
        sum += e.sign;
    }
    return sum;
}

DailySeries positiveness_series(const EventTable& events, Date from, Date to, bool inclusive) {
    DailySeries s{"positiveness", {}};
    for (Date d = from; d <= to; d = add_days(d, 1)) s.values[d] = positiveness_index(events, d, inclusive);
    return s;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw Error(ErrorCode::InvalidInput, "pearson needs equal-length samples");
    const auto n = static_cast<double>(x.size());
    if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0 || syy == 0) return std::numeric_limits<double>::quiet_NaN();
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

LaggedR lagged_pearson_n(const DailySeries& behavior, const DailySeries& covid, int lag_days) {
    std::vector<double> x, y;
    for (const auto& [date, v] : behavior.values) {
        auto it = covid.values.find(add_days(date, -lag_days));
        if (it == covid.values.end()) continue;
        x.push_back(v);
        y.push_back(it->second);
    }
    if (x.size() < 3) {
        throw Error(ErrorCode::InsufficientOverlap, behavior.metric + " vs " + covid.metric + " at lag " +
                                                        std::to_string(lag_days) + ": " + std::to_string(x.size()) +
                                                        " overlapping dates");
    }
    return LaggedR{pearson(x, y), x.size()};
}

double lagged_pearson(const DailySeries& behavior, const DailySeries& covid, int lag_days) {
    return lagged_pearson_n(behavior, covid, lag_days).r;
}

std::optional<double> CorrelationMatrix::at(const std::string& a, const std::string& b) const {
    const auto ia = std::find(names.begin(), names.end(), a);
    const auto ib = std::find(names.begin(), names.end(), b);
    if (ia == names.end() || ib == names.end()) throw Error(ErrorCode::NotFound, "feature " + a + " or " + b);
    return r[static_cast<std::size_t>(ia - names.begin())][static_cast<std::size_t>(ib - names.begin())];
}

void CorrelationMatrix::write_csv(std::ostream& out) const {
    out << "feature";
    for (const auto& n : names) out << ',' << n;
    out << '\n';
    for (std::size_t i = 0; i < names.size(); ++i) {
        out << names[i];
        for (std::size_t j = 0; j < names.size(); ++j) {
            out << ',';
            if (r[i][j] && std::isfinite(*r[i][j])) out << *r[i][j];
        }
        out << '\n';
    }
}

void CorrelationMatrix::write_n_csv(std::ostream& out) const {
    out << "feature";
    for (const auto& n : names) out << ',' << n;
    out << '\n';
    for (std::size_t i = 0; i < names.size(); ++i) {
        out << names[i];
        for (std::size_t j = 0; j < names.size(); ++j) out << ',' << n_effective[i][j];
        out << '\n';
    }
}

CorrelationMatrix build_matrix(const std::vector<Feature>& features, int lag_days) {
    CorrelationMatrix m;
    m.lag = lag_days;
    const auto k = features.size();
    for (const auto& f : features) m.names.push_back(f.series.metric);
    m.r.assign(k, std::vector<std::optional<double>>(k));
    m.n_effective.assign(k, std::vector<std::size_t>(k, 0));
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i; j < k; ++j) {
            const auto& a = features[i];
            const auto& b = features[j];
            const Feature* behavior = &a;
            const Feature* covid = &b;
            int lag = 0;
            if (a.covid_side != b.covid_side) {
                if (a.covid_side) std::swap(behavior, covid);
                lag = lag_days;
            }
            std::optional<double> r;
            std::size_t n = 0;
            try {
                const auto res = lagged_pearson_n(behavior->series, covid->series, lag);
                n = res.n;
                if (std::isfinite(res.r)) r = res.r;
            } catch (const Error& e) {
                if (e.code() != ErrorCode::InsufficientOverlap) throw;
            }
            if (i == j && n > 0) r = 1.0;
            m.r[i][j] = m.r[j][i] = r;
            m.n_effective[i][j] = m.n_effective[j][i] = n;
        }
    }
    return m;
}

CovidColumnMap CovidColumnMap::from_json(const Json& j) {
    CovidColumnMap c;
    c.date = j.value("date", c.date);
    c.incidence = j.value("incidence", c.incidence);
    c.rt = j.value("rt", c.rt);
    c.active_cases = j.value("active_cases", c.active_cases);
    c.new_confirmed = j.value("new_confirmed", c.new_confirmed);
    c.total_confirmed = j.value("total_confirmed", c.total_confirmed);
    c.new_deaths = j.value("new_deaths", c.new_deaths);
    return c;
}

std::map<Date, risk::EpiSnapshot> load_covid_dataset(std::istream& in, const CovidColumnMap& columns) {
    std::map<Date, risk::EpiSnapshot> out;
    std::string line;
    std::size_t lineno = 0;
    std::map<std::string, std::size_t> header;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = trim(line);
        if (t.empty() || t.starts_with('#')) continue;
        const auto row = split_csv_line(t);
        if (header.empty()) {
            for (std::size_t i = 0; i < row.size(); ++i) header[trim(row[i])] = i;
            if (!header.count(columns.date)) throw ParseError(lineno, "missing date column '" + columns.date + "'");
            continue;
        }
        auto cell = [&](const std::string& name) -> std::optional<double> {
            auto it = header.find(name);
            if (it == header.end() || it->second >= row.size()) return std::nullopt;
            return parse_number(row[it->second], lineno);
        };
        risk::EpiSnapshot s;
        try {
            s.date = parse_date(trim(row.at(header[columns.date])));
        } catch (const std::exception& e) {
            throw ParseError(lineno, std::string("bad date: ") + e.what());
        }
        s.incidence = cell(columns.incidence);
        s.rt = cell(columns.rt);
        s.active_cases = cell(columns.active_cases);
        s.new_confirmed = cell(columns.new_confirmed);
        s.total_confirmed = cell(columns.total_confirmed);
        s.new_deaths = cell(columns.new_deaths);
        if (!out.emplace(s.date, s).second) throw ParseError(lineno, "duplicate date " + format_date(s.date));
    }
    return out;
}

std::map<Date, risk::EpiSnapshot> load_covid_dataset(const std::filesystem::path& file, const CovidColumnMap& columns) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorCode::NotFound, "covid dataset " + file.string());
    return load_covid_dataset(in, columns);
}

double bucket_representative(const std::string& transport, const std::string& bucket) {
    static const std::map<std::string, double> car{{"0", 0}, {"1", 1}, {"2", 2}, {">2", 3}};
    static const std::map<std::string, double> bus{{"<10", 5}, {"10-20", 15}, {"20-30", 25}, {">30", 35}};
    static const std::map<std::string, double> boat{{"<10", 5}, {"10-30", 20}, {"30-50", 40}, {">50", 55}};
    const std::map<std::string, double>* table = &car;
    if (transport == "bus" || transport == "subway_train_tram") table = &bus;
    if (transport == "boat") table = &boat;
    auto it = table->find(bucket);
    if (it == table->end()) throw Error(ErrorCode::InvalidInput, "bucket '" + bucket + "' not offered for " + transport);
    return it->second;
}

void RunData::add(const SensorEvent& ev) {
    if (ev.kind == "prompt" || ev.kind == "reminder" || ev.kind == "prompt_expired") return;
    users.insert(ev.user);
    const auto& p = ev.payload;
    if (ev.kind == "app_usage") {
        usage.push_back({ev.user, p.at("package").get<std::string>(), p.at("foreground_minutes").get<double>(),
                         parse_timestamp(p.at("window_start").get<std::string>()),
                         parse_timestamp(p.at("window_end").get<std::string>())});
        return;
    }
    if (ev.kind != "answer") return;
    const Timestamp day = p.contains("raised_at") ? parse_timestamp(p["raised_at"].get<std::string>()) : ev.t;
    const auto q = p.value("questionnaire", "");
    if (q == "sam_emotion") {
        valence.push_back({ev.user, day, p.at("valence").get<double>()});
        arousal.push_back({ev.user, day, p.at("arousal").get<double>()});
    } else if (q == "sleep_report") {
        sleep_hours.push_back({ev.user, day, p.at("hours").get<double>()});
        static const std::map<std::string, double> ordinal{
            {"very_bad", 1}, {"bad", 2}, {"neutral", 3}, {"good", 4}, {"very_good", 5}};
        sleep_quality.push_back({ev.user, day, ordinal.at(p.at("quality").get<std::string>())});
    } else if (q == "proximity") {
        contacts.push_back({ev.user, day, p.at("people_within_2m").get<double>()});
    } else if (q == "app_purpose") {
        for (const auto& [pkg, purpose] : p.at("purposes").items()) {
            purposes.push_back({ev.user, pkg, purpose.get<std::string>()});
        }
    } else if (q == "transport") {
        const auto trip = ev.user + "/" + p.value("trip_id", "");
        const TripAnswer a{ev.user, day, ev.t,
                           bucket_representative(p.at("transport").get<std::string>(), p.at("people").get<std::string>())};
        auto it = trips_.find(trip);
        if (it == trips_.end() || it->second.answered <= a.answered) trips_[trip] = a;
    }
}

void RunData::finalize() {
    if (finalized_) return;
    finalized_ = true;
    for (const auto& [trip, a] : trips_) contacts.push_back({a.user, a.raised, a.people});
}

RunData RunData::load_event_log(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorCode::NotFound, "event log " + file.string());
    RunData run;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            run.add(SensorEvent::from_json(Json::parse(line)));
        } catch (const Json::exception& e) {
            throw ParseError(lineno, e.what());
        }
    }
    run.finalize();
    return run;
}

std::vector<Feature> correlation_features(const RunData& run, const std::map<Date, risk::EpiSnapshot>& covid,
                                          const EventTable& events) {
    std::vector<Feature> f;
    f.push_back({daily_mean_by_user("valence", run.valence), false});
    f.push_back({daily_mean_by_user("arousal", run.arousal), false});
    f.push_back({daily_mean_by_user("sleep_hours", run.sleep_hours), false});
    f.push_back({daily_mean_by_user("sleep_quality", run.sleep_quality), false});
    f.push_back({daily_mean_by_user("contacts", run.contacts), false});

    std::set<Date> behavior_dates;
    for (std::size_t i = 0; i < f.size(); ++i) {
        for (const auto& [d, v] : f[i].series.values) behavior_dates.insert(d);
    }
    DailySeries weekday{"weekday", {}};
    for (const auto& d : behavior_dates) weekday.values[d] = weekday_index(d);
    f.push_back({std::move(weekday), false});

    auto epi = [&](const char* name, auto field) {
        DailySeries s{name, {}};
        for (const auto& [d, snap] : covid) {
            if (auto v = field(snap)) s.values[d] = *v;
        }
        f.push_back({std::move(s), true});
    };
    epi("active_cases", [](const risk::EpiSnapshot& s) { return s.active_cases; });
    epi("new_confirmed", [](const risk::EpiSnapshot& s) { return s.new_confirmed; });
    epi("total_confirmed", [](const risk::EpiSnapshot& s) { return s.total_confirmed; });
    epi("new_deaths", [](const risk::EpiSnapshot& s) { return s.new_deaths; });
    epi("matrix_zone", [](const risk::EpiSnapshot& s) -> std::optional<double> {
        if (auto z = s.zone()) return static_cast<double>(static_cast<int>(*z));
        return std::nullopt;
    });

    std::optional<Date> from, to;
    auto widen = [&](Date d) {
        if (!from || d < *from) from = d;
        if (!to || d > *to) to = d;
    };
    for (const auto& d : behavior_dates) widen(d);
    for (const auto& [d, s] : covid) widen(d);
    DailySeries pos{"positiveness", {}};
    if (from) pos = positiveness_series(events, add_days(*from, -4), *to);
    f.push_back({std::move(pos), true});
    return f;
}

}  // namespace vitoria::analysis
