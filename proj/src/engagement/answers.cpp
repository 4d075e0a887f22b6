#include "vitoria/engagement/answers.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <map>

#include "vitoria/error.hpp"

namespace vitoria::engagement {
namespace {

constexpr std::array<std::string_view, 4> kCarBuckets{"0", "1", "2", ">2"};
constexpr std::array<std::string_view, 4> kBusBuckets{"<10", "10-20", "20-30", ">30"};
constexpr std::array<std::string_view, 4> kBoatBuckets{"<10", "10-30", "30-50", ">50"};

template <typename Enum, std::size_t N>
std::string_view name_of(const std::array<std::pair<Enum, std::string_view>, N>& table, Enum value) {
    for (const auto& [e, name] : table) {
        if (e == value) return name;
    }
    return "?";
}

template <typename Enum, std::size_t N>
Enum value_of(const std::array<std::pair<Enum, std::string_view>, N>& table, std::string_view text,
              const char* what) {
    for (const auto& [e, name] : table) {
        if (name == text) return e;
    }
    throw Error(ErrorCode::ValidationFailed, std::string("unknown ") + what + " '" + std::string(text) + "'");
}

constexpr std::array<std::pair<QuestionnaireKind, std::string_view>, 5> kKinds{{
    {QuestionnaireKind::SamEmotion, "sam_emotion"},
    {QuestionnaireKind::SleepReport, "sleep_report"},
    {QuestionnaireKind::AppPurpose, "app_purpose"},
    {QuestionnaireKind::Proximity, "proximity"},
    {QuestionnaireKind::Transport, "transport"},
}};

constexpr std::array<std::pair<SleepQuality, std::string_view>, 5> kQualities{{
    {SleepQuality::VeryBad, "very_bad"},
    {SleepQuality::Bad, "bad"},
    {SleepQuality::Neutral, "neutral"},
    {SleepQuality::Good, "good"},
    {SleepQuality::VeryGood, "very_good"},
}};

constexpr std::array<std::pair<Purpose, std::string_view>, 4> kPurposes{{
    {Purpose::Communication, "communication"},
    {Purpose::Leisure, "leisure"},
    {Purpose::Research, "research"},
    {Purpose::Work, "work"},
}};

constexpr std::array<std::pair<TransportType, std::string_view>, 6> kTransports{{
    {TransportType::OwnCar, "own_car"},
    {TransportType::FriendVehicle, "friend_vehicle"},
    {TransportType::TaxiTvde, "taxi_tvde"},
    {TransportType::Bus, "bus"},
    {TransportType::SubwayTrainTram, "subway_train_tram"},
    {TransportType::Boat, "boat"},
}};

template <typename T>
T require(const Json& j, const char* field) {
    if (!j.is_object() || !j.contains(field)) {
        throw Error(ErrorCode::ValidationFailed, std::string("missing field '") + field + "'");
    }
    try {
        return j.at(field).get<T>();
    } catch (const Json::exception&) {
        throw Error(ErrorCode::ValidationFailed, std::string("wrong type for '") + field + "'");
    }
}

}  // namespace

std::string_view to_string(QuestionnaireKind k) { return name_of(kKinds, k); }
QuestionnaireKind parse_kind(std::string_view text) { return value_of(kKinds, text, "questionnaire kind"); }
std::string_view to_string(SleepQuality q) { return name_of(kQualities, q); }
SleepQuality parse_quality(std::string_view text) { return value_of(kQualities, text, "sleep quality"); }
std::string_view to_string(Purpose p) { return name_of(kPurposes, p); }
Purpose parse_purpose(std::string_view text) { return value_of(kPurposes, text, "purpose"); }
std::string_view to_string(TransportType t) { return name_of(kTransports, t); }
TransportType parse_transport(std::string_view text) { return value_of(kTransports, text, "transport"); }

std::span<const std::string_view> bucket_options(TransportType t) {
    switch (t) {
        case TransportType::OwnCar:
        case TransportType::FriendVehicle:
        case TransportType::TaxiTvde: return kCarBuckets;
        case TransportType::Bus:
        case TransportType::SubwayTrainTram: return kBusBuckets;
        case TransportType::Boat: return kBoatBuckets;
    }
    return {};
}

bool valid_bucket(TransportType t, std::string_view bucket) {
    const auto options = bucket_options(t);
    return std::find(options.begin(), options.end(), bucket) != options.end();
}

double SleepAnswer::duration_hours() const {
    int minutes = wake_minute - bed_minute;
    if (minutes <= 0) minutes += 24 * 60;
    return minutes / 60.0;
}

QuestionnaireKind kind_of(const Answer& a) {
    return std::visit(
        [](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, SamAnswer>) return QuestionnaireKind::SamEmotion;
            if constexpr (std::is_same_v<T, SleepAnswer>) return QuestionnaireKind::SleepReport;
            if constexpr (std::is_same_v<T, PurposeAnswer>) return QuestionnaireKind::AppPurpose;
            if constexpr (std::is_same_v<T, ProximityAnswer>) return QuestionnaireKind::Proximity;
            if constexpr (std::is_same_v<T, TransportAnswer>) return QuestionnaireKind::Transport;
        },
        a);
}

void validate(const Answer& a) {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::ValidationFailed, msg); };
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, SamAnswer>) {
                if (v.valence < 1 || v.valence > kSamPoints) fail("valence outside 1..5");
                if (v.arousal < 1 || v.arousal > kSamPoints) fail("arousal outside 1..5");
            } else if constexpr (std::is_same_v<T, SleepAnswer>) {
                if (v.bed_minute < 0 || v.bed_minute >= 1440 || v.wake_minute < 0 || v.wake_minute >= 1440) {
                    fail("sleep clock times outside 00:00..23:59");
                }
                if (v.bed_minute == v.wake_minute) fail("sleep duration must be within (0, 24h)");
                const int q = static_cast<int>(v.quality);
                if (q < 1 || q > 5) fail("sleep quality out of range");
            } else if constexpr (std::is_same_v<T, PurposeAnswer>) {
                for (const auto& [pkg, purpose] : v.purposes) {
                    if (pkg.empty()) fail("empty package name");
                    const int p = static_cast<int>(purpose);
                    if (p < 0 || p > 3) fail("purpose out of range");
                }
            } else if constexpr (std::is_same_v<T, ProximityAnswer>) {
                if (v.people_within_2m < 0) fail("people count must be >= 0");
            } else if constexpr (std::is_same_v<T, TransportAnswer>) {
                if (!valid_bucket(v.transport, v.people_bucket)) {
                    fail("bucket '" + v.people_bucket + "' not offered for " + std::string(to_string(v.transport)));
                }
            }
        },
        a);
}

Json answer_to_json(const Answer& a) {
    return std::visit(
        [](const auto& v) -> Json {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, SamAnswer>) {
                return {{"valence", v.valence}, {"arousal", v.arousal}};
            } else if constexpr (std::is_same_v<T, SleepAnswer>) {
                return {{"bed_time", format_clock(v.bed_minute)},
                        {"wake_time", format_clock(v.wake_minute)},
                        {"quality", to_string(v.quality)},
                        {"hours", v.duration_hours()}};
            } else if constexpr (std::is_same_v<T, PurposeAnswer>) {
                Json m = Json::object();
                for (const auto& [pkg, p] : v.purposes) m[pkg] = to_string(p);
                return {{"purposes", m}};
            } else if constexpr (std::is_same_v<T, ProximityAnswer>) {
                return {{"people_within_2m", v.people_within_2m}};
            } else {
                return {{"transport", to_string(v.transport)}, {"people", v.people_bucket}, {"trip_id", v.trip_id}};
            }
        },
        a);
}

Answer answer_from_json(QuestionnaireKind kind, const Json& j) {
    switch (kind) {
        case QuestionnaireKind::SamEmotion:
            return SamAnswer{require<int>(j, "valence"), require<int>(j, "arousal")};
        case QuestionnaireKind::SleepReport: {
            SleepAnswer s;
            try {
                s.bed_minute = parse_clock(require<std::string>(j, "bed_time"));
                s.wake_minute = parse_clock(require<std::string>(j, "wake_time"));
            } catch (const Error& e) {
                if (e.code() == ErrorCode::ValidationFailed) throw;
                throw Error(ErrorCode::ValidationFailed, e.what());
            }
            s.quality = parse_quality(require<std::string>(j, "quality"));
            return s;
        }
        case QuestionnaireKind::AppPurpose: {
            PurposeAnswer p;
            const auto m = require<std::map<std::string, std::string>>(j, "purposes");
            for (const auto& [pkg, purpose] : m) p.purposes[pkg] = parse_purpose(purpose);
            return p;
        }
        case QuestionnaireKind::Proximity:
            return ProximityAnswer{require<int>(j, "people_within_2m")};
        case QuestionnaireKind::Transport: {
            TransportAnswer t;
            t.transport = parse_transport(require<std::string>(j, "transport"));
            t.people_bucket = require<std::string>(j, "people");
            t.trip_id = j.is_object() ? j.value("trip_id", "") : "";
            return t;
        }
    }
    throw Error(ErrorCode::ValidationFailed, "unknown questionnaire kind");
}

int parse_clock(std::string_view text) {
    int h = -1, m = -1;
    if (text.size() == 5 && text[2] == ':') {
        std::from_chars(text.data(), text.data() + 2, h);
        std::from_chars(text.data() + 3, text.data() + 5, m);
    }
    if (h < 0 || h > 23 || m < 0 || m > 59) {
        throw Error(ErrorCode::ValidationFailed, "clock time must be HH:MM, got '" + std::string(text) + "'");
    }
    return h * 60 + m;
}

std::string format_clock(int minute) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%02d:%02d", (minute / 60) % 24, minute % 60);
    return buf;
}

const TransportObservation& dedupe_transport(std::span<const TransportObservation> chain) {
    if (chain.empty()) throw Error(ErrorCode::InvalidInput, "trip chain without answers");
    // Ties keep the later entry in input order.
    const TransportObservation* best = &chain.front();
    for (const auto& obs : chain) {
        if (obs.answered_at >= best->answered_at) best = &obs;
    }
    return *best;
}

std::vector<TransportObservation> latest_per_trip(std::span<const TransportObservation> answers) {
    std::map<std::string, std::vector<TransportObservation>> by_trip;
    for (const auto& a : answers) by_trip[a.trip_id].push_back(a);
    std::vector<TransportObservation> out;
    for (const auto& [trip, chain] : by_trip) out.push_back(dedupe_transport(chain));
    std::stable_sort(out.begin(), out.end(),
                     [](const auto& a, const auto& b) { return a.answered_at < b.answered_at; });
    return out;
}

}  // namespace vitoria::engagement
