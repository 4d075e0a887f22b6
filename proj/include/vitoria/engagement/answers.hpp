#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "vitoria/event.hpp"
#include "vitoria/time.hpp"

namespace vitoria::engagement {

enum class QuestionnaireKind { SamEmotion, SleepReport, AppPurpose, Proximity, Transport };
std::string_view to_string(QuestionnaireKind k);
QuestionnaireKind parse_kind(std::string_view text);

enum class SleepQuality { VeryBad = 1, Bad, Neutral, Good, VeryGood };
std::string_view to_string(SleepQuality q);
SleepQuality parse_quality(std::string_view text);

enum class Purpose { Communication, Leisure, Research, Work };
std::string_view to_string(Purpose p);
Purpose parse_purpose(std::string_view text);

enum class TransportType { OwnCar, FriendVehicle, TaxiTvde, Bus, SubwayTrainTram, Boat };
std::string_view to_string(TransportType t);
TransportType parse_transport(std::string_view text);

/// People-nearby options offered for a transport type.
std::span<const std::string_view> bucket_options(TransportType t);
bool valid_bucket(TransportType t, std::string_view bucket);

inline constexpr int kSamPoints = 5;

struct SamAnswer {
    int valence{0};  // 1..5
    int arousal{0};  // 1..5
};

/// Clock times are minutes after local midnight.
struct SleepAnswer {
    int bed_minute{0};
    int wake_minute{0};
    SleepQuality quality{SleepQuality::Neutral};

    /// Bed to wake, wrapping past midnight; in (0, 24).
    double duration_hours() const;
};

struct PurposeAnswer {
    std::map<std::string, Purpose> purposes;
};

struct ProximityAnswer {
    int people_within_2m{0};
};

struct TransportAnswer {
    TransportType transport{TransportType::OwnCar};
    std::string people_bucket;
    std::string trip_id;
};

using Answer = std::variant<SamAnswer, SleepAnswer, PurposeAnswer, ProximityAnswer, TransportAnswer>;

QuestionnaireKind kind_of(const Answer& a);

/// Field-level validation independent of any prompt. Throws ValidationFailed.
void validate(const Answer& a);

Json answer_to_json(const Answer& a);
Answer answer_from_json(QuestionnaireKind kind, const Json& j);

/// "HH:MM" <-> minutes after midnight.
int parse_clock(std::string_view text);
std::string format_clock(int minute);

/// One transport answer as seen downstream of the engine.
struct TransportObservation {
    std::string trip_id;
    TransportType transport{TransportType::OwnCar};
    std::string people_bucket;
    double trip_seconds{0};
    Timestamp answered_at{};
};

/// Latest-by-timestamp answer of one trip chain. Requires a non-empty input.
const TransportObservation& dedupe_transport(std::span<const TransportObservation> chain);

/// Groups by trip id and keeps the latest answer of each, ordered by answer time.
std::vector<TransportObservation> latest_per_trip(std::span<const TransportObservation> answers);

}  // namespace vitoria::engagement
