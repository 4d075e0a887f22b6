#pragma once

#include <string_view>

/// Broker attribute names of a Participant entity.
namespace vitoria::attr {

inline constexpr std::string_view kParticipantType = "Participant";

inline constexpr std::string_view kLocation = "location";
inline constexpr std::string_view kActivity = "activity";
inline constexpr std::string_view kSleeping = "sleeping";
inline constexpr std::string_view kPersonDevices = "bt_person_count";
inline constexpr std::string_view kWifi = "wifi_scan";
inline constexpr std::string_view kNoise = "noise_db";
inline constexpr std::string_view kAppUsage = "app_usage";
inline constexpr std::string_view kSteps = "steps";
inline constexpr std::string_view kHeartRate = "heart_rate";
inline constexpr std::string_view kGeo = "geo_context";
inline constexpr std::string_view kMunicipalRisk = "municipal_risk";
inline constexpr std::string_view kValence = "valence";
inline constexpr std::string_view kArousal = "arousal";
inline constexpr std::string_view kSleepHours = "sleep_hours";
inline constexpr std::string_view kSleepQuality = "sleep_quality";
inline constexpr std::string_view kAppPurpose = "app_purpose";
inline constexpr std::string_view kProximity = "proximity_count";
inline constexpr std::string_view kTransport = "transport";

/// Activity label marking a gap in recognition coverage.
inline constexpr std::string_view kUnknownActivity = "unknown";

}  // namespace vitoria::attr
