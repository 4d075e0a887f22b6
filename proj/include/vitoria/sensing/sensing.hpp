#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vitoria/event.hpp"
#include "vitoria/risk/risk_feed.hpp"
#include "vitoria/time.hpp"

namespace vitoria::sensing {

using UserKey = std::array<std::uint8_t, 32>;

/// Device-local configuration. Neither field may leave the device layer.
struct HomeNetworkConfig {
    std::string home_ssid;
    UserKey user_key{};

    bool configured() const { return !home_ssid.empty(); }
};

enum class DiscreteLocation { Home, Other };
std::string_view to_string(DiscreteLocation loc);

struct WifiAccessPoint {
    std::string ssid;
    std::string bssid;
    int rssi{-100};
};
using WifiScanResult = std::vector<WifiAccessPoint>;

struct SanitizedAccessPoint {
    std::string bssid;
    int rssi{-100};

    bool operator==(const SanitizedAccessPoint&) const = default;
};

enum class DeviceClass { Headphones, Smartphone, Wearable, Tv, Car, Other };
std::string_view to_string(DeviceClass c);
DeviceClass parse_device_class(std::string_view text);

struct BluetoothSighting {
    DeviceClass device_class{DeviceClass::Other};
    int rssi{-100};
    bool connected{false};
};

enum class ActivityLabel { Running, Walking, OnBicycle, InVehicle, OnFoot, Tilting, Still };
std::string_view to_string(ActivityLabel a);
ActivityLabel parse_activity(std::string_view text);

struct ActivityClassification {
    ActivityLabel label{ActivityLabel::Still};
    int confidence{0};  // 0..100
    Timestamp observed_at{};
};

struct SleepClassification {
    bool sleeping{false};
    int confidence{0};
    Timestamp observed_at{};
};

/// [start, end); `end` is empty for the trailing segment of an open stream.
struct ActivitySegment {
    ActivityLabel label{ActivityLabel::Still};
    Timestamp start{};
    std::optional<Timestamp> end;

    std::optional<Seconds> duration() const {
        if (!end) return std::nullopt;
        return *end - start;
    }
    bool operator==(const ActivitySegment&) const = default;
};

struct GeoContextTokens {
    std::string district_token;
    std::string municipality_token;
    std::string parish_token;
    std::optional<risk::MunicipalRiskLevel> risk_level;
};

struct PlaceNames {
    std::string district;
    std::string municipality;
    std::string parish;
};

struct GeoFix {
    double lat{0};
    double lon{0};
};

struct AppUsageRecord {
    std::string package;
    double foreground_minutes{0};
    Timestamp window_start{};
    Timestamp window_end{};

    /// Throws InvalidInput when minutes are negative or exceed the window.
    void validate() const;
};

enum class WatchKind { Steps, HeartRate, Activity };

struct WatchSample {
    WatchKind kind{WatchKind::Steps};
    Json value;
    Timestamp observed_at{};

    /// Heart rate must lie in [25, 250] bpm.
    void validate() const;
};

inline constexpr int kDefaultConfidenceThreshold = 50;
inline constexpr Seconds kInVehicleMinDuration{120};
inline constexpr int kProximityRssiCutoff = -75;

/// Home iff a scanned SSID equals the configured home SSID exactly. Empty scans are "other".
DiscreteLocation infer_discrete_location(const WifiScanResult& scan, const HomeNetworkConfig& cfg);

/// 16-hex-char keyed digest per administrative level; risk is left for the caller.
GeoContextTokens anonymize_geo(std::span<const std::uint8_t> user_key, std::string_view district,
                               std::string_view municipality, std::string_view parish);

/// Reverse geocoder. Implementations throw Error{Offline} when unreachable and
/// Error{NotFound} when the fix falls outside their coverage.
class Gazetteer {
public:
    virtual ~Gazetteer() = default;
    virtual PlaceNames reverse(const GeoFix& fix) const = 0;
};

/// Current risk for a (pre-anonymization) municipality name.
using RiskLookup = std::function<std::optional<risk::MunicipalRiskLevel>(const std::string& municipality)>;

/// Reverse-geocodes, looks up risk, then tokenizes. The fix itself is never retained.
GeoContextTokens resolve_geo_context(const GeoFix& fix, const Gazetteer& gazetteer, const RiskLookup& risk,
                                     const HomeNetworkConfig& cfg);

/// Unconnected headphones, smartphones and wearables; optionally only those at rssi >= cutoff.
int count_person_devices(std::span<const BluetoothSighting> scan, std::optional<int> min_rssi = std::nullopt);

/// Drops low-confidence classifications and merges runs of equal labels.
/// `stream_end`, when given, closes the trailing segment.
std::vector<ActivitySegment> smooth_activity(std::span<const ActivityClassification> stream,
                                             int threshold = kDefaultConfidenceThreshold,
                                             std::optional<Timestamp> stream_end = std::nullopt);

std::vector<ActivitySegment> detect_in_vehicle_episodes(std::span<const ActivitySegment> segments,
                                                        Seconds min_duration = kInVehicleMinDuration);

std::vector<SanitizedAccessPoint> sanitize_wifi(const WifiScanResult& scan);

double mean_noise(std::span<const double> window_db);

}  // namespace vitoria::sensing
