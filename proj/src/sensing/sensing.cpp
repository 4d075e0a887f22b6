#include "vitoria/sensing/sensing.hpp"

#include <algorithm>
#include <numeric>

#include "vitoria/digest.hpp"
#include "vitoria/error.hpp"

namespace vitoria::sensing {
namespace {

constexpr std::pair<ActivityLabel, std::string_view> kActivityNames[] = {
    {ActivityLabel::Running, "running"},     {ActivityLabel::Walking, "walking"},
    {ActivityLabel::OnBicycle, "on_bicycle"}, {ActivityLabel::InVehicle, "in_vehicle"},
    {ActivityLabel::OnFoot, "on_foot"},       {ActivityLabel::Tilting, "tilting"},
    {ActivityLabel::Still, "still"},
};

constexpr std::pair<DeviceClass, std::string_view> kDeviceNames[] = {
    {DeviceClass::Headphones, "headphones"}, {DeviceClass::Smartphone, "smartphone"},
    {DeviceClass::Wearable, "wearable"},     {DeviceClass::Tv, "tv"},
    {DeviceClass::Car, "car"},               {DeviceClass::Other, "other"},
};

std::string level_token(std::span<const std::uint8_t> key, std::string_view tag, std::string_view name) {
    std::string message;
    message.reserve(tag.size() + 1 + name.size());
    message.append(tag).push_back('\x1f');
    message.append(name);
    return hmac_sha256_hex(key, message).substr(0, 16);
}

}  // namespace

std::string_view to_string(DiscreteLocation loc) { return loc == DiscreteLocation::Home ? "home" : "other"; }

std::string_view to_string(ActivityLabel a) {
    for (const auto& [label, name] : kActivityNames) {
        if (label == a) return name;
    }
    return "?";
}

ActivityLabel parse_activity(std::string_view text) {
    for (const auto& [label, name] : kActivityNames) {
        if (name == text) return label;
    }
    throw Error(ErrorCode::Malformed, "unknown activity '" + std::string(text) + "'");
}

std::string_view to_string(DeviceClass c) {
    for (const auto& [cls, name] : kDeviceNames) {
        if (cls == c) return name;
    }
    return "?";
}

DeviceClass parse_device_class(std::string_view text) {
    for (const auto& [cls, name] : kDeviceNames) {
        if (name == text) return cls;
    }
    throw Error(ErrorCode::Malformed, "unknown device class '" + std::string(text) + "'");
}

void AppUsageRecord::validate() const {
    const double window_minutes = static_cast<double>((window_end - window_start).count()) / 60.0;
    if (package.empty()) throw Error(ErrorCode::InvalidInput, "app usage without package");
    if (window_end <= window_start) throw Error(ErrorCode::InvalidInput, "empty usage window");
    if (foreground_minutes < 0 || foreground_minutes > window_minutes) {
        throw Error(ErrorCode::InvalidInput, "foreground minutes outside [0, window length]");
    }
}

void WatchSample::validate() const {
    if (kind == WatchKind::HeartRate) {
        if (!value.is_number() || value.get<double>() < 25 || value.get<double>() > 250) {
            throw Error(ErrorCode::InvalidInput, "heart rate outside [25, 250] bpm");
        }
    } else if (kind == WatchKind::Steps) {
        if (!value.is_number() || value.get<double>() < 0) {
            throw Error(ErrorCode::InvalidInput, "step count must be a non-negative number");
        }
    }
}

DiscreteLocation infer_discrete_location(const WifiScanResult& scan, const HomeNetworkConfig& cfg) {
    if (!cfg.configured()) throw Error(ErrorCode::NotConfigured, "home network not selected");
    const bool home = std::any_of(scan.begin(), scan.end(),
                                  [&](const WifiAccessPoint& ap) { return ap.ssid == cfg.home_ssid; });
    return home ? DiscreteLocation::Home : DiscreteLocation::Other;
}

GeoContextTokens anonymize_geo(std::span<const std::uint8_t> user_key, std::string_view district,
                               std::string_view municipality, std::string_view parish) {
    if (district.empty() || municipality.empty() || parish.empty()) {
        throw Error(ErrorCode::InvalidInput, "place names must be non-empty");
    }
    return GeoContextTokens{level_token(user_key, "district", district),
                            level_token(user_key, "municipality", municipality),
                            level_token(user_key, "parish", parish), std::nullopt};
}

GeoContextTokens resolve_geo_context(const GeoFix& fix, const Gazetteer& gazetteer, const RiskLookup& risk,
                                     const HomeNetworkConfig& cfg) {
    if (!(fix.lat >= -90 && fix.lat <= 90 && fix.lon >= -180 && fix.lon <= 180)) {
        throw Error(ErrorCode::InvalidInput, "coordinates out of range");
    }
    const PlaceNames names = gazetteer.reverse(fix);
    // Risk needs the clear municipality name, so it is fetched before tokenizing.
    std::optional<risk::MunicipalRiskLevel> level;
    if (risk) level = risk(names.municipality);
    auto tokens = anonymize_geo(cfg.user_key, names.district, names.municipality, names.parish);
    tokens.risk_level = level;
    return tokens;
}

int count_person_devices(std::span<const BluetoothSighting> scan, std::optional<int> min_rssi) {
    return static_cast<int>(std::count_if(scan.begin(), scan.end(), [&](const BluetoothSighting& s) {
        if (s.connected) return false;
        if (min_rssi && s.rssi < *min_rssi) return false;
        return s.device_class == DeviceClass::Headphones || s.device_class == DeviceClass::Smartphone ||
               s.device_class == DeviceClass::Wearable;
    }));
}

std::vector<ActivitySegment> smooth_activity(std::span<const ActivityClassification> stream, int threshold,
                                             std::optional<Timestamp> stream_end) {
    for (std::size_t i = 1; i < stream.size(); ++i) {
        if (stream[i].observed_at < stream[i - 1].observed_at) {
            throw Error(ErrorCode::Unordered, "activity stream goes back in time at index " + std::to_string(i));
        }
    }
    std::vector<ActivitySegment> out;
    for (const auto& c : stream) {
        if (c.confidence < threshold) continue;
        if (!out.empty() && out.back().label == c.label) continue;
        if (!out.empty()) out.back().end = c.observed_at;
        out.push_back(ActivitySegment{c.label, c.observed_at, std::nullopt});
    }
    if (!out.empty() && stream_end && *stream_end >= out.back().start) out.back().end = *stream_end;
    return out;
}

std::vector<ActivitySegment> detect_in_vehicle_episodes(std::span<const ActivitySegment> segments,
                                                        Seconds min_duration) {
    std::vector<ActivitySegment> out;
    for (const auto& s : segments) {
        const auto d = s.duration();
        if (s.label == ActivityLabel::InVehicle && d && *d > min_duration) out.push_back(s);
    }
    return out;
}

std::vector<SanitizedAccessPoint> sanitize_wifi(const WifiScanResult& scan) {
    std::vector<SanitizedAccessPoint> out;
    out.reserve(scan.size());
    for (const auto& ap : scan) out.push_back({ap.bssid, std::clamp(ap.rssi, -100, 0)});
    return out;
}

double mean_noise(std::span<const double> window_db) {
    if (window_db.empty()) throw Error(ErrorCode::EmptyWindow, "noise window has no samples");
    return std::accumulate(window_db.begin(), window_db.end(), 0.0) / static_cast<double>(window_db.size());
}

}  // namespace vitoria::sensing
