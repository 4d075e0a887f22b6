#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <utility>

#include "vitoria/sensing/sensing.hpp"

namespace vitoria::sensing {

/// Offline reverse geocoder over a 0.05-degree grid. Each CSV row
/// `cell_lat,cell_lon,district,municipality,parish` names the cell whose
/// south-west corner is (cell_lat, cell_lon).
class GridGazetteer final : public Gazetteer {
public:
    static constexpr double kCellDegrees = 0.05;

    GridGazetteer() = default;
    static GridGazetteer parse(std::istream& in);
    static GridGazetteer load(const std::filesystem::path& file);

    void add_cell(double cell_lat, double cell_lon, PlaceNames names);
    PlaceNames reverse(const GeoFix& fix) const override;

    /// Simulates loss of connectivity to the geocoding service.
    void set_online(bool online) { online_ = online; }
    std::size_t size() const { return cells_.size(); }

private:
    static std::pair<long, long> cell_of(double lat, double lon);

    std::map<std::pair<long, long>, PlaceNames> cells_;
    bool online_{true};
};

}  // namespace vitoria::sensing
