#include "vitoria/sensing/gazetteer.hpp"

#include <cmath>
#include <fstream>

#include "vitoria/csv.hpp"
#include "vitoria/error.hpp"

namespace vitoria::sensing {

std::pair<long, long> GridGazetteer::cell_of(double lat, double lon) {
    // The epsilon keeps exact grid corners (e.g. 38.75) inside their own cell.
    return {static_cast<long>(std::floor(lat / kCellDegrees + 1e-9)),
            static_cast<long>(std::floor(lon / kCellDegrees + 1e-9))};
}

void GridGazetteer::add_cell(double cell_lat, double cell_lon, PlaceNames names) {
    cells_[cell_of(cell_lat, cell_lon)] = std::move(names);
}

GridGazetteer GridGazetteer::parse(std::istream& in) {
    std::vector<std::size_t> lines;
    const auto rows = read_csv(in, &lines);
    GridGazetteer g;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (i == 0 && !r.empty() && r[0] == "cell_lat") continue;
        if (r.size() != 5) throw ParseError(lines[i], "expected cell_lat,cell_lon,district,municipality,parish");
        try {
            g.add_cell(std::stod(r[0]), std::stod(r[1]), PlaceNames{r[2], r[3], r[4]});
        } catch (const std::logic_error&) {
            throw ParseError(lines[i], "bad coordinate");
        }
    }
    return g;
}

GridGazetteer GridGazetteer::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorCode::NotFound, "gazetteer " + file.string());
    return parse(in);
}

PlaceNames GridGazetteer::reverse(const GeoFix& fix) const {
    if (!online_) throw Error(ErrorCode::Offline, "reverse geocoder unreachable");
    auto it = cells_.find(cell_of(fix.lat, fix.lon));
    if (it == cells_.end()) throw Error(ErrorCode::NotFound, "fix outside gazetteer coverage");
    return it->second;
}

}  // namespace vitoria::sensing
