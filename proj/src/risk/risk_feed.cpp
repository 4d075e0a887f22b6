#include "vitoria/risk/risk_feed.hpp"

#include <atomic>
#include <cmath>
#include <fstream>

#include "vitoria/csv.hpp"
#include "vitoria/error.hpp"

namespace vitoria::risk {

std::string_view to_string(MunicipalRiskLevel level) {
    switch (level) {
        case MunicipalRiskLevel::Moderated: return "moderated";
        case MunicipalRiskLevel::High: return "high";
        case MunicipalRiskLevel::VeryHigh: return "very_high";
        case MunicipalRiskLevel::ExtremelyHigh: return "extremely_high";
    }
    return "?";
}

std::string_view display_name(MunicipalRiskLevel level) {
    switch (level) {
        case MunicipalRiskLevel::Moderated: return "moderated";
        case MunicipalRiskLevel::High: return "high";
        case MunicipalRiskLevel::VeryHigh: return "very high";
        case MunicipalRiskLevel::ExtremelyHigh: return "extremely high";
    }
    return "?";
}

MunicipalRiskLevel parse_level(std::string_view text) {
    for (auto level : {MunicipalRiskLevel::Moderated, MunicipalRiskLevel::High, MunicipalRiskLevel::VeryHigh,
                       MunicipalRiskLevel::ExtremelyHigh}) {
        if (text == to_string(level) || text == display_name(level)) return level;
    }
    throw Error(ErrorCode::Malformed, "unknown risk level '" + std::string(text) + "'");
}

RiskTable::RiskTable(std::vector<MunicipalityRecord> records) {
    for (auto& r : records) {
        if (!by_municipality_[r.municipality].emplace(r.effective_date, r.level).second) {
            throw Error(ErrorCode::Malformed,
                        "duplicate record for " + r.municipality + " on " + format_date(r.effective_date));
        }
    }
}

RiskTable RiskTable::parse(std::istream& in) {
    std::vector<std::size_t> lines;
    const auto rows = read_csv(in, &lines);
    RiskTable table;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (i == 0 && !row.empty() && row[0] == "municipality") continue;
        if (row.size() != 3) throw ParseError(lines[i], "expected municipality,level,effective_date");
        try {
            if (row[0].empty()) throw Error(ErrorCode::Malformed, "empty municipality");
            const auto level = parse_level(row[1]);
            const auto date = parse_date(row[2]);
            if (!table.by_municipality_[row[0]].emplace(date, level).second) {
                throw Error(ErrorCode::Malformed, "duplicate (municipality, effective_date)");
            }
        } catch (const ParseError&) {
            throw;
        } catch (const Error& e) {
            throw ParseError(lines[i], e.what());
        }
    }
    return table;
}

MunicipalRiskLevel RiskTable::lookup_risk(const std::string& municipality, Date date) const {
    auto it = by_municipality_.find(municipality);
    if (it == by_municipality_.end()) throw Error(ErrorCode::NotFound, "municipality '" + municipality + "'");
    auto rec = it->second.upper_bound(date);
    if (rec == it->second.begin()) {
        throw Error(ErrorCode::NotFound, "no record for '" + municipality + "' on or before " + format_date(date));
    }
    return std::prev(rec)->second;
}

MunicipalRiskLevel RiskTable::latest(const std::string& municipality) const {
    auto it = by_municipality_.find(municipality);
    if (it == by_municipality_.end() || it->second.empty()) {
        throw Error(ErrorCode::NotFound, "municipality '" + municipality + "'");
    }
    return it->second.rbegin()->second;
}

std::size_t RiskTable::size() const { return by_municipality_.size(); }

RiskTable load_municipal_risk(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorCode::NotFound, "risk file " + file.string());
    return RiskTable::parse(in);
}

void RiskService::replace(RiskTable table) {
    std::atomic_store(&table_, std::make_shared<const RiskTable>(std::move(table)));
}

std::shared_ptr<const RiskTable> RiskService::snapshot() const { return std::atomic_load(&table_); }

MatrixZone matrix_zone(double incidence, double rt) {
    if (!std::isfinite(incidence) || !std::isfinite(rt) || incidence < 0 || rt < 0) {
        throw Error(ErrorCode::InvalidInput, "incidence and rt must be finite and non-negative");
    }
    const int exceeded = (incidence > kIncidenceThreshold ? 1 : 0) + (rt > kTransmissibilityThreshold ? 1 : 0);
    return static_cast<MatrixZone>(exceeded);
}

std::optional<MatrixZone> EpiSnapshot::zone() const {
    if (!incidence || !rt) return std::nullopt;
    return matrix_zone(*incidence, *rt);
}

}  // namespace vitoria::risk
