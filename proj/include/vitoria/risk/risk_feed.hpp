#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vitoria/time.hpp"

namespace vitoria::risk {

/// The four municipal administrative levels.
enum class MunicipalRiskLevel { Moderated, High, VeryHigh, ExtremelyHigh };

std::string_view to_string(MunicipalRiskLevel level);    // "very_high"
std::string_view display_name(MunicipalRiskLevel level);  // "very high"
/// Accepts both the snake_case and the spaced display form.
MunicipalRiskLevel parse_level(std::string_view text);

struct MunicipalityRecord {
    std::string municipality;
    MunicipalRiskLevel level{MunicipalRiskLevel::Moderated};
    Date effective_date{};
};

class RiskTable {
public:
    RiskTable() = default;
    explicit RiskTable(std::vector<MunicipalityRecord> records);

    /// CSV `municipality,level,effective_date`; an optional header row is skipped.
    static RiskTable parse(std::istream& in);

    /// Level with the greatest effective date <= date. Throws NotFound.
    MunicipalRiskLevel lookup_risk(const std::string& municipality, Date date) const;
    /// Level of the most recent record. Throws NotFound.
    MunicipalRiskLevel latest(const std::string& municipality) const;

    std::size_t size() const;

private:
    std::map<std::string, std::map<Date, MunicipalRiskLevel>> by_municipality_;
};

RiskTable load_municipal_risk(const std::filesystem::path& file);

/// Read-mostly holder; reload swaps the whole table atomically.
class RiskService {
public:
    RiskService() : table_(std::make_shared<const RiskTable>()) {}
    explicit RiskService(RiskTable table) : table_(std::make_shared<const RiskTable>(std::move(table))) {}

    void replace(RiskTable table);
    void reload(const std::filesystem::path& file) { replace(load_municipal_risk(file)); }
    std::shared_ptr<const RiskTable> snapshot() const;

    MunicipalRiskLevel lookup_risk(const std::string& municipality, Date date) const {
        return snapshot()->lookup_risk(municipality, date);
    }

private:
    std::shared_ptr<const RiskTable> table_;
};

/// Risk-matrix zone from 14-day incidence per 100k and transmissibility.
enum class MatrixZone : int { Low = 0, Intermediate = 1, High = 2 };

inline constexpr double kIncidenceThreshold = 120.0;
inline constexpr double kTransmissibilityThreshold = 1.0;

/// 2 when both exceed their thresholds, 1 when exactly one does, 0 otherwise.
/// Throws InvalidInput for NaN, infinite or negative arguments.
MatrixZone matrix_zone(double incidence, double rt);

struct EpiSnapshot {
    Date date{};
    std::optional<double> incidence;
    std::optional<double> rt;
    std::optional<double> active_cases;
    std::optional<double> new_confirmed;
    std::optional<double> total_confirmed;
    std::optional<double> new_deaths;

    std::optional<MatrixZone> zone() const;
};

}  // namespace vitoria::risk
