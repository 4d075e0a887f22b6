#include "support.hpp"

#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

#include "vitoria/risk/risk_feed.hpp"

using namespace vitoria;
using namespace vitoria::testing;
using namespace vitoria::risk;

namespace {

// Written directly from the zone rule, independent of the library.
int oracle_zone(double incidence, double rt) {
    const bool a = incidence > 120.0;
    const bool b = rt > 1.0;
    return a && b ? 2 : (a || b ? 1 : 0);
}

RiskTable table(const std::string& csv) {
    std::istringstream in(csv);
    return RiskTable::parse(in);
}

}  // namespace

TEST_CASE("matrix zone examples") {
    CHECK(matrix_zone(130, 1.2) == MatrixZone::High);
    CHECK(matrix_zone(119, 1.2) == MatrixZone::Intermediate);
    CHECK(matrix_zone(120, 1.0) == MatrixZone::Low);
    CHECK(matrix_zone(121, 0.9) == MatrixZone::Intermediate);
    CHECK_CODE(matrix_zone(std::nan(""), 1.0), ErrorCode::InvalidInput);
    CHECK_CODE(matrix_zone(10, -1.0), ErrorCode::InvalidInput);
    CHECK_CODE(matrix_zone(INFINITY, 1.0), ErrorCode::InvalidInput);
}

TEST_CASE("matrix zone agrees with the oracle on a grid") {
    int mismatches = 0;
    for (int i = 0; i < 100; ++i)
        for (int j = 0; j < 100; ++j) {
            const double inc = i * 2.4 + (i % 7) * 0.1;
            const double rt = j * 0.02 + (j % 3) * 0.001;
            if (static_cast<int>(matrix_zone(inc, rt)) != oracle_zone(inc, rt)) ++mismatches;
        }
    CHECK(mismatches == 0);
}

TEST_CASE("epi snapshot zone needs both inputs") {
    EpiSnapshot s{ymd(2021, 2, 1), 900.0, 0.8, {}, {}, {}, {}};
    CHECK(s.zone() == MatrixZone::Intermediate);
    s.rt.reset();
    CHECK_FALSE(s.zone());
}

TEST_CASE("latest record wins and lookups are as-of") {
    auto t = table("municipality,level,effective_date\nLisboa,high,2021-01-01\nLisboa,moderated,2021-01-05\n");
    CHECK(t.latest("Lisboa") == MunicipalRiskLevel::Moderated);
    CHECK(t.lookup_risk("Lisboa", ymd(2021, 1, 3)) == MunicipalRiskLevel::High);
    CHECK(t.lookup_risk("Lisboa", ymd(2021, 1, 5)) == MunicipalRiskLevel::Moderated);
    CHECK_CODE(t.lookup_risk("Lisboa", ymd(2020, 12, 31)), ErrorCode::NotFound);
    CHECK_CODE(t.lookup_risk("Faro", ymd(2021, 1, 3)), ErrorCode::NotFound);
}

TEST_CASE("bad rows are ParseErrors with their line") {
    try {
        table("municipality,level,effective_date\nLisboa,high,2021-01-01\nPorto,severe,2021-01-01\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    CHECK_THROWS_AS(table("Lisboa,high\n"), ParseError);
    CHECK_THROWS_AS(table("Lisboa,high,2021-01-01\nLisboa,moderated,2021-01-01\n"), ParseError);
}

TEST_CASE("level names") {
    CHECK(parse_level("very high") == MunicipalRiskLevel::VeryHigh);
    CHECK(parse_level("extremely_high") == MunicipalRiskLevel::ExtremelyHigh);
    CHECK(display_name(MunicipalRiskLevel::Moderated) == "moderated");
}

TEST_CASE("shipped risk file loads") {
    auto t = load_municipal_risk(VITORIA_DATA_DIR "/municipal_risk.csv");
    CHECK(t.size() == 4);
    CHECK_NOTHROW(t.lookup_risk("Lisboa", ymd(2021, 3, 1)));
}

TEST_CASE("reload swaps the table while readers keep going") {
    RiskService svc(table("Lisboa,high,2021-01-01\n"));
    std::atomic<bool> stop{false};
    std::atomic<int> bad{0};
    std::thread reader([&] {
        while (!stop) {
            const auto l = svc.lookup_risk("Lisboa", ymd(2021, 2, 1));
            if (l != MunicipalRiskLevel::High && l != MunicipalRiskLevel::Moderated) ++bad;
        }
    });
    for (int i = 0; i < 200; ++i)
        svc.replace(table(i % 2 ? "Lisboa,high,2021-01-01\n" : "Lisboa,moderated,2021-01-01\n"));
    stop = true;
    reader.join();
    CHECK(bad == 0);
    CHECK(svc.lookup_risk("Lisboa", ymd(2021, 2, 1)) == MunicipalRiskLevel::High);
}
