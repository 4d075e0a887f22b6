// Batch analytics over a simulated (or exported) run directory.
#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>

#include "vitoria/analysis/analysis.hpp"
#include "vitoria/error.hpp"

namespace {

using namespace vitoria;
using namespace vitoria::analysis;

std::filesystem::path prepare(const std::string& out) {
    std::filesystem::path dir = out.empty() ? "report" : out;
    std::filesystem::create_directories(dir);
    return dir;
}

int run_usage(const std::string& data, const std::string& categories_path, const std::string& cut_text,
              const std::string& out) {
    auto run = RunData::load_event_log(std::filesystem::path(data) / "events.jsonl");
    const auto categories = categories_path.empty() ? AppCategoryMap{} : AppCategoryMap::load(categories_path);
    const Date cut = cut_text.empty() ? kPeriodCut : parse_date(cut_text);
    const auto [before, after] = split_usage(run.usage, cut);
    const auto all = aggregate_app_usage(run.usage, categories, run.users);
    const auto b = aggregate_app_usage(before, categories, run.users);
    const auto a = aggregate_app_usage(after, categories, run.users);
    const auto dir = prepare(out);

    std::ofstream table(dir / "usage_by_category.csv");
    std::ofstream longf(dir / "usage_long.csv");
    table << "category,before,after,overall\n";
    longf << "period,category,mean_minutes_per_day\n";
    Json summary{{"cut", format_date(cut)}, {"users", run.users.size()}, {"categories", Json::object()}};
    auto get = [](const std::map<std::string, double>& m, const std::string& k) {
        auto it = m.find(k);
        return it == m.end() ? 0.0 : it->second;
    };
    for (const auto& [cat, overall] : all) {
        table << cat << ',' << get(b, cat) << ',' << get(a, cat) << ',' << overall << '\n';
        longf << "before," << cat << ',' << get(b, cat) << "\nafter," << cat << ',' << get(a, cat) << '\n';
        summary["categories"][cat] = {{"before", get(b, cat)}, {"after", get(a, cat)}, {"overall", overall}};
    }

    std::ofstream split(dir / "work_split.csv");
    split << "package,work_minutes,nonwork_minutes\n";
    for (const auto& [pkg, s] : work_split(run.usage)) split << pkg << ',' << s.work_minutes << ',' << s.nonwork_minutes << '\n';
    std::ofstream(dir / "usage_summary.json") << summary.dump(2) << '\n';
    std::cout << "usage: " << all.size() << " categories from " << run.usage.size() << " records -> " << dir << '\n';
    return 0;
}

int run_purpose(const std::string& data, const std::string& categories_path, const std::string& out) {
    auto run = RunData::load_event_log(std::filesystem::path(data) / "events.jsonl");
    if (!categories_path.empty()) {
        const auto categories = AppCategoryMap::load(categories_path);
        for (auto& p : run.purposes) p.package = categories.category(p.package);
    }
    const auto pct = purpose_percentages(run.purposes);
    const auto dir = prepare(out);
    std::ofstream longf(dir / "purpose.csv");
    longf << "app,purpose,percent\n";
    for (const auto& [app, by] : pct) {
        for (const auto& [purpose, v] : by) longf << app << ',' << purpose << ',' << v << '\n';
    }
    std::ofstream(dir / "purpose.json") << Json(pct).dump(2) << '\n';
    std::cout << "purpose: " << pct.size() << " apps from " << run.purposes.size() << " answers -> " << dir << '\n';
    return 0;
}

int run_corr(const std::string& data, const std::string& events_path, const std::string& covid_path,
             const std::string& column_map, int lag, const std::string& out) {
    const std::filesystem::path run_dir(data);
    auto run = RunData::load_event_log(run_dir / "events.jsonl");
    const auto events = EventTable::load(events_path.empty() ? run_dir / "events.csv" : std::filesystem::path(events_path));
    CovidColumnMap columns;
    if (!column_map.empty()) {
        std::ifstream in(column_map);
        if (!in) throw Error(ErrorCode::NotFound, "column map " + column_map);
        columns = CovidColumnMap::from_json(Json::parse(in));
    }
    const auto covid = load_covid_dataset(covid_path.empty() ? run_dir / "covid.csv" : std::filesystem::path(covid_path), columns);
    const auto features = correlation_features(run, covid, events);
    const auto dir = prepare(out);

    std::ofstream longf(dir / "corr_long.csv");
    longf << "lag,feature_a,feature_b,r,n\n";
    Json summary{{"lag", lag}, {"sleep_quality_vs_positiveness", Json::object()}};
    int best_lag = -1;
    double best_r = -2;
    for (int l = 0; l <= 4; ++l) {
        const auto m = build_matrix(features, l);
        for (std::size_t i = 0; i < m.names.size(); ++i) {
            for (std::size_t j = 0; j < m.names.size(); ++j) {
                longf << l << ',' << m.names[i] << ',' << m.names[j] << ',';
                if (m.r[i][j]) longf << *m.r[i][j];
                longf << ',' << m.n_effective[i][j] << '\n';
            }
        }
        const auto r = m.at("sleep_quality", "positiveness");
        summary["sleep_quality_vs_positiveness"][std::to_string(l)] = r ? Json(*r) : Json(nullptr);
        if (r && *r > best_r) {
            best_r = *r;
            best_lag = l;
        }
        if (l == lag) {
            std::ofstream mat(dir / ("corr_lag" + std::to_string(l) + ".csv"));
            m.write_csv(mat);
            std::ofstream n(dir / ("n_lag" + std::to_string(l) + ".csv"));
            m.write_n_csv(n);
            const auto va = m.at("valence", "arousal");
            summary["valence_vs_arousal"] = va ? Json(*va) : Json(nullptr);
        }
    }
    summary["sleep_quality_positiveness_argmax_lag"] = best_lag;
    std::ofstream(dir / "corr_summary.json") << summary.dump(2) << '\n';
    std::cout << "corr: r(valence, arousal) = " << summary["valence_vs_arousal"] << ", argmax lag of r(sleep_quality, positiveness) = "
              << best_lag << " (r = " << best_r << ") -> " << dir << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Analytics over run data"};
    app.require_subcommand(1);
    std::string data, out, categories, cut, events, covid, column_map;
    int lag = 3;

    auto* usage = app.add_subcommand("usage", "App usage by category, period split and work split");
    usage->add_option("--data", data, "Run directory holding events.jsonl")->required();
    usage->add_option("--categories", categories, "package,category CSV");
    usage->add_option("--cut", cut, "Period cut date (default 2021-03-23)");
    usage->add_option("--out", out, "Report directory");

    auto* purpose = app.add_subcommand("purpose", "Purpose percentages per app");
    purpose->add_option("--data", data, "Run directory holding events.jsonl")->required();
    purpose->add_option("--categories", categories, "Aggregate apps by this package,category CSV");
    purpose->add_option("--out", out, "Report directory");

    auto* corr = app.add_subcommand("corr", "Time-lagged correlation matrix");
    corr->add_option("--data", data, "Run directory holding events.jsonl")->required();
    corr->add_option("--events", events, "date,sign,description CSV (default <data>/events.csv)");
    corr->add_option("--covid", covid, "Epidemic dataset CSV (default <data>/covid.csv)");
    corr->add_option("--columns", column_map, "JSON mapping of dataset column names");
    corr->add_option("--lag", lag, "Lag in days for the matrix file")->check(CLI::Range(0, 4));
    corr->add_option("--out", out, "Report directory");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*usage) return run_usage(data, categories, cut, out);
        if (*purpose) return run_purpose(data, categories, out);
        return run_corr(data, events, covid, column_map, lag, out);
    } catch (const vitoria::Error& e) {
        std::cerr << "analyze: " << e.what() << '\n';
        return 1;
    }
}
