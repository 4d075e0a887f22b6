// Runs a cohort scenario on the virtual clock and writes the run directory.
#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>

#include "vitoria/error.hpp"
#include "vitoria/sim/simulator.hpp"

int main(int argc, char** argv) {
    using namespace vitoria;
    CLI::App app{"Deterministic cohort simulation (synthetic data)"};
    std::string config_path;
    std::uint64_t seed = 7;
    std::string out_dir;
    std::string feedback_from;
    std::string dump_default;
    bool persist_history = false;
    app.add_option("--config", config_path, "Scenario JSON; the built-in scenario when omitted");
    app.add_option("--seed", seed, "Run seed");
    app.add_option("--out", out_dir, "Output directory");
    app.add_option("--feedback-from", feedback_from, "First date on which feedback is published (YYYY-MM-DD)");
    app.add_flag("--persist-history", persist_history, "Write the history store under <out>/history");
    app.add_option("--dump-default", dump_default, "Write the built-in scenario to this file and exit");
    CLI11_PARSE(app, argc, argv);

    try {
        if (!dump_default.empty()) {
            std::ofstream(dump_default) << sim::default_scenario().to_json().dump(2) << '\n';
            return 0;
        }
        if (out_dir.empty()) {
            std::cerr << "simulate: --out is required\n";
            return 2;
        }
        auto config = config_path.empty() ? sim::default_scenario() : sim::ScenarioConfig::load(config_path);
        sim::RunOptions options;
        options.out_dir = out_dir;
        options.persist_history = persist_history;
        if (!feedback_from.empty()) options.feedback_from = parse_date(feedback_from);
        const auto started = std::chrono::steady_clock::now();
        auto result = sim::run_scenario(config, seed, options);
        const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        std::cout << "simulated " << config.participants.size() << " participants over " << config.timeline.span_days()
                  << " days in " << secs << " s\n"
                  << "events " << result.summary.events_logged << ", prompts " << result.summary.prompts_raised
                  << ", answers " << result.summary.answers_accepted << "\n"
                  << "event log sha256 " << result.summary.event_log_digest << "\n";
    } catch (const Error& e) {
        std::cerr << "simulate: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
