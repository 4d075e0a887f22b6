#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "vitoria/broker/context_broker.hpp"
#include "vitoria/digest.hpp"
#include "vitoria/engagement/engine.hpp"
#include "vitoria/feedback/granter.hpp"
#include "vitoria/history/history_store.hpp"
#include "vitoria/ingest/gateway.hpp"
#include "vitoria/risk/risk_feed.hpp"
#include "vitoria/rng.hpp"
#include "vitoria/sensing/gazetteer.hpp"
#include "vitoria/sim/scenario.hpp"

namespace vitoria::sim {

class VirtualClock {
public:
    VirtualClock(Timestamp start, Seconds tick) : now_(start), tick_(tick) {}

    Timestamp now() const { return now_; }
    Seconds tick() const { return tick_; }
    Timestamp advance() { return now_ += tick_; }

private:
    Timestamp now_;
    Seconds tick_;
};

/// The services a run wires together, all observing the same virtual clock.
struct Platform {
    std::unique_ptr<broker::ContextBroker> broker;
    std::unique_ptr<history::HistoryStore> history;
    std::unique_ptr<ingest::Gateway> gateway;
    std::unique_ptr<engagement::EngagementEngine> engine;
    std::unique_ptr<feedback::FeedbackGranter> granter;
    risk::RiskService risk;
    sensing::GridGazetteer gazetteer;
};

struct RunOptions {
    /// When set, events.jsonl, feedback.jsonl, covid.csv, events.csv, scenario.json
    /// and summary.json are written here.
    std::optional<std::filesystem::path> out_dir;
    /// Persist the history store under out_dir/history.
    bool persist_history{false};
    /// Feedback is withheld before this date (the no-feedback measurement period).
    std::optional<Date> feedback_from;
    std::function<void(const SensorEvent&)> on_event;
    std::function<void(const std::string& user, const Json& published)> on_feedback;
};

struct RunSummary {
    std::string event_log_digest;
    std::uint64_t events_logged{0};
    std::map<std::string, std::uint64_t> device_events_by_user;  // events that reached the gateway
    std::map<std::string, std::uint64_t> events_by_kind;
    std::uint64_t measurements_accepted{0};
    std::uint64_t measurements_rejected{0};
    std::uint64_t prompts_raised{0};
    std::uint64_t answers_accepted{0};
    std::uint64_t answers_refused{0};  // submissions the engine rejected
    std::uint64_t feedback_published{0};

    Json to_json() const;
};

struct RunResult {
    std::unique_ptr<Platform> platform;
    RunSummary summary;
};

class Simulator {
public:
    Simulator(ScenarioConfig config, std::uint64_t seed, RunOptions options = {});
    ~Simulator();

    const VirtualClock& clock() const { return clock_; }
    Platform& platform() { return *platform_; }
    bool done() const;

    /// Advances the clock one tick and runs every participant.
    void tick();
    /// Device events and answers due for one participant up to the current instant.
    std::vector<SensorEvent> step(const std::string& participant);

    /// Runs to the end of the span and closes the outputs.
    RunResult run();

private:
    struct Item;
    struct ItemLater {
        bool operator()(const Item& a, const Item& b) const;
    };
    struct Agent;

    void plan_day(Agent& agent, Date day);
    void schedule_answer(Agent& agent, const engagement::PendingPrompt& prompt);
    void record(const SensorEvent& ev, bool device);
    SensorEvent unique_time(Agent& agent, SensorEvent ev, const std::string& series);
    std::vector<std::string> top_apps(const std::string& user, Timestamp now) const;
    engagement::Answer answer_for(Agent& agent, const engagement::PendingPrompt& prompt);
    void finish();

    ScenarioConfig config_;
    std::uint64_t seed_;
    RunOptions options_;
    VirtualClock clock_;
    Timestamp end_;
    std::unique_ptr<Platform> platform_;
    std::vector<std::unique_ptr<Agent>> agents_;
    std::map<std::string, Agent*> by_id_;
    Date current_day_;
    RunSummary summary_;
    Sha256 log_hash_;
    std::ofstream events_out_;
    std::ofstream feedback_out_;
    bool finished_{false};
};

RunResult run_scenario(const ScenarioConfig& config, std::uint64_t seed, RunOptions options = {});

/// Synthetic national epidemic curve, one snapshot per day in [from, to].
std::vector<risk::EpiSnapshot> synthetic_epi_series(std::uint64_t seed, Date from, Date to);
void write_epi_csv(std::ostream& out, const std::vector<risk::EpiSnapshot>& rows);
/// `date,sign,description` rows for the events with a nonzero sign.
void write_events_csv(std::ostream& out, const ScenarioTimeline& timeline);

}  // namespace vitoria::sim
