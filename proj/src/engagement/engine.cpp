#include "vitoria/engagement/engine.hpp"

#include <algorithm>

#include "vitoria/error.hpp"
#include "vitoria/rng.hpp"

namespace vitoria::engagement {

Json PendingPrompt::to_json() const {
    return Json{{"prompt_id", prompt_id},
                {"user", user},
                {"kind", to_string(kind)},
                {"raised_at", format_timestamp(raised_at)},
                {"expires_at", format_timestamp(expires_at)},
                {"context", context}};
}

SensorEvent AnswerRecord::to_event() const {
    Json payload = answer_to_json(answer);
    payload["prompt_id"] = prompt_id;
    payload["questionnaire"] = to_string(kind);
    payload["raised_at"] = format_timestamp(raised_at);
    if (kind == QuestionnaireKind::Transport) payload["trip_seconds"] = context.value("trip_seconds", 0.0);
    return SensorEvent{user, "answer", std::move(payload), answered_at};
}

EngagementEngine::EngagementEngine(EngineOptions options) : options_(std::move(options)) {}

void EngagementEngine::log(const SensorEvent& ev) const {
    if (options_.platform_log) options_.platform_log(ev);
}

std::vector<ScheduledPrompt> EngagementEngine::plan_daily_prompts(const std::string& user, Date date) const {
    // One stream per (user, day): a day's SAM time never depends on other days.
    Rng rng(mix_seed({options_.seed, stable_hash(user), static_cast<std::uint64_t>(
                                                            std::chrono::sys_days{date}.time_since_epoch().count())}));
    const auto sam_minute = static_cast<int>(rng.integer(0, kSamWindowMinutes - 1));
    return {
        ScheduledPrompt{user, QuestionnaireKind::SleepReport, at(date, kSleepReportHour)},
        ScheduledPrompt{user, QuestionnaireKind::AppPurpose, at(date, kPurposeHour)},
        ScheduledPrompt{user, QuestionnaireKind::SamEmotion, at(date, kSamWindowStartHour, sam_minute)},
        ScheduledPrompt{user, std::nullopt, at(date, kReminderHour)},
    };
}

void EngagementEngine::schedule_day(const std::string& user, Date date) {
    auto plan = plan_daily_prompts(user, date);
    std::lock_guard lock(mutex_);
    for (auto& item : plan) schedule_.emplace(item.at, std::move(item));
}

PendingPrompt EngagementEngine::raise_locked(const std::string& user, QuestionnaireKind kind, Timestamp at,
                                            Json context) {
    PendingPrompt p{"q" + std::to_string(next_prompt_++), user, kind, at, at + kPromptValidity, std::move(context)};
    pending_.emplace(p.prompt_id, p);
    ++raised_[kind];
    log(SensorEvent{user, "prompt", p.to_json(), at});
    return p;
}

std::vector<std::string> EngagementEngine::expire_locked(Timestamp now) {
    std::vector<std::string> removed;
    for (auto it = pending_.begin(); it != pending_.end();) {
        if (it->second.expires_at <= now) {
            removed.push_back(it->first);
            expired_.insert(it->first);
            log(SensorEvent{it->second.user, "prompt_expired", Json{{"prompt_id", it->first}}, now});
            it = pending_.erase(it);
        } else {
            ++it;
        }
    }
    return removed;
}

std::vector<std::string> EngagementEngine::expire_pending(Timestamp now) {
    std::lock_guard lock(mutex_);
    return expire_locked(now);
}

std::vector<PendingPrompt> EngagementEngine::advance(Timestamp now) {
    std::lock_guard lock(mutex_);
    std::vector<PendingPrompt> raised;
    while (!schedule_.empty() && schedule_.begin()->first <= now) {
        const auto item = schedule_.begin()->second;
        schedule_.erase(schedule_.begin());
        expire_locked(item.at);
        if (item.is_reminder()) {
            Reminder r{item.user, item.at, {}};
            for (const auto& [id, p] : pending_) {
                if (p.user == item.user) r.prompt_ids.push_back(id);
            }
            log(SensorEvent{item.user, "reminder", Json{{"prompt_ids", r.prompt_ids}}, item.at});
            reminders_.push_back(std::move(r));
            continue;
        }
        Json context = Json::object();
        if (*item.kind == QuestionnaireKind::AppPurpose) {
            auto apps = options_.top_apps ? options_.top_apps(item.user, item.at) : std::vector<std::string>{};
            if (apps.size() > kTopApps) apps.resize(kTopApps);
            context["apps"] = apps;
        }
        raised.push_back(raise_locked(item.user, *item.kind, item.at, std::move(context)));
    }
    expire_locked(now);
    return raised;
}

std::optional<PendingPrompt> EngagementEngine::on_proximity(const std::string& user, int person_count,
                                                            Timestamp now) {
    if (person_count <= kProximityTrigger) return std::nullopt;
    std::lock_guard lock(mutex_);
    auto& state = triggers_[user];
    if (state.last_proximity_prompt_at && now - *state.last_proximity_prompt_at < kProximityCooldown) {
        return std::nullopt;
    }
    state.last_proximity_prompt_at = now;
    return raise_locked(user, QuestionnaireKind::Proximity, now, Json{{"person_devices", person_count}});
}

std::optional<PendingPrompt> EngagementEngine::on_vehicle_episode(const std::string& user,
                                                                  const sensing::ActivitySegment& episode,
                                                                  Timestamp now) {
    const auto duration = episode.duration();
    if (episode.label != sensing::ActivityLabel::InVehicle || !duration || *duration <= sensing::kInVehicleMinDuration) {
        return std::nullopt;
    }
    std::lock_guard lock(mutex_);
    auto& state = triggers_[user];
    if (!state.open_trip_id || episode.start - state.trip_last_end >= kTripChainGap) {
        state.open_trip_id = user + "-trip-" + std::to_string(next_prompt_);
        state.trip_seconds = 0;
    }
    state.trip_last_end = *episode.end;
    state.trip_seconds += static_cast<double>(duration->count());
    return raise_locked(user, QuestionnaireKind::Transport, now,
                        Json{{"trip_id", *state.open_trip_id}, {"trip_seconds", state.trip_seconds}});
}

AnswerRecord EngagementEngine::submit_answer(const std::string& prompt_id, const Json& body, Timestamp now) {
    QuestionnaireKind kind;
    {
        std::lock_guard lock(mutex_);
        auto it = pending_.find(prompt_id);
        if (it == pending_.end()) {
            if (expired_.count(prompt_id)) throw Error(ErrorCode::Expired, prompt_id);
            throw Error(ErrorCode::UnknownPrompt, prompt_id);
        }
        kind = it->second.kind;
    }
    return submit_answer(prompt_id, answer_from_json(kind, body), now);
}

AnswerRecord EngagementEngine::submit_answer(const std::string& prompt_id, Answer answer, Timestamp now) {
    AnswerRecord record;
    {
        std::lock_guard lock(mutex_);
        auto it = pending_.find(prompt_id);
        if (it == pending_.end()) {
            if (expired_.count(prompt_id)) throw Error(ErrorCode::Expired, prompt_id);
            throw Error(ErrorCode::UnknownPrompt, prompt_id);
        }
        const PendingPrompt& prompt = it->second;
        if (now >= prompt.expires_at) {
            expired_.insert(prompt_id);
            pending_.erase(it);
            throw Error(ErrorCode::Expired, prompt_id);
        }
        if (now < prompt.raised_at) throw Error(ErrorCode::ValidationFailed, "answer precedes prompt");
        if (kind_of(answer) != prompt.kind) {
            throw Error(ErrorCode::ValidationFailed, "answer kind does not match " + std::string(to_string(prompt.kind)));
        }
        validate(answer);
        if (auto* purpose = std::get_if<PurposeAnswer>(&answer)) {
            std::set<std::string> expected;
            for (const auto& app : prompt.context.value("apps", Json::array())) expected.insert(app.get<std::string>());
            std::set<std::string> given;
            for (const auto& [pkg, p] : purpose->purposes) given.insert(pkg);
            if (given != expected) throw Error(ErrorCode::ValidationFailed, "purposes must cover exactly the prompted apps");
        }
        if (auto* transport = std::get_if<TransportAnswer>(&answer)) {
            const auto trip = prompt.context.value("trip_id", "");
            if (transport->trip_id.empty()) transport->trip_id = trip;
            if (transport->trip_id != trip) throw Error(ErrorCode::ValidationFailed, "trip id does not match prompt");
        }
        record = AnswerRecord{prompt_id, prompt.user, prompt.kind, std::move(answer), prompt.raised_at, now,
                              prompt.context};
        pending_.erase(it);
        closed_.insert(prompt_id);
        answers_.push_back(record);
        if (record.kind == QuestionnaireKind::Transport) {
            const auto& trip = std::get<TransportAnswer>(record.answer).trip_id;
            for (auto& entry : transport_log_) {
                if (std::get<TransportAnswer>(entry.record.answer).trip_id == trip) entry.discarded = true;
            }
            transport_log_.push_back({record, false});
        }
    }
    if (options_.answer_sink) options_.answer_sink(record.to_event());
    return record;
}

std::vector<PendingPrompt> EngagementEngine::list_pending(const std::string& user, Timestamp now) const {
    std::lock_guard lock(mutex_);
    std::vector<PendingPrompt> out;
    for (const auto& [id, p] : pending_) {
        if (p.user == user && p.expires_at > now && p.raised_at <= now) out.push_back(p);
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.raised_at < b.raised_at; });
    return out;
}

std::optional<PendingPrompt> EngagementEngine::find_pending(const std::string& prompt_id) const {
    std::lock_guard lock(mutex_);
    auto it = pending_.find(prompt_id);
    if (it == pending_.end()) return std::nullopt;
    return it->second;
}

std::vector<Reminder> EngagementEngine::reminders() const {
    std::lock_guard lock(mutex_);
    return reminders_;
}

std::vector<AnswerRecord> EngagementEngine::answers() const {
    std::lock_guard lock(mutex_);
    return answers_;
}

TriggerState EngagementEngine::trigger_state(const std::string& user) const {
    std::lock_guard lock(mutex_);
    auto it = triggers_.find(user);
    return it == triggers_.end() ? TriggerState{} : it->second;
}

std::vector<EngagementEngine::TransportLogEntry> EngagementEngine::transport_log() const {
    std::lock_guard lock(mutex_);
    return transport_log_;
}

std::uint64_t EngagementEngine::raised_count(QuestionnaireKind k) const {
    std::lock_guard lock(mutex_);
    auto it = raised_.find(k);
    return it == raised_.end() ? 0 : it->second;
}

}  // namespace vitoria::engagement
