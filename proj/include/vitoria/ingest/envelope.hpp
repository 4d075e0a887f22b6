#pragma once

#include <map>
#include <string>

#include "vitoria/event.hpp"
#include "vitoria/ingest/gateway.hpp"

namespace vitoria::ingest {

/// Alias table installed on every participant phone: short name -> broker attribute.
std::map<std::string, std::string> participant_aliases();

/// Wire measurements for one device event. Platform-only kinds (prompts,
/// reminders) and opaque raw-sensor kinds translate to an empty batch.
MeasurementBatch to_batch(const SensorEvent& ev);

/// Wire body [{"a","v","t"}] for a batch.
Json batch_to_json(const MeasurementBatch& batch);

}  // namespace vitoria::ingest
