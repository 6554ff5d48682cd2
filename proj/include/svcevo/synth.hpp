#pragma once

#include "svcevo/community.hpp"
#include "svcevo/entity.hpp"
#include "svcevo/events.hpp"
#include "svcevo/mechanism.hpp"
#include "svcevo/tracker.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace svcevo {

enum class DirectiveKind { keep, grow, shrink, split, merge, dissolve, form };

std::string_view to_string(DirectiveKind kind);

/// Change applied to one planted community between `snapshot` and the next.
struct Directive {
    std::size_t snapshot = 0;
    std::string community;
    DirectiveKind kind = DirectiveKind::keep;
    std::size_t amount = 0;             ///< grow/shrink: nodes; split: parts; form: size
    std::vector<std::string> partners;  ///< merge: the other communities
};

struct PlantedCommunity {
    std::string id;
    std::size_t size = 8;
};

/// Planted lifecycle of a synthetic ecosystem.
///
/// Between consecutive snapshots each live community draws every member pair
/// with `intra_probability`; a drawn pair interacts `level + {0,1}` times where
/// `level` encodes the community's upcoming event (the planted pattern). When
/// `planted_signal` is off every level is 1. Sparse cross-community contacts
/// arrive at `noise_rate` per community per snapshot.
struct EvolutionScript {
    std::size_t snapshots = 10;
    int period_days = 30;
    Instant start{1470009600};  // 2016-08-01T00:00:00Z
    std::uint64_t seed = 7;
    double intra_probability = 0.6;
    double noise_rate = 0.5;
    double service_mix = 0.5;
    std::size_t min_community_size = 4;
    bool planted_signal = true;
    std::vector<PlantedCommunity> communities;
    std::vector<Directive> directives;

    /// Throws on dangling references, bad rates and infeasible directives.
    void validate() const;
};

/// Intended event of one planted community at one transition.
struct ScheduledEvent {
    std::size_t snapshot = 0;
    std::string community;
    EventType event = EventType::continuing;
};

struct GroundTruth {
    std::vector<ScheduledEvent> schedule;
    /// Planted members per snapshot: [snapshot][community id] -> sorted members.
    std::vector<std::map<std::string, std::vector<std::string>>> membership;
};

struct SynthOutput {
    EntityRegistry entities;
    std::vector<InteractionEvent> events;
    MechanismConfig config;
    GroundTruth truth;
    Instant start;
    Instant end;  ///< instant of the last snapshot
};

SynthOutput generate(const EvolutionScript& script);

/// 12 communities over 10 snapshots with a seeded mix of every event type.
EvolutionScript default_script(std::uint64_t seed = 7);

nlohmann::json script_to_json(const EvolutionScript& script);
EvolutionScript script_from_json(const nlohmann::json& doc);
nlohmann::json truth_to_json(const GroundTruth& truth);
GroundTruth truth_from_json(const nlohmann::json& doc);

/// Writes nodes.csv, events.csv, mechanisms.cfg, schedule.json and script.json.
void save_synth(const EvolutionScript& script, const SynthOutput& output, const std::filesystem::path& dir);

struct RecoveryReport {
    std::size_t scheduled = 0;
    std::size_t recovered = 0;
    double rate() const { return scheduled == 0 ? 1.0 : static_cast<double>(recovered) / static_cast<double>(scheduled); }
};

/// Matches every planted community to the detected community with the
/// highest Jaccard overlap and compares its tracked next event with the plan.
RecoveryReport recovery(const GroundTruth& truth, const std::vector<Partition>& partitions, const Tracking& tracking);

} // namespace svcevo
