#pragma once

#include "svcevo/community.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace svcevo {

enum class EventType { forming, continuing, growing, shrinking, splitting, merging, dissolving };

inline constexpr std::size_t kEventTypeCount = 7;

std::string_view to_string(EventType event);
std::optional<EventType> parse_event_type(std::string_view text);

/// Inclusion values of one candidate pair, `forward = I(C1, C2)` and
/// `backward = I(C2, C1)`.
struct InclusionPair {
    double forward = 0.0;
    double backward = 0.0;
};

/// One classified transition between snapshot `from_snapshot` and the next.
struct EvolutionRecord {
    std::size_t from_snapshot = 0;
    EventType event = EventType::continuing;
    std::vector<std::string> predecessors;
    std::vector<std::string> successors;
    std::map<std::pair<std::string, std::string>, InclusionPair> inclusions;
};

struct TrackerConfig {
    double alpha = 0.5;
    double beta = 0.5;

    void validate() const;
};

/// Share of C1's members found in C2, weighted by C1's social positions.
double inclusion(const Community& c1, const Community& c2);

/// Applies the matching rules to two consecutive partitions. Every community
/// of either side ends up in at least one record.
std::vector<EvolutionRecord> classify_transition(const Partition& from, const Partition& to,
                                                 const TrackerConfig& config = {});

/// Chain of one persistent community across consecutive snapshots.
struct Lineage {
    std::string id;                          ///< id of the root community
    std::size_t start_snapshot = 0;
    std::vector<std::string> communities;    ///< one per snapshot from start_snapshot on
};

/// Result of following records across the whole series.
struct Tracking {
    std::vector<EvolutionRecord> records;
    std::vector<Lineage> lineages;
    /// Event each community undergoes into the next snapshot (absent for the
    /// last snapshot).
    std::map<std::string, EventType> next_event;
    /// Linked predecessor, for communities that continue a lineage.
    std::map<std::string, std::string> predecessor;
};

/// Links continuing/growing/shrinking pairs into lineages (each community has
/// at most one predecessor and one successor) and picks each community's next
/// event. `partitions` supplies every community so that unmatched ones still
/// get a lineage.
Tracking build_lineages(const std::vector<Partition>& partitions, std::vector<EvolutionRecord> records);

/// classify_transition over every consecutive pair (parallel) then build_lineages.
Tracking track(const std::vector<Partition>& partitions, const TrackerConfig& config = {});
Tracking track_serial(const std::vector<Partition>& partitions, const TrackerConfig& config = {});

void save_records_json(const std::vector<EvolutionRecord>& records, const std::filesystem::path& path);
std::vector<EvolutionRecord> load_records_json(const std::filesystem::path& path);
/// `snapshot,event,count` rows for every snapshot pair and event type.
void save_event_distribution(const std::vector<EvolutionRecord>& records, std::size_t snapshot_count,
                             const std::filesystem::path& path);
/// Lineages, next events and predecessor links (records are saved separately).
void save_lineages_json(const Tracking& tracking, const std::filesystem::path& path);
/// Fills everything but `records` from a file written by save_lineages_json.
Tracking load_lineages_json(const std::filesystem::path& path);

} // namespace svcevo
