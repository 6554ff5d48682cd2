#pragma once

#include "svcevo/entity.hpp"
#include "svcevo/events.hpp"
#include "svcevo/mechanism.hpp"
#include "svcevo/time.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace svcevo {

struct WeightedEdge {
    std::size_t u = 0;  // u < v
    std::size_t v = 0;
    double weight = 0.0;

    friend bool operator==(const WeightedEdge&, const WeightedEdge&) = default;
};

struct Neighbor {
    std::size_t node = 0;
    double weight = 0.0;
};

/// Weighted undirected graph of the ecosystem observed at one instant.
///
/// Nodes are held in sorted id order and addressed by index. Edges are
/// unordered pairs stored once with `u < v`; the adjacency lists hold both
/// directions. No self-loops, no isolated nodes, every weight > 0.
class Snapshot {
public:
    Snapshot() = default;
    /// `edges` may come in any order and orientation; duplicates are an error.
    Snapshot(Instant time, std::vector<std::string> nodes, std::vector<WeightedEdge> edges);

    /// Builds from id-keyed edges; the node set is the set of edge endpoints.
    static Snapshot from_edges(Instant time,
                               const std::vector<std::pair<std::pair<std::string, std::string>, double>>& edges);

    Instant time() const { return time_; }
    std::size_t node_count() const { return nodes_.size(); }
    std::size_t edge_count() const { return edges_.size(); }
    bool empty() const { return nodes_.empty(); }

    const std::vector<std::string>& nodes() const { return nodes_; }
    const std::string& node(std::size_t index) const { return nodes_[index]; }
    const std::vector<WeightedEdge>& edges() const { return edges_; }
    std::span<const Neighbor> neighbors(std::size_t index) const { return adjacency_[index]; }

    std::optional<std::size_t> index_of(std::string_view id) const;
    /// 0 when the pair is not connected.
    double weight(std::size_t u, std::size_t v) const;
    /// Sum of incident edge weights.
    double weighted_degree(std::size_t index) const;
    double total_weight() const;

    friend bool operator==(const Snapshot& a, const Snapshot& b) {
        return a.time_ == b.time_ && a.nodes_ == b.nodes_ && a.edges_ == b.edges_;
    }

private:
    Instant time_;
    std::vector<std::string> nodes_;
    std::vector<WeightedEdge> edges_;
    std::vector<std::vector<Neighbor>> adjacency_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Linear decay of an aging interaction that happened at `then`, observed at
/// `now`: `1 / max(gap / a, 1)` while `gap < b`, else 0. Gap in real days.
/// Requires `now >= then`.
double aging_coeff(Instant now, Instant then, const MechanismConfig& config);

/// Replays `events` (sorted ascending) up to and including `at`, applying each
/// relation's mechanism to the shared pair weight, then drops non-positive
/// edges and isolated nodes.
Snapshot build_snapshot(std::span<const InteractionEvent> events, const EntityRegistry& registry,
                        const MechanismConfig& config, Instant at);

/// Grid `start, start + period, ...` up to the last point `<= end`.
std::vector<Instant> snapshot_grid(Instant start, int period_days, Instant end);

/// One independent build per grid point. Parallel over grid points.
std::vector<Snapshot> snapshot_series(std::span<const InteractionEvent> events,
                                      const EntityRegistry& registry, const MechanismConfig& config,
                                      Instant start, int period_days, Instant end);

/// Serial reference for snapshot_series.
std::vector<Snapshot> snapshot_series_serial(std::span<const InteractionEvent> events,
                                             const EntityRegistry& registry,
                                             const MechanismConfig& config, Instant start,
                                             int period_days, Instant end);

/// `u,v,weight` edge list, weights to 9 significant digits.
void save_snapshot_csv(const Snapshot& snapshot, const std::filesystem::path& path);
Snapshot load_snapshot_csv(const std::filesystem::path& path, Instant time);

/// Writes `snapshot_NNNN.csv` per snapshot plus `manifest.json` into `dir`.
void save_snapshot_series(const std::vector<Snapshot>& series, const std::filesystem::path& dir);
/// Reads back a directory written by save_snapshot_series. Throws naming the
/// manifest when it is missing.
std::vector<Snapshot> load_snapshot_series(const std::filesystem::path& dir);

} // namespace svcevo
