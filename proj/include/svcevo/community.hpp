#pragma once

#include "svcevo/snapshot.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace svcevo {

/// A detected community within one snapshot.
struct Community {
    std::string id;                      ///< `s{snapshot}_c{ordinal}`
    std::size_t snapshot_index = 0;
    std::vector<std::string> members;    ///< sorted
    std::map<std::string, double> social_position;  ///< PageRank within the community
    std::vector<std::string> key_nodes;  ///< sorted, subset of members

    std::size_t size() const { return members.size(); }
    bool contains(const std::string& id) const;
};

/// Retained communities of one snapshot plus the full (unfiltered) Louvain
/// assignment they were cut from.
struct Partition {
    std::size_t snapshot_index = 0;
    std::vector<Community> communities;
    double modularity = 0.0;              ///< of the unfiltered assignment
    std::vector<std::size_t> assignment;  ///< node index -> community label, dense from 0
};

struct DetectionOptions {
    std::uint64_t seed = 0;
    double resolution = 1.0;
    std::size_t min_community_size = 4;
};

/// Weighted modularity `(1/2m) Σ_uv [w_uv − γ k_u k_v / 2m] δ(c_u, c_v)`.
double modularity(const Snapshot& snapshot, std::span<const std::size_t> assignment, double resolution = 1.0);

/// Multi-level Louvain returning the dense assignment only.
std::vector<std::size_t> louvain_assignment(const Snapshot& snapshot, std::uint64_t seed, double resolution = 1.0);

/// Louvain detection, social positions, key nodes and the size filter.
/// Throws on an empty snapshot.
Partition louvain(const Snapshot& snapshot, std::size_t snapshot_index, const DetectionOptions& options = {});

/// Weighted PageRank on the subgraph induced by `members` (damping 0.85).
std::map<std::string, double> social_position(const std::vector<std::string>& members, const Snapshot& snapshot,
                                              double damping = 0.85);

/// Members whose score is not below any in-community neighbor's score.
std::vector<std::string> key_nodes(const std::vector<std::string>& members,
                                   const std::map<std::string, double>& scores, const Snapshot& snapshot);

/// One partition per snapshot, parallel over snapshots. Snapshot `i` is
/// detected with seed `options.seed + i`.
std::vector<Partition> detect_communities(const std::vector<Snapshot>& series, const DetectionOptions& options);
std::vector<Partition> detect_communities_serial(const std::vector<Snapshot>& series,
                                                 const DetectionOptions& options);

void save_partitions(const std::vector<Partition>& partitions, const std::filesystem::path& dir);
std::vector<Partition> load_partitions(const std::filesystem::path& dir);

} // namespace svcevo
