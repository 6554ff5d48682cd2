#pragma once

#include "svcevo/community.hpp"
#include "svcevo/entity.hpp"
#include "svcevo/tracker.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace svcevo {

inline constexpr std::size_t kFeatureCount = 15;
inline constexpr std::size_t kSequenceLength = 3;
inline constexpr std::size_t kSequenceWidth = kFeatureCount * kSequenceLength;

/// Feature names in vector order.
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "size",         "density",      "clustering",    "avg_closeness", "degree",
    "leadership",   "cohesion",     "n_key_nodes",   "activity_max",  "activity_sum",
    "activity_mean", "pct_service", "pct_stakeholder", "k_degree",    "k_avg_closeness"};

/// Timestep prefixes of the sequence columns, oldest first.
inline constexpr std::array<std::string_view, kSequenceLength> kTimestepNames = {"tm2", "tm1", "t0"};

using FeatureVector = std::array<double, kFeatureCount>;

/// Index of a feature name; throws on an unknown name.
std::size_t feature_index(std::string_view name);
/// The 45 column names `{tm2|tm1|t0}_{feature}`.
std::vector<std::string> sequence_column_names();

/// Per-node quantities of a whole snapshot shared by all its communities.
struct SnapshotMetrics {
    std::vector<double> clustering;  ///< unweighted local clustering coefficient
    std::vector<double> closeness;   ///< hop closeness, Wasserman–Faust scaled
    std::vector<double> weighted_degree;
};

/// Closeness is computed by one BFS per node, in parallel.
SnapshotMetrics snapshot_metrics(const Snapshot& snapshot);
SnapshotMetrics snapshot_metrics_serial(const Snapshot& snapshot);

struct FeatureOptions {
    /// Cohesion when the community has no outgoing weight but positive
    /// internal weight.
    double cohesion_cap = 1e6;
};

FeatureVector extract_features(const Community& community, const Snapshot& snapshot, const SnapshotMetrics& metrics,
                               const EntityRegistry& registry, const FeatureOptions& options = {});

/// Features of every retained community, keyed by community id.
std::map<std::string, FeatureVector> extract_all_features(const std::vector<Snapshot>& series,
                                                          const std::vector<Partition>& partitions,
                                                          const EntityRegistry& registry,
                                                          const FeatureOptions& options = {});

/// One training unit: three consecutive feature vectors of a lineage and the
/// event its newest community undergoes next.
struct SequenceSample {
    std::string lineage_id;
    std::size_t t = 0;  ///< snapshot of the newest vector
    EventType label = EventType::continuing;
    std::array<double, kSequenceWidth> x{};
};

struct SequenceSummary {
    std::size_t samples = 0;
    std::size_t short_lineages = 0;    ///< lineages with fewer than 3 communities
    std::size_t unlabeled_windows = 0; ///< full windows whose newest community has no next event
};

/// Emits every 3-window of every lineage whose newest community has a next
/// event. With `delta` the tm1 and t0 blocks hold differences to the previous
/// step instead of raw values.
std::vector<SequenceSample> build_sequences(const std::vector<Lineage>& lineages,
                                            const std::map<std::string, FeatureVector>& features,
                                            const std::map<std::string, EventType>& next_event,
                                            bool delta = false, SequenceSummary* summary = nullptr);

/// `lineage_id,t,label,` + 45 feature columns.
void save_samples_csv(const std::vector<SequenceSample>& samples, const std::filesystem::path& path);
std::vector<SequenceSample> load_samples_csv(const std::filesystem::path& path);

/// `community_id,` + 15 feature columns.
void save_community_features_csv(const std::map<std::string, FeatureVector>& features,
                                 const std::filesystem::path& path);
std::map<std::string, FeatureVector> load_community_features_csv(const std::filesystem::path& path);

} // namespace svcevo
