#pragma once

// Stage runners behind the CLI. Each stage reads the previous stage's files
// from a run directory and writes its own, then records itself in
// `run_manifest.json`. Rerunning a stage on unchanged inputs rewrites
// byte-identical files.

#include "svcevo/community.hpp"
#include "svcevo/features.hpp"
#include "svcevo/forest.hpp"
#include "svcevo/synth.hpp"
#include "svcevo/tracker.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace svcevo {

/// The six predictable events in class-index order (forming excluded).
const std::vector<std::string>& predictable_class_names();
std::size_t class_index(EventType event);

/// Samples as a 45-column dataset over predictable_class_names().
Dataset samples_to_dataset(const std::vector<SequenceSample>& samples);

struct SnapshotStageOptions {
    std::filesystem::path nodes;
    std::filesystem::path events;
    std::filesystem::path config;
    std::optional<Instant> start;  ///< default: earliest event, floored to midnight
    std::optional<Instant> end;    ///< default: latest event
    int period_days = 30;
};

struct FeaturizeStageOptions {
    FeatureOptions features;
    bool delta = false;
    double test_fraction = 0.2;
    std::uint64_t seed = 0;
};

struct ReportStageOptions {
    std::string dependence_feature = "activity_mean";
    std::string dependence_class = "dissolving";
    std::size_t top_k = 5;
    /// Synthetic ground truth; when set the report includes label recovery.
    std::optional<std::filesystem::path> schedule;
};

nlohmann::json run_snapshot_stage(const std::filesystem::path& run, const SnapshotStageOptions& options);
nlohmann::json run_detect_stage(const std::filesystem::path& run, const DetectionOptions& options);
nlohmann::json run_track_stage(const std::filesystem::path& run, const TrackerConfig& options);
nlohmann::json run_featurize_stage(const std::filesystem::path& run, const FeaturizeStageOptions& options);
nlohmann::json run_train_stage(const std::filesystem::path& run, const ForestParams& options);
nlohmann::json run_evaluate_stage(const std::filesystem::path& run);
nlohmann::json run_explain_stage(const std::filesystem::path& run);
nlohmann::json run_report_stage(const std::filesystem::path& run, const ReportStageOptions& options);

/// Writes the synthetic inputs to `out` and returns the paths in a form the
/// snapshot stage accepts.
SnapshotStageOptions run_synth_stage(const std::filesystem::path& out, const EvolutionScript& script);

struct PipelineOptions {
    SnapshotStageOptions snapshot;
    DetectionOptions detect;
    TrackerConfig track;
    FeaturizeStageOptions featurize;
    ForestParams train;
    ReportStageOptions report;
};

/// All stages in order; returns the per-stage summaries.
nlohmann::json run_pipeline(const std::filesystem::path& run, const PipelineOptions& options);

} // namespace svcevo
