#include "svcevo/pipeline.hpp"

#include "svcevo/error.hpp"
#include "svcevo/explain.hpp"
#include "text_io.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <map>

namespace svcevo {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string>& predictable_class_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (std::size_t e = 1; e < kEventTypeCount; ++e) out.emplace_back(to_string(static_cast<EventType>(e)));
        return out;
    }();
    return names;
}

std::size_t class_index(EventType event) {
    if (event == EventType::forming) throw Error("forming is not a predictable event");
    return static_cast<std::size_t>(event) - 1;
}

Dataset samples_to_dataset(const std::vector<SequenceSample>& samples) {
    Dataset data{kSequenceWidth, predictable_class_names(), {}, {}};
    for (const auto& s : samples) data.add(s.x, class_index(s.label));
    return data;
}

namespace {

constexpr const char* kManifest = "run_manifest.json";

std::string hash_hex(const std::string& text) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%016zx", std::hash<std::string>{}(text));
    return buffer;
}

void record_stage(const fs::path& run, const std::string& stage, const std::vector<std::string>& inputs,
                  const std::vector<std::string>& outputs, const json& config, std::optional<std::uint64_t> seed) {
    json manifest{{"format", "svcevo-run"}, {"version", 1}, {"stages", json::object()}};
    const auto path = run / kManifest;
    if (fs::exists(path)) {
        try {
            manifest = json::parse(detail::read_file(path));
        } catch (const json::exception& e) {
            throw Error(path.string() + ": " + e.what());
        }
    }
    json entry{{"inputs", inputs}, {"outputs", outputs}, {"config", config}, {"config_hash", hash_hex(config.dump())}};
    entry["seed"] = seed ? json(*seed) : json(nullptr);
    manifest["stages"][stage] = std::move(entry);
    detail::open_output(path) << manifest.dump(2) << '\n';
}

void require(const fs::path& path, const std::string& stage) {
    if (!fs::exists(path)) throw Error("missing " + path.string() + " (run the " + stage + " stage first)");
}

void write_json(const fs::path& path, const json& doc) { detail::open_output(path) << doc.dump(2) << '\n'; }

json read_json(const fs::path& path) {
    try {
        return json::parse(detail::read_file(path));
    } catch (const json::exception& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

Split load_split(const fs::path& path) {
    require(path, "featurize");
    const auto doc = read_json(path);
    return {doc.at("train").get<std::vector<std::size_t>>(), doc.at("test").get<std::vector<std::size_t>>()};
}

void save_metrics(const std::vector<std::pair<std::string, Metrics>>& models, const fs::path& dir) {
    auto out = detail::open_output(dir / "metrics.csv");
    out << "model,class,precision,recall,f1,support,defined\n";
    for (const auto& [name, m] : models) {
        for (const auto& c : m.classes)
            out << name << ',' << c.name << ',' << detail::format_exact(c.precision) << ','
                << detail::format_exact(c.recall) << ',' << detail::format_exact(c.f1) << ',' << c.support << ','
                << (c.defined ? 1 : 0) << '\n';
        out << name << ",macro,,," << detail::format_exact(m.macro_f1) << ",,1\n";
        out << name << ",accuracy,,," << detail::format_exact(m.accuracy) << ",,1\n";
    }
    auto confusion = detail::open_output(dir / "confusion.csv");
    confusion << "model,truth,predicted,count\n";
    for (const auto& [name, m] : models)
        for (std::size_t t = 0; t < m.confusion.size(); ++t)
            for (std::size_t p = 0; p < m.confusion[t].size(); ++p)
                confusion << name << ',' << m.classes[t].name << ',' << m.classes[p].name << ',' << m.confusion[t][p]
                          << '\n';
}

} // namespace

json run_snapshot_stage(const fs::path& run, const SnapshotStageOptions& options) {
    for (const auto& [path, what] : {std::pair{options.nodes, "nodes file"}, std::pair{options.events, "events file"},
                                     std::pair{options.config, "mechanism config"}})
        if (path.empty() || !fs::exists(path)) throw Error(std::string("missing ") + what + " '" + path.string() + "'");
    const auto config = load_mechanism_config(options.config);
    const auto registry = load_entities(options.nodes);
    const auto events = load_events(options.events, registry);
    config.validate(events);
    if (options.period_days < 1) throw Error("--period-days must be >= 1");

    Instant start, end;
    if (options.start) {
        start = *options.start;
    } else {
        if (events.empty()) throw Error("empty event log: pass --start and --end");
        start = Instant{events.front().timestamp.seconds - ((events.front().timestamp.seconds % 86400) + 86400) % 86400};
    }
    if (options.end) {
        end = *options.end;
    } else {
        if (events.empty()) throw Error("empty event log: pass --start and --end");
        end = events.back().timestamp;
    }
    const auto series = snapshot_series(events, registry, config, start, options.period_days, end);

    fs::create_directories(run);
    fs::remove_all(run / "snapshots");
    save_snapshot_series(series, run / "snapshots");
    save_entities(registry, run / "entities.csv");

    json cfg{{"start", format_instant(start)},
             {"end", format_instant(end)},
             {"period_days", options.period_days},
             {"mechanisms", format_mechanism_config(config)}};
    record_stage(run, "snapshot", {options.nodes.string(), options.events.string(), options.config.string()},
                 {"entities.csv", "snapshots/manifest.json"}, cfg, std::nullopt);
    std::size_t nonempty = std::count_if(series.begin(), series.end(), [](const auto& s) { return !s.empty(); });
    return {{"stage", "snapshot"}, {"snapshots", series.size()}, {"nonempty", nonempty}, {"events", events.size()},
            {"entities", registry.size()}};
}

json run_detect_stage(const fs::path& run, const DetectionOptions& options) {
    if (options.min_community_size < 1) throw Error("--min-community-size must be >= 1");
    if (!(options.resolution > 0.0)) throw Error("--resolution must be > 0");
    const auto series = load_snapshot_series(run / "snapshots");
    const auto partitions = detect_communities(series, options);
    fs::remove_all(run / "communities");
    save_partitions(partitions, run / "communities");
    std::size_t total = 0;
    for (const auto& p : partitions) total += p.communities.size();
    json cfg{{"resolution", options.resolution}, {"min_community_size", options.min_community_size}};
    record_stage(run, "detect", {"snapshots/manifest.json"}, {"communities/manifest.json"}, cfg, options.seed);
    return {{"stage", "detect"}, {"snapshots", partitions.size()}, {"communities", total}};
}

json run_track_stage(const fs::path& run, const TrackerConfig& options) {
    options.validate();
    const auto partitions = load_partitions(run / "communities");
    const auto tracking = track(partitions, options);
    save_records_json(tracking.records, run / "tracking" / "events.json");
    save_event_distribution(tracking.records, partitions.size(), run / "tracking" / "event_distribution.csv");
    save_lineages_json(tracking, run / "tracking" / "lineages.json");
    json counts = json::object();
    for (const auto& r : tracking.records) counts[std::string(to_string(r.event))] = counts.value(std::string(to_string(r.event)), 0) + 1;
    record_stage(run, "track", {"communities/manifest.json"},
                 {"tracking/events.json", "tracking/event_distribution.csv", "tracking/lineages.json"},
                 json{{"alpha", options.alpha}, {"beta", options.beta}}, std::nullopt);
    return {{"stage", "track"}, {"records", tracking.records.size()}, {"lineages", tracking.lineages.size()},
            {"events", counts}};
}

json run_featurize_stage(const fs::path& run, const FeaturizeStageOptions& options) {
    require(run / "entities.csv", "snapshot");
    const auto registry = load_entities(run / "entities.csv");
    const auto series = load_snapshot_series(run / "snapshots");
    const auto partitions = load_partitions(run / "communities");
    const auto tracking = load_lineages_json(run / "tracking" / "lineages.json");
    const auto features = extract_all_features(series, partitions, registry, options.features);
    SequenceSummary summary;
    const auto samples = build_sequences(tracking.lineages, features, tracking.next_event, options.delta, &summary);

    std::vector<std::size_t> labels;
    for (const auto& s : samples) labels.push_back(class_index(s.label));
    const auto split = stratified_split(labels, options.test_fraction, options.seed);

    save_community_features_csv(features, run / "features" / "community_features.csv");
    save_samples_csv(samples, run / "features" / "samples.csv");
    write_json(run / "features" / "split.json",
               {{"test_fraction", options.test_fraction}, {"seed", options.seed}, {"train", split.train}, {"test", split.test}});
    json class_counts = json::object();
    for (const auto& name : predictable_class_names()) class_counts[name] = 0;
    for (const auto& s : samples) class_counts[std::string(to_string(s.label))] = class_counts[std::string(to_string(s.label))].get<int>() + 1;
    json result{{"stage", "featurize"},
                {"communities", features.size()},
                {"samples", summary.samples},
                {"short_lineages", summary.short_lineages},
                {"unlabeled_windows", summary.unlabeled_windows},
                {"train", split.train.size()},
                {"test", split.test.size()},
                {"class_counts", class_counts},
                {"delta", options.delta}};
    write_json(run / "features" / "summary.json", result);
    record_stage(run, "featurize", {"entities.csv", "snapshots/manifest.json", "communities/manifest.json", "tracking/lineages.json"},
                 {"features/community_features.csv", "features/samples.csv", "features/split.json", "features/summary.json"},
                 json{{"test_fraction", options.test_fraction}, {"delta", options.delta},
                      {"cohesion_cap", options.features.cohesion_cap}},
                 options.seed);
    return result;
}

json run_train_stage(const fs::path& run, const ForestParams& options) {
    const auto samples = load_samples_csv(run / "features" / "samples.csv");
    const auto split = load_split(run / "features" / "split.json");
    const auto data = samples_to_dataset(samples);
    const auto train = data.subset(split.train);
    const auto forest = train_forest(train, options);
    const auto tree = train_decision_tree(train, options);
    const auto majority = MajorityBaseline::fit(train);
    save_forest(forest, run / "model" / "forest.json");
    save_forest(tree, run / "model" / "decision_tree.json");
    write_json(run / "model" / "majority.json",
               {{"format", "svcevo-majority"}, {"version", 1}, {"class", majority.class_names[majority.label]}});
    json cfg{{"n_trees", options.n_trees},
             {"max_depth", options.max_depth},
             {"min_samples_leaf", options.min_samples_leaf},
             {"features_per_split", options.features_per_split},
             {"class_weighting", options.class_weighting == ClassWeighting::balanced ? "balanced" : "none"}};
    record_stage(run, "train", {"features/samples.csv", "features/split.json"},
                 {"model/forest.json", "model/decision_tree.json", "model/majority.json"}, cfg, options.seed);
    return {{"stage", "train"}, {"train_rows", train.rows()}, {"trees", forest.trees().size()},
            {"majority_class", majority.class_names[majority.label]}};
}

json run_evaluate_stage(const fs::path& run) {
    const auto samples = load_samples_csv(run / "features" / "samples.csv");
    const auto split = load_split(run / "features" / "split.json");
    const auto data = samples_to_dataset(samples);
    const auto test = data.subset(split.test);
    if (test.rows() == 0) throw Error("evaluate: the test split is empty");
    const auto forest = load_forest(run / "model" / "forest.json");
    const auto tree = load_forest(run / "model" / "decision_tree.json");
    require(run / "model" / "majority.json", "train");
    const auto majority_doc = read_json(run / "model" / "majority.json");
    MajorityBaseline majority{class_index(*parse_event_type(majority_doc.at("class").get<std::string>())),
                              predictable_class_names()};
    std::vector<std::pair<std::string, Metrics>> models{
        {"forest", evaluate(forest, test)}, {"decision_tree", evaluate(tree, test)}, {"majority", evaluate(majority, test)}};
    save_metrics(models, run / "metrics");
    json result{{"stage", "evaluate"}, {"test_rows", test.rows()}};
    for (const auto& [name, m] : models) result[name] = {{"macro_f1", m.macro_f1}, {"accuracy", m.accuracy}};
    write_json(run / "metrics" / "summary.json", result);
    record_stage(run, "evaluate", {"features/samples.csv", "features/split.json", "model/forest.json",
                                   "model/decision_tree.json", "model/majority.json"},
                 {"metrics/metrics.csv", "metrics/confusion.csv", "metrics/summary.json"}, json::object(), std::nullopt);
    return result;
}

json run_explain_stage(const fs::path& run) {
    const auto samples = load_samples_csv(run / "features" / "samples.csv");
    const auto split = load_split(run / "features" / "split.json");
    const auto forest = load_forest(run / "model" / "forest.json");
    const auto test = samples_to_dataset(samples).subset(split.test);
    const auto explanations = explain_rows(forest, test);
    json list = json::array();
    double worst = 0.0;
    for (std::size_t i = 0; i < explanations.size(); ++i) {
        const auto& sample = samples[split.test[i]];
        json classes = json::object();
        for (const auto& e : explanations[i]) {
            double sum = e.base_value;
            for (double v : e.phi) sum += v;
            worst = std::max(worst, std::abs(sum - e.prediction));
            classes[e.class_name] = {{"base_value", e.base_value}, {"prediction", e.prediction}, {"phi", e.phi}};
        }
        list.push_back({{"lineage_id", sample.lineage_id},
                        {"t", sample.t},
                        {"label", to_string(sample.label)},
                        {"classes", classes}});
    }
    write_json(run / "explain" / "explanations.json",
               {{"format", "svcevo-explanations"}, {"version", 1}, {"columns", sequence_column_names()}, {"rows", list}});
    record_stage(run, "explain", {"features/samples.csv", "features/split.json", "model/forest.json"},
                 {"explain/explanations.json"}, json::object(), std::nullopt);
    return {{"stage", "explain"}, {"rows", explanations.size()}, {"max_local_accuracy_error", worst}};
}

json run_report_stage(const fs::path& run, const ReportStageOptions& options) {
    feature_index(options.dependence_feature);
    auto dep_class = parse_event_type(options.dependence_class);
    if (!dep_class || *dep_class == EventType::forming)
        throw Error("unknown dependence class '" + options.dependence_class + "'");

    const auto series = load_snapshot_series(run / "snapshots");
    const auto partitions = load_partitions(run / "communities");
    const auto records = load_records_json(run / "tracking" / "events.json");
    const auto tracking = load_lineages_json(run / "tracking" / "lineages.json");
    const auto samples = load_samples_csv(run / "features" / "samples.csv");
    const auto split = load_split(run / "features" / "split.json");
    const auto forest = load_forest(run / "model" / "forest.json");
    const auto features = load_community_features_csv(run / "features" / "community_features.csv");
    const fs::path out = run / "reports";
    fs::remove_all(out);

    {
        auto csv = detail::open_output(out / "ecosystem_series.csv");
        csv << "snapshot,instant,nodes,edges,communities\n";
        for (std::size_t i = 0; i < series.size(); ++i)
            csv << i << ',' << format_instant(series[i].time()) << ',' << series[i].node_count() << ','
                << series[i].edge_count() << ',' << (i < partitions.size() ? partitions[i].communities.size() : 0) << '\n';
    }
    save_event_distribution(records, series.size(), out / "event_distribution.csv");

    std::vector<std::string> outputs{"reports/ecosystem_series.csv", "reports/event_distribution.csv"};
    const auto train = samples_to_dataset(samples).subset(split.train);
    if (train.rows() > 0) {
        const auto explanations = explain_rows(forest, train);
        save_heatmap_csv(importance_heatmap(explanations), out / "importance_heatmap.csv");
        const auto dep_name = "dependence_" + options.dependence_feature + "_" + options.dependence_class + ".csv";
        save_dependence_csv(dependence_data(explanations, train, options.dependence_feature, class_index(*dep_class)),
                            out / dep_name);
        outputs.push_back("reports/importance_heatmap.csv");
        outputs.push_back("reports/" + dep_name);
    }

    require(run / "features" / "summary.json", "featurize");
    const bool delta = read_json(run / "features" / "summary.json").value("delta", false);
    // Lineages that reach the newest snapshot with enough history.
    json decisions = json::object();
    const std::size_t last = series.empty() ? 0 : series.size() - 1;
    for (const auto& lineage : tracking.lineages) {
        if (lineage.communities.size() < kSequenceLength) continue;
        if (lineage.start_snapshot + lineage.communities.size() - 1 != last) continue;
        std::vector<FeatureVector> history;
        for (const auto& id : lineage.communities) history.push_back(features.at(id));
        decisions[lineage.communities.back()] = decision_report(forest, history, options.top_k, delta);
    }
    write_json(out / "decision_report.json", decisions);
    outputs.push_back("reports/decision_report.json");

    json result{{"stage", "report"}, {"decision_reports", decisions.size()}};
    if (options.schedule) {
        const auto truth = truth_from_json(read_json(*options.schedule));
        const auto rec = recovery(truth, partitions, tracking);
        result["recovery"] = {{"scheduled", rec.scheduled}, {"recovered", rec.recovered}, {"rate", rec.rate()}};
        write_json(out / "recovery.json", result["recovery"]);
        outputs.push_back("reports/recovery.json");
    }
    json cfg{{"dependence_feature", options.dependence_feature},
             {"dependence_class", options.dependence_class},
             {"top_k", options.top_k}};
    record_stage(run, "report",
                 {"snapshots/manifest.json", "communities/manifest.json", "tracking/events.json", "tracking/lineages.json",
                  "features/samples.csv", "features/community_features.csv", "model/forest.json"},
                 outputs, cfg, std::nullopt);
    return result;
}

SnapshotStageOptions run_synth_stage(const fs::path& out, const EvolutionScript& script) {
    const auto output = generate(script);
    save_synth(script, output, out);
    SnapshotStageOptions options;
    options.nodes = out / "nodes.csv";
    options.events = out / "events.csv";
    options.config = out / "mechanisms.cfg";
    options.start = output.start;
    options.end = output.end;
    options.period_days = script.period_days;
    return options;
}

json run_pipeline(const fs::path& run, const PipelineOptions& options) {
    json summary = json::array();
    summary.push_back(run_snapshot_stage(run, options.snapshot));
    summary.push_back(run_detect_stage(run, options.detect));
    summary.push_back(run_track_stage(run, options.track));
    summary.push_back(run_featurize_stage(run, options.featurize));
    summary.push_back(run_train_stage(run, options.train));
    summary.push_back(run_evaluate_stage(run));
    summary.push_back(run_explain_stage(run));
    summary.push_back(run_report_stage(run, options.report));
    return summary;
}

} // namespace svcevo
