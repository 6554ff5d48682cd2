// svcevo: staged service-community evolution pipeline.
//
//   svcevo synth --out data/
//   svcevo pipeline --run-dir run/ --nodes data/nodes.csv --events data/events.csv --config data/mechanisms.cfg
//   svcevo pipeline --run-dir run/ --synth

#include "svcevo/error.hpp"
#include "svcevo/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <omp.h>

#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace svcevo;

namespace {

struct Settings {
    fs::path run_dir = "run";
    fs::path nodes, events, config;
    std::string start, end;
    int period_days = 30;

    std::uint64_t seed = 7;
    double resolution = 1.0;
    std::size_t min_community_size = 4;

    double alpha = 0.5;
    double beta = 0.5;

    bool delta = false;
    double test_fraction = 0.2;
    double cohesion_cap = 1e6;

    std::size_t trees = 100;
    std::size_t max_depth = 0;
    std::size_t min_samples_leaf = 2;
    std::size_t features_per_split = 6;
    std::string class_weighting = "balanced";

    std::string dependence_feature = "activity_mean";
    std::string dependence_class = "dissolving";
    std::size_t top_k = 5;
    fs::path schedule;

    int threads = 0;
};

void add_settings(CLI::App& app, Settings& s) {
    app.add_option("--run-dir", s.run_dir, "Run directory holding all stage outputs")->capture_default_str();
    app.add_option("--threads", s.threads, "Cap on worker threads (0 = OpenMP default)")->check(CLI::NonNegativeNumber);

    auto* snap = app.add_option_group("snapshot");
    snap->add_option("--nodes", s.nodes, "Nodes CSV (id,type)");
    snap->add_option("--events", s.events, "Events CSV (source,target,relation,timestamp)");
    snap->add_option("--config", s.config, "Mechanism config file");
    snap->add_option("--start", s.start, "First snapshot instant (default: day of the first event)");
    snap->add_option("--end", s.end, "Last admissible snapshot instant (default: last event)");
    snap->add_option("--period-days", s.period_days, "Days between snapshots")->capture_default_str();

    auto* det = app.add_option_group("detect");
    det->add_option("--seed", s.seed, "Seed for Louvain visit order, the train/test split and the forest")
        ->capture_default_str();
    det->add_option("--resolution", s.resolution, "Modularity resolution")->capture_default_str();
    det->add_option("--min-community-size", s.min_community_size, "Smallest retained community")->capture_default_str();

    auto* trk = app.add_option_group("track");
    trk->add_option("--alpha", s.alpha, "Forward inclusion threshold")->capture_default_str();
    trk->add_option("--beta", s.beta, "Backward inclusion threshold")->capture_default_str();

    auto* feat = app.add_option_group("featurize");
    feat->add_flag("--delta-features", s.delta, "Encode the tm1 and t0 blocks as differences");
    feat->add_option("--test-fraction", s.test_fraction, "Stratified test share")->capture_default_str();
    feat->add_option("--cohesion-cap", s.cohesion_cap, "Cohesion of a community with no outgoing weight")
        ->capture_default_str();

    auto* train = app.add_option_group("train");
    train->add_option("--trees", s.trees, "Trees in the forest")->capture_default_str();
    train->add_option("--max-depth", s.max_depth, "Maximum tree depth (0 = unlimited)")->capture_default_str();
    train->add_option("--min-samples-leaf", s.min_samples_leaf, "Minimum rows per leaf")->capture_default_str();
    train->add_option("--features-per-split", s.features_per_split, "Candidate features per split")
        ->capture_default_str();
    train->add_option("--class-weighting", s.class_weighting, "balanced or none")
        ->check(CLI::IsMember({"balanced", "none"}))
        ->capture_default_str();

    auto* rep = app.add_option_group("report");
    rep->add_option("--dependence-feature", s.dependence_feature, "Feature of the dependence table")
        ->capture_default_str();
    rep->add_option("--dependence-class", s.dependence_class, "Event class of the dependence table")
        ->capture_default_str();
    rep->add_option("--top-k", s.top_k, "Contributors per class in the decision report")->capture_default_str();
    rep->add_option("--schedule", s.schedule, "Synthetic ground-truth schedule.json for label recovery");
}

std::optional<Instant> optional_instant(const std::string& text, const char* flag) {
    if (text.empty()) return std::nullopt;
    try {
        return parse_instant(text);
    } catch (const std::exception&) {
        throw Error(std::string(flag) + ": invalid instant '" + text + "'");
    }
}

PipelineOptions to_options(const Settings& s) {
    PipelineOptions o;
    o.snapshot.nodes = s.nodes;
    o.snapshot.events = s.events;
    o.snapshot.config = s.config;
    o.snapshot.start = optional_instant(s.start, "--start");
    o.snapshot.end = optional_instant(s.end, "--end");
    o.snapshot.period_days = s.period_days;
    o.detect = {s.seed, s.resolution, s.min_community_size};
    o.track = {s.alpha, s.beta};
    o.featurize.features.cohesion_cap = s.cohesion_cap;
    o.featurize.delta = s.delta;
    o.featurize.test_fraction = s.test_fraction;
    o.featurize.seed = s.seed;
    o.train.n_trees = s.trees;
    o.train.max_depth = s.max_depth;
    o.train.min_samples_leaf = s.min_samples_leaf;
    o.train.features_per_split = s.features_per_split;
    o.train.seed = s.seed;
    o.train.class_weighting = s.class_weighting == "none" ? ClassWeighting::none : ClassWeighting::balanced;
    o.report.dependence_feature = s.dependence_feature;
    o.report.dependence_class = s.dependence_class;
    o.report.top_k = s.top_k;
    if (!s.schedule.empty()) o.report.schedule = s.schedule;
    return o;
}

// Everything that can be checked without touching the data.
void validate(const PipelineOptions& o) {
    if (o.snapshot.period_days < 1) throw Error("--period-days must be >= 1");
    if (o.snapshot.start && o.snapshot.end && *o.snapshot.end < *o.snapshot.start)
        throw Error("--end precedes --start");
    if (!(o.detect.resolution > 0.0)) throw Error("--resolution must be > 0");
    if (o.detect.min_community_size < 1) throw Error("--min-community-size must be >= 1");
    o.track.validate();
    if (!(o.featurize.test_fraction > 0.0 && o.featurize.test_fraction < 1.0))
        throw Error("--test-fraction must lie in (0, 1)");
    if (!(o.featurize.features.cohesion_cap > 0.0)) throw Error("--cohesion-cap must be > 0");
    if (o.train.n_trees < 1) throw Error("--trees must be >= 1");
    if (o.train.min_samples_leaf < 1) throw Error("--min-samples-leaf must be >= 1");
    if (o.train.features_per_split < 1) throw Error("--features-per-split must be >= 1");
    feature_index(o.report.dependence_feature);
    const auto cls = parse_event_type(o.report.dependence_class);
    if (!cls || *cls == EventType::forming)
        throw Error("--dependence-class: unknown predictable event '" + o.report.dependence_class + "'");
    if (o.report.top_k < 1) throw Error("--top-k must be >= 1");
    if (o.report.schedule && !fs::exists(*o.report.schedule))
        throw Error("missing schedule file '" + o.report.schedule->string() + "'");
}

EvolutionScript load_script(const fs::path& path, std::uint64_t seed, bool seed_given) {
    EvolutionScript script = default_script(seed);
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw Error("missing script file '" + path.string() + "'");
        std::stringstream buffer;
        buffer << in.rdbuf();
        try {
            script = script_from_json(nlohmann::json::parse(buffer.str()));
        } catch (const nlohmann::json::exception& e) {
            throw Error(path.string() + ": " + e.what());
        }
        if (seed_given) script.seed = seed;
    }
    script.validate();
    return script;
}

void print(const nlohmann::json& summary) { std::cout << summary.dump(2) << '\n'; }

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Service community evolution: snapshots, communities, tracking, prediction and explanation"};
    app.require_subcommand(1);

    Settings s;
    fs::path synth_out = "synth";
    fs::path script_path;
    bool use_synth = false;

    const std::vector<std::pair<std::string, std::string>> stages{
        {"snapshot", "Build weighted snapshots from the event log"},
        {"detect", "Detect communities in every snapshot"},
        {"track", "Classify evolution events and link lineages"},
        {"featurize", "Extract community features and sequence samples"},
        {"train", "Train the forest and the baselines"},
        {"evaluate", "Score models on the held-out split"},
        {"explain", "Shapley attributions for the held-out rows"},
        {"report", "Emit plot-ready report data"},
        {"pipeline", "Run every stage in order"},
    };
    std::map<std::string, CLI::App*> commands;
    for (const auto& [name, help] : stages) {
        auto* sub = app.add_subcommand(name, help);
        add_settings(*sub, s);
        commands[name] = sub;
    }
    auto* pipeline = commands["pipeline"];
    pipeline->add_flag("--synth", use_synth, "Generate the synthetic benchmark into <run-dir>/synth and use it");
    pipeline->add_option("--script", script_path, "Synthetic evolution script (JSON); implies --synth");

    auto* synth = app.add_subcommand("synth", "Generate a synthetic ecosystem with planted evolution");
    synth->add_option("--out", synth_out, "Output directory")->capture_default_str();
    synth->add_option("--script", script_path, "Evolution script (JSON); default: built-in benchmark script");
    auto* synth_seed = synth->add_option("--seed", s.seed, "Generator seed")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (s.threads > 0) omp_set_num_threads(s.threads);

        if (synth->parsed()) {
            const auto script = load_script(script_path, s.seed, synth_seed->count() > 0);
            const auto paths = run_synth_stage(synth_out, script);
            print({{"stage", "synth"},
                   {"nodes", paths.nodes.string()},
                   {"events", paths.events.string()},
                   {"config", paths.config.string()},
                   {"schedule", (synth_out / "schedule.json").string()},
                   {"start", format_instant(*paths.start)},
                   {"end", format_instant(*paths.end)}});
            return 0;
        }

        auto options = to_options(s);
        validate(options);
        const fs::path& run = s.run_dir;

        if (pipeline->parsed()) {
            if (use_synth || !script_path.empty()) {
                const auto script = load_script(script_path, s.seed, false);
                const auto paths = run_synth_stage(run / "synth", script);
                options.snapshot.nodes = paths.nodes;
                options.snapshot.events = paths.events;
                options.snapshot.config = paths.config;
                if (!options.snapshot.start) options.snapshot.start = paths.start;
                if (!options.snapshot.end) options.snapshot.end = paths.end;
                if (!options.report.schedule) options.report.schedule = run / "synth" / "schedule.json";
            }
            print(run_pipeline(run, options));
        } else if (commands["snapshot"]->parsed()) {
            print(run_snapshot_stage(run, options.snapshot));
        } else if (commands["detect"]->parsed()) {
            print(run_detect_stage(run, options.detect));
        } else if (commands["track"]->parsed()) {
            print(run_track_stage(run, options.track));
        } else if (commands["featurize"]->parsed()) {
            print(run_featurize_stage(run, options.featurize));
        } else if (commands["train"]->parsed()) {
            print(run_train_stage(run, options.train));
        } else if (commands["evaluate"]->parsed()) {
            print(run_evaluate_stage(run));
        } else if (commands["explain"]->parsed()) {
            print(run_explain_stage(run));
        } else if (commands["report"]->parsed()) {
            print(run_report_stage(run, options.report));
        }
    } catch (const std::exception& e) {
        std::cerr << "svcevo: error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
