#include "svcevo/features.hpp"

#include "svcevo/error.hpp"
#include "text_io.hpp"

#include <algorithm>
#include <deque>
#include <unordered_set>

namespace svcevo {

std::size_t feature_index(std::string_view name) {
    for (std::size_t i = 0; i < kFeatureCount; ++i)
        if (kFeatureNames[i] == name) return i;
    throw Error("unknown feature '" + std::string(name) + "'");
}

std::vector<std::string> sequence_column_names() {
    std::vector<std::string> names;
    for (auto step : kTimestepNames)
        for (auto feature : kFeatureNames) names.push_back(std::string(step) + "_" + std::string(feature));
    return names;
}

namespace {

std::vector<double> clustering_coefficients(const Snapshot& snapshot) {
    const auto n = snapshot.node_count();
    std::vector<double> cc(n, 0.0);
    std::vector<char> mark(n, 0);
    for (std::size_t x = 0; x < n; ++x) {
        const auto nbs = snapshot.neighbors(x);
        const auto d = nbs.size();
        if (d < 2) continue;
        for (const auto& nb : nbs) mark[nb.node] = 1;
        std::size_t links = 0;  // each neighbor-neighbor edge seen twice
        for (const auto& nb : nbs)
            for (const auto& nb2 : snapshot.neighbors(nb.node))
                if (mark[nb2.node]) ++links;
        for (const auto& nb : nbs) mark[nb.node] = 0;
        cc[x] = static_cast<double>(links) / static_cast<double>(d * (d - 1));
    }
    return cc;
}

double closeness_from(const Snapshot& snapshot, std::size_t source, std::vector<std::size_t>& dist,
                      std::vector<std::size_t>& queue) {
    const auto n = snapshot.node_count();
    if (n < 2) return 0.0;
    std::fill(dist.begin(), dist.end(), SIZE_MAX);
    queue.clear();
    dist[source] = 0;
    queue.push_back(source);
    std::size_t total = 0;
    for (std::size_t head = 0; head < queue.size(); ++head) {
        const auto u = queue[head];
        total += dist[u];
        for (const auto& nb : snapshot.neighbors(u))
            if (dist[nb.node] == SIZE_MAX) {
                dist[nb.node] = dist[u] + 1;
                queue.push_back(nb.node);
            }
    }
    const double reachable = static_cast<double>(queue.size() - 1);
    if (total == 0) return 0.0;
    return (reachable / static_cast<double>(total)) * (reachable / static_cast<double>(n - 1));
}

std::vector<double> weighted_degrees(const Snapshot& snapshot) {
    std::vector<double> wd(snapshot.node_count());
    for (std::size_t i = 0; i < wd.size(); ++i) wd[i] = snapshot.weighted_degree(i);
    return wd;
}

} // namespace

SnapshotMetrics snapshot_metrics(const Snapshot& snapshot) {
    SnapshotMetrics m;
    m.clustering = clustering_coefficients(snapshot);
    m.weighted_degree = weighted_degrees(snapshot);
    const auto n = static_cast<std::ptrdiff_t>(snapshot.node_count());
    m.closeness.assign(snapshot.node_count(), 0.0);
#pragma omp parallel
    {
        std::vector<std::size_t> dist(snapshot.node_count()), queue;
        queue.reserve(snapshot.node_count());
#pragma omp for schedule(dynamic, 16)
        for (std::ptrdiff_t x = 0; x < n; ++x) m.closeness[x] = closeness_from(snapshot, x, dist, queue);
    }
    return m;
}

SnapshotMetrics snapshot_metrics_serial(const Snapshot& snapshot) {
    SnapshotMetrics m;
    m.clustering = clustering_coefficients(snapshot);
    m.weighted_degree = weighted_degrees(snapshot);
    std::vector<std::size_t> dist(snapshot.node_count()), queue;
    for (std::size_t x = 0; x < snapshot.node_count(); ++x)
        m.closeness.push_back(closeness_from(snapshot, x, dist, queue));
    return m;
}

FeatureVector extract_features(const Community& community, const Snapshot& snapshot, const SnapshotMetrics& metrics,
                               const EntityRegistry& registry, const FeatureOptions& options) {
    const auto n = community.members.size();
    if (n < 3) throw Error("extract_features: community '" + community.id + "' has fewer than 3 members");
    std::vector<std::size_t> nodes;
    std::unordered_set<std::size_t> inside;
    for (const auto& id : community.members) {
        auto index = snapshot.index_of(id);
        if (!index) throw Error("extract_features: '" + id + "' is not in the snapshot");
        nodes.push_back(*index);
        inside.insert(*index);
    }

    std::size_t internal_edges = 0;
    double internal_weight = 0.0, external_weight = 0.0, activity_max = 0.0;
    double clustering = 0.0, closeness = 0.0, degree = 0.0, max_degree = 0.0;
    std::size_t services = 0;
    for (const auto x : nodes) {
        for (const auto& nb : snapshot.neighbors(x)) {
            if (!inside.contains(nb.node)) {
                external_weight += nb.weight;
            } else if (x < nb.node) {
                ++internal_edges;
                internal_weight += nb.weight;
                activity_max = std::max(activity_max, nb.weight);
            }
        }
        clustering += metrics.clustering[x];
        closeness += metrics.closeness[x];
        degree += metrics.weighted_degree[x];
        max_degree = std::max(max_degree, metrics.weighted_degree[x]);
        if (registry.at(snapshot.node(x)).kind == EntityKind::service) ++services;
    }

    const double size = static_cast<double>(n);
    const double total_nodes = static_cast<double>(snapshot.node_count());
    double cohesion = 0.0;
    if (external_weight > 0.0) {
        const double inner = 2.0 * internal_weight / ((size - 1.0) * size);
        const double outer = external_weight / (total_nodes * (total_nodes - size));
        cohesion = inner / outer;
    } else if (internal_weight > 0.0) {
        cohesion = options.cohesion_cap;
    }

    double key_degree = 0.0, key_closeness = 0.0;
    for (const auto& id : community.key_nodes) {
        const auto index = snapshot.index_of(id);
        if (!index || !inside.contains(*index)) throw Error("extract_features: key node '" + id + "' is not a member");
        key_degree += metrics.weighted_degree[*index];
        key_closeness += metrics.closeness[*index];
    }
    const double keys = static_cast<double>(community.key_nodes.size());

    FeatureVector f{};
    f[0] = size;
    f[1] = 2.0 * static_cast<double>(internal_edges) / (size * (size - 1.0));
    f[2] = clustering / size;
    f[3] = closeness / size;
    f[4] = degree / size;
    f[5] = max_degree / ((size - 1.0) * (size - 2.0));
    f[6] = cohesion;
    f[7] = keys;
    f[8] = activity_max;
    f[9] = internal_weight;
    f[10] = internal_edges > 0 ? internal_weight / static_cast<double>(internal_edges) : 0.0;
    f[11] = static_cast<double>(services) / size;
    f[12] = 1.0 - f[11];
    f[13] = keys > 0 ? key_degree / keys : 0.0;
    f[14] = keys > 0 ? key_closeness / keys : 0.0;
    return f;
}

std::map<std::string, FeatureVector> extract_all_features(const std::vector<Snapshot>& series,
                                                          const std::vector<Partition>& partitions,
                                                          const EntityRegistry& registry,
                                                          const FeatureOptions& options) {
    if (series.size() != partitions.size()) throw Error("extract_all_features: snapshot and partition counts differ");
    std::map<std::string, FeatureVector> features;
    for (std::size_t t = 0; t < series.size(); ++t) {
        if (partitions[t].communities.empty()) continue;
        const auto metrics = snapshot_metrics(series[t]);
        for (const auto& c : partitions[t].communities)
            features.emplace(c.id, extract_features(c, series[t], metrics, registry, options));
    }
    return features;
}

std::vector<SequenceSample> build_sequences(const std::vector<Lineage>& lineages,
                                            const std::map<std::string, FeatureVector>& features,
                                            const std::map<std::string, EventType>& next_event, bool delta,
                                            SequenceSummary* summary) {
    SequenceSummary local;
    std::vector<SequenceSample> samples;
    auto lookup = [&](const std::string& id) -> const FeatureVector& {
        auto it = features.find(id);
        if (it == features.end()) throw Error("build_sequences: no features for community '" + id + "'");
        return it->second;
    };
    for (const auto& lineage : lineages) {
        if (lineage.communities.size() < kSequenceLength) {
            ++local.short_lineages;
            continue;
        }
        for (std::size_t k = kSequenceLength - 1; k < lineage.communities.size(); ++k) {
            auto event = next_event.find(lineage.communities[k]);
            if (event == next_event.end() || event->second == EventType::forming) {
                ++local.unlabeled_windows;
                continue;
            }
            SequenceSample s;
            s.lineage_id = lineage.id;
            s.t = lineage.start_snapshot + k;
            s.label = event->second;
            const FeatureVector* steps[kSequenceLength];
            for (std::size_t j = 0; j < kSequenceLength; ++j)
                steps[j] = &lookup(lineage.communities[k + 1 + j - kSequenceLength]);
            for (std::size_t j = 0; j < kSequenceLength; ++j)
                for (std::size_t f = 0; f < kFeatureCount; ++f) {
                    double value = (*steps[j])[f];
                    if (delta && j > 0) value -= (*steps[j - 1])[f];
                    s.x[j * kFeatureCount + f] = value;
                }
            samples.push_back(s);
        }
    }
    local.samples = samples.size();
    if (summary) *summary = local;
    return samples;
}

void save_samples_csv(const std::vector<SequenceSample>& samples, const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    out << "lineage_id,t,label";
    for (const auto& name : sequence_column_names()) out << ',' << name;
    out << '\n';
    for (const auto& s : samples) {
        out << s.lineage_id << ',' << s.t << ',' << to_string(s.label);
        for (double v : s.x) out << ',' << detail::format_exact(v);
        out << '\n';
    }
}

std::vector<SequenceSample> load_samples_csv(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw Error("missing samples file " + path.string() + " (run the featurize stage first)");
    auto in = detail::open_input(path);
    const std::string file = path.string();
    std::vector<SequenceSample> samples;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        auto fields = detail::split_csv(line);
        if (!header_seen) {
            auto expected = sequence_column_names();
            expected.insert(expected.begin(), {"lineage_id", "t", "label"});
            if (fields != expected) throw ParseError(file, line_no, "unexpected samples header");
            header_seen = true;
            continue;
        }
        if (fields.size() != kSequenceWidth + 3) throw ParseError(file, line_no, "expected 48 fields");
        SequenceSample s;
        s.lineage_id = fields[0];
        s.t = static_cast<std::size_t>(detail::parse_real(fields[1], file, line_no));
        auto label = parse_event_type(fields[2]);
        if (!label || *label == EventType::forming) throw ParseError(file, line_no, "bad label '" + fields[2] + "'");
        s.label = *label;
        for (std::size_t i = 0; i < kSequenceWidth; ++i) s.x[i] = detail::parse_real(fields[i + 3], file, line_no);
        samples.push_back(std::move(s));
    }
    if (!header_seen) throw ParseError(file, line_no, "missing header");
    return samples;
}

void save_community_features_csv(const std::map<std::string, FeatureVector>& features,
                                 const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    out << "community_id";
    for (auto name : kFeatureNames) out << ',' << name;
    out << '\n';
    for (const auto& [id, f] : features) {
        out << id;
        for (double v : f) out << ',' << detail::format_exact(v);
        out << '\n';
    }
}

std::map<std::string, FeatureVector> load_community_features_csv(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    const std::string file = path.string();
    std::map<std::string, FeatureVector> features;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 || detail::trim(line).empty()) continue;
        auto fields = detail::split_csv(line);
        if (fields.size() != kFeatureCount + 1) throw ParseError(file, line_no, "expected 16 fields");
        FeatureVector f{};
        for (std::size_t i = 0; i < kFeatureCount; ++i) f[i] = detail::parse_real(fields[i + 1], file, line_no);
        features.emplace(fields[0], f);
    }
    return features;
}

} // namespace svcevo
