#include "svcevo/community.hpp"

#include "svcevo/error.hpp"
#include "text_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <unordered_map>

namespace svcevo {

bool Community::contains(const std::string& id) const {
    return std::binary_search(members.begin(), members.end(), id);
}

double modularity(const Snapshot& snapshot, std::span<const std::size_t> assignment, double resolution) {
    if (assignment.size() != snapshot.node_count()) throw Error("modularity: assignment does not cover all nodes");
    const double two_m = 2.0 * snapshot.total_weight();
    if (two_m <= 0.0) return 0.0;
    const std::size_t labels = assignment.empty() ? 0 : *std::max_element(assignment.begin(), assignment.end()) + 1;
    std::vector<double> internal(labels, 0.0), total(labels, 0.0);
    for (const auto& e : snapshot.edges()) {
        total[assignment[e.u]] += e.weight;
        total[assignment[e.v]] += e.weight;
        if (assignment[e.u] == assignment[e.v]) internal[assignment[e.u]] += 2.0 * e.weight;
    }
    double q = 0.0;
    for (std::size_t c = 0; c < labels; ++c) {
        const double share = total[c] / two_m;
        q += internal[c] / two_m - resolution * share * share;
    }
    return q;
}

namespace {

// Symmetric weighted graph with explicit self-loop mass; `self[i]` is A_ii in
// the ordered-pair convention, so aggregation preserves modularity.
struct LevelGraph {
    std::vector<std::vector<std::pair<std::size_t, double>>> adjacency;
    std::vector<double> self;
    std::vector<double> degree;
    double two_m = 0.0;

    std::size_t size() const { return adjacency.size(); }
};

LevelGraph level_from_snapshot(const Snapshot& snapshot) {
    LevelGraph g;
    const auto n = snapshot.node_count();
    g.adjacency.resize(n);
    g.self.assign(n, 0.0);
    g.degree.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (const auto& nb : snapshot.neighbors(i)) {
            g.adjacency[i].emplace_back(nb.node, nb.weight);
            g.degree[i] += nb.weight;
        }
    for (double k : g.degree) g.two_m += k;
    return g;
}

// Relabels to 0..k-1 in order of first appearance; returns k.
std::size_t densify(std::vector<std::size_t>& labels) {
    std::vector<std::size_t> map(labels.size(), SIZE_MAX);
    std::size_t next = 0;
    for (auto& label : labels) {
        if (map[label] == SIZE_MAX) map[label] = next++;
        label = map[label];
    }
    return next;
}

LevelGraph aggregate(const LevelGraph& g, const std::vector<std::size_t>& labels, std::size_t count) {
    LevelGraph coarse;
    coarse.adjacency.resize(count);
    coarse.self.assign(count, 0.0);
    coarse.degree.assign(count, 0.0);
    coarse.two_m = g.two_m;
    std::vector<std::map<std::size_t, double>> sparse(count);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto ci = labels[i];
        coarse.self[ci] += g.self[i];
        coarse.degree[ci] += g.degree[i];
        for (const auto& [j, w] : g.adjacency[i]) {
            const auto cj = labels[j];
            if (ci == cj) coarse.self[ci] += w;
            else sparse[ci][cj] += w;
        }
    }
    for (std::size_t c = 0; c < count; ++c)
        for (const auto& [d, w] : sparse[c]) coarse.adjacency[c].emplace_back(d, w);
    return coarse;
}

// Greedy single-node moves until a full pass changes nothing. Among equal
// gains the current community wins; a fresh singleton is an option too.
bool local_move(const LevelGraph& g, std::vector<std::size_t>& community, std::mt19937_64& rng,
                double resolution) {
    const std::size_t n = g.size();
    if (g.two_m <= 0.0) return false;
    std::vector<double> total(n, 0.0);
    std::vector<std::size_t> members(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        total[community[i]] += g.degree[i];
        ++members[community[i]];
    }
    std::vector<std::size_t> free_labels;
    for (std::size_t c = n; c-- > 0;)
        if (members[c] == 0) free_labels.push_back(c);

    const double eps = 1e-13 * g.two_m;
    std::vector<double> link(n, 0.0);
    std::vector<std::size_t> touched;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    bool any_move = false;
    bool moved = true;
    while (moved) {
        moved = false;
        std::shuffle(order.begin(), order.end(), rng);
        for (const std::size_t i : order) {
            const std::size_t current = community[i];
            const double k = g.degree[i];
            touched.clear();
            for (const auto& [j, w] : g.adjacency[i]) {
                const auto c = community[j];
                if (link[c] == 0.0) touched.push_back(c);
                link[c] += w;
            }
            total[current] -= k;
            --members[current];

            std::size_t best = current;
            double best_gain = link[current] - resolution * total[current] * k / g.two_m;
            for (const auto c : touched) {
                if (c == current) continue;
                const double gain = link[c] - resolution * total[c] * k / g.two_m;
                if (gain > best_gain + eps) {
                    best = c;
                    best_gain = gain;
                }
            }
            if (members[current] > 0 && 0.0 > best_gain + eps) {
                best = free_labels.back();
                free_labels.pop_back();
                best_gain = 0.0;
            }
            for (const auto c : touched) link[c] = 0.0;

            if (members[current] == 0 && best != current) free_labels.push_back(current);
            total[best] += k;
            ++members[best];
            community[i] = best;
            if (best != current) {
                moved = true;
                any_move = true;
            }
        }
    }
    return any_move;
}

} // namespace

std::vector<std::size_t> louvain_assignment(const Snapshot& snapshot, std::uint64_t seed, double resolution) {
    if (snapshot.empty()) throw Error("louvain: empty snapshot");
    std::mt19937_64 rng(seed);
    const LevelGraph base = level_from_snapshot(snapshot);
    std::vector<std::size_t> assignment(base.size());
    std::iota(assignment.begin(), assignment.end(), 0);
    while (true) {
        local_move(base, assignment, rng, resolution);
        auto count = densify(assignment);
        LevelGraph coarse = aggregate(base, assignment, count);
        bool improved = false;
        while (true) {
            std::vector<std::size_t> sub(coarse.size());
            std::iota(sub.begin(), sub.end(), 0);
            if (!local_move(coarse, sub, rng, resolution)) break;
            improved = true;
            count = densify(sub);
            for (auto& label : assignment) label = sub[label];
            coarse = aggregate(coarse, sub, count);
        }
        // A coarse move can leave single nodes misplaced, so refine again
        // at the node level whenever the upper levels changed anything.
        if (!improved) break;
    }
    densify(assignment);
    return assignment;
}

std::map<std::string, double> social_position(const std::vector<std::string>& members, const Snapshot& snapshot,
                                              double damping) {
    const std::size_t n = members.size();
    std::map<std::string, double> scores;
    if (n == 0) return scores;
    std::vector<std::size_t> nodes(n);
    std::unordered_map<std::size_t, std::size_t> local;
    for (std::size_t i = 0; i < n; ++i) {
        auto index = snapshot.index_of(members[i]);
        if (!index) throw Error("social_position: '" + members[i] + "' is not in the snapshot");
        nodes[i] = *index;
        local.emplace(*index, i);
    }
    std::vector<std::vector<std::pair<std::size_t, double>>> adjacency(n);
    std::vector<double> strength(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (const auto& nb : snapshot.neighbors(nodes[i]))
            if (auto it = local.find(nb.node); it != local.end()) {
                adjacency[i].emplace_back(it->second, nb.weight);
                strength[i] += nb.weight;
            }

    const double base = (1.0 - damping) / static_cast<double>(n);
    std::vector<double> rank(n, 1.0 / static_cast<double>(n)), next(n);
    for (int iteration = 0; iteration < 200; ++iteration) {
        double dangling = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (strength[i] == 0.0) dangling += rank[i];
        std::fill(next.begin(), next.end(), base + damping * dangling / static_cast<double>(n));
        for (std::size_t i = 0; i < n; ++i) {
            if (strength[i] == 0.0) continue;
            const double share = damping * rank[i] / strength[i];
            for (const auto& [j, w] : adjacency[i]) next[j] += share * w;
        }
        double change = 0.0;
        for (std::size_t i = 0; i < n; ++i) change += std::abs(next[i] - rank[i]);
        rank.swap(next);
        if (change < 1e-10) break;
    }
    const double sum = std::accumulate(rank.begin(), rank.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) scores.emplace(members[i], rank[i] / sum);
    return scores;
}

std::vector<std::string> key_nodes(const std::vector<std::string>& members,
                                   const std::map<std::string, double>& scores, const Snapshot& snapshot) {
    // Scores within this tolerance count as a tie.
    constexpr double tie = 1e-12;
    std::unordered_map<std::size_t, double> in_community;
    for (const auto& id : members) {
        auto index = snapshot.index_of(id);
        if (!index) throw Error("key_nodes: '" + id + "' is not in the snapshot");
        in_community.emplace(*index, scores.at(id));
    }
    std::vector<std::string> keys;
    for (const auto& id : members) {
        const auto index = *snapshot.index_of(id);
        const double own = in_community.at(index);
        bool dominant = true;
        for (const auto& nb : snapshot.neighbors(index)) {
            auto it = in_community.find(nb.node);
            if (it != in_community.end() && it->second > own + tie) {
                dominant = false;
                break;
            }
        }
        if (dominant) keys.push_back(id);
    }
    std::sort(keys.begin(), keys.end());
    return keys;
}

Partition louvain(const Snapshot& snapshot, std::size_t snapshot_index, const DetectionOptions& options) {
    Partition partition;
    partition.snapshot_index = snapshot_index;
    partition.assignment = louvain_assignment(snapshot, options.seed, options.resolution);
    partition.modularity = modularity(snapshot, partition.assignment, options.resolution);

    const std::size_t labels = *std::max_element(partition.assignment.begin(), partition.assignment.end()) + 1;
    std::vector<std::vector<std::string>> groups(labels);
    for (std::size_t i = 0; i < partition.assignment.size(); ++i)
        groups[partition.assignment[i]].push_back(snapshot.node(i));  // node order is sorted
    std::erase_if(groups, [&](const auto& g) { return g.size() < options.min_community_size; });
    std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) {
        if (a.size() != b.size()) return a.size() > b.size();
        return a.front() < b.front();
    });
    for (std::size_t ordinal = 0; ordinal < groups.size(); ++ordinal) {
        Community c;
        c.id = "s" + std::to_string(snapshot_index) + "_c" + std::to_string(ordinal);
        c.snapshot_index = snapshot_index;
        c.members = std::move(groups[ordinal]);
        c.social_position = social_position(c.members, snapshot);
        c.key_nodes = key_nodes(c.members, c.social_position, snapshot);
        partition.communities.push_back(std::move(c));
    }
    return partition;
}

namespace {

Partition detect_one(const Snapshot& snapshot, std::size_t index, const DetectionOptions& options) {
    if (snapshot.empty()) {
        Partition empty;
        empty.snapshot_index = index;
        return empty;
    }
    DetectionOptions local = options;
    local.seed = options.seed + index;
    return louvain(snapshot, index, local);
}

} // namespace

std::vector<Partition> detect_communities(const std::vector<Snapshot>& series, const DetectionOptions& options) {
    std::vector<Partition> partitions(series.size());
    const auto count = static_cast<std::ptrdiff_t>(series.size());
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        try {
            partitions[i] = detect_one(series[i], static_cast<std::size_t>(i), options);
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return partitions;
}

std::vector<Partition> detect_communities_serial(const std::vector<Snapshot>& series,
                                                 const DetectionOptions& options) {
    std::vector<Partition> partitions;
    for (std::size_t i = 0; i < series.size(); ++i) partitions.push_back(detect_one(series[i], i, options));
    return partitions;
}

namespace {

std::string partition_file_name(std::size_t index) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "communities_%04zu.json", index);
    return buffer;
}

} // namespace

void save_partitions(const std::vector<Partition>& partitions, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["format"] = "svcevo-communities";
    manifest["version"] = 1;
    manifest["partitions"] = nlohmann::json::array();
    for (const auto& p : partitions) {
        nlohmann::json list = nlohmann::json::array();
        for (const auto& c : p.communities) {
            nlohmann::json sp = nlohmann::json::object();
            for (const auto& [id, score] : c.social_position) sp[id] = score;
            list.push_back({{"community_id", c.id}, {"members", c.members}, {"key_nodes", c.key_nodes},
                            {"social_position", sp}});
        }
        const auto name = partition_file_name(p.snapshot_index);
        detail::open_output(dir / name) << list.dump(2) << '\n';
        manifest["partitions"].push_back({{"snapshot_index", p.snapshot_index},
                                          {"file", name},
                                          {"modularity", p.modularity},
                                          {"communities", p.communities.size()}});
    }
    detail::open_output(dir / "manifest.json") << manifest.dump(2) << '\n';
}

std::vector<Partition> load_partitions(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "manifest.json";
    if (!std::filesystem::exists(manifest_path))
        throw Error("missing community manifest " + manifest_path.string() + " (run the detect stage first)");
    std::vector<Partition> partitions;
    try {
        const auto manifest = nlohmann::json::parse(detail::read_file(manifest_path));
        for (const auto& entry : manifest.at("partitions")) {
            Partition p;
            p.snapshot_index = entry.at("snapshot_index").get<std::size_t>();
            p.modularity = entry.at("modularity").get<double>();
            const auto list = nlohmann::json::parse(detail::read_file(dir / entry.at("file").get<std::string>()));
            for (const auto& item : list) {
                Community c;
                c.id = item.at("community_id").get<std::string>();
                c.snapshot_index = p.snapshot_index;
                c.members = item.at("members").get<std::vector<std::string>>();
                c.key_nodes = item.at("key_nodes").get<std::vector<std::string>>();
                for (const auto& [id, score] : item.at("social_position").items())
                    c.social_position.emplace(id, score.get<double>());
                p.communities.push_back(std::move(c));
            }
            partitions.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(dir.string() + ": malformed community files: " + e.what());
    }
    return partitions;
}

} // namespace svcevo
