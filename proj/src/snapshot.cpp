#include "svcevo/snapshot.hpp"

#include "svcevo/error.hpp"
#include "text_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cassert>
#include <cstdio>
#include <map>
#include <numeric>

namespace svcevo {

Snapshot::Snapshot(Instant time, std::vector<std::string> nodes, std::vector<WeightedEdge> edges)
    : time_(time), nodes_(std::move(nodes)) {
    std::vector<std::size_t> order(nodes_.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return nodes_[a] < nodes_[b]; });
    std::vector<std::size_t> remap(nodes_.size());
    std::vector<std::string> sorted(nodes_.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        remap[order[i]] = i;
        sorted[i] = std::move(nodes_[order[i]]);
    }
    nodes_ = std::move(sorted);
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (!index_.emplace(nodes_[i], i).second) throw Error("duplicate snapshot node '" + nodes_[i] + "'");

    edges_.reserve(edges.size());
    for (const auto& e : edges) {
        if (e.u >= remap.size() || e.v >= remap.size()) throw Error("edge endpoint out of range");
        std::size_t u = remap[e.u], v = remap[e.v];
        if (u == v) throw Error("self-loop on '" + nodes_[u] + "'");
        if (!(e.weight > 0.0)) throw Error("non-positive edge weight");
        if (u > v) std::swap(u, v);
        edges_.push_back({u, v, e.weight});
    }
    std::sort(edges_.begin(), edges_.end(), [](const auto& a, const auto& b) {
        return std::tie(a.u, a.v) < std::tie(b.u, b.v);
    });
    for (std::size_t i = 1; i < edges_.size(); ++i)
        if (edges_[i].u == edges_[i - 1].u && edges_[i].v == edges_[i - 1].v)
            throw Error("duplicate edge '" + nodes_[edges_[i].u] + "'-'" + nodes_[edges_[i].v] + "'");

    adjacency_.assign(nodes_.size(), {});
    for (const auto& e : edges_) {
        adjacency_[e.u].push_back({e.v, e.weight});
        adjacency_[e.v].push_back({e.u, e.weight});
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (adjacency_[i].empty()) throw Error("isolated snapshot node '" + nodes_[i] + "'");
}

Snapshot Snapshot::from_edges(Instant time,
                              const std::vector<std::pair<std::pair<std::string, std::string>, double>>& edges) {
    std::map<std::string, std::size_t> ids;
    for (const auto& [pair, w] : edges) {
        ids.emplace(pair.first, 0);
        ids.emplace(pair.second, 0);
    }
    std::vector<std::string> nodes;
    nodes.reserve(ids.size());
    for (auto& [id, index] : ids) {
        index = nodes.size();
        nodes.push_back(id);
    }
    std::vector<WeightedEdge> list;
    list.reserve(edges.size());
    for (const auto& [pair, w] : edges) list.push_back({ids[pair.first], ids[pair.second], w});
    return Snapshot(time, std::move(nodes), std::move(list));
}

std::optional<std::size_t> Snapshot::index_of(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

double Snapshot::weight(std::size_t u, std::size_t v) const {
    for (const auto& n : adjacency_[u])
        if (n.node == v) return n.weight;
    return 0.0;
}

double Snapshot::weighted_degree(std::size_t index) const {
    double sum = 0.0;
    for (const auto& n : adjacency_[index]) sum += n.weight;
    return sum;
}

double Snapshot::total_weight() const {
    double sum = 0.0;
    for (const auto& e : edges_) sum += e.weight;
    return sum;
}

double aging_coeff(Instant now, Instant then, const MechanismConfig& config) {
    assert(now >= then);
    if (now < then) throw Error("aging_coeff: observation instant precedes the event");
    const double gap = days_between(then, now);
    if (gap >= static_cast<double>(config.aging_max_days)) return 0.0;
    return 1.0 / std::max(gap / static_cast<double>(config.aging_period_days), 1.0);
}

Snapshot build_snapshot(std::span<const InteractionEvent> events, const EntityRegistry& registry,
                        const MechanismConfig& config, Instant at) {
    config.validate();
    for (std::size_t i = 0; i < events.size(); ++i) {
        config.rule_for(events[i].relation);
        if (i > 0 && events[i].timestamp < events[i - 1].timestamp)
            throw Error("build_snapshot: events not sorted by timestamp");
    }

    using Pair = std::pair<std::string, std::string>;
    std::map<Pair, double> weights;
    for (const auto& e : events) {
        if (e.timestamp > at) break;
        const RelationRule& rule = config.rule_for(e.relation);
        if (e.source == e.target) throw Error("self-interaction on '" + e.source + "'");
        if (!registry.contains(e.source)) throw Error("unknown entity id '" + e.source + "'");
        if (!registry.contains(e.target)) throw Error("unknown entity id '" + e.target + "'");
        Pair key = e.source < e.target ? Pair{e.source, e.target} : Pair{e.target, e.source};
        double& w = weights[key];
        switch (rule.mechanism) {
        case Mechanism::stability: w += rule.impact; break;
        case Mechanism::mutation: w = rule.impact; break;
        case Mechanism::aging: w += rule.impact * aging_coeff(at, e.timestamp, config); break;
        }
    }

    std::vector<std::pair<Pair, double>> kept;
    for (const auto& [pair, w] : weights)
        if (w > 0.0) kept.emplace_back(pair, w);
    return Snapshot::from_edges(at, kept);
}

std::vector<Instant> snapshot_grid(Instant start, int period_days, Instant end) {
    if (period_days < 1) throw Error("period_days must be >= 1");
    if (!(start < end)) throw Error("snapshot start must precede end");
    std::vector<Instant> grid;
    for (Instant t = start; t <= end; t = add_days(t, period_days)) grid.push_back(t);
    return grid;
}

std::vector<Snapshot> snapshot_series(std::span<const InteractionEvent> events, const EntityRegistry& registry,
                                      const MechanismConfig& config, Instant start, int period_days, Instant end) {
    const auto grid = snapshot_grid(start, period_days, end);
    config.validate();
    for (const auto& e : events) config.rule_for(e.relation);
    std::vector<Snapshot> series(grid.size());
    const auto count = static_cast<std::ptrdiff_t>(grid.size());
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        try {
            series[i] = build_snapshot(events, registry, config, grid[i]);
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return series;
}

std::vector<Snapshot> snapshot_series_serial(std::span<const InteractionEvent> events,
                                             const EntityRegistry& registry, const MechanismConfig& config,
                                             Instant start, int period_days, Instant end) {
    std::vector<Snapshot> series;
    for (Instant t : snapshot_grid(start, period_days, end))
        series.push_back(build_snapshot(events, registry, config, t));
    return series;
}

void save_snapshot_csv(const Snapshot& snapshot, const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    out << "u,v,weight\n";
    for (const auto& e : snapshot.edges())
        out << snapshot.node(e.u) << ',' << snapshot.node(e.v) << ',' << detail::format_real(e.weight, 9) << '\n';
}

Snapshot load_snapshot_csv(const std::filesystem::path& path, Instant time) {
    auto in = detail::open_input(path);
    const std::string file = path.string();
    std::vector<std::pair<std::pair<std::string, std::string>, double>> edges;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        auto fields = detail::split_csv(line);
        if (!header_seen) {
            if (fields != std::vector<std::string>{"u", "v", "weight"})
                throw ParseError(file, line_no, "expected header 'u,v,weight'");
            header_seen = true;
            continue;
        }
        if (fields.size() != 3) throw ParseError(file, line_no, "expected 3 fields");
        edges.push_back({{fields[0], fields[1]}, detail::parse_real(fields[2], file, line_no)});
    }
    try {
        return Snapshot::from_edges(time, edges);
    } catch (const ParseError&) {
        throw;
    } catch (const Error& e) {
        throw Error(file + ": " + e.what());
    }
}

namespace {

std::string snapshot_file_name(std::size_t index) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "snapshot_%04zu.csv", index);
    return buffer;
}

} // namespace

void save_snapshot_series(const std::vector<Snapshot>& series, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["format"] = "svcevo-snapshots";
    manifest["version"] = 1;
    manifest["snapshots"] = nlohmann::json::array();
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto name = snapshot_file_name(i);
        save_snapshot_csv(series[i], dir / name);
        manifest["snapshots"].push_back({{"index", i},
                                         {"instant", format_instant(series[i].time())},
                                         {"file", name},
                                         {"nodes", series[i].node_count()},
                                         {"edges", series[i].edge_count()}});
    }
    detail::open_output(dir / "manifest.json") << manifest.dump(2) << '\n';
}

std::vector<Snapshot> load_snapshot_series(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "manifest.json";
    if (!std::filesystem::exists(manifest_path))
        throw Error("missing snapshot manifest " + manifest_path.string() + " (run the snapshot stage first)");
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(detail::read_file(manifest_path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(manifest_path.string() + ": " + e.what());
    }
    std::vector<Snapshot> series;
    for (const auto& entry : manifest.at("snapshots"))
        series.push_back(load_snapshot_csv(dir / entry.at("file").get<std::string>(),
                                           parse_instant(entry.at("instant").get<std::string>())));
    return series;
}

} // namespace svcevo
