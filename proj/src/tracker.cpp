#include "svcevo/tracker.hpp"

#include "svcevo/error.hpp"
#include "text_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <set>
#include <tuple>

namespace svcevo {

namespace {

constexpr std::array<std::string_view, kEventTypeCount> kEventNames = {
    "forming", "continuing", "growing", "shrinking", "splitting", "merging", "dissolving"};

} // namespace

std::string_view to_string(EventType event) { return kEventNames[static_cast<std::size_t>(event)]; }

std::optional<EventType> parse_event_type(std::string_view text) {
    for (std::size_t i = 0; i < kEventNames.size(); ++i)
        if (kEventNames[i] == text) return static_cast<EventType>(i);
    return std::nullopt;
}

void TrackerConfig::validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw Error("alpha must lie in (0, 1]");
    if (!(beta > 0.0 && beta <= 1.0)) throw Error("beta must lie in (0, 1]");
}

double inclusion(const Community& c1, const Community& c2) {
    if (c1.members.empty()) return 0.0;
    std::size_t shared = 0;
    double shared_position = 0.0;
    double total_position = 0.0;
    for (const auto& id : c1.members) {
        const double sp = c1.social_position.at(id);
        total_position += sp;
        if (c2.contains(id)) {
            ++shared;
            shared_position += sp;
        }
    }
    if (shared == 0) return 0.0;
    if (shared == c1.members.size()) return 1.0;
    return (static_cast<double>(shared) / static_cast<double>(c1.members.size())) *
           (shared_position / total_position);
}

std::vector<EvolutionRecord> classify_transition(const Partition& from, const Partition& to,
                                                 const TrackerConfig& config) {
    config.validate();
    const auto& left = from.communities;
    const auto& right = to.communities;

    struct Candidate {
        std::size_t i, j;
        InclusionPair value;
        bool forward_ok, backward_ok;
        bool consumed = false;
    };
    std::vector<Candidate> matched;
    std::vector<std::vector<std::size_t>> by_left(left.size()), by_right(right.size());
    for (std::size_t i = 0; i < left.size(); ++i)
        for (std::size_t j = 0; j < right.size(); ++j) {
            const bool overlap = std::any_of(left[i].members.begin(), left[i].members.end(),
                                             [&](const auto& id) { return right[j].contains(id); });
            if (!overlap) continue;
            const InclusionPair value{inclusion(left[i], right[j]), inclusion(right[j], left[i])};
            const bool f = value.forward >= config.alpha;
            const bool b = value.backward >= config.beta;
            if (!f && !b) continue;
            by_left[i].push_back(matched.size());
            by_right[j].push_back(matched.size());
            matched.push_back({i, j, value, f, b});
        }

    std::vector<EvolutionRecord> records;
    auto pair_key = [](const Community& a, const Community& b) { return std::make_pair(a.id, b.id); };

    // Multi-match events first; their pairs are not re-emitted.
    for (std::size_t i = 0; i < left.size(); ++i) {
        std::vector<std::size_t> parts;
        for (auto k : by_left[i])
            if (!matched[k].forward_ok && matched[k].backward_ok) parts.push_back(k);
        if (parts.size() < 2) continue;
        EvolutionRecord r{from.snapshot_index, EventType::splitting, {left[i].id}, {}, {}};
        for (auto k : parts) {
            matched[k].consumed = true;
            r.successors.push_back(right[matched[k].j].id);
            r.inclusions[pair_key(left[i], right[matched[k].j])] = matched[k].value;
        }
        records.push_back(std::move(r));
    }
    for (std::size_t j = 0; j < right.size(); ++j) {
        std::vector<std::size_t> parts;
        for (auto k : by_right[j])
            if (matched[k].forward_ok && !matched[k].backward_ok && !matched[k].consumed) parts.push_back(k);
        if (parts.size() < 2) continue;
        EvolutionRecord r{from.snapshot_index, EventType::merging, {}, {right[j].id}, {}};
        for (auto k : parts) {
            matched[k].consumed = true;
            r.predecessors.push_back(left[matched[k].i].id);
            r.inclusions[pair_key(left[matched[k].i], right[j])] = matched[k].value;
        }
        records.push_back(std::move(r));
    }

    auto by_size = [](std::size_t a, std::size_t b) {
        return a == b ? EventType::continuing : (a < b ? EventType::growing : EventType::shrinking);
    };
    for (auto& m : matched) {
        if (m.consumed) continue;
        const auto n1 = left[m.i].size();
        const auto n2 = right[m.j].size();
        EventType event;
        if (m.forward_ok && m.backward_ok) {
            event = by_size(n1, n2);
        } else if (m.forward_ok) {
            // C1 mostly inside a C2 that holds little of it.
            event = (n1 <= n2 && by_left[m.i].size() == 1) ? EventType::growing : by_size(n1, n2);
        } else {
            event = (n1 >= n2 && by_right[m.j].size() == 1) ? EventType::shrinking : by_size(n1, n2);
        }
        EvolutionRecord r{from.snapshot_index, event, {left[m.i].id}, {right[m.j].id}, {}};
        r.inclusions[pair_key(left[m.i], right[m.j])] = m.value;
        records.push_back(std::move(r));
    }

    for (std::size_t i = 0; i < left.size(); ++i)
        if (by_left[i].empty()) records.push_back({from.snapshot_index, EventType::dissolving, {left[i].id}, {}, {}});
    for (std::size_t j = 0; j < right.size(); ++j)
        if (by_right[j].empty()) records.push_back({from.snapshot_index, EventType::forming, {}, {right[j].id}, {}});
    return records;
}

Tracking build_lineages(const std::vector<Partition>& partitions, std::vector<EvolutionRecord> records) {
    Tracking tracking;
    std::set<std::string> multi_pred, multi_succ;
    for (const auto& r : records)
        if (r.event == EventType::splitting || r.event == EventType::merging) {
            multi_pred.insert(r.predecessors.begin(), r.predecessors.end());
            multi_succ.insert(r.successors.begin(), r.successors.end());
        }

    struct Link {
        double score;
        std::string pred, succ;
        EventType event;
    };
    std::vector<Link> links;
    for (const auto& r : records) {
        if (r.event != EventType::continuing && r.event != EventType::growing && r.event != EventType::shrinking)
            continue;
        const auto& pred = r.predecessors.front();
        const auto& succ = r.successors.front();
        if (multi_pred.contains(pred) || multi_succ.contains(succ)) continue;
        const auto& inc = r.inclusions.at({pred, succ});
        links.push_back({inc.forward + inc.backward, pred, succ, r.event});
    }
    std::sort(links.begin(), links.end(), [](const Link& a, const Link& b) {
        if (a.score != b.score) return a.score > b.score;
        return std::tie(a.pred, a.succ) < std::tie(b.pred, b.succ);
    });

    std::map<std::string, std::string> successor;
    for (const auto& link : links) {
        if (successor.contains(link.pred) || tracking.predecessor.contains(link.succ)) continue;
        successor[link.pred] = link.succ;
        tracking.predecessor[link.succ] = link.pred;
        tracking.next_event[link.pred] = link.event;
    }

    // Remaining next events by precedence: splitting, merging, dissolving,
    // then the best-scoring single-pair record.
    auto assign_if_absent = [&](const std::string& id, EventType event) { tracking.next_event.try_emplace(id, event); };
    for (const auto& r : records)
        if (r.event == EventType::splitting)
            for (const auto& id : r.predecessors) tracking.next_event[id] = EventType::splitting;
    for (const auto& r : records)
        if (r.event == EventType::merging)
            for (const auto& id : r.predecessors) assign_if_absent(id, EventType::merging);
    for (const auto& r : records)
        if (r.event == EventType::dissolving) assign_if_absent(r.predecessors.front(), EventType::dissolving);
    for (const auto& link : links) assign_if_absent(link.pred, link.event);
    for (const auto& r : records)
        if (!r.predecessors.empty() && r.event != EventType::forming) assign_if_absent(r.predecessors.front(), r.event);

    for (const auto& p : partitions)
        for (const auto& c : p.communities) {
            if (tracking.predecessor.contains(c.id)) continue;
            Lineage lineage{c.id, p.snapshot_index, {c.id}};
            for (auto it = successor.find(c.id); it != successor.end(); it = successor.find(it->second))
                lineage.communities.push_back(it->second);
            tracking.lineages.push_back(std::move(lineage));
        }
    tracking.records = std::move(records);
    return tracking;
}

namespace {

std::vector<EvolutionRecord> flatten(std::vector<std::vector<EvolutionRecord>> parts) {
    std::vector<EvolutionRecord> all;
    for (auto& part : parts)
        for (auto& r : part) all.push_back(std::move(r));
    return all;
}

} // namespace

Tracking track(const std::vector<Partition>& partitions, const TrackerConfig& config) {
    config.validate();
    const auto pairs = partitions.empty() ? 0 : static_cast<std::ptrdiff_t>(partitions.size() - 1);
    std::vector<std::vector<EvolutionRecord>> parts(static_cast<std::size_t>(pairs));
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t t = 0; t < pairs; ++t) parts[t] = classify_transition(partitions[t], partitions[t + 1], config);
    return build_lineages(partitions, flatten(std::move(parts)));
}

Tracking track_serial(const std::vector<Partition>& partitions, const TrackerConfig& config) {
    std::vector<std::vector<EvolutionRecord>> parts;
    for (std::size_t t = 0; t + 1 < partitions.size(); ++t)
        parts.push_back(classify_transition(partitions[t], partitions[t + 1], config));
    return build_lineages(partitions, flatten(std::move(parts)));
}

void save_records_json(const std::vector<EvolutionRecord>& records, const std::filesystem::path& path) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& r : records) {
        nlohmann::json inclusions = nlohmann::json::object();
        for (const auto& [pair, value] : r.inclusions)
            inclusions[pair.first + "|" + pair.second] = {{"forward", value.forward}, {"backward", value.backward}};
        list.push_back({{"from_snapshot", r.from_snapshot},
                        {"event", to_string(r.event)},
                        {"predecessors", r.predecessors},
                        {"successors", r.successors},
                        {"inclusions", inclusions}});
    }
    detail::open_output(path) << list.dump(2) << '\n';
}

std::vector<EvolutionRecord> load_records_json(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw Error("missing evolution records " + path.string() + " (run the track stage first)");
    std::vector<EvolutionRecord> records;
    try {
        for (const auto& item : nlohmann::json::parse(detail::read_file(path))) {
            EvolutionRecord r;
            r.from_snapshot = item.at("from_snapshot").get<std::size_t>();
            auto event = parse_event_type(item.at("event").get<std::string>());
            if (!event) throw Error(path.string() + ": unknown event '" + item.at("event").get<std::string>() + "'");
            r.event = *event;
            r.predecessors = item.at("predecessors").get<std::vector<std::string>>();
            r.successors = item.at("successors").get<std::vector<std::string>>();
            for (const auto& [key, value] : item.at("inclusions").items()) {
                const auto bar = key.find('|');
                r.inclusions[{key.substr(0, bar), key.substr(bar + 1)}] = {value.at("forward").get<double>(),
                                                                            value.at("backward").get<double>()};
            }
            records.push_back(std::move(r));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(path.string() + ": " + e.what());
    }
    return records;
}

void save_event_distribution(const std::vector<EvolutionRecord>& records, std::size_t snapshot_count,
                             const std::filesystem::path& path) {
    std::vector<std::array<std::size_t, kEventTypeCount>> counts(snapshot_count > 0 ? snapshot_count - 1 : 0);
    for (auto& row : counts) row.fill(0);
    for (const auto& r : records)
        if (r.from_snapshot < counts.size()) ++counts[r.from_snapshot][static_cast<std::size_t>(r.event)];
    auto out = detail::open_output(path);
    out << "snapshot,event,count\n";
    for (std::size_t t = 0; t < counts.size(); ++t)
        for (std::size_t e = 0; e < kEventTypeCount; ++e) out << t << ',' << kEventNames[e] << ',' << counts[t][e] << '\n';
}

void save_lineages_json(const Tracking& tracking, const std::filesystem::path& path) {
    nlohmann::json lineages = nlohmann::json::array();
    for (const auto& l : tracking.lineages)
        lineages.push_back({{"lineage_id", l.id}, {"start_snapshot", l.start_snapshot}, {"communities", l.communities}});
    nlohmann::json next = nlohmann::json::object();
    for (const auto& [id, event] : tracking.next_event) next[id] = to_string(event);
    nlohmann::json doc{{"format", "svcevo-lineages"},
                       {"version", 1},
                       {"lineages", lineages},
                       {"next_event", next},
                       {"predecessor", tracking.predecessor}};
    detail::open_output(path) << doc.dump(2) << '\n';
}

Tracking load_lineages_json(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw Error("missing lineage file " + path.string() + " (run the track stage first)");
    Tracking tracking;
    try {
        const auto doc = nlohmann::json::parse(detail::read_file(path));
        for (const auto& item : doc.at("lineages"))
            tracking.lineages.push_back({item.at("lineage_id").get<std::string>(),
                                         item.at("start_snapshot").get<std::size_t>(),
                                         item.at("communities").get<std::vector<std::string>>()});
        for (const auto& [id, name] : doc.at("next_event").items()) {
            auto event = parse_event_type(name.get<std::string>());
            if (!event) throw Error(path.string() + ": unknown event '" + name.get<std::string>() + "'");
            tracking.next_event.emplace(id, *event);
        }
        tracking.predecessor = doc.at("predecessor").get<std::map<std::string, std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(path.string() + ": " + e.what());
    }
    return tracking;
}

} // namespace svcevo
