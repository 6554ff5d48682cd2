#include "svcevo/synth.hpp"

#include "svcevo/error.hpp"
#include "text_io.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <optional>
#include <numeric>
#include <random>
#include <set>

namespace svcevo {

std::string_view to_string(DirectiveKind kind) {
    switch (kind) {
    case DirectiveKind::keep: return "continue";
    case DirectiveKind::grow: return "grow";
    case DirectiveKind::shrink: return "shrink";
    case DirectiveKind::split: return "split";
    case DirectiveKind::merge: return "merge";
    case DirectiveKind::dissolve: return "dissolve";
    case DirectiveKind::form: return "form";
    }
    return "?";
}

namespace {

std::optional<DirectiveKind> parse_directive(std::string_view text) {
    for (auto kind : {DirectiveKind::keep, DirectiveKind::grow, DirectiveKind::shrink, DirectiveKind::split,
                      DirectiveKind::merge, DirectiveKind::dissolve, DirectiveKind::form})
        if (to_string(kind) == text) return kind;
    return std::nullopt;
}

EventType event_of(DirectiveKind kind) {
    switch (kind) {
    case DirectiveKind::grow: return EventType::growing;
    case DirectiveKind::shrink: return EventType::shrinking;
    case DirectiveKind::split: return EventType::splitting;
    case DirectiveKind::merge: return EventType::merging;
    case DirectiveKind::dissolve: return EventType::dissolving;
    default: return EventType::continuing;
    }
}

// Interaction multiplicity that foreshadows each event.
std::size_t signal_level(EventType event) {
    switch (event) {
    case EventType::continuing: return 1;
    case EventType::growing: return 2;
    case EventType::shrinking: return 3;
    case EventType::splitting: return 4;
    case EventType::merging: return 5;
    case EventType::dissolving: return 6;
    default: return 1;
    }
}

constexpr const char* kIntraRelation = "collab";
constexpr const char* kNoiseRelation = "contact";

// Structural replay of the directives. With a generator it also draws which
// members leave and how splits partition; without one it only checks sizes.
class Lifecycle {
public:
    using Members = std::vector<std::string>;

    Lifecycle(const EvolutionScript& script, std::mt19937_64* rng, std::function<std::string()> new_node)
        : script_(script), rng_(rng), new_node_(std::move(new_node)) {
        for (const auto& d : script.directives) by_snapshot_[d.snapshot].push_back(&d);
    }

    std::map<std::string, Members> initial() {
        std::map<std::string, Members> live;
        for (const auto& c : script_.communities) {
            if (live.contains(c.id)) throw Error("synth: duplicate community id '" + c.id + "'");
            if (c.size < script_.min_community_size)
                throw Error("synth: community '" + c.id + "' is smaller than the minimum community size");
            live[c.id] = fresh(c.size);
            used_.insert(c.id);
        }
        return live;
    }

    /// Upcoming event per live community at `snapshot`.
    std::map<std::string, EventType> upcoming(const std::map<std::string, Members>& live, std::size_t snapshot) const {
        std::map<std::string, EventType> events;
        for (const auto& [id, members] : live) events[id] = EventType::continuing;
        auto it = by_snapshot_.find(snapshot);
        if (it == by_snapshot_.end()) return events;
        for (const auto* d : it->second) {
            if (d->kind == DirectiveKind::form) continue;
            events[d->community] = event_of(d->kind);
            for (const auto& p : d->partners) events[p] = EventType::merging;
        }
        return events;
    }

    std::map<std::string, Members> advance(const std::map<std::string, Members>& live, std::size_t snapshot) {
        std::map<std::string, Members> next = live;
        std::set<std::string> touched;
        auto claim = [&](const std::string& id, const Directive& d) {
            if (!live.contains(id))
                throw Error("synth: directive '" + std::string(to_string(d.kind)) + "' at snapshot " +
                            std::to_string(snapshot) + " references community '" + id + "' which is not live");
            if (!touched.insert(id).second)
                throw Error("synth: community '" + id + "' has two directives at snapshot " + std::to_string(snapshot));
        };
        auto fresh_id = [&](const std::string& id) {
            if (used_.contains(id)) throw Error("synth: community id '" + id + "' is already used");
            used_.insert(id);
            return id;
        };
        auto it = by_snapshot_.find(snapshot);
        if (it == by_snapshot_.end()) return next;
        const std::size_t min_size = script_.min_community_size;
        for (const auto* d : it->second) {
            if (d->snapshot + 1 >= script_.snapshots)
                throw Error("synth: directive at snapshot " + std::to_string(d->snapshot) + " has no following snapshot");
            if (d->kind == DirectiveKind::form) {
                if (d->amount < min_size) throw Error("synth: formed community '" + d->community + "' is too small");
                next[fresh_id(d->community)] = fresh(d->amount);
                continue;
            }
            claim(d->community, *d);
            Members members = live.at(d->community);
            switch (d->kind) {
            case DirectiveKind::keep: break;
            case DirectiveKind::grow: {
                if (d->amount == 0) throw Error("synth: grow needs a positive amount");
                auto added = fresh(d->amount);
                members.insert(members.end(), added.begin(), added.end());
                std::sort(members.begin(), members.end());
                next[d->community] = members;
                break;
            }
            case DirectiveKind::shrink: {
                if (d->amount == 0 || members.size() < d->amount + min_size)
                    throw Error("synth: cannot shrink '" + d->community + "' by " + std::to_string(d->amount));
                shuffle(members);
                members.resize(members.size() - d->amount);
                std::sort(members.begin(), members.end());
                next[d->community] = members;
                break;
            }
            case DirectiveKind::split: {
                const std::size_t parts = d->amount;
                if (parts < 2 || members.size() < parts * min_size)
                    throw Error("synth: cannot split '" + d->community + "' (" + std::to_string(members.size()) +
                                " members) into " + std::to_string(parts) + " parts of at least " +
                                std::to_string(min_size));
                shuffle(members);
                next.erase(d->community);
                for (std::size_t k = 0; k < parts; ++k) {
                    const std::size_t begin = members.size() * k / parts;
                    const std::size_t end = members.size() * (k + 1) / parts;
                    Members part(members.begin() + begin, members.begin() + end);
                    std::sort(part.begin(), part.end());
                    next[fresh_id(d->community + "." + std::to_string(k + 1))] = part;
                }
                break;
            }
            case DirectiveKind::merge: {
                if (d->partners.empty()) throw Error("synth: merge of '" + d->community + "' lists no partners");
                std::string id = d->community;
                next.erase(d->community);
                for (const auto& p : d->partners) {
                    claim(p, *d);
                    const auto& other = live.at(p);
                    members.insert(members.end(), other.begin(), other.end());
                    next.erase(p);
                    id += "+" + p;
                }
                std::sort(members.begin(), members.end());
                next[fresh_id(id)] = members;
                break;
            }
            case DirectiveKind::dissolve: next.erase(d->community); break;
            case DirectiveKind::form: break;
            }
        }
        return next;
    }

private:
    Members fresh(std::size_t count) {
        Members out;
        for (std::size_t i = 0; i < count; ++i) out.push_back(new_node_ ? new_node_() : "n" + std::to_string(dry_++));
        return out;
    }

    void shuffle(Members& members) {
        if (rng_) std::shuffle(members.begin(), members.end(), *rng_);
    }

    const EvolutionScript& script_;
    std::mt19937_64* rng_;
    std::function<std::string()> new_node_;
    std::map<std::size_t, std::vector<const Directive*>> by_snapshot_;
    std::set<std::string> used_;
    std::size_t dry_ = 0;
};

} // namespace

void EvolutionScript::validate() const {
    if (snapshots < 1) throw Error("synth: need at least one snapshot");
    if (period_days < 1) throw Error("synth: period_days must be >= 1");
    if (!(intra_probability > 0.0 && intra_probability <= 1.0)) throw Error("synth: intra_probability must lie in (0, 1]");
    if (!(noise_rate >= 0.0)) throw Error("synth: noise_rate must be >= 0");
    if (!(service_mix > 0.0 && service_mix < 1.0)) throw Error("synth: service_mix must lie in (0, 1)");
    if (min_community_size < 1) throw Error("synth: min_community_size must be >= 1");
    Lifecycle dry(*this, nullptr, nullptr);
    auto live = dry.initial();
    for (std::size_t s = 0; s < snapshots; ++s) live = dry.advance(live, s);
}

SynthOutput generate(const EvolutionScript& script) {
    script.validate();
    SynthOutput out;
    std::mt19937_64 rng(script.seed);
    std::bernoulli_distribution is_service(script.service_mix);
    std::size_t node_counter = 0;
    auto new_node = [&] {
        char buffer[32];
        std::snprintf(buffer, sizeof buffer, "n%04zu", node_counter++);
        out.entities.add({buffer, is_service(rng) ? EntityKind::service : EntityKind::stakeholder});
        return std::string(buffer);
    };
    Lifecycle lifecycle(script, &rng, new_node);

    out.config.aging_period_days = script.period_days;
    out.config.aging_max_days = script.period_days;
    out.config.relations[kIntraRelation] = {Mechanism::aging, 1.0};
    out.config.relations[kNoiseRelation] = {Mechanism::aging, 0.3};
    out.start = script.start;
    out.end = add_days(script.start, static_cast<std::int64_t>(script.period_days) * (script.snapshots - 1));

    const std::int64_t window = static_cast<std::int64_t>(script.period_days) * 86400;
    std::uniform_int_distribution<std::int64_t> offset(0, window - 1);
    std::bernoulli_distribution draw_pair(script.intra_probability);
    std::bernoulli_distribution extra(0.5);
    std::poisson_distribution<int> noise(script.noise_rate);

    auto live = lifecycle.initial();
    out.truth.membership.resize(script.snapshots);
    for (std::size_t s = 0; s < script.snapshots; ++s) {
        out.truth.membership[s] = live;
        const bool last = s + 1 == script.snapshots;
        const auto upcoming = lifecycle.upcoming(live, s);
        if (!last)
            for (const auto& [id, event] : upcoming) out.truth.schedule.push_back({s, id, event});

        const Instant at = add_days(script.start, static_cast<std::int64_t>(script.period_days) * s);
        auto emit = [&](const std::string& a, const std::string& b, const char* relation) {
            out.events.push_back({a, b, relation, Instant{at.seconds - offset(rng)}});
        };
        std::vector<std::string> ids;
        for (const auto& [id, members] : live) ids.push_back(id);
        for (const auto& [id, members] : live) {
            const std::size_t level = script.planted_signal && !last ? signal_level(upcoming.at(id)) : 1;
            auto interact = [&](std::size_t i, std::size_t j) {
                const std::size_t count = level + (script.planted_signal && extra(rng) ? 1 : 0);
                for (std::size_t k = 0; k < count; ++k) emit(members[i], members[j], kIntraRelation);
            };
            const std::size_t n = members.size();
            std::vector<std::size_t> component(n);
            std::iota(component.begin(), component.end(), 0);
            auto find = [&](std::size_t v) {
                while (component[v] != v) v = component[v] = component[component[v]];
                return v;
            };
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = i + 1; j < n; ++j)
                    if (draw_pair(rng)) {
                        interact(i, j);
                        component[find(i)] = find(j);
                    }
            // Keep the planted community connected.
            for (std::size_t i = 1; i < n; ++i)
                if (find(i) != find(0)) {
                    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
                    std::size_t j = pick(rng);
                    while (find(j) != find(0)) j = pick(rng);
                    interact(j, i);
                    component[find(i)] = find(0);
                }
            if (ids.size() < 2) continue;
            const int contacts = noise(rng);
            for (int k = 0; k < contacts; ++k) {
                std::uniform_int_distribution<std::size_t> pick_other(0, ids.size() - 1);
                std::string other = id;
                while (other == id) other = ids[pick_other(rng)];
                const auto& them = live.at(other);
                std::uniform_int_distribution<std::size_t> mine(0, n - 1), theirs(0, them.size() - 1);
                emit(members[mine(rng)], them[theirs(rng)], kNoiseRelation);
            }
        }
        live = lifecycle.advance(live, s);
    }
    std::stable_sort(out.events.begin(), out.events.end(),
                     [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
    return out;
}

EvolutionScript default_script(std::uint64_t seed) {
    EvolutionScript script;
    script.seed = seed;
    script.snapshots = 10;
    constexpr std::size_t kPopulation = 12;
    std::mt19937_64 rng(seed * 7919 + 17);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    struct Live {
        std::string id;
        std::size_t size;
        std::size_t born;
    };
    std::vector<Live> live;
    std::uniform_int_distribution<std::size_t> initial_size(7, 10);
    for (std::size_t i = 0; i < kPopulation; ++i) {
        Live c{"c" + std::to_string(i), initial_size(rng), 0};
        script.communities.push_back({c.id, c.size});
        live.push_back(c);
    }
    std::size_t next_id = kPopulation;
    for (std::size_t s = 0; s + 1 < script.snapshots; ++s) {
        std::vector<Live> next;
        std::set<std::string> taken;
        for (std::size_t i = 0; i < live.size(); ++i) {
            const Live& c = live[i];
            if (taken.contains(c.id)) continue;
            taken.insert(c.id);
            const bool mature = s >= c.born + 2;
            const double r = unit(rng);
            Directive d{s, c.id, DirectiveKind::keep, 0, {}};
            if (mature && r < 0.08) {
                d.kind = DirectiveKind::dissolve;
            } else if (mature && r < 0.16 && c.size >= 10) {
                d.kind = DirectiveKind::split;
                d.amount = 2;
                next.push_back({c.id + ".1", c.size / 2, s + 1});
                next.push_back({c.id + ".2", c.size - c.size / 2, s + 1});
            } else if (mature && r < 0.24) {
                auto partner = std::find_if(live.begin() + static_cast<std::ptrdiff_t>(i) + 1, live.end(),
                                            [&](const Live& o) { return !taken.contains(o.id) && s >= o.born + 2; });
                if (partner != live.end()) {
                    taken.insert(partner->id);
                    d.kind = DirectiveKind::merge;
                    d.partners = {partner->id};
                    next.push_back({c.id + "+" + partner->id, c.size + partner->size, s + 1});
                }
            } else if (r < 0.44 && c.size <= 12) {
                d.kind = DirectiveKind::grow;
                d.amount = std::uniform_int_distribution<std::size_t>(1, 3)(rng);
                next.push_back({c.id, c.size + d.amount, c.born});
            } else if (r < 0.62 && c.size >= 7) {
                d.kind = DirectiveKind::shrink;
                d.amount = std::uniform_int_distribution<std::size_t>(1, std::min<std::size_t>(2, c.size - 5))(rng);
                next.push_back({c.id, c.size - d.amount, c.born});
            }
            if (d.kind == DirectiveKind::keep) next.push_back(c);
            script.directives.push_back(std::move(d));
        }
        while (next.size() < kPopulation) {
            Live c{"c" + std::to_string(next_id++), initial_size(rng), s + 1};
            script.directives.push_back({s, c.id, DirectiveKind::form, c.size, {}});
            next.push_back(c);
        }
        std::sort(next.begin(), next.end(), [](const Live& a, const Live& b) { return a.id < b.id; });
        live = std::move(next);
    }
    // Keep-directives are implicit.
    std::erase_if(script.directives, [](const Directive& d) { return d.kind == DirectiveKind::keep; });
    return script;
}

nlohmann::json script_to_json(const EvolutionScript& script) {
    using nlohmann::json;
    json communities = json::array();
    for (const auto& c : script.communities) communities.push_back({{"id", c.id}, {"size", c.size}});
    json directives = json::array();
    for (const auto& d : script.directives) {
        json item{{"snapshot", d.snapshot}, {"community", d.community}, {"directive", to_string(d.kind)}};
        if (d.kind == DirectiveKind::grow || d.kind == DirectiveKind::shrink) item["amount"] = d.amount;
        if (d.kind == DirectiveKind::split) item["parts"] = d.amount;
        if (d.kind == DirectiveKind::form) item["size"] = d.amount;
        if (d.kind == DirectiveKind::merge) item["partners"] = d.partners;
        directives.push_back(std::move(item));
    }
    return json{{"snapshots", script.snapshots},
                {"period_days", script.period_days},
                {"start", format_instant(script.start)},
                {"seed", script.seed},
                {"intra_probability", script.intra_probability},
                {"noise_rate", script.noise_rate},
                {"service_mix", script.service_mix},
                {"min_community_size", script.min_community_size},
                {"planted_signal", script.planted_signal},
                {"communities", communities},
                {"directives", directives}};
}

EvolutionScript script_from_json(const nlohmann::json& doc) {
    EvolutionScript s;
    try {
        s.snapshots = doc.value("snapshots", s.snapshots);
        s.period_days = doc.value("period_days", s.period_days);
        if (doc.contains("start")) s.start = parse_instant(doc.at("start").get<std::string>());
        s.seed = doc.value("seed", s.seed);
        s.intra_probability = doc.value("intra_probability", s.intra_probability);
        s.noise_rate = doc.value("noise_rate", s.noise_rate);
        s.service_mix = doc.value("service_mix", s.service_mix);
        s.min_community_size = doc.value("min_community_size", s.min_community_size);
        s.planted_signal = doc.value("planted_signal", s.planted_signal);
        for (const auto& c : doc.at("communities"))
            s.communities.push_back({c.at("id").get<std::string>(), c.value("size", std::size_t{8})});
        if (doc.contains("directives"))
            for (const auto& item : doc.at("directives")) {
                Directive d;
                d.snapshot = item.at("snapshot").get<std::size_t>();
                d.community = item.at("community").get<std::string>();
                const auto name = item.at("directive").get<std::string>();
                auto kind = parse_directive(name);
                if (!kind) throw Error("synth script: unknown directive '" + name + "'");
                d.kind = *kind;
                if (d.kind == DirectiveKind::grow || d.kind == DirectiveKind::shrink) d.amount = item.at("amount").get<std::size_t>();
                if (d.kind == DirectiveKind::split) d.amount = item.value("parts", std::size_t{2});
                if (d.kind == DirectiveKind::form) d.amount = item.value("size", std::size_t{8});
                if (d.kind == DirectiveKind::merge) d.partners = item.at("partners").get<std::vector<std::string>>();
                s.directives.push_back(std::move(d));
            }
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("synth script: ") + e.what());
    }
    return s;
}

nlohmann::json truth_to_json(const GroundTruth& truth) {
    using nlohmann::json;
    json schedule = json::array();
    for (const auto& e : truth.schedule)
        schedule.push_back({{"snapshot", e.snapshot}, {"community", e.community}, {"event", to_string(e.event)}});
    json membership = json::array();
    for (const auto& snapshot : truth.membership) membership.push_back(snapshot);
    return json{{"format", "svcevo-schedule"}, {"version", 1}, {"schedule", schedule}, {"membership", membership}};
}

GroundTruth truth_from_json(const nlohmann::json& doc) {
    GroundTruth truth;
    try {
        for (const auto& item : doc.at("schedule")) {
            auto event = parse_event_type(item.at("event").get<std::string>());
            if (!event) throw Error("schedule: unknown event");
            truth.schedule.push_back({item.at("snapshot").get<std::size_t>(), item.at("community").get<std::string>(), *event});
        }
        for (const auto& snapshot : doc.at("membership"))
            truth.membership.push_back(snapshot.get<std::map<std::string, std::vector<std::string>>>());
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("schedule: ") + e.what());
    }
    return truth;
}

void save_synth(const EvolutionScript& script, const SynthOutput& output, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_entities(output.entities, dir / "nodes.csv");
    save_events(output.events, dir / "events.csv");
    detail::open_output(dir / "mechanisms.cfg") << format_mechanism_config(output.config);
    detail::open_output(dir / "schedule.json") << truth_to_json(output.truth).dump(1) << '\n';
    detail::open_output(dir / "script.json") << script_to_json(script).dump(2) << '\n';
}

RecoveryReport recovery(const GroundTruth& truth, const std::vector<Partition>& partitions, const Tracking& tracking) {
    RecoveryReport report;
    for (const auto& planned : truth.schedule) {
        ++report.scheduled;
        if (planned.snapshot >= partitions.size() || planned.snapshot >= truth.membership.size()) continue;
        const auto& members = truth.membership[planned.snapshot].at(planned.community);
        const Community* best = nullptr;
        double best_jaccard = 0.0;
        for (const auto& c : partitions[planned.snapshot].communities) {
            std::size_t shared = 0;
            for (const auto& id : members)
                if (c.contains(id)) ++shared;
            const double jaccard =
                static_cast<double>(shared) / static_cast<double>(members.size() + c.members.size() - shared);
            if (jaccard > best_jaccard) {
                best_jaccard = jaccard;
                best = &c;
            }
        }
        if (!best || best_jaccard < 0.5) continue;
        auto it = tracking.next_event.find(best->id);
        if (it != tracking.next_event.end() && it->second == planned.event) ++report.recovered;
    }
    return report;
}

} // namespace svcevo
