#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "support.hpp"

#include "svcevo/entity.hpp"
#include "svcevo/error.hpp"
#include "svcevo/events.hpp"
#include "svcevo/mechanism.hpp"
#include "svcevo/snapshot.hpp"

#include <algorithm>
#include <map>

using namespace svcevo;
using testing_support::TempDir;
using testing_support::write_text;

namespace {

EntityRegistry registry_of(std::initializer_list<std::string> ids) {
    EntityRegistry r;
    for (const auto& id : ids) r.add({id, EntityKind::service});
    return r;
}

InteractionEvent ev(std::string u, std::string v, std::string rel, const char* t) {
    return {std::move(u), std::move(v), std::move(rel), parse_instant(t)};
}

MechanismConfig config_of(std::initializer_list<std::pair<std::string, RelationRule>> rules) {
    MechanismConfig c;
    for (const auto& [name, rule] : rules) c.relations[name] = rule;
    return c;
}

std::string error_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return {};
}

} // namespace

TEST_CASE("instants parse and format in UTC") {
    CHECK(parse_instant("2016-08-01T00:00:00Z").seconds == 1470009600);
    CHECK(parse_instant("2016-08-01") == parse_instant("2016-08-01T00:00:00Z"));
    CHECK(format_instant(Instant{1470009600 + 3661}) == "2016-08-01T01:01:01Z");
    CHECK_THROWS_AS(parse_instant("2016-13-01"), Error);
    CHECK_THROWS_AS(parse_instant("2016-02-30T00:00:00Z"), Error);
    CHECK_THROWS_AS(parse_instant("yesterday"), Error);
}

TEST_CASE("load_entities") {
    TempDir dir;
    write_text(dir / "two.csv", "id,type\na,service\nb,stakeholder\n");
    auto r = load_entities(dir / "two.csv");
    CHECK(r.size() == 2);
    CHECK(r.at("b").kind == EntityKind::stakeholder);

    write_text(dir / "empty.csv", "id,type\n");
    CHECK(load_entities(dir / "empty.csv").empty());

    write_text(dir / "vendor.csv", "id,type\na,service\nb,vendor\n");
    const auto msg = error_of([&] { load_entities(dir / "vendor.csv"); });
    CHECK(msg.find(":3:") != std::string::npos);
    CHECK(msg.find("vendor") != std::string::npos);

    write_text(dir / "dup.csv", "id,type\na,service\na,service\n");
    CHECK(error_of([&] { load_entities(dir / "dup.csv"); }).find("'a'") != std::string::npos);

    write_text(dir / "header.csv", "name,kind\n");
    CHECK_THROWS_AS(load_entities(dir / "header.csv"), ParseError);
    CHECK_THROWS_AS(load_entities(dir / "missing.csv"), Error);
}

TEST_CASE("load_events sorts stably and names bad values") {
    TempDir dir;
    const auto reg = registry_of({"a", "b", "c"});
    write_text(dir / "e.csv",
               "source,target,relation,timestamp\n"
               "a,b,x,2016-03-01T00:00:00Z\n"
               "b,c,first,2016-01-01T00:00:00Z\n"
               "a,c,second,2016-01-01T00:00:00Z\n"
               "c,a,y,2016-02-01T00:00:00Z\n");
    const auto events = load_events(dir / "e.csv", reg);
    REQUIRE(events.size() == 4);
    CHECK(events[0].relation == "first");
    CHECK(events[1].relation == "second");
    CHECK(events[2].relation == "y");
    CHECK(events[3].relation == "x");

    write_text(dir / "unknown.csv", "source,target,relation,timestamp\na,z,x,2016-01-01T00:00:00Z\n");
    CHECK(error_of([&] { load_events(dir / "unknown.csv", reg); }).find("z") != std::string::npos);
    write_text(dir / "self.csv", "source,target,relation,timestamp\na,a,x,2016-01-01T00:00:00Z\n");
    CHECK_THROWS_AS(load_events(dir / "self.csv", reg), ParseError);
    write_text(dir / "time.csv", "source,target,relation,timestamp\na,b,x,01/01/2016\n");
    CHECK(error_of([&] { load_events(dir / "time.csv", reg); }).find("01/01/2016") != std::string::npos);
}

TEST_CASE("mechanism config parsing and validation") {
    const auto c = parse_mechanism_config("# c\naging_period_days = 10\naging_max_days = 20\ncall = stability 1\n* = aging 0.5\n");
    CHECK(c.aging_period_days == 10);
    CHECK(c.aging_max_days == 20);
    CHECK(c.rule_for("call").mechanism == Mechanism::stability);
    CHECK(c.rule_for("other").mechanism == Mechanism::aging);
    CHECK(parse_mechanism_config(format_mechanism_config(c)).relations == c.relations);

    CHECK_THROWS_AS(parse_mechanism_config("call = decay 1\n"), Error);
    CHECK_THROWS_AS(parse_mechanism_config("call = stability\n"), Error);
    CHECK_THROWS_AS(parse_mechanism_config("aging_period_days = 40\naging_max_days = 30\n"), Error);
    MechanismConfig bad;
    bad.aging_period_days = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
    const auto strict = parse_mechanism_config("call = stability 1\n");
    CHECK(error_of([&] { strict.validate({ev("a", "b", "mail", "2016-01-01")}); }).find("mail") != std::string::npos);
}

TEST_CASE("aging_coeff analytic cases") {
    MechanismConfig c;
    const Instant t0{0};
    CHECK(aging_coeff(add_days(t0, 15), t0, c) == 1.0);
    CHECK(aging_coeff(add_days(t0, 90), t0, c) == 1.0 / 3.0);
    CHECK(aging_coeff(add_days(t0, 400), t0, c) == 0.0);
    CHECK(aging_coeff(add_days(t0, 365), t0, c) == 0.0);
    CHECK(aging_coeff(t0, t0, c) == 1.0);

    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::int64_t> seconds(0, 500LL * 86400);
    for (int i = 0; i < 1000; ++i) {
        const Instant now{seconds(rng)};
        CHECK(aging_coeff(now, t0, c) == oracle::aging_coeff(now.seconds / 86400.0, 30, 365));
    }
}

TEST_CASE("golden hand replay") {
    const auto dir = testing_support::data_dir() / "replay";
    const auto reg = load_entities(dir / "nodes.csv");
    const auto events = load_events(dir / "events.csv", reg);
    const auto config = load_mechanism_config(dir / "mechanisms.cfg");

    std::map<std::string, std::vector<std::tuple<std::string, std::string, double>>> expected;
    std::istringstream golden(testing_support::read_text(dir / "expected.csv"));
    std::string line;
    std::getline(golden, line);
    while (std::getline(golden, line)) {
        std::istringstream row(line);
        std::string t, u, v, w;
        std::getline(row, t, ',');
        std::getline(row, u, ',');
        std::getline(row, v, ',');
        std::getline(row, w, ',');
        expected[t].emplace_back(u, v, std::stod(w));
    }
    REQUIRE(expected.size() == 2);
    for (const auto& [t, edges] : expected) {
        const auto snap = build_snapshot(events, reg, config, parse_instant(t));
        CHECK(snap.edge_count() == edges.size());
        for (const auto& [u, v, w] : edges) {
            const auto iu = snap.index_of(u), iv = snap.index_of(v);
            REQUIRE(iu);
            REQUIRE(iv);
            CHECK(std::abs(snap.weight(*iu, *iv) - w) <= 1e-12);
        }
        CHECK_FALSE(snap.index_of("e"));
    }
    // The aged b-c edge fell to zero and its endpoint b survives only through a-b.
    const auto late = build_snapshot(events, reg, config, parse_instant("2017-02-15T00:00:00Z"));
    CHECK(late.node_count() == 4);
    CHECK(late.weight(*late.index_of("b"), *late.index_of("c")) == 0.0);
}

TEST_CASE("stability accumulates and mutation overwrites") {
    const auto reg = registry_of({"a", "b"});
    const auto config = config_of({{"s", {Mechanism::stability, 1.0}}, {"s2", {Mechanism::stability, 2.0}},
                                   {"m", {Mechanism::mutation, 0.5}}, {"neg", {Mechanism::mutation, -1.0}}});
    const Instant at = parse_instant("2016-12-31");
    std::vector<InteractionEvent> two{ev("a", "b", "s", "2016-01-01"), ev("b", "a", "s", "2016-02-01")};
    CHECK(build_snapshot(two, reg, config, at).weight(0, 1) == 2.0);

    std::vector<InteractionEvent> over{ev("a", "b", "s2", "2016-01-01"), ev("a", "b", "m", "2016-02-01")};
    CHECK(build_snapshot(over, reg, config, at).weight(0, 1) == 0.5);

    std::vector<InteractionEvent> gone{ev("a", "b", "s2", "2016-01-01"), ev("a", "b", "neg", "2016-02-01")};
    const auto empty = build_snapshot(gone, reg, config, at);
    CHECK(empty.empty());
    CHECK(empty.edge_count() == 0);

    std::vector<InteractionEvent> future{ev("a", "b", "s", "2017-01-01")};
    CHECK(build_snapshot(future, reg, config, at).empty());
}

TEST_CASE("unknown relation fails before replay") {
    const auto reg = registry_of({"a", "b"});
    const auto config = config_of({{"s", {Mechanism::stability, 1.0}}});
    std::vector<InteractionEvent> events{ev("a", "b", "s", "2016-01-01"), ev("a", "b", "late", "2017-06-01")};
    CHECK_THROWS_AS(build_snapshot(events, reg, config, parse_instant("2016-02-01")), Error);
}

TEST_CASE("snapshot grid") {
    const auto grid = snapshot_grid(parse_instant("2016-08-01"), 30, parse_instant("2016-10-01"));
    REQUIRE(grid.size() == 3);
    CHECK(format_instant(grid[1]) == "2016-08-31T00:00:00Z");
    CHECK(format_instant(grid[2]) == "2016-09-30T00:00:00Z");

    const auto reg = registry_of({"a", "b"});
    const auto series = snapshot_series({}, reg, MechanismConfig{}, grid.front(), 30, parse_instant("2016-10-01"));
    CHECK(series.size() == 3);
    for (const auto& s : series) CHECK(s.empty());
}

TEST_CASE("aging edge decays to nothing") {
    const auto reg = registry_of({"a", "b"});
    const auto config = config_of({{"n", {Mechanism::aging, 2.0}}});
    std::vector<InteractionEvent> events{ev("a", "b", "n", "2016-01-01")};
    const auto series = snapshot_series(events, reg, config, parse_instant("2016-01-01"), 30, parse_instant("2017-03-01"));
    double previous = std::numeric_limits<double>::infinity();
    bool vanished = false;
    for (const auto& s : series) {
        const double w = s.empty() ? 0.0 : s.weight(0, 1);
        const double gap = days_between(parse_instant("2016-01-01"), s.time());
        CHECK(w <= previous);
        CHECK(w == doctest::Approx(2.0 * oracle::aging_coeff(gap, 30, 365)).epsilon(1e-15));
        if (gap >= 365) {
            CHECK(s.empty());
            vanished = true;
        }
        previous = w;
    }
    CHECK(vanished);
}

TEST_CASE("stability-only weights equal impact sums") {
    std::mt19937_64 rng(3);
    EntityRegistry reg;
    for (int i = 0; i < 6; ++i) reg.add({oracle::node_name(static_cast<std::size_t>(i)), EntityKind::service});
    const auto config = config_of({{"a", {Mechanism::stability, 0.5}}, {"b", {Mechanism::stability, 2.0}}});
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<InteractionEvent> events;
        std::map<std::pair<std::size_t, std::size_t>, double> sum;
        const Instant at{1000000};
        for (int k = 0; k < 30; ++k) {
            std::size_t u = rng() % 6, v = rng() % 6;
            if (u == v) continue;
            const bool big = rng() % 2;
            const Instant t{static_cast<std::int64_t>(rng() % 1200000)};
            events.push_back({oracle::node_name(u), oracle::node_name(v), big ? "b" : "a", t});
            if (t <= at) sum[{std::min(u, v), std::max(u, v)}] += big ? 2.0 : 0.5;
        }
        std::stable_sort(events.begin(), events.end(),
                         [](const auto& x, const auto& y) { return x.timestamp < y.timestamp; });
        const auto snap = build_snapshot(events, reg, config, at);
        CHECK(snap.edge_count() == sum.size());
        for (const auto& [pair, w] : sum)
            CHECK(snap.weight(*snap.index_of(oracle::node_name(pair.first)),
                              *snap.index_of(oracle::node_name(pair.second))) == w);
    }
}

TEST_CASE("mutation-only history is order independent before the last event") {
    const auto reg = registry_of({"a", "b"});
    const auto config = config_of({{"x", {Mechanism::mutation, 1.0}}, {"y", {Mechanism::mutation, 3.0}},
                                   {"z", {Mechanism::mutation, 0.25}}});
    std::vector<std::string> rels{"x", "y", "x", "y"};
    std::sort(rels.begin(), rels.end());
    do {
        std::vector<InteractionEvent> events;
        for (std::size_t i = 0; i < rels.size(); ++i)
            events.push_back({"a", "b", rels[i], Instant{static_cast<std::int64_t>(i) * 100}});
        events.push_back({"a", "b", "z", Instant{1000}});
        CHECK(build_snapshot(events, reg, config, Instant{2000}).weight(0, 1) == 0.25);
    } while (std::next_permutation(rels.begin(), rels.end()));
}

TEST_CASE("parallel series equals serial reference and is reproducible") {
    std::mt19937_64 rng(5);
    EntityRegistry reg;
    for (int i = 0; i < 30; ++i) reg.add({oracle::node_name(static_cast<std::size_t>(i)), EntityKind::service});
    MechanismConfig config = config_of({{"s", {Mechanism::stability, 1.0}}, {"a", {Mechanism::aging, 2.0}},
                                        {"m", {Mechanism::mutation, 0.7}}});
    std::vector<InteractionEvent> events;
    const char* rels[] = {"s", "a", "m"};
    for (int k = 0; k < 2000; ++k) {
        std::size_t u = rng() % 30, v = rng() % 30;
        if (u == v) continue;
        events.push_back({oracle::node_name(u), oracle::node_name(v), rels[rng() % 3],
                          Instant{static_cast<std::int64_t>(rng() % (400LL * 86400))}});
    }
    std::stable_sort(events.begin(), events.end(), [](const auto& x, const auto& y) { return x.timestamp < y.timestamp; });
    const auto par = snapshot_series(events, reg, config, Instant{0}, 30, Instant{400LL * 86400});
    const auto ser = snapshot_series_serial(events, reg, config, Instant{0}, 30, Instant{400LL * 86400});
    REQUIRE(par.size() == ser.size());
    for (std::size_t i = 0; i < par.size(); ++i) {
        CHECK(par[i] == ser[i]);
        CHECK(build_snapshot(events, reg, config, par[i].time()) == par[i]);
        for (const auto& e : par[i].edges()) CHECK(e.weight > 0.0);
        for (std::size_t x = 0; x < par[i].node_count(); ++x) CHECK_FALSE(par[i].neighbors(x).empty());
    }
}

TEST_CASE("snapshot files round trip") {
    TempDir dir;
    const auto snap = Snapshot::from_edges(parse_instant("2016-01-01"), {{{"b", "a"}, 1.25}, {{"c", "b"}, 1.0 / 3.0}});
    CHECK(snap.nodes() == std::vector<std::string>{"a", "b", "c"});
    save_snapshot_series({snap, Snapshot(parse_instant("2016-01-31"), {}, {})}, dir / "snaps");
    const auto back = load_snapshot_series(dir / "snaps");
    REQUIRE(back.size() == 2);
    CHECK(back[0].time() == snap.time());
    CHECK(back[0].weight(0, 1) == 1.25);
    CHECK(std::abs(back[0].weight(1, 2) - 1.0 / 3.0) < 1e-9);
    CHECK(back[1].empty());
    CHECK(testing_support::read_text(dir / "snaps" / "snapshot_0000.csv").find("0.333333333") != std::string::npos);

    const auto msg = error_of([&] { load_snapshot_series(dir / "nothing"); });
    CHECK(msg.find("manifest.json") != std::string::npos);
}

TEST_CASE("snapshot invariants are enforced") {
    CHECK_THROWS_AS(Snapshot(Instant{0}, {"a", "b"}, {{0, 0, 1.0}}), Error);
    CHECK_THROWS_AS(Snapshot(Instant{0}, {"a", "b"}, {{0, 1, 0.0}}), Error);
    CHECK_THROWS_AS(Snapshot(Instant{0}, {"a", "b", "c"}, {{0, 1, 1.0}}), Error);
    CHECK_THROWS_AS(Snapshot(Instant{0}, {"a", "b"}, {{0, 1, 1.0}, {1, 0, 2.0}}), Error);
    CHECK_THROWS_AS(Snapshot(Instant{0}, {"a", "a"}, {{0, 1, 1.0}}), Error);
}
