#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "support.hpp"

#include "svcevo/error.hpp"
#include "svcevo/explain.hpp"

#include <set>

using namespace svcevo;

namespace {

TreeNode leaf(double cover, std::vector<double> value) { return {-1, 0.0, -1, -1, cover, std::move(value)}; }
TreeNode split(int feature, double threshold, int left, int right, double cover) {
    return {feature, threshold, left, right, cover, {}};
}

std::vector<double> uniform_row(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> x(n);
    for (auto& v : x) v = unit(rng);
    return x;
}

Forest random_forest(std::mt19937_64& rng, std::size_t trees, std::size_t features, std::size_t classes) {
    std::vector<DecisionTree> ts;
    for (std::size_t t = 0; t < trees; ++t) ts.push_back(oracle::random_tree(rng, features, 10, 7, classes));
    std::vector<std::string> names;
    for (std::size_t c = 0; c < classes; ++c) names.push_back("c" + std::to_string(c));
    return Forest(ForestParams{}, names, features, std::move(ts));
}

} // namespace

TEST_CASE("constant tree") {
    const DecisionTree t(5, 2, {leaf(10, {0.3, 0.7})});
    const auto a = tree_shap(t, std::vector<double>(5, 0.0));
    CHECK(a.base == std::vector<double>{0.3, 0.7});
    for (const auto& row : a.phi)
        for (double v : row) CHECK(v == 0.0);
}

TEST_CASE("stump") {
    const DecisionTree t(5, 2, {split(3, 0.5, 1, 2, 100), leaf(50, {1.0, 0.0}), leaf(50, {0.0, 1.0})});
    std::vector<double> x(5, 0.0);
    x[3] = 1.0;
    const auto a = tree_shap(t, x);
    CHECK(a.base[1] == 0.5);
    CHECK(a.phi[1][3] == 0.5);
    CHECK(a.phi[0][3] == -0.5);
    for (std::size_t f : {0, 1, 2, 4}) CHECK(a.phi[1][f] == 0.0);
    CHECK_THROWS_AS(DecisionTree(5, 2, {split(3, 0.5, 1, 2, 0), leaf(0, {1.0, 0.0}), leaf(0, {0.0, 1.0})}), Error);
}

TEST_CASE("matches exhaustive Shapley on random trees") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const auto tree = oracle::random_tree(rng, 14, 10, 8, 3);
        for (int sample = 0; sample < 4; ++sample) {
            const auto x = uniform_row(rng, 14);
            std::vector<double> base;
            const auto want = oracle::shapley(tree, x, &base);
            const auto got = tree_shap(tree, x);
            const auto& out = tree.leaf(x).value;
            for (std::size_t c = 0; c < 3; ++c) {
                CHECK(std::abs(got.base[c] - base[c]) <= 1e-9);
                double total = got.base[c];
                for (std::size_t f = 0; f < 14; ++f) {
                    CHECK(std::abs(got.phi[c][f] - want[c][f]) <= 1e-9);
                    total += got.phi[c][f];
                }
                CHECK(std::abs(total - out[c]) <= 1e-9);
            }
        }
    }
}

TEST_CASE("dummy and symmetric features") {
    std::mt19937_64 rng(18);
    for (int trial = 0; trial < 20; ++trial) {
        const auto tree = oracle::random_tree(rng, 12, 5, 6, 2);
        std::set<int> used;
        for (const auto& n : tree.nodes())
            if (!n.is_leaf()) used.insert(n.feature);
        const auto a = tree_shap(tree, uniform_row(rng, 12));
        for (int f = 0; f < 12; ++f)
            if (!used.contains(f))
                for (std::size_t c = 0; c < 2; ++c) CHECK(a.phi[c][static_cast<std::size_t>(f)] == 0.0);
    }
    // f0 and f1 play mirror roles; value counts how many exceed the threshold.
    const DecisionTree t(3, 1,
                         {split(0, 0.5, 1, 2, 100), split(1, 0.5, 3, 4, 50), split(1, 0.5, 5, 6, 50),
                          leaf(25, {0.0}), leaf(25, {1.0}), leaf(25, {1.0}), leaf(25, {2.0})});
    for (double v : {0.2, 0.9}) {
        const auto a = tree_shap(t, std::vector<double>{v, v, 0.0});
        CHECK(a.phi[0][0] == doctest::Approx(a.phi[0][1]).epsilon(1e-15));
        CHECK(a.phi[0][2] == 0.0);
    }
}

TEST_CASE("forest averages tree explanations") {
    const DecisionTree t1(2, 2, {split(0, 0.5, 1, 2, 10), leaf(4, {1.0, 0.0}), leaf(6, {0.2, 0.8})});
    const DecisionTree t2(2, 2, {split(1, 0.5, 1, 2, 10), leaf(5, {0.5, 0.5}), leaf(5, {0.0, 1.0})});
    const Forest f(ForestParams{}, {"a", "b"}, 2, {t1, t2});
    const std::vector<double> x{0.9, 0.1};
    // Hand values. t1: base_b = 0.4*0 + 0.6*0.8 = 0.48, phi0_b = 0.8 - 0.48 = 0.32.
    //              t2: base_b = 0.5*0.5 + 0.5*1 = 0.75, phi1_b = 0.5 - 0.75 = -0.25.
    const auto e = forest_shap(f, x);
    REQUIRE(e.size() == 2);
    CHECK(e[1].class_name == "b");
    CHECK(e[1].base_value == doctest::Approx((0.48 + 0.75) / 2).epsilon(1e-15));
    CHECK(e[1].phi[0] == doctest::Approx(0.32 / 2).epsilon(1e-15));
    CHECK(e[1].phi[1] == doctest::Approx(-0.25 / 2).epsilon(1e-15));
    CHECK(e[1].prediction == doctest::Approx((0.8 + 0.5) / 2).epsilon(1e-15));
    CHECK(forest_shap(f, x)[0].phi == e[0].phi);
}

TEST_CASE("local accuracy on trained forests, parallel equals serial") {
    std::mt19937_64 rng(19);
    Dataset d{kSequenceWidth, {"continuing", "growing", "shrinking"}, {}, {}};
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int r = 0; r < 90; ++r) {
        std::vector<double> x(kSequenceWidth);
        for (auto& v : x) v = noise(rng);
        x[10] += 2.0 * (r % 3);
        d.add(x, static_cast<std::size_t>(r % 3));
    }
    ForestParams p;
    p.n_trees = 25;
    const auto forest = train_forest(d, p);
    const auto par = explain_rows(forest, d);
    const auto ser = explain_rows_serial(forest, d);
    for (std::size_t r = 0; r < d.rows(); ++r) {
        const auto proba = forest.predict_proba(d.row(r));
        for (std::size_t c = 0; c < 3; ++c) {
            CHECK(par[r][c].phi == ser[r][c].phi);
            double total = par[r][c].base_value;
            for (double v : par[r][c].phi) total += v;
            CHECK(std::abs(total - proba[c]) <= 1e-6);
            CHECK(par[r][c].prediction == doctest::Approx(proba[c]).epsilon(1e-12));
        }
    }

    // Heatmap: independent aggregation of |phi|.
    const auto heat = importance_heatmap(forest, d);
    REQUIRE(heat.mean_abs.size() == 3);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t col = 0; col < kSequenceWidth; ++col) {
            double sum = 0.0;
            for (std::size_t r = 0; r < d.rows(); ++r) sum += std::abs(forest_shap(forest, d.row(r))[c].phi[col]);
            CHECK(heat.mean_abs[c][col] == doctest::Approx(sum / d.rows()).epsilon(1e-12));
            CHECK(heat.mean_abs[c][col] >= 0.0);
        }
    const auto single = importance_heatmap(explain_rows(forest, d.subset(std::vector<std::size_t>{4})));
    const auto e4 = forest_shap(forest, d.row(4));
    for (std::size_t col = 0; col < kSequenceWidth; ++col) CHECK(single.mean_abs[1][col] == std::abs(e4[1].phi[col]));

    // Dependence rows by hand indexing.
    const auto two = d.subset(std::vector<std::size_t>{0, 1});
    const auto rows = dependence_data(forest, two, "activity_mean", 2);
    REQUIRE(rows.size() == 2);
    for (std::size_t r = 0; r < 2; ++r) {
        const auto e = forest_shap(forest, two.row(r));
        const auto x = two.row(r);
        CHECK(rows[r].x == x[10]);
        CHECK(rows[r].y == e[2].phi[10] + e[2].phi[25] + e[2].phi[40]);
        CHECK(rows[r].delta1 == x[25] - x[10]);
        CHECK(rows[r].delta2 == x[40] - x[25]);
    }
    CHECK(rows[1].label == "growing");
    CHECK_THROWS_AS(dependence_data(forest, two, "colour", 0), Error);

    testing_support::TempDir dir;
    save_heatmap_csv(heat, dir / "heat.csv");
    save_dependence_csv(rows, dir / "dep.csv");
    const auto heat_text = testing_support::read_text(dir / "heat.csv");
    CHECK(heat_text.rfind("class,timestep,feature,mean_abs_shap\n", 0) == 0);
    CHECK(std::count(heat_text.begin(), heat_text.end(), '\n') == 1 + 3 * 45);
    CHECK(testing_support::read_text(dir / "dep.csv").rfind("x,y,delta1,delta2,label\n", 0) == 0);
}

TEST_CASE("uniform model has zero dependence") {
    const DecisionTree t(kSequenceWidth, 2, {leaf(10, {0.5, 0.5})});
    const Forest f(ForestParams{}, {"a", "b"}, kSequenceWidth, {t});
    Dataset d{kSequenceWidth, {"a", "b"}, {}, {}};
    d.add(std::vector<double>(kSequenceWidth, 1.0), 0);
    for (const auto& r : dependence_data(f, d, "size", 1)) CHECK(r.y == 0.0);
}

TEST_CASE("decision report") {
    std::mt19937_64 rng(20);
    const auto forest = random_forest(rng, 5, kSequenceWidth, 6);
    std::vector<FeatureVector> history(4);
    for (auto& v : history)
        for (auto& x : v) x = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const auto report = decision_report(forest, history, 4);
    double total = 0.0;
    for (const auto& [name, p] : report["probabilities"].items()) total += p.get<double>();
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(report["base_values"].size() == 6);
    for (const auto& [name, list] : report["contributors"].items()) {
        CHECK(list.size() == 4);
        for (std::size_t i = 1; i < list.size(); ++i)
            CHECK(std::abs(list[i - 1]["phi"].get<double>()) >= std::abs(list[i]["phi"].get<double>()));
    }
    // Only the newest three vectors matter.
    auto shifted = history;
    shifted[0][0] += 100.0;
    CHECK(decision_report(forest, shifted, 4) == report);
    CHECK_THROWS_AS(decision_report(forest, std::span(history).first(2)), Error);
}
