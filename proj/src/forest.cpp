#include "svcevo/forest.hpp"

#include "svcevo/error.hpp"
#include "text_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace svcevo {

void Dataset::add(std::span<const double> features, std::size_t label) {
    if (features.size() != n_features) throw Error("dataset row has wrong dimension");
    if (label >= class_names.size()) throw Error("dataset label out of range");
    x.insert(x.end(), features.begin(), features.end());
    y.push_back(label);
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out{n_features, class_names, {}, {}};
    for (auto i : indices) out.add(row(i), y[i]);
    return out;
}

Split stratified_split(std::span<const std::size_t> labels, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw Error("test fraction must lie in [0, 1)");
    std::mt19937_64 rng(seed);
    const std::size_t classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    Split split;
    for (std::size_t c = 0; c < classes; ++c) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == c) members.push_back(i);
        std::shuffle(members.begin(), members.end(), rng);
        const auto n_test = static_cast<std::size_t>(std::lround(static_cast<double>(members.size()) * test_fraction));
        split.test.insert(split.test.end(), members.begin(), members.begin() + n_test);
        split.train.insert(split.train.end(), members.begin() + n_test, members.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

DecisionTree::DecisionTree(std::size_t n_features, std::size_t n_classes, std::vector<TreeNode> nodes)
    : n_features_(n_features), n_classes_(n_classes), nodes_(std::move(nodes)) {
    validate();
}

const TreeNode& DecisionTree::leaf(std::span<const double> x) const {
    const TreeNode* node = &nodes_.front();
    while (!node->is_leaf()) node = &nodes_[x[node->feature] <= node->threshold ? node->left : node->right];
    return *node;
}

std::size_t DecisionTree::depth() const {
    std::vector<std::size_t> level(nodes_.size(), 0);
    std::size_t deepest = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        deepest = std::max(deepest, level[i]);
        if (!nodes_[i].is_leaf()) level[nodes_[i].left] = level[nodes_[i].right] = level[i] + 1;
    }
    return deepest;
}

void DecisionTree::validate() const {
    if (nodes_.empty()) throw Error("tree has no nodes");
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const auto& node = nodes_[i];
        if (!(node.cover > 0.0)) throw Error("tree node " + std::to_string(i) + " has zero cover");
        if (node.is_leaf()) {
            if (node.value.size() != n_classes_) throw Error("leaf " + std::to_string(i) + " has wrong class count");
            continue;
        }
        if (static_cast<std::size_t>(node.feature) >= n_features_) throw Error("split feature out of range");
        // Children are stored after their parent, which also rules out cycles.
        for (int child : {node.left, node.right})
            if (child <= static_cast<int>(i) || child >= static_cast<int>(nodes_.size()))
                throw Error("tree node " + std::to_string(i) + " has an invalid child");
        if (std::abs(nodes_[node.left].cover + nodes_[node.right].cover - node.cover) > 1e-9 * node.cover)
            throw Error("tree node " + std::to_string(i) + " covers do not add up");
    }
}

namespace {

double gini(std::span<const double> class_weight, double total) {
    if (total <= 0.0) return 0.0;
    double sum = 0.0;
    for (double w : class_weight) sum += (w / total) * (w / total);
    return 1.0 - sum;
}

class TreeBuilder {
public:
    TreeBuilder(const Dataset& data, std::span<const double> class_weights, const ForestParams& params,
                std::uint64_t seed)
        : data_(data), class_weights_(class_weights), params_(params), rng_(seed) {
        features_.resize(data.n_features);
        std::iota(features_.begin(), features_.end(), 0);
    }

    DecisionTree build(std::vector<std::size_t> rows) {
        grow(rows, 0);
        return DecisionTree(data_.n_features, data_.n_classes(), std::move(nodes_));
    }

private:
    struct Candidate {
        int feature = -1;
        double threshold = 0.0;
        double impurity = 0.0;
        std::size_t left_count = 0;
    };

    int grow(std::vector<std::size_t>& rows, std::size_t depth) {
        const std::size_t k = data_.n_classes();
        std::vector<double> totals(k, 0.0);
        for (auto r : rows) totals[data_.y[r]] += class_weights_[data_.y[r]];
        const double weight = std::accumulate(totals.begin(), totals.end(), 0.0);

        const int id = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        nodes_[id].cover = static_cast<double>(rows.size());

        const double impurity = gini(totals, weight);
        const bool stop = impurity <= 0.0 || rows.size() < 2 * params_.min_samples_leaf ||
                          (params_.max_depth > 0 && depth >= params_.max_depth);
        Candidate best;
        if (!stop) best = find_split(rows, totals, weight);
        if (best.feature < 0) {
            std::vector<double> value(k);
            for (std::size_t c = 0; c < k; ++c) value[c] = totals[c] / weight;
            nodes_[id].value = std::move(value);
            return id;
        }

        std::vector<std::size_t> left, right;
        for (auto r : rows) (data_.row(r)[best.feature] <= best.threshold ? left : right).push_back(r);
        rows.clear();
        rows.shrink_to_fit();
        nodes_[id].feature = best.feature;
        nodes_[id].threshold = best.threshold;
        const int l = grow(left, depth + 1);
        nodes_[id].left = l;
        const int r = grow(right, depth + 1);
        nodes_[id].right = r;
        return id;
    }

    Candidate find_split(const std::vector<std::size_t>& rows, const std::vector<double>& totals, double weight) {
        std::shuffle(features_.begin(), features_.end(), rng_);
        const std::size_t k = data_.n_classes();
        const std::size_t min_leaf = std::max<std::size_t>(params_.min_samples_leaf, 1);
        Candidate best;
        best.impurity = std::numeric_limits<double>::infinity();
        std::size_t examined = 0;
        std::vector<std::pair<double, std::size_t>> column(rows.size());
        std::vector<double> left_weight(k);
        for (const std::size_t f : features_) {
            if (examined >= params_.features_per_split && best.feature >= 0) break;
            for (std::size_t i = 0; i < rows.size(); ++i) column[i] = {data_.row(rows[i])[f], data_.y[rows[i]]};
            std::sort(column.begin(), column.end());
            if (column.front().first == column.back().first) continue;  // constant here; does not count
            ++examined;
            std::fill(left_weight.begin(), left_weight.end(), 0.0);
            double left_total = 0.0;
            for (std::size_t i = 0; i + 1 < column.size(); ++i) {
                const double w = class_weights_[column[i].second];
                left_weight[column[i].second] += w;
                left_total += w;
                const std::size_t n_left = i + 1;
                if (column[i].first == column[i + 1].first) continue;
                if (n_left < min_leaf || column.size() - n_left < min_leaf) continue;
                double right_sq = 0.0, left_sq = 0.0;
                const double right_total = weight - left_total;
                for (std::size_t c = 0; c < k; ++c) {
                    left_sq += left_weight[c] * left_weight[c];
                    const double rw = totals[c] - left_weight[c];
                    right_sq += rw * rw;
                }
                const double child = (left_total - left_sq / left_total) + (right_total - right_sq / right_total);
                const double impurity = child / weight;
                if (impurity < best.impurity) {
                    best = {static_cast<int>(f), column[i].first, impurity, n_left};
                }
            }
        }
        return best;
    }

    const Dataset& data_;
    std::span<const double> class_weights_;
    const ForestParams& params_;
    std::mt19937_64 rng_;
    std::vector<std::size_t> features_;
    std::vector<TreeNode> nodes_;
};

std::vector<double> class_weights_for(const Dataset& data, ClassWeighting weighting) {
    std::vector<double> weights(data.n_classes(), 1.0);
    if (weighting == ClassWeighting::none) return weights;
    std::vector<std::size_t> counts(data.n_classes(), 0);
    for (auto label : data.y) ++counts[label];
    const auto present = static_cast<double>(std::count_if(counts.begin(), counts.end(), [](auto n) { return n > 0; }));
    for (std::size_t c = 0; c < counts.size(); ++c)
        if (counts[c] > 0) weights[c] = static_cast<double>(data.rows()) / (present * static_cast<double>(counts[c]));
    return weights;
}

void check_trainable(const Dataset& data, const ForestParams& params) {
    if (data.rows() == 0) throw Error("cannot train on an empty dataset");
    if (data.n_classes() == 0) throw Error("dataset has no class names");
    std::vector<bool> seen(data.n_classes(), false);
    for (auto label : data.y) seen[label] = true;
    if (std::count(seen.begin(), seen.end(), true) < 2) throw Error("training data contains a single class");
    if (data.rows() < 2 * params.min_samples_leaf) throw Error("too few training rows for min_samples_leaf");
    if (params.n_trees == 0) throw Error("n_trees must be >= 1");
    if (params.features_per_split == 0) throw Error("features_per_split must be >= 1");
}

std::uint64_t tree_seed(std::uint64_t seed, std::size_t tree) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(tree)};
    std::uint32_t parts[2];
    seq.generate(parts, parts + 2);
    return (static_cast<std::uint64_t>(parts[0]) << 32) | parts[1];
}

DecisionTree train_one(const Dataset& data, std::span<const double> weights, const ForestParams& params,
                       std::size_t index) {
    const std::uint64_t seed = tree_seed(params.seed, index);
    std::vector<std::size_t> rows(data.rows());
    if (params.bootstrap) {
        std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
        std::uniform_int_distribution<std::size_t> pick(0, data.rows() - 1);
        for (auto& r : rows) r = pick(rng);
        std::sort(rows.begin(), rows.end());
    } else {
        std::iota(rows.begin(), rows.end(), 0);
    }
    return grow_tree(data, rows, weights, params, seed);
}

} // namespace

DecisionTree grow_tree(const Dataset& data, std::span<const std::size_t> rows, std::span<const double> class_weights,
                       const ForestParams& params, std::uint64_t seed) {
    if (rows.empty()) throw Error("cannot grow a tree on zero rows");
    TreeBuilder builder(data, class_weights, params, seed);
    return builder.build({rows.begin(), rows.end()});
}

Forest::Forest(ForestParams params, std::vector<std::string> class_names, std::size_t n_features,
               std::vector<DecisionTree> trees)
    : params_(params), class_names_(std::move(class_names)), n_features_(n_features), trees_(std::move(trees)) {
    if (trees_.empty()) throw Error("forest has no trees");
    for (const auto& t : trees_)
        if (t.n_features() != n_features_ || t.n_classes() != class_names_.size())
            throw Error("forest trees disagree on dimensions");
}

std::vector<double> Forest::predict_proba(std::span<const double> x) const {
    if (x.size() != n_features_)
        throw Error("expected " + std::to_string(n_features_) + " features, got " + std::to_string(x.size()));
    std::vector<double> mean(n_classes(), 0.0);
    for (const auto& tree : trees_) {
        const auto& value = tree.leaf(x).value;
        for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += value[c];
    }
    for (auto& p : mean) p /= static_cast<double>(trees_.size());
    return mean;
}

std::size_t Forest::predict(std::span<const double> x) const {
    const auto p = predict_proba(x);
    return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

Forest train_forest(const Dataset& data, const ForestParams& params) {
    check_trainable(data, params);
    const auto weights = class_weights_for(data, params.class_weighting);
    std::vector<DecisionTree> trees(params.n_trees);
    const auto count = static_cast<std::ptrdiff_t>(params.n_trees);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < count; ++i) trees[i] = train_one(data, weights, params, static_cast<std::size_t>(i));
    return Forest(params, data.class_names, data.n_features, std::move(trees));
}

Forest train_forest_serial(const Dataset& data, const ForestParams& params) {
    check_trainable(data, params);
    const auto weights = class_weights_for(data, params.class_weighting);
    std::vector<DecisionTree> trees;
    for (std::size_t i = 0; i < params.n_trees; ++i) trees.push_back(train_one(data, weights, params, i));
    return Forest(params, data.class_names, data.n_features, std::move(trees));
}

Forest train_decision_tree(const Dataset& data, ForestParams params) {
    params.n_trees = 1;
    params.bootstrap = false;
    params.features_per_split = data.n_features;
    return train_forest_serial(data, params);
}

MajorityBaseline MajorityBaseline::fit(const Dataset& data) {
    if (data.rows() == 0) throw Error("cannot fit a baseline on an empty dataset");
    std::vector<std::size_t> counts(data.n_classes(), 0);
    for (auto label : data.y) ++counts[label];
    std::size_t best = 0;
    for (std::size_t c = 1; c < counts.size(); ++c)
        if (counts[c] > counts[best] || (counts[c] == counts[best] && data.class_names[c] < data.class_names[best]))
            best = c;
    return {best, data.class_names};
}

Metrics evaluate(std::span<const std::size_t> truth, std::span<const std::size_t> predicted,
                 const std::vector<std::string>& class_names) {
    if (truth.size() != predicted.size()) throw Error("evaluate: truth and prediction counts differ");
    if (truth.empty()) throw Error("evaluate: empty test set");
    const auto k = class_names.size();
    Metrics m;
    m.confusion.assign(k, std::vector<std::size_t>(k, 0));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ++m.confusion.at(truth[i]).at(predicted[i]);
        if (truth[i] == predicted[i]) ++correct;
    }
    m.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
    double f1_sum = 0.0;
    std::size_t defined = 0;
    for (std::size_t c = 0; c < k; ++c) {
        ClassMetrics cm;
        cm.name = class_names[c];
        const std::size_t tp = m.confusion[c][c];
        for (std::size_t j = 0; j < k; ++j) {
            cm.support += m.confusion[c][j];
            cm.predicted += m.confusion[j][c];
        }
        cm.defined = cm.support > 0 || cm.predicted > 0;
        if (cm.predicted > 0) cm.precision = static_cast<double>(tp) / static_cast<double>(cm.predicted);
        if (cm.support > 0) cm.recall = static_cast<double>(tp) / static_cast<double>(cm.support);
        if (cm.precision + cm.recall > 0.0) cm.f1 = 2.0 * cm.precision * cm.recall / (cm.precision + cm.recall);
        if (cm.defined) {
            f1_sum += cm.f1;
            ++defined;
        }
        m.classes.push_back(cm);
    }
    m.macro_f1 = defined > 0 ? f1_sum / static_cast<double>(defined) : 0.0;
    return m;
}

Metrics evaluate(const Forest& forest, const Dataset& test) {
    std::vector<std::size_t> predicted;
    for (std::size_t i = 0; i < test.rows(); ++i) predicted.push_back(forest.predict(test.row(i)));
    return evaluate(test.y, predicted, test.class_names);
}

Metrics evaluate(const MajorityBaseline& baseline, const Dataset& test) {
    std::vector<std::size_t> predicted(test.rows(), baseline.label);
    return evaluate(test.y, predicted, test.class_names);
}

std::string serialize_forest(const Forest& forest) {
    using nlohmann::json;
    const auto& p = forest.params();
    json doc;
    doc["format"] = "svcevo-forest";
    doc["version"] = 1;
    doc["hyperparameters"] = {{"n_trees", p.n_trees},
                              {"max_depth", p.max_depth},
                              {"min_samples_leaf", p.min_samples_leaf},
                              {"features_per_split", p.features_per_split},
                              {"seed", p.seed},
                              {"class_weighting", p.class_weighting == ClassWeighting::balanced ? "balanced" : "none"},
                              {"bootstrap", p.bootstrap}};
    doc["class_names"] = forest.class_names();
    doc["n_features"] = forest.n_features();
    json trees = json::array();
    for (const auto& tree : forest.trees()) {
        json feature = json::array(), threshold = json::array(), left = json::array(), right = json::array(),
             cover = json::array(), value = json::array();
        for (const auto& node : tree.nodes()) {
            feature.push_back(node.feature);
            threshold.push_back(node.threshold);
            left.push_back(node.left);
            right.push_back(node.right);
            cover.push_back(node.cover);
            value.push_back(node.value);
        }
        trees.push_back({{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right},
                         {"cover", cover}, {"value", value}});
    }
    doc["trees"] = std::move(trees);
    return doc.dump() + "\n";
}

Forest deserialize_forest(const std::string& text) {
    using nlohmann::json;
    try {
        const auto doc = json::parse(text);
        if (doc.at("format") != "svcevo-forest") throw Error("not a forest model file");
        if (doc.at("version") != 1) throw Error("unsupported forest model version");
        const auto& h = doc.at("hyperparameters");
        ForestParams p;
        p.n_trees = h.at("n_trees").get<std::size_t>();
        p.max_depth = h.at("max_depth").get<std::size_t>();
        p.min_samples_leaf = h.at("min_samples_leaf").get<std::size_t>();
        p.features_per_split = h.at("features_per_split").get<std::size_t>();
        p.seed = h.at("seed").get<std::uint64_t>();
        p.class_weighting = h.at("class_weighting") == "balanced" ? ClassWeighting::balanced : ClassWeighting::none;
        p.bootstrap = h.at("bootstrap").get<bool>();
        const auto names = doc.at("class_names").get<std::vector<std::string>>();
        const auto n_features = doc.at("n_features").get<std::size_t>();
        std::vector<DecisionTree> trees;
        for (const auto& t : doc.at("trees")) {
            const auto feature = t.at("feature").get<std::vector<int>>();
            const auto threshold = t.at("threshold").get<std::vector<double>>();
            const auto left = t.at("left").get<std::vector<int>>();
            const auto right = t.at("right").get<std::vector<int>>();
            const auto cover = t.at("cover").get<std::vector<double>>();
            const auto value = t.at("value").get<std::vector<std::vector<double>>>();
            const auto n = feature.size();
            if (threshold.size() != n || left.size() != n || right.size() != n || cover.size() != n || value.size() != n)
                throw Error("forest model: node arrays differ in length");
            std::vector<TreeNode> nodes(n);
            for (std::size_t i = 0; i < n; ++i) nodes[i] = {feature[i], threshold[i], left[i], right[i], cover[i], value[i]};
            trees.emplace_back(n_features, names.size(), std::move(nodes));
        }
        return Forest(p, names, n_features, std::move(trees));
    } catch (const json::exception& e) {
        throw Error(std::string("malformed forest model: ") + e.what());
    }
}

void save_forest(const Forest& forest, const std::filesystem::path& path) {
    detail::open_output(path) << serialize_forest(forest);
}

Forest load_forest(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw Error("missing model file " + path.string() + " (run the train stage first)");
    try {
        return deserialize_forest(detail::read_file(path));
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

} // namespace svcevo
