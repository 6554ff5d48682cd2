#include "svcevo/explain.hpp"

#include "svcevo/error.hpp"
#include "text_io.hpp"

#include <algorithm>
#include <cmath>

namespace svcevo {

namespace {

// One entry of the unique-feature path; `weight` is the permutation weight
// of the subsets ending at this depth.
struct PathElement {
    int feature = -1;
    double zero_fraction = 0.0;
    double one_fraction = 0.0;
    double weight = 0.0;
};

void extend_path(std::vector<PathElement>& path, std::size_t depth, double zero_fraction, double one_fraction,
                 int feature) {
    path[depth] = {feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0};
    const double d = static_cast<double>(depth);
    for (std::size_t i = depth; i-- > 0;) {
        const double fi = static_cast<double>(i);
        path[i + 1].weight += one_fraction * path[i].weight * (fi + 1.0) / (d + 1.0);
        path[i].weight = zero_fraction * path[i].weight * (d - fi) / (d + 1.0);
    }
}

void unwind_path(std::vector<PathElement>& path, std::size_t depth, std::size_t index) {
    const double one = path[index].one_fraction;
    const double zero = path[index].zero_fraction;
    const double d = static_cast<double>(depth);
    double next = path[depth].weight;
    for (std::size_t i = depth; i-- > 0;) {
        const double fi = static_cast<double>(i);
        if (one != 0.0) {
            const double tmp = path[i].weight;
            path[i].weight = next * (d + 1.0) / ((fi + 1.0) * one);
            next = tmp - path[i].weight * zero * (d - fi) / (d + 1.0);
        } else {
            path[i].weight = path[i].weight * (d + 1.0) / (zero * (d - fi));
        }
    }
    for (std::size_t i = index; i < depth; ++i) {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
}

double unwound_sum(const std::vector<PathElement>& path, std::size_t depth, std::size_t index) {
    const double one = path[index].one_fraction;
    const double zero = path[index].zero_fraction;
    const double d = static_cast<double>(depth);
    double next = path[depth].weight;
    double total = 0.0;
    for (std::size_t i = depth; i-- > 0;) {
        const double fi = static_cast<double>(i);
        if (one != 0.0) {
            const double tmp = next * (d + 1.0) / ((fi + 1.0) * one);
            total += tmp;
            next = path[i].weight - tmp * zero * (d - fi) / (d + 1.0);
        } else {
            total += path[i].weight / (zero * (d - fi) / (d + 1.0));
        }
    }
    return total;
}

class ShapWalker {
public:
    ShapWalker(const DecisionTree& tree, std::span<const double> x, TreeAttribution& out)
        : tree_(tree), x_(x), out_(out) {}

    void run() {
        std::vector<PathElement> path(tree_.depth() + 2);
        recurse(0, path, 0, 1.0, 1.0, -1);
    }

private:
    void recurse(int node_id, std::vector<PathElement> path, std::size_t depth, double zero_fraction,
                 double one_fraction, int feature) {
        const auto& node = tree_.nodes()[node_id];
        extend_path(path, depth, zero_fraction, one_fraction, feature);
        if (node.is_leaf()) {
            for (std::size_t i = 1; i <= depth; ++i) {
                const double w = unwound_sum(path, depth, i);
                const auto& el = path[i];
                const double scale = w * (el.one_fraction - el.zero_fraction);
                for (std::size_t c = 0; c < node.value.size(); ++c) out_.phi[c][el.feature] += scale * node.value[c];
            }
            return;
        }
        const bool goes_left = x_[node.feature] <= node.threshold;
        const int hot = goes_left ? node.left : node.right;
        const int cold = goes_left ? node.right : node.left;
        double incoming_zero = 1.0, incoming_one = 1.0;
        std::size_t k = 1;
        for (; k <= depth; ++k)
            if (path[k].feature == node.feature) break;
        if (k <= depth) {
            incoming_zero = path[k].zero_fraction;
            incoming_one = path[k].one_fraction;
            unwind_path(path, depth, k);
            --depth;
        }
        const double cover = node.cover;
        recurse(hot, path, depth + 1, incoming_zero * tree_.nodes()[hot].cover / cover, incoming_one, node.feature);
        recurse(cold, path, depth + 1, incoming_zero * tree_.nodes()[cold].cover / cover, 0.0, node.feature);
    }

    const DecisionTree& tree_;
    std::span<const double> x_;
    TreeAttribution& out_;
};

std::vector<double> expected_value(const DecisionTree& tree) {
    const auto& nodes = tree.nodes();
    std::vector<double> expected(tree.n_classes(), 0.0);
    const double root = nodes.front().cover;
    for (const auto& node : nodes)
        if (node.is_leaf())
            for (std::size_t c = 0; c < expected.size(); ++c) expected[c] += node.cover / root * node.value[c];
    return expected;
}

} // namespace

TreeAttribution tree_shap(const DecisionTree& tree, std::span<const double> x) {
    if (x.size() != tree.n_features()) throw Error("tree_shap: wrong feature dimension");
    for (const auto& node : tree.nodes())
        if (!(node.cover > 0.0)) throw Error("tree_shap: zero-cover node");
    TreeAttribution out;
    out.base = expected_value(tree);
    out.phi.assign(tree.n_classes(), std::vector<double>(tree.n_features(), 0.0));
    ShapWalker(tree, x, out).run();
    return out;
}

std::vector<Explanation> forest_shap(const Forest& forest, std::span<const double> x) {
    const auto k = forest.n_classes();
    std::vector<Explanation> result(k);
    for (std::size_t c = 0; c < k; ++c) {
        result[c].class_index = c;
        result[c].class_name = forest.class_names()[c];
        result[c].phi.assign(forest.n_features(), 0.0);
    }
    for (const auto& tree : forest.trees()) {
        const auto a = tree_shap(tree, x);
        for (std::size_t c = 0; c < k; ++c) {
            result[c].base_value += a.base[c];
            for (std::size_t f = 0; f < forest.n_features(); ++f) result[c].phi[f] += a.phi[c][f];
        }
    }
    const double n = static_cast<double>(forest.trees().size());
    const auto proba = forest.predict_proba(x);
    for (std::size_t c = 0; c < k; ++c) {
        result[c].base_value /= n;
        for (auto& v : result[c].phi) v /= n;
        result[c].prediction = proba[c];
    }
    return result;
}

std::vector<std::vector<Explanation>> explain_rows(const Forest& forest, const Dataset& data) {
    std::vector<std::vector<Explanation>> out(data.rows());
    const auto rows = static_cast<std::ptrdiff_t>(data.rows());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < rows; ++i) out[i] = forest_shap(forest, data.row(static_cast<std::size_t>(i)));
    return out;
}

std::vector<std::vector<Explanation>> explain_rows_serial(const Forest& forest, const Dataset& data) {
    std::vector<std::vector<Explanation>> out;
    for (std::size_t i = 0; i < data.rows(); ++i) out.push_back(forest_shap(forest, data.row(i)));
    return out;
}

ImportanceSummary importance_heatmap(const std::vector<std::vector<Explanation>>& explanations) {
    if (explanations.empty()) throw Error("importance_heatmap: no samples");
    ImportanceSummary summary;
    for (const auto& e : explanations.front()) {
        summary.class_names.push_back(e.class_name);
        summary.mean_abs.emplace_back(e.phi.size(), 0.0);
    }
    for (const auto& row : explanations)
        for (std::size_t c = 0; c < row.size(); ++c)
            for (std::size_t f = 0; f < row[c].phi.size(); ++f) summary.mean_abs[c][f] += std::abs(row[c].phi[f]);
    for (auto& per_class : summary.mean_abs)
        for (auto& v : per_class) v /= static_cast<double>(explanations.size());
    return summary;
}

ImportanceSummary importance_heatmap(const Forest& forest, const Dataset& data) {
    return importance_heatmap(explain_rows(forest, data));
}

void save_heatmap_csv(const ImportanceSummary& summary, const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    out << "class,timestep,feature,mean_abs_shap\n";
    for (std::size_t c = 0; c < summary.class_names.size(); ++c)
        for (std::size_t col = 0; col < summary.mean_abs[c].size(); ++col) {
            const auto step = col / kFeatureCount;
            const auto feature = col % kFeatureCount;
            out << summary.class_names[c] << ',' << (step < kSequenceLength ? kTimestepNames[step] : "?") << ','
                << kFeatureNames[feature] << ',' << detail::format_exact(summary.mean_abs[c][col]) << '\n';
        }
}

std::vector<DependenceRow> dependence_data(const std::vector<std::vector<Explanation>>& explanations,
                                           const Dataset& data, std::string_view feature, std::size_t class_index) {
    const auto f = feature_index(feature);
    if (data.n_features != kSequenceWidth) throw Error("dependence_data: expected 45-column sequence data");
    if (explanations.size() != data.rows()) throw Error("dependence_data: explanation count differs from rows");
    std::vector<DependenceRow> rows;
    for (std::size_t i = 0; i < data.rows(); ++i) {
        if (class_index >= explanations[i].size()) throw Error("dependence_data: class index out of range");
        const auto x = data.row(i);
        const auto& phi = explanations[i][class_index].phi;
        DependenceRow r;
        r.x = x[f];
        r.y = phi[f] + phi[kFeatureCount + f] + phi[2 * kFeatureCount + f];
        r.delta1 = x[kFeatureCount + f] - x[f];
        r.delta2 = x[2 * kFeatureCount + f] - x[kFeatureCount + f];
        r.label = data.class_names[data.y[i]];
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<DependenceRow> dependence_data(const Forest& forest, const Dataset& data, std::string_view feature,
                                           std::size_t class_index) {
    feature_index(feature);
    if (class_index >= forest.n_classes()) throw Error("dependence_data: class index out of range");
    return dependence_data(explain_rows(forest, data), data, feature, class_index);
}

void save_dependence_csv(const std::vector<DependenceRow>& rows, const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    out << "x,y,delta1,delta2,label\n";
    for (const auto& r : rows)
        out << detail::format_exact(r.x) << ',' << detail::format_exact(r.y) << ',' << detail::format_exact(r.delta1)
            << ',' << detail::format_exact(r.delta2) << ',' << r.label << '\n';
}

nlohmann::json decision_report(const Forest& forest, std::span<const FeatureVector> history, std::size_t top_k,
                               bool delta) {
    using nlohmann::json;
    if (history.size() < kSequenceLength)
        throw Error("decision_report: need " + std::to_string(kSequenceLength) + " feature vectors, got " +
                    std::to_string(history.size()));
    const auto recent = history.subspan(history.size() - kSequenceLength);
    std::vector<double> x(kSequenceWidth);
    for (std::size_t j = 0; j < kSequenceLength; ++j)
        for (std::size_t f = 0; f < kFeatureCount; ++f)
            x[j * kFeatureCount + f] = recent[j][f] - (delta && j > 0 ? recent[j - 1][f] : 0.0);
    const auto columns = sequence_column_names();
    const auto explanations = forest_shap(forest, x);

    json report;
    report["probabilities"] = json::object();
    report["base_values"] = json::object();
    report["contributors"] = json::object();
    for (const auto& e : explanations) {
        report["probabilities"][e.class_name] = e.prediction;
        report["base_values"][e.class_name] = e.base_value;
        std::vector<std::size_t> order(e.phi.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(),
                         [&](auto a, auto b) { return std::abs(e.phi[a]) > std::abs(e.phi[b]); });
        json ranked = json::array();
        for (std::size_t r = 0; r < std::min(top_k, order.size()); ++r) {
            const auto col = order[r];
            ranked.push_back({{"feature", columns[col]}, {"value", x[col]}, {"phi", e.phi[col]}});
        }
        report["contributors"][e.class_name] = std::move(ranked);
    }
    return report;
}

} // namespace svcevo
