#pragma once

#include "svcevo/features.hpp"
#include "svcevo/forest.hpp"

#include <json.hpp>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace svcevo {

/// Shapley attribution of one tree output, one row per class.
struct TreeAttribution {
    std::vector<double> base;              ///< cover-weighted expected output per class
    std::vector<std::vector<double>> phi;  ///< [class][feature]
};

/// Exact path-dependent Shapley values of a tree: features outside the
/// coalition descend both branches weighted by cover fractions.
/// Polynomial in depth; throws on a zero-cover node.
TreeAttribution tree_shap(const DecisionTree& tree, std::span<const double> x);

/// Attribution of one class output of the forest.
struct Explanation {
    std::size_t class_index = 0;
    std::string class_name;
    double base_value = 0.0;
    std::vector<double> phi;
    double prediction = 0.0;
};

/// One Explanation per class, averaged over the trees.
std::vector<Explanation> forest_shap(const Forest& forest, std::span<const double> x);

/// forest_shap of every row of `data`, parallel over rows.
std::vector<std::vector<Explanation>> explain_rows(const Forest& forest, const Dataset& data);
std::vector<std::vector<Explanation>> explain_rows_serial(const Forest& forest, const Dataset& data);

/// Mean |phi| per (class, sequence column).
struct ImportanceSummary {
    std::vector<std::string> class_names;
    std::vector<std::vector<double>> mean_abs;  ///< [class][column]
};

ImportanceSummary importance_heatmap(const std::vector<std::vector<Explanation>>& explanations);
ImportanceSummary importance_heatmap(const Forest& forest, const Dataset& data);
/// `class,timestep,feature,mean_abs_shap`.
void save_heatmap_csv(const ImportanceSummary& summary, const std::filesystem::path& path);

struct DependenceRow {
    double x = 0.0;       ///< oldest-timestep value of the feature
    double y = 0.0;       ///< phi summed over the three timesteps
    double delta1 = 0.0;  ///< tm1 - tm2
    double delta2 = 0.0;  ///< t0 - tm1
    std::string label;    ///< true event of the row
};

/// Throws on an unknown feature name or class.
std::vector<DependenceRow> dependence_data(const std::vector<std::vector<Explanation>>& explanations,
                                           const Dataset& data, std::string_view feature, std::size_t class_index);
std::vector<DependenceRow> dependence_data(const Forest& forest, const Dataset& data, std::string_view feature,
                                           std::size_t class_index);
/// `x,y,delta1,delta2,label`.
void save_dependence_csv(const std::vector<DependenceRow>& rows, const std::filesystem::path& path);

/// Per-class probability, base value and the `top_k` largest |phi|
/// contributors for the most recent three feature vectors of a community.
/// Throws when fewer than three vectors are given.
nlohmann::json decision_report(const Forest& forest, std::span<const FeatureVector> history, std::size_t top_k = 5,
                               bool delta = false);

} // namespace svcevo
