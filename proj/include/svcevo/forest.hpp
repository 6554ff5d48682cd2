#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace svcevo {

/// Row-major feature matrix with integer class labels.
struct Dataset {
    std::size_t n_features = 0;
    std::vector<std::string> class_names;
    std::vector<double> x;
    std::vector<std::size_t> y;

    std::size_t rows() const { return y.size(); }
    std::size_t n_classes() const { return class_names.size(); }
    std::span<const double> row(std::size_t i) const { return {x.data() + i * n_features, n_features}; }

    void add(std::span<const double> features, std::size_t label);
    Dataset subset(std::span<const std::size_t> indices) const;
};

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Per-class shuffled split; each class contributes round(n_c * test_fraction)
/// rows to the test side. Both index lists come back sorted.
Split stratified_split(std::span<const std::size_t> labels, double test_fraction, std::uint64_t seed);

enum class ClassWeighting { none, balanced };

struct ForestParams {
    std::size_t n_trees = 100;
    std::size_t max_depth = 0;  ///< 0 = unlimited
    std::size_t min_samples_leaf = 2;
    std::size_t features_per_split = 6;
    std::uint64_t seed = 0;
    ClassWeighting class_weighting = ClassWeighting::balanced;
    bool bootstrap = true;
};

/// Flattened binary tree. Internal nodes send `x[feature] <= threshold` left.
/// Leaves have `feature == -1` and carry a class-probability vector.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double cover = 0.0;  ///< training rows (with bootstrap multiplicity) reaching the node
    std::vector<double> value;

    bool is_leaf() const { return feature < 0; }
};

class DecisionTree {
public:
    DecisionTree() = default;
    DecisionTree(std::size_t n_features, std::size_t n_classes, std::vector<TreeNode> nodes);

    std::size_t n_features() const { return n_features_; }
    std::size_t n_classes() const { return n_classes_; }
    const std::vector<TreeNode>& nodes() const { return nodes_; }
    const TreeNode& root() const { return nodes_.front(); }

    /// Leaf reached by `x`.
    const TreeNode& leaf(std::span<const double> x) const;
    std::size_t depth() const;

    /// Checks the structural invariants; throws on a malformed tree.
    void validate() const;

private:
    std::size_t n_features_ = 0;
    std::size_t n_classes_ = 0;
    std::vector<TreeNode> nodes_;
};

/// Grows one CART tree (Gini) on `rows` of `data` (repeats allowed).
DecisionTree grow_tree(const Dataset& data, std::span<const std::size_t> rows,
                       std::span<const double> class_weights, const ForestParams& params, std::uint64_t seed);

class Forest {
public:
    Forest() = default;
    Forest(ForestParams params, std::vector<std::string> class_names, std::size_t n_features,
           std::vector<DecisionTree> trees);

    const ForestParams& params() const { return params_; }
    const std::vector<std::string>& class_names() const { return class_names_; }
    std::size_t n_classes() const { return class_names_.size(); }
    std::size_t n_features() const { return n_features_; }
    const std::vector<DecisionTree>& trees() const { return trees_; }

    /// Mean of the trees' leaf distributions. Throws on a wrong dimension.
    std::vector<double> predict_proba(std::span<const double> x) const;
    /// Arg-max class; ties go to the lower index.
    std::size_t predict(std::span<const double> x) const;

private:
    ForestParams params_;
    std::vector<std::string> class_names_;
    std::size_t n_features_ = 0;
    std::vector<DecisionTree> trees_;
};

/// Trees grown in parallel; bit-identical to train_forest_serial.
Forest train_forest(const Dataset& data, const ForestParams& params);
Forest train_forest_serial(const Dataset& data, const ForestParams& params);

/// Single unbagged tree considering every feature at each split.
Forest train_decision_tree(const Dataset& data, ForestParams params);

/// Always predicts the most frequent training class (ties: smallest name).
struct MajorityBaseline {
    std::size_t label = 0;
    std::vector<std::string> class_names;

    static MajorityBaseline fit(const Dataset& data);
    std::size_t predict(std::span<const double>) const { return label; }
};

struct ClassMetrics {
    std::string name;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
    std::size_t predicted = 0;
    bool defined = true;  ///< false when the class is neither present nor predicted
};

struct Metrics {
    std::vector<ClassMetrics> classes;
    double macro_f1 = 0.0;  ///< over defined classes
    double accuracy = 0.0;
    std::vector<std::vector<std::size_t>> confusion;  ///< [truth][predicted]
};

Metrics evaluate(std::span<const std::size_t> truth, std::span<const std::size_t> predicted,
                 const std::vector<std::string>& class_names);
Metrics evaluate(const Forest& forest, const Dataset& test);
Metrics evaluate(const MajorityBaseline& baseline, const Dataset& test);

std::string serialize_forest(const Forest& forest);
Forest deserialize_forest(const std::string& text);
void save_forest(const Forest& forest, const std::filesystem::path& path);
Forest load_forest(const std::filesystem::path& path);

} // namespace svcevo
