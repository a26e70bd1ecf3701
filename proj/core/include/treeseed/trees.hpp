#pragma once

#include <treeseed/data.hpp>
#include <treeseed/rng.hpp>

#include <cstdint>
#include <span>
#include <vector>

namespace treeseed {

/// Binary decision tree. Child links are inner-node indices when >= 0 and
/// encode leaf index -(v+1) when negative. A fitted tree always has
/// leaves.size() == nodes.size() + 1; a single-leaf tree has no nodes.
struct Tree {
    struct Node {
        int feature = 0;
        double threshold = 0.0;
        int left = 0;
        int right = 0;
    };
    std::vector<Node> nodes;
    std::vector<std::vector<double>> leaves;
    int output_dim = 1;

    static int leaf_id(int child) { return -child - 1; }
    static int as_leaf_child(int leaf) { return -leaf - 1; }
    int inner_count() const { return static_cast<int>(nodes.size()); }
    int leaf_count() const { return static_cast<int>(leaves.size()); }
    int max_path_depth() const;
};

enum class TreeKind { single, forest, gbdt, deep_forest };
enum class ForestFlavor { breiman, completely_random };

struct TreeModel {
    TreeKind kind = TreeKind::single;
    Task task = Task::regression;
    int n_classes = 1;
    int input_dim = 0;
    ForestFlavor flavor = ForestFlavor::breiman;

    // single / forest / gbdt
    std::vector<Tree> trees;
    std::vector<double> weights;      // 1/M per forest tree, eta per gbdt tree
    std::vector<double> base_offset;  // gbdt b0 per output, else empty
    double shrinkage = 0.0;           // gbdt eta
    int trees_per_round = 1;          // gbdt: C for multiclass, else 1

    // deep forest cascade, layers 1..best_layer
    struct CascadeLayer {
        std::vector<TreeModel> forests;
    };
    std::vector<CascadeLayer> cascade;
    int best_layer = 0;  // 1-based retained depth
    std::vector<double> layer_scores;

    /// Width of the prediction vector: 1 for regression and binary gbdt
    /// margins, n_classes otherwise.
    int output_dim() const;
};

struct TreeFitConfig {
    int max_depth = 6;
    int n_estimators = 100;
    double max_features = 1.0;  // fraction in (0,1]
    int min_samples_leaf = 1;
    double eta = 0.3;     // gbdt shrinkage
    double lambda = 0.0;  // gbdt leaf regularizer
    int forest_depth = 1;  // deep-forest layers
    int n_rf_per_layer = 1;
    int n_crf_per_layer = 1;
    bool bootstrap = true;  // test hook: disable to fit each tree on rows as-is
    std::uint64_t seed = 0;
};

Tree fit_cart(const Dataset& ds, std::span<const int> rows, const TreeFitConfig& cfg,
              Rng& rng);

Tree fit_completely_random_tree(const Dataset& ds, std::span<const int> rows,
                                const TreeFitConfig& cfg, Rng& rng);

std::vector<double> predict_tree(const Tree& tree, const double* x, int dim);
std::vector<double> predict_tree(const Tree& tree, const Vector& x);

/// Index of the leaf an input is routed to (ties x(i) == t go left).
int tree_leaf_index(const Tree& tree, const double* x, int dim);

TreeModel fit_random_forest(const Dataset& ds, std::span<const int> rows,
                            const TreeFitConfig& cfg, Rng& rng);

/// Forest of completely random trees (same aggregation as fit_random_forest).
TreeModel fit_completely_random_forest(const Dataset& ds, std::span<const int> rows,
                                       const TreeFitConfig& cfg, Rng& rng);

TreeModel fit_gbdt(const Dataset& ds, std::span<const int> rows, const TreeFitConfig& cfg,
                   Rng& rng);

TreeModel fit_deep_forest(const Dataset& ds, std::span<const int> rows,
                          const TreeFitConfig& cfg, Rng& rng,
                          std::span<const int> val_rows);

std::vector<double> predict_model(const TreeModel& model, const double* x, int dim);
std::vector<double> predict_model(const TreeModel& model, const Vector& x);

/// One prediction row per input row.
Matrix predict_model_batch(const TreeModel& model, const Matrix& X);

/// Canonical scores for metric computation: regression values untouched,
/// forest probabilities untouched, gbdt margins mapped through
/// sigmoid/softmax.
Matrix predict_scores(const TreeModel& model, const Matrix& X);

}  // namespace treeseed
