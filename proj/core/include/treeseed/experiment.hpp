#pragma once

#include <treeseed/net.hpp>
#include <treeseed/search.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace treeseed {

/// A trainable method: a tree-ensemble predictor or an MLP with one of the
/// initialization modes.
struct MethodSpec {
    std::string name;       // rf | crf | gbdt | df | cart | mlp-random | mlp-rf | mlp-gbdt | mlp-df
    bool is_mlp = false;
    TreeFitConfig tree;     // tree methods and tree-based initializers
    InitSpec init;          // mlp methods
    TrainConfig train_cfg;  // mlp methods
};

MethodSpec make_tree_method(const std::string& name, const TreeFitConfig& cfg);
MethodSpec make_mlp_method(InitMode mode, const InitSpec& init, const TrainConfig& cfg);

struct FoldScore {
    std::string method;
    int repeat = 0;
    int fold = 0;
    double metric = 0.0;
    double seconds = 0.0;
    std::uint64_t seed = 0;
};

struct CurvePoint {
    std::string method;
    int repeat = 0;
    int fold = 0;
    int epoch = 0;     // 1-based; 0 marks the state at initialization
    std::string split; // "train" | "val"
    double loss = 0.0;
};

struct MethodSummary {
    std::string method;
    double mean = 0.0;
    double stddev = 0.0;  // population convention over completed folds
    int count = 0;
};

/// First-layer weight-drift statistics between epoch 0 and the last epoch of
/// one training run.
struct SparsitySnapshot {
    std::string method;
    int run = 0;
    double frac_below_1e3_epoch0 = 0.0;   // |w| < 1e-3 at initialization
    double persistence_frac = 0.0;        // of those, |w| < 1e-2 after training
    SparsityReport epoch0;
    SparsityReport final_epoch;
};

struct ExperimentReport {
    std::string protocol;  // "cv" | "p1" | "p2"
    std::string metric_name;
    bool higher_is_better = false;
    std::vector<FoldScore> scores;
    std::vector<MethodSummary> summaries;
    std::vector<CurvePoint> curves;
    std::vector<SparsitySnapshot> sparsity;
    std::map<std::string, std::string> metadata;  // budgets, tuned configs, seeds
};

std::string metric_name_for(Task task);
bool metric_higher_is_better(Task task);

/// Mean and population standard deviation per method over completed folds.
std::vector<MethodSummary> summarize(const std::vector<FoldScore>& scores);

/// Methods whose summary lies within one standard deviation of the best are
/// flagged, mirroring the usual bold-face convention of benchmark tables.
std::vector<bool> within_one_std_of_best(const std::vector<MethodSummary>& summaries,
                                         bool higher_is_better);

std::string render_summary_table(const ExperimentReport& report);

struct CvOptions {
    double val_frac = 0.2;  // early-stopping/model-selection carve-out
    bool record_curves = false;
};

/// Repeats x k-fold cross validation of one method: train on the k-1 folds
/// (with a held-out validation carve used for early stopping), score on the
/// remaining fold with the task metric. Repeat r > 0 re-randomizes the fold
/// plan with a seed derived from the plan's. Train and evaluation rows are
/// checked disjoint.
ExperimentReport cross_validate(const Dataset& ds, const MethodSpec& method,
                                const FoldPlan& folds, int repeats, std::uint64_t seed,
                                const CvOptions& opts = {});

struct P1Options {
    int width = 256;
    std::vector<int> depth_choices = {3, 4};
    int budget = 20;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    int trial_epochs = 40;   // epochs per hyperparameter-search trial
    int final_epochs = 100;  // epochs of the per-seed comparison runs
    int batch_size = 256;
    double val_frac = 0.2;
    double lr_lo = 1e-5, lr_hi = 1e-1;
};

/// Protocol with shared MLP hyperparameters: phase 1 tunes depth and learning
/// rate for the randomly initialized MLP at the given width; phase 2 keeps
/// those fixed for every method and tunes only initializer-side
/// hyperparameters; the final phase trains every method once per seed on a
/// fresh split and emits the full per-epoch validation curves plus
/// first-layer sparsity snapshots.
ExperimentReport run_protocol_p1(const Dataset& ds, const std::vector<std::string>& methods,
                                 const P1Options& opts, std::uint64_t seed);

struct P2Options {
    int budget = 100;       // must split 25/75, i.e. divisible by 4
    int width_fixed = 512;  // tree-initialized MLP width
    int width_lo = 16;      // random-init width search range
    int width_hi = 512;
    int depth_lo_random = 1, depth_hi_random = 6;
    int depth_lo_tree = 3, depth_hi_tree = 6;
    int epochs = 100;
    int batch_size = 256;
    int k = 5;
    int repeats = 1;
    double val_frac = 0.2;
    double lr_lo = 1e-5, lr_hi = 1e-1;
};

/// Equal-budget protocol: tree-initialized methods spend a quarter of the
/// budget on the tree predictor's hyperparameters (scored on its own
/// validation performance) and the rest on MLP hyperparameters at the fixed
/// width; the random baseline spends the whole budget on (lr, depth, width).
/// Final scores come from repeated k-fold cross validation.
ExperimentReport run_protocol_p2(const Dataset& ds, const std::vector<std::string>& methods,
                                 const P2Options& opts, std::uint64_t seed);

}  // namespace treeseed
