#include <treeseed/trees.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace treeseed {

namespace {

constexpr int kLeafSentinel = std::numeric_limits<int>::min();

struct GrowSpec {
    const Matrix* X = nullptr;
    // variance criterion: split on these values (regression targets or
    // boosting gradients); gini criterion: split on labels.
    const std::vector<double>* values = nullptr;
    const std::vector<int>* labels = nullptr;
    int n_classes = 0;
    std::function<std::vector<double>(std::span<const int>)> leaf_value;
    int max_depth = 1;
    int min_samples_leaf = 1;
    double max_features = 1.0;
    bool completely_random = false;
    bool enforce_min_samples = true;
};

bool is_pure(const GrowSpec& spec, std::span<const int> rows) {
    if (spec.labels) {
        const int first = (*spec.labels)[static_cast<std::size_t>(rows[0])];
        for (int r : rows)
            if ((*spec.labels)[static_cast<std::size_t>(r)] != first) return false;
        return true;
    }
    const double first = (*spec.values)[static_cast<std::size_t>(rows[0])];
    for (int r : rows)
        if ((*spec.values)[static_cast<std::size_t>(r)] != first) return false;
    return true;
}

struct SplitChoice {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

// Exhaustive search over midpoints of consecutive distinct values of the
// sampled candidate features. Candidates are visited in ascending (feature,
// threshold) order with strictly-better gain required, so ties resolve to the
// lowest feature index, then the lowest threshold.
SplitChoice best_split(const GrowSpec& spec, std::span<const int> rows, Rng& rng) {
    const auto d = static_cast<int>(spec.X->cols());
    int n_candidates = static_cast<int>(std::ceil(spec.max_features * d));
    n_candidates = std::clamp(n_candidates, 1, d);
    std::vector<int> features = rng.sample_without_replacement(d, n_candidates);
    std::sort(features.begin(), features.end());

    const auto m = static_cast<int>(rows.size());
    const int min_leaf = spec.enforce_min_samples ? spec.min_samples_leaf : 1;
    SplitChoice best;

    std::vector<std::pair<double, int>> sorted(static_cast<std::size_t>(m));
    for (int f : features) {
        for (int i = 0; i < m; ++i)
            sorted[static_cast<std::size_t>(i)] = {(*spec.X)(rows[static_cast<std::size_t>(i)], f),
                                                   rows[static_cast<std::size_t>(i)]};
        std::sort(sorted.begin(), sorted.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        if (sorted.front().first == sorted.back().first) continue;

        if (spec.labels) {
            // weighted Gini: minimize sum_side (n_s - sum_c cnt_c^2 / n_s)
            std::vector<double> left_cnt(static_cast<std::size_t>(spec.n_classes), 0.0);
            std::vector<double> total_cnt(static_cast<std::size_t>(spec.n_classes), 0.0);
            for (const auto& [v, r] : sorted)
                total_cnt[static_cast<std::size_t>((*spec.labels)[static_cast<std::size_t>(r)])] += 1.0;
            double parent_sq = 0.0;
            for (double c : total_cnt) parent_sq += c * c;
            const double parent_impurity = m - parent_sq / m;
            double left_sq = 0.0;
            for (int i = 0; i + 1 < m; ++i) {
                const auto cls = static_cast<std::size_t>(
                    (*spec.labels)[static_cast<std::size_t>(sorted[static_cast<std::size_t>(i)].second)]);
                left_sq += 2.0 * left_cnt[cls] + 1.0;
                left_cnt[cls] += 1.0;
                if (sorted[static_cast<std::size_t>(i)].first ==
                    sorted[static_cast<std::size_t>(i + 1)].first)
                    continue;
                const int n_left = i + 1, n_right = m - n_left;
                if (n_left < min_leaf || n_right < min_leaf) continue;
                double right_sq = 0.0;
                for (std::size_t c = 0; c < total_cnt.size(); ++c) {
                    const double rc = total_cnt[c] - left_cnt[c];
                    right_sq += rc * rc;
                }
                const double impurity = (n_left - left_sq / n_left) + (n_right - right_sq / n_right);
                const double gain = parent_impurity - impurity;
                if (gain > best.gain) {
                    best = {true, f,
                            0.5 * (sorted[static_cast<std::size_t>(i)].first +
                                   sorted[static_cast<std::size_t>(i + 1)].first),
                            gain};
                }
            }
        } else {
            // variance reduction via SSE = sum v^2 - (sum v)^2 / n
            double total_s = 0.0, total_s2 = 0.0;
            for (const auto& [v, r] : sorted) {
                const double t = (*spec.values)[static_cast<std::size_t>(r)];
                total_s += t;
                total_s2 += t * t;
            }
            const double parent_sse = total_s2 - total_s * total_s / m;
            double left_s = 0.0, left_s2 = 0.0;
            for (int i = 0; i + 1 < m; ++i) {
                const double t =
                    (*spec.values)[static_cast<std::size_t>(sorted[static_cast<std::size_t>(i)].second)];
                left_s += t;
                left_s2 += t * t;
                if (sorted[static_cast<std::size_t>(i)].first ==
                    sorted[static_cast<std::size_t>(i + 1)].first)
                    continue;
                const int n_left = i + 1, n_right = m - n_left;
                if (n_left < min_leaf || n_right < min_leaf) continue;
                const double right_s = total_s - left_s;
                const double right_s2 = total_s2 - left_s2;
                const double sse = (left_s2 - left_s * left_s / n_left) +
                                   (right_s2 - right_s * right_s / n_right);
                const double gain = parent_sse - sse;
                if (gain > best.gain) {
                    best = {true, f,
                            0.5 * (sorted[static_cast<std::size_t>(i)].first +
                                   sorted[static_cast<std::size_t>(i + 1)].first),
                            gain};
                }
            }
        }
    }
    return best;
}

// Uniformly random feature and threshold; features with zero spread over the
// node are re-drawn up to d times.
SplitChoice random_split(const GrowSpec& spec, std::span<const int> rows, Rng& rng) {
    const auto d = static_cast<int>(spec.X->cols());
    for (int attempt = 0; attempt < d; ++attempt) {
        const int f = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(d)));
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (int r : rows) {
            lo = std::min(lo, (*spec.X)(r, f));
            hi = std::max(hi, (*spec.X)(r, f));
        }
        if (hi > lo) return {true, f, rng.uniform(lo, hi), 0.0};
    }
    return {};
}

int grow_node(Tree& tree, const GrowSpec& spec, std::vector<int>& rows_storage, int begin,
              int end, int depth, Rng& rng) {
    const std::span<const int> rows(rows_storage.data() + begin, static_cast<std::size_t>(end - begin));
    const int m = end - begin;
    auto make_leaf = [&]() {
        tree.leaves.push_back(spec.leaf_value(rows));
        return Tree::as_leaf_child(static_cast<int>(tree.leaves.size()) - 1);
    };
    if (depth >= spec.max_depth || m < 2 || is_pure(spec, rows)) return make_leaf();
    if (spec.enforce_min_samples && m < 2 * spec.min_samples_leaf) return make_leaf();

    const SplitChoice split = spec.completely_random ? random_split(spec, rows, rng)
                                                     : best_split(spec, rows, rng);
    if (!split.found || (!spec.completely_random && split.gain <= 0.0)) return make_leaf();

    // partition in place, stable so child row order is deterministic
    const auto boundary =
        std::stable_partition(rows_storage.begin() + begin, rows_storage.begin() + end,
                              [&](int r) { return (*spec.X)(r, split.feature) <= split.threshold; });
    const int mid = static_cast<int>(boundary - rows_storage.begin());

    const auto node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({split.feature, split.threshold, kLeafSentinel, kLeafSentinel});
    const int left = grow_node(tree, spec, rows_storage, begin, mid, depth + 1, rng);
    const int right = grow_node(tree, spec, rows_storage, mid, end, depth + 1, rng);
    tree.nodes[static_cast<std::size_t>(node_id)].left = left;
    tree.nodes[static_cast<std::size_t>(node_id)].right = right;
    return node_id;
}

Tree grow_tree(const GrowSpec& spec, std::span<const int> rows, Rng& rng) {
    if (rows.empty()) throw ArgumentError("tree fit: empty row set");
    Tree tree;
    tree.output_dim = spec.labels ? spec.n_classes : 1;
    std::vector<int> storage(rows.begin(), rows.end());
    grow_node(tree, spec, storage, 0, static_cast<int>(storage.size()), 0, rng);
    return tree;
}

std::vector<double> mean_leaf(const std::vector<double>& values, std::span<const int> rows) {
    double s = 0.0;
    for (int r : rows) s += values[static_cast<std::size_t>(r)];
    return {s / static_cast<double>(rows.size())};
}

std::vector<double> frequency_leaf(const std::vector<int>& labels, int n_classes,
                                   std::span<const int> rows) {
    std::vector<double> freq(static_cast<std::size_t>(n_classes), 0.0);
    for (int r : rows) freq[static_cast<std::size_t>(labels[static_cast<std::size_t>(r)])] += 1.0;
    for (double& f : freq) f /= static_cast<double>(rows.size());
    return freq;
}

GrowSpec cart_spec(const Dataset& ds, const TreeFitConfig& cfg,
                   const std::vector<double>& y_values, const std::vector<int>& labels) {
    GrowSpec spec;
    spec.X = &ds.X;
    spec.max_depth = cfg.max_depth;
    spec.min_samples_leaf = cfg.min_samples_leaf;
    spec.max_features = cfg.max_features;
    if (ds.task == Task::regression) {
        spec.values = &y_values;
        spec.leaf_value = [&y_values](std::span<const int> rows) {
            return mean_leaf(y_values, rows);
        };
    } else {
        spec.labels = &labels;
        spec.n_classes = ds.n_classes;
        spec.leaf_value = [&labels, n = ds.n_classes](std::span<const int> rows) {
            return frequency_leaf(labels, n, rows);
        };
    }
    return spec;
}

void validate_fit_args(const Dataset& ds, std::span<const int> rows, const TreeFitConfig& cfg) {
    if (rows.empty()) throw ArgumentError("tree fit: empty row set");
    if (cfg.max_depth < 1) throw ArgumentError("tree fit: max_depth must be at least 1");
    if (cfg.max_features <= 0.0 || cfg.max_features > 1.0)
        throw ArgumentError("tree fit: max_features must be in (0,1]");
    for (int r : rows)
        if (r < 0 || r >= ds.rows())
            throw ArgumentError("tree fit: row index " + std::to_string(r) + " out of range");
}

std::vector<int> bootstrap_sample(std::span<const int> rows, Rng& rng) {
    std::vector<int> sample(rows.size());
    for (auto& s : sample)
        s = rows[static_cast<std::size_t>(rng.uniform_int(rows.size()))];
    return sample;
}

void extract_targets(const Dataset& ds, std::vector<double>& y_values, std::vector<int>& labels) {
    if (ds.task == Task::regression) {
        y_values.resize(static_cast<std::size_t>(ds.rows()));
        for (Eigen::Index i = 0; i < ds.rows(); ++i)
            y_values[static_cast<std::size_t>(i)] = ds.y[i];
    } else {
        labels.resize(static_cast<std::size_t>(ds.rows()));
        for (Eigen::Index i = 0; i < ds.rows(); ++i)
            labels[static_cast<std::size_t>(i)] = ds.label_at(i);
    }
}

TreeModel fit_forest_impl(const Dataset& ds, std::span<const int> rows, const TreeFitConfig& cfg,
                          Rng& rng, ForestFlavor flavor) {
    validate_fit_args(ds, rows, cfg);
    if (cfg.n_estimators < 1) throw ArgumentError("forest fit: n_estimators must be at least 1");
    TreeModel model;
    model.kind = TreeKind::forest;
    model.flavor = flavor;
    model.task = ds.task;
    model.n_classes = ds.n_classes;
    model.input_dim = static_cast<int>(ds.cols());
    model.trees.resize(static_cast<std::size_t>(cfg.n_estimators));
    model.weights.assign(static_cast<std::size_t>(cfg.n_estimators), 1.0 / cfg.n_estimators);

    std::vector<double> y_values;
    std::vector<int> labels;
    extract_targets(ds, y_values, labels);

    const std::uint64_t base = rng.next_u64();
    std::vector<int> row_copy(rows.begin(), rows.end());
    parallel_for(static_cast<std::size_t>(cfg.n_estimators), [&](std::size_t t) {
        Rng tree_rng(derive_seed(base, t));
        std::vector<int> sample =
            cfg.bootstrap ? bootstrap_sample(row_copy, tree_rng) : row_copy;
        GrowSpec spec = cart_spec(ds, cfg, y_values, labels);
        if (flavor == ForestFlavor::completely_random) {
            spec.completely_random = true;
            spec.enforce_min_samples = false;
        }
        model.trees[t] = grow_tree(spec, sample, tree_rng);
    });
    return model;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

int Tree::max_path_depth() const {
    if (nodes.empty()) return 0;
    std::function<int(int)> depth_of = [&](int child) -> int {
        if (child < 0) return 0;
        const Node& node = nodes[static_cast<std::size_t>(child)];
        return 1 + std::max(depth_of(node.left), depth_of(node.right));
    };
    return depth_of(0);
}

int TreeModel::output_dim() const {
    switch (kind) {
        case TreeKind::single:
            return trees.empty() ? 1 : trees.front().output_dim;
        case TreeKind::forest:
            return task == Task::regression ? 1 : n_classes;
        case TreeKind::gbdt:
            return task == Task::multiclass ? n_classes : 1;
        case TreeKind::deep_forest:
            return task == Task::regression ? 1 : n_classes;
    }
    return 1;
}

Tree fit_cart(const Dataset& ds, std::span<const int> rows, const TreeFitConfig& cfg, Rng& rng) {
    validate_fit_args(ds, rows, cfg);
    std::vector<double> y_values;
    std::vector<int> labels;
    extract_targets(ds, y_values, labels);
    const GrowSpec spec = cart_spec(ds, cfg, y_values, labels);
    return grow_tree(spec, rows, rng);
}

Tree fit_completely_random_tree(const Dataset& ds, std::span<const int> rows,
                                const TreeFitConfig& cfg, Rng& rng) {
    validate_fit_args(ds, rows, cfg);
    std::vector<double> y_values;
    std::vector<int> labels;
    extract_targets(ds, y_values, labels);
    GrowSpec spec = cart_spec(ds, cfg, y_values, labels);
    spec.completely_random = true;
    spec.enforce_min_samples = false;
    return grow_tree(spec, rows, rng);
}

int tree_leaf_index(const Tree& tree, const double* x, int dim) {
    if (tree.nodes.empty()) return 0;
    int node = 0;
    for (;;) {
        const Tree::Node& n = tree.nodes[static_cast<std::size_t>(node)];
        if (n.feature >= dim)
            throw ArgumentError("predict_tree: input dimension " + std::to_string(dim) +
                                " too small for feature index " + std::to_string(n.feature));
        const int child = x[n.feature] <= n.threshold ? n.left : n.right;
        if (child < 0) return Tree::leaf_id(child);
        node = child;
    }
}

std::vector<double> predict_tree(const Tree& tree, const double* x, int dim) {
    return tree.leaves[static_cast<std::size_t>(tree_leaf_index(tree, x, dim))];
}

std::vector<double> predict_tree(const Tree& tree, const Vector& x) {
    return predict_tree(tree, x.data(), static_cast<int>(x.size()));
}

TreeModel fit_random_forest(const Dataset& ds, std::span<const int> rows,
                            const TreeFitConfig& cfg, Rng& rng) {
    return fit_forest_impl(ds, rows, cfg, rng, ForestFlavor::breiman);
}

TreeModel fit_completely_random_forest(const Dataset& ds, std::span<const int> rows,
                                       const TreeFitConfig& cfg, Rng& rng) {
    return fit_forest_impl(ds, rows, cfg, rng, ForestFlavor::completely_random);
}

TreeModel fit_gbdt(const Dataset& ds, std::span<const int> rows, const TreeFitConfig& cfg,
                   Rng& rng) {
    validate_fit_args(ds, rows, cfg);
    if (cfg.n_estimators < 1) throw ArgumentError("gbdt fit: n_estimators must be at least 1");
    TreeModel model;
    model.kind = TreeKind::gbdt;
    model.task = ds.task;
    model.n_classes = ds.n_classes;
    model.input_dim = static_cast<int>(ds.cols());
    model.shrinkage = cfg.eta;
    model.trees_per_round = ds.task == Task::multiclass ? ds.n_classes : 1;

    const auto n = static_cast<std::size_t>(rows.size());
    const int n_out = model.trees_per_round;

    // margins per training row
    std::vector<std::vector<double>> F(static_cast<std::size_t>(n_out),
                                       std::vector<double>(n, 0.0));
    if (ds.task == Task::regression) {
        double mean = 0.0;
        for (int r : rows) mean += ds.y[r];
        mean /= static_cast<double>(n);
        model.base_offset = {mean};
        for (auto& f : F[0]) f = mean;
    } else if (ds.task == Task::binary) {
        double p = 0.0;
        for (int r : rows) p += ds.y[r];
        p /= static_cast<double>(n);
        p = std::clamp(p, 1e-12, 1.0 - 1e-12);
        const double b0 = std::log(p / (1.0 - p));
        model.base_offset = {b0};
        for (auto& f : F[0]) f = b0;
    } else {
        model.base_offset.assign(static_cast<std::size_t>(n_out), 0.0);
    }

    // gradients indexed by dataset row so the generic grower can use them
    std::vector<double> grad(static_cast<std::size_t>(ds.rows()), 0.0);
    std::vector<double> hess(static_cast<std::size_t>(ds.rows()), 0.0);
    std::vector<int> row_pos(static_cast<std::size_t>(ds.rows()), -1);
    for (std::size_t i = 0; i < n; ++i) row_pos[static_cast<std::size_t>(rows[i])] = static_cast<int>(i);

    GrowSpec spec;
    spec.X = &ds.X;
    spec.values = &grad;
    spec.max_depth = cfg.max_depth;
    spec.min_samples_leaf = cfg.min_samples_leaf;
    spec.max_features = cfg.max_features;
    spec.leaf_value = [&grad, &hess, lambda = cfg.lambda](std::span<const int> leaf_rows) {
        double g = 0.0, h = 0.0;
        for (int r : leaf_rows) {
            g += grad[static_cast<std::size_t>(r)];
            h += hess[static_cast<std::size_t>(r)];
        }
        return std::vector<double>{-g / (h + lambda)};
    };

    const std::uint64_t base = rng.next_u64();
    for (int round = 0; round < cfg.n_estimators; ++round) {
        // per-row probabilities for classification rounds
        std::vector<std::vector<double>> prob;
        if (ds.task == Task::binary) {
            prob.assign(1, std::vector<double>(n, 0.0));
            for (std::size_t i = 0; i < n; ++i) prob[0][i] = sigmoid(F[0][i]);
        } else if (ds.task == Task::multiclass) {
            prob.assign(static_cast<std::size_t>(n_out), std::vector<double>(n, 0.0));
            for (std::size_t i = 0; i < n; ++i) {
                double mx = -std::numeric_limits<double>::infinity();
                for (int c = 0; c < n_out; ++c) mx = std::max(mx, F[static_cast<std::size_t>(c)][i]);
                double z = 0.0;
                for (int c = 0; c < n_out; ++c)
                    z += std::exp(F[static_cast<std::size_t>(c)][i] - mx);
                for (int c = 0; c < n_out; ++c)
                    prob[static_cast<std::size_t>(c)][i] = std::exp(F[static_cast<std::size_t>(c)][i] - mx) / z;
            }
        }
        for (int c = 0; c < n_out; ++c) {
            for (std::size_t i = 0; i < n; ++i) {
                const auto r = static_cast<std::size_t>(rows[i]);
                if (ds.task == Task::regression) {
                    grad[r] = F[0][i] - ds.y[rows[i]];  // d/dF of squared error / 2
                    hess[r] = 1.0;
                } else {
                    const double p = prob[static_cast<std::size_t>(c)][i];
                    const double target =
                        ds.task == Task::binary ? ds.y[rows[i]]
                                                : (ds.label_at(rows[i]) == c ? 1.0 : 0.0);
                    grad[r] = p - target;
                    hess[r] = p * (1.0 - p);
                }
            }
            Rng tree_rng(derive_seed(base, static_cast<std::uint64_t>(round) *
                                               static_cast<std::uint64_t>(n_out) +
                                           static_cast<std::uint64_t>(c)));
            Tree tree = grow_tree(spec, rows, tree_rng);
            for (std::size_t i = 0; i < n; ++i) {
                const double* xi = ds.X.row(rows[i]).data();
                F[static_cast<std::size_t>(c)][i] +=
                    cfg.eta * predict_tree(tree, xi, static_cast<int>(ds.cols()))[0];
            }
            model.trees.push_back(std::move(tree));
            model.weights.push_back(cfg.eta);
        }
    }
    return model;
}

TreeModel fit_deep_forest(const Dataset& ds, std::span<const int> rows,
                          const TreeFitConfig& cfg, Rng& rng,
                          std::span<const int> val_rows) {
    validate_fit_args(ds, rows, cfg);
    if (cfg.forest_depth < 1)
        throw ArgumentError("deep forest fit: forest_depth must be at least 1");
    if (val_rows.empty()) throw ArgumentError("deep forest fit: empty validation row set");

    TreeModel model;
    model.kind = TreeKind::deep_forest;
    model.task = ds.task;
    model.n_classes = ds.n_classes;
    model.input_dim = static_cast<int>(ds.cols());

    const int per_forest_out = ds.task == Task::regression ? 1 : ds.n_classes;
    const int forests_per_layer = cfg.n_rf_per_layer + cfg.n_crf_per_layer;
    if (forests_per_layer < 1)
        throw ArgumentError("deep forest fit: at least one forest per layer required");

    Dataset layer_ds = ds;  // X widens layer by layer, y/task unchanged
    double best_score = -std::numeric_limits<double>::infinity();
    int best_layer = 0;

    for (int layer = 1; layer <= cfg.forest_depth; ++layer) {
        TreeModel::CascadeLayer cascade_layer;
        for (int f = 0; f < forests_per_layer; ++f) {
            const bool crf = f >= cfg.n_rf_per_layer;
            cascade_layer.forests.push_back(
                crf ? fit_completely_random_forest(layer_ds, rows, cfg, rng)
                    : fit_random_forest(layer_ds, rows, cfg, rng));
        }

        // forest outputs over all rows feed both scoring and the next layer
        Matrix outputs(ds.rows(), static_cast<Eigen::Index>(forests_per_layer) * per_forest_out);
        for (int f = 0; f < forests_per_layer; ++f) {
            const TreeModel& forest = cascade_layer.forests[static_cast<std::size_t>(f)];
            parallel_for(static_cast<std::size_t>(ds.rows()), [&](std::size_t i) {
                const auto row = static_cast<Eigen::Index>(i);
                const std::vector<double> p = predict_model(
                    forest, layer_ds.X.row(row).data(), static_cast<int>(layer_ds.cols()));
                for (int c = 0; c < per_forest_out; ++c)
                    outputs(row, static_cast<Eigen::Index>(f) * per_forest_out + c) =
                        p[static_cast<std::size_t>(c)];
            });
        }

        double score;
        if (ds.task == Task::regression) {
            double sse = 0.0;
            for (int r : val_rows) {
                double mean_pred = 0.0;
                for (int f = 0; f < forests_per_layer; ++f)
                    mean_pred += outputs(r, static_cast<Eigen::Index>(f) * per_forest_out);
                mean_pred /= forests_per_layer;
                const double diff = mean_pred - ds.y[r];
                sse += diff * diff;
            }
            score = -sse / static_cast<double>(val_rows.size());
        } else {
            int correct = 0;
            for (int r : val_rows) {
                int best_c = 0;
                double best_p = -1.0;
                for (int c = 0; c < per_forest_out; ++c) {
                    double p = 0.0;
                    for (int f = 0; f < forests_per_layer; ++f)
                        p += outputs(r, static_cast<Eigen::Index>(f) * per_forest_out + c);
                    if (p > best_p) {
                        best_p = p;
                        best_c = c;
                    }
                }
                if (best_c == ds.label_at(r)) ++correct;
            }
            score = static_cast<double>(correct) / static_cast<double>(val_rows.size());
        }
        model.cascade.push_back(std::move(cascade_layer));
        model.layer_scores.push_back(score);
        if (score > best_score) {
            best_score = score;
            best_layer = layer;
        }

        if (layer < cfg.forest_depth) {
            Matrix z(ds.rows(), ds.cols() + outputs.cols());
            z.leftCols(ds.cols()) = ds.X;
            z.rightCols(outputs.cols()) = outputs;
            layer_ds.X = std::move(z);
            layer_ds.schema.clear();  // augmented features carry no schema
        }
    }
    model.best_layer = best_layer;
    model.cascade.resize(static_cast<std::size_t>(best_layer));
    return model;
}

std::vector<double> predict_model(const TreeModel& model, const double* x, int dim) {
    if (model.input_dim > 0 && dim != model.input_dim)
        throw ArgumentError("predict_model: input dimension " + std::to_string(dim) +
                            " does not match model dimension " + std::to_string(model.input_dim));
    switch (model.kind) {
        case TreeKind::single:
            return predict_tree(model.trees.front(), x, dim);
        case TreeKind::forest: {
            const int out = model.output_dim();
            std::vector<double> acc(static_cast<std::size_t>(out), 0.0);
            for (std::size_t t = 0; t < model.trees.size(); ++t) {
                const std::vector<double> p = predict_tree(model.trees[t], x, dim);
                for (int c = 0; c < out; ++c)
                    acc[static_cast<std::size_t>(c)] +=
                        model.weights[t] * p[static_cast<std::size_t>(c)];
            }
            return acc;
        }
        case TreeKind::gbdt: {
            std::vector<double> margins = model.base_offset;
            for (std::size_t t = 0; t < model.trees.size(); ++t) {
                const int c = model.trees_per_round == 1
                                  ? 0
                                  : static_cast<int>(t % static_cast<std::size_t>(model.trees_per_round));
                margins[static_cast<std::size_t>(c)] +=
                    model.weights[t] * predict_tree(model.trees[t], x, dim)[0];
            }
            return margins;
        }
        case TreeKind::deep_forest: {
            const int per_forest_out = model.task == Task::regression ? 1 : model.n_classes;
            std::vector<double> outputs;
            for (std::size_t layer = 0; layer < model.cascade.size(); ++layer) {
                std::vector<double> z(x, x + dim);
                if (layer > 0) z.insert(z.end(), outputs.begin(), outputs.end());
                outputs.clear();
                for (const TreeModel& forest : model.cascade[layer].forests) {
                    const std::vector<double> p =
                        predict_model(forest, z.data(), static_cast<int>(z.size()));
                    outputs.insert(outputs.end(), p.begin(), p.end());
                }
            }
            const auto n_forests = model.cascade.back().forests.size();
            std::vector<double> acc(static_cast<std::size_t>(per_forest_out), 0.0);
            for (std::size_t f = 0; f < n_forests; ++f)
                for (int c = 0; c < per_forest_out; ++c)
                    acc[static_cast<std::size_t>(c)] +=
                        outputs[f * static_cast<std::size_t>(per_forest_out) +
                                static_cast<std::size_t>(c)] /
                        static_cast<double>(n_forests);
            return acc;
        }
    }
    throw ArgumentError("predict_model: unknown model kind");
}

std::vector<double> predict_model(const TreeModel& model, const Vector& x) {
    return predict_model(model, x.data(), static_cast<int>(x.size()));
}

Matrix predict_model_batch(const TreeModel& model, const Matrix& X) {
    const int out = model.output_dim();
    Matrix result(X.rows(), out);
    parallel_for(static_cast<std::size_t>(X.rows()), [&](std::size_t i) {
        const auto row = static_cast<Eigen::Index>(i);
        const std::vector<double> p =
            predict_model(model, X.row(row).data(), static_cast<int>(X.cols()));
        for (int c = 0; c < out; ++c) result(row, c) = p[static_cast<std::size_t>(c)];
    });
    return result;
}

Matrix predict_scores(const TreeModel& model, const Matrix& X) {
    const Matrix raw = predict_model_batch(model, X);
    if (model.task == Task::regression || model.kind != TreeKind::gbdt) return raw;
    if (model.task == Task::binary) {
        Matrix scores(raw.rows(), 2);
        for (Eigen::Index i = 0; i < raw.rows(); ++i) {
            const double p1 = sigmoid(raw(i, 0));
            scores(i, 0) = 1.0 - p1;
            scores(i, 1) = p1;
        }
        return scores;
    }
    Matrix scores(raw.rows(), raw.cols());
    for (Eigen::Index i = 0; i < raw.rows(); ++i) {
        const double mx = raw.row(i).maxCoeff();
        double z = 0.0;
        for (Eigen::Index c = 0; c < raw.cols(); ++c) z += std::exp(raw(i, c) - mx);
        for (Eigen::Index c = 0; c < raw.cols(); ++c)
            scores(i, c) = std::exp(raw(i, c) - mx) / z;
    }
    return scores;
}

}  // namespace treeseed
