#include <treeseed/experiment.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <sstream>

namespace treeseed {

namespace {

std::string format_double(double v) {
    std::ostringstream out;
    out.precision(6);
    out << v;
    return out.str();
}

// deterministic across platforms, unlike std::hash
std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string params_to_string(const ParamMap& params) {
    std::ostringstream out;
    bool first = true;
    for (const auto& [key, value] : params) {
        if (!first) out << ", ";
        first = false;
        out << key << "=";
        if (const auto* d = std::get_if<double>(&value))
            out << format_double(*d);
        else if (const auto* i = std::get_if<long>(&value))
            out << *i;
        else
            out << std::get<std::string>(value);
    }
    return out.str();
}

/// Label-encode and normalize with statistics from the training rows only.
Dataset prepare_dataset(const Dataset& raw, const std::vector<int>& train_rows) {
    Dataset encoded = raw.pending_categorical.empty() ? raw : label_encode(raw, train_rows);
    const NormStats stats = normalize_fit(encoded, train_rows);
    return normalize_apply(encoded, stats);
}

double metric_from_scores(Task task, const Matrix& scores, const Dataset& ds,
                          const std::vector<int>& rows) {
    if (task == Task::regression) {
        std::vector<double> pred, target;
        pred.reserve(rows.size());
        target.reserve(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            pred.push_back(scores(static_cast<Eigen::Index>(i), 0));
            target.push_back(ds.y[rows[i]]);
        }
        return mse(pred, target);
    }
    std::vector<int> labels(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) labels[i] = ds.label_at(rows[i]);
    if (task == Task::binary) {
        std::vector<double> s(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i)
            s[i] = scores(static_cast<Eigen::Index>(i), 1);
        return auroc(s, labels);
    }
    return accuracy_from_logits(scores, labels);
}

Matrix rows_matrix(const Dataset& ds, const std::vector<int>& rows) {
    Matrix X(static_cast<Eigen::Index>(rows.size()), ds.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        X.row(static_cast<Eigen::Index>(i)) = ds.X.row(rows[i]);
    return X;
}

// Training-side standardization of regression targets. The fit is purely a
// reparameterization (the per-epoch argmin is unchanged) but it removes the
// slow output-scale climb from Adam's early epochs; predictions are mapped
// back before any metric is computed.
struct TargetScale {
    double mean = 0.0;
    double stddev = 1.0;
};

TargetScale fit_target_scale(const Dataset& ds, const std::vector<int>& rows) {
    TargetScale scale;
    if (ds.task != Task::regression) return scale;
    double mean = 0.0;
    for (int r : rows) mean += ds.y[r];
    mean /= static_cast<double>(rows.size());
    double var = 0.0;
    for (int r : rows) var += (ds.y[r] - mean) * (ds.y[r] - mean);
    var /= static_cast<double>(rows.size());
    scale.mean = mean;
    scale.stddev = var > 0.0 ? std::sqrt(var) : 1.0;
    return scale;
}

void apply_target_scale(TrainData<float>& data, const TargetScale& scale) {
    if (data.y.size() == 0) return;
    data.y = ((data.y.template cast<double>().array() - scale.mean) / scale.stddev)
                 .template cast<float>()
                 .matrix();
}

Matrix mlp_scores(const Mlp<float>& net, const Dataset& ds, const std::vector<int>& rows,
                  Task task, const TargetScale& scale) {
    const MatrixT<float> X = rows_matrix(ds, rows).cast<float>();
    Matrix out = forward(net, X).cast<double>();
    if (task == Task::regression) {
        out = out.array() * scale.stddev + scale.mean;
        return out;
    }
    Matrix scores(out.rows(), out.cols());
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        const double mx = out.row(i).maxCoeff();
        double z = 0.0;
        for (Eigen::Index c = 0; c < out.cols(); ++c) z += std::exp(out(i, c) - mx);
        for (Eigen::Index c = 0; c < out.cols(); ++c)
            scores(i, c) = std::exp(out(i, c) - mx) / z;
    }
    return scores;
}

struct RunResult {
    double metric = 0.0;
    double seconds = 0.0;
    double best_val_loss = 0.0;
    TrainHistory history;
    double init_train_loss = 0.0;
    double init_val_loss = 0.0;
    bool is_mlp = false;
    SparsitySnapshot sparsity;
    bool has_sparsity = false;
};

struct RunRequest {
    const Dataset* prepared = nullptr;
    const MethodSpec* method = nullptr;
    std::vector<int> train_rows;
    std::vector<int> val_rows;
    std::vector<int> eval_rows;  // empty: score on val_rows
    std::uint64_t seed = 0;
    int epochs_override = -1;
    bool want_sparsity = false;
};

RunResult run_one(const RunRequest& req) {
    const Dataset& ds = *req.prepared;
    const MethodSpec& method = *req.method;
    const std::vector<int>& eval_rows = req.eval_rows.empty() ? req.val_rows : req.eval_rows;
    RunResult result;
    const auto t0 = std::chrono::steady_clock::now();

    if (!method.is_mlp) {
        TreeFitConfig cfg = method.tree;
        cfg.seed = req.seed;
        Rng rng(req.seed);
        TreeModel model;
        if (method.name == "rf")
            model = fit_random_forest(ds, req.train_rows, cfg, rng);
        else if (method.name == "crf")
            model = fit_completely_random_forest(ds, req.train_rows, cfg, rng);
        else if (method.name == "gbdt")
            model = fit_gbdt(ds, req.train_rows, cfg, rng);
        else if (method.name == "df")
            model = fit_deep_forest(ds, req.train_rows, cfg, rng, req.val_rows);
        else if (method.name == "cart") {
            model.kind = TreeKind::single;
            model.task = ds.task;
            model.n_classes = ds.n_classes;
            model.input_dim = static_cast<int>(ds.cols());
            model.trees.push_back(fit_cart(ds, req.train_rows, cfg, rng));
            model.weights.push_back(1.0);
        } else {
            throw ConfigError("unknown tree method '" + method.name + "'");
        }
        const Matrix scores = predict_scores(model, rows_matrix(ds, eval_rows));
        result.metric = metric_from_scores(ds.task, scores, ds, eval_rows);
        result.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return result;
    }

    InitSpec ispec = method.init;
    ispec.seed = derive_seed(req.seed, 0x1417);
    ispec.tree.seed = derive_seed(req.seed, 0x7ee5);
    TrainConfig tcfg = method.train_cfg;
    tcfg.seed = derive_seed(req.seed, 0x5eed);
    tcfg.loss = ds.task == Task::regression ? LossKind::mse : LossKind::cross_entropy;
    if (req.epochs_override >= 0) tcfg.epochs = req.epochs_override;

    Mlp<float> net0;
    if (ispec.mode == InitMode::random) {
        std::vector<int> dims;
        dims.push_back(static_cast<int>(ds.cols()));
        for (int j = 1; j < ispec.depth; ++j) dims.push_back(ispec.width);
        dims.push_back(ds.task == Task::regression ? 1 : ds.n_classes);
        net0 = init_random<float>(dims, derive_seed(ispec.seed, 0x6d6c70));
    } else {
        Rng rng(derive_seed(req.seed, 0x7265));
        net0 = init_from_trees<float>(ds, req.train_rows, ispec, rng).first;
    }

    const TargetScale scale = fit_target_scale(ds, req.train_rows);
    TrainData<float> tr = make_train_data<float>(ds, req.train_rows);
    TrainData<float> val = make_train_data<float>(ds, req.val_rows);
    apply_target_scale(tr, scale);
    apply_target_scale(val, scale);
    result.init_train_loss = batch_loss(net0, tr, tcfg.loss);
    result.init_val_loss = batch_loss(net0, val, tcfg.loss);

    Mlp<float> final_net;
    auto [best_net, history] = train(net0, tr, val, tcfg, ds.task, &final_net);
    result.history = std::move(history);
    result.is_mlp = true;
    result.best_val_loss = result.history.best_epoch >= 0
                               ? result.history.epochs[static_cast<std::size_t>(
                                                           result.history.best_epoch)]
                                     .val_loss
                               : result.init_val_loss;

    const Matrix scores = mlp_scores(best_net, ds, eval_rows, ds.task, scale);
    result.metric = metric_from_scores(ds.task, scores, ds, eval_rows);

    if (req.want_sparsity) {
        const Matrix w0 = net0.W[0].cast<double>();
        const Matrix wF = final_net.W[0].cast<double>();
        long below0 = 0, persistent = 0;
        for (Eigen::Index r = 0; r < w0.rows(); ++r) {
            for (Eigen::Index c = 0; c < w0.cols(); ++c) {
                if (std::abs(w0(r, c)) < 1e-3) {
                    ++below0;
                    if (std::abs(wF(r, c)) < 1e-2) ++persistent;
                }
            }
        }
        result.sparsity.method = method.name;
        result.sparsity.frac_below_1e3_epoch0 =
            static_cast<double>(below0) / static_cast<double>(w0.size());
        result.sparsity.persistence_frac =
            below0 == 0 ? 1.0 : static_cast<double>(persistent) / static_cast<double>(below0);
        result.sparsity.epoch0 = sparsity_stats(layer_weights_as_double(net0), 1e-3);
        result.sparsity.final_epoch = sparsity_stats(layer_weights_as_double(final_net), 1e-3);
        result.has_sparsity = true;
    }
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

void append_curves(std::vector<CurvePoint>& curves, const std::string& method, int repeat,
                   int fold, const RunResult& result) {
    curves.push_back({method, repeat, fold, 0, "train", result.init_train_loss});
    curves.push_back({method, repeat, fold, 0, "val", result.init_val_loss});
    for (std::size_t e = 0; e < result.history.epochs.size(); ++e) {
        const auto& stats = result.history.epochs[e];
        curves.push_back({method, repeat, fold, static_cast<int>(e) + 1, "train", stats.train_loss});
        curves.push_back({method, repeat, fold, static_cast<int>(e) + 1, "val", stats.val_loss});
    }
}

void check_disjoint(const std::vector<int>& a, const std::vector<int>& b, const char* what) {
    std::set<int> sa(a.begin(), a.end());
    for (int r : b)
        if (sa.count(r))
            throw ArgumentError(std::string("cross_validate: ") + what + " rows overlap");
}

// ---- method construction helpers shared by the protocols ------------------

int pow2(int e) { return 1 << e; }

// Deepest tree whose translation still fits a width-w layer, mirroring the
// n_estimators = width / 2^max_depth coupling: one complete tree of that
// depth contributes at most `width` leaf neurons (gbdt divides the room by
// the trees grown per round, deep forests by the forests per layer on top of
// the raw-input passthrough).
int max_depth_for_width(const std::string& method, int width, int input_dim, Task task,
                        int n_classes) {
    int room = width;
    if (method == "gbdt" && task == Task::multiclass) room = width / std::max(1, n_classes);
    if (method == "df") room = std::max(1, (width - input_dim) / 2);
    const int cap = static_cast<int>(std::floor(std::log2(std::max(2, room))));
    return std::max(2, std::min(method == "df" ? 6 : 8, cap));
}

TreeFitConfig tree_config_from_params(const std::string& method, const ParamMap& params,
                                      int width, int input_dim, Task task, int n_classes) {
    TreeFitConfig cfg;
    cfg.max_depth = static_cast<int>(param_as_int(params, "max_depth"));
    if (method == "rf") {
        cfg.max_features = param_as_double(params, "max_features");
        cfg.n_estimators = std::max(1, width / pow2(cfg.max_depth));
    } else if (method == "gbdt") {
        cfg.eta = param_as_double(params, "learning_rate_gbdt");
        cfg.lambda = param_as_double(params, "reg_lambda");
        const int per_round = task == Task::multiclass ? n_classes : 1;
        cfg.n_estimators = std::max(1, width / (per_round * pow2(cfg.max_depth)));
    } else if (method == "df") {
        cfg.max_features = param_as_double(params, "max_features");
        cfg.forest_depth = static_cast<int>(param_as_int(params, "forest_depth"));
        cfg.n_rf_per_layer = 1;
        cfg.n_crf_per_layer = 1;
        const int forests = cfg.n_rf_per_layer + cfg.n_crf_per_layer;
        const int room = std::max(1, width - input_dim);
        cfg.n_estimators = std::max(1, room / (forests * pow2(cfg.max_depth)));
    }
    return cfg;
}

Strengths strengths_from_params(const std::string& method, const ParamMap& params) {
    Strengths s;
    s.s01 = param_as_double(params, "strength01");
    s.s12 = param_as_double(params, "strength12");
    if (method == "df") {
        s.s23 = param_as_double(params, "strength23");
        s.s_id = param_as_double(params, "strength_id");
    } else {
        s.s23 = 1.0;
        s.s_id = 1.0;
    }
    return s;
}

SearchSpace tree_init_space(const std::string& method, int width, int input_dim,
                            int shared_depth, Task task, int n_classes) {
    SearchSpace space;
    space.dims["max_depth"] =
        ParamSpec::integer(2, max_depth_for_width(method, width, input_dim, task, n_classes));
    space.dims["strength01"] = ParamSpec::log_uniform(1.0, 1e4);
    space.dims["strength12"] = ParamSpec::log_uniform(1e-2, 1e2);
    if (method == "rf") {
        space.dims["max_features"] = ParamSpec::uniform(0.3, 1.0);
    } else if (method == "gbdt") {
        space.dims["learning_rate_gbdt"] = ParamSpec::log_uniform(0.01, 0.3);
        space.dims["reg_lambda"] = ParamSpec::log_uniform(1e-8, 1.0);
    } else if (method == "df") {
        space.dims["max_features"] = ParamSpec::uniform(0.3, 1.0);
        space.dims["strength23"] = ParamSpec::log_uniform(1e-2, 1e2);
        space.dims["strength_id"] = ParamSpec::log_uniform(1e-2, 1e2);
        space.dims["forest_depth"] =
            ParamSpec::integer(1, std::max(1, shared_depth / 3));
    }
    return space;
}

std::string display_name(const std::string& method) { return method + "-init"; }

}  // namespace

MethodSpec make_tree_method(const std::string& name, const TreeFitConfig& cfg) {
    MethodSpec spec;
    spec.name = name;
    spec.is_mlp = false;
    spec.tree = cfg;
    return spec;
}

MethodSpec make_mlp_method(InitMode mode, const InitSpec& init, const TrainConfig& cfg) {
    MethodSpec spec;
    spec.name = "mlp-" + to_string(mode);
    spec.is_mlp = true;
    spec.init = init;
    spec.init.mode = mode;
    spec.train_cfg = cfg;
    return spec;
}

std::string metric_name_for(Task task) {
    switch (task) {
        case Task::regression: return "mse";
        case Task::binary: return "auroc";
        case Task::multiclass: return "accuracy";
    }
    return "mse";
}

bool metric_higher_is_better(Task task) { return task != Task::regression; }

std::vector<MethodSummary> summarize(const std::vector<FoldScore>& scores) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<double>> by_method;
    for (const auto& score : scores) {
        if (!by_method.count(score.method)) order.push_back(score.method);
        by_method[score.method].push_back(score.metric);
    }
    std::vector<MethodSummary> out;
    for (const auto& name : order) {
        const auto& values = by_method[name];
        MethodSummary summary;
        summary.method = name;
        summary.count = static_cast<int>(values.size());
        double mean = 0.0;
        for (double v : values) mean += v;
        mean /= static_cast<double>(values.size());
        double var = 0.0;
        for (double v : values) var += (v - mean) * (v - mean);
        var /= static_cast<double>(values.size());
        summary.mean = mean;
        summary.stddev = std::sqrt(var);
        out.push_back(summary);
    }
    return out;
}

std::vector<bool> within_one_std_of_best(const std::vector<MethodSummary>& summaries,
                                         bool higher_is_better) {
    std::vector<bool> flags(summaries.size(), false);
    if (summaries.empty()) return flags;
    std::size_t best = 0;
    for (std::size_t i = 1; i < summaries.size(); ++i) {
        const bool better = higher_is_better ? summaries[i].mean > summaries[best].mean
                                             : summaries[i].mean < summaries[best].mean;
        if (better) best = i;
    }
    const double bound = higher_is_better ? summaries[best].mean - summaries[best].stddev
                                          : summaries[best].mean + summaries[best].stddev;
    for (std::size_t i = 0; i < summaries.size(); ++i)
        flags[i] = higher_is_better ? summaries[i].mean >= bound : summaries[i].mean <= bound;
    return flags;
}

std::string render_summary_table(const ExperimentReport& report) {
    std::ostringstream out;
    out << "protocol: " << report.protocol << "   metric: " << report.metric_name
        << (report.higher_is_better ? " (higher is better)" : " (lower is better)") << "\n";
    const auto flags = within_one_std_of_best(report.summaries, report.higher_is_better);
    for (std::size_t i = 0; i < report.summaries.size(); ++i) {
        const auto& s = report.summaries[i];
        out << "  " << (flags[i] ? "**" : "  ") << s.method << (flags[i] ? "**" : "  ") << "  "
            << format_double(s.mean) << " +/- " << format_double(s.stddev) << "  (n=" << s.count
            << ")\n";
    }
    return out.str();
}

ExperimentReport cross_validate(const Dataset& ds, const MethodSpec& method,
                                const FoldPlan& folds, int repeats, std::uint64_t seed,
                                const CvOptions& opts) {
    if (static_cast<Eigen::Index>(folds.assignments.size()) != ds.rows())
        throw ArgumentError("cross_validate: fold plan does not match the dataset");
    if (repeats < 1) throw ArgumentError("cross_validate: repeats must be at least 1");

    ExperimentReport report;
    report.protocol = "cv";
    report.metric_name = metric_name_for(ds.task);
    report.higher_is_better = metric_higher_is_better(ds.task);

    struct Cell {
        FoldScore score;
        std::vector<CurvePoint> curves;
    };
    std::vector<Cell> cells(static_cast<std::size_t>(repeats * folds.k));

    parallel_for(cells.size(), [&](std::size_t idx) {
        const int r = static_cast<int>(idx) / folds.k;
        const int f = static_cast<int>(idx) % folds.k;
        const FoldPlan plan =
            r == 0 ? folds : make_folds(ds, folds.k, folds.stratified, derive_seed(folds.seed, r));
        const std::vector<int> test_rows = fold_rows(plan, f);
        const std::vector<int> rest = complement_rows(plan, f);
        const std::uint64_t run_seed = derive_seed(seed, static_cast<std::uint64_t>(r),
                                                   static_cast<std::uint64_t>(f));
        auto [train_rows, val_rows] = split_holdout(ds, rest, opts.val_frac, run_seed);
        check_disjoint(test_rows, train_rows, "train/test");
        check_disjoint(test_rows, val_rows, "val/test");

        const Dataset prepared = prepare_dataset(ds, train_rows);
        RunRequest req;
        req.prepared = &prepared;
        req.method = &method;
        req.train_rows = train_rows;
        req.val_rows = val_rows;
        req.eval_rows = test_rows;
        req.seed = run_seed;
        const RunResult result = run_one(req);

        Cell& cell = cells[idx];
        cell.score = {method.name, r, f, result.metric, result.seconds, run_seed};
        if (opts.record_curves && result.is_mlp)
            append_curves(cell.curves, method.name, r, f, result);
    });

    for (auto& cell : cells) {
        report.scores.push_back(cell.score);
        report.curves.insert(report.curves.end(), cell.curves.begin(), cell.curves.end());
    }
    report.summaries = summarize(report.scores);
    report.metadata["repeats"] = std::to_string(repeats);
    report.metadata["k"] = std::to_string(folds.k);
    report.metadata["seed"] = std::to_string(seed);
    return report;
}

ExperimentReport run_protocol_p1(const Dataset& ds, const std::vector<std::string>& methods,
                                 const P1Options& opts, std::uint64_t seed) {
    for (const auto& m : methods)
        if (m != "random" && m != "rf" && m != "gbdt" && m != "df")
            throw ConfigError("protocol p1: unknown method '" + m + "'");
    if (opts.depth_choices.empty()) throw ConfigError("protocol p1: no depth choices");

    ExperimentReport report;
    report.protocol = "p1";
    report.metric_name = metric_name_for(ds.task);
    report.higher_is_better = metric_higher_is_better(ds.task);

    std::vector<int> all_rows(static_cast<std::size_t>(ds.rows()));
    for (Eigen::Index i = 0; i < ds.rows(); ++i) all_rows[static_cast<std::size_t>(i)] = static_cast<int>(i);

    // shared tuning split
    auto [tune_train, tune_val] = split_holdout(ds, all_rows, opts.val_frac, derive_seed(seed, 101));
    const Dataset tuned_ds = prepare_dataset(ds, tune_train);

    auto make_train_cfg = [&](double lr, int epochs) {
        TrainConfig cfg;
        cfg.epochs = epochs;
        cfg.batch_size = opts.batch_size;
        cfg.learning_rate = lr;
        cfg.loss = ds.task == Task::regression ? LossKind::mse : LossKind::cross_entropy;
        return cfg;
    };

    // phase 1: depth and learning rate for the random baseline at fixed width
    SearchSpace phase1;
    {
        std::vector<std::string> depth_values;
        for (int d : opts.depth_choices) depth_values.push_back(std::to_string(d));
        phase1.dims["depth"] = ParamSpec::categorical(depth_values);
        phase1.dims["learning_rate"] = ParamSpec::log_uniform(opts.lr_lo, opts.lr_hi);
    }
    const SearchResult phase1_result = random_search(
        phase1, opts.budget,
        [&](const ParamMap& params) {
            InitSpec ispec;
            ispec.mode = InitMode::random;
            ispec.width = opts.width;
            ispec.depth = std::stoi(param_as_string(params, "depth"));
            MethodSpec method = make_mlp_method(
                InitMode::random, ispec,
                make_train_cfg(param_as_double(params, "learning_rate"), opts.trial_epochs));
            RunRequest req;
            req.prepared = &tuned_ds;
            req.method = &method;
            req.train_rows = tune_train;
            req.val_rows = tune_val;
            req.seed = derive_seed(seed, 0xa11);
            return run_one(req).best_val_loss;
        },
        derive_seed(seed, 0x9a1));
    const int shared_depth = std::stoi(param_as_string(phase1_result.best, "depth"));
    const double shared_lr = param_as_double(phase1_result.best, "learning_rate");
    report.metadata["phase1.best"] = params_to_string(phase1_result.best);
    report.metadata["phase1.val_loss"] = format_double(phase1_result.best_objective);
    report.metadata["width"] = std::to_string(opts.width);
    report.metadata["depth"] = std::to_string(shared_depth);
    report.metadata["learning_rate"] = format_double(shared_lr);
    report.metadata["budget"] = std::to_string(opts.budget);

    // phase 2: initializer-side hyperparameters per tree method
    std::map<std::string, MethodSpec> finals;
    {
        InitSpec ispec;
        ispec.mode = InitMode::random;
        ispec.width = opts.width;
        ispec.depth = shared_depth;
        finals["random"] =
            make_mlp_method(InitMode::random, ispec, make_train_cfg(shared_lr, opts.final_epochs));
    }
    for (const auto& name : methods) {
        if (name == "random") continue;
        const SearchSpace space = tree_init_space(name, opts.width, static_cast<int>(ds.cols()),
                                                  shared_depth, ds.task, ds.n_classes);
        const SearchResult tuned = random_search(
            space, opts.budget,
            [&](const ParamMap& params) {
                InitSpec ispec;
                ispec.mode = init_mode_from_string(name);
                ispec.width = opts.width;
                ispec.depth = shared_depth;
                ispec.strengths = strengths_from_params(name, params);
                ispec.tree = tree_config_from_params(name, params, opts.width,
                                                     static_cast<int>(ds.cols()), ds.task,
                                                     ds.n_classes);
                MethodSpec method = make_mlp_method(
                    ispec.mode, ispec, make_train_cfg(shared_lr, opts.trial_epochs));
                RunRequest req;
                req.prepared = &tuned_ds;
                req.method = &method;
                req.train_rows = tune_train;
                req.val_rows = tune_val;
                req.seed = derive_seed(seed, 0xa11);
                return run_one(req).best_val_loss;
            },
            derive_seed(seed, fnv1a(name)));
        InitSpec ispec;
        ispec.mode = init_mode_from_string(name);
        ispec.width = opts.width;
        ispec.depth = shared_depth;
        ispec.strengths = strengths_from_params(name, tuned.best);
        ispec.tree = tree_config_from_params(name, tuned.best, opts.width,
                                             static_cast<int>(ds.cols()), ds.task, ds.n_classes);
        finals[name] = make_mlp_method(ispec.mode, ispec, make_train_cfg(shared_lr, opts.final_epochs));
        report.metadata["phase2." + name + ".best"] = params_to_string(tuned.best);
        report.metadata["phase2." + name + ".val_loss"] = format_double(tuned.best_objective);
    }

    // final runs: every method once per seed on a fresh split, full curves
    struct FinalCell {
        FoldScore score;
        std::vector<CurvePoint> curves;
        SparsitySnapshot sparsity;
        bool has_sparsity = false;
    };
    std::vector<std::pair<std::string, std::uint64_t>> jobs;
    for (const auto& name : methods)
        for (std::size_t s = 0; s < opts.seeds.size(); ++s)
            jobs.emplace_back(name, opts.seeds[s]);
    std::vector<FinalCell> cells(jobs.size());

    parallel_for(jobs.size(), [&](std::size_t idx) {
        const auto& [name, run_seed] = jobs[idx];
        auto [train_rows, val_rows] =
            split_holdout(ds, all_rows, opts.val_frac, derive_seed(run_seed, 0xf1d));
        const Dataset prepared = prepare_dataset(ds, train_rows);
        RunRequest req;
        req.prepared = &prepared;
        req.method = &finals.at(name);
        req.train_rows = train_rows;
        req.val_rows = val_rows;
        req.seed = derive_seed(run_seed, 0x1e4f);
        req.want_sparsity = true;
        const RunResult result = run_one(req);

        const int run_index =
            static_cast<int>(idx % opts.seeds.size());
        FinalCell& cell = cells[idx];
        cell.score = {display_name(name), run_index, 0, result.metric, result.seconds, run_seed};
        append_curves(cell.curves, display_name(name), run_index, 0, result);
        if (result.has_sparsity) {
            cell.sparsity = result.sparsity;
            cell.sparsity.method = display_name(name);
            cell.sparsity.run = run_index;
            cell.has_sparsity = true;
        }
    });
    for (auto& cell : cells) {
        report.scores.push_back(cell.score);
        report.curves.insert(report.curves.end(), cell.curves.begin(), cell.curves.end());
        if (cell.has_sparsity) report.sparsity.push_back(cell.sparsity);
    }
    report.summaries = summarize(report.scores);
    std::string seed_list;
    for (auto s : opts.seeds) seed_list += (seed_list.empty() ? "" : ",") + std::to_string(s);
    report.metadata["seeds"] = seed_list;
    return report;
}

ExperimentReport run_protocol_p2(const Dataset& ds, const std::vector<std::string>& methods,
                                 const P2Options& opts, std::uint64_t seed) {
    for (const auto& m : methods)
        if (m != "random" && m != "rf" && m != "gbdt" && m != "df")
            throw ConfigError("protocol p2: unknown method '" + m + "'");
    if (opts.budget < 4 || opts.budget % 4 != 0)
        throw ConfigError("protocol p2: budget must be divisible by 4 for the 25/75 split");

    ExperimentReport report;
    report.protocol = "p2";
    report.metric_name = metric_name_for(ds.task);
    report.higher_is_better = metric_higher_is_better(ds.task);
    report.metadata["budget"] = std::to_string(opts.budget);

    std::vector<int> all_rows(static_cast<std::size_t>(ds.rows()));
    for (Eigen::Index i = 0; i < ds.rows(); ++i) all_rows[static_cast<std::size_t>(i)] = static_cast<int>(i);
    auto [tune_train, tune_val] = split_holdout(ds, all_rows, opts.val_frac, derive_seed(seed, 202));
    const Dataset tuned_ds = prepare_dataset(ds, tune_train);

    auto make_train_cfg = [&](double lr, int epochs) {
        TrainConfig cfg;
        cfg.epochs = epochs;
        cfg.batch_size = opts.batch_size;
        cfg.learning_rate = lr;
        cfg.loss = ds.task == Task::regression ? LossKind::mse : LossKind::cross_entropy;
        return cfg;
    };
    const int trial_epochs = std::max(10, opts.epochs * 2 / 5);

    const FoldPlan folds =
        make_folds(ds, opts.k, ds.task != Task::regression, derive_seed(seed, 303));

    for (const auto& name : methods) {
        MethodSpec final_method;
        if (name == "random") {
            SearchSpace space;
            space.dims["learning_rate"] = ParamSpec::log_uniform(opts.lr_lo, opts.lr_hi);
            space.dims["depth"] = ParamSpec::integer(opts.depth_lo_random, opts.depth_hi_random);
            space.dims["width"] = ParamSpec::integer(opts.width_lo, opts.width_hi);
            const SearchResult tuned = random_search(
                space, opts.budget,
                [&](const ParamMap& params) {
                    InitSpec ispec;
                    ispec.mode = InitMode::random;
                    ispec.width = static_cast<int>(param_as_int(params, "width"));
                    ispec.depth = static_cast<int>(param_as_int(params, "depth"));
                    MethodSpec method = make_mlp_method(
                        InitMode::random, ispec,
                        make_train_cfg(param_as_double(params, "learning_rate"), trial_epochs));
                    RunRequest req;
                    req.prepared = &tuned_ds;
                    req.method = &method;
                    req.train_rows = tune_train;
                    req.val_rows = tune_val;
                    req.seed = derive_seed(seed, 0xb0b);
                    return run_one(req).best_val_loss;
                },
                derive_seed(seed, 0x9a2));
            InitSpec ispec;
            ispec.mode = InitMode::random;
            ispec.width = static_cast<int>(param_as_int(tuned.best, "width"));
            ispec.depth = static_cast<int>(param_as_int(tuned.best, "depth"));
            final_method = make_mlp_method(
                InitMode::random, ispec,
                make_train_cfg(param_as_double(tuned.best, "learning_rate"), opts.epochs));
            report.metadata["random.budget_split"] = std::to_string(opts.budget) + "+0";
            report.metadata["random.best"] = params_to_string(tuned.best);
        } else {
            const int tree_budget = opts.budget / 4;
            const int mlp_budget = opts.budget - tree_budget;
            report.metadata[name + ".budget_split"] =
                std::to_string(tree_budget) + "+" + std::to_string(mlp_budget);

            // phase A: the tree predictor's own hyperparameters. The depth
            // range honours the width coupling because the tuned tree seeds
            // the fixed-width network in phase B.
            SearchSpace tree_space;
            tree_space.dims["max_depth"] = ParamSpec::integer(
                2, max_depth_for_width(name, opts.width_fixed, static_cast<int>(ds.cols()),
                                       ds.task, ds.n_classes));
            if (name == "rf" || name == "df")
                tree_space.dims["max_features"] = ParamSpec::uniform(0.3, 1.0);
            if (name == "gbdt") {
                tree_space.dims["learning_rate_gbdt"] = ParamSpec::log_uniform(0.01, 0.3);
                tree_space.dims["reg_lambda"] = ParamSpec::log_uniform(1e-8, 1.0);
            }
            if (name == "df")
                tree_space.dims["forest_depth"] =
                    ParamSpec::integer(1, std::max(1, opts.depth_hi_tree / 3));
            const SearchResult tree_tuned = random_search(
                tree_space, tree_budget,
                [&](const ParamMap& params) {
                    const TreeFitConfig cfg = tree_config_from_params(
                        name, params, opts.width_fixed, static_cast<int>(ds.cols()), ds.task,
                        ds.n_classes);
                    MethodSpec method = make_tree_method(name, cfg);
                    RunRequest req;
                    req.prepared = &tuned_ds;
                    req.method = &method;
                    req.train_rows = tune_train;
                    req.val_rows = tune_val;
                    req.seed = derive_seed(seed, 0x7e3);
                    const double metric = run_one(req).metric;
                    return metric_higher_is_better(ds.task) ? 1.0 - metric : metric;
                },
                derive_seed(seed, fnv1a(name + ".tree")));
            const TreeFitConfig tree_cfg =
                tree_config_from_params(name, tree_tuned.best, opts.width_fixed,
                                        static_cast<int>(ds.cols()), ds.task, ds.n_classes);
            report.metadata[name + ".tree.best"] = params_to_string(tree_tuned.best);

            // phase B: MLP-side hyperparameters at the fixed width
            SearchSpace mlp_space;
            mlp_space.dims["learning_rate"] = ParamSpec::log_uniform(opts.lr_lo, opts.lr_hi);
            const int depth_lo = name == "df" ? std::max(opts.depth_lo_tree, 3 * tree_cfg.forest_depth)
                                              : opts.depth_lo_tree;
            mlp_space.dims["depth"] =
                ParamSpec::integer(depth_lo, std::max(depth_lo, opts.depth_hi_tree));
            mlp_space.dims["strength01"] = ParamSpec::log_uniform(1.0, 1e4);
            mlp_space.dims["strength12"] = ParamSpec::log_uniform(1e-2, 1e2);
            if (name == "df") {
                mlp_space.dims["strength23"] = ParamSpec::log_uniform(1e-2, 1e2);
                mlp_space.dims["strength_id"] = ParamSpec::log_uniform(1e-2, 1e2);
            }
            const SearchResult mlp_tuned = random_search(
                mlp_space, mlp_budget,
                [&](const ParamMap& params) {
                    InitSpec ispec;
                    ispec.mode = init_mode_from_string(name);
                    ispec.width = opts.width_fixed;
                    ispec.depth = static_cast<int>(param_as_int(params, "depth"));
                    ispec.strengths = strengths_from_params(name, params);
                    ispec.tree = tree_cfg;
                    MethodSpec method = make_mlp_method(
                        ispec.mode, ispec,
                        make_train_cfg(param_as_double(params, "learning_rate"), trial_epochs));
                    RunRequest req;
                    req.prepared = &tuned_ds;
                    req.method = &method;
                    req.train_rows = tune_train;
                    req.val_rows = tune_val;
                    req.seed = derive_seed(seed, 0xb0b);
                    return run_one(req).best_val_loss;
                },
                derive_seed(seed, fnv1a(name + ".mlp")));
            InitSpec ispec;
            ispec.mode = init_mode_from_string(name);
            ispec.width = opts.width_fixed;
            ispec.depth = static_cast<int>(param_as_int(mlp_tuned.best, "depth"));
            ispec.strengths = strengths_from_params(name, mlp_tuned.best);
            ispec.tree = tree_cfg;
            final_method = make_mlp_method(
                ispec.mode, ispec,
                make_train_cfg(param_as_double(mlp_tuned.best, "learning_rate"), opts.epochs));
            report.metadata[name + ".mlp.best"] = params_to_string(mlp_tuned.best);
        }

        ExperimentReport cv = cross_validate(ds, final_method, folds, opts.repeats,
                                             derive_seed(seed, 0xcf), CvOptions{opts.val_frac, false});
        for (auto& score : cv.scores) {
            score.method = display_name(name);
            report.scores.push_back(score);
        }
    }
    report.summaries = summarize(report.scores);
    report.metadata["k"] = std::to_string(opts.k);
    report.metadata["repeats"] = std::to_string(opts.repeats);
    report.metadata["width_fixed"] = std::to_string(opts.width_fixed);
    return report;
}

}  // namespace treeseed
