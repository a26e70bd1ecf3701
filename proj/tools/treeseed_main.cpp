#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <treeseed/serialize.hpp>

#include "sha256.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <set>

using nlohmann::json;
using namespace treeseed;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

std::string iso_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

/// Run manifest: written with status "running" before the work starts and
/// finalized (outputs, end timestamp) afterwards.
class Manifest {
public:
    Manifest(std::string command, std::string path) : path_(std::move(path)) {
        doc_["format_version"] = kFormatVersion;
        doc_["tool_version"] = kVersion;
        doc_["command"] = std::move(command);
        doc_["started_at"] = iso_now();
        doc_["status"] = "running";
        doc_["inputs"] = json::array();
        doc_["outputs"] = json::array();
        doc_["notes"] = json::object();
    }

    void set_config(json config) {
        doc_["config_sha256"] = tools::Sha256::hash(config.dump());
        doc_["config"] = std::move(config);
    }

    void add_input(const std::string& path) {
        doc_["inputs"].push_back({{"path", path},
                                  {"sha256", tools::Sha256::hash(read_text_file(path))}});
    }

    void add_output(const std::string& path) { outputs_.push_back(path); }
    void note(const std::string& key, const json& value) { doc_["notes"][key] = value; }

    void begin() { flush(); }

    void finalize() {
        doc_["outputs"] = outputs_;
        doc_["finished_at"] = iso_now();
        doc_["status"] = "ok";
        flush();
    }

    const std::string& path() const { return path_; }

private:
    void flush() { write_text_file(path_, doc_.dump(2)); }

    json doc_;
    std::string path_;
    std::vector<std::string> outputs_;
};

void ensure_parent_dir(const std::string& base) {
    const auto parent = std::filesystem::path(base).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
}

/// Config-file handling: JSON object with full-word keys; command-line flags
/// override file values; unknown keys are rejected.
json load_config_file(const std::string& path, const std::set<std::string>& allowed) {
    json config;
    try {
        config = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError("config file '" + path + "': " + e.what());
    }
    if (!config.is_object()) throw ConfigError("config file '" + path + "' must hold a JSON object");
    for (const auto& [key, value] : config.items()) {
        (void)value;
        if (!allowed.count(key))
            throw ConfigError("config file '" + path + "': unknown key '" + key + "'");
    }
    return config;
}

template <class T>
void apply_config(const json& config, const std::string& key, T& target) {
    if (config.contains(key)) target = config.at(key).get<T>();
}

Dataset load_dataset(const std::string& data_path, const std::string& schema_path,
                     Manifest& manifest) {
    const SchemaFile schema = load_schema(schema_path);
    manifest.add_input(schema_path);
    manifest.add_input(data_path);
    Dataset ds = load_csv(data_path, schema.columns, schema.target, schema.task);
    return label_encode(ds);
}

std::vector<int> all_rows(const Dataset& ds) {
    std::vector<int> rows(static_cast<std::size_t>(ds.rows()));
    for (Eigen::Index i = 0; i < ds.rows(); ++i) rows[static_cast<std::size_t>(i)] = static_cast<int>(i);
    return rows;
}

json fidelity_to_json(const FidelityReport& report) {
    return {{"mean_abs_error", report.mean_abs}, {"max_abs_error", report.max_abs}};
}

// ---------------------------------------------------------------------------

struct GenOptions {
    std::string kind = "friedman1";
    int n = 1000;
    std::uint64_t seed = 0;
    double noise_sd = 1.0;
    int d_extra = 5;
    double flip_prob = 0.1;
    std::string out = "dataset";
};

int cmd_gen(const GenOptions& opt) {
    if (opt.kind != "friedman1" && opt.kind != "xor")
        throw ConfigError("unknown generator '" + opt.kind + "' (expected friedman1 or xor)");
    ensure_parent_dir(opt.out);
    Manifest manifest("gen", opt.out + ".manifest.json");
    manifest.set_config({{"kind", opt.kind},
                         {"n", opt.n},
                         {"seed", opt.seed},
                         {"noise_sd", opt.noise_sd},
                         {"d_extra", opt.d_extra},
                         {"flip_prob", opt.flip_prob},
                         {"out", opt.out}});
    manifest.begin();

    const Dataset ds = opt.kind == "friedman1"
                           ? friedman1(opt.n, opt.noise_sd, opt.d_extra, opt.seed)
                           : xor_classif(opt.n, opt.d_extra, opt.flip_prob, opt.seed);
    const std::string csv_path = opt.out + ".csv";
    const std::string schema_path = opt.out + ".schema.json";
    write_dataset_csv(ds, "y", csv_path);
    SchemaFile schema;
    schema.columns = ds.schema;
    schema.target = "y";
    schema.task = ds.task;
    save_schema(schema, schema_path);
    manifest.add_output(csv_path);
    manifest.add_output(schema_path);
    manifest.finalize();
    std::cout << "wrote " << ds.rows() << " rows x " << ds.cols() << " feature columns ("
              << to_string(ds.task) << ") to " << csv_path << "\n";
    return kExitOk;
}

struct FitOptions {
    std::string data, schema, method = "rf";
    TreeFitConfig tree;
    double val_frac = 0.2;
    std::uint64_t seed = 0;
    std::string out = "model";
};

int cmd_fit(const FitOptions& opt) {
    static const std::set<std::string> methods = {"cart", "rf", "crf", "gbdt", "df"};
    if (!methods.count(opt.method))
        throw ConfigError("unknown method '" + opt.method + "' (expected cart, rf, crf, gbdt or df)");
    ensure_parent_dir(opt.out);
    Manifest manifest("fit", opt.out + ".manifest.json");
    manifest.set_config({{"data", opt.data},
                         {"schema", opt.schema},
                         {"method", opt.method},
                         {"max_depth", opt.tree.max_depth},
                         {"n_estimators", opt.tree.n_estimators},
                         {"max_features", opt.tree.max_features},
                         {"min_samples_leaf", opt.tree.min_samples_leaf},
                         {"learning_rate_gbdt", opt.tree.eta},
                         {"reg_lambda", opt.tree.lambda},
                         {"forest_depth", opt.tree.forest_depth},
                         {"n_rf_per_layer", opt.tree.n_rf_per_layer},
                         {"n_crf_per_layer", opt.tree.n_crf_per_layer},
                         {"val_frac", opt.val_frac},
                         {"seed", opt.seed},
                         {"out", opt.out}});
    const Dataset raw = load_dataset(opt.data, opt.schema, manifest);
    manifest.begin();

    auto [train_rows, val_rows] =
        split_holdout(raw, all_rows(raw), opt.val_frac, derive_seed(opt.seed, 0x5e7));
    const NormStats stats = normalize_fit(raw, train_rows);
    const Dataset ds = normalize_apply(raw, stats);

    Rng rng(opt.seed);
    TreeModel model;
    if (opt.method == "rf")
        model = fit_random_forest(ds, train_rows, opt.tree, rng);
    else if (opt.method == "crf")
        model = fit_completely_random_forest(ds, train_rows, opt.tree, rng);
    else if (opt.method == "gbdt")
        model = fit_gbdt(ds, train_rows, opt.tree, rng);
    else if (opt.method == "df")
        model = fit_deep_forest(ds, train_rows, opt.tree, rng, val_rows);
    else {
        model.kind = TreeKind::single;
        model.task = ds.task;
        model.n_classes = ds.n_classes;
        model.input_dim = static_cast<int>(ds.cols());
        model.trees.push_back(fit_cart(ds, train_rows, opt.tree, rng));
        model.weights.push_back(1.0);
    }

    auto metric_on = [&](const std::vector<int>& rows) {
        Matrix X(static_cast<Eigen::Index>(rows.size()), ds.cols());
        for (std::size_t i = 0; i < rows.size(); ++i)
            X.row(static_cast<Eigen::Index>(i)) = ds.X.row(rows[i]);
        const Matrix scores = predict_scores(model, X);
        if (ds.task == Task::regression) {
            std::vector<double> pred, target;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                pred.push_back(scores(static_cast<Eigen::Index>(i), 0));
                target.push_back(ds.y[rows[i]]);
            }
            return mse(pred, target);
        }
        std::vector<int> labels(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) labels[i] = ds.label_at(rows[i]);
        if (ds.task == Task::binary) {
            std::vector<double> s(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i)
                s[i] = scores(static_cast<Eigen::Index>(i), 1);
            return auroc(s, labels);
        }
        return accuracy_from_logits(scores, labels);
    };

    const std::string model_path = opt.out + ".model.json";
    save_model(model, model_path);
    manifest.add_output(model_path);

    json metrics;
    metrics["format_version"] = kFormatVersion;
    metrics["metric"] = metric_name_for(ds.task);
    metrics["train"] = metric_on(train_rows);
    metrics["val"] = metric_on(val_rows);
    metrics["n_trees"] = model.kind == TreeKind::deep_forest ? json() : json(model.trees.size());
    if (model.kind == TreeKind::deep_forest) {
        metrics["best_layer"] = model.best_layer;
        manifest.note("best_layer", model.best_layer);
        manifest.note("layer_scores", model.layer_scores);
    }
    const std::string metrics_path = opt.out + ".metrics.json";
    write_text_file(metrics_path, metrics.dump(2));
    manifest.add_output(metrics_path);
    manifest.finalize();
    std::cout << "fit " << opt.method << ": train " << metrics["train"] << ", val "
              << metrics["val"] << " (" << metrics["metric"].get<std::string>() << ")\n";
    return kExitOk;
}

struct TranslateOptions {
    std::string model, data, schema;
    bool exact = true;
    std::string strengths;  // "a,b,c,d" enables the relaxed stack
    bool compensated = false;
    int sample = 1000;
    std::string depth_sweep;  // "lo:hi"
    std::uint64_t seed = 0;
    std::string out = "stack";
};

Strengths parse_strengths(const std::string& text) {
    Strengths s;
    double values[4];
    int i = 0;
    std::stringstream stream(text);
    std::string token;
    while (std::getline(stream, token, ',')) {
        if (i >= 4) throw ConfigError("--strengths takes four comma-separated values");
        try {
            values[i++] = std::stod(token);
        } catch (const std::exception&) {
            throw ConfigError("--strengths: cannot parse '" + token + "'");
        }
    }
    if (i != 4) throw ConfigError("--strengths takes four comma-separated values");
    s.s01 = values[0];
    s.s12 = values[1];
    s.s23 = values[2];
    s.s_id = values[3];
    if (s.s01 <= 0 || s.s12 <= 0 || s.s23 <= 0 || s.s_id <= 0)
        throw ConfigError("--strengths must all be positive");
    return s;
}

int cmd_translate(const TranslateOptions& opt) {
    ensure_parent_dir(opt.out);
    Manifest manifest("translate", opt.out + ".manifest.json");
    manifest.set_config({{"model", opt.model},
                         {"data", opt.data},
                         {"schema", opt.schema},
                         {"exact", opt.exact},
                         {"strengths", opt.strengths},
                         {"compensated", opt.compensated},
                         {"sample", opt.sample},
                         {"depth_sweep", opt.depth_sweep},
                         {"seed", opt.seed},
                         {"out", opt.out}});
    const Dataset raw = load_dataset(opt.data, opt.schema, manifest);
    const auto rows = all_rows(raw);
    const NormStats stats = normalize_fit(raw, rows);
    const Dataset ds = normalize_apply(raw, stats);

    // evaluation sample for fidelity reports
    const int n_sample = std::min<int>(opt.sample, static_cast<int>(ds.rows()));
    Rng sample_rng(derive_seed(opt.seed, 0x5a3));
    std::vector<int> sample_rows = rows;
    sample_rng.shuffle(sample_rows);
    sample_rows.resize(static_cast<std::size_t>(n_sample));
    Matrix X(n_sample, ds.cols());
    for (int i = 0; i < n_sample; ++i) X.row(i) = ds.X.row(sample_rows[static_cast<std::size_t>(i)]);

    if (!opt.depth_sweep.empty()) {
        const auto colon = opt.depth_sweep.find(':');
        if (colon == std::string::npos)
            throw ConfigError("--depth-sweep expects LO:HI, e.g. 2:12");
        const int lo = std::stoi(opt.depth_sweep.substr(0, colon));
        const int hi = std::stoi(opt.depth_sweep.substr(colon + 1));
        if (lo < 1 || hi < lo) throw ConfigError("--depth-sweep range is empty");
        manifest.begin();
        std::ostringstream csv;
        csv << "depth,mean_abs_error_f32,mean_abs_error_f32_compensated,mean_abs_error_f64\n";
        for (int depth = lo; depth <= hi; ++depth) {
            TreeFitConfig cfg;
            cfg.max_depth = depth;
            Rng rng(derive_seed(opt.seed, static_cast<std::uint64_t>(depth)));
            TreeModel model;
            model.kind = TreeKind::single;
            model.task = ds.task;
            model.n_classes = ds.n_classes;
            model.input_dim = static_cast<int>(ds.cols());
            model.trees.push_back(fit_cart(ds, rows, cfg, rng));
            model.weights.push_back(1.0);
            const LayerStack stack = translate_ensemble_exact(model);
            const LayerStack compensated = cancellation_compensated_readout(stack);
            csv << depth << ',' << fidelity32(model, stack, X).mean_abs << ','
                << fidelity32(model, compensated, X).mean_abs << ','
                << fidelity(model, stack, X).mean_abs << '\n';
        }
        const std::string sweep_path = opt.out + ".sweep.csv";
        write_text_file(sweep_path, csv.str());
        manifest.add_output(sweep_path);
        manifest.finalize();
        std::cout << "wrote depth sweep to " << sweep_path << "\n";
        return kExitOk;
    }

    const TreeModel model = load_model(opt.model);
    manifest.add_input(opt.model);
    manifest.begin();

    json fidelity_doc;
    fidelity_doc["format_version"] = kFormatVersion;
    fidelity_doc["sample_rows"] = n_sample;

    const LayerStack exact = translate_model_exact(model);
    if (opt.exact) {
        const std::string path = opt.out + ".exact.json";
        save_stack(exact, path);
        manifest.add_output(path);
        fidelity_doc["exact"] = fidelity_to_json(fidelity(model, exact, X));
        fidelity_doc["exact_f32"] = fidelity_to_json(fidelity32(model, exact, X));
    }
    if (!opt.strengths.empty()) {
        const Strengths s = parse_strengths(opt.strengths);
        const LayerStack relaxed = relax(exact, s);
        const std::string path = opt.out + ".relaxed.json";
        save_stack(relaxed, path);
        manifest.add_output(path);
        fidelity_doc["relaxed"] = fidelity_to_json(fidelity(model, relaxed, X));
        const Matrix a = evaluate_stack64(exact, X);
        const Matrix b = evaluate_stack64(relaxed, X);
        fidelity_doc["relaxed_vs_exact"] = {{"mean_abs_error", (a - b).cwiseAbs().mean()},
                                            {"max_abs_error", (a - b).cwiseAbs().maxCoeff()}};
    }
    if (opt.compensated) {
        const LayerStack compensated = cancellation_compensated_readout(exact);
        const std::string path = opt.out + ".compensated.json";
        save_stack(compensated, path);
        manifest.add_output(path);
        fidelity_doc["compensated"] = fidelity_to_json(fidelity(model, compensated, X));
        fidelity_doc["compensated_f32"] = fidelity_to_json(fidelity32(model, compensated, X));
    }

    const std::string fidelity_path = opt.out + ".fidelity.json";
    write_text_file(fidelity_path, fidelity_doc.dump(2));
    manifest.add_output(fidelity_path);
    manifest.finalize();
    std::cout << "fidelity report written to " << fidelity_path << "\n";
    return kExitOk;
}

struct TrainOptions {
    std::string data, schema;
    std::string init = "random";
    int width = 64;
    int depth = 3;
    int epochs = 100;
    int batch_size = 256;
    double learning_rate = 1e-3;
    double strength01 = 1e3, strength12 = 1.0, strength23 = 1.0, strength_id = 1.0;
    TreeFitConfig tree;
    double val_frac = 0.2;
    std::uint64_t seed = 0;
    std::string out = "run";
};

int cmd_train(const TrainOptions& opt) {
    const InitMode mode = init_mode_from_string(opt.init);
    ensure_parent_dir(opt.out);
    Manifest manifest("train", opt.out + ".manifest.json");
    manifest.set_config({{"data", opt.data},
                         {"schema", opt.schema},
                         {"init", opt.init},
                         {"width", opt.width},
                         {"depth", opt.depth},
                         {"epochs", opt.epochs},
                         {"batch_size", opt.batch_size},
                         {"learning_rate", opt.learning_rate},
                         {"strength01", opt.strength01},
                         {"strength12", opt.strength12},
                         {"strength23", opt.strength23},
                         {"strength_id", opt.strength_id},
                         {"max_depth", opt.tree.max_depth},
                         {"n_estimators", opt.tree.n_estimators},
                         {"max_features", opt.tree.max_features},
                         {"learning_rate_gbdt", opt.tree.eta},
                         {"reg_lambda", opt.tree.lambda},
                         {"forest_depth", opt.tree.forest_depth},
                         {"val_frac", opt.val_frac},
                         {"seed", opt.seed},
                         {"out", opt.out}});
    const Dataset raw = load_dataset(opt.data, opt.schema, manifest);
    manifest.begin();

    auto [train_rows, val_rows] =
        split_holdout(raw, all_rows(raw), opt.val_frac, derive_seed(opt.seed, 0x5e7));
    const NormStats stats = normalize_fit(raw, train_rows);
    const Dataset ds = normalize_apply(raw, stats);

    InitSpec spec;
    spec.mode = mode;
    spec.width = opt.width;
    spec.depth = opt.depth;
    spec.strengths = {opt.strength01, opt.strength12, opt.strength23, opt.strength_id};
    spec.tree = opt.tree;
    spec.seed = derive_seed(opt.seed, 0x1417);
    spec.tree.seed = derive_seed(opt.seed, 0x7ee5);

    Mlp<float> net0;
    if (mode == InitMode::random) {
        std::vector<int> dims;
        dims.push_back(static_cast<int>(ds.cols()));
        for (int j = 1; j < opt.depth; ++j) dims.push_back(opt.width);
        dims.push_back(ds.task == Task::regression ? 1 : ds.n_classes);
        net0 = init_random<float>(dims, derive_seed(spec.seed, 0x6d6c70));
    } else {
        Rng rng(derive_seed(opt.seed, 0x7265));
        auto [net, model] = init_from_trees<float>(ds, train_rows, spec, rng);
        net0 = std::move(net);
        manifest.note("initializer_trees", model.kind == TreeKind::deep_forest
                                               ? json(model.best_layer)
                                               : json(model.trees.size()));
    }

    const std::string sparsity0_path = opt.out + ".sparsity_epoch0.json";
    write_text_file(sparsity0_path,
                    sparsity_to_json(sparsity_stats(layer_weights_as_double(net0), 1e-3)));
    manifest.add_output(sparsity0_path);

    TrainConfig cfg;
    cfg.epochs = opt.epochs;
    cfg.batch_size = opt.batch_size;
    cfg.learning_rate = opt.learning_rate;
    cfg.loss = ds.task == Task::regression ? LossKind::mse : LossKind::cross_entropy;
    cfg.seed = derive_seed(opt.seed, 0x5eed);

    auto tr = make_train_data<float>(ds, train_rows);
    auto val = make_train_data<float>(ds, val_rows);
    // regression targets are standardized for training; history losses are in
    // standardized units (the per-epoch ranking is unchanged)
    double y_mean = 0.0, y_std = 1.0;
    if (ds.task == Task::regression) {
        for (int r : train_rows) y_mean += ds.y[r];
        y_mean /= static_cast<double>(train_rows.size());
        double var = 0.0;
        for (int r : train_rows) var += (ds.y[r] - y_mean) * (ds.y[r] - y_mean);
        var /= static_cast<double>(train_rows.size());
        y_std = var > 0.0 ? std::sqrt(var) : 1.0;
        tr.y = ((tr.y.cast<double>().array() - y_mean) / y_std).cast<float>().matrix();
        val.y = ((val.y.cast<double>().array() - y_mean) / y_std).cast<float>().matrix();
    }
    Mlp<float> final_net;
    const auto [best, history] = train(net0, tr, val, cfg, ds.task, &final_net);

    const std::string history_path = opt.out + ".history.csv";
    save_history(history, history_path);
    manifest.add_output(history_path);

    const std::string sparsity_final_path = opt.out + ".sparsity_final.json";
    write_text_file(sparsity_final_path,
                    sparsity_to_json(sparsity_stats(layer_weights_as_double(final_net), 1e-3)));
    manifest.add_output(sparsity_final_path);

    Checkpoint ck;
    ck.mlp = best;
    ck.task = ds.task;
    ck.n_classes = ds.n_classes;
    ck.epoch = static_cast<int>(history.epochs.size());
    ck.best_epoch = history.best_epoch;
    const std::string ck_path = opt.out + ".checkpoint.json";
    save_checkpoint(ck, ck_path);
    manifest.add_output(ck_path);

    json metrics;
    metrics["format_version"] = kFormatVersion;
    metrics["epochs_run"] = history.epochs.size();
    metrics["best_epoch"] = history.best_epoch + 1;
    metrics["aborted"] = history.aborted;
    if (!history.epochs.empty() && history.best_epoch >= 0) {
        const auto& best_stats = history.epochs[static_cast<std::size_t>(history.best_epoch)];
        metrics["best_val_loss"] = best_stats.val_loss;
        metrics["best_val_metric"] = best_stats.val_metric;
    }
    {
        // validation metric in original units
        MatrixT<float> Xv(static_cast<Eigen::Index>(val_rows.size()), ds.cols());
        for (std::size_t i = 0; i < val_rows.size(); ++i)
            Xv.row(static_cast<Eigen::Index>(i)) = ds.X.row(val_rows[i]).cast<float>();
        const Matrix out = forward(best, Xv).cast<double>();
        if (ds.task == Task::regression) {
            std::vector<double> pred, target;
            for (std::size_t i = 0; i < val_rows.size(); ++i) {
                pred.push_back(out(static_cast<Eigen::Index>(i), 0) * y_std + y_mean);
                target.push_back(ds.y[val_rows[i]]);
            }
            metrics["val_mse"] = mse(pred, target);
        } else {
            std::vector<int> labels(val_rows.size());
            for (std::size_t i = 0; i < val_rows.size(); ++i) labels[i] = ds.label_at(val_rows[i]);
            Vector dummy;
            metrics["val_metric"] = validation_metric(ds.task, out, dummy, labels);
        }
    }
    const std::string metrics_path = opt.out + ".metrics.json";
    write_text_file(metrics_path, metrics.dump(2));
    manifest.add_output(metrics_path);
    manifest.finalize();
    std::cout << "trained " << history.epochs.size() << " epochs; artifacts at " << opt.out
              << ".*\n";
    return history.aborted ? kExitNumeric : kExitOk;
}

struct ExperimentOptions {
    std::string data, schema;
    std::string protocol = "p1";
    std::string methods = "random,rf,gbdt";
    int budget = 20;
    int width = 256;
    int n_seeds = 5;
    int epochs = 100;
    int trial_epochs = 40;
    int batch_size = 256;
    int k = 5;
    int repeats = 1;
    std::uint64_t seed = 0;
    std::string out = "experiment";
};

std::vector<std::string> split_methods(const std::string& text) {
    std::vector<std::string> methods;
    std::stringstream stream(text);
    std::string token;
    while (std::getline(stream, token, ','))
        if (!token.empty()) methods.push_back(token);
    if (methods.empty()) throw ConfigError("--methods must name at least one method");
    return methods;
}

int cmd_experiment(const ExperimentOptions& opt) {
    if (opt.protocol != "p1" && opt.protocol != "p2")
        throw ConfigError("unknown protocol '" + opt.protocol + "' (expected p1 or p2)");
    const auto methods = split_methods(opt.methods);
    ensure_parent_dir(opt.out);
    Manifest manifest("experiment", opt.out + ".manifest.json");
    manifest.set_config({{"data", opt.data},
                         {"schema", opt.schema},
                         {"protocol", opt.protocol},
                         {"methods", opt.methods},
                         {"budget", opt.budget},
                         {"width", opt.width},
                         {"seeds", opt.n_seeds},
                         {"epochs", opt.epochs},
                         {"trial_epochs", opt.trial_epochs},
                         {"batch_size", opt.batch_size},
                         {"k", opt.k},
                         {"repeats", opt.repeats},
                         {"seed", opt.seed},
                         {"out", opt.out}});
    const Dataset ds = load_dataset(opt.data, opt.schema, manifest);
    manifest.begin();

    ExperimentReport report;
    if (opt.protocol == "p1") {
        P1Options p1;
        p1.width = opt.width;
        p1.budget = opt.budget;
        p1.trial_epochs = opt.trial_epochs;
        p1.final_epochs = opt.epochs;
        p1.batch_size = opt.batch_size;
        p1.seeds.clear();
        for (int s = 1; s <= opt.n_seeds; ++s) p1.seeds.push_back(static_cast<std::uint64_t>(s));
        report = run_protocol_p1(ds, methods, p1, opt.seed);
    } else {
        P2Options p2;
        p2.budget = opt.budget;
        p2.width_fixed = opt.width;
        p2.width_hi = opt.width;
        p2.epochs = opt.epochs;
        p2.batch_size = opt.batch_size;
        p2.k = opt.k;
        p2.repeats = opt.repeats;
        report = run_protocol_p2(ds, methods, p2, opt.seed);
        for (const auto& [key, value] : report.metadata)
            if (key.find("budget_split") != std::string::npos) manifest.note(key, value);
    }

    const std::string report_path = opt.out + ".report.json";
    save_report(report, report_path);
    manifest.add_output(report_path);
    const std::string curves_path = opt.out + ".curves.csv";
    write_text_file(curves_path, curves_to_csv(report.curves));
    manifest.add_output(curves_path);
    const std::string summary_path = opt.out + ".summary.txt";
    const std::string table = render_summary_table(report);
    write_text_file(summary_path, table);
    manifest.add_output(summary_path);
    manifest.finalize();
    std::cout << table;
    return kExitOk;
}

int cmd_report(const std::string& path) {
    const ExperimentReport report = load_report(path);
    std::cout << render_summary_table(report);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tree-seeded MLP toolkit"};
    app.require_subcommand(1);

    GenOptions gen;
    FitOptions fit;
    TranslateOptions translate_opt;
    TrainOptions train_opt;
    ExperimentOptions experiment;
    std::string report_path;
    std::string config_path;

    auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic dataset");
    gen_cmd->add_option("--config", config_path, "JSON config file (flags override)");
    gen_cmd->add_option("--kind", gen.kind, "friedman1 or xor");
    gen_cmd->add_option("--n", gen.n, "number of rows");
    gen_cmd->add_option("--seed", gen.seed, "generator seed");
    gen_cmd->add_option("--noise-sd", gen.noise_sd, "friedman1 noise standard deviation");
    gen_cmd->add_option("--d-extra", gen.d_extra, "extra uninformative features");
    gen_cmd->add_option("--flip-prob", gen.flip_prob, "xor label flip probability");
    gen_cmd->add_option("--out", gen.out, "output path prefix");

    auto* fit_cmd = app.add_subcommand("fit", "fit a tree-based predictor");
    fit_cmd->add_option("--config", config_path, "JSON config file (flags override)");
    fit_cmd->add_option("--data", fit.data, "CSV file")->required();
    fit_cmd->add_option("--schema", fit.schema, "schema JSON file")->required();
    fit_cmd->add_option("--method", fit.method, "cart, rf, crf, gbdt or df");
    fit_cmd->add_option("--max-depth", fit.tree.max_depth, "tree depth bound");
    fit_cmd->add_option("--n-estimators", fit.tree.n_estimators, "trees per forest / rounds");
    fit_cmd->add_option("--max-features", fit.tree.max_features, "feature fraction per split");
    fit_cmd->add_option("--min-samples-leaf", fit.tree.min_samples_leaf, "minimum leaf size");
    fit_cmd->add_option("--eta", fit.tree.eta, "gbdt shrinkage");
    fit_cmd->add_option("--lambda", fit.tree.lambda, "gbdt leaf regularizer");
    fit_cmd->add_option("--forest-depth", fit.tree.forest_depth, "deep-forest layers");
    fit_cmd->add_option("--n-rf-per-layer", fit.tree.n_rf_per_layer, "RFs per cascade layer");
    fit_cmd->add_option("--n-crf-per-layer", fit.tree.n_crf_per_layer, "CRFs per cascade layer");
    fit_cmd->add_option("--val-frac", fit.val_frac, "validation fraction");
    fit_cmd->add_option("--seed", fit.seed, "fit seed");
    fit_cmd->add_option("--out", fit.out, "output path prefix");

    auto* tr_cmd = app.add_subcommand("translate", "translate a model into a layer stack");
    tr_cmd->add_option("--config", config_path, "JSON config file (flags override)");
    tr_cmd->add_option("--model", translate_opt.model, "model JSON file");
    tr_cmd->add_option("--data", translate_opt.data, "CSV file for fidelity evaluation")->required();
    tr_cmd->add_option("--schema", translate_opt.schema, "schema JSON file")->required();
    tr_cmd->add_flag("--exact,!--no-exact", translate_opt.exact, "emit the exact stack");
    tr_cmd->add_option("--strengths", translate_opt.strengths,
                       "strength01,strength12,strength23,strength_id for the relaxed stack");
    tr_cmd->add_flag("--compensated", translate_opt.compensated,
                     "emit the cancellation-compensated stack");
    tr_cmd->add_option("--sample", translate_opt.sample, "fidelity sample size");
    tr_cmd->add_option("--depth-sweep", translate_opt.depth_sweep,
                       "LO:HI tree-depth sweep of translation error");
    tr_cmd->add_option("--seed", translate_opt.seed, "sampling seed");
    tr_cmd->add_option("--out", translate_opt.out, "output path prefix");

    auto* train_cmd = app.add_subcommand("train", "initialize and train an MLP");
    train_cmd->add_option("--config", config_path, "JSON config file (flags override)");
    train_cmd->add_option("--data", train_opt.data, "CSV file")->required();
    train_cmd->add_option("--schema", train_opt.schema, "schema JSON file")->required();
    train_cmd->add_option("--init", train_opt.init, "random, rf, gbdt or df");
    train_cmd->add_option("--width", train_opt.width, "hidden width");
    train_cmd->add_option("--depth", train_opt.depth, "number of affine layers");
    train_cmd->add_option("--epochs", train_opt.epochs, "training epochs");
    train_cmd->add_option("--batch-size", train_opt.batch_size, "minibatch size");
    train_cmd->add_option("--lr", train_opt.learning_rate, "Adam learning rate");
    train_cmd->add_option("--strength01", train_opt.strength01, "first-layer sign strength");
    train_cmd->add_option("--strength12", train_opt.strength12, "second-layer sign strength");
    train_cmd->add_option("--strength23", train_opt.strength23, "readout identity strength");
    train_cmd->add_option("--strength-id", train_opt.strength_id, "passthrough identity strength");
    train_cmd->add_option("--max-depth", train_opt.tree.max_depth, "initializer tree depth");
    train_cmd->add_option("--n-estimators", train_opt.tree.n_estimators, "initializer trees/rounds");
    train_cmd->add_option("--max-features", train_opt.tree.max_features, "initializer feature fraction");
    train_cmd->add_option("--eta", train_opt.tree.eta, "initializer gbdt shrinkage");
    train_cmd->add_option("--lambda", train_opt.tree.lambda, "initializer gbdt regularizer");
    train_cmd->add_option("--forest-depth", train_opt.tree.forest_depth, "initializer cascade layers");
    train_cmd->add_option("--val-frac", train_opt.val_frac, "validation fraction");
    train_cmd->add_option("--seed", train_opt.seed, "run seed");
    train_cmd->add_option("--out", train_opt.out, "output path prefix");

    auto* exp_cmd = app.add_subcommand("experiment", "run protocol p1 or p2");
    exp_cmd->add_option("--config", config_path, "JSON config file (flags override)");
    exp_cmd->add_option("--data", experiment.data, "CSV file")->required();
    exp_cmd->add_option("--schema", experiment.schema, "schema JSON file")->required();
    exp_cmd->add_option("--protocol", experiment.protocol, "p1 or p2");
    exp_cmd->add_option("--methods", experiment.methods, "comma list of random,rf,gbdt,df");
    exp_cmd->add_option("--budget", experiment.budget, "search trials per method");
    exp_cmd->add_option("--width", experiment.width, "shared / fixed MLP width");
    exp_cmd->add_option("--seeds", experiment.n_seeds, "number of final-phase seeds (p1)");
    exp_cmd->add_option("--epochs", experiment.epochs, "final training epochs");
    exp_cmd->add_option("--trial-epochs", experiment.trial_epochs, "search-trial epochs (p1)");
    exp_cmd->add_option("--batch-size", experiment.batch_size, "minibatch size");
    exp_cmd->add_option("--k", experiment.k, "cross-validation folds (p2)");
    exp_cmd->add_option("--repeats", experiment.repeats, "cross-validation repeats (p2)");
    exp_cmd->add_option("--seed", experiment.seed, "master seed");
    exp_cmd->add_option("--out", experiment.out, "output path prefix");

    auto* report_cmd = app.add_subcommand("report", "print the summary table of a report");
    report_cmd->add_option("--report", report_path, "report JSON file")->required();

    try {
        // config files provide defaults; explicit flags win because CLI11
        // only assigns options that were actually passed
        app.preparse_callback([&](std::size_t) {});
        try {
            app.parse(argc, argv);
        } catch (const CLI::ParseError& e) {
            return app.exit(e) == 0 ? kExitOk : kExitConfig;
        }

        if (!config_path.empty()) {
            // reparse after seeding defaults from the config file
            static const std::map<std::string, std::set<std::string>> allowed = {
                {"gen", {"kind", "n", "seed", "noise_sd", "d_extra", "flip_prob", "out"}},
                {"fit",
                 {"data", "schema", "method", "max_depth", "n_estimators", "max_features",
                  "min_samples_leaf", "learning_rate_gbdt", "reg_lambda", "forest_depth",
                  "n_rf_per_layer", "n_crf_per_layer", "val_frac", "seed", "out"}},
                {"translate",
                 {"model", "data", "schema", "exact", "strengths", "compensated", "sample",
                  "depth_sweep", "seed", "out"}},
                {"train",
                 {"data", "schema", "init", "width", "depth", "epochs", "batch_size",
                  "learning_rate", "strength01", "strength12", "strength23", "strength_id",
                  "max_depth", "n_estimators", "max_features", "learning_rate_gbdt", "reg_lambda",
                  "forest_depth", "val_frac", "seed", "out"}},
                {"experiment",
                 {"data", "schema", "protocol", "methods", "budget", "width", "seeds", "epochs",
                  "trial_epochs", "batch_size", "k", "repeats", "seed", "out"}}};
            const std::string sub = app.get_subcommands().front()->get_name();
            const json config = load_config_file(config_path, allowed.at(sub));
            if (sub == "gen") {
                apply_config(config, "kind", gen.kind);
                apply_config(config, "n", gen.n);
                apply_config(config, "seed", gen.seed);
                apply_config(config, "noise_sd", gen.noise_sd);
                apply_config(config, "d_extra", gen.d_extra);
                apply_config(config, "flip_prob", gen.flip_prob);
                apply_config(config, "out", gen.out);
            } else if (sub == "fit") {
                apply_config(config, "data", fit.data);
                apply_config(config, "schema", fit.schema);
                apply_config(config, "method", fit.method);
                apply_config(config, "max_depth", fit.tree.max_depth);
                apply_config(config, "n_estimators", fit.tree.n_estimators);
                apply_config(config, "max_features", fit.tree.max_features);
                apply_config(config, "min_samples_leaf", fit.tree.min_samples_leaf);
                apply_config(config, "learning_rate_gbdt", fit.tree.eta);
                apply_config(config, "reg_lambda", fit.tree.lambda);
                apply_config(config, "forest_depth", fit.tree.forest_depth);
                apply_config(config, "n_rf_per_layer", fit.tree.n_rf_per_layer);
                apply_config(config, "n_crf_per_layer", fit.tree.n_crf_per_layer);
                apply_config(config, "val_frac", fit.val_frac);
                apply_config(config, "seed", fit.seed);
                apply_config(config, "out", fit.out);
            } else if (sub == "translate") {
                apply_config(config, "model", translate_opt.model);
                apply_config(config, "data", translate_opt.data);
                apply_config(config, "schema", translate_opt.schema);
                apply_config(config, "exact", translate_opt.exact);
                apply_config(config, "strengths", translate_opt.strengths);
                apply_config(config, "compensated", translate_opt.compensated);
                apply_config(config, "sample", translate_opt.sample);
                apply_config(config, "depth_sweep", translate_opt.depth_sweep);
                apply_config(config, "seed", translate_opt.seed);
                apply_config(config, "out", translate_opt.out);
            } else if (sub == "train") {
                apply_config(config, "data", train_opt.data);
                apply_config(config, "schema", train_opt.schema);
                apply_config(config, "init", train_opt.init);
                apply_config(config, "width", train_opt.width);
                apply_config(config, "depth", train_opt.depth);
                apply_config(config, "epochs", train_opt.epochs);
                apply_config(config, "batch_size", train_opt.batch_size);
                apply_config(config, "learning_rate", train_opt.learning_rate);
                apply_config(config, "strength01", train_opt.strength01);
                apply_config(config, "strength12", train_opt.strength12);
                apply_config(config, "strength23", train_opt.strength23);
                apply_config(config, "strength_id", train_opt.strength_id);
                apply_config(config, "max_depth", train_opt.tree.max_depth);
                apply_config(config, "n_estimators", train_opt.tree.n_estimators);
                apply_config(config, "max_features", train_opt.tree.max_features);
                apply_config(config, "learning_rate_gbdt", train_opt.tree.eta);
                apply_config(config, "reg_lambda", train_opt.tree.lambda);
                apply_config(config, "forest_depth", train_opt.tree.forest_depth);
                apply_config(config, "val_frac", train_opt.val_frac);
                apply_config(config, "seed", train_opt.seed);
                apply_config(config, "out", train_opt.out);
            } else if (sub == "experiment") {
                apply_config(config, "data", experiment.data);
                apply_config(config, "schema", experiment.schema);
                apply_config(config, "protocol", experiment.protocol);
                apply_config(config, "methods", experiment.methods);
                apply_config(config, "budget", experiment.budget);
                apply_config(config, "width", experiment.width);
                apply_config(config, "seeds", experiment.n_seeds);
                apply_config(config, "epochs", experiment.epochs);
                apply_config(config, "trial_epochs", experiment.trial_epochs);
                apply_config(config, "batch_size", experiment.batch_size);
                apply_config(config, "k", experiment.k);
                apply_config(config, "repeats", experiment.repeats);
                apply_config(config, "seed", experiment.seed);
                apply_config(config, "out", experiment.out);
            }
            // explicit command-line flags override the config file
            app.clear();
            app.parse(argc, argv);
        }

        if (app.got_subcommand("gen")) return cmd_gen(gen);
        if (app.got_subcommand("fit")) return cmd_fit(fit);
        if (app.got_subcommand("translate")) return cmd_translate(translate_opt);
        if (app.got_subcommand("train")) return cmd_train(train_opt);
        if (app.got_subcommand("experiment")) return cmd_experiment(experiment);
        if (app.got_subcommand("report")) return cmd_report(report_path);
        std::cerr << "no subcommand given\n";
        return kExitConfig;
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ArgumentError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
