#include <treeseed/net.hpp>

#include <algorithm>

namespace treeseed {

std::string to_string(InitMode m) {
    switch (m) {
        case InitMode::random: return "random";
        case InitMode::rf: return "rf";
        case InitMode::gbdt: return "gbdt";
        case InitMode::df: return "df";
    }
    return "random";
}

InitMode init_mode_from_string(const std::string& s) {
    if (s == "random") return InitMode::random;
    if (s == "rf") return InitMode::rf;
    if (s == "gbdt") return InitMode::gbdt;
    if (s == "df") return InitMode::df;
    throw ConfigError("unknown init mode '" + s + "' (expected random, rf, gbdt or df)");
}

TreeInitBuild build_tree_init(const Dataset& ds, const std::vector<int>& rows,
                              const InitSpec& spec, Rng& rng) {
    if (spec.mode == InitMode::random)
        throw ArgumentError("build_tree_init: random mode has no tree model");
    if (spec.depth < 3)
        throw ConfigError("tree-based initialization needs at least 3 layers, got depth " +
                          std::to_string(spec.depth));

    TreeInitBuild build;
    if (spec.mode == InitMode::rf) {
        build.model = fit_random_forest(ds, rows, spec.tree, rng);
        build.copied_layers = 2;
    } else if (spec.mode == InitMode::gbdt) {
        build.model = fit_gbdt(ds, rows, spec.tree, rng);
        build.copied_layers = 2;
    } else {
        // carve a validation split for the cascade's layer selection
        auto [fit_rows, val_rows] =
            split_holdout(ds, rows, 0.2, derive_seed(spec.seed, 0xdf5e1ec7));
        build.model = fit_deep_forest(ds, fit_rows, spec.tree, rng, val_rows);
        const int retained = build.model.best_layer;
        if (spec.depth < 3 * retained)
            throw ConfigError("deep-forest initialization with " + std::to_string(retained) +
                              " retained layers needs depth >= " + std::to_string(3 * retained) +
                              ", got " + std::to_string(spec.depth));
        build.copied_layers = 3 * retained - 1;
    }

    const LayerStack exact = translate_model_exact(build.model);
    build.relaxed = relax(exact, spec.strengths);
    for (int j = 0; j < build.copied_layers; ++j)
        build.copied_rows.push_back(
            static_cast<int>(build.relaxed.layers[static_cast<std::size_t>(j)].width()));
    return build;
}

int best_epoch_index(const std::vector<double>& val_losses) {
    if (val_losses.empty()) return -1;
    int best = 0;
    for (std::size_t i = 1; i < val_losses.size(); ++i)
        if (val_losses[i] < val_losses[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    return best;
}

double validation_metric(Task task, const Matrix& outputs, const Vector& y_reg,
                         const std::vector<int>& labels) {
    if (task == Task::regression) {
        std::vector<double> pred(static_cast<std::size_t>(outputs.rows()));
        std::vector<double> target(static_cast<std::size_t>(outputs.rows()));
        for (Eigen::Index i = 0; i < outputs.rows(); ++i) {
            pred[static_cast<std::size_t>(i)] = outputs(i, 0);
            target[static_cast<std::size_t>(i)] = y_reg[i];
        }
        return mse(pred, target);
    }
    if (task == Task::binary) {
        // softmax probability of class 1 as the ranking score
        std::vector<double> scores(static_cast<std::size_t>(outputs.rows()));
        for (Eigen::Index i = 0; i < outputs.rows(); ++i) {
            const double z = outputs(i, 1) - outputs(i, 0);
            scores[static_cast<std::size_t>(i)] = 1.0 / (1.0 + std::exp(-z));
        }
        return auroc(scores, labels);
    }
    return accuracy_from_logits(outputs, labels);
}

template std::pair<Mlp<float>, TreeModel> init_from_trees<float>(const Dataset&,
                                                                 const std::vector<int>&,
                                                                 const InitSpec&, Rng&);
template std::pair<Mlp<double>, TreeModel> init_from_trees<double>(const Dataset&,
                                                                   const std::vector<int>&,
                                                                   const InitSpec&, Rng&);

}  // namespace treeseed
