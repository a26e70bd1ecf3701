#include <doctest.h>

#include <treeseed/serialize.hpp>

#include <algorithm>
#include <cmath>

using namespace treeseed;

namespace {

std::vector<int> iota_rows(Eigen::Index n) {
    std::vector<int> rows(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = static_cast<int>(i);
    return rows;
}

}  // namespace

TEST_CASE("tree models round-trip bit-exactly through JSON") {
    const Dataset ds = friedman1(300, 1.0, 2, 7);
    TreeFitConfig cfg;
    cfg.max_depth = 6;
    cfg.n_estimators = 5;
    Rng rng(8);
    const TreeModel model = fit_random_forest(ds, iota_rows(ds.rows()), cfg, rng);

    const TreeModel loaded = model_from_json(model_to_json(model));
    REQUIRE(loaded.trees.size() == model.trees.size());
    for (std::size_t t = 0; t < model.trees.size(); ++t) {
        REQUIRE(loaded.trees[t].nodes.size() == model.trees[t].nodes.size());
        for (std::size_t m = 0; m < model.trees[t].nodes.size(); ++m) {
            CHECK(loaded.trees[t].nodes[m].threshold == model.trees[t].nodes[m].threshold);
            CHECK(loaded.trees[t].nodes[m].feature == model.trees[t].nodes[m].feature);
            CHECK(loaded.trees[t].nodes[m].left == model.trees[t].nodes[m].left);
            CHECK(loaded.trees[t].nodes[m].right == model.trees[t].nodes[m].right);
        }
        CHECK(loaded.trees[t].leaves == model.trees[t].leaves);
    }
    CHECK(loaded.weights == model.weights);

    // identical predictions, not merely close ones
    for (int i = 0; i < 25; ++i) {
        const Vector x = ds.X.row(i).transpose();
        CHECK(predict_model(loaded, x)[0] == predict_model(model, x)[0]);
    }
}

TEST_CASE("gbdt and deep-forest models survive the round trip") {
    const Dataset ds = xor_classif(300, 0, 0.05, 9);
    const auto rows = iota_rows(240);
    std::vector<int> val_rows;
    for (int i = 240; i < 300; ++i) val_rows.push_back(i);

    TreeFitConfig cfg;
    cfg.max_depth = 3;
    cfg.n_estimators = 4;
    Rng rng(10);
    const TreeModel gbdt = fit_gbdt(ds, rows, cfg, rng);
    const TreeModel gbdt2 = model_from_json(model_to_json(gbdt));
    CHECK(gbdt2.base_offset == gbdt.base_offset);
    CHECK(gbdt2.shrinkage == gbdt.shrinkage);

    cfg.forest_depth = 2;
    Rng rng2(11);
    const TreeModel df = fit_deep_forest(ds, rows, cfg, rng2, val_rows);
    const TreeModel df2 = model_from_json(model_to_json(df));
    CHECK(df2.best_layer == df.best_layer);
    REQUIRE(df2.cascade.size() == df.cascade.size());
    for (int i = 0; i < 20; ++i) {
        const Vector x = ds.X.row(i).transpose();
        CHECK(predict_model(df2, x) == predict_model(df, x));
    }
}

TEST_CASE("layer stacks round-trip with activations and roles") {
    const Dataset ds = friedman1(200, 0.5, 0, 12);
    TreeFitConfig cfg;
    cfg.max_depth = 4;
    Rng rng(13);
    const Tree tree = fit_cart(ds, iota_rows(ds.rows()), cfg, rng);
    const LayerStack exact = translate_tree_exact(tree, 5);
    Strengths s{123.0, 4.5, 1.0, 1.0};
    const LayerStack relaxed = relax(exact, s);

    for (const LayerStack& stack : {exact, relaxed}) {
        const LayerStack loaded = stack_from_json(stack_to_json(stack));
        REQUIRE(loaded.layers.size() == stack.layers.size());
        for (std::size_t l = 0; l < stack.layers.size(); ++l) {
            CHECK(loaded.layers[l].W == stack.layers[l].W);
            CHECK(loaded.layers[l].b == stack.layers[l].b);
            CHECK(loaded.layers[l].act == stack.layers[l].act);
            CHECK(loaded.layers[l].role == stack.layers[l].role);
        }
        const Matrix X = ds.X.topRows(20);
        CHECK(evaluate_stack64(loaded, X) == evaluate_stack64(stack, X));
    }
}

TEST_CASE("irrational thresholds survive the decimal encoding exactly") {
    Tree tree;
    tree.nodes.push_back({0, std::sqrt(2.0) / 3.0, Tree::as_leaf_child(0), 1});
    tree.nodes.push_back({0, std::atan(1.0) * 4.0 / 7.0, Tree::as_leaf_child(1), Tree::as_leaf_child(2)});
    tree.leaves = {{0.1 + 0.2}, {1.0 / 3.0}, {std::exp(1.0)}};
    TreeModel model;
    model.kind = TreeKind::single;
    model.task = Task::regression;
    model.input_dim = 1;
    model.trees = {tree};
    model.weights = {1.0};
    const TreeModel loaded = model_from_json(model_to_json(model));
    CHECK(loaded.trees[0].nodes[0].threshold == tree.nodes[0].threshold);
    CHECK(loaded.trees[0].nodes[1].threshold == tree.nodes[1].threshold);
    CHECK(loaded.trees[0].leaves == tree.leaves);
}

TEST_CASE("checkpoints round-trip the network and optimizer state") {
    Checkpoint ck;
    ck.mlp = init_random<float>({3, 8, 1}, 21);
    ck.task = Task::regression;
    ck.n_classes = 1;
    ck.epoch = 17;
    ck.best_epoch = 9;

    // produce nontrivial adam state
    Gradients<float> grads;
    grads.W = {MatrixT<float>::Constant(8, 3, 0.5f), MatrixT<float>::Constant(1, 8, -0.25f)};
    grads.b = {VectorT<float>::Constant(8, 0.1f), VectorT<float>::Constant(1, 0.2f)};
    adam_step(ck.mlp, grads, ck.adam, 1e-3);
    adam_step(ck.mlp, grads, ck.adam, 1e-3);

    const Checkpoint loaded = checkpoint_from_json(checkpoint_to_json(ck));
    CHECK(loaded.epoch == 17);
    CHECK(loaded.best_epoch == 9);
    CHECK(loaded.adam.t == 2);
    for (std::size_t l = 0; l < ck.mlp.W.size(); ++l) {
        CHECK(loaded.mlp.W[l] == ck.mlp.W[l]);
        CHECK(loaded.adam.mW[l] == ck.adam.mW[l]);
        CHECK(loaded.adam.vW[l] == ck.adam.vW[l]);
    }
}

TEST_CASE("schema files parse and reject malformed content") {
    const std::string text = R"({
      "columns": [{"name": "a", "kind": "numeric"}, {"name": "c", "kind": "categorical"}],
      "target": "y",
      "task": "binary"
    })";
    const SchemaFile schema = schema_from_json(text);
    CHECK(schema.columns.size() == 2);
    CHECK(schema.columns[1].kind == ColumnKind::categorical);
    CHECK(schema.target == "y");
    CHECK(schema.task == Task::binary);

    CHECK_THROWS_AS(schema_from_json("{"), DataError);
    CHECK_THROWS_AS(schema_from_json("{}"), DataError);
    CHECK_THROWS_AS(schema_from_json(R"({"columns": [{"name":"a","kind":"weird"}],
                                       "target":"y", "task":"regression"})"),
                    DataError);
}

TEST_CASE("history CSV has one row per epoch with the header") {
    TrainHistory history;
    history.epochs = {{1.5, 2.5, 0.25, 0.01}, {1.0, 2.0, 0.5, 0.02}};
    const std::string csv = history_to_csv(history);
    CHECK(csv.find("epoch,train_loss,val_loss,val_metric,seconds") == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK(csv.find("\n1,1.5,2.5,0.25,0.01\n") != std::string::npos);
}

TEST_CASE("experiment reports round-trip through JSON") {
    ExperimentReport report;
    report.protocol = "p1";
    report.metric_name = "mse";
    report.higher_is_better = false;
    report.scores = {{"rf-init", 0, 1, 1.25, 3.5, 42}};
    report.summaries = summarize(report.scores);
    report.curves = {{"rf-init", 0, 1, 0, "val", 9.5}, {"rf-init", 0, 1, 1, "val", 3.25}};
    report.metadata["budget"] = "20";
    const ExperimentReport loaded = report_from_json(report_to_json(report));
    CHECK(loaded.protocol == "p1");
    CHECK(loaded.scores.size() == 1);
    CHECK(loaded.scores[0].metric == 1.25);
    CHECK(loaded.curves.size() == 2);
    CHECK(loaded.curves[1].loss == 3.25);
    CHECK(loaded.metadata.at("budget") == "20");
}

TEST_CASE("curve CSV is tidy") {
    const std::vector<CurvePoint> curves = {{"m", 0, 2, 1, "train", 0.5},
                                            {"m", 0, 2, 1, "val", 0.75}};
    const std::string csv = curves_to_csv(curves);
    CHECK(csv.find("method,repeat,fold,epoch,split,loss\n") == 0);
    CHECK(csv.find("m,0,2,1,train,0.5\n") != std::string::npos);
    CHECK(csv.find("m,0,2,1,val,0.75\n") != std::string::npos);
}

TEST_CASE("generated datasets write CSV that reloads identically") {
    const Dataset ds = friedman1(50, 1.0, 0, 31);
    const auto path = std::string("/tmp/ts_roundtrip.csv");
    write_dataset_csv(ds, "y", path);
    const Dataset loaded = load_csv(path, ds.schema, "y", Task::regression);
    CHECK(loaded.rows() == ds.rows());
    CHECK(loaded.X == ds.X);
    CHECK(loaded.y == ds.y);
}
