#include <doctest.h>

#include <treeseed/translate.hpp>

#include <cmath>

using namespace treeseed;

namespace {

std::vector<int> iota_rows(Eigen::Index n) {
    std::vector<int> rows(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = static_cast<int>(i);
    return rows;
}

Dataset random_regression(int n, int d, std::uint64_t seed, double noise = 1.0) {
    Dataset ds;
    ds.task = Task::regression;
    ds.X.resize(n, d);
    ds.y.resize(n);
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) ds.X(i, j) = rng.uniform();
        ds.y[i] = 5.0 * std::sin(6.0 * ds.X(i, 0)) + 3.0 * ds.X(i, d > 1 ? 1 : 0) +
                  rng.normal(0.0, noise);
    }
    return ds;
}

Matrix random_inputs(int n, int d, std::uint64_t seed) {
    Matrix X(n, d);
    Rng rng(seed);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) X(i, j) = rng.uniform();
    return X;
}

Tree make_stump() {
    Tree stump;
    stump.nodes.push_back({0, 1.5, Tree::as_leaf_child(0), Tree::as_leaf_child(1)});
    stump.leaves = {{0.0}, {10.0}};
    return stump;
}

TreeModel wrap_single(const Tree& tree, int input_dim) {
    TreeModel model;
    model.kind = TreeKind::single;
    model.task = Task::regression;
    model.input_dim = input_dim;
    model.trees = {tree};
    model.weights = {1.0};
    return model;
}

}  // namespace

TEST_CASE("stump translation reproduces the hand-computed layer values") {
    const Tree stump = make_stump();
    const LayerStack stack = translate_tree_exact(stump);
    REQUIRE(stack.layers.size() == 3);

    CHECK(stack.layers[0].W(0, 0) == 1.0);
    CHECK(stack.layers[0].b(0) == -1.5);
    CHECK(stack.layers[2].W(0, 0) == 0.0);   // left leaf value 0 / 2
    CHECK(stack.layers[2].W(0, 1) == 5.0);   // right leaf value 10 / 2
    CHECK(stack.layers[2].b(0) == 5.0);      // (0 + 10) / 2

    Matrix x(1, 1);
    x(0, 0) = 1.0;
    // layer by layer: sign(1 - 1.5) = -1; leaf rows (-1|-0.5), (+1|-0.5); output 0
    CHECK(evaluate_stack64(stack, x)(0, 0) == doctest::Approx(0.0));
    x(0, 0) = 2.0;
    CHECK(evaluate_stack64(stack, x)(0, 0) == doctest::Approx(10.0));

    // the layer-2 left-leaf neuron carries weight -1 and bias -0.5
    CHECK(stack.layers[1].W(0, 0) == -1.0);
    CHECK(stack.layers[1].b(0) == -0.5);
    CHECK(stack.layers[1].W(1, 0) == 1.0);
    CHECK(stack.layers[1].b(1) == -0.5);
}

TEST_CASE("boundary input takes the left branch in tree and stack alike") {
    const Tree stump = make_stump();
    const LayerStack stack = translate_tree_exact(stump);
    Matrix x(1, 1);
    x(0, 0) = 1.5;
    CHECK(evaluate_stack64(stack, x)(0, 0) == 0.0);
    CHECK(predict_tree(stump, Vector::Constant(1, 1.5))[0] == 0.0);
}

TEST_CASE("layer-2 sign output is +1 exactly at the predicted leaf") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Dataset ds = random_regression(400, 5, 200 + seed);
        TreeFitConfig cfg;
        cfg.max_depth = 2 + static_cast<int>(seed % 5);
        Rng rng(seed);
        const Tree tree = fit_cart(ds, iota_rows(ds.rows()), cfg, rng);
        if (tree.inner_count() == 0) continue;
        LayerStack stack = translate_tree_exact(tree, 5);
        // evaluate only the first two layers
        LayerStack two_layers = stack;
        two_layers.layers.pop_back();
        const Matrix X = random_inputs(500, 5, 900 + seed);
        const Matrix indicators = evaluate_stack64(two_layers, X);
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            const int leaf = tree_leaf_index(tree, X.row(i).data(), 5);
            for (Eigen::Index l = 0; l < indicators.cols(); ++l)
                CHECK(indicators(i, l) == (l == leaf ? 1.0 : -1.0));
        }
    }
}

TEST_CASE("single-leaf tree translates to a bias-only readout") {
    Tree leaf;
    leaf.leaves = {{3.25}};
    const LayerStack stack = translate_tree_exact(leaf);
    REQUIRE(stack.layers.size() == 3);
    CHECK(stack.layers[0].width() == 0);
    CHECK(stack.layers[1].width() == 0);
    CHECK(stack.layers[2].width() == 1);
    CHECK(stack.layers[2].b(0) == 3.25);
    const Matrix X = random_inputs(5, 1, 3);
    const Matrix out = evaluate_stack64(stack, X);
    for (Eigen::Index i = 0; i < 5; ++i) CHECK(out(i, 0) == 3.25);
}

TEST_CASE("ensemble translation concatenates tree blocks diagonally") {
    // tree A: 1 inner node, tree B: 3 inner nodes
    Tree a = make_stump();
    Tree b;
    b.nodes.push_back({0, 0.5, 1, 2});
    b.nodes.push_back({1, 0.25, Tree::as_leaf_child(0), Tree::as_leaf_child(1)});
    b.nodes.push_back({1, 0.75, Tree::as_leaf_child(2), Tree::as_leaf_child(3)});
    b.leaves = {{1.0}, {2.0}, {3.0}, {4.0}};

    TreeModel model;
    model.kind = TreeKind::forest;
    model.task = Task::regression;
    model.input_dim = 2;
    model.trees = {a, b};
    model.weights = {0.5, 0.5};
    const LayerStack stack = translate_ensemble_exact(model);
    CHECK(stack.layers[0].width() == 4);
    CHECK(stack.layers[1].width() == 6);

    // cross-tree entries of layer 2 are all zero
    for (Eigen::Index r = 0; r < 2; ++r)
        for (Eigen::Index c = 1; c < 4; ++c) CHECK(stack.layers[1].W(r, c) == 0.0);
    for (Eigen::Index r = 2; r < 6; ++r) CHECK(stack.layers[1].W(r, 0) == 0.0);

    const Matrix X = random_inputs(50, 2, 4);
    const FidelityReport report = fidelity(model, stack, X);
    CHECK(report.max_abs < 1e-12);
}

TEST_CASE("forest of identical stumps equals the single stump translation") {
    const Tree stump = make_stump();
    TreeModel forest;
    forest.kind = TreeKind::forest;
    forest.task = Task::regression;
    forest.input_dim = 1;
    for (int i = 0; i < 5; ++i) {
        forest.trees.push_back(stump);
        forest.weights.push_back(1.0 / 5.0);
    }
    const LayerStack wide = translate_ensemble_exact(forest);
    const LayerStack single = translate_tree_exact(stump);
    const Matrix X = random_inputs(40, 1, 5) * 3.0;
    const Matrix a = evaluate_stack64(wide, X);
    const Matrix b = evaluate_stack64(single, X);
    for (Eigen::Index i = 0; i < X.rows(); ++i) CHECK(a(i, 0) == doctest::Approx(b(i, 0)));
}

TEST_CASE("gbdt translation reproduces the boosted predictions") {
    Dataset ds;
    ds.task = Task::regression;
    ds.X.resize(4, 1);
    ds.y.resize(4);
    ds.X << 0, 1, 2, 3;
    ds.y << 0, 0, 10, 10;
    TreeFitConfig cfg;
    cfg.max_depth = 1;
    cfg.n_estimators = 1;
    cfg.eta = 1.0;
    Rng rng(1);
    const TreeModel model = fit_gbdt(ds, iota_rows(4), cfg, rng);
    const LayerStack stack = translate_ensemble_exact(model);
    for (int i = 0; i < 4; ++i) {
        Matrix x(1, 1);
        x(0, 0) = ds.X(i, 0);
        CHECK(evaluate_stack64(stack, x)(0, 0) == doctest::Approx(ds.y[i]));
    }
}

TEST_CASE("layer-1 rows carry one nonzero, layer-2 rows one per path node") {
    const Dataset ds = random_regression(500, 4, 17);
    TreeFitConfig cfg;
    cfg.max_depth = 5;
    Rng rng(18);
    const Tree tree = fit_cart(ds, iota_rows(ds.rows()), cfg, rng);
    const LayerStack stack = translate_tree_exact(tree, 4);

    for (Eigen::Index r = 0; r < stack.layers[0].width(); ++r) {
        int nonzeros = 0;
        for (Eigen::Index c = 0; c < stack.layers[0].W.cols(); ++c)
            if (stack.layers[0].W(r, c) != 0.0) ++nonzeros;
        CHECK(nonzeros == 1);
    }
    // layer-2 row nonzeros equal the leaf's path depth encoded in its bias:
    // bias = -depth + 1/2
    for (Eigen::Index r = 0; r < stack.layers[1].width(); ++r) {
        int nonzeros = 0;
        for (Eigen::Index c = 0; c < stack.layers[1].W.cols(); ++c)
            if (stack.layers[1].W(r, c) != 0.0) ++nonzeros;
        const int path_depth = static_cast<int>(0.5 - stack.layers[1].b(r));
        CHECK(nonzeros == path_depth);
    }
}

TEST_CASE("relaxed stump saturates to the exact sign output") {
    const Tree stump = make_stump();
    LayerStack stack = translate_tree_exact(stump);
    Strengths s;
    s.s01 = 1000.0;
    s.s12 = 1000.0;
    s.s23 = 1.0;
    s.s_id = 1.0;
    const LayerStack relaxed = relax(stack, s);
    // first-layer pre-activation at x=1 is 1000*(1-1.5) = -500
    CHECK(relaxed.layers[0].W(0, 0) == doctest::Approx(1000.0));
    CHECK(relaxed.layers[0].b(0) == doctest::Approx(-1500.0));
    Matrix x(1, 1);
    x(0, 0) = 1.0;
    const Matrix out = evaluate_stack64(relaxed, x);
    CHECK(out(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("relax rejects nonpositive strengths") {
    const LayerStack stack = translate_tree_exact(make_stump());
    Strengths s;
    s.s01 = 0.0;
    CHECK_THROWS_AS(relax(stack, s), ArgumentError);
    s.s01 = 1.0;
    s.s12 = -2.0;
    CHECK_THROWS_AS(relax(stack, s), ArgumentError);
}

TEST_CASE("relaxation approaches the exact stack as strengths grow") {
    const Dataset ds = random_regression(600, 5, 31);
    TreeFitConfig cfg;
    cfg.max_depth = 8;
    Rng rng(32);
    const Tree tree = fit_cart(ds, iota_rows(ds.rows()), cfg, rng);
    const TreeModel model = wrap_single(tree, 5);
    const LayerStack exact = translate_ensemble_exact(model);
    const Matrix X = random_inputs(1000, 5, 33);
    const Matrix reference = evaluate_stack64(exact, X);

    double prev = std::numeric_limits<double>::infinity();
    for (double strength : {1.0, 1e2, 1e4, 1e10}) {
        Strengths s{strength, strength, strength, strength};
        const Matrix relaxed = evaluate_stack64(relax(exact, s), X);
        const double err = (relaxed - reference).cwiseAbs().mean();
        CHECK(err <= prev + 1e-15);
        prev = err;
        if (strength == 1e10) CHECK(err <= 1e-6);
    }
}

TEST_CASE("degenerately small strengths decorrelate the relaxed stack") {
    const Dataset ds = random_regression(400, 3, 41);
    TreeFitConfig cfg;
    cfg.max_depth = 5;
    Rng rng(42);
    const Tree tree = fit_cart(ds, iota_rows(ds.rows()), cfg, rng);
    const LayerStack exact = translate_tree_exact(tree, 3);
    const Matrix X = random_inputs(500, 3, 43);
    const Matrix reference = evaluate_stack64(exact, X);
    Strengths tiny{1e-6, 1e-6, 1.0, 1.0};
    const Matrix relaxed = evaluate_stack64(relax(exact, tiny), X);
    const double err = (relaxed - reference).cwiseAbs().mean();
    // output collapses to a constant, far from the step structure
    CHECK(err > 0.1);
}

TEST_CASE("fidelity of a shallow tree against itself is at machine precision") {
    const Dataset ds = random_regression(300, 4, 51);
    TreeFitConfig cfg;
    cfg.max_depth = 2;
    Rng rng(52);
    const Tree tree = fit_cart(ds, iota_rows(ds.rows()), cfg, rng);
    const TreeModel model = wrap_single(tree, 4);
    const LayerStack stack = translate_ensemble_exact(model);
    const Matrix X = random_inputs(400, 4, 53);
    const FidelityReport report = fidelity(model, stack, X);
    CHECK(report.mean_abs <= 1e-12);

    CHECK_THROWS_AS(fidelity(model, stack, Matrix(0, 4)), ArgumentError);
}

TEST_CASE("fidelity of identical evaluation paths is exactly zero") {
    const Tree stump = make_stump();
    const TreeModel model = wrap_single(stump, 1);
    const LayerStack stack = translate_tree_exact(stump);
    Matrix X = random_inputs(100, 1, 54) * 4.0;
    const FidelityReport report = fidelity(model, stack, X);
    CHECK(report.max_abs == 0.0);
}

TEST_CASE("32-bit readout error grows with tree depth and compensation removes it") {
    const Dataset ds = random_regression(9000, 6, 61, 2.0);
    const Matrix X = random_inputs(800, 6, 62);

    double err_depth2 = 0.0, err_depth12 = 0.0;
    for (int depth : {2, 12}) {
        TreeFitConfig cfg;
        cfg.max_depth = depth;
        Rng rng(63);
        const Tree tree = fit_cart(ds, iota_rows(ds.rows()), cfg, rng);
        const TreeModel model = wrap_single(tree, 6);
        const LayerStack stack = translate_ensemble_exact(model);
        const double err = fidelity32(model, stack, X).mean_abs;
        if (depth == 2)
            err_depth2 = err;
        else
            err_depth12 = err;

        const LayerStack compensated = cancellation_compensated_readout(stack);
        CHECK(fidelity32(model, compensated, X).mean_abs <= 1e-5);
        CHECK(fidelity(model, compensated, X).max_abs <= 1e-10);
    }
    CHECK(err_depth12 > err_depth2);
}

TEST_CASE("compensated and plain readout agree on a stump") {
    const Tree stump = make_stump();
    const TreeModel model = wrap_single(stump, 1);
    const LayerStack stack = translate_tree_exact(stump);
    const LayerStack compensated = cancellation_compensated_readout(stack);
    Matrix X = random_inputs(200, 1, 64) * 3.0;
    const Matrix a = evaluate_stack64(stack, X);
    const Matrix b = evaluate_stack64(compensated, X);
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("the compensation layer outputs exact 0/1 indicators") {
    const Dataset ds = random_regression(300, 3, 71);
    TreeFitConfig cfg;
    cfg.max_depth = 4;
    Rng rng(72);
    const Tree tree = fit_cart(ds, iota_rows(ds.rows()), cfg, rng);
    const LayerStack compensated =
        cancellation_compensated_readout(translate_tree_exact(tree, 3));
    LayerStack up_to_remap = compensated;
    up_to_remap.layers.pop_back();
    const Matrix X = random_inputs(100, 3, 73);
    const Matrix indicators = evaluate_stack64(up_to_remap, X);
    for (Eigen::Index i = 0; i < indicators.rows(); ++i) {
        double sum = 0.0;
        for (Eigen::Index c = 0; c < indicators.cols(); ++c) {
            CHECK((indicators(i, c) == 0.0 || indicators(i, c) == 1.0));
            sum += indicators(i, c);
        }
        CHECK(sum == 1.0);  // exactly the reached leaf
    }
}

TEST_CASE("deep forest translation reduces to the forest translation at depth 1") {
    const Dataset ds = random_regression(260, 3, 81);
    TreeFitConfig cfg;
    cfg.max_depth = 3;
    cfg.n_estimators = 3;
    cfg.forest_depth = 1;
    cfg.n_rf_per_layer = 1;
    cfg.n_crf_per_layer = 0;
    const auto rows = iota_rows(200);
    std::vector<int> val_rows;
    for (int i = 200; i < 260; ++i) val_rows.push_back(i);
    Rng df_rng(82);
    const TreeModel df = fit_deep_forest(ds, rows, cfg, df_rng, val_rows);
    Rng rf_rng(82);
    const TreeModel rf = fit_random_forest(ds, rows, cfg, rf_rng);

    const LayerStack df_stack = translate_deep_forest_exact(df);
    const LayerStack rf_stack = translate_ensemble_exact(rf);
    REQUIRE(df_stack.layers.size() == 3);
    const Matrix X = random_inputs(150, 3, 83);
    CHECK((evaluate_stack64(df_stack, X) - evaluate_stack64(rf_stack, X)).cwiseAbs().maxCoeff() <=
          1e-12);
}

TEST_CASE("cascade group widths follow the passthrough arithmetic") {
    // l=2, d=3, C=2, one forest per layer: group-1 output width = C + d = 5
    const Dataset ds = xor_classif(400, 1, 0.05, 84);
    TreeFitConfig cfg;
    cfg.max_depth = 3;
    cfg.n_estimators = 2;
    cfg.forest_depth = 2;
    cfg.n_rf_per_layer = 1;
    cfg.n_crf_per_layer = 0;
    const auto rows = iota_rows(320);
    std::vector<int> val_rows;
    for (int i = 320; i < 400; ++i) val_rows.push_back(i);
    Rng rng(85);
    const TreeModel df = fit_deep_forest(ds, rows, cfg, rng, val_rows);
    if (df.best_layer < 2) return;  // needs the two-layer cascade to be retained

    const LayerStack stack = translate_deep_forest_exact(df);
    REQUIRE(stack.layers.size() == 6);
    CHECK(stack.layers[2].width() == 5);       // d + C passthrough group output
    CHECK(stack.layers[3].W.cols() == 5);      // group-2 input dimension
    CHECK(stack.layers[5].width() == 2);       // final averaged readout
}

TEST_CASE("two-layer deep forest translation tracks the cascade closely") {
    const Dataset ds = random_regression(500, 3, 86);
    TreeFitConfig cfg;
    cfg.max_depth = 4;
    cfg.n_estimators = 2;
    cfg.forest_depth = 2;
    cfg.n_rf_per_layer = 1;
    cfg.n_crf_per_layer = 1;
    const auto rows = iota_rows(400);
    std::vector<int> val_rows;
    for (int i = 400; i < 500; ++i) val_rows.push_back(i);
    Rng rng(87);
    const TreeModel df = fit_deep_forest(ds, rows, cfg, rng, val_rows);
    const LayerStack stack = translate_deep_forest_exact(df);
    const Matrix X = random_inputs(100, 3, 88);
    const FidelityReport report = fidelity(df, stack, X);
    CHECK(report.mean_abs <= 1e-6);
}

TEST_CASE("relaxed deep-forest stacks stay close under saturating strengths") {
    const Dataset ds = random_regression(400, 3, 91);
    TreeFitConfig cfg;
    cfg.max_depth = 3;
    cfg.n_estimators = 2;
    cfg.forest_depth = 2;
    const auto rows = iota_rows(320);
    std::vector<int> val_rows;
    for (int i = 320; i < 400; ++i) val_rows.push_back(i);
    Rng rng(92);
    const TreeModel df = fit_deep_forest(ds, rows, cfg, rng, val_rows);
    const LayerStack exact = translate_deep_forest_exact(df);
    const Matrix X = random_inputs(200, 3, 93);
    const Matrix reference = evaluate_stack64(exact, X);
    Strengths s{1e10, 1e10, 1e10, 1e10};
    const Matrix relaxed = evaluate_stack64(relax(exact, s), X);
    CHECK((relaxed - reference).cwiseAbs().mean() <= 1e-6);
}

TEST_CASE("block-diagonality holds across tree blocks") {
    const Dataset ds = random_regression(400, 4, 94);
    TreeFitConfig cfg;
    cfg.max_depth = 4;
    cfg.n_estimators = 4;
    Rng rng(95);
    const TreeModel model = fit_random_forest(ds, iota_rows(ds.rows()), cfg, rng);
    const LayerStack stack = translate_ensemble_exact(model);

    std::vector<int> l1_of_tree, l2_of_tree;  // block index per row
    int l1 = 0, l2 = 0;
    for (std::size_t t = 0; t < model.trees.size(); ++t) {
        for (int m = 0; m < model.trees[t].inner_count(); ++m)
            l1_of_tree.push_back(static_cast<int>(t));
        if (model.trees[t].inner_count() > 0)
            for (int leaf = 0; leaf < model.trees[t].leaf_count(); ++leaf)
                l2_of_tree.push_back(static_cast<int>(t));
        l1 += model.trees[t].inner_count();
        l2 += model.trees[t].leaf_count();
    }
    REQUIRE(static_cast<Eigen::Index>(l1_of_tree.size()) == stack.layers[1].W.cols());
    REQUIRE(static_cast<Eigen::Index>(l2_of_tree.size()) == stack.layers[1].W.rows());
    for (Eigen::Index r = 0; r < stack.layers[1].W.rows(); ++r)
        for (Eigen::Index c = 0; c < stack.layers[1].W.cols(); ++c)
            if (l2_of_tree[static_cast<std::size_t>(r)] != l1_of_tree[static_cast<std::size_t>(c)])
                CHECK(stack.layers[1].W(r, c) == 0.0);
}
