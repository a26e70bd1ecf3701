#include <benchmark/benchmark.h>

#include <treeseed/net.hpp>

using namespace treeseed;

namespace {

std::vector<int> iota_rows(Eigen::Index n) {
    std::vector<int> rows(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = static_cast<int>(i);
    return rows;
}

const Dataset& bench_dataset() {
    static const Dataset ds = friedman1(5000, 1.0, 5, 42);
    return ds;
}

void BM_fit_cart(benchmark::State& state) {
    const Dataset& ds = bench_dataset();
    const auto rows = iota_rows(ds.rows());
    TreeFitConfig cfg;
    cfg.max_depth = static_cast<int>(state.range(0));
    for (auto _ : state) {
        Rng rng(1);
        benchmark::DoNotOptimize(fit_cart(ds, rows, cfg, rng));
    }
}
BENCHMARK(BM_fit_cart)->Arg(4)->Arg(8);

void BM_fit_random_forest(benchmark::State& state) {
    const Dataset& ds = bench_dataset();
    const auto rows = iota_rows(ds.rows());
    TreeFitConfig cfg;
    cfg.max_depth = 6;
    cfg.n_estimators = static_cast<int>(state.range(0));
    for (auto _ : state) {
        Rng rng(2);
        benchmark::DoNotOptimize(fit_random_forest(ds, rows, cfg, rng));
    }
}
BENCHMARK(BM_fit_random_forest)->Arg(8)->Arg(32);

void BM_fit_gbdt(benchmark::State& state) {
    const Dataset& ds = bench_dataset();
    const auto rows = iota_rows(ds.rows());
    TreeFitConfig cfg;
    cfg.max_depth = 4;
    cfg.n_estimators = static_cast<int>(state.range(0));
    for (auto _ : state) {
        Rng rng(3);
        benchmark::DoNotOptimize(fit_gbdt(ds, rows, cfg, rng));
    }
}
BENCHMARK(BM_fit_gbdt)->Arg(16)->Arg(64);

void BM_translate_ensemble(benchmark::State& state) {
    const Dataset& ds = bench_dataset();
    const auto rows = iota_rows(ds.rows());
    TreeFitConfig cfg;
    cfg.max_depth = 6;
    cfg.n_estimators = static_cast<int>(state.range(0));
    Rng rng(4);
    const TreeModel model = fit_random_forest(ds, rows, cfg, rng);
    for (auto _ : state) benchmark::DoNotOptimize(translate_ensemble_exact(model));
}
BENCHMARK(BM_translate_ensemble)->Arg(8)->Arg(32);

void BM_evaluate_stack(benchmark::State& state) {
    const Dataset& ds = bench_dataset();
    const auto rows = iota_rows(ds.rows());
    TreeFitConfig cfg;
    cfg.max_depth = 6;
    cfg.n_estimators = 16;
    Rng rng(5);
    const TreeModel model = fit_random_forest(ds, rows, cfg, rng);
    const LayerStack stack = translate_ensemble_exact(model);
    const Matrix X = ds.X.topRows(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(evaluate_stack64(stack, X));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_evaluate_stack)->Arg(256)->Arg(2048);

void BM_forward_backward(benchmark::State& state) {
    const auto width = static_cast<int>(state.range(0));
    const Mlp<float> mlp = init_random<float>({10, width, width, 1}, 6);
    const MatrixT<float> X = MatrixT<float>::Random(256, 10);
    const VectorT<float> y = VectorT<float>::Random(256);
    for (auto _ : state) {
        Gradients<float> grads;
        benchmark::DoNotOptimize(
            loss_and_grad<float>(mlp, X, y, {}, LossKind::mse, &grads));
    }
    state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_forward_backward)->Arg(128)->Arg(256)->Arg(512);

void BM_train_epoch(benchmark::State& state) {
    const Dataset& ds = bench_dataset();
    const auto tr = make_train_data<float>(ds, iota_rows(4000));
    std::vector<int> val_rows;
    for (int i = 4000; i < 5000; ++i) val_rows.push_back(i);
    const auto val = make_train_data<float>(ds, val_rows);
    const Mlp<float> mlp = init_random<float>({10, 256, 256, 1}, 7);
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 256;
    cfg.learning_rate = 1e-3;
    cfg.loss = LossKind::mse;
    for (auto _ : state) benchmark::DoNotOptimize(train(mlp, tr, val, cfg, Task::regression));
    state.SetItemsProcessed(state.iterations() * 4000);
}
BENCHMARK(BM_train_epoch);

}  // namespace

BENCHMARK_MAIN();
