#pragma once

#include <treeseed/metrics.hpp>
#include <treeseed/translate.hpp>

#include <chrono>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

namespace treeseed {

/// Dense MLP: tanh on every hidden layer, identity outputs (regression values
/// or classification logits; softmax lives inside the loss).
template <class Scalar>
struct Mlp {
    std::vector<int> dims;  // [input, hidden..., output]
    std::vector<MatrixT<Scalar>> W;
    std::vector<VectorT<Scalar>> b;

    int depth() const { return static_cast<int>(W.size()); }
    long parameter_count() const {
        long n = 0;
        for (std::size_t j = 0; j < W.size(); ++j) n += W[j].size() + b[j].size();
        return n;
    }
};

enum class LossKind { mse, cross_entropy };
enum class InitMode { random, rf, gbdt, df };

std::string to_string(InitMode m);
InitMode init_mode_from_string(const std::string& s);

struct InitSpec {
    InitMode mode = InitMode::random;
    int width = 64;
    int depth = 3;  // number of affine layers
    Strengths strengths{1e3, 1.0, 1.0, 1.0};
    TreeFitConfig tree;
    std::uint64_t seed = 0;
};

struct TrainConfig {
    int epochs = 100;
    int batch_size = 256;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    LossKind loss = LossKind::mse;
    std::uint64_t seed = 0;
};

struct EpochStats {
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_metric = 0.0;
    double seconds = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    int best_epoch = -1;  // 0-based argmin of val loss, first occurrence
    bool aborted = false;
};

template <class Scalar>
struct TrainData {
    MatrixT<Scalar> X;
    VectorT<Scalar> y;        // regression targets
    std::vector<int> labels;  // classification targets
    Eigen::Index rows() const { return X.rows(); }
};

template <class Scalar>
struct Gradients {
    std::vector<MatrixT<Scalar>> W;
    std::vector<VectorT<Scalar>> b;
};

template <class Scalar>
struct AdamState {
    std::vector<MatrixT<Scalar>> mW, vW;
    std::vector<VectorT<Scalar>> mb, vb;
    long t = 0;
};

template <class Scalar>
struct ForwardCache {
    // h[0] is the input batch, h[j] the post-activation of layer j; the last
    // entry is the affine output.
    std::vector<MatrixT<Scalar>> h;
};

/// All weights and biases of layer j i.i.d. uniform on [-1/sqrt(d_j),
/// 1/sqrt(d_j)], d_j the layer input dimension.
template <class Scalar>
Mlp<Scalar> init_random(const std::vector<int>& dims, std::uint64_t seed);

/// The relaxed translation of a tree model fitted on `rows` copied into the
/// first layers of a fresh MLP (2 layers for rf/gbdt, 3l-1 for a depth-l deep
/// forest); everything else, including padding around narrower translated
/// blocks, uses the uniform random scheme.
struct TreeInitBuild {
    TreeModel model;
    LayerStack relaxed;
    int copied_layers = 0;
    std::vector<int> copied_rows;  // translated width per copied layer
};

TreeInitBuild build_tree_init(const Dataset& ds, const std::vector<int>& rows,
                              const InitSpec& spec, Rng& rng);

template <class Scalar>
std::pair<Mlp<Scalar>, TreeModel> init_from_trees(const Dataset& ds,
                                                  const std::vector<int>& rows,
                                                  const InitSpec& spec, Rng& rng);

template <class Scalar>
MatrixT<Scalar> forward(const Mlp<Scalar>& mlp, const MatrixT<Scalar>& X,
                        ForwardCache<Scalar>* cache = nullptr);

/// Loss and reverse-mode gradients for one batch. Pass grads = nullptr to get
/// the loss alone. Regression batches use y, classification ones labels.
template <class Scalar>
double loss_and_grad(const Mlp<Scalar>& mlp, const MatrixT<Scalar>& X,
                     const VectorT<Scalar>& y, const std::vector<int>& labels,
                     LossKind loss, Gradients<Scalar>* grads);

template <class Scalar>
double batch_loss(const Mlp<Scalar>& mlp, const TrainData<Scalar>& data, LossKind loss);

template <class Scalar>
void adam_step(Mlp<Scalar>& mlp, const Gradients<Scalar>& grads, AdamState<Scalar>& state,
               double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

/// Shuffled mini-batch Adam for cfg.epochs epochs; per-epoch validation loss
/// and task metric are recorded and the parameter snapshot with the smallest
/// validation loss is returned together with the full history. Pass
/// final_snapshot to also receive the last-epoch parameters.
template <class Scalar>
std::pair<Mlp<Scalar>, TrainHistory> train(const Mlp<Scalar>& mlp0,
                                           const TrainData<Scalar>& train_set,
                                           const TrainData<Scalar>& val_set,
                                           const TrainConfig& cfg, Task task,
                                           Mlp<Scalar>* final_snapshot = nullptr);

template <class Scalar>
TrainData<Scalar> make_train_data(const Dataset& ds, const std::vector<int>& rows);

template <class Scalar>
std::vector<Matrix> layer_weights_as_double(const Mlp<Scalar>& mlp);

/// argmin with first-occurrence tie-break; -1 for an empty history.
int best_epoch_index(const std::vector<double>& val_losses);

double validation_metric(Task task, const Matrix& outputs, const Vector& y_reg,
                         const std::vector<int>& labels);

// ---------------------------------------------------------------------------
// template definitions

template <class Scalar>
Mlp<Scalar> init_random(const std::vector<int>& dims, std::uint64_t seed) {
    if (dims.size() < 2) throw ArgumentError("init_random: need at least input and output dims");
    Mlp<Scalar> mlp;
    mlp.dims = dims;
    Rng rng(seed);
    for (std::size_t j = 0; j + 1 < dims.size(); ++j) {
        const int in = dims[j], out = dims[j + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        MatrixT<Scalar> w(out, in);
        VectorT<Scalar> bias(out);
        for (int r = 0; r < out; ++r)
            for (int c = 0; c < in; ++c)
                w(r, c) = static_cast<Scalar>(rng.uniform(-bound, bound));
        for (int r = 0; r < out; ++r) bias[r] = static_cast<Scalar>(rng.uniform(-bound, bound));
        mlp.W.push_back(std::move(w));
        mlp.b.push_back(std::move(bias));
    }
    return mlp;
}

template <class Scalar>
std::pair<Mlp<Scalar>, TreeModel> init_from_trees(const Dataset& ds,
                                                  const std::vector<int>& rows,
                                                  const InitSpec& spec, Rng& rng) {
    TreeInitBuild build = build_tree_init(ds, rows, spec, rng);
    const int out_dim = ds.task == Task::regression ? 1 : ds.n_classes;
    std::vector<int> dims;
    dims.push_back(static_cast<int>(ds.cols()));
    for (int j = 1; j < spec.depth; ++j) dims.push_back(spec.width);
    dims.push_back(out_dim);

    Mlp<Scalar> mlp = init_random<Scalar>(dims, derive_seed(spec.seed, 0x6d6c70));
    for (int j = 0; j < build.copied_layers; ++j) {
        const StackLayer& src = build.relaxed.layers[static_cast<std::size_t>(j)];
        MatrixT<Scalar>& dst = mlp.W[static_cast<std::size_t>(j)];
        VectorT<Scalar>& dstb = mlp.b[static_cast<std::size_t>(j)];
        if (src.W.rows() > dst.rows() || src.W.cols() > dst.cols()) {
            throw ConfigError("tree-initialized layer " + std::to_string(j + 1) + " needs width " +
                              std::to_string(src.W.rows()) + "x" + std::to_string(src.W.cols()) +
                              " but the network provides " + std::to_string(dst.rows()) + "x" +
                              std::to_string(dst.cols()));
        }
        dst.topLeftCorner(src.W.rows(), src.W.cols()) = src.W.template cast<Scalar>();
        dstb.head(src.b.size()) = src.b.template cast<Scalar>();
    }
    return {std::move(mlp), std::move(build.model)};
}

template <class Scalar>
MatrixT<Scalar> forward(const Mlp<Scalar>& mlp, const MatrixT<Scalar>& X,
                        ForwardCache<Scalar>* cache) {
    if (X.rows() == 0) throw ArgumentError("forward: empty batch");
    if (X.cols() != mlp.dims.front())
        throw ArgumentError("forward: input dimension mismatch");
    if (cache) {
        cache->h.clear();
        cache->h.push_back(X);
    }
    MatrixT<Scalar> h = X;
    const int L = mlp.depth();
    for (int j = 0; j < L; ++j) {
        MatrixT<Scalar> z = h * mlp.W[static_cast<std::size_t>(j)].transpose();
        z.rowwise() += mlp.b[static_cast<std::size_t>(j)].transpose();
        if (j + 1 < L) z = z.array().tanh();
        if (!z.allFinite())
            throw NumericError("non-finite activation in layer " + std::to_string(j + 1));
        h = std::move(z);
        if (cache) cache->h.push_back(h);
    }
    return h;
}

namespace detail {

template <class Scalar>
MatrixT<Scalar> softmax_rows(const MatrixT<Scalar>& z) {
    MatrixT<Scalar> p = z;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const Scalar m = p.row(i).maxCoeff();
        p.row(i) = (p.row(i).array() - m).exp();
        p.row(i) /= p.row(i).sum();
    }
    return p;
}

}  // namespace detail

template <class Scalar>
double loss_and_grad(const Mlp<Scalar>& mlp, const MatrixT<Scalar>& X,
                     const VectorT<Scalar>& y, const std::vector<int>& labels,
                     LossKind loss, Gradients<Scalar>* grads) {
    ForwardCache<Scalar> cache;
    const MatrixT<Scalar> out = forward(mlp, X, grads ? &cache : nullptr);
    const auto B = static_cast<double>(X.rows());
    const int C = static_cast<int>(out.cols());

    double loss_value = 0.0;
    MatrixT<Scalar> dout(out.rows(), out.cols());
    if (loss == LossKind::mse) {
        if (y.size() != X.rows()) throw ArgumentError("mse loss: target length mismatch");
        // scalar regression head
        VectorT<Scalar> r = out.col(0) - y;
        loss_value = static_cast<double>(r.squaredNorm()) / B;
        dout.col(0) = r * static_cast<Scalar>(2.0 / B);
        for (int c = 1; c < C; ++c) dout.col(c).setZero();
    } else {
        if (static_cast<Eigen::Index>(labels.size()) != X.rows())
            throw ArgumentError("cross-entropy loss: label length mismatch");
        MatrixT<Scalar> p = detail::softmax_rows(out);
        double nll = 0.0;
        for (Eigen::Index i = 0; i < out.rows(); ++i) {
            const int c = labels[static_cast<std::size_t>(i)];
            if (c < 0 || c >= C)
                throw ArgumentError("cross-entropy loss: class index " + std::to_string(c) +
                                    " out of range for " + std::to_string(C) + " classes");
            nll -= std::log(std::max(static_cast<double>(p(i, c)),
                                     std::numeric_limits<double>::min()));
        }
        loss_value = nll / B;
        dout = p;
        for (Eigen::Index i = 0; i < out.rows(); ++i)
            dout(i, labels[static_cast<std::size_t>(i)]) -= Scalar(1);
        dout *= static_cast<Scalar>(1.0 / B);
    }
    if (!std::isfinite(loss_value)) throw NumericError("non-finite loss value");
    if (!grads) return loss_value;

    const int L = mlp.depth();
    grads->W.assign(static_cast<std::size_t>(L), {});
    grads->b.assign(static_cast<std::size_t>(L), {});
    MatrixT<Scalar> delta = std::move(dout);
    for (int j = L - 1; j >= 0; --j) {
        const MatrixT<Scalar>& h_prev = cache.h[static_cast<std::size_t>(j)];
        grads->W[static_cast<std::size_t>(j)].noalias() = delta.transpose() * h_prev;
        grads->b[static_cast<std::size_t>(j)] = delta.colwise().sum().transpose();
        if (j > 0) {
            MatrixT<Scalar> back = delta * mlp.W[static_cast<std::size_t>(j)];
            const MatrixT<Scalar>& h = cache.h[static_cast<std::size_t>(j)];
            delta = back.array() * (Scalar(1) - h.array().square());
        }
    }
    return loss_value;
}

template <class Scalar>
double batch_loss(const Mlp<Scalar>& mlp, const TrainData<Scalar>& data, LossKind loss) {
    return loss_and_grad<Scalar>(mlp, data.X, data.y, data.labels, loss, nullptr);
}

template <class Scalar>
void adam_step(Mlp<Scalar>& mlp, const Gradients<Scalar>& grads, AdamState<Scalar>& state,
               double lr, double beta1, double beta2, double eps) {
    const int L = mlp.depth();
    if (state.t == 0) {
        state.mW.clear();
        state.vW.clear();
        state.mb.clear();
        state.vb.clear();
        for (int j = 0; j < L; ++j) {
            state.mW.push_back(MatrixT<Scalar>::Zero(mlp.W[j].rows(), mlp.W[j].cols()));
            state.vW.push_back(MatrixT<Scalar>::Zero(mlp.W[j].rows(), mlp.W[j].cols()));
            state.mb.push_back(VectorT<Scalar>::Zero(mlp.b[j].size()));
            state.vb.push_back(VectorT<Scalar>::Zero(mlp.b[j].size()));
        }
    }
    state.t += 1;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    const auto b1 = static_cast<Scalar>(beta1), b2 = static_cast<Scalar>(beta2);
    for (int j = 0; j < L; ++j) {
        auto update = [&](auto& theta, auto& m, auto& v, const auto& g) {
            m = b1 * m + (Scalar(1) - b1) * g;
            v = b2 * v + (Scalar(1) - b2) * g.array().square().matrix();
            auto m_hat = (m / static_cast<Scalar>(c1)).array();
            auto v_hat = (v / static_cast<Scalar>(c2)).array();
            theta.array() -= static_cast<Scalar>(lr) * m_hat / (v_hat.sqrt() + static_cast<Scalar>(eps));
        };
        update(mlp.W[j], state.mW[j], state.vW[j], grads.W[j]);
        update(mlp.b[j], state.mb[j], state.vb[j], grads.b[j]);
    }
}

template <class Scalar>
std::pair<Mlp<Scalar>, TrainHistory> train(const Mlp<Scalar>& mlp0,
                                           const TrainData<Scalar>& train_set,
                                           const TrainData<Scalar>& val_set,
                                           const TrainConfig& cfg, Task task,
                                           Mlp<Scalar>* final_snapshot) {
    TrainHistory history;
    Mlp<Scalar> current = mlp0;
    Mlp<Scalar> best = mlp0;
    double best_val = std::numeric_limits<double>::infinity();
    if (cfg.epochs <= 0) {
        if (final_snapshot) *final_snapshot = current;
        return {best, history};
    }

    const auto n = train_set.rows();
    const bool classification = cfg.loss == LossKind::cross_entropy;
    AdamState<Scalar> state;
    std::vector<int> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = static_cast<int>(i);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        Rng shuffle_rng(derive_seed(cfg.seed, 0xe70c5, static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        bool failed = false;
        for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
            const Eigen::Index bs = std::min<Eigen::Index>(cfg.batch_size, n - start);
            MatrixT<Scalar> Xb(bs, train_set.X.cols());
            VectorT<Scalar> yb;
            std::vector<int> lb;
            if (classification)
                lb.resize(static_cast<std::size_t>(bs));
            else
                yb.resize(bs);
            for (Eigen::Index i = 0; i < bs; ++i) {
                const int src = order[static_cast<std::size_t>(start + i)];
                Xb.row(i) = train_set.X.row(src);
                if (classification)
                    lb[static_cast<std::size_t>(i)] = train_set.labels[static_cast<std::size_t>(src)];
                else
                    yb[i] = train_set.y[src];
            }
            Gradients<Scalar> grads;
            double batch_loss_value;
            try {
                batch_loss_value = loss_and_grad<Scalar>(current, Xb, yb, lb, cfg.loss, &grads);
            } catch (const NumericError&) {
                failed = true;
                break;
            }
            loss_sum += batch_loss_value * static_cast<double>(bs);
            adam_step(current, grads, state, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
        }
        if (failed) {
            history.aborted = true;
            break;
        }

        EpochStats stats;
        stats.train_loss = loss_sum / static_cast<double>(n);
        try {
            stats.val_loss = batch_loss(current, val_set, cfg.loss);
        } catch (const NumericError&) {
            history.aborted = true;
            break;
        }
        {
            const MatrixT<Scalar> vout = forward(current, val_set.X);
            Matrix vout64 = vout.template cast<double>();
            Vector y64 = val_set.y.template cast<double>();
            stats.val_metric = validation_metric(task, vout64, y64, val_set.labels);
        }
        stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        history.epochs.push_back(stats);
        if (stats.val_loss < best_val) {
            best_val = stats.val_loss;
            best = current;
            history.best_epoch = epoch;
        }
    }
    if (final_snapshot) *final_snapshot = current;
    return {best, history};
}

template <class Scalar>
TrainData<Scalar> make_train_data(const Dataset& ds, const std::vector<int>& rows) {
    TrainData<Scalar> data;
    data.X.resize(static_cast<Eigen::Index>(rows.size()), ds.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        data.X.row(static_cast<Eigen::Index>(i)) = ds.X.row(rows[i]).template cast<Scalar>();
    if (ds.task == Task::regression) {
        data.y.resize(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i)
            data.y[static_cast<Eigen::Index>(i)] = static_cast<Scalar>(ds.y[rows[i]]);
    } else {
        data.labels.resize(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) data.labels[i] = ds.label_at(rows[i]);
    }
    return data;
}

template <class Scalar>
std::vector<Matrix> layer_weights_as_double(const Mlp<Scalar>& mlp) {
    std::vector<Matrix> out;
    out.reserve(mlp.W.size());
    for (const auto& w : mlp.W) out.push_back(w.template cast<double>());
    return out;
}

}  // namespace treeseed
