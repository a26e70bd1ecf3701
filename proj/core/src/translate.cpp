#include <treeseed/translate.hpp>

#include <algorithm>
#include <cmath>
#include <functional>

namespace treeseed {

std::string to_string(Activation a) {
    switch (a) {
        case Activation::sign: return "sign";
        case Activation::identity: return "identity";
        case Activation::tanh: return "tanh";
    }
    return "identity";
}

std::string to_string(NeuronRole r) {
    switch (r) {
        case NeuronRole::split: return "split";
        case NeuronRole::leaf: return "leaf";
        case NeuronRole::readout: return "readout";
        case NeuronRole::passthrough: return "passthrough";
        case NeuronRole::output: return "output";
    }
    return "output";
}

namespace {

struct LeafPath {
    std::vector<int> plus;   // inner nodes whose right subtree holds the leaf
    std::vector<int> minus;  // inner nodes whose left subtree holds the leaf
};

// Ancestor sets per leaf, leaf-id indexed.
std::vector<LeafPath> leaf_paths(const Tree& tree) {
    std::vector<LeafPath> paths(static_cast<std::size_t>(tree.leaf_count()));
    if (tree.nodes.empty()) return paths;
    std::function<void(int, LeafPath&)> walk = [&](int child, LeafPath& path) {
        if (child < 0) {
            paths[static_cast<std::size_t>(Tree::leaf_id(child))] = path;
            return;
        }
        const Tree::Node& node = tree.nodes[static_cast<std::size_t>(child)];
        path.minus.push_back(child);
        walk(node.left, path);
        path.minus.pop_back();
        path.plus.push_back(child);
        walk(node.right, path);
        path.plus.pop_back();
    };
    LeafPath root;
    walk(0, root);
    return paths;
}

int inferred_input_dim(const Tree& tree) {
    int dim = 0;
    for (const auto& node : tree.nodes) dim = std::max(dim, node.feature + 1);
    return dim;
}

StackLayer zero_layer(Eigen::Index rows, Eigen::Index cols, Activation act, NeuronRole role) {
    StackLayer layer;
    layer.W = Matrix::Zero(rows, cols);
    layer.b = Vector::Zero(rows);
    layer.act.assign(static_cast<std::size_t>(rows), act);
    layer.role.assign(static_cast<std::size_t>(rows), role);
    return layer;
}

// Per-tree placement inside a concatenated translation.
struct TreeBlock {
    const Tree* tree = nullptr;
    double weight = 1.0;
    int out_class = -1;  // gbdt: the single output the scalar leaves feed
    int l1_offset = 0;
    int l2_offset = 0;
};

// Layers 1-3 of a block-diagonal ensemble translation. Single-leaf trees
// contribute no hidden neurons; their constant joins the readout bias.
// `scale` multiplies every readout weight (used for deep-forest layer
// averaging); pass one output row group per call.
void fill_tree_blocks(std::vector<TreeBlock>& blocks, StackLayer& l1, StackLayer& l2,
                      int l1_col_offset) {
    for (auto& block : blocks) {
        const Tree& tree = *block.tree;
        const auto paths = leaf_paths(tree);
        for (int m = 0; m < tree.inner_count(); ++m) {
            const auto row = static_cast<Eigen::Index>(block.l1_offset + m);
            l1.W(row, tree.nodes[static_cast<std::size_t>(m)].feature) = 1.0;
            l1.b(row) = -tree.nodes[static_cast<std::size_t>(m)].threshold;
        }
        if (tree.inner_count() == 0) continue;
        for (int leaf = 0; leaf < tree.leaf_count(); ++leaf) {
            const auto row = static_cast<Eigen::Index>(block.l2_offset + leaf);
            const LeafPath& path = paths[static_cast<std::size_t>(leaf)];
            for (int m : path.plus)
                l2.W(row, l1_col_offset + block.l1_offset + m) = 1.0;
            for (int m : path.minus)
                l2.W(row, l1_col_offset + block.l1_offset + m) = -1.0;
            l2.b(row) = -static_cast<double>(path.plus.size() + path.minus.size()) + 0.5;
        }
    }
}

LayerStack translate_trees(const std::vector<TreeBlock>& blocks_in, int input_dim,
                           int output_dim, const std::vector<double>& base_offset) {
    std::vector<TreeBlock> blocks = blocks_in;
    int l1_width = 0, l2_width = 0;
    for (auto& block : blocks) {
        block.l1_offset = l1_width;
        block.l2_offset = l2_width;
        l1_width += block.tree->inner_count();
        if (block.tree->inner_count() > 0) l2_width += block.tree->leaf_count();
    }

    LayerStack stack;
    stack.input_dim = input_dim;
    stack.output_dim = output_dim;
    StackLayer l1 = zero_layer(l1_width, input_dim, Activation::sign, NeuronRole::split);
    StackLayer l2 = zero_layer(l2_width, l1_width, Activation::sign, NeuronRole::leaf);
    fill_tree_blocks(blocks, l1, l2, 0);

    StackLayer l3 = zero_layer(output_dim, l2_width, Activation::identity, NeuronRole::output);
    for (int c = 0; c < output_dim; ++c)
        l3.b(c) = base_offset.empty() ? 0.0 : base_offset[static_cast<std::size_t>(c)];
    for (const auto& block : blocks) {
        const Tree& tree = *block.tree;
        for (int leaf = 0; leaf < tree.leaf_count(); ++leaf) {
            const auto& a = tree.leaves[static_cast<std::size_t>(leaf)];
            for (int c = 0; c < output_dim; ++c) {
                const double value = block.out_class >= 0
                                         ? (c == block.out_class ? a[0] : 0.0)
                                         : a[static_cast<std::size_t>(c)];
                if (tree.inner_count() == 0) {
                    l3.b(c) += block.weight * value;  // constant tree, no indicator column
                } else {
                    l3.W(c, block.l2_offset + leaf) = block.weight * value / 2.0;
                    l3.b(c) += block.weight * value / 2.0;
                }
            }
        }
    }
    stack.layers.push_back(std::move(l1));
    stack.layers.push_back(std::move(l2));
    stack.layers.push_back(std::move(l3));
    return stack;
}

void check_feature_range(const Tree& tree, int input_dim) {
    if (inferred_input_dim(tree) > input_dim)
        throw ArgumentError("translate: tree uses feature index beyond input dimension " +
                            std::to_string(input_dim));
}

}  // namespace

LayerStack translate_tree_exact(const Tree& tree, int input_dim) {
    const int inferred = inferred_input_dim(tree);
    if (input_dim == 0) input_dim = std::max(inferred, 1);
    if (inferred > input_dim)
        throw ArgumentError("translate: tree uses feature index beyond input dimension " +
                            std::to_string(input_dim));
    std::vector<TreeBlock> blocks{{&tree, 1.0, -1, 0, 0}};
    return translate_trees(blocks, input_dim, tree.output_dim, {});
}

LayerStack translate_ensemble_exact(const TreeModel& model) {
    if (model.kind != TreeKind::forest && model.kind != TreeKind::gbdt &&
        model.kind != TreeKind::single)
        throw ArgumentError("translate_ensemble_exact: model must be a single tree, forest or gbdt");
    if (model.trees.empty()) throw ArgumentError("translate_ensemble_exact: model has no trees");

    const int output_dim = model.output_dim();
    std::vector<TreeBlock> blocks;
    blocks.reserve(model.trees.size());
    for (std::size_t t = 0; t < model.trees.size(); ++t) {
        check_feature_range(model.trees[t], model.input_dim);
        TreeBlock block;
        block.tree = &model.trees[t];
        block.weight = model.kind == TreeKind::single ? 1.0 : model.weights[t];
        block.out_class = -1;
        if (model.kind == TreeKind::gbdt && model.trees_per_round > 1)
            block.out_class = static_cast<int>(t % static_cast<std::size_t>(model.trees_per_round));
        else if (model.kind == TreeKind::gbdt)
            block.out_class = 0;
        blocks.push_back(block);
    }
    return translate_trees(blocks, model.input_dim, output_dim, model.base_offset);
}

LayerStack translate_deep_forest_exact(const TreeModel& model) {
    if (model.kind != TreeKind::deep_forest)
        throw ArgumentError("translate_deep_forest_exact: model is not a deep forest");
    if (model.cascade.empty()) throw ArgumentError("translate_deep_forest_exact: empty cascade");

    const int d = model.input_dim;
    const int per_out = model.task == Task::regression ? 1 : model.n_classes;
    const auto n_groups = model.cascade.size();

    LayerStack stack;
    stack.input_dim = d;
    stack.output_dim = per_out;

    int group_in = d;
    for (std::size_t g = 0; g < n_groups; ++g) {
        const auto& forests = model.cascade[g].forests;
        const auto n_forests = static_cast<int>(forests.size());
        const bool last = g + 1 == n_groups;
        const int pass = last ? 0 : d;

        std::vector<TreeBlock> blocks;
        int l1_width = 0, l2_width = 0;
        for (const auto& forest : forests) {
            for (std::size_t t = 0; t < forest.trees.size(); ++t) {
                check_feature_range(forest.trees[t], group_in);
                TreeBlock block;
                block.tree = &forest.trees[t];
                block.weight = forest.weights[t];
                block.l1_offset = l1_width;
                block.l2_offset = l2_width;
                l1_width += block.tree->inner_count();
                if (block.tree->inner_count() > 0) l2_width += block.tree->leaf_count();
                blocks.push_back(block);
            }
        }

        StackLayer la = zero_layer(pass + l1_width, group_in, Activation::sign, NeuronRole::split);
        StackLayer lb = zero_layer(pass + l2_width, pass + l1_width, Activation::sign,
                                   NeuronRole::leaf);
        const int readout_rows = last ? per_out : n_forests * per_out;
        StackLayer lc = zero_layer(pass + readout_rows, pass + l2_width, Activation::identity,
                                   last ? NeuronRole::output : NeuronRole::readout);
        for (int i = 0; i < pass; ++i) {
            la.W(i, i) = 1.0;
            la.act[static_cast<std::size_t>(i)] = Activation::identity;
            la.role[static_cast<std::size_t>(i)] = NeuronRole::passthrough;
            lb.W(i, i) = 1.0;
            lb.act[static_cast<std::size_t>(i)] = Activation::identity;
            lb.role[static_cast<std::size_t>(i)] = NeuronRole::passthrough;
            lc.W(i, i) = 1.0;
            lc.act[static_cast<std::size_t>(i)] = Activation::identity;
            lc.role[static_cast<std::size_t>(i)] = NeuronRole::passthrough;
        }
        // hidden blocks sit below the passthrough rows
        {
            StackLayer l1_view = zero_layer(l1_width, group_in, Activation::sign, NeuronRole::split);
            StackLayer l2_view = zero_layer(l2_width, pass + l1_width, Activation::sign,
                                            NeuronRole::leaf);
            fill_tree_blocks(blocks, l1_view, l2_view, pass);
            la.W.bottomRows(l1_width) = l1_view.W;
            la.b.tail(l1_width) = l1_view.b;
            lb.W.bottomRows(l2_width) = l2_view.W;
            lb.b.tail(l2_width) = l2_view.b;
        }

        int block_idx = 0;
        for (int f = 0; f < n_forests; ++f) {
            const auto& forest = forests[static_cast<std::size_t>(f)];
            const double forest_scale = last ? 1.0 / n_forests : 1.0;
            for (std::size_t t = 0; t < forest.trees.size(); ++t, ++block_idx) {
                const TreeBlock& block = blocks[static_cast<std::size_t>(block_idx)];
                const Tree& tree = *block.tree;
                for (int leaf = 0; leaf < tree.leaf_count(); ++leaf) {
                    const auto& a = tree.leaves[static_cast<std::size_t>(leaf)];
                    for (int c = 0; c < per_out; ++c) {
                        const auto row = static_cast<Eigen::Index>(
                            pass + (last ? c : f * per_out + c));
                        const double v = forest_scale * block.weight * a[static_cast<std::size_t>(c)];
                        if (tree.inner_count() == 0)
                            lc.b(row) += v;
                        else {
                            lc.W(row, pass + block.l2_offset + leaf) = v / 2.0;
                            lc.b(row) += v / 2.0;
                        }
                    }
                }
            }
        }

        stack.layers.push_back(std::move(la));
        stack.layers.push_back(std::move(lb));
        stack.layers.push_back(std::move(lc));
        group_in = pass + readout_rows;
    }
    return stack;
}

LayerStack translate_model_exact(const TreeModel& model) {
    if (model.kind == TreeKind::deep_forest) return translate_deep_forest_exact(model);
    return translate_ensemble_exact(model);
}

LayerStack relax(const LayerStack& stack, const Strengths& s) {
    if (s.s01 <= 0.0 || s.s12 <= 0.0 || s.s23 <= 0.0 || s.s_id <= 0.0)
        throw ArgumentError("relax: strengths must be positive");
    LayerStack out = stack;
    const auto L = out.layers.size();
    // outgoing compensation factors pending for the next layer's columns
    std::vector<double> pending;
    for (std::size_t i = 0; i < L; ++i) {
        StackLayer& layer = out.layers[i];
        if (!pending.empty()) {
            for (std::size_t c = 0; c < pending.size(); ++c)
                if (pending[c] != 1.0) layer.W.col(static_cast<Eigen::Index>(c)) *= pending[c];
        }
        pending.assign(static_cast<std::size_t>(layer.width()), 1.0);
        const bool final_layer = i + 1 == L;
        for (Eigen::Index r = 0; r < layer.width(); ++r) {
            const auto n = static_cast<std::size_t>(r);
            switch (layer.role[n]) {
                case NeuronRole::split:
                    layer.W.row(r) *= s.s01;
                    layer.b(r) *= s.s01;
                    layer.act[n] = Activation::tanh;
                    break;
                case NeuronRole::leaf:
                    layer.W.row(r) *= s.s12;
                    layer.b(r) *= s.s12;
                    layer.act[n] = Activation::tanh;
                    break;
                case NeuronRole::readout:
                case NeuronRole::passthrough: {
                    if (final_layer) break;  // keep the network output affine
                    const double c = layer.role[n] == NeuronRole::readout ? s.s23 : s.s_id;
                    layer.W.row(r) /= c;
                    layer.b(r) /= c;
                    layer.act[n] = Activation::tanh;
                    pending[n] = c;
                    break;
                }
                case NeuronRole::output:
                    break;
            }
        }
    }
    return out;
}

LayerStack cancellation_compensated_readout(const LayerStack& stack) {
    if (stack.layers.size() != 3)
        throw ArgumentError(
            "cancellation_compensated_readout: expected a 3-layer tree/forest translation");
    LayerStack out;
    out.input_dim = stack.input_dim;
    out.output_dim = stack.output_dim;
    out.layers.push_back(stack.layers[0]);
    out.layers.push_back(stack.layers[1]);

    const auto leaf_width = stack.layers[1].width();
    StackLayer remap = zero_layer(leaf_width, leaf_width, Activation::identity, NeuronRole::readout);
    for (Eigen::Index i = 0; i < leaf_width; ++i) {
        remap.W(i, i) = 0.5;
        remap.b(i) = 0.5;
    }
    out.layers.push_back(std::move(remap));

    StackLayer readout = stack.layers[2];
    readout.b -= readout.W.rowwise().sum();
    readout.W *= 2.0;
    out.layers.push_back(std::move(readout));
    return out;
}

template <class Scalar>
MatrixT<Scalar> evaluate_stack(const LayerStack& stack, const MatrixT<Scalar>& X) {
    if (X.cols() != stack.input_dim)
        throw ArgumentError("evaluate_stack: input dimension mismatch");
    MatrixT<Scalar> h = X;
    for (const StackLayer& layer : stack.layers) {
        const MatrixT<Scalar> W = layer.W.cast<Scalar>();
        const VectorT<Scalar> b = layer.b.cast<Scalar>();
        MatrixT<Scalar> z = h * W.transpose();
        z.rowwise() += b.transpose();
        for (Eigen::Index c = 0; c < z.cols(); ++c) {
            switch (layer.act[static_cast<std::size_t>(c)]) {
                case Activation::sign:
                    for (Eigen::Index r = 0; r < z.rows(); ++r)
                        z(r, c) = z(r, c) <= Scalar(0) ? Scalar(-1) : Scalar(1);
                    break;
                case Activation::tanh:
                    z.col(c) = z.col(c).array().tanh();
                    break;
                case Activation::identity:
                    break;
            }
        }
        h = std::move(z);
    }
    return h;
}

template MatrixT<double> evaluate_stack<double>(const LayerStack&, const MatrixT<double>&);
template MatrixT<float> evaluate_stack<float>(const LayerStack&, const MatrixT<float>&);

Matrix evaluate_stack64(const LayerStack& stack, const Matrix& X) {
    return evaluate_stack<double>(stack, X);
}

Matrix evaluate_stack32(const LayerStack& stack, const Matrix& X) {
    const MatrixT<float> x32 = X.cast<float>();
    return evaluate_stack<float>(stack, x32).cast<double>();
}

namespace {

FidelityReport diff_report(const Matrix& a, const Matrix& b) {
    FidelityReport report;
    const Matrix diff = (a - b).cwiseAbs();
    report.mean_abs = diff.mean();
    report.max_abs = diff.maxCoeff();
    return report;
}

}  // namespace

FidelityReport fidelity(const TreeModel& model, const LayerStack& stack, const Matrix& X) {
    if (X.rows() == 0) throw ArgumentError("fidelity: empty input sample");
    return diff_report(predict_model_batch(model, X), evaluate_stack64(stack, X));
}

FidelityReport fidelity32(const TreeModel& model, const LayerStack& stack, const Matrix& X) {
    if (X.rows() == 0) throw ArgumentError("fidelity: empty input sample");
    return diff_report(predict_model_batch(model, X), evaluate_stack32(stack, X));
}

}  // namespace treeseed
