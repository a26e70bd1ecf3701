#pragma once

#include <treeseed/trees.hpp>

#include <string>
#include <vector>

namespace treeseed {

/// sign maps x <= 0 to -1 and x > 0 to +1 (ties left, like tree routing).
enum class Activation { sign, identity, tanh };

/// What a neuron encodes in a tree translation; relax() picks the strength
/// per role.
enum class NeuronRole {
    split,        // layer 1 of a tree block: hyperplane side indicator
    leaf,         // layer 2: leaf membership indicator
    readout,      // layer 3 of a non-final cascade group: forest outputs
    passthrough,  // raw-input replay neurons in cascade groups
    output        // final affine readout, never relaxed
};

std::string to_string(Activation a);
std::string to_string(NeuronRole r);

struct StackLayer {
    Matrix W;  // rows x cols
    Vector b;
    std::vector<Activation> act;   // per neuron
    std::vector<NeuronRole> role;  // per neuron
    Eigen::Index width() const { return W.rows(); }
};

struct LayerStack {
    std::vector<StackLayer> layers;
    int input_dim = 0;
    int output_dim = 0;
};

struct Strengths {
    double s01 = 1e10;
    double s12 = 1e10;
    double s23 = 1e10;
    double s_id = 1e10;
};

/// Tree -> 3 layers: hyperplane signs, leaf indicators, affine readout
/// 0.5 * (sum_l x_l a_l + sum_l a_l). A single-leaf tree yields empty layers
/// 1-2 and a bias-only readout. input_dim 0 infers the smallest dimension
/// covering the tree's split features.
LayerStack translate_tree_exact(const Tree& tree, int input_dim = 0);

/// Forest/gbdt -> the per-tree stacks concatenated block-diagonally; the
/// third layer also applies the combination weights and base offset.
LayerStack translate_ensemble_exact(const TreeModel& model);

/// Deep forest -> 3 layers per retained cascade layer; every group except the
/// last carries d extra identity neurons replaying the raw input to the next
/// group. Group outputs are laid out [raw | forest outputs], matching the
/// cascade's training-time feature layout.
LayerStack translate_deep_forest_exact(const TreeModel& model);

/// Dispatch on model.kind.
LayerStack translate_model_exact(const TreeModel& model);

/// Replaces sign/identity activations with plain tanh: sign(x) ~ tanh(a x)
/// with a folded into the incoming weights (s01 for split neurons, s12 for
/// leaf neurons); identity x ~ c tanh(x/c) with the incoming side divided by
/// c and the outgoing weights of the next layer multiplied by c (s23 for
/// readouts, s_id for passthroughs). The final layer stays identity-affine.
LayerStack relax(const LayerStack& stack, const Strengths& s);

/// Inserts a layer mapping the leaf indicators from {-1,+1} to {0,1} and
/// rewrites the readout to multiply each indicator by its leaf value
/// directly, removing the near-cancelling sum pair of the default readout.
LayerStack cancellation_compensated_readout(const LayerStack& stack);

/// Batch-evaluates the stack in the given precision. All arithmetic,
/// including the weights, is carried out in Scalar.
template <class Scalar>
MatrixT<Scalar> evaluate_stack(const LayerStack& stack, const MatrixT<Scalar>& X);

Matrix evaluate_stack64(const LayerStack& stack, const Matrix& X);
/// Evaluates with float32 weights and arithmetic, returning doubles.
Matrix evaluate_stack32(const LayerStack& stack, const Matrix& X);

struct FidelityReport {
    double mean_abs = 0.0;
    double max_abs = 0.0;
};

/// Mean/max |predict_model - stack| over X (per-output mean for vector
/// outputs), stack evaluated in 64-bit.
FidelityReport fidelity(const TreeModel& model, const LayerStack& stack, const Matrix& X);

/// Same comparison with the stack evaluated in 32-bit arithmetic.
FidelityReport fidelity32(const TreeModel& model, const LayerStack& stack, const Matrix& X);

}  // namespace treeseed
