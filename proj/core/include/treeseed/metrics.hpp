#pragma once

#include <treeseed/common.hpp>
#include <treeseed/data.hpp>

#include <span>
#include <vector>

namespace treeseed {

double mse(std::span<const double> pred, std::span<const double> target);

/// argmax with lowest-index tie-break.
int argmax_class(std::span<const double> logits);

double accuracy(std::span<const int> pred, std::span<const int> target);

/// Accuracy of row-wise argmax over a logit/probability matrix.
double accuracy_from_logits(const Matrix& logits, std::span<const int> target);

/// Mann-Whitney AUROC: fraction of (positive, negative) pairs ordered
/// correctly, ties counted 1/2. Both classes must be present.
double auroc(std::span<const double> scores, std::span<const int> labels);

struct LayerSparsity {
    long weight_count = 0;
    long zero_count = 0;
    double fraction_below_eps = 0.0;
    std::vector<long> counts;  // histogram over |w|, aligned with bin_edges
};

struct SparsityReport {
    double eps = 0.0;
    // Magnitude bin edges: counts[0] covers |w| < edges[0] (incl. exact
    // zeros, reported separately too), the last bin |w| >= edges.back().
    std::vector<double> bin_edges;
    std::vector<LayerSparsity> layers;
};

/// Per-layer weight-magnitude statistics (biases excluded): fraction of
/// |w| < eps and a histogram over 101 log-spaced bins spanning [1e-8, 1e2]
/// plus underflow/overflow bins.
SparsityReport sparsity_stats(const std::vector<Matrix>& layer_weights, double eps);

}  // namespace treeseed
