#include <treeseed/metrics.hpp>

#include <algorithm>
#include <cmath>

namespace treeseed {

double mse(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size())
        throw ArgumentError("mse: prediction and target lengths differ");
    if (pred.empty()) throw ArgumentError("mse: empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        s += d * d;
    }
    return s / static_cast<double>(pred.size());
}

int argmax_class(std::span<const double> logits) {
    int best = 0;
    for (std::size_t c = 1; c < logits.size(); ++c)
        if (logits[c] > logits[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
    return best;
}

double accuracy(std::span<const int> pred, std::span<const int> target) {
    if (pred.size() != target.size())
        throw ArgumentError("accuracy: prediction and target lengths differ");
    if (pred.empty()) throw ArgumentError("accuracy: empty input");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == target[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(pred.size());
}

double accuracy_from_logits(const Matrix& logits, std::span<const int> target) {
    if (static_cast<std::size_t>(logits.rows()) != target.size())
        throw ArgumentError("accuracy: logit rows and target length differ");
    std::vector<int> pred(static_cast<std::size_t>(logits.rows()));
    std::vector<double> row(static_cast<std::size_t>(logits.cols()));
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        for (Eigen::Index c = 0; c < logits.cols(); ++c)
            row[static_cast<std::size_t>(c)] = logits(i, c);
        pred[static_cast<std::size_t>(i)] = argmax_class(row);
    }
    return accuracy(pred, target);
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size())
        throw ArgumentError("auroc: score and label lengths differ");
    std::size_t n_pos = 0, n_neg = 0;
    for (int l : labels) (l == 1 ? n_pos : n_neg) += 1;
    if (n_pos == 0 || n_neg == 0)
        throw ArgumentError("auroc: both classes must be present");

    // rank-sum formulation with average ranks for ties, equivalent to pair
    // counting with ties worth 1/2
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k)
            if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
        i = j + 1;
    }
    const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    const double u = rank_sum_pos - np * (np + 1.0) / 2.0;
    return u / (np * nn);
}

SparsityReport sparsity_stats(const std::vector<Matrix>& layer_weights, double eps) {
    if (eps <= 0.0) throw ArgumentError("sparsity_stats: eps must be positive");
    SparsityReport report;
    report.eps = eps;
    // 101 log-spaced magnitude bins spanning [1e-8, 1e2]; counts[0] holds
    // |w| < 1e-8 (exact zeros included), the last bin |w| >= 1e2.
    constexpr int kBins = 101;
    constexpr double kLo = -8.0, kHi = 2.0;
    report.bin_edges.resize(kBins + 1);
    for (int i = 0; i <= kBins; ++i)
        report.bin_edges[static_cast<std::size_t>(i)] =
            std::pow(10.0, kLo + (kHi - kLo) * static_cast<double>(i) / kBins);

    for (const Matrix& W : layer_weights) {
        LayerSparsity layer;
        layer.weight_count = static_cast<long>(W.size());
        layer.counts.assign(static_cast<std::size_t>(kBins) + 2, 0);
        long below = 0;
        for (Eigen::Index r = 0; r < W.rows(); ++r) {
            for (Eigen::Index c = 0; c < W.cols(); ++c) {
                const double m = std::abs(W(r, c));
                if (m == 0.0) ++layer.zero_count;
                if (m < eps) ++below;
                std::size_t bin;
                if (m < report.bin_edges.front()) {
                    bin = 0;
                } else if (m >= report.bin_edges.back()) {
                    bin = static_cast<std::size_t>(kBins) + 1;
                } else {
                    const double t = (std::log10(m) - kLo) / (kHi - kLo) * kBins;
                    bin = 1 + std::min<std::size_t>(static_cast<std::size_t>(t), kBins - 1);
                }
                ++layer.counts[bin];
            }
        }
        layer.fraction_below_eps =
            layer.weight_count == 0 ? 0.0
                                    : static_cast<double>(below) / static_cast<double>(layer.weight_count);
        report.layers.push_back(std::move(layer));
    }
    return report;
}

}  // namespace treeseed
