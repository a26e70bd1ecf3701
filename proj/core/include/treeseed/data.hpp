#pragma once

#include <treeseed/common.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace treeseed {

enum class Task { regression, binary, multiclass };

std::string to_string(Task task);
Task task_from_string(const std::string& s);

enum class ColumnKind { numeric, categorical };

struct ColumnSchema {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    // Populated by label_encode (lexicographic over the fitting rows); empty
    // for numeric columns.
    std::vector<std::string> levels;
};

struct Dataset {
    Matrix X;  // n x d
    Vector y;  // regression targets, or class indices in {0..n_classes-1}
    std::vector<ColumnSchema> schema;
    Task task = Task::regression;
    int n_classes = 1;
    // Raw categorical strings parsed from CSV, kept until label_encode runs.
    std::map<int, std::vector<std::string>> pending_categorical;

    Eigen::Index rows() const { return X.rows(); }
    Eigen::Index cols() const { return X.cols(); }
    int label_at(Eigen::Index i) const { return static_cast<int>(y[i]); }
};

/// Per-numeric-column standardization statistics, population convention,
/// fitted on training rows only. Label-encoded categoricals are excluded.
struct NormStats {
    std::vector<int> columns;
    std::vector<double> mean;
    std::vector<double> stddev;
};

struct FoldPlan {
    int k = 0;
    std::vector<int> assignments;  // per row, in {0..k-1}
    bool stratified = false;
    std::uint64_t seed = 0;
};

/// Feature columns + target declaration as stored in a schema JSON file.
struct SchemaFile {
    std::vector<ColumnSchema> columns;
    std::string target;
    Task task = Task::regression;
};

/// Parses a CSV (comma separated, header row, UTF-8, "." decimal point)
/// against a declared schema. Numeric columns are parsed as doubles;
/// categorical ones are kept as strings until label_encode. Missing values
/// and unparseable tokens are rejected with the row/column location.
Dataset load_csv(const std::string& path, const std::vector<ColumnSchema>& schema,
                 const std::string& target, Task task);

/// Replaces every categorical column with integer codes 1..L, levels ordered
/// lexicographically over `fit_rows` (all rows when empty). Values outside the
/// fitted levels map to 0.
Dataset label_encode(const Dataset& ds, const std::vector<int>& fit_rows = {});

NormStats normalize_fit(const Dataset& ds, const std::vector<int>& train_rows);

/// (x - mu) / sigma per numeric column; columns with sigma = 0 are centered
/// only.
Dataset normalize_apply(const Dataset& ds, const NormStats& stats);

FoldPlan make_folds(const Dataset& ds, int k, bool stratified, std::uint64_t seed);

std::vector<int> fold_rows(const FoldPlan& plan, int fold);
std::vector<int> complement_rows(const FoldPlan& plan, int fold);

/// Splits `rows` into (rest, held-out) where the held-out part has
/// round(frac * n) rows, seeded shuffle. For classification the draw is
/// stratified per class.
std::pair<std::vector<int>, std::vector<int>> split_holdout(
    const Dataset& ds, const std::vector<int>& rows, double frac, std::uint64_t seed);

/// Friedman #1 regression surface on [0,1]^(5+d_extra):
/// y = 10 sin(pi x1 x2) + 20 (x3 - 1/2)^2 + 10 x4 + 5 x5 + N(0, noise_sd^2).
Dataset friedman1(int n, double noise_sd, int d_extra, std::uint64_t seed);

/// Two-feature sign-interaction labels on [-1,1]^(2+d_extra): class 1 iff
/// x1 * x2 > 0, flipped with probability flip_prob.
Dataset xor_classif(int n, int d_extra, double flip_prob, std::uint64_t seed);

}  // namespace treeseed
