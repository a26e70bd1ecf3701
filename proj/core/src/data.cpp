#include <treeseed/data.hpp>
#include <treeseed/rng.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace treeseed {

std::string to_string(Task task) {
    switch (task) {
        case Task::regression: return "regression";
        case Task::binary: return "binary";
        case Task::multiclass: return "multiclass";
    }
    return "regression";
}

Task task_from_string(const std::string& s) {
    if (s == "regression") return Task::regression;
    if (s == "binary") return Task::binary;
    if (s == "multiclass") return Task::multiclass;
    throw ConfigError("unknown task '" + s + "' (expected regression, binary or multiclass)");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    fields.push_back(field);
    return fields;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t");
    auto e = s.find_last_not_of(" \t");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& token, double& out) {
    const std::string t = trim(token);
    if (t.empty()) return false;
    const char* begin = t.data();
    const char* end = begin + t.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end && std::isfinite(out);
}

}  // namespace

Dataset load_csv(const std::string& path, const std::vector<ColumnSchema>& schema,
                 const std::string& target, Task task) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open CSV file '" + path + "'");

    std::string header_line;
    if (!std::getline(in, header_line)) throw DataError("empty CSV file '" + path + "'");
    const std::vector<std::string> header = split_csv_line(header_line);

    auto column_of = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (trim(header[i]) == name) return static_cast<int>(i);
        throw DataError("CSV '" + path + "' is missing declared column '" + name + "'");
    };

    std::vector<int> feature_cols;
    feature_cols.reserve(schema.size());
    for (const auto& col : schema) feature_cols.push_back(column_of(col.name));
    const int target_col = column_of(target);

    std::vector<std::vector<double>> numeric_rows;
    std::vector<double> targets;
    std::map<int, std::vector<std::string>> pending;
    for (std::size_t j = 0; j < schema.size(); ++j)
        if (schema[j].kind == ColumnKind::categorical) pending[static_cast<int>(j)] = {};

    std::vector<std::string> target_levels_raw;  // classification labels in row order
    std::string line;
    long row_idx = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++row_idx;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw DataError("row " + std::to_string(row_idx) + " of '" + path + "' has " +
                            std::to_string(fields.size()) + " fields, header has " +
                            std::to_string(header.size()));
        std::vector<double> xrow(schema.size(), 0.0);
        for (std::size_t j = 0; j < schema.size(); ++j) {
            const std::string& token = fields[static_cast<std::size_t>(feature_cols[j])];
            if (schema[j].kind == ColumnKind::numeric) {
                double v;
                if (!parse_double(token, v))
                    throw DataError("row " + std::to_string(row_idx) + ", column '" +
                                    schema[j].name + "': cannot parse '" + trim(token) +
                                    "' as a number");
                xrow[j] = v;
            } else {
                const std::string t = trim(token);
                if (t.empty())
                    throw DataError("row " + std::to_string(row_idx) + ", column '" +
                                    schema[j].name + "': missing value");
                pending[static_cast<int>(j)].push_back(t);
            }
        }
        const std::string& ttoken = fields[static_cast<std::size_t>(target_col)];
        if (task == Task::regression) {
            double v;
            if (!parse_double(ttoken, v))
                throw DataError("row " + std::to_string(row_idx) + ", target column '" + target +
                                "': cannot parse '" + trim(ttoken) + "' as a number");
            targets.push_back(v);
        } else {
            const std::string t = trim(ttoken);
            if (t.empty())
                throw DataError("row " + std::to_string(row_idx) + ", target column '" + target +
                                "': missing value");
            target_levels_raw.push_back(t);
            targets.push_back(0.0);  // assigned below
        }
        numeric_rows.push_back(std::move(xrow));
    }
    if (numeric_rows.empty()) throw DataError("CSV '" + path + "' contains no data rows");

    Dataset ds;
    ds.task = task;
    ds.schema = schema;
    const auto n = static_cast<Eigen::Index>(numeric_rows.size());
    const auto d = static_cast<Eigen::Index>(schema.size());
    ds.X.resize(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            ds.X(i, j) = numeric_rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    ds.pending_categorical = std::move(pending);

    ds.y.resize(n);
    if (task == Task::regression) {
        for (Eigen::Index i = 0; i < n; ++i) ds.y[i] = targets[static_cast<std::size_t>(i)];
        ds.n_classes = 1;
    } else {
        std::set<std::string> level_set(target_levels_raw.begin(), target_levels_raw.end());
        std::vector<std::string> levels(level_set.begin(), level_set.end());
        ds.n_classes = static_cast<int>(levels.size());
        if (task == Task::binary && ds.n_classes != 2)
            throw DataError("binary task but target column '" + target + "' has " +
                            std::to_string(ds.n_classes) + " distinct values");
        if (task == Task::multiclass && ds.n_classes < 2)
            throw DataError("multiclass task needs at least 2 target levels");
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& t = target_levels_raw[static_cast<std::size_t>(i)];
            const auto it = std::lower_bound(levels.begin(), levels.end(), t);
            ds.y[i] = static_cast<double>(std::distance(levels.begin(), it));
        }
    }
    return ds;
}

Dataset label_encode(const Dataset& ds, const std::vector<int>& fit_rows) {
    Dataset out = ds;
    for (auto& [col, values] : ds.pending_categorical) {
        std::set<std::string> level_set;
        if (fit_rows.empty()) {
            level_set.insert(values.begin(), values.end());
        } else {
            for (int r : fit_rows) level_set.insert(values[static_cast<std::size_t>(r)]);
        }
        std::vector<std::string> levels(level_set.begin(), level_set.end());
        for (Eigen::Index i = 0; i < ds.rows(); ++i) {
            const auto& v = values[static_cast<std::size_t>(i)];
            const auto it = std::lower_bound(levels.begin(), levels.end(), v);
            // codes 1..L for fitted levels, 0 for anything unseen
            const bool known = it != levels.end() && *it == v;
            out.X(i, col) = known ? static_cast<double>(std::distance(levels.begin(), it) + 1) : 0.0;
        }
        out.schema[static_cast<std::size_t>(col)].levels = std::move(levels);
    }
    out.pending_categorical.clear();
    return out;
}

NormStats normalize_fit(const Dataset& ds, const std::vector<int>& train_rows) {
    if (train_rows.empty()) throw ArgumentError("normalize_fit: empty training row set");
    NormStats stats;
    const auto n = static_cast<double>(train_rows.size());
    for (Eigen::Index j = 0; j < ds.cols(); ++j) {
        if (ds.schema.size() == static_cast<std::size_t>(ds.cols()) &&
            ds.schema[static_cast<std::size_t>(j)].kind == ColumnKind::categorical)
            continue;  // label-encoded columns stay un-normalized
        double sum = 0.0;
        for (int r : train_rows) sum += ds.X(r, j);
        const double mean = sum / n;
        double ss = 0.0;
        for (int r : train_rows) {
            const double dlt = ds.X(r, j) - mean;
            ss += dlt * dlt;
        }
        stats.columns.push_back(static_cast<int>(j));
        stats.mean.push_back(mean);
        stats.stddev.push_back(std::sqrt(ss / n));
    }
    return stats;
}

Dataset normalize_apply(const Dataset& ds, const NormStats& stats) {
    Dataset out = ds;
    for (std::size_t k = 0; k < stats.columns.size(); ++k) {
        const int j = stats.columns[k];
        if (j < 0 || j >= ds.cols())
            throw ArgumentError("normalize_apply: column index " + std::to_string(j) +
                                " out of range");
        const double mu = stats.mean[k];
        const double sigma = stats.stddev[k];
        if (sigma > 0.0)
            out.X.col(j) = (ds.X.col(j).array() - mu) / sigma;
        else
            out.X.col(j) = ds.X.col(j).array() - mu;  // constant column: center only
    }
    return out;
}

FoldPlan make_folds(const Dataset& ds, int k, bool stratified, std::uint64_t seed) {
    const auto n = ds.rows();
    if (k < 2) throw ArgumentError("make_folds: k must be at least 2");
    if (static_cast<Eigen::Index>(k) > n)
        throw ArgumentError("make_folds: k = " + std::to_string(k) + " exceeds n = " +
                            std::to_string(n));
    FoldPlan plan;
    plan.k = k;
    plan.stratified = stratified;
    plan.seed = seed;
    plan.assignments.assign(static_cast<std::size_t>(n), 0);
    Rng rng(seed);

    if (!stratified) {
        std::vector<int> order(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = static_cast<int>(i);
        rng.shuffle(order);
        for (std::size_t i = 0; i < order.size(); ++i)
            plan.assignments[static_cast<std::size_t>(order[i])] = static_cast<int>(i % static_cast<std::size_t>(k));
        return plan;
    }

    if (ds.task == Task::regression)
        throw ArgumentError("make_folds: stratified folds need class labels");
    std::map<int, std::vector<int>> by_class;
    for (Eigen::Index i = 0; i < n; ++i) by_class[ds.label_at(i)].push_back(static_cast<int>(i));
    // One global round-robin counter keeps per-class and overall fold sizes
    // within 1 of each other.
    int counter = 0;
    for (auto& [cls, members] : by_class) {
        (void)cls;
        rng.shuffle(members);
        for (int row : members) {
            plan.assignments[static_cast<std::size_t>(row)] = counter % k;
            ++counter;
        }
    }
    return plan;
}

std::vector<int> fold_rows(const FoldPlan& plan, int fold) {
    std::vector<int> rows;
    for (std::size_t i = 0; i < plan.assignments.size(); ++i)
        if (plan.assignments[i] == fold) rows.push_back(static_cast<int>(i));
    return rows;
}

std::vector<int> complement_rows(const FoldPlan& plan, int fold) {
    std::vector<int> rows;
    for (std::size_t i = 0; i < plan.assignments.size(); ++i)
        if (plan.assignments[i] != fold) rows.push_back(static_cast<int>(i));
    return rows;
}

std::pair<std::vector<int>, std::vector<int>> split_holdout(const Dataset& ds,
                                                            const std::vector<int>& rows,
                                                            double frac, std::uint64_t seed) {
    if (rows.empty()) throw ArgumentError("split_holdout: empty row set");
    if (frac <= 0.0 || frac >= 1.0) throw ArgumentError("split_holdout: frac must be in (0,1)");
    Rng rng(seed);
    std::vector<int> rest, held;
    if (ds.task == Task::regression) {
        std::vector<int> order = rows;
        rng.shuffle(order);
        auto n_held = static_cast<std::size_t>(std::lround(frac * static_cast<double>(order.size())));
        n_held = std::clamp<std::size_t>(n_held, 1, order.size() - 1);
        held.assign(order.begin(), order.begin() + static_cast<long>(n_held));
        rest.assign(order.begin() + static_cast<long>(n_held), order.end());
    } else {
        std::map<int, std::vector<int>> by_class;
        for (int r : rows) by_class[ds.label_at(r)].push_back(r);
        for (auto& [cls, members] : by_class) {
            (void)cls;
            rng.shuffle(members);
            const auto n_held = static_cast<std::size_t>(
                std::lround(frac * static_cast<double>(members.size())));
            for (std::size_t i = 0; i < members.size(); ++i)
                (i < n_held ? held : rest).push_back(members[i]);
        }
        if (held.empty()) {
            held.push_back(rest.back());
            rest.pop_back();
        }
        std::sort(rest.begin(), rest.end());
        std::sort(held.begin(), held.end());
    }
    return {rest, held};
}

Dataset friedman1(int n, double noise_sd, int d_extra, std::uint64_t seed) {
    if (n < 1) throw ArgumentError("friedman1: n must be positive");
    if (noise_sd < 0.0) throw ArgumentError("friedman1: noise_sd must be nonnegative");
    if (d_extra < 0) throw ArgumentError("friedman1: d_extra must be nonnegative");
    const int d = 5 + d_extra;
    Dataset ds;
    ds.task = Task::regression;
    ds.n_classes = 1;
    ds.X.resize(n, d);
    ds.y.resize(n);
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) ds.X(i, j) = rng.uniform();
        const double x1 = ds.X(i, 0), x2 = ds.X(i, 1), x3 = ds.X(i, 2), x4 = ds.X(i, 3),
                     x5 = ds.X(i, 4);
        double y = 10.0 * std::sin(std::numbers::pi * x1 * x2) + 20.0 * (x3 - 0.5) * (x3 - 0.5) +
                   10.0 * x4 + 5.0 * x5;
        if (noise_sd > 0.0) y += rng.normal(0.0, noise_sd);
        ds.y[i] = y;
    }
    ds.schema.resize(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j)
        ds.schema[static_cast<std::size_t>(j)] = {"x" + std::to_string(j + 1), ColumnKind::numeric, {}};
    return ds;
}

Dataset xor_classif(int n, int d_extra, double flip_prob, std::uint64_t seed) {
    if (n < 1) throw ArgumentError("xor_classif: n must be positive");
    if (flip_prob < 0.0 || flip_prob >= 0.5)
        throw ArgumentError("xor_classif: flip_prob must be in [0, 0.5)");
    if (d_extra < 0) throw ArgumentError("xor_classif: d_extra must be nonnegative");
    const int d = 2 + d_extra;
    Dataset ds;
    ds.task = Task::binary;
    ds.n_classes = 2;
    ds.X.resize(n, d);
    ds.y.resize(n);
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) ds.X(i, j) = rng.uniform(-1.0, 1.0);
        int label = ds.X(i, 0) * ds.X(i, 1) > 0.0 ? 1 : 0;
        if (flip_prob > 0.0 && rng.uniform() < flip_prob) label = 1 - label;
        ds.y[i] = static_cast<double>(label);
    }
    ds.schema.resize(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j)
        ds.schema[static_cast<std::size_t>(j)] = {"x" + std::to_string(j + 1), ColumnKind::numeric, {}};
    return ds;
}

}  // namespace treeseed
