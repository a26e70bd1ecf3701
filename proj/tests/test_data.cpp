#include <doctest.h>

#include <treeseed/data.hpp>
#include <treeseed/serialize.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>

using namespace treeseed;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path);
    out << content;
    return path.string();
}

Dataset column_dataset(const std::vector<double>& values) {
    Dataset ds;
    ds.task = Task::regression;
    ds.X.resize(static_cast<Eigen::Index>(values.size()), 1);
    ds.y = Vector::Zero(static_cast<Eigen::Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) ds.X(static_cast<Eigen::Index>(i), 0) = values[i];
    ds.schema = {{"x", ColumnKind::numeric, {}}};
    return ds;
}

std::vector<int> all_rows(const Dataset& ds) {
    std::vector<int> rows(static_cast<std::size_t>(ds.rows()));
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<int>(i);
    return rows;
}

}  // namespace

TEST_CASE("load_csv parses a small mixed-schema file") {
    const auto path = write_temp("ts_small.csv", "a,c,y\n1.5,red,2.0\n2.5,blue,3.0\n3.5,red,4.0\n");
    const std::vector<ColumnSchema> schema = {{"a", ColumnKind::numeric, {}},
                                              {"c", ColumnKind::categorical, {}}};
    const Dataset ds = load_csv(path, schema, "y", Task::regression);
    CHECK(ds.rows() == 3);
    CHECK(ds.cols() == 2);
    CHECK(ds.y[1] == doctest::Approx(3.0));
    CHECK(ds.pending_categorical.count(1) == 1);
}

TEST_CASE("load_csv reports a missing declared column by name") {
    const auto path = write_temp("ts_missing.csv", "b,y\n1,2\n");
    const std::vector<ColumnSchema> schema = {{"a", ColumnKind::numeric, {}}};
    CHECK_THROWS_WITH_AS(load_csv(path, schema, "y", Task::regression),
                         doctest::Contains("'a'"), DataError);
}

TEST_CASE("load_csv reports unparseable numeric tokens with row and column") {
    const auto path = write_temp("ts_bad.csv", "a,y\n1,2\nfoo,3\n");
    const std::vector<ColumnSchema> schema = {{"a", ColumnKind::numeric, {}}};
    try {
        load_csv(path, schema, "y", Task::regression);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("row 2") != std::string::npos);
        CHECK(msg.find("'a'") != std::string::npos);
    }
}

TEST_CASE("load_csv rejects a bad target with the row index") {
    const auto path = write_temp("ts_badtarget.csv", "a,y\n1,2\n2,oops\n");
    const std::vector<ColumnSchema> schema = {{"a", ColumnKind::numeric, {}}};
    CHECK_THROWS_WITH_AS(load_csv(path, schema, "y", Task::regression),
                         doctest::Contains("row 2"), DataError);
}

TEST_CASE("load_csv handles the California-Housing column layout") {
    std::string csv =
        "MedInc,HouseAge,AveRooms,AveBedrms,Population,AveOccup,Latitude,Longitude,MedHouseVal\n";
    csv += "8.3,41,6.9,1.02,322,2.5,37.88,-122.23,4.526\n";
    csv += "8.3,21,6.2,0.97,2401,2.1,37.86,-122.22,3.585\n";
    const auto path = write_temp("ts_housing.csv", csv);
    std::vector<ColumnSchema> schema;
    for (const auto* name : {"MedInc", "HouseAge", "AveRooms", "AveBedrms", "Population",
                             "AveOccup", "Latitude", "Longitude"})
        schema.push_back({name, ColumnKind::numeric, {}});
    const Dataset ds = load_csv(path, schema, "MedHouseVal", Task::regression);
    CHECK(ds.cols() == 8);
    CHECK(ds.task == Task::regression);
}

TEST_CASE("label_encode assigns lexicographic codes from 1") {
    Dataset ds;
    ds.task = Task::regression;
    ds.X = Matrix::Zero(4, 1);
    ds.y = Vector::Zero(4);
    ds.schema = {{"c", ColumnKind::categorical, {}}};
    ds.pending_categorical[0] = {"b", "a", "b", "c"};
    const Dataset enc = label_encode(ds);
    CHECK(enc.X(0, 0) == 2.0);
    CHECK(enc.X(1, 0) == 1.0);
    CHECK(enc.X(2, 0) == 2.0);
    CHECK(enc.X(3, 0) == 3.0);
    CHECK(enc.schema[0].levels == std::vector<std::string>{"a", "b", "c"});
    CHECK(enc.pending_categorical.empty());
}

TEST_CASE("label_encode of a single-level column is all ones") {
    Dataset ds;
    ds.task = Task::regression;
    ds.X = Matrix::Zero(2, 1);
    ds.y = Vector::Zero(2);
    ds.schema = {{"c", ColumnKind::categorical, {}}};
    ds.pending_categorical[0] = {"x", "x"};
    const Dataset enc = label_encode(ds);
    CHECK(enc.X(0, 0) == 1.0);
    CHECK(enc.X(1, 0) == 1.0);
}

TEST_CASE("label_encode maps levels unseen in the fitting rows to 0") {
    Dataset ds;
    ds.task = Task::regression;
    ds.X = Matrix::Zero(4, 1);
    ds.y = Vector::Zero(4);
    ds.schema = {{"c", ColumnKind::categorical, {}}};
    ds.pending_categorical[0] = {"a", "b", "c", "z"};
    const Dataset enc = label_encode(ds, {0, 1, 2});  // fit on a,b,c only
    CHECK(enc.X(3, 0) == 0.0);
    CHECK(enc.X(0, 0) == 1.0);
}

TEST_CASE("normalize_fit uses the population convention") {
    const Dataset ds = column_dataset({1.0, 2.0, 3.0});
    const NormStats stats = normalize_fit(ds, all_rows(ds));
    CHECK(stats.mean[0] == doctest::Approx(2.0));
    CHECK(stats.stddev[0] == doctest::Approx(std::sqrt(2.0 / 3.0)));
}

TEST_CASE("normalize_fit of a constant column records sigma 0") {
    const Dataset ds = column_dataset({5.0, 5.0, 5.0});
    const NormStats stats = normalize_fit(ds, all_rows(ds));
    CHECK(stats.mean[0] == doctest::Approx(5.0));
    CHECK(stats.stddev[0] == 0.0);
}

TEST_CASE("normalize_fit rejects an empty training set") {
    const Dataset ds = column_dataset({1.0});
    CHECK_THROWS_AS(normalize_fit(ds, {}), ArgumentError);
}

TEST_CASE("normalize_apply standardizes and guards sigma 0") {
    const Dataset ds = column_dataset({1.0, 2.0, 3.0});
    const NormStats stats = normalize_fit(ds, all_rows(ds));
    const Dataset out = normalize_apply(ds, stats);
    CHECK(out.X(0, 0) == doctest::Approx(-1.224744871).epsilon(1e-6));
    CHECK(out.X(1, 0) == doctest::Approx(0.0));
    CHECK(out.X(2, 0) == doctest::Approx(1.224744871).epsilon(1e-6));

    const Dataset constant = column_dataset({5.0, 5.0});
    const Dataset out2 = normalize_apply(constant, normalize_fit(constant, all_rows(constant)));
    CHECK(out2.X(0, 0) == 0.0);
    CHECK(out2.X(1, 0) == 0.0);
}

TEST_CASE("standardization is idempotent on the training rows") {
    Rng rng(5);
    Dataset ds;
    ds.task = Task::regression;
    ds.X.resize(64, 3);
    ds.y = Vector::Zero(64);
    for (Eigen::Index i = 0; i < 64; ++i)
        for (Eigen::Index j = 0; j < 3; ++j) ds.X(i, j) = rng.uniform(-4.0, 9.0);
    ds.schema = {{"a", ColumnKind::numeric, {}},
                 {"b", ColumnKind::numeric, {}},
                 {"c", ColumnKind::numeric, {}}};
    const auto rows = all_rows(ds);
    const Dataset normalized = normalize_apply(ds, normalize_fit(ds, rows));
    const NormStats refit = normalize_fit(normalized, rows);
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(std::abs(refit.mean[j]) < 1e-10);
        CHECK(std::abs(refit.stddev[j] - 1.0) < 1e-10);
    }
}

TEST_CASE("encoded categorical columns are excluded from NormStats") {
    Dataset ds;
    ds.task = Task::regression;
    ds.X = Matrix::Zero(3, 2);
    ds.y = Vector::Zero(3);
    ds.schema = {{"num", ColumnKind::numeric, {}}, {"cat", ColumnKind::categorical, {}}};
    ds.pending_categorical[1] = {"a", "b", "a"};
    ds.X(0, 0) = 1.0;
    ds.X(1, 0) = 2.0;
    ds.X(2, 0) = 3.0;
    const Dataset enc = label_encode(ds);
    const NormStats stats = normalize_fit(enc, all_rows(enc));
    CHECK(stats.columns == std::vector<int>{0});
}

TEST_CASE("make_folds partitions rows into balanced folds") {
    Dataset ds = friedman1(10, 0.0, 0, 1);
    const FoldPlan plan = make_folds(ds, 5, false, 9);
    std::map<int, int> sizes;
    for (int a : plan.assignments) {
        REQUIRE(a >= 0);
        REQUIRE(a < 5);
        sizes[a]++;
    }
    for (const auto& [fold, size] : sizes) CHECK(size == 2);

    // partition property: every row in exactly one fold
    std::set<int> seen;
    for (int f = 0; f < 5; ++f)
        for (int r : fold_rows(plan, f)) CHECK(seen.insert(r).second);
    CHECK(seen.size() == 10);
}

TEST_CASE("stratified folds balance each class to within one sample") {
    Dataset ds = xor_classif(40, 0, 0.0, 3);
    const FoldPlan plan = make_folds(ds, 5, true, 11);
    std::map<int, std::map<int, int>> counts;  // class -> fold -> n
    std::map<int, int> class_totals;
    for (Eigen::Index i = 0; i < ds.rows(); ++i) {
        counts[ds.label_at(i)][plan.assignments[static_cast<std::size_t>(i)]]++;
        class_totals[ds.label_at(i)]++;
    }
    for (const auto& [cls, folds] : counts) {
        const double expected = class_totals[cls] / 5.0;
        for (int f = 0; f < 5; ++f) {
            const auto it = folds.find(f);
            const int c = it == folds.end() ? 0 : it->second;
            CHECK(std::abs(c - expected) <= 1.0);
        }
    }
}

TEST_CASE("stratified folds give one sample per class per fold when counts divide") {
    Dataset ds;
    ds.task = Task::binary;
    ds.n_classes = 2;
    ds.X = Matrix::Zero(10, 1);
    ds.y.resize(10);
    for (int i = 0; i < 10; ++i) ds.y[i] = i < 5 ? 0.0 : 1.0;
    const FoldPlan plan = make_folds(ds, 5, true, 2);
    std::map<int, std::map<int, int>> counts;
    for (Eigen::Index i = 0; i < 10; ++i)
        counts[plan.assignments[static_cast<std::size_t>(i)]][ds.label_at(i)]++;
    for (int f = 0; f < 5; ++f) {
        CHECK(counts[f][0] == 1);
        CHECK(counts[f][1] == 1);
    }
}

TEST_CASE("make_folds is deterministic and validates k") {
    Dataset ds = friedman1(10, 0.0, 0, 1);
    const FoldPlan a = make_folds(ds, 5, false, 17);
    const FoldPlan b = make_folds(ds, 5, false, 17);
    CHECK(a.assignments == b.assignments);
    CHECK_THROWS_AS(make_folds(ds, 11, false, 1), ArgumentError);
    CHECK_THROWS_AS(make_folds(ds, 1, false, 1), ArgumentError);
}

TEST_CASE("friedman1 matches the analytic surface") {
    // x = (0.5, 0.5, 0.5, 0.5, 0.5): 10 sin(pi/4) + 0 + 5 + 2.5
    Dataset ds = friedman1(1, 0.0, 0, 1);
    ds.X.row(0) << 0.5, 0.5, 0.5, 0.5, 0.5;
    const double y = 10.0 * std::sin(std::numbers::pi * 0.25) + 10.0 * 0.5 + 5.0 * 0.5;
    CHECK(y == doctest::Approx(14.5711).epsilon(1e-4));

    // zero case: sin term 0, quadratic 0, linear terms 0
    const double y0 = 10.0 * std::sin(std::numbers::pi * 0.0 * 0.7) +
                      20.0 * (0.5 - 0.5) * (0.5 - 0.5) + 10.0 * 0.0 + 5.0 * 0.0;
    CHECK(y0 == 0.0);
}

TEST_CASE("friedman1 generated targets obey the formula without noise") {
    const Dataset ds = friedman1(50, 0.0, 2, 7);
    CHECK(ds.cols() == 7);
    for (Eigen::Index i = 0; i < ds.rows(); ++i) {
        const double expected = 10.0 * std::sin(std::numbers::pi * ds.X(i, 0) * ds.X(i, 1)) +
                                20.0 * (ds.X(i, 2) - 0.5) * (ds.X(i, 2) - 0.5) +
                                10.0 * ds.X(i, 3) + 5.0 * ds.X(i, 4);
        CHECK(ds.y[i] == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("generators are bit-reproducible under a fixed seed") {
    const Dataset a = friedman1(1000, 1.0, 3, 99);
    const Dataset b = friedman1(1000, 1.0, 3, 99);
    CHECK(a.X == b.X);
    CHECK(a.y == b.y);
    const Dataset c = xor_classif(500, 2, 0.1, 123);
    const Dataset d = xor_classif(500, 2, 0.1, 123);
    CHECK(c.X == d.X);
    CHECK(c.y == d.y);
}

TEST_CASE("xor_classif labels follow the sign rule without flips") {
    const Dataset ds = xor_classif(500, 1, 0.0, 5);
    CHECK(ds.cols() == 3);
    for (Eigen::Index i = 0; i < ds.rows(); ++i) {
        const int expected = ds.X(i, 0) * ds.X(i, 1) > 0.0 ? 1 : 0;
        CHECK(ds.label_at(i) == expected);
    }
    CHECK_THROWS_AS(xor_classif(10, 0, 0.6, 1), ArgumentError);
}

TEST_CASE("split_holdout produces disjoint covering subsets") {
    const Dataset ds = xor_classif(100, 0, 0.0, 8);
    std::vector<int> rows(100);
    for (int i = 0; i < 100; ++i) rows[static_cast<std::size_t>(i)] = i;
    const auto [rest, held] = split_holdout(ds, rows, 0.2, 4);
    CHECK(rest.size() + held.size() == 100);
    std::set<int> all(rest.begin(), rest.end());
    for (int r : held) CHECK(all.insert(r).second);
    CHECK(all.size() == 100);
    CHECK(held.size() == 20);
}
