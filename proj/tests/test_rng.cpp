#include <doctest.h>

#include <treeseed/rng.hpp>

#include <cmath>
#include <vector>

using namespace treeseed;

TEST_CASE("rng streams are reproducible") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng c(43);
    CHECK(Rng(42).next_u64() != c.next_u64());
}

TEST_CASE("uniform draws stay in range with plausible moments") {
    Rng rng(7);
    const int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    const double mean = sum / n;
    // tolerance: 4 sigma of the sample mean of U(0,1)
    CHECK(std::abs(mean - 0.5) < 4.0 / std::sqrt(12.0 * n));
}

TEST_CASE("uniform_int covers every residue") {
    Rng rng(11);
    std::vector<int> counts(5, 0);
    for (int i = 0; i < 5000; ++i) counts[rng.uniform_int(5)]++;
    for (int c : counts) CHECK(c > 800);
}

TEST_CASE("normal draws have plausible moments") {
    Rng rng(13);
    const int n = 100000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        sum2 += z * z;
    }
    CHECK(std::abs(sum / n) < 0.02);
    CHECK(std::abs(sum2 / n - 1.0) < 0.03);
}

TEST_CASE("derive_seed separates streams") {
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
    CHECK(derive_seed(5, 3) == derive_seed(5, 3));
}

TEST_CASE("sample_without_replacement yields distinct values") {
    Rng rng(3);
    const auto sample = rng.sample_without_replacement(10, 10);
    std::vector<bool> seen(10, false);
    for (int v : sample) {
        REQUIRE(v >= 0);
        REQUIRE(v < 10);
        CHECK(!seen[v]);
        seen[v] = true;
    }
}
