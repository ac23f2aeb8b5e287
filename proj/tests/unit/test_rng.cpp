#include <doctest.h>

#include <cmath>
#include <set>

#include "ddlab/rng.hpp"

using ddlab::Rng;

TEST_CASE("same seed gives the same stream") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("stream seeds are distinct across streams and bases") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t base = 0; base < 16; ++base)
        for (std::uint64_t k = 0; k < 256; ++k) seen.insert(ddlab::stream_seed(base, k));
    CHECK(seen.size() == 16u * 256u);
}

TEST_CASE("uniform lies in [0, 1)") {
    Rng r(7);
    for (int i = 0; i < 100000; ++i) {
        const double u = r.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
    }
}

TEST_CASE("normal has unit variance") {
    Rng r(11);
    const int n = 400000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = r.normal();
        s += z;
        s2 += z * z;
    }
    const double mean = s / n;
    const double var = s2 / n - mean * mean;
    CHECK(std::abs(mean) < 4.0 / std::sqrt(n));
    CHECK(std::abs(var - 1.0) < 0.01);
}

TEST_CASE("fill_normal scales and is row-major deterministic") {
    Eigen::MatrixXd a(3, 4), b(3, 4);
    Rng r1(5), r2(5);
    r1.fill_normal(a, 2.0);
    for (Eigen::Index i = 0; i < 3; ++i)
        for (Eigen::Index j = 0; j < 4; ++j) b(i, j) = 2.0 * r2.normal();
    CHECK(a == b);
}
