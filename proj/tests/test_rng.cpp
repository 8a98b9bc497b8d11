#include <cmath>
#include <set>

#include "doctest.h"
#include "dpsynth/rng.hpp"

using namespace dpsynth;

TEST_CASE("same seed reproduces the stream") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) CHECK(a.uniform() == b.uniform());
}

TEST_CASE("different seeds diverge") {
    Rng a(1), b(2);
    int equal = 0;
    for (int i = 0; i < 100; ++i)
        if (a.uniform() == b.uniform()) ++equal;
    CHECK(equal < 5);
}

TEST_CASE("substreams are independent of draw order") {
    Rng root(7);
    Rng s1 = root.substream("alpha");
    double first = s1.uniform();

    Rng root2(7);
    root2.uniform();
    root2.uniform();
    Rng s2 = root2.substream("alpha");
    CHECK(s2.uniform() == first);

    Rng other = root.substream("beta");
    CHECK(other.uniform() != first);
}

TEST_CASE("uniform stays in [0,1) and uniform_open in (0,1)") {
    Rng r(3);
    for (int i = 0; i < 10000; ++i) {
        double u = r.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        double v = r.uniform_open();
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("uniform_int covers the range without obvious bias") {
    Rng r(11);
    std::set<std::uint64_t> seen;
    int counts[5] = {0, 0, 0, 0, 0};
    for (int i = 0; i < 50000; ++i) {
        auto v = r.uniform_int(5);
        REQUIRE(v < 5);
        seen.insert(v);
        ++counts[v];
    }
    CHECK(seen.size() == 5);
    for (int c : counts) {
        CHECK(c > 9000);
        CHECK(c < 11000);
    }
}

TEST_CASE("normal moments") {
    Rng r(5);
    double sum = 0.0, sumsq = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) {
        double z = r.normal();
        sum += z;
        sumsq += z * z;
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(std::abs(sumsq / n - 1.0) < 0.01);
}

TEST_CASE("laplace has the right spread and sign balance") {
    Rng r(9);
    double abssum = 0.0;
    int pos = 0;
    const int n = 200000;
    const double b = 2.0;
    for (int i = 0; i < n; ++i) {
        double z = r.laplace(b);
        abssum += std::abs(z);
        if (z > 0) ++pos;
    }
    CHECK(abssum / n == doctest::Approx(b).epsilon(0.02));
    CHECK(std::abs(double(pos) / n - 0.5) < 0.01);
}

TEST_CASE("gumbel mean is the Euler constant times scale") {
    Rng r(13);
    double sum = 0.0;
    const int n = 200000;
    const double scale = 1.5;
    for (int i = 0; i < n; ++i) sum += r.gumbel(scale);
    CHECK(sum / n == doctest::Approx(0.5772156649 * scale).epsilon(0.03));
}

TEST_CASE("zero-scale noise degenerates to zero") {
    Rng r(1);
    CHECK(r.laplace(0.0) == 0.0);
    CHECK(r.gumbel(0.0) == 0.0);
}
