#include "dpsynth/datagen.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <set>
#include <vector>

#include "doctest.h"
#include "dpsynth/marginal.hpp"
#include "dpsynth/preprocess.hpp"

using namespace dpsynth;

TEST_CASE("chain dataset has six seven-valued attributes and is reproducible") {
    Dataset a = make_chain_dataset(5000, 11);
    Dataset b = make_chain_dataset(5000, 11);
    REQUIRE(a.n() == 5000);
    REQUIRE(a.d() == 6);
    for (std::size_t j = 0; j < a.d(); ++j) {
        CHECK(a.domain().size(j) == 7);
        CHECK(a.encoded(j));
        CHECK(a.codes(j) == b.codes(j));
        auto [lo, hi] = std::minmax_element(a.codes(j).begin(), a.codes(j).end());
        CHECK(*lo >= 0);
        CHECK(*hi <= 6);
    }
    Dataset c = make_chain_dataset(5000, 12);
    CHECK(a.codes(0) != c.codes(0));
}

TEST_CASE("chain dataset dependence decays with distance") {
    Dataset data = make_chain_dataset(20000, 3);
    double adjacent = indif(data, 0, 1);
    double distant = indif(data, 0, 5);
    // With a one-half stay probability, dependence falls by half per step,
    // so adjacent pairs dominate pairs five steps apart by an order of
    // magnitude while the latter stay safely above sampling noise.
    CHECK(adjacent > 4.0 * distant);
    CHECK(adjacent > 10000.0);
    CHECK(distant > 500.0);
}

TEST_CASE("heavy tail dataset concentrates amounts and spreads codes") {
    Dataset data = make_heavy_tail_dataset(20000, 7);
    REQUIRE(data.d() == 4);
    REQUIRE(data.n() == 20000);
    CHECK_FALSE(data.encoded(0));
    CHECK(data.domain().size(0) == 10000);
    CHECK(data.domain().size(1) == 3000);

    const std::vector<double>& amount = data.raw(0);
    std::size_t below_tenth = 0;
    double top = 0.0;
    std::set<double> distinct;
    for (double v : amount) {
        REQUIRE(v >= 0.0);
        REQUIRE(v < 10000.0);
        if (v < 1000.0) ++below_tenth;
        top = std::max(top, v);
        distinct.insert(v);
    }
    // Nearly all the mass sits in the bottom tenth of the declared range,
    // with a skewed tail reaching past 1200 and no single dominating value.
    CHECK(below_tenth > amount.size() * 9 / 10);
    CHECK(top > 1200.0);
    CHECK(distinct.size() > 600);

    std::vector<int> counts(3000, 0);
    for (std::int32_t c : data.codes(1)) counts.at(static_cast<std::size_t>(c))++;
    std::size_t in_band = 0;
    std::size_t realized = 0;
    for (int c : counts) {
        if (c >= 20 && c <= 35) ++in_band;
        if (c > 0) ++realized;
    }
    // The Zipf middle ranks supply a wide band of moderately rare labels and
    // the tail leaves many labels realized only a handful of times.
    CHECK(in_band >= 25);
    CHECK(realized > 1000);
    CHECK(realized < 3000);
}

TEST_CASE("latent class dataset couples its attributes") {
    Dataset data = make_latent_class_dataset(10000, 21);
    REQUIRE(data.d() == 10);
    REQUIRE(data.n() == 10000);
    const std::vector<std::int64_t> sizes = {2, 3, 4, 5, 6, 8, 10, 12, 16, 20};
    for (std::size_t j = 0; j < data.d(); ++j) {
        CHECK(data.domain().size(j) == sizes[j]);
        auto [lo, hi] = std::minmax_element(data.codes(j).begin(), data.codes(j).end());
        CHECK(*lo >= 0);
        CHECK(*hi < sizes[j]);
    }
    CHECK(indif(data, 0, 1) > 500.0);
    CHECK(indif(data, 8, 9) > 500.0);
}

TEST_CASE("dataset bundle round-trips through CSV and domain files") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "dpsynth_datagen_test";
    fs::remove_all(dir);

    Dataset data = make_heavy_tail_dataset(500, 3);
    write_dataset_bundle(data, dir.string(), "sample");

    Domain reloaded_domain = load_domain_file((dir / "sample.domain.json").string());
    REQUIRE(reloaded_domain.same_shape(data.domain()));
    Dataset reloaded =
        load_dataset_file((dir / "sample.csv").string(), reloaded_domain);
    REQUIRE(reloaded.n() == data.n());
    CHECK(reloaded.raw(0) == data.raw(0));
    for (std::size_t j = 1; j < data.d(); ++j) CHECK(reloaded.codes(j) == data.codes(j));
    fs::remove_all(dir);
}
