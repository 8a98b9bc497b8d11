#include <cmath>

#include "doctest.h"
#include "dpsynth/marginal.hpp"

using namespace dpsynth;

namespace {

Domain binary_domain(std::size_t k) {
    std::vector<AttributeSpec> attrs;
    for (std::size_t j = 0; j < k; ++j)
        attrs.push_back(AttributeSpec::categorical("a" + std::to_string(j), {"0", "1"}));
    return Domain(std::move(attrs));
}

Dataset from_columns(const Domain& dom, std::vector<std::vector<std::int32_t>> cols) {
    Dataset d(dom);
    for (std::size_t j = 0; j < cols.size(); ++j) d.set_encoded_column(j, std::move(cols[j]));
    return d;
}

}  // namespace

TEST_CASE("clique construction sorts and validates") {
    Domain dom({AttributeSpec::categorical("x", {"a", "b", "c"}),
                AttributeSpec::categorical("y", {"p", "q"})});
    Clique c = Clique::of({1, 0}, dom);
    CHECK(c.attrs == std::vector<std::size_t>{0, 1});
    CHECK(c.cell_count == 6);
    CHECK(c.contains(1));
    CHECK(!c.contains(2));
    CHECK_THROWS_AS(Clique::of({0, 0}, dom), ConfigError);
    CHECK_THROWS_AS(Clique::of({5}, dom), ConfigError);
    CHECK_THROWS_AS(Clique::of({}, dom), ConfigError);
}

TEST_CASE("one-way marginal counts labels") {
    Domain dom({AttributeSpec::categorical("c", {"a", "b"})});
    Dataset d = from_columns(dom, {{0, 1, 0}});
    Marginal m = compute_marginal(d, Clique::of({0}, dom));
    CHECK(m.counts == std::vector<double>{2.0, 1.0});
    CHECK(m.provenance == Provenance::Exact);
}

TEST_CASE("two-way marginal of a perfectly correlated pair") {
    Domain dom = binary_domain(2);
    std::vector<std::int32_t> col(100);
    for (int i = 0; i < 100; ++i) col[i] = i < 50 ? 0 : 1;
    Dataset d = from_columns(dom, {col, col});
    Marginal m = compute_marginal(d, Clique::of({0, 1}, dom));
    CHECK(m.counts == std::vector<double>{50.0, 0.0, 0.0, 50.0});
    CHECK(m.sum() == doctest::Approx(100.0));
}

TEST_CASE("empty dataset yields a zero marginal") {
    Domain dom = binary_domain(1);
    Dataset d = from_columns(dom, {{}});
    Marginal m = compute_marginal(d, Clique::of({0}, dom));
    CHECK(m.counts == std::vector<double>{0.0, 0.0});
}

TEST_CASE("cell cap is enforced") {
    std::vector<std::string> labels;
    for (int i = 0; i < 600; ++i) labels.push_back(std::to_string(i));
    Domain dom({AttributeSpec::categorical("x", labels),
                AttributeSpec::categorical("y", labels)});
    Dataset d = from_columns(dom, {{0}, {0}});
    CHECK_THROWS_WITH_AS(compute_marginal(d, Clique::of({0, 1}, dom)),
                         doctest::Contains("cap"), DataError);
    CHECK_NOTHROW(compute_marginal(d, Clique::of({0, 1}, dom), 400000));
}

TEST_CASE("marginal on an unencoded column throws") {
    Domain dom({AttributeSpec::numerical("v", 0.0, 1.0, 10)});
    Dataset d(dom);
    d.set_raw_column(0, {0.5, 0.25});
    CHECK_THROWS_AS(compute_marginal(d, Clique::of({0}, dom)), DataError);
}

TEST_CASE("projection coherence with directly computed one-ways") {
    Domain dom({AttributeSpec::categorical("x", {"a", "b", "c"}),
                AttributeSpec::categorical("y", {"p", "q"})});
    Dataset d = from_columns(dom, {{0, 1, 2, 1, 0, 2, 2}, {0, 1, 0, 1, 1, 0, 1}});
    Marginal mxy = compute_marginal(d, Clique::of({0, 1}, dom));
    Marginal mx = compute_marginal(d, Clique::of({0}, dom));
    Marginal my = compute_marginal(d, Clique::of({1}, dom));
    CHECK(project_marginal(mxy, {0}, dom) == mx.counts);
    CHECK(project_marginal(mxy, {1}, dom) == my.counts);
    CHECK_THROWS_AS(project_marginal(mx, {1}, dom), ConfigError);
}

TEST_CASE("indif of a perfectly correlated binary pair") {
    Domain dom = binary_domain(2);
    std::vector<std::int32_t> col(100);
    for (int i = 0; i < 100; ++i) col[i] = i < 50 ? 0 : 1;
    Dataset d = from_columns(dom, {col, col});
    // Cells (0,0) and (1,1) hold 50 vs independent 25; the off-diagonal
    // cells hold 0 vs 25. Total deviation 4 * 25.
    CHECK(indif(d, 0, 1) == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(indif(d, 1, 0) == doctest::Approx(100.0).epsilon(1e-12));
}

TEST_CASE("indif vanishes for an exactly independent pair") {
    Domain dom = binary_domain(2);
    Dataset d = from_columns(dom, {{0, 0, 1, 1}, {0, 1, 0, 1}});
    CHECK(indif(d, 0, 1) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("indif guards") {
    Domain dom = binary_domain(2);
    Dataset d = from_columns(dom, {{0}, {1}});
    CHECK_THROWS_AS(indif(d, 0, 0), ConfigError);
    Dataset empty = from_columns(dom, {{}, {}});
    CHECK_THROWS_AS(indif(empty, 0, 1), DataError);
}

TEST_CASE("indif never exceeds twice the record count") {
    Domain dom({AttributeSpec::categorical("x", {"a", "b", "c", "d"}),
                AttributeSpec::categorical("y", {"p", "q", "r"})});
    Rng r(17);
    std::vector<std::int32_t> cx, cy;
    for (int i = 0; i < 500; ++i) {
        cx.push_back(std::int32_t(r.uniform_int(4)));
        cy.push_back(std::int32_t(cx.back() % 3));
    }
    Dataset d = from_columns(dom, {cx, cy});
    const double v = indif(d, 0, 1);
    CHECK(v >= 0.0);
    CHECK(v <= 2.0 * 500.0);
}

TEST_CASE("measure_noisy records sigma and debits the ledger") {
    Domain dom = binary_domain(1);
    Dataset d = from_columns(dom, {{0, 1, 1}});
    Marginal exact = compute_marginal(d, Clique::of({0}, dom));
    BudgetLedger ledger(1.0);
    Rng rng(55);
    Marginal noisy = measure_noisy(exact, 0.5, ledger, rng);
    CHECK(noisy.provenance == Provenance::Noisy);
    CHECK(noisy.sigma == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ledger.rho_spent() == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(noisy.counts != exact.counts);

    // Double measurement spends twice; re-measuring a noisy table is not
    // meaningful.
    Marginal again = measure_noisy(exact, 0.5, ledger, rng);
    CHECK(ledger.rho_spent() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(again.counts != noisy.counts);
    CHECK_THROWS_AS(measure_noisy(noisy, 0.1, ledger, rng), DataError);
}

TEST_CASE("expected_l1_noise closed form and Monte Carlo") {
    CHECK(expected_l1_noise(1, 1.0) == doctest::Approx(0.7978845608028654).epsilon(1e-12));
    CHECK(expected_l1_noise(100, 1.0) == doctest::Approx(79.78845608028654).epsilon(1e-12));
    CHECK(expected_l1_noise(100, 0.0) == 0.0);

    Rng r(421);
    const double sigma = 2.5;
    double total = 0.0;
    const int draws = 1000000;
    for (int i = 0; i < draws; ++i) total += std::abs(r.normal(sigma));
    CHECK(total / draws == doctest::Approx(expected_l1_noise(1, sigma)).epsilon(0.01));
}

TEST_CASE("make_consistent clamps and rescales a single marginal") {
    Domain dom = binary_domain(1);
    Marginal m;
    m.clique = Clique::of({0}, dom);
    m.counts = {-2.0, 12.0};
    m.provenance = Provenance::Noisy;
    m.sigma = 1.0;
    auto out = make_consistent({m}, 10.0, dom);
    REQUIRE(out.size() == 1);
    CHECK(out[0].counts[0] == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(out[0].counts[1] == doctest::Approx(10.0).epsilon(1e-9));
}

TEST_CASE("make_consistent averages duplicate measurements") {
    Domain dom = binary_domain(1);
    Marginal a, b;
    a.clique = b.clique = Clique::of({0}, dom);
    a.counts = {6.0, 4.0};
    b.counts = {2.0, 8.0};
    a.provenance = b.provenance = Provenance::Noisy;
    auto out = make_consistent({a, b}, 10.0, dom);
    CHECK(out[0].counts[0] == doctest::Approx(4.0).epsilon(1e-9));
    CHECK(out[0].counts[1] == doctest::Approx(6.0).epsilon(1e-9));
    CHECK(out[1].counts == out[0].counts);
}

TEST_CASE("make_consistent reconciles overlapping two-way marginals") {
    Domain dom = binary_domain(3);
    Rng rng(99);
    std::vector<Marginal> ms;
    for (auto pair : {std::pair<std::size_t, std::size_t>{0, 1}, {1, 2}, {0, 2}}) {
        Marginal m;
        m.clique = Clique::of({pair.first, pair.second}, dom);
        m.counts = {25.0 + rng.normal(3.0), 25.0 + rng.normal(3.0), 25.0 + rng.normal(3.0),
                    25.0 + rng.normal(3.0)};
        m.provenance = Provenance::Noisy;
        m.sigma = 3.0;
        ms.push_back(m);
    }
    auto out = make_consistent(ms, 100.0, dom);
    for (const auto& m : out) {
        CHECK(m.sum() == doctest::Approx(100.0).epsilon(1e-9));
        for (double c : m.counts) CHECK(c >= 0.0);
    }
    CHECK(max_projection_gap(out, dom) <= 1e-6 * 100.0);

    // Idempotence at tolerance.
    auto again = make_consistent(out, 100.0, dom);
    for (std::size_t i = 0; i < out.size(); ++i)
        for (std::size_t c = 0; c < out[i].counts.size(); ++c)
            CHECK(std::abs(again[i].counts[c] - out[i].counts[c]) <= 1e-6 * 100.0);
}

TEST_CASE("marginal JSON round-trip") {
    Domain dom = binary_domain(2);
    Dataset d = from_columns(dom, {{0, 1, 1}, {1, 1, 0}});
    Marginal m = compute_marginal(d, Clique::of({0, 1}, dom));
    BudgetLedger ledger(1.0);
    Rng rng(3);
    Marginal noisy = measure_noisy(m, 0.3, ledger, rng);

    auto text = marginals_to_json({m, noisy});
    auto back = marginals_from_json(text, dom);
    REQUIRE(back.size() == 2);
    CHECK(back[0].counts == m.counts);
    CHECK(back[0].provenance == Provenance::Exact);
    CHECK(back[1].counts == noisy.counts);
    CHECK(back[1].provenance == Provenance::Noisy);
    CHECK(back[1].sigma == noisy.sigma);

    CHECK_THROWS_AS(marginals_from_json("nonsense", dom), DataError);
}
