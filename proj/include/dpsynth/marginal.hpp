#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dpsynth/accountant.hpp"
#include "dpsynth/dataset.hpp"

namespace dpsynth {

// Sorted duplicate-free attribute index set plus its table size.
struct Clique {
    std::vector<std::size_t> attrs;
    std::int64_t cell_count = 0;

    static Clique of(std::vector<std::size_t> attrs, const Domain& domain);

    bool contains(std::size_t attr) const;
    bool contains_all(const std::vector<std::size_t>& subset) const;
    std::string to_string() const;

    bool operator==(const Clique& other) const { return attrs == other.attrs; }
};

// Intersection of two sorted attribute sets.
std::vector<std::size_t> intersect_sorted(const std::vector<std::size_t>& a,
                                          const std::vector<std::size_t>& b);

enum class Provenance { Exact, Noisy };

// Contingency table over a clique. Cells are indexed row-major over the
// sorted attribute order (first attribute varies slowest).
struct Marginal {
    Clique clique;
    std::vector<double> counts;
    Provenance provenance = Provenance::Exact;
    double sigma = 0.0;

    double sum() const;
};

// Per-attribute strides for row-major cell addressing of a clique.
std::vector<std::int64_t> clique_strides(const Clique& clique, const Domain& domain);

// Default dense-table cap; preprocessing keeps selected marginals below it.
constexpr std::int64_t kDefaultMarginalCellCap = 250000;

Marginal compute_marginal(const Dataset& data, const Clique& clique,
                          std::int64_t cell_cap = kDefaultMarginalCellCap);

// Projection of a marginal onto a subset of its clique, row-major over the
// subset's own sorted order.
std::vector<double> project_marginal(const Marginal& m, const std::vector<std::size_t>& subset,
                                     const Domain& domain);

// Independence difference of an attribute pair:
// || M_{i,j} - outer(M_i, M_j)/n ||_1. Zero iff the pair is empirically
// independent.
double indif(const Dataset& data, std::size_t i, std::size_t j);

// Gaussian measurement (sensitivity 1): sigma = sqrt(1/(2*rho_cost)).
Marginal measure_noisy(const Marginal& exact, double rho_cost, BudgetLedger& ledger, Rng& rng);

// Expected L1 norm of i.i.d. N(0, sigma^2) noise over cell_count cells.
double expected_l1_noise(std::int64_t cell_count, double sigma);

// Iterative projection-averaging across marginals sharing attribute subsets,
// followed by a nonnegativity clamp and rescale to n_target, looped until
// every shared projection agrees within 1e-6 * n_target (at most 501 rounds).
std::vector<Marginal> make_consistent(std::vector<Marginal> marginals, double n_target,
                                      const Domain& domain);

// Largest disagreement between projections of marginals onto any shared
// attribute subset; 0 when nothing overlaps.
double max_projection_gap(const std::vector<Marginal>& marginals, const Domain& domain);

// Structured dump for caching between pipeline stages.
std::string marginals_to_json(const std::vector<Marginal>& marginals);
std::vector<Marginal> marginals_from_json(const std::string& text, const Domain& domain);

}  // namespace dpsynth
