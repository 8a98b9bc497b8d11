#pragma once

#include <cstdint>
#include <vector>

#include "dpsynth/dataset.hpp"
#include "dpsynth/marginal.hpp"
#include "dpsynth/selection.hpp"

namespace dpsynth {

// Iterative record-update synthesis.
struct GumConfig {
    int max_iterations = 50;
    // Fraction of each surplus moved per visit; halved whenever a whole pass
    // makes the total error worse.
    double alpha_step = 0.5;
    // Stop once a full pass improves total L1 by less than this.
    double tolerance = 1.0;

    void validate() const;
};

// Genetic adjustment synthesis.
struct GaConfig {
    int generations = 100;
    int mutations = 8;
    int crossovers = 4;
    int elite = 4;

    void validate() const;
};

// Sampling structure over merged cliques. Parents precede children in order;
// separator holds the attributes shared with the parent (empty at roots).
struct JunctionTree {
    struct Node {
        Clique clique;
        std::vector<std::size_t> separator;
        int parent = -1;
        std::vector<int> children;
    };

    std::vector<Node> nodes;
    std::vector<int> order;
    // Domain attributes appearing in no plan clique.
    std::vector<std::size_t> uncovered;
};

// Largest dense table a merged clique may occupy.
constexpr std::int64_t kJunctionCellCap = 10000000;

// Rescale the plan's marginals into one mutually consistent nonnegative set
// summing to n_target (projection averaging on shared subsets).
SelectionPlan make_plan_consistent(SelectionPlan plan, double n_target, const Domain& domain);

Dataset init_random_dataset(const Domain& domain, std::size_t n, Rng& rng);

// Start from a uniform random dataset and repeatedly move records out of
// overfull marginal cells into underfull ones, overwriting only the clique's
// attributes. Plan marginals must be consistent and scaled to n.
Dataset gum_synthesize(const SelectionPlan& plan, const Domain& domain, std::size_t n,
                       const GumConfig& config, Rng& rng);

// Triangulate the attribute graph induced by the plan cliques (min-fill),
// collect maximal cliques, and connect them by a maximum-separator spanning
// forest. Every plan clique ends up inside some node.
JunctionTree build_junction_tree(const SelectionPlan& plan, const Domain& domain,
                                 std::int64_t cell_cap = kJunctionCellCap);

// Root-first ancestral sampling: each node's distribution is fitted to the
// contained plan marginals by iterative proportional fitting, children sample
// their non-separator attributes conditioned on the parent's assignment.
Dataset junction_sample(const SelectionPlan& plan, const Domain& domain, std::size_t n,
                        Rng& rng);

// Elitist genetic search directly minimizing total L1 error against the plan.
Dataset gsd_synthesize(const SelectionPlan& plan, const Domain& domain, std::size_t n,
                       const GaConfig& config, Rng& rng);

// Adaptive-selection estimator backed by the junction sampler: each round it
// makes the current plan consistent, draws sample_n rows, and reads candidate
// marginals off the sample.
SynthesizerHook make_junction_hook(const Domain& domain, std::size_t sample_n);

}  // namespace dpsynth
