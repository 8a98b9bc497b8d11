#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dpsynth/accountant.hpp"
#include "dpsynth/dataset.hpp"
#include "dpsynth/marginal.hpp"

namespace dpsynth {

enum class SelectionStrategy { NonAdaptive, Adaptive };

struct PlanEntry {
    Clique clique;
    Marginal marginal;  // always noisy
    double rho = 0.0;
};

// One adaptive round's audit record.
struct RoundRecord {
    int round = 0;
    std::size_t candidate_count = 0;
    double best_score = 0.0;
    double chosen_score = 0.0;
    std::string chosen;
};

struct SelectionPlan {
    SelectionStrategy strategy = SelectionStrategy::NonAdaptive;
    std::vector<PlanEntry> entries;
    std::vector<RoundRecord> rounds;
    // Budget burned on choosing (pair screening / exponential mechanism), as
    // opposed to measuring.
    double rho_overhead = 0.0;

    double rho_measured() const;
    std::vector<Clique> cliques() const;
};

// One-shot pair screening: noisy independence differences for all pairs, then
// a fixed-point pass deciding which pairs are worth their share of the
// measurement budget; chosen 2-ways plus all 1-ways are measured with
// Gaussian noise. No intermediate synthesis.
SelectionPlan privsyn_select(const Dataset& data, double rho_select, double rho_measure,
                             BudgetLedger& ledger, Rng& rng);

// Measurement-worth score of a candidate clique: L1 gap to the current
// synthetic estimate minus the expected L1 noise a fresh measurement would
// add. Positive means measuring is expected to help.
double score_candidate(const Clique& candidate, const Marginal& exact,
                       const Marginal& synthetic_estimate, double sigma_next);

// Produces synthetic-data estimates of candidate marginals from the plan
// measured so far; rebuilt once per adaptive round.
struct RoundEstimator {
    virtual ~RoundEstimator() = default;
    virtual Marginal estimate(const Clique& clique) = 0;
};

using SynthesizerHook =
    std::function<std::unique_ptr<RoundEstimator>(const SelectionPlan& current, Rng& rng)>;

struct AdaptivePolicy {
    int rounds = 10;
    // Fraction of the total allotment measuring all 1-ways up front.
    double init_share = 0.1;
    // Fraction of each round spent on the exponential-mechanism choice; the
    // rest measures the chosen clique.
    double em_share = 0.1;
    bool include_3way = false;

    void validate() const;
};

// Iterative selection: measure all 1-ways, then per round score every
// candidate clique against a fresh synthetic estimate, choose one by the
// exponential mechanism, measure it, and re-estimate. Budget is split evenly
// across rounds.
SelectionPlan adaptive_select(const Dataset& data, double total_rho,
                              const AdaptivePolicy& policy, const SynthesizerHook& hook,
                              BudgetLedger& ledger, Rng& rng);

}  // namespace dpsynth
