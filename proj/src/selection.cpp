#include "dpsynth/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dpsynth {

double SelectionPlan::rho_measured() const {
    double total = 0.0;
    for (const PlanEntry& entry : entries) total += entry.rho;
    return total;
}

std::vector<Clique> SelectionPlan::cliques() const {
    std::vector<Clique> out;
    out.reserve(entries.size());
    for (const PlanEntry& entry : entries) out.push_back(entry.clique);
    return out;
}

namespace {

// Budget split inside rho_measure: PrivSyn publishes 1-ways cheaply and puts
// the bulk into the chosen pairs.
constexpr double kOneWayShare = 1.0 / 9.0;

struct PairScreen {
    std::size_t i = 0;
    std::size_t j = 0;
    std::int64_t cells = 0;
    double noisy_indif = 0.0;
};

// Pairs worth measuring if the budget were divided evenly among k of them.
std::size_t count_selected(const std::vector<PairScreen>& pairs, double rho_pairs,
                           std::size_t k) {
    if (k == 0) return 0;
    double sigma = sigma_for_rho(rho_pairs / static_cast<double>(k), 1.0).sigma;
    std::size_t selected = 0;
    for (const PairScreen& p : pairs)
        if (p.noisy_indif > expected_l1_noise(p.cells, sigma)) ++selected;
    return selected;
}

}  // namespace

SelectionPlan privsyn_select(const Dataset& data, double rho_select, double rho_measure,
                             BudgetLedger& ledger, Rng& rng) {
    const std::size_t d = data.d();
    if (d < 2) throw ConfigError("pair selection: need at least two attributes");
    if (!(rho_select > 0.0) || !(rho_measure > 0.0))
        throw ConfigError("pair selection: budgets must be positive");
    if (!data.fully_encoded()) throw DataError("pair selection: dataset must be encoded");

    const std::size_t pair_count = d * (d - 1) / 2;
    const double rho_per_pair = rho_select / static_cast<double>(pair_count);
    // Independence differences move by at most 4 when one record changes.
    const NoiseScale screen_scale = sigma_for_rho(rho_per_pair, 4.0);

    ledger.spend(rho_select, "pair screening");
    std::vector<PairScreen> pairs;
    pairs.reserve(pair_count);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) {
            PairScreen p;
            p.i = i;
            p.j = j;
            p.cells = data.domain().size(i) * data.domain().size(j);
            // Pairs too large to materialize are never candidates; their
            // sentinel score loses every comparison below.
            p.noisy_indif = p.cells > kDefaultMarginalCellCap
                                ? -std::numeric_limits<double>::infinity()
                                : indif(data, i, j) + rng.normal(screen_scale.sigma);
            pairs.push_back(p);
        }
    }

    // How many pairs to keep depends on the per-pair noise, which depends on
    // how many pairs are kept. The count map is antitone, so iteration either
    // settles or alternates between two values; take the smaller then.
    const double rho_pairs_total = (1.0 - kOneWayShare) * rho_measure;
    std::size_t k = pair_count;
    std::size_t prev = std::numeric_limits<std::size_t>::max();
    for (int iter = 0; iter < 200; ++iter) {
        std::size_t next = count_selected(pairs, rho_pairs_total, k);
        if (next == k) break;
        if (next == prev) {
            k = std::min(k, next);
            break;
        }
        prev = k;
        k = next;
    }

    std::vector<const PairScreen*> order;
    order.reserve(pair_count);
    for (const PairScreen& p : pairs) order.push_back(&p);
    std::stable_sort(order.begin(), order.end(), [](const PairScreen* a, const PairScreen* b) {
        if (a->noisy_indif != b->noisy_indif) return a->noisy_indif > b->noisy_indif;
        if (a->i != b->i) return a->i < b->i;
        return a->j < b->j;
    });
    order.resize(k);

    SelectionPlan plan;
    plan.strategy = SelectionStrategy::NonAdaptive;
    plan.rho_overhead = rho_select;

    // With nothing worth a pair measurement the whole allotment goes to the
    // 1-ways.
    const double rho_one_total = k == 0 ? rho_measure : kOneWayShare * rho_measure;
    const double rho_one = rho_one_total / static_cast<double>(d);
    for (std::size_t a = 0; a < d; ++a) {
        PlanEntry entry;
        entry.clique = Clique::of({a}, data.domain());
        entry.marginal =
            measure_noisy(compute_marginal(data, entry.clique), rho_one, ledger, rng);
        entry.rho = rho_one;
        plan.entries.push_back(std::move(entry));
    }
    if (k > 0) {
        const double rho_pair = rho_pairs_total / static_cast<double>(k);
        for (const PairScreen* p : order) {
            PlanEntry entry;
            entry.clique = Clique::of({p->i, p->j}, data.domain());
            entry.marginal =
                measure_noisy(compute_marginal(data, entry.clique), rho_pair, ledger, rng);
            entry.rho = rho_pair;
            plan.entries.push_back(std::move(entry));
        }
    }
    return plan;
}

double score_candidate(const Clique& candidate, const Marginal& exact,
                       const Marginal& synthetic_estimate, double sigma_next) {
    if (!(exact.clique == candidate) || !(synthetic_estimate.clique == candidate))
        throw ConfigError("candidate score: clique mismatch");
    if (exact.counts.size() != synthetic_estimate.counts.size())
        throw ConfigError("candidate score: cell count mismatch");
    double gap = 0.0;
    for (std::size_t c = 0; c < exact.counts.size(); ++c)
        gap += std::abs(exact.counts[c] - synthetic_estimate.counts[c]);
    return gap - expected_l1_noise(candidate.cell_count, sigma_next);
}

void AdaptivePolicy::validate() const {
    if (rounds < 1) throw ConfigError("adaptive policy: need at least one round");
    if (!(init_share > 0.0) || !(init_share < 1.0))
        throw ConfigError("adaptive policy: init share must lie in (0,1)");
    if (!(em_share > 0.0) || !(em_share < 1.0))
        throw ConfigError("adaptive policy: choice share must lie in (0,1)");
}

SelectionPlan adaptive_select(const Dataset& data, double total_rho,
                              const AdaptivePolicy& policy, const SynthesizerHook& hook,
                              BudgetLedger& ledger, Rng& rng) {
    policy.validate();
    const std::size_t d = data.d();
    if (d < 2) throw ConfigError("adaptive selection: need at least two attributes");
    if (!(total_rho > 0.0)) throw ConfigError("adaptive selection: budget must be positive");
    if (!hook) throw ConfigError("adaptive selection: missing synthesizer hook");
    if (!data.fully_encoded()) throw DataError("adaptive selection: dataset must be encoded");

    SelectionPlan plan;
    plan.strategy = SelectionStrategy::Adaptive;

    const double rho_init = policy.init_share * total_rho;
    const double rho_one = rho_init / static_cast<double>(d);
    for (std::size_t a = 0; a < d; ++a) {
        PlanEntry entry;
        entry.clique = Clique::of({a}, data.domain());
        entry.marginal =
            measure_noisy(compute_marginal(data, entry.clique), rho_one, ledger, rng);
        entry.rho = rho_one;
        plan.entries.push_back(std::move(entry));
    }

    std::vector<Clique> candidates;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j) {
            Clique c = Clique::of({i, j}, data.domain());
            if (c.cell_count <= kDefaultMarginalCellCap) candidates.push_back(std::move(c));
        }
    if (policy.include_3way) {
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = i + 1; j < d; ++j)
                for (std::size_t l = j + 1; l < d; ++l) {
                    Clique c = Clique::of({i, j, l}, data.domain());
                    if (c.cell_count <= kDefaultMarginalCellCap)
                        candidates.push_back(std::move(c));
                }
    }
    if (candidates.empty()) throw ConfigError("adaptive selection: no feasible candidates");

    const double rho_round = (total_rho - rho_init) / static_cast<double>(policy.rounds);
    const double rho_em = policy.em_share * rho_round;
    const double rho_meas = rho_round - rho_em;
    const double epsilon_em = std::sqrt(8.0 * rho_em);
    const double sigma_next = sigma_for_rho(rho_meas, 1.0).sigma;

    for (int round = 1; round <= policy.rounds; ++round) {
        Rng hook_rng = rng.substream("estimate round " + std::to_string(round));
        std::unique_ptr<RoundEstimator> estimator = hook(plan, hook_rng);
        if (!estimator) throw ConfigError("adaptive selection: hook produced no estimator");

        std::vector<double> scores(candidates.size());
        for (std::size_t c = 0; c < candidates.size(); ++c) {
            Marginal exact = compute_marginal(data, candidates[c]);
            Marginal estimate = estimator->estimate(candidates[c]);
            if (!(estimate.clique == candidates[c]))
                throw ConfigError("adaptive selection: hook estimated the wrong clique");
            double est_sum = estimate.sum();
            if (est_sum > 0.0) {
                double scale = exact.sum() / est_sum;
                for (double& v : estimate.counts) v *= scale;
            } else {
                double fill = exact.sum() / static_cast<double>(estimate.counts.size());
                std::fill(estimate.counts.begin(), estimate.counts.end(), fill);
            }
            scores[c] = score_candidate(candidates[c], exact, estimate, sigma_next);
        }

        // Raw count-scale scores have add/remove-one sensitivity 1: a record
        // shifts one cell of the exact marginal while the estimate is fixed.
        std::size_t chosen = exponential_select(scores, epsilon_em, 1.0, rng);
        ledger.spend(exponential_select_rho_cost(epsilon_em),
                     "round " + std::to_string(round) + " choice");
        plan.rho_overhead += exponential_select_rho_cost(epsilon_em);

        PlanEntry entry;
        entry.clique = candidates[chosen];
        entry.marginal =
            measure_noisy(compute_marginal(data, entry.clique), rho_meas, ledger, rng);
        entry.rho = rho_meas;
        plan.entries.push_back(std::move(entry));

        RoundRecord record;
        record.round = round;
        record.candidate_count = candidates.size();
        record.best_score = *std::max_element(scores.begin(), scores.end());
        record.chosen_score = scores[chosen];
        record.chosen = candidates[chosen].to_string();
        plan.rounds.push_back(std::move(record));
    }
    return plan;
}

}  // namespace dpsynth
