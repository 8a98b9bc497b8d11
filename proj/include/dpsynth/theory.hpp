#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dpsynth/common.hpp"
#include "dpsynth/rng.hpp"

namespace dpsynth {

// Exact discrete joint distribution over a handful of attributes, stored
// row-major (first attribute varies slowest). Small by construction: every
// computation here is exact enumeration.
struct JointDistribution {
    std::vector<std::int64_t> sizes;
    std::vector<double> probs;

    std::int64_t cells() const;
    void validate() const;

    // Marginal over a subset of attribute positions, row-major in the given
    // order.
    std::vector<double> marginal(const std::vector<std::size_t>& attrs) const;

    // Full-support random instance: independent Exp(1) draws, normalized
    // (equivalently flat-Dirichlet).
    static JointDistribution random(const std::vector<std::int64_t>& sizes, Rng& rng);
};

// Natural-log KL divergence with 0*ln(0/q) = 0 and +infinity on support
// violations (p > 0 where q = 0).
double kl_divergence(const std::vector<double>& p, const std::vector<double>& q);

double entropy(const std::vector<double>& p);

// Pairwise estimate through a conditioning set:
// sum_z Pr[z] * Pr[A_i | z] * Pr[A_j | z], returned over (A_i, A_j) with i
// varying slowest. An empty conditioning set gives the product of marginals.
std::vector<double> conditional_estimate(const JointDistribution& joint, std::size_t i,
                                         std::size_t j,
                                         const std::vector<std::size_t>& conditioning);

double mutual_information(const JointDistribution& joint, std::size_t i, std::size_t j);
double conditional_mutual_information(const JointDistribution& joint, std::size_t i,
                                      std::size_t j,
                                      const std::vector<std::size_t>& conditioning);

using KlFn = std::function<double(const std::vector<double>&, const std::vector<double>&)>;

// Mixture-convexity inequality of KL: with mixing weights p(x),
// D(sum_x p(x) P1(.|x) || sum_x p(x) P2(.|x)) <= sum_x p(x) D(P1(.|x) || P2(.|x)).
struct LemmaCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = false;
};
LemmaCheck check_lemma_convexity(const std::vector<double>& weights,
                                 const std::vector<std::vector<double>>& p1,
                                 const std::vector<std::vector<double>>& p2,
                                 const KlFn& kl = {});

// The estimate-quality chain for a pair (A_i, A_j) estimated through a
// conditioning set: lhs = D(P_ij || estimate), mid = I(A_i; A_j | cond),
// rhs = I(A_i; A_j). The lhs <= mid step is provable; lhs <= rhs is only
// reported because conditioning can increase mutual information.
struct TheoremCheck {
    double lhs = 0.0;
    double mid = 0.0;
    double rhs = 0.0;
    bool chain_holds = false;
    bool final_holds = false;
};
TheoremCheck check_theorem_adaptive(const JointDistribution& joint, std::size_t i,
                                    std::size_t j,
                                    const std::vector<std::size_t>& conditioning,
                                    const KlFn& kl = {});

struct TheoryBatteryOptions {
    int lemma_instances = 1000;
    int theorem_instances = 1000;
    std::uint64_t seed = 0;
};

struct TheoryViolation {
    std::string kind;
    std::uint64_t instance_seed = 0;
    double lhs = 0.0;
    double bound = 0.0;
};

struct TheoryBatteryReport {
    int lemma_total = 0;
    int lemma_holds = 0;
    int theorem_total = 0;
    int chain_holds = 0;
    int final_holds = 0;
    std::uint64_t seed = 0;
    std::vector<TheoryViolation> chain_violations;
    std::vector<TheoryViolation> final_violations;

    // Success means the provable parts held everywhere; the final-inequality
    // tally is informational.
    bool ok() const { return lemma_holds == lemma_total && chain_holds == theorem_total; }
    std::string to_json() const;
};

// Randomized battery over flat-Dirichlet instances. The kl argument exists so
// the harness can verify that a broken divergence is caught.
TheoryBatteryReport run_theory_battery(const TheoryBatteryOptions& options,
                                       const KlFn& kl = {});

}  // namespace dpsynth
