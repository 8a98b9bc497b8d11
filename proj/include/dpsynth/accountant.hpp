#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dpsynth/common.hpp"
#include "dpsynth/rng.hpp"

namespace dpsynth {

// Noise scale for the Gaussian mechanism. sigma is the standard deviation in
// the units of the perturbed statistic; sensitivity is the L2 sensitivity
// under add/remove-one neighboring datasets.
struct NoiseScale {
    double sigma = 0.0;
    double sensitivity = 0.0;
};

// Append-only zCDP budget ledger. All internal accounting happens in rho;
// (epsilon, delta) appears only at the configuration boundary.
class BudgetLedger {
public:
    struct Spend {
        std::string label;
        double rho_cost = 0.0;
    };

    explicit BudgetLedger(double rho_total);

    double rho_total() const { return rho_total_; }
    double rho_spent() const { return rho_spent_; }
    double rho_remaining() const { return rho_total_ - rho_spent_; }
    const std::vector<Spend>& spends() const { return spends_; }

    // Records a spend; throws BudgetError on overdraft (tolerance 1e-12).
    void spend(double rho_cost, const std::string& label);

    // Human-readable spend log: label, rho, cumulative rho, equivalent
    // epsilon at the given delta.
    std::string report(double delta) const;

private:
    double rho_total_;
    double rho_spent_ = 0.0;
    std::vector<Spend> spends_;
};

// sigma = sensitivity * sqrt(1/(2*rho)); Gaussian noise at this scale is
// (alpha, alpha*rho)-RDP for every alpha > 1.
NoiseScale sigma_for_rho(double rho, double sensitivity);

// epsilon(delta) = min over alpha > 1 of (alpha*rho + ln(1/delta)/(alpha-1)).
// Evaluated by dense-grid search plus golden-section refinement; agrees with
// the closed form rho + 2*sqrt(rho*ln(1/delta)) to 1e-9 relative.
double rho_to_epsilon(double rho, double delta);

// Inverse of rho_to_epsilon by bisection. The returned rho converts forward
// into [epsilon*(1 - 1e-6), epsilon].
double epsilon_to_rho(double epsilon, double delta);

// values[i] + N(0, sigma^2), i.i.d.
std::vector<double> gaussian_perturb(const std::vector<double>& values, const NoiseScale& scale,
                                     Rng& rng);

// Exponential mechanism: index i with probability proportional to
// exp(epsilon_em / (2*sensitivity) * scores[i]). The zCDP cost for the
// caller's ledger is epsilon_em^2 / 8.
std::size_t exponential_select(const std::vector<double>& scores, double epsilon_em,
                               double sensitivity, Rng& rng);
double exponential_select_rho_cost(double epsilon_em);

// Report-noisy-max with Gumbel noise of scale 1/(n*sqrt(2*rho)); cost rho.
// n is the normalization of the caller's scores (number of records when the
// scores are raw frequencies scaled by 1/n).
std::size_t gumbel_select(const std::vector<double>& scores, double rho, std::uint64_t n,
                          Rng& rng);

}  // namespace dpsynth
