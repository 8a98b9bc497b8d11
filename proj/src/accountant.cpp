#include "dpsynth/accountant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace dpsynth {

BudgetLedger::BudgetLedger(double rho_total) : rho_total_(rho_total) {
    if (!(rho_total >= 0.0)) throw BudgetError("total rho budget must be nonnegative");
}

void BudgetLedger::spend(double rho_cost, const std::string& label) {
    if (!(rho_cost >= 0.0)) throw BudgetError("negative rho spend for '" + label + "'");
    if (rho_spent_ + rho_cost > rho_total_ + 1e-12) {
        std::ostringstream ss;
        ss << "budget overdraft at '" << label << "': spent " << rho_spent_ << " + cost "
           << rho_cost << " exceeds total " << rho_total_;
        throw BudgetError(ss.str());
    }
    spends_.push_back({label, rho_cost});
    rho_spent_ += rho_cost;
}

std::string BudgetLedger::report(double delta) const {
    std::ostringstream ss;
    ss.precision(6);
    double cum = 0.0;
    ss << "rho_total=" << rho_total_ << " delta=" << delta << "\n";
    for (const auto& s : spends_) {
        cum += s.rho_cost;
        ss << "  " << s.label << ": rho=" << s.rho_cost << " cumulative=" << cum
           << " epsilon=" << (cum > 0 ? rho_to_epsilon(cum, delta) : 0.0) << "\n";
    }
    return ss.str();
}

NoiseScale sigma_for_rho(double rho, double sensitivity) {
    if (!(rho > 0.0)) throw BudgetError("sigma_for_rho: rho must be positive");
    if (!(sensitivity > 0.0)) throw BudgetError("sigma_for_rho: sensitivity must be positive");
    return {sensitivity * std::sqrt(1.0 / (2.0 * rho)), sensitivity};
}

namespace {

double alpha_objective(double alpha, double rho, double log_inv_delta) {
    return alpha * rho + log_inv_delta / (alpha - 1.0);
}

}  // namespace

double rho_to_epsilon(double rho, double delta) {
    if (!(rho > 0.0)) throw BudgetError("rho_to_epsilon: rho must be positive");
    if (!(delta > 0.0 && delta < 1.0)) throw BudgetError("rho_to_epsilon: delta must be in (0,1)");
    const double L = std::log(1.0 / delta);

    // Dense log-spaced grid over alpha - 1 in [1e-3, 1e3].
    const int kGrid = 10000;
    const double lo = std::log(1e-3), hi = std::log(1e3);
    double best = std::numeric_limits<double>::infinity();
    double best_t = lo;
    for (int i = 0; i < kGrid; ++i) {
        const double t = lo + (hi - lo) * double(i) / double(kGrid - 1);
        const double val = alpha_objective(1.0 + std::exp(t), rho, L);
        if (val < best) {
            best = val;
            best_t = t;
        }
    }

    // Golden-section refinement around the grid minimum. In t = ln(alpha-1)
    // the objective is rho + rho*e^t + L*e^{-t}, strictly convex, so when the
    // grid minimum sits on an edge the bracket expands until the true minimum
    // is interior (derivative changes sign inside).
    const double step = (hi - lo) / double(kGrid - 1);
    double a = best_t - 2.0 * step, b = best_t + 2.0 * step;
    auto slope = [&](double t) { return rho * std::exp(t) - L * std::exp(-t); };
    double w = 1.0;
    while (slope(a) > 0.0) {
        a -= w;
        w *= 2.0;
    }
    w = 1.0;
    while (slope(b) < 0.0) {
        b += w;
        w *= 2.0;
    }
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = alpha_objective(1.0 + std::exp(x1), rho, L);
    double f2 = alpha_objective(1.0 + std::exp(x2), rho, L);
    for (int it = 0; it < 200; ++it) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = alpha_objective(1.0 + std::exp(x1), rho, L);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = alpha_objective(1.0 + std::exp(x2), rho, L);
        }
    }
    return std::min(best, std::min(f1, f2));
}

double epsilon_to_rho(double epsilon, double delta) {
    if (!(epsilon > 0.0)) throw BudgetError("epsilon_to_rho: epsilon must be positive");
    if (!(delta > 0.0 && delta < 1.0)) throw BudgetError("epsilon_to_rho: delta must be in (0,1)");

    // rho_to_epsilon is strictly increasing in rho, so bisect. Seed the upper
    // bracket from the closed-form inverse and widen if needed.
    const double L = std::log(1.0 / delta);
    const double guess = std::pow(std::sqrt(L + epsilon) - std::sqrt(L), 2.0);
    double lo = 0.0, hi = std::max(guess * 2.0, 1e-12);
    while (rho_to_epsilon(hi, delta) < epsilon) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        if (rho_to_epsilon(mid, delta) <= epsilon)
            lo = mid;
        else
            hi = mid;
        if (lo > 0.0 && epsilon - rho_to_epsilon(lo, delta) <= 1e-7 * epsilon) break;
    }
    if (lo <= 0.0) lo = hi * 0.5;
    return lo;
}

std::vector<double> gaussian_perturb(const std::vector<double>& values, const NoiseScale& scale,
                                     Rng& rng) {
    if (!(scale.sigma > 0.0)) throw BudgetError("gaussian_perturb: sigma must be positive");
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i] + rng.normal(scale.sigma);
    return out;
}

std::size_t exponential_select(const std::vector<double>& scores, double epsilon_em,
                               double sensitivity, Rng& rng) {
    if (scores.empty()) throw BudgetError("exponential_select: empty candidate set");
    if (!(epsilon_em > 0.0)) throw BudgetError("exponential_select: epsilon must be positive");
    if (!(sensitivity > 0.0))
        throw BudgetError("exponential_select: sensitivity must be positive");
    const double coef = epsilon_em / (2.0 * sensitivity);
    const double smax = *std::max_element(scores.begin(), scores.end());
    std::vector<double> weights(scores.size());
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        weights[i] = std::exp(coef * (scores[i] - smax));
        total += weights[i];
    }
    double u = rng.uniform() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        u -= weights[i];
        if (u <= 0.0) return i;
    }
    return weights.size() - 1;
}

double exponential_select_rho_cost(double epsilon_em) { return epsilon_em * epsilon_em / 8.0; }

std::size_t gumbel_select(const std::vector<double>& scores, double rho, std::uint64_t n,
                          Rng& rng) {
    if (scores.empty()) throw BudgetError("gumbel_select: empty candidate set");
    if (!(rho > 0.0)) throw BudgetError("gumbel_select: rho must be positive");
    if (n == 0) throw BudgetError("gumbel_select: n must be positive");
    const double scale = 1.0 / (double(n) * std::sqrt(2.0 * rho));
    std::size_t best = 0;
    double best_val = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double v = scores[i] + rng.gumbel(scale);
        if (v > best_val) {
            best_val = v;
            best = i;
        }
    }
    return best;
}

}  // namespace dpsynth
