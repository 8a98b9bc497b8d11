#include "dpsynth/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "json.hpp"

namespace dpsynth {

namespace {

constexpr std::int64_t kMaxJointCells = 1000000;
constexpr double kProbTolerance = 1e-9;
constexpr double kInequalitySlack = 1e-9;

double checked_sum(const std::vector<double>& p, const char* what) {
    double total = 0.0;
    for (double v : p) {
        if (!(v >= 0.0)) throw ConfigError(std::string(what) + ": negative probability");
        total += v;
    }
    if (std::abs(total - 1.0) > kProbTolerance)
        throw ConfigError(std::string(what) + ": probabilities sum to " + std::to_string(total));
    return total;
}

}  // namespace

std::int64_t JointDistribution::cells() const {
    std::int64_t c = 1;
    for (std::int64_t s : sizes) c *= s;
    return c;
}

void JointDistribution::validate() const {
    if (sizes.empty()) throw ConfigError("joint distribution: no attributes");
    std::int64_t c = 1;
    for (std::int64_t s : sizes) {
        if (s < 1) throw ConfigError("joint distribution: attribute size must be positive");
        c *= s;
        if (c > kMaxJointCells) throw ConfigError("joint distribution: cell count exceeds 1e6");
    }
    if (static_cast<std::int64_t>(probs.size()) != c)
        throw ConfigError("joint distribution: cell count mismatch");
    checked_sum(probs, "joint distribution");
}

std::vector<double> JointDistribution::marginal(const std::vector<std::size_t>& attrs) const {
    std::vector<std::int64_t> strides(sizes.size(), 1);
    for (std::size_t k = sizes.size(); k-- > 1;) strides[k - 1] = strides[k] * sizes[k];

    std::int64_t out_cells = 1;
    for (std::size_t a : attrs) {
        if (a >= sizes.size()) throw ConfigError("marginal: attribute index out of range");
        out_cells *= sizes[a];
    }
    std::vector<double> out(static_cast<std::size_t>(out_cells), 0.0);
    for (std::size_t cell = 0; cell < probs.size(); ++cell) {
        std::int64_t key = 0;
        for (std::size_t a : attrs) {
            std::int64_t code = (static_cast<std::int64_t>(cell) / strides[a]) % sizes[a];
            key = key * sizes[a] + code;
        }
        out[static_cast<std::size_t>(key)] += probs[cell];
    }
    return out;
}

JointDistribution JointDistribution::random(const std::vector<std::int64_t>& sizes, Rng& rng) {
    JointDistribution joint;
    joint.sizes = sizes;
    std::int64_t c = 1;
    for (std::int64_t s : sizes) {
        if (s < 1) throw ConfigError("random joint: attribute size must be positive");
        c *= s;
        if (c > kMaxJointCells) throw ConfigError("random joint: cell count exceeds 1e6");
    }
    joint.probs.resize(static_cast<std::size_t>(c));
    double total = 0.0;
    for (double& v : joint.probs) {
        v = -std::log(rng.uniform_open());
        total += v;
    }
    for (double& v : joint.probs) v /= total;
    return joint;
}

double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw ConfigError("kl divergence: length mismatch");
    checked_sum(p, "kl divergence (first argument)");
    checked_sum(q, "kl divergence (second argument)");
    double total = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (p[k] == 0.0) continue;
        if (q[k] == 0.0) return std::numeric_limits<double>::infinity();
        total += p[k] * std::log(p[k] / q[k]);
    }
    return total;
}

double entropy(const std::vector<double>& p) {
    double total = 0.0;
    for (double v : p) {
        if (v > 0.0) total -= v * std::log(v);
    }
    return total;
}

namespace {

// Dense accumulation of Pr[z], Pr[z, a_i] and Pr[z, a_j] with z row-major over
// the conditioning attributes in their given order.
struct ConditioningTables {
    std::int64_t z_cells = 1;
    std::int64_t si = 0;
    std::int64_t sj = 0;
    std::vector<double> pz;
    std::vector<double> pza;
    std::vector<double> pzb;
    std::vector<double> pzab;
};

ConditioningTables accumulate_tables(const JointDistribution& joint, std::size_t i,
                                     std::size_t j,
                                     const std::vector<std::size_t>& conditioning,
                                     bool want_triple) {
    joint.validate();
    if (i >= joint.sizes.size() || j >= joint.sizes.size())
        throw ConfigError("conditional estimate: attribute index out of range");
    if (i == j) throw ConfigError("conditional estimate: attributes must differ");
    std::set<std::size_t> seen{i, j};
    for (std::size_t z : conditioning) {
        if (z >= joint.sizes.size())
            throw ConfigError("conditional estimate: conditioning index out of range");
        if (!seen.insert(z).second)
            throw ConfigError("conditional estimate: overlapping attribute indices");
    }

    ConditioningTables t;
    t.si = joint.sizes[i];
    t.sj = joint.sizes[j];
    for (std::size_t z : conditioning) t.z_cells *= joint.sizes[z];
    t.pz.assign(static_cast<std::size_t>(t.z_cells), 0.0);
    t.pza.assign(static_cast<std::size_t>(t.z_cells * t.si), 0.0);
    t.pzb.assign(static_cast<std::size_t>(t.z_cells * t.sj), 0.0);
    if (want_triple) t.pzab.assign(static_cast<std::size_t>(t.z_cells * t.si * t.sj), 0.0);

    std::vector<std::int64_t> strides(joint.sizes.size(), 1);
    for (std::size_t k = joint.sizes.size(); k-- > 1;)
        strides[k - 1] = strides[k] * joint.sizes[k];

    for (std::size_t cell = 0; cell < joint.probs.size(); ++cell) {
        double pv = joint.probs[cell];
        std::int64_t zkey = 0;
        for (std::size_t z : conditioning) {
            std::int64_t code = (static_cast<std::int64_t>(cell) / strides[z]) % joint.sizes[z];
            zkey = zkey * joint.sizes[z] + code;
        }
        std::int64_t a = (static_cast<std::int64_t>(cell) / strides[i]) % t.si;
        std::int64_t b = (static_cast<std::int64_t>(cell) / strides[j]) % t.sj;
        t.pz[static_cast<std::size_t>(zkey)] += pv;
        t.pza[static_cast<std::size_t>(zkey * t.si + a)] += pv;
        t.pzb[static_cast<std::size_t>(zkey * t.sj + b)] += pv;
        if (want_triple)
            t.pzab[static_cast<std::size_t>((zkey * t.si + a) * t.sj + b)] += pv;
    }
    return t;
}

}  // namespace

std::vector<double> conditional_estimate(const JointDistribution& joint, std::size_t i,
                                         std::size_t j,
                                         const std::vector<std::size_t>& conditioning) {
    ConditioningTables t = accumulate_tables(joint, i, j, conditioning, false);
    std::vector<double> out(static_cast<std::size_t>(t.si * t.sj), 0.0);
    for (std::int64_t z = 0; z < t.z_cells; ++z) {
        double pz = t.pz[static_cast<std::size_t>(z)];
        if (pz == 0.0) continue;
        for (std::int64_t a = 0; a < t.si; ++a) {
            double pa = t.pza[static_cast<std::size_t>(z * t.si + a)] / pz;
            if (pa == 0.0) continue;
            for (std::int64_t b = 0; b < t.sj; ++b) {
                double pb = t.pzb[static_cast<std::size_t>(z * t.sj + b)] / pz;
                out[static_cast<std::size_t>(a * t.sj + b)] += pz * pa * pb;
            }
        }
    }
    return out;
}

double mutual_information(const JointDistribution& joint, std::size_t i, std::size_t j) {
    std::vector<double> pij = joint.marginal({i, j});
    std::vector<double> pi = joint.marginal({i});
    std::vector<double> pj = joint.marginal({j});
    double total = 0.0;
    for (std::size_t a = 0; a < pi.size(); ++a) {
        for (std::size_t b = 0; b < pj.size(); ++b) {
            double pab = pij[a * pj.size() + b];
            if (pab <= 0.0) continue;
            total += pab * std::log(pab / (pi[a] * pj[b]));
        }
    }
    return total;
}

double conditional_mutual_information(const JointDistribution& joint, std::size_t i,
                                      std::size_t j,
                                      const std::vector<std::size_t>& conditioning) {
    ConditioningTables t = accumulate_tables(joint, i, j, conditioning, true);
    double total = 0.0;
    for (std::int64_t z = 0; z < t.z_cells; ++z) {
        double pz = t.pz[static_cast<std::size_t>(z)];
        if (pz == 0.0) continue;
        for (std::int64_t a = 0; a < t.si; ++a) {
            double pa = t.pza[static_cast<std::size_t>(z * t.si + a)];
            if (pa == 0.0) continue;
            for (std::int64_t b = 0; b < t.sj; ++b) {
                double pb = t.pzb[static_cast<std::size_t>(z * t.sj + b)];
                double pab = t.pzab[static_cast<std::size_t>((z * t.si + a) * t.sj + b)];
                if (pab <= 0.0 || pb == 0.0) continue;
                total += pab * std::log(pz * pab / (pa * pb));
            }
        }
    }
    return total;
}

LemmaCheck check_lemma_convexity(const std::vector<double>& weights,
                                 const std::vector<std::vector<double>>& p1,
                                 const std::vector<std::vector<double>>& p2,
                                 const KlFn& kl) {
    const KlFn& divergence = kl ? kl : KlFn(kl_divergence);
    if (p1.size() != weights.size() || p2.size() != weights.size())
        throw ConfigError("convexity check: component count mismatch");
    if (weights.empty()) throw ConfigError("convexity check: empty mixture");
    checked_sum(weights, "convexity check (weights)");
    std::size_t support = p1.front().size();
    for (const auto& row : p1)
        if (row.size() != support) throw ConfigError("convexity check: support mismatch");
    for (const auto& row : p2)
        if (row.size() != support) throw ConfigError("convexity check: support mismatch");

    std::vector<double> mix1(support, 0.0);
    std::vector<double> mix2(support, 0.0);
    LemmaCheck result;
    for (std::size_t x = 0; x < weights.size(); ++x) {
        for (std::size_t k = 0; k < support; ++k) {
            mix1[k] += weights[x] * p1[x][k];
            mix2[k] += weights[x] * p2[x][k];
        }
        result.rhs += weights[x] * divergence(p1[x], p2[x]);
    }
    result.lhs = divergence(mix1, mix2);
    result.holds = result.lhs <= result.rhs + kInequalitySlack;
    return result;
}

TheoremCheck check_theorem_adaptive(const JointDistribution& joint, std::size_t i,
                                    std::size_t j,
                                    const std::vector<std::size_t>& conditioning,
                                    const KlFn& kl) {
    const KlFn& divergence = kl ? kl : KlFn(kl_divergence);
    TheoremCheck result;
    std::vector<double> pij = joint.marginal({i, j});
    std::vector<double> estimate = conditional_estimate(joint, i, j, conditioning);
    result.lhs = divergence(pij, estimate);
    result.mid = conditional_mutual_information(joint, i, j, conditioning);
    result.rhs = mutual_information(joint, i, j);
    result.chain_holds = result.lhs <= result.mid + kInequalitySlack;
    result.final_holds = result.lhs <= result.rhs + kInequalitySlack;
    return result;
}

TheoryBatteryReport run_theory_battery(const TheoryBatteryOptions& options, const KlFn& kl) {
    if (options.lemma_instances < 0 || options.theorem_instances < 0)
        throw ConfigError("theory battery: negative instance count");
    TheoryBatteryReport report;
    report.seed = options.seed;
    Rng root(options.seed);

    for (int idx = 0; idx < options.lemma_instances; ++idx) {
        Rng rng = root.substream("lemma:" + std::to_string(idx));
        std::size_t components = 2 + rng.uniform_int(3);
        std::size_t support = 2 + rng.uniform_int(7);
        auto draw_simplex = [&rng](std::size_t k) {
            std::vector<double> v(k);
            double total = 0.0;
            for (double& x : v) {
                x = -std::log(rng.uniform_open());
                total += x;
            }
            for (double& x : v) x /= total;
            return v;
        };
        std::vector<double> weights = draw_simplex(components);
        std::vector<std::vector<double>> p1(components), p2(components);
        for (std::size_t x = 0; x < components; ++x) {
            p1[x] = draw_simplex(support);
            p2[x] = draw_simplex(support);
        }
        LemmaCheck check = check_lemma_convexity(weights, p1, p2, kl);
        ++report.lemma_total;
        if (check.holds) {
            ++report.lemma_holds;
        } else {
            report.chain_violations.push_back(
                {"lemma", rng.seed(), check.lhs, check.rhs});
        }
    }

    for (int idx = 0; idx < options.theorem_instances; ++idx) {
        Rng rng = root.substream("theorem:" + std::to_string(idx));
        std::int64_t side = (idx % 2 == 0) ? 2 : 3;
        JointDistribution joint = JointDistribution::random({side, side, side}, rng);
        TheoremCheck check = check_theorem_adaptive(joint, 0, 1, {2}, kl);
        ++report.theorem_total;
        if (check.chain_holds) {
            ++report.chain_holds;
        } else {
            report.chain_violations.push_back(
                {"theorem-chain", rng.seed(), check.lhs, check.mid});
        }
        if (check.final_holds) {
            ++report.final_holds;
        } else {
            report.final_violations.push_back(
                {"theorem-final", rng.seed(), check.lhs, check.rhs});
        }
    }
    return report;
}

std::string TheoryBatteryReport::to_json() const {
    nlohmann::json doc;
    doc["seed"] = seed;
    doc["lemma"] = {{"total", lemma_total}, {"holds", lemma_holds}};
    doc["theorem"] = {{"total", theorem_total},
                      {"chain_holds", chain_holds},
                      {"final_holds", final_holds}};
    doc["ok"] = ok();
    auto dump = [](const std::vector<TheoryViolation>& violations) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& v : violations) {
            arr.push_back({{"kind", v.kind},
                           {"instance_seed", v.instance_seed},
                           {"lhs", v.lhs},
                           {"bound", v.bound}});
        }
        return arr;
    };
    doc["chain_violations"] = dump(chain_violations);
    doc["final_violations"] = dump(final_violations);
    return doc.dump(2);
}

}  // namespace dpsynth
