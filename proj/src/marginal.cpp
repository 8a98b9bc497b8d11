#include "dpsynth/marginal.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace dpsynth {

Clique Clique::of(std::vector<std::size_t> attrs, const Domain& domain) {
    std::sort(attrs.begin(), attrs.end());
    if (std::adjacent_find(attrs.begin(), attrs.end()) != attrs.end())
        throw ConfigError("clique must have distinct attributes");
    if (attrs.empty()) throw ConfigError("clique must be nonempty");
    Clique c;
    c.cell_count = 1;
    for (auto a : attrs) {
        if (a >= domain.attr_count())
            throw ConfigError("clique attribute index " + std::to_string(a) + " out of range");
        c.cell_count *= domain.size(a);
    }
    c.attrs = std::move(attrs);
    return c;
}

bool Clique::contains(std::size_t attr) const {
    return std::binary_search(attrs.begin(), attrs.end(), attr);
}

bool Clique::contains_all(const std::vector<std::size_t>& subset) const {
    return std::includes(attrs.begin(), attrs.end(), subset.begin(), subset.end());
}

std::string Clique::to_string() const {
    std::ostringstream ss;
    ss << "(";
    for (std::size_t i = 0; i < attrs.size(); ++i) {
        if (i) ss << ",";
        ss << attrs[i];
    }
    ss << ")";
    return ss.str();
}

std::vector<std::size_t> intersect_sorted(const std::vector<std::size_t>& a,
                                          const std::vector<std::size_t>& b) {
    std::vector<std::size_t> out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

double Marginal::sum() const { return std::accumulate(counts.begin(), counts.end(), 0.0); }

std::vector<std::int64_t> clique_strides(const Clique& clique, const Domain& domain) {
    std::vector<std::int64_t> strides(clique.attrs.size());
    std::int64_t s = 1;
    for (std::size_t k = clique.attrs.size(); k-- > 0;) {
        strides[k] = s;
        s *= domain.size(clique.attrs[k]);
    }
    return strides;
}

Marginal compute_marginal(const Dataset& data, const Clique& clique, std::int64_t cell_cap) {
    if (clique.cell_count > cell_cap)
        throw DataError("marginal over " + clique.to_string() + " has " +
                        std::to_string(clique.cell_count) + " cells, above the cap of " +
                        std::to_string(cell_cap));
    const auto strides = clique_strides(clique, data.domain());
    Marginal m;
    m.clique = clique;
    m.counts.assign(static_cast<std::size_t>(clique.cell_count), 0.0);

    std::vector<const std::vector<std::int32_t>*> cols;
    cols.reserve(clique.attrs.size());
    for (auto a : clique.attrs) cols.push_back(&data.codes(a));

    for (std::size_t row = 0; row < data.n(); ++row) {
        std::int64_t cell = 0;
        for (std::size_t k = 0; k < cols.size(); ++k)
            cell += strides[k] * (*cols[k])[row];
        m.counts[static_cast<std::size_t>(cell)] += 1.0;
    }
    return m;
}

std::vector<double> project_marginal(const Marginal& m, const std::vector<std::size_t>& subset,
                                     const Domain& domain) {
    if (!m.clique.contains_all(subset))
        throw ConfigError("projection target " + Clique{subset, 0}.to_string() +
                          " is not a subset of " + m.clique.to_string());
    const auto strides = clique_strides(m.clique, domain);

    std::int64_t out_cells = 1;
    for (auto a : subset) out_cells *= domain.size(a);
    std::vector<double> out(static_cast<std::size_t>(out_cells), 0.0);

    // Output stride for each clique position (0 for summed-out attributes).
    std::vector<std::int64_t> out_stride(m.clique.attrs.size(), 0);
    {
        std::int64_t s = 1;
        for (std::size_t k = subset.size(); k-- > 0;) {
            auto it = std::lower_bound(m.clique.attrs.begin(), m.clique.attrs.end(), subset[k]);
            out_stride[static_cast<std::size_t>(it - m.clique.attrs.begin())] = s;
            s *= domain.size(subset[k]);
        }
    }

    std::vector<std::int64_t> value(m.clique.attrs.size(), 0);
    for (std::size_t cell = 0; cell < m.counts.size(); ++cell) {
        std::int64_t out_cell = 0;
        for (std::size_t k = 0; k < value.size(); ++k) out_cell += out_stride[k] * value[k];
        out[static_cast<std::size_t>(out_cell)] += m.counts[cell];
        for (std::size_t k = value.size(); k-- > 0;) {
            if (++value[k] < domain.size(m.clique.attrs[k])) break;
            value[k] = 0;
        }
    }
    return out;
}

double indif(const Dataset& data, std::size_t i, std::size_t j) {
    if (i == j) throw ConfigError("indif: clique must have distinct attributes");
    if (data.n() == 0) throw DataError("indif: empty dataset");
    const Clique pair = Clique::of({i, j}, data.domain());
    const Marginal mij = compute_marginal(data, pair);
    const std::vector<double> mi = project_marginal(mij, {std::min(i, j)}, data.domain());
    const std::vector<double> mj = project_marginal(mij, {std::max(i, j)}, data.domain());
    const double n = static_cast<double>(data.n());
    double total = 0.0;
    std::size_t cell = 0;
    for (double a : mi)
        for (double b : mj) total += std::abs(mij.counts[cell++] - a * b / n);
    return total;
}

Marginal measure_noisy(const Marginal& exact, double rho_cost, BudgetLedger& ledger, Rng& rng) {
    if (exact.provenance != Provenance::Exact)
        throw DataError("measure_noisy: marginal over " + exact.clique.to_string() +
                        " was already measured");
    const NoiseScale scale = sigma_for_rho(rho_cost, 1.0);
    ledger.spend(rho_cost, "measure " + exact.clique.to_string());
    Marginal out;
    out.clique = exact.clique;
    out.counts = gaussian_perturb(exact.counts, scale, rng);
    out.provenance = Provenance::Noisy;
    out.sigma = scale.sigma;
    return out;
}

double expected_l1_noise(std::int64_t cell_count, double sigma) {
    return static_cast<double>(cell_count) * sigma * std::sqrt(2.0 / 3.14159265358979323846);
}

namespace {

// Distinct nonempty pairwise clique intersections, largest first then
// lexicographic, with the marginals containing each subset.
struct SharedSubset {
    std::vector<std::size_t> attrs;
    std::vector<std::size_t> members;
};

std::vector<SharedSubset> shared_subsets(const std::vector<Marginal>& marginals) {
    std::map<std::vector<std::size_t>, bool> seen;
    for (std::size_t a = 0; a < marginals.size(); ++a) {
        for (std::size_t b = a + 1; b < marginals.size(); ++b) {
            auto s = intersect_sorted(marginals[a].clique.attrs, marginals[b].clique.attrs);
            if (!s.empty()) seen[std::move(s)] = true;
        }
    }
    std::vector<SharedSubset> out;
    for (auto& [attrs, _] : seen) {
        SharedSubset s;
        s.attrs = attrs;
        for (std::size_t m = 0; m < marginals.size(); ++m)
            if (marginals[m].clique.contains_all(attrs)) s.members.push_back(m);
        if (s.members.size() >= 2) out.push_back(std::move(s));
    }
    std::stable_sort(out.begin(), out.end(), [](const SharedSubset& x, const SharedSubset& y) {
        if (x.attrs.size() != y.attrs.size()) return x.attrs.size() > y.attrs.size();
        return x.attrs < y.attrs;
    });
    return out;
}

double subset_gap(const std::vector<Marginal>& marginals, const SharedSubset& s,
                  const Domain& domain) {
    std::vector<std::vector<double>> projections;
    for (auto m : s.members)
        projections.push_back(project_marginal(marginals[m], s.attrs, domain));
    double gap = 0.0;
    for (std::size_t a = 0; a < projections.size(); ++a)
        for (std::size_t b = a + 1; b < projections.size(); ++b)
            for (std::size_t c = 0; c < projections[a].size(); ++c)
                gap = std::max(gap, std::abs(projections[a][c] - projections[b][c]));
    return gap;
}

}  // namespace

double max_projection_gap(const std::vector<Marginal>& marginals, const Domain& domain) {
    double gap = 0.0;
    for (const auto& s : shared_subsets(marginals))
        gap = std::max(gap, subset_gap(marginals, s, domain));
    return gap;
}

std::vector<Marginal> make_consistent(std::vector<Marginal> marginals, double n_target,
                                      const Domain& domain) {
    if (marginals.empty()) return marginals;
    if (!(n_target > 0.0)) throw ConfigError("make_consistent: n_target must be positive");
    const auto subsets = shared_subsets(marginals);
    const double tol = 1e-6 * n_target;

    for (int round = 0; round < 501; ++round) {
        // Additive total fix.
        for (auto& m : marginals) {
            const double shift = (n_target - m.sum()) / static_cast<double>(m.counts.size());
            for (auto& c : m.counts) c += shift;
        }

        // Averaging on each shared subset, spread uniformly over the cells
        // that project onto each subset cell.
        for (const auto& s : subsets) {
            std::vector<std::vector<double>> projections;
            for (auto mi : s.members)
                projections.push_back(project_marginal(marginals[mi], s.attrs, domain));
            const std::size_t cells = projections[0].size();
            std::vector<double> avg(cells, 0.0);
            for (const auto& p : projections)
                for (std::size_t c = 0; c < cells; ++c) avg[c] += p[c];
            for (auto& v : avg) v /= static_cast<double>(projections.size());

            for (std::size_t k = 0; k < s.members.size(); ++k) {
                Marginal& m = marginals[s.members[k]];
                const double group =
                    static_cast<double>(m.counts.size()) / static_cast<double>(cells);
                // Per-cell additive correction toward the average.
                std::vector<double> delta(cells);
                for (std::size_t c = 0; c < cells; ++c)
                    delta[c] = (avg[c] - projections[k][c]) / group;

                const auto strides = clique_strides(m.clique, domain);
                std::vector<std::int64_t> out_stride(m.clique.attrs.size(), 0);
                std::int64_t sstride = 1;
                for (std::size_t q = s.attrs.size(); q-- > 0;) {
                    auto it = std::lower_bound(m.clique.attrs.begin(), m.clique.attrs.end(),
                                               s.attrs[q]);
                    out_stride[static_cast<std::size_t>(it - m.clique.attrs.begin())] = sstride;
                    sstride *= domain.size(s.attrs[q]);
                }
                std::vector<std::int64_t> value(m.clique.attrs.size(), 0);
                for (std::size_t cell = 0; cell < m.counts.size(); ++cell) {
                    std::int64_t sub = 0;
                    for (std::size_t q = 0; q < value.size(); ++q)
                        sub += out_stride[q] * value[q];
                    m.counts[cell] += delta[static_cast<std::size_t>(sub)];
                    for (std::size_t q = value.size(); q-- > 0;) {
                        if (++value[q] < domain.size(m.clique.attrs[q])) break;
                        value[q] = 0;
                    }
                }
            }
        }

        // Feasibility: clamp then rescale to the target total.
        for (auto& m : marginals) {
            for (auto& c : m.counts) c = std::max(c, 0.0);
            const double total = m.sum();
            if (total > 0.0) {
                const double f = n_target / total;
                for (auto& c : m.counts) c *= f;
            } else {
                const double u = n_target / static_cast<double>(m.counts.size());
                for (auto& c : m.counts) c = u;
            }
        }

        if (max_projection_gap(marginals, domain) <= tol) break;
    }
    return marginals;
}

std::string marginals_to_json(const std::vector<Marginal>& marginals) {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& m : marginals) {
        nlohmann::json node;
        node["attrs"] = m.clique.attrs;
        node["counts"] = m.counts;
        node["provenance"] = m.provenance == Provenance::Exact ? "exact" : "noisy";
        node["sigma"] = m.sigma;
        doc.push_back(std::move(node));
    }
    return doc.dump();
}

std::vector<Marginal> marginals_from_json(const std::string& text, const Domain& domain) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(std::string("marginal dump: invalid JSON: ") + e.what());
    }
    if (!doc.is_array()) throw DataError("marginal dump: expected an array");
    std::vector<Marginal> out;
    for (const auto& node : doc) {
        Marginal m;
        m.clique = Clique::of(node.at("attrs").get<std::vector<std::size_t>>(), domain);
        m.counts = node.at("counts").get<std::vector<double>>();
        if (static_cast<std::int64_t>(m.counts.size()) != m.clique.cell_count)
            throw DataError("marginal dump: count vector does not match clique " +
                            m.clique.to_string());
        m.provenance =
            node.at("provenance").get<std::string>() == "exact" ? Provenance::Exact
                                                                : Provenance::Noisy;
        m.sigma = node.at("sigma").get<double>();
        out.push_back(std::move(m));
    }
    return out;
}

}  // namespace dpsynth
