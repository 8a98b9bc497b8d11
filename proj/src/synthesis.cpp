#include "dpsynth/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <utility>

namespace dpsynth {

void GumConfig::validate() const {
    if (max_iterations < 1) throw ConfigError("gum: need at least one iteration");
    if (!(alpha_step > 0.0) || alpha_step > 1.0)
        throw ConfigError("gum: step fraction must lie in (0,1]");
    if (!(tolerance >= 0.0)) throw ConfigError("gum: tolerance must be nonnegative");
}

void GaConfig::validate() const {
    if (generations < 0) throw ConfigError("ga: generations must be nonnegative");
    if (mutations < 1) throw ConfigError("ga: need at least one mutation per generation");
    if (crossovers < 1) throw ConfigError("ga: need at least one crossover per generation");
    if (elite < 1) throw ConfigError("ga: elite size must be positive");
}

SelectionPlan make_plan_consistent(SelectionPlan plan, double n_target, const Domain& domain) {
    std::vector<Marginal> marginals;
    marginals.reserve(plan.entries.size());
    for (PlanEntry& entry : plan.entries) marginals.push_back(std::move(entry.marginal));
    marginals = make_consistent(std::move(marginals), n_target, domain);
    for (std::size_t k = 0; k < plan.entries.size(); ++k)
        plan.entries[k].marginal = std::move(marginals[k]);
    return plan;
}

Dataset init_random_dataset(const Domain& domain, std::size_t n, Rng& rng) {
    if (n < 1) throw ConfigError("synthesis: need at least one row");
    Dataset data(domain);
    for (std::size_t j = 0; j < domain.attr_count(); ++j) {
        std::vector<std::int32_t> col(n);
        const std::uint64_t size = static_cast<std::uint64_t>(domain.size(j));
        for (std::int32_t& c : col) c = static_cast<std::int32_t>(rng.uniform_int(size));
        data.set_encoded_column(j, std::move(col));
    }
    return data;
}

namespace {

// One plan marginal reduced to what the update loops need.
struct TargetView {
    Clique clique;
    std::vector<double> target;
    std::vector<std::int64_t> strides;
};

std::vector<TargetView> plan_targets(const SelectionPlan& plan, const Domain& domain,
                                     double scale_hint, const char* who) {
    if (plan.entries.empty()) throw ConfigError(std::string(who) + ": empty plan");
    std::vector<TargetView> targets;
    targets.reserve(plan.entries.size());
    const double tolerance = 1e-6 * std::max(1.0, scale_hint);
    for (const PlanEntry& entry : plan.entries) {
        TargetView t;
        t.clique = entry.clique;
        t.target = entry.marginal.counts;
        if (static_cast<std::int64_t>(t.target.size()) != entry.clique.cell_count)
            throw ConfigError(std::string(who) + ": marginal size does not match its clique");
        for (double& v : t.target) {
            if (v < -tolerance)
                throw ConfigError(std::string(who) +
                                  ": plan has negative targets; run consistency first");
            if (v < 0.0) v = 0.0;
        }
        t.strides = clique_strides(entry.clique, domain);
        targets.push_back(std::move(t));
    }
    return targets;
}

std::int64_t row_cell(const Dataset& data, const TargetView& t, std::size_t row) {
    std::int64_t cell = 0;
    for (std::size_t k = 0; k < t.clique.attrs.size(); ++k)
        cell += static_cast<std::int64_t>(data.codes(t.clique.attrs[k])[row]) * t.strides[k];
    return cell;
}

std::vector<std::int64_t> marginal_counts(const Dataset& data, const TargetView& t) {
    std::vector<std::int64_t> counts(t.target.size(), 0);
    for (std::size_t row = 0; row < data.n(); ++row)
        ++counts[static_cast<std::size_t>(row_cell(data, t, row))];
    return counts;
}

double l1_error(const std::vector<std::int64_t>& counts, const std::vector<double>& target) {
    double total = 0.0;
    for (std::size_t c = 0; c < counts.size(); ++c)
        total += std::abs(static_cast<double>(counts[c]) - target[c]);
    return total;
}

double total_plan_error(const Dataset& data, const std::vector<TargetView>& targets) {
    double total = 0.0;
    for (const TargetView& t : targets) total += l1_error(marginal_counts(data, t), t.target);
    return total;
}

// Move records out of overfull cells into underfull ones, touching only the
// clique's attributes. The per-cell quotas keep every move a strict
// improvement, so this marginal's error cannot increase.
void gum_update_marginal(Dataset& data, const TargetView& t, double alpha,
                         const Domain& domain, Rng& rng) {
    std::vector<std::int64_t> counts = marginal_counts(data, t);
    const double before = l1_error(counts, t.target);

    std::map<std::int64_t, std::int64_t> moves_out;
    std::vector<std::pair<std::int64_t, std::int64_t>> capacity;
    for (std::size_t c = 0; c < counts.size(); ++c) {
        double diff = static_cast<double>(counts[c]) - t.target[c];
        if (diff > 0.0) {
            std::int64_t quota = std::min(static_cast<std::int64_t>(std::ceil(alpha * diff)),
                                          static_cast<std::int64_t>(std::floor(diff)));
            if (quota > 0) moves_out[static_cast<std::int64_t>(c)] = quota;
        } else if (diff < 0.0) {
            // Damp the receiving side by the same step fraction as the donors,
            // otherwise low-index cells soak up the whole pass budget.
            std::int64_t room =
                std::min(static_cast<std::int64_t>(std::ceil(alpha * -diff)),
                         static_cast<std::int64_t>(std::floor(-diff + 0.5)));
            if (room > 0) capacity.emplace_back(static_cast<std::int64_t>(c), room);
        }
    }
    if (moves_out.empty() || capacity.empty()) return;

    // Rows living in donor cells, listed in row order per cell.
    std::map<std::int64_t, std::vector<std::size_t>> donor_rows;
    for (std::size_t row = 0; row < data.n(); ++row) {
        std::int64_t cell = row_cell(data, t, row);
        if (moves_out.count(cell)) donor_rows[cell].push_back(row);
    }

    std::vector<std::size_t> donors;
    for (auto& [cell, rows] : donor_rows) {
        std::size_t quota = static_cast<std::size_t>(moves_out[cell]);
        for (std::size_t k = 0; k < quota && k < rows.size(); ++k) {
            std::size_t pick = k + rng.uniform_int(rows.size() - k);
            std::swap(rows[k], rows[pick]);
            donors.push_back(rows[k]);
        }
    }

    std::size_t next = 0;
    for (const auto& [cell, room] : capacity) {
        for (std::int64_t k = 0; k < room && next < donors.size(); ++k) {
            std::size_t row = donors[next++];
            for (std::size_t a = 0; a < t.clique.attrs.size(); ++a) {
                std::size_t attr = t.clique.attrs[a];
                std::int32_t code = static_cast<std::int32_t>(
                    (cell / t.strides[a]) % domain.size(attr));
                data.mutable_codes(attr)[row] = code;
            }
        }
        if (next >= donors.size()) break;
    }

    const double after = l1_error(marginal_counts(data, t), t.target);
    if (after > before + 1e-9)
        throw Error("gum: single-marginal update increased its own error");
}

}  // namespace

Dataset gum_synthesize(const SelectionPlan& plan, const Domain& domain, std::size_t n,
                       const GumConfig& config, Rng& rng) {
    config.validate();
    std::vector<TargetView> targets =
        plan_targets(plan, domain, static_cast<double>(n), "gum");

    Dataset data = init_random_dataset(domain, n, rng);
    double alpha = config.alpha_step;
    double before = total_plan_error(data, targets);

    for (int pass = 0; pass < config.max_iterations; ++pass) {
        std::vector<std::size_t> order(targets.size());
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t k = order.size(); k > 1; --k) {
            std::size_t pick = rng.uniform_int(k);
            std::swap(order[k - 1], order[pick]);
        }

        Dataset snapshot = data;
        for (std::size_t m : order) gum_update_marginal(data, targets[m], alpha, domain, rng);

        double after = total_plan_error(data, targets);
        if (after > before + 1e-9) {
            // Overlapping cliques can fight each other; back out and damp.
            data = std::move(snapshot);
            alpha *= 0.5;
            if (alpha < 1e-6) break;
            continue;
        }
        double improvement = before - after;
        before = after;
        if (improvement < config.tolerance) break;
    }
    return data;
}

namespace {

bool is_subset(const std::vector<std::size_t>& small, const std::vector<std::size_t>& big) {
    return std::includes(big.begin(), big.end(), small.begin(), small.end());
}

struct DisjointSet {
    std::vector<int> parent;

    explicit DisjointSet(std::size_t size) : parent(size) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    int find(int v) {
        while (parent[v] != v) v = parent[v] = parent[parent[v]];
        return v;
    }
    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent[std::max(a, b)] = std::min(a, b);
        return true;
    }
};

}  // namespace

JunctionTree build_junction_tree(const SelectionPlan& plan, const Domain& domain,
                                 std::int64_t cell_cap) {
    if (plan.entries.empty()) throw ConfigError("junction tree: empty plan");
    const std::size_t d = domain.attr_count();

    std::vector<char> present(d, 0);
    std::vector<std::set<std::size_t>> adj(d);
    for (const PlanEntry& entry : plan.entries) {
        const auto& attrs = entry.clique.attrs;
        for (std::size_t a : attrs) present[a] = 1;
        for (std::size_t x = 0; x < attrs.size(); ++x)
            for (std::size_t y = x + 1; y < attrs.size(); ++y) {
                adj[attrs[x]].insert(attrs[y]);
                adj[attrs[y]].insert(attrs[x]);
            }
    }

    // Min-fill elimination; the elimination cliques of the filled graph are
    // its (possibly non-maximal) cliques.
    std::vector<std::set<std::size_t>> work = adj;
    std::vector<char> eliminated(d, 0);
    std::vector<std::vector<std::size_t>> elim_cliques;
    std::size_t remaining = 0;
    for (std::size_t a = 0; a < d; ++a) remaining += present[a];
    while (remaining > 0) {
        std::size_t best = d;
        std::size_t best_fill = 0;
        for (std::size_t v = 0; v < d; ++v) {
            if (!present[v] || eliminated[v]) continue;
            std::vector<std::size_t> nb;
            for (std::size_t u : work[v])
                if (!eliminated[u]) nb.push_back(u);
            std::size_t fill = 0;
            for (std::size_t x = 0; x < nb.size(); ++x)
                for (std::size_t y = x + 1; y < nb.size(); ++y)
                    if (!work[nb[x]].count(nb[y])) ++fill;
            if (best == d || fill < best_fill) {
                best = v;
                best_fill = fill;
            }
        }
        std::vector<std::size_t> clique{best};
        for (std::size_t u : work[best])
            if (!eliminated[u]) clique.push_back(u);
        std::sort(clique.begin(), clique.end());
        for (std::size_t x = 0; x < clique.size(); ++x)
            for (std::size_t y = x + 1; y < clique.size(); ++y) {
                work[clique[x]].insert(clique[y]);
                work[clique[y]].insert(clique[x]);
            }
        elim_cliques.push_back(std::move(clique));
        eliminated[best] = 1;
        --remaining;
    }

    std::vector<std::vector<std::size_t>> maximal;
    for (std::size_t i = 0; i < elim_cliques.size(); ++i) {
        bool keep = true;
        for (std::size_t j = 0; j < elim_cliques.size() && keep; ++j) {
            if (i == j) continue;
            if (elim_cliques[i].size() < elim_cliques[j].size() &&
                is_subset(elim_cliques[i], elim_cliques[j]))
                keep = false;
            if (elim_cliques[i] == elim_cliques[j] && j < i) keep = false;
        }
        if (keep) maximal.push_back(elim_cliques[i]);
    }

    JunctionTree tree;
    for (const auto& attrs : maximal) {
        std::int64_t cells = 1;
        std::string names;
        for (std::size_t a : attrs) {
            cells *= domain.size(a);
            if (!names.empty()) names += ",";
            names += std::to_string(a);
            if (cells > cell_cap)
                throw ConfigError("junction tree: merged clique (" + names +
                                  ") exceeds the cell cap of " + std::to_string(cell_cap));
        }
        JunctionTree::Node node;
        node.clique = Clique::of(attrs, domain);
        tree.nodes.push_back(std::move(node));
    }

    // Maximum-separator spanning forest over the clique graph.
    struct Edge {
        std::size_t weight;
        int a;
        int b;
    };
    std::vector<Edge> edges;
    for (int i = 0; i < static_cast<int>(tree.nodes.size()); ++i)
        for (int j = i + 1; j < static_cast<int>(tree.nodes.size()); ++j) {
            std::size_t w =
                intersect_sorted(tree.nodes[i].clique.attrs, tree.nodes[j].clique.attrs).size();
            if (w > 0) edges.push_back({w, i, j});
        }
    std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
        if (x.weight != y.weight) return x.weight > y.weight;
        if (x.a != y.a) return x.a < y.a;
        return x.b < y.b;
    });
    DisjointSet components(tree.nodes.size());
    std::vector<std::vector<int>> neighbors(tree.nodes.size());
    for (const Edge& e : edges) {
        if (components.unite(e.a, e.b)) {
            neighbors[e.a].push_back(e.b);
            neighbors[e.b].push_back(e.a);
        }
    }

    // Orient each component from its lowest-index node, parents first.
    std::vector<char> visited(tree.nodes.size(), 0);
    for (int root = 0; root < static_cast<int>(tree.nodes.size()); ++root) {
        if (visited[root]) continue;
        visited[root] = 1;
        std::vector<int> queue{root};
        for (std::size_t head = 0; head < queue.size(); ++head) {
            int v = queue[head];
            tree.order.push_back(v);
            std::vector<int> next = neighbors[v];
            std::sort(next.begin(), next.end());
            for (int u : next) {
                if (visited[u]) continue;
                visited[u] = 1;
                tree.nodes[u].parent = v;
                tree.nodes[u].separator =
                    intersect_sorted(tree.nodes[u].clique.attrs, tree.nodes[v].clique.attrs);
                tree.nodes[v].children.push_back(u);
                queue.push_back(u);
            }
        }
    }

    for (std::size_t a = 0; a < d; ++a)
        if (!present[a]) tree.uncovered.push_back(a);

    // Sanity: every plan clique must sit inside some node, and for every
    // attribute the nodes holding it must form a connected subtree.
    for (const PlanEntry& entry : plan.entries) {
        bool housed = false;
        for (const JunctionTree::Node& node : tree.nodes)
            if (node.clique.contains_all(entry.clique.attrs)) {
                housed = true;
                break;
            }
        if (!housed)
            throw Error("junction tree: plan clique " + entry.clique.to_string() +
                        " not contained in any node");
    }
    for (std::size_t a = 0; a < d; ++a) {
        if (!present[a]) continue;
        int holders = 0;
        int linked = 0;
        for (const JunctionTree::Node& node : tree.nodes) {
            if (!node.clique.contains(a)) continue;
            ++holders;
            if (node.parent >= 0 && tree.nodes[node.parent].clique.contains(a)) ++linked;
        }
        if (linked != holders - 1)
            throw Error("junction tree: running intersection violated for attribute " +
                        std::to_string(a));
    }
    return tree;
}

namespace {

// Everything junction sampling needs per node, precomputed once.
struct SamplerNode {
    const JunctionTree::Node* node = nullptr;
    std::vector<std::int64_t> strides;
    std::vector<double> cdf;  // over all clique cells
    // Child bookkeeping: separator addressing and per-separator-cell CDFs.
    std::vector<std::int64_t> sep_strides;  // within the separator's own space
    std::int64_t sep_cells = 1;
    std::vector<std::vector<std::int64_t>> bucket_cells;
    std::vector<std::vector<double>> bucket_cdf;
};

std::vector<double> fit_node_distribution(const Clique& clique, const SelectionPlan& plan,
                                          const Domain& domain) {
    const std::size_t cells = static_cast<std::size_t>(clique.cell_count);
    std::vector<double> probs(cells, 1.0 / static_cast<double>(cells));

    struct Contained {
        std::vector<double> target;            // normalized to 1
        std::vector<std::int64_t> cell_map;    // clique cell -> marginal cell
        std::size_t size = 0;
    };
    std::vector<Contained> fits;
    std::vector<std::int64_t> strides = clique_strides(clique, domain);
    for (const PlanEntry& entry : plan.entries) {
        if (!clique.contains_all(entry.clique.attrs)) continue;
        Contained fit;
        fit.size = entry.marginal.counts.size();
        fit.target = entry.marginal.counts;
        double sum = 0.0;
        const double tol =
            1e-6 * std::max(1.0, std::abs(entry.marginal.sum()));
        for (double& v : fit.target) {
            if (v < -tol)
                throw ConfigError(
                    "junction sampling: negative marginal counts; make the plan "
                    "consistent first");
            if (v < 0.0) v = 0.0;
            sum += v;
        }
        if (sum <= 0.0) continue;
        for (double& v : fit.target) v /= sum;

        std::vector<std::int64_t> sub_strides = clique_strides(entry.clique, domain);
        fit.cell_map.resize(cells);
        for (std::size_t cell = 0; cell < cells; ++cell) {
            std::int64_t key = 0;
            for (std::size_t k = 0; k < entry.clique.attrs.size(); ++k) {
                std::size_t attr = entry.clique.attrs[k];
                std::size_t pos =
                    static_cast<std::size_t>(std::lower_bound(clique.attrs.begin(),
                                                              clique.attrs.end(), attr) -
                                             clique.attrs.begin());
                std::int64_t code =
                    (static_cast<std::int64_t>(cell) / strides[pos]) % domain.size(attr);
                key += code * sub_strides[k];
            }
            fit.cell_map[cell] = key;
        }
        fits.push_back(std::move(fit));
    }
    if (fits.empty()) return probs;

    for (int round = 0; round < 100; ++round) {
        for (const Contained& fit : fits) {
            std::vector<double> projection(fit.size, 0.0);
            for (std::size_t cell = 0; cell < cells; ++cell)
                projection[static_cast<std::size_t>(fit.cell_map[cell])] += probs[cell];
            std::vector<double> ratio(fit.size, 0.0);
            for (std::size_t m = 0; m < fit.size; ++m)
                ratio[m] = projection[m] > 0.0 ? fit.target[m] / projection[m] : 0.0;
            for (std::size_t cell = 0; cell < cells; ++cell)
                probs[cell] *= ratio[static_cast<std::size_t>(fit.cell_map[cell])];
        }
        double gap = 0.0;
        for (const Contained& fit : fits) {
            std::vector<double> projection(fit.size, 0.0);
            for (std::size_t cell = 0; cell < cells; ++cell)
                projection[static_cast<std::size_t>(fit.cell_map[cell])] += probs[cell];
            for (std::size_t m = 0; m < fit.size; ++m)
                gap = std::max(gap, std::abs(projection[m] - fit.target[m]));
        }
        if (gap <= 1e-6) break;
    }
    double total = 0.0;
    for (double v : probs) total += v;
    if (total > 0.0)
        for (double& v : probs) v /= total;
    return probs;
}

std::size_t draw_from_cdf(const std::vector<double>& cdf, Rng& rng) {
    double total = cdf.back();
    double u = rng.uniform() * total;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) --it;
    return static_cast<std::size_t>(it - cdf.begin());
}

}  // namespace

Dataset junction_sample(const SelectionPlan& plan, const Domain& domain, std::size_t n,
                        Rng& rng) {
    if (n < 1) throw ConfigError("junction sampling: need at least one row");
    JunctionTree tree = build_junction_tree(plan, domain);

    std::vector<SamplerNode> samplers(tree.nodes.size());
    for (std::size_t v = 0; v < tree.nodes.size(); ++v) {
        SamplerNode& s = samplers[v];
        s.node = &tree.nodes[v];
        s.strides = clique_strides(s.node->clique, domain);
        std::vector<double> probs = fit_node_distribution(s.node->clique, plan, domain);

        s.cdf.resize(probs.size());
        double run = 0.0;
        for (std::size_t c = 0; c < probs.size(); ++c) {
            run += probs[c];
            s.cdf[c] = run;
        }

        const auto& sep = s.node->separator;
        if (sep.empty()) continue;
        s.sep_strides.assign(sep.size(), 1);
        for (std::size_t k = sep.size(); k-- > 1;)
            s.sep_strides[k - 1] = s.sep_strides[k] * domain.size(sep[k]);
        s.sep_cells = s.sep_strides.front() * domain.size(sep.front());
        s.bucket_cells.assign(static_cast<std::size_t>(s.sep_cells), {});
        s.bucket_cdf.assign(static_cast<std::size_t>(s.sep_cells), {});
        for (std::size_t cell = 0; cell < probs.size(); ++cell) {
            std::int64_t key = 0;
            for (std::size_t k = 0; k < sep.size(); ++k) {
                std::size_t pos = static_cast<std::size_t>(
                    std::lower_bound(s.node->clique.attrs.begin(), s.node->clique.attrs.end(),
                                     sep[k]) -
                    s.node->clique.attrs.begin());
                std::int64_t code =
                    (static_cast<std::int64_t>(cell) / s.strides[pos]) % domain.size(sep[k]);
                key += code * s.sep_strides[k];
            }
            auto& bucket = s.bucket_cells[static_cast<std::size_t>(key)];
            auto& cdf = s.bucket_cdf[static_cast<std::size_t>(key)];
            bucket.push_back(static_cast<std::int64_t>(cell));
            cdf.push_back((cdf.empty() ? 0.0 : cdf.back()) + probs[cell]);
        }
    }

    // Uncovered attributes fall back to their own 1-way marginal if the plan
    // has one, else uniform.
    struct LooseAttr {
        std::size_t attr;
        std::vector<double> cdf;  // empty means uniform
    };
    std::vector<LooseAttr> loose;
    for (std::size_t a : tree.uncovered) {
        LooseAttr la;
        la.attr = a;
        for (const PlanEntry& entry : plan.entries) {
            if (entry.clique.attrs == std::vector<std::size_t>{a}) {
                double run = 0.0;
                for (double v : entry.marginal.counts) {
                    run += std::max(v, 0.0);
                    la.cdf.push_back(run);
                }
                if (run <= 0.0) la.cdf.clear();
                break;
            }
        }
        loose.push_back(std::move(la));
    }

    std::vector<std::vector<std::int32_t>> columns(domain.attr_count(),
                                                   std::vector<std::int32_t>(n));
    std::vector<std::int32_t> row(domain.attr_count(), 0);
    for (std::size_t r = 0; r < n; ++r) {
        for (int v : tree.order) {
            const SamplerNode& s = samplers[static_cast<std::size_t>(v)];
            const auto& attrs = s.node->clique.attrs;
            std::size_t cell;
            bool skip_separator = false;
            if (s.node->parent < 0) {
                cell = draw_from_cdf(s.cdf, rng);
            } else {
                std::int64_t key = 0;
                for (std::size_t k = 0; k < s.node->separator.size(); ++k)
                    key += static_cast<std::int64_t>(row[s.node->separator[k]]) *
                           s.sep_strides[k];
                const auto& cdf = s.bucket_cdf[static_cast<std::size_t>(key)];
                if (!cdf.empty() && cdf.back() > 0.0) {
                    std::size_t pick = draw_from_cdf(cdf, rng);
                    cell = static_cast<std::size_t>(
                        s.bucket_cells[static_cast<std::size_t>(key)][pick]);
                } else {
                    // Zero-mass separator assignment: draw unconditionally and
                    // keep the parent's separator values.
                    cell = draw_from_cdf(s.cdf, rng);
                    skip_separator = true;
                }
            }
            for (std::size_t k = 0; k < attrs.size(); ++k) {
                if (skip_separator &&
                    std::binary_search(s.node->separator.begin(), s.node->separator.end(),
                                       attrs[k]))
                    continue;
                row[attrs[k]] = static_cast<std::int32_t>(
                    (static_cast<std::int64_t>(cell) / s.strides[k]) % domain.size(attrs[k]));
            }
        }
        for (const LooseAttr& la : loose) {
            if (la.cdf.empty()) {
                row[la.attr] = static_cast<std::int32_t>(
                    rng.uniform_int(static_cast<std::uint64_t>(domain.size(la.attr))));
            } else {
                row[la.attr] = static_cast<std::int32_t>(draw_from_cdf(la.cdf, rng));
            }
        }
        for (std::size_t j = 0; j < domain.attr_count(); ++j) columns[j][r] = row[j];
    }

    Dataset data(domain);
    for (std::size_t j = 0; j < domain.attr_count(); ++j)
        data.set_encoded_column(j, std::move(columns[j]));
    return data;
}

Dataset gsd_synthesize(const SelectionPlan& plan, const Domain& domain, std::size_t n,
                       const GaConfig& config, Rng& rng) {
    config.validate();
    if (n < 1) throw ConfigError("ga: need at least one row");
    std::vector<TargetView> targets =
        plan_targets(plan, domain, static_cast<double>(n), "ga");

    struct Candidate {
        Dataset data;
        double fitness = 0.0;
    };
    auto evaluate = [&targets](const Dataset& data) { return total_plan_error(data, targets); };

    std::vector<Candidate> population;
    for (int e = 0; e < config.elite; ++e) {
        Candidate c{init_random_dataset(domain, n, rng), 0.0};
        c.fitness = evaluate(c.data);
        population.push_back(std::move(c));
    }
    auto by_fitness = [](const Candidate& a, const Candidate& b) {
        return a.fitness < b.fitness;
    };
    std::stable_sort(population.begin(), population.end(), by_fitness);

    const std::size_t d = domain.attr_count();
    for (int gen = 0; gen < config.generations; ++gen) {
        std::vector<Candidate> offspring;
        for (int m = 0; m < config.mutations; ++m) {
            const Candidate& parent =
                population[rng.uniform_int(static_cast<std::uint64_t>(config.elite))];
            Candidate child{parent.data, 0.0};
            std::size_t r = rng.uniform_int(n);
            std::size_t j = rng.uniform_int(d);
            child.data.mutable_codes(j)[r] = static_cast<std::int32_t>(
                rng.uniform_int(static_cast<std::uint64_t>(domain.size(j))));
            child.fitness = evaluate(child.data);
            offspring.push_back(std::move(child));
        }
        for (int c = 0; c < config.crossovers; ++c) {
            const Candidate& a =
                population[rng.uniform_int(static_cast<std::uint64_t>(config.elite))];
            const Candidate& b =
                population[rng.uniform_int(static_cast<std::uint64_t>(config.elite))];
            std::size_t lo = rng.uniform_int(n + 1);
            std::size_t hi = rng.uniform_int(n + 1);
            if (lo > hi) std::swap(lo, hi);
            Candidate child{a.data, 0.0};
            for (std::size_t j = 0; j < d; ++j) {
                auto& col = child.data.mutable_codes(j);
                const auto& src = b.data.codes(j);
                for (std::size_t r = lo; r < hi; ++r) col[r] = src[r];
            }
            child.fitness = evaluate(child.data);
            offspring.push_back(std::move(child));
        }
        for (Candidate& c : offspring) population.push_back(std::move(c));
        // Stable sort keeps incumbents ahead of equal-fitness offspring, so
        // the best fitness never regresses.
        std::stable_sort(population.begin(), population.end(), by_fitness);
        population.resize(static_cast<std::size_t>(config.elite));
    }
    return std::move(population.front().data);
}

SynthesizerHook make_junction_hook(const Domain& domain, std::size_t sample_n) {
    if (sample_n < 1) throw ConfigError("junction hook: need at least one sample row");
    return [domain, sample_n](const SelectionPlan& current,
                              Rng& rng) -> std::unique_ptr<RoundEstimator> {
        struct SampleEstimator final : RoundEstimator {
            Dataset sample;
            explicit SampleEstimator(Dataset s) : sample(std::move(s)) {}
            Marginal estimate(const Clique& clique) override {
                return compute_marginal(sample, clique);
            }
        };
        SelectionPlan consistent =
            make_plan_consistent(current, static_cast<double>(sample_n), domain);
        Dataset sample = junction_sample(consistent, domain, sample_n, rng);
        return std::make_unique<SampleEstimator>(std::move(sample));
    };
}

}  // namespace dpsynth
