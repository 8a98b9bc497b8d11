#include "dpsynth/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "json.hpp"

#include "dpsynth/rng.hpp"

namespace dpsynth {

namespace {

// Dense 2-way accumulation beyond this many cells would waste memory; the
// sparse path gives bit-identical sums because skipped cells contribute an
// exact 0.0.
constexpr std::int64_t kDenseCellLimit = 1 << 20;

std::vector<std::vector<std::size_t>> workload_cliques(std::size_t d, std::size_t max_cliques,
                                                       Rng& rng) {
    std::size_t total = d * (d - 1) * (d - 2) / 6;
    std::vector<std::vector<std::size_t>> cliques;
    if (total <= max_cliques) {
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = i + 1; j < d; ++j)
                for (std::size_t k = j + 1; k < d; ++k) cliques.push_back({i, j, k});
        return cliques;
    }
    std::set<std::vector<std::size_t>> seen;
    while (cliques.size() < max_cliques) {
        std::size_t i = rng.uniform_int(d);
        std::size_t j = rng.uniform_int(d);
        std::size_t k = rng.uniform_int(d);
        if (i == j || i == k || j == k) continue;
        std::vector<std::size_t> clique{i, j, k};
        std::sort(clique.begin(), clique.end());
        if (seen.insert(clique).second) cliques.push_back(std::move(clique));
    }
    return cliques;
}

}  // namespace

QueryWorkload make_workload(const Domain& original, int per_clique, std::size_t max_cliques,
                            std::uint64_t seed) {
    if (original.attr_count() < 3)
        throw ConfigError("workload: need at least three attributes");
    if (per_clique < 1) throw ConfigError("workload: per-clique count must be positive");
    if (max_cliques < 1) throw ConfigError("workload: clique cap must be positive");

    QueryWorkload workload;
    workload.per_clique = per_clique;
    workload.seed = seed;
    Rng rng = Rng(seed).substream("workload");
    std::vector<std::vector<std::size_t>> cliques =
        workload_cliques(original.attr_count(), max_cliques, rng);

    for (const auto& clique : cliques) {
        for (int q = 0; q < per_clique; ++q) {
            ValueQuery query;
            for (std::size_t attr : clique) {
                const AttributeSpec& spec = original.attr(attr);
                ValueCondition cond;
                cond.attr = attr;
                if (spec.kind == AttrKind::Categorical) {
                    cond.category = static_cast<std::int32_t>(
                        rng.uniform_int(static_cast<std::uint64_t>(spec.size())));
                } else {
                    double a = spec.lower + (spec.upper - spec.lower) * rng.uniform();
                    double b = spec.lower + (spec.upper - spec.lower) * rng.uniform();
                    cond.lo = std::min(a, b);
                    cond.hi = std::max(a, b);
                }
                query.conditions.push_back(cond);
            }
            workload.queries.push_back(std::move(query));
        }
    }
    return workload;
}

std::vector<CodeQuery> bind_workload(const QueryWorkload& workload,
                                     const PreprocessArtifacts& artifacts) {
    std::vector<CodeQuery> bound;
    bound.reserve(workload.queries.size());
    for (const ValueQuery& query : workload.queries) {
        CodeQuery cq;
        for (const ValueCondition& cond : query.conditions) {
            if (cond.attr >= artifacts.transforms.size())
                throw ConfigError("workload: condition attribute out of range");
            const AttributeTransform& transform = artifacts.transforms[cond.attr];
            const AttributeSpec& spec = artifacts.original.attr(cond.attr);
            CodeCondition out;
            out.attr = cond.attr;
            if (spec.kind == AttrKind::Categorical) {
                if (cond.category < 0 || cond.category >= spec.size())
                    throw ConfigError("workload: label code out of range for attribute '" +
                                      spec.name + "'");
                std::int32_t code = cond.category;
                if (transform.kind == AttributeTransform::Kind::Merge)
                    code = transform.merge.remap.at(static_cast<std::size_t>(code));
                out.lo = code;
                out.hi = code;
            } else {
                if (transform.kind != AttributeTransform::Kind::Bin)
                    throw ConfigError("workload: numerical attribute '" + spec.name +
                                      "' has no bin transform");
                const BinSpec& bins = transform.bins;
                std::int32_t count = static_cast<std::int32_t>(bins.bin_count());
                std::int32_t first = count;
                std::int32_t last = -1;
                for (std::int32_t b = 0; b < count; ++b) {
                    double mid = bins.midpoint(b);
                    if (mid >= cond.lo && first == count) first = b;
                    if (mid <= cond.hi) last = b;
                }
                out.lo = first;
                out.hi = std::min(last, count - 1);
                if (first > last) {
                    out.lo = 0;
                    out.hi = -1;
                }
            }
            cq.conditions.push_back(out);
        }
        bound.push_back(std::move(cq));
    }
    return bound;
}

double query_fraction(const Dataset& data, const CodeQuery& query) {
    if (data.n() == 0) throw DataError("query: empty dataset");
    for (const CodeCondition& cond : query.conditions) {
        if (cond.empty()) return 0.0;
        if (cond.attr >= data.d()) throw ConfigError("query: attribute out of range");
    }
    std::size_t matches = 0;
    for (std::size_t row = 0; row < data.n(); ++row) {
        bool ok = true;
        for (const CodeCondition& cond : query.conditions) {
            std::int32_t code = data.codes(cond.attr)[row];
            if (code < cond.lo || code > cond.hi) {
                ok = false;
                break;
            }
        }
        if (ok) ++matches;
    }
    return static_cast<double>(matches) / static_cast<double>(data.n());
}

double query_error(const Dataset& synthetic, const Dataset& holdout,
                   const std::vector<CodeQuery>& queries) {
    if (!synthetic.domain().same_shape(holdout.domain()))
        throw DataError("query error: domain mismatch");
    if (queries.empty()) throw ConfigError("query error: empty workload");
    double acc = 0.0;
    for (const CodeQuery& query : queries)
        acc += std::abs(query_fraction(synthetic, query) - query_fraction(holdout, query));
    return acc / static_cast<double>(queries.size());
}

double query_error(const Dataset& synthetic, const Dataset& holdout,
                   const QueryWorkload& workload, const PreprocessArtifacts& artifacts) {
    return query_error(synthetic, holdout, bind_workload(workload, artifacts));
}

namespace {

double pair_tvd(const Dataset& a, const Dataset& b, std::size_t i, std::size_t j) {
    std::int64_t si = a.domain().size(i);
    std::int64_t sj = a.domain().size(j);
    std::int64_t cells = si * sj;
    double na = static_cast<double>(a.n());
    double nb = static_cast<double>(b.n());
    double acc = 0.0;
    if (cells <= kDenseCellLimit) {
        std::vector<std::int64_t> ca(static_cast<std::size_t>(cells), 0);
        std::vector<std::int64_t> cb(static_cast<std::size_t>(cells), 0);
        for (std::size_t row = 0; row < a.n(); ++row)
            ++ca[static_cast<std::size_t>(a.codes(i)[row]) * sj + a.codes(j)[row]];
        for (std::size_t row = 0; row < b.n(); ++row)
            ++cb[static_cast<std::size_t>(b.codes(i)[row]) * sj + b.codes(j)[row]];
        for (std::int64_t cell = 0; cell < cells; ++cell) {
            acc += std::abs(static_cast<double>(ca[static_cast<std::size_t>(cell)]) / na -
                            static_cast<double>(cb[static_cast<std::size_t>(cell)]) / nb);
        }
    } else {
        std::map<std::int64_t, std::int64_t> ca;
        std::map<std::int64_t, std::int64_t> cb;
        for (std::size_t row = 0; row < a.n(); ++row)
            ++ca[static_cast<std::int64_t>(a.codes(i)[row]) * sj + a.codes(j)[row]];
        for (std::size_t row = 0; row < b.n(); ++row)
            ++cb[static_cast<std::int64_t>(b.codes(i)[row]) * sj + b.codes(j)[row]];
        std::vector<std::int64_t> keys;
        keys.reserve(ca.size() + cb.size());
        for (const auto& [key, count] : ca) keys.push_back(key);
        for (const auto& [key, count] : cb) keys.push_back(key);
        std::sort(keys.begin(), keys.end());
        keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
        for (std::int64_t key : keys) {
            auto ita = ca.find(key);
            auto itb = cb.find(key);
            double fa = ita == ca.end() ? 0.0 : static_cast<double>(ita->second) / na;
            double fb = itb == cb.end() ? 0.0 : static_cast<double>(itb->second) / nb;
            acc += std::abs(fa - fb);
        }
    }
    return 0.5 * acc;
}

}  // namespace

FidelityReport fidelity_report(const Dataset& synthetic, const Dataset& holdout) {
    if (!synthetic.domain().same_shape(holdout.domain()))
        throw DataError("fidelity: domain mismatch");
    if (synthetic.n() == 0 || holdout.n() == 0) throw DataError("fidelity: empty dataset");
    if (!synthetic.fully_encoded() || !holdout.fully_encoded())
        throw DataError("fidelity: datasets must be fully encoded");

    FidelityReport report;
    std::size_t d = synthetic.d();
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) {
            report.total_tvd += pair_tvd(synthetic, holdout, i, j);
            ++report.pairs;
        }
    }
    report.mean_tvd =
        report.pairs ? report.total_tvd / static_cast<double>(report.pairs) : 0.0;
    return report;
}

double fidelity_tvd(const Dataset& synthetic, const Dataset& holdout) {
    return fidelity_report(synthetic, holdout).mean_tvd;
}

DomainSizeReport marginal_size_report(const Domain& domain) {
    DomainSizeReport report;
    report.attr_count = domain.attr_count();
    double attr_sum = 0.0;
    for (std::size_t j = 0; j < domain.attr_count(); ++j) {
        std::int64_t s = domain.size(j);
        attr_sum += static_cast<double>(s);
        if (j == 0 || s < report.attr_min) report.attr_min = s;
        if (j == 0 || s > report.attr_max) report.attr_max = s;
    }
    if (report.attr_count) report.attr_mean = attr_sum / static_cast<double>(report.attr_count);

    double pair_sum = 0.0;
    for (std::size_t i = 0; i < domain.attr_count(); ++i) {
        for (std::size_t j = i + 1; j < domain.attr_count(); ++j) {
            std::int64_t cells = domain.size(i) * domain.size(j);
            pair_sum += static_cast<double>(cells);
            if (report.pair_count == 0 || cells < report.pair_min) report.pair_min = cells;
            if (report.pair_count == 0 || cells > report.pair_max) report.pair_max = cells;
            ++report.pair_count;
        }
    }
    if (report.pair_count) report.pair_mean = pair_sum / static_cast<double>(report.pair_count);
    return report;
}

std::string DomainSizeReport::to_json() const {
    nlohmann::json doc;
    doc["attributes"] = {{"count", attr_count},
                         {"min_size", attr_min},
                         {"max_size", attr_max},
                         {"mean_size", attr_mean}};
    doc["pairs"] = {{"count", pair_count},
                    {"min_cells", pair_min},
                    {"max_cells", pair_max},
                    {"mean_cells", pair_mean}};
    return doc.dump(2);
}

void export_for_ml(const Dataset& synthetic, const Dataset& holdout,
                   const PreprocessArtifacts& artifacts, const std::string& destination,
                   const std::string& label) {
    if (!synthetic.domain().same_shape(artifacts.processed) ||
        !holdout.domain().same_shape(artifacts.processed))
        throw DataError("ml export: datasets do not live in the transform's processed domain");
    if (!artifacts.original.find(label))
        throw ConfigError("ml export: unknown label column '" + label + "'");

    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(destination, ec);
    if (ec) throw DataError("ml export: cannot create '" + destination + "': " + ec.message());

    Dataset train = decode_dataset(synthetic, artifacts);
    Dataset test = decode_dataset(holdout, artifacts);
    write_csv(train, destination + "/synthetic_train.csv");
    write_csv(test, destination + "/test.csv");

    std::ofstream domain_out(destination + "/domain.json");
    if (!domain_out) throw DataError("ml export: cannot write domain.json");
    domain_out << domain_to_json(decode_domain(artifacts)) << '\n';

    nlohmann::json manifest;
    manifest["label"] = label;
    manifest["train"] = "synthetic_train.csv";
    manifest["test"] = "test.csv";
    manifest["domain"] = "domain.json";
    std::vector<std::string> names;
    for (const AttributeSpec& spec : artifacts.original.attrs()) names.push_back(spec.name);
    manifest["attributes"] = names;
    std::ofstream manifest_out(destination + "/manifest.json");
    if (!manifest_out) throw DataError("ml export: cannot write manifest.json");
    manifest_out << manifest.dump(2) << '\n';
    if (!manifest_out.flush()) throw DataError("ml export: failed writing manifest.json");
}

}  // namespace dpsynth
