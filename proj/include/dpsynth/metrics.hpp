#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dpsynth/dataset.hpp"
#include "dpsynth/preprocess.hpp"

namespace dpsynth {

// One conjunct of a 3-way query, expressed against the original domain so the
// same workload can be evaluated before and after preprocessing. Categorical:
// a point condition on one label code. Numerical: an inclusive value range.
struct ValueCondition {
    std::size_t attr = 0;
    std::int32_t category = -1;
    double lo = 0.0;
    double hi = 0.0;
};

struct ValueQuery {
    std::vector<ValueCondition> conditions;
};

struct QueryWorkload {
    std::vector<ValueQuery> queries;
    int per_clique = 5;
    std::uint64_t seed = 0;
};

// Random 3-way workload: every 3-attribute clique when there are at most
// max_cliques of them, otherwise a seeded sample of max_cliques distinct
// cliques; per_clique random conditions each.
QueryWorkload make_workload(const Domain& original, int per_clique = 5,
                            std::size_t max_cliques = 2000, std::uint64_t seed = 0);

// Code-space form of one conjunct after binding to a concrete transform set:
// an inclusive code interval (empty when lo > hi).
struct CodeCondition {
    std::size_t attr = 0;
    std::int32_t lo = 0;
    std::int32_t hi = -1;

    bool empty() const { return lo > hi; }
};

struct CodeQuery {
    std::vector<CodeCondition> conditions;
};

// Translate value-space conditions into inclusive code ranges for one
// transform set: categorical points go through the merge remap, numerical
// ranges become the contiguous run of bins whose midpoints fall inside.
std::vector<CodeQuery> bind_workload(const QueryWorkload& workload,
                                     const PreprocessArtifacts& artifacts);

// Fraction of rows matching every conjunct.
double query_fraction(const Dataset& data, const CodeQuery& query);

// Mean absolute difference of matching fractions over the workload.
double query_error(const Dataset& synthetic, const Dataset& holdout,
                   const std::vector<CodeQuery>& queries);
double query_error(const Dataset& synthetic, const Dataset& holdout,
                   const QueryWorkload& workload, const PreprocessArtifacts& artifacts);

struct FidelityReport {
    double mean_tvd = 0.0;
    double total_tvd = 0.0;
    std::size_t pairs = 0;
};

// Total variation distance on every unordered 2-way frequency marginal,
// averaged over pairs (the total also kept for reference).
FidelityReport fidelity_report(const Dataset& synthetic, const Dataset& holdout);
double fidelity_tvd(const Dataset& synthetic, const Dataset& holdout);

struct DomainSizeReport {
    std::size_t attr_count = 0;
    std::int64_t attr_min = 0;
    std::int64_t attr_max = 0;
    double attr_mean = 0.0;
    std::size_t pair_count = 0;
    std::int64_t pair_min = 0;
    std::int64_t pair_max = 0;
    double pair_mean = 0.0;

    std::string to_json() const;
};

DomainSizeReport marginal_size_report(const Domain& domain);

// Write decoded train (synthetic) and test CSVs plus domain.json and a
// manifest naming the label column, for downstream classifier evaluation.
void export_for_ml(const Dataset& synthetic, const Dataset& holdout,
                   const PreprocessArtifacts& artifacts, const std::string& destination,
                   const std::string& label);

}  // namespace dpsynth
