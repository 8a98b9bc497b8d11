#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dpsynth/accountant.hpp"
#include "dpsynth/dataset.hpp"

namespace dpsynth {

enum class BinKind { Uniform, Tree };

// Discretization of one numerical attribute. Edges cover [lower, upper]
// exactly; bin i spans [edges[i], edges[i+1]) with the top edge closed.
struct BinSpec {
    std::string attribute;
    BinKind kind = BinKind::Uniform;
    std::vector<double> edges;

    std::size_t bin_count() const { return edges.size() - 1; }
    std::int32_t bin_of(double x) const;
    double midpoint(std::int32_t bin) const;
    void validate() const;
};

// Equal-width bins; costs no privacy budget because it reads only the public
// bounds, never the data.
BinSpec uniform_bin_fit(const std::string& attribute, double lower, double upper,
                        std::int64_t bin_count);

// Parameters of the recursive private splitting fit. lambda and delta_decay
// are derived from the budget: the whole fit over attr_count attributes costs
// rho1.
struct PrivTreeParams {
    int beta0 = 2;
    double theta = 0.0;
    double lambda = 0.0;
    double delta_decay = 0.0;
    double rho1 = 0.0;
    std::size_t attr_count = 1;

    static PrivTreeParams make(double theta, double rho1, std::size_t attr_count,
                               int beta0 = 2);
    void validate() const;
};

constexpr int kPrivTreeMaxDepth = 40;
constexpr double kPrivTreeMinWidthFraction = 1e-9;

// Recursive noisy splitting of [lower, upper]: a node at depth t holding c
// values gets biased count max(c - t*delta_decay, theta - delta_decay) plus
// Laplace(lambda) noise, and splits into beta0 equal children while the noisy
// count exceeds theta. Leaves become bins.
BinSpec privtree_fit(const std::string& attribute, const std::vector<double>& values,
                     double lower, double upper, const PrivTreeParams& params, Rng& rng);

// Noisy-count rare-category collapse for one categorical attribute. Codes
// whose Gaussian-perturbed count falls below max(theta * noisy_total, 3*sigma)
// are folded into one reserved rare code appended after the kept codes.
struct MergeMap {
    std::string attribute;
    std::vector<double> noisy_counts;
    double sigma = 0.0;
    double threshold = 0.0;
    std::vector<std::int32_t> kept_codes;    // ascending original codes
    std::vector<std::int32_t> merged_codes;  // ascending original codes
    std::vector<std::int32_t> remap;         // original code -> new code
    std::int32_t rare_code = -1;             // -1 when nothing was merged

    std::int32_t new_size() const {
        return static_cast<std::int32_t>(kept_codes.size()) + (rare_code >= 0 ? 1 : 0);
    }
};

MergeMap rare_merge_fit(const Dataset& data, std::size_t attribute, double theta,
                        double rho_share, Rng& rng);

// Per-attribute transform record kept for decoding, auditing, and for
// encoding held-out data into the same compressed space.
struct AttributeTransform {
    enum class Kind { Identity, Bin, Merge };
    Kind kind = Kind::Identity;
    BinSpec bins;    // Kind::Bin
    MergeMap merge;  // Kind::Merge
    bool spent_budget = false;
    std::int64_t new_size = 0;
};

struct PreprocessArtifacts {
    std::vector<AttributeTransform> transforms;
    double n_hat = -1.0;  // noisy record count, -1 when not measured
    Domain original;
    Domain processed;

    std::string to_json() const;
    static PreprocessArtifacts from_json(const std::string& text, const Domain& original);
};

enum class BinMethod { Uniform, PrivTree };

struct PreprocessConfig {
    BinMethod method = BinMethod::PrivTree;
    std::int64_t bins = 100;        // bin count for uniform fits above the gate
    double merge_theta = 0.002;     // rare-category threshold fraction
    double privtree_theta = 0.0;    // 0 = derive from a noisy record count
    std::int64_t gate = 100;        // transform only attributes larger than this
    double rho_preprocess = 0.0;
};

struct PreprocessResult {
    Dataset data;
    PreprocessArtifacts artifacts;
};

// Fits transforms on the dataset (spending rho_preprocess through the ledger
// for the tree fits and merges) and applies them. Attributes at or below the
// gate keep their domain: categorical ones pass through, numerical ones get a
// cost-free grid at their declared size so the output is fully encoded.
PreprocessResult apply_preprocess(const Dataset& data, const PreprocessConfig& config,
                                  BudgetLedger& ledger, Rng& rng);

// Cost-free transform set: identity on categorical attributes, declared-size
// grids on numerical ones. Encoding with it preserves full granularity.
PreprocessArtifacts identity_artifacts(const Domain& domain);

// Encodes a dataset in original-domain space (e.g. a held-out split) into the
// artifacts' compressed space.
Dataset encode_with_artifacts(const Dataset& original_space, const PreprocessArtifacts& artifacts);

// Value-space view of processed data: binned attributes become bin-midpoint
// reals, merged attributes keep their kept+rare labels.
Domain decode_domain(const PreprocessArtifacts& artifacts);
Dataset decode_dataset(const Dataset& processed, const PreprocessArtifacts& artifacts);

// Inverse of decode_dataset for reloaded value-space files: binned attributes
// by bin lookup, everything else keeps its codes.
Dataset encode_decoded(const Dataset& decoded, const PreprocessArtifacts& artifacts);

void write_csv(const Dataset& data, const std::string& path);

}  // namespace dpsynth
