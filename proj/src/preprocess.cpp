#include "dpsynth/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <limits>

#include "json.hpp"

namespace dpsynth {

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void BinSpec::validate() const {
    if (edges.size() < 2) throw ConfigError("bin spec '" + attribute + "': needs >= 2 edges");
    for (std::size_t i = 1; i < edges.size(); ++i)
        if (!(edges[i - 1] < edges[i]))
            throw ConfigError("bin spec '" + attribute + "': edges not strictly increasing");
}

std::int32_t BinSpec::bin_of(double x) const {
    const auto k = static_cast<std::int32_t>(bin_count());
    if (kind == BinKind::Uniform) {
        const double lower = edges.front(), upper = edges.back();
        const double h = (upper - lower) / static_cast<double>(k);
        auto bin = static_cast<std::int32_t>(std::floor((x - lower) / h));
        return std::clamp(bin, 0, k - 1);
    }
    auto it = std::upper_bound(edges.begin(), edges.end(), x);
    auto bin = static_cast<std::int32_t>(it - edges.begin()) - 1;
    return std::clamp(bin, 0, k - 1);
}

double BinSpec::midpoint(std::int32_t bin) const {
    return 0.5 * (edges.at(bin) + edges.at(bin + 1));
}

BinSpec uniform_bin_fit(const std::string& attribute, double lower, double upper,
                        std::int64_t bin_count) {
    if (!(lower < upper))
        throw ConfigError("uniform bins for '" + attribute + "': lower must be below upper");
    if (bin_count < 1)
        throw ConfigError("uniform bins for '" + attribute + "': bin count must be >= 1");
    BinSpec spec;
    spec.attribute = attribute;
    spec.kind = BinKind::Uniform;
    spec.edges.resize(static_cast<std::size_t>(bin_count) + 1);
    const double h = (upper - lower) / static_cast<double>(bin_count);
    for (std::int64_t i = 0; i <= bin_count; ++i)
        spec.edges[static_cast<std::size_t>(i)] = lower + static_cast<double>(i) * h;
    spec.edges.back() = upper;
    spec.validate();
    return spec;
}

PrivTreeParams PrivTreeParams::make(double theta, double rho1, std::size_t attr_count,
                                    int beta0) {
    PrivTreeParams p;
    p.beta0 = beta0;
    p.theta = theta;
    p.rho1 = rho1;
    p.attr_count = attr_count;
    if (beta0 < 2) throw ConfigError("tree binning: branching factor must be >= 2");
    if (!(rho1 > 0.0)) throw ConfigError("tree binning: budget must be positive");
    if (attr_count < 1) throw ConfigError("tree binning: attribute count must be >= 1");
    const double b = static_cast<double>(beta0);
    p.lambda = (2.0 * b - 1.0) / (b - 1.0) *
               std::sqrt(static_cast<double>(attr_count) / (2.0 * rho1));
    p.delta_decay = p.lambda * std::log(b);
    return p;
}

void PrivTreeParams::validate() const {
    if (beta0 < 2) throw ConfigError("tree binning: branching factor must be >= 2");
    if (!(lambda >= 0.0) || !(delta_decay >= 0.0))
        throw ConfigError("tree binning: invalid noise parameters");
}

BinSpec privtree_fit(const std::string& attribute, const std::vector<double>& values,
                     double lower, double upper, const PrivTreeParams& params, Rng& rng) {
    if (!(lower < upper))
        throw ConfigError("tree binning for '" + attribute + "': lower must be below upper");
    params.validate();

    BinSpec spec;
    spec.attribute = attribute;
    spec.kind = BinKind::Tree;
    if (values.empty()) {
        spec.edges = {lower, upper};
        return spec;
    }

    std::vector<double> sorted(values);
    std::sort(sorted.begin(), sorted.end());
    auto count_in = [&](double lo, double hi) {
        auto first = std::lower_bound(sorted.begin(), sorted.end(), lo);
        auto last = hi == upper ? std::upper_bound(sorted.begin(), sorted.end(), hi)
                                : std::lower_bound(sorted.begin(), sorted.end(), hi);
        return static_cast<double>(last - first);
    };

    struct Node {
        double lo, hi;
        int depth;
    };
    const double min_width = kPrivTreeMinWidthFraction * (upper - lower);
    std::deque<Node> fringe{{lower, upper, 0}};
    std::vector<std::pair<double, double>> leaves;
    while (!fringe.empty()) {
        Node node = fringe.front();
        fringe.pop_front();
        const double c = count_in(node.lo, node.hi);
        const double biased =
            std::max(c - node.depth * params.delta_decay, params.theta - params.delta_decay);
        const double noisy = biased + rng.laplace(params.lambda);
        const double child_width = (node.hi - node.lo) / params.beta0;
        if (noisy > params.theta && node.depth < kPrivTreeMaxDepth &&
            child_width >= min_width) {
            for (int k = 0; k < params.beta0; ++k) {
                const double lo = node.lo + k * child_width;
                const double hi = k + 1 == params.beta0 ? node.hi : node.lo + (k + 1) * child_width;
                fringe.push_back({lo, hi, node.depth + 1});
            }
        } else {
            leaves.emplace_back(node.lo, node.hi);
        }
    }
    std::sort(leaves.begin(), leaves.end());
    spec.edges.reserve(leaves.size() + 1);
    spec.edges.push_back(leaves.front().first);
    for (const auto& [lo, hi] : leaves) spec.edges.push_back(hi);
    spec.validate();
    return spec;
}

MergeMap rare_merge_fit(const Dataset& data, std::size_t attribute, double theta,
                        double rho_share, Rng& rng) {
    const AttributeSpec& spec = data.domain().attr(attribute);
    if (spec.kind != AttrKind::Categorical)
        throw ConfigError("rare-category merge: attribute '" + spec.name +
                          "' is not categorical");
    if (!(theta >= 0.0 && theta < 1.0))
        throw ConfigError("rare-category merge: threshold fraction must lie in [0, 1)");
    if (!(rho_share > 0.0))
        throw ConfigError("rare-category merge: budget share must be positive");

    const auto size = static_cast<std::size_t>(spec.size());
    std::vector<double> counts(size, 0.0);
    for (auto code : data.codes(attribute)) counts[static_cast<std::size_t>(code)] += 1.0;

    MergeMap map;
    map.attribute = spec.name;
    map.sigma = std::sqrt(1.0 / (2.0 * rho_share));
    map.noisy_counts.resize(size);
    double noisy_total = 0.0;
    for (std::size_t i = 0; i < size; ++i) {
        map.noisy_counts[i] = counts[i] + rng.normal(map.sigma);
        noisy_total += map.noisy_counts[i];
    }
    map.threshold = std::max(theta * noisy_total, 3.0 * map.sigma);

    for (std::size_t i = 0; i < size; ++i) {
        if (map.noisy_counts[i] < map.threshold)
            map.merged_codes.push_back(static_cast<std::int32_t>(i));
        else
            map.kept_codes.push_back(static_cast<std::int32_t>(i));
    }
    if (map.kept_codes.empty()) {
        // Never empty the domain: promote the largest noisy count.
        std::size_t best = 0;
        for (std::size_t i = 1; i < size; ++i)
            if (map.noisy_counts[i] > map.noisy_counts[best]) best = i;
        map.kept_codes.push_back(static_cast<std::int32_t>(best));
        map.merged_codes.erase(
            std::find(map.merged_codes.begin(), map.merged_codes.end(),
                      static_cast<std::int32_t>(best)));
    }

    map.remap.assign(size, -1);
    for (std::size_t k = 0; k < map.kept_codes.size(); ++k)
        map.remap[static_cast<std::size_t>(map.kept_codes[k])] = static_cast<std::int32_t>(k);
    if (!map.merged_codes.empty()) {
        map.rare_code = static_cast<std::int32_t>(map.kept_codes.size());
        for (auto c : map.merged_codes) map.remap[static_cast<std::size_t>(c)] = map.rare_code;
    }
    return map;
}

namespace {

std::string rare_label_for(const std::vector<std::string>& kept) {
    std::string label = "<rare>";
    while (std::find(kept.begin(), kept.end(), label) != kept.end()) label += "_";
    return label;
}

Domain build_processed_domain(const Domain& original,
                              const std::vector<AttributeTransform>& transforms) {
    std::vector<AttributeSpec> attrs;
    for (std::size_t j = 0; j < original.attr_count(); ++j) {
        const AttributeSpec& spec = original.attr(j);
        const AttributeTransform& t = transforms.at(j);
        switch (t.kind) {
            case AttributeTransform::Kind::Identity:
                attrs.push_back(spec);
                break;
            case AttributeTransform::Kind::Bin: {
                std::vector<std::string> labels;
                const auto& e = t.bins.edges;
                for (std::size_t b = 0; b + 1 < e.size(); ++b) {
                    const char* close = b + 2 == e.size() ? "]" : ")";
                    labels.push_back("[" + format_double(e[b]) + "," + format_double(e[b + 1]) +
                                     close);
                }
                attrs.push_back(AttributeSpec::categorical(spec.name, std::move(labels)));
                break;
            }
            case AttributeTransform::Kind::Merge: {
                std::vector<std::string> labels;
                for (auto c : t.merge.kept_codes)
                    labels.push_back(spec.labels.at(static_cast<std::size_t>(c)));
                if (t.merge.rare_code >= 0) labels.push_back(rare_label_for(labels));
                attrs.push_back(AttributeSpec::categorical(spec.name, std::move(labels)));
                break;
            }
        }
    }
    return Domain(std::move(attrs));
}

}  // namespace

PreprocessResult apply_preprocess(const Dataset& data, const PreprocessConfig& config,
                                  BudgetLedger& ledger, Rng& rng) {
    const Domain& dom = data.domain();
    if (config.gate < 1) throw ConfigError("preprocess: gate must be >= 1");
    if (config.bins < 1) throw ConfigError("preprocess: bin count must be >= 1");

    std::vector<std::size_t> tree_attrs, merge_attrs;
    for (std::size_t j = 0; j < dom.attr_count(); ++j) {
        const AttributeSpec& spec = dom.attr(j);
        if (spec.size() <= config.gate) continue;
        if (spec.kind == AttrKind::Numerical) {
            if (config.method == BinMethod::PrivTree) tree_attrs.push_back(j);
        } else {
            merge_attrs.push_back(j);
        }
    }

    const bool need_tree = !tree_attrs.empty();
    const bool need_merge = !merge_attrs.empty();
    if ((need_tree || need_merge) && !(config.rho_preprocess > 0.0))
        throw ConfigError(
            "preprocess: tree binning or rare-category merge requested with zero budget");

    PreprocessArtifacts artifacts;
    artifacts.original = dom;

    // Budget layout: an optional slice for the noisy record count that feeds
    // the default tree split threshold, the rest divided between the tree fits
    // and the merges.
    double theta_tree = config.privtree_theta;
    double remaining = config.rho_preprocess;
    if (need_tree && theta_tree <= 0.0) {
        const double rho_nhat = 0.1 * config.rho_preprocess;
        ledger.spend(rho_nhat, "preprocess n-hat");
        Rng nhat_rng = rng.substream("preprocess:nhat");
        const double sigma = sigma_for_rho(rho_nhat, 1.0).sigma;
        artifacts.n_hat = static_cast<double>(data.n()) + nhat_rng.normal(sigma);
        theta_tree = std::max(artifacts.n_hat, 1.0) / 1000.0;
        remaining -= rho_nhat;
    }
    const double rho_tree = need_tree ? (need_merge ? remaining / 2.0 : remaining) : 0.0;
    const double rho_merge = need_merge ? remaining - rho_tree : 0.0;
    if (need_tree) ledger.spend(rho_tree, "tree binning");
    if (need_merge) ledger.spend(rho_merge, "rare-category merge");

    PrivTreeParams tree_params;
    if (need_tree) tree_params = PrivTreeParams::make(theta_tree, rho_tree, tree_attrs.size());

    artifacts.transforms.resize(dom.attr_count());
    for (std::size_t j = 0; j < dom.attr_count(); ++j) {
        const AttributeSpec& spec = dom.attr(j);
        AttributeTransform& t = artifacts.transforms[j];
        const bool gated = spec.size() > config.gate;
        if (spec.kind == AttrKind::Numerical) {
            t.kind = AttributeTransform::Kind::Bin;
            if (gated && config.method == BinMethod::PrivTree) {
                Rng sub = rng.substream("privtree:" + spec.name);
                t.bins = privtree_fit(spec.name, data.raw(j), spec.lower, spec.upper,
                                      tree_params, sub);
                t.spent_budget = true;
            } else {
                const std::int64_t bins = gated ? config.bins : spec.size();
                t.bins = uniform_bin_fit(spec.name, spec.lower, spec.upper, bins);
            }
            t.new_size = static_cast<std::int64_t>(t.bins.bin_count());
        } else if (gated) {
            Rng sub = rng.substream("merge:" + spec.name);
            t.kind = AttributeTransform::Kind::Merge;
            t.merge = rare_merge_fit(data, j, config.merge_theta,
                                     rho_merge / static_cast<double>(merge_attrs.size()), sub);
            t.new_size = t.merge.new_size();
            t.spent_budget = true;
        } else {
            t.kind = AttributeTransform::Kind::Identity;
            t.new_size = spec.size();
        }
    }

    artifacts.processed = build_processed_domain(dom, artifacts.transforms);
    return {encode_with_artifacts(data, artifacts), artifacts};
}

PreprocessArtifacts identity_artifacts(const Domain& domain) {
    PreprocessArtifacts artifacts;
    artifacts.original = domain;
    artifacts.transforms.resize(domain.attr_count());
    for (std::size_t j = 0; j < domain.attr_count(); ++j) {
        const AttributeSpec& spec = domain.attr(j);
        AttributeTransform& t = artifacts.transforms[j];
        if (spec.kind == AttrKind::Numerical) {
            t.kind = AttributeTransform::Kind::Bin;
            t.bins = uniform_bin_fit(spec.name, spec.lower, spec.upper, spec.size());
            t.new_size = spec.size();
        } else {
            t.kind = AttributeTransform::Kind::Identity;
            t.new_size = spec.size();
        }
    }
    artifacts.processed = build_processed_domain(domain, artifacts.transforms);
    return artifacts;
}

Dataset encode_with_artifacts(const Dataset& original_space,
                              const PreprocessArtifacts& artifacts) {
    if (!original_space.domain().same_shape(artifacts.original))
        throw DataError("encode: dataset domain does not match the artifacts' original domain");
    Dataset out(artifacts.processed);
    for (std::size_t j = 0; j < artifacts.transforms.size(); ++j) {
        const AttributeTransform& t = artifacts.transforms[j];
        switch (t.kind) {
            case AttributeTransform::Kind::Identity:
                out.set_encoded_column(j, original_space.codes(j));
                break;
            case AttributeTransform::Kind::Bin: {
                const auto& raw = original_space.raw(j);
                std::vector<std::int32_t> codes(raw.size());
                for (std::size_t i = 0; i < raw.size(); ++i) codes[i] = t.bins.bin_of(raw[i]);
                out.set_encoded_column(j, std::move(codes));
                break;
            }
            case AttributeTransform::Kind::Merge: {
                const auto& src = original_space.codes(j);
                std::vector<std::int32_t> codes(src.size());
                for (std::size_t i = 0; i < src.size(); ++i)
                    codes[i] = t.merge.remap.at(static_cast<std::size_t>(src[i]));
                out.set_encoded_column(j, std::move(codes));
                break;
            }
        }
    }
    return out;
}

Domain decode_domain(const PreprocessArtifacts& artifacts) {
    std::vector<AttributeSpec> attrs;
    for (std::size_t j = 0; j < artifacts.transforms.size(); ++j) {
        const AttributeTransform& t = artifacts.transforms[j];
        if (t.kind == AttributeTransform::Kind::Bin)
            attrs.push_back(artifacts.original.attr(j));
        else
            attrs.push_back(artifacts.processed.attr(j));
    }
    return Domain(std::move(attrs));
}

Dataset decode_dataset(const Dataset& processed, const PreprocessArtifacts& artifacts) {
    if (!processed.domain().same_shape(artifacts.processed))
        throw DataError("decode: dataset domain does not match the artifacts' processed domain");
    Dataset out(decode_domain(artifacts));
    for (std::size_t j = 0; j < artifacts.transforms.size(); ++j) {
        const AttributeTransform& t = artifacts.transforms[j];
        if (t.kind == AttributeTransform::Kind::Bin) {
            const auto& codes = processed.codes(j);
            std::vector<double> values(codes.size());
            for (std::size_t i = 0; i < codes.size(); ++i)
                values[i] = t.bins.midpoint(codes[i]);
            out.set_raw_column(j, std::move(values));
        } else {
            out.set_encoded_column(j, processed.codes(j));
        }
    }
    return out;
}

Dataset encode_decoded(const Dataset& decoded, const PreprocessArtifacts& artifacts) {
    if (!decoded.domain().same_shape(decode_domain(artifacts)))
        throw DataError("encode: dataset domain does not match the artifacts' decoded domain");
    Dataset out(artifacts.processed);
    for (std::size_t j = 0; j < artifacts.transforms.size(); ++j) {
        const AttributeTransform& t = artifacts.transforms[j];
        if (t.kind == AttributeTransform::Kind::Bin) {
            const std::vector<double>& values = decoded.raw(j);
            std::vector<std::int32_t> codes(values.size());
            for (std::size_t i = 0; i < values.size(); ++i)
                codes[i] = t.bins.bin_of(values[i]);
            out.set_encoded_column(j, std::move(codes));
        } else {
            out.set_encoded_column(j, decoded.codes(j));
        }
    }
    return out;
}

namespace {

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string quoted = "\"";
    for (char c : s) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    quoted += '"';
    return quoted;
}

}  // namespace

void write_csv(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write CSV file '" + path + "'");
    const Domain& dom = data.domain();
    for (std::size_t j = 0; j < dom.attr_count(); ++j) {
        if (j) out << ',';
        out << csv_quote(dom.attr(j).name);
    }
    out << '\n';
    for (std::size_t i = 0; i < data.n(); ++i) {
        for (std::size_t j = 0; j < dom.attr_count(); ++j) {
            if (j) out << ',';
            if (data.encoded(j))
                out << csv_quote(
                    dom.attr(j).labels.at(static_cast<std::size_t>(data.codes(j)[i])));
            else
                out << format_double(data.raw(j)[i]);
        }
        out << '\n';
    }
    if (!out) throw DataError("failed while writing CSV file '" + path + "'");
}

std::string PreprocessArtifacts::to_json() const {
    nlohmann::json doc;
    doc["n_hat"] = n_hat;
    doc["attributes"] = nlohmann::json::array();
    for (std::size_t j = 0; j < transforms.size(); ++j) {
        const AttributeTransform& t = transforms[j];
        nlohmann::json node;
        node["name"] = original.attr(j).name;
        node["new_size"] = t.new_size;
        node["spent_budget"] = t.spent_budget;
        switch (t.kind) {
            case AttributeTransform::Kind::Identity:
                node["kind"] = "identity";
                break;
            case AttributeTransform::Kind::Bin:
                node["kind"] = "bin";
                node["bin_kind"] = t.bins.kind == BinKind::Uniform ? "uniform" : "tree";
                node["edges"] = t.bins.edges;
                break;
            case AttributeTransform::Kind::Merge:
                node["kind"] = "merge";
                node["noisy_counts"] = t.merge.noisy_counts;
                node["sigma"] = t.merge.sigma;
                node["threshold"] = t.merge.threshold;
                node["merged_codes"] = t.merge.merged_codes;
                break;
        }
        doc["attributes"].push_back(std::move(node));
    }
    return doc.dump(2);
}

namespace {

PreprocessArtifacts artifacts_from_doc(const nlohmann::json& doc, const Domain& original) {
    PreprocessArtifacts artifacts;
    artifacts.original = original;
    artifacts.n_hat = doc.at("n_hat").get<double>();
    const auto& list = doc.at("attributes");
    if (list.size() != original.attr_count())
        throw DataError("artifacts: attribute count does not match the domain");
    artifacts.transforms.resize(original.attr_count());
    for (std::size_t j = 0; j < original.attr_count(); ++j) {
        const auto& node = list.at(j);
        const AttributeSpec& spec = original.attr(j);
        if (node.at("name").get<std::string>() != spec.name)
            throw DataError("artifacts: attribute order does not match the domain");
        AttributeTransform& t = artifacts.transforms[j];
        t.new_size = node.at("new_size").get<std::int64_t>();
        t.spent_budget = node.at("spent_budget").get<bool>();
        const std::string kind = node.at("kind").get<std::string>();
        if (kind == "identity") {
            t.kind = AttributeTransform::Kind::Identity;
        } else if (kind == "bin") {
            t.kind = AttributeTransform::Kind::Bin;
            t.bins.attribute = spec.name;
            t.bins.kind = node.at("bin_kind").get<std::string>() == "uniform" ? BinKind::Uniform
                                                                              : BinKind::Tree;
            t.bins.edges = node.at("edges").get<std::vector<double>>();
            t.bins.validate();
        } else if (kind == "merge") {
            t.kind = AttributeTransform::Kind::Merge;
            MergeMap& m = t.merge;
            m.attribute = spec.name;
            m.noisy_counts = node.at("noisy_counts").get<std::vector<double>>();
            m.sigma = node.at("sigma").get<double>();
            m.threshold = node.at("threshold").get<double>();
            m.merged_codes = node.at("merged_codes").get<std::vector<std::int32_t>>();
            const auto size = static_cast<std::size_t>(spec.size());
            std::vector<bool> merged(size, false);
            for (auto c : m.merged_codes) merged.at(static_cast<std::size_t>(c)) = true;
            for (std::size_t i = 0; i < size; ++i)
                if (!merged[i]) m.kept_codes.push_back(static_cast<std::int32_t>(i));
            m.remap.assign(size, -1);
            for (std::size_t k = 0; k < m.kept_codes.size(); ++k)
                m.remap[static_cast<std::size_t>(m.kept_codes[k])] =
                    static_cast<std::int32_t>(k);
            if (!m.merged_codes.empty()) {
                m.rare_code = static_cast<std::int32_t>(m.kept_codes.size());
                for (auto c : m.merged_codes)
                    m.remap[static_cast<std::size_t>(c)] = m.rare_code;
            }
        } else {
            throw DataError("artifacts: unknown transform kind '" + kind + "'");
        }
    }
    artifacts.processed = build_processed_domain(original, artifacts.transforms);
    return artifacts;
}

}  // namespace

PreprocessArtifacts PreprocessArtifacts::from_json(const std::string& text,
                                                   const Domain& original) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(std::string("artifacts: invalid JSON: ") + e.what());
    }
    try {
        return artifacts_from_doc(doc, original);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("artifacts: malformed document: ") + e.what());
    }
}

}  // namespace dpsynth
