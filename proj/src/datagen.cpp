#include "dpsynth/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dpsynth/preprocess.hpp"
#include "dpsynth/rng.hpp"

namespace dpsynth {

namespace {

std::vector<std::string> level_labels(const std::string& prefix, std::size_t count,
                                      int width) {
    std::vector<std::string> labels;
    labels.reserve(count);
    char buf[32];
    for (std::size_t i = 0; i < count; ++i) {
        std::snprintf(buf, sizeof(buf), "%s%0*zu", prefix.c_str(), width, i);
        labels.emplace_back(buf);
    }
    return labels;
}

// Draws an index from an unnormalized weight table.
std::size_t draw_weighted(const std::vector<double>& cdf, Rng& rng) {
    double u = rng.uniform() * cdf.back();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    std::size_t idx = static_cast<std::size_t>(it - cdf.begin());
    return std::min(idx, cdf.size() - 1);
}

std::vector<double> cumulative(const std::vector<double>& weights) {
    std::vector<double> cdf(weights.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        cdf[i] = acc;
    }
    return cdf;
}

}  // namespace

Dataset make_chain_dataset(std::size_t n, std::uint64_t seed) {
    constexpr std::size_t kAttrs = 6;
    constexpr std::size_t kLevels = 7;
    constexpr double kStay = 0.5;
    constexpr double kBaseDecay = 0.8;

    std::vector<AttributeSpec> attrs;
    attrs.reserve(kAttrs);
    for (std::size_t j = 0; j < kAttrs; ++j)
        attrs.push_back(AttributeSpec::categorical("s" + std::to_string(j),
                                                   level_labels("v", kLevels, 1)));
    Dataset data{Domain{std::move(attrs)}};

    std::vector<double> base(kLevels);
    double w = 1.0;
    for (double& b : base) {
        b = w;
        w *= kBaseDecay;
    }
    const std::vector<double> base_cdf = cumulative(base);
    Rng rng = Rng(seed).substream("chain");

    std::vector<std::vector<std::int32_t>> cols(kAttrs,
                                                std::vector<std::int32_t>(n));
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t state = draw_weighted(base_cdf, rng);
        cols[0][i] = static_cast<std::int32_t>(state);
        for (std::size_t j = 1; j < kAttrs; ++j) {
            // One draw decides both whether to stay and, via the remapped
            // remainder, the fresh base draw on a restart.
            double u = rng.uniform();
            if (u >= kStay) {
                double v = (u - kStay) / (1.0 - kStay) * base_cdf.back();
                auto it = std::upper_bound(base_cdf.begin(), base_cdf.end(), v);
                state = std::min(static_cast<std::size_t>(it - base_cdf.begin()),
                                 kLevels - 1);
            }
            cols[j][i] = static_cast<std::int32_t>(state);
        }
    }
    for (std::size_t j = 0; j < kAttrs; ++j)
        data.set_encoded_column(j, std::move(cols[j]));
    return data;
}

Dataset make_heavy_tail_dataset(std::size_t n, std::uint64_t seed) {
    constexpr std::size_t kCodeLabels = 3000;
    constexpr double kZipfExponent = 1.1;
    constexpr double kAmountGrid = 10000.0;

    std::vector<AttributeSpec> attrs;
    attrs.push_back(AttributeSpec::numerical("amount", 0.0, kAmountGrid, 10000));
    attrs.push_back(
        AttributeSpec::categorical("code", level_labels("c", kCodeLabels, 4)));
    attrs.push_back(AttributeSpec::categorical("region", level_labels("r", 8, 1)));
    attrs.push_back(AttributeSpec::categorical("flag", {"low", "mid", "high"}));
    Dataset data{Domain{std::move(attrs)}};

    Rng root(seed);
    Rng amount_rng = root.substream("amount");
    Rng code_rng = root.substream("code");
    Rng region_rng = root.substream("region");
    Rng flag_rng = root.substream("flag");

    // Rank weights 1/k^1.1: with n = 2*10^4 this puts ranks near 60-100 in
    // the 20-35 count band and leaves a long run of single-digit tail labels.
    std::vector<double> zipf(kCodeLabels);
    for (std::size_t k = 0; k < kCodeLabels; ++k)
        zipf[k] = std::pow(static_cast<double>(k + 1), -kZipfExponent);
    const std::vector<double> zipf_cdf = cumulative(zipf);

    std::vector<double> amount(n);
    std::vector<std::int32_t> code(n);
    std::vector<std::int32_t> region(n);
    std::vector<std::int32_t> flag(n);
    for (std::size_t i = 0; i < n; ++i) {
        // Log-normal amounts: the bulk sits within a few hundred of the
        // median while the right tail runs out to a few thousand, far short
        // of the declared 10^4 grid.
        double v = std::floor(300.0 * std::exp(amount_rng.normal(0.4)));
        amount[i] = std::min(std::max(v, 0.0), kAmountGrid - 1.0);

        code[i] = static_cast<std::int32_t>(draw_weighted(zipf_cdf, code_rng));

        // Small amounts favor the early regions, large ones the late.
        double tilt = amount[i] < 300.0 ? 0.75 : 0.25;
        std::size_t r = region_rng.uniform() < tilt
                            ? static_cast<std::size_t>(region_rng.uniform_int(4))
                            : 4 + static_cast<std::size_t>(region_rng.uniform_int(4));
        region[i] = static_cast<std::int32_t>(r);

        std::size_t f = flag_rng.uniform() < 0.8 ? r / 3
                                                 : static_cast<std::size_t>(
                                                       flag_rng.uniform_int(3));
        flag[i] = static_cast<std::int32_t>(std::min<std::size_t>(f, 2));
    }
    data.set_raw_column(0, std::move(amount));
    data.set_encoded_column(1, std::move(code));
    data.set_encoded_column(2, std::move(region));
    data.set_encoded_column(3, std::move(flag));
    return data;
}

Dataset make_latent_class_dataset(std::size_t n, std::uint64_t seed) {
    const std::vector<std::size_t> sizes = {2, 3, 4, 5, 6, 8, 10, 12, 16, 20};
    constexpr std::size_t kClasses = 4;
    constexpr double kSignal = 0.55;

    std::vector<AttributeSpec> attrs;
    attrs.reserve(sizes.size());
    for (std::size_t j = 0; j < sizes.size(); ++j)
        attrs.push_back(AttributeSpec::categorical(
            "f" + std::to_string(j), level_labels("v", sizes[j], 2)));
    Dataset data{Domain{std::move(attrs)}};

    const std::vector<double> class_cdf = cumulative({0.4, 0.3, 0.2, 0.1});
    Rng rng = Rng(seed).substream("latent");

    std::vector<std::vector<std::int32_t>> cols(sizes.size(),
                                                std::vector<std::int32_t>(n));
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t z = draw_weighted(class_cdf, rng);
        for (std::size_t j = 0; j < sizes.size(); ++j) {
            std::size_t size = sizes[j];
            std::size_t block = std::max<std::size_t>(1, size / kClasses);
            std::size_t value;
            if (rng.uniform() < kSignal)
                value = (z * block + static_cast<std::size_t>(rng.uniform_int(block))) %
                        size;
            else
                value = static_cast<std::size_t>(rng.uniform_int(size));
            cols[j][i] = static_cast<std::int32_t>(value);
        }
    }
    for (std::size_t j = 0; j < sizes.size(); ++j)
        data.set_encoded_column(j, std::move(cols[j]));
    return data;
}

void write_dataset_bundle(const Dataset& data, const std::string& dir,
                          const std::string& stem) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create directory '" + dir + "': " + ec.message());

    fs::path base = fs::path(dir) / stem;
    write_csv(data, (base.string() + ".csv"));

    std::ofstream out(base.string() + ".domain.json");
    if (!out) throw DataError("cannot write domain file for '" + stem + "'");
    out << domain_to_json(data.domain()) << '\n';
    if (!out) throw DataError("failed while writing domain file for '" + stem + "'");
}

}  // namespace dpsynth
