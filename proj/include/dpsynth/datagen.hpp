#pragma once

#include <cstdint>
#include <string>

#include "dpsynth/dataset.hpp"

namespace dpsynth {

// Six 4-valued attributes forming a first-order Markov chain with a strong
// stay probability: adjacent pairs carry most of the dependence, distant
// pairs decay toward independence.
Dataset make_chain_dataset(std::size_t n, std::uint64_t seed);

// Mixed-type table stressing preprocessing: "amount" is a numerical
// attribute with a 10^4-value grid concentrated near zero, "code" a
// 3000-label Zipf categorical whose middle ranks land in the 20-35 count
// band, plus two small categoricals correlated with the amount.
Dataset make_heavy_tail_dataset(std::size_t n, std::uint64_t seed);

// Ten categorical attributes of graded sizes driven by a four-way latent
// class, for timing runs at moderate dimensionality.
Dataset make_latent_class_dataset(std::size_t n, std::uint64_t seed);

// Writes <stem>.csv and <stem>.domain.json under dir.
void write_dataset_bundle(const Dataset& data, const std::string& dir,
                          const std::string& stem);

}  // namespace dpsynth
