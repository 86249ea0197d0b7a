#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace ptdt {

using Rng = std::mt19937_64;

// Derives an independent stream seed from a base seed and a list of labels
// (splitmix64 finalizer over the mixed words).
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> labels);

std::vector<double> standard_normal(Rng& rng, std::size_t n);

std::string rng_state(const Rng& rng);
void restore_rng_state(Rng& rng, const std::string& state);

}  // namespace ptdt
