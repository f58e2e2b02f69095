#pragma once

#include <cstdint>
#include <random>

namespace cpsched {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; derives independent stream seeds from one master
/// seed so results never depend on evaluation order or thread count.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Named streams used across the pipeline.
enum class Stream : std::uint64_t {
    Synthesis = 1,
    Split = 2,
    TrainLower = 3,
    TrainUpper = 4,
    TrainPoint = 5,
};

inline std::uint64_t derive_seed(std::uint64_t master, Stream stream) {
    return derive_seed(master, static_cast<std::uint64_t>(stream));
}

}  // namespace cpsched
