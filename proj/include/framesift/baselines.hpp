#pragma once

#include <cstddef>
#include <cstdint>

#include "framesift/core.hpp"

namespace framesift {

/// Center-of-bin uniform sampling (same indices as presample_uniform).
/// Throws NotEnoughFrames when n > frames.
SampleSelection uniform_select(std::size_t frames, std::size_t n);

/// n distinct frames drawn without replacement: partial Fisher-Yates over
/// [0, frames) driven by SplitMix64(seed), result sorted ascending.
/// Throws NotEnoughFrames when n > frames.
SampleSelection random_select(std::size_t frames, std::size_t n, std::uint64_t seed);

}  // namespace framesift
