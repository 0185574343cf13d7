#include "framesift/baselines.hpp"

#include <algorithm>
#include <numeric>

#include "framesift/mif.hpp"

namespace framesift {

namespace {

void require_frames(std::size_t frames, std::size_t n) {
  if (n > frames || n == 0) {
    throw Error(ErrorCode::NotEnoughFrames, "cannot take " + std::to_string(n) + " of " +
                                                std::to_string(frames) + " frames");
  }
}

}  // namespace

SampleSelection uniform_select(std::size_t frames, std::size_t n) {
  require_frames(frames, n);
  SampleSelection out;
  out.indices = presample_uniform(frames, n);
  out.selection_order = out.indices;
  out.profile.assign(frames, 0.0);
  out.success = true;
  return out;
}

SampleSelection random_select(std::size_t frames, std::size_t n, std::uint64_t seed) {
  require_frames(frames, n);
  std::vector<std::size_t> pool(frames);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(frames - i));
    std::swap(pool[i], pool[j]);
  }
  SampleSelection out;
  out.selection_order.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n));
  out.indices = out.selection_order;
  std::sort(out.indices.begin(), out.indices.end());
  out.profile.assign(frames, 0.0);
  out.success = true;
  return out;
}

}  // namespace framesift
