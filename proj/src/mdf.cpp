#include "framesift/mdf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace framesift {

DomProfile dom_profile(const SimilarityMatrix& similarity, int window, DomMode mode) {
  if (window < 1) {
    throw Error(ErrorCode::WindowNonPositive, "window must be >= 1, got " + std::to_string(window));
  }
  const std::size_t n = similarity.size();
  const auto w = static_cast<std::size_t>(window);
  DomProfile profile{std::vector<double>(n, 0.0), window, mode};
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t lo = t >= w ? t - w : 0;
    const std::size_t hi = std::min(n - 1, t + w);
    const auto row = similarity.row(t);
    double sum = 0.0;
    for (std::size_t u = lo; u <= hi; ++u) sum += row[u];
    profile.values[t] = mode == DomMode::mean ? sum / static_cast<double>(hi - lo + 1) : sum;
  }
  return profile;
}

namespace {

void check_symmetric(const SimilarityMatrix& s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = i + 1; j < s.size(); ++j) {
      if (!(std::abs(s(i, j) - s(j, i)) <= 1e-9)) {
        throw Error(ErrorCode::InvalidInput, "similarity matrix is not symmetric");
      }
    }
  }
}

}  // namespace

SampleSelection mdf_select_from_similarity(const SimilarityMatrix& similarity,
                                           const SamplingConfig& config) {
  validate_config(config);
  const std::size_t frames = similarity.size();
  const auto wanted = static_cast<std::size_t>(config.frames_per_video);
  if (frames < wanted) {
    throw Error(ErrorCode::VideoTooShort, "video has " + std::to_string(frames) +
                                              " frames, need " + std::to_string(wanted));
  }
  check_symmetric(similarity);

  const int window = derive_window(frames, config);
  DomProfile dom = dom_profile(similarity, window, config.dom_mode);

  // Rank order: dom descending, index ascending on ties. Walking it while
  // skipping excluded frames yields the argmax over the remaining set.
  std::vector<std::size_t> ranked(frames);
  std::iota(ranked.begin(), ranked.end(), std::size_t{0});
  std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
    return dom.values[a] > dom.values[b];
  });

  SampleSelection out;
  out.window = window;
  std::vector<bool> excluded(frames, false);
  std::vector<bool> picked(frames, false);
  const auto reach = static_cast<std::size_t>(window - 1);
  for (std::size_t t : ranked) {
    if (out.selection_order.size() == wanted) break;
    if (excluded[t]) continue;
    out.selection_order.push_back(t);
    picked[t] = true;
    const std::size_t lo = t >= reach ? t - reach : 0;
    const std::size_t hi = std::min(frames - 1, t + reach);
    std::fill(excluded.begin() + static_cast<std::ptrdiff_t>(lo),
              excluded.begin() + static_cast<std::ptrdiff_t>(hi) + 1, true);
  }

  out.success = out.selection_order.size() == wanted;
  for (std::size_t t : ranked) {
    if (out.selection_order.size() == wanted) break;
    if (picked[t]) continue;
    out.selection_order.push_back(t);
    picked[t] = true;
  }

  out.indices = out.selection_order;
  std::sort(out.indices.begin(), out.indices.end());
  out.profile = std::move(dom.values);
  return out;
}

SampleSelection mdf_select(const FrameFeatures& features, const SamplingConfig& config) {
  validate_config(config);
  if (features.frames() < static_cast<std::size_t>(config.frames_per_video)) {
    throw Error(ErrorCode::VideoTooShort,
                "video " + features.video_id() + " has " + std::to_string(features.frames()) +
                    " frames, need " + std::to_string(config.frames_per_video));
  }
  return mdf_select_from_similarity(cosine_similarity_matrix(features), config);
}

}  // namespace framesift
