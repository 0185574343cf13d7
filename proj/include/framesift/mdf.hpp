#pragma once

#include <vector>

#include "framesift/core.hpp"
#include "framesift/featurize.hpp"

namespace framesift {

/// Windowed similarity ("dominance") of each frame to its temporal
/// neighbourhood [t - W, t + W], clipped to the video, self term included.
struct DomProfile {
  std::vector<double> values;
  int window = 0;
  DomMode mode = DomMode::raw_sum;
};

DomProfile dom_profile(const SimilarityMatrix& similarity, int window, DomMode mode);

/// Most Dominant Frames.
///
/// W = derive_window(T, config). Frames are taken greedily in decreasing dom
/// order (ties to the lower index); each pick removes every candidate closer
/// than W from further consideration. If the candidates run out before N
/// picks, the remaining slots are filled with the best-ranked unpicked
/// frames regardless of spacing and the selection is marked unsuccessful.
///
/// Throws VideoTooShort when T < N.
SampleSelection mdf_select(const FrameFeatures& features, const SamplingConfig& config);
SampleSelection mdf_select_from_similarity(const SimilarityMatrix& similarity,
                                           const SamplingConfig& config);

}  // namespace framesift
