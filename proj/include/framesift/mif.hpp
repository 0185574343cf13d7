#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "framesift/core.hpp"

namespace framesift {

/// Center-of-bin uniform indices: floor((i + 0.5) * T / count), i < count.
/// Throws BadCount unless 1 <= count <= frames.
std::vector<std::size_t> presample_uniform(std::size_t frames, std::size_t count);

/// Positions of the n largest scores, ties to the lower position, returned
/// in ascending position order. Throws NotEnoughFrames if n > scores.size().
std::vector<std::size_t> topk_by_score(std::span<const double> scores, std::size_t n);

/// Same selection as topk_by_score, in rank order (best first).
std::vector<std::size_t> topk_ranked(std::span<const double> scores, std::size_t n);

/// (video, question, frame) -> matching score, plus the per-video list of
/// pre-sampled frame indices every (video, question) group must cover.
class ScoreTable {
 public:
  using Group = std::map<std::size_t, double>;  // frame index -> score
  using GroupKey = std::pair<std::string, std::string>;

  /// Throws DuplicateEntry if the key is already present, NonFiniteInput
  /// for a non-finite score.
  void add(const std::string& video_id, const std::string& question_id,
           std::size_t frame_index, double score);

  /// Fixes the pre-sample list of a video. Without it the list is the union
  /// of frame indices seen in that video's groups.
  void set_presample(const std::string& video_id, std::vector<std::size_t> indices);
  std::vector<std::size_t> presample(const std::string& video_id) const;

  const Group* find(const std::string& video_id, const std::string& question_id) const;
  std::vector<GroupKey> groups() const;
  std::size_t entry_count() const noexcept { return entries_; }

  bool operator==(const ScoreTable&) const = default;

 private:
  std::map<GroupKey, Group> groups_;
  std::map<std::string, std::vector<std::size_t>> presample_;
  std::size_t entries_ = 0;
};

/// Most Implied Frames: the n best-scored pre-sampled frames of one
/// (video, question) group. Indices are original frame indices; `profile`
/// holds the scores in pre-sample order.
SampleSelection mif_select(const ScoreTable& table, const std::string& video_id,
                           const std::string& question_id, std::size_t n);

struct CaptionRecord {
  std::string video_id;
  std::size_t frame_index = 0;
  std::string caption;
};

struct QuestionRecord {
  std::string video_id;
  std::string question_id;
  std::string question;
};

// Line-delimited JSON files. Ids may be JSON strings or integers.
ScoreTable read_score_file(std::istream& in);
void write_score_file(std::ostream& out, const ScoreTable& table);
std::vector<CaptionRecord> read_caption_file(std::istream& in);
std::vector<QuestionRecord> read_question_file(std::istream& in);

ScoreTable load_score_file(const std::string& path);

}  // namespace framesift
