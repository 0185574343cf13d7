#include "framesift/mif.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>

namespace framesift {

std::vector<std::size_t> presample_uniform(std::size_t frames, std::size_t count) {
  if (count < 1 || count > frames) {
    throw Error(ErrorCode::BadCount, "cannot pre-sample " + std::to_string(count) +
                                         " of " + std::to_string(frames) + " frames");
  }
  std::vector<std::size_t> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    // (i + 0.5) * T / count in exact integer arithmetic.
    out[i] = std::min((2 * i + 1) * frames / (2 * count), frames - 1);
  }
  return out;
}

std::vector<std::size_t> topk_ranked(std::span<const double> scores, std::size_t n) {
  if (n > scores.size()) {
    throw Error(ErrorCode::NotEnoughFrames, "asked for " + std::to_string(n) + " of " +
                                                std::to_string(scores.size()) + " scores");
  }
  for (double s : scores) {
    if (!std::isfinite(s)) throw Error(ErrorCode::NonFiniteInput, "score is not finite");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  order.resize(n);
  return order;
}

std::vector<std::size_t> topk_by_score(std::span<const double> scores, std::size_t n) {
  auto picked = topk_ranked(scores, n);
  std::sort(picked.begin(), picked.end());
  return picked;
}

void ScoreTable::add(const std::string& video_id, const std::string& question_id,
                     std::size_t frame_index, double score) {
  if (!std::isfinite(score)) {
    throw Error(ErrorCode::NonFiniteInput, "score for " + video_id + "/" + question_id +
                                               " frame " + std::to_string(frame_index) +
                                               " is not finite");
  }
  auto& group = groups_[{video_id, question_id}];
  if (!group.emplace(frame_index, score).second) {
    throw Error(ErrorCode::DuplicateEntry, "duplicate score for " + video_id + "/" +
                                               question_id + " frame " +
                                               std::to_string(frame_index));
  }
  ++entries_;
}

void ScoreTable::set_presample(const std::string& video_id, std::vector<std::size_t> indices) {
  std::sort(indices.begin(), indices.end());
  if (std::adjacent_find(indices.begin(), indices.end()) != indices.end()) {
    throw Error(ErrorCode::DuplicateEntry, "pre-sample list of " + video_id + " repeats a frame");
  }
  presample_[video_id] = std::move(indices);
}

std::vector<std::size_t> ScoreTable::presample(const std::string& video_id) const {
  if (auto it = presample_.find(video_id); it != presample_.end()) return it->second;
  std::set<std::size_t> seen;
  for (auto it = groups_.lower_bound({video_id, std::string()});
       it != groups_.end() && it->first.first == video_id; ++it) {
    for (const auto& [frame, score] : it->second) seen.insert(frame);
  }
  return {seen.begin(), seen.end()};
}

const ScoreTable::Group* ScoreTable::find(const std::string& video_id,
                                          const std::string& question_id) const {
  auto it = groups_.find({video_id, question_id});
  return it == groups_.end() ? nullptr : &it->second;
}

std::vector<ScoreTable::GroupKey> ScoreTable::groups() const {
  std::vector<GroupKey> keys;
  keys.reserve(groups_.size());
  for (const auto& [key, group] : groups_) keys.push_back(key);
  return keys;
}

SampleSelection mif_select(const ScoreTable& table, const std::string& video_id,
                           const std::string& question_id, std::size_t n) {
  const auto* group = table.find(video_id, question_id);
  if (group == nullptr) {
    throw Error(ErrorCode::MissingGroup, "no scores for " + video_id + "/" + question_id);
  }
  const auto frames = table.presample(video_id);
  std::vector<double> scores;
  scores.reserve(frames.size());
  for (std::size_t frame : frames) {
    auto it = group->find(frame);
    if (it == group->end()) {
      throw Error(ErrorCode::IncompleteGroup, video_id + "/" + question_id +
                                                  " lacks a score for frame " +
                                                  std::to_string(frame));
    }
    scores.push_back(it->second);
  }
  if (group->size() != frames.size()) {
    throw Error(ErrorCode::IncompleteGroup,
                video_id + "/" + question_id + " scores frames outside the pre-sample list");
  }

  SampleSelection out;
  for (std::size_t pos : topk_ranked(scores, n)) out.selection_order.push_back(frames[pos]);
  out.indices = out.selection_order;
  std::sort(out.indices.begin(), out.indices.end());
  out.success = true;
  out.profile = std::move(scores);
  return out;
}

namespace {

std::string id_field(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw Error(ErrorCode::InvalidInput, std::string(key) + " must be a string or integer");
}

template <typename Fn>
void for_each_json_line(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidInput,
                  "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

}  // namespace

ScoreTable read_score_file(std::istream& in) {
  ScoreTable table;
  for_each_json_line(in, [&](const nlohmann::json& j) {
    const auto& score = j.at("score");
    if (!score.is_number()) throw Error(ErrorCode::InvalidInput, "score must be a number");
    table.add(id_field(j, "video_id"), id_field(j, "question_id"),
              j.at("frame_index").get<std::size_t>(), score.get<double>());
  });
  return table;
}

void write_score_file(std::ostream& out, const ScoreTable& table) {
  for (const auto& [video, question] : table.groups()) {
    for (const auto& [frame, score] : *table.find(video, question)) {
      nlohmann::json j = {{"video_id", video},
                          {"question_id", question},
                          {"frame_index", frame},
                          {"score", score}};
      out << j.dump() << '\n';
    }
  }
}

std::vector<CaptionRecord> read_caption_file(std::istream& in) {
  std::vector<CaptionRecord> records;
  for_each_json_line(in, [&](const nlohmann::json& j) {
    records.push_back({id_field(j, "video_id"), j.at("frame_index").get<std::size_t>(),
                       j.at("caption").get<std::string>()});
  });
  return records;
}

std::vector<QuestionRecord> read_question_file(std::istream& in) {
  std::vector<QuestionRecord> records;
  for_each_json_line(in, [&](const nlohmann::json& j) {
    records.push_back({id_field(j, "video_id"), id_field(j, "question_id"),
                       j.at("question").get<std::string>()});
  });
  return records;
}

ScoreTable load_score_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  return read_score_file(in);
}

}  // namespace framesift
