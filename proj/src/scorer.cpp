#include "framesift/scorer.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

#include "framesift/parallel.hpp"
#include "httplib.h"

namespace framesift {

double MockScorer::score(std::string_view question, std::string_view caption) {
  // The unit separator keeps ("ab", "c") and ("a", "bc") apart.
  const std::uint64_t h = fnv1a64(caption, fnv1a64("\x1f", fnv1a64(question)));
  SplitMix64 rng(h ^ seed_);
  return rng.uniform();
}

HttpScorer::HttpScorer(std::string base_url, std::chrono::milliseconds timeout)
    : timeout_(timeout) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos || base_url.substr(0, scheme_end) != "http") {
    throw Error(ErrorCode::InvalidInput, "scorer url must start with http://, got " + base_url);
  }
  const auto path_start = base_url.find('/', scheme_end + 3);
  origin_ = base_url.substr(0, path_start);
  std::string prefix = path_start == std::string::npos ? "" : base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  path_ = prefix + "/score";
}

double HttpScorer::score(std::string_view question, std::string_view caption) {
  httplib::Client client(origin_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  const nlohmann::json request = {{"question", question}, {"caption", caption}};
  auto res = client.Post(path_, request.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::ScorerUnavailable,
                origin_ + path_ + ": " + httplib::to_string(res.error()));
  }
  if (res->status >= 500 || res->status == 429 || res->status == 408) {
    throw Error(ErrorCode::ScorerUnavailable,
                origin_ + path_ + " answered HTTP " + std::to_string(res->status));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::MalformedResponse,
                origin_ + path_ + " answered HTTP " + std::to_string(res->status));
  }
  nlohmann::json body;
  try {
    body = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::MalformedResponse, "response is not JSON: " + res->body);
  }
  if (!body.is_object() || !body.contains("score") || !body["score"].is_number()) {
    throw Error(ErrorCode::MalformedResponse, "response lacks a numeric score: " + res->body);
  }
  const double value = body["score"].get<double>();
  if (!std::isfinite(value)) {
    throw Error(ErrorCode::MalformedResponse, "score is not finite");
  }
  return value;
}

std::string ScoreCache::key(std::string_view question, std::string_view caption) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%016llx:%016llx",
                static_cast<unsigned long long>(fnv1a64(question)),
                static_cast<unsigned long long>(fnv1a64(caption)));
  return buf;
}

std::optional<double> ScoreCache::lookup(const std::string& key) const {
  std::lock_guard lock(mutex_);
  auto it = scores_.find(key);
  if (it == scores_.end()) return std::nullopt;
  return it->second;
}

void ScoreCache::insert(const std::string& key, double score) {
  std::lock_guard lock(mutex_);
  scores_[key] = score;
}

std::size_t ScoreCache::size() const {
  std::lock_guard lock(mutex_);
  return scores_.size();
}

void ScoreCache::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) return;
  std::string line;
  std::lock_guard lock(mutex_);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      scores_[j.at("key").get<std::string>()] = j.at("score").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidInput, "score cache " + path + ": " + e.what());
    }
  }
}

void ScoreCache::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  std::lock_guard lock(mutex_);
  for (const auto& [key, score] : scores_) {
    out << nlohmann::json{{"key", key}, {"score", score}}.dump() << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "cannot write score cache " + path);
}

namespace {

double score_with_retry(Scorer& scorer, std::string_view question, std::string_view caption,
                        const RetryPolicy& policy, std::atomic<std::size_t>& requests) {
  auto backoff = policy.initial_backoff;
  for (int attempt = 1;; ++attempt) {
    try {
      ++requests;
      return scorer.score(question, caption);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ScorerUnavailable || attempt >= policy.max_attempts) throw;
    }
    std::this_thread::sleep_for(backoff);
    backoff = std::chrono::milliseconds(
        static_cast<std::int64_t>(static_cast<double>(backoff.count()) * policy.multiplier));
  }
}

}  // namespace

ScoreTable fetch_scores(const std::vector<QuestionRecord>& questions,
                        const std::vector<CaptionRecord>& captions, Scorer& scorer,
                        ScoreCache& cache, const FetchOptions& options, FetchStats* stats) {
  std::map<std::string, std::vector<const CaptionRecord*>> by_video;
  for (const auto& c : captions) by_video[c.video_id].push_back(&c);

  struct Pending {
    std::string key;
    const QuestionRecord* question;
    const CaptionRecord* caption;
  };
  std::vector<Pending> pending;
  std::map<std::string, std::size_t> pending_index;
  FetchStats local;
  for (const auto& q : questions) {
    for (const auto* c : by_video[q.video_id]) {
      ++local.pairs;
      auto key = ScoreCache::key(q.question, c->caption);
      if (cache.lookup(key)) {
        ++local.cache_hits;
      } else if (!pending_index.contains(key)) {
        pending_index.emplace(key, pending.size());
        pending.push_back({std::move(key), &q, c});
      }
    }
  }

  std::atomic<std::size_t> requests{0};
  std::exception_ptr failure;
  try {
    parallel_for(pending.size(), options.max_concurrency, [&](std::size_t i) {
      const auto& p = pending[i];
      const double s = score_with_retry(scorer, p.question->question, p.caption->caption,
                                        options.retry, requests);
      cache.insert(p.key, s);
    });
  } catch (...) {
    failure = std::current_exception();
  }
  local.requests = requests.load();
  if (stats != nullptr) *stats = local;
  if (failure) std::rethrow_exception(failure);

  ScoreTable table;
  for (const auto& [video, caps] : by_video) {
    std::vector<std::size_t> frames;
    for (const auto* c : caps) frames.push_back(c->frame_index);
    table.set_presample(video, std::move(frames));
  }
  for (const auto& q : questions) {
    for (const auto* c : by_video[q.video_id]) {
      table.add(q.video_id, q.question_id, c->frame_index,
                *cache.lookup(ScoreCache::key(q.question, c->caption)));
    }
  }
  return table;
}

}  // namespace framesift
