#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "framesift/mif.hpp"

namespace framesift {

/// Question-caption matching score source. Implementations must be safe to
/// call from several threads at once. Transient failures throw
/// ScorerUnavailable (retried by fetch_scores); unusable replies throw
/// MalformedResponse (not retried).
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual double score(std::string_view question, std::string_view caption) = 0;
};

/// Hash-based pseudo-scores in [0, 1); a pure function of (seed, question,
/// caption).
class MockScorer final : public Scorer {
 public:
  explicit MockScorer(std::uint64_t seed) : seed_(seed) {}
  double score(std::string_view question, std::string_view caption) override;

 private:
  std::uint64_t seed_;
};

/// POST {"question", "caption"} to <base_url>/score, expects {"score": x}.
class HttpScorer final : public Scorer {
 public:
  explicit HttpScorer(std::string base_url,
                      std::chrono::milliseconds timeout = std::chrono::seconds(10));
  double score(std::string_view question, std::string_view caption) override;

 private:
  std::string origin_;  // scheme://host[:port]
  std::string path_;    // prefix + "/score"
  std::chrono::milliseconds timeout_;
};

/// Scores keyed by (hash(question), hash(caption)); persisted as JSONL.
class ScoreCache {
 public:
  static std::string key(std::string_view question, std::string_view caption);

  std::optional<double> lookup(const std::string& key) const;
  void insert(const std::string& key, double score);
  std::size_t size() const;

  void load(const std::string& path);  // missing file is an empty cache
  void save(const std::string& path) const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, double> scores_;
};

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds initial_backoff{200};
  double multiplier = 2.0;
};

struct FetchOptions {
  RetryPolicy retry;
  unsigned max_concurrency = 4;
};

struct FetchStats {
  std::size_t pairs = 0;
  std::size_t cache_hits = 0;
  std::size_t requests = 0;  // scorer calls, retries included
};

/// One score per (question, caption of the question's video). Cached pairs
/// never reach the scorer; fresh scores are added to the cache even when a
/// later pair fails. Each video's pre-sample list is the sorted set of its
/// captioned frame indices.
ScoreTable fetch_scores(const std::vector<QuestionRecord>& questions,
                        const std::vector<CaptionRecord>& captions, Scorer& scorer,
                        ScoreCache& cache, const FetchOptions& options = {},
                        FetchStats* stats = nullptr);

}  // namespace framesift
