#include "framesift/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "framesift/baselines.hpp"
#include "framesift/mdf.hpp"
#include "framesift/parallel.hpp"

namespace framesift {

void validate_spec(const SyntheticSpec& spec) {
  auto bad = [](const std::string& field, const std::string& why) {
    throw Error(ErrorCode::InvalidConfig, field + " " + why, field);
  };
  if (spec.scene_count < 1) bad("scene_count", "must be >= 1");
  if (spec.dim < spec.scene_count) {
    throw Error(ErrorCode::DimTooSmall, "dim " + std::to_string(spec.dim) + " < scene_count " +
                                            std::to_string(spec.scene_count));
  }
  if (!(spec.noise_std >= 0.0) || !std::isfinite(spec.noise_std)) bad("noise_std", "must be >= 0");
  if (spec.corpus_size < 1) bad("corpus_size", "must be >= 1");
  if (!(spec.dominant_fraction >= 0.0 && spec.dominant_fraction < 1.0)) {
    bad("dominant_fraction", "must be in [0, 1)");
  }
  if (spec.video_length.hi > 0) {
    const auto need = spec.scene_count + (spec.scene_count - 1) * spec.transition_length;
    if (spec.video_length.lo > spec.video_length.hi) bad("video_length", "range is reversed");
    if (spec.video_length.lo < need) {
      bad("video_length", "must leave at least one frame per scene (>= " + std::to_string(need) + ")");
    }
  } else if (spec.frames_per_scene.lo < 1 || spec.frames_per_scene.lo > spec.frames_per_scene.hi) {
    bad("frames_per_scene", "must be a range with 1 <= lo <= hi");
  }
}

namespace {

void range_to_json(nlohmann::json& j, const IntRange& r) {
  j = r.lo == r.hi ? nlohmann::json(r.lo) : nlohmann::json::array({r.lo, r.hi});
}

IntRange range_from_json(const nlohmann::json& j) {
  if (j.is_number_integer()) return {j.get<std::size_t>(), j.get<std::size_t>()};
  if (j.is_array() && j.size() == 2) return {j[0].get<std::size_t>(), j[1].get<std::size_t>()};
  throw Error(ErrorCode::InvalidConfig, "expected an integer or [lo, hi], got " + j.dump());
}

}  // namespace

void to_json(nlohmann::json& j, const SyntheticSpec& spec) {
  nlohmann::json fps;
  nlohmann::json len;
  range_to_json(fps, spec.frames_per_scene);
  range_to_json(len, spec.video_length);
  j = {{"scene_count", spec.scene_count},     {"frames_per_scene", fps},
       {"video_length", len},                 {"transition_length", spec.transition_length},
       {"noise_std", spec.noise_std},         {"dim", spec.dim},
       {"corpus_size", spec.corpus_size},     {"seed", spec.seed},
       {"dominant_fraction", spec.dominant_fraction}};
}

void from_json(const nlohmann::json& j, SyntheticSpec& spec) {
  static const std::set<std::string> known = {
      "scene_count", "frames_per_scene", "video_length", "transition_length", "noise_std",
      "dim",         "corpus_size",      "seed",         "dominant_fraction"};
  try {
    for (const auto& [key, value] : j.items()) {
      if (!known.contains(key)) {
        throw Error(ErrorCode::InvalidConfig, "unknown spec key '" + key + "'", key);
      }
    }
    if (j.contains("scene_count")) spec.scene_count = j["scene_count"].get<std::size_t>();
    if (j.contains("frames_per_scene")) spec.frames_per_scene = range_from_json(j["frames_per_scene"]);
    if (j.contains("video_length")) spec.video_length = range_from_json(j["video_length"]);
    if (j.contains("transition_length")) {
      spec.transition_length = j["transition_length"].get<std::size_t>();
    }
    if (j.contains("noise_std")) spec.noise_std = j["noise_std"].get<double>();
    if (j.contains("dim")) spec.dim = j["dim"].get<std::size_t>();
    if (j.contains("corpus_size")) spec.corpus_size = j["corpus_size"].get<std::size_t>();
    if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("dominant_fraction")) spec.dominant_fraction = j["dominant_fraction"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("synthetic spec: ") + e.what());
  }
}

SyntheticSpec load_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path + ": " + e.what());
  }
  SyntheticSpec spec = j.get<SyntheticSpec>();
  validate_spec(spec);
  return spec;
}

namespace {

std::size_t draw(SplitMix64& rng, const IntRange& r) {
  return r.lo + static_cast<std::size_t>(rng.below(r.hi - r.lo + 1));
}

std::vector<std::vector<double>> orthonormal_centroids(SplitMix64& rng, std::size_t k,
                                                       std::size_t d) {
  std::vector<std::vector<double>> basis;
  while (basis.size() < k) {
    std::vector<double> v(d);
    for (auto& x : v) x = rng.normal();
    // Two Gram-Schmidt passes keep the basis orthogonal to ~1e-15.
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& b : basis) {
        double dot = 0.0;
        for (std::size_t i = 0; i < d; ++i) dot += v[i] * b[i];
        for (std::size_t i = 0; i < d; ++i) v[i] -= dot * b[i];
      }
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-6) continue;
    for (auto& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  return basis;
}

std::vector<std::size_t> scene_lengths(const SyntheticSpec& spec, SplitMix64& rng) {
  const std::size_t k = spec.scene_count;
  std::vector<std::size_t> lens(k);
  if (spec.video_length.hi > 0) {
    const std::size_t body = draw(rng, spec.video_length) - (k - 1) * spec.transition_length;
    for (std::size_t i = 0; i < k; ++i) lens[i] = body / k + (i < body % k ? 1 : 0);
  } else {
    for (auto& len : lens) len = draw(rng, spec.frames_per_scene);
  }
  if (spec.dominant_fraction > 0.0 && k > 1) {
    std::size_t body = 0;
    for (auto len : lens) body += len;
    const auto target = static_cast<std::size_t>(std::llround(spec.dominant_fraction * static_cast<double>(body)));
    const std::size_t dominant = std::clamp<std::size_t>(target, 1, body - (k - 1));
    const std::size_t rest = body - dominant;
    const auto position = static_cast<std::size_t>(rng.below(k));
    std::size_t short_index = 0;
    for (std::size_t i = 0; i < k; ++i) {
      if (i == position) {
        lens[i] = dominant;
      } else {
        lens[i] = rest / (k - 1) + (short_index < rest % (k - 1) ? 1 : 0);
        ++short_index;
      }
    }
  }
  return lens;
}

LabeledVideo gen_video(const SyntheticSpec& spec, std::size_t v) {
  SplitMix64 rng(mix_seed(spec.seed, v));
  const auto lens = scene_lengths(spec, rng);
  const auto centroids = orthonormal_centroids(rng, spec.scene_count, spec.dim);
  const std::size_t d = spec.dim;
  std::vector<double> values;
  std::vector<int> labels;
  auto emit = [&](const std::vector<double>& base, int label) {
    for (std::size_t i = 0; i < d; ++i) {
      values.push_back(spec.noise_std > 0.0 ? base[i] + spec.noise_std * rng.normal() : base[i]);
    }
    labels.push_back(label);
  };
  std::vector<double> mix(d);
  for (std::size_t k = 0; k < spec.scene_count; ++k) {
    for (std::size_t f = 0; f < lens[k]; ++f) emit(centroids[k], static_cast<int>(k));
    if (k + 1 == spec.scene_count) break;
    for (std::size_t j = 1; j <= spec.transition_length; ++j) {
      const double a = static_cast<double>(j) / static_cast<double>(spec.transition_length + 1);
      for (std::size_t i = 0; i < d; ++i) mix[i] = (1.0 - a) * centroids[k][i] + a * centroids[k + 1][i];
      emit(mix, -1);
    }
  }
  const std::size_t frames = labels.size();
  return {FrameFeatures("synthetic-" + std::to_string(v), frames, d, std::move(values)),
          std::move(labels), spec.scene_count};
}

}  // namespace

std::vector<LabeledVideo> gen_corpus(const SyntheticSpec& spec, unsigned workers) {
  validate_spec(spec);
  std::vector<std::optional<LabeledVideo>> slots(spec.corpus_size);
  parallel_for(spec.corpus_size, workers, [&](std::size_t v) { slots[v] = gen_video(spec, v); });
  std::vector<LabeledVideo> corpus;
  corpus.reserve(slots.size());
  for (auto& s : slots) corpus.push_back(std::move(*s));
  return corpus;
}

double scene_coverage(std::span<const std::size_t> indices, std::span<const int> labels,
                      std::size_t scene_count) {
  const std::size_t denom = std::min(indices.size(), scene_count);
  if (denom == 0) return 0.0;
  std::set<int> hit;
  for (std::size_t t : indices) {
    if (t < labels.size() && labels[t] >= 0) hit.insert(labels[t]);
  }
  return static_cast<double>(hit.size()) / static_cast<double>(denom);
}

double redundancy(std::span<const std::size_t> indices, std::span<const int> labels) {
  if (indices.empty()) return 0.0;
  std::map<int, std::size_t> per_scene;
  std::size_t most = 0;
  for (std::size_t t : indices) {
    if (t < labels.size() && labels[t] >= 0) most = std::max(most, ++per_scene[labels[t]]);
  }
  return static_cast<double>(most) / static_cast<double>(indices.size());
}

std::string corpus_fingerprint(std::span<const LabeledVideo> corpus) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  auto mix_in = [&h](const void* data, std::size_t size) {
    h = fnv1a64(std::string_view(static_cast<const char*>(data), size), h);
  };
  for (const auto& video : corpus) {
    const auto values = video.features.values();
    const std::uint64_t dims[2] = {video.features.frames(), video.features.dim()};
    mix_in(dims, sizeof dims);
    mix_in(values.data(), values.size_bytes());
    mix_in(video.labels.data(), video.labels.size() * sizeof(int));
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

BenchRow evaluate_sampler(std::span<const LabeledVideo> corpus, SamplerKind sampler,
                          const SamplingConfig& config, std::uint64_t seed, unsigned workers) {
  validate_config(config);
  if (sampler == SamplerKind::mif) {
    throw Error(ErrorCode::InvalidConfig, "mif needs question scores; the bench has none",
                "sampler");
  }
  const auto n = static_cast<std::size_t>(config.frames_per_video);
  std::vector<SampleSelection> picks(corpus.size());
  parallel_for(corpus.size(), workers, [&](std::size_t v) {
    const auto& video = corpus[v];
    switch (sampler) {
      case SamplerKind::mdf: picks[v] = mdf_select(video.features, config); break;
      case SamplerKind::uniform: picks[v] = uniform_select(video.features.frames(), n); break;
      case SamplerKind::random:
        picks[v] = random_select(video.features.frames(), n, mix_seed(seed, v));
        break;
      case SamplerKind::mif: break;
    }
  });

  BenchRow row;
  row.sampler = std::string(to_string(sampler));
  row.lambda = config.lambda;
  row.frames_per_video = config.frames_per_video;
  row.videos = corpus.size();
  double coverage_sum = 0.0;
  double redundancy_sum = 0.0;
  for (std::size_t v = 0; v < corpus.size(); ++v) {
    const auto& video = corpus[v];
    const double c = scene_coverage(picks[v].indices, video.labels, video.scene_count);
    row.success.push_back(picks[v].success);
    row.coverage.push_back(c);
    if (picks[v].success) ++row.n_success;
    coverage_sum += c;
    redundancy_sum += redundancy(picks[v].indices, video.labels);
  }
  if (row.videos > 0) {
    const auto m = static_cast<double>(row.videos);
    row.r_success = static_cast<double>(row.n_success) / m;
    row.mean_coverage = coverage_sum / m;
    row.mean_redundancy = redundancy_sum / m;
  }
  return row;
}

BenchReport sweep_lambda(std::span<const LabeledVideo> corpus, std::span<const double> grid,
                         const SamplingConfig& config, unsigned workers) {
  if (grid.empty()) throw Error(ErrorCode::InvalidConfig, "lambda grid is empty", "lambda");
  BenchReport report;
  report.corpus_fingerprint = corpus_fingerprint(corpus);
  std::optional<std::size_t> best;
  for (double lambda : grid) {
    auto c = config;
    c.lambda = lambda;
    report.rows.push_back(evaluate_sampler(corpus, SamplerKind::mdf, c, 0, workers));
    const auto& row = report.rows.back();
    if (row.n_success == row.videos && (!best || lambda < report.rows[*best].lambda)) {
      best = report.rows.size() - 1;
    }
  }
  if (best) {
    report.rows[*best].min_full_success = true;
    report.min_full_success_lambda = report.rows[*best].lambda;
  }
  return report;
}

BenchReport compare_samplers(std::span<const LabeledVideo> corpus,
                             std::span<const SamplerKind> samplers, const SamplingConfig& config,
                             std::uint64_t seed, unsigned workers) {
  BenchReport report;
  report.corpus_fingerprint = corpus_fingerprint(corpus);
  for (auto sampler : samplers) {
    report.rows.push_back(evaluate_sampler(corpus, sampler, config, seed, workers));
  }
  return report;
}

std::string BenchReport::to_csv() const {
  std::string out = kBenchCsvHeader;
  out += '\n';
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.6f,%d,%zu,%zu,%.6f,%.6f,%.6f,%s,%d\n", r.sampler.c_str(),
                  r.lambda, r.frames_per_video, r.videos, r.n_success, r.r_success,
                  r.mean_coverage, r.mean_redundancy, corpus_fingerprint.c_str(),
                  r.min_full_success ? 1 : 0);
    out += buf;
  }
  return out;
}

namespace {

double parse_real(std::string_view text) {
  const std::string s(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::InvalidConfig, "bad number '" + s + "' in lambda grid", "lambda");
  }
  return v;
}

double round9(double x) { return std::round(x * 1e9) / 1e9; }

}  // namespace

std::vector<double> parse_lambda_grid(std::string_view text) {
  std::vector<double> grid;
  if (text.find(':') != std::string_view::npos) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
      if (i == text.size() || text[i] == ':') {
        parts.push_back(text.substr(start, i - start));
        start = i + 1;
      }
    }
    if (parts.size() != 3) {
      throw Error(ErrorCode::InvalidConfig, "lambda grid must be start:stop:step", "lambda");
    }
    const double lo = parse_real(parts[0]);
    const double hi = parse_real(parts[1]);
    const double step = parse_real(parts[2]);
    if (step <= 0.0 || hi < lo) {
      throw Error(ErrorCode::InvalidConfig, "lambda grid needs step > 0 and stop >= start", "lambda");
    }
    for (std::size_t i = 0;; ++i) {
      const double v = round9(lo + static_cast<double>(i) * step);
      if (v > hi + 1e-9) break;
      grid.push_back(v);
    }
  } else {
    std::size_t start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
      if (i == text.size() || text[i] == ',') {
        grid.push_back(round9(parse_real(text.substr(start, i - start))));
        start = i + 1;
      }
    }
  }
  for (double v : grid) {
    if (!(v > 0.0)) throw Error(ErrorCode::InvalidConfig, "lambda must be > 0", "lambda");
  }
  return grid;
}

}  // namespace framesift
