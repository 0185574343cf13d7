#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "framesift/baselines.hpp"
#include "framesift/bench.hpp"
#include "framesift/mdf.hpp"
#include "framesift/mif.hpp"
#include "framesift/pipeline.hpp"
#include "framesift/scorer.hpp"

using namespace framesift;
namespace fs = std::filesystem;

namespace {

/// Sampling flags shared by several subcommands. Flags given on the command
/// line win over the config file.
struct ConfigFlags {
  std::string file;
  int frames_per_video = 0;
  double lambda = 0.0;
  std::string dom_mode;
  int min_window = 0;
  CLI::Option* n_opt = nullptr;
  CLI::Option* lambda_opt = nullptr;
  CLI::Option* mode_opt = nullptr;
  CLI::Option* window_opt = nullptr;

  void attach(CLI::App* app, bool mdf_knobs) {
    app->add_option("--config", file, "key = value config file")->check(CLI::ExistingFile);
    n_opt = app->add_option("-n,--frames-per-video", frames_per_video, "frames to keep (default 6)");
    if (!mdf_knobs) return;
    lambda_opt = app->add_option("--lambda", lambda, "window divisor (default 2.5)");
    mode_opt = app->add_option("--dom-mode", dom_mode, "raw_sum or mean");
    window_opt = app->add_option("--min-window", min_window, "window floor (default 1)");
  }

  SamplingConfig resolve() const {
    SamplingConfig c = file.empty() ? SamplingConfig{} : load_config_file(file);
    if (n_opt && n_opt->count()) c.frames_per_video = frames_per_video;
    if (lambda_opt && lambda_opt->count()) c.lambda = lambda;
    if (mode_opt && mode_opt->count()) c.dom_mode = parse_dom_mode(dom_mode);
    if (window_opt && window_opt->count()) c.min_window = min_window;
    validate_config(c);
    return c;
  }
};

struct FeaturizerFlags {
  std::string kind = "blockmean";
  std::size_t grid = 4;
  std::size_t bins = 32;

  void attach(CLI::App* app) {
    app->add_option("--featurizer", kind, "blockmean or histogram (frame directories)");
    app->add_option("--grid", grid, "blockmean grid size");
    app->add_option("--bins", bins, "histogram bins");
  }

  FeaturizerOptions resolve() const { return {parse_featurizer(kind), grid, bins}; }
};

FrameFeatures load_input(const std::string& input, const FeaturizerOptions& options) {
  if (fs::is_directory(input)) return load_frame_directory(input, options);
  return load_embedding_file(input);
}

void emit(const std::string& path, const nlohmann::json& doc) {
  if (path.empty() || path == "-") {
    std::cout << doc.dump(2) << '\n';
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << doc.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path);
}

template <typename T>
std::vector<T> read_jsonl_file(const std::string& path,
                               std::vector<T> (*reader)(std::istream&)) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  return reader(in);
}

std::vector<SamplerKind> parse_samplers(const std::string& text) {
  std::vector<SamplerKind> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_sampler(item));
  if (out.empty()) throw Error(ErrorCode::InvalidConfig, "no samplers given", "samplers");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Offline keyframe sampling for video question answering"};
  app.require_subcommand(1);
  std::function<int()> run;

  // mdf
  auto* mdf = app.add_subcommand("mdf", "Most Dominant Frames for one video");
  std::string mdf_input, mdf_emit;
  ConfigFlags mdf_cfg;
  FeaturizerFlags mdf_feat;
  mdf->add_option("--input", mdf_input, "embedding file or frame directory")->required();
  mdf->add_option("--emit", mdf_emit, "selection JSON path (default stdout)");
  mdf_cfg.attach(mdf, true);
  mdf_feat.attach(mdf);
  mdf->callback([&] {
    run = [&] {
      const auto config = mdf_cfg.resolve();
      const auto features = load_input(mdf_input, mdf_feat.resolve());
      nlohmann::json doc = mdf_select(features, config);
      doc["video_id"] = features.video_id();
      doc["config"] = config;
      emit(mdf_emit, doc);
      return 0;
    };
  });

  // uniform / random
  std::string base_input, base_emit;
  std::size_t base_frames = 0;
  std::uint64_t seed = 0;
  ConfigFlags base_cfg[2];
  FeaturizerFlags base_feat[2];
  auto* uniform = app.add_subcommand("uniform", "center-of-bin uniform sampling");
  auto* random = app.add_subcommand("random", "seeded random sampling without replacement");
  for (int i = 0; i < 2; ++i) {
    auto* sub = i == 0 ? uniform : random;
    auto* in = sub->add_option("--input", base_input, "embedding file or frame directory");
    sub->add_option("--frame-count", base_frames, "video length T, instead of --input")
        ->excludes(in);
    sub->add_option("--emit", base_emit, "selection JSON path (default stdout)");
    base_cfg[i].attach(sub, false);
    base_feat[i].attach(sub);
  }
  random->add_option("--seed", seed, "random seed");
  auto run_baseline = [&](bool is_random) {
    const auto config = base_cfg[is_random ? 1 : 0].resolve();
    std::size_t frames = base_frames;
    std::string id;
    if (!base_input.empty()) {
      if (fs::is_directory(base_input)) {
        frames = list_frame_files(base_input).size();
        id = fs::path(base_input).filename().string();
      } else {
        const auto f = load_embedding_file(base_input);
        frames = f.frames();
        id = f.video_id();
      }
    }
    if (frames == 0) throw Error(ErrorCode::InvalidInput, "give --input or --frame-count");
    const auto n = static_cast<std::size_t>(config.frames_per_video);
    nlohmann::json doc = is_random ? random_select(frames, n, seed) : uniform_select(frames, n);
    if (!id.empty()) doc["video_id"] = id;
    doc["frame_count"] = frames;
    emit(base_emit, doc);
    return 0;
  };
  uniform->callback([&] { run = [&] { return run_baseline(false); }; });
  random->callback([&] { run = [&] { return run_baseline(true); }; });

  // mif
  auto* mif = app.add_subcommand("mif", "Most Implied Frames from question-frame scores");
  std::string scores_path, captions_path, questions_path, scorer_url, cache_path, write_scores,
      mif_emit, only_video, only_question;
  std::optional<std::uint64_t> mock_seed;
  int timeout_ms = 10000;
  int retries = 4;
  unsigned concurrency = 4;
  ConfigFlags mif_cfg;
  auto* scores_opt = mif->add_option("--scores", scores_path, "precomputed score JSONL");
  auto* captions_opt = mif->add_option("--captions", captions_path, "caption JSONL")
                           ->excludes(scores_opt);
  mif->add_option("--questions", questions_path, "question JSONL")->needs(captions_opt);
  mif->add_option("--scorer-url", scorer_url, "scoring endpoint base URL")->needs(captions_opt);
  mif->add_option("--mock-seed", mock_seed, "score with the built-in hash scorer")
      ->needs(captions_opt);
  mif->add_option("--timeout-ms", timeout_ms, "per-request timeout")->check(CLI::PositiveNumber);
  mif->add_option("--retries", retries, "attempts per pair")->check(CLI::PositiveNumber);
  mif->add_option("--concurrency", concurrency, "requests in flight")->check(CLI::PositiveNumber);
  mif->add_option("--cache", cache_path, "score cache JSONL, read and updated");
  mif->add_option("--write-scores", write_scores, "save the fetched score table");
  mif->add_option("--video", only_video, "only this video");
  mif->add_option("--question", only_question, "only this question");
  mif->add_option("--emit", mif_emit, "selections JSON path (default stdout)");
  mif_cfg.attach(mif, false);
  mif->callback([&] {
    run = [&] {
      const auto config = mif_cfg.resolve();
      ScoreTable table;
      if (!scores_path.empty()) {
        table = load_score_file(scores_path);
      } else if (!captions_path.empty()) {
        if (questions_path.empty()) {
          throw Error(ErrorCode::InvalidInput, "--captions needs --questions");
        }
        if (scorer_url.empty() == !mock_seed.has_value()) {
          throw Error(ErrorCode::InvalidInput, "give exactly one of --scorer-url, --mock-seed");
        }
        const auto captions = read_jsonl_file(captions_path, &read_caption_file);
        const auto questions = read_jsonl_file(questions_path, &read_question_file);
        std::unique_ptr<Scorer> scorer;
        if (mock_seed) {
          scorer = std::make_unique<MockScorer>(*mock_seed);
        } else {
          scorer = std::make_unique<HttpScorer>(scorer_url, std::chrono::milliseconds(timeout_ms));
        }
        ScoreCache cache;
        if (!cache_path.empty()) cache.load(cache_path);
        FetchOptions fo;
        fo.retry.max_attempts = retries;
        fo.max_concurrency = concurrency;
        FetchStats stats;
        try {
          table = fetch_scores(questions, captions, *scorer, cache, fo, &stats);
        } catch (...) {
          if (!cache_path.empty()) cache.save(cache_path);
          throw;
        }
        if (!cache_path.empty()) cache.save(cache_path);
        std::fprintf(stderr, "scored %zu pairs: %zu cached, %zu requests\n", stats.pairs,
                     stats.cache_hits, stats.requests);
        if (!write_scores.empty()) {
          std::ofstream out(write_scores, std::ios::trunc);
          if (!out) throw Error(ErrorCode::Io, "cannot write " + write_scores);
          write_score_file(out, table);
        }
      } else {
        throw Error(ErrorCode::InvalidInput, "give --scores or --captions/--questions");
      }
      auto doc = nlohmann::json::array();
      for (const auto& [video, question] : table.groups()) {
        if (!only_video.empty() && video != only_video) continue;
        if (!only_question.empty() && question != only_question) continue;
        nlohmann::json entry = mif_select(table, video, question,
                                          static_cast<std::size_t>(config.frames_per_video));
        entry["video_id"] = video;
        entry["question_id"] = question;
        doc.push_back(std::move(entry));
      }
      if (doc.empty() && (!only_video.empty() || !only_question.empty())) {
        throw Error(ErrorCode::MissingGroup, "no score group matches the filter");
      }
      emit(mif_emit, doc);
      return 0;
    };
  });

  // pack
  auto* pack = app.add_subcommand("pack", "sample a manifest into a packed dataset");
  std::string manifest_path, out_path, sampler_name = "mdf", pack_scores;
  std::uint64_t pack_seed = 0;
  unsigned workers = 0;
  ConfigFlags pack_cfg;
  FeaturizerFlags pack_feat;
  pack->add_option("--manifest", manifest_path, "manifest JSONL")->required();
  pack->add_option("--out", out_path, "pack file")->required();
  pack->add_option("--sampler", sampler_name, "mdf, mif, uniform or random");
  pack->add_option("--scores", pack_scores, "score JSONL (mif)");
  pack->add_option("--seed", pack_seed, "random sampler seed");
  pack->add_option("--workers", workers, "worker threads (default: one per core)");
  pack_cfg.attach(pack, true);
  pack_feat.attach(pack);
  pack->callback([&] {
    run = [&] {
      PipelineOptions o;
      o.sampler = parse_sampler(sampler_name);
      o.config = pack_cfg.resolve();
      o.seed = pack_seed;
      o.workers = workers;
      o.featurizer = pack_feat.resolve();
      ScoreTable table;
      if (!pack_scores.empty()) {
        table = load_score_file(pack_scores);
        o.scores = &table;
      }
      const auto manifest = load_manifest(manifest_path);
      const auto report = process_manifest(manifest, out_path, o);
      write_report(report_path(out_path), report);
      for (const auto& r : report.records) {
        if (r.status == RecordOutcome::Status::failed) {
          std::fprintf(stderr, "failed %s: %s\n", r.key.c_str(), r.error.c_str());
        }
      }
      std::printf(
          "processed %zu, skipped %zu, errors %zu, success %zu/%zu (%.4f), %u workers, %.2fs\n",
          report.processed, report.skipped, report.errors, report.n_success, report.n_total,
          report.r_success, report.workers, report.wall_seconds);
      return report.errors == 0 ? 0 : 1;
    };
  });

  // bench
  auto* bench = app.add_subcommand("bench", "synthetic benchmark");
  std::string spec_path, samplers_text, grid_text, csv_path;
  std::uint64_t bench_seed = 0;
  unsigned bench_workers = 0;
  ConfigFlags bench_cfg;
  bench->add_option("--spec", spec_path, "synthetic corpus spec JSON")->required();
  bench->add_option("--samplers", samplers_text, "comma list of mdf, uniform, random");
  bench->add_option("--lambda-grid", grid_text, "start:stop:step or a comma list (mdf sweep)");
  bench->add_option("--out", csv_path, "CSV path (default stdout)");
  bench->add_option("--seed", bench_seed, "random sampler seed");
  bench->add_option("--workers", bench_workers, "worker threads (default: one per core)");
  bench_cfg.attach(bench, true);
  bench->callback([&] {
    run = [&] {
      const auto spec = load_spec_file(spec_path);
      const auto config = bench_cfg.resolve();
      const auto corpus = gen_corpus(spec, bench_workers);
      BenchReport report;
      report.corpus_fingerprint = corpus_fingerprint(corpus);
      if (!samplers_text.empty() || grid_text.empty()) {
        const auto samplers = parse_samplers(samplers_text.empty() ? "mdf,uniform,random" : samplers_text);
        report = compare_samplers(corpus, samplers, config, bench_seed, bench_workers);
      }
      if (!grid_text.empty()) {
        const auto grid = parse_lambda_grid(grid_text);
        auto sweep = sweep_lambda(corpus, grid, config, bench_workers);
        for (auto& row : sweep.rows) report.rows.push_back(std::move(row));
        report.min_full_success_lambda = sweep.min_full_success_lambda;
        if (report.min_full_success_lambda) {
          std::fprintf(stderr, "smallest lambda with full success: %g\n",
                       *report.min_full_success_lambda);
        } else {
          std::fprintf(stderr, "no lambda in the grid reaches full success\n");
        }
      }
      const auto csv = report.to_csv();
      if (csv_path.empty() || csv_path == "-") {
        std::cout << csv;
      } else {
        std::ofstream out(csv_path, std::ios::trunc);
        if (!out) throw Error(ErrorCode::Io, "cannot write " + csv_path);
        out << csv;
      }
      return 0;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    return run();
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
