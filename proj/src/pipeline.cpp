#include "framesift/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <fstream>
#include <mutex>
#include <optional>
#include <set>
#include <thread>

#include "framesift/baselines.hpp"
#include "framesift/mdf.hpp"
#include "framesift/packed.hpp"
#include "framesift/parallel.hpp"

namespace framesift {

namespace fs = std::filesystem;

std::string_view to_string(SamplerKind kind) noexcept {
  switch (kind) {
    case SamplerKind::mdf: return "mdf";
    case SamplerKind::mif: return "mif";
    case SamplerKind::uniform: return "uniform";
    case SamplerKind::random: return "random";
  }
  return "unknown";
}

SamplerKind parse_sampler(std::string_view text) {
  for (auto kind : {SamplerKind::mdf, SamplerKind::mif, SamplerKind::uniform, SamplerKind::random}) {
    if (text == to_string(kind)) return kind;
  }
  throw Error(ErrorCode::InvalidConfig,
              "sampler must be mdf, mif, uniform or random, got '" + std::string(text) + "'",
              "sampler");
}

std::string_view to_string(RecordOutcome::Status status) noexcept {
  switch (status) {
    case RecordOutcome::Status::sampled: return "sampled";
    case RecordOutcome::Status::skipped: return "skipped";
    case RecordOutcome::Status::failed: return "failed";
  }
  return "unknown";
}

std::string record_key(const std::string& video_id, const std::string& question_id) {
  return question_id.empty() ? video_id : video_id + "#" + question_id;
}

std::vector<ManifestRecord> read_manifest(std::istream& in, const fs::path& base_dir) {
  std::vector<ManifestRecord> records;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "manifest line " + std::to_string(line_no) + ": ";
    ManifestRecord r;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto& id = j.at("video_id");
      r.video_id = id.is_string() ? id.get<std::string>() : id.dump();
      r.source = j.at("source").get<std::string>();
      const auto& count = j.at("frame_count");
      if (!count.is_number_integer() || count.get<std::int64_t>() < 1) {
        throw Error(ErrorCode::ManifestInvalid, where + "frame_count must be a positive integer");
      }
      r.frame_count = count.get<std::size_t>();
      if (j.contains("questions")) {
        for (const auto& q : j.at("questions")) {
          r.questions.push_back(q.is_string() ? q.get<std::string>() : q.dump());
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ManifestInvalid, where + e.what());
    }
    if (r.video_id.empty() || r.source.empty()) {
      throw Error(ErrorCode::ManifestInvalid, where + "video_id and source must be non-empty");
    }
    if (r.video_id.find('#') != std::string::npos) {
      throw Error(ErrorCode::ManifestInvalid, where + "video_id may not contain '#'");
    }
    if (!seen.insert(r.video_id).second) {
      throw Error(ErrorCode::ManifestInvalid, where + "duplicate video_id '" + r.video_id + "'");
    }
    std::set<std::string> questions;
    for (const auto& q : r.questions) {
      if (q.empty() || !questions.insert(q).second) {
        throw Error(ErrorCode::ManifestInvalid, where + "empty or repeated question id");
      }
    }
    if (!base_dir.empty() && r.source.is_relative()) r.source = base_dir / r.source;
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<ManifestRecord> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open manifest " + path.string());
  return read_manifest(in, path.parent_path());
}

namespace {

struct Unit {
  std::string key;
  std::string question;
  std::size_t slot = 0;  // position among the manifest record's outcomes
};

struct Job {
  std::size_t manifest_index = 0;
  std::vector<Unit> units;
};

struct JobResult {
  std::vector<PackedRecord> records;
  std::vector<std::pair<std::size_t, RecordOutcome>> outcomes;  // (slot, outcome)
  std::size_t invocations = 0;
};

struct Source {
  bool is_dir = false;
  std::vector<fs::path> frame_files;
  std::optional<FrameFeatures> features;
  std::size_t frames = 0;
};

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Source load_source(const ManifestRecord& record, const PipelineOptions& options) {
  Source src;
  std::error_code ec;
  if (fs::is_directory(record.source, ec)) {
    src.is_dir = true;
    src.frame_files = list_frame_files(record.source);
    src.frames = src.frame_files.size();
    if (src.frames != record.frame_count) {
      throw Error(ErrorCode::InvalidInput, "manifest says " + std::to_string(record.frame_count) +
                                               " frames, " + record.source.string() + " has " +
                                               std::to_string(src.frames));
    }
    if (options.sampler == SamplerKind::mdf) {
      src.features = load_frame_directory(record.source, options.featurizer, record.video_id);
    }
  } else {
    if (!fs::is_regular_file(record.source, ec)) {
      throw Error(ErrorCode::Io, "source " + record.source.string() + " does not exist");
    }
    src.features = load_embedding_file(record.source);
    src.frames = src.features->frames();
    if (src.frames != record.frame_count) {
      throw Error(ErrorCode::InvalidInput, "manifest says " + std::to_string(record.frame_count) +
                                               " frames, " + record.source.string() + " has " +
                                               std::to_string(src.frames));
    }
  }
  return src;
}

SampleSelection run_sampler(const ManifestRecord& record, const Unit& unit, const Source& src,
                            const PipelineOptions& options) {
  const auto n = static_cast<std::size_t>(options.config.frames_per_video);
  switch (options.sampler) {
    case SamplerKind::mdf:
      return mdf_select(*src.features, options.config);
    case SamplerKind::uniform:
      return uniform_select(src.frames, n);
    case SamplerKind::random:
      return random_select(src.frames, n, mix_seed(options.seed, fnv1a64(record.video_id)));
    case SamplerKind::mif: {
      auto selection = mif_select(*options.scores, record.video_id, unit.question, n);
      for (std::size_t t : selection.indices) {
        if (t >= src.frames) {
          throw Error(ErrorCode::InvalidInput, "scored frame " + std::to_string(t) +
                                                   " lies outside " + record.video_id);
        }
      }
      return selection;
    }
  }
  throw Error(ErrorCode::InvalidConfig, "unknown sampler", "sampler");
}

std::string describe(const std::exception& e) { return e.what(); }

JobResult run_job(const ManifestRecord& record, const Job& job, const PipelineOptions& options) {
  JobResult result;
  auto fail_all = [&](const std::string& message) {
    for (const auto& unit : job.units) {
      RecordOutcome o{unit.key, record.video_id, RecordOutcome::Status::failed, false, {}, message};
      result.outcomes.emplace_back(unit.slot, std::move(o));
    }
  };
  std::optional<Source> src;
  try {
    src = load_source(record, options);
  } catch (const std::exception& e) {
    fail_all(describe(e));
    return result;
  }
  for (const auto& unit : job.units) {
    RecordOutcome o{unit.key, record.video_id, RecordOutcome::Status::sampled, false, {}, {}};
    try {
      ++result.invocations;
      auto selection = run_sampler(record, unit, *src, options);
      PackedRecord packed;
      packed.id = unit.key;
      if (src->is_dir) {
        std::vector<ImageBlob> images;
        for (std::size_t t : selection.indices) images.push_back({t, read_bytes(src->frame_files[t])});
        packed.kind = PayloadKind::image_blob;
        packed.payload = encode_image_blobs(images);
      } else {
        packed.kind = PayloadKind::feature_rows;
        packed.payload = encode_feature_rows(*src->features, selection.indices);
      }
      o.success = selection.success;
      o.indices = selection.indices;
      packed.selection = std::move(selection);
      result.records.push_back(std::move(packed));
    } catch (const std::exception& e) {
      o.status = RecordOutcome::Status::failed;
      o.error = describe(e);
    }
    result.outcomes.emplace_back(unit.slot, std::move(o));
  }
  return result;
}

}  // namespace

RunReport process_manifest(const std::vector<ManifestRecord>& manifest, const fs::path& out,
                           const PipelineOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  validate_config(options.config);
  if (options.sampler == SamplerKind::mif && options.scores == nullptr) {
    throw Error(ErrorCode::InvalidConfig, "the mif sampler needs a score table", "scores");
  }

  std::vector<std::vector<RecordOutcome>> slots(manifest.size());
  std::vector<Job> jobs;
  bool finish_existing = false;
  {
    std::optional<PackedReader> existing;
    std::error_code ec;
    if (fs::exists(out, ec) && fs::file_size(out, ec) > 0) {
      existing.emplace(out);
      finish_existing = existing->recovered();
    }
    for (std::size_t m = 0; m < manifest.size(); ++m) {
      const auto& record = manifest[m];
      std::vector<std::string> questions{""};
      if (options.sampler == SamplerKind::mif) {
        questions = record.questions;
        if (questions.empty()) {
          for (const auto& [video, question] : options.scores->groups()) {
            if (video == record.video_id) questions.push_back(question);
          }
        }
        if (questions.empty()) questions.push_back("");
      }
      Job job{m, {}};
      for (const auto& q : questions) {
        const auto key = record_key(record.video_id, q);
        const std::size_t slot = slots[m].size();
        slots[m].push_back({key, record.video_id, RecordOutcome::Status::skipped, false, {}, {}});
        if (existing && existing->contains(key)) {
          try {
            slots[m].back().success = existing->read(key).selection.success;
          } catch (const Error& e) {
            slots[m].back().status = RecordOutcome::Status::failed;
            slots[m].back().error = e.what();
          }
        } else {
          job.units.push_back({key, q, slot});
        }
      }
      if (!job.units.empty()) jobs.push_back(std::move(job));
    }
  }

  RunReport report;
  report.sampler = std::string(to_string(options.sampler));
  report.workers = options.workers == 0 ? default_worker_count() : options.workers;

  if (!jobs.empty() || finish_existing) {
    PackedWriter writer(out);
    std::vector<std::optional<JobResult>> results(jobs.size());
    std::mutex mutex;
    std::condition_variable cv;
    std::size_t committed = 0;
    bool abort = false;
    std::atomic<std::size_t> next{0};
    const std::size_t ahead = std::size_t{report.workers} * 4;

    auto worker = [&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= jobs.size()) return;
        {
          std::unique_lock lock(mutex);
          cv.wait(lock, [&] { return abort || i < committed + ahead; });
          if (abort) return;
        }
        auto result = run_job(manifest[jobs[i].manifest_index], jobs[i], options);
        {
          std::lock_guard lock(mutex);
          results[i] = std::move(result);
        }
        cv.notify_all();
      }
    };

    std::vector<std::jthread> pool;
    const auto pool_size = std::min<std::size_t>(report.workers, jobs.size());
    for (std::size_t w = 0; w < pool_size; ++w) pool.emplace_back(worker);

    try {
      for (std::size_t i = 0; i < jobs.size(); ++i) {
        JobResult result;
        {
          std::unique_lock lock(mutex);
          cv.wait(lock, [&] { return results[i].has_value(); });
          result = std::move(*results[i]);
          results[i].reset();
        }
        for (const auto& record : result.records) writer.append(record);
        report.sampler_invocations += result.invocations;
        for (auto& [slot, outcome] : result.outcomes) {
          slots[jobs[i].manifest_index][slot] = std::move(outcome);
        }
        {
          std::lock_guard lock(mutex);
          committed = i + 1;
        }
        cv.notify_all();
      }
    } catch (...) {
      {
        std::lock_guard lock(mutex);
        abort = true;
      }
      cv.notify_all();
      throw;
    }
    pool.clear();
    writer.finish();
  }

  for (auto& outcomes : slots) {
    for (auto& o : outcomes) {
      switch (o.status) {
        case RecordOutcome::Status::sampled: ++report.processed; break;
        case RecordOutcome::Status::skipped: ++report.skipped; break;
        case RecordOutcome::Status::failed: ++report.errors; break;
      }
      if (o.status != RecordOutcome::Status::failed) {
        ++report.n_total;
        if (o.success) ++report.n_success;
      }
      report.records.push_back(std::move(o));
    }
  }
  report.r_success = report.n_total == 0 ? 0.0
                                         : static_cast<double>(report.n_success) /
                                               static_cast<double>(report.n_total);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

void to_json(nlohmann::json& j, const RunReport& report) {
  auto records = nlohmann::json::array();
  for (const auto& r : report.records) {
    nlohmann::json entry = {{"key", r.key},
                            {"video_id", r.video_id},
                            {"status", to_string(r.status)},
                            {"success", r.success}};
    if (r.status == RecordOutcome::Status::sampled) entry["indices"] = r.indices;
    if (!r.error.empty()) entry["error"] = r.error;
    records.push_back(std::move(entry));
  }
  j = {{"sampler", report.sampler},
       {"workers", report.workers},
       {"sampler_invocations", report.sampler_invocations},
       {"processed", report.processed},
       {"skipped", report.skipped},
       {"errors", report.errors},
       {"n_success", report.n_success},
       {"n_total", report.n_total},
       {"r_success", report.r_success},
       {"wall_seconds", report.wall_seconds},
       {"records", std::move(records)}};
}

fs::path report_path(const fs::path& out) {
  auto p = out;
  p += ".report.json";
  return p;
}

void write_report(const fs::path& path, const RunReport& report) {
  std::ofstream f(path, std::ios::trunc);
  f << nlohmann::json(report).dump(2) << '\n';
  if (!f) throw Error(ErrorCode::Io, "cannot write report " + path.string());
}

}  // namespace framesift
