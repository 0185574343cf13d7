#include "framesift/core.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace framesift {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::GridTooFine: return "GridTooFine";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::TrailingData: return "TrailingData";
    case ErrorCode::ZeroDimension: return "ZeroDimension";
    case ErrorCode::WindowNonPositive: return "WindowNonPositive";
    case ErrorCode::VideoTooShort: return "VideoTooShort";
    case ErrorCode::BadCount: return "BadCount";
    case ErrorCode::NotEnoughFrames: return "NotEnoughFrames";
    case ErrorCode::MissingGroup: return "MissingGroup";
    case ErrorCode::IncompleteGroup: return "IncompleteGroup";
    case ErrorCode::DuplicateEntry: return "DuplicateEntry";
    case ErrorCode::ScorerUnavailable: return "ScorerUnavailable";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::ManifestInvalid: return "ManifestInvalid";
    case ErrorCode::UnknownId: return "UnknownId";
    case ErrorCode::CorruptRecord: return "CorruptRecord";
    case ErrorCode::DimTooSmall: return "DimTooSmall";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

std::string_view to_string(DomMode mode) noexcept {
  return mode == DomMode::mean ? "mean" : "raw_sum";
}

DomMode parse_dom_mode(std::string_view text) {
  if (text == "mean") return DomMode::mean;
  if (text == "raw_sum") return DomMode::raw_sum;
  throw Error(ErrorCode::InvalidConfig,
              "dom_mode must be mean or raw_sum, got '" + std::string(text) + "'",
              "dom_mode");
}

FrameFeatures::FrameFeatures(std::string video_id, std::size_t frames,
                             std::size_t dim, std::vector<double> values,
                             std::vector<double> timestamps)
    : video_id_(std::move(video_id)),
      frames_(frames),
      dim_(dim),
      values_(std::move(values)),
      timestamps_(std::move(timestamps)) {
  if (frames_ == 0 || dim_ == 0) {
    throw Error(ErrorCode::ZeroDimension, "feature matrix needs T >= 1 and d >= 1");
  }
  if (values_.size() != frames_ * dim_) {
    throw Error(ErrorCode::InvalidInput,
                "expected " + std::to_string(frames_ * dim_) + " values, got " +
                    std::to_string(values_.size()));
  }
  for (double v : values_) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::NonFiniteInput, "feature matrix has a non-finite entry");
    }
  }
  if (!timestamps_.empty()) {
    if (timestamps_.size() != frames_) {
      throw Error(ErrorCode::InvalidInput, "timestamp count differs from frame count");
    }
    for (std::size_t t = 0; t < frames_; ++t) {
      const double ts = timestamps_[t];
      if (!std::isfinite(ts) || ts < 0.0 || (t > 0 && ts < timestamps_[t - 1])) {
        throw Error(ErrorCode::InvalidInput,
                    "timestamps must be finite, non-negative and monotone");
      }
    }
  }
}

void validate_config(const SamplingConfig& config) {
  if (config.frames_per_video < 1) {
    throw Error(ErrorCode::InvalidConfig, "frames_per_video must be >= 1",
                "frames_per_video");
  }
  if (!(config.lambda > 0.0) || !std::isfinite(config.lambda)) {
    throw Error(ErrorCode::InvalidConfig, "lambda must be a positive finite number",
                "lambda");
  }
  if (config.min_window < 1) {
    throw Error(ErrorCode::InvalidConfig, "min_window must be >= 1", "min_window");
  }
}

int derive_window(std::size_t video_length, const SamplingConfig& config) {
  const double ratio = static_cast<double>(video_length) /
                       (config.lambda * config.frames_per_video);
  // Decimal lambdas (2.3, 2.7) are not exact in binary; the nudge keeps an
  // exact quotient from flooring one below its true value.
  const double w = std::floor(ratio * (1.0 + 1e-12));
  if (!(w >= config.min_window)) return config.min_window;
  if (w > 2147483647.0) return 2147483647;
  return static_cast<int>(w);
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

int parse_int_field(std::string_view value, const char* field) {
  try {
    std::size_t used = 0;
    const std::string text(value);
    const long parsed = std::stol(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return static_cast<int>(parsed);
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidConfig,
                "not an integer: '" + std::string(value) + "'", field);
  }
}

double parse_double_field(std::string_view value, const char* field) {
  try {
    std::size_t used = 0;
    const std::string text(value);
    const double parsed = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return parsed;
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidConfig,
                "not a number: '" + std::string(value) + "'", field);
  }
}

}  // namespace

SamplingConfig parse_config_text(std::string_view text, SamplingConfig base) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (const auto hash = view.find('#'); hash != std::string_view::npos) {
      view = view.substr(0, hash);
    }
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::InvalidConfig,
                  "line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = trim(view.substr(0, eq));
    const auto value = trim(view.substr(eq + 1));
    if (key == "frames_per_video") {
      base.frames_per_video = parse_int_field(value, "frames_per_video");
    } else if (key == "lambda") {
      base.lambda = parse_double_field(value, "lambda");
    } else if (key == "dom_mode") {
      base.dom_mode = parse_dom_mode(value);
    } else if (key == "min_window") {
      base.min_window = parse_int_field(value, "min_window");
    } else {
      throw Error(ErrorCode::InvalidConfig, "unknown key '" + std::string(key) + "'",
                  std::string(key));
    }
  }
  return base;
}

SamplingConfig load_config_file(const std::string& path, SamplingConfig base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), base);
}

void to_json(nlohmann::json& j, const SamplingConfig& config) {
  j = nlohmann::json{{"frames_per_video", config.frames_per_video},
                     {"lambda", config.lambda},
                     {"dom_mode", std::string(to_string(config.dom_mode))},
                     {"tie_break", "lowest_index"},
                     {"min_window", config.min_window}};
}

void from_json(const nlohmann::json& j, SamplingConfig& config) {
  config.frames_per_video = j.at("frames_per_video").get<int>();
  config.lambda = j.at("lambda").get<double>();
  config.dom_mode = parse_dom_mode(j.at("dom_mode").get<std::string>());
  config.tie_break = TieBreak::lowest_index;
  config.min_window = j.value("min_window", 1);
}

void to_json(nlohmann::json& j, const SampleSelection& selection) {
  j = nlohmann::json{{"indices", selection.indices},
                     {"selection_order", selection.selection_order},
                     {"success", selection.success},
                     {"window", selection.window},
                     {"profile", selection.profile}};
}

void from_json(const nlohmann::json& j, SampleSelection& selection) {
  selection.indices = j.at("indices").get<std::vector<std::size_t>>();
  selection.selection_order = j.at("selection_order").get<std::vector<std::size_t>>();
  selection.success = j.at("success").get<bool>();
  selection.window = j.at("window").get<int>();
  selection.profile = j.at("profile").get<std::vector<double>>();
}

std::uint64_t SplitMix64::below(std::uint64_t bound) noexcept {
  if (bound <= 1) return 0;
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = next();
    if (r >= threshold) return r % bound;
  }
}

double SplitMix64::normal() noexcept {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  SplitMix64 rng(seed ^ (stream * 0xD1B54A32D192ED03ULL));
  return rng.next();
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) noexcept {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace framesift
