#pragma once

// Frame-index windows and crop/flip geometry per clip, plus streaming
// normalization moments.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "cutup/dataset.hpp"
#include "cutup/error.hpp"
#include "cutup/parallel.hpp"
#include "cutup/random.hpp"
#include "cutup/rational.hpp"

namespace cutup {

inline constexpr int kCropSize = 224;

/// Mode follows the split a clip belongs to.
using PlanMode = Split;

struct FramePlanConfig {
  int frames_per_sample = 16;
  int stride = 8;  // tau
  int samples_per_clip = 1;
  PlanMode mode = PlanMode::Train;

  /// C = 5 for test, 1 otherwise.
  static FramePlanConfig for_mode(PlanMode mode, int stride, int frames_per_sample = 16) {
    return {frames_per_sample, stride, mode == PlanMode::Test ? 5 : 1, mode};
  }

  int window_span() const { return stride * frames_per_sample; }

  void validate() const {
    if (frames_per_sample < 1 || stride < 1 || samples_per_clip < 1)
      throw ConfigError("frame plan: frames_per_sample, stride and samples_per_clip must be >= 1");
    if (mode == PlanMode::Test && samples_per_clip != 5)
      throw ConfigError("frame plan: test mode takes 5 samples per clip");
    if (mode != PlanMode::Test && samples_per_clip != 1)
      throw ConfigError("frame plan: train and val modes take 1 sample per clip");
  }
};

struct FrameWindow {
  std::string clip_id;
  int sample_idx = 0;
  std::vector<std::int64_t> frame_indices;

  bool operator==(const FrameWindow&) const = default;
};

struct CropPlan {
  std::string clip_id;
  int sample_idx = 0;
  int crop_idx = 0;
  int resize_w = kCropSize;
  int resize_h = kCropSize;
  int x = 0;
  int y = 0;
  int w = kCropSize;
  int h = kCropSize;
  bool flip = false;

  bool operator==(const CropPlan&) const = default;
};

/// Number of frames in a clip: round(clip_len * fps).
inline std::int64_t clip_frame_count(const Rational& clip_len_s, const Rational& fps) {
  return (clip_len_s * fps).round();
}

/// Window starts for every sample of a clip with M frames.
inline std::vector<std::int64_t> window_starts(std::int64_t frame_count, const FramePlanConfig& cfg,
                                               std::string_view clip_id, std::uint64_t master_seed) {
  const std::int64_t slack = std::max<std::int64_t>(0, frame_count - cfg.window_span());
  std::vector<std::int64_t> starts;
  switch (cfg.mode) {
    case PlanMode::Train:
      for (int j = 0; j < cfg.samples_per_clip; ++j) {
        Stream stream(derive_key(master_seed, std::string_view("frames"), clip_id, j));
        starts.push_back(static_cast<std::int64_t>(stream.next_below(static_cast<std::uint64_t>(slack) + 1)));
      }
      break;
    case PlanMode::Val:
      for (int j = 0; j < cfg.samples_per_clip; ++j) starts.push_back(slack / 2);
      break;
    case PlanMode::Test:
      for (int j = 0; j < cfg.samples_per_clip; ++j) {
        if (cfg.samples_per_clip == 1)
          starts.push_back(0);
        else
          starts.push_back((Rational(j) * Rational(slack) / Rational(cfg.samples_per_clip - 1)).round());
      }
      break;
  }
  return starts;
}

/// Indices start + k*tau for k < F, clamped to the last frame.
inline std::vector<FrameWindow> plan_frames(const ClipSpec& clip, const Rational& fps, const FramePlanConfig& cfg,
                                            std::uint64_t master_seed) {
  cfg.validate();
  const std::int64_t frames = clip_frame_count(clip.length(), fps);
  if (frames < 1)
    throw GeometryError("clip '" + clip.clip_id + "' has no frames (" + clip.length().to_string() + " s at " +
                        fps.to_string() + " fps)");
  const auto starts = window_starts(frames, cfg, clip.clip_id, master_seed);
  std::vector<FrameWindow> out;
  out.reserve(starts.size());
  for (std::size_t j = 0; j < starts.size(); ++j) {
    FrameWindow w{clip.clip_id, static_cast<int>(j), {}};
    w.frame_indices.reserve(static_cast<std::size_t>(cfg.frames_per_sample));
    for (int k = 0; k < cfg.frames_per_sample; ++k)
      w.frame_indices.push_back(std::min(starts[j] + static_cast<std::int64_t>(k) * cfg.stride, frames - 1));
    out.push_back(std::move(w));
  }
  return out;
}

/// Aspect-preserving resize width for a height of 224.
inline int resized_width(int orig_w, int orig_h) {
  if (orig_w < 1 || orig_h < 1) throw GeometryError("frame dimensions must be positive");
  return static_cast<int>((Rational(orig_w) * Rational(kCropSize) / Rational(orig_h)).round());
}

/// Test: left/center/right crops. Val: one center crop. Train: one random
/// crop with a fair-coin flip.
inline std::vector<CropPlan> plan_crops(std::string_view clip_id, int sample_idx, int orig_w, int orig_h, PlanMode mode,
                                        std::uint64_t master_seed) {
  const int width = resized_width(orig_w, orig_h);
  if (width < kCropSize)
    throw GeometryError("resized width " + std::to_string(width) + " is narrower than the " +
                        std::to_string(kCropSize) + " px crop");
  const int slack = width - kCropSize;
  auto make = [&](int crop_idx, int x, bool flip) {
    return CropPlan{std::string(clip_id), sample_idx, crop_idx, width, kCropSize, x, 0, kCropSize, kCropSize, flip};
  };
  switch (mode) {
    case PlanMode::Test: return {make(0, 0, false), make(1, slack / 2, false), make(2, slack, false)};
    case PlanMode::Val: return {make(0, slack / 2, false)};
    case PlanMode::Train: {
      Stream stream(derive_key(master_seed, std::string_view("crop"), clip_id, sample_idx));
      const int x = static_cast<int>(stream.next_below(static_cast<std::uint64_t>(slack) + 1));
      return {make(0, x, stream.next_bernoulli_half())};
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// frameplan.jsonl

struct FramePlanEntry {
  FrameWindow window;
  std::vector<CropPlan> crops;

  bool operator==(const FramePlanEntry&) const = default;
};

struct PlanSettings {
  int frames_per_sample = 16;
  int stride = 8;
  int source_width = 640;
  int source_height = 360;
};

inline std::vector<FramePlanEntry> plan_clip(const LabeledClip& clip, const Rational& fps, const PlanSettings& settings,
                                             PlanMode mode, std::uint64_t master_seed) {
  const auto cfg = FramePlanConfig::for_mode(mode, settings.stride, settings.frames_per_sample);
  std::vector<FramePlanEntry> out;
  for (auto& w : plan_frames(clip, fps, cfg, master_seed)) {
    auto crops = plan_crops(clip.clip_id, w.sample_idx, settings.source_width, settings.source_height, mode, master_seed);
    out.push_back({std::move(w), std::move(crops)});
  }
  return out;
}

/// Plans every manifest clip in its own split's mode, or in `forced_mode`.
inline std::vector<FramePlanEntry> plan_manifest(const Manifest& manifest, const std::vector<VideoRecord>& records,
                                                 const PlanSettings& settings, std::uint64_t master_seed,
                                                 unsigned jobs = 1, std::optional<PlanMode> forced_mode = std::nullopt) {
  std::map<std::string, Rational> fps;
  for (const auto& r : records) fps.emplace(r.video_id, r.fps);
  std::vector<std::vector<FramePlanEntry>> per_clip(manifest.clips.size());
  parallel_for(manifest.clips.size(), jobs, [&](std::size_t i) {
    const auto& clip = manifest.clips[i];
    auto it = fps.find(clip.video_id);
    if (it == fps.end())
      throw ValidationError("clip '" + clip.clip_id + "' references unknown video '" + clip.video_id + "'");
    per_clip[i] = plan_clip(clip, it->second, settings, forced_mode.value_or(clip.split), master_seed);
  });
  std::vector<FramePlanEntry> out;
  for (auto& v : per_clip) std::move(v.begin(), v.end(), std::back_inserter(out));
  return out;
}

inline nlohmann::json to_json(const FramePlanEntry& e) {
  nlohmann::json crops = nlohmann::json::array();
  for (const auto& c : e.crops)
    crops.push_back({{"crop_idx", c.crop_idx}, {"x", c.x}, {"y", c.y}, {"w", c.w}, {"h", c.h}, {"flip", c.flip}});
  return {{"clip_id", e.window.clip_id},
          {"sample_idx", e.window.sample_idx},
          {"frame_indices", e.window.frame_indices},
          {"crops", crops}};
}

inline std::string serialize_frame_plans(const std::vector<FramePlanEntry>& entries) {
  std::string out;
  for (const auto& e : entries) out += to_json(e).dump() + "\n";
  return out;
}

inline std::vector<FramePlanEntry> parse_frame_plans(std::string_view text) {
  std::vector<FramePlanEntry> out;
  const auto lines = detail::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    if (lines[i].find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const auto j = detail::parse_json_line(lines[i], lineno, "frameplan");
    detail::reject_unknown(j, {"clip_id", "sample_idx", "frame_indices", "crops"}, lineno, "frameplan");
    FramePlanEntry e;
    try {
      e.window.clip_id = j.at("clip_id").get<std::string>();
      e.window.sample_idx = j.at("sample_idx").get<int>();
      e.window.frame_indices = j.at("frame_indices").get<std::vector<std::int64_t>>();
      for (const auto& c : j.at("crops")) {
        detail::reject_unknown(c, {"crop_idx", "x", "y", "w", "h", "flip"}, lineno, "frameplan crop");
        CropPlan cp;
        cp.clip_id = e.window.clip_id;
        cp.sample_idx = e.window.sample_idx;
        cp.crop_idx = c.at("crop_idx").get<int>();
        cp.x = c.at("x").get<int>();
        cp.y = c.at("y").get<int>();
        cp.w = c.at("w").get<int>();
        cp.h = c.at("h").get<int>();
        cp.flip = c.at("flip").get<bool>();
        e.crops.push_back(cp);
      }
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError("frameplan line " + std::to_string(lineno) + ": " + ex.what(), lineno);
    }
    out.push_back(std::move(e));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalization statistics

struct ChannelMoments {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

/// Welford accumulator over interleaved multi-channel pixel values.
class MomentAccumulator {
 public:
  explicit MomentAccumulator(std::size_t channels = 1) : count_(channels, 0), mean_(channels, 0.0), m2_(channels, 0.0) {
    if (channels == 0) throw ConfigError("moments: need at least one channel");
  }

  std::size_t channels() const noexcept { return mean_.size(); }

  void add(std::size_t channel, double value) {
    auto& n = count_.at(channel);
    ++n;
    const double delta = value - mean_[channel];
    mean_[channel] += delta / static_cast<double>(n);
    m2_[channel] += delta * (value - mean_[channel]);
  }

  /// Adds pixels laid out as c0 c1 ... c(k-1) c0 c1 ...
  void add_interleaved(std::span<const double> values) {
    if (values.size() % channels() != 0)
      throw ValidationError("moments: interleaved stream length is not a multiple of the channel count");
    for (std::size_t i = 0; i < values.size(); ++i) add(i % channels(), values[i]);
  }

  std::vector<ChannelMoments> result() const {
    std::vector<ChannelMoments> out;
    for (std::size_t c = 0; c < channels(); ++c) {
      if (count_[c] == 0) throw ValidationError("moments: empty pixel stream");
      out.push_back({mean_[c], std::sqrt(m2_[c] / static_cast<double>(count_[c]))});
    }
    return out;
  }

 private:
  std::vector<std::uint64_t> count_;
  std::vector<double> mean_;
  std::vector<double> m2_;
};

inline std::vector<ChannelMoments> normalization_moments(std::span<const double> interleaved, std::size_t channels = 1) {
  MomentAccumulator acc(channels);
  acc.add_interleaved(interleaved);
  return acc.result();
}

}  // namespace cutup
