#pragma once

// Synthetic annotation corpora and a noisy-oracle classifier for end-to-end
// runs without video data or a trained model.

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cutup/annotation.hpp"
#include "cutup/dataset.hpp"
#include "cutup/error.hpp"
#include "cutup/evaluation.hpp"
#include "cutup/frame_plan.hpp"
#include "cutup/random.hpp"

namespace cutup {

struct CorpusConfig {
  int n_fall_videos = 55;
  int n_adl_videos = 17;
  Rational fall_len_mean_s{165};
  Rational adl_len_mean_s{1237};  // ~5:50:29 of ADL over 17 videos
  Rational fps{25};
  Rational fall_interval_min_s{1};
  Rational fall_interval_max_s{3};
  double visibility_miss_rate = 0.1;
  int cameras_per_scenario = 1;
  std::uint64_t master_seed = 0;

  // Durations are drawn uniformly from [mean * (1 - spread), mean * (1 + spread)].
  static constexpr std::int64_t kSpreadPercent = 20;

  void validate() const {
    if (n_fall_videos < 0 || n_adl_videos < 0) throw ConfigError("synth: video counts must be >= 0");
    if (!(visibility_miss_rate >= 0.0 && visibility_miss_rate <= 1.0))
      throw ConfigError("synth: visibility_miss_rate must lie in [0, 1]");
    if (cameras_per_scenario < 1) throw ConfigError("synth: cameras_per_scenario must be >= 1");
    if (fps <= Rational(0)) throw ConfigError("synth: fps must be positive");
    if (fall_interval_min_s <= Rational(0) || fall_interval_max_s < fall_interval_min_s)
      throw ConfigError("synth: fall interval range must satisfy 0 < min <= max");
    for (const Rational& mean : {fall_len_mean_s, adl_len_mean_s}) {
      if (mean * Rational(100 - kSpreadPercent, 100) * fps < Rational(16))
        throw ConfigError("synth: mean video length too short for a 16-frame window");
    }
    // The fall starts within the middle 60% of the video and must end inside it.
    const Rational shortest_fall_video = fall_len_mean_s * Rational(100 - kSpreadPercent, 100);
    if (fall_interval_max_s > shortest_fall_video * Rational(1, 5))
      throw ConfigError("synth: fall interval longer than the last 20% of the shortest fall video");
  }
};

namespace detail {
inline Rational uniform_ms(Stream& s, const Rational& lo, const Rational& hi) {
  const std::int64_t a = (lo * Rational(1000)).ceil();
  const std::int64_t b = (hi * Rational(1000)).floor();
  if (b <= a) return Rational(a, 1000);
  return Rational(a + static_cast<std::int64_t>(s.next_below(static_cast<std::uint64_t>(b - a) + 1)), 1000);
}

inline std::string padded(const char* prefix, int i) {
  std::string n = std::to_string(i);
  if (n.size() < 3) n.insert(0, 3 - n.size(), '0');
  return prefix + n;
}
}  // namespace detail

/// Times are on a millisecond grid; one substream per scenario and camera.
inline std::vector<VideoRecord> generate_corpus(const CorpusConfig& cfg) {
  cfg.validate();
  std::vector<VideoRecord> out;
  const Rational lo_scale(100 - CorpusConfig::kSpreadPercent, 100);
  const Rational hi_scale(100 + CorpusConfig::kSpreadPercent, 100);

  for (int i = 0; i < cfg.n_fall_videos; ++i) {
    const int scenario = i / cfg.cameras_per_scenario;
    const int camera = i % cfg.cameras_per_scenario + 1;
    Stream geo(derive_key(cfg.master_seed, std::string_view("synth-fall"), scenario));
    const Rational duration = detail::uniform_ms(geo, cfg.fall_len_mean_s * lo_scale, cfg.fall_len_mean_s * hi_scale);
    const Rational fall_start = detail::uniform_ms(geo, duration * Rational(1, 5), duration * Rational(4, 5));
    const Rational fall_len = detail::uniform_ms(geo, cfg.fall_interval_min_s, cfg.fall_interval_max_s);
    const Rational fall_end = fall_start + fall_len;
    const Rational lying_end = detail::uniform_ms(geo, fall_end, duration);

    Stream vis(derive_key(cfg.master_seed, std::string_view("synth-visibility"), i));
    VideoRecord r;
    r.video_id = detail::padded("fall_", i);
    r.scenario_id = detail::padded("S", scenario);
    r.camera_id = "cam" + std::to_string(camera);
    r.camera_rank = camera;
    r.fps = cfg.fps;
    r.duration_s = duration;
    r.kind = VideoKind::Fall;
    r.fall_start_s = fall_start;
    r.fall_end_s = fall_end;
    r.lying_end_s = lying_end;
    r.fall_visible = !(vis.next_open_unit() < cfg.visibility_miss_rate);
    r.lying_visible = !(vis.next_open_unit() < cfg.visibility_miss_rate);
    out.push_back(std::move(r));
  }
  for (int i = 0; i < cfg.n_adl_videos; ++i) {
    Stream geo(derive_key(cfg.master_seed, std::string_view("synth-adl"), i));
    VideoRecord r;
    r.video_id = detail::padded("adl_", i);
    r.scenario_id = detail::padded("A", i);
    r.camera_id = "cam1";
    r.fps = cfg.fps;
    r.duration_s = detail::uniform_ms(geo, cfg.adl_len_mean_s * lo_scale, cfg.adl_len_mean_s * hi_scale);
    r.kind = VideoKind::ADL;
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Noisy oracle

using ConfusionRows = std::array<std::array<double, 3>, 3>;  // [true][predicted]

inline constexpr ConfusionRows kIdentityConfusion{{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}};

struct OracleConfig {
  ConfusionRows confusion = kIdentityConfusion;
  double logit_margin = 1.0;
  std::uint64_t master_seed = 0;
  bool per_clip_correlated = false;  // one draw per clip instead of per (sample, crop)

  void validate() const {
    if (!(logit_margin > 0.0) || !std::isfinite(logit_margin)) throw ConfigError("oracle: logit_margin must be positive");
    for (std::size_t r = 0; r < 3; ++r) {
      double sum = 0.0;
      for (double p : confusion[r]) {
        if (!(p >= 0.0) || !std::isfinite(p)) throw ConfigError("oracle: confusion entries must be non-negative");
        sum += p;
      }
      if (std::fabs(sum - 1.0) > 1e-9)
        throw ConfigError("oracle: confusion row '" + std::string(to_string(kAllClasses[r])) + "' does not sum to 1");
    }
  }
};

/// Inverse-CDF draw from one confusion row.
inline ActionClass draw_class(const std::array<double, 3>& row, double u) {
  double acc = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    acc += row[k];
    if (u < acc) return static_cast<ActionClass>(k);
  }
  for (std::size_t k = 3; k-- > 0;)
    if (row[k] > 0.0) return static_cast<ActionClass>(k);
  return ActionClass::Other;
}

/// One prediction per (clip, sample, crop) plan, in plan order. The drawn
/// class gets logit_margin, the others 0.
inline std::vector<PredictionRecord> oracle_predict(const Manifest& manifest, const std::vector<FramePlanEntry>& plans,
                                                    const OracleConfig& cfg) {
  cfg.validate();
  std::map<std::string, ActionClass> truth;
  for (const auto& c : manifest.clips) truth.emplace(c.clip_id, c.label);
  std::vector<PredictionRecord> out;
  for (const auto& plan : plans) {
    auto it = truth.find(plan.window.clip_id);
    if (it == truth.end()) throw CoverageError("frame plan references clip '" + plan.window.clip_id + "' not in the manifest");
    const auto& row = cfg.confusion[static_cast<std::size_t>(it->second)];
    for (const auto& crop : plan.crops) {
      const std::uint64_t key =
          cfg.per_clip_correlated
              ? derive_key(cfg.master_seed, std::string_view("oracle"), std::string_view(plan.window.clip_id))
              : derive_key(cfg.master_seed, std::string_view("oracle"), std::string_view(plan.window.clip_id),
                           plan.window.sample_idx, crop.crop_idx);
      Stream stream(key);
      const ActionClass drawn = draw_class(row, stream.next_open_unit());
      PredictionRecord p{plan.window.clip_id, plan.window.sample_idx, crop.crop_idx, {0.0, 0.0, 0.0}};
      p.logits[static_cast<std::size_t>(drawn)] = cfg.logit_margin;
      out.push_back(std::move(p));
    }
  }
  return out;
}

}  // namespace cutup
