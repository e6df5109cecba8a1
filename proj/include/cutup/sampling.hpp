#pragma once

// Clip samplers: Cutup (sliding window) and Gaussian (seeds around the fall).

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cutup/annotation.hpp"
#include "cutup/error.hpp"
#include "cutup/random.hpp"
#include "cutup/rational.hpp"

namespace cutup {

enum class SamplerKind { Cutup = 0, Gaussian = 1, Fallback = 2 };

constexpr std::string_view to_string(SamplerKind s) {
  switch (s) {
    case SamplerKind::Cutup: return "Cutup";
    case SamplerKind::Gaussian: return "Gaussian";
    case SamplerKind::Fallback: return "Fallback";
  }
  return "?";
}

inline SamplerKind parse_sampler_kind(std::string_view s) {
  for (SamplerKind k : {SamplerKind::Cutup, SamplerKind::Gaussian, SamplerKind::Fallback})
    if (to_string(k) == s) return k;
  throw ParseError("unknown sampler '" + std::string(s) + "'");
}

struct CutupConfig {
  Rational clip_len_s{5};
  Rational stride_s{5};  // clip_len_s - overlap

  void validate() const {
    if (clip_len_s <= Rational(0)) throw ConfigError("cutup: clip_len_s must be positive");
    if (stride_s <= Rational(0) || stride_s > clip_len_s)
      throw ConfigError("cutup: stride_s must satisfy 0 < stride_s <= clip_len_s");
  }
};

struct GaussianConfig {
  Rational clip_len_s{5};
  CutupConfig fallback{};
  Rational min_sigma_s{1};

  void validate() const {
    if (clip_len_s <= Rational(0)) throw ConfigError("gaussian: clip_len_s must be positive");
    if (min_sigma_s <= Rational(0)) throw ConfigError("gaussian: min_sigma_s must be positive");
    fallback.validate();
  }
};

struct ClipSpec {
  std::string clip_id;
  std::string video_id;
  Rational start_s;
  Rational end_s;
  SamplerKind sampler = SamplerKind::Cutup;
  std::optional<int> seed_index;

  Rational length() const { return end_s - start_s; }
  bool operator==(const ClipSpec&) const = default;
};

/// "<video_id>:<sampler>:<ordinal>"
inline std::string make_clip_id(std::string_view video_id, SamplerKind sampler, std::size_t ordinal) {
  std::string id(video_id);
  id += ':';
  id += to_string(sampler);
  id += ':';
  id += std::to_string(ordinal);
  return id;
}

/// Gaussian seeds are snapped onto a microsecond grid so clip bounds stay exact.
inline constexpr std::int64_t kSeedGridPerSecond = 1'000'000;

namespace detail {

inline std::vector<ClipSpec> cutup_tagged(const VideoRecord& rec, const CutupConfig& cfg, SamplerKind tag) {
  cfg.validate();
  if (rec.duration_s < cfg.clip_len_s)
    throw UnsampleableError("video '" + rec.video_id + "': duration " + rec.duration_s.to_string() +
                            " s is shorter than clip length " + cfg.clip_len_s.to_string() + " s");
  const std::int64_t count = ((rec.duration_s - cfg.clip_len_s) / cfg.stride_s).floor() + 1;
  std::vector<ClipSpec> clips;
  clips.reserve(static_cast<std::size_t>(count));
  for (std::int64_t k = 0; k < count; ++k) {
    const Rational start = cfg.stride_s * Rational(k);
    clips.push_back({make_clip_id(rec.video_id, tag, static_cast<std::size_t>(k)), rec.video_id, start,
                     start + cfg.clip_len_s, tag, std::nullopt});
  }
  return clips;
}

}  // namespace detail

/// Sliding-window clips at starts 0, stride, 2*stride, ...; the short tail is dropped.
inline std::vector<ClipSpec> cutup_sample(const VideoRecord& rec, const CutupConfig& cfg) {
  return detail::cutup_tagged(rec, cfg, SamplerKind::Cutup);
}

/// Parameters of the seed distribution for one Fall video.
struct GaussianParams {
  std::int64_t n_clips;
  Rational mean_s;   // midpoint of the fall interval
  double sigma_s;    // one third of the distance to the nearer video boundary
  double effective_sigma_s;  // max(sigma_s, min_sigma_s)
};

inline GaussianParams gaussian_params(const VideoRecord& rec, const GaussianConfig& cfg) {
  const Rational t_fall = rec.fall_midpoint();
  const Rational sigma = min(t_fall, rec.duration_s - t_fall) / Rational(3);
  const double s = sigma.to_double();
  return {(rec.duration_s / cfg.clip_len_s).ceil(), t_fall, s, std::max(s, cfg.min_sigma_s.to_double())};
}

/// Raw (pre-clamp) seed draws for a video; ordinal i is the i-th value of the
/// video's substream, so gaussian_seeds(..., 10) is a prefix of gaussian_seeds(..., 20).
inline std::vector<double> gaussian_seeds(const VideoRecord& rec, const GaussianConfig& cfg, std::uint64_t master_seed,
                                          std::size_t count) {
  const GaussianParams p = gaussian_params(rec, cfg);
  Stream stream(derive_key(master_seed, std::string_view("gaussian"), std::string_view(rec.video_id)));
  std::vector<double> out;
  out.reserve(count);
  const double mean = p.mean_s.to_double();
  for (std::size_t i = 0; i < count; ++i) out.push_back(stream.next_normal(mean, p.effective_sigma_s));
  return out;
}

struct GaussianSampleResult {
  std::vector<ClipSpec> clips;
  std::vector<double> raw_seeds_s;  // pre-clamp draws, empty when the fallback was used
};

/// Gaussian sampling with seeds clamped into [clip_len/2, T - clip_len/2].
/// Non-Fall videos go through the fallback Cutup sampler and are tagged Fallback.
inline GaussianSampleResult gaussian_sample_detailed(const VideoRecord& rec, const GaussianConfig& cfg,
                                                     std::uint64_t master_seed) {
  cfg.validate();
  if (rec.kind != VideoKind::Fall || !rec.fall_start_s || !rec.fall_end_s)
    return {detail::cutup_tagged(rec, cfg.fallback, SamplerKind::Fallback), {}};
  if (rec.duration_s < cfg.clip_len_s)
    throw UnsampleableError("video '" + rec.video_id + "': duration " + rec.duration_s.to_string() +
                            " s is shorter than clip length " + cfg.clip_len_s.to_string() + " s");

  const GaussianParams p = gaussian_params(rec, cfg);
  GaussianSampleResult result;
  result.raw_seeds_s = gaussian_seeds(rec, cfg, master_seed, static_cast<std::size_t>(p.n_clips));
  const Rational half = cfg.clip_len_s / Rational(2);
  const Rational lo = half;
  const Rational hi = rec.duration_s - half;
  result.clips.reserve(result.raw_seeds_s.size());
  for (std::size_t i = 0; i < result.raw_seeds_s.size(); ++i) {
    Rational t = Rational::quantize(result.raw_seeds_s[i], kSeedGridPerSecond);
    t = min(max(t, lo), hi);
    result.clips.push_back({make_clip_id(rec.video_id, SamplerKind::Gaussian, i), rec.video_id, t - half, t + half,
                            SamplerKind::Gaussian, static_cast<int>(i)});
  }
  return result;
}

inline std::vector<ClipSpec> gaussian_sample(const VideoRecord& rec, const GaussianConfig& cfg,
                                             std::uint64_t master_seed) {
  return gaussian_sample_detailed(rec, cfg, master_seed).clips;
}

}  // namespace cutup
