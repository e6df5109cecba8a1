#pragma once

// Priority labeling of clips against a Timeline, and the frame-window
// label-quality bound.

#include <array>
#include <string>

#include "cutup/annotation.hpp"
#include "cutup/error.hpp"
#include "cutup/rational.hpp"
#include "cutup/sampling.hpp"

namespace cutup {

struct LabelPolicy {
  // Minimum overlap fraction (of clip length) that must be exceeded; 0 means
  // any positive overlap suffices.
  Rational min_overlap_fall{0};
  Rational min_overlap_lying{0};

  void validate() const {
    for (const Rational& f : {min_overlap_fall, min_overlap_lying})
      if (f < Rational(0) || f > Rational(1)) throw ConfigError("label policy: min_overlap must lie in [0, 1]");
  }
};

/// Duration of [start, end) covered by each class.
inline std::array<Rational, kNumClasses> class_overlap(const Rational& start, const Rational& end, const Timeline& tl) {
  std::array<Rational, kNumClasses> covered{};
  for (const Segment& seg : tl.segments) {
    const Rational lo = max(start, seg.start_s);
    const Rational hi = min(end, seg.end_s);
    if (lo < hi) covered[static_cast<std::size_t>(seg.cls)] += hi - lo;
  }
  return covered;
}

/// Fall beats Lying beats Other; a class wins when its overlap fraction
/// strictly exceeds its threshold.
inline ActionClass label_clip(const ClipSpec& clip, const Timeline& tl, const LabelPolicy& policy = {}) {
  if (clip.start_s < Rational(0) || clip.end_s > tl.total_s || !(clip.start_s < clip.end_s))
    throw BoundsError("clip '" + clip.clip_id + "' [" + clip.start_s.to_string() + ", " + clip.end_s.to_string() +
                      "] lies outside timeline [0, " + tl.total_s.to_string() + "] of video '" + tl.video_id + "'");
  const auto covered = class_overlap(clip.start_s, clip.end_s, tl);
  const Rational len = clip.length();
  if (covered[0] / len > policy.min_overlap_fall) return ActionClass::Fall;
  if (covered[1] / len > policy.min_overlap_lying) return ActionClass::Lying;
  return ActionClass::Other;
}

/// Worst-case chance that a sampled frame window sees a one-frame event:
/// min(1, tau * frames_per_sample / (clip_len_s * fps)).
inline Rational label_quality_exact(const Rational& clip_len_s, const Rational& fps, std::int64_t tau,
                                    std::int64_t frames_per_sample = 16) {
  if (clip_len_s <= Rational(0) || fps <= Rational(0) || tau < 1 || frames_per_sample < 1)
    throw ConfigError("label quality: all inputs must be positive");
  const Rational window = Rational(tau) * Rational(frames_per_sample);
  const Rational frames = clip_len_s * fps;
  return min(Rational(1), window / frames);
}

inline double label_quality(const Rational& clip_len_s, const Rational& fps, std::int64_t tau,
                            std::int64_t frames_per_sample = 16) {
  return label_quality_exact(clip_len_s, fps, tau, frames_per_sample).to_double();
}

}  // namespace cutup
