#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "cutup/frame_plan.hpp"
#include "test_support.hpp"

using namespace cutup;
using cutup::testing::uniform;

namespace {

// A clip whose frame count at 25 fps is exactly m.
ClipSpec clip_with_frames(std::int64_t m, std::string id = "c") {
  return {std::move(id), "v", Rational(0), Rational(m, 25), SamplerKind::Cutup, std::nullopt};
}

std::vector<std::int64_t> arithmetic(std::int64_t start, std::int64_t step, int n) {
  std::vector<std::int64_t> v;
  for (int k = 0; k < n; ++k) v.push_back(start + k * step);
  return v;
}

}  // namespace

TEST(PlanFrames, ValCentersWindow) {
  const auto w = plan_frames(clip_with_frames(250), Rational(25), FramePlanConfig::for_mode(PlanMode::Val, 4), 0);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w[0].frame_indices, arithmetic(93, 4, 16));
  EXPECT_EQ(w[0].frame_indices.back(), 153);
}

TEST(PlanFrames, WindowLongerThanClip) {
  // 5 s at 25 fps with tau 8: S = 128 > M = 125, so every window starts at 0 and
  // the last index, 120, is still inside the clip.
  const auto expected = arithmetic(0, 8, 16);
  EXPECT_EQ(expected.back(), 120);
  const ClipSpec c{"c", "v", Rational(0), Rational(5), SamplerKind::Cutup, std::nullopt};
  for (PlanMode mode : kAllSplits) {
    const auto w = plan_frames(c, Rational(25), FramePlanConfig::for_mode(mode, 8), 3);
    for (const auto& win : w) EXPECT_EQ(win.frame_indices, expected);
  }
}

TEST(PlanFrames, ClampsAtTail) {
  // M = 100, tau = 8: indices past 99 repeat the last frame.
  const auto w = plan_frames(clip_with_frames(100), Rational(25), FramePlanConfig::for_mode(PlanMode::Val, 8), 0);
  const std::vector<std::int64_t> expected{0, 8, 16, 24, 32, 40, 48, 56, 64, 72, 80, 88, 96, 99, 99, 99};
  EXPECT_EQ(w[0].frame_indices, expected);
}

TEST(PlanFrames, ExactFit) {
  for (PlanMode mode : kAllSplits) {
    const auto w = plan_frames(clip_with_frames(16), Rational(25), FramePlanConfig::for_mode(mode, 1), 5);
    for (const auto& win : w) EXPECT_EQ(win.frame_indices, arithmetic(0, 1, 16));
  }
}

TEST(PlanFrames, DegenerateClip) {
  const ClipSpec c{"c", "v", Rational(0), Rational(1, 100), SamplerKind::Cutup, std::nullopt};
  EXPECT_THROW(plan_frames(c, Rational(25), FramePlanConfig::for_mode(PlanMode::Val, 1), 0), GeometryError);
}

TEST(PlanFrames, ConfigValidation) {
  EXPECT_THROW(plan_frames(clip_with_frames(50), Rational(25), {16, 1, 1, PlanMode::Test}, 0), ConfigError);
  EXPECT_THROW(plan_frames(clip_with_frames(50), Rational(25), {16, 1, 5, PlanMode::Train}, 0), ConfigError);
  EXPECT_THROW(plan_frames(clip_with_frames(50), Rational(25), {16, 0, 1, PlanMode::Train}, 0), ConfigError);
}

TEST(PlanFrames, TestWindowsEvenlySpaced) {
  const auto cfg = FramePlanConfig::for_mode(PlanMode::Test, 4);
  EXPECT_EQ(window_starts(250, cfg, "c", 0), (std::vector<std::int64_t>{0, 47, 93, 140, 186}));  // 186 * j / 4
  EXPECT_EQ(window_starts(64, cfg, "c", 0), (std::vector<std::int64_t>{0, 0, 0, 0, 0}));
}

TEST(PlanFrames, BoundsProperty) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 1000; ++i) {
    const std::int64_t m = uniform(rng, 1, 600);
    const int tau = static_cast<int>(uniform(rng, 1, 12));
    const int f = static_cast<int>(uniform(rng, 1, 32));
    const PlanMode mode = kAllSplits[static_cast<std::size_t>(i % 3)];
    const auto cfg = FramePlanConfig::for_mode(mode, tau, f);
    const auto windows = plan_frames(clip_with_frames(m, "p" + std::to_string(i)), Rational(25), cfg, rng());
    ASSERT_EQ(windows.size(), static_cast<std::size_t>(cfg.samples_per_clip));
    for (const auto& w : windows) {
      ASSERT_EQ(w.frame_indices.size(), static_cast<std::size_t>(f));
      for (std::size_t k = 0; k < w.frame_indices.size(); ++k) {
        EXPECT_GE(w.frame_indices[k], 0);
        EXPECT_LE(w.frame_indices[k], m - 1);
        if (k > 0) {
          EXPECT_GE(w.frame_indices[k], w.frame_indices[k - 1]);
        }
      }
    }
    if (mode == PlanMode::Test) {
      const auto starts = window_starts(m, cfg, "x", 0);
      EXPECT_EQ(starts.front(), 0);
      EXPECT_EQ(starts.back(), std::max<std::int64_t>(0, m - static_cast<std::int64_t>(tau) * f));
      EXPECT_TRUE(std::is_sorted(starts.begin(), starts.end()));
    }
  }
}

TEST(PlanFrames, TrainStartsDependOnlyOnSeedAndClip) {
  const auto cfg = FramePlanConfig::for_mode(PlanMode::Train, 2);
  const auto a = plan_frames(clip_with_frames(300, "abc"), Rational(25), cfg, 7);
  EXPECT_EQ(plan_frames(clip_with_frames(300, "abc"), Rational(25), cfg, 7), a);
  std::set<std::int64_t> starts;
  for (int i = 0; i < 50; ++i)
    starts.insert(plan_frames(clip_with_frames(300, "c" + std::to_string(i)), Rational(25), cfg, 7)[0].frame_indices[0]);
  EXPECT_GT(starts.size(), 20u);
  for (auto s : starts) EXPECT_LE(s, 300 - 32);
}

TEST(PlanCrops, ThreeCropOffsets) {
  EXPECT_EQ(resized_width(640, 360), 398);
  const auto crops = plan_crops("c", 0, 640, 360, PlanMode::Test, 0);
  ASSERT_EQ(crops.size(), 3u);
  EXPECT_EQ(crops[0].x, 0);
  EXPECT_EQ(crops[1].x, 87);
  EXPECT_EQ(crops[2].x, 174);
  for (const auto& c : crops) {
    EXPECT_FALSE(c.flip);
    EXPECT_EQ(c.y, 0);
    EXPECT_EQ(c.w, 224);
    EXPECT_EQ(c.resize_w, 398);
  }
  EXPECT_EQ(crops[1].x - crops[0].x, crops[2].x - crops[1].x);  // W - 224 even
}

TEST(PlanCrops, MinimumWidth) {
  for (const auto& c : plan_crops("c", 0, 224, 224, PlanMode::Test, 0)) EXPECT_EQ(c.x, 0);
  EXPECT_THROW(plan_crops("c", 0, 200, 224, PlanMode::Test, 0), GeometryError);
  EXPECT_THROW(plan_crops("c", 0, 0, 224, PlanMode::Val, 0), GeometryError);
}

TEST(PlanCrops, ValAndTrain) {
  const auto val = plan_crops("c", 0, 640, 360, PlanMode::Val, 0);
  ASSERT_EQ(val.size(), 1u);
  EXPECT_EQ(val[0].x, 87);
  EXPECT_FALSE(val[0].flip);

  int flips = 0;
  for (int i = 0; i < 2000; ++i) {
    const auto t = plan_crops("clip" + std::to_string(i), 0, 640, 360, PlanMode::Train, 11);
    ASSERT_EQ(t.size(), 1u);
    EXPECT_GE(t[0].x, 0);
    EXPECT_LE(t[0].x + t[0].w, t[0].resize_w);
    flips += t[0].flip;
  }
  EXPECT_NEAR(flips, 1000, 120);
}

TEST(PlanClip, FifteenTestPlans) {
  LabeledClip c;
  c.clip_id = "v:Cutup:0";
  c.video_id = "v";
  c.start_s = Rational(0);
  c.end_s = Rational(5);
  c.split = Split::Test;
  const auto entries = plan_clip(c, Rational(25), PlanSettings{}, PlanMode::Test, 0);
  std::size_t plans = 0;
  for (const auto& e : entries) plans += e.crops.size();
  EXPECT_EQ(entries.size(), 5u);
  EXPECT_EQ(plans, 15u);
}

TEST(PlanManifest, OrderAndJobsInvariant) {
  std::vector<VideoRecord> recs{cutup::testing::adl_record("a", Rational(60)), cutup::testing::adl_record("b", Rational(40))};
  BuildConfig cfg;
  cfg.split.fractions = {Rational(1, 2), Rational(1, 2), Rational(0)};
  cfg.set_seed(3);
  auto m = build_manifest(recs, cfg).manifest;
  const auto plans = plan_manifest(m, recs, PlanSettings{}, 5, 1);
  EXPECT_EQ(plan_manifest(m, recs, PlanSettings{}, 5, 8), plans);

  std::reverse(m.clips.begin(), m.clips.end());
  auto reversed = plan_manifest(m, recs, PlanSettings{}, 5, 2);
  std::reverse(reversed.begin(), reversed.end());
  EXPECT_EQ(reversed, plans);

  const auto test_mode = plan_manifest(m, recs, PlanSettings{}, 5, 1, PlanMode::Test);
  EXPECT_EQ(test_mode.size(), 5 * m.clips.size());

  const auto text = serialize_frame_plans(plans);
  auto back = parse_frame_plans(text);
  ASSERT_EQ(back.size(), plans.size());
  EXPECT_EQ(serialize_frame_plans(back), text);
  EXPECT_THROW(parse_frame_plans(R"({"clip_id":"x","sample_idx":0,"frame_indices":[],"crops":[],"extra":1})"),
               ParseError);
}

TEST(Moments, SmallStreams) {
  const std::vector<double> constant(1000, 0.37);
  const auto c = normalization_moments(constant);
  EXPECT_DOUBLE_EQ(c[0].mean, 0.37);
  EXPECT_NEAR(c[0].stddev, 0.0, 1e-15);

  const std::vector<double> binary{0, 1, 0, 1, 1, 0};
  const auto b = normalization_moments(binary);
  EXPECT_DOUBLE_EQ(b[0].mean, 0.5);
  EXPECT_DOUBLE_EQ(b[0].stddev, 0.5);

  const std::vector<double> rgb{0, 10, 100, 2, 10, 300};
  const auto m = normalization_moments(rgb, 3);
  EXPECT_DOUBLE_EQ(m[0].mean, 1.0);
  EXPECT_DOUBLE_EQ(m[1].stddev, 0.0);
  EXPECT_DOUBLE_EQ(m[2].stddev, 100.0);

  EXPECT_THROW(normalization_moments(std::vector<double>{}), ValidationError);
  EXPECT_THROW(normalization_moments(std::vector<double>{1, 2}, 3), ValidationError);
}

TEST(Moments, MatchesTwoPassReference) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 255.0);
  std::vector<double> v(1'000'000);
  for (auto& x : v) x = u(rng) + 1e4;  // offset stresses naive sum-of-squares
  long double sum = 0;
  for (double x : v) sum += x;
  const long double mean = sum / static_cast<long double>(v.size());
  long double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = static_cast<double>(std::sqrt(ss / static_cast<long double>(v.size())));
  const auto got = normalization_moments(v);
  EXPECT_NEAR(got[0].mean, static_cast<double>(mean), 1e-9 * static_cast<double>(mean));
  EXPECT_NEAR(got[0].stddev, sd, 1e-9 * sd);
}
