#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "cutup/dataset.hpp"
#include "test_support.hpp"

using namespace cutup;
using cutup::testing::adl_record;
using cutup::testing::fall_record;

namespace {

std::vector<VideoRecord> corpus(int n_fall, int n_adl) {
  std::vector<VideoRecord> recs;
  for (int i = 0; i < n_fall; ++i)
    recs.push_back(fall_record("f" + std::to_string(i), Rational(100 + i), Rational(40), Rational(42), Rational(70)));
  for (int i = 0; i < n_adl; ++i) recs.push_back(adl_record("a" + std::to_string(i), Rational(200 + 3 * i)));
  return recs;
}

std::vector<LabeledClip> clips_with_labels(const std::array<int, 3>& counts) {
  std::vector<LabeledClip> out;
  for (ActionClass cls : kAllClasses)
    for (int i = 0; i < counts[static_cast<std::size_t>(cls)]; ++i) {
      LabeledClip c;
      c.clip_id = std::string(to_string(cls)) + ":" + std::to_string(i);
      c.video_id = "v";
      c.start_s = Rational(i);
      c.end_s = Rational(i + 1);
      c.label = cls;
      out.push_back(c);
    }
  return out;
}

std::array<int, 3> count_splits(const SplitAssignment& a, const std::vector<VideoRecord>& recs, VideoKind kind) {
  std::array<int, 3> n{};
  for (const auto& r : recs)
    if (r.kind == kind) ++n[static_cast<std::size_t>(a.at(r.video_id))];
  return n;
}

}  // namespace

TEST(LargestRemainder, HandWorkedAllocations) {
  const std::array<Rational, 3> f{Rational(7, 10), Rational(2, 10), Rational(1, 10)};
  EXPECT_EQ(largest_remainder(10, f), (std::array<std::int64_t, 3>{7, 2, 1}));
  EXPECT_EQ(largest_remainder(3, f), (std::array<std::int64_t, 3>{2, 1, 0}));  // 2.1, 0.6, 0.3
  EXPECT_EQ(largest_remainder(1, f), (std::array<std::int64_t, 3>{1, 0, 0}));
  EXPECT_EQ(largest_remainder(0, f), (std::array<std::int64_t, 3>{0, 0, 0}));
  const std::array<Rational, 3> thirds{Rational(1, 3), Rational(1, 3), Rational(1, 3)};
  EXPECT_EQ(largest_remainder(4, thirds), (std::array<std::int64_t, 3>{2, 1, 1}));
}

TEST(StratifiedSplit, TenFallThreeAdl) {
  const auto recs = corpus(10, 3);
  SplitConfig cfg;
  cfg.master_seed = 4;
  const auto a = stratified_split(recs, cfg);
  EXPECT_EQ(a.size(), 13u);
  EXPECT_EQ(count_splits(a, recs, VideoKind::Fall), (std::array<int, 3>{7, 2, 1}));
  EXPECT_EQ(count_splits(a, recs, VideoKind::ADL), (std::array<int, 3>{2, 1, 0}));
}

TEST(StratifiedSplit, AllTrain) {
  const auto recs = corpus(5, 4);
  SplitConfig cfg;
  cfg.fractions = {Rational(1), Rational(0), Rational(0)};
  for (const auto& [id, s] : stratified_split(recs, cfg)) EXPECT_EQ(s, Split::Train) << id;
}

TEST(StratifiedSplit, PreservesFallAdlRatio) {
  // 76% fall / 24% ADL by count.
  const auto recs = corpus(76, 24);
  const auto a = stratified_split(recs, SplitConfig{});
  const auto fall = count_splits(a, recs, VideoKind::Fall);
  const auto adl = count_splits(a, recs, VideoKind::ADL);
  // Each split is within one video of the exact 76/24 mix.
  for (std::size_t s = 0; s < 3; ++s) {
    const double n = fall[s] + adl[s];
    EXPECT_LE(std::abs(fall[s] - 0.76 * n), 1.0) << s;
  }
}

TEST(StratifiedSplit, EmptyStratumAndBadFractions) {
  EXPECT_THROW(stratified_split(corpus(4, 0), SplitConfig{}), ConfigError);
  EXPECT_NO_THROW(stratified_split(corpus(4, 0), SplitConfig{}, true));
  SplitConfig bad;
  bad.fractions = {Rational(1, 2), Rational(1, 2), Rational(1, 2)};
  EXPECT_THROW(stratified_split(corpus(4, 2), bad), ConfigError);
}

TEST(StratifiedSplit, InvariantToInputOrder) {
  auto recs = corpus(23, 9);
  SplitConfig cfg;
  cfg.master_seed = 77;
  const auto a = stratified_split(recs, cfg);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) {
    std::shuffle(recs.begin(), recs.end(), rng);
    EXPECT_EQ(stratified_split(recs, cfg), a);
  }
  cfg.master_seed = 78;
  EXPECT_NE(stratified_split(recs, cfg), a);
}

TEST(StratifiedSplit, ScenarioGroupingKeepsViewsTogether) {
  std::vector<VideoRecord> recs;
  for (int s = 0; s < 12; ++s)
    for (int cam = 0; cam < 3; ++cam) {
      auto r = fall_record("s" + std::to_string(s) + "c" + std::to_string(cam), Rational(60), Rational(10), Rational(11),
                           Rational(20));
      r.scenario_id = "s" + std::to_string(s);
      recs.push_back(r);
    }
  recs.push_back(adl_record("adl", Rational(100)));
  SplitConfig cfg;
  cfg.group_by_scenario = true;
  const auto a = stratified_split(recs, cfg);
  std::map<std::string, std::set<Split>> per_scenario;
  for (const auto& r : recs) per_scenario[r.scenario_id].insert(a.at(r.video_id));
  for (const auto& [sc, splits] : per_scenario) EXPECT_EQ(splits.size(), 1u) << sc;
}

TEST(Undersample, KeepsCeilOfFraction) {
  const auto clips = clips_with_labels({100, 40, 500});
  UndersamplePolicy p;
  p.keep_fraction[0] = fraction_from_double(0.3);
  p.master_seed = 12;
  const auto kept = undersample(clips, p);
  EXPECT_EQ(class_counts(kept), (std::array<std::int64_t, 3>{30, 40, 500}));
  // Output is a subsequence of the input.
  EXPECT_TRUE(std::includes(clips.begin(), clips.end(), kept.begin(), kept.end(),
                            [&](const LabeledClip& a, const LabeledClip& b) {
                              auto pos = [&](const LabeledClip& c) {
                                return std::find(clips.begin(), clips.end(), c) - clips.begin();
                              };
                              return pos(a) < pos(b);
                            }));
  EXPECT_EQ(undersample(clips, p), kept);
  p.master_seed = 13;
  EXPECT_NE(undersample(clips, p), kept);

  p.keep_fraction[0] = Rational(1, 3);
  EXPECT_EQ(class_counts(undersample(clips_with_labels({10, 0, 0}), p))[0], 4);  // ceil(10/3)
}

TEST(Undersample, IdentityWhenKeepingEverything) {
  const auto clips = clips_with_labels({7, 8, 9});
  EXPECT_EQ(undersample(clips, UndersamplePolicy{}), clips);
  UndersamplePolicy bad;
  bad.keep_fraction[1] = Rational(0);
  EXPECT_THROW(undersample(clips, bad), ConfigError);
}

TEST(Undersample, ImbalanceStrictlyDecreases) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 200; ++i) {
    const int major = static_cast<int>(cutup::testing::uniform(rng, 20, 400));
    const int minor = static_cast<int>(cutup::testing::uniform(rng, 1, major / 2));
    const auto clips = clips_with_labels({minor, 0, major});
    UndersamplePolicy p;
    p.keep_fraction[2] = Rational(cutup::testing::uniform(rng, 1, 95), 100);
    p.master_seed = rng();
    const auto kept = class_counts(undersample(clips, p));
    EXPECT_LT(static_cast<double>(kept[2]) / static_cast<double>(kept[0]),
              static_cast<double>(major) / static_cast<double>(minor));
  }
}

TEST(ClassWeights, Examples) {
  const auto w = class_weights(std::array<std::int64_t, 3>{231, 1769, 8764});
  EXPECT_NEAR(w[0], 15.532467532467532, 1e-9);
  EXPECT_NEAR(w[1], 2.0282645562464667, 1e-9);
  EXPECT_NEAR(w[2], 0.40940209949794615, 1e-9);

  for (double x : class_weights(std::array<std::int64_t, 3>{5, 5, 5})) EXPECT_DOUBLE_EQ(x, 1.0);
  const auto small = class_weights(clips_with_labels({1, 2, 3}));
  EXPECT_DOUBLE_EQ(small[0], 2.0);
  EXPECT_DOUBLE_EQ(small[1], 1.0);
  EXPECT_NEAR(small[2], 2.0 / 3.0, 1e-15);

  try {
    class_weights(std::array<std::int64_t, 3>{4, 0, 2});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("Lying"), std::string::npos);
  }
}

TEST(BuildConfig, GaussianOnlyForTrain) {
  BuildConfig cfg;
  cfg.samplers[static_cast<std::size_t>(Split::Test)] = GaussianConfig{};
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_THROW(build_manifest(corpus(3, 1), cfg), ConfigError);
  cfg.samplers[static_cast<std::size_t>(Split::Test)] = CutupConfig{};
  cfg.samplers[static_cast<std::size_t>(Split::Val)] = GaussianConfig{};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.samplers[static_cast<std::size_t>(Split::Val)] = CutupConfig{};
  cfg.samplers[static_cast<std::size_t>(Split::Train)] = GaussianConfig{};
  EXPECT_NO_THROW(cfg.validate());
}

TEST(BuildManifest, SingleFallVideo) {
  const auto rec = fall_record("v", Rational(165), Rational(60), Rational(63), Rational(120));
  const auto res = build_manifest({rec}, BuildConfig{});
  const auto& clips = res.manifest.clips;
  ASSERT_EQ(clips.size(), 33u);
  // [60,65) is the only clip touching the fall; [65,70) .. [115,120) see lying.
  for (std::size_t k = 0; k < clips.size(); ++k) {
    const ActionClass expected = k == 12 ? ActionClass::Fall : (k >= 13 && k <= 23) ? ActionClass::Lying : ActionClass::Other;
    EXPECT_EQ(clips[k].label, expected) << k;
    EXPECT_EQ(clips[k].start_s, Rational(5 * static_cast<std::int64_t>(k)));
    EXPECT_EQ(clips[k].split, Split::Train);
  }
  EXPECT_EQ(class_counts(clips), (std::array<std::int64_t, 3>{1, 11, 21}));
}

TEST(BuildManifest, EmptyRecords) {
  const auto res = build_manifest({}, BuildConfig{});
  EXPECT_TRUE(res.manifest.clips.empty());
  EXPECT_EQ(parse_manifest(serialize_manifest(res.manifest)).clips.size(), 0u);
}

TEST(BuildManifest, UnsampleableVideosListed) {
  auto recs = corpus(4, 2);
  recs.push_back(adl_record("tiny1", Rational(3)));
  recs.push_back(adl_record("tiny2", Rational(4)));
  BuildConfig cfg;
  cfg.split.fractions = {Rational(1), Rational(0), Rational(0)};
  try {
    build_manifest(recs, cfg);
    FAIL();
  } catch (const UnsampleableError& e) {
    EXPECT_NE(std::string(e.what()).find("tiny1"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("tiny2"), std::string::npos);
  }
}

TEST(BuildManifest, ByteIdenticalAndOrderInvariant) {
  auto recs = corpus(20, 7);
  BuildConfig cfg;
  cfg.samplers[0] = GaussianConfig{};
  cfg.undersample.keep_fraction[0] = Rational(3, 10);
  cfg.set_seed(31);
  const std::string a = serialize_manifest(build_manifest(recs, cfg, 1).manifest);
  EXPECT_EQ(serialize_manifest(build_manifest(recs, cfg, 1).manifest), a);
  EXPECT_EQ(serialize_manifest(build_manifest(recs, cfg, 8).manifest), a);
  std::reverse(recs.begin(), recs.end());
  EXPECT_EQ(serialize_manifest(build_manifest(recs, cfg, 3).manifest), a);
}

TEST(BuildManifest, DistributionSumsAndVideoPartition) {
  const auto recs = corpus(30, 10);
  BuildConfig cfg;
  cfg.set_seed(5);
  const auto res = build_manifest(recs, cfg);
  EXPECT_EQ(res.assignment.size(), recs.size());
  std::array<std::int64_t, 3> per_split{};
  for (const auto& c : res.manifest.clips) ++per_split[static_cast<std::size_t>(c.split)];
  std::int64_t videos = 0;
  for (Split s : kAllSplits) {
    const auto& d = res.distribution.splits[static_cast<std::size_t>(s)];
    EXPECT_EQ(d.total_clips, per_split[static_cast<std::size_t>(s)]);
    EXPECT_EQ(d.class_counts[0] + d.class_counts[1] + d.class_counts[2], d.total_clips);
    videos += d.videos;
  }
  EXPECT_EQ(videos, 40);
  for (const auto& c : res.manifest.clips) EXPECT_EQ(res.assignment.at(c.video_id), c.split);

  const auto j = to_json(res.distribution);
  EXPECT_EQ(j["splits"]["train"]["total"], per_split[0]);
  EXPECT_TRUE(j["splits"]["val"]["classes"].contains("Lying"));
}

TEST(BuildManifest, UndersamplingOnlyTouchesTrain) {
  const auto recs = corpus(30, 10);
  BuildConfig full;
  full.set_seed(2);
  BuildConfig under = full;
  under.undersample.keep_fraction[0] = Rational(3, 10);
  const auto a = build_manifest(recs, full).manifest.clips;
  const auto b = build_manifest(recs, under).manifest.clips;
  auto count = [](const std::vector<LabeledClip>& v, Split s, ActionClass c) {
    return std::count_if(v.begin(), v.end(), [&](const auto& x) { return x.split == s && x.label == c; });
  };
  EXPECT_EQ(count(b, Split::Train, ActionClass::Fall),
            (Rational(3, 10) * Rational(static_cast<std::int64_t>(count(a, Split::Train, ActionClass::Fall)))).ceil());
  EXPECT_EQ(count(b, Split::Test, ActionClass::Fall), count(a, Split::Test, ActionClass::Fall));
  EXPECT_EQ(count(b, Split::Train, ActionClass::Other), count(a, Split::Train, ActionClass::Other));
}

TEST(ManifestIo, RoundTripAndErrors) {
  BuildConfig cfg;
  cfg.samplers[0] = GaussianConfig{};
  cfg.set_seed(9);
  const auto m = build_manifest(corpus(6, 2), cfg).manifest;
  const std::string text = serialize_manifest(m);
  const auto back = parse_manifest(text);
  EXPECT_EQ(back.clips, m.clips);
  EXPECT_EQ(back.provenance, m.provenance);
  EXPECT_EQ(serialize_manifest(back), text);

  const auto unlabeled = serialize_manifest(m, false);
  EXPECT_THROW(parse_manifest(unlabeled), ParseError);
  EXPECT_EQ(parse_manifest(unlabeled, false).clips.size(), m.clips.size());

  const std::string header = text.substr(0, text.find('\n') + 1);
  const std::string first = text.substr(header.size(), text.find('\n', header.size()) - header.size() + 1);
  EXPECT_THROW(parse_manifest(header + first + first), ValidationError);
  EXPECT_THROW(parse_manifest(first), ParseError);
  try {
    parse_manifest(header + first + "{oops\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  auto extra = nlohmann::json::parse(first);
  extra["note"] = "x";
  EXPECT_THROW(parse_manifest(header + extra.dump() + "\n"), ParseError);
}

TEST(ManifestIo, ProvenanceTracksConfig) {
  BuildConfig a;
  BuildConfig b;
  b.undersample.keep_fraction[0] = Rational(1, 2);
  EXPECT_NE(make_provenance(a).config_digest, make_provenance(b).config_digest);
  EXPECT_EQ(make_provenance(a).config_digest, make_provenance(BuildConfig{}).config_digest);
  EXPECT_EQ(make_provenance(a).config_digest.rfind("fnv1a64:", 0), 0u);
}

TEST(SplitIo, RoundTrip) {
  const auto a = stratified_split(corpus(8, 3), SplitConfig{});
  EXPECT_EQ(parse_split_assignment(serialize_split(a)), a);
  EXPECT_THROW(parse_split_assignment(R"({"x": "holdout"})"), ParseError);
}
