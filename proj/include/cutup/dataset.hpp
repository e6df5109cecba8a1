#pragma once

// Split assignment, per-split sampling and labeling, undersampling, class
// weights, label-distribution reporting and manifest I/O.

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <iterator>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "json.hpp"

#include "cutup/annotation.hpp"
#include "cutup/error.hpp"
#include "cutup/labeling.hpp"
#include "cutup/parallel.hpp"
#include "cutup/random.hpp"
#include "cutup/rational.hpp"
#include "cutup/sampling.hpp"
#include "cutup/version.hpp"

namespace cutup {

enum class Split { Train = 0, Val = 1, Test = 2 };

inline constexpr std::array<Split, 3> kAllSplits{Split::Train, Split::Val, Split::Test};

constexpr std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

inline Split parse_split(std::string_view s) {
  for (Split k : kAllSplits)
    if (to_string(k) == s) return k;
  throw ParseError("unknown split '" + std::string(s) + "'");
}

/// Fractions given as doubles are snapped to a 1e-9 grid and handled exactly.
inline Rational fraction_from_double(double f) { return Rational::quantize(f, 1'000'000'000); }

struct SplitConfig {
  std::array<Rational, 3> fractions{Rational(7, 10), Rational(2, 10), Rational(1, 10)};
  std::uint64_t master_seed = 0;
  bool group_by_scenario = false;  // keep all camera views of a scenario in one split

  void validate() const {
    Rational sum{0};
    for (const Rational& f : fractions) {
      if (f < Rational(0)) throw ConfigError("split: fractions must be non-negative");
      sum += f;
    }
    const Rational diff = sum > Rational(1) ? sum - Rational(1) : Rational(1) - sum;
    if (diff > Rational(1, 1'000'000'000)) throw ConfigError("split: fractions must sum to 1");
  }
};

/// Largest-remainder apportionment of n items; ties go to the earlier split.
inline std::array<std::int64_t, 3> largest_remainder(std::int64_t n, const std::array<Rational, 3>& fractions) {
  Rational total{0};
  for (const auto& f : fractions) total += f;
  std::array<std::int64_t, 3> counts{};
  std::array<Rational, 3> rem{};
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const Rational quota = Rational(n) * fractions[i] / total;
    counts[i] = quota.floor();
    rem[i] = quota - Rational(counts[i]);
    assigned += counts[i];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++counts[order[k % 3]];
  return counts;
}

using SplitAssignment = std::map<std::string, Split>;

/// Stratified (Fall vs ADL) seeded split. Records are sorted by video_id before
/// shuffling, so the result is independent of input order. A stratum with no
/// videos is an error unless allow_empty_strata is set.
inline SplitAssignment stratified_split(const std::vector<VideoRecord>& records, const SplitConfig& cfg,
                                        bool allow_empty_strata = false) {
  cfg.validate();
  SplitAssignment out;
  for (VideoKind kind : {VideoKind::Fall, VideoKind::ADL}) {
    // Allocation units: single videos, or whole scenarios when grouping.
    std::map<std::string, std::vector<std::string>> units;
    for (const auto& r : records) {
      if (r.kind != kind) continue;
      units[cfg.group_by_scenario ? r.scenario_id : r.video_id].push_back(r.video_id);
    }
    if (units.empty()) {
      if (allow_empty_strata || records.empty()) continue;
      throw ConfigError("split: stratum '" + std::string(to_string(kind)) + "' has no videos");
    }
    std::vector<const std::vector<std::string>*> order;
    for (const auto& [_, ids] : units) order.push_back(&ids);

    Stream stream(derive_key(cfg.master_seed, std::string_view("split"), std::string_view(to_string(kind))));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[stream.next_below(i)]);

    const auto counts = largest_remainder(static_cast<std::int64_t>(order.size()), cfg.fractions);
    std::size_t cursor = 0;
    for (std::size_t s = 0; s < 3; ++s)
      for (std::int64_t k = 0; k < counts[s]; ++k, ++cursor)
        for (const auto& id : *order[cursor]) out[id] = kAllSplits[s];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Labeled clips and undersampling

struct LabeledClip : ClipSpec {
  ActionClass label = ActionClass::Other;
  Split split = Split::Train;

  bool operator==(const LabeledClip&) const = default;
};

/// Canonical manifest order: (video_id, start_s, sampler, seed ordinal, clip_id).
inline bool canonical_less(const ClipSpec& a, const ClipSpec& b) {
  if (a.video_id != b.video_id) return a.video_id < b.video_id;
  if (a.start_s != b.start_s) return a.start_s < b.start_s;
  if (a.sampler != b.sampler) return a.sampler < b.sampler;
  if (a.seed_index != b.seed_index) return a.seed_index.value_or(-1) < b.seed_index.value_or(-1);
  return a.clip_id < b.clip_id;
}

struct UndersamplePolicy {
  std::array<Rational, 3> keep_fraction{Rational(1), Rational(1), Rational(1)};  // indexed by ActionClass
  std::uint64_t master_seed = 0;

  void validate() const {
    for (const Rational& q : keep_fraction)
      if (q <= Rational(0) || q > Rational(1)) throw ConfigError("undersample: keep fractions must lie in (0, 1]");
  }
};

/// Keeps exactly ceil(q * n) clips of each class with keep fraction q. The
/// retained set is chosen by per-clip hash keys, so it does not depend on input
/// order; the output keeps the input order.
inline std::vector<LabeledClip> undersample(const std::vector<LabeledClip>& clips, const UndersamplePolicy& policy) {
  policy.validate();
  std::vector<bool> keep(clips.size(), true);
  for (ActionClass cls : kAllClasses) {
    const Rational q = policy.keep_fraction[static_cast<std::size_t>(cls)];
    if (q == Rational(1)) continue;
    std::vector<std::pair<std::uint64_t, std::size_t>> ranked;
    for (std::size_t i = 0; i < clips.size(); ++i)
      if (clips[i].label == cls)
        ranked.emplace_back(derive_key(policy.master_seed, std::string_view("undersample"), std::string_view(clips[i].clip_id)), i);
    const auto quota = static_cast<std::size_t>((q * Rational(static_cast<std::int64_t>(ranked.size()))).ceil());
    std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
      return a.first != b.first ? a.first < b.first : clips[a.second].clip_id < clips[b.second].clip_id;
    });
    for (std::size_t k = quota; k < ranked.size(); ++k) keep[ranked[k].second] = false;
  }
  std::vector<LabeledClip> out;
  for (std::size_t i = 0; i < clips.size(); ++i)
    if (keep[i]) out.push_back(clips[i]);
  return out;
}

/// weight_i = D / (n_i * c) with c = 3 classes.
inline std::array<double, 3> class_weights(const std::array<std::int64_t, 3>& counts) {
  std::int64_t total = 0;
  for (ActionClass cls : kAllClasses) {
    const auto n = counts[static_cast<std::size_t>(cls)];
    if (n < 1) throw ValidationError("class weights: class '" + std::string(to_string(cls)) + "' has no samples");
    total += n;
  }
  std::array<double, 3> w{};
  for (std::size_t i = 0; i < 3; ++i)
    w[i] = static_cast<double>(total) / (static_cast<double>(counts[i]) * static_cast<double>(kNumClasses));
  return w;
}

inline std::array<std::int64_t, 3> class_counts(const std::vector<LabeledClip>& clips) {
  std::array<std::int64_t, 3> counts{};
  for (const auto& c : clips) ++counts[static_cast<std::size_t>(c.label)];
  return counts;
}

inline std::array<double, 3> class_weights(const std::vector<LabeledClip>& clips) {
  return class_weights(class_counts(clips));
}

// ---------------------------------------------------------------------------
// Build configuration and manifest

using SamplerChoice = std::variant<CutupConfig, GaussianConfig>;

struct BuildConfig {
  SplitConfig split{};
  std::array<SamplerChoice, 3> samplers{CutupConfig{}, CutupConfig{}, CutupConfig{}};  // indexed by Split
  LabelPolicy labels{};
  UndersamplePolicy undersample{};  // applied to the train split
  std::uint64_t master_seed = 0;    // drives Gaussian seeds

  /// Sets every seed in the configuration.
  void set_seed(std::uint64_t seed) {
    master_seed = seed;
    split.master_seed = seed;
    undersample.master_seed = seed;
  }

  void validate() const {
    split.validate();
    labels.validate();
    undersample.validate();
    for (Split s : kAllSplits) {
      const auto& choice = samplers[static_cast<std::size_t>(s)];
      if (std::holds_alternative<GaussianConfig>(choice)) {
        if (s != Split::Train)
          throw ConfigError("Gaussian sampling needs the annotations and may only be used for the train split, not '" +
                            std::string(to_string(s)) + "'");
        std::get<GaussianConfig>(choice).validate();
      } else {
        std::get<CutupConfig>(choice).validate();
      }
    }
  }
};

inline nlohmann::json to_json(const CutupConfig& c) {
  return {{"strategy", "cutup"}, {"clip_len_s", c.clip_len_s.to_string()}, {"stride_s", c.stride_s.to_string()}};
}

inline nlohmann::json to_json(const GaussianConfig& g) {
  return {{"strategy", "gaussian"},
          {"clip_len_s", g.clip_len_s.to_string()},
          {"min_sigma_s", g.min_sigma_s.to_string()},
          {"fallback", to_json(g.fallback)}};
}

inline nlohmann::json to_json(const BuildConfig& cfg) {
  nlohmann::json j;
  j["master_seed"] = cfg.master_seed;
  j["split"] = {{"fractions",
                 {cfg.split.fractions[0].to_string(), cfg.split.fractions[1].to_string(),
                  cfg.split.fractions[2].to_string()}},
                {"group_by_scenario", cfg.split.group_by_scenario},
                {"master_seed", cfg.split.master_seed}};
  for (Split s : kAllSplits)
    j["sampling"][std::string(to_string(s))] =
        std::visit([](const auto& c) { return to_json(c); }, cfg.samplers[static_cast<std::size_t>(s)]);
  j["labeling"] = {{"min_overlap",
                    {{"Fall", cfg.labels.min_overlap_fall.to_string()},
                     {"Lying", cfg.labels.min_overlap_lying.to_string()}}}};
  for (ActionClass c : kAllClasses)
    j["undersample"]["keep_fraction"][std::string(to_string(c))] =
        cfg.undersample.keep_fraction[static_cast<std::size_t>(c)].to_string();
  j["undersample"]["master_seed"] = cfg.undersample.master_seed;
  return j;
}

inline std::string hex_digest(std::string_view bytes) {
  std::ostringstream os;
  os << "fnv1a64:" << std::hex;
  os.width(16);
  os.fill('0');
  os << fnv1a64(bytes);
  return os.str();
}

struct Provenance {
  std::string config_digest;
  std::uint64_t master_seed = 0;
  std::string toolkit_version = std::string(kVersion);

  bool operator==(const Provenance&) const = default;
};

inline Provenance make_provenance(const BuildConfig& cfg) {
  return {hex_digest(to_json(cfg).dump()), cfg.master_seed, std::string(kVersion)};
}

struct Manifest {
  std::vector<LabeledClip> clips;
  Provenance provenance;
};

/// Per-split class counts plus count and duration shares of videos.
struct SplitDistribution {
  std::array<std::int64_t, 3> class_counts{};
  std::int64_t total_clips = 0;
  std::int64_t videos = 0;
  Rational video_duration_s{0};
};

struct DistributionReport {
  std::array<SplitDistribution, 3> splits{};
  Provenance provenance;
};

inline DistributionReport distribution_report(const Manifest& manifest, const std::vector<VideoRecord>& records,
                                              const SplitAssignment& assignment) {
  DistributionReport rep;
  rep.provenance = manifest.provenance;
  for (const auto& c : manifest.clips) {
    auto& d = rep.splits[static_cast<std::size_t>(c.split)];
    ++d.class_counts[static_cast<std::size_t>(c.label)];
    ++d.total_clips;
  }
  for (const auto& r : records) {
    auto it = assignment.find(r.video_id);
    if (it == assignment.end()) continue;
    auto& d = rep.splits[static_cast<std::size_t>(it->second)];
    ++d.videos;
    d.video_duration_s += r.duration_s;
  }
  return rep;
}

inline nlohmann::json to_json(const Provenance& p) {
  return {{"config_digest", p.config_digest}, {"master_seed", p.master_seed}, {"toolkit_version", p.toolkit_version}};
}

inline nlohmann::json to_json(const DistributionReport& rep) {
  auto pct = [](std::int64_t part, std::int64_t whole) {
    return whole == 0 ? 0.0 : 100.0 * static_cast<double>(part) / static_cast<double>(whole);
  };
  std::int64_t all_videos = 0;
  Rational all_duration{0};
  for (const auto& d : rep.splits) {
    all_videos += d.videos;
    all_duration += d.video_duration_s;
  }
  nlohmann::json j;
  j["provenance"] = to_json(rep.provenance);
  for (Split s : kAllSplits) {
    const auto& d = rep.splits[static_cast<std::size_t>(s)];
    nlohmann::json sj;
    for (ActionClass c : kAllClasses) {
      const auto n = d.class_counts[static_cast<std::size_t>(c)];
      sj["classes"][std::string(to_string(c))] = {{"count", n}, {"percent", pct(n, d.total_clips)}};
    }
    sj["total"] = d.total_clips;
    sj["videos"] = d.videos;
    sj["video_share"] = all_videos == 0 ? 0.0 : static_cast<double>(d.videos) / static_cast<double>(all_videos);
    sj["duration_s"] = d.video_duration_s.to_string();
    sj["duration_share"] =
        all_duration == Rational(0) ? 0.0 : (d.video_duration_s / all_duration).to_double();
    j["splits"][std::string(to_string(s))] = sj;
  }
  return j;
}

// ---------------------------------------------------------------------------
// Pipeline stages

/// Samples every assigned video with the sampler configured for its split.
/// Output is in canonical order. Unsampleable videos are collected and
/// reported together.
inline std::vector<LabeledClip> sample_videos(const std::vector<VideoRecord>& records, const SplitAssignment& assignment,
                                              const BuildConfig& cfg, unsigned jobs = 1) {
  std::vector<const VideoRecord*> videos;
  for (const auto& r : records)
    if (assignment.contains(r.video_id)) videos.push_back(&r);
  std::sort(videos.begin(), videos.end(), [](auto* a, auto* b) { return a->video_id < b->video_id; });

  std::vector<std::vector<LabeledClip>> per_video(videos.size());
  std::vector<std::string> failures(videos.size());
  parallel_for(videos.size(), jobs, [&](std::size_t i) {
    const VideoRecord& rec = *videos[i];
    const Split split = assignment.at(rec.video_id);
    std::vector<ClipSpec> clips;
    try {
      clips = std::visit(
          [&](const auto& c) -> std::vector<ClipSpec> {
            if constexpr (std::is_same_v<std::decay_t<decltype(c)>, GaussianConfig>)
              return gaussian_sample(rec, c, cfg.master_seed);
            else
              return cutup_sample(rec, c);
          },
          cfg.samplers[static_cast<std::size_t>(split)]);
    } catch (const UnsampleableError&) {
      failures[i] = rec.video_id;
      return;
    }
    auto& out = per_video[i];
    out.reserve(clips.size());
    for (auto& c : clips) out.push_back(LabeledClip{std::move(c), ActionClass::Other, split});
    std::sort(out.begin(), out.end(), canonical_less);
  });

  std::vector<std::string> bad;
  for (auto& f : failures)
    if (!f.empty()) bad.push_back(f);
  if (!bad.empty()) {
    std::string msg = "unsampleable videos (shorter than the clip length):";
    for (const auto& id : bad) msg += " " + id;
    throw UnsampleableError(msg);
  }
  std::vector<LabeledClip> all;
  for (auto& v : per_video) std::move(v.begin(), v.end(), std::back_inserter(all));
  return all;
}

/// Assigns priority labels in place.
inline void label_clips(std::vector<LabeledClip>& clips, const std::vector<VideoRecord>& records,
                        const LabelPolicy& policy, unsigned jobs = 1) {
  std::map<std::string, Timeline> timelines;
  for (const auto& r : records) timelines.emplace(r.video_id, build_timeline(r));
  parallel_for(clips.size(), jobs, [&](std::size_t i) {
    auto it = timelines.find(clips[i].video_id);
    if (it == timelines.end())
      throw ValidationError("clip '" + clips[i].clip_id + "' references unknown video '" + clips[i].video_id + "'");
    clips[i].label = label_clip(clips[i], it->second, policy);
  });
}

struct BuildResult {
  Manifest manifest;
  SplitAssignment assignment;
  DistributionReport distribution;
};

/// split -> sample -> label -> undersample(train) -> canonical manifest.
inline BuildResult build_manifest(const std::vector<VideoRecord>& records, const BuildConfig& cfg, unsigned jobs = 1) {
  cfg.validate();
  BuildResult result;
  result.manifest.provenance = make_provenance(cfg);
  if (records.empty()) {
    result.distribution = distribution_report(result.manifest, records, result.assignment);
    return result;
  }
  result.assignment = stratified_split(records, cfg.split, /*allow_empty_strata=*/true);
  std::vector<LabeledClip> clips = sample_videos(records, result.assignment, cfg, jobs);
  label_clips(clips, records, cfg.labels, jobs);

  std::vector<LabeledClip> train;
  std::vector<LabeledClip> rest;
  for (auto& c : clips) (c.split == Split::Train ? train : rest).push_back(std::move(c));
  train = undersample(train, cfg.undersample);
  clips = std::move(train);
  std::move(rest.begin(), rest.end(), std::back_inserter(clips));
  std::sort(clips.begin(), clips.end(), canonical_less);

  result.manifest.clips = std::move(clips);
  result.distribution = distribution_report(result.manifest, records, result.assignment);
  return result;
}

// ---------------------------------------------------------------------------
// manifest.jsonl

inline nlohmann::json to_json(const LabeledClip& c, bool with_label = true) {
  nlohmann::json j;
  j["clip_id"] = c.clip_id;
  j["video_id"] = c.video_id;
  j["split"] = std::string(to_string(c.split));
  j["start_s"] = c.start_s.to_string();
  j["end_s"] = c.end_s.to_string();
  j["sampler"] = std::string(to_string(c.sampler));
  if (with_label) j["label"] = std::string(to_string(c.label));
  return j;
}

inline std::string serialize_manifest(const Manifest& m, bool with_labels = true) {
  std::string out = nlohmann::json{{"provenance", to_json(m.provenance)}}.dump() + "\n";
  for (const auto& c : m.clips) out += to_json(c, with_labels).dump() + "\n";
  return out;
}

namespace detail {

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return lines;
}

inline nlohmann::json parse_json_line(std::string_view line, std::size_t lineno, std::string_view what) {
  try {
    return nlohmann::json::parse(line.begin(), line.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string(what) + ": malformed JSON at line " + std::to_string(lineno) + ", column " +
                         std::to_string(e.byte),
                     lineno, e.byte);
  }
}

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, std::size_t lineno,
                           std::string_view what) {
  if (!j.is_object()) throw ParseError(std::string(what) + ": line " + std::to_string(lineno) + " is not an object", lineno);
  for (const auto& [key, _] : j.items())
    if (!known.contains(key))
      throw ParseError(std::string(what) + ": unknown field '" + key + "' at line " + std::to_string(lineno), lineno);
}

inline std::optional<int> ordinal_from_clip_id(std::string_view id) {
  const auto colon = id.rfind(':');
  if (colon == std::string_view::npos) return std::nullopt;
  int v = 0;
  auto tail = id.substr(colon + 1);
  auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), v);
  if (ec != std::errc() || ptr != tail.data() + tail.size()) return std::nullopt;
  return v;
}

}  // namespace detail

/// Parses manifest.jsonl (or an unlabeled clips file when require_label is false).
inline Manifest parse_manifest(std::string_view text, bool require_label = true) {
  Manifest m;
  bool have_header = false;
  std::set<std::string> ids;
  const auto lines = detail::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    if (lines[i].find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const auto j = detail::parse_json_line(lines[i], lineno, "manifest");
    if (!have_header) {
      detail::reject_unknown(j, {"provenance"}, lineno, "manifest header");
      try {
        const auto& p = j.at("provenance");
        m.provenance = {p.at("config_digest").get<std::string>(), p.at("master_seed").get<std::uint64_t>(),
                        p.at("toolkit_version").get<std::string>()};
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("manifest header: ") + e.what(), lineno);
      }
      have_header = true;
      continue;
    }
    detail::reject_unknown(j, {"clip_id", "video_id", "split", "start_s", "end_s", "sampler", "label"}, lineno,
                           "manifest");
    LabeledClip c;
    try {
      c.clip_id = j.at("clip_id").get<std::string>();
      c.video_id = j.at("video_id").get<std::string>();
      c.split = parse_split(j.at("split").get<std::string>());
      c.start_s = Rational::parse(j.at("start_s").get<std::string>());
      c.end_s = Rational::parse(j.at("end_s").get<std::string>());
      c.sampler = parse_sampler_kind(j.at("sampler").get<std::string>());
      if (j.contains("label"))
        c.label = parse_action_class(j.at("label").get<std::string>());
      else if (require_label)
        throw ParseError("missing field 'label'");
    } catch (const ParseError& e) {
      throw ParseError(std::string("manifest line ") + std::to_string(lineno) + ": " + e.what(), lineno);
    } catch (const std::exception& e) {
      throw ParseError(std::string("manifest line ") + std::to_string(lineno) + ": " + e.what(), lineno);
    }
    if (c.sampler == SamplerKind::Gaussian) c.seed_index = detail::ordinal_from_clip_id(c.clip_id);
    if (!ids.insert(c.clip_id).second) throw ValidationError("manifest: duplicate clip_id '" + c.clip_id + "'");
    m.clips.push_back(std::move(c));
  }
  if (!have_header) throw ParseError("manifest: missing provenance header line", 1);
  return m;
}

inline std::string serialize_split(const SplitAssignment& a) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [id, s] : a) j[id] = std::string(to_string(s));
  return j.dump(2) + "\n";
}

inline SplitAssignment parse_split_assignment(std::string_view text) {
  const auto j = detail::parse_json_text(text, "split");
  if (!j.is_object()) throw ParseError("split: expected an object mapping video_id to split");
  SplitAssignment a;
  for (const auto& [id, s] : j.items()) {
    if (!s.is_string()) throw ParseError("split: value for '" + id + "' must be a string");
    a[id] = parse_split(s.get<std::string>());
  }
  return a;
}

}  // namespace cutup
