#pragma once

// Pipeline configuration file: one section per stage, unknown keys rejected.
//
// {
//   "master_seed": 42,
//   "split":       {"fractions": [0.7, 0.2, 0.1], "group_by_scenario": false},
//   "sampling":    {"train": {"strategy": "gaussian", "clip_len_s": "5", "min_sigma_s": "1",
//                             "fallback": {"clip_len_s": "5", "stride_s": "5"}},
//                   "val":   {"strategy": "cutup", "clip_len_s": "5", "stride_s": "5"},
//                   "test":  {"strategy": "cutup", "clip_len_s": "5", "stride_s": "5"}},
//   "labeling":    {"min_overlap": {"Fall": 0, "Lying": 0}},
//   "undersample": {"keep_fraction": {"Fall": 0.3}},
//   "frame_plan":  {"frames_per_sample": 16, "tau": 8, "source_width": 640, "source_height": 360},
//   "synth":       {...}, "oracle": {...}, "evaluation": {...}, "io": {...}
// }
//
// Times and fractions may be JSON numbers or decimal strings; both are read
// exactly.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "json.hpp"

#include "cutup/dataset.hpp"
#include "cutup/evaluation.hpp"
#include "cutup/frame_plan.hpp"
#include "cutup/synth.hpp"

namespace cutup {

struct IoPaths {
  std::map<std::string, std::string> paths;  // annotations, manifest, frameplan, predictions, report, ...
};

struct PipelineConfig {
  BuildConfig build{};
  PlanSettings plan{};
  CorpusConfig synth{};
  OracleConfig oracle{};
  EvaluationOptions evaluation{};
  IoPaths io{};
  std::uint64_t master_seed = 0;

  /// Propagates one seed to every stage.
  void set_seed(std::uint64_t seed) {
    master_seed = seed;
    build.set_seed(seed);
    synth.master_seed = seed;
    oracle.master_seed = seed;
  }
};

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::set<std::string>& known, const std::string& section) {
  if (!j.is_object()) throw ConfigError("config: section '" + section + "' must be an object");
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw ConfigError("config: unknown key '" + key + "' in section '" + section + "'");
}

inline Rational exact_value(const nlohmann::json& v, const std::string& where) {
  try {
    if (v.is_string()) return Rational::parse(v.get<std::string>());
    if (v.is_number_integer()) return Rational(v.get<std::int64_t>());
    if (v.is_number_float()) return Rational::parse(v.dump());
  } catch (const std::exception& e) {
    throw ConfigError("config: '" + where + "' is not a number: " + e.what());
  }
  throw ConfigError("config: '" + where + "' must be a number or decimal string");
}

template <typename T>
T typed_value(const nlohmann::json& v, const std::string& where) {
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config: '" + where + "' has the wrong type");
  }
}

inline CutupConfig cutup_from_json(const nlohmann::json& j, const std::string& where, bool allow_strategy) {
  std::set<std::string> keys{"clip_len_s", "stride_s"};
  if (allow_strategy) keys.insert("strategy");
  check_keys(j, keys, where);
  CutupConfig c;
  if (j.contains("clip_len_s")) c.clip_len_s = exact_value(j["clip_len_s"], where + ".clip_len_s");
  c.stride_s = j.contains("stride_s") ? exact_value(j["stride_s"], where + ".stride_s") : c.clip_len_s;
  return c;
}

inline SamplerChoice sampler_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("strategy")) throw ConfigError("config: '" + where + "' needs a 'strategy'");
  const auto strategy = typed_value<std::string>(j["strategy"], where + ".strategy");
  if (strategy == "cutup") return cutup_from_json(j, where, true);
  if (strategy != "gaussian") throw ConfigError("config: unknown strategy '" + strategy + "' in '" + where + "'");
  check_keys(j, {"strategy", "clip_len_s", "min_sigma_s", "fallback"}, where);
  GaussianConfig g;
  if (j.contains("clip_len_s")) g.clip_len_s = exact_value(j["clip_len_s"], where + ".clip_len_s");
  if (j.contains("min_sigma_s")) g.min_sigma_s = exact_value(j["min_sigma_s"], where + ".min_sigma_s");
  g.fallback = j.contains("fallback") ? cutup_from_json(j["fallback"], where + ".fallback", false)
                                      : CutupConfig{g.clip_len_s, g.clip_len_s};
  return g;
}

inline std::array<Rational, 3> class_fractions(const nlohmann::json& j, const std::string& where, Rational fill) {
  check_keys(j, {"Fall", "Lying", "Other"}, where);
  std::array<Rational, 3> out{fill, fill, fill};
  for (ActionClass c : kAllClasses) {
    const std::string name(to_string(c));
    if (j.contains(name)) out[static_cast<std::size_t>(c)] = exact_value(j[name], where + "." + name);
  }
  return out;
}

}  // namespace detail

inline PipelineConfig parse_pipeline_config(const nlohmann::json& j) {
  using detail::check_keys;
  using detail::exact_value;
  using detail::typed_value;
  check_keys(j, {"master_seed", "split", "sampling", "labeling", "undersample", "frame_plan", "synth", "oracle",
                 "evaluation", "io", "profile"},
             "<root>");
  PipelineConfig cfg;
  if (j.contains("master_seed")) cfg.master_seed = typed_value<std::uint64_t>(j["master_seed"], "master_seed");

  if (j.contains("split")) {
    const auto& s = j["split"];
    check_keys(s, {"fractions", "group_by_scenario"}, "split");
    if (s.contains("fractions")) {
      const auto& f = s["fractions"];
      if (!f.is_array() || f.size() != 3) throw ConfigError("config: split.fractions must be [train, val, test]");
      for (std::size_t i = 0; i < 3; ++i) cfg.build.split.fractions[i] = exact_value(f[i], "split.fractions");
    }
    if (s.contains("group_by_scenario"))
      cfg.build.split.group_by_scenario = typed_value<bool>(s["group_by_scenario"], "split.group_by_scenario");
  }

  if (j.contains("sampling")) {
    const auto& s = j["sampling"];
    check_keys(s, {"train", "val", "test"}, "sampling");
    for (Split sp : kAllSplits) {
      const std::string_view name = to_string(sp);
      const auto it = s.find(name);
      if (it == s.end()) continue;
      // swap rather than assign: GCC 11 flags variant move-assignment here with a bogus -Wstringop-overflow
      SamplerChoice choice = detail::sampler_from_json(*it, "sampling." + std::string(name));
      cfg.build.samplers[static_cast<std::size_t>(sp)].swap(choice);
    }
  }

  if (j.contains("labeling")) {
    const auto& l = j["labeling"];
    check_keys(l, {"min_overlap"}, "labeling");
    if (l.contains("min_overlap")) {
      check_keys(l["min_overlap"], {"Fall", "Lying"}, "labeling.min_overlap");
      const auto fr = detail::class_fractions(l["min_overlap"], "labeling.min_overlap", Rational(0));
      cfg.build.labels.min_overlap_fall = fr[0];
      cfg.build.labels.min_overlap_lying = fr[1];
    }
  }

  if (j.contains("undersample")) {
    const auto& u = j["undersample"];
    check_keys(u, {"keep_fraction"}, "undersample");
    if (u.contains("keep_fraction"))
      cfg.build.undersample.keep_fraction =
          detail::class_fractions(u["keep_fraction"], "undersample.keep_fraction", Rational(1));
  }

  if (j.contains("frame_plan")) {
    const auto& f = j["frame_plan"];
    check_keys(f, {"frames_per_sample", "tau", "source_width", "source_height"}, "frame_plan");
    if (f.contains("frames_per_sample")) cfg.plan.frames_per_sample = typed_value<int>(f["frames_per_sample"], "frame_plan.frames_per_sample");
    if (f.contains("tau")) cfg.plan.stride = typed_value<int>(f["tau"], "frame_plan.tau");
    if (f.contains("source_width")) cfg.plan.source_width = typed_value<int>(f["source_width"], "frame_plan.source_width");
    if (f.contains("source_height")) cfg.plan.source_height = typed_value<int>(f["source_height"], "frame_plan.source_height");
  }

  if (j.contains("synth")) {
    const auto& s = j["synth"];
    check_keys(s, {"n_fall_videos", "n_adl_videos", "fall_len_mean_s", "adl_len_mean_s", "fps", "fall_interval_len_s",
                   "visibility_miss_rate", "cameras_per_scenario"},
               "synth");
    auto& c = cfg.synth;
    if (s.contains("n_fall_videos")) c.n_fall_videos = typed_value<int>(s["n_fall_videos"], "synth.n_fall_videos");
    if (s.contains("n_adl_videos")) c.n_adl_videos = typed_value<int>(s["n_adl_videos"], "synth.n_adl_videos");
    if (s.contains("fall_len_mean_s")) c.fall_len_mean_s = exact_value(s["fall_len_mean_s"], "synth.fall_len_mean_s");
    if (s.contains("adl_len_mean_s")) c.adl_len_mean_s = exact_value(s["adl_len_mean_s"], "synth.adl_len_mean_s");
    if (s.contains("fps")) c.fps = exact_value(s["fps"], "synth.fps");
    if (s.contains("fall_interval_len_s")) {
      const auto& r = s["fall_interval_len_s"];
      if (!r.is_array() || r.size() != 2) throw ConfigError("config: synth.fall_interval_len_s must be [min, max]");
      c.fall_interval_min_s = exact_value(r[0], "synth.fall_interval_len_s");
      c.fall_interval_max_s = exact_value(r[1], "synth.fall_interval_len_s");
    }
    if (s.contains("visibility_miss_rate"))
      c.visibility_miss_rate = typed_value<double>(s["visibility_miss_rate"], "synth.visibility_miss_rate");
    if (s.contains("cameras_per_scenario"))
      c.cameras_per_scenario = typed_value<int>(s["cameras_per_scenario"], "synth.cameras_per_scenario");
  }

  if (j.contains("oracle")) {
    const auto& o = j["oracle"];
    check_keys(o, {"confusion", "logit_margin", "per_clip_correlated"}, "oracle");
    if (o.contains("confusion")) {
      const auto& m = o["confusion"];
      if (!m.is_array() || m.size() != 3) throw ConfigError("config: oracle.confusion must be a 3x3 matrix");
      for (std::size_t r = 0; r < 3; ++r) {
        if (!m[r].is_array() || m[r].size() != 3) throw ConfigError("config: oracle.confusion must be a 3x3 matrix");
        for (std::size_t c = 0; c < 3; ++c) cfg.oracle.confusion[r][c] = typed_value<double>(m[r][c], "oracle.confusion");
      }
    }
    if (o.contains("logit_margin")) cfg.oracle.logit_margin = typed_value<double>(o["logit_margin"], "oracle.logit_margin");
    if (o.contains("per_clip_correlated"))
      cfg.oracle.per_clip_correlated = typed_value<bool>(o["per_clip_correlated"], "oracle.per_clip_correlated");
  }

  if (j.contains("evaluation")) {
    const auto& e = j["evaluation"];
    check_keys(e, {"split", "softmax_first", "raw_kind_truth"}, "evaluation");
    if (e.contains("split")) {
      const auto s = typed_value<std::string>(e["split"], "evaluation.split");
      cfg.evaluation.split = s == "all" ? std::nullopt : std::optional<Split>(parse_split(s));
    }
    if (e.contains("softmax_first")) cfg.evaluation.softmax_first = typed_value<bool>(e["softmax_first"], "evaluation.softmax_first");
    if (e.contains("raw_kind_truth")) cfg.evaluation.raw_kind_truth = typed_value<bool>(e["raw_kind_truth"], "evaluation.raw_kind_truth");
  }

  if (j.contains("io")) {
    const auto& io = j["io"];
    check_keys(io, {"annotations", "split", "clips", "manifest", "distribution", "frameplan", "predictions", "report"},
               "io");
    for (const auto& [key, value] : io.items()) cfg.io.paths[key] = typed_value<std::string>(value, "io." + key);
  }

  cfg.set_seed(cfg.master_seed);
  cfg.build.validate();
  return cfg;
}

/// Built-in profiles mirroring the two published pipeline configurations.
inline nlohmann::json builtin_profile(std::string_view name) {
  const nlohmann::json cutup5 = {{"strategy", "cutup"}, {"clip_len_s", "5"}, {"stride_s", "5"}};
  nlohmann::json j = {{"profile", std::string(name)},
                      {"master_seed", 0},
                      {"split", {{"fractions", {0.7, 0.2, 0.1}}, {"group_by_scenario", false}}},
                      {"labeling", {{"min_overlap", {{"Fall", 0}, {"Lying", 0}}}}},
                      {"undersample", {{"keep_fraction", {{"Fall", 0.3}}}}},
                      {"frame_plan", {{"frames_per_sample", 16}, {"tau", 8}, {"source_width", 640}, {"source_height", 360}}}};
  if (name == "paper_cutup") {
    j["sampling"] = {{"train", cutup5}, {"val", cutup5}, {"test", cutup5}};
  } else if (name == "paper_gaussian") {
    j["sampling"] = {{"train",
                      {{"strategy", "gaussian"},
                       {"clip_len_s", "5"},
                       {"min_sigma_s", "1"},
                       {"fallback", {{"clip_len_s", "5"}, {"stride_s", "5"}}}}},
                     {"val", cutup5},
                     {"test", cutup5}};
  } else {
    throw ConfigError("unknown profile '" + std::string(name) + "'");
  }
  return j;
}

}  // namespace cutup
