#pragma once

// Annotation schema for untrimmed videos and the per-video class timeline.

#include <algorithm>
#include <array>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "cutup/error.hpp"
#include "cutup/rational.hpp"

namespace cutup {

/// Clip-level action classes, in priority order.
enum class ActionClass { Fall = 0, Lying = 1, Other = 2 };

inline constexpr std::array<ActionClass, 3> kAllClasses{ActionClass::Fall, ActionClass::Lying, ActionClass::Other};
inline constexpr std::size_t kNumClasses = 3;

constexpr std::string_view to_string(ActionClass c) {
  switch (c) {
    case ActionClass::Fall: return "Fall";
    case ActionClass::Lying: return "Lying";
    case ActionClass::Other: return "Other";
  }
  return "?";
}

inline ActionClass parse_action_class(std::string_view s) {
  for (ActionClass c : kAllClasses)
    if (to_string(c) == s) return c;
  throw ParseError("unknown class '" + std::string(s) + "'");
}

enum class VideoKind { Fall, ADL };

constexpr std::string_view to_string(VideoKind k) { return k == VideoKind::Fall ? "Fall" : "ADL"; }

struct VideoRecord {
  std::string video_id;
  std::string scenario_id;
  std::string camera_id;
  int camera_rank = 1;  // 1 = worst view
  Rational fps{25};
  Rational duration_s;
  VideoKind kind = VideoKind::ADL;
  std::optional<Rational> fall_start_s;
  std::optional<Rational> fall_end_s;
  std::optional<Rational> lying_end_s;
  bool fall_visible = true;
  bool lying_visible = true;

  /// Midpoint of the fall interval. Only meaningful for Fall videos.
  Rational fall_midpoint() const { return (fall_start_s.value() + fall_end_s.value()) / Rational(2); }

  bool operator==(const VideoRecord&) const = default;
};

struct Segment {
  Rational start_s;
  Rational end_s;
  ActionClass cls;

  Rational length() const { return end_s - start_s; }
  bool operator==(const Segment&) const = default;
};

/// Partition of [0, total_s] into maximal runs of one class.
struct Timeline {
  std::string video_id;
  std::vector<Segment> segments;
  Rational total_s;
};

/// Throws ValidationError naming the video and rule if a record is invalid.
inline void validate(const VideoRecord& rec) {
  auto fail = [&](const std::string& rule) {
    throw ValidationError("video '" + rec.video_id + "': " + rule);
  };
  if (rec.video_id.empty()) fail("video_id must be non-empty");
  if (rec.camera_rank < 1) fail("camera_rank must be >= 1");
  if (rec.fps <= Rational(0)) fail("fps must be positive");
  if (rec.duration_s <= Rational(0)) fail("duration_s must be positive");
  if (rec.fps * rec.duration_s < Rational(16)) fail("fps * duration_s must be >= 16 frames");

  const bool any_times = rec.fall_start_s || rec.fall_end_s || rec.lying_end_s;
  if (rec.kind == VideoKind::ADL) {
    if (any_times) fail("ADL video must not carry fall_start_s/fall_end_s/lying_end_s");
    if (!rec.fall_visible || !rec.lying_visible) fail("ADL video must have both visibility flags true");
    return;
  }
  if (!rec.fall_start_s || !rec.fall_end_s || !rec.lying_end_s)
    fail("Fall video requires fall_start_s, fall_end_s and lying_end_s");
  const Rational& fs = *rec.fall_start_s;
  const Rational& fe = *rec.fall_end_s;
  const Rational& le = *rec.lying_end_s;
  if (fs < Rational(0)) fail("fall_start_s must be >= 0");
  if (!(fs < fe)) fail("fall_start_s must be < fall_end_s");
  if (fe > le) fail("fall_end_s must be <= lying_end_s");
  if (le > rec.duration_s) fail("lying_end_s must be <= duration_s");
}

/// Fall covers [fall_start, fall_end] when visible, Lying covers
/// (fall_end, lying_end] when visible, everything else is Other.
inline Timeline build_timeline(const VideoRecord& rec) {
  Timeline tl{rec.video_id, {}, rec.duration_s};
  std::vector<Segment> raw;
  if (rec.kind == VideoKind::Fall) {
    const Rational fs = *rec.fall_start_s;
    const Rational fe = *rec.fall_end_s;
    const Rational le = *rec.lying_end_s;
    raw.push_back({Rational(0), fs, ActionClass::Other});
    raw.push_back({fs, fe, rec.fall_visible ? ActionClass::Fall : ActionClass::Other});
    raw.push_back({fe, le, rec.lying_visible ? ActionClass::Lying : ActionClass::Other});
    raw.push_back({le, rec.duration_s, ActionClass::Other});
  } else {
    raw.push_back({Rational(0), rec.duration_s, ActionClass::Other});
  }
  for (const Segment& s : raw) {
    if (s.end_s <= s.start_s) continue;
    if (!tl.segments.empty() && tl.segments.back().cls == s.cls)
      tl.segments.back().end_s = s.end_s;
    else
      tl.segments.push_back(s);
  }
  return tl;
}

// ---------------------------------------------------------------------------
// annotations.json

namespace detail {

inline std::pair<std::size_t, std::size_t> line_and_column(std::string_view text, std::size_t offset) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

inline nlohmann::json parse_json_text(std::string_view text, std::string_view what) {
  try {
    return nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    auto [line, col] = line_and_column(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ParseError(std::string(what) + ": malformed JSON at line " + std::to_string(line) + ", column " +
                         std::to_string(col) + " (byte " + std::to_string(e.byte) + ")",
                     line, col);
  }
}

inline Rational time_field(const nlohmann::json& obj, const char* key, const std::string& context) {
  const auto& v = obj.at(key);
  if (!v.is_string()) throw ParseError(context + ": field '" + key + "' must be a decimal string");
  try {
    return Rational::parse(v.get<std::string>());
  } catch (const std::exception&) {
    throw ParseError(context + ": field '" + key + "' is not a decimal: '" + v.get<std::string>() + "'");
  }
}

}  // namespace detail

inline nlohmann::json to_json(const VideoRecord& rec) {
  nlohmann::json j = nlohmann::json::object();
  j["video_id"] = rec.video_id;
  j["scenario_id"] = rec.scenario_id;
  j["camera_id"] = rec.camera_id;
  j["camera_rank"] = rec.camera_rank;
  j["fps"] = rec.fps.to_string();
  j["duration_s"] = rec.duration_s.to_string();
  j["kind"] = std::string(to_string(rec.kind));
  if (rec.fall_start_s) j["fall_start_s"] = rec.fall_start_s->to_string();
  if (rec.fall_end_s) j["fall_end_s"] = rec.fall_end_s->to_string();
  if (rec.lying_end_s) j["lying_end_s"] = rec.lying_end_s->to_string();
  j["fall_visible"] = rec.fall_visible;
  j["lying_visible"] = rec.lying_visible;
  return j;
}

inline VideoRecord video_record_from_json(const nlohmann::json& j, std::size_t index) {
  static const std::set<std::string> known{"video_id", "scenario_id",  "camera_id",  "camera_rank",
                                           "fps",      "duration_s",   "kind",       "fall_start_s",
                                           "fall_end_s", "lying_end_s", "fall_visible", "lying_visible"};
  std::string context = "record #" + std::to_string(index);
  if (!j.is_object()) throw ParseError(context + ": expected an object");
  if (j.contains("video_id") && j["video_id"].is_string()) context = "video '" + j["video_id"].get<std::string>() + "'";
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw ParseError(context + ": unknown field '" + key + "'");

  VideoRecord rec;
  try {
    rec.video_id = j.at("video_id").get<std::string>();
    rec.scenario_id = j.at("scenario_id").get<std::string>();
    rec.camera_id = j.at("camera_id").get<std::string>();
    rec.camera_rank = j.at("camera_rank").get<int>();
    rec.fps = detail::time_field(j, "fps", context);
    rec.duration_s = detail::time_field(j, "duration_s", context);
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "Fall")
      rec.kind = VideoKind::Fall;
    else if (kind == "ADL")
      rec.kind = VideoKind::ADL;
    else
      throw ParseError(context + ": kind must be \"Fall\" or \"ADL\", got '" + kind + "'");
    for (auto [key, slot] : {std::pair{"fall_start_s", &rec.fall_start_s}, std::pair{"fall_end_s", &rec.fall_end_s},
                             std::pair{"lying_end_s", &rec.lying_end_s}}) {
      if (j.contains(key) && !j[key].is_null()) *slot = detail::time_field(j, key, context);
    }
    rec.fall_visible = j.at("fall_visible").get<bool>();
    rec.lying_visible = j.at("lying_visible").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(context + ": " + e.what());
  }
  return rec;
}

/// Parses and validates annotations.json; records are returned in file order.
inline std::vector<VideoRecord> parse_annotations(std::string_view text) {
  const nlohmann::json doc = detail::parse_json_text(text, "annotations");
  if (!doc.is_array()) throw ParseError("annotations: top-level value must be an array", 1, 1);
  std::vector<VideoRecord> out;
  out.reserve(doc.size());
  std::set<std::string> seen;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    VideoRecord rec = video_record_from_json(doc[i], i);
    validate(rec);
    if (!seen.insert(rec.video_id).second)
      throw ValidationError("video '" + rec.video_id + "': duplicate video_id");
    out.push_back(std::move(rec));
  }
  return out;
}

inline std::string serialize_annotations(const std::vector<VideoRecord>& records) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& r : records) doc.push_back(to_json(r));
  return doc.dump(2) + "\n";
}

inline const VideoRecord* find_video(const std::vector<VideoRecord>& records, std::string_view id) {
  auto it = std::find_if(records.begin(), records.end(), [&](const VideoRecord& r) { return r.video_id == id; });
  return it == records.end() ? nullptr : &*it;
}

}  // namespace cutup
