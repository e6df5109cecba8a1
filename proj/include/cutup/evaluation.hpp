#pragma once

// Logit averaging, clip-level per-class metrics, video-level fall detection
// metrics and the report that joins them.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "cutup/annotation.hpp"
#include "cutup/dataset.hpp"
#include "cutup/error.hpp"

namespace cutup {

struct PredictionRecord {
  std::string clip_id;
  int sample_idx = 0;
  int crop_idx = 0;
  std::array<double, 3> logits{};  // Fall, Lying, Other

  bool operator==(const PredictionRecord&) const = default;
};

inline nlohmann::json to_json(const PredictionRecord& p) {
  return {{"clip_id", p.clip_id}, {"sample_idx", p.sample_idx}, {"crop_idx", p.crop_idx}, {"logits", p.logits}};
}

inline std::string serialize_predictions(const std::vector<PredictionRecord>& preds) {
  std::string out;
  for (const auto& p : preds) out += to_json(p).dump() + "\n";
  return out;
}

/// Parses predictions.jsonl, enforcing finite logits and unique
/// (clip_id, sample_idx, crop_idx) keys.
inline std::vector<PredictionRecord> parse_predictions(std::string_view text) {
  std::vector<PredictionRecord> out;
  std::set<std::tuple<std::string, int, int>> seen;
  const auto lines = detail::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    if (lines[i].find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const auto j = detail::parse_json_line(lines[i], lineno, "predictions");
    detail::reject_unknown(j, {"clip_id", "sample_idx", "crop_idx", "logits"}, lineno, "predictions");
    PredictionRecord p;
    try {
      p.clip_id = j.at("clip_id").get<std::string>();
      p.sample_idx = j.at("sample_idx").get<int>();
      p.crop_idx = j.at("crop_idx").get<int>();
      const auto& l = j.at("logits");
      if (!l.is_array() || l.size() != 3) throw ParseError("logits must be an array of 3 numbers", lineno);
      for (std::size_t k = 0; k < 3; ++k) p.logits[k] = l[k].get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("predictions line " + std::to_string(lineno) + ": " + e.what(), lineno);
    }
    for (double v : p.logits)
      if (!std::isfinite(v))
        throw ValidationError("predictions line " + std::to_string(lineno) + ": non-finite logit for '" + p.clip_id + "'");
    if (!seen.emplace(p.clip_id, p.sample_idx, p.crop_idx).second)
      throw ValidationError("predictions line " + std::to_string(lineno) + ": duplicate record for (" + p.clip_id +
                            ", " + std::to_string(p.sample_idx) + ", " + std::to_string(p.crop_idx) + ")");
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Clip aggregation

/// Argmax with ties resolved towards the higher-priority class (Fall first).
inline ActionClass priority_argmax(const std::array<double, 3>& scores) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < 3; ++k)
    if (scores[k] > scores[best]) best = k;
  return static_cast<ActionClass>(best);
}

inline std::array<double, 3> softmax(const std::array<double, 3>& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::array<double, 3> out{};
  double sum = 0.0;
  for (std::size_t k = 0; k < 3; ++k) sum += out[k] = std::exp(logits[k] - m);
  for (double& v : out) v /= sum;
  return out;
}

/// Elementwise mean of the logits (or of their softmax when requested).
inline std::array<double, 3> mean_scores(std::span<const PredictionRecord> preds, bool softmax_first = false) {
  if (preds.empty()) throw CoverageError("no predictions to aggregate");
  std::array<double, 3> sum{};
  for (const auto& p : preds) {
    const auto s = softmax_first ? softmax(p.logits) : p.logits;
    for (std::size_t k = 0; k < 3; ++k) sum[k] += s[k];
  }
  for (double& v : sum) v /= static_cast<double>(preds.size());
  return sum;
}

inline ActionClass aggregate_clip(std::span<const PredictionRecord> preds, bool softmax_first = false) {
  return priority_argmax(mean_scores(preds, softmax_first));
}

struct ClipPrediction {
  ActionClass predicted = ActionClass::Other;
  std::size_t n_records = 0;
};

/// Groups records by clip_id and aggregates each group.
inline std::map<std::string, ClipPrediction> aggregate_predictions(const std::vector<PredictionRecord>& preds,
                                                                   bool softmax_first = false) {
  std::map<std::string, std::vector<PredictionRecord>> groups;
  for (const auto& p : preds) groups[p.clip_id].push_back(p);
  std::map<std::string, ClipPrediction> out;
  for (const auto& [id, group] : groups) out[id] = {aggregate_clip(group, softmax_first), group.size()};
  return out;
}

// ---------------------------------------------------------------------------
// Clip-level metrics

using ConfusionMatrix = std::array<std::array<std::int64_t, 3>, 3>;  // [truth][predicted]

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t support = 0;
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

struct ClipMetrics {
  std::array<ClassMetrics, 3> per_class{};
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  ConfusionMatrix confusion{};
  std::int64_t n_clips = 0;
};

inline double safe_ratio(std::int64_t num, std::int64_t den, bool& undefined) {
  undefined = den == 0;
  return undefined ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

inline double f1_score(double p, double r, bool& undefined) {
  undefined = (p + r) == 0.0;
  return undefined ? 0.0 : 2.0 * p * r / (p + r);
}

inline ClipMetrics metrics_from_confusion(const ConfusionMatrix& cm) {
  ClipMetrics m;
  m.confusion = cm;
  for (std::size_t k = 0; k < 3; ++k) {
    std::int64_t tp = cm[k][k];
    std::int64_t pred_k = 0;
    std::int64_t true_k = 0;
    for (std::size_t o = 0; o < 3; ++o) {
      pred_k += cm[o][k];
      true_k += cm[k][o];
    }
    auto& c = m.per_class[k];
    c.support = true_k;
    c.precision = safe_ratio(tp, pred_k, c.precision_undefined);
    c.recall = safe_ratio(tp, true_k, c.recall_undefined);
    c.f1 = f1_score(c.precision, c.recall, c.f1_undefined);
    m.n_clips += true_k;
  }
  const auto& pc = m.per_class;
  m.macro_precision = (pc[0].precision + pc[1].precision + pc[2].precision) / 3.0;
  m.macro_recall = (pc[0].recall + pc[1].recall + pc[2].recall) / 3.0;
  m.macro_f1 = (pc[0].f1 + pc[1].f1 + pc[2].f1) / 3.0;
  return m;
}

inline ConfusionMatrix confusion_matrix(std::span<const ActionClass> truth, std::span<const ActionClass> predicted) {
  if (truth.size() != predicted.size()) throw CoverageError("truth and prediction lists differ in length");
  ConfusionMatrix cm{};
  for (std::size_t i = 0; i < truth.size(); ++i)
    ++cm[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
  return cm;
}

namespace detail {
template <typename A, typename B>
void require_same_keys(const std::map<std::string, A>& truth, const std::map<std::string, B>& preds,
                       std::string_view what) {
  std::vector<std::string> missing;
  std::vector<std::string> extra;
  for (const auto& [id, _] : truth)
    if (!preds.contains(id)) missing.push_back(id);
  for (const auto& [id, _] : preds)
    if (!truth.contains(id)) extra.push_back(id);
  if (missing.empty() && extra.empty()) return;
  std::string msg = std::string(what) + " id mismatch;";
  auto list = [&](const char* label, const std::vector<std::string>& ids) {
    if (ids.empty()) return;
    msg += std::string(" ") + label + " (" + std::to_string(ids.size()) + "):";
    for (std::size_t i = 0; i < ids.size() && i < 20; ++i) msg += " " + ids[i];
    if (ids.size() > 20) msg += " ...";
  };
  list("missing predictions", missing);
  list("unknown ids", extra);
  throw CoverageError(msg);
}
}  // namespace detail

/// One-vs-rest precision/recall/F1 per class and their unweighted means.
inline ClipMetrics clip_metrics(const std::map<std::string, ActionClass>& truth,
                                const std::map<std::string, ActionClass>& predicted) {
  detail::require_same_keys(truth, predicted, "clip");
  ConfusionMatrix cm{};
  for (const auto& [id, t] : truth) ++cm[static_cast<std::size_t>(t)][static_cast<std::size_t>(predicted.at(id))];
  return metrics_from_confusion(cm);
}

// ---------------------------------------------------------------------------
// Video-level metrics

enum class VideoLabel { FallVideo, ADL };

constexpr std::string_view to_string(VideoLabel v) { return v == VideoLabel::FallVideo ? "FallVideo" : "ADL"; }

struct VideoAggregation {
  std::map<std::string, VideoLabel> labels;
  std::vector<std::string> warnings;
};

/// A video is a fall video iff at least one of its clips is predicted Fall.
inline VideoAggregation video_aggregate(const std::map<std::string, std::vector<ActionClass>>& clips_by_video) {
  VideoAggregation out;
  for (const auto& [video, clips] : clips_by_video) {
    if (clips.empty()) out.warnings.push_back("video '" + video + "' has no clip predictions; marked ADL");
    const bool fall = std::find(clips.begin(), clips.end(), ActionClass::Fall) != clips.end();
    out.labels[video] = fall ? VideoLabel::FallVideo : VideoLabel::ADL;
  }
  return out;
}

struct BinaryMetrics {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;
  double precision = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double f1 = 0.0;
  std::vector<std::string> undefined;  // metrics whose denominator was zero
};

/// FallVideo is the positive class.
inline BinaryMetrics binary_metrics(std::int64_t tp, std::int64_t fp, std::int64_t tn, std::int64_t fn) {
  BinaryMetrics m;
  m.tp = tp;
  m.fp = fp;
  m.tn = tn;
  m.fn = fn;
  bool u = false;
  m.precision = safe_ratio(tp, tp + fp, u);
  if (u) m.undefined.push_back("precision");
  m.sensitivity = safe_ratio(tp, tp + fn, u);
  if (u) m.undefined.push_back("sensitivity");
  m.specificity = safe_ratio(tn, tn + fp, u);
  if (u) m.undefined.push_back("specificity");
  m.f1 = f1_score(m.precision, m.sensitivity, u);
  if (u) m.undefined.push_back("f1");
  return m;
}

inline BinaryMetrics video_metrics(const std::map<std::string, VideoLabel>& truth,
                                   const std::map<std::string, VideoLabel>& predicted) {
  detail::require_same_keys(truth, predicted, "video");
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (const auto& [id, t] : truth) {
    const bool pos_truth = t == VideoLabel::FallVideo;
    const bool pos_pred = predicted.at(id) == VideoLabel::FallVideo;
    if (pos_truth && pos_pred) ++tp;
    else if (!pos_truth && pos_pred) ++fp;
    else if (pos_truth) ++fn;
    else ++tn;
  }
  return binary_metrics(tp, fp, tn, fn);
}

/// Ground truth for video-level scoring. A Fall video whose fall is flagged
/// invisible carries no Fall clips and counts as negative unless raw kinds
/// are requested.
inline VideoLabel video_truth(const VideoRecord& rec, bool use_raw_kind = false) {
  if (rec.kind != VideoKind::Fall) return VideoLabel::ADL;
  return (use_raw_kind || rec.fall_visible) ? VideoLabel::FallVideo : VideoLabel::ADL;
}

// ---------------------------------------------------------------------------
// Report

struct EvaluationOptions {
  std::optional<Split> split = Split::Test;  // nullopt evaluates every manifest clip
  bool softmax_first = false;
  bool raw_kind_truth = false;
};

struct MetricsReport {
  ClipMetrics clips;
  BinaryMetrics videos;
  std::map<std::string, VideoLabel> video_predictions;
  std::map<std::string, VideoLabel> video_truths;
  std::vector<std::string> warnings;
  std::size_t min_records_per_clip = 0;
  std::size_t max_records_per_clip = 0;
  std::string evaluated_split;
  bool softmax_first = false;
  Provenance manifest_provenance;
  std::map<std::string, std::string> input_digests;
  std::string provenance_digest;
};

/// Scores predictions against the manifest clips of the selected split.
inline MetricsReport evaluate(const Manifest& manifest, const std::vector<PredictionRecord>& preds,
                              const std::vector<VideoRecord>& records, const EvaluationOptions& opts = {}) {
  std::map<std::string, ActionClass> truth;
  std::map<std::string, std::string> clip_video;
  std::set<std::string_view> other_split;
  for (const auto& c : manifest.clips) {
    if (opts.split && c.split != *opts.split) {
      other_split.insert(c.clip_id);
      continue;
    }
    truth[c.clip_id] = c.label;
    clip_video[c.clip_id] = c.video_id;
  }
  // Rows for manifest clips of another split are skipped; ids absent from the
  // manifest altogether still fail the coverage check.
  std::vector<PredictionRecord> selected;
  selected.reserve(preds.size());
  for (const auto& p : preds)
    if (!other_split.contains(p.clip_id)) selected.push_back(p);
  const auto aggregated = aggregate_predictions(selected, opts.softmax_first);

  MetricsReport rep;
  rep.evaluated_split = opts.split ? std::string(to_string(*opts.split)) : "all";
  rep.softmax_first = opts.softmax_first;
  rep.manifest_provenance = manifest.provenance;

  std::map<std::string, ActionClass> predicted;
  for (const auto& [id, cp] : aggregated) predicted[id] = cp.predicted;
  rep.clips = clip_metrics(truth, predicted);

  rep.min_records_per_clip = aggregated.empty() ? 0 : SIZE_MAX;
  for (const auto& [_, cp] : aggregated) {
    rep.min_records_per_clip = std::min(rep.min_records_per_clip, cp.n_records);
    rep.max_records_per_clip = std::max(rep.max_records_per_clip, cp.n_records);
  }

  std::map<std::string, std::vector<ActionClass>> by_video;
  for (const auto& [clip, video] : clip_video) by_video[video].push_back(predicted.at(clip));
  auto agg = video_aggregate(by_video);
  rep.warnings = std::move(agg.warnings);
  rep.video_predictions = std::move(agg.labels);
  for (const auto& [video, _] : rep.video_predictions) {
    const VideoRecord* rec = find_video(records, video);
    if (!rec) throw CoverageError("manifest video '" + video + "' is missing from the annotations");
    rep.video_truths[video] = video_truth(*rec, opts.raw_kind_truth);
  }
  rep.videos = video_metrics(rep.video_truths, rep.video_predictions);
  return rep;
}

inline nlohmann::json to_json(const ConfusionMatrix& cm) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& row : cm) j.push_back(row);
  return j;
}

inline nlohmann::json to_json(const MetricsReport& rep) {
  nlohmann::json j;
  nlohmann::json classes;
  for (ActionClass c : kAllClasses) {
    const auto& m = rep.clips.per_class[static_cast<std::size_t>(c)];
    nlohmann::json flags = nlohmann::json::array();
    if (m.precision_undefined) flags.push_back("precision");
    if (m.recall_undefined) flags.push_back("recall");
    if (m.f1_undefined) flags.push_back("f1");
    classes[std::string(to_string(c))] = {
        {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"support", m.support}, {"undefined", flags}};
  }
  j["clip_level"] = {{"classes", classes},
                     {"macro", {{"precision", rep.clips.macro_precision},
                                {"recall", rep.clips.macro_recall},
                                {"f1", rep.clips.macro_f1}}},
                     {"confusion", to_json(rep.clips.confusion)},
                     {"confusion_order", {"Fall", "Lying", "Other"}},
                     {"n_clips", rep.clips.n_clips}};
  const auto& v = rep.videos;
  j["video_level"] = {{"precision", v.precision},
                      {"sensitivity", v.sensitivity},
                      {"specificity", v.specificity},
                      {"f1", v.f1},
                      {"confusion", {{"tp", v.tp}, {"fp", v.fp}, {"tn", v.tn}, {"fn", v.fn}}},
                      {"undefined", v.undefined},
                      {"n_videos", v.tp + v.fp + v.tn + v.fn}};
  nlohmann::json videos = nlohmann::json::object();
  for (const auto& [id, label] : rep.video_predictions)
    videos[id] = {{"predicted", std::string(to_string(label))},
                  {"truth", std::string(to_string(rep.video_truths.at(id)))}};
  j["videos"] = videos;
  j["warnings"] = rep.warnings;
  j["evaluation"] = {{"split", rep.evaluated_split},
                     {"softmax_first", rep.softmax_first},
                     {"records_per_clip", {{"min", rep.min_records_per_clip}, {"max", rep.max_records_per_clip}}}};
  j["provenance"] = {{"manifest", to_json(rep.manifest_provenance)},
                     {"inputs", rep.input_digests},
                     {"digest", rep.provenance_digest}};
  return j;
}

inline std::string render_table(const nlohmann::json& report) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  const auto& clip = report.at("clip_level");
  os << "Clip level (" << report.at("evaluation").at("split").get<std::string>() << " split, "
     << clip.at("n_clips").get<std::int64_t>() << " clips)\n";
  os << std::left << std::setw(16) << "Class" << std::right << std::setw(11) << "Precision" << std::setw(9) << "Recall"
     << std::setw(10) << "F1-Score" << std::setw(9) << "Support" << "\n";
  for (const char* name : {"Fall", "Lying", "Other"}) {
    const auto& c = clip.at("classes").at(name);
    os << std::left << std::setw(16) << name << std::right << std::setw(11) << c.at("precision").get<double>()
       << std::setw(9) << c.at("recall").get<double>() << std::setw(10) << c.at("f1").get<double>() << std::setw(9)
       << c.at("support").get<std::int64_t>() << "\n";
  }
  const auto& macro = clip.at("macro");
  os << std::left << std::setw(16) << "Macro average" << std::right << std::setw(11)
     << macro.at("precision").get<double>() << std::setw(9) << macro.at("recall").get<double>() << std::setw(10)
     << macro.at("f1").get<double>() << std::setw(9) << clip.at("n_clips").get<std::int64_t>() << "\n\n";

  const auto& vid = report.at("video_level");
  os << "Video level (" << vid.at("n_videos").get<std::int64_t>() << " videos)\n";
  os << std::right << std::setw(8) << "Prec" << std::setw(13) << "Recall/Sens" << std::setw(8) << "Spec"
     << std::setw(8) << "F1" << "\n";
  os << std::setw(8) << vid.at("precision").get<double>() << std::setw(13) << vid.at("sensitivity").get<double>()
     << std::setw(8) << vid.at("specificity").get<double>() << std::setw(8) << vid.at("f1").get<double>() << "\n";
  if (!vid.at("undefined").empty()) os << "undefined (reported as 0): " << vid.at("undefined").dump() << "\n";
  return os.str();
}

}  // namespace cutup
