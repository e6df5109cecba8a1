// cutup: command-line front end for the clip dataset and evaluation pipeline.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cutup/cutup.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kParse = 3,
  kValidation = 4,
  kConfig = 5,
  kCoverage = 6,
  kBounds = 7,
  kGeometry = 8,
  kUnsampleable = 9,
  kIo = 10,
};

int exit_code_for(cutup::ErrorKind kind) {
  switch (kind) {
    case cutup::ErrorKind::Parse: return kParse;
    case cutup::ErrorKind::Validation: return kValidation;
    case cutup::ErrorKind::Config: return kConfig;
    case cutup::ErrorKind::Coverage: return kCoverage;
    case cutup::ErrorKind::Bounds: return kBounds;
    case cutup::ErrorKind::Geometry: return kGeometry;
    case cutup::ErrorKind::Unsampleable: return kUnsampleable;
  }
  return kInternal;
}

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// CUTUP_LOG=error|warn|info|debug
enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("CUTUP_LOG");
    const std::string v = env ? env : "warn";
    if (v == "error") return LogLevel::Error;
    if (v == "info") return LogLevel::Info;
    if (v == "debug") return LogLevel::Debug;
    return LogLevel::Warn;
  }();
  return level;
}

void log(LogLevel level, const std::string& msg) {
  static constexpr const char* names[] = {"error", "warn", "info", "debug"};
  if (level <= log_level()) std::cerr << "[cutup] " << names[static_cast<int>(level)] << ": " << msg << "\n";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << content;
  if (!out) throw IoError("failed writing '" + path + "'");
  log(LogLevel::Info, "wrote " + path);
}

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  std::string format = "json";
};

cutup::PipelineConfig load_config(const Globals& g) {
  json doc = json::object();
  if (!g.config.empty()) {
    if (fs::exists(g.config)) {
      const std::string text = read_file(g.config);
      doc = cutup::detail::parse_json_text(text, g.config);
    } else {
      std::string name = fs::path(g.config).filename().string();
      if (name.size() > 5 && name.ends_with(".json")) name.resize(name.size() - 5);
      if (name != "paper_cutup" && name != "paper_gaussian")
        throw cutup::ConfigError("config file '" + g.config + "' not found and is not a built-in profile");
      doc = cutup::builtin_profile(name);
    }
  }
  cutup::PipelineConfig cfg = cutup::parse_pipeline_config(doc);
  if (g.seed) cfg.set_seed(*g.seed);
  return cfg;
}

std::string path_or(const cutup::PipelineConfig& cfg, const std::string& flag, const std::string& io_key,
                     const std::string& fallback = "") {
  if (!flag.empty()) return flag;
  if (auto it = cfg.io.paths.find(io_key); it != cfg.io.paths.end()) return it->second;
  if (!fallback.empty()) return fallback;
  throw cutup::ConfigError("missing path for '" + io_key + "' (pass --" + io_key + " or set io." + io_key + ")");
}

std::vector<cutup::VideoRecord> load_annotations(const std::string& path) {
  return cutup::parse_annotations(read_file(path));
}

void print_json(const json& j) { std::cout << j.dump(2) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clip dataset generation and fall-detection evaluation toolkit"};
  app.set_version_flag("--version", std::string(cutup::kVersion));
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  std::uint64_t seed_value = 0;
  app.add_option("--config", g.config, "Pipeline config file or built-in profile (paper_cutup, paper_gaussian)");
  auto* seed_opt = app.add_option("--seed", seed_value, "Master seed for every random decision");
  app.add_option("--jobs", g.jobs, "Worker threads (output is identical for any value)")->check(CLI::PositiveNumber);
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"json", "table"}));

  std::string annotations, out, manifest, plans, preds, split_file, clips, distribution, report_path, mode, split_filter;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic annotation corpus");
  std::optional<int> n_fall, n_adl;
  std::optional<double> miss_rate;
  synth->add_option("--out", out, "annotations.json to write");
  synth->add_option("--n-fall", n_fall, "Number of fall videos");
  synth->add_option("--n-adl", n_adl, "Number of ADL videos");
  synth->add_option("--miss-rate", miss_rate, "Probability that a visibility flag is false");

  auto* validate = app.add_subcommand("validate", "Parse and validate annotations");
  validate->add_option("--annotations", annotations, "annotations.json");

  auto* split = app.add_subcommand("split", "Stratified train/val/test split");
  split->add_option("--annotations", annotations, "annotations.json");
  split->add_option("--out", out, "split.json to write");

  auto* sample = app.add_subcommand("sample", "Sample clips per split (unlabeled)");
  sample->add_option("--annotations", annotations, "annotations.json");
  sample->add_option("--split-file", split_file, "split.json from `split` (computed when omitted)");
  sample->add_option("--out", out, "clips.jsonl to write");

  auto* label = app.add_subcommand("label", "Priority-label sampled clips");
  label->add_option("--annotations", annotations, "annotations.json");
  label->add_option("--clips", clips, "clips.jsonl from `sample`");
  label->add_option("--out", out, "manifest.jsonl to write");

  auto* build = app.add_subcommand("build", "split + sample + label + undersample into a manifest");
  build->add_option("--annotations", annotations, "annotations.json");
  build->add_option("--out", out, "manifest.jsonl to write");
  build->add_option("--distribution", distribution, "distribution_report.json to write");

  auto* plan = app.add_subcommand("plan", "Frame windows and crop geometry per clip");
  plan->add_option("--annotations", annotations, "annotations.json");
  plan->add_option("--manifest", manifest, "manifest.jsonl");
  plan->add_option("--out", out, "frameplan.jsonl to write");
  plan->add_option("--mode", mode, "Force one mode for every clip")->check(CLI::IsMember({"train", "val", "test"}));
  plan->add_option("--split", split_filter, "Only plan clips of this split")->check(CLI::IsMember({"train", "val", "test", "all"}));

  auto* oracle = app.add_subcommand("oracle", "Noisy-oracle predictions for planned clips");
  std::vector<double> confusion;
  oracle->add_option("--manifest", manifest, "manifest.jsonl");
  oracle->add_option("--plans", plans, "frameplan.jsonl");
  oracle->add_option("--out", out, "predictions.jsonl to write");
  oracle->add_option("--confusion", confusion, "Row-major 3x3 confusion matrix (true x predicted)")->expected(9);
  bool correlated = false;
  oracle->add_flag("--per-clip", correlated, "One draw per clip instead of per (sample, crop)");

  auto* score = app.add_subcommand("score", "Clip- and video-level metrics");
  bool softmax = false;
  score->add_option("--manifest", manifest, "manifest.jsonl");
  score->add_option("--pred", preds, "predictions.jsonl");
  score->add_option("--annotations", annotations, "annotations.json");
  score->add_option("--out", out, "report.json to write");
  score->add_option("--split", split_filter, "Split to evaluate")->check(CLI::IsMember({"train", "val", "test", "all"}));
  score->add_flag("--softmax", softmax, "Average softmax probabilities instead of raw logits");

  auto* report = app.add_subcommand("report", "Render a report.json");
  report->add_option("--report", report_path, "report.json from `score`");

  auto* quality = app.add_subcommand("quality", "Worst-case label quality min(1, tau*F / (clip_len*fps))");
  std::string q_clip_len = "5", q_fps = "25";
  std::int64_t q_tau = 8, q_frames = 16;
  quality->add_option("--clip-len", q_clip_len, "Clip length in seconds");
  quality->add_option("--fps", q_fps, "Frame rate");
  quality->add_option("--tau", q_tau, "Frame sampling stride");
  quality->add_option("--frames", q_frames, "Frames per sample");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", "usage_error"}, {"message", e.what()}, {"exit_code", int(kUsage)}}.dump() << "\n";
    return kUsage;
  }
  if (seed_opt->count() > 0) g.seed = seed_value;

  try {
    const cutup::PipelineConfig cfg = load_config(g);

    if (synth->parsed()) {
      cutup::CorpusConfig c = cfg.synth;
      if (n_fall) c.n_fall_videos = *n_fall;
      if (n_adl) c.n_adl_videos = *n_adl;
      if (miss_rate) c.visibility_miss_rate = *miss_rate;
      const auto records = cutup::generate_corpus(c);
      write_file(path_or(cfg, out, "annotations", "annotations.json"), cutup::serialize_annotations(records));
      return kOk;
    }

    if (validate->parsed()) {
      const auto records = load_annotations(path_or(cfg, annotations, "annotations"));
      std::int64_t falls = 0;
      cutup::Rational total{0};
      for (const auto& r : records) {
        falls += r.kind == cutup::VideoKind::Fall;
        total += r.duration_s;
      }
      print_json({{"valid", true},
                  {"videos", records.size()},
                  {"fall_videos", falls},
                  {"adl_videos", static_cast<std::int64_t>(records.size()) - falls},
                  {"total_duration_s", total.to_string()}});
      return kOk;
    }

    if (split->parsed()) {
      const auto records = load_annotations(path_or(cfg, annotations, "annotations"));
      const auto assignment = cutup::stratified_split(records, cfg.build.split);
      write_file(path_or(cfg, out, "split", "split.json"), cutup::serialize_split(assignment));
      return kOk;
    }

    if (sample->parsed()) {
      cfg.build.validate();
      const auto records = load_annotations(path_or(cfg, annotations, "annotations"));
      const auto assignment = split_file.empty() ? cutup::stratified_split(records, cfg.build.split, true)
                                                 : cutup::parse_split_assignment(read_file(split_file));
      cutup::Manifest m;
      m.provenance = cutup::make_provenance(cfg.build);
      m.clips = cutup::sample_videos(records, assignment, cfg.build, g.jobs);
      write_file(path_or(cfg, out, "clips", "clips.jsonl"), cutup::serialize_manifest(m, /*with_labels=*/false));
      return kOk;
    }

    if (label->parsed()) {
      cfg.build.validate();
      const auto records = load_annotations(path_or(cfg, annotations, "annotations"));
      cutup::Manifest m = cutup::parse_manifest(read_file(path_or(cfg, clips, "clips")), /*require_label=*/false);
      cutup::label_clips(m.clips, records, cfg.build.labels, g.jobs);
      write_file(path_or(cfg, out, "manifest", "manifest.jsonl"), cutup::serialize_manifest(m));
      return kOk;
    }

    if (build->parsed()) {
      const auto records = load_annotations(path_or(cfg, annotations, "annotations"));
      const auto result = cutup::build_manifest(records, cfg.build, g.jobs);
      write_file(path_or(cfg, out, "manifest", "manifest.jsonl"), cutup::serialize_manifest(result.manifest));
      write_file(path_or(cfg, distribution, "distribution", "distribution_report.json"),
                 cutup::to_json(result.distribution).dump(2) + "\n");
      return kOk;
    }

    if (plan->parsed()) {
      const auto records = load_annotations(path_or(cfg, annotations, "annotations"));
      cutup::Manifest m = cutup::parse_manifest(read_file(path_or(cfg, manifest, "manifest")));
      if (!split_filter.empty() && split_filter != "all") {
        const auto keep = cutup::parse_split(split_filter);
        std::erase_if(m.clips, [&](const cutup::LabeledClip& c) { return c.split != keep; });
      }
      std::optional<cutup::PlanMode> forced;
      if (!mode.empty()) forced = cutup::parse_split(mode);
      const auto entries = cutup::plan_manifest(m, records, cfg.plan, cfg.master_seed, g.jobs, forced);
      std::size_t clamped = 0;
      for (const auto& e : entries) {
        const auto& idx = e.window.frame_indices;
        if (idx.size() > 1 && idx[idx.size() - 1] == idx[idx.size() - 2]) ++clamped;
      }
      if (clamped > 0)
        log(LogLevel::Warn, std::to_string(clamped) + " frame windows exceed their clip and repeat the last frame");
      write_file(path_or(cfg, out, "frameplan", "frameplan.jsonl"), cutup::serialize_frame_plans(entries));
      return kOk;
    }

    if (oracle->parsed()) {
      cutup::OracleConfig oc = cfg.oracle;
      if (!confusion.empty())
        for (std::size_t i = 0; i < 9; ++i) oc.confusion[i / 3][i % 3] = confusion[i];
      if (correlated) oc.per_clip_correlated = true;
      const auto m = cutup::parse_manifest(read_file(path_or(cfg, manifest, "manifest")));
      const auto entries = cutup::parse_frame_plans(read_file(path_or(cfg, plans, "frameplan")));
      write_file(path_or(cfg, out, "predictions", "predictions.jsonl"),
                 cutup::serialize_predictions(cutup::oracle_predict(m, entries, oc)));
      return kOk;
    }

    if (score->parsed()) {
      const std::string manifest_path = path_or(cfg, manifest, "manifest");
      const std::string pred_path = path_or(cfg, preds, "predictions");
      const std::string ann_path = path_or(cfg, annotations, "annotations");
      const std::string manifest_text = read_file(manifest_path);
      const std::string pred_text = read_file(pred_path);
      const std::string ann_text = read_file(ann_path);

      cutup::EvaluationOptions opts = cfg.evaluation;
      if (!split_filter.empty())
        opts.split = split_filter == "all" ? std::nullopt : std::optional(cutup::parse_split(split_filter));
      if (softmax) opts.softmax_first = true;

      auto rep = cutup::evaluate(cutup::parse_manifest(manifest_text), cutup::parse_predictions(pred_text),
                                 cutup::parse_annotations(ann_text), opts);
      rep.input_digests = {{"manifest", cutup::hex_digest(manifest_text)},
                           {"predictions", cutup::hex_digest(pred_text)},
                           {"annotations", cutup::hex_digest(ann_text)}};
      rep.provenance_digest = cutup::hex_digest(json(rep.input_digests).dump());
      for (const auto& w : rep.warnings) log(LogLevel::Warn, w);
      const json j = cutup::to_json(rep);
      write_file(path_or(cfg, out, "report", "report.json"), j.dump(2) + "\n");
      if (g.format == "table")
        std::cout << cutup::render_table(j);
      else
        print_json(j);
      return kOk;
    }

    if (report->parsed()) {
      const std::string path = path_or(cfg, report_path, "report");
      const std::string text = read_file(path);
      const json j = cutup::detail::parse_json_text(text, path);
      if (g.format == "table") {
        std::cout << cutup::render_table(j) << "\nProvenance\n";
        std::cout << "  report       " << cutup::hex_digest(text) << "\n";
        for (const auto& [name, digest] : j.at("provenance").at("inputs").items())
          std::cout << "  " << name << std::string(name.size() < 13 ? 13 - name.size() : 1, ' ')
                    << digest.get<std::string>() << "\n";
        std::cout << "  manifest cfg " << j.at("provenance").at("manifest").at("config_digest").get<std::string>()
                  << "\n";
      } else {
        json out_j = j;
        out_j["provenance"]["inputs"]["report"] = cutup::hex_digest(text);
        print_json(out_j);
      }
      return kOk;
    }

    if (quality->parsed()) {
      const auto q = cutup::label_quality_exact(cutup::Rational::parse(q_clip_len), cutup::Rational::parse(q_fps),
                                                q_tau, q_frames);
      if (g.format == "table")
        std::cout << json(q.to_double()).dump() << "\n";
      else
        print_json({{"label_quality", q.to_double()},
                    {"exact", q.to_string()},
                    {"window_frames", q_tau * q_frames},
                    {"clip_frames", (cutup::Rational::parse(q_clip_len) * cutup::Rational::parse(q_fps)).to_string()}});
      return kOk;
    }
  } catch (const cutup::Error& e) {
    const int code = exit_code_for(e.kind());
    std::cerr << json{{"error", std::string(cutup::to_string(e.kind()))}, {"message", e.what()}, {"exit_code", code}}.dump()
              << "\n";
    return code;
  } catch (const IoError& e) {
    std::cerr << json{{"error", "io_error"}, {"message", e.what()}, {"exit_code", int(kIo)}}.dump() << "\n";
    return kIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << json{{"error", "usage_error"}, {"message", e.what()}, {"exit_code", int(kUsage)}}.dump() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "internal_error"}, {"message", e.what()}, {"exit_code", int(kInternal)}}.dump() << "\n";
    return kInternal;
  }
  return kUsage;
}
