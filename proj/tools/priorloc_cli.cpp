// priorloc: synthetic datasets, prior-map building, localization and
// trajectory evaluation from the command line. Exit codes are the library's
// error codes (0 on success).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "priorloc/common/error.hpp"
#include "priorloc/harness/config.hpp"
#include "priorloc/harness/dataset.hpp"
#include "priorloc/harness/manifest.hpp"
#include "priorloc/harness/pipeline.hpp"

namespace fs = std::filesystem;
using namespace priorloc;

namespace {

struct ConfigOptions {
  std::string file;
  std::vector<std::string> overrides;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--config", file, "key = value config file (defaults: `priorloc config`)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--set", overrides, "override one key, key=value (repeatable)");
  }

  RunConfig load() const {
    RunConfig cfg = file.empty() ? RunConfig{} : load_run_config(file);
    for (const std::string& o : overrides) apply_override(cfg, o);
    cfg.validate();
    return cfg;
  }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
}

std::string manifest_path(const std::string& flag, const std::string& primary_output) {
  return flag.empty() ? primary_output + ".manifest.json" : flag;
}

std::string vocabulary_path(const std::string& map_path) { return map_path + ".vocab"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prior-map visual localization: build maps, localize, evaluate"};
  app.require_subcommand(1);
  const std::vector<std::string> args(argv + 1, argv + argc);

  // config
  auto* config_cmd = app.add_subcommand("config", "print the configuration with every default");
  ConfigOptions config_opts;
  config_opts.add_to(config_cmd);
  bool with_docs = false;
  config_cmd->add_flag("--docs", with_docs, "precede every key with its documentation");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "write the synthetic corridor as a dataset");
  ConfigOptions synth_opts;
  synth_opts.add_to(synth_cmd);
  std::string synth_out, synth_manifest;
  synth_cmd->add_option("--out", synth_out, "dataset directory")->required();
  synth_cmd->add_option("--manifest", synth_manifest, "manifest path (default <out>.manifest.json)");

  // build-map
  auto* build_cmd = app.add_subcommand("build-map", "build a prior map from a dataset");
  ConfigOptions build_opts;
  build_opts.add_to(build_cmd);
  std::string build_dataset, build_out, build_priors = "registration", build_sequence = "mapping",
                                        build_manifest;
  build_cmd->add_option("--dataset", build_dataset, "dataset directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  build_cmd->add_option("--out", build_out, "prior-map file")->required();
  build_cmd->add_option("--priors", build_priors, "camera prior source")
      ->check(CLI::IsMember({"registration", "dataset"}))
      ->capture_default_str();
  build_cmd->add_option("--sequence", build_sequence, "mapping sequence")->capture_default_str();
  build_cmd->add_option("--manifest", build_manifest, "manifest path (default <out>.manifest.json)");

  // localize
  auto* loc_cmd = app.add_subcommand("localize", "localize a sequence against a prior map");
  ConfigOptions loc_opts;
  loc_opts.add_to(loc_cmd);
  std::string loc_map, loc_dataset, loc_out, loc_sequence = "query", loc_log, loc_timing,
                                                 loc_manifest;
  loc_cmd->add_option("--map", loc_map, "prior-map file")->required()->check(CLI::ExistingFile);
  loc_cmd->add_option("--dataset", loc_dataset, "dataset directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  loc_cmd->add_option("--out", loc_out, "trajectory file (TUM)")->required();
  loc_cmd->add_option("--sequence", loc_sequence, "sequence to localize")->capture_default_str();
  loc_cmd->add_option("--log", loc_log, "per-frame log file (default: stdout)");
  loc_cmd->add_option("--timing-csv", loc_timing, "per-frame timing CSV");
  loc_cmd->add_option("--manifest", loc_manifest, "manifest path (default <out>.manifest.json)");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "APE/RPE of an estimate against a reference");
  std::string eval_est, eval_ref, eval_csv;
  double eval_tolerance = kDefaultAssociationTolerance;
  eval_cmd->add_option("--est", eval_est, "estimated trajectory (TUM)")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--ref", eval_ref, "reference trajectory (TUM)")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--csv", eval_csv, "per-pair APE series");
  eval_cmd->add_option("--tolerance", eval_tolerance, "timestamp association tolerance, s")
      ->capture_default_str();

  // map-info
  auto* info_cmd = app.add_subcommand("map-info", "summarize a prior-map file");
  std::string info_map;
  info_cmd->add_option("--map", info_map, "prior-map file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ErrorCode::kConfig);
  }

  try {
    if (*config_cmd) {
      std::cout << format_run_config(config_opts.load(), with_docs);
      return 0;
    }

    if (*synth_cmd) {
      const RunConfig cfg = synth_opts.load();
      const SynthWorld world = synth_generate(cfg.synth);
      const auto files = write_synth_dataset(world, synth_out);
      Manifest m{"synth", args, cfg, {}, {{"dataset", synth_out}}};
      m.write(manifest_path(synth_manifest, synth_out));
      std::printf("wrote %zu files to %s\n", files.size(), synth_out.c_str());
      return 0;
    }

    if (*build_cmd) {
      const RunConfig cfg = build_opts.load();
      const Dataset dataset = open_dataset(build_dataset);
      BuildMapReport rep;
      const BuiltMap built =
          build_map(dataset, cfg, parse_prior_source(build_priors), build_sequence, &rep);
      save_map(build_out, built.map.visual, built.map.voxels);
      Manifest m{"build-map", args, cfg, {{"dataset", build_dataset}}, {{"map", build_out}}};
      if (built.vocabulary) {
        save_vocabulary(vocabulary_path(build_out), *built.vocabulary);
        m.outputs.emplace_back("vocabulary", vocabulary_path(build_out));
      }
      m.write(manifest_path(build_manifest, build_out));
      std::printf(
          "frames=%zu dropped=%zu keyframes=%zu points=%zu occupied_voxels=%zu "
          "priors_s=%.2f extract_s=%.2f reconstruct_s=%.2f map_hash=%s\n",
          rep.frames, rep.dropped_frames, rep.keyframes, rep.points, rep.occupied_voxels,
          rep.prior_seconds, rep.extraction_seconds, rep.reconstruction_seconds,
          hex64(map_hash(built.map.visual, built.map.voxels)).c_str());
      return 0;
    }

    if (*loc_cmd) {
      const RunConfig cfg = loc_opts.load();
      const PriorMap map = load_map(loc_map);
      const Dataset dataset = open_dataset(loc_dataset);
      std::optional<Vocabulary> vocab;
      Manifest m{"localize", args, cfg, {{"map", loc_map}, {"dataset", loc_dataset}}, {}};
      if (cfg.feature_provider == "classical") {
        vocab = load_vocabulary(vocabulary_path(loc_map));
        m.inputs.emplace_back("vocabulary", vocabulary_path(loc_map));
      }
      std::ofstream log_file;
      if (!loc_log.empty()) {
        log_file.open(loc_log);
        if (!log_file) throw Error(ErrorCode::kIo, "cannot write " + loc_log);
      }
      std::ostream& log = loc_log.empty() ? std::cout : log_file;
      const LocalizeReport rep = localize_sequence(
          map, dataset, cfg, loc_sequence, vocab,
          [&log](const FrameLog& f) { log << format_frame_log(f) << '\n'; });
      write_tum(loc_out, rep.trajectory);
      m.outputs.emplace_back("trajectory", loc_out);
      if (!loc_log.empty()) m.outputs.emplace_back("log", loc_log);
      if (!loc_timing.empty()) {
        write_text(loc_timing, format_timing_csv(rep.frames));
        m.outputs.emplace_back("timing", loc_timing);
      }
      m.write(manifest_path(loc_manifest, loc_out));
      std::fprintf(stderr, "localized %zu/%zu frames, tracking after first %zu, mean step %.2f ms\n",
                   rep.localized, rep.frames.size(), rep.tracking_after_first, rep.mean_step_ms);
      if (rep.localized == 0 && !rep.frames.empty()) {
        const auto err = rep.frames.back().error;
        return static_cast<int>(err ? *err : ErrorCode::kTrackingLost);
      }
      return 0;
    }

    if (*eval_cmd) {
      const TrajectoryMetrics metrics =
          ape_rpe(read_tum(eval_est), read_tum(eval_ref), eval_tolerance);
      std::cout << format_metrics_table(metrics);
      if (!eval_csv.empty()) write_text(eval_csv, format_metrics_csv(metrics));
      return 0;
    }

    if (*info_cmd) {
      const PriorMap map = load_map(info_map);
      const VisualMap& v = map.visual;
      std::size_t observations = 0;
      for (const auto& [id, mp] : v.points()) observations += mp.observers.size();
      const Intrinsics& K = v.intrinsics();
      std::printf("format_version=%u\nkeyframes=%zu\npoints=%zu\nobservations=%zu\n",
                  kMapFormatVersion, v.keyframe_count(), v.point_count(), observations);
      std::printf("camera=%.6g,%.6g,%.6g,%.6g,%dx%d\n", K.fx, K.fy, K.cx, K.cy, K.width,
                  K.height);
      std::printf("voxel_resolution=%.6g\nvoxel_cells=%zu\noccupied_voxels=%zu\nmap_hash=%s\n",
                  map.voxels.config().resolution, map.voxels.cell_count(),
                  map.voxels.occupied_count(), hex64(map_hash(v, map.voxels)).c_str());
      return 0;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: Internal: %s\n", e.what());
    return static_cast<int>(ErrorCode::kInternal);
  }
  return 0;
}
