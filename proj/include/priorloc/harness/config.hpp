#pragma once

#include <functional>
#include <string>
#include <vector>

#include "priorloc/features/classical_detector.hpp"
#include "priorloc/geometry/alignment.hpp"
#include "priorloc/harness/synth_world.hpp"
#include "priorloc/localizer/localizer.hpp"
#include "priorloc/mapper/reconstruction.hpp"
#include "priorloc/registration/prior_generation.hpp"

namespace priorloc {

/// Every tunable of a run. Serialized as "key = value" lines; see
/// config_keys() for the documented key set.
struct RunConfig {
  SynthConfig synth;
  PriorGenerationConfig registration;
  /// Voxel downsampling of the reference cloud before registration, m.
  double reference_leaf_size = 0.1;
  VoxelMapConfig voxels;
  ReconstructionConfig mapping;
  LocalizerConfig localizer;
  /// "sidecar" reads precomputed feature files; "classical" runs the
  /// built-in detector on the images.
  std::string feature_provider = "sidecar";
  ClassicalConfig classical;
  int vocabulary_words = 64;
  std::uint64_t vocabulary_seed = 1;
  double trajectory_tolerance = kDefaultAssociationTolerance;

  RunConfig();
  /// Throws Config when any module configuration is invalid.
  void validate() const;
};

struct ConfigKey {
  std::string key;
  std::string doc;
  std::function<std::string(const RunConfig&)> get;
  /// Throws Config on a malformed value.
  std::function<void(RunConfig&, const std::string&)> set;
};

/// All accepted keys in documentation order.
const std::vector<ConfigKey>& config_keys();

/// Applies "key = value" lines ('#' starts a comment) on top of `base`.
/// Throws Config on unknown or repeated keys, malformed lines or values, and
/// an invalid result.
RunConfig parse_run_config(const std::string& text, const RunConfig& base = {});
RunConfig load_run_config(const std::string& path, const RunConfig& base = {});
/// Applies one "key=value" override.
void apply_override(RunConfig& cfg, const std::string& assignment);

/// Every key with its current value, preceded by its documentation when
/// `with_docs`. Parsing the output reproduces the configuration exactly.
std::string format_run_config(const RunConfig& cfg, bool with_docs = false);

/// FNV-1a 64 of format_run_config(cfg).
std::uint64_t config_hash(const RunConfig& cfg);

}  // namespace priorloc
