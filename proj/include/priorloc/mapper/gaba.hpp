#pragma once

#include <set>
#include <vector>

#include "priorloc/mapper/bundle_problem.hpp"
#include "priorloc/mapper/visual_map.hpp"
#include "priorloc/voxel_map/voxel_map.hpp"

namespace priorloc {

struct GabaConfig {
  double huber_visual = 2.0;   // px
  double huber_struct = 0.5;   // m
  double huber_prior = 1.0;    // normalized
  double sigma_visual = 1.0;   // px
  double sigma_struct = 0.05;  // m, floored at half the voxel resolution
  double sigma_prior_t = 0.05;              // m
  double sigma_prior_r = 0.5 * kDegToRad;   // rad
  int rounds = 5;
  int inner_iters = 10;

  bool use_structure = true;
  bool use_prior = true;
  double struct_gate = 0.2;     // m, max distance from point to its ray hit
  double min_ray_length = 0.0;  // m, <= 0 means twice the voxel resolution
  /// One structure residual per (point, observer) instead of per point.
  bool per_pair_structure = false;
  /// Detach observations above outlier_sigma * sigma_visual and cull points
  /// left with fewer than two observers after the last round.
  bool cull_outliers = true;
  double outlier_sigma = 3.0;
  double cost_tolerance = 1e-6;  // relative, for the non-decreasing diagnostic
  /// Move the structure target from the hit voxel center to the first peak
  /// of the interpolated occupancy along the ray, which for a surface layer
  /// is the surface crossing.
  bool refine_surface = true;
  /// Visual and prior terms only, solved once before the first
  /// association, so rays are traced from a map consistent with its priors.
  bool warm_start = true;

  void validate() const;
};

struct GabaRound {
  double cost_start = 0.0;  // after re-association
  double cost_end = 0.0;
  std::size_t associations = 0;
  int lm_iterations = 0;
  std::vector<double> lm_costs;
};

struct GabaReport {
  /// Warm-start solve, empty when disabled.
  std::vector<double> warm_start_costs;
  std::vector<GabaRound> rounds;
  /// Set when a round starts above the previous round's final cost.
  bool non_decreasing_cost = false;
  std::size_t detached_observations = 0;
  std::size_t culled_points = 0;
};

/// Restricts optimization to a set of keyframes; the points they observe
/// are free, every other keyframe observing those points is held fixed.
struct GabaWindow {
  std::set<KeyframeId> free_keyframes;
};

/// Rounds of ray-trace association followed by LM over poses and points.
/// `voxels` may be null when the structure factor is disabled.
GabaReport gaba(VisualMap& map, const VoxelMap* voxels, const GabaConfig& cfg,
                const GabaWindow* window = nullptr);

/// Structure target for a point seen from `eye`: the first occupied voxel
/// along the ray (its center, or with `refine_surface` the occupancy peak
/// along the ray), if it lies within the gate.
std::optional<Vec3> structure_target(const VoxelMap& voxels, const Vec3& eye, const Vec3& p,
                                     double min_ray_length, double gate,
                                     bool refine_surface = true);

/// Bundle problem of the whole map (visual and prior terms only), used for
/// spectral checks. Pose index = keyframe id; point order = map order.
BundleProblem make_bundle_problem(const VisualMap& map, const GabaConfig& cfg);

}  // namespace priorloc
