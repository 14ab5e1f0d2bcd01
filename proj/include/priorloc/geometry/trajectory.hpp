#pragma once

#include <string>
#include <vector>

#include "priorloc/geometry/pose.hpp"

namespace priorloc {

struct StampedPose {
  double timestamp = 0.0;
  Pose pose;
};

/// Time-ordered pose sequence with strictly increasing timestamps.
class Trajectory {
 public:
  Trajectory() = default;

  /// Throws OutOfRange if `t` does not exceed the last timestamp.
  void push_back(double t, const Pose& pose);

  std::size_t size() const { return poses_.size(); }
  bool empty() const { return poses_.empty(); }
  const StampedPose& operator[](std::size_t i) const { return poses_[i]; }
  const StampedPose& front() const { return poses_.front(); }
  const StampedPose& back() const { return poses_.back(); }
  auto begin() const { return poses_.begin(); }
  auto end() const { return poses_.end(); }

  /// Index of the entry nearest in time to `t`, or -1 when none is within
  /// `tolerance` seconds.
  long nearest(double t, double tolerance) const;

 private:
  std::vector<StampedPose> poses_;
};

/// TUM format: "timestamp tx ty tz qx qy qz qw" per line, '#' comments.
Trajectory read_tum(const std::string& path);
void write_tum(const std::string& path, const Trajectory& traj);
std::string format_tum(const Trajectory& traj);
Trajectory parse_tum(const std::string& text);

}  // namespace priorloc
