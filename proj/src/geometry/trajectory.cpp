#include "priorloc/geometry/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "priorloc/common/error.hpp"

namespace priorloc {

void Trajectory::push_back(double t, const Pose& pose) {
  if (!std::isfinite(t)) throw Error(ErrorCode::kOutOfRange, "non-finite timestamp");
  if (!poses_.empty() && !(t > poses_.back().timestamp)) {
    throw Error(ErrorCode::kOutOfRange, "timestamps must be strictly increasing");
  }
  poses_.push_back({t, pose});
}

long Trajectory::nearest(double t, double tolerance) const {
  if (poses_.empty()) return -1;
  auto it = std::lower_bound(poses_.begin(), poses_.end(), t,
                             [](const StampedPose& p, double v) { return p.timestamp < v; });
  long best = -1;
  double best_dt = tolerance;
  auto consider = [&](decltype(it) cand) {
    if (cand == poses_.end()) return;
    const double dt = std::abs(cand->timestamp - t);
    if (dt <= best_dt) {
      // prefer the earlier entry on exact ties
      if (dt < best_dt || best < 0) best = std::distance(poses_.begin(), cand);
      best_dt = dt;
    }
  };
  if (it != poses_.begin()) consider(std::prev(it));
  consider(it);
  return best;
}

std::string format_tum(const Trajectory& traj) {
  std::string out;
  char line[256];
  for (const auto& sp : traj) {
    const Quat& q = sp.pose.rotation();
    const Vec3& t = sp.pose.translation();
    std::snprintf(line, sizeof(line), "%.9f %.9f %.9f %.9f %.9f %.9f %.9f %.9f\n",
                  sp.timestamp, t.x(), t.y(), t.z(), q.x(), q.y(), q.z(), q.w());
    out += line;
  }
  return out;
}

Trajectory parse_tum(const std::string& text) {
  Trajectory traj;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    double v[8];
    int n = 0;
    while (n < 8 && (ls >> v[n])) ++n;
    if (n == 0) {
      std::string rest;
      if (ls.clear(), ls >> rest) {
        throw Error(ErrorCode::kCorrupt, "trajectory line " + std::to_string(lineno) +
                                             ": not a number");
      }
      continue;
    }
    if (n != 8) {
      throw Error(ErrorCode::kCorrupt,
                  "trajectory line " + std::to_string(lineno) + ": expected 8 fields");
    }
    const Quat q(v[7], v[4], v[5], v[6]);
    if (q.norm() < 1e-9) {
      throw Error(ErrorCode::kCorrupt,
                  "trajectory line " + std::to_string(lineno) + ": zero quaternion");
    }
    traj.push_back(v[0], Pose(q, Vec3(v[1], v[2], v[3])));
  }
  return traj;
}

Trajectory read_tum(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open trajectory " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_tum(ss.str());
}

void write_tum(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write trajectory " + path);
  out << format_tum(traj);
}

}  // namespace priorloc
