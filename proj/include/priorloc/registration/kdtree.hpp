#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "priorloc/geometry/types.hpp"

namespace priorloc {

struct Neighbor {
  std::uint32_t index;
  double squared_distance;
};

/// Static 3-D kd-tree over a copied point set (median splits on the widest
/// axis, small leaf buckets).
class KdTree3 {
 public:
  KdTree3() = default;
  explicit KdTree3(std::span<const Vec3> points);

  std::size_t size() const { return points_.size(); }

  std::optional<Neighbor> nearest(
      const Vec3& query,
      double max_distance = std::numeric_limits<double>::infinity()) const;

  /// Up to k neighbors sorted by ascending distance.
  std::vector<Neighbor> knn(const Vec3& query, std::size_t k) const;

 private:
  struct Node {
    std::uint32_t begin = 0, end = 0;  // leaf range into order_
    std::int32_t left = -1, right = -1;
    int axis = -1;                     // -1 marks a leaf
    double split = 0.0;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  void search_nearest(std::int32_t node, const Vec3& q, Neighbor& best) const;
  void search_knn(std::int32_t node, const Vec3& q, std::size_t k,
                  std::vector<Neighbor>& heap) const;

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace priorloc
