#include "priorloc/registration/kdtree.hpp"

#include <algorithm>
#include <numeric>

namespace priorloc {
namespace {

constexpr std::uint32_t kLeafSize = 8;

bool heap_less(const Neighbor& a, const Neighbor& b) {
  return a.squared_distance < b.squared_distance ||
         (a.squared_distance == b.squared_distance && a.index < b.index);
}

}  // namespace

KdTree3::KdTree3(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    build(0, static_cast<std::uint32_t>(points_.size()));
  }
}

std::int32_t KdTree3::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= kLeafSize) return id;

  Vec3 lo = points_[order_[begin]], hi = lo;
  for (std::uint32_t i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     return points_[a][axis] < points_[b][axis] ||
                            (points_[a][axis] == points_[b][axis] && a < b);
                   });
  const double split = points_[order_[mid]][axis];
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KdTree3::search_nearest(std::int32_t id, const Vec3& q, Neighbor& best) const {
  const Node& n = nodes_[id];
  if (n.axis < 0) {
    for (std::uint32_t i = n.begin; i < n.end; ++i) {
      const Neighbor cand{order_[i], (points_[order_[i]] - q).squaredNorm()};
      if (heap_less(cand, best)) best = cand;
    }
    return;
  }
  const double diff = q[n.axis] - n.split;
  const std::int32_t first = diff < 0.0 ? n.left : n.right;
  const std::int32_t second = diff < 0.0 ? n.right : n.left;
  search_nearest(first, q, best);
  if (diff * diff <= best.squared_distance) search_nearest(second, q, best);
}

std::optional<Neighbor> KdTree3::nearest(const Vec3& query, double max_distance) const {
  if (points_.empty()) return std::nullopt;
  Neighbor best{std::numeric_limits<std::uint32_t>::max(),
                max_distance == std::numeric_limits<double>::infinity()
                    ? max_distance
                    : max_distance * max_distance};
  search_nearest(0, query, best);
  if (best.index == std::numeric_limits<std::uint32_t>::max()) return std::nullopt;
  return best;
}

void KdTree3::search_knn(std::int32_t id, const Vec3& q, std::size_t k,
                         std::vector<Neighbor>& heap) const {
  const Node& n = nodes_[id];
  if (n.axis < 0) {
    for (std::uint32_t i = n.begin; i < n.end; ++i) {
      const Neighbor cand{order_[i], (points_[order_[i]] - q).squaredNorm()};
      if (heap.size() < k) {
        heap.push_back(cand);
        std::push_heap(heap.begin(), heap.end(), heap_less);
      } else if (heap_less(cand, heap.front())) {
        std::pop_heap(heap.begin(), heap.end(), heap_less);
        heap.back() = cand;
        std::push_heap(heap.begin(), heap.end(), heap_less);
      }
    }
    return;
  }
  const double diff = q[n.axis] - n.split;
  const std::int32_t first = diff < 0.0 ? n.left : n.right;
  const std::int32_t second = diff < 0.0 ? n.right : n.left;
  search_knn(first, q, k, heap);
  if (heap.size() < k || diff * diff <= heap.front().squared_distance) {
    search_knn(second, q, k, heap);
  }
}

std::vector<Neighbor> KdTree3::knn(const Vec3& query, std::size_t k) const {
  std::vector<Neighbor> heap;
  if (points_.empty() || k == 0) return heap;
  heap.reserve(k);
  search_knn(0, query, k, heap);
  std::sort_heap(heap.begin(), heap.end(), heap_less);
  return heap;
}

}  // namespace priorloc
