#include "priorloc/features/matching.hpp"

#include <limits>

#include "priorloc/common/error.hpp"

namespace priorloc {
namespace {

struct Best {
  std::size_t index = std::numeric_limits<std::size_t>::max();
  double d1 = std::numeric_limits<double>::infinity();
  double d2 = std::numeric_limits<double>::infinity();

  void offer(std::size_t i, double d) {
    if (d < d1) {
      d2 = d1;
      d1 = d;
      index = i;
    } else if (d < d2) {
      d2 = d;
    }
  }
};

}  // namespace

std::vector<Match> match_descriptors(const DescriptorMatrix& a, const DescriptorMatrix& b,
                                     const MatchConfig& cfg) {
  const auto na = static_cast<std::size_t>(a.rows());
  const auto nb = static_cast<std::size_t>(b.rows());
  if (na == 0 || nb == 0) return {};
  if (a.cols() != b.cols()) {
    throw Error(ErrorCode::kDimMismatch, "descriptor dimensions differ: " +
                                             std::to_string(a.cols()) + " vs " +
                                             std::to_string(b.cols()));
  }
  std::vector<Best> row(na), col(nb);
  // Element-wise dot products keep the result exactly symmetric in (a, b).
  for (std::size_t i = 0; i < na; ++i) {
    const auto ai = a.row(static_cast<Eigen::Index>(i));
    for (std::size_t j = 0; j < nb; ++j) {
      const double d = 1.0 - ai.dot(b.row(static_cast<Eigen::Index>(j)));
      row[i].offer(j, d);
      col[j].offer(i, d);
    }
  }
  std::vector<Match> out;
  for (std::size_t i = 0; i < na; ++i) {
    const Best& r = row[i];
    const Best& c = col[r.index];
    if (c.index != i || r.d1 >= cfg.max_distance) continue;
    if (!(r.d1 < cfg.ratio * r.d2) || !(c.d1 < cfg.ratio * c.d2)) continue;
    out.emplace_back(i, r.index);
  }
  return out;
}

}  // namespace priorloc
