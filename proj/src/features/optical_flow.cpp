#include "priorloc/features/optical_flow.hpp"

#include <cmath>

#include "priorloc/common/error.hpp"

namespace priorloc {
namespace {

struct Level {
  FloatImage img, gx, gy;
};

std::vector<Level> build_pyramid(const Image& src, int levels) {
  std::vector<Level> pyr;
  FloatImage cur = to_float(src);
  for (int l = 0; l < levels; ++l) {
    Level lv;
    lv.gx = FloatImage{cur.width, cur.height, std::vector<float>(cur.data.size())};
    lv.gy = lv.gx;
    for (int y = 0; y < cur.height; ++y) {
      for (int x = 0; x < cur.width; ++x) {
        const int xm = std::max(x - 1, 0), xp = std::min(x + 1, cur.width - 1);
        const int ym = std::max(y - 1, 0), yp = std::min(y + 1, cur.height - 1);
        const std::size_t i = static_cast<std::size_t>(y) * cur.width + x;
        lv.gx.data[i] = (cur.at(xp, y) - cur.at(xm, y)) / static_cast<float>(xp - xm);
        lv.gy.data[i] = (cur.at(x, yp) - cur.at(x, ym)) / static_cast<float>(yp - ym);
      }
    }
    lv.img = cur;
    pyr.push_back(std::move(lv));
    if (l + 1 < levels) {
      if (cur.width < 8 || cur.height < 8) break;
      cur = pyr_down(cur);
    }
  }
  return pyr;
}

bool inside(const FloatImage& img, const Vec2& p) {
  return p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= img.width - 1 && p.y() <= img.height - 1;
}

LkTrack track_one(const std::vector<Level>& from, const std::vector<Level>& to,
                  const Vec2& p0, const LkConfig& cfg) {
  const int r = cfg.window / 2;
  const double n = static_cast<double>((2 * r + 1) * (2 * r + 1));
  const int top = static_cast<int>(from.size()) - 1;
  Vec2 guess = Vec2::Zero();
  std::vector<float> tmpl, tx, ty;
  for (int L = top; L >= 0; --L) {
    const Level& A = from[L];
    const Level& B = to[L];
    const double scale = std::ldexp(1.0, -L);
    const Vec2 p = p0 * scale;
    tmpl.clear();
    tx.clear();
    ty.clear();
    Eigen::Matrix2d G = Eigen::Matrix2d::Zero();
    for (int dy = -r; dy <= r; ++dy) {
      for (int dx = -r; dx <= r; ++dx) {
        const double x = p.x() + dx, y = p.y() + dy;
        const float ix = A.gx.sample(x, y), iy = A.gy.sample(x, y);
        tmpl.push_back(A.img.sample(x, y));
        tx.push_back(ix);
        ty.push_back(iy);
        G(0, 0) += ix * ix;
        G(0, 1) += ix * iy;
        G(1, 1) += iy * iy;
      }
    }
    G(1, 0) = G(0, 1);
    const double tr = G.trace(), det = G.determinant();
    const double min_eig = 0.5 * (tr - std::sqrt(std::max(tr * tr - 4.0 * det, 0.0)));
    if (min_eig / n < cfg.min_eigenvalue) return {};
    const Eigen::Matrix2d Ginv = G.inverse();

    Vec2 v = Vec2::Zero();
    double last_step = 0.0;
    for (int it = 0; it < cfg.max_iterations; ++it) {
      const Vec2 q = p + guess + v;
      if (!inside(B.img, q)) return {};
      Vec2 b = Vec2::Zero();
      std::size_t k = 0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx, ++k) {
          const double diff = tmpl[k] - B.img.sample(q.x() + dx, q.y() + dy);
          b.x() += diff * tx[k];
          b.y() += diff * ty[k];
        }
      }
      const Vec2 eta = Ginv * b;
      v += eta;
      last_step = eta.norm();
      if (last_step < cfg.epsilon) break;
    }
    if (L == 0 && last_step > 10.0 * cfg.epsilon && last_step > 0.1) return {};
    guess = L > 0 ? Vec2(2.0 * (guess + v)) : Vec2(guess + v);
  }
  const Vec2 out = p0 + guess;
  if (!inside(to[0].img, out)) return {};
  return {out, true};
}

}  // namespace

void LkConfig::validate() const {
  if (levels < 1 || window < 3 || window % 2 == 0 || max_iterations < 1 ||
      !(epsilon > 0.0) || !(min_eigenvalue >= 0.0) || !(fb_max > 0.0)) {
    throw Error(ErrorCode::kConfig, "invalid LK configuration");
  }
}

std::vector<LkTrack> lk_track(const Image& prev, const Image& cur,
                              const std::vector<Vec2>& points, const LkConfig& cfg) {
  cfg.validate();
  if (prev.width() != cur.width() || prev.height() != cur.height()) {
    throw Error(ErrorCode::kSizeMismatch, "LK images differ in size");
  }
  std::vector<LkTrack> out(points.size());
  if (points.empty() || prev.empty()) return out;
  const auto pa = build_pyramid(prev, cfg.levels);
  const auto pb = build_pyramid(cur, cfg.levels);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const LkTrack fwd = track_one(pa, pb, points[i], cfg);
    if (!fwd.ok) continue;
    const LkTrack bwd = track_one(pb, pa, fwd.point, cfg);
    if (!bwd.ok || (bwd.point - points[i]).norm() > cfg.fb_max) continue;
    out[i] = fwd;
  }
  return out;
}

}  // namespace priorloc
