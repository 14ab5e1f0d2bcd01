#include "priorloc/features/classical_detector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "priorloc/common/error.hpp"

namespace priorloc {

std::size_t Vocabulary::nearest_word(const Eigen::Ref<const Eigen::VectorXd>& d) const {
  Eigen::Index best = 0;
  (words * d).maxCoeff(&best);
  return static_cast<std::size_t>(best);
}

GlobalDescriptor Vocabulary::bag(const DescriptorMatrix& descriptors) const {
  GlobalDescriptor g = GlobalDescriptor::Zero(words.rows());
  for (Eigen::Index i = 0; i < descriptors.rows(); ++i) {
    g[static_cast<Eigen::Index>(nearest_word(descriptors.row(i).transpose()))] += 1.0;
  }
  g = g.cwiseProduct(idf);
  const double n = g.norm();
  if (n > 0.0) return g / n;
  return GlobalDescriptor::Constant(words.rows(), 1.0 / std::sqrt(static_cast<double>(words.rows())));
}

bool Vocabulary::operator==(const Vocabulary& o) const {
  return words.rows() == o.words.rows() && words.cols() == o.words.cols() &&
         idf.size() == o.idf.size() && words == o.words && idf == o.idf;
}

Vocabulary train_vocabulary(const std::vector<DescriptorMatrix>& images, int words,
                            std::uint64_t seed, int iterations) {
  Eigen::Index total = 0, dim = 0;
  for (const auto& m : images) {
    total += m.rows();
    if (m.rows() > 0) dim = m.cols();
  }
  if (words < 1 || total < words) {
    throw Error(ErrorCode::kTooFewPoints, "not enough descriptors to train the vocabulary");
  }
  DescriptorMatrix all(total, dim);
  Eigen::Index r = 0;
  for (const auto& m : images) {
    if (m.rows() == 0) continue;
    if (m.cols() != dim) throw Error(ErrorCode::kDimMismatch, "training descriptors differ");
    all.middleRows(r, m.rows()) = m;
    r += m.rows();
  }

  std::mt19937_64 rng(seed);
  Vocabulary v;
  v.words.resize(words, dim);
  // k-means++ seeding on squared chord distance.
  std::vector<double> d2(static_cast<std::size_t>(total), std::numeric_limits<double>::infinity());
  std::uniform_int_distribution<Eigen::Index> pick(0, total - 1);
  v.words.row(0) = all.row(pick(rng));
  for (int k = 1; k < words; ++k) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < total; ++i) {
      const double d = (all.row(i) - v.words.row(k - 1)).squaredNorm();
      d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], d);
      sum += d2[static_cast<std::size_t>(i)];
    }
    Eigen::Index chosen = pick(rng);
    if (sum > 0.0) {
      double target = std::uniform_real_distribution<double>(0.0, sum)(rng);
      for (Eigen::Index i = 0; i < total; ++i) {
        target -= d2[static_cast<std::size_t>(i)];
        if (target <= 0.0) {
          chosen = i;
          break;
        }
      }
    }
    v.words.row(k) = all.row(chosen);
  }

  std::vector<int> assign(static_cast<std::size_t>(total), -1);
  for (int it = 0; it < iterations; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < total; ++i) {
      const int w = static_cast<int>(v.nearest_word(all.row(i).transpose()));
      if (w != assign[static_cast<std::size_t>(i)]) changed = true;
      assign[static_cast<std::size_t>(i)] = w;
    }
    if (!changed) break;
    DescriptorMatrix sums = DescriptorMatrix::Zero(words, dim);
    for (Eigen::Index i = 0; i < total; ++i) sums.row(assign[static_cast<std::size_t>(i)]) += all.row(i);
    for (int k = 0; k < words; ++k) {
      const double n = sums.row(k).norm();
      if (n > 0.0) v.words.row(k) = sums.row(k) / n;
    }
  }

  v.idf = Eigen::VectorXd::Zero(words);
  std::size_t docs = 0;
  for (const auto& m : images) {
    if (m.rows() == 0) continue;
    ++docs;
    std::vector<bool> seen(static_cast<std::size_t>(words), false);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      seen[v.nearest_word(m.row(i).transpose())] = true;
    }
    for (int k = 0; k < words; ++k) v.idf[k] += seen[static_cast<std::size_t>(k)] ? 1.0 : 0.0;
  }
  for (int k = 0; k < words; ++k) {
    v.idf[k] = std::log((1.0 + static_cast<double>(docs)) / (1.0 + v.idf[k])) + 1.0;
  }
  return v;
}

void ClassicalConfig::validate() const {
  if (levels < 1 || max_keypoints < 1 || !(min_response > 0.0) || nms_radius < 1 ||
      patch_radius < 4) {
    throw Error(ErrorCode::kConfig, "invalid classical detector configuration");
  }
}

ClassicalDetector::ClassicalDetector(ClassicalConfig cfg, std::optional<Vocabulary> vocab)
    : cfg_(cfg), vocab_(std::move(vocab)) {
  cfg_.validate();
}

LocalFeatures ClassicalDetector::detect(const Image& img) const {
  struct Candidate {
    Vec2 px;       // level-0 pixels
    double response;
    int level;
  };
  std::vector<Candidate> cands;
  std::vector<FloatImage> pyr{to_float(img)};
  for (int l = 1; l < cfg_.levels; ++l) {
    if (pyr.back().width < 32 || pyr.back().height < 32) break;
    pyr.push_back(pyr_down(pyr.back()));
  }
  const int margin = cfg_.patch_radius + 2;
  for (std::size_t l = 0; l < pyr.size(); ++l) {
    const FloatImage& I = pyr[l];
    const int w = I.width, h = I.height;
    if (w <= 2 * margin || h <= 2 * margin) continue;
    std::vector<float> gxx(I.data.size(), 0.f), gxy(I.data.size(), 0.f), gyy(I.data.size(), 0.f);
    for (int y = 1; y + 1 < h; ++y) {
      for (int x = 1; x + 1 < w; ++x) {
        const float gx = 0.5f * (I.at(x + 1, y) - I.at(x - 1, y));
        const float gy = 0.5f * (I.at(x, y + 1) - I.at(x, y - 1));
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        gxx[i] = gx * gx;
        gxy[i] = gx * gy;
        gyy[i] = gy * gy;
      }
    }
    std::vector<float> resp(I.data.size(), 0.f);
    for (int y = margin; y < h - margin; ++y) {
      for (int x = margin; x < w - margin; ++x) {
        double a = 0, b = 0, c = 0;
        for (int dy = -2; dy <= 2; ++dy) {
          for (int dx = -2; dx <= 2; ++dx) {
            const std::size_t i = static_cast<std::size_t>(y + dy) * w + (x + dx);
            a += gxx[i];
            b += gxy[i];
            c += gyy[i];
          }
        }
        a /= 25.0;
        b /= 25.0;
        c /= 25.0;
        resp[static_cast<std::size_t>(y) * w + x] =
            static_cast<float>(0.5 * (a + c - std::sqrt((a - c) * (a - c) + 4.0 * b * b)));
      }
    }
    const int R = cfg_.nms_radius;
    for (int y = margin; y < h - margin; ++y) {
      for (int x = margin; x < w - margin; ++x) {
        const float v = resp[static_cast<std::size_t>(y) * w + x];
        if (v < cfg_.min_response) continue;
        bool is_max = true;
        for (int dy = -R; dy <= R && is_max; ++dy) {
          for (int dx = -R; dx <= R; ++dx) {
            const int xx = x + dx, yy = y + dy;
            if ((dx || dy) && xx >= 0 && yy >= 0 && xx < w && yy < h) {
              const float o = resp[static_cast<std::size_t>(yy) * w + xx];
              // Ties resolve toward the earlier pixel in raster order.
              if (o > v || (o == v && (dy < 0 || (dy == 0 && dx < 0)))) {
                is_max = false;
                break;
              }
            }
          }
        }
        if (is_max) {
          const double s = std::ldexp(1.0, static_cast<int>(l));
          cands.push_back({Vec2(x * s, y * s), v, static_cast<int>(l)});
        }
      }
    }
  }
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Candidate& a, const Candidate& b) { return a.response > b.response; });
  if (cands.size() > static_cast<std::size_t>(cfg_.max_keypoints)) {
    cands.resize(static_cast<std::size_t>(cfg_.max_keypoints));
  }

  LocalFeatures f;
  f.descriptors.resize(static_cast<Eigen::Index>(cands.size()), kDescriptorDim);
  const double top = cands.empty() ? 1.0 : cands.front().response;
  Eigen::Index row = 0;
  for (const auto& c : cands) {
    const FloatImage& I = pyr[static_cast<std::size_t>(c.level)];
    const double s = std::ldexp(1.0, -c.level);
    const Vec2 p = c.px * s;
    Eigen::VectorXd d(kDescriptorDim);
    const double step = 2.0 * cfg_.patch_radius / 8.0;
    for (int j = 0; j < 8; ++j) {
      for (int i = 0; i < 8; ++i) {
        d[j * 8 + i] = I.sample(p.x() - cfg_.patch_radius + (i + 0.5) * step,
                                p.y() - cfg_.patch_radius + (j + 0.5) * step);
      }
    }
    d.array() -= d.mean();
    const double n = d.norm();
    if (n < 1e-9) continue;
    f.keypoints.push_back(c.px);
    f.descriptors.row(row++) = (d / n).transpose();
    f.scores.push_back(std::clamp(c.response / top, 0.0, 1.0));
  }
  f.descriptors.conservativeResize(row, kDescriptorDim);
  return f;
}

Extraction ClassicalDetector::extract(const FrameRef& frame) const {
  if (!vocab_) throw Error(ErrorCode::kProviderFailure, "classical detector has no vocabulary");
  Image loaded;
  const Image* img = frame.image;
  if (!img) {
    if (frame.path.empty()) {
      throw Error(ErrorCode::kProviderFailure, "classical detector needs an image");
    }
    try {
      loaded = read_image(frame.path);
    } catch (const Error& e) {
      throw Error(ErrorCode::kProviderFailure, std::string("cannot load image: ") + e.what());
    }
    img = &loaded;
  }
  Extraction out;
  out.local = detect(*img);
  if (out.local.size() > 0 && out.local.dim() != vocab_->words.cols()) {
    throw Error(ErrorCode::kProviderFailure, "vocabulary dimension does not match descriptors");
  }
  out.global = vocab_->bag(out.local.descriptors);
  return out;
}

}  // namespace priorloc
