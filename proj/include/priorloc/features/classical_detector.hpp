#pragma once

#include <optional>

#include "priorloc/features/local_features.hpp"

namespace priorloc {

/// k-means codebook with inverse document frequencies for TF-IDF bags.
struct Vocabulary {
  DescriptorMatrix words;  // unit rows
  Eigen::VectorXd idf;

  int size() const { return static_cast<int>(words.rows()); }
  /// Unit-norm TF-IDF bag; a set with no descriptors maps to the constant
  /// unit vector.
  GlobalDescriptor bag(const DescriptorMatrix& descriptors) const;
  std::size_t nearest_word(const Eigen::Ref<const Eigen::VectorXd>& d) const;

  bool operator==(const Vocabulary& o) const;
};

/// k-means++ seeded Lloyd iterations on unit descriptors (spherical: centers
/// renormalized). `images` holds one descriptor set per training image.
/// Throws TooFewPoints if there are fewer descriptors than words.
Vocabulary train_vocabulary(const std::vector<DescriptorMatrix>& images, int words,
                            std::uint64_t seed, int iterations = 15);

struct ClassicalConfig {
  int levels = 3;
  int max_keypoints = 1000;
  double min_response = 25.0;  // Shi-Tomasi min eigenvalue, intensity^2
  int nms_radius = 3;        // px at each level
  int patch_radius = 8;      // descriptor window half-size at the detection level

  void validate() const;
};

/// Multi-scale Shi-Tomasi corners with a zero-mean, unit-norm 8x8 patch
/// descriptor (64 dims).
class ClassicalDetector : public FeatureProvider {
 public:
  explicit ClassicalDetector(ClassicalConfig cfg = {}, std::optional<Vocabulary> vocab = {});

  std::string name() const override { return "classical"; }
  /// Needs an image (from `frame.image` or `frame.path`) and a vocabulary.
  Extraction extract(const FrameRef& frame) const override;

  LocalFeatures detect(const Image& img) const;
  void set_vocabulary(Vocabulary v) { vocab_ = std::move(v); }
  const std::optional<Vocabulary>& vocabulary() const { return vocab_; }

  static constexpr int kDescriptorDim = 64;

 private:
  ClassicalConfig cfg_;
  std::optional<Vocabulary> vocab_;
};

}  // namespace priorloc
