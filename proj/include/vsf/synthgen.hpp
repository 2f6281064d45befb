#pragma once

#include <cstdint>
#include <vector>

#include "vsf/types.hpp"

namespace vsf::synthgen {

struct SceneConfig {
  int n_points = 2000;
  double outlier_ratio = 0.0;   // [0, 1)
  double noise_sigma = 0.0;     // normalized-coordinate std dev
  double depth_near = 2.0;
  double depth_far = 8.0;
  double rotation_magnitude_deg = 20.0;
  double baseline_magnitude = 0.5;
  uint64_t seed = 0;

  void validate() const;
};

struct LabeledPair {
  CorrespondenceSet correspondences;  // labels filled
  RelativePose gt_pose;
  EssentialMatrix gt_essential;
};

LabeledPair generate_pair(const SceneConfig& cfg);

// Independent pairs with per-index derived seeds; deterministic in cfg.seed.
std::vector<LabeledPair> generate_dataset(const SceneConfig& cfg, int n_pairs);

}  // namespace vsf::synthgen
