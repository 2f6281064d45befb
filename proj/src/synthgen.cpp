#include "vsf/synthgen.hpp"

#include <cmath>
#include <numeric>

#include "vsf/geometry.hpp"
#include "vsf/rng.hpp"

namespace vsf::synthgen {

void SceneConfig::validate() const {
  if (n_points < 1) throw InfeasibleConfigError("n_points must be >= 1");
  if (!(outlier_ratio >= 0.0 && outlier_ratio < 1.0))
    throw InfeasibleConfigError("outlier_ratio must be in [0, 1)");
  if (noise_sigma < 0.0) throw InfeasibleConfigError("noise_sigma must be >= 0");
  if (!(depth_near > 0.0 && depth_near < depth_far))
    throw InfeasibleConfigError("require 0 < depth_near < depth_far");
}

namespace {

Vec3 random_unit_vector(Rng& rng) {
  const double z = rng.uniform(-1.0, 1.0);
  const double phi = rng.uniform(0.0, 2.0 * M_PI);
  const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {s * std::cos(phi), s * std::sin(phi), z};
}

Mat3 rotation_from_axis_angle(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

}  // namespace

LabeledPair generate_pair(const SceneConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);

  const double angle = rng.uniform(0.0, cfg.rotation_magnitude_deg * M_PI / 180.0);
  const Vec3 axis = random_unit_vector(rng);
  const Mat3 r = rotation_from_axis_angle(axis, angle);
  const Vec3 t_dir = random_unit_vector(rng);
  const Vec3 t_vec = t_dir * cfg.baseline_magnitude;

  LabeledPair pair;
  pair.gt_pose.r = r;
  pair.gt_pose.t = t_dir;
  pair.gt_essential = geometry::essential_from_pose(pair.gt_pose);

  const int n_inliers =
      static_cast<int>(std::lround(cfg.n_points * (1.0 - cfg.outlier_ratio)));

  struct Item {
    Correspondence c;
    uint8_t label;
  };
  std::vector<Item> items;
  items.reserve(cfg.n_points);

  int rejections = 0;
  for (int i = 0; i < cfg.n_points; ++i) {
    const bool inlier = i < n_inliers;
    for (;;) {
      if (rejections > 1000)
        throw InfeasibleConfigError("synthgen: > 1000 consecutive rejections");
      const double u = rng.uniform(-1.0, 1.0);
      const double v = rng.uniform(-1.0, 1.0);
      const double z = rng.uniform(cfg.depth_near, cfg.depth_far);
      const Vec3 xa(u * z, v * z, z);
      const Vec3 xb = r * xa + t_vec;
      if (xb.z() <= 0.0) {
        ++rejections;
        continue;
      }
      const double up = xb.x() / xb.z();
      const double vp = xb.y() / xb.z();
      if (std::abs(up) > 1.0 || std::abs(vp) > 1.0) {
        ++rejections;
        continue;
      }
      rejections = 0;
      Correspondence c{u, v, up, vp};
      if (inlier) {
        if (cfg.noise_sigma > 0.0) {
          c.x += cfg.noise_sigma * rng.gaussian();
          c.y += cfg.noise_sigma * rng.gaussian();
          c.xp += cfg.noise_sigma * rng.gaussian();
          c.yp += cfg.noise_sigma * rng.gaussian();
        }
      } else {
        // resample until the false match is actually inconsistent with the
        // epipolar geometry, so labels agree with threshold verification.
        // near the view-A epipole no view-B endpoint is inconsistent; give
        // up after a bounded number of draws and redraw the scene point
        bool inconsistent = false;
        for (int attempt = 0; attempt < 100; ++attempt) {
          c.xp = rng.uniform(-1.0, 1.0);
          c.yp = rng.uniform(-1.0, 1.0);
          if (geometry::epipolar_residual(c, pair.gt_essential) >= 1e-4) {
            inconsistent = true;
            break;
          }
        }
        if (!inconsistent) {
          ++rejections;
          continue;
        }
      }
      items.push_back({c, static_cast<uint8_t>(inlier ? 1 : 0)});
      break;
    }
  }

  rng.shuffle(items);
  for (const auto& it : items) {
    pair.correspondences.items.push_back(it.c);
    pair.correspondences.labels.push_back(it.label);
  }
  return pair;
}

std::vector<LabeledPair> generate_dataset(const SceneConfig& cfg, int n_pairs) {
  if (n_pairs < 1) throw InfeasibleConfigError("n_pairs must be >= 1");
  std::vector<LabeledPair> out;
  out.reserve(n_pairs);
  for (int i = 0; i < n_pairs; ++i) {
    SceneConfig c = cfg;
    c.seed = derive_seed(cfg.seed, static_cast<uint64_t>(i));
    try {
      out.push_back(generate_pair(c));
    } catch (const InfeasibleConfigError& e) {
      throw InfeasibleConfigError("pair " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace vsf::synthgen
