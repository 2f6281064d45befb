#pragma once

#include <cstdint>
#include <vector>

#include "vsf/types.hpp"

namespace vsf::geometry {

// Pixel coordinates -> intrinsics-normalized coordinates.
std::vector<Vec2> normalize_points(const std::vector<Vec2>& pixels,
                                   const CameraIntrinsics& k);
std::vector<Vec2> denormalize_points(const std::vector<Vec2>& normalized,
                                     const CameraIntrinsics& k);

// E = [t]x * R, Frobenius-normalized. Rank 2 by construction.
EssentialMatrix essential_from_pose(const RelativePose& pose);

Mat3 cross_matrix(const Vec3& v);

// Symmetric epipolar distance of a correspondence against e.
// transpose_second_pair selects between reading the second denominator pair
// as ||e^T p'|| (default, symmetric form) or literally as ||e p'||.
double epipolar_residual(const Correspondence& c, const EssentialMatrix& e,
                         bool transpose_second_pair = true);

// flag_i = residual(c_i) < tau. With the ground-truth E this produces the
// weak supervision labels.
std::vector<uint8_t> full_size_verification(const CorrespondenceSet& ic,
                                            const EssentialMatrix& e,
                                            double tau = 1e-4);

// Least-squares essential matrix from >= 8 weighted correspondences:
// smallest eigenvector of X^T diag(w)^2 X, then rank-2 enforcement.
EssentialMatrix weighted_eight_point(const CorrespondenceSet& cands,
                                     const VecX& probs);

// Zero the smallest singular value and renormalize to unit Frobenius norm.
Mat3 enforce_rank2(const Mat3& e);

// Picks the (R, t) candidate with the most points triangulating in front of
// both cameras.
RelativePose decompose_essential(const EssentialMatrix& e,
                                 const CorrespondenceSet& cands);

// max(rotation angle error, translation direction error), in degrees.
double pose_error_deg(const RelativePose& est, const RelativePose& gt);

struct RansacResult {
  EssentialMatrix essential;
  std::vector<uint8_t> inliers;
  int inlier_count = 0;
};

RansacResult ransac_essential(const CorrespondenceSet& ic, int iters,
                              double inlier_tau, uint64_t rng_seed);

}  // namespace vsf::geometry
