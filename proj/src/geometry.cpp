#include "vsf/geometry.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>

#include "vsf/rng.hpp"

namespace vsf::geometry {

std::vector<Vec2> normalize_points(const std::vector<Vec2>& pixels,
                                   const CameraIntrinsics& k) {
  if (!k.valid()) throw MalformedInputError("invalid camera intrinsics");
  std::vector<Vec2> out;
  out.reserve(pixels.size());
  for (const auto& p : pixels) {
    if (!p.allFinite()) throw MalformedInputError("non-finite pixel coordinate");
    out.emplace_back((p.x() - k.cx) / k.fx, (p.y() - k.cy) / k.fy);
  }
  return out;
}

std::vector<Vec2> denormalize_points(const std::vector<Vec2>& normalized,
                                     const CameraIntrinsics& k) {
  if (!k.valid()) throw MalformedInputError("invalid camera intrinsics");
  std::vector<Vec2> out;
  out.reserve(normalized.size());
  for (const auto& p : normalized) {
    out.emplace_back(p.x() * k.fx + k.cx, p.y() * k.fy + k.cy);
  }
  return out;
}

Mat3 cross_matrix(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

EssentialMatrix essential_from_pose(const RelativePose& pose) {
  Mat3 e = cross_matrix(pose.t) * pose.r;
  e /= e.norm();
  return {e};
}

double epipolar_residual(const Correspondence& c, const EssentialMatrix& e,
                         bool transpose_second_pair) {
  const Vec3 p = c.pA();
  const Vec3 pp = c.pB();
  const Vec3 ep = e.e * p;
  const Vec3 etp = transpose_second_pair ? Vec3(e.e.transpose() * pp)
                                         : Vec3(e.e * pp);
  const double num = pp.dot(ep);
  const double den = ep(0) * ep(0) + ep(1) * ep(1) + etp(0) * etp(0) +
                     etp(1) * etp(1) + 1e-12;
  return num * num / den;
}

std::vector<uint8_t> full_size_verification(const CorrespondenceSet& ic,
                                            const EssentialMatrix& e,
                                            double tau) {
  std::vector<uint8_t> flags(ic.items.size());
  for (size_t i = 0; i < ic.items.size(); ++i) {
    flags[i] = epipolar_residual(ic.items[i], e) < tau ? 1 : 0;
  }
  return flags;
}

Mat3 enforce_rank2(const Mat3& e) {
  Eigen::JacobiSVD<Mat3> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 s = svd.singularValues();
  s(2) = 0.0;
  Mat3 out = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
  return out / out.norm();
}

EssentialMatrix weighted_eight_point(const CorrespondenceSet& cands,
                                     const VecX& probs) {
  const int n = cands.count();
  if (n < 8) throw InsufficientDataError("weighted_eight_point: need >= 8 correspondences");
  if (probs.size() != n) throw MalformedInputError("weight count mismatch");
  const double wsum = probs.sum();
  if (!(wsum > 0.0)) throw MalformedInputError("weights must sum > 0");

  Eigen::Matrix<double, 9, 9> m = Eigen::Matrix<double, 9, 9>::Zero();
  for (int i = 0; i < n; ++i) {
    const auto& c = cands.items[i];
    Eigen::Matrix<double, 9, 1> row;
    row << c.x * c.xp, c.x * c.yp, c.x, c.y * c.xp, c.y * c.yp, c.y, c.xp,
        c.yp, 1.0;
    const double w = probs(i) / wsum;  // scale invariance
    m.noalias() += (w * w) * row * row.transpose();
  }

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 9, 9>> eig(m);
  const auto& vals = eig.eigenvalues();
  if (vals(1) - vals(0) < 1e-12 * std::max(1.0, vals(8))) {
    throw DegenerateConfigurationError(
        "weighted_eight_point: repeated smallest eigenvalue");
  }
  Eigen::Matrix<double, 9, 1> v = eig.eigenvectors().col(0);
  // the row layout above pairs coefficients as p^T e p'; transpose to the
  // p'^T e p convention
  Mat3 e;
  e << v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7), v(8);
  e.transposeInPlace();
  return {enforce_rank2(e)};
}

namespace {

// Linear triangulation with P1 = [I|0], P2 = [R|t]; returns point in view A.
Vec3 triangulate(const Correspondence& c, const Mat3& r, const Vec3& t) {
  Eigen::Matrix4d a;
  Eigen::Matrix<double, 3, 4> p1, p2;
  p1 << Mat3::Identity(), Vec3::Zero();
  p2 << r, t;
  a.row(0) = c.x * p1.row(2) - p1.row(0);
  a.row(1) = c.y * p1.row(2) - p1.row(1);
  a.row(2) = c.xp * p2.row(2) - p2.row(0);
  a.row(3) = c.yp * p2.row(2) - p2.row(1);
  Eigen::JacobiSVD<Eigen::Matrix4d> svd(a, Eigen::ComputeFullV);
  Eigen::Vector4d x = svd.matrixV().col(3);
  return x.head<3>() / x(3);
}

int cheirality_votes(const CorrespondenceSet& cands, const Mat3& r,
                     const Vec3& t) {
  int votes = 0;
  for (const auto& c : cands.items) {
    const Vec3 xa = triangulate(c, r, t);
    if (!xa.allFinite()) continue;
    const double za = xa.z();
    const double zb = (r * xa + t).z();
    if (za > 0 && zb > 0) ++votes;
  }
  return votes;
}

}  // namespace

RelativePose decompose_essential(const EssentialMatrix& e,
                                 const CorrespondenceSet& cands) {
  if (cands.count() < 1) {
    throw InsufficientDataError("decompose_essential: need >= 1 correspondence");
  }
  Eigen::JacobiSVD<Mat3> svd(e.e, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  Mat3 v = svd.matrixV();
  if (u.determinant() < 0) u.col(2) *= -1.0;
  if (v.determinant() < 0) v.col(2) *= -1.0;
  Mat3 w;
  w << 0, -1, 0, 1, 0, 0, 0, 0, 1;

  const Mat3 r1 = u * w * v.transpose();
  const Mat3 r2 = u * w.transpose() * v.transpose();
  const Vec3 t = u.col(2);

  struct Candidate {
    Mat3 r;
    Vec3 t;
    int votes;
  };
  std::vector<Candidate> cs = {{r1, t, 0}, {r1, -t, 0}, {r2, t, 0}, {r2, -t, 0}};
  int best = 0;
  for (int i = 0; i < 4; ++i) {
    cs[i].votes = cheirality_votes(cands, cs[i].r, cs[i].t);
    if (cs[i].votes > cs[best].votes) best = i;
  }
  int top_count = 0;
  for (const auto& cand : cs) {
    if (cand.votes == cs[best].votes) ++top_count;
  }
  if (top_count > 1) {
    throw DegenerateConfigurationError(
        "decompose_essential: ambiguous cheirality vote");
  }
  RelativePose pose;
  pose.r = cs[best].r;
  pose.t = cs[best].t.normalized();
  return pose;
}

double pose_error_deg(const RelativePose& est, const RelativePose& gt) {
  const double ctr = ((gt.r.transpose() * est.r).trace() - 1.0) / 2.0;
  const double rot = std::acos(std::clamp(ctr, -1.0, 1.0));
  const double trn = std::acos(std::clamp(gt.t.dot(est.t), -1.0, 1.0));
  return std::max(rot, trn) * 180.0 / M_PI;
}

RansacResult ransac_essential(const CorrespondenceSet& ic, int iters,
                              double inlier_tau, uint64_t rng_seed) {
  const int n = ic.count();
  if (n < 8) throw InsufficientDataError("ransac_essential: need >= 8 correspondences");

  Rng rng(rng_seed);
  VecX ones = VecX::Ones(8);
  int best_count = -1;
  double best_hyp_score = std::numeric_limits<double>::infinity();

  const auto score = [&](const EssentialMatrix& e) {
    double s = 0.0;
    for (const auto& c : ic.items)
      s += std::min(epipolar_residual(c, e), inlier_tau);
    return s;
  };

  const auto consensus_refit = [&](const EssentialMatrix& e, double thr,
                                   EssentialMatrix* out) {
    CorrespondenceSet consensus;
    for (const auto& c : ic.items)
      if (epipolar_residual(c, e) < thr) consensus.items.push_back(c);
    if (consensus.count() < 8) return false;
    try {
      *out = weighted_eight_point(consensus, VecX::Ones(consensus.count()));
    } catch (const DegenerateConfigurationError&) {
      return false;
    }
    return true;
  };

  // local optimization: refit on the tau-band consensus until the truncated
  // score stops improving
  const auto local_refine = [&](EssentialMatrix e, double s) {
    EssentialMatrix best = e;
    for (int round = 0; round < 5; ++round) {
      EssentialMatrix next;
      if (!consensus_refit(e, inlier_tau, &next)) break;
      const double s2 = score(next);
      e = next;
      if (s2 >= s) break;
      s = s2;
      best = next;
    }
    return std::make_pair(best, s);
  };

  double best_refined_score = std::numeric_limits<double>::infinity();
  EssentialMatrix refined;

  for (int it = 0; it < iters; ++it) {
    // sample 8 distinct indices
    std::vector<int> idx;
    idx.reserve(8);
    while (idx.size() < 8) {
      int cand = static_cast<int>(rng.uniform_index(n));
      if (std::find(idx.begin(), idx.end(), cand) == idx.end())
        idx.push_back(cand);
    }
    CorrespondenceSet sample;
    for (int i : idx) sample.items.push_back(ic.items[i]);
    EssentialMatrix hyp;
    try {
      hyp = weighted_eight_point(sample, ones);
    } catch (const DegenerateConfigurationError&) {
      continue;
    }
    // truncated-residual score; plain inlier counting cannot separate the
    // exact model from a slightly tilted one that grabs extra
    // chance-consistent outliers inside the tau band
    int count = 0;
    double hyp_score = 0.0;
    for (const auto& c : ic.items) {
      const double r = epipolar_residual(c, hyp);
      if (r < inlier_tau) ++count;
      hyp_score += std::min(r, inlier_tau);
    }
    best_count = std::max(best_count, count);
    if (hyp_score < best_hyp_score) {
      best_hyp_score = hyp_score;
      // locally optimize every improving hypothesis so a contaminated but
      // promising sample can still converge onto the true consensus set
      if (count >= 8) {
        const auto [e, s] = local_refine(hyp, hyp_score);
        if (s < best_refined_score) {
          best_refined_score = s;
          refined = e;
        }
      }
    }
  }

  if (best_count < 8 ||
      best_refined_score == std::numeric_limits<double>::infinity()) {
    throw EstimationFailedError("ransac_essential: no hypothesis with >= 8 inliers");
  }

  // final polish: shrink the band geometrically and refit. The truncated
  // score cannot gate this step -- with squared-distance residuals a small
  // tilt costs O(delta^2) on every inlier but saves O(tau) per near-band
  // outlier it captures, so the score actually prefers slightly tilted
  // models. Tightening sheds those captured outliers; the chain stops once
  // the consensus thins out, keeping the last successful refit.
  {
    EssentialMatrix e = refined;
    double thr = inlier_tau;
    for (int round = 0; round < 10; ++round) {
      thr /= 3.0;
      EssentialMatrix next;
      if (!consensus_refit(e, thr, &next)) break;
      e = next;
      refined = next;
    }
  }

  RansacResult res;
  res.essential = refined;
  res.inliers.resize(n);
  for (int i = 0; i < n; ++i) {
    res.inliers[i] = epipolar_residual(ic.items[i], refined) < inlier_tau ? 1 : 0;
    res.inlier_count += res.inliers[i];
  }
  return res;
}

}  // namespace vsf::geometry
