#include <doctest.h>

#include <cmath>

#include "vsf/geometry.hpp"
#include "vsf/rng.hpp"
#include "vsf/synthgen.hpp"

using namespace vsf;
namespace geo = vsf::geometry;

namespace {

RelativePose random_pose(Rng& rng, double max_angle_deg = 40.0) {
  const double z = rng.uniform(-1.0, 1.0);
  const double phi = rng.uniform(0.0, 2 * M_PI);
  const double s = std::sqrt(1.0 - z * z);
  const Vec3 axis(s * std::cos(phi), s * std::sin(phi), z);
  RelativePose p;
  p.r = Eigen::AngleAxisd(rng.uniform(0.0, max_angle_deg * M_PI / 180.0), axis)
            .toRotationMatrix();
  const double z2 = rng.uniform(-1.0, 1.0);
  const double phi2 = rng.uniform(0.0, 2 * M_PI);
  const double s2 = std::sqrt(1.0 - z2 * z2);
  p.t = Vec3(s2 * std::cos(phi2), s2 * std::sin(phi2), z2);
  return p;
}

double frobenius_sign_aligned(const Mat3& a, const Mat3& b) {
  return std::min((a - b).norm(), (a + b).norm());
}

// Literal transcription of the symmetric epipolar distance, kept separate
// from the library implementation on purpose.
double residual_oracle(const Correspondence& c, const Mat3& e) {
  const Vec3 p(c.x, c.y, 1.0), q(c.xp, c.yp, 1.0);
  const double num = q.transpose() * e * p;
  const Vec3 l1 = e * p;
  const Vec3 l2 = e.transpose() * q;
  return num * num /
         (l1(0) * l1(0) + l1(1) * l1(1) + l2(0) * l2(0) + l2(1) * l2(1) + 1e-12);
}

}  // namespace

TEST_CASE("normalize_points maps principal point and focal offsets") {
  CameraIntrinsics k{500.0, 400.0, 320.0, 240.0};
  auto out = geo::normalize_points({{320.0, 240.0}, {820.0, 240.0}}, k);
  CHECK(out[0].norm() == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(out[1].x() == doctest::Approx(1.0));
  CHECK(out[1].y() == doctest::Approx(0.0));
}

TEST_CASE("normalize_points round-trips through denormalize") {
  CameraIntrinsics k{712.5, 698.2, 301.25, 255.5};
  Rng rng(7);
  std::vector<Vec2> px;
  for (int i = 0; i < 200; ++i)
    px.emplace_back(rng.uniform(0.0, 640.0), rng.uniform(0.0, 480.0));
  auto back = geo::denormalize_points(geo::normalize_points(px, k), k);
  for (size_t i = 0; i < px.size(); ++i)
    CHECK((back[i] - px[i]).norm() < 1e-12);
}

TEST_CASE("normalize_points rejects non-finite input") {
  CameraIntrinsics k{500.0, 500.0, 0.0, 0.0};
  CHECK_THROWS_AS(
      geo::normalize_points({{std::nan(""), 1.0}}, k), MalformedInputError);
  CHECK_THROWS_AS(geo::normalize_points({{1.0, 1.0}}, CameraIntrinsics{-1, 1, 0, 0}),
                  MalformedInputError);
}

TEST_CASE("essential_from_pose: identity rotation, z translation") {
  RelativePose pose;  // r = I, t = (0,0,1)
  Mat3 expected;
  expected << 0, -1, 0, 1, 0, 0, 0, 0, 0;
  expected /= expected.norm();
  CHECK(frobenius_sign_aligned(geo::essential_from_pose(pose).e, expected) <
        1e-15);
}

TEST_CASE("essential_from_pose: negating t negates e up to normalization") {
  Rng rng(11);
  auto pose = random_pose(rng);
  auto e1 = geo::essential_from_pose(pose).e;
  pose.t = -pose.t;
  auto e2 = geo::essential_from_pose(pose).e;
  CHECK((e1 + e2).norm() < 1e-14);
}

TEST_CASE("essential_from_pose: synthesized inliers satisfy the constraint") {
  synthgen::SceneConfig cfg;
  cfg.n_points = 100;
  cfg.seed = 3;
  const auto pair = synthgen::generate_pair(cfg);
  for (const auto& c : pair.correspondences.items) {
    const double v = c.pB().transpose() * pair.gt_essential.e * c.pA();
    CHECK(std::abs(v) < 1e-10);
  }
}

TEST_CASE("epipolar_residual hand case") {
  Mat3 e;
  e << 0, -1, 0, 1, 0, 0, 0, 0, 0;
  Correspondence c{1.0, 0.0, 1.0, 1.0};
  // numerator 1, denominator 0 + 1 + 1 + 1
  CHECK(geo::epipolar_residual(c, {e}) == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("epipolar_residual vanishes on exact inliers") {
  synthgen::SceneConfig cfg;
  cfg.n_points = 50;
  cfg.seed = 5;
  const auto pair = synthgen::generate_pair(cfg);
  for (const auto& c : pair.correspondences.items)
    CHECK(geo::epipolar_residual(c, pair.gt_essential) < 1e-18);
}

TEST_CASE("epipolar_residual matches the literal-transcription oracle") {
  Rng rng(17);
  for (int i = 0; i < 1000; ++i) {
    Mat3 e;
    for (int r = 0; r < 3; ++r)
      for (int col = 0; col < 3; ++col) e(r, col) = rng.uniform(-1.0, 1.0);
    Correspondence c{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                     rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    CHECK(std::abs(geo::epipolar_residual(c, {e}) - residual_oracle(c, e)) <
          1e-12);
  }
}

TEST_CASE("epipolar_residual symmetric under (p <-> p', e <-> e^T)") {
  Rng rng(23);
  for (int i = 0; i < 100; ++i) {
    Mat3 e;
    for (int r = 0; r < 3; ++r)
      for (int col = 0; col < 3; ++col) e(r, col) = rng.uniform(-1.0, 1.0);
    Correspondence c{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                     rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    Correspondence swapped{c.xp, c.yp, c.x, c.y};
    CHECK(std::abs(geo::epipolar_residual(c, {e}) -
                   geo::epipolar_residual(swapped, {Mat3(e.transpose())})) <
          1e-15);
  }
}

TEST_CASE("full_size_verification recovers generator labels on noiseless data") {
  synthgen::SceneConfig cfg;
  cfg.n_points = 400;
  cfg.outlier_ratio = 0.5;
  cfg.seed = 9;
  const auto pair = synthgen::generate_pair(cfg);
  const auto flags =
      geo::full_size_verification(pair.correspondences, pair.gt_essential, 1e-4);
  int mismatches = 0;
  for (size_t i = 0; i < flags.size(); ++i)
    mismatches += flags[i] != pair.correspondences.labels[i];
  // random outliers can land near the epipolar line by chance
  CHECK(mismatches <= 4);
  // every true inlier must verify
  for (size_t i = 0; i < flags.size(); ++i)
    if (pair.correspondences.labels[i]) CHECK(flags[i]);
}

TEST_CASE("full_size_verification with tau = 0 flags nothing") {
  synthgen::SceneConfig cfg;
  cfg.n_points = 20;
  cfg.seed = 1;
  const auto pair = synthgen::generate_pair(cfg);
  for (auto f :
       geo::full_size_verification(pair.correspondences, pair.gt_essential, 0.0))
    CHECK(!f);
}

TEST_CASE("full_size_verification: all-outlier set under a random essential") {
  Rng rng(31);
  int total = 0, flagged = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto e = geo::essential_from_pose(random_pose(rng));
    CorrespondenceSet set;
    for (int i = 0; i < 500; ++i)
      set.items.push_back({rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                           rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)});
    for (auto f : geo::full_size_verification(set, e, 1e-4)) flagged += f;
    total += set.count();
  }
  CHECK(flagged <= total / 20);  // <= 5%
}

TEST_CASE("weighted_eight_point recovers the essential matrix exactly") {
  synthgen::SceneConfig cfg;
  cfg.n_points = 20;
  cfg.seed = 13;
  const auto pair = synthgen::generate_pair(cfg);
  const auto est = geo::weighted_eight_point(pair.correspondences,
                                             VecX::Ones(20));
  CHECK(frobenius_sign_aligned(est.e, pair.gt_essential.e) < 1e-6);
}

TEST_CASE("weighted_eight_point with indicator weights ignores outliers") {
  synthgen::SceneConfig cfg;
  cfg.n_points = 100;
  cfg.outlier_ratio = 0.5;
  cfg.seed = 19;
  const auto pair = synthgen::generate_pair(cfg);
  VecX w(100);
  for (int i = 0; i < 100; ++i) w(i) = pair.correspondences.labels[i];
  const auto est = geo::weighted_eight_point(pair.correspondences, w);
  CHECK(frobenius_sign_aligned(est.e, pair.gt_essential.e) < 1e-6);
}

TEST_CASE("weighted_eight_point is weight-scale invariant") {
  synthgen::SceneConfig cfg;
  cfg.n_points = 30;
  cfg.noise_sigma = 0.002;
  cfg.seed = 29;
  const auto pair = synthgen::generate_pair(cfg);
  Rng rng(101);
  VecX w(30);
  for (int i = 0; i < 30; ++i) w(i) = rng.uniform(0.1, 1.0);
  const auto a = geo::weighted_eight_point(pair.correspondences, w);
  const auto b = geo::weighted_eight_point(pair.correspondences, VecX(37.5 * w));
  CHECK(frobenius_sign_aligned(a.e, b.e) < 1e-10);
}

TEST_CASE("weighted_eight_point is invariant under joint permutation") {
  synthgen::SceneConfig cfg;
  cfg.n_points = 40;
  cfg.noise_sigma = 0.001;
  cfg.outlier_ratio = 0.2;
  cfg.seed = 37;
  const auto pair = synthgen::generate_pair(cfg);
  Rng rng(5);
  VecX w(40);
  for (int i = 0; i < 40; ++i) w(i) = rng.uniform(0.1, 1.0);
  const auto base = geo::weighted_eight_point(pair.correspondences, w);

  std::vector<int> perm(40);
  for (int i = 0; i < 40; ++i) perm[i] = i;
  rng.shuffle(perm);
  CorrespondenceSet shuffled;
  VecX ws(40);
  for (int i = 0; i < 40; ++i) {
    shuffled.items.push_back(pair.correspondences.items[perm[i]]);
    ws(i) = w(perm[i]);
  }
  const auto permuted = geo::weighted_eight_point(shuffled, ws);
  CHECK(frobenius_sign_aligned(base.e, permuted.e) < 1e-10);
}

TEST_CASE("weighted_eight_point error paths") {
  synthgen::SceneConfig cfg;
  cfg.n_points = 7;
  cfg.seed = 2;
  const auto pair = synthgen::generate_pair(cfg);
  CHECK_THROWS_AS(geo::weighted_eight_point(pair.correspondences, VecX::Ones(7)),
                  InsufficientDataError);

  // all-identical correspondences: nullspace dimension > 1
  CorrespondenceSet degenerate;
  for (int i = 0; i < 10; ++i) degenerate.items.push_back({0.1, 0.2, 0.3, 0.4});
  CHECK_THROWS_AS(geo::weighted_eight_point(degenerate, VecX::Ones(10)),
                  DegenerateConfigurationError);
}

TEST_CASE("enforce_rank2 perturbs by at most the smallest singular value") {
  Rng rng(43);
  for (int i = 0; i < 200; ++i) {
    Mat3 m;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) m(r, c) = rng.uniform(-1.0, 1.0);
    Eigen::JacobiSVD<Mat3> svd(m);
    const double smin = svd.singularValues()(2);
    Eigen::JacobiSVD<Mat3> check(geo::enforce_rank2(m));
    CHECK(check.singularValues()(2) < 1e-12);
    // distance before renormalization
    Eigen::JacobiSVD<Mat3> svd2(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Vec3 s = svd2.singularValues();
    s(2) = 0;
    Mat3 truncated = svd2.matrixU() * s.asDiagonal() * svd2.matrixV().transpose();
    CHECK((m - truncated).norm() <= smin + 1e-12);
  }
}

TEST_CASE("decompose_essential round-trips noiseless scenes") {
  synthgen::SceneConfig cfg;
  cfg.n_points = 50;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    cfg.seed = seed;
    const auto pair = synthgen::generate_pair(cfg);
    const auto pose =
        geo::decompose_essential(pair.gt_essential, pair.correspondences);
    CHECK(geo::pose_error_deg(pose, pair.gt_pose) < 1e-6 * 180.0 / M_PI);
  }
}

TEST_CASE("decompose_essential: forward translation recovered") {
  synthgen::SceneConfig cfg;
  cfg.n_points = 50;
  cfg.rotation_magnitude_deg = 0.0;
  cfg.seed = 77;
  // construct a pure z-translation scene by hand
  CorrespondenceSet set;
  Rng rng(7);
  RelativePose gt;  // identity, t = z
  for (int i = 0; i < 50; ++i) {
    const double u = rng.uniform(-0.8, 0.8), v = rng.uniform(-0.8, 0.8);
    const double z = rng.uniform(2.0, 6.0);
    const Vec3 xa(u * z, v * z, z);
    const Vec3 xb = xa + Vec3(0, 0, 0.5);
    set.items.push_back({u, v, xb.x() / xb.z(), xb.y() / xb.z()});
  }
  const auto pose = geo::decompose_essential(geo::essential_from_pose(gt), set);
  CHECK(pose.t.dot(Vec3::UnitZ()) > 0.999999);
}

TEST_CASE("decompose_essential is sign-invariant in e") {
  synthgen::SceneConfig cfg;
  cfg.n_points = 40;
  cfg.seed = 83;
  const auto pair = synthgen::generate_pair(cfg);
  const auto p1 =
      geo::decompose_essential(pair.gt_essential, pair.correspondences);
  const auto p2 = geo::decompose_essential({Mat3(-pair.gt_essential.e)},
                                           pair.correspondences);
  CHECK((p1.r - p2.r).norm() < 1e-12);
  CHECK((p1.t - p2.t).norm() < 1e-12);
}

TEST_CASE("pose_error: identity, known rotation offset, antipodal translation") {
  Rng rng(51);
  const auto gt = random_pose(rng);
  CHECK(geo::pose_error_deg(gt, gt) == doctest::Approx(0.0).epsilon(1e-12));

  RelativePose est = gt;
  const Vec3 axis = Vec3(0.3, -0.5, 0.8).normalized();
  est.r = gt.r * Eigen::AngleAxisd(5.0 * M_PI / 180.0, axis).toRotationMatrix();
  CHECK(geo::pose_error_deg(est, gt) == doctest::Approx(5.0).epsilon(1e-6));

  est = gt;
  est.t = -gt.t;
  CHECK(geo::pose_error_deg(est, gt) == doctest::Approx(180.0));
}

TEST_CASE("pose_error is nonnegative and symmetric") {
  Rng rng(53);
  for (int i = 0; i < 50; ++i) {
    const auto a = random_pose(rng);
    const auto b = random_pose(rng);
    const double ab = geo::pose_error_deg(a, b);
    CHECK(ab >= 0.0);
    CHECK(ab == doctest::Approx(geo::pose_error_deg(b, a)).epsilon(1e-9));
  }
}

TEST_CASE("ransac_essential: noiseless set keeps every correspondence") {
  synthgen::SceneConfig cfg;
  cfg.n_points = 60;
  cfg.seed = 59;
  const auto pair = synthgen::generate_pair(cfg);
  const auto res = geo::ransac_essential(pair.correspondences, 100, 1e-4, 0);
  CHECK(res.inlier_count == 60);
}

TEST_CASE("ransac_essential is deterministic per seed") {
  synthgen::SceneConfig cfg;
  cfg.n_points = 100;
  cfg.outlier_ratio = 0.4;
  cfg.noise_sigma = 0.001;
  cfg.seed = 61;
  const auto pair = synthgen::generate_pair(cfg);
  const auto a = geo::ransac_essential(pair.correspondences, 200, 1e-3, 99);
  const auto b = geo::ransac_essential(pair.correspondences, 200, 1e-3, 99);
  CHECK(a.inliers == b.inliers);
  CHECK((a.essential.e - b.essential.e).norm() == 0.0);
}

TEST_CASE("ransac_essential handles 50% outliers") {
  synthgen::SceneConfig base;
  base.n_points = 500;
  base.outlier_ratio = 0.5;
  int good = 0;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    base.seed = 1000 + seed;
    const auto pair = synthgen::generate_pair(base);
    const auto res =
        geo::ransac_essential(pair.correspondences, 1000, 1e-4, seed);
    CorrespondenceSet support;
    for (int i = 0; i < pair.correspondences.count(); ++i)
      if (res.inliers[i]) support.items.push_back(pair.correspondences.items[i]);
    const auto pose = geo::decompose_essential(res.essential, support);
    if (geo::pose_error_deg(pose, pair.gt_pose) < 1.0) ++good;
  }
  CHECK(good >= 19);  // >= 95%
}

TEST_CASE("geometry round trip over 1000 random poses") {
  synthgen::SceneConfig cfg;
  cfg.n_points = 20;
  Rng rng(71);
  for (int i = 0; i < 1000; ++i) {
    cfg.seed = 5000 + i;
    const auto pair = synthgen::generate_pair(cfg);
    const auto pose =
        geo::decompose_essential(pair.gt_essential, pair.correspondences);
    const double rot_err =
        std::acos(std::clamp(
            ((pair.gt_pose.r.transpose() * pose.r).trace() - 1.0) / 2.0, -1.0,
            1.0));
    const double trn_err =
        std::acos(std::clamp(pair.gt_pose.t.dot(pose.t), -1.0, 1.0));
    CHECK(rot_err < 1e-6);
    CHECK(trn_err < 1e-6);
  }
}
