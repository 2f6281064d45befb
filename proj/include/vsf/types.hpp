#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace vsf {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

// Rows are tokens, columns are channels. Carrier for every feature matrix
// in the network stages.
using TokenMatrix = Eigen::MatrixXd;

struct MalformedInputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InsufficientDataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateConfigurationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigurationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EstimationFailedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InfeasibleConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CameraIntrinsics {
  double fx = 1.0, fy = 1.0;
  double cx = 0.0, cy = 0.0;

  bool valid() const { return fx > 0.0 && fy > 0.0; }
};

// Intrinsics-normalized coordinates in both views.
struct Correspondence {
  double x = 0.0, y = 0.0;    // view A
  double xp = 0.0, yp = 0.0;  // view B

  Vec3 pA() const { return {x, y, 1.0}; }
  Vec3 pB() const { return {xp, yp, 1.0}; }
};

struct CorrespondenceSet {
  std::vector<Correspondence> items;
  std::vector<uint8_t> labels;  // optional; empty or size() == items.size()

  int count() const { return static_cast<int>(items.size()); }
  bool has_labels() const { return !labels.empty(); }
};

struct EssentialMatrix {
  Mat3 e = Mat3::Zero();
};

struct RelativePose {
  Mat3 r = Mat3::Identity();
  Vec3 t = Vec3::UnitZ();  // unit norm
};

}  // namespace vsf
