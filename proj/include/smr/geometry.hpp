#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "smr/rng.hpp"

namespace smr {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Point3 = Eigen::Vector3d;

/// Camera pose as a camera-to-world rigid transform: p_world = R * p_cam + t.
/// The translation is therefore the camera center in world coordinates.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }

  const Vec3& center() const { return translation; }
  Vec3 transform(const Vec3& p) const { return rotation * p + translation; }
  Pose inverse() const;
  Pose operator*(const Pose& rhs) const;

  bool operator==(const Pose& rhs) const {
    return rotation == rhs.rotation && translation == rhs.translation;
  }
};

/// p' = scale * R * p + t. Carries the monocular gauge freedom of a submap.
struct SimilarityTransform {
  double scale = 1.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static SimilarityTransform identity() { return {}; }

  Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }
  SimilarityTransform inverse() const;
  // (this * rhs).apply(p) == this->apply(rhs.apply(p))
  SimilarityTransform operator*(const SimilarityTransform& rhs) const;

  bool operator==(const SimilarityTransform& rhs) const {
    return scale == rhs.scale && rotation == rhs.rotation && translation == rhs.translation;
  }
};

struct SimilarityEstimate {
  SimilarityTransform transform;
  double residual_rms = 0.0;
};

/// Closed-form least-squares similarity (Umeyama) mapping src onto dst.
/// Throws kDegenerateConfiguration for fewer than 3 points, mismatched
/// lengths, or a collinear source set.
SimilarityEstimate estimate_similarity(std::span<const Vec3> src, std::span<const Vec3> dst);

struct RobustOptions {
  double inlier_threshold = 0.03;
  int iterations = 200;
  std::uint64_t seed = 0;
};

/// RANSAC over minimal 3-point samples followed by a refit on the inliers.
SimilarityEstimate estimate_similarity_robust(std::span<const Vec3> src,
                                              std::span<const Vec3> dst,
                                              const RobustOptions& options);

/// Angle in degrees at `point` between the rays to the two camera centers.
double intersection_angle(const Point3& center_a, const Point3& center_b, const Point3& point);

/// Depth-direction error of a forward intersection, mx / tan(theta).
double depth_error(double mx, double theta_deg);

/// Two-view photogrammetric configuration linking intersection angle to
/// baseline/height and image baseline/focal length.
struct IntersectionGeometry {
  double theta = 0.0;            // degrees
  double baseline_B = 0.0;       // meters
  double height_H = 0.0;         // meters
  double image_baseline_b = 0.0; // pixels
  double focal_f = 0.0;          // pixels
  double plane_error_mx = 0.0;   // meters
  double depth_error_mh = 0.0;   // meters

  static IntersectionGeometry from_baseline(double baseline_m, double height_m, double focal_px,
                                            double plane_error_m);
};

/// Midpoint of the common perpendicular of two world rays. Rays are unit
/// bearings in each camera's frame. Throws kParallelRays below 0.1 degrees.
Point3 triangulate(const Pose& pose_a, const Pose& pose_b, const Vec3& ray_a, const Vec3& ray_b);

inline constexpr double kMinTriangulationAngleDeg = 0.1;

Point3 apply_similarity(const SimilarityTransform& T, const Point3& p);
/// Transports a camera-to-world pose so that the new camera center equals
/// apply_similarity(T, old center).
Pose apply_similarity_pose(const SimilarityTransform& T, const Pose& pose);

bool is_rotation(const Mat3& R, double tol = 1e-9);
Mat3 random_rotation(Rng& rng);
Mat3 rotation_about(const Vec3& axis, double angle_rad);

double deg_to_rad(double deg);
double rad_to_deg(double rad);

/// Median of a non-empty list (mean of the middle pair for even sizes).
double median(std::vector<double> values);

}  // namespace smr
