#include "smr/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <Eigen/SVD>

#include "smr/errors.hpp"

namespace smr {

Pose Pose::inverse() const {
  Pose out;
  out.rotation = rotation.transpose();
  out.translation = -(out.rotation * translation);
  return out;
}

Pose Pose::operator*(const Pose& rhs) const {
  Pose out;
  out.rotation = rotation * rhs.rotation;
  out.translation = rotation * rhs.translation + translation;
  return out;
}

SimilarityTransform SimilarityTransform::inverse() const {
  SimilarityTransform out;
  out.scale = 1.0 / scale;
  out.rotation = rotation.transpose();
  out.translation = -out.scale * (out.rotation * translation);
  return out;
}

SimilarityTransform SimilarityTransform::operator*(const SimilarityTransform& rhs) const {
  SimilarityTransform out;
  out.scale = scale * rhs.scale;
  out.rotation = rotation * rhs.rotation;
  out.translation = scale * (rotation * rhs.translation) + translation;
  return out;
}

SimilarityEstimate estimate_similarity(std::span<const Vec3> src, std::span<const Vec3> dst) {
  if (src.size() != dst.size()) {
    throw Error(ErrorCode::kDegenerateConfiguration, "correspondence lists differ in length");
  }
  const std::size_t n = src.size();
  if (n < 3) {
    throw Error(ErrorCode::kDegenerateConfiguration,
                "need at least 3 correspondences, got " + std::to_string(n));
  }

  Vec3 mean_src = Vec3::Zero();
  Vec3 mean_dst = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    mean_src += src[i];
    mean_dst += dst[i];
  }
  mean_src /= static_cast<double>(n);
  mean_dst /= static_cast<double>(n);

  Mat3 cross = Mat3::Zero();
  Mat3 src_scatter = Mat3::Zero();
  double src_var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 s = src[i] - mean_src;
    const Vec3 d = dst[i] - mean_dst;
    cross += d * s.transpose();
    src_scatter += s * s.transpose();
    src_var += s.squaredNorm();
  }
  cross /= static_cast<double>(n);
  src_scatter /= static_cast<double>(n);
  src_var /= static_cast<double>(n);

  // Rank < 2 means the source points are collinear (or coincident).
  Eigen::JacobiSVD<Mat3> scatter_svd(src_scatter);
  const Vec3 sv = scatter_svd.singularValues();
  if (!(sv(0) > 0.0) || sv(1) < 1e-9 * sv(0)) {
    throw Error(ErrorCode::kDegenerateConfiguration, "source points are collinear");
  }

  Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3& U = svd.matrixU();
  const Mat3& V = svd.matrixV();
  Vec3 signs = Vec3::Ones();
  if (U.determinant() * V.determinant() < 0.0) signs(2) = -1.0;

  SimilarityEstimate out;
  out.transform.rotation = U * signs.asDiagonal() * V.transpose();
  out.transform.scale = svd.singularValues().dot(signs) / src_var;
  out.transform.translation =
      mean_dst - out.transform.scale * (out.transform.rotation * mean_src);

  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) sq += (dst[i] - out.transform.apply(src[i])).squaredNorm();
  out.residual_rms = std::sqrt(sq / static_cast<double>(n));
  return out;
}

SimilarityEstimate estimate_similarity_robust(std::span<const Vec3> src,
                                              std::span<const Vec3> dst,
                                              const RobustOptions& options) {
  if (src.size() != dst.size() || src.size() < 3) return estimate_similarity(src, dst);
  const std::size_t n = src.size();
  Rng rng(options.seed);

  std::vector<std::size_t> best_inliers;
  for (int it = 0; it < options.iterations; ++it) {
    std::size_t idx[3];
    idx[0] = rng.index(n);
    do { idx[1] = rng.index(n); } while (idx[1] == idx[0]);
    do { idx[2] = rng.index(n); } while (idx[2] == idx[0] || idx[2] == idx[1]);
    const Vec3 s[3] = {src[idx[0]], src[idx[1]], src[idx[2]]};
    const Vec3 d[3] = {dst[idx[0]], dst[idx[1]], dst[idx[2]]};
    SimilarityEstimate candidate;
    try {
      candidate = estimate_similarity(s, d);
    } catch (const Error&) {
      continue;
    }
    std::vector<std::size_t> inliers;
    for (std::size_t i = 0; i < n; ++i) {
      if ((dst[i] - candidate.transform.apply(src[i])).norm() < options.inlier_threshold) {
        inliers.push_back(i);
      }
    }
    if (inliers.size() > best_inliers.size()) best_inliers = std::move(inliers);
    if (best_inliers.size() == n) break;
  }

  if (best_inliers.size() < 3) {
    throw Error(ErrorCode::kDegenerateConfiguration, "no consensus set of at least 3 points");
  }
  std::vector<Vec3> s_in;
  std::vector<Vec3> d_in;
  for (std::size_t i : best_inliers) {
    s_in.push_back(src[i]);
    d_in.push_back(dst[i]);
  }
  return estimate_similarity(s_in, d_in);
}

double intersection_angle(const Point3& center_a, const Point3& center_b, const Point3& point) {
  const Vec3 ra = center_a - point;
  const Vec3 rb = center_b - point;
  if (ra.norm() == 0.0 || rb.norm() == 0.0) {
    throw Error(ErrorCode::kDegenerateRay, "point coincides with a camera center");
  }
  if ((center_a - center_b).norm() == 0.0) {
    throw Error(ErrorCode::kDegenerateRay, "camera centers coincide");
  }
  return rad_to_deg(std::atan2(ra.cross(rb).norm(), ra.dot(rb)));
}

double depth_error(double mx, double theta_deg) {
  if (!(theta_deg > 0.0) || theta_deg >= 180.0) {
    throw Error(ErrorCode::kZeroIntersectionAngle,
                "theta must lie in (0, 180) degrees, got " + std::to_string(theta_deg));
  }
  const double t = std::tan(deg_to_rad(theta_deg));
  if (t == 0.0) throw Error(ErrorCode::kZeroIntersectionAngle, "tan(theta) is zero");
  return mx / t;
}

IntersectionGeometry IntersectionGeometry::from_baseline(double baseline_m, double height_m,
                                                         double focal_px, double plane_error_m) {
  IntersectionGeometry g;
  g.baseline_B = baseline_m;
  g.height_H = height_m;
  g.focal_f = focal_px;
  g.plane_error_mx = plane_error_m;
  g.image_baseline_b = focal_px * baseline_m / height_m;
  g.theta = rad_to_deg(std::atan2(baseline_m, height_m));
  g.depth_error_mh = depth_error(plane_error_m, g.theta);
  return g;
}

Point3 triangulate(const Pose& pose_a, const Pose& pose_b, const Vec3& ray_a, const Vec3& ray_b) {
  const Vec3 da = (pose_a.rotation * ray_a).normalized();
  const Vec3 db = (pose_b.rotation * ray_b).normalized();
  const double angle = rad_to_deg(std::atan2(da.cross(db).norm(), da.dot(db)));
  if (angle < kMinTriangulationAngleDeg) {
    throw Error(ErrorCode::kParallelRays, "rays are within 0.1 degrees of parallel");
  }
  // Closest points ca + sa*da and cb + sb*db.
  const Vec3 w = pose_a.center() - pose_b.center();
  const double b = da.dot(db);
  const double d = da.dot(w);
  const double e = db.dot(w);
  const double denom = 1.0 - b * b;
  const double sa = (b * e - d) / denom;
  const double sb = (e - b * d) / denom;
  return 0.5 * ((pose_a.center() + sa * da) + (pose_b.center() + sb * db));
}

Point3 apply_similarity(const SimilarityTransform& T, const Point3& p) { return T.apply(p); }

Pose apply_similarity_pose(const SimilarityTransform& T, const Pose& pose) {
  Pose out;
  out.rotation = T.rotation * pose.rotation;
  out.translation = T.apply(pose.translation);
  return out;
}

bool is_rotation(const Mat3& R, double tol) {
  return (R.transpose() * R - Mat3::Identity()).norm() < tol && R.determinant() > 0.0;
}

Mat3 random_rotation(Rng& rng) {
  // Uniform unit quaternion (Shoemake).
  const double u1 = rng.uniform();
  const double u2 = rng.uniform() * 2.0 * std::numbers::pi;
  const double u3 = rng.uniform() * 2.0 * std::numbers::pi;
  const double a = std::sqrt(1.0 - u1);
  const double b = std::sqrt(u1);
  Eigen::Quaterniond q(a * std::cos(u2), a * std::sin(u2), b * std::cos(u3), b * std::sin(u3));
  return q.normalized().toRotationMatrix();
}

Mat3 rotation_about(const Vec3& axis, double angle_rad) {
  return Eigen::AngleAxisd(angle_rad, axis.normalized()).toRotationMatrix();
}

double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

double median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::kDegenerateConfiguration, "median of empty list");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower =
      *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

}  // namespace smr
