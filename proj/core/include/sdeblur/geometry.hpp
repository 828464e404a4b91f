#pragma once

#include <Eigen/Core>

namespace sdeblur {

/// Rigid body motion M = [R T; 0 1] acting on 3D points as P' = R P + T.
struct RigidMotion {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidMotion identity() { return {}; }

  Eigen::Matrix4d matrix() const;
  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return rotation * p + translation;
  }
  RigidMotion inverse() const;
  /// (*this) applied after `rhs`.
  RigidMotion operator*(const RigidMotion& rhs) const;
};

/// Lie-algebra form of a rigid motion, M = exp(theta * xi).
///
/// The upper-left block of xi is the skew matrix of a unit rotation axis and
/// its last column holds the translational part. A motion without rotation
/// is stored with theta = 0 and the full translation in xi's last column; in
/// that case exponentiation is linear in the time fraction.
struct Twist {
  double theta = 0.0;
  Eigen::Matrix4d xi = Eigen::Matrix4d::Zero();

  Eigen::Vector3d axis() const;
  Eigen::Vector3d translation_part() const { return xi.block<3, 1>(0, 3); }

  /// Rotation vector theta * axis.
  Eigen::Vector3d rotation_vector() const { return theta * axis(); }
  /// Tangent-space translation: theta * v, or the raw translation when
  /// theta is zero.
  Eigen::Vector3d translation_vector() const;

  /// Builds a twist from tangent coordinates (rotation vector, translation
  /// velocity) as used by the closed-form exponential.
  static Twist from_tangent(const Eigen::Vector3d& rotation_vector,
                            const Eigen::Vector3d& translation_vector);
};

struct CameraModel {
  Eigen::Matrix3d intrinsics = Eigen::Matrix3d::Identity();
  Eigen::Vector3d center = Eigen::Vector3d::Zero();

  /// Pinhole camera with focal length f and principal point (cx, cy).
  static CameraModel pinhole(double focal, double cx, double cy);
};

/// Planar scene patch: points P on the plane satisfy P^T normal = 1.
struct PlanePatch {
  Eigen::Vector3d normal = Eigen::Vector3d(0.0, 0.0, 1.0);
  Twist motion;
  int segment_id = 0;
};

Eigen::Matrix3d skew(const Eigen::Vector3d& v);
Eigen::Vector3d vee(const Eigen::Matrix3d& m);

/// Rotation angle of an orthonormal matrix, in [0, pi].
double rotation_angle(const Eigen::Matrix3d& rotation);

void validate(const RigidMotion& motion);
void validate(const CameraModel& camera);
void validate(const CameraModel& camera, const PlanePatch& patch);

/// SE(3) logarithm. Throws AngleTooLarge for angles >= pi - 1e-6 and
/// NotARotation when the rotation is not orthonormal with det +1.
Twist se3_log(const RigidMotion& motion);

/// exp(fraction * theta * xi). Negative fractions run the motion backwards.
RigidMotion se3_exp(const Twist& twist, double fraction);

/// Rigid motion given directly by its rotation vector and translation,
/// convenient for building scenes.
RigidMotion make_motion(const Eigen::Vector3d& rotation_vector,
                        const Eigen::Vector3d& translation);

/// Rotation by `angle` about an axis with direction `axis` passing through
/// `pivot`.
RigidMotion rotation_about(const Eigen::Vector3d& axis, double angle,
                           const Eigen::Vector3d& pivot);

/// Plane-to-image projection K - K T_K n^T.
Eigen::Matrix3d plane_projection(const CameraModel& camera,
                                 const PlanePatch& patch);

/// Normal of the plane after the motion has been applied:
/// n' = R n / (1 + T^T R n).
Eigen::Vector3d transport_normal(const Eigen::Vector3d& normal,
                                 const RigidMotion& motion);

/// Homography mapping reference-time pixels (t0) to pixels at time
/// t0 + t_offset (in frame intervals), normalised to unit determinant.
Eigen::Matrix3d forward_homography(const CameraModel& camera,
                                   const PlanePatch& patch, double t_offset);

/// Homography mapping a pixel observed at time t0 + t_offset back to its
/// position at t0. t_offset is restricted to [-1, 1]. Normalised to unit
/// determinant; identity at t_offset = 0.
Eigen::Matrix3d blur_homography(const CameraModel& camera,
                                const PlanePatch& patch, double t_offset);

/// Applies a homography to pixel (x, y).
Eigen::Vector2d apply_homography(const Eigen::Matrix3d& h,
                                 const Eigen::Vector2d& pixel);

}  // namespace sdeblur
