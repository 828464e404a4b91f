#include "sdeblur/geometry.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <sstream>

#include "sdeblur/error.hpp"

namespace sdeblur {
namespace {

constexpr double kOrthonormalTol = 1e-9;
constexpr double kZeroAngle = 1e-9;
constexpr double kSeriesAngle = 1e-4;
// The V^-1 coefficient cancels to first order; its series is accurate to
// ~1e-18 below this angle.
constexpr double kSeriesCoefficientAngle = 1e-2;
constexpr double kMaxLogAngle = std::numbers::pi - 1e-6;
constexpr double kPlaneThroughCameraTol = 1e-6;
constexpr double kMaxProjectionCondition = 1e12;
constexpr double kMinHomographyDet = 1e-12;

// Coefficients of the closed-form SO(3)/SE(3) exponential:
//   R = I + a * W + b * W^2,  V = I + b * W + c * W^2.
struct ExpCoefficients {
  double a, b, c;
};

ExpCoefficients exp_coefficients(double angle) {
  const double t2 = angle * angle;
  if (angle < kSeriesAngle) {
    const double t4 = t2 * t2;
    return {1.0 - t2 / 6.0 + t4 / 120.0, 0.5 - t2 / 24.0 + t4 / 720.0,
            1.0 / 6.0 - t2 / 120.0 + t4 / 5040.0};
  }
  const double s = std::sin(angle);
  const double half = std::sin(0.5 * angle);
  return {s / angle, 2.0 * half * half / t2, (angle - s) / (t2 * angle)};
}

bool all_finite(const auto& m) { return m.allFinite(); }

// Unit rotation axis for angles close to pi, where the antisymmetric part
// vanishes. Uses the symmetric part (1 - cos) * a a^T.
Eigen::Vector3d axis_from_symmetric(const Eigen::Matrix3d& r, double angle) {
  const Eigen::Matrix3d outer =
      (0.5 * (r + r.transpose()) - std::cos(angle) * Eigen::Matrix3d::Identity()) /
      (1.0 - std::cos(angle));
  Eigen::Index k = 0;
  outer.diagonal().maxCoeff(&k);
  Eigen::Vector3d axis = outer.col(k) / std::sqrt(outer(k, k));
  axis.normalize();
  if (axis.dot(vee(r - r.transpose())) < 0.0) axis = -axis;
  return axis;
}

Eigen::Matrix3d so3_exp(const Eigen::Vector3d& rotation_vector) {
  const double angle = rotation_vector.norm();
  const ExpCoefficients k = exp_coefficients(angle);
  const Eigen::Matrix3d w = skew(rotation_vector);
  return Eigen::Matrix3d::Identity() + k.a * w + k.b * w * w;
}

}  // namespace

Eigen::Matrix4d RigidMotion::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.block<3, 3>(0, 0) = rotation;
  m.block<3, 1>(0, 3) = translation;
  return m;
}

RigidMotion RigidMotion::inverse() const {
  RigidMotion inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

RigidMotion RigidMotion::operator*(const RigidMotion& rhs) const {
  RigidMotion out;
  out.rotation = rotation * rhs.rotation;
  out.translation = rotation * rhs.translation + translation;
  return out;
}

Eigen::Vector3d Twist::axis() const {
  return vee(xi.block<3, 3>(0, 0));
}

Eigen::Vector3d Twist::translation_vector() const {
  return theta == 0.0 ? translation_part() : Eigen::Vector3d(theta * translation_part());
}

Twist Twist::from_tangent(const Eigen::Vector3d& rotation_vector,
                          const Eigen::Vector3d& translation_vector) {
  Twist tw;
  const double angle = rotation_vector.norm();
  if (angle < kZeroAngle) {
    tw.theta = 0.0;
    tw.xi.block<3, 1>(0, 3) = translation_vector;
    return tw;
  }
  tw.theta = angle;
  tw.xi.block<3, 3>(0, 0) = skew(rotation_vector / angle);
  tw.xi.block<3, 1>(0, 3) = translation_vector / angle;
  return tw;
}

CameraModel CameraModel::pinhole(double focal, double cx, double cy) {
  CameraModel cam;
  cam.intrinsics << focal, 0.0, cx, 0.0, focal, cy, 0.0, 0.0, 1.0;
  return cam;
}

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  // clang-format off
  s <<  0.0,  -v.z(),  v.y(),
        v.z(),  0.0,  -v.x(),
       -v.y(),  v.x(),  0.0;
  // clang-format on
  return s;
}

Eigen::Vector3d vee(const Eigen::Matrix3d& m) {
  return {m(2, 1), m(0, 2), m(1, 0)};
}

double rotation_angle(const Eigen::Matrix3d& rotation) {
  const double sin_part = 0.5 * vee(rotation - rotation.transpose()).norm();
  const double cos_part = 0.5 * (rotation.trace() - 1.0);
  return std::atan2(sin_part, cos_part);
}

void validate(const RigidMotion& motion) {
  if (!all_finite(motion.rotation) || !all_finite(motion.translation)) {
    throw Error(ErrorCode::kNotARotation, "motion has non-finite entries");
  }
  const double ortho =
      (motion.rotation.transpose() * motion.rotation - Eigen::Matrix3d::Identity())
          .norm();
  if (ortho >= kOrthonormalTol) {
    std::ostringstream msg;
    msg << "rotation is not orthonormal (|R^T R - I|_F = " << ortho << ")";
    throw Error(ErrorCode::kNotARotation, msg.str());
  }
  const double det = motion.rotation.determinant();
  if (std::abs(det - 1.0) >= kOrthonormalTol) {
    std::ostringstream msg;
    msg << "rotation determinant is " << det << ", expected 1";
    throw Error(ErrorCode::kNotARotation, msg.str());
  }
}

void validate(const CameraModel& camera) {
  const Eigen::Matrix3d& k = camera.intrinsics;
  if (!all_finite(k) || !all_finite(camera.center)) {
    throw Error(ErrorCode::kInvariantViolation, "camera has non-finite entries");
  }
  if (k(1, 0) != 0.0 || k(2, 0) != 0.0 || k(2, 1) != 0.0 || k(2, 2) != 1.0) {
    throw Error(ErrorCode::kInvariantViolation,
                "intrinsics must be upper triangular with K[2][2] = 1");
  }
  if (std::abs(k.determinant()) < 1e-12) {
    throw Error(ErrorCode::kInvariantViolation, "intrinsics are singular");
  }
}

void validate(const CameraModel& camera, const PlanePatch& patch) {
  validate(camera);
  if (!all_finite(patch.normal) || patch.normal.norm() == 0.0) {
    throw Error(ErrorCode::kInvariantViolation,
                "plane normal of segment " + std::to_string(patch.segment_id) +
                    " must be finite and nonzero");
  }
  if (std::abs(camera.center.dot(patch.normal) - 1.0) <= kPlaneThroughCameraTol) {
    throw Error(ErrorCode::kInvariantViolation,
                "camera center lies on the plane of segment " +
                    std::to_string(patch.segment_id));
  }
  const Twist& tw = patch.motion;
  const Eigen::Matrix3d w = tw.xi.block<3, 3>(0, 0);
  if (!std::isfinite(tw.theta) || !all_finite(tw.xi) ||
      (w + w.transpose()).norm() > 1e-12 || tw.xi.row(3).norm() != 0.0) {
    throw Error(ErrorCode::kInvariantViolation,
                "malformed twist for segment " + std::to_string(patch.segment_id));
  }
  const double axis_norm = tw.axis().norm();
  if (tw.theta != 0.0 ? std::abs(axis_norm - 1.0) > 1e-9 : axis_norm != 0.0) {
    throw Error(ErrorCode::kInvariantViolation,
                "twist axis has wrong norm for segment " +
                    std::to_string(patch.segment_id));
  }
}

Twist se3_log(const RigidMotion& motion) {
  validate(motion);
  const Eigen::Matrix3d& r = motion.rotation;
  const double angle = rotation_angle(r);
  if (angle >= kMaxLogAngle) {
    std::ostringstream msg;
    msg << "rotation angle " << angle << " is outside the principal branch";
    throw Error(ErrorCode::kAngleTooLarge, msg.str());
  }

  Eigen::Vector3d phi;
  if (angle < kSeriesAngle) {
    const double t2 = angle * angle;
    phi = 0.5 * vee(r - r.transpose()) * (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0);
  } else if (angle < 0.75 * std::numbers::pi) {
    phi = angle / (2.0 * std::sin(angle)) * vee(r - r.transpose());
  } else {
    phi = angle * axis_from_symmetric(r, angle);
  }

  // V^{-1} = I - W/2 + d * W^2
  double d;
  if (angle < kSeriesCoefficientAngle) {
    const double t2 = angle * angle;
    d = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0;
  } else {
    const ExpCoefficients k = exp_coefficients(angle);
    d = (1.0 - k.a / (2.0 * k.b)) / (angle * angle);
  }
  const Eigen::Matrix3d w = skew(phi);
  const Eigen::Matrix3d v_inv = Eigen::Matrix3d::Identity() - 0.5 * w + d * w * w;
  return Twist::from_tangent(phi, v_inv * motion.translation);
}

RigidMotion se3_exp(const Twist& twist, double fraction) {
  if (!std::isfinite(fraction)) {
    throw Error(ErrorCode::kInvalidArgument, "time fraction must be finite");
  }
  RigidMotion out;
  const Eigen::Vector3d rho = fraction * twist.translation_vector();
  if (twist.theta == 0.0) {
    out.translation = rho;
    return out;
  }
  const Eigen::Vector3d phi = fraction * twist.rotation_vector();
  const double angle = phi.norm();
  const ExpCoefficients k = exp_coefficients(angle);
  const Eigen::Matrix3d w = skew(phi);
  const Eigen::Matrix3d w2 = w * w;
  out.rotation = Eigen::Matrix3d::Identity() + k.a * w + k.b * w2;
  out.translation = (Eigen::Matrix3d::Identity() + k.b * w + k.c * w2) * rho;
  return out;
}

RigidMotion make_motion(const Eigen::Vector3d& rotation_vector,
                        const Eigen::Vector3d& translation) {
  RigidMotion m;
  m.rotation = so3_exp(rotation_vector);
  m.translation = translation;
  return m;
}

RigidMotion rotation_about(const Eigen::Vector3d& axis, double angle,
                           const Eigen::Vector3d& pivot) {
  RigidMotion m;
  m.rotation = so3_exp(axis.normalized() * angle);
  m.translation = pivot - m.rotation * pivot;
  return m;
}

Eigen::Matrix3d plane_projection(const CameraModel& camera,
                                 const PlanePatch& patch) {
  validate(camera, patch);
  const Eigen::Matrix3d& k = camera.intrinsics;
  const Eigen::Matrix3d pr = k - (k * camera.center) * patch.normal.transpose();
  // Frobenius-norm condition number; bounds the spectral one from above.
  const double det = pr.determinant();
  const double cond = det != 0.0 ? pr.norm() * pr.inverse().norm()
                                 : std::numeric_limits<double>::infinity();
  if (!(cond <= kMaxProjectionCondition)) {
    std::ostringstream msg;
    msg << "plane projection of segment " << patch.segment_id
        << " has condition number " << cond;
    throw Error(ErrorCode::kSingularProjection, msg.str());
  }
  return pr;
}

Eigen::Vector3d transport_normal(const Eigen::Vector3d& normal,
                                 const RigidMotion& motion) {
  const Eigen::Vector3d rn = motion.rotation * normal;
  return rn / (1.0 + motion.translation.dot(rn));
}

Eigen::Matrix3d forward_homography(const CameraModel& camera,
                                   const PlanePatch& patch, double t_offset) {
  plane_projection(camera, patch);
  const RigidMotion m = se3_exp(patch.motion, t_offset);

  // Move to a frame centred on the reference camera.
  const Eigen::Vector3d& c = camera.center;
  const Eigen::Vector3d n_cam = patch.normal / (1.0 - c.dot(patch.normal));
  const Eigen::Matrix3d r_minus_i = m.rotation - Eigen::Matrix3d::Identity();
  const Eigen::Vector3d t_cam = m.translation + r_minus_i * c;

  const Eigen::Matrix3d& k = camera.intrinsics;
  const Eigen::Matrix3d k_inv = k.inverse();
  // K (R + T n^T) K^-1, written so that a zero motion gives exactly I.
  const Eigen::Matrix3d g = Eigen::Matrix3d::Identity() + k * r_minus_i * k_inv +
                            (k * t_cam) * (k_inv.transpose() * n_cam).transpose();
  const double det = g.determinant();
  if (!(std::abs(det) >= kMinHomographyDet)) {
    std::ostringstream msg;
    msg << "homography of segment " << patch.segment_id << " at t=" << t_offset
        << " has determinant " << det;
    throw Error(ErrorCode::kDegenerateHomography, msg.str());
  }
  return g / std::cbrt(det);
}

Eigen::Matrix3d blur_homography(const CameraModel& camera,
                                const PlanePatch& patch, double t_offset) {
  if (!(t_offset >= -1.0 && t_offset <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "t_offset must lie in [-1, 1]");
  }
  return forward_homography(camera, patch, t_offset).inverse();
}

Eigen::Vector2d apply_homography(const Eigen::Matrix3d& h,
                                 const Eigen::Vector2d& pixel) {
  const Eigen::Vector3d p = h * Eigen::Vector3d(pixel.x(), pixel.y(), 1.0);
  return p.head<2>() / p.z();
}

}  // namespace sdeblur
