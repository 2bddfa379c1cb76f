// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "poke/common.hpp"

namespace poke {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;

inline Mat3 skew(const Vec3& w) {
  Mat3 m;
  m << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return m;
}

// Rigid transform. rotation is orthonormal with det +1; translation in meters.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return Pose{}; }

  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }

  Pose compose(const Pose& rhs) const {
    return Pose{rotation * rhs.rotation, rotation * rhs.translation + translation};
  }

  Pose inverse() const {
    Mat3 rt = rotation.transpose();
    return Pose{rt, -(rt * translation)};
  }
};

inline Pose operator*(const Pose& a, const Pose& b) { return a.compose(b); }

// se(3) coordinates: rotational part omega (axis-angle, rad), linear part v (m).
struct Twist {
  Vec3 omega = Vec3::Zero();
  Vec3 v = Vec3::Zero();

  Vec6 coeffs() const {
    Vec6 c;
    c << omega, v;
    return c;
  }
  static Twist from_coeffs(const Vec6& c) { return Twist{c.head<3>(), c.tail<3>()}; }
};

// Rodrigues exponential with the standard V matrix for the linear part.
inline Pose se3_exp(const Twist& t) {
  const Vec3& w = t.omega;
  double theta2 = w.squaredNorm();
  double theta = std::sqrt(theta2);
  Mat3 W = skew(w);
  double a, b, c;  // sin t/t, (1-cos t)/t^2, (t-sin t)/t^3
  if (theta < 1e-8) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
    c = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
    c = (theta - std::sin(theta)) / (theta2 * theta);
  }
  Mat3 W2 = W * W;
  Pose p;
  p.rotation = Mat3::Identity() + a * W + b * W2;
  Mat3 V = Mat3::Identity() + b * W + c * W2;
  p.translation = V * t.v;
  return p;
}

// Principal-branch logarithm; rejects rotations within 1e-6 rad of pi where
// the axis is not recoverable from the skew part.
inline Twist se3_log(const Pose& p) {
  const Mat3& R = p.rotation;
  double cos_theta = std::clamp((R.trace() - 1.0) * 0.5, -1.0, 1.0);
  double theta = std::acos(cos_theta);
  require(theta < M_PI - 1e-6, ErrorClass::numeric,
          "se3_log: rotation angle within 1e-6 of pi (branch ambiguity)");
  Vec3 vee(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  Vec3 w;
  if (theta < 1e-8) {
    w = 0.5 * vee * (1.0 + theta * theta / 6.0);
  } else {
    w = vee * (theta / (2.0 * std::sin(theta)));
  }
  double theta2 = w.squaredNorm();
  Mat3 W = skew(w);
  Mat3 W2 = W * W;
  double e;  // V^{-1} = I - W/2 + e W^2
  if (theta2 < 1e-8) {
    e = 1.0 / 12.0 + theta2 / 720.0;
  } else {
    double th = std::sqrt(theta2);
    e = (1.0 - th * std::sin(th) / (2.0 * (1.0 - std::cos(th)))) / theta2;
  }
  Mat3 Vinv = Mat3::Identity() - 0.5 * W + e * W2;
  return Twist{w, Vinv * p.translation};
}

// Nearest rotation in Frobenius norm (polar decomposition via SVD). Used to
// re-project optimizer iterates back onto SO(3).
inline Mat3 orthonormalize(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0) {
    Mat3 s = Mat3::Identity();
    s(2, 2) = -1.0;
    r = svd.matrixU() * s * svd.matrixV().transpose();
  }
  return r;
}

inline double rotation_angle_rad(const Mat3& R) {
  return std::acos(std::clamp((R.trace() - 1.0) * 0.5, -1.0, 1.0));
}

// Geodesic distance between two poses, split into angle (rad) and meters.
inline std::pair<double, double> pose_delta(const Pose& a, const Pose& b) {
  double ang = rotation_angle_rad(a.rotation.transpose() * b.rotation);
  double tr = (a.translation - b.translation).norm();
  return {ang, tr};
}

inline Pose yaw_about(double angle, const Vec3& pivot) {
  double c = std::cos(angle), s = std::sin(angle);
  Mat3 R;
  R << c, -s, 0, s, c, 0, 0, 0, 1;
  return Pose{R, pivot - R * pivot};
}

}  // namespace poke
