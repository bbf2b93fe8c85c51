#pragma once

#include <Eigen/Dense>

#include <cmath>

namespace phys {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat43 = Eigen::Matrix<double, 4, 3>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

// Quaternions are stored scalar-first: (w, x, y, z).

inline Vec4 quat_identity() { return Vec4(1.0, 0.0, 0.0, 0.0); }

inline Vec4 quat_conj(const Vec4& q) { return Vec4(q[0], -q[1], -q[2], -q[3]); }

inline Vec4 quat_mul(const Vec4& a, const Vec4& b) {
  const double w = a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3];
  const double x = a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2];
  const double y = a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1];
  const double z = a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0];
  return Vec4(w, x, y, z);
}

//! Matrix L with quat_mul(q, r) == L(q) * r.
inline Mat4 quat_left(const Vec4& q) {
  Mat4 m;
  m << q[0], -q[1], -q[2], -q[3],
       q[1],  q[0], -q[3],  q[2],
       q[2],  q[3],  q[0], -q[1],
       q[3], -q[2],  q[1],  q[0];
  return m;
}

//! Matrix R with quat_mul(q, r) == R(r) * q.
inline Mat4 quat_right(const Vec4& r) {
  Mat4 m;
  m << r[0], -r[1], -r[2], -r[3],
       r[1],  r[0],  r[3], -r[2],
       r[2], -r[3],  r[0],  r[1],
       r[3],  r[2], -r[1],  r[0];
  return m;
}

inline Vec4 quat_normalized(const Vec4& q) { return q / q.norm(); }

//! Sign-canonical representative of the rotation (w >= 0).
inline Vec4 quat_canonical(const Vec4& q) { return q[0] < 0.0 ? Vec4(-q) : q; }

inline Mat3 quat_to_rot(const Vec4& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
       2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

//! Unit quaternion of the rotation by angle ‖phi‖ about phi/‖phi‖ (half-angle exponential).
inline Vec4 quat_exp(const Vec3& phi) {
  const double n = phi.norm();
  if (n < 1e-8) {
    // First-order expansion; renormalized for safety.
    return quat_normalized(Vec4(1.0, 0.5 * phi[0], 0.5 * phi[1], 0.5 * phi[2]));
  }
  const double half = 0.5 * n;
  const double k = std::sin(half) / n;
  return Vec4(std::cos(half), k * phi[0], k * phi[1], k * phi[2]);
}

//! quat_exp together with its 4x3 Jacobian d quat / d phi.
inline Vec4 quat_exp_jac(const Vec3& phi, Mat43& jac) {
  const double n = phi.norm();
  if (n < 1e-6) {
    jac.row(0) = -0.25 * phi.transpose();
    jac.bottomRows<3>() = 0.5 * Mat3::Identity();
    return quat_exp(phi);
  }
  const double half = 0.5 * n;
  const double s = std::sin(half), c = std::cos(half);
  const double k = s / n;
  const Vec3 u = phi / n;
  jac.row(0) = -0.5 * s * u.transpose();
  jac.bottomRows<3>() = k * Mat3::Identity() + (0.5 * c - k) * (u * u.transpose());
  return Vec4(c, k * phi[0], k * phi[1], k * phi[2]);
}

//! Full rotation angle in [0, pi], sign-flip invariant.
inline double quat_angle(const Vec4& q) {
  const double v = Vec3(q[1], q[2], q[3]).norm();
  return 2.0 * std::atan2(v, std::abs(q[0]));
}

//! Quaternion logarithm (vector part); ‖quat_log(q)‖ equals half the rotation angle.
inline Vec3 quat_log(const Vec4& q_in) {
  const Vec4 q = quat_canonical(q_in);
  const Vec3 u(q[1], q[2], q[3]);
  const double n = u.norm();
  if (n < 1e-12) return u;  // log ≈ vector part near identity
  const double half_angle = std::atan2(n, q[0]);
  return (half_angle / n) * u;
}

inline Vec4 quat_from_axis_angle(const Vec3& axis, double angle) {
  return quat_exp(axis.normalized() * angle);
}

inline Vec4 quat_from_yaw(double psi) {
  return Vec4(std::cos(0.5 * psi), 0.0, 0.0, std::sin(0.5 * psi));
}

//! Z-yaw of a rotation (ZYX convention).
inline double yaw_of(const Vec4& q) {
  const double s = 2.0 * (q[0] * q[3] + q[1] * q[2]);
  const double c = 1.0 - 2.0 * (q[2] * q[2] + q[3] * q[3]);
  return std::atan2(s, c);
}

//! Yaw and its gradient with respect to the quaternion components.
inline double yaw_with_grad(const Vec4& q, Vec4& grad) {
  const double s = 2.0 * (q[0] * q[3] + q[1] * q[2]);
  const double c = 1.0 - 2.0 * (q[2] * q[2] + q[3] * q[3]);
  const double denom = s * s + c * c;
  const Vec4 ds(2.0 * q[3], 2.0 * q[2], 2.0 * q[1], 2.0 * q[0]);
  const Vec4 dc(0.0, 0.0, -4.0 * q[2], -4.0 * q[3]);
  grad = (c * ds - s * dc) / denom;
  return std::atan2(s, c);
}

}  // namespace phys
