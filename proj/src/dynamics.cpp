#include "phys/dynamics.hpp"

namespace phys {

Mat6 build_mass_matrix(const BodyParams& params, const Vec4& q) {
  const Mat3 r = quat_to_rot(q);
  Mat6 m = Mat6::Zero();
  m.topLeftCorner<3, 3>() = r * params.inertia_body * r.transpose();
  m.bottomRightCorner<3, 3>() = params.mass * Mat3::Identity();
  return m;
}

Twist unconstrained_step(const Mat6& mass_matrix, const Twist& xi, const Wrench& f_ext, double h) {
  assert(h > 0.0);
  const Vec6 rhs = mass_matrix * xi.stacked() + h * f_ext.stacked();
  // Block-diagonal: invert the 3x3 blocks directly.
  Vec6 next;
  next.head<3>() = mass_matrix.topLeftCorner<3, 3>().ldlt().solve(rhs.head<3>());
  next.tail<3>() = rhs.tail<3>() / mass_matrix(3, 3);
  return Twist::from(next);
}

Pose integrate_pose(const Pose& pose, const Twist& xi, double h) {
  assert(h > 0.0);
  Pose next;
  next.p = pose.p + xi.v * h;
  next.q = quat_normalized(quat_mul(pose.q, quat_exp(xi.omega * h)));
  return next;
}

Pose integrate_pose_with_pullback(const Pose& pose, const Twist& xi, double h,
                                  IntegratePullback& pb) {
  Mat43 exp_jac;
  const Vec4 r = quat_exp_jac(xi.omega * h, exp_jac);
  exp_jac *= h;  // chain through phi = omega h
  const Vec4 raw = quat_mul(pose.q, r);
  const double norm = raw.norm();
  const Vec4 qn = raw / norm;
  // Jacobian of normalization at raw.
  const Mat4 proj = (Mat4::Identity() - qn * qn.transpose()) / norm;
  pb.dq_dq = proj * quat_right(r);
  pb.dq_domega = proj * quat_left(pose.q) * exp_jac;
  pb.h = h;

  Pose next;
  next.p = pose.p + xi.v * h;
  next.q = qn;
  return next;
}

void IntegratePullback::apply(const Vec4& g_qn, const Vec3& g_pn,
                              Vec4& g_q, Vec3& g_p, Vec3& g_omega, Vec3& g_v) const {
  g_q = dq_dq.transpose() * g_qn;
  g_omega = dq_domega.transpose() * g_qn;
  g_p = g_pn;
  g_v = h * g_pn;
}

}  // namespace phys
