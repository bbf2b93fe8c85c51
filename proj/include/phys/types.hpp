#pragma once

#include "phys/quat.hpp"

#include <cassert>

namespace phys {

//! Rigid-body configuration: unit quaternion (w,x,y,z) plus world position in meters.
struct Pose {
  Vec4 q = quat_identity();
  Vec3 p = Vec3::Zero();

  //! Renormalizes and canonicalizes (w >= 0) the quaternion.
  static Pose make(const Vec4& q, const Vec3& p) {
    return Pose{quat_canonical(quat_normalized(q)), p};
  }
};

//! 6-D velocity, angular part first: xi = (omega, v).
struct Twist {
  Vec3 omega = Vec3::Zero();
  Vec3 v = Vec3::Zero();

  Vec6 stacked() const {
    Vec6 xi;
    xi << omega, v;
    return xi;
  }
  static Twist from(const Vec6& xi) { return Twist{xi.head<3>(), xi.tail<3>()}; }
};

//! 6-D generalized force, torque first.
struct Wrench {
  Vec3 torque = Vec3::Zero();
  Vec3 force = Vec3::Zero();

  Vec6 stacked() const {
    Vec6 f;
    f << torque, force;
    return f;
  }
  static Wrench from(const Vec6& f) { return Wrench{f.head<3>(), f.tail<3>()}; }
};

//! Physical parameters of a box-shaped rigid body.
struct BodyParams {
  double mass = 1.0;                       // kg, > 0
  Mat3 inertia_body = Mat3::Identity();    // kg m^2, SPD, body frame
  Vec3 half_extents = Vec3::Constant(0.5); // m, > 0
  double restitution = 0.0;                // dimensionless in [0, 1]

  //! Solid-box inertia from mass and half extents: I = m/12 diag(b²+c², a²+c², a²+b²).
  static BodyParams box(double mass, const Vec3& half_extents, double restitution = 0.0) {
    assert(mass > 0.0 && (half_extents.array() > 0.0).all());
    assert(restitution >= 0.0 && restitution <= 1.0);
    const Vec3 full = 2.0 * half_extents;
    const double a2 = full[0] * full[0], b2 = full[1] * full[1], c2 = full[2] * full[2];
    BodyParams p;
    p.mass = mass;
    p.inertia_body = (mass / 12.0) * Vec3(b2 + c2, a2 + c2, a2 + b2).asDiagonal();
    p.half_extents = half_extents;
    p.restitution = restitution;
    return p;
  }
};

}  // namespace phys
