#pragma once

#include "phys/types.hpp"

namespace phys {

//! 6x6 mass-inertia matrix [R I_body Rᵀ, 0; 0, m·Id] for the orientation q.
Mat6 build_mass_matrix(const BodyParams& params, const Vec4& q);

//! Forward-Euler velocity update: xi_{t+h} = M⁻¹ (M xi_t + h f_ext).
Twist unconstrained_step(const Mat6& mass_matrix, const Twist& xi, const Wrench& f_ext, double h);

//! Semi-implicit pose update: p += v h, q ⊗= exp(omega h); unit norm restored.
Pose integrate_pose(const Pose& pose, const Twist& xi, double h);

//! Reverse-mode data for one integrate_pose call.
struct IntegratePullback {
  Mat4 dq_dq;      // ∂q'/∂q   (right-multiplication matrix of the step rotation)
  Mat43 dq_domega; // ∂q'/∂omega, normalization projection included
  double h = 0.0;

  //! Maps (dL/dpose') to (dL/dpose, dL/dxi). Position part: dL/dp = dL/dp', dL/dv = h dL/dp'.
  void apply(const Vec4& g_qn, const Vec3& g_pn,
             Vec4& g_q, Vec3& g_p, Vec3& g_omega, Vec3& g_v) const;
};

Pose integrate_pose_with_pullback(const Pose& pose, const Twist& xi, double h,
                                  IntegratePullback& pb);

}  // namespace phys
