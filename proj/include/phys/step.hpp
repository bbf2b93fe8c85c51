#pragma once

#include "phys/dynamics.hpp"
#include "phys/lcp.hpp"

#include <optional>

namespace phys {

//! Scene description: bodies over one static plane, pairwise friction, integration step.
struct World {
  std::vector<BodyParams> bodies;
  FrictionTable mu_table;
  PlaneGeom plane;
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);
  double h = 1.0 / 60.0;
  ContactConfig contact;
  LcpSolverOptions solver;

  int n_bodies() const { return static_cast<int>(bodies.size()); }
};

struct WorldState {
  std::vector<Pose> poses;
  std::vector<Twist> twists;
};

//! Gradients of a scalar with respect to one step's inputs.
struct StepGradients {
  std::vector<Vec4> d_q;      // per body, w.r.t. pose quaternion at t
  std::vector<Vec3> d_p;      // per body, w.r.t. position at t
  std::vector<Vec3> d_omega;  // per body, w.r.t. twist at t
  std::vector<Vec3> d_v;
  std::vector<Wrench> d_applied;  // w.r.t. the applied external wrench
  VecX d_mass;                    // per body
  double d_mu = 0.0;              // shared friction coefficient (sum over pairs)
};

//! Reverse-mode data for one world step. Contact geometry is treated as constant:
//! pose gradients flow through the integration chain, not through Jacobian assembly.
struct StepPullback {
  std::vector<IntegratePullback> integ;
  LcpPullback lcp;
  std::vector<Vec3> gravity_dir;  // d f_ext_i / d mass_i (force rows)
  int n_bodies = 0;

  //! (dL/dpose_{t+h}, dL/dxi_{t+h}) -> StepGradients.
  StepGradients apply(const std::vector<Vec4>& g_q, const std::vector<Vec3>& g_p,
                      const std::vector<Vec3>& g_omega, const std::vector<Vec3>& g_v) const;
};

struct StepResult {
  WorldState state;
  SolveDiagnostics diag;
};

//! Advances the world by h under the applied wrenches (gravity added internally).
//! When `pullback` is non-null it is filled for reverse mode.
StepResult step(const World& world, const WorldState& state,
                const std::vector<Wrench>& applied, StepPullback* pullback = nullptr);

//! Detects all contacts of the current state (box-plane for every body, box-box per pair).
std::vector<ContactPoint> detect_contacts(const World& world, const WorldState& state);

//! Total kinetic energy 0.5 xiᵀ M xi of the state.
double kinetic_energy(const World& world, const WorldState& state);

}  // namespace phys
