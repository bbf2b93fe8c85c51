#include "phys/step.hpp"

namespace phys {

std::vector<ContactPoint> detect_contacts(const World& world, const WorldState& state) {
  std::vector<ContactPoint> contacts;
  const int n = world.n_bodies();
  for (int i = 0; i < n; ++i) {
    auto cps = detect_box_plane(state.poses[i], world.bodies[i], world.plane,
                                world.contact.activation_tol);
    for (auto& cp : cps) {
      cp.body_a = i;
      contacts.push_back(cp);
    }
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      auto cps = detect_box_box(state.poses[i], world.bodies[i], state.poses[j],
                                world.bodies[j], world.contact.activation_tol);
      for (auto& cp : cps) {
        cp.body_a = i;
        cp.body_b = j;
        contacts.push_back(cp);
      }
    }
  return contacts;
}

StepResult step(const World& world, const WorldState& state,
                const std::vector<Wrench>& applied, StepPullback* pullback) {
  const int n = world.n_bodies();
  assert(static_cast<int>(applied.size()) == n);
  const int nv = 6 * n;

  MatX m = MatX::Zero(nv, nv);
  VecX xi_t(nv), f_ext(nv), mass(n);
  for (int i = 0; i < n; ++i) {
    m.block<6, 6>(6 * i, 6 * i) = build_mass_matrix(world.bodies[i], state.poses[i].q);
    xi_t.segment<6>(6 * i) = state.twists[i].stacked();
    Wrench total = applied[i];
    total.force += world.bodies[i].mass * world.gravity;
    f_ext.segment<6>(6 * i) = total.stacked();
    mass[i] = world.bodies[i].mass;
  }

  const auto contacts = detect_contacts(world, state);
  ConstraintSet cs = build_constraints(contacts, state.poses, state.twists, world.bodies,
                                       world.mu_table, world.h, world.contact);
  LcpProblem problem = LcpProblem::make(m, std::move(cs), xi_t, f_ext, mass, world.h);

  LcpSolution sol;
  SolveDiagnostics diag;
  if (pullback) {
    pullback->n_bodies = n;
    pullback->gravity_dir.assign(n, world.gravity);
    std::tie(sol, diag) = solve_with_gradients(problem, pullback->lcp, world.solver);
  } else {
    std::tie(sol, diag) = solve(problem, world.solver);
  }

  StepResult out;
  out.diag = diag;
  out.state.poses.resize(n);
  out.state.twists.resize(n);
  if (pullback) pullback->integ.resize(n);
  for (int i = 0; i < n; ++i) {
    const Twist xi_next = Twist::from(sol.xi_next.segment<6>(6 * i));
    out.state.twists[i] = xi_next;
    if (pullback) {
      out.state.poses[i] =
          integrate_pose_with_pullback(state.poses[i], xi_next, world.h, pullback->integ[i]);
    } else {
      out.state.poses[i] = integrate_pose(state.poses[i], xi_next, world.h);
    }
  }
  return out;
}

StepGradients StepPullback::apply(const std::vector<Vec4>& g_q, const std::vector<Vec3>& g_p,
                                  const std::vector<Vec3>& g_omega,
                                  const std::vector<Vec3>& g_v) const {
  const int n = n_bodies;
  StepGradients g;
  g.d_q.resize(n);
  g.d_p.resize(n);
  g.d_omega.assign(n, Vec3::Zero());
  g.d_v.assign(n, Vec3::Zero());
  g.d_applied.assign(n, Wrench{});
  g.d_mass = VecX::Zero(n);

  // Through pose integration: contributes to pose_t gradients and to dL/dxi_{t+h}.
  VecX g_xi_next(6 * n);
  for (int i = 0; i < n; ++i) {
    Vec4 gq;
    Vec3 gp, gw, gv;
    integ[i].apply(g_q[i], g_p[i], gq, gp, gw, gv);
    g.d_q[i] = gq;
    g.d_p[i] = gp;
    g_xi_next.segment<3>(6 * i) = gw + g_omega[i];
    g_xi_next.segment<3>(6 * i + 3) = gv + g_v[i];
  }

  const LcpGradients lg = lcp.apply(g_xi_next);
  for (int i = 0; i < n; ++i) {
    g.d_omega[i] = lg.d_xi_t.segment<3>(6 * i);
    g.d_v[i] = lg.d_xi_t.segment<3>(6 * i + 3);
    g.d_applied[i] = Wrench::from(lg.d_f_ext.segment<6>(6 * i));
    // Gravity ties the total wrench to the mass.
    g.d_mass[i] = lg.d_mass[i] + lg.d_f_ext.segment<3>(6 * i + 3).dot(gravity_dir[i]);
  }
  g.d_mu = lg.d_mu_contact.sum();
  return g;
}

double kinetic_energy(const World& world, const WorldState& state) {
  double e = 0.0;
  for (int i = 0; i < world.n_bodies(); ++i) {
    const Mat6 m = build_mass_matrix(world.bodies[i], state.poses[i].q);
    const Vec6 xi = state.twists[i].stacked();
    e += 0.5 * xi.dot(m * xi);
  }
  return e;
}

}  // namespace phys
