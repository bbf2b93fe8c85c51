#include "phys/step.hpp"

#include <doctest.h>

#include <random>

using namespace phys;

namespace {

double uniform(std::mt19937_64& g, double lo, double hi) {
  return lo + (hi - lo) * ((g() >> 11) * 0x1.0p-53);
}

//! Single contact through the center of mass: the exact 1-D reduction of a push.
LcpProblem push_problem(double mass, double mu, double f_x, double v_x, double h) {
  const BodyParams body = BodyParams::box(mass, Vec3(0.5, 0.5, 0.5));
  const MatX m = build_mass_matrix(body, quat_identity());
  std::vector<Pose> poses{Pose{}};
  std::vector<Twist> twists{Twist{Vec3::Zero(), Vec3(v_x, 0, 0)}};
  ContactPoint cp;
  cp.body_a = 0;
  cp.body_b = kWorld;
  cp.point = Vec3::Zero();
  cp.normal = Vec3::UnitZ();
  cp.t1 = Vec3::UnitX();
  cp.t2 = Vec3::UnitY();
  FrictionTable table(mu);
  ConstraintSet cs = build_constraints({cp}, poses, twists, {body}, table, h);
  Vec6 xi = twists[0].stacked();
  Vec6 f;
  f << 0, 0, 0, f_x, 0, -mass * 9.81;
  VecX mv(1);
  mv << mass;
  return LcpProblem::make(m, std::move(cs), xi, f, mv, h);
}

World flat_world(double mu, std::vector<BodyParams> bodies) {
  World w;
  w.bodies = std::move(bodies);
  w.mu_table = FrictionTable(mu);
  return w;
}

}  // namespace

TEST_CASE("unconstrained problems reduce to the direct solve") {
  const BodyParams body = BodyParams::box(2.0, Vec3(0.5, 0.5, 0.5));
  const MatX m = build_mass_matrix(body, quat_identity());
  Vec6 f;
  f << 0, 0, 0, 4, 0, 0;
  VecX mass(1);
  mass << 2.0;
  ConstraintSet cs;
  cs.n_bodies = 1;
  cs.j_e = MatX::Zero(0, 6);
  cs.j_c = MatX::Zero(0, 6);
  cs.j_f = MatX::Zero(0, 6);
  cs.e = MatX::Zero(0, 0);
  const auto problem = LcpProblem::make(m, cs, Vec6::Zero(), f, mass, 0.1);
  const auto [sol, diag] = solve(problem);
  CHECK(diag.ok());
  CHECK(diag.iterations == 0);
  CHECK(sol.xi_next[3] == doctest::Approx(0.2).epsilon(1e-14));
}

TEST_CASE("kinetic 1-D push matches the closed form") {
  // v' = v + (f/m) h − mu g h = 0 + 2*0.01 − 0.1*9.81*0.01 = 0.01019
  const auto problem = push_problem(1.0, 0.1, 2.0, 0.0, 0.01);
  const auto [sol, diag] = solve(problem);
  CHECK(diag.ok());
  CHECK(sol.xi_next[3] == doctest::Approx(0.01019).epsilon(1e-8));
  CHECK(std::abs(sol.xi_next[5]) < 1e-10);
}

TEST_CASE("static friction holds a weakly pushed block") {
  // f = 0.5 N < mu m g = 0.981 N
  const auto problem = push_problem(1.0, 0.1, 0.5, 0.0, 0.01);
  const auto [sol, diag] = solve(problem);
  CHECK(diag.ok());
  CHECK(std::abs(sol.xi_next[3]) < 1e-9);
}

TEST_CASE("solution certificates hold at the solver tolerance") {
  std::mt19937_64 g(41);
  for (int i = 0; i < 200; ++i) {
    const double mass = uniform(g, 0.5, 3.0);
    const double mu = uniform(g, 0.05, 0.6);
    const double f = uniform(g, -8.0, 8.0);
    const double v = uniform(g, -1.0, 1.0);
    const auto problem = push_problem(mass, mu, f, v, 1.0 / 60.0);
    const auto [sol, diag] = solve(problem);
    REQUIRE(diag.ok());
    CHECK(diag.comp_gap <= 1e-8);
    CHECK(sol.lambda_c.minCoeff() >= -1e-10);
    CHECK(sol.lambda_f.minCoeff() >= -1e-10);
    CHECK(sol.gamma.minCoeff() >= -1e-10);
    CHECK(sol.a.minCoeff() >= -1e-10);
    CHECK(sol.sigma.minCoeff() >= -1e-10);
    CHECK(sol.zeta.minCoeff() >= -1e-10);
    const VecX cone = VecX(problem.cs.mu.asDiagonal() * sol.lambda_c) -
                      problem.cs.e.transpose() * sol.lambda_f;
    CHECK(cone.minCoeff() >= -1e-10);
  }
}

TEST_CASE("step: free body moves uniformly") {
  World w = flat_world(0.3, {BodyParams::box(1.0, Vec3(0.1, 0.1, 0.1))});
  w.gravity.setZero();  // free space
  WorldState s;
  s.poses = {Pose::make(quat_identity(), Vec3(0, 0, 5))};
  s.twists = {Twist{Vec3::Zero(), Vec3(0.5, 0, 0)}};
  const auto r = step(w, s, {Wrench{}});
  CHECK(r.diag.ok());
  CHECK((r.state.poses[0].p - Vec3(0.5 * w.h, 0, 5)).norm() < 1e-12);
  CHECK((r.state.twists[0].v - Vec3(0.5, 0, 0)).norm() < 1e-12);
}

TEST_CASE("step: sub-threshold push leaves the resting box in place") {
  World w = flat_world(0.1, {BodyParams::box(1.0, Vec3(0.1, 0.1, 0.1))});
  WorldState s;
  s.poses = {Pose::make(quat_identity(), Vec3(0, 0, 0.1))};
  s.twists = {Twist{}};
  Wrench f;
  f.force = Vec3(0.5, 0, 0);  // < mu m g
  const auto r = step(w, s, {f});
  CHECK(r.diag.ok());
  CHECK((r.state.poses[0].p - s.poses[0].p).norm() < 1e-9);
  CHECK(r.state.twists[0].v.norm() < 1e-8);
}

TEST_CASE("step: equal-mass inelastic collision shares the velocity") {
  World w = flat_world(0.0, {BodyParams::box(1.0, Vec3(0.1, 0.1, 0.1)),
                             BodyParams::box(1.0, Vec3(0.1, 0.1, 0.1))});
  WorldState s;
  s.poses = {Pose::make(quat_identity(), Vec3(0, 0, 0.1)),
             Pose::make(quat_identity(), Vec3(0.2, 0, 0.1))};
  s.twists = {Twist{Vec3::Zero(), Vec3(2, 0, 0)}, Twist{}};
  const auto r = step(w, s, {Wrench{}, Wrench{}});
  CHECK(r.diag.ok());
  CHECK(r.state.twists[0].v[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(r.state.twists[1].v[0] == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("resting box under gravity keeps |v_z| tiny") {
  World w = flat_world(0.3, {BodyParams::box(1.0, Vec3(0.1, 0.1, 0.1))});
  WorldState s;
  s.poses = {Pose::make(quat_identity(), Vec3(0, 0, 0.1))};
  s.twists = {Twist{}};
  for (int i = 0; i < 50; ++i) {
    const auto r = step(w, s, {Wrench{}});
    REQUIRE(r.diag.ok());
    CHECK(std::abs(r.state.twists[0].v[2]) <= 1e-8);
    s = r.state;
  }
}

TEST_CASE("momentum is conserved by frictionless collisions") {
  World w = flat_world(0.0, {BodyParams::box(1.3, Vec3(0.1, 0.1, 0.1)),
                             BodyParams::box(0.7, Vec3(0.1, 0.1, 0.1))});
  WorldState s;
  s.poses = {Pose::make(quat_identity(), Vec3(0, 0, 0.1)),
             Pose::make(quat_identity(), Vec3(0.25, 0, 0.1))};
  s.twists = {Twist{Vec3::Zero(), Vec3(1.5, 0, 0)}, Twist{Vec3::Zero(), Vec3(-0.3, 0, 0)}};
  for (int i = 0; i < 60; ++i) {
    const Vec3 before = w.bodies[0].mass * s.twists[0].v + w.bodies[1].mass * s.twists[1].v;
    const auto r = step(w, s, {Wrench{}, Wrench{}});
    REQUIRE(r.diag.ok());
    const Vec3 after =
        w.bodies[0].mass * r.state.twists[0].v + w.bodies[1].mass * r.state.twists[1].v;
    CHECK(std::abs(after[0] - before[0]) < 1e-8);
    CHECK(std::abs(after[1] - before[1]) < 1e-8);
    s = r.state;
  }
}

TEST_CASE("kinetic energy never grows while sliding with no force") {
  World w = flat_world(0.25, {BodyParams::box(1.0, Vec3(0.1, 0.1, 0.1))});
  WorldState s;
  s.poses = {Pose::make(quat_identity(), Vec3(0, 0, 0.1))};
  s.twists = {Twist{Vec3::Zero(), Vec3(1.2, 0.4, 0)}};
  double e = kinetic_energy(w, s);
  for (int i = 0; i < 120; ++i) {
    const auto r = step(w, s, {Wrench{}});
    REQUIRE(r.diag.ok());
    const double e_next = kinetic_energy(w, r.state);
    CHECK(e_next <= e + 1e-10);
    e = e_next;
    s = r.state;
  }
  CHECK(e < 1e-10);  // the block came to rest
}

TEST_CASE("resting stack keeps penetration within twice the activation tolerance") {
  World w = flat_world(0.4, {BodyParams::box(1.0, Vec3(0.1, 0.1, 0.1)),
                             BodyParams::box(0.8, Vec3(0.08, 0.08, 0.08))});
  WorldState s;
  s.poses = {Pose::make(quat_identity(), Vec3(0, 0, 0.1)),
             Pose::make(quat_identity(), Vec3(0.01, 0.005, 0.28))};
  s.twists = {Twist{}, Twist{}};
  for (int i = 0; i < 300; ++i) {
    const auto r = step(w, s, {Wrench{}, Wrench{}});
    REQUIRE(r.diag.ok());
    s = r.state;
    const auto contacts = detect_contacts(w, s);
    for (const auto& cp : contacts) CHECK(cp.penetration <= 2.0 * w.contact.activation_tol);
    // Bottom of the lower box must not sink through the plane.
    CHECK(s.poses[0].p[2] > 0.1 - 2.0 * w.contact.activation_tol);
  }
}
