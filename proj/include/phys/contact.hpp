#pragma once

#include "phys/types.hpp"

#include <algorithm>
#include <map>
#include <utility>
#include <vector>

namespace phys {

//! Body id used for static geometry (the ground plane).
inline constexpr int kWorld = -1;

//! Half-space boundary {x : n·x = d} with unit normal n pointing out of the solid.
struct PlaneGeom {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;

  double signed_distance(const Vec3& x) const { return normal.dot(x) - offset; }

  //! Plane through the origin tilted by theta about +y; the downhill direction is in the xz-plane.
  static PlaneGeom incline(double theta) {
    return PlaneGeom{Vec3(-std::sin(theta), 0.0, std::cos(theta)), 0.0};
  }

  //! Inclination angle against the horizontal.
  double theta() const { return std::acos(std::min(1.0, std::abs(normal[2]))); }
};

struct ContactPoint {
  int body_a = 0;
  int body_b = kWorld;
  Vec3 point = Vec3::Zero();   // world frame
  Vec3 normal = Vec3::UnitZ(); // unit, from b toward a
  double penetration = 0.0;    // >= 0; 0 while still separated within tol
  Vec3 t1 = Vec3::UnitX();     // orthonormal tangent basis of the contact plane
  Vec3 t2 = Vec3::UnitY();
};

//! Deterministic tangent basis: (t1, t2, n) right-handed, aligned with world axes where possible.
void tangent_basis(const Vec3& n, Vec3& t1, Vec3& t2);

//! One contact per box vertex within tol of the plane. Empty when separated.
std::vector<ContactPoint> detect_box_plane(const Pose& pose, const BodyParams& params,
                                           const PlaneGeom& plane, double tol);

//! SAT over the 15 candidate axes; face-clipping manifold of up to 4 points on overlap
//! or gap <= tol. Normals point from b toward a. Throws on coincident centers.
std::vector<ContactPoint> detect_box_box(const Pose& pose_a, const BodyParams& params_a,
                                         const Pose& pose_b, const BodyParams& params_b,
                                         double tol);

//! Friction coefficients per body pair with a single default; kWorld keys the plane.
class FrictionTable {
 public:
  explicit FrictionTable(double default_mu = 0.0) : default_mu_(default_mu) {}

  void set_default(double mu) { default_mu_ = mu; }
  double get_default() const { return default_mu_; }
  void set_pair(int a, int b, double mu) { overrides_[key(a, b)] = mu; }

  double lookup(int a, int b) const {
    auto it = overrides_.find(key(a, b));
    return it == overrides_.end() ? default_mu_ : it->second;
  }
  bool has_override(int a, int b) const { return overrides_.count(key(a, b)) > 0; }

 private:
  static std::pair<int, int> key(int a, int b) { return {std::min(a, b), std::max(a, b)}; }
  double default_mu_;
  std::map<std::pair<int, int>, double> overrides_;
};

//! Assembled Jacobians and offsets of the mixed LCP.
struct ConstraintSet {
  MatX j_e;  // (n_e x 6n) equality rows; empty in all shipped scenarios
  MatX j_c;  // (n_c x 6n) separating-positive contact normal rows
  MatX j_f;  // (4 n_c x 6n) friction rows, per contact (+t1, -t1, +t2, -t2)
  MatX e;    // (4 n_c x n_c) binary selector grouping friction rows to their contact
  VecX mu;   // per-contact friction coefficient
  VecX c;    // required minimum post-step separating velocity (restitution + bias), >= 0
  std::vector<int> pair_a, pair_b;  // contact i couples bodies (pair_a[i], pair_b[i])
  VecX approach_gate;  // 1 where c includes the restitution term k·(−J_c ξ_t), else 0
  double restitution = 0.0;
  int n_bodies = 0;

  int n_contacts() const { return static_cast<int>(j_c.rows()); }
};

struct ContactConfig {
  double activation_tol = 1e-3;  // m; contacts generated when within this distance
  double baumgarte_beta = 0.2;   // penetration correction gain
  double slop = 1e-3;            // m; penetration below this draws no correction
};

//! Builds the Eq.-style constraint rows for the given contacts. Twists and masses are only
//! used for the restitution offsets; geometry comes from the contacts themselves.
ConstraintSet build_constraints(const std::vector<ContactPoint>& contacts,
                                const std::vector<Pose>& poses,
                                const std::vector<Twist>& twists,
                                const std::vector<BodyParams>& params,
                                const FrictionTable& mu_table, double h,
                                const ContactConfig& cfg = ContactConfig{});

}  // namespace phys
