#include "phys/contact.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace phys {

void tangent_basis(const Vec3& n, Vec3& t1, Vec3& t2) {
  // World axis least aligned with n, smallest index breaking ties.
  int k = 0;
  double best = std::abs(n[0]);
  for (int i = 1; i < 3; ++i) {
    if (std::abs(n[i]) < best - 1e-12) {
      best = std::abs(n[i]);
      k = i;
    }
  }
  t2 = n.cross(Vec3::Unit(k)).normalized();
  t1 = t2.cross(n);
}

std::vector<ContactPoint> detect_box_plane(const Pose& pose, const BodyParams& params,
                                           const PlaneGeom& plane, double tol) {
  assert(tol > 0.0);
  std::vector<ContactPoint> contacts;
  const Mat3 r = quat_to_rot(pose.q);
  Vec3 t1, t2;
  tangent_basis(plane.normal, t1, t2);
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      for (int sz : {-1, 1}) {
        const Vec3 corner_body(sx * params.half_extents[0], sy * params.half_extents[1],
                               sz * params.half_extents[2]);
        const Vec3 corner = pose.p + r * corner_body;
        const double sd = plane.signed_distance(corner);
        if (sd <= tol) {
          ContactPoint cp;
          cp.body_a = 0;
          cp.body_b = kWorld;
          cp.point = corner;
          cp.normal = plane.normal;
          cp.penetration = std::max(0.0, -sd);
          cp.t1 = t1;
          cp.t2 = t2;
          contacts.push_back(cp);
        }
      }
  return contacts;
}

namespace {

struct ObbFrame {
  Mat3 r;        // columns are the box axes in world frame
  Vec3 center;
  Vec3 half;
};

//! Face of an oriented box: 4 corners in world frame, CCW around the outward axis.
std::array<Vec3, 4> box_face(const ObbFrame& box, int axis, double sign) {
  const int u = (axis + 1) % 3, v = (axis + 2) % 3;
  const Vec3 n = sign * box.r.col(axis) * box.half[axis];
  const Vec3 eu = box.r.col(u) * box.half[u];
  const Vec3 ev = box.r.col(v) * box.half[v];
  return {box.center + n + eu + ev, box.center + n - eu + ev,
          box.center + n - eu - ev, box.center + n + eu - ev};
}

//! Sutherland-Hodgman clip of a polygon against the half-space n·x <= d.
std::vector<Vec3> clip_halfspace(const std::vector<Vec3>& poly, const Vec3& n, double d) {
  std::vector<Vec3> out;
  const int m = static_cast<int>(poly.size());
  for (int i = 0; i < m; ++i) {
    const Vec3& p0 = poly[i];
    const Vec3& p1 = poly[(i + 1) % m];
    const double s0 = n.dot(p0) - d;
    const double s1 = n.dot(p1) - d;
    if (s0 <= 0.0) out.push_back(p0);
    if ((s0 < 0.0) != (s1 < 0.0) && std::abs(s1 - s0) > 1e-14) {
      out.push_back(p0 + (s0 / (s0 - s1)) * (p1 - p0));
    }
  }
  return out;
}

//! Keeps at most 4 points: the deepest one plus a maximal angular spread around the centroid.
std::vector<Vec3> cull_to_four(const std::vector<Vec3>& pts, const std::vector<double>& depth,
                               const Vec3& t1, const Vec3& t2) {
  const int n = static_cast<int>(pts.size());
  if (n <= 4) return pts;
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : pts) centroid += p;
  centroid /= n;
  int deepest = 0;
  for (int i = 1; i < n; ++i)
    if (depth[i] > depth[deepest]) deepest = i;
  std::vector<double> ang(n);
  for (int i = 0; i < n; ++i) {
    const Vec3 d = pts[i] - centroid;
    ang[i] = std::atan2(d.dot(t2), d.dot(t1));
  }
  std::vector<int> keep{deepest};
  std::vector<bool> used(n, false);
  used[deepest] = true;
  for (int j = 1; j < 4; ++j) {
    const double target = ang[deepest] + j * (2.0 * M_PI / 4.0);
    int best = -1;
    double best_diff = 1e30;
    for (int i = 0; i < n; ++i) {
      if (used[i]) continue;
      double diff = std::abs(std::remainder(ang[i] - target, 2.0 * M_PI));
      if (diff < best_diff) {
        best_diff = diff;
        best = i;
      }
    }
    keep.push_back(best);
    used[best] = true;
  }
  std::vector<Vec3> out;
  out.reserve(4);
  for (int idx : keep) out.push_back(pts[idx]);
  return out;
}

}  // namespace

std::vector<ContactPoint> detect_box_box(const Pose& pose_a, const BodyParams& params_a,
                                         const Pose& pose_b, const BodyParams& params_b,
                                         double tol) {
  assert(tol > 0.0);
  const ObbFrame a{quat_to_rot(pose_a.q), pose_a.p, params_a.half_extents};
  const ObbFrame b{quat_to_rot(pose_b.q), pose_b.p, params_b.half_extents};
  const Vec3 d = b.center - a.center;
  if (d.norm() < 1e-12) throw std::invalid_argument("detect_box_box: coincident box centers");

  // Separating-axis test: 6 face axes and 9 edge-edge axes, tracked separately so the
  // face manifold wins unless an edge axis is clearly better (stacking stays face-face).
  double face_sep = -1e30;
  Vec3 face_axis = Vec3::Zero();
  int face_owner = 0;
  double edge_sep = -1e30;
  Vec3 edge_axis = Vec3::Zero();
  auto test_axis = [&](const Vec3& axis_raw, bool is_face, int owner) {
    const double len = axis_raw.norm();
    if (len < 1e-10) return;  // near-parallel edge pair
    Vec3 axis = axis_raw / len;
    if (axis.dot(d) < 0.0) axis = -axis;  // orient from a toward b
    double ra = 0.0, rb = 0.0;
    for (int i = 0; i < 3; ++i) {
      ra += std::abs(axis.dot(a.r.col(i))) * a.half[i];
      rb += std::abs(axis.dot(b.r.col(i))) * b.half[i];
    }
    const double sep = axis.dot(d) - (ra + rb);
    if (is_face) {
      if (sep > face_sep) {
        face_sep = sep;
        face_axis = axis;
        face_owner = owner;
      }
    } else if (sep > edge_sep) {
      edge_sep = sep;
      edge_axis = axis;
    }
  };
  for (int i = 0; i < 3; ++i) test_axis(a.r.col(i), true, 0);
  for (int i = 0; i < 3; ++i) test_axis(b.r.col(i), true, 1);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) test_axis(a.r.col(i).cross(b.r.col(j)), false, 2);

  const double sep = std::max(face_sep, edge_sep);
  if (sep > tol) return {};

  // ODE-style preference: use the face manifold unless the edge axis is better by > 5%.
  const bool use_edge = edge_sep > face_sep * 1.05 + 1e-9 && edge_sep > face_sep + 1e-9;

  std::vector<ContactPoint> contacts;
  if (use_edge) {
    // Single contact at the closest points of the two supporting edges.
    const Vec3 axis = edge_axis;  // from a toward b
    // Support edge on a: the edge most anti-parallel to axis direction sweep.
    auto support_edge = [](const ObbFrame& box, const Vec3& dir) {
      // Corner extremal along dir, edge along the axis least aligned with dir.
      Vec3 sgn;
      int e = 0;
      double emin = 1e30;
      for (int i = 0; i < 3; ++i) {
        const double al = dir.dot(box.r.col(i));
        sgn[i] = al >= 0.0 ? 1.0 : -1.0;
        if (std::abs(al) < emin) {
          emin = std::abs(al);
          e = i;
        }
      }
      Vec3 corner = box.center;
      for (int i = 0; i < 3; ++i)
        if (i != e) corner += sgn[i] * box.half[i] * box.r.col(i);
      return std::make_pair(corner - box.half[e] * box.r.col(e),
                            corner + box.half[e] * box.r.col(e));
    };
    auto [pa0, pa1] = support_edge(a, axis);
    auto [pb0, pb1] = support_edge(b, -axis);
    // Closest points between segments.
    const Vec3 u = pa1 - pa0, v = pb1 - pb0, w0 = pa0 - pb0;
    const double aa = u.dot(u), bb = u.dot(v), cc = v.dot(v), dd = u.dot(w0), ee = v.dot(w0);
    const double den = aa * cc - bb * bb;
    double s = 0.0, t = 0.0;
    if (std::abs(den) > 1e-12) s = std::clamp((bb * ee - cc * dd) / den, 0.0, 1.0);
    t = cc > 1e-12 ? std::clamp((bb * s + ee) / cc, 0.0, 1.0) : 0.0;
    const Vec3 ca = pa0 + s * u, cb = pb0 + t * v;
    ContactPoint cp;
    cp.body_a = 0;
    cp.body_b = 1;
    cp.point = 0.5 * (ca + cb);
    cp.normal = -axis;  // axis points a->b, contact normal points b->a
    cp.penetration = std::max(0.0, -edge_sep);
    tangent_basis(cp.normal, cp.t1, cp.t2);
    contacts.push_back(cp);
    return contacts;
  }

  // Face manifold: clip the incident face (other box) against the reference face side planes.
  const ObbFrame& ref = face_owner == 0 ? a : b;
  const ObbFrame& inc = face_owner == 0 ? b : a;
  // face_axis points a->b; outward normal of the reference face:
  const Vec3 ref_out = face_owner == 0 ? face_axis : Vec3(-face_axis);
  int ref_axis = 0;
  double best_align = -1e30;
  for (int i = 0; i < 3; ++i) {
    const double al = ref_out.dot(ref.r.col(i));
    if (std::abs(al) > best_align) {
      best_align = std::abs(al);
      ref_axis = i;
    }
  }
  const double ref_sign = ref_out.dot(ref.r.col(ref_axis)) >= 0.0 ? 1.0 : -1.0;
  // Incident face: the signed axis of the other box most anti-parallel to ref_out.
  int inc_axis = 0;
  double inc_sign = 1.0;
  double inc_align = 1e30;
  for (int i = 0; i < 3; ++i)
    for (double sg : {-1.0, 1.0}) {
      const double al = ref_out.dot(sg * inc.r.col(i));
      if (al < inc_align) {
        inc_align = al;
        inc_axis = i;
        inc_sign = sg;
      }
    }

  const auto inc_face = box_face(inc, inc_axis, inc_sign);
  std::vector<Vec3> poly(inc_face.begin(), inc_face.end());
  // Side planes of the reference face.
  for (int i = 0; i < 3; ++i) {
    if (i == ref_axis) continue;
    const Vec3 n_side = ref.r.col(i);
    const double center_proj = n_side.dot(ref.center);
    poly = clip_halfspace(poly, n_side, center_proj + ref.half[i]);
    if (poly.empty()) return {};
    poly = clip_halfspace(poly, -n_side, -(center_proj - ref.half[i]));
    if (poly.empty()) return {};
  }

  // Keep points at or below the reference face within tol.
  const Vec3 face_n = ref_sign * ref.r.col(ref_axis);
  const double face_d = face_n.dot(ref.center) + ref.half[ref_axis];
  std::vector<Vec3> pts;
  std::vector<double> depth;
  for (const Vec3& p : poly) {
    const double dist = face_n.dot(p) - face_d;  // negative below the face
    if (dist <= tol) {
      pts.push_back(p);
      depth.push_back(-dist);
    }
  }
  if (pts.empty()) return {};
  Vec3 bt1, bt2;
  tangent_basis(face_n, bt1, bt2);
  const std::vector<Vec3> culled = cull_to_four(pts, depth, bt1, bt2);

  const Vec3 normal_b_to_a = -face_axis;  // face_axis is a->b
  Vec3 t1, t2;
  tangent_basis(normal_b_to_a, t1, t2);
  for (const Vec3& p : culled) {
    ContactPoint cp;
    cp.body_a = 0;
    cp.body_b = 1;
    cp.point = p;
    cp.normal = normal_b_to_a;
    cp.penetration = std::max(0.0, -(face_n.dot(p) - face_d));
    cp.t1 = t1;
    cp.t2 = t2;
    contacts.push_back(cp);
  }
  return contacts;
}

ConstraintSet build_constraints(const std::vector<ContactPoint>& contacts,
                                const std::vector<Pose>& poses,
                                const std::vector<Twist>& twists,
                                const std::vector<BodyParams>& params,
                                const FrictionTable& mu_table, double h,
                                const ContactConfig& cfg) {
  const int n_bodies = static_cast<int>(poses.size());
  const int nc = static_cast<int>(contacts.size());
  const int nv = 6 * n_bodies;
  ConstraintSet cs;
  cs.n_bodies = n_bodies;
  cs.j_e = MatX::Zero(0, nv);
  cs.j_c = MatX::Zero(nc, nv);
  cs.j_f = MatX::Zero(4 * nc, nv);
  cs.e = MatX::Zero(4 * nc, nc);
  cs.mu = VecX::Zero(nc);
  cs.c = VecX::Zero(nc);
  cs.approach_gate = VecX::Zero(nc);
  cs.pair_a.resize(nc);
  cs.pair_b.resize(nc);

  VecX xi_t(nv);
  for (int i = 0; i < n_bodies; ++i) xi_t.segment<6>(6 * i) = twists[i].stacked();

  auto add_row = [&](MatX& j, int row, int body, const Vec3& dir, const Vec3& lever,
                     double sign) {
    if (body == kWorld) return;
    j.block<1, 3>(row, 6 * body) += sign * lever.cross(dir).transpose();
    j.block<1, 3>(row, 6 * body + 3) += sign * dir.transpose();
  };

  for (int i = 0; i < nc; ++i) {
    const ContactPoint& cp = contacts[i];
    const Vec3 lever_a = cp.point - poses[cp.body_a].p;
    const Vec3 lever_b = cp.body_b == kWorld ? Vec3::Zero() : Vec3(cp.point - poses[cp.body_b].p);

    add_row(cs.j_c, i, cp.body_a, cp.normal, lever_a, 1.0);
    add_row(cs.j_c, i, cp.body_b, cp.normal, lever_b, -1.0);

    const Vec3 dirs[4] = {cp.t1, -cp.t1, cp.t2, -cp.t2};
    for (int k = 0; k < 4; ++k) {
      add_row(cs.j_f, 4 * i + k, cp.body_a, dirs[k], lever_a, 1.0);
      add_row(cs.j_f, 4 * i + k, cp.body_b, dirs[k], lever_b, -1.0);
      cs.e(4 * i + k, i) = 1.0;
    }

    cs.mu[i] = mu_table.lookup(cp.body_a, cp.body_b);
    cs.pair_a[i] = std::min(cp.body_a, cp.body_b);
    cs.pair_b[i] = std::max(cp.body_a, cp.body_b);

    const double k_a = params[cp.body_a].restitution;
    const double k_pair =
        cp.body_b == kWorld ? k_a : std::max(k_a, params[cp.body_b].restitution);
    const double v_n = cs.j_c.row(i).dot(xi_t);
    double bounce = 0.0;
    if (v_n < 0.0) {
      bounce = k_pair * (-v_n);
      cs.approach_gate[i] = 1.0;
    }
    const double bias =
        cfg.baumgarte_beta * std::max(0.0, cp.penetration - cfg.slop) / h;
    cs.c[i] = bounce + bias;
    cs.restitution = k_pair;
  }
  return cs;
}

}  // namespace phys
