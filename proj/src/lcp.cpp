#include "phys/lcp.hpp"

#include <Eigen/Cholesky>

#include <cmath>

namespace phys {

namespace {

//! Largest alpha in [0, cap] keeping x + alpha dx >= 0 elementwise.
double max_step(const VecX& x, const VecX& dx, double cap) {
  double alpha = cap;
  for (int i = 0; i < x.size(); ++i) {
    if (dx[i] < 0.0) alpha = std::min(alpha, -x[i] / dx[i]);
  }
  return alpha;
}

struct Residuals {
  VecX r1, r2, r3, r4, r5;
  double inf_norm() const {
    double r = 0.0;
    for (const VecX* v : {&r1, &r2, &r3, &r4, &r5})
      if (v->size() > 0) r = std::max(r, v->lpNorm<Eigen::Infinity>());
    return r;
  }
};

}  // namespace

std::pair<LcpSolution, SolveDiagnostics> solve(const LcpProblem& problem,
                                               const LcpSolverOptions& opts) {
  const ConstraintSet& cs = problem.cs;
  const int nv = static_cast<int>(problem.m.rows());
  const int ne = static_cast<int>(cs.j_e.rows());
  const int nc = cs.n_contacts();
  const int nf = 4 * nc;

  LcpSolution sol;
  SolveDiagnostics diag;

  if (nc == 0 && ne == 0) {
    // Direct path: unconstrained velocities.
    sol.xi_next = problem.m.ldlt().solve(problem.q_rhs);
    diag.strict_margin = 1.0;
    return {sol, diag};
  }
  if (nc == 0) {
    // Equality-constrained saddle system.
    const int n = nv + ne;
    MatX k = MatX::Zero(n, n);
    k.topLeftCorner(nv, nv) = problem.m;
    k.topRightCorner(nv, ne) = -cs.j_e.transpose();
    k.bottomLeftCorner(ne, nv) = cs.j_e;
    VecX rhs = VecX::Zero(n);
    rhs.head(nv) = problem.q_rhs;
    const VecX z = k.partialPivLu().solve(rhs);
    sol.xi_next = z.head(nv);
    sol.lambda_e = z.tail(ne);
    diag.strict_margin = 1.0;
    if (!sol.xi_next.allFinite()) diag.status = SolveStatus::kSingularKkt;
    return {sol, diag};
  }

  // Primal-dual interior point (Mehrotra predictor-corrector) on the reduced system
  // with unknowns (xi, lambda_e, lambda_c, lambda_f, gamma); slacks eliminated.
  VecX xi = problem.m.ldlt().solve(problem.q_rhs);
  VecX lambda_e = VecX::Zero(ne);
  VecX lambda_c = VecX::Ones(nc), lambda_f = VecX::Ones(nf), gamma = VecX::Ones(nc);
  VecX a = VecX::Ones(nc), sigma = VecX::Ones(nf), zeta = VecX::Ones(nc);

  const int npairs = 2 * nc + nf;
  const double scale = std::max(1.0, problem.q_rhs.lpNorm<Eigen::Infinity>());
  const double tol = opts.tol * scale;

  const int dim = nv + ne + nc + nf + nc;
  const int oxi = 0, oe = nv, oc = nv + ne, of = nv + ne + nc, og = nv + ne + nc + nf;
  MatX kkt = MatX::Zero(dim, dim);
  kkt.block(oxi, oxi, nv, nv) = problem.m;
  if (ne > 0) {
    kkt.block(oxi, oe, nv, ne) = -cs.j_e.transpose();
    kkt.block(oe, oxi, ne, nv) = cs.j_e;
  }
  kkt.block(oxi, oc, nv, nc) = -cs.j_c.transpose();
  kkt.block(oxi, of, nv, nf) = -cs.j_f.transpose();
  kkt.block(oc, oxi, nc, nv) = cs.j_c;
  kkt.block(of, oxi, nf, nv) = cs.j_f;
  kkt.block(of, og, nf, nc) = cs.e;
  kkt.block(og, oc, nc, nc) = cs.mu.asDiagonal();
  kkt.block(og, of, nc, nf) = -cs.e.transpose();

  Residuals res;
  auto compute_residuals = [&]() {
    res.r1 = problem.m * xi - cs.j_c.transpose() * lambda_c - cs.j_f.transpose() * lambda_f -
             problem.q_rhs;
    if (ne > 0) res.r1 -= cs.j_e.transpose() * lambda_e;
    res.r2 = ne > 0 ? VecX(cs.j_e * xi) : VecX();
    res.r3 = a - cs.j_c * xi + cs.c;
    res.r4 = sigma - cs.j_f * xi - cs.e * gamma;
    res.r5 = zeta - VecX(cs.mu.asDiagonal() * lambda_c) + cs.e.transpose() * lambda_f;
  };

  Eigen::PartialPivLU<MatX> lu;
  VecX rhs(dim), delta(dim), delta_cor(dim);
  double gap_total = 0.0;

  int it = 0;
  for (; it < opts.max_iter; ++it) {
    compute_residuals();
    gap_total = a.dot(lambda_c) + sigma.dot(lambda_f) + zeta.dot(gamma);
    const double mu_bar = gap_total / npairs;
    if (res.inf_norm() <= tol && gap_total <= tol) break;

    kkt.block(oc, oc, nc, nc) = (a.array() / lambda_c.array()).matrix().asDiagonal();
    kkt.block(of, of, nf, nf) = (sigma.array() / lambda_f.array()).matrix().asDiagonal();
    kkt.block(og, og, nc, nc) = (zeta.array() / gamma.array()).matrix().asDiagonal();
    lu.compute(kkt);

    // Predictor: pure Newton step toward complementarity zero.
    rhs.segment(oxi, nv) = -res.r1;
    if (ne > 0) rhs.segment(oe, ne) = -res.r2;
    rhs.segment(oc, nc) = res.r3 - a;
    rhs.segment(of, nf) = res.r4 - sigma;
    rhs.segment(og, nc) = res.r5 - zeta;
    delta = lu.solve(rhs);
    if (!delta.allFinite()) {
      diag.status = SolveStatus::kSingularKkt;
      break;
    }

    const VecX dxi_aff = delta.segment(oxi, nv);
    const VecX dlc_aff = delta.segment(oc, nc);
    const VecX dlf_aff = delta.segment(of, nf);
    const VecX dg_aff = delta.segment(og, nc);
    const VecX da_aff = cs.j_c * dxi_aff - res.r3;
    const VecX ds_aff = cs.j_f * dxi_aff + cs.e * dg_aff - res.r4;
    const VecX dz_aff = VecX(cs.mu.asDiagonal() * dlc_aff) - cs.e.transpose() * dlf_aff - res.r5;

    double alpha_aff = 1.0;
    alpha_aff = max_step(a, da_aff, alpha_aff);
    alpha_aff = max_step(lambda_c, dlc_aff, alpha_aff);
    alpha_aff = max_step(sigma, ds_aff, alpha_aff);
    alpha_aff = max_step(lambda_f, dlf_aff, alpha_aff);
    alpha_aff = max_step(zeta, dz_aff, alpha_aff);
    alpha_aff = max_step(gamma, dg_aff, alpha_aff);

    const double gap_aff = (a + alpha_aff * da_aff).dot(lambda_c + alpha_aff * dlc_aff) +
                           (sigma + alpha_aff * ds_aff).dot(lambda_f + alpha_aff * dlf_aff) +
                           (zeta + alpha_aff * dz_aff).dot(gamma + alpha_aff * dg_aff);
    const double sigma_pow = std::pow(std::clamp(gap_aff / gap_total, 0.0, 1.0), 3);
    const double target = sigma_pow * mu_bar;

    // Corrector, reusing the factorization: recenter and cancel the second-order term.
    rhs.segment(oc, nc) =
        res.r3 +
        ((target - a.array() * lambda_c.array() - da_aff.array() * dlc_aff.array()) /
         lambda_c.array())
            .matrix();
    rhs.segment(of, nf) =
        res.r4 +
        ((target - sigma.array() * lambda_f.array() - ds_aff.array() * dlf_aff.array()) /
         lambda_f.array())
            .matrix();
    rhs.segment(og, nc) =
        res.r5 +
        ((target - zeta.array() * gamma.array() - dz_aff.array() * dg_aff.array()) /
         gamma.array())
            .matrix();
    delta_cor = lu.solve(rhs);
    if (!delta_cor.allFinite()) {
      diag.status = SolveStatus::kSingularKkt;
      break;
    }

    const VecX dxi = delta_cor.segment(oxi, nv);
    const VecX dle = ne > 0 ? VecX(delta_cor.segment(oe, ne)) : VecX();
    const VecX dlc = delta_cor.segment(oc, nc);
    const VecX dlf = delta_cor.segment(of, nf);
    const VecX dg = delta_cor.segment(og, nc);
    const VecX da = cs.j_c * dxi - res.r3;
    const VecX ds = cs.j_f * dxi + cs.e * dg - res.r4;
    const VecX dz = VecX(cs.mu.asDiagonal() * dlc) - cs.e.transpose() * dlf - res.r5;

    double alpha = 1.0;
    alpha = max_step(a, da, alpha);
    alpha = max_step(lambda_c, dlc, alpha);
    alpha = max_step(sigma, ds, alpha);
    alpha = max_step(lambda_f, dlf, alpha);
    alpha = max_step(zeta, dz, alpha);
    alpha = max_step(gamma, dg, alpha);
    alpha = std::min(1.0, 0.99 * alpha);

    xi += alpha * dxi;
    if (ne > 0) lambda_e += alpha * dle;
    lambda_c += alpha * dlc;
    lambda_f += alpha * dlf;
    gamma += alpha * dg;
    a += alpha * da;
    sigma += alpha * ds;
    zeta += alpha * dz;
  }

  compute_residuals();
  gap_total = a.dot(lambda_c) + sigma.dot(lambda_f) + zeta.dot(gamma);
  diag.iterations = it;
  diag.primal_res = res.inf_norm();
  diag.comp_gap = gap_total;
  if (diag.status != SolveStatus::kSingularKkt &&
      (diag.primal_res > tol || gap_total > tol)) {
    diag.status = SolveStatus::kNonConvergence;
  }

  double margin = 1e30;
  for (int i = 0; i < nc; ++i) margin = std::min(margin, std::max(a[i], lambda_c[i]));
  for (int i = 0; i < nf; ++i) margin = std::min(margin, std::max(sigma[i], lambda_f[i]));
  for (int i = 0; i < nc; ++i) margin = std::min(margin, std::max(zeta[i], gamma[i]));
  diag.strict_margin = margin;

  sol.xi_next = xi;
  sol.lambda_e = lambda_e;
  sol.lambda_c = lambda_c;
  sol.lambda_f = lambda_f;
  sol.gamma = gamma;
  sol.a = a;
  sol.sigma = sigma;
  sol.zeta = zeta;
  return {sol, diag};
}

std::pair<LcpSolution, SolveDiagnostics> solve_with_gradients(const LcpProblem& problem,
                                                              LcpPullback& pullback,
                                                              const LcpSolverOptions& opts,
                                                              double margin_tol) {
  auto [sol, diag] = solve(problem, opts);
  const ConstraintSet& cs = problem.cs;
  const int nv = static_cast<int>(problem.m.rows());
  const int ne = static_cast<int>(cs.j_e.rows());
  const int nc = cs.n_contacts();
  const int nf = 4 * nc;

  pullback.nv_ = nv;
  pullback.ne_ = ne;
  pullback.nc_ = nc;
  pullback.j_c_ = cs.j_c;
  pullback.j_f_ = cs.j_f;
  pullback.e_ = cs.e;
  pullback.m_ = problem.m;
  pullback.xi_t_ = problem.xi_t;
  pullback.mass_ = problem.mass;
  pullback.h_ = problem.h;
  pullback.restitution_ = cs.restitution;
  pullback.approach_gate_ = cs.approach_gate;
  pullback.xi_next_ = sol.xi_next;
  pullback.lambda_c_ = sol.lambda_c;

  if (nc == 0) {
    pullback.analytic_ = true;
    MatX k;
    if (ne == 0) {
      k = problem.m;
    } else {
      k = MatX::Zero(nv + ne, nv + ne);
      k.topLeftCorner(nv, nv) = problem.m;
      k.topRightCorner(nv, ne) = -cs.j_e.transpose();
      k.bottomLeftCorner(ne, nv) = cs.j_e;
    }
    pullback.kkt_lu_.compute(k);
    return {sol, diag};
  }

  if (!diag.ok() || diag.strict_margin < margin_tol) {
    // Active-set boundary (or failed solve): gradient by central differences over the step.
    pullback.analytic_ = false;
    pullback.fd_problem_ = problem;
    pullback.fd_opts_ = opts;
    return {sol, diag};
  }

  // Reduced KKT of the relaxed complementarity system at the solution.
  const int dim = nv + ne + nc + nf + nc;
  const int oxi = 0, oe = nv, oc = nv + ne, of = nv + ne + nc, og = nv + ne + nc + nf;
  MatX kkt = MatX::Zero(dim, dim);
  kkt.block(oxi, oxi, nv, nv) = problem.m;
  if (ne > 0) {
    kkt.block(oxi, oe, nv, ne) = -cs.j_e.transpose();
    kkt.block(oe, oxi, ne, nv) = cs.j_e;
  }
  kkt.block(oxi, oc, nv, nc) = -cs.j_c.transpose();
  kkt.block(oxi, of, nv, nf) = -cs.j_f.transpose();
  kkt.block(oc, oxi, nc, nv) = cs.j_c;
  kkt.block(of, oxi, nf, nv) = cs.j_f;
  kkt.block(of, og, nf, nc) = cs.e;
  kkt.block(og, oc, nc, nc) = cs.mu.asDiagonal();
  kkt.block(og, of, nc, nf) = -cs.e.transpose();
  kkt.block(oc, oc, nc, nc) = (sol.a.array() / sol.lambda_c.array()).matrix().asDiagonal();
  kkt.block(of, of, nf, nf) =
      (sol.sigma.array() / sol.lambda_f.array()).matrix().asDiagonal();
  kkt.block(og, og, nc, nc) = (sol.zeta.array() / sol.gamma.array()).matrix().asDiagonal();
  pullback.analytic_ = true;
  pullback.kkt_lu_.compute(kkt);
  return {sol, diag};
}

LcpGradients LcpPullback::apply(const VecX& upstream) const {
  const int nv = nv_, ne = ne_, nc = nc_, nf = 4 * nc_;
  const int n_bodies = nv / 6;
  LcpGradients g;
  g.d_xi_t = VecX::Zero(nv);
  g.d_f_ext = VecX::Zero(nv);
  g.d_mass = VecX::Zero(n_bodies);
  g.d_mu_contact = VecX::Zero(nc);
  if (upstream.lpNorm<Eigen::Infinity>() == 0.0) return g;

  if (!analytic_) {
    // Central finite differences through full re-solves.
    const double rel = 1e-5;
    auto solve_xi = [&](const LcpProblem& p) { return solve(p, fd_opts_).first.xi_next; };
    for (int b = 0; b < n_bodies; ++b) {
      const double m0 = fd_problem_.mass[b];
      const double dm = rel * std::max(1.0, std::abs(m0));
      LcpProblem plus = fd_problem_, minus = fd_problem_;
      const double s_plus = (m0 + dm) / m0, s_minus = (m0 - dm) / m0;
      plus.m.block(6 * b, 6 * b, 6, 6) *= s_plus;
      minus.m.block(6 * b, 6 * b, 6, 6) *= s_minus;
      plus.mass[b] = m0 + dm;
      minus.mass[b] = m0 - dm;
      plus.q_rhs = plus.m * plus.xi_t + plus.h * plus.f_ext;
      minus.q_rhs = minus.m * minus.xi_t + minus.h * minus.f_ext;
      g.d_mass[b] = upstream.dot(solve_xi(plus) - solve_xi(minus)) / (2.0 * dm);
    }
    // One shared derivative per distinct pair.
    std::map<std::pair<int, int>, double> pair_grad;
    for (int i = 0; i < nc; ++i) pair_grad[{fd_problem_.cs.pair_a[i], fd_problem_.cs.pair_b[i]}] = 0.0;
    for (auto& [key, val] : pair_grad) {
      const double dmu = 1e-6;
      LcpProblem plus = fd_problem_, minus = fd_problem_;
      for (int i = 0; i < nc; ++i) {
        if (fd_problem_.cs.pair_a[i] == key.first && fd_problem_.cs.pair_b[i] == key.second) {
          plus.cs.mu[i] += dmu;
          minus.cs.mu[i] -= dmu;
        }
      }
      val = upstream.dot(solve_xi(plus) - solve_xi(minus)) / (2.0 * dmu);
    }
    for (int i = 0; i < nc; ++i) {
      // Spread the pair derivative over its contacts; downstream re-aggregates by sum.
      const auto key = std::make_pair(fd_problem_.cs.pair_a[i], fd_problem_.cs.pair_b[i]);
      int count = 0;
      for (int j = 0; j < nc; ++j)
        if (fd_problem_.cs.pair_a[j] == key.first && fd_problem_.cs.pair_b[j] == key.second)
          ++count;
      g.d_mu_contact[i] = pair_grad[key] / count;
    }
    for (int k = 0; k < nv; ++k) {
      const double dv = 1e-6;
      LcpProblem plus = fd_problem_, minus = fd_problem_;
      plus.xi_t[k] += dv;
      minus.xi_t[k] -= dv;
      plus.q_rhs = plus.m * plus.xi_t + plus.h * plus.f_ext;
      minus.q_rhs = minus.m * minus.xi_t + minus.h * minus.f_ext;
      // Restitution offsets also depend on xi_t.
      // (Contacts and geometry are frozen; only c is re-derived.)
      auto rebuild_c = [&](LcpProblem& p) {
        for (int i = 0; i < nc; ++i) {
          if (p.cs.approach_gate[i] > 0.0) {
            const double v_n = p.cs.j_c.row(i).dot(p.xi_t);
            const double bias = fd_problem_.cs.c[i] -
                                fd_problem_.cs.restitution *
                                    std::max(0.0, -fd_problem_.cs.j_c.row(i).dot(fd_problem_.xi_t));
            p.cs.c[i] = bias + p.cs.restitution * std::max(0.0, -v_n);
          }
        }
      };
      rebuild_c(plus);
      rebuild_c(minus);
      g.d_xi_t[k] = upstream.dot(solve_xi(plus) - solve_xi(minus)) / (2.0 * dv);
    }
    for (int k = 0; k < nv; ++k) {
      const double df = 1e-6;
      LcpProblem plus = fd_problem_, minus = fd_problem_;
      plus.f_ext[k] += df;
      minus.f_ext[k] -= df;
      plus.q_rhs = plus.m * plus.xi_t + plus.h * plus.f_ext;
      minus.q_rhs = minus.m * minus.xi_t + minus.h * minus.f_ext;
      g.d_f_ext[k] = upstream.dot(solve_xi(plus) - solve_xi(minus)) / (2.0 * df);
    }
    return g;
  }

  // Transposed reduced-KKT solve; see the forward assembly for the block layout.
  const int dim = nv + ne + nc + nf + nc;
  VecX rhs = VecX::Zero(dim);
  rhs.head(nv) = upstream;
  const VecX u = kkt_lu_.transpose().solve(rhs);
  const VecX y1 = u.head(nv);
  const VecX y3 = nc > 0 ? VecX(-u.segment(nv + ne, nc)) : VecX();
  const VecX y5 = nc > 0 ? VecX(-u.tail(nc)) : VecX();

  g.d_xi_t = m_ * y1;
  if (nc > 0 && restitution_ > 0.0) {
    // c_i = k·max(0, −(J_c xi_t)_i): the gate marks rows where the max is active.
    g.d_xi_t += restitution_ * j_c_.transpose() * VecX(approach_gate_.asDiagonal() * y3);
  }
  g.d_f_ext = h_ * y1;
  for (int b = 0; b < n_bodies; ++b) {
    const Vec6 dxi = (xi_next_ - xi_t_).segment<6>(6 * b);
    g.d_mass[b] =
        -y1.segment<6>(6 * b).dot(m_.block(6 * b, 6 * b, 6, 6) * dxi) / mass_[b];
  }
  for (int i = 0; i < nc; ++i) g.d_mu_contact[i] = y5[i] * lambda_c_[i];
  return g;
}

}  // namespace phys
