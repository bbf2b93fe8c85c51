#pragma once

#include "phys/contact.hpp"

#include <Eigen/LU>

#include <memory>

namespace phys {

//! Velocity-stepping mixed LCP:
//!   M xi' − J_eᵀλ_e − J_cᵀλ_c − J_fᵀλ_f = M xi_t + h f_ext
//!   J_e xi' = 0
//!   a = J_c xi' − c ≥ 0  ⊥  λ_c ≥ 0
//!   σ = J_f xi' + E γ ≥ 0  ⊥  λ_f ≥ 0
//!   ζ = diag(μ) λ_c − Eᵀ λ_f ≥ 0  ⊥  γ ≥ 0
struct LcpProblem {
  MatX m;        // 6n x 6n block-diagonal mass-inertia matrix, SPD
  ConstraintSet cs;
  VecX q_rhs;    // M xi_t + h f_ext
  VecX xi_t;     // stacked twists at t (kept for differentiation)
  VecX f_ext;    // stacked external wrenches
  VecX mass;     // per-body mass (M_i is linear in mass_i for derived box inertia)
  double h = 0.0;

  static LcpProblem make(const MatX& m, ConstraintSet cs, const VecX& xi_t, const VecX& f_ext,
                         const VecX& mass, double h) {
    LcpProblem p;
    p.m = m;
    p.cs = std::move(cs);
    p.q_rhs = m * xi_t + h * f_ext;
    p.xi_t = xi_t;
    p.f_ext = f_ext;
    p.mass = mass;
    p.h = h;
    return p;
  }
};

struct LcpSolution {
  VecX xi_next;
  VecX lambda_e, lambda_c, lambda_f, gamma;  // impulse multipliers
  VecX a, sigma, zeta;                       // velocity slacks
};

enum class SolveStatus { kConverged, kNonConvergence, kSingularKkt };

struct SolveDiagnostics {
  int iterations = 0;
  double primal_res = 0.0;    // inf-norm of the affine residuals at the returned iterate
  double comp_gap = 0.0;      // aᵀλ_c + σᵀλ_f + ζᵀγ
  double strict_margin = 0.0; // min over pairs of max(slack, multiplier)
  SolveStatus status = SolveStatus::kConverged;

  bool ok() const { return status == SolveStatus::kConverged; }
};

struct LcpSolverOptions {
  double tol = 1e-10;
  int max_iter = 50;
};

std::pair<LcpSolution, SolveDiagnostics> solve(const LcpProblem& problem,
                                               const LcpSolverOptions& opts = {});

//! Parameter gradients of an upstream scalar through one LCP solve.
struct LcpGradients {
  VecX d_xi_t;        // 6n
  VecX d_f_ext;       // 6n
  VecX d_mass;        // n
  VecX d_mu_contact;  // per contact; aggregate by pair via cs.pair_a/pair_b
};

//! Reverse-mode map at the solution, built by implicit differentiation of the relaxed
//! complementarity system (analytic route) or central finite differences (fallback for
//! degenerate active sets).
class LcpPullback {
 public:
  //! dL/dxi_next -> gradients w.r.t. problem data.
  LcpGradients apply(const VecX& upstream) const;

  bool analytic() const { return analytic_; }

 private:
  friend std::pair<LcpSolution, SolveDiagnostics> solve_with_gradients(const LcpProblem&,
                                                                       LcpPullback&,
                                                                       const LcpSolverOptions&,
                                                                       double);
  bool analytic_ = true;
  int nv_ = 0, ne_ = 0, nc_ = 0;
  Eigen::PartialPivLU<MatX> kkt_lu_;  // factorization of the reduced KKT at the solution
  MatX j_c_, j_f_, e_;
  VecX lambda_c_, xi_next_, xi_t_, mass_, approach_gate_;
  MatX m_;
  double restitution_ = 0.0;
  double h_ = 0.0;
  LcpProblem fd_problem_;  // retained only for the finite-difference route
  LcpSolverOptions fd_opts_;
};

//! Solves and prepares the pullback. Falls back to finite differences when the strict
//! complementarity margin is below `margin_tol` (active-set boundary).
std::pair<LcpSolution, SolveDiagnostics> solve_with_gradients(
    const LcpProblem& problem, LcpPullback& pullback, const LcpSolverOptions& opts = {},
    double margin_tol = 1e-9);

}  // namespace phys
