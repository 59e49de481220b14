#pragma once

// Analysis forms of the bounded real lemma and its dilated counterpart,
// together with the selector matrices of the dilation and the mechanical
// (closed-loop coordinate) builders of all three dilated inequalities.

#include "dmi/synth/common.hpp"

namespace dmi::synth {

/// Block rows P, Q with the dilated L2 inequality written as
/// base + He(Q' G P) < 0, and bases of their nullspaces.
struct DilationSelectors {
  Mat P;   // [I 0 0 -2e I]
  Mat Q;   // [Acl' - I/2   0   Ccl'   I]
  Mat NP;  // P NP = 0
  Mat NQ;  // Q NQ = 0
};

inline DilationSelectors build_selectors(const ClosedLoop& cl, double eps1) {
  detail::require_positive(eps1, "eps1");
  const Index n = cl.order(), q = cl.Bcl.cols(), p = cl.Ccl.rows();
  if (cl.Bcl.rows() != n || cl.Ccl.cols() != n || cl.Dcl.rows() != p || cl.Dcl.cols() != q) {
    throw Error(ErrorCode::DimensionMismatch, "inconsistent closed-loop realization");
  }
  const Index N = n + q + p + n;
  const Mat In = Mat::Identity(n, n);
  DilationSelectors s;
  s.P = Mat::Zero(n, N);
  s.P.leftCols(n) = In;
  s.P.rightCols(n) = -2.0 * eps1 * In;

  s.Q = Mat::Zero(n, N);
  s.Q.leftCols(n) = cl.Acl.transpose() - 0.5 * In;
  s.Q.block(0, n + q, n, p) = cl.Ccl.transpose();
  s.Q.rightCols(n) = In;

  s.NP = Mat::Zero(N, n + q + p);
  s.NP.topRows(n + q + p).setIdentity();
  s.NP.block(n + q + p, 0, n, n) = In / (2.0 * eps1);

  s.NQ = Mat::Zero(N, n + q + p);
  s.NQ.topRows(n + q + p).setIdentity();
  s.NQ.block(n + q + p, 0, n, n) = -cl.Acl.transpose() + 0.5 * In;
  s.NQ.block(n + q + p, n + q, n, p) = -cl.Ccl.transpose();
  return s;
}

/// Bounded real inequality
///   [AQ + QA'  B    QC']
///   [   *     -gI   D' ]  < 0
///   [   *      *   -gI ]
inline lmi::MatExpr bounded_real_expr(const ClosedLoop& cl, const lmi::MatExpr& Q,
                                      const lmi::MatExpr& g_q, const lmi::MatExpr& g_p) {
  const Index n = cl.order(), q = cl.Bcl.cols(), p = cl.Ccl.rows();
  lmi::SymBlocks b({n, q, p});
  b.set(0, 0, lmi::he(cl.Acl * Q));
  b.set(0, 1, cl.Bcl);
  b.set(0, 2, Q * Mat(cl.Ccl.transpose()));
  b.set(1, 1, -g_q);
  b.set(1, 2, Mat(cl.Dcl.transpose()));
  b.set(2, 2, -g_p);
  return b.build();
}

/// Dilated L2 inequality in closed-loop coordinates.
inline lmi::MatExpr dilated_l2_expr(const ClosedLoop& cl, const lmi::MatExpr& X1, const lmi::MatExpr& G,
                                    const lmi::MatExpr& g_q, const lmi::MatExpr& g_p, double eps1) {
  const Index n = cl.order(), q = cl.Bcl.cols(), p = cl.Ccl.rows();
  const DilationSelectors s = build_selectors(cl, eps1);
  lmi::SymBlocks base({n, q, p, n});
  base.set(0, 0, X1);
  base.set(0, 1, cl.Bcl);
  base.set(0, 3, -X1);
  base.set(1, 1, -g_q);
  base.set(1, 2, Mat(cl.Dcl.transpose()));
  base.set(2, 2, -g_p);
  return base.build() + lmi::he(Mat(s.Q.transpose()) * G * s.P);
}

/// Dilated invariant-set inequality, P = [I 0 -2e I], Q = [A^' - I/2  0  I]
/// with A^ = Acl + a/2 I.
inline lmi::MatExpr dilated_invariant_expr(const ClosedLoop& cl, const lmi::MatExpr& X2,
                                           const lmi::MatExpr& G, double alpha, double eps2) {
  const Index n = cl.order(), q = cl.Bcl.cols();
  const Mat In = Mat::Identity(n, n);
  Mat P = Mat::Zero(n, 2 * n + q);
  P.leftCols(n) = In;
  P.rightCols(n) = -2.0 * eps2 * In;
  Mat Qs = Mat::Zero(n, 2 * n + q);
  Qs.leftCols(n) = (cl.Acl + 0.5 * alpha * In).transpose() - 0.5 * In;
  Qs.rightCols(n) = In;
  lmi::SymBlocks base({n, q, n});
  base.set(0, 0, X2);
  base.set(0, 1, cl.Bcl);
  base.set(0, 2, -X2);
  base.set(1, 1, Mat(-alpha * Mat::Identity(q, q)));
  return base.build() + lmi::he(Mat(Qs.transpose()) * G * P);
}

/// Dilated actuator-constraint inequality, P = [I 0 -2e I], Q = [-I -K' I].
inline lmi::MatExpr dilated_constraint_expr(const Mat& gain, const lmi::MatExpr& X3, const lmi::MatExpr& G,
                                            double ratio, double eps3) {
  const Index n = gain.cols(), m = gain.rows();
  const Mat In = Mat::Identity(n, n);
  Mat P = Mat::Zero(n, 2 * n + m);
  P.leftCols(n) = In;
  P.rightCols(n) = -2.0 * eps3 * In;
  Mat Qs = Mat::Zero(n, 2 * n + m);
  Qs.leftCols(n) = -In;
  Qs.block(0, n, n, m) = -gain.transpose();
  Qs.rightCols(n) = In;
  lmi::SymBlocks base({n, m, n});
  base.set(0, 0, X3);
  base.set(0, 2, -X3);
  base.set(1, 1, Mat(-ratio * Mat::Identity(m, m)));
  return base.build() + lmi::he(Mat(Qs.transpose()) * G * P);
}

inline void require_stable(const ClosedLoop& cl) {
  const Eigen::VectorXcd ev = la::eigenvalues(cl.Acl);
  double a = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < ev.size(); ++i) a = std::max(a, ev[i].real());
  if (!(a < 0.0)) throw Error(ErrorCode::Unstable, "closed loop is not Hurwitz");
}

struct BoundedRealResult {
  double gamma = 0.0;
  Mat Q1;
  SolveStats stats;
};

/// Smallest gamma certified by the bounded real inequality.
inline BoundedRealResult bounded_real_gamma(const ClosedLoop& cl, const sdp::SolverOptions& opts = {}) {
  require_stable(cl);
  lmi::LmiProblem prob;
  const auto Qv = prob.symmetric(cl.order(), "Q1");
  const auto g = prob.scalar("gamma");
  prob.add_lmi(bounded_real_expr(cl, MatExpr::var(Qv), detail::gamma_eye(g, cl.Bcl.cols()),
                                 detail::gamma_eye(g, cl.Ccl.rows())),
               "bounded real");
  prob.add_positive(Qv);
  prob.minimize(g);
  BoundedRealResult out;
  lmi::Assignment a;
  try {
    a = detail::solve_or_throw(prob, opts, out.stats, "bounded real");
  } catch (const Error& e) {
    throw Error(ErrorCode::SolverFailure, e.what());
  }
  out.gamma = a.at(g.id)(0, 0);
  out.Q1 = la::symmetrize(a.at(Qv.id));
  return out;
}

struct DilatedBoundedRealResult {
  double gamma = 0.0;
  Mat X1;
  Mat G;
  SolveStats stats;
};

/// Smallest gamma certified by the dilated L2 inequality at a fixed eps1.
inline DilatedBoundedRealResult dilated_bounded_real_gamma(const ClosedLoop& cl, double eps1,
                                                           const sdp::SolverOptions& opts = {}) {
  detail::require_positive(eps1, "eps1");
  const Index n = cl.order();
  lmi::LmiProblem prob;
  const auto X1v = prob.symmetric(n, "X1");
  const auto Gv = prob.general(n, n, "G1");
  const auto g = prob.scalar("gamma");
  prob.add_lmi(dilated_l2_expr(cl, MatExpr::var(X1v), MatExpr::var(Gv), detail::gamma_eye(g, cl.Bcl.cols()),
                               detail::gamma_eye(g, cl.Ccl.rows()), eps1),
               "dilated l2");
  prob.add_positive(X1v);
  prob.minimize(g);
  DilatedBoundedRealResult out;
  lmi::Assignment a;
  try {
    a = detail::solve_or_throw(prob, opts, out.stats, "dilated bounded real");
  } catch (const Error& e) {
    throw Error(ErrorCode::InfeasibleAtEpsilon, e.what());
  }
  out.gamma = a.at(g.id)(0, 0);
  out.X1 = la::symmetrize(a.at(X1v.id));
  out.G = a.at(Gv.id);
  return out;
}

}  // namespace dmi::synth
