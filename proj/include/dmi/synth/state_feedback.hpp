#pragma once

// State-feedback synthesis for the saturation-avoiding disturbance
// attenuation problem: L2 gain, invariant ellipsoid, and actuator bound.

#include <limits>
#include <optional>

#include "dmi/synth/common.hpp"

namespace dmi::synth {

struct SfConventionalCert {
  Mat Q;  // common Lyapunov matrix (inverse of the ellipsoid shape)
  Mat Y;  // K Q
  double gamma = 0.0;
  double alpha = 0.0;
};

struct SfDilatedCert {
  Mat X1;  // L2 certificate
  Mat X2;  // invariant-set and constraint certificate
  Mat G;   // common slack
  Mat Y;   // K G
  double gamma = 0.0;
  double alpha = 0.0;
  Epsilons eps;
};

template <typename Cert>
struct SfResult {
  Cert cert;
  StaticGain K;
  SolveStats stats;
};

/// Common Lyapunov matrix Q for all three objectives; K = Y Q^-1.
///   [He(AQ + B2 Y)   B1     QC1' + Y'D12']
///   [      *       -g I         D11'     ]  < 0
///   [      *         *         -g I      ]
///   [He(AQ + B2 Y) + a Q   B1 ]         [-Q   -Y'        ]
///   [        *           -a I ] < 0,    [ *   -u^2/w^2 I ] < 0
inline SfResult<SfConventionalCert> synth_sf_conventional(const Plant& plant, double alpha,
                                                          const sdp::SolverOptions& opts = {}) {
  using namespace detail;
  plant.validate();
  require_positive(alpha, "alpha");
  const Index n = plant.n(), q = plant.q(), m = plant.m(), p = plant.p();

  lmi::LmiProblem prob;
  const auto Qv = prob.symmetric(n, "Q");
  const auto Yv = prob.general(m, n, "Y");
  const auto g = prob.scalar("gamma");
  const MatExpr Q = MatExpr::var(Qv);
  const MatExpr Y = MatExpr::var(Yv);
  const MatExpr pi = lmi::he(plant.A * Q + plant.B2 * Y);

  lmi::SymBlocks l2({n, q, p});
  l2.set(0, 0, pi);
  l2.set(0, 1, plant.B1);
  l2.set(0, 2, Q * Mat(plant.C1.transpose()) + Y.transpose() * Mat(plant.D12.transpose()));
  l2.set(1, 1, -gamma_eye(g, q));
  l2.set(1, 2, Mat(plant.D11.transpose()));
  l2.set(2, 2, -gamma_eye(g, p));
  prob.add_lmi(l2.build(), "l2");

  lmi::SymBlocks inv({n, q});
  inv.set(0, 0, pi + alpha * Q);
  inv.set(0, 1, plant.B1);
  inv.set(1, 1, MatExpr(-alpha * I(q)));
  prob.add_lmi(inv.build(), "invariant");

  lmi::SymBlocks con({n, m});
  con.set(0, 0, -Q);
  con.set(0, 1, -Y.transpose());
  con.set(1, 1, MatExpr(-plant.constraint_ratio() * I(m)));
  prob.add_lmi(con.build(), "constraint");

  prob.add_positive(Qv);
  prob.minimize(g);

  SfResult<SfConventionalCert> out;
  const lmi::Assignment a = solve_or_throw(prob, opts, out.stats, "sf conventional");
  out.cert.Q = la::symmetrize(a.at(Qv.id));
  out.cert.Y = a.at(Yv.id);
  out.cert.gamma = a.at(g.id)(0, 0);
  out.cert.alpha = alpha;
  try {
    out.K.K = la::solve_linear(out.cert.Q.transpose(), out.cert.Y.transpose()).transpose();
  } catch (const Error& e) {
    throw Error(ErrorCode::SingularG, std::string("Q is singular: ") + e.what());
  }
  return out;
}

/// Dilated inequalities with independent X1 (L2) and X2 (invariant set and
/// constraint) and a common slack G; K = Y G^-1. With Pi = AG + B2Y - G/2:
///   L2:   [X1+He(Pi)  B1   G'C1'+Y'D12'   -X1+G'-2e1 Pi        ]
///         [  *       -gI      D11'         0                   ]
///         [  *        *       -gI        -2e1 (C1 G + D12 Y)   ]
///         [  *        *        *         -2e1 He(G)            ] < 0
///   inv:  [X2+He(Pi)+a/2 He(G)  B1  -X2+G'-2e2(Pi + a/2 G)]
///         [  *                -aI          0             ]
///         [  *                 *        -2e2 He(G)        ] < 0
///   con:  [X2-He(G)  -Y'          -X2+G'+2e3 G]
///         [  *      -u^2/w^2 I      2e3 Y     ]
///         [  *        *          -2e3 He(G)   ] < 0
inline SfResult<SfDilatedCert> synth_sf_dilated(const Plant& plant, double alpha, const Epsilons& eps,
                                                const sdp::SolverOptions& opts = {}) {
  using namespace detail;
  plant.validate();
  require_positive(alpha, "alpha");
  require_eps(eps);
  const Index n = plant.n(), q = plant.q(), m = plant.m(), p = plant.p();

  lmi::LmiProblem prob;
  const auto X1v = prob.symmetric(n, "X1");
  const auto X2v = prob.symmetric(n, "X2");
  const auto Gv = prob.general(n, n, "G");
  const auto Yv = prob.general(m, n, "Y");
  const auto g = prob.scalar("gamma");
  const MatExpr X1 = MatExpr::var(X1v);
  const MatExpr X2 = MatExpr::var(X2v);
  const MatExpr G = MatExpr::var(Gv);
  const MatExpr Y = MatExpr::var(Yv);
  const MatExpr pi = plant.A * G + plant.B2 * Y - 0.5 * G;
  const MatExpr cg = plant.C1 * G + plant.D12 * Y;
  const MatExpr heG = lmi::he(G);

  lmi::SymBlocks l2({n, q, p, n});
  l2.set(0, 0, X1 + lmi::he(pi));
  l2.set(0, 1, plant.B1);
  l2.set(0, 2, cg.transpose());
  l2.set(0, 3, -X1 + G.transpose() - 2.0 * eps.e1 * pi);
  l2.set(1, 1, -gamma_eye(g, q));
  l2.set(1, 2, Mat(plant.D11.transpose()));
  l2.set(2, 2, -gamma_eye(g, p));
  l2.set(2, 3, -2.0 * eps.e1 * cg);
  l2.set(3, 3, -2.0 * eps.e1 * heG);
  prob.add_lmi(l2.build(), "l2");

  lmi::SymBlocks inv({n, q, n});
  inv.set(0, 0, X2 + lmi::he(pi) + 0.5 * alpha * heG);
  inv.set(0, 1, plant.B1);
  inv.set(0, 2, -X2 + G.transpose() - 2.0 * eps.e2 * (pi + 0.5 * alpha * G));
  inv.set(1, 1, MatExpr(-alpha * I(q)));
  inv.set(2, 2, -2.0 * eps.e2 * heG);
  prob.add_lmi(inv.build(), "invariant");

  lmi::SymBlocks con({n, m, n});
  con.set(0, 0, X2 - heG);
  con.set(0, 1, -Y.transpose());
  con.set(0, 2, -X2 + G.transpose() + 2.0 * eps.e3 * G);
  con.set(1, 1, MatExpr(-plant.constraint_ratio() * I(m)));
  con.set(1, 2, 2.0 * eps.e3 * Y);
  con.set(2, 2, -2.0 * eps.e3 * heG);
  prob.add_lmi(con.build(), "constraint");

  prob.add_positive(X1v);
  prob.add_positive(X2v);
  prob.minimize(g);

  SfResult<SfDilatedCert> out;
  const lmi::Assignment a = solve_or_throw(prob, opts, out.stats, "sf dilated");
  out.cert.X1 = la::symmetrize(a.at(X1v.id));
  out.cert.X2 = la::symmetrize(a.at(X2v.id));
  out.cert.G = a.at(Gv.id);
  out.cert.Y = a.at(Yv.id);
  out.cert.gamma = a.at(g.id)(0, 0);
  out.cert.alpha = alpha;
  out.cert.eps = eps;
  try {
    out.K.K = la::solve_linear(out.cert.G.transpose(), out.cert.Y.transpose()).transpose();
  } catch (const Error& e) {
    throw Error(ErrorCode::SingularG, std::string("G is singular: ") + e.what());
  }
  return out;
}

/// Largest eigenvalue over the three dilated inequalities evaluated at a
/// numeric certificate; negative means the certificate is strictly valid.
inline double sf_dilated_residual(const Plant& plant, const SfDilatedCert& c) {
  const Index n = plant.n(), q = plant.q(), m = plant.m(), p = plant.p();
  const Epsilons& e = c.eps;
  const Mat In = Mat::Identity(n, n);
  const Mat pi = plant.A * c.G + plant.B2 * c.Y - 0.5 * c.G;
  const Mat cg = plant.C1 * c.G + plant.D12 * c.Y;
  const Mat heG = c.G + c.G.transpose();

  Mat l2 = Mat::Zero(2 * n + q + p, 2 * n + q + p);
  l2.block(0, 0, n, n) = c.X1 + pi + pi.transpose();
  l2.block(0, n, n, q) = plant.B1;
  l2.block(0, n + q, n, p) = cg.transpose();
  l2.block(0, n + q + p, n, n) = -c.X1 + c.G.transpose() - 2.0 * e.e1 * pi;
  l2.block(n, n, q, q) = -c.gamma * Mat::Identity(q, q);
  l2.block(n, n + q, q, p) = plant.D11.transpose();
  l2.block(n + q, n + q, p, p) = -c.gamma * Mat::Identity(p, p);
  l2.block(n + q, n + q + p, p, n) = -2.0 * e.e1 * cg;
  l2.block(n + q + p, n + q + p, n, n) = -2.0 * e.e1 * heG;

  Mat inv = Mat::Zero(2 * n + q, 2 * n + q);
  inv.block(0, 0, n, n) = c.X2 + pi + pi.transpose() + 0.5 * c.alpha * heG;
  inv.block(0, n, n, q) = plant.B1;
  inv.block(0, n + q, n, n) = -c.X2 + c.G.transpose() - 2.0 * e.e2 * (pi + 0.5 * c.alpha * c.G);
  inv.block(n, n, q, q) = -c.alpha * Mat::Identity(q, q);
  inv.block(n + q, n + q, n, n) = -2.0 * e.e2 * heG;

  Mat con = Mat::Zero(2 * n + m, 2 * n + m);
  con.block(0, 0, n, n) = c.X2 - heG;
  con.block(0, n, n, m) = -c.Y.transpose();
  con.block(0, n + m, n, n) = -c.X2 + c.G.transpose() + 2.0 * e.e3 * c.G;
  con.block(n, n, m, m) = -plant.constraint_ratio() * Mat::Identity(m, m);
  con.block(n, n + m, m, n) = 2.0 * e.e3 * c.Y;
  con.block(n + m, n + m, n, n) = -2.0 * e.e3 * heG;

  double worst = -std::numeric_limits<double>::infinity();
  for (Mat* b : {&l2, &inv, &con}) {
    *b = b->triangularView<Eigen::Upper>();
    *b += b->transpose().eval();
    b->diagonal() *= 0.5;
    worst = std::max(worst, la::max_eig(*b));
  }
  return worst;
}

/// Recasts a conventional solution as a dilated one with X1 = X2 = G = Q,
/// shrinking a common eps until every dilated inequality holds strictly.
inline std::optional<SfResult<SfDilatedCert>> embed_sf_conventional(const Plant& plant,
                                                                    const SfResult<SfConventionalCert>& con,
                                                                    double eps_start = 1e-3, double eps_min = 1e-14) {
  SfResult<SfDilatedCert> out;
  out.cert.X1 = out.cert.X2 = out.cert.G = con.cert.Q;
  out.cert.Y = con.cert.Y;
  out.cert.gamma = con.cert.gamma;
  out.cert.alpha = con.cert.alpha;
  out.K = con.K;
  out.stats = con.stats;
  for (double e = eps_start; e >= eps_min; e /= 10.0) {
    out.cert.eps = Epsilons::common(e);
    if (sf_dilated_residual(plant, out.cert) < 0.0) return out;
  }
  return std::nullopt;
}

}  // namespace dmi::synth
