#pragma once

// Full-order dynamic output-feedback synthesis, conventional and dilated,
// with controller reconstruction from the convexifying variables.

#include "dmi/analysis.hpp"
#include "dmi/synth/common.hpp"

namespace dmi::synth {

struct OfConventionalCert {
  Mat X, Y;  // symmetric, [X I; I Y] > 0
  Mat L, F, E;
  Mat S;  // X - Y^-1
  double gamma = 0.0;
  double alpha = 0.0;
  bool perturbed = false;  // X was nudged to make S invertible

  /// Lyapunov matrix of the closed loop, [X S; S S].
  [[nodiscard]] Mat closed_loop_q() const {
    const Index n = X.rows();
    Mat q(2 * n, 2 * n);
    q << X, S, S, S;
    return q;
  }
};

struct OfDilatedCert {
  Mat R, Y, V, M1, M2, L, E, F;
  double gamma = 0.0;
  double alpha = 0.0;
  Epsilons eps;
  Mat H21, G21;  // G21' H21 = V - R' Y
  // the same certificate in closed-loop coordinates
  Mat X1, X2, G;
};

template <typename Cert>
struct OfResult {
  Cert cert;
  Dynamic controller;
  SolveStats stats;
};

namespace detail {

/// Condition beyond which S or G21 is treated as singular and perturbed.
inline constexpr double kPerturbCondition = 1e10;

inline void verify_level(const Plant& plant, const Dynamic& c, double gamma, const char* what) {
  const ClosedLoop cl = close_loop_of(plant, c);
  if (!(analysis::spectral_abscissa(cl.Acl) < 0.0)) {
    throw Error(ErrorCode::VerificationFailed, std::string(what) + ": reconstructed loop is unstable");
  }
  const double h = analysis::hinf_norm(cl);
  if (!(h <= gamma * (1.0 + 1e-4) + 1e-9)) {
    throw Error(ErrorCode::VerificationFailed, std::string(what) + ": reconstructed loop has H-inf norm " +
                                                   std::to_string(h) + " above " + std::to_string(gamma));
  }
}

/// Rows [I 0] and [0 I] picking the halves of a 2n vector.
inline Mat upper_half(Index n) {
  Mat j = Mat::Zero(n, 2 * n);
  j.leftCols(n).setIdentity();
  return j;
}
inline Mat lower_half(Index n) {
  Mat j = Mat::Zero(n, 2 * n);
  j.rightCols(n).setIdentity();
  return j;
}

}  // namespace detail

/// Lyapunov matrix P = [Y -Y; -Y S^-1 + Y] with S = X - Y^-1, giving
///   [He(AX+B2F)  A+L'         B1          XC1'+F'D12']
///   [    *       He(YA+EC2)   YB1+ED21    C1'         ]
///   [    *          *         -gI         D11'        ] < 0
///   [    *          *          *          -gI         ]
///   [He(AX+B2F)+aX  A+L'+aI       B1      ]        [-X  -I  -F'      ]
///   [     *         He(YA+EC2)+aY YB1+ED21] < 0,   [ *  -Y   0       ] < 0
///   [     *            *          -aI     ]        [ *   *  -u^2/w^2 ]
inline OfResult<OfConventionalCert> synth_of_conventional(const Plant& plant, double alpha,
                                                          const sdp::SolverOptions& opts = {}) {
  using namespace detail;
  plant.validate();
  if (!plant.has_measurement()) throw Error(ErrorCode::DimensionMismatch, "plant has no measurement equation");
  require_positive(alpha, "alpha");
  const Index n = plant.n(), q = plant.q(), m = plant.m(), p = plant.p(), r = plant.r();
  const Mat& A = plant.A;

  lmi::LmiProblem prob;
  const auto Xv = prob.symmetric(n, "X");
  const auto Yv = prob.symmetric(n, "Y");
  const auto Lv = prob.general(n, n, "L");
  const auto Fv = prob.general(m, n, "F");
  const auto Ev = prob.general(n, r, "E");
  const auto g = prob.scalar("gamma");
  const MatExpr X = MatExpr::var(Xv), Y = MatExpr::var(Yv), L = MatExpr::var(Lv);
  const MatExpr F = MatExpr::var(Fv), E = MatExpr::var(Ev);

  const MatExpr pi = lmi::he(A * X + plant.B2 * F);
  const MatExpr lambda = lmi::he(Y * A + E * plant.C2);
  const MatExpr off = L.transpose() + A;
  const MatExpr yb = Y * plant.B1 + E * plant.D21;

  lmi::SymBlocks l2({n, n, q, p});
  l2.set(0, 0, pi);
  l2.set(0, 1, off);
  l2.set(0, 2, plant.B1);
  l2.set(0, 3, X * Mat(plant.C1.transpose()) + F.transpose() * Mat(plant.D12.transpose()));
  l2.set(1, 1, lambda);
  l2.set(1, 2, yb);
  l2.set(1, 3, Mat(plant.C1.transpose()));
  l2.set(2, 2, -gamma_eye(g, q));
  l2.set(2, 3, Mat(plant.D11.transpose()));
  l2.set(3, 3, -gamma_eye(g, p));
  prob.add_lmi(l2.build(), "l2");

  lmi::SymBlocks inv({n, n, q});
  inv.set(0, 0, pi + alpha * X);
  inv.set(0, 1, off + alpha * I(n));
  inv.set(0, 2, plant.B1);
  inv.set(1, 1, lambda + alpha * Y);
  inv.set(1, 2, yb);
  inv.set(2, 2, MatExpr(-alpha * I(q)));
  prob.add_lmi(inv.build(), "invariant");

  lmi::SymBlocks con({n, n, m});
  con.set(0, 0, -X);
  con.set(0, 1, MatExpr(-I(n)));
  con.set(0, 2, -F.transpose());
  con.set(1, 1, -Y);
  con.set(2, 2, MatExpr(-plant.constraint_ratio() * I(m)));
  prob.add_lmi(con.build(), "constraint");

  prob.add_positive(Xv);
  prob.add_positive(Yv);
  prob.minimize(g);

  OfResult<OfConventionalCert> out;
  const lmi::Assignment a = solve_or_throw(prob, opts, out.stats, "of conventional");
  OfConventionalCert& c = out.cert;
  c.X = la::symmetrize(a.at(Xv.id));
  c.Y = la::symmetrize(a.at(Yv.id));
  c.L = a.at(Lv.id);
  c.F = a.at(Fv.id);
  c.E = a.at(Ev.id);
  c.gamma = a.at(g.id)(0, 0);
  c.alpha = alpha;

  Mat Yinv;
  try {
    Yinv = la::inverse(c.Y);
  } catch (const Error& e) {
    throw Error(ErrorCode::SingularS, std::string("Y is singular: ") + e.what());
  }
  c.S = la::symmetrize(c.X - Yinv);
  if (la::condition(c.S) > kPerturbCondition) {
    c.X += 1e-8 * la::norm2(c.X) * I(n);
    c.S = la::symmetrize(c.X - Yinv);
    c.perturbed = true;
  }
  Mat Sinv;
  try {
    Sinv = la::inverse(c.S);
  } catch (const Error& e) {
    throw Error(ErrorCode::SingularS, std::string("S = X - Y^-1 is singular: ") + e.what());
  }
  Dynamic& k = out.controller;
  k.Cc = c.F * Sinv;
  k.Bc = -Yinv * c.E;
  k.Ac = (A - k.Bc * plant.C2) * c.X * Sinv + plant.B2 * k.Cc - Yinv * c.L * Sinv;
  verify_level(plant, k, c.gamma, "of conventional");
  return out;
}

/// Dilated inequalities after the congruence with diag(T'H', I, .., T'H'),
/// T = [R I; G21 0], H = G^-1. With
///   Pi = AR + B2F - R/2,  La = YA + EC2 - Y/2,  Om = A + L' - (I+V)/2,
///   De = -M.1 + R' - 2e Pi,  Ga = -M.2 + V - 2e(A - I/2),
///   Up = -M.2' + I - 2e(L - V'/2),  Si = -M.3 + Y - 2e La
/// the L2 inequality reads
///   [M11+He(Pi)  M12+Om       B1        R'C1'+F'D12'  De1              Ga1        ]
///   [   *        M13+He(La)   YB1+ED21  C1'           Up1              Si1        ]
///   [   *           *         -gI       D11'          0                0          ]
///   [   *           *          *        -gI           -2e1(C1R+D12F)   -2e1 C1    ]
///   [   *           *          *         *            -2e1 He(R)       -2e1 (I+V) ]
///   [   *           *          *         *             *               -2e1 He(Y) ] < 0
/// and the invariant and constraint inequalities follow the same pattern.
inline OfResult<OfDilatedCert> synth_of_dilated(const Plant& plant, double alpha, const Epsilons& eps,
                                                const sdp::SolverOptions& opts = {}) {
  using namespace detail;
  plant.validate();
  if (!plant.has_measurement()) throw Error(ErrorCode::DimensionMismatch, "plant has no measurement equation");
  require_positive(alpha, "alpha");
  require_eps(eps);
  const Index n = plant.n(), q = plant.q(), m = plant.m(), p = plant.p(), r = plant.r();
  const Mat& A = plant.A;
  const Mat In = I(n);

  lmi::LmiProblem prob;
  const auto Rv = prob.general(n, n, "R");
  const auto Yv = prob.symmetric(n, "Y");
  const auto Vv = prob.general(n, n, "V");
  const auto M1v = prob.symmetric(2 * n, "M1");
  const auto M2v = prob.symmetric(2 * n, "M2");
  const auto Lv = prob.general(n, n, "L");
  const auto Ev = prob.general(n, r, "E");
  const auto Fv = prob.general(m, n, "F");
  const auto g = prob.scalar("gamma");
  const MatExpr R = MatExpr::var(Rv), Y = MatExpr::var(Yv), V = MatExpr::var(Vv);
  const MatExpr L = MatExpr::var(Lv), E = MatExpr::var(Ev), F = MatExpr::var(Fv);
  const Mat ju = upper_half(n), jl = lower_half(n);
  const MatExpr M1 = MatExpr::var(M1v), M2 = MatExpr::var(M2v);
  const Mat jut = ju.transpose(), jlt = jl.transpose();
  const MatExpr M11 = ju * M1 * jut, M12 = ju * M1 * jlt, M13 = jl * M1 * jlt;
  const MatExpr M21 = ju * M2 * jut, M22 = ju * M2 * jlt, M23 = jl * M2 * jlt;

  const MatExpr pi = A * R + plant.B2 * F - 0.5 * R;
  const MatExpr la_ = Y * A + E * plant.C2 - 0.5 * Y;
  const MatExpr iv = In + V;
  const MatExpr om = A + L.transpose() - 0.5 * iv;
  const MatExpr yb = Y * plant.B1 + E * plant.D21;
  auto delta = [&](const MatExpr& Mi1, double e) { return -Mi1 + R.transpose() - 2.0 * e * pi; };
  auto gam = [&](const MatExpr& Mi2, double e) { return -Mi2 + V - 2.0 * e * (A - 0.5 * In); };
  auto ups = [&](const MatExpr& Mi2, double e) {
    return -Mi2.transpose() + In - 2.0 * e * (L - 0.5 * V.transpose());
  };
  auto sig = [&](const MatExpr& Mi3, double e) { return -Mi3 + Y - 2.0 * e * la_; };

  {
    const double e1 = eps.e1;
    lmi::SymBlocks b({n, n, q, p, n, n});
    b.set(0, 0, M11 + lmi::he(pi));
    b.set(0, 1, M12 + om);
    b.set(0, 2, plant.B1);
    b.set(0, 3, R.transpose() * Mat(plant.C1.transpose()) + F.transpose() * Mat(plant.D12.transpose()));
    b.set(0, 4, delta(M11, e1));
    b.set(0, 5, gam(M12, e1));
    b.set(1, 1, M13 + lmi::he(la_));
    b.set(1, 2, yb);
    b.set(1, 3, Mat(plant.C1.transpose()));
    b.set(1, 4, ups(M12, e1));
    b.set(1, 5, sig(M13, e1));
    b.set(2, 2, -gamma_eye(g, q));
    b.set(2, 3, Mat(plant.D11.transpose()));
    b.set(3, 3, -gamma_eye(g, p));
    b.set(3, 4, -2.0 * e1 * (plant.C1 * R + plant.D12 * F));
    b.set(3, 5, MatExpr(-2.0 * e1 * plant.C1));
    b.set(4, 4, -2.0 * e1 * lmi::he(R));
    b.set(4, 5, -2.0 * e1 * iv);
    b.set(5, 5, -2.0 * e1 * lmi::he(Y));
    prob.add_lmi(b.build(), "l2");
  }
  {
    const double e2 = eps.e2, ha = 0.5 * alpha;
    lmi::SymBlocks b({n, n, q, n, n});
    b.set(0, 0, M21 + lmi::he(ha * R + pi));
    b.set(0, 1, M22 + ha * iv + om);
    b.set(0, 2, plant.B1);
    b.set(0, 3, delta(M21, e2) - 2.0 * e2 * ha * R);
    b.set(0, 4, gam(M22, e2) - 2.0 * e2 * ha * In);
    b.set(1, 1, M23 + lmi::he(ha * Y + la_));
    b.set(1, 2, yb);
    b.set(1, 3, ups(M22, e2) - 2.0 * e2 * ha * V.transpose());
    b.set(1, 4, sig(M23, e2) - 2.0 * e2 * ha * Y);
    b.set(2, 2, MatExpr(-alpha * I(q)));
    b.set(3, 3, -2.0 * e2 * lmi::he(R));
    b.set(3, 4, -2.0 * e2 * iv);
    b.set(4, 4, -2.0 * e2 * lmi::he(Y));
    prob.add_lmi(b.build(), "invariant");
  }
  {
    const double e3 = eps.e3;
    lmi::SymBlocks b({n, n, m, n, n});
    b.set(0, 0, M21 - lmi::he(R));
    b.set(0, 1, M22 - iv);
    b.set(0, 2, -F.transpose());
    b.set(0, 3, -M21 + R.transpose() + 2.0 * e3 * R);
    b.set(0, 4, -M22 + V + 2.0 * e3 * In);
    b.set(1, 1, M23 - lmi::he(Y));
    b.set(1, 3, -M22.transpose() + In + 2.0 * e3 * V.transpose());
    b.set(1, 4, -M23 + Y + 2.0 * e3 * Y);
    b.set(2, 2, MatExpr(-plant.constraint_ratio() * I(m)));
    b.set(2, 3, 2.0 * e3 * F);
    b.set(3, 3, -2.0 * e3 * lmi::he(R));
    b.set(3, 4, -2.0 * e3 * iv);
    b.set(4, 4, -2.0 * e3 * lmi::he(Y));
    prob.add_lmi(b.build(), "constraint");
  }
  prob.add_positive(M1v);
  prob.add_positive(M2v);
  prob.minimize(g);

  OfResult<OfDilatedCert> out;
  const lmi::Assignment a = solve_or_throw(prob, opts, out.stats, "of dilated");
  OfDilatedCert& c = out.cert;
  c.R = a.at(Rv.id);
  c.Y = la::symmetrize(a.at(Yv.id));
  c.V = a.at(Vv.id);
  c.M1 = la::symmetrize(a.at(M1v.id));
  c.M2 = la::symmetrize(a.at(M2v.id));
  c.L = a.at(Lv.id);
  c.E = a.at(Ev.id);
  c.F = a.at(Fv.id);
  c.gamma = a.at(g.id)(0, 0);
  c.alpha = alpha;
  c.eps = eps;

  // G21' H21 = V - R'Y, preferably with H21 = Y.
  auto factor = [&](const Mat& V) {
    const Mat rhs = V - c.R.transpose() * c.Y;
    if (la::condition(c.Y) < kPerturbCondition) {
      c.H21 = c.Y;
      c.G21 = la::solve_linear(c.Y, rhs.transpose());
    } else {
      c.H21 = In;
      c.G21 = rhs.transpose();
    }
    if (la::condition(c.G21) > kPerturbCondition) throw Error(ErrorCode::SingularG21, "G21 is singular");
  };
  try {
    factor(c.V);
  } catch (const Error&) {
    c.V += 1e-8 * la::norm2(c.V) * In;
    try {
      factor(c.V);
    } catch (const Error& e) {
      throw Error(ErrorCode::SingularG21, std::string("G21 singular after perturbation: ") + e.what());
    }
  }

  const Mat H21it = la::inverse(c.H21.transpose());
  const Mat G21i = la::inverse(c.G21);
  Dynamic& k = out.controller;
  k.Cc = c.F * G21i;
  k.Bc = H21it * c.E;
  k.Ac = H21it * (c.L - c.Y * A * c.R - c.E * plant.C2 * c.R - c.Y * plant.B2 * c.F) * G21i;

  // back to closed-loop coordinates: HT = [I Y; 0 H21], T'H'T = [R I; V' Y]
  Mat ht = Mat::Zero(2 * n, 2 * n);
  ht << In, c.Y, Mat::Zero(n, n), c.H21;
  Mat t(2 * n, 2 * n);
  t << c.R, In, c.G21, Mat::Zero(n, n);
  Mat w(2 * n, 2 * n);
  w << c.R, In, c.V.transpose(), c.Y;
  const Mat hti = la::inverse(ht);
  c.X1 = la::symmetrize(hti.transpose() * c.M1 * hti);
  c.X2 = la::symmetrize(hti.transpose() * c.M2 * hti);
  c.G = t * la::inverse(w.transpose()) * t.transpose();

  verify_level(plant, k, c.gamma, "of dilated");
  return out;
}

}  // namespace dmi::synth
