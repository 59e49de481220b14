#pragma once

// Shared fixtures: the SDP regression set with known optima and random
// system generators.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "dmi/dmi.hpp"

namespace dmi::test_support {

struct RegressionProblem {
  std::string name;
  lmi::StandardSdp sdp;
  double optimum;  // of c'x
};

/// Compiles with every strictness margin removed so the optimum is exact.
inline lmi::StandardSdp compile_nonstrict(const lmi::LmiProblem& p) {
  lmi::StandardSdp s = lmi::compile(p);
  for (lmi::SdpBlock& b : s.blocks) b.margin = 0.0;
  return s;
}

/// Bounded real problem for one closed loop.
inline lmi::LmiProblem bounded_real_problem(const ClosedLoop& cl) {
  lmi::LmiProblem p;
  const auto Q = p.symmetric(cl.order(), "Q");
  const auto g = p.scalar("gamma");
  p.add_lmi(synth::bounded_real_expr(cl, lmi::MatExpr::var(Q), lmi::MatExpr::scaled_identity(g, cl.Bcl.cols()),
                                     lmi::MatExpr::scaled_identity(g, cl.Ccl.rows())));
  p.add_positive(Q);
  p.minimize(g);
  return p;
}

inline ClosedLoop siso(const Mat& A, const Mat& B, const Mat& C, double D) {
  return {A, B, C, Mat::Constant(1, 1, D)};
}

inline Mat m11(double v) { return Mat::Constant(1, 1, v); }

/// Problems whose optimal value is known in closed form.
inline std::vector<RegressionProblem> regression_set() {
  using lmi::MatExpr;
  std::vector<RegressionProblem> out;
  {
    lmi::LmiProblem p;
    const auto x = p.scalar("x");
    p.add_lmi(m11(1.0) - MatExpr::var(x));
    p.minimize(x);
    out.push_back({"scalar lower bound", compile_nonstrict(p), 1.0});
  }
  {
    lmi::LmiProblem p;
    const auto g = p.scalar("g");
    Mat off(2, 2);
    off << 0, 1, 1, 0;
    p.add_lmi(off - MatExpr::scaled_identity(g, 2));
    p.minimize(g);
    out.push_back({"lambda max of [[0,1],[1,0]]", compile_nonstrict(p), 1.0});
  }
  {
    // min over x of lambda_max(diag(1,3) + x [[0,1],[1,0]]) = 2 + sqrt(1 + x^2)
    lmi::LmiProblem p;
    const auto x = p.scalar("x");
    const auto t = p.scalar("t");
    Mat d(2, 2), off(2, 2);
    d << 1, 0, 0, 3;
    off << 0, 1, 1, 0;
    p.add_lmi(d + off * MatExpr::scaled_identity(x, 2) - MatExpr::scaled_identity(t, 2));
    p.minimize(t);
    out.push_back({"lambda max minimization", compile_nonstrict(p), 3.0});
  }
  {
    Mat s(3, 3);
    s << 2, 1, 0, 1, 2, 1, 0, 1, 2;  // eigenvalues 2 - sqrt2, 2, 2 + sqrt2
    lmi::LmiProblem p;
    const auto t = p.scalar("t");
    p.add_lmi(s - MatExpr::scaled_identity(t, 3));
    p.minimize(t);
    out.push_back({"lambda max of tridiagonal", compile_nonstrict(p), 2.0 + std::sqrt(2.0)});
  }
  {
    // min trace X s.t. X >= A
    Mat a(2, 2);
    a << 2, 1, 1, 2;
    lmi::LmiProblem p;
    const auto X = p.symmetric(2, "X");
    p.add_lmi(a - MatExpr::var(X));
    p.minimize(X, Mat::Identity(2, 2));
    out.push_back({"trace above a matrix", compile_nonstrict(p), 4.0});
  }
  {
    lmi::LmiProblem p;
    const auto x1 = p.scalar("x1");
    const auto x2 = p.scalar("x2");
    p.add_lmi(m11(1.0) - MatExpr::var(x1));
    p.add_lmi(m11(2.0) - MatExpr::var(x2));
    p.minimize(x1);
    p.minimize(x2);
    out.push_back({"linear program", compile_nonstrict(p), 3.0});
  }
  {
    // t >= x^2, x >= 2
    lmi::LmiProblem p;
    const auto t = p.scalar("t");
    const auto x = p.scalar("x");
    lmi::SymBlocks b({1, 1});
    b.set(0, 0, -MatExpr::var(t));
    b.set(0, 1, -MatExpr::var(x));
    b.set(1, 1, m11(-1.0));
    p.add_lmi(b.build());
    p.add_lmi(m11(2.0) - MatExpr::var(x));
    p.minimize(t);
    out.push_back({"schur complement square", compile_nonstrict(p), 4.0});
  }
  {
    // min trace P s.t. A'P + PA + I <= 0 with A = -I: P >= I/2
    lmi::LmiProblem p;
    const auto P = p.symmetric(2, "P");
    const Mat A = -Mat::Identity(2, 2);
    p.add_lmi(lmi::he(Mat(A.transpose()) * MatExpr::var(P)) + Mat::Identity(2, 2));
    p.minimize(P, Mat::Identity(2, 2));
    out.push_back({"lyapunov trace", compile_nonstrict(p), 1.0});
  }
  out.push_back({"bounded real, 1/(s+1)", compile_nonstrict(bounded_real_problem(siso(m11(-1), m11(1), m11(1), 0))),
                 1.0});
  out.push_back({"bounded real, 1/(s+2)", compile_nonstrict(bounded_real_problem(siso(m11(-2), m11(1), m11(1), 0))),
                 0.5});
  out.push_back({"bounded real, 1/(s+1) + 0.5",
                 compile_nonstrict(bounded_real_problem(siso(m11(-1), m11(1), m11(1), 0.5))), 1.5});
  {
    // 1/(s^2 + 2 z s + 1): peak 1 / (2 z sqrt(1 - z^2))
    const double z = 0.1;
    Mat A(2, 2), B(2, 1), C(1, 2);
    A << 0, 1, -1, -2 * z;
    B << 0, 1;
    C << 1, 0;
    out.push_back({"bounded real, resonant", compile_nonstrict(bounded_real_problem(siso(A, B, C, 0))),
                   1.0 / (2 * z * std::sqrt(1 - z * z))});
  }
  return out;
}

inline double objective(const RegressionProblem& p, const sdp::SdpSolution& s) { return p.sdp.c.dot(s.x); }

inline Mat randn(Index r, Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Mat m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = n(rng);
  return m;
}

/// Random stable (A, B, C, D) with spectral abscissa in [-1, -0.1].
inline ClosedLoop random_hurwitz(Index n, Index q, Index p, std::mt19937_64& rng, bool with_d = false) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  Mat A = randn(n, n, rng);
  A -= (analysis::spectral_abscissa(A) + u(rng)) * Mat::Identity(n, n);
  return {A, randn(n, q, rng), randn(p, n, rng), with_d ? Mat(0.3 * randn(p, q, rng)) : Mat::Zero(p, q)};
}

/// Random two-state plant with one disturbance and one input.
inline Plant random_plant2(std::mt19937_64& rng) {
  Plant p;
  p.name = "random2";
  p.A = randn(2, 2, rng);
  p.B1 = randn(2, 1, rng);
  p.B2 = randn(2, 1, rng);
  p.C1 = Mat::Zero(2, 2);
  p.C1.row(0) = randn(1, 2, rng);
  p.D11 = Mat::Zero(2, 1);
  p.D12 = Mat(2, 1);
  p.D12 << 0, 0.1;
  p.C2 = Mat(0, 2);
  p.D21 = Mat(0, 1);
  p.w_max = 1.0;
  p.u_lim = 10.0;
  return p;
}

}  // namespace dmi::test_support
