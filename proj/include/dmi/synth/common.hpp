#pragma once

#include <array>
#include <string>

#include "dmi/lmi.hpp"
#include "dmi/sdp.hpp"
#include "dmi/system.hpp"

namespace dmi::synth {

using lmi::MatExpr;

/// Dilation scalars for the L2, invariant-set and constraint inequalities.
struct Epsilons {
  double e1 = 0.1;
  double e2 = 0.1;
  double e3 = 0.1;

  static Epsilons common(double e) { return {e, e, e}; }
  [[nodiscard]] std::array<double, 3> as_array() const { return {e1, e2, e3}; }
};

struct SolveStats {
  int solves = 0;
  int iterations = 0;
  double gap = 0.0;
};

namespace detail {

inline Mat I(Index n) { return Mat::Identity(n, n); }
inline Mat Z(Index r, Index c) { return Mat::Zero(r, c); }

inline MatExpr gamma_eye(const lmi::VarRef& g, Index k) { return MatExpr::scaled_identity(g, k); }

/// Solves a compiled problem and returns its variables, or throws
/// Infeasible (any non-optimal status: line searches read it as infeasible).
inline lmi::Assignment solve_or_throw(const lmi::LmiProblem& p, const sdp::SolverOptions& opts,
                                      SolveStats& stats, const std::string& what) {
  const lmi::StandardSdp sdp = lmi::compile(p);
  const sdp::SdpSolution s = sdp::solve(sdp, opts);
  stats.solves += 1;
  stats.iterations += s.iterations;
  stats.gap = s.gap;
  if (s.status != sdp::Status::Optimal) {
    throw Error(ErrorCode::Infeasible, what + ": solver status " + sdp::to_string(s.status));
  }
  return lmi::unpack(sdp, s.x);
}

inline void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw Error(ErrorCode::InvalidArgument, std::string(what) + " must be positive");
  }
}

inline void require_eps(const Epsilons& e) {
  require_positive(e.e1, "eps1");
  require_positive(e.e2, "eps2");
  require_positive(e.e3, "eps3");
}

}  // namespace detail
}  // namespace dmi::synth
