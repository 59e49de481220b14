#pragma once

// Plant, controller, and closed-loop realizations.
//
//   plant:       x' = A x + B1 w + B2 u,  z = C1 x + D11 w + D12 u,  y = C2 x + D21 w
//   closed loop: x' = Acl x + Bcl w,      z = Ccl x + Dcl w

#include <cmath>
#include <string>
#include <variant>

#include "dmi/densela.hpp"

namespace dmi {

struct Plant {
  std::string name;
  Mat A, B1, B2, C1, D11, D12;
  Mat C2, D21;  // may have zero rows for state-feedback-only plants
  double w_max = 1.0;
  double u_lim = 1.0;

  [[nodiscard]] Index n() const { return A.rows(); }
  [[nodiscard]] Index q() const { return B1.cols(); }  // disturbances
  [[nodiscard]] Index m() const { return B2.cols(); }  // inputs
  [[nodiscard]] Index p() const { return C1.rows(); }  // performance outputs
  [[nodiscard]] Index r() const { return C2.rows(); }  // measurements
  [[nodiscard]] bool has_measurement() const { return C2.rows() > 0; }

  /// u_lim^2 / w_max^2, the right-hand side of the actuator constraint.
  [[nodiscard]] double constraint_ratio() const { return (u_lim * u_lim) / (w_max * w_max); }

  void validate() const {
    auto expect = [](const Mat& m, Index r, Index c, const char* what) {
      if (m.rows() != r || m.cols() != c) {
        throw Error(ErrorCode::DimensionMismatch,
                    std::string(what) + " is " + std::to_string(m.rows()) + "x" +
                        std::to_string(m.cols()) + ", expected " + std::to_string(r) + "x" +
                        std::to_string(c));
      }
      la::require_finite(m, what);
    };
    la::require_square(A, "A");
    const Index nn = n();
    expect(B1, nn, B1.cols(), "B1");
    expect(B2, nn, B2.cols(), "B2");
    expect(C1, C1.rows(), nn, "C1");
    expect(D11, p(), q(), "D11");
    expect(D12, p(), m(), "D12");
    if (has_measurement()) {
      expect(C2, C2.rows(), nn, "C2");
      expect(D21, r(), q(), "D21");
    }
    if (!(w_max > 0.0) || !std::isfinite(w_max) || !(u_lim > 0.0) || !std::isfinite(u_lim)) {
      throw Error(ErrorCode::InvalidArgument, "w_max and u_lim must be finite and positive");
    }
  }
};

struct StaticGain {
  Mat K;  // m x n, u = K x
};

/// x_c' = Ac x_c + Bc y, u = Cc x_c (no feedthrough).
struct Dynamic {
  Mat Ac, Bc, Cc;
};

using Controller = std::variant<StaticGain, Dynamic>;

struct ClosedLoop {
  Mat Acl, Bcl, Ccl, Dcl;

  [[nodiscard]] Index order() const { return Acl.rows(); }
};

inline ClosedLoop close_loop_sf(const Plant& plant, const StaticGain& k) {
  if (k.K.rows() != plant.m() || k.K.cols() != plant.n()) {
    throw Error(ErrorCode::DimensionMismatch, "gain must be " + std::to_string(plant.m()) + "x" +
                                                  std::to_string(plant.n()));
  }
  return {plant.A + plant.B2 * k.K, plant.B1, plant.C1 + plant.D12 * k.K, plant.D11};
}

inline ClosedLoop close_loop_of(const Plant& plant, const Dynamic& c) {
  const Index n = plant.n();
  if (!plant.has_measurement()) {
    throw Error(ErrorCode::DimensionMismatch, "plant has no measurement equation");
  }
  if (c.Ac.rows() != n || c.Ac.cols() != n || c.Bc.rows() != n || c.Bc.cols() != plant.r() ||
      c.Cc.rows() != plant.m() || c.Cc.cols() != n) {
    throw Error(ErrorCode::DimensionMismatch, "compensator order must equal plant order");
  }
  ClosedLoop cl;
  cl.Acl = Mat::Zero(2 * n, 2 * n);
  cl.Acl << plant.A, plant.B2 * c.Cc, c.Bc * plant.C2, c.Ac;
  cl.Bcl = Mat(2 * n, plant.q());
  cl.Bcl << plant.B1, c.Bc * plant.D21;
  cl.Ccl = Mat(plant.p(), 2 * n);
  cl.Ccl << plant.C1, plant.D12 * c.Cc;
  cl.Dcl = plant.D11;
  return cl;
}

inline ClosedLoop close_loop(const Plant& plant, const Controller& c) {
  return std::visit(
      [&](const auto& k) {
        if constexpr (std::is_same_v<std::decay_t<decltype(k)>, StaticGain>) return close_loop_sf(plant, k);
        else return close_loop_of(plant, k);
      },
      c);
}

/// Gain mapping the closed-loop state to the actuator signal.
inline Mat control_gain(const Plant& plant, const Controller& c) {
  if (const auto* k = std::get_if<StaticGain>(&c)) return k->K;
  const Dynamic& d = std::get<Dynamic>(c);
  Mat g = Mat::Zero(plant.m(), 2 * plant.n());
  g.rightCols(plant.n()) = d.Cc;
  return g;
}

}  // namespace dmi
