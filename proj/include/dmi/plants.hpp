#pragma once

// Two-mass spring benchmark used by the reproduction harness.

#include "dmi/system.hpp"

namespace dmi::plants {

/// Two carts coupled by a spring (stiffness k) and damper (f); the actuator
/// pushes cart 1, the disturbance pushes cart 2, performance is the position
/// of cart 2 plus a small control penalty. With output_feedback the two
/// positions are measured.
inline Plant two_mass(double k, double f, double w_max, double u_lim, bool output_feedback) {
  Plant p;
  p.name = output_feedback ? "two_mass_of" : "two_mass_sf";
  p.A = Mat(4, 4);
  p.A << 0, 0, 1, 0,
         0, 0, 0, 1,
         -k, k, -f, f,
         k, -k, f, -f;
  p.B1 = Mat(4, 1);
  p.B1 << 0, 0, 0, 1;
  p.B2 = Mat(4, 1);
  p.B2 << 0, 0, 1, 0;
  p.C1 = Mat(2, 4);
  p.C1 << 0, 1, 0, 0,
          0, 0, 0, 0;
  p.D11 = Mat::Zero(2, 1);
  p.D12 = Mat(2, 1);
  p.D12 << 0, 0.01;
  if (output_feedback) {
    p.C2 = Mat(2, 4);
    p.C2 << 1, 0, 0, 0,
            0, 1, 0, 0;
    p.D21 = Mat::Zero(2, 1);
  } else {
    p.C2 = Mat(0, 4);
    p.D21 = Mat(0, 1);
  }
  p.w_max = w_max;
  p.u_lim = u_lim;
  return p;
}

inline Plant state_feedback_example() { return two_mass(2.0, 0.2, 5.0, 8.0, false); }
inline Plant output_feedback_example() { return two_mass(0.4, 0.04, 5.0, 100.0, true); }

}  // namespace dmi::plants
