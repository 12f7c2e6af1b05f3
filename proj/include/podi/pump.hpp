#pragma once

// LVAD pump head-speed-flow relation
//
//   dP = K_A w^2 + K_B w PF + K_C PF^2
//
// in mmHg, rpm and l/min, plus the two operator panels: (dP, w) -> PF, and
// a ramp-test calibration (w, PF) -> dP followed by prediction at new speeds.

#include <vector>

namespace podi::pump {

struct Curve {
  double k_a = 3.45e-6;   // mmHg / rpm^2
  double k_b = -5.9e-5;   // mmHg / (rpm l/min)
  double k_c = -1.45;     // mmHg / (l/min)^2
  double pf_min = 3.0;    // l/min
  double pf_max = 5.0;    // l/min
};

/// Throws InvalidArgument if k_c == 0, the range is empty, or a constant is not finite.
void check(const Curve& curve);

struct OperatingPoint {
  double speed;  // rpm
  double flow;   // l/min
  double head;   // mmHg
};

/// Slack applied at the range ends so exact boundary flows survive rounding.
inline constexpr double kRangeSlack = 1e-9;

double head_from_speed_flow(const Curve& curve, double omega, double pf);

/// Nonnegative root of K_C PF^2 + K_B w PF + (K_A w^2 - dP) = 0, checked
/// against [pf_min, pf_max]. Throws NoRealRoot, FlowOutOfRange (value =
/// computed PF) or AmbiguousRoot.
double flow_from_speed_head(const Curve& curve, double omega, double head);

/// Same root without the range check; still throws NoRealRoot/AmbiguousRoot.
double unchecked_flow_from_speed_head(const Curve& curve, double omega, double head);

struct CurveSample {
  double flow;
  double head;
};

/// n equispaced flows over [pf_min, pf_max] with their heads.
std::vector<CurveSample> curve_samples(const Curve& curve, double omega, int n);

OperatingPoint panel1(const Curve& curve, double head, double omega);

/// Head at the measured (w, PF); measurement flow is not range-checked.
double panel2_calibrate(const Curve& curve, double omega_measured, double pf_measured);

OperatingPoint panel2_predict(const Curve& curve, double head_fixed, double omega_new);

}  // namespace podi::pump
