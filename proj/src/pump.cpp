#include "podi/pump.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "podi/error.hpp"

namespace podi::pump {

namespace {

void require_speed(double omega) {
  if (!(omega > 0.0) || !std::isfinite(omega)) {
    throw Error(ErrorCode::InvalidArgument, "pump speed must be positive and finite", omega);
  }
}

std::string format(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

void check(const Curve& curve) {
  if (!std::isfinite(curve.k_a) || !std::isfinite(curve.k_b) || !std::isfinite(curve.k_c) ||
      !std::isfinite(curve.pf_min) || !std::isfinite(curve.pf_max)) {
    throw Error(ErrorCode::InvalidArgument, "pump constants must be finite");
  }
  if (curve.k_c == 0.0) throw Error(ErrorCode::InvalidArgument, "K_C must be nonzero");
  if (!(curve.pf_min < curve.pf_max)) {
    throw Error(ErrorCode::InvalidArgument, "pump flow range must satisfy pf_min < pf_max");
  }
}

double head_from_speed_flow(const Curve& curve, double omega, double pf) {
  require_speed(omega);
  return curve.k_a * omega * omega + curve.k_b * omega * pf + curve.k_c * pf * pf;
}

double unchecked_flow_from_speed_head(const Curve& curve, double omega, double head) {
  check(curve);
  require_speed(omega);
  const double a = curve.k_c;
  const double b = curve.k_b * omega;
  const double c = curve.k_a * omega * omega - head;
  const double disc = b * b - 4.0 * a * c;
  if (!(disc >= 0.0)) {
    throw Error(ErrorCode::NoRealRoot,
                "no real flow rate for head " + format(head) + " mmHg at " + format(omega) + " rpm");
  }
  // Larger-magnitude root first, the other by Vieta, to avoid cancellation.
  const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
  const double r1 = q / a;
  const double r2 = q != 0.0 ? c / q : r1;
  const bool ok1 = r1 >= 0.0;
  const bool ok2 = r2 >= 0.0;
  if (ok1 && ok2 && r1 != r2) {
    throw Error(ErrorCode::AmbiguousRoot,
                "two nonnegative flow rates (" + format(r1) + ", " + format(r2) + ") l/min");
  }
  if (ok1) return r1;
  if (ok2) return r2;
  const double larger = std::max(r1, r2);
  throw Error(ErrorCode::FlowOutOfRange,
              "computed flow rate " + format(larger) + " l/min is negative", larger);
}

double flow_from_speed_head(const Curve& curve, double omega, double head) {
  double pf = 0.0;
  try {
    pf = unchecked_flow_from_speed_head(curve, omega, head);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::FlowOutOfRange) throw;
    pf = *e.value();
  }
  if (pf < curve.pf_min - kRangeSlack || pf > curve.pf_max + kRangeSlack) {
    throw Error(ErrorCode::FlowOutOfRange,
                "computed flow rate PF = " + format(pf) + " l/min is outside the admissible range [" +
                    format(curve.pf_min) + ", " + format(curve.pf_max) + "] l/min",
                pf);
  }
  return pf;
}

std::vector<CurveSample> curve_samples(const Curve& curve, double omega, int n) {
  check(curve);
  require_speed(omega);
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "curve needs at least two samples");
  std::vector<CurveSample> out;
  out.reserve(static_cast<std::size_t>(n));
  const double step = (curve.pf_max - curve.pf_min) / (n - 1);
  for (int i = 0; i < n; ++i) {
    const double pf = i == n - 1 ? curve.pf_max : curve.pf_min + i * step;
    out.push_back({pf, head_from_speed_flow(curve, omega, pf)});
  }
  return out;
}

OperatingPoint panel1(const Curve& curve, double head, double omega) {
  return {omega, flow_from_speed_head(curve, omega, head), head};
}

double panel2_calibrate(const Curve& curve, double omega_measured, double pf_measured) {
  check(curve);
  if (!std::isfinite(pf_measured)) {
    throw Error(ErrorCode::InvalidArgument, "measured flow rate must be finite");
  }
  return head_from_speed_flow(curve, omega_measured, pf_measured);
}

OperatingPoint panel2_predict(const Curve& curve, double head_fixed, double omega_new) {
  return {omega_new, flow_from_speed_head(curve, omega_new, head_fixed), head_fixed};
}

}  // namespace podi::pump
