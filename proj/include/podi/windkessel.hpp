#pragma once

// Three-element (RCR) Windkessel outlet model in CGS units:
//
//   C dp_p/dt + (p_p - p_d) / R_d = Q
//   p - p_p = R_p Q
//
// The algebraic line is eliminated, leaving one scalar ODE in the proximal
// pressure p_p, integrated with implicit Euler (BDF1).

#include <filesystem>
#include <functional>
#include <ostream>
#include <variant>
#include <vector>

namespace podi::windkessel {

inline constexpr double kDynePerCm2PerMmHg = 1333.22;
inline constexpr double kCm3PerSecondPerLitrePerMinute = 1000.0 / 60.0;

inline double mmhg_from_dyne_per_cm2(double p) { return p / kDynePerCm2PerMmHg; }
inline double dyne_per_cm2_from_mmhg(double p) { return p * kDynePerCm2PerMmHg; }
inline double cm3_per_s_from_l_per_min(double q) { return q * kCm3PerSecondPerLitrePerMinute; }
inline double l_per_min_from_cm3_per_s(double q) { return q / kCm3PerSecondPerLitrePerMinute; }

struct Params {
  double r_proximal;  // dyne s / cm^5
  double r_distal;    // dyne s / cm^5
  double compliance;  // cm^5 / dyne
  double p_distal = 0.0;  // dyne / cm^2

  double time_constant() const { return r_distal * compliance; }
};

/// Throws InvalidArgument unless resistances and compliance are positive and finite.
void check(const Params& params);

struct State {
  double p_proximal = 0.0;  // dyne / cm^2
  double time = 0.0;        // s
};

/// Outlet constants used for the aortic model (CGS).
namespace outlets {
inline constexpr Params kRightSubclavian{2.56e3, 4.32e4, 3.26e-5};
inline constexpr Params kRightCommonCarotid{1.63e3, 2.74e4, 5.16e-5};
inline constexpr Params kLeftCommonCarotid{2.38e3, 4.0e4, 3.52e-5};
inline constexpr Params kLeftSubclavian{8.96e2, 1.51e4, 9.35e-5};
inline constexpr Params kDescendingAorta{1.08e2, 1.83e3, 7.72e-4};
}  // namespace outlets

/// One implicit Euler step with the flow rate q taken at the new time level.
State bdf1_step(const State& state, const Params& params, double q, double dt);

/// p = p_p + R_p Q.
double outlet_pressure(const State& state, const Params& params, double q);

struct SteadyState {
  double p_proximal;
  double p_outlet;
};

SteadyState steady_state(const Params& params, double q);

/// Uniformly sampled flow rate, linearly interpolated and held constant
/// beyond the first/last sample.
struct SampledFlow {
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<double> samples;

  double operator()(double t) const;
};

using FlowSignal = std::variant<SampledFlow, std::function<double(double)>>;

double flow_at(const FlowSignal& signal, double t);

struct TracePoint {
  double t;
  double p_proximal;
  double p_outlet;
};

/// ceil((t_end - t0)/dt) uniform steps; the returned trace includes the
/// initial state. Throws NonFiniteSignal if the flow is ever NaN/Inf.
std::vector<TracePoint> simulate(const Params& params, const FlowSignal& flow, double dt,
                                 double t_end, const State& initial);

/// CSV with header "t,p_proximal,p_outlet", 17 significant digits.
void write_trace_csv(std::ostream& out, const std::vector<TracePoint>& trace);
void write_trace_csv(const std::filesystem::path& path, const std::vector<TracePoint>& trace);

}  // namespace podi::windkessel
