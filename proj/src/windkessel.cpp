#include "podi/windkessel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "podi/error.hpp"

namespace podi::windkessel {

void check(const Params& params) {
  const auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(params.r_proximal) || !positive(params.r_distal) || !positive(params.compliance) ||
      !std::isfinite(params.p_distal)) {
    throw Error(ErrorCode::InvalidArgument,
                "Windkessel resistances and compliance must be positive and finite");
  }
}

State bdf1_step(const State& state, const Params& params, double q, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "time step must be positive");
  const double gain = dt / params.compliance;
  const double p = (state.p_proximal + gain * (q + params.p_distal / params.r_distal)) /
                   (1.0 + dt / params.time_constant());
  return {p, state.time + dt};
}

double outlet_pressure(const State& state, const Params& params, double q) {
  return state.p_proximal + params.r_proximal * q;
}

SteadyState steady_state(const Params& params, double q) {
  const double p_proximal = params.p_distal + params.r_distal * q;
  return {p_proximal, p_proximal + params.r_proximal * q};
}

double SampledFlow::operator()(double t) const {
  if (samples.empty()) throw Error(ErrorCode::InvalidArgument, "empty flow signal");
  if (samples.size() == 1 || t <= t0) return samples.front();
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "flow sample spacing must be positive");
  const double x = (t - t0) / dt;
  const auto last = static_cast<double>(samples.size() - 1);
  if (x >= last) return samples.back();
  const auto i = static_cast<std::size_t>(std::floor(x));
  const double w = x - static_cast<double>(i);
  return (1.0 - w) * samples[i] + w * samples[i + 1];
}

double flow_at(const FlowSignal& signal, double t) {
  return std::visit([t](const auto& f) { return f(t); }, signal);
}

std::vector<TracePoint> simulate(const Params& params, const FlowSignal& flow, double dt,
                                 double t_end, const State& initial) {
  check(params);
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "time step must be positive");
  if (!(t_end > initial.time)) throw Error(ErrorCode::InvalidArgument, "t_end must exceed the initial time");

  // Snap ratios that are integral up to rounding (5 tau / (tau / 10)).
  const double ratio = (t_end - initial.time) / dt;
  const double nearest = std::round(ratio);
  const auto steps = static_cast<std::size_t>(
      std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, ratio) ? nearest : std::ceil(ratio));

  auto sample = [&](double t) {
    const double q = flow_at(flow, t);
    if (!std::isfinite(q)) {
      throw Error(ErrorCode::NonFiniteSignal, "flow rate is not finite at t = " + std::to_string(t), t);
    }
    return q;
  };

  std::vector<TracePoint> trace;
  trace.reserve(steps + 1);
  State state = initial;
  trace.push_back({state.time, state.p_proximal, outlet_pressure(state, params, sample(state.time))});
  for (std::size_t n = 1; n <= steps; ++n) {
    const double t = initial.time + static_cast<double>(n) * dt;
    const double q = sample(t);
    state = bdf1_step(state, params, q, dt);
    state.time = t;
    trace.push_back({t, state.p_proximal, outlet_pressure(state, params, q)});
  }
  return trace;
}

void write_trace_csv(std::ostream& out, const std::vector<TracePoint>& trace) {
  out << "t,p_proximal,p_outlet\n";
  char buf[96];
  for (const auto& p : trace) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.t, p.p_proximal, p.p_outlet);
    out << buf;
  }
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<TracePoint>& trace) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "' for writing");
  write_trace_csv(out, trace);
  if (!out) throw Error(ErrorCode::IoFailure, "write error on '" + path.string() + "'");
}

}  // namespace podi::windkessel
