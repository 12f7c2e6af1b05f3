// podi: command-line front end for synthesis, training, validation,
// evaluation, pump calculations, Windkessel traces and the HTTP service.

#include <pthread.h>
#include <signal.h>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "podi/pipeline.hpp"
#include "podi/pump.hpp"
#include "podi/service.hpp"
#include "podi/snapshot_io.hpp"
#include "podi/synthetic.hpp"
#include "podi/windkessel.hpp"

namespace {

using nlohmann::json;
using podi::Index;

std::string fmt(double v, int digits = 6) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

podi::Matrix<double> column(const std::vector<double>& values) {
  podi::Matrix<double> m(static_cast<Index>(values.size()), 1);
  for (std::size_t i = 0; i < values.size(); ++i) m(static_cast<Index>(i), 0) = values[i];
  return m;
}

podi::Vector<double> point(const std::vector<double>& values) {
  return Eigen::Map<const podi::Vector<double>>(values.data(), static_cast<Index>(values.size()));
}

json to_json(const podi::Vector<double>& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw podi::Error(podi::ErrorCode::IoFailure, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct SynthArgs {
  std::string spec_path;
  std::string preset = "lvad";
  Index n_dof = 2000;
  std::vector<double> params;
  std::uint64_t seed = 20200101;
  double noise = 0.0;
  std::string out;
};

struct TrainArgs {
  std::string snapshots;
  std::string out;
  double energy = 0.99;
  std::vector<std::string> ranks;
  double shape = 0.0;
  double ridge = 0.0;
  bool no_normalize = false;
  std::vector<std::string> ranges;
};

struct EvalArgs {
  std::string model;
  std::string field;
  std::vector<double> param;
  std::string out;
};

struct PumpArgs {
  double omega = 0.0;
  double pf = 0.0;
  double dp = 0.0;
  int n = 11;
  podi::pump::Curve curve;
};

struct WindkesselArgs {
  std::string outlet = "descending-aorta";
  double rp = 0.0, rd = 0.0, c = 0.0, pd = 0.0;
  double flow = 80.0;
  std::string flow_csv;
  double flow_dt = 0.0;
  double dt = 1e-3;
  double t_end = 1.0;
  std::optional<double> p0;
  std::string out;
};

podi::windkessel::Params outlet_params(const WindkesselArgs& a) {
  using namespace podi::windkessel::outlets;
  static const std::map<std::string, podi::windkessel::Params> table = {
      {"right-subclavian", kRightSubclavian},
      {"right-common-carotid", kRightCommonCarotid},
      {"left-common-carotid", kLeftCommonCarotid},
      {"left-subclavian", kLeftSubclavian},
      {"descending-aorta", kDescendingAorta},
  };
  podi::windkessel::Params p{};
  if (a.rp > 0.0 || a.rd > 0.0 || a.c > 0.0) {
    p = {a.rp, a.rd, a.c};
  } else {
    auto it = table.find(a.outlet);
    if (it == table.end()) throw podi::Error(podi::ErrorCode::InvalidArgument, "unknown outlet '" + a.outlet + "'");
    p = it->second;
  }
  p.p_distal = a.pd;
  podi::windkessel::check(p);
  return p;
}

void print_pump_error_hint(const podi::Error& e, const podi::pump::Curve& curve) {
  if (e.code() == podi::ErrorCode::FlowOutOfRange) {
    std::cerr << "the application is valid only for PF in [" << fmt(curve.pf_min) << ", "
              << fmt(curve.pf_max) << "] l/min\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Non-intrusive POD + RBF reduced-order modelling toolkit"};
  app.require_subcommand(1);
  bool as_json = false;
  app.add_flag("--json", as_json, "Machine-readable JSON output");

  // synth
  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic snapshot set");
  synth_cmd->add_option("--spec", synth.spec_path, "JSON manifold spec (overrides --preset)");
  synth_cmd->add_option("--preset", synth.preset, "Built-in manifold")->check(CLI::IsMember({"lvad"}));
  synth_cmd->add_option("--n-dof", synth.n_dof, "Degrees of freedom per field (preset)")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--params", synth.params, "Parameter samples (preset; default gapped [3,3.8] u [4.2,5])")->delimiter(',');
  auto* seed_opt = synth_cmd->add_option("--seed", synth.seed, "Generator seed");
  auto* noise_opt = synth_cmd->add_option("--noise", synth.noise, "Uniform noise amplitude")->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--out", synth.out, "Output snapshot directory")->required();

  // import
  std::string import_params, import_out;
  std::vector<std::string> import_fields;
  auto* import_cmd = app.add_subcommand("import", "Build a snapshot set from CSV files");
  import_cmd->add_option("--params", import_params, "CSV with one parameter point per row")->required();
  import_cmd->add_option("--field", import_fields, "label=path.csv (one snapshot per column)")->required();
  import_cmd->add_option("--out", import_out, "Output snapshot directory")->required();

  // train
  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a PODI model (offline stage)");
  train_cmd->add_option("--snapshots", train.snapshots, "Snapshot set directory")->required();
  train_cmd->add_option("--out", train.out, "Output model file")->required();
  train_cmd->add_option("--energy", train.energy, "Retained energy threshold in (0, 1]");
  train_cmd->add_option("--rank", train.ranks, "Rank override field=k (repeatable)");
  train_cmd->add_option("--shape", train.shape, "Gaussian shape parameter (default 1/mean distance)");
  train_cmd->add_option("--ridge", train.ridge, "Ridge added to the kernel diagonal")->check(CLI::NonNegativeNumber);
  train_cmd->add_flag("--no-normalize", train.no_normalize, "Do not rescale parameters to [0,1]");
  train_cmd->add_option("--range", train.ranges, "Declared admissible range lo:hi per coordinate (repeatable)");

  // validate
  std::string val_model, val_heldout;
  auto* val_cmd = app.add_subcommand("validate", "Relative L2 errors on held-out snapshots");
  val_cmd->add_option("--model", val_model, "Model file")->required();
  val_cmd->add_option("--heldout", val_heldout, "Held-out snapshot directory")->required();

  // evaluate
  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "Reconstruct a field at a new parameter (online stage)");
  eval_cmd->add_option("--model", ev.model, "Model file")->required();
  eval_cmd->add_option("--field", ev.field, "Field label")->required();
  eval_cmd->add_option("--param", ev.param, "Parameter coordinates")->required()->delimiter(',');
  eval_cmd->add_option("--out", ev.out, "Write the full field, one value per line");

  // pump
  PumpArgs pa;
  auto* pump_cmd = app.add_subcommand("pump", "LVAD pump head-speed-flow calculations");
  pump_cmd->require_subcommand(1);
  pump_cmd->add_option("--ka", pa.curve.k_a, "K_A [mmHg/rpm^2]");
  pump_cmd->add_option("--kb", pa.curve.k_b, "K_B [mmHg/(rpm l/min)]");
  pump_cmd->add_option("--kc", pa.curve.k_c, "K_C [mmHg/(l/min)^2]");
  pump_cmd->add_option("--pf-min", pa.curve.pf_min, "Admissible flow lower bound [l/min]");
  pump_cmd->add_option("--pf-max", pa.curve.pf_max, "Admissible flow upper bound [l/min]");
  auto* fwd = pump_cmd->add_subcommand("forward", "dP from (omega, PF)");
  fwd->add_option("--omega", pa.omega, "rpm")->required();
  fwd->add_option("--pf", pa.pf, "l/min")->required();
  auto* inv = pump_cmd->add_subcommand("inverse", "PF from (omega, dP)  [panel 1]");
  inv->add_option("--omega", pa.omega, "rpm")->required();
  inv->add_option("--dp", pa.dp, "mmHg")->required();
  auto* cal = pump_cmd->add_subcommand("calibrate", "dP from measured (omega, PF)  [panel 2]");
  cal->add_option("--omega", pa.omega, "rpm")->required();
  cal->add_option("--pf", pa.pf, "l/min")->required();
  auto* crv = pump_cmd->add_subcommand("curve", "Sample the dP-PF curve at fixed omega");
  crv->add_option("--omega", pa.omega, "rpm")->required();
  crv->add_option("--n", pa.n, "Number of samples")->check(CLI::Range(2, 100000));

  // windkessel
  WindkesselArgs wk;
  auto* wk_cmd = app.add_subcommand("windkessel", "Simulate a three-element Windkessel outlet (CGS units)");
  wk_cmd->add_option("--outlet", wk.outlet, "Built-in outlet constants");
  wk_cmd->add_option("--rp", wk.rp, "Proximal resistance [dyne s/cm^5]");
  wk_cmd->add_option("--rd", wk.rd, "Distal resistance [dyne s/cm^5]");
  wk_cmd->add_option("--c", wk.c, "Compliance [cm^5/dyne]");
  wk_cmd->add_option("--pd", wk.pd, "Distal pressure [dyne/cm^2]");
  wk_cmd->add_option("--flow", wk.flow, "Constant flow rate [cm^3/s]");
  wk_cmd->add_option("--flow-csv", wk.flow_csv, "Sampled flow rate, one value per line [cm^3/s]");
  wk_cmd->add_option("--flow-dt", wk.flow_dt, "Sample spacing of --flow-csv [s]");
  wk_cmd->add_option("--dt", wk.dt, "Time step [s]")->check(CLI::PositiveNumber);
  wk_cmd->add_option("--t-end", wk.t_end, "End time [s]")->check(CLI::PositiveNumber);
  wk_cmd->add_option("--p0", wk.p0, "Initial proximal pressure (default: steady state)");
  wk_cmd->add_option("--out", wk.out, "Trace CSV (default stdout)");

  // serve
  podi::service::Config cfg;
  std::string model_dir;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  serve_cmd->add_option("--model-dir", model_dir, "Directory of *.podi models to preload")->envname("PODI_MODEL_DIR");
  serve_cmd->add_option("--host", cfg.host, "Bind address")->envname("PODI_HOST");
  serve_cmd->add_option("--port", cfg.port, "Port (0 = any)")->envname("PODI_PORT");
  serve_cmd->add_option("--max-payload", cfg.max_payload_bytes, "Maximum request body in bytes")->envname("PODI_MAX_PAYLOAD");
  serve_cmd->add_option("--threads", cfg.threads, "Request worker threads")->envname("PODI_THREADS")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth_cmd) {
      podi::SyntheticManifoldSpec spec;
      if (!synth.spec_path.empty()) {
        spec = podi::parse_synthetic_spec(read_text(synth.spec_path));
        if (*seed_opt) spec.seed = synth.seed;
        if (*noise_opt) spec.noise_amplitude = synth.noise;
      } else {
        auto samples = synth.params.empty() ? podi::gapped_pump_flow_samples() : column(synth.params);
        spec = podi::lvad_like_spec(std::move(samples), synth.n_dof, synth.seed);
        spec.noise_amplitude = synth.noise;
      }
      const auto generated = podi::generate_synthetic_set(spec);
      podi::write_snapshot_set(generated.set, synth.out);
      if (as_json) {
        json fields = json::array();
        for (const auto& f : generated.set.fields) fields.push_back({{"label", f.field_name}, {"n_dof", f.n_dof()}});
        std::cout << json{{"out", synth.out}, {"n_snapshots", generated.set.n_snapshots()}, {"fields", fields}}.dump() << "\n";
      } else {
        std::cout << "wrote " << generated.set.n_snapshots() << " snapshots of " << generated.set.fields.size()
                  << " fields to " << synth.out << "\n";
      }
    } else if (*import_cmd) {
      std::vector<std::pair<std::string, std::filesystem::path>> fields;
      for (const auto& spec : import_fields) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) throw podi::Error(podi::ErrorCode::InvalidArgument, "expected label=path, got '" + spec + "'");
        fields.emplace_back(spec.substr(0, eq), spec.substr(eq + 1));
      }
      const auto set = podi::import_csv(import_params, fields);
      podi::write_snapshot_set(set, import_out);
      std::cout << "wrote " << set.n_snapshots() << " snapshots to " << import_out << "\n";
    } else if (*train_cmd) {
      podi::TrainingOptions options;
      options.energy_threshold = train.energy;
      for (const auto& r : train.ranks) {
        const auto eq = r.find('=');
        if (eq == std::string::npos) throw podi::Error(podi::ErrorCode::InvalidArgument, "expected field=k, got '" + r + "'");
        options.rank_override[r.substr(0, eq)] = std::stol(r.substr(eq + 1));
      }
      if (train.shape > 0.0) options.rbf.shape = train.shape;
      options.rbf.ridge = train.ridge;
      options.rbf.normalize = !train.no_normalize;
      if (!train.ranges.empty()) {
        podi::ParameterRange range{podi::Vector<double>(static_cast<Index>(train.ranges.size())),
                                   podi::Vector<double>(static_cast<Index>(train.ranges.size()))};
        for (std::size_t d = 0; d < train.ranges.size(); ++d) {
          const auto colon = train.ranges[d].find(':');
          if (colon == std::string::npos) throw podi::Error(podi::ErrorCode::InvalidArgument, "expected lo:hi, got '" + train.ranges[d] + "'");
          range.lower[static_cast<Index>(d)] = std::stod(train.ranges[d].substr(0, colon));
          range.upper[static_cast<Index>(d)] = std::stod(train.ranges[d].substr(colon + 1));
        }
        options.declared_range = range;
      }
      const auto set = podi::read_snapshot_set(train.snapshots);
      const auto model = podi::train(set, options);
      podi::save_model(model, train.out);
      json fields = json::array();
      if (!as_json) std::cout << "field      N         k  energy(k)\n";
      for (const auto& f : model.fields()) {
        const double energy = podi::cumulative_energy(f.spectrum)[f.rank() - 1];
        fields.push_back({{"label", f.label}, {"n_dof", f.n_dof()}, {"k", f.rank()}, {"energy", energy}});
        if (!as_json) {
          std::printf("%-10s %-9lld %-2lld %.6f\n", f.label.c_str(), static_cast<long long>(f.n_dof()),
                      static_cast<long long>(f.rank()), energy);
        }
      }
      if (as_json) std::cout << json{{"model", train.out}, {"fields", fields}}.dump() << "\n";
      else std::cout << "model written to " << train.out << "\n";
    } else if (*val_cmd) {
      const auto model = podi::load_model(val_model);
      const auto heldout = podi::read_snapshot_set(val_heldout);
      const auto report = podi::validate(model, heldout);
      if (as_json) {
        json entries = json::array();
        for (const auto& e : report.entries) {
          entries.push_back({{"field", e.field}, {"parameter", to_json(e.parameter)},
                             {"error_percent", e.error_percent}, {"eval_seconds", e.eval_seconds}});
        }
        std::cout << json{{"ranks", report.ranks}, {"entries", entries}}.dump() << "\n";
      } else {
        std::vector<std::string> labels;
        for (const auto& f : heldout.fields) labels.push_back(f.field_name);
        std::printf("%-16s", "parameter");
        for (const auto& l : labels) std::printf(" %10s", l.c_str());
        std::printf("\n%-16s", "k");
        for (const auto& l : labels) std::printf(" %10lld", static_cast<long long>(report.ranks.at(l)));
        std::printf("\n");
        for (Index i = 0; i < heldout.n_snapshots(); ++i) {
          std::string p;
          for (Index d = 0; d < heldout.parameter_dim(); ++d) p += (d ? "," : "") + fmt(heldout.parameter_table(i, d));
          std::printf("E_X %-12s", p.c_str());
          for (const auto& l : labels) {
            for (const auto& e : report.entries) {
              if (e.field == l && e.sample == i) std::printf(" %9.4f%%", e.error_percent);
            }
          }
          std::printf("\n");
        }
      }
    } else if (*eval_cmd) {
      const auto model = podi::load_model(ev.model);
      const auto pi = point(ev.param);
      const auto values = podi::evaluate_field(model, ev.field, pi);
      const bool extrapolated = model.is_extrapolated(pi);
      if (!ev.out.empty()) {
        std::ofstream out(ev.out);
        char buf[32];
        for (Index i = 0; i < values.size(); ++i) {
          std::snprintf(buf, sizeof buf, "%.17g\n", values[i]);
          out << buf;
        }
        if (!out) throw podi::Error(podi::ErrorCode::IoFailure, "cannot write '" + ev.out + "'");
      }
      if (as_json) {
        std::cout << json{{"field", ev.field}, {"parameter", ev.param}, {"n_dof", values.size()},
                          {"stats", {{"min", values.minCoeff()}, {"max", values.maxCoeff()}, {"mean", values.mean()}}},
                          {"extrapolated", extrapolated}}.dump()
                  << "\n";
      } else {
        std::cout << ev.field << ": N=" << values.size() << " min=" << fmt(values.minCoeff(), 10)
                  << " max=" << fmt(values.maxCoeff(), 10) << " mean=" << fmt(values.mean(), 10)
                  << (extrapolated ? " (extrapolated)" : "") << "\n";
      }
    } else if (*pump_cmd) {
      podi::pump::check(pa.curve);
      try {
        if (*fwd) {
          const double dp = podi::pump::head_from_speed_flow(pa.curve, pa.omega, pa.pf);
          if (as_json) std::cout << json{{"omega", pa.omega}, {"pf", pa.pf}, {"dp", dp}}.dump() << "\n";
          else std::cout << "dP = " << fmt(dp, 10) << " mmHg\n";
        } else if (*inv) {
          const auto op = podi::pump::panel1(pa.curve, pa.dp, pa.omega);
          if (as_json) std::cout << json{{"omega", op.speed}, {"dp", op.head}, {"pf", op.flow}}.dump() << "\n";
          else std::cout << "PF = " << fmt(op.flow, 10) << " l/min\n";
        } else if (*cal) {
          const double dp = podi::pump::panel2_calibrate(pa.curve, pa.omega, pa.pf);
          if (as_json) std::cout << json{{"omega", pa.omega}, {"pf", pa.pf}, {"dp", dp}}.dump() << "\n";
          else std::cout << "dP = " << fmt(dp, 10) << " mmHg\n";
        } else if (*crv) {
          const auto samples = podi::pump::curve_samples(pa.curve, pa.omega, pa.n);
          if (as_json) {
            json pts = json::array();
            for (const auto& s : samples) pts.push_back({{"pf", s.flow}, {"dp", s.head}});
            std::cout << json{{"omega", pa.omega}, {"points", pts}}.dump() << "\n";
          } else {
            std::cout << "pf,dp\n";
            for (const auto& s : samples) std::cout << fmt(s.flow, 10) << "," << fmt(s.head, 10) << "\n";
          }
        }
      } catch (const podi::Error& e) {
        print_pump_error_hint(e, pa.curve);
        throw;
      }
    } else if (*wk_cmd) {
      const auto params = outlet_params(wk);
      podi::windkessel::FlowSignal flow;
      if (!wk.flow_csv.empty()) {
        podi::windkessel::SampledFlow sampled;
        sampled.dt = wk.flow_dt;
        std::istringstream in(read_text(wk.flow_csv));
        for (double q; in >> q;) sampled.samples.push_back(q);
        if (sampled.samples.size() > 1 && !(sampled.dt > 0.0)) {
          throw podi::Error(podi::ErrorCode::InvalidArgument, "--flow-dt must be positive for a sampled signal");
        }
        flow = std::move(sampled);
      } else {
        const double q = wk.flow;
        flow = std::function<double(double)>([q](double) { return q; });
      }
      podi::windkessel::State initial;
      initial.p_proximal = wk.p0 ? *wk.p0 : podi::windkessel::steady_state(params, podi::windkessel::flow_at(flow, 0.0)).p_proximal;
      const auto trace = podi::windkessel::simulate(params, flow, wk.dt, wk.t_end, initial);
      if (wk.out.empty()) podi::windkessel::write_trace_csv(std::cout, trace);
      else podi::windkessel::write_trace_csv(std::filesystem::path(wk.out), trace);
    } else if (*serve_cmd) {
      if (!model_dir.empty()) cfg.model_dir = model_dir;
      podi::service::RomService service(cfg);
      service.load_model_directory();
      // worker threads inherit the mask; the main thread waits for the signal
      sigset_t stop_signals;
      sigemptyset(&stop_signals);
      sigaddset(&stop_signals, SIGINT);
      sigaddset(&stop_signals, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);
      const int port = service.start();
      std::cerr << "listening on " << cfg.host << ":" << port << " with " << service.registry().size()
                << " model(s)" << std::endl;
      int received = 0;
      sigwait(&stop_signals, &received);
      service.stop();
    }
  } catch (const podi::Error& e) {
    std::cerr << "error [" << podi::to_string(e.code()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error [InvalidArgument]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
