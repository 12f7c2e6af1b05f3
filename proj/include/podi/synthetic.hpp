#pragma once

// Synthetic parametric snapshot sets with a known exact solution manifold,
// standing in for a full-order solver when validating the ROM.
//
// Field f (0-based, in spec order) draws its generating modes from
// Xorshift64Star seeded with splitmix64(seed + 2f) and its noise from
// splitmix64(seed + 2f + 1). Modes are n_dof x r uniform draws on [-1, 1),
// filled column by column, then orthonormalized by two passes of modified
// Gram-Schmidt with each mode's largest-magnitude entry made positive.
// Noise entries are noise_amplitude * uniform[-1, 1), filled snapshot by
// snapshot.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "podi/pod.hpp"
#include "podi/rbf.hpp"
#include "podi/snapshot_io.hpp"

namespace podi {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Marsaglia xorshift (12, 25, 27) with the 2685821657736338717 output
/// multiplier. A zero seed is replaced by 0x9E3779B97F4A7C15.
class Xorshift64Star {
 public:
  explicit Xorshift64Star(std::uint64_t seed) noexcept;
  std::uint64_t next() noexcept;
  /// Top 53 bits scaled to [0, 1).
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

 private:
  std::uint64_t state_;
};

struct CoefficientFunction {
  enum class Kind { Polynomial, Sinusoidal };

  Kind kind = Kind::Polynomial;
  /// Polynomial: c0 + c1 x + c2 x^2 + ...; Sinusoidal: c0 + c1 sin(c2 x + c3).
  std::vector<double> coefficients;
  Index axis = 0;  // parameter coordinate x = pi[axis]

  double operator()(const ParameterPoint<double>& point) const;
};

struct SyntheticFieldSpec {
  std::string label;
  Index n_dof = 0;
  std::vector<CoefficientFunction> coefficients;  // one per generating mode
};

struct SyntheticManifoldSpec {
  std::uint64_t seed = 20200101;
  Matrix<double> parameter_samples;  // N_s x P
  std::vector<SyntheticFieldSpec> fields;
  double noise_amplitude = 0.0;
};

/// Exact noiseless field at any parameter.
class SyntheticOracle {
 public:
  struct Field {
    Matrix<double> modes;
    std::vector<CoefficientFunction> coefficients;
  };

  using FieldMap = std::map<std::string, Field, std::less<>>;

  explicit SyntheticOracle(FieldMap fields) : fields_(std::move(fields)) {}

  Vector<double> operator()(std::string_view label, const ParameterPoint<double>& point) const;
  const Matrix<double>& modes(std::string_view label) const;

 private:
  const Field& get(std::string_view label) const;
  FieldMap fields_;
};

struct SyntheticSet {
  SnapshotSet set;
  SyntheticOracle oracle;
};

/// Throws InvalidSpec on any malformed input.
SyntheticSet generate_synthetic_set(const SyntheticManifoldSpec& spec);

/// JSON spec as accepted by `podi synth`; see README for the schema.
SyntheticManifoldSpec parse_synthetic_spec(std::string_view json_text);

/// Two-mode linear-coefficient manifold with fields p, wss, ux, uy, uz over
/// the given samples; leading energy of p exceeds 0.9999.
SyntheticManifoldSpec lvad_like_spec(Matrix<double> samples, Index n_dof, std::uint64_t seed);

/// Equispaced samples over [3, 3.8] and [4.2, 5] with step 0.2 (one column).
Matrix<double> gapped_pump_flow_samples();

}  // namespace podi
