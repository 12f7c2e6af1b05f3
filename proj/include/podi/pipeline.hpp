#pragma once

// PODI: per-field POD bases with one Gaussian RBF interpolant per retained
// mode. Offline `train` builds an immutable RomModel; online
// `evaluate_field` interpolates the modal coefficients at a new parameter
// and projects them back onto the basis.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "podi/pod.hpp"
#include "podi/rbf.hpp"
#include "podi/snapshot_io.hpp"

namespace podi {

/// Axis-aligned box in parameter space.
struct ParameterRange {
  Vector<double> lower;
  Vector<double> upper;

  Index dim() const { return lower.size(); }
  bool contains(const ParameterPoint<double>& point) const;
};

struct TrainingOptions {
  double energy_threshold = 0.99;
  std::map<std::string, Index, std::less<>> rank_override;
  RbfOptions<double> rbf;
  /// Admissible parameter range recorded in the model (e.g. PF in [3, 5]).
  std::optional<ParameterRange> declared_range;
};

struct FieldModel {
  std::string label;
  PodBasis<double> basis;           // truncated: exactly k modes
  Vector<double> spectrum;          // all min(N, N_s) singular values
  std::vector<RbfInterpolator<double>> interpolators;  // one per mode

  Index n_dof() const { return basis.n_dof(); }
  Index rank() const { return basis.truncation_rank; }
};

class RomModel {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;

  /// Validates the model invariants; throws InvalidArgument otherwise.
  RomModel(Matrix<double> parameter_table, double energy_threshold,
           std::optional<ParameterRange> declared_range, std::vector<FieldModel> fields);

  const Matrix<double>& parameter_table() const { return parameter_table_; }
  double energy_threshold() const { return energy_threshold_; }
  const std::optional<ParameterRange>& declared_range() const { return declared_range_; }
  const std::vector<FieldModel>& fields() const { return fields_; }
  std::uint32_t format_version() const { return kFormatVersion; }

  Index n_snapshots() const { return parameter_table_.rows(); }
  Index parameter_dim() const { return parameter_table_.cols(); }

  /// Throws UnknownField.
  const FieldModel& field(std::string_view label) const;
  const FieldModel* find(std::string_view label) const;

  /// Bounding box of the training parameters.
  const ParameterRange& training_box() const { return training_box_; }
  /// True when `point` lies outside the training box.
  bool is_extrapolated(const ParameterPoint<double>& point) const;

  /// alpha_j(point) for every retained mode of `label`.
  Vector<double> coefficients(std::string_view label, const ParameterPoint<double>& point) const;

 private:
  Matrix<double> parameter_table_;
  double energy_threshold_;
  std::optional<ParameterRange> declared_range_;
  std::vector<FieldModel> fields_;
  ParameterRange training_box_;
};

RomModel train(const SnapshotSet& snapshots, const TrainingOptions& options = {});

/// Reconstructed field at `target`. Throws UnknownField or DimensionMismatch.
Vector<double> evaluate_field(const RomModel& model, std::string_view field,
                              const ParameterPoint<double>& target);

struct ValidationEntry {
  std::string field;
  Index sample = 0;
  ParameterPoint<double> parameter;
  double error_percent = 0.0;
  double eval_seconds = 0.0;  // median of 5 timed evaluations
};

struct ValidationReport {
  std::vector<ValidationEntry> entries;
  std::map<std::string, Index> ranks;

  double max_error(std::string_view field) const;
};

ValidationReport validate(const RomModel& model, const SnapshotSet& heldout);

/// Binary container, little-endian:
///   "PODI" | u32 version | u32 field count | u64 P | u64 N_s
///   | f64[N_s*P] parameter table | f64 energy threshold
///   | u8 has range [f64[P] lower, f64[P] upper]
///   then per field: u64-length label | u64 N | u64 k | u64 N_s
///   | f64[N*k] U_k | u64 r | f64[r] singular values
///   | k RBF blocks: f64[N_s*P] centers | f64[P] offset | f64[P] scale
///                   | f64 shape | f64 ridge | f64[N_s] weights
///   and a trailing u32 CRC-32 of everything before it.
/// Matrices are column-major.
std::vector<std::uint8_t> serialize_model(const RomModel& model);
RomModel deserialize_model(std::span<const std::uint8_t> bytes);

void save_model(const RomModel& model, const std::filesystem::path& path);
RomModel load_model(const std::filesystem::path& path);

}  // namespace podi
