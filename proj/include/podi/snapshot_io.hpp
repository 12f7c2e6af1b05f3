#pragma once

// Snapshot sets on disk.
//
// A set is a directory holding `manifest.txt` (UTF-8 `key = value` lines)
// plus raw binary blobs: `parameters.bin` (N_s x P) and one
// `field_NNN.bin` (N x N_s) per field. Blobs are column-major 64-bit
// little-endian doubles with no header; the manifest records each blob's
// CRC-32.

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "podi/pod.hpp"

namespace podi {

struct SnapshotSet {
  Matrix<double> parameter_table;  // rows are parameter points
  std::vector<SnapshotMatrix<double>> fields;
  std::string provenance;

  Index n_snapshots() const { return parameter_table.rows(); }
  Index parameter_dim() const { return parameter_table.cols(); }

  const SnapshotMatrix<double>* find(std::string_view label) const;
  /// Throws UnknownField.
  const SnapshotMatrix<double>& field(std::string_view label) const;
};

/// Checks the set invariants: finite values, distinct parameter rows, unique
/// labels, and every field having one column per parameter row.
void check_snapshot_set(const SnapshotSet& set);

inline constexpr std::uint32_t kSnapshotFormatVersion = 1;

void write_snapshot_set(const SnapshotSet& set, const std::filesystem::path& directory);
SnapshotSet read_snapshot_set(const std::filesystem::path& directory);

/// Plain CSV, ',' delimiter, '.' decimal separator, no header. Each column
/// is one snapshot (rows are degrees of freedom).
SnapshotMatrix<double> read_csv_field(const std::filesystem::path& path, std::string label);

/// Plain CSV with one parameter point per row.
Matrix<double> read_csv_parameters(const std::filesystem::path& path);

/// Builds a set from CSV files; provenance records that the decimal import is lossy.
SnapshotSet import_csv(const std::filesystem::path& parameters,
                       const std::vector<std::pair<std::string, std::filesystem::path>>& fields);

}  // namespace podi
