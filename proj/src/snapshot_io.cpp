#include "podi/snapshot_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "binary.hpp"
#include "podi/checksum.hpp"

namespace podi {

namespace {

namespace fs = std::filesystem;

constexpr std::string_view kManifestName = "manifest.txt";
constexpr std::string_view kFormatTag = "podi-snapshot-set";

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 == s.size()) {
      out += s[i];
      continue;
    }
    const char next = s[++i];
    out += next == 'n' ? '\n' : next == 'r' ? '\r' : next;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string hex32(std::uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

template <typename T>
T parse_number(std::string_view text, ErrorCode code, const std::string& what) {
  text = trim(text);
  T value{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error(code, "cannot parse " + what + " from '" + std::string(text) + "'");
  }
  return value;
}

std::uint32_t parse_hex32(std::string_view text) {
  text = trim(text);
  std::uint32_t value = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), value, 16);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error(ErrorCode::CorruptData, "bad checksum entry '" + std::string(text) + "'");
  }
  return value;
}

class Manifest {
 public:
  explicit Manifest(std::string_view text) {
    std::size_t start = 0;
    while (start <= text.size()) {
      auto end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      const auto line = trim(text.substr(start, end - start));
      start = end + 1;
      if (line.empty() || line.front() == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw Error(ErrorCode::CorruptData, "manifest line without '=': " + std::string(line));
      }
      entries_[std::string(trim(line.substr(0, eq)))] = unescape(trim(line.substr(eq + 1)));
    }
  }

  const std::string& get(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw Error(ErrorCode::CorruptData, "manifest is missing '" + key + "'");
    return it->second;
  }

  std::uint64_t count(const std::string& key) const {
    return parse_number<std::uint64_t>(get(key), ErrorCode::CorruptData, key);
  }

 private:
  std::map<std::string, std::string> entries_;
};

std::string field_file_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "field_%03zu.bin", index);
  return buf;
}

Matrix<double> read_blob(const fs::path& path, std::uint64_t rows, std::uint64_t cols,
                         std::uint32_t expected_crc) {
  const auto bytes = detail::read_file(path);
  if (cols != 0 && rows > std::numeric_limits<std::uint64_t>::max() / 8 / cols) {
    throw Error(ErrorCode::CorruptData, "implausible shape for '" + path.string() + "'");
  }
  if (bytes.size() != rows * cols * 8) {
    throw Error(ErrorCode::CorruptData, "'" + path.filename().string() + "' has " +
                                            std::to_string(bytes.size()) + " bytes, expected " +
                                            std::to_string(rows * cols * 8));
  }
  if (crc32(bytes) != expected_crc) {
    throw Error(ErrorCode::CorruptData, "checksum mismatch in '" + path.filename().string() + "'");
  }
  detail::ByteReader reader(bytes, ErrorCode::CorruptData);
  return reader.doubles(rows, cols);
}

std::vector<std::vector<double>> read_csv_rows(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      row.push_back(parse_number<double>(rest.substr(0, comma), ErrorCode::InvalidArgument,
                                         "value on line " + std::to_string(line_no)));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error(ErrorCode::LengthMismatch, "line " + std::to_string(line_no) + " of '" +
                                                 path.string() + "' has " +
                                                 std::to_string(row.size()) + " values");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorCode::InvalidArgument, "'" + path.string() + "' is empty");
  return rows;
}

}  // namespace

const SnapshotMatrix<double>* SnapshotSet::find(std::string_view label) const {
  for (const auto& f : fields) {
    if (f.field_name == label) return &f;
  }
  return nullptr;
}

const SnapshotMatrix<double>& SnapshotSet::field(std::string_view label) const {
  if (const auto* f = find(label)) return *f;
  throw Error(ErrorCode::UnknownField, "no field '" + std::string(label) + "' in snapshot set");
}

void check_snapshot_set(const SnapshotSet& set) {
  require_finite(set.parameter_table, "parameter table");
  for (Index i = 0; i < set.parameter_table.rows(); ++i) {
    for (Index j = i + 1; j < set.parameter_table.rows(); ++j) {
      if (set.parameter_table.row(i) == set.parameter_table.row(j)) {
        throw Error(ErrorCode::InvalidArgument, "parameter rows " + std::to_string(i) + " and " +
                                                    std::to_string(j) + " coincide");
      }
    }
  }
  std::set<std::string> labels;
  for (const auto& f : set.fields) {
    if (f.field_name.empty()) throw Error(ErrorCode::InvalidArgument, "empty field label");
    if (!labels.insert(f.field_name).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate field label '" + f.field_name + "'");
    }
    if (f.n_snapshots() != set.n_snapshots()) {
      throw Error(ErrorCode::DimensionMismatch,
                  "field '" + f.field_name + "' has " + std::to_string(f.n_snapshots()) +
                      " snapshots but the parameter table has " +
                      std::to_string(set.n_snapshots()) + " rows");
    }
    if (f.n_dof() < 1) throw Error(ErrorCode::InvalidArgument, "field '" + f.field_name + "' is empty");
    require_finite(f.data, "field '" + f.field_name + "'");
  }
}

void write_snapshot_set(const SnapshotSet& set, const fs::path& directory) {
  check_snapshot_set(set);
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create '" + directory.string() + "': " + ec.message());

  std::ostringstream manifest;
  manifest << "# snapshot set manifest\n";
  manifest << "format = " << kFormatTag << "\n";
  manifest << "version = " << kSnapshotFormatVersion << "\n";
  manifest << "parameter_dim = " << set.parameter_dim() << "\n";
  manifest << "n_snapshots = " << set.n_snapshots() << "\n";
  manifest << "provenance = " << escape(set.provenance) << "\n";

  detail::ByteWriter params;
  params.doubles(set.parameter_table);
  detail::write_file(directory / "parameters.bin", params.bytes());
  manifest << "parameters.file = parameters.bin\n";
  manifest << "parameters.crc32 = " << hex32(crc32(params.bytes())) << "\n";

  manifest << "field_count = " << set.fields.size() << "\n";
  for (std::size_t i = 0; i < set.fields.size(); ++i) {
    const auto& f = set.fields[i];
    detail::ByteWriter blob;
    blob.doubles(f.data);
    const auto name = field_file_name(i);
    detail::write_file(directory / name, blob.bytes());
    const auto key = "field." + std::to_string(i) + ".";
    manifest << key << "label = " << escape(f.field_name) << "\n";
    manifest << key << "n_dof = " << f.n_dof() << "\n";
    manifest << key << "file = " << name << "\n";
    manifest << key << "crc32 = " << hex32(crc32(blob.bytes())) << "\n";
  }

  const auto text = manifest.str();
  detail::write_file(directory / kManifestName,
                     {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

SnapshotSet read_snapshot_set(const fs::path& directory) {
  const auto raw = detail::read_file(directory / kManifestName);
  const Manifest manifest(std::string_view(reinterpret_cast<const char*>(raw.data()), raw.size()));

  if (manifest.get("format") != kFormatTag) {
    throw Error(ErrorCode::CorruptData, "'" + directory.string() + "' is not a snapshot set");
  }
  const auto version = manifest.count("version");
  if (version != kSnapshotFormatVersion) {
    throw Error(ErrorCode::VersionMismatch,
                "snapshot set version " + std::to_string(version) + " is not supported");
  }

  SnapshotSet set;
  set.provenance = manifest.get("provenance");
  const auto dim = manifest.count("parameter_dim");
  const auto n_snapshots = manifest.count("n_snapshots");
  set.parameter_table = read_blob(directory / manifest.get("parameters.file"), n_snapshots, dim,
                                  parse_hex32(manifest.get("parameters.crc32")));

  const auto field_count = manifest.count("field_count");
  for (std::uint64_t i = 0; i < field_count; ++i) {
    const auto key = "field." + std::to_string(i) + ".";
    SnapshotMatrix<double> f;
    f.field_name = manifest.get(key + "label");
    f.data = read_blob(directory / manifest.get(key + "file"), manifest.count(key + "n_dof"),
                       n_snapshots, parse_hex32(manifest.get(key + "crc32")));
    set.fields.push_back(std::move(f));
  }
  check_snapshot_set(set);
  return set;
}

SnapshotMatrix<double> read_csv_field(const fs::path& path, std::string label) {
  const auto rows = read_csv_rows(path);
  Matrix<double> data(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      data(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return make_snapshot_matrix<double>(std::move(data), std::move(label));
}

Matrix<double> read_csv_parameters(const fs::path& path) {
  return read_csv_field(path, "parameters").data;
}

SnapshotSet import_csv(const fs::path& parameters,
                       const std::vector<std::pair<std::string, fs::path>>& fields) {
  SnapshotSet set;
  set.parameter_table = read_csv_parameters(parameters);
  set.provenance = "csv import (lossy decimal) from " + parameters.string();
  for (const auto& [label, path] : fields) {
    set.fields.push_back(read_csv_field(path, label));
    set.provenance += ", " + path.string();
  }
  check_snapshot_set(set);
  return set;
}

}  // namespace podi
