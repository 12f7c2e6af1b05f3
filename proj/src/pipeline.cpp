#include "podi/pipeline.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cstring>

#include "binary.hpp"
#include "podi/checksum.hpp"

namespace podi {

namespace {

constexpr std::array<char, 4> kMagic{'P', 'O', 'D', 'I'};

[[noreturn]] void corrupt(const std::string& what) { throw Error(ErrorCode::CorruptModel, what); }

ParameterRange bounding_box(const Matrix<double>& points) {
  return {points.colwise().minCoeff().transpose(), points.colwise().maxCoeff().transpose()};
}

void require_dim(const ParameterPoint<double>& point, Index dim) {
  if (point.size() != dim) {
    throw Error(ErrorCode::DimensionMismatch, "parameter has dimension " +
                                                  std::to_string(point.size()) + ", model expects " +
                                                  std::to_string(dim));
  }
}

}  // namespace

bool ParameterRange::contains(const ParameterPoint<double>& point) const {
  if (point.size() != dim()) return false;
  return (point.array() >= lower.array()).all() && (point.array() <= upper.array()).all();
}

RomModel::RomModel(Matrix<double> parameter_table, double energy_threshold,
                   std::optional<ParameterRange> declared_range, std::vector<FieldModel> fields)
    : parameter_table_(std::move(parameter_table)),
      energy_threshold_(energy_threshold),
      declared_range_(std::move(declared_range)),
      fields_(std::move(fields)) {
  if (parameter_table_.rows() < 1 || parameter_table_.cols() < 1) {
    throw Error(ErrorCode::InvalidArgument, "model needs a non-empty parameter table");
  }
  if (declared_range_ && (declared_range_->lower.size() != parameter_dim() ||
                          declared_range_->upper.size() != parameter_dim())) {
    throw Error(ErrorCode::DimensionMismatch, "declared range dimension differs from parameters");
  }
  for (const auto& f : fields_) {
    if (f.rank() < 1 || f.basis.stored_rank() != f.rank()) {
      throw Error(ErrorCode::InvalidArgument, "field '" + f.label + "' basis is not truncated");
    }
    if (static_cast<Index>(f.interpolators.size()) != f.rank()) {
      throw Error(ErrorCode::InvalidArgument,
                  "field '" + f.label + "' has " + std::to_string(f.interpolators.size()) +
                      " interpolators for rank " + std::to_string(f.rank()));
    }
    for (const auto& interp : f.interpolators) {
      const auto& c = interp.centers();
      if (c.rows() != parameter_table_.rows() || c.cols() != parameter_table_.cols() ||
          c != parameter_table_) {
        throw Error(ErrorCode::InvalidArgument,
                    "field '" + f.label + "' interpolator centers differ from the parameter table");
      }
    }
  }
  training_box_ = bounding_box(parameter_table_);
}

const FieldModel* RomModel::find(std::string_view label) const {
  for (const auto& f : fields_) {
    if (f.label == label) return &f;
  }
  return nullptr;
}

const FieldModel& RomModel::field(std::string_view label) const {
  if (const auto* f = find(label)) return *f;
  throw Error(ErrorCode::UnknownField, "model has no field '" + std::string(label) + "'");
}

bool RomModel::is_extrapolated(const ParameterPoint<double>& point) const {
  return !training_box_.contains(point);
}

Vector<double> RomModel::coefficients(std::string_view label, const ParameterPoint<double>& point) const {
  const auto& f = field(label);
  require_dim(point, parameter_dim());
  Vector<double> alpha(f.rank());
  for (Index j = 0; j < f.rank(); ++j) alpha[j] = f.interpolators[static_cast<std::size_t>(j)](point);
  return alpha;
}

RomModel train(const SnapshotSet& snapshots, const TrainingOptions& options) {
  check_snapshot_set(snapshots);
  if (snapshots.n_snapshots() < 2) {
    throw Error(ErrorCode::InsufficientSnapshots,
                "training needs at least two snapshots, got " + std::to_string(snapshots.n_snapshots()));
  }
  if (!(options.energy_threshold > 0.0 && options.energy_threshold <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "energy threshold must lie in (0, 1]");
  }
  for (const auto& [label, k] : options.rank_override) {
    if (!snapshots.find(label)) {
      throw Error(ErrorCode::UnknownField, "rank override names unknown field '" + label + "'");
    }
  }

  std::vector<FieldModel> fields;
  for (const auto& s : snapshots.fields) {
    const auto full = compute_pod_basis(s);
    const auto override_it = options.rank_override.find(s.field_name);
    const Index k = override_it != options.rank_override.end()
                        ? override_it->second
                        : rank_for_energy(full, options.energy_threshold);

    FieldModel f;
    f.label = s.field_name;
    f.basis = truncate(full, k);
    f.spectrum = full.singular_values;
    const auto coeffs = project_coefficients(f.basis, s);
    f.interpolators = fit_modes(snapshots.parameter_table, coeffs.matrix, options.rbf);
    fields.push_back(std::move(f));
  }
  return RomModel(snapshots.parameter_table, options.energy_threshold, options.declared_range,
                  std::move(fields));
}

Vector<double> evaluate_field(const RomModel& model, std::string_view field,
                              const ParameterPoint<double>& target) {
  const auto& f = model.field(field);
  return reconstruct(f.basis, model.coefficients(field, target));
}

double ValidationReport::max_error(std::string_view field) const {
  double worst = 0.0;
  for (const auto& e : entries) {
    if (e.field == field) worst = std::max(worst, e.error_percent);
  }
  return worst;
}

ValidationReport validate(const RomModel& model, const SnapshotSet& heldout) {
  check_snapshot_set(heldout);
  if (heldout.parameter_dim() != model.parameter_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "held-out parameters have dimension " +
                                                  std::to_string(heldout.parameter_dim()) +
                                                  ", model expects " +
                                                  std::to_string(model.parameter_dim()));
  }
  for (const auto& s : heldout.fields) {
    const auto* f = model.find(s.field_name);
    if (!f) throw Error(ErrorCode::FieldMismatch, "model has no field '" + s.field_name + "'");
    if (f->n_dof() != s.n_dof()) {
      throw Error(ErrorCode::DimensionMismatch,
                  "field '" + s.field_name + "' has " + std::to_string(s.n_dof()) +
                      " dofs, model has " + std::to_string(f->n_dof()));
    }
  }

  using clock = std::chrono::steady_clock;
  ValidationReport report;
  for (const auto& f : model.fields()) report.ranks[f.label] = f.rank();
  for (const auto& s : heldout.fields) {
    for (Index i = 0; i < heldout.n_snapshots(); ++i) {
      const ParameterPoint<double> pi = heldout.parameter_table.row(i).transpose();
      std::array<double, 5> times{};
      Vector<double> rom;
      for (auto& t : times) {
        const auto start = clock::now();
        rom = evaluate_field(model, s.field_name, pi);
        t = std::chrono::duration<double>(clock::now() - start).count();
      }
      std::nth_element(times.begin(), times.begin() + 2, times.end());
      report.entries.push_back(
          {s.field_name, i, pi, relative_error_l2(s.data.col(i), rom), times[2]});
    }
  }
  return report;
}

std::vector<std::uint8_t> serialize_model(const RomModel& model) {
  detail::ByteWriter w;
  w.raw({kMagic.data(), kMagic.size()});
  w.u32(RomModel::kFormatVersion);
  w.u32(static_cast<std::uint32_t>(model.fields().size()));
  const auto dim = static_cast<std::uint64_t>(model.parameter_dim());
  const auto n_s = static_cast<std::uint64_t>(model.n_snapshots());
  w.u64(dim);
  w.u64(n_s);
  w.doubles(model.parameter_table());
  w.f64(model.energy_threshold());
  if (const auto& range = model.declared_range()) {
    w.u8(1);
    w.doubles(range->lower);
    w.doubles(range->upper);
  } else {
    w.u8(0);
  }

  for (const auto& f : model.fields()) {
    w.string(f.label);
    w.u64(static_cast<std::uint64_t>(f.n_dof()));
    w.u64(static_cast<std::uint64_t>(f.rank()));
    w.u64(n_s);
    w.doubles(f.basis.modes);
    w.u64(static_cast<std::uint64_t>(f.spectrum.size()));
    w.doubles(f.spectrum);
    for (const auto& interp : f.interpolators) {
      w.doubles(interp.centers());
      w.doubles(interp.scaling().offset());
      w.doubles(interp.scaling().scale());
      w.f64(interp.shape());
      w.f64(interp.ridge());
      w.doubles(interp.weights());
    }
  }
  auto bytes = w.take();
  const auto crc = crc32(bytes);
  detail::ByteWriter tail;
  tail.u32(crc);
  bytes.insert(bytes.end(), tail.bytes().begin(), tail.bytes().end());
  return bytes;
}

RomModel deserialize_model(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t kHeader = 4 + 4 + 4;
  if (bytes.size() < kHeader + 4) corrupt("model file is truncated");
  if (std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) corrupt("bad magic bytes");

  detail::ByteReader header(bytes.subspan(4, 4), ErrorCode::CorruptModel);
  const auto version = header.u32();
  if (version != RomModel::kFormatVersion) {
    throw Error(ErrorCode::VersionMismatch,
                "model format version " + std::to_string(version) + " is not supported (expected " +
                    std::to_string(RomModel::kFormatVersion) + ")");
  }

  const auto payload = bytes.first(bytes.size() - 4);
  detail::ByteReader crc_reader(bytes.last(4), ErrorCode::CorruptModel);
  if (crc_reader.u32() != crc32(payload)) corrupt("model checksum mismatch");

  try {
    detail::ByteReader r(payload, ErrorCode::CorruptModel);
    r.u32();  // magic
    r.u32();  // version
    const auto field_count = r.u32();
    const auto dim = r.u64();
    const auto n_s = r.u64();
    Matrix<double> params = r.doubles(n_s, dim);
    const double threshold = r.f64();
    std::optional<ParameterRange> range;
    if (const auto flag = r.u8(); flag == 1) {
      Vector<double> lo = r.doubles(dim, 1);
      Vector<double> hi = r.doubles(dim, 1);
      range = ParameterRange{std::move(lo), std::move(hi)};
    } else if (flag != 0) {
      corrupt("bad range flag");
    }

    std::vector<FieldModel> fields;
    for (std::uint32_t fi = 0; fi < field_count; ++fi) {
      FieldModel f;
      f.label = r.string();
      const auto n = r.u64();
      const auto k = r.u64();
      if (r.u64() != n_s) corrupt("field '" + f.label + "' disagrees on N_s");
      f.basis.modes = r.doubles(n, k);
      f.basis.truncation_rank = static_cast<Index>(k);
      const auto spectrum_len = r.u64();
      f.spectrum = r.doubles(spectrum_len, 1);
      if (spectrum_len < k) corrupt("field '" + f.label + "' spectrum shorter than rank");
      f.basis.singular_values = f.spectrum.head(static_cast<Index>(k));
      for (std::uint64_t j = 0; j < k; ++j) {
        Matrix<double> centers = r.doubles(n_s, dim);
        Vector<double> offset = r.doubles(dim, 1);
        Vector<double> scale = r.doubles(dim, 1);
        const double shape = r.f64();
        const double ridge = r.f64();
        Vector<double> weights = r.doubles(n_s, 1);
        f.interpolators.emplace_back(std::move(centers),
                                     ParameterScaling<double>(std::move(offset), std::move(scale)),
                                     shape, ridge, std::move(weights));
      }
      fields.push_back(std::move(f));
    }
    if (r.remaining() != 0) corrupt("trailing bytes after last field");
    return RomModel(std::move(params), threshold, std::move(range), std::move(fields));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptModel) throw;
    corrupt(std::string("inconsistent model contents: ") + e.what());
  }
}

void save_model(const RomModel& model, const std::filesystem::path& path) {
  detail::write_file(path, serialize_model(model));
}

RomModel load_model(const std::filesystem::path& path) {
  return deserialize_model(detail::read_file(path));
}

}  // namespace podi
