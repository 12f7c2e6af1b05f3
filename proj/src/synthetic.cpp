#include "podi/synthetic.hpp"

#include <cmath>
#include <set>

#include "json.hpp"

namespace podi {

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::InvalidSpec, what); }

void check_function(const CoefficientFunction& f, Index dim, const std::string& where) {
  if (f.axis < 0 || f.axis >= dim) {
    invalid(where + ": axis " + std::to_string(f.axis) + " outside parameter dimension " +
            std::to_string(dim));
  }
  if (f.kind == CoefficientFunction::Kind::Polynomial && f.coefficients.empty()) {
    invalid(where + ": polynomial needs at least one coefficient");
  }
  if (f.kind == CoefficientFunction::Kind::Sinusoidal && f.coefficients.size() != 4) {
    invalid(where + ": sinusoid needs exactly four coefficients");
  }
  for (double c : f.coefficients) {
    if (!std::isfinite(c)) invalid(where + ": non-finite coefficient");
  }
}

void check_spec(const SyntheticManifoldSpec& spec) {
  const auto& samples = spec.parameter_samples;
  if (samples.rows() < 1 || samples.cols() < 1) invalid("no parameter samples");
  if (!samples.allFinite()) invalid("non-finite parameter sample");
  if (!(spec.noise_amplitude >= 0.0) || !std::isfinite(spec.noise_amplitude)) {
    invalid("noise amplitude must be finite and nonnegative");
  }
  std::set<std::string> labels;
  for (const auto& field : spec.fields) {
    if (field.label.empty()) invalid("empty field label");
    if (!labels.insert(field.label).second) invalid("duplicate field label '" + field.label + "'");
    const auto r = static_cast<Index>(field.coefficients.size());
    if (field.n_dof < 1) invalid("field '" + field.label + "' needs n_dof >= 1");
    if (r < 1) invalid("field '" + field.label + "' needs at least one generating mode");
    if (r > field.n_dof) invalid("field '" + field.label + "' has more modes than dofs");
    for (std::size_t j = 0; j < field.coefficients.size(); ++j) {
      check_function(field.coefficients[j], samples.cols(),
                     "field '" + field.label + "' mode " + std::to_string(j));
    }
  }
}

Matrix<double> generating_modes(Index n_dof, Index r, std::uint64_t seed) {
  Xorshift64Star rng(seed);
  Matrix<double> modes(n_dof, r);
  for (Index j = 0; j < r; ++j)
    for (Index i = 0; i < n_dof; ++i) modes(i, j) = rng.uniform(-1.0, 1.0);

  for (int pass = 0; pass < 2; ++pass) {
    for (Index j = 0; j < r; ++j) {
      for (Index m = 0; m < j; ++m) modes.col(j) -= modes.col(m).dot(modes.col(j)) * modes.col(m);
      const double norm = modes.col(j).norm();
      if (!(norm > 0.0)) invalid("generating modes are linearly dependent");
      modes.col(j) /= norm;
    }
  }
  for (Index j = 0; j < r; ++j) {
    Index pivot = 0;
    modes.col(j).cwiseAbs().maxCoeff(&pivot);
    if (modes(pivot, j) < 0.0) modes.col(j) = -modes.col(j);
  }
  return modes;
}

Vector<double> combine(const SyntheticOracle::Field& field, const ParameterPoint<double>& point) {
  Vector<double> c(static_cast<Index>(field.coefficients.size()));
  for (Index j = 0; j < c.size(); ++j) c[j] = field.coefficients[static_cast<std::size_t>(j)](point);
  return field.modes * c;
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

Xorshift64Star::Xorshift64Star(std::uint64_t seed) noexcept
    : state_(seed != 0 ? seed : 0x9E3779B97F4A7C15ull) {}

std::uint64_t Xorshift64Star::next() noexcept {
  state_ ^= state_ >> 12;
  state_ ^= state_ << 25;
  state_ ^= state_ >> 27;
  return state_ * 2685821657736338717ull;
}

double Xorshift64Star::uniform() noexcept {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double CoefficientFunction::operator()(const ParameterPoint<double>& point) const {
  const double x = point[axis];
  if (kind == Kind::Sinusoidal) {
    return coefficients[0] + coefficients[1] * std::sin(coefficients[2] * x + coefficients[3]);
  }
  double acc = 0.0;
  for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) acc = acc * x + *it;
  return acc;
}

const SyntheticOracle::Field& SyntheticOracle::get(std::string_view label) const {
  auto it = fields_.find(label);
  if (it == fields_.end()) {
    throw Error(ErrorCode::UnknownField, "oracle has no field '" + std::string(label) + "'");
  }
  return it->second;
}

Vector<double> SyntheticOracle::operator()(std::string_view label,
                                           const ParameterPoint<double>& point) const {
  return combine(get(label), point);
}

const Matrix<double>& SyntheticOracle::modes(std::string_view label) const {
  return get(label).modes;
}

SyntheticSet generate_synthetic_set(const SyntheticManifoldSpec& spec) {
  check_spec(spec);
  const Index n_snapshots = spec.parameter_samples.rows();

  SnapshotSet set;
  set.parameter_table = spec.parameter_samples;
  set.provenance = "synthetic manifold, seed " + std::to_string(spec.seed);

  SyntheticOracle::FieldMap oracle_fields;
  for (std::size_t f = 0; f < spec.fields.size(); ++f) {
    const auto& fs = spec.fields[f];
    SyntheticOracle::Field field{
        generating_modes(fs.n_dof, static_cast<Index>(fs.coefficients.size()),
                         splitmix64(spec.seed + 2 * f)),
        fs.coefficients};

    Matrix<double> data(fs.n_dof, n_snapshots);
    Xorshift64Star noise(splitmix64(spec.seed + 2 * f + 1));
    for (Index i = 0; i < n_snapshots; ++i) {
      data.col(i) = combine(field, spec.parameter_samples.row(i).transpose());
      if (spec.noise_amplitude > 0.0) {
        for (Index d = 0; d < fs.n_dof; ++d) {
          data(d, i) += spec.noise_amplitude * noise.uniform(-1.0, 1.0);
        }
      }
    }
    if (!data.allFinite()) invalid("field '" + fs.label + "' evaluates to non-finite values");
    set.fields.push_back({fs.label, std::move(data)});
    oracle_fields.emplace(fs.label, std::move(field));
  }
  try {
    check_snapshot_set(set);
  } catch (const Error& e) {
    invalid(e.what());
  }
  return {std::move(set), SyntheticOracle(std::move(oracle_fields))};
}

SyntheticManifoldSpec parse_synthetic_spec(std::string_view json_text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    invalid(std::string("spec is not valid JSON: ") + e.what());
  }

  try {
    SyntheticManifoldSpec spec;
    spec.seed = doc.value("seed", spec.seed);
    spec.noise_amplitude = doc.value("noise", 0.0);

    const auto& params = doc.at("parameters");
    if (params.is_object()) {
      const double step = params.at("step").get<double>();
      if (!(step > 0.0)) invalid("parameter step must be positive");
      std::vector<double> values;
      for (const auto& seg : params.at("segments")) {
        const double lo = seg.at(0).get<double>();
        const double hi = seg.at(1).get<double>();
        const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
        for (long i = 0; i <= count; ++i) values.push_back(lo + static_cast<double>(i) * step);
      }
      spec.parameter_samples = Eigen::Map<const Vector<double>>(values.data(), static_cast<Index>(values.size()));
    } else {
      const auto n = static_cast<Index>(params.size());
      const Index dim = n > 0 && params.at(0).is_array() ? static_cast<Index>(params.at(0).size()) : 1;
      spec.parameter_samples.resize(n, dim);
      for (Index i = 0; i < n; ++i) {
        const auto& row = params.at(static_cast<std::size_t>(i));
        if (row.is_array()) {
          if (static_cast<Index>(row.size()) != dim) invalid("ragged parameter list");
          for (Index d = 0; d < dim; ++d) spec.parameter_samples(i, d) = row.at(static_cast<std::size_t>(d)).get<double>();
        } else {
          if (dim != 1) invalid("ragged parameter list");
          spec.parameter_samples(i, 0) = row.get<double>();
        }
      }
    }

    for (const auto& jf : doc.at("fields")) {
      SyntheticFieldSpec field;
      field.label = jf.at("label").get<std::string>();
      field.n_dof = jf.at("n_dof").get<Index>();
      for (const auto& jc : jf.at("modes")) {
        CoefficientFunction fn;
        const auto kind = jc.value("kind", std::string("polynomial"));
        if (kind == "polynomial") {
          fn.kind = CoefficientFunction::Kind::Polynomial;
        } else if (kind == "sinusoidal") {
          fn.kind = CoefficientFunction::Kind::Sinusoidal;
        } else {
          invalid("unknown coefficient kind '" + kind + "'");
        }
        fn.coefficients = jc.at("coefficients").get<std::vector<double>>();
        fn.axis = jc.value("axis", Index{0});
        field.coefficients.push_back(std::move(fn));
      }
      spec.fields.push_back(std::move(field));
    }
    check_spec(spec);
    return spec;
  } catch (const json::exception& e) {
    invalid(std::string("malformed spec: ") + e.what());
  }
}

Matrix<double> gapped_pump_flow_samples() {
  Matrix<double> samples(10, 1);
  for (int i = 0; i < 5; ++i) {
    samples(i, 0) = 3.0 + 0.2 * i;
    samples(i + 5, 0) = 4.2 + 0.2 * i;
  }
  return samples;
}

SyntheticManifoldSpec lvad_like_spec(Matrix<double> samples, Index n_dof, std::uint64_t seed) {
  using Kind = CoefficientFunction::Kind;
  auto linear = [](double c0, double c1) { return CoefficientFunction{Kind::Polynomial, {c0, c1}, 0}; };

  SyntheticManifoldSpec spec;
  spec.seed = seed;
  spec.parameter_samples = std::move(samples);
  spec.fields = {
      {"p", n_dof, {linear(1.0e4, 2.0e3), linear(-40.0, 10.0)}},
      {"wss", n_dof, {linear(8.0, 1.0), linear(-0.2, 0.05)}},
      {"ux", n_dof, {linear(20.0, 5.0), linear(-40.0, 10.0)}},
      {"uy", n_dof, {linear(5.0, 1.5), linear(-12.0, 3.0)}},
      {"uz", n_dof, {linear(12.0, 3.0), linear(-24.0, 6.0)}},
  };
  return spec;
}

}  // namespace podi
