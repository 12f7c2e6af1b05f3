#pragma once

#include <atomic>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

#include "podi/pod.hpp"
#include "podi/synthetic.hpp"

namespace fixtures {

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("podi_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline podi::Matrix<double> random_matrix(podi::Index rows, podi::Index cols, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  podi::Matrix<double> m(rows, cols);
  for (podi::Index j = 0; j < cols; ++j)
    for (podi::Index i = 0; i < rows; ++i) m(i, j) = dist(gen);
  return m;
}

inline podi::Matrix<double> column(std::initializer_list<double> values) {
  podi::Matrix<double> m(static_cast<podi::Index>(values.size()), 1);
  podi::Index i = 0;
  for (double v : values) m(i++, 0) = v;
  return m;
}

inline podi::Vector<double> point(double x) { return podi::Vector<double>::Constant(1, x); }

inline podi::CoefficientFunction linear(double c0, double c1) {
  return {podi::CoefficientFunction::Kind::Polynomial, {c0, c1}, 0};
}

// Ten equispaced samples over [3, 5] with a rank-2 linear-coefficient field "u".
inline podi::SyntheticManifoldSpec rank2_spec(podi::Index n_dof = 400, std::uint64_t seed = 7) {
  podi::SyntheticManifoldSpec spec;
  spec.seed = seed;
  spec.parameter_samples.resize(10, 1);
  for (int i = 0; i < 10; ++i) spec.parameter_samples(i, 0) = 3.0 + 2.0 * i / 9.0;
  spec.fields = {{"u", n_dof, {linear(2.0, 1.0), linear(-4.0, 1.0)}}};
  return spec;
}

inline bool bitwise_equal(const podi::Matrix<double>& a, const podi::Matrix<double>& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace fixtures
