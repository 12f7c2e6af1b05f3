#pragma once

// Gaussian radial basis function interpolation over a P-dimensional
// parameter space. Centers are stored as the rows of a matrix.

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "podi/error.hpp"
#include "podi/pod.hpp"

namespace podi {

template <typename Scalar>
using ParameterPoint = Vector<Scalar>;

/// exp(-(shape * r)^2)
template <typename Scalar>
Scalar gaussian_kernel(Scalar r, Scalar shape) {
  const Scalar scaled = shape * r;
  return std::exp(-scaled * scaled);
}

/// Per-coordinate affine map x -> (x - offset) * scale taking the training
/// box onto [0, 1]^P. Coordinates with zero extent map through unchanged.
template <typename Scalar>
class ParameterScaling {
 public:
  ParameterScaling() = default;
  ParameterScaling(Vector<Scalar> offset, Vector<Scalar> scale)
      : offset_(std::move(offset)), scale_(std::move(scale)) {
    if (offset_.size() != scale_.size()) {
      throw Error(ErrorCode::DimensionMismatch, "scaling offset/scale length mismatch");
    }
  }

  static ParameterScaling identity(Index dim) {
    return {Vector<Scalar>::Zero(dim), Vector<Scalar>::Ones(dim)};
  }

  static ParameterScaling unit_box(const Matrix<Scalar>& centers) {
    const Index dim = centers.cols();
    Vector<Scalar> offset = Vector<Scalar>::Zero(dim);
    Vector<Scalar> scale = Vector<Scalar>::Ones(dim);
    for (Index d = 0; d < dim; ++d) {
      const Scalar lo = centers.col(d).minCoeff();
      const Scalar hi = centers.col(d).maxCoeff();
      if (hi > lo) {
        offset[d] = lo;
        scale[d] = Scalar(1) / (hi - lo);
      }
    }
    return {std::move(offset), std::move(scale)};
  }

  Index dim() const { return offset_.size(); }
  const Vector<Scalar>& offset() const { return offset_; }
  const Vector<Scalar>& scale() const { return scale_; }

  template <typename Derived>
  Vector<Scalar> apply(const Eigen::MatrixBase<Derived>& point) const {
    return ((point - offset_).array() * scale_.array()).matrix();
  }

  Matrix<Scalar> apply_rows(const Matrix<Scalar>& points) const {
    return ((points.rowwise() - offset_.transpose()).array().rowwise() * scale_.transpose().array())
        .matrix();
  }

 private:
  Vector<Scalar> offset_;
  Vector<Scalar> scale_;
};

/// 1 / (mean pairwise Euclidean distance between the rows of `centers`).
template <typename Scalar>
Scalar default_shape_parameter(const Matrix<Scalar>& centers) {
  const Index n = centers.rows();
  if (n < 2) {
    throw Error(ErrorCode::InsufficientCenters, "default shape parameter needs at least two centers");
  }
  Scalar total(0);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) total += (centers.row(i) - centers.row(j)).norm();
  }
  const Scalar mean = total / Scalar(n * (n - 1) / 2);
  if (!(mean > Scalar(0))) {
    throw Error(ErrorCode::DuplicateCenters, "all centers coincide");
  }
  return Scalar(1) / mean;
}

/// K_im = kernel(||c_i - c_m||); symmetric by construction.
template <typename Scalar>
Matrix<Scalar> kernel_matrix(const Matrix<Scalar>& centers, Scalar shape) {
  const Index n = centers.rows();
  Matrix<Scalar> k(n, n);
  for (Index i = 0; i < n; ++i) {
    k(i, i) = Scalar(1);
    for (Index m = i + 1; m < n; ++m) {
      k(i, m) = k(m, i) = gaussian_kernel<Scalar>((centers.row(i) - centers.row(m)).norm(), shape);
    }
  }
  return k;
}

template <typename Scalar>
struct RbfOptions {
  std::optional<Scalar> shape;  // default_shape_parameter of the scaled centers when empty
  Scalar ridge = Scalar(0);
  bool normalize = true;
};

/// One scalar Gaussian interpolant A(pi) = sum_m w_m kernel(||pi - pi_m||).
template <typename Scalar>
class RbfInterpolator {
 public:
  /// Reassembles a fitted interpolator (used when loading models).
  RbfInterpolator(Matrix<Scalar> centers, ParameterScaling<Scalar> scaling, Scalar shape,
                  Scalar ridge, Vector<Scalar> weights)
      : centers_(std::move(centers)),
        scaling_(std::move(scaling)),
        shape_(shape),
        ridge_(ridge),
        weights_(std::move(weights)) {
    if (centers_.rows() < 1 || centers_.cols() < 1) {
      throw Error(ErrorCode::InvalidArgument, "interpolator needs at least one center");
    }
    if (weights_.size() != centers_.rows()) {
      throw Error(ErrorCode::DimensionMismatch, "weights/centers length mismatch");
    }
    if (scaling_.dim() != centers_.cols()) {
      throw Error(ErrorCode::DimensionMismatch, "scaling dimension differs from center dimension");
    }
    if (!(shape_ > Scalar(0)) || !std::isfinite(shape_)) {
      throw Error(ErrorCode::InvalidArgument, "shape parameter must be positive and finite");
    }
    if (!(ridge_ >= Scalar(0))) {
      throw Error(ErrorCode::InvalidArgument, "ridge must be nonnegative");
    }
    scaled_centers_ = scaling_.apply_rows(centers_);
  }

  const Matrix<Scalar>& centers() const { return centers_; }
  const ParameterScaling<Scalar>& scaling() const { return scaling_; }
  Scalar shape() const { return shape_; }
  Scalar ridge() const { return ridge_; }
  const Vector<Scalar>& weights() const { return weights_; }
  Index dim() const { return centers_.cols(); }
  Index size() const { return centers_.rows(); }

  template <typename Derived>
  Scalar operator()(const Eigen::MatrixBase<Derived>& target) const {
    if (target.size() != dim()) {
      throw Error(ErrorCode::DimensionMismatch,
                  "parameter has dimension " + std::to_string(target.size()) + ", expected " +
                      std::to_string(dim()));
    }
    const Vector<Scalar> x = scaling_.apply(target);
    Scalar sum(0);
    for (Index m = 0; m < scaled_centers_.rows(); ++m) {
      sum += weights_[m] *
             gaussian_kernel<Scalar>((scaled_centers_.row(m).transpose() - x).norm(), shape_);
    }
    return sum;
  }

 private:
  Matrix<Scalar> centers_;
  Matrix<Scalar> scaled_centers_;
  ParameterScaling<Scalar> scaling_;
  Scalar shape_;
  Scalar ridge_;
  Vector<Scalar> weights_;
};

template <typename Scalar, typename Derived>
Scalar evaluate(const RbfInterpolator<Scalar>& interp, const Eigen::MatrixBase<Derived>& target) {
  return interp(target);
}

/// Throws DuplicateCenters when two rows coincide.
template <typename Scalar>
void require_distinct_centers(const Matrix<Scalar>& centers) {
  for (Index i = 0; i < centers.rows(); ++i) {
    for (Index j = i + 1; j < centers.rows(); ++j) {
      if ((centers.row(i) - centers.row(j)).squaredNorm() == Scalar(0)) {
        throw Error(ErrorCode::DuplicateCenters,
                    "centers " + std::to_string(i) + " and " + std::to_string(j) + " coincide");
      }
    }
  }
}

/// Fits one interpolant per row of `values` (k x N_s) against a shared set of
/// centers, factoring the kernel matrix once. If the Cholesky factorization
/// of K + ridge*I fails, a ridge of 1e-12 * trace(K) / N_s is added and the
/// solve retried; the ridge actually used is recorded on each interpolator.
template <typename Scalar>
std::vector<RbfInterpolator<Scalar>> fit_modes(const Matrix<Scalar>& centers,
                                               const Matrix<Scalar>& values,
                                               const RbfOptions<Scalar>& options = {}) {
  const Index n = centers.rows();
  if (n < 1 || centers.cols() < 1) {
    throw Error(ErrorCode::InvalidArgument, "no centers given");
  }
  if (values.cols() != n) {
    throw Error(ErrorCode::DimensionMismatch,
                "expected " + std::to_string(n) + " values per mode, got " +
                    std::to_string(values.cols()));
  }
  require_finite(centers, "RBF centers");
  require_finite(values, "RBF values");
  require_distinct_centers(centers);

  auto scaling = options.normalize ? ParameterScaling<Scalar>::unit_box(centers)
                                   : ParameterScaling<Scalar>::identity(centers.cols());
  const Matrix<Scalar> scaled = scaling.apply_rows(centers);
  const Scalar shape = options.shape ? *options.shape : default_shape_parameter(scaled);
  if (!(shape > Scalar(0)) || !std::isfinite(shape)) {
    throw Error(ErrorCode::InvalidArgument, "shape parameter must be positive and finite");
  }
  if (!(options.ridge >= Scalar(0))) {
    throw Error(ErrorCode::InvalidArgument, "ridge must be nonnegative");
  }

  const Matrix<Scalar> kernel = kernel_matrix(scaled, shape);
  const Matrix<Scalar> rhs = values.transpose();

  auto try_solve = [&](Scalar ridge) -> std::optional<Matrix<Scalar>> {
    Matrix<Scalar> system = kernel;
    system.diagonal().array() += ridge;
    Eigen::LLT<Matrix<Scalar>> llt(system);
    if (llt.info() != Eigen::Success) return std::nullopt;
    Matrix<Scalar> w = llt.solve(rhs);
    if (!w.allFinite()) return std::nullopt;
    return w;
  };

  Scalar ridge = options.ridge;
  auto weights = try_solve(ridge);
  if (!weights) {
    ridge += Scalar(1e-12) * kernel.trace() / Scalar(n);
    weights = try_solve(ridge);
  }
  if (!weights) {
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(kernel, Eigen::EigenvaluesOnly);
    const auto& ev = eig.eigenvalues();
    const Scalar cond = ev.maxCoeff() / std::max(std::abs(ev.minCoeff()),
                                                 std::numeric_limits<Scalar>::min());
    throw Error(ErrorCode::SingularSystem,
                "RBF kernel matrix is numerically singular (condition estimate " +
                    std::to_string(static_cast<double>(cond)) + ")",
                static_cast<double>(cond));
  }

  std::vector<RbfInterpolator<Scalar>> out;
  out.reserve(static_cast<std::size_t>(values.rows()));
  for (Index j = 0; j < values.rows(); ++j) {
    out.emplace_back(centers, scaling, shape, ridge, Vector<Scalar>(weights->col(j)));
  }
  return out;
}

/// Solves (K + ridge I) w = values for a single response.
template <typename Scalar>
RbfInterpolator<Scalar> fit(const Matrix<Scalar>& centers, const Vector<Scalar>& values,
                            Scalar shape, Scalar ridge = Scalar(0), bool normalize = true) {
  RbfOptions<Scalar> options;
  options.shape = shape;
  options.ridge = ridge;
  options.normalize = normalize;
  return std::move(fit_modes<Scalar>(centers, values.transpose(), options).front());
}

}  // namespace podi
