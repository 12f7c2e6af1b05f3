#pragma once

// Proper orthogonal decomposition of snapshot matrices: SVD basis
// extraction, energy-based truncation, modal projection and reconstruction.
// Everything is templated on the scalar type and operates on Eigen dense
// storage; snapshots are columns and are not mean-centred.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "podi/error.hpp"

namespace podi {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Throws NonFinite naming the first offending (row, column).
template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const std::string& what) {
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) {
      if (!std::isfinite(m(i, j))) {
        throw Error(ErrorCode::NonFinite,
                    what + ": non-finite entry at row " + std::to_string(i) +
                        ", column " + std::to_string(j));
      }
    }
  }
}

/// N x N_s matrix whose column i is the snapshot at the i-th training parameter.
template <typename Scalar>
struct SnapshotMatrix {
  std::string field_name;
  Matrix<Scalar> data;

  Index n_dof() const { return data.rows(); }
  Index n_snapshots() const { return data.cols(); }
};

/// Wraps an existing matrix after checking shape and finiteness.
template <typename Scalar>
SnapshotMatrix<Scalar> make_snapshot_matrix(Matrix<Scalar> data, std::string field_name) {
  if (data.rows() < 1 || data.cols() < 1) {
    throw Error(ErrorCode::InvalidArgument,
                "snapshot matrix for '" + field_name + "' is empty");
  }
  require_finite(data, "snapshot matrix '" + field_name + "'");
  return {std::move(field_name), std::move(data)};
}

template <typename Scalar>
SnapshotMatrix<Scalar> assemble_snapshot_matrix(std::span<const Vector<Scalar>> snapshots,
                                                std::string field_name) {
  if (snapshots.empty()) {
    throw Error(ErrorCode::InvalidArgument, "no snapshots given for '" + field_name + "'");
  }
  const Index n_dof = snapshots.front().size();
  Matrix<Scalar> data(n_dof, static_cast<Index>(snapshots.size()));
  for (std::size_t i = 0; i < snapshots.size(); ++i) {
    if (snapshots[i].size() != n_dof) {
      throw Error(ErrorCode::LengthMismatch,
                  "snapshot " + std::to_string(i) + " has length " +
                      std::to_string(snapshots[i].size()) + ", expected " +
                      std::to_string(n_dof));
    }
    data.col(static_cast<Index>(i)) = snapshots[i];
  }
  return make_snapshot_matrix<Scalar>(std::move(data), std::move(field_name));
}

/// Left singular vectors and singular values of a snapshot matrix. Only the
/// first `truncation_rank` modes take part in projection/reconstruction.
template <typename Scalar>
struct PodBasis {
  Matrix<Scalar> modes;
  Vector<Scalar> singular_values;
  Index truncation_rank = 0;

  Index n_dof() const { return modes.rows(); }
  Index stored_rank() const { return modes.cols(); }
  auto active_modes() const { return modes.leftCols(truncation_rank); }
};

/// Row j, column i holds alpha_j(pi_i).
template <typename Scalar>
struct ModalCoefficients {
  Matrix<Scalar> matrix;
};

namespace detail {

template <typename Scalar>
constexpr Scalar svd_check_tolerance() {
  return std::max<Scalar>(Scalar(1e-12), Scalar(1e3) * std::numeric_limits<Scalar>::epsilon());
}

}  // namespace detail

/// Thin SVD of S. Each mode's sign is fixed so that its largest-magnitude
/// entry is positive; ties go to the lowest row index.
template <typename Scalar>
PodBasis<Scalar> compute_pod_basis(const SnapshotMatrix<Scalar>& snapshots) {
  const auto& s = snapshots.data;
  Eigen::JacobiSVD<Matrix<Scalar>, Eigen::ColPivHouseholderQRPreconditioner> svd(
      s, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) {
    throw Error(ErrorCode::NumericalFailure, "SVD of '" + snapshots.field_name + "' did not converge");
  }

  Matrix<Scalar> u = svd.matrixU();
  Matrix<Scalar> v = svd.matrixV();
  Vector<Scalar> sigma = svd.singularValues();

  for (Index j = 0; j < u.cols(); ++j) {
    Index pivot = 0;
    u.col(j).cwiseAbs().maxCoeff(&pivot);
    if (u(pivot, j) < Scalar(0)) {
      u.col(j) = -u.col(j);
      v.col(j) = -v.col(j);
    }
  }

  const Scalar s_norm = s.norm();
  const Scalar residual = (u * sigma.asDiagonal() * v.transpose() - s).norm();
  const bool ok = std::isfinite(residual) &&
                  (s_norm == Scalar(0) ? residual == Scalar(0)
                                       : residual <= detail::svd_check_tolerance<Scalar>() * s_norm);
  if (!ok) {
    throw Error(ErrorCode::NumericalFailure,
                "SVD reconstruction check failed for '" + snapshots.field_name + "'",
                static_cast<double>(residual));
  }

  PodBasis<Scalar> basis;
  basis.truncation_rank = u.cols();
  basis.modes = std::move(u);
  basis.singular_values = std::move(sigma);
  return basis;
}

/// Entry m is sum_{i<=m} sigma_i^2 / sum_i sigma_i^2. The last entry is 1
/// exactly because both sums accumulate in the same order.
template <typename Scalar>
Vector<Scalar> cumulative_energy(const Vector<Scalar>& singular_values) {
  if (singular_values.size() == 0) {
    throw Error(ErrorCode::DegenerateSpectrum, "empty spectrum");
  }
  Vector<Scalar> partial(singular_values.size());
  Scalar running(0);
  for (Index i = 0; i < singular_values.size(); ++i) {
    running += singular_values[i] * singular_values[i];
    partial[i] = running;
  }
  if (!(running > Scalar(0))) {
    throw Error(ErrorCode::DegenerateSpectrum, "all singular values are zero");
  }
  return partial / running;
}

template <typename Scalar>
Vector<Scalar> cumulative_energy(const PodBasis<Scalar>& basis) {
  return cumulative_energy<Scalar>(basis.singular_values);
}

/// Smallest k whose cumulative energy reaches `threshold`.
template <typename Scalar>
Index rank_for_cumulative_energy(std::span<const Scalar> energies, Scalar threshold) {
  if (!(threshold > Scalar(0) && threshold <= Scalar(1))) {
    throw Error(ErrorCode::InvalidArgument, "energy threshold must lie in (0, 1]");
  }
  if (energies.empty()) {
    throw Error(ErrorCode::DegenerateSpectrum, "empty energy sequence");
  }
  for (std::size_t k = 0; k < energies.size(); ++k) {
    if (energies[k] >= threshold) return static_cast<Index>(k + 1);
  }
  return static_cast<Index>(energies.size());
}

template <typename Scalar>
Index rank_for_energy(const PodBasis<Scalar>& basis, Scalar threshold) {
  const Vector<Scalar> energy = cumulative_energy(basis);
  return rank_for_cumulative_energy<Scalar>(std::span<const Scalar>(energy.data(), energy.size()),
                                            threshold);
}

template <typename Scalar>
PodBasis<Scalar> truncate(const PodBasis<Scalar>& basis, Index k) {
  if (k < 1 || k > basis.stored_rank()) {
    throw Error(ErrorCode::RankOutOfRange,
                "rank " + std::to_string(k) + " outside [1, " +
                    std::to_string(basis.stored_rank()) + "]");
  }
  PodBasis<Scalar> out;
  out.modes = basis.modes.leftCols(k);
  out.singular_values = basis.singular_values.head(k);
  out.truncation_rank = k;
  return out;
}

/// C = U_k^T S.
template <typename Scalar>
ModalCoefficients<Scalar> project_coefficients(const PodBasis<Scalar>& basis,
                                               const SnapshotMatrix<Scalar>& snapshots) {
  if (basis.n_dof() != snapshots.n_dof()) {
    throw Error(ErrorCode::DimensionMismatch,
                "basis has " + std::to_string(basis.n_dof()) + " dofs, snapshots have " +
                    std::to_string(snapshots.n_dof()));
  }
  return {basis.active_modes().transpose() * snapshots.data};
}

/// sum_j coeffs[j] * mode_j over the active modes.
template <typename Scalar, typename Derived>
Vector<Scalar> reconstruct(const PodBasis<Scalar>& basis, const Eigen::MatrixBase<Derived>& coeffs) {
  if (coeffs.size() != basis.truncation_rank) {
    throw Error(ErrorCode::DimensionMismatch,
                "expected " + std::to_string(basis.truncation_rank) + " coefficients, got " +
                    std::to_string(coeffs.size()));
  }
  return basis.active_modes() * coeffs;
}

/// 100 * ||x_fom - x_rom|| / ||x_fom||, in percent.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar relative_error_l2(const Eigen::MatrixBase<DerivedA>& x_fom,
                                            const Eigen::MatrixBase<DerivedB>& x_rom) {
  using Scalar = typename DerivedA::Scalar;
  if (x_fom.size() != x_rom.size()) {
    throw Error(ErrorCode::DimensionMismatch, "reference and approximation differ in length");
  }
  const Scalar reference = x_fom.norm();
  if (!(reference > Scalar(0))) {
    throw Error(ErrorCode::ZeroReference, "reference field has zero norm");
  }
  return Scalar(100) * (x_fom - x_rom).norm() / reference;
}

/// Weighted variant: ||x||_w^2 = sum_i w_i x_i^2 (e.g. cell volumes).
template <typename DerivedA, typename DerivedB, typename DerivedW>
typename DerivedA::Scalar relative_error_l2(const Eigen::MatrixBase<DerivedA>& x_fom,
                                            const Eigen::MatrixBase<DerivedB>& x_rom,
                                            const Eigen::MatrixBase<DerivedW>& weights) {
  using Scalar = typename DerivedA::Scalar;
  if (x_fom.size() != x_rom.size() || weights.size() != x_fom.size()) {
    throw Error(ErrorCode::DimensionMismatch, "reference, approximation and weights differ in length");
  }
  if ((weights.array() < Scalar(0)).any()) {
    throw Error(ErrorCode::InvalidArgument, "norm weights must be nonnegative");
  }
  const Scalar reference = std::sqrt((weights.array() * x_fom.array().square()).sum());
  if (!(reference > Scalar(0))) {
    throw Error(ErrorCode::ZeroReference, "reference field has zero weighted norm");
  }
  const Scalar diff = std::sqrt((weights.array() * (x_fom - x_rom).array().square()).sum());
  return Scalar(100) * diff / reference;
}

}  // namespace podi
