#include <cmath>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "podi/pod.hpp"

using namespace podi;
using fixtures::random_matrix;

namespace {

// Singular values from the eigenvalues of the Gram matrix, computed without SVD.
Vector<double> gram_singular_values(const Matrix<double>& s) {
  Eigen::SelfAdjointEigenSolver<Matrix<double>> eig(s.transpose() * s);
  Vector<double> ev = eig.eigenvalues().reverse();
  return ev.cwiseMax(0.0).cwiseSqrt();
}

PodBasis<double> basis_of(const Matrix<double>& s) {
  return compute_pod_basis(make_snapshot_matrix(s, "f"));
}

}  // namespace

TEST_CASE("assemble snapshot matrix") {
  std::vector<Vector<double>> cols = {Vector<double>{{1, 2}}, Vector<double>{{3, 4}}};
  auto s = assemble_snapshot_matrix<double>(cols, "p");
  CHECK(s.field_name == "p");
  CHECK(s.data == Matrix<double>{{1, 3}, {2, 4}});

  std::vector<Vector<double>> one = {Vector<double>{{5, 6, 7}}};
  auto s1 = assemble_snapshot_matrix<double>(one, "p");
  CHECK(s1.n_dof() == 3);
  CHECK(s1.n_snapshots() == 1);

  std::vector<Vector<double>> ragged = {Vector<double>{{1, 2}}, Vector<double>{{3}}};
  try {
    assemble_snapshot_matrix<double>(ragged, "p");
    FAIL("expected LengthMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::LengthMismatch);
  }

  std::vector<Vector<double>> bad = {Vector<double>{{1, 2}}, Vector<double>{{3, NAN}}};
  try {
    assemble_snapshot_matrix<double>(bad, "p");
    FAIL("expected NonFinite");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFinite);
    CHECK(std::string(e.what()).find("column 1") != std::string::npos);
  }
}

TEST_CASE("pod basis of simple matrices") {
  auto b = basis_of(Matrix<double>{{3}, {4}});
  REQUIRE(b.stored_rank() == 1);
  CHECK(b.modes(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(b.modes(1, 0) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(b.singular_values[0] == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(b.truncation_rank == 1);

  auto d = basis_of(Matrix<double>{{1, 1}, {0, 0}});
  CHECK(d.singular_values[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(std::abs(d.singular_values[1]) < 1e-15);
}

TEST_CASE("singular values match Gram eigenvalue oracle") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto s = random_matrix(5, 3, seed);
    const auto b = basis_of(s);
    const auto oracle = gram_singular_values(s);
    REQUIRE(b.singular_values.size() == 3);
    for (Index i = 0; i < 3; ++i) CHECK(std::abs(b.singular_values[i] - oracle[i]) < 1e-10);
  }
}

TEST_CASE("basis properties on random matrices") {
  const std::vector<std::pair<Index, Index>> shapes = {{20, 6}, {6, 20}, {50, 10}, {1, 4}, {7, 7}};
  std::uint64_t seed = 11;
  for (auto [n, ns] : shapes) {
    CAPTURE(n);
    CAPTURE(ns);
    const auto s = random_matrix(n, ns, seed++);
    const auto b = basis_of(s);
    const Index r = std::min(n, ns);
    REQUIRE(b.stored_rank() == r);

    // orthonormality
    const Matrix<double> gram = b.modes.transpose() * b.modes;
    CHECK((gram - Matrix<double>::Identity(r, r)).cwiseAbs().maxCoeff() < 1e-10);

    // ordering
    for (Index i = 0; i < r; ++i) CHECK(b.singular_values[i] >= 0.0);
    for (Index i = 0; i + 1 < r; ++i) CHECK(b.singular_values[i] >= b.singular_values[i + 1]);

    // sign convention
    for (Index j = 0; j < r; ++j) {
      Index arg = 0;
      b.modes.col(j).cwiseAbs().maxCoeff(&arg);
      CHECK(b.modes(arg, j) > 0.0);
    }

    // full-rank exactness
    const auto sm = make_snapshot_matrix(s, "f");
    const auto c = project_coefficients(b, sm);
    CHECK((b.modes * c.matrix - s).norm() / s.norm() < 1e-10);

    // optimal truncation residual
    const double total = s.squaredNorm();
    for (Index k = 1; k <= r; ++k) {
      const auto t = truncate(b, k);
      const Matrix<double> residual = s - t.modes * (t.modes.transpose() * s);
      const double tail = b.singular_values.tail(r - k).squaredNorm();
      CHECK(std::abs(residual.squaredNorm() - tail) <= 1e-8 * std::max(tail, 1e-8 * total));
    }

    // energy monotone, ends at 1
    const auto e = cumulative_energy(b);
    for (Index i = 0; i + 1 < e.size(); ++i) CHECK(e[i] <= e[i + 1]);
    CHECK(std::abs(e[e.size() - 1] - 1.0) <= 1e-12);
  }
}

TEST_CASE("cumulative energy uses squared singular values") {
  auto check = [](Vector<double> sv, std::vector<double> expected) {
    const auto e = cumulative_energy(sv);
    REQUIRE(e.size() == static_cast<Index>(expected.size()));
    for (Index i = 0; i < e.size(); ++i) CHECK(e[i] == doctest::Approx(expected[i]).epsilon(1e-15));
  };
  check(Vector<double>{{1, 0}}, {1.0, 1.0});
  check(Vector<double>{{2, 1}}, {0.8, 1.0});
  check(Vector<double>{{1, 1, 1}}, {1.0 / 3, 2.0 / 3, 1.0});

  try {
    cumulative_energy(Vector<double>(Vector<double>::Zero(3)));
    FAIL("expected DegenerateSpectrum");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateSpectrum);
  }
  const auto zero = basis_of(Matrix<double>::Zero(4, 2));
  CHECK_THROWS_AS(rank_for_energy(zero, 0.99), Error);
}

TEST_CASE("rank selection from cumulative energies") {
  const std::vector<double> pressure = {0.9999, 0.9999};
  const std::vector<double> uy = {0.9729, 0.9903};
  CHECK(rank_for_cumulative_energy<double>(pressure, 0.99) == 1);
  CHECK(rank_for_cumulative_energy<double>(uy, 0.99) == 2);

  const auto flat = basis_of(Matrix<double>{{1, 0}, {0, 1}});
  CHECK(rank_for_energy(flat, 1.0) == 2);

  CHECK_THROWS_AS(rank_for_cumulative_energy<double>(uy, 0.0), Error);
  CHECK_THROWS_AS(rank_for_cumulative_energy<double>(uy, 1.5), Error);
}

TEST_CASE("rank is monotone in the threshold") {
  const auto b = basis_of(random_matrix(30, 8, 99));
  Index previous = 0;
  for (double t = 0.05; t <= 1.0; t += 0.05) {
    const Index k = rank_for_energy(b, std::min(t, 1.0));
    CHECK(k >= previous);
    previous = k;
  }
}

TEST_CASE("truncate") {
  const auto b = basis_of(random_matrix(6, 3, 3));
  const auto full = truncate(b, 3);
  CHECK(full.modes == b.modes);
  const auto one = truncate(b, 1);
  CHECK(one.stored_rank() == 1);
  CHECK(one.modes.col(0) == b.modes.col(0));
  CHECK(one.singular_values[0] == b.singular_values[0]);
  for (Index k : {Index(0), Index(4)}) {
    try {
      truncate(b, k);
      FAIL("expected RankOutOfRange");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::RankOutOfRange);
    }
  }
}

TEST_CASE("projection and reconstruction") {
  PodBasis<double> e12;
  e12.modes = Matrix<double>{{1, 0}, {0, 1}, {0, 0}};
  e12.singular_values = Vector<double>{{1, 1}};
  e12.truncation_rank = 2;
  const auto c = project_coefficients(e12, make_snapshot_matrix(Matrix<double>{{5}, {7}, {9}}, "f"));
  CHECK(c.matrix == Matrix<double>{{5}, {7}});

  CHECK(reconstruct(e12, Vector<double>::Zero(2)).isZero());
  CHECK(reconstruct(e12, Vector<double>{{0, 1}}) == e12.modes.col(1));

  // snapshots inside span(U_k) come back unchanged
  const auto s = random_matrix(12, 5, 21);
  const auto b = truncate(basis_of(s), 2);
  const Matrix<double> in_span = b.modes * random_matrix(2, 4, 22);
  const auto coeffs = project_coefficients(b, make_snapshot_matrix(in_span, "f"));
  for (Index i = 0; i < in_span.cols(); ++i) {
    const auto x = reconstruct(b, coeffs.matrix.col(i));
    CHECK((x - in_span.col(i)).norm() / in_span.col(i).norm() < 1e-12);
  }

  CHECK_THROWS_AS(project_coefficients(b, make_snapshot_matrix(random_matrix(5, 2, 1), "f")), Error);
  CHECK_THROWS_AS(reconstruct(b, Vector<double>::Zero(3)), Error);
}

TEST_CASE("relative L2 error") {
  const Vector<double> x{{3, 4}};
  CHECK(relative_error_l2(x, x) == 0.0);
  CHECK(relative_error_l2(x, Vector<double>(Vector<double>::Zero(2))) == doctest::Approx(100.0));
  CHECK(relative_error_l2(x, Vector<double>{{3, 4.5}}) == doctest::Approx(10.0).epsilon(1e-14));

  const Vector<double> a = random_matrix(50, 1, 5);
  const Vector<double> b = random_matrix(50, 1, 6);
  for (double c : {-3.0, 1e-5, 7.5e6}) {
    const Vector<double> ca = c * a;
    const Vector<double> cb = c * b;
    CHECK(std::abs(relative_error_l2(ca, cb) - relative_error_l2(a, b)) < 1e-12);
  }

  try {
    relative_error_l2(Vector<double>(Vector<double>::Zero(2)), x);
    FAIL("expected ZeroReference");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroReference);
  }

  const Vector<double> ones = Vector<double>::Ones(2);
  CHECK(relative_error_l2(x, Vector<double>{{3, 4.5}}, ones) == doctest::Approx(10.0).epsilon(1e-14));
  // weight 4 on the second entry: 100 * sqrt(4 * 0.25) / sqrt(9 + 64)
  CHECK(relative_error_l2(x, Vector<double>{{3, 4.5}}, Vector<double>{{1, 4}}) ==
        doctest::Approx(100.0 / std::sqrt(73.0)).epsilon(1e-14));
}
