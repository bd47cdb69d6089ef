#include "tfb/dataset.hpp"
#include "tfb/random.hpp"

#include <doctest.h>

#include <cmath>

using namespace tfb;

TEST_SUITE("dataset") {

TEST_CASE("validate accepts the minimal legal input") {
  const Dataset d = validate(Vector::LinSpaced(2, 1, 2), (Vector(2) << 0, 1).finished(),
                             (Matrix(2, 1) << 0, 1).finished());
  CHECK(d.n() == 2);
  CHECK(d.n_control == 1);
  CHECK(d.n_treated == 1);
  CHECK(d.column_names == std::vector<std::string>{"x1"});
}

TEST_CASE("validate rejects an empty group") {
  CHECK_THROWS_WITH_AS(validate(Vector::LinSpaced(2, 1, 2), Vector::Zero(2), Matrix::Zero(2, 1)),
                       "no treated units", DataError);
}

TEST_CASE("validate reorders control units first and records the permutation") {
  Matrix X(3, 2);
  X << 10, 11, 20, 21, 30, 31;
  const Dataset d = validate((Vector(3) << 1, 2, 3).finished(), (Vector(3) << 1, 0, 0).finished(), X);
  CHECK(d.n_control == 2);
  CHECK(d.input_index == std::vector<Index>{1, 2, 0});
  CHECK(d.outcomes(0) == 2);
  CHECK(d.outcomes(1) == 3);
  CHECK(d.outcomes(2) == 1);
  CHECK(d.covariates(0, 0) == 20);
  CHECK(d.covariates(2, 1) == 11);
  CHECK(d.treatment(2) == 1);
}

TEST_CASE("validate reports bad inputs with their position") {
  CHECK_THROWS_AS(validate(Vector::Zero(3), Vector::Zero(2), Matrix::Zero(3, 1)), DataError);
  CHECK_THROWS_WITH_AS(validate(Vector::Zero(2), (Vector(2) << 0, 2).finished(), Matrix::Zero(2, 1)),
                       doctest::Contains("row 1"), DataError);
  Matrix X = Matrix::Zero(2, 2);
  X(1, 1) = std::nan("");
  CHECK_THROWS_WITH_AS(validate(Vector::Zero(2), (Vector(2) << 0, 1).finished(), X),
                       doctest::Contains("column 1"), DataError);
}

TEST_CASE("validate is idempotent on valid data") {
  Rng rng(3);
  Matrix X(9, 2);
  Vector y(9), t(9);
  for (Index i = 0; i < 9; ++i) {
    y(i) = rng.normal();
    t(i) = i % 3 == 0 ? 1 : 0;
    X(i, 0) = rng.normal();
    X(i, 1) = rng.normal();
  }
  const Dataset a = validate(y, t, X);
  const Dataset b = validate(a.outcomes, a.treatment.cast<double>(), a.covariates);
  CHECK(b.outcomes == a.outcomes);
  CHECK(b.covariates == a.covariates);
  CHECK(b.n_control == a.n_control);
}

TEST_CASE("standardize_covariates") {
  Matrix X(3, 2);
  X << 1, 5, 2, 5, 3, 5;
  const Dataset d = validate(Vector::Zero(3), (Vector(3) << 0, 1, 0).finished(), X);
  const auto [s, rec] = standardize_covariates(d);

  SUBCASE("column [1,2,3] maps to [-1,0,1]") {
    // rows are control-first: inputs 1, 3 then 2
    CHECK(s.covariates(0, 0) == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(s.covariates(1, 0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(std::abs(s.covariates(2, 0)) < 1e-15);
  }
  SUBCASE("constant column passes through with a flag") {
    CHECK(rec.constant[1]);
    CHECK(!rec.constant[0]);
    CHECK(rec.any_constant());
    CHECK(s.covariates.col(1) == d.covariates.col(1));
  }
  SUBCASE("record inverts the transform") {
    for (Index i = 0; i < 3; ++i) {
      const Vector back = rec.invert(s.covariates.row(i).transpose());
      CHECK((back - d.covariates.row(i).transpose()).norm() < 1e-14);
    }
  }
  SUBCASE("already standardized input is unchanged") {
    const auto again = standardize_covariates(s).first;
    CHECK((again.covariates - s.covariates).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("expand_features") {
  Matrix X(4, 2);
  X << 1, 2, 3, 4, 0, 1, 1, 0;
  const Dataset d = validate(Vector::Zero(4), (Vector(4) << 0, 1, 0, 1).finished(), X);

  SUBCASE("P=2 gives five named columns") {
    const Dataset e = expand_features(d);
    CHECK(e.column_names == std::vector<std::string>{"x1", "x2", "x1^2", "x1:x2", "x2^2"});
    for (Index i = 0; i < 4; ++i) {
      CHECK(e.covariates(i, 3) == d.covariates(i, 0) * d.covariates(i, 1));
    }
  }
  SUBCASE("P=19 gives 209 columns") {
    const Dataset big = validate(Vector::Zero(4), (Vector(4) << 0, 1, 0, 1).finished(),
                                 Matrix::Random(4, 19));
    CHECK(expand_features(big).p() == 209);
  }
  SUBCASE("exclusions drop named terms in either order") {
    const Dataset e = expand_features(d, {"x2:x1", "x1^2"});
    CHECK(e.column_names == std::vector<std::string>{"x1", "x2", "x2^2"});
  }
  SUBCASE("unknown exclusion is rejected") {
    CHECK_THROWS_AS(expand_features(d, {"x9:x1"}), DataError);
  }
  SUBCASE("binary column squares to itself") {
    Matrix B(4, 1);
    B << 0, 1, 1, 0;
    const Dataset e =
        expand_features(validate(Vector::Zero(4), (Vector(4) << 0, 1, 0, 1).finished(), B));
    CHECK(e.covariates.col(1) == e.covariates.col(0));
  }
  SUBCASE("expansion then standardization stays finite") {
    Matrix W(6, 3);
    W << 1e3, 0, 5, -1e3, 0, 5, 2, 0, 5, 3, 1, 5, 4, 0, 5, 5, 1, 5;
    const Dataset wide = validate(Vector::Zero(6), (Vector(6) << 0, 1, 0, 1, 0, 1).finished(), W);
    CHECK(standardize_covariates(expand_features(wide)).first.covariates.allFinite());
  }
}

Dataset groups(Index nc, Index nt) {
  Vector t(nc + nt);
  t << Vector::Zero(nc), Vector::Ones(nt);
  return validate(Vector::Zero(nc + nt), t, Matrix::Zero(nc + nt, 1));
}

TEST_CASE("split_sample") {
  SUBCASE("four of each group split two and two") {
    const Dataset d = groups(4, 4);
    const FoldAssignment f = split_sample(d, 11);
    int c0 = 0, t0 = 0;
    for (Index i = 0; i < 8; ++i) {
      if (f.fold_of_unit[static_cast<std::size_t>(i)] == 0) (i < 4 ? c0 : t0)++;
    }
    CHECK(c0 == 2);
    CHECK(t0 == 2);
  }
  SUBCASE("five controls split three and two") {
    const Dataset d = groups(5, 4);
    const FoldAssignment f = split_sample(d, 5);
    int c0 = 0;
    for (Index i = 0; i < 5; ++i) c0 += f.fold_of_unit[static_cast<std::size_t>(i)] == 0;
    CHECK(c0 == 3);
  }
  SUBCASE("deterministic in the seed") {
    const Dataset d = groups(7, 6);
    CHECK(split_sample(d, 42).fold_of_unit == split_sample(d, 42).fold_of_unit);
  }
  SUBCASE("a fixed unit lands in both folds across seeds") {
    const Dataset d = groups(6, 6);
    int in0 = 0;
    for (std::uint64_t s = 0; s < 100; ++s) in0 += split_sample(d, s).fold_of_unit[0] == 0;
    CHECK(in0 > 0);
    CHECK(in0 < 100);
  }
  SUBCASE("too small a group is rejected") {
    CHECK_THROWS_AS(split_sample(groups(3, 5), 1), DataError);
  }
  SUBCASE("fold subsets keep control-first order") {
    const Dataset d = groups(6, 5);
    const FoldAssignment f = split_sample(d, 9);
    const Dataset a = fold_subset(d, f, 0), b = fold_subset(d, f, 1);
    CHECK(a.n() + b.n() == d.n());
    CHECK(a.n_control == 3);
    CHECK(b.n_treated == 2);
  }
}

TEST_CASE("normal generator moments") {
  Rng rng(2024);
  const int N = 1000000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < N; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  const double mean = s / N;
  CHECK(std::abs(mean) < 0.005);
  CHECK(std::abs(s2 / N - mean * mean - 1.0) < 0.01);
}

TEST_CASE("generator output is fixed") {
  Rng a(7), b(7);
  for (int i = 0; i < 5; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(derive_seed(1, 2) != derive_seed(2, 1));
  // 10000th output of mt19937_64 from its default seed 5489
  Rng c(5489);
  for (int i = 0; i < 9999; ++i) c.next_u64();
  CHECK(c.next_u64() == 9981545732273789042ULL);
}

}
