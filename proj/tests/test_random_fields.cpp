#include <catch2/catch_amalgamated.hpp>

#include "codeflow/canonical.hpp"
#include "codeflow/lie_engine.hpp"
#include "codeflow/random_fields.hpp"
#include "test_support.hpp"

using namespace codeflow;
using codeflow::testing::random_point;

TEST_CASE("coefficient count follows the closed form") {
  FieldSampleSpec spec;
  spec.m = 2;
  spec.d = 5;
  spec.k = 2;
  CHECK(spec.parameter_count() == 60);
  spec.k = 3;
  CHECK(spec.parameter_count() == 100);
}

TEST_CASE("sampling is deterministic in the seed") {
  FieldSampleSpec spec;
  spec.m = 2;
  spec.d = 5;
  spec.k = 3;
  spec.seed = 12345;
  const auto a = sample_polynomial_fields(spec);
  const auto b = sample_polynomial_fields(spec);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  spec.seed = 12346;
  const auto c = sample_polynomial_fields(spec);
  CHECK(a[0] != c[0]);
}

TEST_CASE("sampling rejects hypothesis-violating specs") {
  FieldSampleSpec spec;
  spec.m = 2;
  spec.d = 5;
  spec.k = 1;
  CHECK_THROWS_AS(sample_polynomial_fields(spec), std::invalid_argument);
  spec.k = 2;
  spec.d = 4;
  CHECK_THROWS_AS(sample_polynomial_fields(spec), std::invalid_argument);
  spec.d = 5;
  spec.m = 1;
  CHECK_THROWS_AS(sample_polynomial_fields(spec), std::invalid_argument);
}

TEST_CASE("uniform distribution variant honours the bounds") {
  FieldSampleSpec spec;
  spec.m = 2;
  spec.d = 5;
  spec.k = 2;
  spec.seed = 9;
  spec.distribution = FieldSampleSpec::Distribution::uniform;
  spec.lo = -0.25;
  spec.hi = 0.25;
  for (const auto& f : sample_polynomial_fields(spec))
    for (int c = 0; c < 2; ++c)
      for (const auto& [mono, coeff] : f.component(c)) {
        CHECK(to_double(coeff) <= 0.25);
        CHECK(to_double(coeff) >= -0.25);
      }
  const auto j = spec.to_json();
  const auto back = FieldSampleSpec::from_json(j);
  CHECK(back.lo == spec.lo);
  CHECK(back.distribution == spec.distribution);
}

TEST_CASE("perturbation stays within the requested tube") {
  const auto targets = canonical_five(2).fields;
  const Box omega = Box::centered_cube(2, 1.0);
  const double eps = 0.1;
  const auto perturbed = perturb_to_universal(targets, eps, omega, 77);
  REQUIRE(perturbed.size() == targets.size());
  for (size_t i = 0; i < targets.size(); ++i) {
    const double dev = certified_sup_deviation(perturbed[i], targets[i], omega);
    CHECK(dev < eps);
    CHECK(perturbed[i] != targets[i]);
  }
}

TEST_CASE("huge tolerance is trivially met") {
  const auto targets = canonical_five(2).fields;
  const auto perturbed = perturb_to_universal(targets, 1e6, Box::centered_cube(2, 1.0), 5);
  CHECK(perturbed.size() == 5);
  CHECK_THROWS_AS(perturb_to_universal(targets, 0.0, Box::centered_cube(2, 1.0), 5), std::invalid_argument);
  CHECK_THROWS_AS(perturb_to_universal({targets[0]}, 1.0, Box::centered_cube(2, 1.0), 5), std::invalid_argument);
}

TEST_CASE("perturbed canonical systems keep the interpolation property") {
  const auto words = bracket_words_up_to(5, 3);
  std::mt19937_64 eng(31337);
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    const auto fields =
        make_smooth(perturb_to_universal(canonical_five(2).fields, 0.05, Box::centered_cube(2, 1.0), seed));
    std::vector<Eigen::VectorXd> tuple{random_point(2, eng), random_point(2, eng)};
    CHECK(interpolates_at_tuple(fields, words, tuple));
  }
}

TEST_CASE("reference parameters reproduce the polynomial seven") {
  for (int m : {2, 3}) {
    const auto spec = NeuralFieldSpec::reference(m);
    const auto numeric = neural_fields(spec);
    const auto exact = reference_hat_fields(m);
    std::mt19937_64 eng(404 + m);
    for (int rep = 0; rep < 100; ++rep) {
      const Eigen::VectorXd x = random_point(m, eng);
      for (int i = 0; i < 7; ++i)
        CHECK((numeric[i].eval(x) - exact[i].evaluate(x)).norm() <= 1e-12 * (1 + exact[i].evaluate(x).norm()));
    }
  }
}

TEST_CASE("hat field displays") {
  {
    const auto hats = reference_hat_fields(2);
    PolyVectorField v5(2);
    v5.add_term(0, {2, 0}, 1);
    v5.add_term(0, {1, 1}, 2);
    v5.add_term(0, {0, 2}, 1);
    v5.add_term(1, {0, 2}, 4);
    CHECK(hats[4] == v5);
    PolyVectorField v6(2);
    v6.add_term(0, {2, 0}, 1);
    v6.add_term(1, {0, 2}, 1);
    CHECK(hats[5] == v6);
  }
  {
    const auto spec = NeuralFieldSpec::reference(3);
    const Eigen::MatrixXd& c7 = spec.C[6];
    CHECK(c7.col(2).isOnes());
    CHECK(c7.leftCols(2).isZero());
    CHECK(spec.b[2] == Eigen::Vector3d(0, 0, 1));
  }
}

TEST_CASE("polarization identity recovers the quadratic generator") {
  for (int m : {2, 3, 4}) {
    const auto hats = reference_hat_fields(m);
    const auto five = canonical_five(m);
    const PolyVectorField combo =
        scale(Rational(1, 2), add(hats[4], add(scale(-1, hats[5]), scale(-1, hats[6]))));
    CHECK(combo == five.fields[4]);
  }
}

TEST_CASE("seven-field closure reaches the full quadratic space") {
  const auto report = lie_closure_bounded(reference_hat_fields(2), 2, 8);
  CHECK(report.dimension == 12);
}

TEST_CASE("neural jacobians agree with finite differences") {
  for (auto sigma : {NeuralFieldSpec::Sigma::tanh_blend, NeuralFieldSpec::Sigma::atan_blend}) {
    const auto spec = NeuralFieldSpec::random(2, 2718, sigma);
    const auto fields = neural_fields(spec);
    std::mt19937_64 eng(606);
    const double h = 1e-5;
    for (int rep = 0; rep < 20; ++rep) {
      const Eigen::VectorXd x = random_point(2, eng);
      for (const auto& f : fields) {
        const Eigen::MatrixXd J = f.jac(x);
        for (int j = 0; j < 2; ++j) {
          Eigen::VectorXd xp = x, xm = x;
          xp[j] += h;
          xm[j] -= h;
          const Eigen::VectorXd fd = (f.eval(xp) - f.eval(xm)) / (2 * h);
          for (int i = 0; i < 2; ++i) CHECK(std::abs(J(i, j) - fd[i]) <= 1e-5 * std::max(1.0, std::abs(fd[i])));
        }
      }
    }
  }
}

TEST_CASE("neural sampling is deterministic and spec round-trips") {
  const auto a = NeuralFieldSpec::random(2, 11);
  const auto b = NeuralFieldSpec::random(2, 11);
  CHECK(a.z0 == b.z0);
  for (int i = 0; i < 7; ++i) {
    CHECK(a.C[i] == b.C[i]);
    CHECK(a.b[i] == b.b[i]);
  }
  const auto back = NeuralFieldSpec::from_json(a.to_json());
  for (int i = 0; i < 7; ++i) CHECK(back.C[i] == a.C[i]);
  CHECK(back.z0 == a.z0);
}

TEST_CASE("neural systems pass the first-level rank test") {
  const auto words = bracket_words_up_to(7, 2);
  std::mt19937_64 eng(515);
  int passes = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto fields = neural_fields(NeuralFieldSpec::random(2, seed));
    std::vector<Eigen::VectorXd> tuple{random_point(2, eng), random_point(2, eng)};
    passes += interpolates_at_tuple(fields, words, tuple) ? 1 : 0;
  }
  CHECK(passes >= 4);
}

TEST_CASE("numeric fields reject deep bracket words") {
  const auto fields = neural_fields(NeuralFieldSpec::random(2, 1));
  const auto deep = LieWord::bracket(LieWord::leaf(0), LieWord::bracket(LieWord::leaf(1), LieWord::leaf(2)));
  Eigen::VectorXd x(2);
  x << 0.3, 0.4;
  std::vector<LieWord> words{deep};
  CHECK_THROWS_AS(interpolation_matrix(fields, words, {x}), std::invalid_argument);
}
