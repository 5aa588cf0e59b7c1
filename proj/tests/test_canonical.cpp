#include <catch2/catch_amalgamated.hpp>

#include "codeflow/canonical.hpp"

using namespace codeflow;

TEST_CASE("sl generator pair for m = 2") {
  auto [a, b] = sl_generators(2);
  CHECK(a.at(0, 0) == Rational(-1, 2));
  CHECK(a.at(1, 1) == Rational(1, 2));
  CHECK(a.at(0, 1) == 0);
  CHECK(b.at(0, 1) == 1);
  CHECK(b.at(1, 0) == 1);
  CHECK(b.at(0, 0) == 0);
  CHECK(matrix_closure_dimension(a, b) == 3);
}

TEST_CASE("generator pairs are traceless and generate for m up to 5") {
  for (int m = 2; m <= 5; ++m) {
    auto [a, b] = sl_generators(m);
    CHECK(a.trace() == 0);
    CHECK(b.trace() == 0);
    CHECK(verify_sl_generation(a, b));
    CHECK(matrix_closure_dimension(a, b) == m * m - 1);
  }
  CHECK_THROWS_AS(sl_generators(1), std::invalid_argument);
}

TEST_CASE("degenerate pairs fail generation") {
  RationalMatrix zero(2);
  CHECK_FALSE(verify_sl_generation(zero, zero));
  RationalMatrix diag(2);
  diag.at(0, 0) = 1;
  diag.at(1, 1) = -1;
  CHECK_FALSE(verify_sl_generation(diag, zero));
  CHECK(matrix_closure_dimension(diag, zero) == 1);
}

TEST_CASE("verification rejects malformed inputs") {
  RationalMatrix a(2), b(3);
  CHECK_THROWS_AS(verify_sl_generation(a, b), std::invalid_argument);
  RationalMatrix traced(2);
  traced.at(0, 0) = 1;  // trace 1
  CHECK_THROWS_AS(verify_sl_generation(traced, a), std::invalid_argument);
}

TEST_CASE("every matrix produced inside the closure is traceless") {
  for (int m = 2; m <= 4; ++m) {
    auto [a, b] = sl_generators(m);
    matrix_closure_dimension(a, b, [](const RationalMatrix& x) { CHECK(x.trace() == 0); });
  }
}

TEST_CASE("the five generator fields have the displayed form") {
  {
    auto sys = canonical_five(2);
    PolyVectorField v5(2);
    v5.add_term(0, {1, 1}, 1);
    v5.add_term(1, {0, 2}, 1);
    CHECK(sys.fields[4] == v5);
    CHECK(lie_bracket(sys.fields[2], sys.fields[3]) == mono_field(2, 0, {0, 1}, 2));
  }
  {
    auto sys = canonical_five(3);
    CHECK(sys.fields[3] == mono_field(3, 0, {0, 0, 2}, 1));
    CHECK(sys.fields[2] == mono_field(3, 2, {0, 0, 0}, 1));
  }
  CHECK_THROWS_AS(canonical_five(1), std::invalid_argument);
}

TEST_CASE("bracket identity suite passes exactly") {
  for (int m : {2, 3}) {
    const auto report = verify_appendix_identities(m);
    CHECK(report.all_pass);
    for (const auto& entry : report.entries) {
      INFO(entry.label << ": " << entry.lhs << " vs " << entry.rhs);
      CHECK(entry.equal);
    }
  }
  CHECK_THROWS_AS(verify_appendix_identities(1), std::invalid_argument);
}

TEST_CASE("identity report serializes per label") {
  const auto report = verify_appendix_identities(2);
  const auto j = report.to_json();
  CHECK(j.size() == report.entries.size());
  for (const auto& entry : report.entries) {
    CHECK(j.at(entry.label).at("equal").get<bool>() == entry.equal);
  }
}

TEST_CASE("cubic induction instance in three variables") {
  // 2 x^(3,1,0) d_1 = [x_1 x^(0,1,0) d_1, [x1^2 d2, x1 x2 d1] + 2 [x1^2 d1, x1 x2 d2]]
  const int m = 3;
  const PolyVectorField inner = add(lie_bracket(mono_field(m, 1, {2, 0, 0}, 1), mono_field(m, 0, {1, 1, 0}, 1)),
                                    scale(2, lie_bracket(mono_field(m, 0, {2, 0, 0}, 1), mono_field(m, 1, {1, 1, 0}, 1))));
  const PolyVectorField outer = lie_bracket(mono_field(m, 0, {1, 1, 0}, 1), inner);
  CHECK(outer == mono_field(m, 0, {3, 1, 0}, 2));
}

TEST_CASE("quadratic membership combination carries a cross term") {
  // the naive combination behind the x_m^2 d_m step misses 2 x_{m-1} x_m d_{m-1};
  // pin the exact residual so the corrected suite stays honest
  for (int m : {2, 3, 4}) {
    const int last = m - 1;
    auto xi_di = [&](int i, int j) {
      std::vector<int> a(m, 0);
      a[i] = 1;
      return mono_field(m, j, std::move(a), 1);
    };
    auto xm2_d = [&](int i) {
      std::vector<int> a(m, 0);
      a[last] = 2;
      return mono_field(m, i, std::move(a), 1);
    };
    PolyVectorField combo = lie_bracket(xm2_d(0), xi_di(0, last));
    for (int i = 0; i < last; ++i) {
      std::vector<int> a(m, 0);
      a[i + 1] += 1;
      a[last] += 1;
      combo = add(combo, scale(2, lie_bracket(xi_di(i, i + 1), mono_field(m, i, std::move(a), 1))));
    }
    const PolyVectorField naive_expectation = scale(-1, xm2_d(last));
    CHECK(combo != naive_expectation);
    std::vector<int> cross(m, 0);
    cross[last - 1] += 1;
    cross[last] += 1;
    const PolyVectorField residual = add(combo, xm2_d(last));
    CHECK(residual == mono_field(m, last - 1, cross, 2));
  }
}

TEST_CASE("scaled Euler bracket needs no correction term") {
  for (int m : {2, 3, 4}) {
    const int last = m - 1;
    PolyVectorField euler(m);
    for (int j = 0; j < m; ++j) {
      std::vector<int> a(m, 0);
      a[j] += 1;
      a[last] += 1;
      euler = add(euler, mono_field(m, j, std::move(a), 1));
    }
    for (int i = 0; i < last; ++i) {
      std::vector<int> xi(m, 0);
      xi[i] = 1;
      PolyVectorField lhs(m);
      for (int j = 0; j < m; ++j) {
        std::vector<int> a(m, 0);
        a[i] += 1;
        a[j] += 1;
        lhs = add(lhs, mono_field(m, j, std::move(a), 1));
      }
      CHECK(lie_bracket(mono_field(m, last, xi, 1), euler) == lhs);
    }
  }
}

TEST_CASE("degree cover across the supported range") {
  for (int k = 0; k <= 3; ++k) CHECK(degree_cover_check(2, k));
  for (int k = 0; k <= 2; ++k) CHECK(degree_cover_check(3, k));
}

TEST_CASE("polynomial space dimensions") {
  CHECK(polynomial_space_dimension(2, 0) == 2);
  CHECK(polynomial_space_dimension(2, 2) == 12);
  CHECK(polynomial_space_dimension(2, 3) == 20);
  CHECK(polynomial_space_dimension(3, 2) == 30);
}
