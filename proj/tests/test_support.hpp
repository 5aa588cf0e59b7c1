#pragma once

#include <random>
#include <vector>

#include "codeflow/poly_vf.hpp"
#include "codeflow/random_fields.hpp"

namespace codeflow::testing {

/// Sparse random field with small rational coefficients; exact identities
/// stay exact on these.
inline PolyVectorField random_rational_field(int m, int max_degree, std::mt19937_64& eng, double density = 0.6) {
  std::uniform_int_distribution<int> num(-9, 9);
  std::uniform_int_distribution<int> den(1, 9);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  PolyVectorField f(m);
  for (int c = 0; c < m; ++c) {
    for (const auto& alpha : monomials_up_to(m, max_degree)) {
      if (coin(eng) > density) continue;
      const int p = num(eng);
      if (p == 0) continue;
      f.add_term(c, alpha, Rational(p, den(eng)));
    }
  }
  return f;
}

inline Eigen::VectorXd random_point(int m, std::mt19937_64& eng, double radius = 1.0) {
  std::uniform_real_distribution<double> u(-radius, radius);
  Eigen::VectorXd x(m);
  for (int i = 0; i < m; ++i) x[i] = u(eng);
  return x;
}

}  // namespace codeflow::testing
