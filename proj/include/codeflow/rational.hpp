#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <string>

namespace codeflow {

/// Exact rational scalar used for all symbolic vector-field algebra.
using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

inline double to_double(const Rational& q) { return q.template convert_to<double>(); }

/// Exact conversion: every finite double is a dyadic rational.
inline Rational rational_from_double(double x) { return Rational(x); }

inline std::string numerator_str(const Rational& q) { return numerator(q).str(); }
inline std::string denominator_str(const Rational& q) { return denominator(q).str(); }

inline Rational rational_from_strings(const std::string& num, const std::string& den) {
  return Rational(BigInt(num), BigInt(den));
}

}  // namespace codeflow
