#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "codeflow/rational.hpp"

namespace codeflow {

/// Exponent vector of a monomial x^alpha on R^m.
struct Monomial {
  std::vector<int> alpha;

  Monomial() = default;
  explicit Monomial(std::vector<int> a) : alpha(std::move(a)) {}
  explicit Monomial(int m) : alpha(m, 0) {}

  int dimension() const { return static_cast<int>(alpha.size()); }
  int degree() const { return std::accumulate(alpha.begin(), alpha.end(), 0); }

  friend bool operator==(const Monomial& a, const Monomial& b) { return a.alpha == b.alpha; }
};

/// Canonical term order: total degree first, then lexicographic exponents.
struct MonomialLess {
  bool operator()(const Monomial& a, const Monomial& b) const {
    int da = a.degree(), db = b.degree();
    if (da != db) return da < db;
    return a.alpha < b.alpha;
  }
};

using PolyComponent = std::map<Monomial, Rational, MonomialLess>;

namespace detail {

inline void poly_add_scaled(PolyComponent& dst, const PolyComponent& src, const Rational& c) {
  if (c == 0) return;
  for (const auto& [mono, coeff] : src) {
    auto it = dst.find(mono);
    if (it == dst.end()) {
      dst.emplace(mono, coeff * c);
    } else {
      it->second += coeff * c;
      if (it->second == 0) dst.erase(it);
    }
  }
}

inline PolyComponent poly_mul(const PolyComponent& a, const PolyComponent& b) {
  PolyComponent out;
  for (const auto& [ma, ca] : a) {
    for (const auto& [mb, cb] : b) {
      Monomial mono(ma.alpha);
      for (size_t i = 0; i < mono.alpha.size(); ++i) mono.alpha[i] += mb.alpha[i];
      auto it = out.find(mono);
      if (it == out.end()) {
        out.emplace(std::move(mono), ca * cb);
      } else {
        it->second += ca * cb;
        if (it->second == 0) out.erase(it);
      }
    }
  }
  return out;
}

/// d/dx_j of a component polynomial.
inline PolyComponent poly_partial(const PolyComponent& p, int j) {
  PolyComponent out;
  for (const auto& [mono, coeff] : p) {
    if (mono.alpha[j] == 0) continue;
    Monomial d(mono.alpha);
    d.alpha[j] -= 1;
    out.emplace(std::move(d), coeff * mono.alpha[j]);
  }
  return out;
}

inline double poly_eval(const PolyComponent& p, const Eigen::VectorXd& x) {
  double total = 0.0;
  for (const auto& [mono, coeff] : p) {
    double v = to_double(coeff);
    for (size_t i = 0; i < mono.alpha.size(); ++i) {
      for (int e = 0; e < mono.alpha[i]; ++e) v *= x[static_cast<Eigen::Index>(i)];
    }
    total += v;
  }
  return total;
}

}  // namespace detail

/// Polynomial vector field on R^m with exact rational coefficients.
///
/// Canonical form: zero coefficients are never stored, terms are ordered by
/// (degree, lexicographic exponent), so equality is structural.
class PolyVectorField {
 public:
  PolyVectorField() : m_(0) {}
  explicit PolyVectorField(int m) : m_(m), comps_(m) {
    if (m < 1) throw std::invalid_argument("PolyVectorField: dimension must be >= 1");
  }

  static PolyVectorField zero(int m) { return PolyVectorField(m); }

  int dimension() const { return m_; }
  const PolyComponent& component(int j) const { return comps_.at(j); }

  /// Adds c * x^alpha to component j, keeping canonical form.
  void add_term(int j, std::vector<int> alpha, const Rational& c) {
    Monomial mono(std::move(alpha));
    if (mono.dimension() != m_) throw std::invalid_argument("add_term: exponent length mismatch");
    if (c == 0) return;
    auto& comp = comps_.at(j);
    auto it = comp.find(mono);
    if (it == comp.end()) {
      comp.emplace(std::move(mono), c);
    } else {
      it->second += c;
      if (it->second == 0) comp.erase(it);
    }
  }

  bool is_zero() const {
    for (const auto& comp : comps_)
      if (!comp.empty()) return false;
    return true;
  }

  /// Degree of the zero field is -1 so that degree bounds compose.
  int degree() const {
    int deg = -1;
    for (const auto& comp : comps_)
      for (const auto& [mono, c] : comp) deg = std::max(deg, mono.degree());
    return deg;
  }

  Eigen::VectorXd evaluate(const Eigen::VectorXd& x) const {
    if (x.size() != m_) throw std::invalid_argument("evaluate: point dimension mismatch");
    Eigen::VectorXd out(m_);
    for (int j = 0; j < m_; ++j) out[j] = detail::poly_eval(comps_[j], x);
    return out;
  }

  /// Entry (i,j) is dV^i/dx^j at x, by exact differentiation then evaluation.
  Eigen::MatrixXd jacobian_at(const Eigen::VectorXd& x) const {
    if (x.size() != m_) throw std::invalid_argument("jacobian_at: point dimension mismatch");
    Eigen::MatrixXd J(m_, m_);
    for (int i = 0; i < m_; ++i)
      for (int j = 0; j < m_; ++j) J(i, j) = detail::poly_eval(detail::poly_partial(comps_[i], j), x);
    return J;
  }

  friend bool operator==(const PolyVectorField& a, const PolyVectorField& b) {
    return a.m_ == b.m_ && a.comps_ == b.comps_;
  }
  friend bool operator!=(const PolyVectorField& a, const PolyVectorField& b) { return !(a == b); }

  std::string to_string() const {
    std::ostringstream os;
    os << "(";
    for (int j = 0; j < m_; ++j) {
      if (j) os << ", ";
      if (comps_[j].empty()) {
        os << "0";
        continue;
      }
      bool first = true;
      for (const auto& [mono, c] : comps_[j]) {
        if (!first) os << " + ";
        first = false;
        os << c.str();
        for (int i = 0; i < m_; ++i) {
          if (mono.alpha[i] == 0) continue;
          os << "*x" << (i + 1);
          if (mono.alpha[i] > 1) os << "^" << mono.alpha[i];
        }
      }
    }
    os << ")";
    return os.str();
  }

  nlohmann::json to_json() const {
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& comp : comps_) {
      nlohmann::json terms = nlohmann::json::array();
      for (const auto& [mono, c] : comp) {
        terms.push_back({{"alpha", mono.alpha}, {"num", numerator_str(c)}, {"den", denominator_str(c)}});
      }
      comps.push_back(std::move(terms));
    }
    return {{"m", m_}, {"components", std::move(comps)}};
  }

  static PolyVectorField from_json(const nlohmann::json& j) {
    PolyVectorField f(j.at("m").get<int>());
    const auto& comps = j.at("components");
    if (static_cast<int>(comps.size()) != f.m_)
      throw std::invalid_argument("PolyVectorField::from_json: component count mismatch");
    for (int c = 0; c < f.m_; ++c) {
      for (const auto& term : comps[c]) {
        f.add_term(c, term.at("alpha").get<std::vector<int>>(),
                   rational_from_strings(term.at("num").get<std::string>(), term.at("den").get<std::string>()));
      }
    }
    return f;
  }

 private:
  int m_;
  std::vector<PolyComponent> comps_;

  friend PolyVectorField lie_bracket(const PolyVectorField&, const PolyVectorField&);
  friend PolyVectorField add(const PolyVectorField&, const PolyVectorField&);
  friend PolyVectorField scale(const Rational&, const PolyVectorField&);
};

inline PolyVectorField add(const PolyVectorField& a, const PolyVectorField& b) {
  if (a.m_ != b.m_) throw std::invalid_argument("add: dimension mismatch");
  PolyVectorField out = a;
  for (int j = 0; j < out.m_; ++j) detail::poly_add_scaled(out.comps_[j], b.comps_[j], Rational(1));
  return out;
}

inline PolyVectorField scale(const Rational& c, const PolyVectorField& v) {
  PolyVectorField out(v.dimension());
  if (c == 0) return out;
  for (int j = 0; j < out.m_; ++j) detail::poly_add_scaled(out.comps_[j], v.comps_[j], c);
  return out;
}

/// [U,V] = DV*U - DU*V, exact and in canonical form.
inline PolyVectorField lie_bracket(const PolyVectorField& u, const PolyVectorField& v) {
  if (u.m_ != v.m_) throw std::invalid_argument("lie_bracket: dimension mismatch");
  const int m = u.m_;
  PolyVectorField out(m);
  for (int k = 0; k < m; ++k) {
    PolyComponent acc;
    for (int l = 0; l < m; ++l) {
      if (!u.comps_[l].empty()) {
        PolyComponent dv = detail::poly_partial(v.comps_[k], l);
        if (!dv.empty()) detail::poly_add_scaled(acc, detail::poly_mul(dv, u.comps_[l]), Rational(1));
      }
      if (!v.comps_[l].empty()) {
        PolyComponent du = detail::poly_partial(u.comps_[k], l);
        if (!du.empty()) detail::poly_add_scaled(acc, detail::poly_mul(du, v.comps_[l]), Rational(-1));
      }
    }
    out.comps_[k] = std::move(acc);
  }
  return out;
}

/// c * x^alpha in component j; building block for generators and tests.
inline PolyVectorField mono_field(int m, int j, std::vector<int> alpha, const Rational& c) {
  PolyVectorField f(m);
  f.add_term(j, std::move(alpha), c);
  return f;
}

}  // namespace codeflow
