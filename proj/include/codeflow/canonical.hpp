#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "codeflow/lie_engine.hpp"
#include "codeflow/poly_vf.hpp"
#include "codeflow/rational.hpp"

namespace codeflow {

/// Small dense matrix over the exact rationals.
class RationalMatrix {
 public:
  RationalMatrix() : n_(0) {}
  explicit RationalMatrix(int n) : n_(n), a_(static_cast<size_t>(n) * n) {}

  int size() const { return n_; }
  Rational& at(int i, int j) { return a_[static_cast<size_t>(i) * n_ + j]; }
  const Rational& at(int i, int j) const { return a_[static_cast<size_t>(i) * n_ + j]; }

  Rational trace() const {
    Rational t = 0;
    for (int i = 0; i < n_; ++i) t += at(i, i);
    return t;
  }

  bool is_zero() const {
    for (const auto& v : a_)
      if (v != 0) return false;
    return true;
  }

  friend bool operator==(const RationalMatrix& x, const RationalMatrix& y) {
    return x.n_ == y.n_ && x.a_ == y.a_;
  }

  friend RationalMatrix commutator(const RationalMatrix& x, const RationalMatrix& y) {
    const int n = x.n_;
    RationalMatrix out(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Rational s = 0;
        for (int k = 0; k < n; ++k) s += x.at(i, k) * y.at(k, j) - y.at(i, k) * x.at(k, j);
        out.at(i, j) = s;
      }
    return out;
  }

 private:
  int n_;
  std::vector<Rational> a_;
};

/// A = diag(i - (m+1)/2), B = all ones off the diagonal; generation is
/// verified by exact closure rather than trusted from the construction.
inline std::pair<RationalMatrix, RationalMatrix> sl_generators(int m) {
  if (m < 2) throw std::invalid_argument("sl_generators: requires m >= 2");
  RationalMatrix a(m), b(m);
  for (int i = 0; i < m; ++i) a.at(i, i) = Rational(2 * (i + 1) - (m + 1), 2);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (i != j) b.at(i, j) = 1;
  return {a, b};
}

namespace detail {

/// Exact reducer over matrix entries; reused for commutator closures.
class MatrixReducer {
 public:
  bool try_add(const RationalMatrix& x) {
    std::map<int, Rational> v;
    const int n = x.size();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (x.at(i, j) != 0) v.emplace(i * n + j, x.at(i, j));
    for (const auto& [pivot, row] : rows_) {
      auto it = v.find(pivot);
      if (it == v.end()) continue;
      Rational factor = it->second / row.at(pivot);
      for (const auto& [k, c] : row) {
        auto vit = v.find(k);
        if (vit == v.end()) {
          v.emplace(k, -factor * c);
        } else {
          vit->second -= factor * c;
          if (vit->second == 0) v.erase(vit);
        }
      }
    }
    if (v.empty()) return false;
    rows_.emplace(v.begin()->first, std::move(v));
    return true;
  }

  int rank() const { return static_cast<int>(rows_.size()); }

 private:
  std::map<int, std::map<int, Rational>> rows_;
};

}  // namespace detail

/// Dimension of the matrix Lie algebra generated by {A, B} under commutators
/// and linear combinations. Every element produced on the way is recorded via
/// the visitor when given (trace-invariance tests hook in there).
template <typename Visitor>
inline int matrix_closure_dimension(const RationalMatrix& a, const RationalMatrix& b, Visitor&& visit) {
  const int n = a.size();
  detail::MatrixReducer red;
  std::vector<RationalMatrix> material;
  auto admit = [&](const RationalMatrix& x) {
    if (x.is_zero()) return;
    visit(x);
    if (red.try_add(x)) material.push_back(x);
  };
  admit(a);
  admit(b);
  size_t begin = 0;
  // n^2 rounds always suffice: the flag dimension is at most n^2
  for (int round = 0; round < n * n + 1; ++round) {
    size_t end = material.size();
    if (begin == end) break;
    for (size_t i = begin; i < end; ++i) {
      admit(commutator(a, material[i]));
      admit(commutator(b, material[i]));
    }
    begin = end;
  }
  return red.rank();
}

inline int matrix_closure_dimension(const RationalMatrix& a, const RationalMatrix& b) {
  return matrix_closure_dimension(a, b, [](const RationalMatrix&) {});
}

/// True iff repeated commutators and linear combinations of A, B span the
/// full traceless space of dimension m^2 - 1 (exact rational rank).
inline bool verify_sl_generation(const RationalMatrix& a, const RationalMatrix& b) {
  if (a.size() != b.size() || a.size() < 1)
    throw std::invalid_argument("verify_sl_generation: matrices must be square of equal size");
  if (a.trace() != 0 || b.trace() != 0) throw std::invalid_argument("verify_sl_generation: inputs must be traceless");
  const int m = a.size();
  return matrix_closure_dimension(a, b) == m * m - 1;
}

inline PolyVectorField linear_field(const RationalMatrix& mat) {
  const int m = mat.size();
  PolyVectorField f(m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      if (mat.at(i, j) == 0) continue;
      std::vector<int> alpha(m, 0);
      alpha[j] = 1;
      f.add_term(i, std::move(alpha), mat.at(i, j));
    }
  return f;
}

/// The five generator fields: V1 = Ax, V2 = Bx, V3 = e_m, V4 = (x^m)^2 e_1,
/// V5 = x^m x (componentwise x^i x^m).
struct CanonicalSystem {
  int m = 0;
  RationalMatrix A, B;
  std::vector<PolyVectorField> fields;
};

inline CanonicalSystem canonical_five(int m) {
  if (m < 2) throw std::invalid_argument("canonical_five: requires m >= 2");
  CanonicalSystem sys;
  sys.m = m;
  auto [a, b] = sl_generators(m);
  sys.A = a;
  sys.B = b;
  sys.fields.push_back(linear_field(a));
  sys.fields.push_back(linear_field(b));
  PolyVectorField v3(m);
  v3.add_term(m - 1, std::vector<int>(m, 0), 1);
  sys.fields.push_back(std::move(v3));
  PolyVectorField v4(m);
  {
    std::vector<int> alpha(m, 0);
    alpha[m - 1] = 2;
    v4.add_term(0, std::move(alpha), 1);
  }
  sys.fields.push_back(std::move(v4));
  PolyVectorField v5(m);
  for (int i = 0; i < m; ++i) {
    std::vector<int> alpha(m, 0);
    alpha[i] += 1;
    alpha[m - 1] += 1;
    v5.add_term(i, std::move(alpha), 1);
  }
  sys.fields.push_back(std::move(v5));
  return sys;
}

/// Result of the symbolic identity suite.
struct AppendixReport {
  struct Entry {
    std::string label;
    std::string lhs;
    std::string rhs;
    bool equal;
  };
  std::vector<Entry> entries;
  bool all_pass = true;

  void check(std::string label, const PolyVectorField& lhs, const PolyVectorField& rhs) {
    bool eq = lhs == rhs;
    all_pass = all_pass && eq;
    entries.push_back({std::move(label), lhs.to_string(), rhs.to_string(), eq});
  }

  nlohmann::json to_json() const {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& e : entries) out[e.label] = {{"lhs", e.lhs}, {"rhs", e.rhs}, {"equal", e.equal}};
    return out;
  }
};

namespace detail {

inline PolyVectorField xpow_field(int m, int comp, std::vector<int> alpha, Rational c = 1) {
  return mono_field(m, comp, std::move(alpha), c);
}

inline std::vector<int> unit_alpha(int m, int i, int e = 1) {
  std::vector<int> a(m, 0);
  a[i] = e;
  return a;
}

inline std::vector<int> pair_alpha(int m, int i, int j) {
  std::vector<int> a(m, 0);
  a[i] += 1;
  a[j] += 1;
  return a;
}

}  // namespace detail

/// Symbolically checks, with exact rational equality, the bracket identities
/// that generate all polynomial vector fields from e_m-translation, the
/// quadratic seeds, the scaled Euler field and the linear fields. The suite
/// instantiates every identity over its applicable index range and samples
/// all multi-indices with |alpha| in {3,4} for the induction step.
inline AppendixReport verify_appendix_identities(int m) {
  if (m < 2) throw std::invalid_argument("verify_appendix_identities: requires m >= 2");
  using detail::pair_alpha;
  using detail::unit_alpha;
  using detail::xpow_field;
  AppendixReport rep;
  const int last = m - 1;  // index of x_m

  auto br = [](const PolyVectorField& u, const PolyVectorField& v) { return lie_bracket(u, v); };
  auto xi_di = [&](int i, int j) {  // x_i d_j as a field
    return xpow_field(m, j, unit_alpha(m, i));
  };
  auto const_d = [&](int i) { return xpow_field(m, i, std::vector<int>(m, 0)); };
  auto xm2_d = [&](int i) { return xpow_field(m, i, unit_alpha(m, last, 2)); };

  // Euler-type generator x_m * sum_j x_j d_j
  PolyVectorField euler_xm(m);
  for (int j = 0; j < m; ++j) euler_xm = add(euler_xm, xpow_field(m, j, pair_alpha(m, j, last)));

  // constants: d_i = [d_m, x_m d_i]
  for (int i = 0; i < last; ++i)
    rep.check("constant_direction_i" + std::to_string(i + 1), const_d(i), br(const_d(last), xi_di(last, i)));

  // downward chain: x_j x_m d_i for j > i
  for (int i = 0; i + 1 < last; ++i) {
    rep.check("chain_high_start_i" + std::to_string(i + 1),
              xpow_field(m, i, pair_alpha(m, last - 1, last), 2), br(xi_di(last - 1, last), xm2_d(i)));
    for (int j = last - 2; j > i; --j)
      rep.check("chain_high_i" + std::to_string(i + 1) + "_j" + std::to_string(j + 1),
                xpow_field(m, i, pair_alpha(m, j, last)), br(xi_di(j, j + 1), xpow_field(m, i, pair_alpha(m, j + 1, last))));
  }

  // upward chain: x_j x_m d_i for j < i
  for (int i = 1; i < m; ++i) {
    rep.check("chain_low_start_i" + std::to_string(i + 1), xpow_field(m, i, pair_alpha(m, 0, last), 2),
              br(xi_di(0, last), xm2_d(i)));
    for (int j = 1; j < i; ++j)
      rep.check("chain_low_i" + std::to_string(i + 1) + "_j" + std::to_string(j + 1),
                xpow_field(m, i, pair_alpha(m, j, last)), br(xi_di(j, j - 1), xpow_field(m, i, pair_alpha(m, j - 1, last))));
  }

  // x_m^2 d_i = [x_m^2 d_1, x_1 d_i]
  for (int i = 0; i < last; ++i)
    rep.check("xm2_transport_i" + std::to_string(i + 1), xm2_d(i), br(xm2_d(0), xi_di(0, i)));

  // The bracket combination behind the x_m^2 d_m membership step. As
  // displayed it is claimed to equal -x_m^2 d_m; the exact value carries an
  // extra 2 x_{m-1} x_m d_{m-1}, so the suite pins the exact value and
  // derives the membership from an identity that closes exactly.
  {
    PolyVectorField combo = br(xm2_d(0), xi_di(0, last));
    for (int i = 0; i < last; ++i)
      combo = add(combo, scale(2, br(xi_di(i, i + 1), xpow_field(m, i, pair_alpha(m, i + 1, last)))));
    PolyVectorField expected = add(xpow_field(m, last - 1, pair_alpha(m, last - 1, last), 2),
                                   scale(-1, xm2_d(last)));
    rep.check("xm2_dm_combination", expected, combo);

    PolyVectorField membership(m);
    for (int i = 0; i < last; ++i) membership = add(membership, br(xm2_d(i), xi_di(i, last)));
    membership = add(membership, scale(2, euler_xm));
    membership = scale(Rational(1, m + 1), membership);
    rep.check("xm2_dm_membership", xm2_d(last), membership);
  }

  // chain repeated for i = m: x_j x_m d_m
  rep.check("chain_m_start", xpow_field(m, last, pair_alpha(m, last - 1, last), 2),
            br(xi_di(last - 1, last), xm2_d(last)));
  for (int j = last - 2; j >= 0; --j)
    rep.check("chain_m_j" + std::to_string(j + 1), xpow_field(m, last, pair_alpha(m, j, last)),
              br(xi_di(j, j + 1), xpow_field(m, last, pair_alpha(m, j + 1, last))));

  // x_j x_k d_m = [x_j d_m, x_k x_m d_m] for j,k < m
  for (int j = 0; j < last; ++j)
    for (int k = 0; k < last; ++k)
      rep.check("offdiag_dm_j" + std::to_string(j + 1) + "_k" + std::to_string(k + 1),
                xpow_field(m, last, pair_alpha(m, j, k)), br(xi_di(j, last), xpow_field(m, last, pair_alpha(m, k, last))));

  // 2 x_j x_m d_m = [x_j d_m, x_m^2 d_m] for j < m
  for (int j = 0; j < last; ++j)
    rep.check("diag_dm_j" + std::to_string(j + 1), xpow_field(m, last, pair_alpha(m, j, last), 2),
              br(xi_di(j, last), xm2_d(last)));

  // scaled Euler slices and the cubic transport feeding the mixed diagonal
  for (int i = 0; i < last; ++i) {
    PolyVectorField xi_euler(m);
    for (int j = 0; j < m; ++j) xi_euler = add(xi_euler, xpow_field(m, j, pair_alpha(m, i, j)));
    rep.check("euler_slice_i" + std::to_string(i + 1), xi_euler, br(xi_di(i, last), euler_xm));

    std::vector<int> cubic = unit_alpha(m, last, 2);
    cubic[i] += 1;
    rep.check("cubic_transport_i" + std::to_string(i + 1), xpow_field(m, last, cubic, -1),
              br(xm2_d(last), xi_euler));

    PolyVectorField inner = br(const_d(last), xpow_field(m, last, cubic));
    PolyVectorField half_outer = scale(Rational(1, 2), br(inner, xi_di(last, i)));
    rep.check("diag_mixed_i" + std::to_string(i + 1), xpow_field(m, i, pair_alpha(m, i, last)),
              add(xm2_d(last), half_outer));

    rep.check("diag_square_i" + std::to_string(i + 1), xpow_field(m, i, unit_alpha(m, i, 2)),
              add(br(xi_di(i, last), xpow_field(m, i, pair_alpha(m, i, last))),
                  xpow_field(m, last, pair_alpha(m, i, last))));
  }

  // 2 x_i x_j d_i = [x_j d_i, x_i^2 d_i] for i != j
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      if (i == j) continue;
      rep.check("offdiag_square_i" + std::to_string(i + 1) + "_j" + std::to_string(j + 1),
                xpow_field(m, i, pair_alpha(m, i, j), 2), br(xi_di(j, i), xpow_field(m, i, unit_alpha(m, i, 2))));
    }

  // induction step over all |alpha| in {3,4}
  std::vector<std::vector<int>> alphas;
  {
    std::vector<int> cur(m, 0);
    std::function<void(int, int)> gen = [&](int pos, int remaining) {
      if (pos == m) {
        if (remaining == 0) alphas.push_back(cur);
        return;
      }
      for (int e = 0; e <= remaining; ++e) {
        cur[pos] = e;
        gen(pos + 1, remaining - e);
        cur[pos] = 0;
      }
    };
    gen(0, 3);
    gen(0, 4);
  }
  for (const auto& alpha : alphas) {
    std::string tag = "induction_a";
    for (int e : alpha) tag += std::to_string(e);
    const int a1 = alpha[0];
    if (a1 == 0) {
      int i = 1;
      while (alpha[i] == 0) ++i;
      auto am = alpha;
      am[i] -= 1;
      rep.check(tag + "_case0", xpow_field(m, 0, alpha, 2),
                br(xpow_field(m, i, am), xpow_field(m, 0, unit_alpha(m, i, 2))));
    } else if (a1 != 3) {
      auto am = alpha;
      am[0] -= 1;
      rep.check(tag + "_case1", xpow_field(m, 0, alpha, 3 - a1),
                br(xpow_field(m, 0, am), xpow_field(m, 0, unit_alpha(m, 0, 2))));
    } else {
      auto beta = alpha;
      beta[0] = 0;
      auto x1beta = beta;
      x1beta[0] = 1;
      PolyVectorField inner = add(br(xpow_field(m, 1, unit_alpha(m, 0, 2)), xpow_field(m, 0, pair_alpha(m, 0, 1))),
                                  scale(2, br(xpow_field(m, 0, unit_alpha(m, 0, 2)), xpow_field(m, 1, pair_alpha(m, 0, 1)))));
      rep.check(tag + "_case3", xpow_field(m, 0, alpha, 2), br(xpow_field(m, 0, x1beta), inner));
    }
  }

  return rep;
}

inline std::int64_t polynomial_space_dimension(int m, int k) {
  // m * binom(m+k, m)
  std::int64_t binom = 1;
  for (int i = 1; i <= m; ++i) binom = binom * (k + i) / i;
  return static_cast<std::int64_t>(m) * binom;
}

/// True iff the degree-bounded closure of the canonical five reaches the full
/// space of polynomial fields of degree <= k. The word-length cap k+5 leaves
/// headroom over the minimal requirement (the m=3 quadratic directions need
/// words of length k+5).
inline bool degree_cover_check(int m, int k) {
  auto sys = canonical_five(m);
  auto report = lie_closure_bounded(sys.fields, k, k + 5);
  return report.dimension == polynomial_space_dimension(m, k);
}

}  // namespace codeflow
