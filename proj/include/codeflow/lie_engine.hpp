#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <json.hpp>

#include "codeflow/lie_word.hpp"
#include "codeflow/poly_vf.hpp"
#include "codeflow/smooth_field.hpp"

namespace codeflow {

/// Mobius function of n >= 1 by trial factorization.
inline int mobius(int n) {
  int mu = 1;
  for (int p = 2; p * p <= n; ++p) {
    if (n % p) continue;
    n /= p;
    if (n % p == 0) return 0;
    mu = -mu;
  }
  if (n > 1) mu = -mu;
  return mu;
}

/// dim of the length-n graded piece of the free Lie algebra on d generators:
/// (1/n) * sum_{k|n} mu(k) d^{n/k}.
inline std::int64_t witt_dimension(int d, int n) {
  if (d < 1 || n < 1) throw std::invalid_argument("witt_dimension: requires d >= 1, n >= 1");
  std::int64_t total = 0;
  for (int k = 1; k <= n; ++k) {
    if (n % k) continue;
    std::int64_t pw = 1;
    for (int e = 0; e < n / k; ++e) pw *= d;
    total += mobius(k) * pw;
  }
  return total / n;
}

/// All Lyndon words of exact length n over {1..d}, lexicographically sorted
/// (Duval's generation).
inline std::vector<std::vector<int>> lyndon_words(int d, int n) {
  if (d < 1 || n < 1) throw std::invalid_argument("lyndon_words: requires d >= 1, n >= 1");
  std::vector<std::vector<int>> out;
  std::vector<int> w{1};
  while (true) {
    if (static_cast<int>(w.size()) == n) out.push_back(w);
    std::vector<int> t(n);
    for (int i = 0; i < n; ++i) t[i] = w[i % w.size()];
    w = std::move(t);
    while (!w.empty() && w.back() == d) w.pop_back();
    if (w.empty()) break;
    w.back() += 1;
  }
  return out;
}

namespace detail {

/// Coordinate of a polynomial vector field: (component index, monomial).
struct FieldKey {
  int comp;
  Monomial mono;
};

struct FieldKeyLess {
  bool operator()(const FieldKey& a, const FieldKey& b) const {
    MonomialLess ml;
    if (ml(a.mono, b.mono)) return true;
    if (ml(b.mono, a.mono)) return false;
    return a.comp < b.comp;
  }
};

using FieldVec = std::map<FieldKey, Rational, FieldKeyLess>;

inline FieldVec field_to_vec(const PolyVectorField& f) {
  FieldVec v;
  for (int c = 0; c < f.dimension(); ++c)
    for (const auto& [mono, coeff] : f.component(c)) v.emplace(FieldKey{c, mono}, coeff);
  return v;
}

/// Incremental exact Gaussian elimination over the rationals.
class ExactReducer {
 public:
  /// Reduces v against current pivots; if a nonzero remainder survives,
  /// installs it as a new pivot row and returns true.
  bool try_add(FieldVec v) {
    reduce(v);
    if (v.empty()) return false;
    rows_.emplace(v.begin()->first, std::move(v));
    return true;
  }

  bool is_dependent(FieldVec v) const {
    reduce(v);
    return v.empty();
  }

  int rank() const { return static_cast<int>(rows_.size()); }

 private:
  void reduce(FieldVec& v) const {
    // pivots are visited in key order; each elimination can only introduce
    // keys at or after the pivot, so one sweep suffices
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
  }

  std::map<FieldKey, FieldVec, FieldKeyLess> rows_;
};

}  // namespace detail

/// Basis and dimension of the degree-bounded span of iterated brackets.
struct LieSpanReport {
  int d = 0;
  int m = 0;
  int degree_cap = 0;
  int depth_cap = 0;
  std::vector<PolyVectorField> basis;
  std::vector<LieWord> words_used;
  int dimension = 0;

  nlohmann::json to_json() const {
    nlohmann::json words = nlohmann::json::array();
    for (const auto& w : words_used) words.push_back(w.to_json());
    return {{"d", d},
            {"m", m},
            {"degree_cap", degree_cap},
            {"depth_cap", depth_cap},
            {"dimension", dimension},
            {"words", std::move(words)}};
  }
};

/// Degree-bounded Lie closure. Starting from the generators, each round
/// brackets the independent material found so far with the generators
/// (right-nested words); depth_cap bounds the word length (leaf count).
/// Brackets of any degree are kept as bracketing material; the reported
/// basis is a maximal independent subset of the material with degree <= k.
inline LieSpanReport lie_closure_bounded(const std::vector<PolyVectorField>& generators, int degree_cap,
                                         int depth_cap) {
  if (generators.empty()) throw std::invalid_argument("lie_closure_bounded: no generators");
  const int m = generators[0].dimension();
  for (const auto& g : generators)
    if (g.dimension() != m) throw std::invalid_argument("lie_closure_bounded: generator dimension mismatch");
  if (degree_cap < 0 || depth_cap < 1)
    throw std::invalid_argument("lie_closure_bounded: requires degree_cap >= 0, depth_cap >= 1");

  LieSpanReport report;
  report.d = static_cast<int>(generators.size());
  report.m = m;
  report.degree_cap = degree_cap;
  report.depth_cap = depth_cap;

  detail::ExactReducer material_rank;
  detail::ExactReducer output_rank;

  struct Item {
    PolyVectorField field;
    LieWord word;
  };
  std::vector<Item> material;

  auto admit = [&](PolyVectorField f, LieWord w) {
    if (f.is_zero()) return false;
    if (!material_rank.try_add(detail::field_to_vec(f))) return false;
    if (f.degree() <= degree_cap && output_rank.try_add(detail::field_to_vec(f))) {
      report.basis.push_back(f);
      report.words_used.push_back(w);
    }
    material.push_back({std::move(f), std::move(w)});
    return true;
  };

  for (int i = 0; i < report.d; ++i) admit(generators[i], LieWord::leaf(i));

  size_t round_begin = 0;
  for (int len = 2; len <= depth_cap; ++len) {
    const size_t round_end = material.size();
    if (round_begin == round_end) break;  // fixpoint
    for (size_t b = round_begin; b < round_end; ++b) {
      for (int g = 0; g < report.d; ++g) {
        const auto& base = material[b];
        if (base.word.is_leaf() && base.word.generator() == g) continue;  // [V,V] = 0
        admit(lie_bracket(generators[g], base.field), LieWord::bracket(LieWord::leaf(g), base.word));
      }
    }
    round_begin = round_end;
  }

  report.dimension = static_cast<int>(report.basis.size());
  return report;
}

/// All right-nested bracket words over d generators with length (free Lie
/// degree) up to max_length. Subtrees are shared, so evaluation can memoize.
inline std::vector<LieWord> bracket_words_up_to(int d, int max_length) {
  std::vector<LieWord> all;
  std::vector<LieWord> prev;
  for (int g = 0; g < d; ++g) {
    prev.push_back(LieWord::leaf(g));
    all.push_back(prev.back());
  }
  for (int len = 2; len <= max_length; ++len) {
    std::vector<LieWord> cur;
    for (int g = 0; g < d; ++g) {
      for (const auto& w : prev) {
        if (len == 2 && w.generator() <= g) continue;  // keep [i,j] with i < j only
        if (w.is_leaf() && w.generator() == g) continue;
        cur.push_back(LieWord::bracket(LieWord::leaf(g), w));
      }
    }
    all.insert(all.end(), cur.begin(), cur.end());
    prev = std::move(cur);
  }
  return all;
}

/// Stacked evaluation matrix of Lemma-style rank tests: column w holds
/// (L_w(V_1..V_d)(x_1), ..., L_w(V_1..V_d)(x_N)). Polynomial fields are
/// bracketed exactly and then evaluated; purely numeric fields support
/// words of length <= 2 via the Jacobian formula.
inline Eigen::MatrixXd interpolation_matrix(std::span<const SmoothField> fields, std::span<const LieWord> words,
                                            const std::vector<Eigen::VectorXd>& tuple) {
  if (fields.empty()) throw std::invalid_argument("interpolation_matrix: no fields");
  const int m = fields[0].m;
  const int n_points = static_cast<int>(tuple.size());
  for (int i = 0; i < n_points; ++i)
    for (int j = i + 1; j < n_points; ++j)
      if (tuple[i] == tuple[j]) throw std::invalid_argument("interpolation_matrix: duplicate points in tuple");

  bool all_poly = true;
  for (const auto& f : fields) all_poly = all_poly && f.poly.has_value();

  Eigen::MatrixXd out(m * n_points, static_cast<Eigen::Index>(words.size()));
  if (all_poly) {
    std::vector<PolyVectorField> polys;
    polys.reserve(fields.size());
    for (const auto& f : fields) polys.push_back(*f.poly);
    // memoize on shared subtrees
    std::unordered_map<const LieWord*, PolyVectorField> memo;
    std::function<PolyVectorField(const LieWord&)> eval_word = [&](const LieWord& w) -> PolyVectorField {
      if (w.is_leaf()) return polys[w.generator()];
      auto it = memo.find(&w);
      if (it != memo.end()) return it->second;
      PolyVectorField f = lie_bracket(eval_word(w.left()), eval_word(w.right()));
      memo.emplace(&w, f);
      return f;
    };
    for (size_t c = 0; c < words.size(); ++c) {
      PolyVectorField f = eval_word(words[c]);
      for (int p = 0; p < n_points; ++p) out.block(p * m, static_cast<Eigen::Index>(c), m, 1) = f.evaluate(tuple[p]);
    }
  } else {
    for (size_t c = 0; c < words.size(); ++c) {
      const LieWord& w = words[c];
      for (int p = 0; p < n_points; ++p) {
        Eigen::VectorXd col(m);
        if (w.is_leaf()) {
          col = fields[w.generator()].eval(tuple[p]);
        } else if (w.left().is_leaf() && w.right().is_leaf()) {
          const auto& u = fields[w.left().generator()];
          const auto& v = fields[w.right().generator()];
          col = v.jac(tuple[p]) * u.eval(tuple[p]) - u.jac(tuple[p]) * v.eval(tuple[p]);
        } else {
          throw std::invalid_argument(
              "interpolation_matrix: numeric fields support bracket words of length <= 2 only");
        }
        out.block(p * m, static_cast<Eigen::Index>(c), m, 1) = col;
      }
    }
  }
  return out;
}

struct RankVerdict {
  int rows = 0;
  int cols = 0;
  int rank = 0;
  double smallest_needed_singular_value = 0.0;
  double largest_singular_value = 0.0;
  bool full_row_rank = false;
};

/// Full-row-rank test of the stacked matrix; positivity of the sum of
/// squared maximal minors is equivalent (Cauchy-Binet), but combinatorially
/// explosive, so the check thresholds singular values instead.
inline RankVerdict rank_verdict(const Eigen::MatrixXd& mat, double tol = 1e-9) {
  RankVerdict v;
  v.rows = static_cast<int>(mat.rows());
  v.cols = static_cast<int>(mat.cols());
  if (mat.cols() == 0 || mat.rows() == 0) return v;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(mat);
  const auto& s = svd.singularValues();
  v.largest_singular_value = s(0);
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > tol * s(0)) v.rank = i + 1;
  if (static_cast<int>(s.size()) >= v.rows && s(0) > 0) {
    v.smallest_needed_singular_value = s(v.rows - 1);
    v.full_row_rank = v.smallest_needed_singular_value > tol * s(0);
  }
  return v;
}

inline bool interpolates_at_tuple(std::span<const SmoothField> fields, std::span<const LieWord> words,
                                  const std::vector<Eigen::VectorXd>& tuple, double tol = 1e-9) {
  return rank_verdict(interpolation_matrix(fields, words, tuple), tol).full_row_rank;
}

}  // namespace codeflow
