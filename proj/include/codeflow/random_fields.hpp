#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "codeflow/canonical.hpp"
#include "codeflow/poly_vf.hpp"
#include "codeflow/smooth_field.hpp"

namespace codeflow {

/// mt19937_64 stream with hand-rolled uniform / Box-Muller transforms; the
/// standard pins the engine sequence but not the library distributions, so
/// this keeps sampled fields identical across toolchains.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : eng_(seed) {}

  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  double normal() {
    double u1 = uniform01();
    while (u1 == 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 eng_;
};

/// Monomial exponents of degree <= k in m variables, in the canonical
/// (degree, lexicographic) order shared with PolyVectorField.
inline std::vector<std::vector<int>> monomials_up_to(int m, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(m, 0);
  for (int total = 0; total <= k; ++total) {
    std::function<void(int, int)> gen = [&](int pos, int remaining) {
      if (pos == m) {
        if (remaining == 0) out.push_back(cur);
        return;
      }
      for (int e = 0; e <= remaining; ++e) {
        cur[pos] = e;
        gen(pos + 1, remaining - e);
        cur[pos] = 0;
      }
    };
    gen(0, total);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return MonomialLess{}(Monomial(a), Monomial(b));
  });
  return out;
}

struct FieldSampleSpec {
  enum class Distribution { standard_normal, uniform };

  int m = 2;
  int d = 5;
  int k = 2;
  std::uint64_t seed = 0;
  Distribution distribution = Distribution::standard_normal;
  double lo = -1.0;
  double hi = 1.0;

  /// l = d * m * binom(m+k, m) real coefficients.
  std::int64_t parameter_count() const { return d * polynomial_space_dimension(m, k); }

  nlohmann::json to_json() const {
    nlohmann::json j{{"m", m}, {"d", d}, {"k", k}, {"seed", seed}};
    if (distribution == Distribution::standard_normal) {
      j["distribution"] = "standard_normal";
    } else {
      j["distribution"] = "uniform";
      j["lo"] = lo;
      j["hi"] = hi;
    }
    return j;
  }

  static FieldSampleSpec from_json(const nlohmann::json& j) {
    FieldSampleSpec s;
    s.m = j.at("m").get<int>();
    s.d = j.at("d").get<int>();
    s.k = j.at("k").get<int>();
    s.seed = j.at("seed").get<std::uint64_t>();
    const std::string dist = j.value("distribution", "standard_normal");
    if (dist == "standard_normal") {
      s.distribution = Distribution::standard_normal;
    } else if (dist == "uniform") {
      s.distribution = Distribution::uniform;
      s.lo = j.at("lo").get<double>();
      s.hi = j.at("hi").get<double>();
    } else {
      throw std::invalid_argument("FieldSampleSpec: unknown distribution " + dist);
    }
    return s;
  }
};

/// Draws l i.i.d. coefficients under the seed and assembles d polynomial
/// fields of degree <= k. Deterministic given the spec.
inline std::vector<PolyVectorField> sample_polynomial_fields(const FieldSampleSpec& spec) {
  if (spec.m < 2) throw std::invalid_argument("sample_polynomial_fields: requires m >= 2");
  if (spec.d < 5) throw std::invalid_argument("sample_polynomial_fields: requires d >= 5");
  if (spec.k < 2) throw std::invalid_argument("sample_polynomial_fields: requires k >= 2");
  SeededRng rng(spec.seed);
  const auto monos = monomials_up_to(spec.m, spec.k);
  std::vector<PolyVectorField> fields;
  fields.reserve(spec.d);
  for (int i = 0; i < spec.d; ++i) {
    PolyVectorField f(spec.m);
    for (int c = 0; c < spec.m; ++c) {
      for (const auto& alpha : monos) {
        const double draw = spec.distribution == FieldSampleSpec::Distribution::standard_normal
                                ? rng.normal()
                                : rng.uniform(spec.lo, spec.hi);
        f.add_term(c, alpha, rational_from_double(draw));
      }
    }
    fields.push_back(std::move(f));
  }
  return fields;
}

namespace detail {

inline double box_monomial_bound(const std::vector<int>& alpha, const Box& box) {
  double b = 1.0;
  for (size_t i = 0; i < alpha.size(); ++i) {
    const double w = std::max(std::abs(box.lo[static_cast<Eigen::Index>(i)]),
                              std::abs(box.hi[static_cast<Eigen::Index>(i)]));
    for (int e = 0; e < alpha[i]; ++e) b *= w;
  }
  return b;
}

}  // namespace detail

/// Grid maximum of ||a(x) - b(x)|| over the box plus a coefficient-derived
/// Lipschitz margin, an upper estimate of the sup deviation.
inline double certified_sup_deviation(const PolyVectorField& a, const PolyVectorField& b, const Box& box,
                                      int grid_per_axis = 17) {
  const int m = a.dimension();
  PolyVectorField diff = add(a, scale(-1, b));
  // grid sweep
  double grid_max = 0.0;
  std::vector<int> idx(m, 0);
  Eigen::VectorXd x(m);
  const int G = grid_per_axis;
  while (true) {
    for (int i = 0; i < m; ++i) x[i] = box.lo[i] + (box.hi[i] - box.lo[i]) * idx[i] / (G - 1);
    grid_max = std::max(grid_max, diff.evaluate(x).norm());
    int p = 0;
    while (p < m && ++idx[p] == G) idx[p++] = 0;
    if (p == m) break;
  }
  // Lipschitz bound from coefficient magnitudes: |d diff_i / dx_j| <=
  // sum |c| * alpha_j * bound(alpha - e_j)
  double lip_sq = 0.0;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      double entry = 0.0;
      for (const auto& [mono, c] : diff.component(i)) {
        if (mono.alpha[j] == 0) continue;
        auto d = mono.alpha;
        d[j] -= 1;
        entry += std::abs(to_double(c)) * mono.alpha[j] * detail::box_monomial_bound(d, box);
      }
      lip_sq += entry * entry;
    }
  }
  double max_cell = 0.0;
  for (int i = 0; i < m; ++i) max_cell = std::max(max_cell, (box.hi[i] - box.lo[i]) / (G - 1));
  return grid_max + std::sqrt(lip_sq) * max_cell * std::sqrt(static_cast<double>(m)) / 2.0;
}

/// Coefficient perturbation of the degree-k truncations of the targets,
/// scaled so the sup deviation on the box is certified below epsilon/2.
inline std::vector<PolyVectorField> perturb_to_universal(const std::vector<PolyVectorField>& targets, double epsilon,
                                                         const Box& box, std::uint64_t seed) {
  if (targets.size() < 5) throw std::invalid_argument("perturb_to_universal: requires at least five target fields");
  if (epsilon <= 0) throw std::invalid_argument("perturb_to_universal: epsilon must be positive");
  const int m = targets[0].dimension();
  int k = 2;
  for (const auto& t : targets) k = std::max(k, t.degree());
  const auto monos = monomials_up_to(m, k);
  double bound_sum = 0.0;
  for (const auto& alpha : monos) bound_sum += detail::box_monomial_bound(alpha, box);
  const double radius = (epsilon / 2.0) / (std::sqrt(static_cast<double>(m)) * bound_sum);

  SeededRng rng(seed);
  std::vector<PolyVectorField> out;
  out.reserve(targets.size());
  for (const auto& target : targets) {
    PolyVectorField f(m);
    for (int c = 0; c < m; ++c)
      for (const auto& [mono, coeff] : target.component(c))
        if (mono.degree() <= k) f.add_term(c, mono.alpha, coeff);
    for (int c = 0; c < m; ++c)
      for (const auto& alpha : monos) f.add_term(c, alpha, rational_from_double(rng.uniform(-radius, radius)));
    out.push_back(std::move(f));
  }
  return out;
}

struct NeuralFieldSpec {
  enum class Sigma { atan_blend, tanh_blend };

  int m = 2;
  std::uint64_t seed = 0;
  Sigma sigma = Sigma::tanh_blend;
  Eigen::Vector2d z0{1.0, 1.0};
  std::vector<Eigen::MatrixXd> C;  // seven m x m matrices
  std::vector<Eigen::VectorXd> b;  // seven m-vectors

  /// Draw order: Z0^1, Z0^2, then C_i row-major followed by b_i for i=1..7.
  static NeuralFieldSpec random(int m, std::uint64_t seed, Sigma sigma = Sigma::tanh_blend) {
    if (m < 2) throw std::invalid_argument("NeuralFieldSpec::random: requires m >= 2");
    NeuralFieldSpec s;
    s.m = m;
    s.seed = seed;
    s.sigma = sigma;
    SeededRng rng(seed);
    s.z0[0] = rng.normal();
    s.z0[1] = rng.normal();
    for (int i = 0; i < 7; ++i) {
      Eigen::MatrixXd c(m, m);
      for (int r = 0; r < m; ++r)
        for (int q = 0; q < m; ++q) c(r, q) = rng.normal();
      Eigen::VectorXd v(m);
      for (int r = 0; r < m; ++r) v[r] = rng.normal();
      s.C.push_back(std::move(c));
      s.b.push_back(std::move(v));
    }
    return s;
  }

  /// The reference parameter of the seven-field construction: z0 = (1,1),
  /// C1 = A, C2 = B, C3 = 0, C4 = e_1 e_m^T, C6 = I, C7 = ones in the last
  /// column, C5 = C6 + C7; b3 = e_m, all other b_i = 0.
  static NeuralFieldSpec reference(int m, Sigma sigma = Sigma::tanh_blend) {
    if (m < 2) throw std::invalid_argument("NeuralFieldSpec::reference: requires m >= 2");
    NeuralFieldSpec s;
    s.m = m;
    s.sigma = sigma;
    s.z0 = Eigen::Vector2d(1.0, 1.0);
    auto [a, bb] = sl_generators(m);
    Eigen::MatrixXd A(m, m), B(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        A(i, j) = to_double(a.at(i, j));
        B(i, j) = to_double(bb.at(i, j));
      }
    Eigen::MatrixXd C4 = Eigen::MatrixXd::Zero(m, m);
    C4(0, m - 1) = 1.0;
    Eigen::MatrixXd C7 = Eigen::MatrixXd::Zero(m, m);
    C7.col(m - 1).setOnes();
    Eigen::MatrixXd C6 = Eigen::MatrixXd::Identity(m, m);
    s.C = {A, B, Eigen::MatrixXd::Zero(m, m), C4, C6 + C7, C6, C7};
    s.b.assign(7, Eigen::VectorXd::Zero(m));
    s.b[2](m - 1) = 1.0;
    return s;
  }

  nlohmann::json to_json() const {
    auto mat = [](const Eigen::MatrixXd& M) {
      nlohmann::json rows = nlohmann::json::array();
      for (Eigen::Index i = 0; i < M.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(std::move(row));
      }
      return rows;
    };
    nlohmann::json cs = nlohmann::json::array(), bs = nlohmann::json::array();
    for (const auto& c : C) cs.push_back(mat(c));
    for (const auto& v : b) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index i = 0; i < v.size(); ++i) row.push_back(v[i]);
      bs.push_back(std::move(row));
    }
    return {{"m", m},
            {"seed", seed},
            {"sigma", sigma == Sigma::tanh_blend ? "tanh" : "atan"},
            {"z0", {z0[0], z0[1]}},
            {"C", std::move(cs)},
            {"b", std::move(bs)}};
  }

  static NeuralFieldSpec from_json(const nlohmann::json& j) {
    const std::string sig = j.value("sigma", "tanh");
    const Sigma sigma = sig == "tanh" ? Sigma::tanh_blend : Sigma::atan_blend;
    if (!j.contains("C")) return random(j.at("m").get<int>(), j.at("seed").get<std::uint64_t>(), sigma);
    NeuralFieldSpec s;
    s.m = j.at("m").get<int>();
    s.seed = j.value("seed", std::uint64_t{0});
    s.sigma = sigma;
    s.z0 << j.at("z0")[0].get<double>(), j.at("z0")[1].get<double>();
    for (const auto& rows : j.at("C")) {
      Eigen::MatrixXd M(s.m, s.m);
      for (int r = 0; r < s.m; ++r)
        for (int c = 0; c < s.m; ++c) M(r, c) = rows[r][c].get<double>();
      s.C.push_back(std::move(M));
    }
    for (const auto& row : j.at("b")) {
      Eigen::VectorXd v(s.m);
      for (int r = 0; r < s.m; ++r) v[r] = row[r].get<double>();
      s.b.push_back(std::move(v));
    }
    return s;
  }
};

/// The seven fields x -> sigma_i(C_i x + b_i), applied componentwise, with
/// sigma_i(r) = z0^1 r + (1-z0^1) sigma(r) for i=1..3 and
/// sigma_i(r) = z0^2 r^2 + (1-z0^2) sigma(r) for i=4..7; Jacobians use the
/// exact derivative of sigma through the chain rule.
inline std::vector<SmoothField> neural_fields(const NeuralFieldSpec& spec) {
  if (spec.C.size() != 7 || spec.b.size() != 7)
    throw std::invalid_argument("neural_fields: spec must carry seven (C, b) pairs");
  const bool use_tanh = spec.sigma == NeuralFieldSpec::Sigma::tanh_blend;
  const double z1 = spec.z0[0], z2 = spec.z0[1];
  std::vector<SmoothField> out;
  for (int i = 0; i < 7; ++i) {
    const Eigen::MatrixXd C = spec.C[i];
    const Eigen::VectorXd b = spec.b[i];
    const bool linear_blend = i < 3;
    SmoothField f;
    f.m = spec.m;
    f.eval_into = [C, b, z1, z2, linear_blend, use_tanh](const Eigen::VectorXd& x, Eigen::VectorXd& y) {
      y = C * x + b;
      for (Eigen::Index r = 0; r < y.size(); ++r) {
        const double v = y[r];
        const double s = use_tanh ? std::tanh(v) : std::atan(v);
        y[r] = linear_blend ? z1 * v + (1 - z1) * s : z2 * v * v + (1 - z2) * s;
      }
    };
    f.jac_into = [C, b, z1, z2, linear_blend, use_tanh](const Eigen::VectorXd& x, Eigen::MatrixXd& J) {
      Eigen::VectorXd r = C * x + b;
      for (Eigen::Index q = 0; q < r.size(); ++q) {
        const double v = r[q];
        const double ds = use_tanh ? 1.0 - std::tanh(v) * std::tanh(v) : 1.0 / (1.0 + v * v);
        r[q] = linear_blend ? z1 + (1 - z1) * ds : 2 * z2 * v + (1 - z2) * ds;
      }
      J = r.asDiagonal() * C;
    };
    out.push_back(std::move(f));
  }
  return out;
}

/// The seven reference fields as exact polynomials (the sigma_i(r) = r / r^2
/// instance of the construction above).
inline std::vector<PolyVectorField> reference_hat_fields(int m) {
  if (m < 2) throw std::invalid_argument("reference_hat_fields: requires m >= 2");
  auto sys = canonical_five(m);
  std::vector<PolyVectorField> out;
  out.push_back(sys.fields[0]);  // Ax
  out.push_back(sys.fields[1]);  // Bx
  out.push_back(sys.fields[2]);  // e_m
  out.push_back(sys.fields[3]);  // (x^m)^2 e_1
  PolyVectorField v5(m), v6(m), v7(m);
  for (int i = 0; i < m; ++i) {
    // (x^i + x^m)^2, componentwise
    std::vector<int> sq(m, 0);
    sq[i] = 2;
    v5.add_term(i, sq, 1);
    std::vector<int> cross(m, 0);
    cross[i] += 1;
    cross[m - 1] += 1;
    v5.add_term(i, cross, 2);
    std::vector<int> msq(m, 0);
    msq[m - 1] = 2;
    v5.add_term(i, msq, 1);
    v6.add_term(i, sq, 1);
    v7.add_term(i, msq, 1);
  }
  out.push_back(std::move(v5));
  out.push_back(std::move(v6));
  out.push_back(std::move(v7));
  return out;
}

}  // namespace codeflow
