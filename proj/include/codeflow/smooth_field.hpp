#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "codeflow/poly_vf.hpp"

namespace codeflow {

/// Axis-aligned bounded box, the region Omega of the experiments.
struct Box {
  Eigen::VectorXd lo, hi;

  int dimension() const { return static_cast<int>(lo.size()); }

  bool contains(const Eigen::VectorXd& x) const {
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (x[i] < lo[i] || x[i] > hi[i]) return false;
    return true;
  }

  static Box centered_cube(int m, double half_width) {
    Box b;
    b.lo = Eigen::VectorXd::Constant(m, -half_width);
    b.hi = Eigen::VectorXd::Constant(m, half_width);
    return b;
  }
};

/// Evaluator / Jacobian-evaluator pair. Polynomial fields keep their exact
/// symbolic form alongside, so bracket machinery can stay symbolic for them.
struct SmoothField {
  int m = 0;
  std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)> eval_into;
  std::function<void(const Eigen::VectorXd&, Eigen::MatrixXd&)> jac_into;
  std::optional<PolyVectorField> poly;

  Eigen::VectorXd eval(const Eigen::VectorXd& x) const {
    Eigen::VectorXd out(m);
    eval_into(x, out);
    return out;
  }

  Eigen::MatrixXd jac(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd out(m, m);
    jac_into(x, out);
    return out;
  }
};

namespace detail {

/// Flattened double-coefficient term table; the hot-path form of a
/// polynomial field used by the integrator and trainer.
struct CompiledTerm {
  int comp;
  std::vector<int> alpha;
  double c;
};

inline double eval_mono(const std::vector<int>& alpha, const Eigen::VectorXd& x) {
  double v = 1.0;
  for (size_t i = 0; i < alpha.size(); ++i)
    for (int e = 0; e < alpha[i]; ++e) v *= x[static_cast<Eigen::Index>(i)];
  return v;
}

}  // namespace detail

inline SmoothField make_smooth(const PolyVectorField& f) {
  const int m = f.dimension();
  auto terms = std::make_shared<std::vector<detail::CompiledTerm>>();
  // jac_terms[j]: terms of the j-th column d/dx_j
  auto jac_terms = std::make_shared<std::vector<std::vector<detail::CompiledTerm>>>(m);
  for (int c = 0; c < m; ++c) {
    for (const auto& [mono, coeff] : f.component(c)) {
      terms->push_back({c, mono.alpha, to_double(coeff)});
      for (int j = 0; j < m; ++j) {
        if (mono.alpha[j] == 0) continue;
        auto d = mono.alpha;
        d[j] -= 1;
        (*jac_terms)[j].push_back({c, std::move(d), to_double(coeff) * mono.alpha[j]});
      }
    }
  }
  SmoothField s;
  s.m = m;
  s.poly = f;
  s.eval_into = [terms](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
    out.setZero();
    for (const auto& t : *terms) out[t.comp] += t.c * detail::eval_mono(t.alpha, x);
  };
  s.jac_into = [jac_terms, m](const Eigen::VectorXd& x, Eigen::MatrixXd& out) {
    out.setZero();
    for (int j = 0; j < m; ++j)
      for (const auto& t : (*jac_terms)[j]) out(t.comp, j) += t.c * detail::eval_mono(t.alpha, x);
  };
  return s;
}

inline std::vector<SmoothField> make_smooth(const std::vector<PolyVectorField>& fields) {
  std::vector<SmoothField> out;
  out.reserve(fields.size());
  for (const auto& f : fields) out.push_back(make_smooth(f));
  return out;
}

}  // namespace codeflow
