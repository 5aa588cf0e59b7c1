#pragma once

#include <cstdio>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <unsupported/Eigen/MatrixFunctions>

#include "codeflow/smooth_field.hpp"

namespace codeflow {

/// Piecewise-constant controls u^1..u^d on M equal steps of [0,1];
/// u(s, i) holds u^i on [s/M, (s+1)/M).
struct ControlPath {
  int d = 0;
  int M = 0;
  Eigen::MatrixXd u;  // M x d

  static ControlPath zeros(int d, int M) {
    ControlPath c;
    c.d = d;
    c.M = M;
    c.u = Eigen::MatrixXd::Zero(M, d);
    return c;
  }

  static ControlPath constant(const Eigen::VectorXd& value, int M) {
    ControlPath c;
    c.d = static_cast<int>(value.size());
    c.M = M;
    c.u = value.transpose().replicate(M, 1);
    return c;
  }
};

/// Grid states X_s at t_s = s/M, with the first-variation Jacobians when the
/// augmented system was integrated.
struct Trajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  std::vector<Eigen::MatrixXd> jacobians;  // empty unless variation requested
  bool has_jacobians() const { return !jacobians.empty(); }
};

class BlowUpError : public std::runtime_error {
 public:
  explicit BlowUpError(int step)
      : std::runtime_error("trajectory exceeded the blow-up bound at step " + std::to_string(step)), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

struct FlowOptions {
  double r_max = 1e6;
};

namespace detail {

struct StageBuffers {
  Eigen::VectorXd k1, k2, k3, k4, x2, x3, x4, tmp;
  Eigen::MatrixXd A1, A2, A3, A4, K1, K2, K3, K4;
  explicit StageBuffers(int m)
      : k1(m), k2(m), k3(m), k4(m), x2(m), x3(m), x4(m), tmp(m), A1(m, m), A2(m, m), A3(m, m), A4(m, m), K1(m, m),
        K2(m, m), K3(m, m), K4(m, m) {}
};

inline void combined_eval(std::span<const SmoothField> fields, const Eigen::VectorXd& coeffs,
                          const Eigen::VectorXd& x, Eigen::VectorXd& out, Eigen::VectorXd& scratch) {
  out.setZero();
  for (size_t i = 0; i < fields.size(); ++i) {
    if (coeffs[static_cast<Eigen::Index>(i)] == 0.0) continue;
    fields[i].eval_into(x, scratch);
    out += coeffs[static_cast<Eigen::Index>(i)] * scratch;
  }
}

inline void combined_jac(std::span<const SmoothField> fields, const Eigen::VectorXd& coeffs,
                         const Eigen::VectorXd& x, Eigen::MatrixXd& out, Eigen::MatrixXd& scratch) {
  out.setZero();
  for (size_t i = 0; i < fields.size(); ++i) {
    if (coeffs[static_cast<Eigen::Index>(i)] == 0.0) continue;
    fields[i].jac_into(x, scratch);
    out += coeffs[static_cast<Eigen::Index>(i)] * scratch;
  }
}

inline void check_inputs(std::span<const SmoothField> fields, const ControlPath& controls,
                         const Eigen::VectorXd& x0) {
  if (static_cast<int>(fields.size()) != controls.d)
    throw std::invalid_argument("integrate: field count does not match controls.d");
  if (controls.M < 1 || controls.d < 1) throw std::invalid_argument("integrate: controls must have M >= 1, d >= 1");
  if (!controls.u.allFinite()) throw std::invalid_argument("integrate: controls contain non-finite entries");
  for (const auto& f : fields)
    if (f.m != x0.size()) throw std::invalid_argument("integrate: field dimension does not match x0");
}

}  // namespace detail

/// Sum of the control-weighted Jacobians at x, the coefficient matrix of the
/// linear variational equation.
inline Eigen::MatrixXd combined_jacobian(std::span<const SmoothField> fields, const Eigen::VectorXd& coeffs,
                                         const Eigen::VectorXd& x) {
  Eigen::MatrixXd out(x.size(), x.size()), scratch(x.size(), x.size());
  detail::combined_jac(fields, coeffs, x, out, scratch);
  return out;
}

/// Classical RK4 with one step per control interval (h = 1/M); controls are
/// frozen within each step, making every step autonomous.
inline Trajectory integrate(std::span<const SmoothField> fields, const ControlPath& controls,
                            const Eigen::VectorXd& x0, const FlowOptions& opts = {}) {
  detail::check_inputs(fields, controls, x0);
  const int m = static_cast<int>(x0.size());
  const int M = controls.M;
  const double h = 1.0 / M;

  Trajectory traj;
  traj.times.resize(M + 1);
  traj.states.reserve(M + 1);
  traj.states.push_back(x0);
  detail::StageBuffers sb(m);
  Eigen::VectorXd x = x0;
  for (int s = 0; s < M; ++s) {
    traj.times[s] = static_cast<double>(s) / M;
    const Eigen::VectorXd us = controls.u.row(s).transpose();
    detail::combined_eval(fields, us, x, sb.k1, sb.tmp);
    sb.x2 = x + (h / 2) * sb.k1;
    detail::combined_eval(fields, us, sb.x2, sb.k2, sb.tmp);
    sb.x3 = x + (h / 2) * sb.k2;
    detail::combined_eval(fields, us, sb.x3, sb.k3, sb.tmp);
    sb.x4 = x + h * sb.k3;
    detail::combined_eval(fields, us, sb.x4, sb.k4, sb.tmp);
    x += (h / 6) * (sb.k1 + 2 * sb.k2 + 2 * sb.k3 + sb.k4);
    if (!x.allFinite() || x.norm() > opts.r_max) throw BlowUpError(s);
    traj.states.push_back(x);
  }
  traj.times[M] = 1.0;
  return traj;
}

/// Jointly integrates state and first variation by RK4 on the augmented
/// system; J_0 = I. The J-stages reuse the state stage points, so the result
/// coincides with the exact Jacobian of the discrete step map.
inline Trajectory integrate_with_variation(std::span<const SmoothField> fields, const ControlPath& controls,
                                           const Eigen::VectorXd& x0, const FlowOptions& opts = {}) {
  detail::check_inputs(fields, controls, x0);
  const int m = static_cast<int>(x0.size());
  const int M = controls.M;
  const double h = 1.0 / M;

  Trajectory traj;
  traj.times.resize(M + 1);
  traj.states.reserve(M + 1);
  traj.jacobians.reserve(M + 1);
  traj.states.push_back(x0);
  traj.jacobians.push_back(Eigen::MatrixXd::Identity(m, m));

  detail::StageBuffers sb(m);
  Eigen::MatrixXd jscratch(m, m);
  Eigen::VectorXd x = x0;
  Eigen::MatrixXd J = Eigen::MatrixXd::Identity(m, m);
  for (int s = 0; s < M; ++s) {
    traj.times[s] = static_cast<double>(s) / M;
    const Eigen::VectorXd us = controls.u.row(s).transpose();
    detail::combined_eval(fields, us, x, sb.k1, sb.tmp);
    detail::combined_jac(fields, us, x, sb.A1, jscratch);
    sb.K1 = sb.A1 * J;
    sb.x2 = x + (h / 2) * sb.k1;
    detail::combined_eval(fields, us, sb.x2, sb.k2, sb.tmp);
    detail::combined_jac(fields, us, sb.x2, sb.A2, jscratch);
    sb.K2 = sb.A2 * (J + (h / 2) * sb.K1);
    sb.x3 = x + (h / 2) * sb.k2;
    detail::combined_eval(fields, us, sb.x3, sb.k3, sb.tmp);
    detail::combined_jac(fields, us, sb.x3, sb.A3, jscratch);
    sb.K3 = sb.A3 * (J + (h / 2) * sb.K2);
    sb.x4 = x + h * sb.k3;
    detail::combined_eval(fields, us, sb.x4, sb.k4, sb.tmp);
    detail::combined_jac(fields, us, sb.x4, sb.A4, jscratch);
    sb.K4 = sb.A4 * (J + h * sb.K3);
    x += (h / 6) * (sb.k1 + 2 * sb.k2 + 2 * sb.k3 + sb.k4);
    J += (h / 6) * (sb.K1 + 2 * sb.K2 + 2 * sb.K3 + sb.K4);
    if (!x.allFinite() || x.norm() > opts.r_max) throw BlowUpError(s);
    traj.states.push_back(x);
    traj.jacobians.push_back(J);
  }
  traj.times[M] = 1.0;
  return traj;
}

inline double operator_norm(const Eigen::MatrixXd& mat) {
  return Eigen::JacobiSVD<Eigen::MatrixXd>(mat).singularValues()(0);
}

/// exp of the trapezoid approximation of int_0^{t_s} || sum_i u^i DV_i(X) ||_op,
/// one value per grid point; each interval uses its own frozen control at
/// both endpoint states.
inline std::vector<double> jacobian_bound_profile(std::span<const SmoothField> fields, const ControlPath& controls,
                                                  const Trajectory& traj) {
  if (static_cast<int>(traj.states.size()) != controls.M + 1)
    throw std::invalid_argument("jacobian_bound_profile: trajectory does not match controls");
  const double h = 1.0 / controls.M;
  std::vector<double> bounds(controls.M + 1);
  bounds[0] = 1.0;
  double integral = 0.0;
  for (int s = 0; s < controls.M; ++s) {
    const Eigen::VectorXd us = controls.u.row(s).transpose();
    const double n0 = operator_norm(combined_jacobian(fields, us, traj.states[s]));
    const double n1 = operator_norm(combined_jacobian(fields, us, traj.states[s + 1]));
    integral += (h / 2) * (n0 + n1);
    bounds[s + 1] = std::exp(integral);
  }
  return bounds;
}

/// The operator-norm bound at final time.
inline double jacobian_bound(std::span<const SmoothField> fields, const ControlPath& controls,
                             const Trajectory& traj) {
  return jacobian_bound_profile(fields, controls, traj).back();
}

/// || e^{-At} e^{-Bt} e^{At} e^{Bt} x - x - t^2 (AB-BA) x ||; the group
/// commutator's deviation from its second-order expansion.
inline double commutator_flow_residual(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, double t,
                                       const Eigen::VectorXd& x) {
  if (A.rows() != A.cols() || B.rows() != B.cols() || A.rows() != B.rows() || A.rows() != x.size())
    throw std::invalid_argument("commutator_flow_residual: dimension mismatch");
  const Eigen::MatrixXd eAt = (A * t).exp();
  const Eigen::MatrixXd eBt = (B * t).exp();
  const Eigen::MatrixXd eAmt = (A * -t).exp();
  const Eigen::MatrixXd eBmt = (B * -t).exp();
  const Eigen::VectorXd moved = eAmt * (eBmt * (eAt * (eBt * x)));
  const Eigen::VectorXd expansion = x + t * t * ((A * B - B * A) * x);
  return (moved - expansion).norm();
}

/// CSV export: header t,x1,...,xm[,j11,...,jmm], 17 significant digits.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  const int m = static_cast<int>(traj.states.empty() ? 0 : traj.states[0].size());
  os << "t";
  for (int i = 0; i < m; ++i) os << ",x" << (i + 1);
  if (traj.has_jacobians())
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) os << ",j" << (i + 1) << (j + 1);
  os << "\n";
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    os << "," << buf;
  };
  for (size_t s = 0; s < traj.states.size(); ++s) {
    std::snprintf(buf, sizeof(buf), "%.17g", traj.times[s]);
    os << buf;
    for (int i = 0; i < m; ++i) put(traj.states[s][i]);
    if (traj.has_jacobians())
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) put(traj.jacobians[s](i, j));
    os << "\n";
  }
}

}  // namespace codeflow
