#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "codeflow/flow.hpp"
#include "codeflow/random_fields.hpp"
#include "codeflow/smooth_field.hpp"

namespace codeflow {

/// Pairwise-distinct input/target pairs inside a bounded box.
struct TrainingSet {
  int m = 0;
  std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> pairs;
  Box omega;

  nlohmann::json to_json() const {
    nlohmann::json ps = nlohmann::json::array();
    for (const auto& [x, y] : pairs) {
      nlohmann::json px = nlohmann::json::array(), py = nlohmann::json::array();
      for (Eigen::Index i = 0; i < x.size(); ++i) px.push_back(x[i]);
      for (Eigen::Index i = 0; i < y.size(); ++i) py.push_back(y[i]);
      ps.push_back({{"x", px}, {"y", py}});
    }
    nlohmann::json lo = nlohmann::json::array(), hi = nlohmann::json::array();
    for (Eigen::Index i = 0; i < omega.lo.size(); ++i) {
      lo.push_back(omega.lo[i]);
      hi.push_back(omega.hi[i]);
    }
    return {{"m", m}, {"pairs", ps}, {"omega", {{"lo", lo}, {"hi", hi}}}};
  }

  static TrainingSet from_json(const nlohmann::json& j) {
    TrainingSet ts;
    ts.m = j.at("m").get<int>();
    for (const auto& p : j.at("pairs")) {
      Eigen::VectorXd x(ts.m), y(ts.m);
      for (int i = 0; i < ts.m; ++i) {
        x[i] = p.at("x")[i].get<double>();
        y[i] = p.at("y")[i].get<double>();
      }
      ts.pairs.emplace_back(std::move(x), std::move(y));
    }
    ts.omega.lo.resize(ts.m);
    ts.omega.hi.resize(ts.m);
    for (int i = 0; i < ts.m; ++i) {
      ts.omega.lo[i] = j.at("omega").at("lo")[i].get<double>();
      ts.omega.hi[i] = j.at("omega").at("hi")[i].get<double>();
    }
    return ts;
  }
};

/// Identity readout y = X_1, or the residual readout y = lambda (X_1 - x)
/// with lambda = exp(log_lambda) trained jointly.
struct ReadoutMode {
  enum class Kind { identity, lambda_residual };
  Kind kind = Kind::identity;
  double log_lambda = 0.0;

  double lambda() const { return std::exp(log_lambda); }

  static ReadoutMode identity() { return {}; }
  static ReadoutMode lambda_residual(double log_lambda = 0.0) {
    return {Kind::lambda_residual, log_lambda};
  }
};

struct ValidationResult {
  enum class Kind { ok, duplicate_input, duplicate_target, out_of_region };
  Kind kind = Kind::ok;
  int index_a = -1;
  int index_b = -1;
  double min_pairwise_distance = 0.0;
  std::string message = "ok";

  bool ok() const { return kind == Kind::ok; }
};

/// Accepts iff inputs are pairwise distinct, targets are pairwise distinct
/// and every point lies inside the region.
inline ValidationResult validate_training_set(const TrainingSet& ts) {
  ValidationResult r;
  const int n = static_cast<int>(ts.pairs.size());
  double min_dist = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double dx = (ts.pairs[i].first - ts.pairs[j].first).norm();
      const double dy = (ts.pairs[i].second - ts.pairs[j].second).norm();
      min_dist = std::min({min_dist, dx, dy});
      if (dx == 0.0) {
        r.kind = ValidationResult::Kind::duplicate_input;
        r.index_a = i;
        r.index_b = j;
        r.message = "duplicate_input: pairs " + std::to_string(i) + " and " + std::to_string(j);
        return r;
      }
      if (dy == 0.0) {
        r.kind = ValidationResult::Kind::duplicate_target;
        r.index_a = i;
        r.index_b = j;
        r.message = "duplicate_target: pairs " + std::to_string(i) + " and " + std::to_string(j);
        return r;
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    if (!ts.omega.contains(ts.pairs[i].first) || !ts.omega.contains(ts.pairs[i].second)) {
      r.kind = ValidationResult::Kind::out_of_region;
      r.index_a = i;
      r.message = "out_of_region: pair " + std::to_string(i);
      return r;
    }
  }
  r.min_pairwise_distance = n > 1 ? min_dist : 0.0;
  return r;
}

struct TrainConfig {
  int M = 64;
  double reg = 0.0;
  double tol = 1e-3;
  int max_iters = 5000;
  std::uint64_t seed = 0;
  ReadoutMode::Kind readout = ReadoutMode::Kind::identity;
  double lr = 0.05;
  double init_std = 0.1;
  double r_max = 1e6;
};

struct TrainResult {
  enum class Status { converged, max_iters, blow_up };

  ControlPath controls;
  ReadoutMode readout;
  std::vector<double> residuals;
  struct HistoryRow {
    int iter;
    double loss;
    double max_residual;
  };
  std::vector<HistoryRow> history;
  int iterations = 0;
  Status status = Status::max_iters;

  static const char* status_name(Status s) {
    switch (s) {
      case Status::converged: return "converged";
      case Status::max_iters: return "max_iters";
      default: return "blow_up";
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json u = nlohmann::json::array();
    for (int s = 0; s < controls.M; ++s) {
      nlohmann::json row = nlohmann::json::array();
      for (int i = 0; i < controls.d; ++i) row.push_back(controls.u(s, i));
      u.push_back(std::move(row));
    }
    nlohmann::json j{{"controls", {{"d", controls.d}, {"M", controls.M}, {"u", std::move(u)}}},
                     {"readout", readout.kind == ReadoutMode::Kind::identity ? "identity" : "lambda_residual"},
                     {"residuals", residuals},
                     {"iterations", iterations},
                     {"status", status_name(status)}};
    if (readout.kind == ReadoutMode::Kind::lambda_residual) {
      j["log_lambda"] = readout.log_lambda;
      j["lambda"] = readout.lambda();
    }
    return j;
  }

  void write_history_csv(std::ostream& os) const {
    os << "iter,loss,max_residual\n";
    char buf[64];
    for (const auto& row : history) {
      os << row.iter;
      std::snprintf(buf, sizeof(buf), "%.17g", row.loss);
      os << "," << buf;
      std::snprintf(buf, sizeof(buf), "%.17g", row.max_residual);
      os << "," << buf << "\n";
    }
  }
};

namespace detail {

/// Value-sorted summation; makes the sample reduction independent of the
/// order the training pairs were supplied in, bit for bit.
inline double deterministic_sum(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double total = 0.0;
  for (double v : values) total += v;
  return total;
}

struct LossBreakdown {
  double loss = 0.0;
  double max_residual = 0.0;
  std::vector<double> residuals;
};

inline Eigen::VectorXd readout_apply(const ReadoutMode& r, const Eigen::VectorXd& xM, const Eigen::VectorXd& x0) {
  if (r.kind == ReadoutMode::Kind::identity) return xM;
  return r.lambda() * (xM - x0);
}

}  // namespace detail

/// sum_i ||R(X_M^{x_i}) - y_i||^2 + reg * (1/M) * sum u^2; samples are
/// processed in index order so the reduction is reproducible.
inline double loss(std::span<const SmoothField> fields, const ControlPath& controls, const ReadoutMode& readout,
                   const TrainingSet& ts, double reg, detail::LossBreakdown* breakdown = nullptr,
                   const FlowOptions& opts = {}) {
  if (reg < 0) throw std::invalid_argument("loss: reg must be >= 0");
  detail::LossBreakdown local;
  std::vector<double> terms;
  for (const auto& [x0, y] : ts.pairs) {
    const Trajectory traj = integrate(fields, controls, x0, opts);
    const Eigen::VectorXd r = detail::readout_apply(readout, traj.states.back(), x0) - y;
    terms.push_back(r.squaredNorm());
    local.residuals.push_back(r.norm());
  }
  double total = detail::deterministic_sum(std::move(terms));
  total += reg / controls.M * controls.u.squaredNorm();
  if (breakdown) {
    local.loss = total;
    local.max_residual = local.residuals.empty()
                             ? 0.0
                             : *std::max_element(local.residuals.begin(), local.residuals.end());
    *breakdown = std::move(local);
  }
  return total;
}

/// Exact gradient of the discrete loss: reverse accumulation through the
/// composed RK4 step maps. The second component is d loss / d log_lambda,
/// zero in identity mode.
inline std::pair<Eigen::MatrixXd, double> gradient(std::span<const SmoothField> fields, const ControlPath& controls,
                                                   const ReadoutMode& readout, const TrainingSet& ts, double reg,
                                                   double* loss_out = nullptr, detail::LossBreakdown* breakdown = nullptr,
                                                   const FlowOptions& opts = {}) {
  const int m = ts.m;
  const int M = controls.M;
  const int d = controls.d;
  const double h = 1.0 / M;
  const double lambda = readout.lambda();

  std::vector<Eigen::MatrixXd> sample_grads;
  std::vector<double> sample_loglam_grads;
  std::vector<double> loss_terms;
  detail::LossBreakdown local;

  detail::StageBuffers sb(m);
  Eigen::MatrixXd jscratch(m, m);
  Eigen::VectorXd vscratch(m), adj(m), g(m), kb1(m), kb2(m), kb3(m), kb4(m);

  for (const auto& [x0, y] : ts.pairs) {
    Eigen::MatrixXd grad_u = Eigen::MatrixXd::Zero(M, d);
    const Trajectory traj = integrate(fields, controls, x0, opts);
    const Eigen::VectorXd& xM = traj.states.back();
    Eigen::VectorXd r;
    if (readout.kind == ReadoutMode::Kind::identity) {
      r = xM - y;
      adj = 2.0 * r;
    } else {
      r = lambda * (xM - x0) - y;
      adj = 2.0 * lambda * r;
      sample_loglam_grads.push_back(2.0 * lambda * r.dot(xM - x0));
    }
    loss_terms.push_back(r.squaredNorm());
    local.residuals.push_back(r.norm());

    for (int s = M - 1; s >= 0; --s) {
      const Eigen::VectorXd us = controls.u.row(s).transpose();
      const Eigen::VectorXd& x1 = traj.states[s];
      detail::combined_eval(fields, us, x1, sb.k1, vscratch);
      sb.x2 = x1 + (h / 2) * sb.k1;
      detail::combined_eval(fields, us, sb.x2, sb.k2, vscratch);
      sb.x3 = x1 + (h / 2) * sb.k2;
      detail::combined_eval(fields, us, sb.x3, sb.k3, vscratch);
      sb.x4 = x1 + h * sb.k3;

      kb1 = (h / 6) * adj;
      kb2 = (h / 3) * adj;
      kb3 = (h / 3) * adj;
      kb4 = (h / 6) * adj;

      // stage 4 at x4
      for (int i = 0; i < d; ++i) {
        fields[i].eval_into(sb.x4, vscratch);
        grad_u(s, i) += vscratch.dot(kb4);
      }
      detail::combined_jac(fields, us, sb.x4, sb.A4, jscratch);
      g = sb.A4.transpose() * kb4;
      adj += g;
      kb3 += h * g;
      // stage 3 at x3
      for (int i = 0; i < d; ++i) {
        fields[i].eval_into(sb.x3, vscratch);
        grad_u(s, i) += vscratch.dot(kb3);
      }
      detail::combined_jac(fields, us, sb.x3, sb.A3, jscratch);
      g = sb.A3.transpose() * kb3;
      adj += g;
      kb2 += (h / 2) * g;
      // stage 2 at x2
      for (int i = 0; i < d; ++i) {
        fields[i].eval_into(sb.x2, vscratch);
        grad_u(s, i) += vscratch.dot(kb2);
      }
      detail::combined_jac(fields, us, sb.x2, sb.A2, jscratch);
      g = sb.A2.transpose() * kb2;
      adj += g;
      kb1 += (h / 2) * g;
      // stage 1 at x1
      for (int i = 0; i < d; ++i) {
        fields[i].eval_into(x1, vscratch);
        grad_u(s, i) += vscratch.dot(kb1);
      }
      detail::combined_jac(fields, us, x1, sb.A1, jscratch);
      adj += sb.A1.transpose() * kb1;
    }
    sample_grads.push_back(std::move(grad_u));
  }

  // reduce samples in a value-canonical order so pair permutations are
  // bit-invisible
  Eigen::MatrixXd grad_u = (2.0 * reg / M) * controls.u;
  {
    std::vector<double> entry(sample_grads.size());
    for (int s = 0; s < M; ++s)
      for (int i = 0; i < d; ++i) {
        for (size_t p = 0; p < sample_grads.size(); ++p) entry[p] = sample_grads[p](s, i);
        grad_u(s, i) += detail::deterministic_sum(entry);
      }
  }
  const double grad_loglam = detail::deterministic_sum(std::move(sample_loglam_grads));
  double total = detail::deterministic_sum(std::move(loss_terms));
  total += reg / M * controls.u.squaredNorm();

  if (loss_out) *loss_out = total;
  if (breakdown) {
    local.loss = total;
    local.max_residual =
        local.residuals.empty() ? 0.0 : *std::max_element(local.residuals.begin(), local.residuals.end());
    *breakdown = std::move(local);
  }
  return {std::move(grad_u), grad_loglam};
}

/// Adaptive per-coordinate first-order minimization with step halving on
/// rejected steps (blow-up, or loss growing beyond a factor). Stops when the
/// max per-sample residual reaches tol or the iteration budget is spent.
inline TrainResult train(std::span<const SmoothField> fields, const TrainingSet& ts, const TrainConfig& config) {
  const auto validation = validate_training_set(ts);
  if (!validation.ok()) throw std::invalid_argument("train: invalid training set: " + validation.message);
  const int d = static_cast<int>(fields.size());
  if (d < 1) throw std::invalid_argument("train: needs at least one field");

  const FlowOptions opts{config.r_max};
  TrainResult result;
  result.readout = config.readout == ReadoutMode::Kind::identity ? ReadoutMode::identity()
                                                                 : ReadoutMode::lambda_residual(0.0);
  result.controls = ControlPath::zeros(d, config.M);
  SeededRng rng(config.seed);
  if (config.init_std > 0)
    for (int s = 0; s < config.M; ++s)
      for (int i = 0; i < d; ++i) result.controls.u(s, i) = config.init_std * rng.normal();

  detail::LossBreakdown bd;
  double cur_loss;
  Eigen::MatrixXd grad_u;
  double grad_ll;
  try {
    std::tie(grad_u, grad_ll) = gradient(fields, result.controls, result.readout, ts, config.reg, &cur_loss, &bd, opts);
  } catch (const BlowUpError&) {
    result.status = TrainResult::Status::blow_up;
    return result;
  }
  result.history.push_back({0, cur_loss, bd.max_residual});
  if (bd.max_residual <= config.tol) {
    result.status = TrainResult::Status::converged;
    result.residuals = bd.residuals;
    return result;
  }

  // Adam moments
  Eigen::MatrixXd mom = Eigen::MatrixXd::Zero(config.M, d);
  Eigen::MatrixXd vel = Eigen::MatrixXd::Zero(config.M, d);
  double mom_ll = 0.0, vel_ll = 0.0;
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const bool lam_mode = config.readout == ReadoutMode::Kind::lambda_residual;
  double lr = config.lr;
  constexpr int kMaxRejects = 40;

  for (int iter = 1; iter <= config.max_iters; ++iter) {
    mom = b1 * mom + (1 - b1) * grad_u;
    vel = b2 * vel + (1 - b2) * grad_u.cwiseProduct(grad_u);
    const double c1 = 1.0 - std::pow(b1, iter);
    const double c2 = 1.0 - std::pow(b2, iter);
    Eigen::MatrixXd dir = (mom / c1).cwiseQuotient(((vel / c2).cwiseSqrt().array() + eps).matrix());
    double dir_ll = 0.0;
    if (lam_mode) {
      mom_ll = b1 * mom_ll + (1 - b1) * grad_ll;
      vel_ll = b2 * vel_ll + (1 - b2) * grad_ll * grad_ll;
      dir_ll = (mom_ll / c1) / (std::sqrt(vel_ll / c2) + eps);
    }

    bool accepted = false;
    ControlPath proposal = result.controls;
    ReadoutMode proposal_readout = result.readout;
    double step = lr;
    double new_loss = 0.0;
    detail::LossBreakdown new_bd;
    for (int attempt = 0; attempt < kMaxRejects; ++attempt) {
      proposal.u = result.controls.u - step * dir;
      if (lam_mode) proposal_readout.log_lambda = result.readout.log_lambda - step * dir_ll;
      try {
        new_loss = loss(fields, proposal, proposal_readout, ts, config.reg, &new_bd, opts);
      } catch (const BlowUpError&) {
        step /= 2;
        lr /= 2;
        continue;
      }
      if (new_loss > 1.5 * cur_loss + 1e-12) {
        step /= 2;
        lr /= 2;
        continue;
      }
      accepted = true;
      break;
    }
    if (!accepted) {
      result.status = TrainResult::Status::blow_up;
      result.iterations = iter;
      result.residuals = bd.residuals;
      return result;
    }

    result.controls = proposal;
    result.readout = proposal_readout;
    cur_loss = new_loss;
    bd = new_bd;
    result.history.push_back({iter, cur_loss, bd.max_residual});
    result.iterations = iter;
    lr = std::min(lr * 1.05, config.lr);
    if (bd.max_residual <= config.tol) {
      result.status = TrainResult::Status::converged;
      result.residuals = bd.residuals;
      return result;
    }
    try {
      std::tie(grad_u, grad_ll) = gradient(fields, result.controls, result.readout, ts, config.reg, nullptr, nullptr, opts);
    } catch (const BlowUpError&) {
      result.status = TrainResult::Status::blow_up;
      result.residuals = bd.residuals;
      return result;
    }
  }

  result.status = TrainResult::Status::max_iters;
  result.residuals = bd.residuals;
  result.iterations = config.max_iters;
  return result;
}

}  // namespace codeflow
