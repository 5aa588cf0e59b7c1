#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "codeflow/canonical.hpp"
#include "codeflow/trainer.hpp"
#include "test_support.hpp"

using namespace codeflow;
using codeflow::testing::random_point;

namespace {

TrainingSet make_set(int m, std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> pairs, double half_width = 1.0) {
  TrainingSet ts;
  ts.m = m;
  ts.pairs = std::move(pairs);
  ts.omega = Box::centered_cube(m, half_width);
  return ts;
}

Eigen::VectorXd v2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("validation catches duplicates and escapes") {
  {
    const auto r = validate_training_set(make_set(2, {{v2(0, 0), v2(1, 1)}, {v2(0, 0), v2(0.5, 0.5)}}));
    CHECK(r.kind == ValidationResult::Kind::duplicate_input);
    CHECK(r.index_a == 0);
    CHECK(r.index_b == 1);
  }
  {
    const auto r = validate_training_set(make_set(2, {{v2(0, 0), v2(1, 1)}, {v2(1, 0), v2(1, 1)}}));
    CHECK(r.kind == ValidationResult::Kind::duplicate_target);
  }
  {
    const auto r = validate_training_set(make_set(2, {{v2(0, 0), v2(2, 0)}}));
    CHECK(r.kind == ValidationResult::Kind::out_of_region);
    CHECK(r.index_a == 0);
  }
  {
    const auto r = validate_training_set(
        make_set(2, {{v2(0, 0), v2(0.5, 0.5)}, {v2(0.25, 0), v2(-0.5, 0.5)}, {v2(-0.25, 0), v2(0, -0.5)}}));
    CHECK(r.ok());
    CHECK(r.min_pairwise_distance > 0);
  }
}

TEST_CASE("loss of the frozen flow") {
  auto fields = make_smooth(canonical_five(2).fields);
  const auto ts = make_set(2, {{v2(0.1, 0.2), v2(0.5, -0.3)}, {v2(-0.4, 0.0), v2(0.2, 0.2)}});
  const ControlPath zero = ControlPath::zeros(5, 8);
  double expect = 0.0;
  for (const auto& [x, y] : ts.pairs) expect += (x - y).squaredNorm();
  CHECK(loss(fields, zero, ReadoutMode::identity(), ts, 0.0) == Catch::Approx(expect).epsilon(1e-15));
  // residual readout with X = x gives sum ||y||^2
  double expect_res = 0.0;
  for (const auto& [x, y] : ts.pairs) expect_res += y.squaredNorm();
  CHECK(loss(fields, zero, ReadoutMode::lambda_residual(0.0), ts, 0.0) == Catch::Approx(expect_res).epsilon(1e-15));
}

TEST_CASE("loss vanishes when targets equal the flow image") {
  auto fields = make_smooth(canonical_five(2).fields);
  SeededRng rng(4);
  ControlPath controls = ControlPath::zeros(5, 16);
  for (int s = 0; s < 16; ++s)
    for (int i = 0; i < 5; ++i) controls.u(s, i) = 0.2 * rng.normal();
  const Eigen::VectorXd x0 = v2(0.3, -0.1);
  const Eigen::VectorXd image = integrate(fields, controls, x0).states.back();
  TrainingSet ts = make_set(2, {{x0, image}}, 1e9);
  CHECK(loss(fields, controls, ReadoutMode::identity(), ts, 0.0) == 0.0);
}

TEST_CASE("gradient of zero dynamics is the regularizer gradient") {
  std::vector<SmoothField> fields{make_smooth(PolyVectorField::zero(2))};
  const auto ts = make_set(2, {{v2(0.1, 0.1), v2(0.4, -0.2)}});
  ControlPath controls = ControlPath::zeros(1, 8);
  SeededRng rng(6);
  for (int s = 0; s < 8; ++s) controls.u(s, 0) = rng.normal();
  const double reg = 0.7;
  const auto [grad, glam] = gradient(fields, controls, ReadoutMode::identity(), ts, reg);
  CHECK((grad - (2 * reg / 8) * controls.u).norm() == 0.0);
  CHECK(glam == 0.0);
}

TEST_CASE("doubling reg doubles the gradient once the matching term is frozen") {
  auto fields = make_smooth(canonical_five(2).fields);
  SeededRng rng(8);
  ControlPath controls = ControlPath::zeros(5, 8);
  for (int s = 0; s < 8; ++s)
    for (int i = 0; i < 5; ++i) controls.u(s, i) = 0.1 * rng.normal();
  const Eigen::VectorXd x0 = v2(0.2, 0.2);
  const Eigen::VectorXd image = integrate(fields, controls, x0).states.back();
  TrainingSet ts = make_set(2, {{x0, image}}, 1e9);
  const auto [g1, l1] = gradient(fields, controls, ReadoutMode::identity(), ts, 0.5);
  const auto [g2, l2] = gradient(fields, controls, ReadoutMode::identity(), ts, 1.0);
  CHECK((g2 - 2.0 * g1).norm() <= 1e-15 * g1.norm());
}

TEST_CASE("analytic gradient matches finite differences") {
  auto fields = make_smooth(canonical_five(2).fields);
  std::mt19937_64 eng(909);
  for (int rep = 0; rep < 5; ++rep) {
    TrainingSet ts = make_set(2, {{random_point(2, eng), random_point(2, eng)}});
    ControlPath controls = ControlPath::zeros(5, 4);
    SeededRng rng(rep);
    for (int s = 0; s < 4; ++s)
      for (int i = 0; i < 5; ++i) controls.u(s, i) = 0.3 * rng.normal();
    const bool lam_mode = rep % 2 == 1;
    const ReadoutMode readout =
        lam_mode ? ReadoutMode::lambda_residual(0.37) : ReadoutMode::identity();
    const double reg = 0.25;
    const auto [grad, glam] = gradient(fields, controls, readout, ts, reg);
    const double h = 1e-5;
    for (int s = 0; s < 4; ++s) {
      for (int i = 0; i < 5; ++i) {
        ControlPath up = controls, dn = controls;
        up.u(s, i) += h;
        dn.u(s, i) -= h;
        const double fd =
            (loss(fields, up, readout, ts, reg) - loss(fields, dn, readout, ts, reg)) / (2 * h);
        CHECK(std::abs(grad(s, i) - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
      }
    }
    if (lam_mode) {
      ReadoutMode rup = readout, rdn = readout;
      rup.log_lambda += h;
      rdn.log_lambda -= h;
      const double fd = (loss(fields, controls, rup, ts, reg) - loss(fields, controls, rdn, ts, reg)) / (2 * h);
      CHECK(std::abs(glam - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("the identity task converges at iteration zero") {
  auto fields = make_smooth(canonical_five(2).fields);
  TrainingSet ts = make_set(2, {{v2(0.3, 0.1), v2(0.3, 0.1)}, {v2(-0.2, 0.4), v2(-0.2, 0.4)}});
  TrainConfig config;
  config.init_std = 0.0;
  config.reg = 0.0;
  const auto result = train(fields, ts, config);
  CHECK(result.status == TrainResult::Status::converged);
  CHECK(result.iterations == 0);
  CHECK(result.history.size() == 1);
}

TEST_CASE("a single pair is steered onto its target") {
  auto fields = make_smooth(canonical_five(2).fields);
  TrainingSet ts = make_set(2, {{v2(0.0, 0.0), v2(0.5, 0.3)}});
  TrainConfig config;
  config.M = 32;
  config.tol = 1e-3;
  config.seed = 7;
  const auto result = train(fields, ts, config);
  REQUIRE(result.status == TrainResult::Status::converged);
  CHECK(result.residuals.size() == 1);
  CHECK(result.residuals[0] <= 1e-3);
  CHECK(result.history.back().loss <= result.history.front().loss);
  CHECK(result.controls.u.rows() == 32);
  CHECK(result.controls.u.cols() == 5);
}

TEST_CASE("lambda mode satisfies the transformed-target view on convergence") {
  auto fields = make_smooth(canonical_five(2).fields);
  TrainingSet ts = make_set(2, {{v2(0.1, -0.2), v2(0.4, 0.5)}, {v2(-0.3, 0.3), v2(-0.1, -0.4)}});
  TrainConfig config;
  config.M = 32;
  config.readout = ReadoutMode::Kind::lambda_residual;
  config.seed = 3;
  const auto result = train(fields, ts, config);
  REQUIRE(result.status == TrainResult::Status::converged);
  const double lambda = result.readout.lambda();
  CHECK(lambda > 0.0);
  for (size_t i = 0; i < ts.pairs.size(); ++i) {
    const auto& [x, y] = ts.pairs[i];
    const Eigen::VectorXd xm = integrate(fields, result.controls, x).states.back();
    CHECK((lambda * (xm - x) - y).norm() <= config.tol * (1 + 1e-12));
    CHECK((xm - (x + y / lambda)).norm() <= config.tol / lambda * (1 + 1e-12));
  }
}

TEST_CASE("loss and gradient ignore the order of training pairs") {
  auto fields = make_smooth(canonical_five(2).fields);
  std::mt19937_64 eng(2025);
  std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> pairs;
  for (int i = 0; i < 3; ++i) pairs.emplace_back(random_point(2, eng), random_point(2, eng));
  TrainingSet forward = make_set(2, pairs);
  std::reverse(pairs.begin(), pairs.end());
  TrainingSet backward = make_set(2, pairs);
  ControlPath controls = ControlPath::zeros(5, 8);
  SeededRng rng(1);
  for (int s = 0; s < 8; ++s)
    for (int i = 0; i < 5; ++i) controls.u(s, i) = 0.2 * rng.normal();
  const ReadoutMode readout = ReadoutMode::lambda_residual(0.1);
  CHECK(loss(fields, controls, readout, forward, 0.3) == loss(fields, controls, readout, backward, 0.3));
  const auto [gf, lf] = gradient(fields, controls, readout, forward, 0.3);
  const auto [gb, lb] = gradient(fields, controls, readout, backward, 0.3);
  CHECK((gf - gb).norm() == 0.0);
  CHECK(lf == lb);
}

TEST_CASE("trainable parameter count is M*d plus the readout scalar") {
  auto fields = make_smooth(canonical_five(2).fields);
  TrainingSet ts = make_set(2, {{v2(0.0, 0.1), v2(0.2, 0.3)}});
  TrainConfig config;
  config.M = 16;
  config.max_iters = 1;
  config.readout = ReadoutMode::Kind::lambda_residual;
  const auto result = train(fields, ts, config);
  CHECK(result.controls.u.size() == 16 * 5);
  CHECK(result.readout.kind == ReadoutMode::Kind::lambda_residual);
}

TEST_CASE("train reports blow-up when every step diverges") {
  PolyVectorField cubic(2);
  cubic.add_term(0, {3, 0}, 1);
  cubic.add_term(1, {0, 3}, 1);
  std::vector<SmoothField> fields{make_smooth(cubic)};
  TrainingSet ts = make_set(2, {{v2(0.9, 0.9), v2(-0.9, -0.9)}});
  TrainConfig config;
  config.M = 8;
  config.init_std = 400.0;  // far outside the basin; the very first forward pass escapes
  config.seed = 5;
  const auto result = train(fields, ts, config);
  CHECK(result.status == TrainResult::Status::blow_up);
}

TEST_CASE("train rejects invalid sets") {
  auto fields = make_smooth(canonical_five(2).fields);
  TrainingSet ts = make_set(2, {{v2(0, 0), v2(1, 1)}, {v2(0, 0), v2(0.5, 0.5)}});
  CHECK_THROWS_AS(train(fields, ts, TrainConfig{}), std::invalid_argument);
}

TEST_CASE("result serialization carries controls and status") {
  auto fields = make_smooth(canonical_five(2).fields);
  TrainingSet ts = make_set(2, {{v2(0.0, 0.0), v2(0.2, 0.1)}});
  TrainConfig config;
  config.M = 8;
  config.seed = 2;
  config.readout = ReadoutMode::Kind::lambda_residual;
  const auto result = train(fields, ts, config);
  const auto j = result.to_json();
  CHECK(j.at("controls").at("M").get<int>() == 8);
  CHECK(j.at("controls").at("u").size() == 8);
  CHECK(j.contains("lambda"));
  CHECK(j.at("status").is_string());
  std::ostringstream os;
  result.write_history_csv(os);
  CHECK(os.str().rfind("iter,loss,max_residual\n", 0) == 0);
}
