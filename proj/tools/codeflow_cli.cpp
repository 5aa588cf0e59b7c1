#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "codeflow/codeflow.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace codeflow;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitVerification = 2;
constexpr int kExitValidation = 3;
constexpr int kExitNoConvergence = 4;
constexpr int kExitBlowUp = 5;

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  json j;
  in >> j;
  return j;
}

fs::path resolve_out_dir(const std::string& cli_out, const json* config) {
  if (const char* env = std::getenv("CODEFLOW_OUT"); env && *env) return fs::path(env);
  if (!cli_out.empty()) return fs::path(cli_out);
  if (config && config->contains("out")) return fs::path(config->at("out").get<std::string>());
  return fs::path(".");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

Eigen::VectorXd vec_from_json(const json& j) {
  Eigen::VectorXd v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

Eigen::MatrixXd mat_from_json(const json& j) {
  const int rows = static_cast<int>(j.size());
  const int cols = rows ? static_cast<int>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  return m;
}

struct FieldBundle {
  std::vector<SmoothField> fields;
  std::string source;
};

FieldBundle build_fields(const json& cfg, int m, std::uint64_t seed) {
  FieldBundle out;
  const std::string source = cfg.at("source").get<std::string>();
  out.source = source;
  if (source == "canonical") {
    out.fields = make_smooth(canonical_five(m).fields);
  } else if (source == "sample_poly") {
    auto spec = FieldSampleSpec::from_json(cfg.at("spec"));
    if (!cfg.at("spec").contains("seed")) spec.seed = seed;
    out.fields = make_smooth(sample_polynomial_fields(spec));
  } else if (source == "neural") {
    NeuralFieldSpec spec = cfg.contains("spec") ? NeuralFieldSpec::from_json(cfg.at("spec"))
                                                : NeuralFieldSpec::random(m, seed);
    out.fields = neural_fields(spec);
  } else if (source == "hat") {
    out.fields = make_smooth(reference_hat_fields(m));
  } else if (source == "file") {
    const json j = load_json(cfg.at("path").get<std::string>());
    const json& arr = j.is_array() ? j : j.at("fields");
    std::vector<PolyVectorField> polys;
    for (const auto& f : arr) polys.push_back(PolyVectorField::from_json(f));
    out.fields = make_smooth(polys);
  } else {
    throw std::runtime_error("unknown field source: " + source);
  }
  return out;
}

int cmd_verify(int m, int degree, const std::string& out_dir) {
  json report;
  auto [A, B] = sl_generators(m);
  const bool sl_ok = verify_sl_generation(A, B);
  report["sl_generation"] = {{"m", m}, {"pass", sl_ok}, {"closure_dimension", matrix_closure_dimension(A, B)},
                             {"expected_dimension", m * m - 1}};
  const AppendixReport app = verify_appendix_identities(m);
  report["bracket_identities"] = app.to_json();
  report["bracket_identities_pass"] = app.all_pass;
  const bool cover = degree_cover_check(m, degree);
  report["degree_cover"] = {{"m", m},
                            {"k", degree},
                            {"pass", cover},
                            {"target_dimension", polynomial_space_dimension(m, degree)}};
  const bool all = sl_ok && app.all_pass && cover;
  report["pass"] = all;
  const std::string text = report.dump(2) + "\n";
  std::cout << text;
  if (!out_dir.empty()) write_text(fs::path(out_dir) / "verify_report.json", text);
  if (!all) {
    for (const auto& e : app.entries)
      if (!e.equal) std::cerr << "identity failed: " << e.label << "\n";
    if (!sl_ok) std::cerr << "sl generation failed\n";
    if (!cover) std::cerr << "degree cover failed\n";
    return kExitVerification;
  }
  return kExitOk;
}

int cmd_witt(int d, int max_n) {
  std::printf("n,dim,d_pow_n,ratio\n");
  for (int n = 1; n <= max_n; ++n) {
    const std::int64_t dim = witt_dimension(d, n);
    const std::int64_t count = static_cast<std::int64_t>(lyndon_words(d, n).size());
    if (dim != count) {
      std::cerr << "witt/lyndon mismatch at n=" << n << ": " << dim << " vs " << count << "\n";
      return kExitVerification;
    }
    std::int64_t pw = 1;
    for (int e = 0; e < n; ++e) pw *= d;
    std::printf("%d,%lld,%lld,%.17g\n", n, static_cast<long long>(dim), static_cast<long long>(pw),
                static_cast<double>(dim) * n / static_cast<double>(pw));
  }
  return kExitOk;
}

int cmd_interpolate(const json& cfg, const std::string& out_opt, std::optional<std::uint64_t> seed_opt) {
  const int m = cfg.at("m").get<int>();
  const std::uint64_t seed = seed_opt.value_or(cfg.value("seed", std::uint64_t{0}));
  const fs::path out_dir = resolve_out_dir(out_opt, &cfg);
  fs::create_directories(out_dir);

  FieldBundle bundle = build_fields(cfg.at("fields"), m, seed);
  TrainingSet ts = TrainingSet::from_json(cfg.at("training_set"));
  const auto validation = validate_training_set(ts);
  if (!validation.ok()) {
    std::cerr << "training set rejected: " << validation.message << "\n";
    return kExitValidation;
  }

  TrainConfig tc;
  const json& t = cfg.at("trainer");
  tc.M = t.value("M", 64);
  tc.reg = t.value("reg", 0.0);
  tc.tol = t.value("tol", 1e-3);
  tc.max_iters = t.value("max_iters", 5000);
  tc.lr = t.value("lr", 0.05);
  tc.init_std = t.value("init_std", 0.1);
  tc.r_max = t.value("r_max", 1e6);
  tc.seed = seed;
  tc.readout = t.value("readout", std::string("identity")) == "lambda_residual"
                   ? ReadoutMode::Kind::lambda_residual
                   : ReadoutMode::Kind::identity;

  const TrainResult result = train(bundle.fields, ts, tc);

  json result_json = result.to_json();
  result_json["seed"] = seed;
  result_json["min_pairwise_distance"] = validation.min_pairwise_distance;
  write_text(out_dir / "train_result.json", result_json.dump(2) + "\n");
  {
    std::ofstream hist(out_dir / "loss_history.csv", std::ios::binary);
    result.write_history_csv(hist);
  }
  for (size_t i = 0; i < ts.pairs.size(); ++i) {
    try {
      const Trajectory traj = integrate(bundle.fields, result.controls, ts.pairs[i].first, FlowOptions{tc.r_max});
      std::ofstream tr(out_dir / ("trajectory_" + std::to_string(i) + ".csv"), std::ios::binary);
      write_trajectory_csv(tr, traj);
    } catch (const BlowUpError&) {
      // final controls diverge for this sample; the result file records status
    }
  }

  std::cout << "status: " << TrainResult::status_name(result.status) << ", iterations: " << result.iterations
            << "\n";
  switch (result.status) {
    case TrainResult::Status::converged: return kExitOk;
    case TrainResult::Status::max_iters: return kExitNoConvergence;
    default: return kExitBlowUp;
  }
}

int cmd_rank(const json& cfg, const std::string& out_opt, std::optional<std::uint64_t> seed_opt, int sweep_seeds) {
  const int m = cfg.at("m").get<int>();
  const std::uint64_t seed = seed_opt.value_or(cfg.value("seed", std::uint64_t{0}));
  const int degree = cfg.value("word_degree", 3);
  const double tol = cfg.value("tol", 1e-9);
  const fs::path out_dir = resolve_out_dir(out_opt, &cfg);

  Box box = Box::centered_cube(m, 1.0);
  if (cfg.contains("omega")) {
    box.lo = vec_from_json(cfg.at("omega").at("lo"));
    box.hi = vec_from_json(cfg.at("omega").at("hi"));
  }

  auto run_once = [&](std::uint64_t s, json& entry) -> bool {
    FieldBundle bundle = build_fields(cfg.at("fields"), m, s);
    std::vector<Eigen::VectorXd> tuple;
    if (cfg.at("tuple").contains("points")) {
      for (const auto& p : cfg.at("tuple").at("points")) tuple.push_back(vec_from_json(p));
    } else {
      const int n = cfg.at("tuple").at("sample").at("n").get<int>();
      SeededRng rng(s + 0x9e3779b97f4a7c15ULL);
      for (int i = 0; i < n; ++i) {
        Eigen::VectorXd x(m);
        for (int c = 0; c < m; ++c) x[c] = rng.uniform(box.lo[c], box.hi[c]);
        tuple.push_back(std::move(x));
      }
    }
    for (size_t i = 0; i < tuple.size(); ++i)
      for (size_t j = i + 1; j < tuple.size(); ++j)
        if (tuple[i] == tuple[j]) throw std::invalid_argument("duplicate points in tuple");
    bool all_poly = true;
    for (const auto& f : bundle.fields) all_poly = all_poly && f.poly.has_value();
    const auto words = bracket_words_up_to(static_cast<int>(bundle.fields.size()), all_poly ? degree : std::min(degree, 2));
    const Eigen::MatrixXd mat = interpolation_matrix(bundle.fields, words, tuple);
    const RankVerdict v = rank_verdict(mat, tol);
    entry = {{"seed", s},
             {"rows", v.rows},
             {"cols", v.cols},
             {"rank", v.rank},
             {"smallest_needed_singular_value", v.smallest_needed_singular_value},
             {"largest_singular_value", v.largest_singular_value},
             {"interpolates", v.full_row_rank}};
    return v.full_row_rank;
  };

  json report;
  report["word_degree"] = degree;
  try {
    if (sweep_seeds > 0) {
      int passes = 0;
      json runs = json::array();
      for (int s = 0; s < sweep_seeds; ++s) {
        json entry;
        if (run_once(seed + static_cast<std::uint64_t>(s), entry)) ++passes;
        runs.push_back(std::move(entry));
      }
      report["runs"] = std::move(runs);
      report["passes"] = passes;
      report["total"] = sweep_seeds;
    } else {
      json entry;
      run_once(seed, entry);
      report.update(entry);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return kExitValidation;
  }
  const std::string text = report.dump(2) + "\n";
  std::cout << text;
  if (!out_opt.empty() || std::getenv("CODEFLOW_OUT") || cfg.contains("out")) {
    fs::create_directories(out_dir);
    write_text(out_dir / "rank_report.json", text);
  }
  return kExitOk;
}

int cmd_flow(const json& cfg, const std::string& out_opt, bool variation, bool commutator) {
  const fs::path out_dir = resolve_out_dir(out_opt, &cfg);
  fs::create_directories(out_dir);
  if (commutator) {
    const json& c = cfg.at("commutator");
    const Eigen::MatrixXd A = mat_from_json(c.at("A"));
    const Eigen::MatrixXd B = mat_from_json(c.at("B"));
    const Eigen::VectorXd x = vec_from_json(c.at("x"));
    std::ofstream out(out_dir / "commutator_sweep.csv", std::ios::binary);
    out << "t,residual,residual_over_t3\n";
    char buf[64];
    for (const auto& tj : c.at("t_values")) {
      const double t = tj.get<double>();
      const double r = commutator_flow_residual(A, B, t, x);
      std::snprintf(buf, sizeof(buf), "%.17g", t);
      out << buf;
      std::snprintf(buf, sizeof(buf), "%.17g", r);
      out << "," << buf;
      std::snprintf(buf, sizeof(buf), "%.17g", r / (t * t * t));
      out << "," << buf << "\n";
    }
    std::cout << "wrote " << (out_dir / "commutator_sweep.csv").string() << "\n";
    return kExitOk;
  }

  const int m = cfg.at("m").get<int>();
  const std::uint64_t seed = cfg.value("seed", std::uint64_t{0});
  FieldBundle bundle = build_fields(cfg.at("fields"), m, seed);
  ControlPath controls;
  if (cfg.at("controls").contains("file")) {
    const json j = load_json(cfg.at("controls").at("file").get<std::string>());
    controls.u = mat_from_json(j.at("u"));
  } else {
    controls.u = mat_from_json(cfg.at("controls").at("u"));
  }
  controls.M = static_cast<int>(controls.u.rows());
  controls.d = static_cast<int>(controls.u.cols());
  const Eigen::VectorXd x0 = vec_from_json(cfg.at("x0"));

  try {
    const Trajectory traj = variation ? integrate_with_variation(bundle.fields, controls, x0)
                                      : integrate(bundle.fields, controls, x0);
    std::ofstream out(out_dir / "trajectory.csv", std::ios::binary);
    write_trajectory_csv(out, traj);
  } catch (const BlowUpError& e) {
    std::cerr << e.what() << "\n";
    return kExitBlowUp;
  }
  std::cout << "wrote " << (out_dir / "trajectory.csv").string() << "\n";
  return kExitOk;
}

int cmd_sample(const json& cfg, const std::string& out_opt, std::optional<std::uint64_t> seed_opt) {
  const fs::path out_dir = resolve_out_dir(out_opt, &cfg);
  fs::create_directories(out_dir);
  const std::string kind = cfg.at("kind").get<std::string>();
  if (kind == "poly") {
    auto spec = FieldSampleSpec::from_json(cfg.at("spec"));
    if (seed_opt) spec.seed = *seed_opt;
    const auto fields = sample_polynomial_fields(spec);
    json out;
    out["spec"] = spec.to_json();
    out["fields"] = json::array();
    for (const auto& f : fields) out["fields"].push_back(f.to_json());
    write_text(out_dir / "fields.json", out.dump(2) + "\n");
    std::cout << "wrote " << (out_dir / "fields.json").string() << "\n";
    return kExitOk;
  }
  if (kind == "neural") {
    NeuralFieldSpec spec = cfg.contains("spec") && cfg.at("spec").contains("C")
                               ? NeuralFieldSpec::from_json(cfg.at("spec"))
                               : NeuralFieldSpec::random(cfg.at("spec").at("m").get<int>(),
                                                         seed_opt.value_or(cfg.at("spec").value("seed", std::uint64_t{0})),
                                                         cfg.at("spec").value("sigma", std::string("tanh")) == "tanh"
                                                             ? NeuralFieldSpec::Sigma::tanh_blend
                                                             : NeuralFieldSpec::Sigma::atan_blend);
    write_text(out_dir / "neural_spec.json", spec.to_json().dump(2) + "\n");
    std::cout << "wrote " << (out_dir / "neural_spec.json").string() << "\n";
    return kExitOk;
  }
  std::cerr << "unknown sample kind: " << kind << "\n";
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"controlled-ODE universal interpolation toolkit"};
  app.require_subcommand(1);

  std::string out_dir;
  std::string config_path;
  std::uint64_t seed_flag = 0;
  bool seed_given = false;
  app.add_option("--out", out_dir, "output directory (env CODEFLOW_OUT overrides)");
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--seed", seed_flag, "seed override")->each([&](const std::string&) { seed_given = true; });

  auto* verify = app.add_subcommand("verify", "run the generator verification suites");
  int verify_m = 0, verify_degree = 2;
  verify->add_option("--m", verify_m, "ambient dimension (>= 2)")->required();
  verify->add_option("--degree", verify_degree, "polynomial degree cap for the cover check");

  auto* witt = app.add_subcommand("witt", "free Lie algebra dimension table");
  int witt_d = 2, witt_max_n = 6;
  witt->add_option("--d", witt_d, "number of generators")->required();
  witt->add_option("--max-n", witt_max_n, "largest word length")->required();

  auto* interpolate = app.add_subcommand("interpolate", "train controls for a training set");
  auto* rank = app.add_subcommand("rank", "bracket-evaluation rank test at a tuple");
  int sweep_seeds = 0;
  rank->add_option("--seeds", sweep_seeds, "sweep this many consecutive seeds");
  auto* flow = app.add_subcommand("flow", "integrate a controlled trajectory");
  bool variation = false, commutator = false;
  flow->add_flag("--variation", variation, "also integrate the first variation");
  flow->add_flag("--commutator", commutator, "commutator-flow residual sweep");
  auto* sample = app.add_subcommand("sample", "draw randomized fields");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  std::optional<std::uint64_t> seed_opt;
  if (seed_given) seed_opt = seed_flag;

  try {
    if (verify->parsed()) {
      if (verify_m < 2) {
        std::cerr << "verify: --m must be at least 2 (one-dimensional transport cannot reorder points)\n";
        return kExitUsage;
      }
      return cmd_verify(verify_m, verify_degree, out_dir);
    }
    if (witt->parsed()) return cmd_witt(witt_d, witt_max_n);
    if (config_path.empty()) {
      std::cerr << "this subcommand requires --config\n";
      return kExitUsage;
    }
    const json cfg = load_json(config_path);
    if (interpolate->parsed()) return cmd_interpolate(cfg, out_dir, seed_opt);
    if (rank->parsed()) return cmd_rank(cfg, out_dir, seed_opt, sweep_seeds);
    if (flow->parsed()) return cmd_flow(cfg, out_dir, variation, commutator);
    if (sample->parsed()) return cmd_sample(cfg, out_dir, seed_opt);
  } catch (const BlowUpError& e) {
    std::cerr << e.what() << "\n";
    return kExitBlowUp;
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
