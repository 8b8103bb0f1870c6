#include <doctest.h>

#include <json.hpp>

#include <set>

#include "dyn.hpp"
#include "harness.hpp"
#include "manifold.hpp"
#include "spectra.hpp"

using namespace eoslab;
using harness::ExperimentConfig;
using harness::Trace;
using harness::TraceRow;

TEST_CASE("gen_linreg") {
  SUBCASE("deterministic per seed") {
    auto a = harness::gen_linreg(7);
    auto b = harness::gen_linreg(7);
    CHECK((a.inputs() - b.inputs()).norm() == 0.0);
    CHECK((a.targets() - b.targets()).norm() == 0.0);
    auto c = harness::gen_linreg(8);
    CHECK((a.inputs() - c.inputs()).norm() != 0.0);
  }
  SUBCASE("empirical input covariance matches the diagonal law within 1%") {
    // Monte-Carlo over the generator's own draws.
    const int d = 16;
    auto p = harness::gen_linreg(9, d, 1000000, 2);
    const Matrix& X = p.inputs();
    const Matrix cov = X.transpose() * X / static_cast<double>(X.rows());
    for (int j = 0; j < d; ++j)
      CHECK(std::abs(cov(j, j) - (j + 1.0) / d) <= 0.01 * (j + 1.0) / d);
    CHECK(std::abs(cov(0, d - 1)) <= 0.01);
    CHECK(std::abs(cov(3, 7)) <= 0.01);
  }
  SUBCASE("targets are exactly linear: min-norm residuals vanish") {
    auto p = harness::gen_linreg(10);
    const auto [w, b] = manifold::min_norm_oracle(p);
    const Vector r = (p.inputs() * w).array() + b - p.targets().array();
    CHECK(r.cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("gen_matcom") {
  SUBCASE("entry second moment is exactly one") {
    auto p = harness::gen_matcom(50, 2, 800, 3);
    const double sm =
        p.ground_truth().squaredNorm() / (50.0 * 50.0);
    CHECK(std::abs(sm - 1.0) <= 1e-12);
  }
  SUBCASE("ground truth has the requested rank") {
    auto p = harness::gen_matcom(50, 2, 800, 3);
    Eigen::BDCSVD<Matrix> svd(p.ground_truth());
    CHECK(svd.singularValues()[2] <= 1e-10 * svd.singularValues()[0]);
  }
  SUBCASE("observations are distinct and sized per the default setup") {
    auto p = harness::gen_matcom(50, 2, 800, 4);
    CHECK(p.n_observed() == 800);
    std::set<std::pair<int, int>> uniq(p.observed().begin(), p.observed().end());
    CHECK(uniq.size() == 800);
  }
  SUBCASE("too many observations rejected") {
    CHECK_THROWS_AS(harness::gen_matcom(5, 2, 26, 1), std::invalid_argument);
  }
}

TEST_CASE("gen_example3d produces an orthogonal transform") {
  auto setup = harness::gen_example3d(11);
  const Matrix Q = setup.problem.transform();
  CHECK((Q.transpose() * Q - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() <=
        1e-12);
  Vector x0(3);
  x0 << 0.3, 1.3, 1.2;
  CHECK((Q * setup.w0 - x0).norm() <= 1e-12);
}

TEST_CASE("init_near_minimizer") {
  auto p = harness::gen_linreg(12);
  Rng rng(12);
  const Vector zeta0 = manifold::gf_project(
                           manifold::linreg_manifold_point(p, rng, 0.3), p,
                           {.skip_spectrum = true})
                           .phi;
  const dyn::GDWDConfig cfg{0.5, 1e-3};
  SUBCASE("sigma0 = 0 starts exactly on the manifold and is flagged") {
    const auto init = harness::init_near_minimizer(p, zeta0, 0.0, cfg, 99);
    CHECK(init.degenerate);
    CHECK((init.state.theta() - zeta0).norm() <= 1e-14);
  }
  SUBCASE("initial effective LR hits 2/lambda1 plus the requested offset") {
    for (double offset : {0.0, 0.01}) {
      const auto init =
          harness::init_near_minimizer(p, zeta0, 1e-3, cfg, 99, offset);
      const double eff0 = init.state.eff_lr(cfg);
      CHECK(eff0 == doctest::Approx(2.0 / init.lambda1 + offset).epsilon(1e-9));
    }
  }
  SUBCASE("h0 is nonzero for at least 99 of 100 seeds") {
    manifold::ProjectOptions popts;
    popts.rank = manifold::linreg_hessian_rank(p);
    int nonzero = 0;
    for (int seed = 0; seed < 100; ++seed) {
      const auto init =
          harness::init_near_minimizer(p, zeta0, 1e-4, cfg, 1000 + seed);
      const Vector theta = init.state.theta();
      const auto point = manifold::gf_project(theta, p, popts);
      const auto obs = manifold::extract_observables(theta, 1.0, 1.0, point);
      if (std::abs(obs.h) > 0.0) ++nonzero;
    }
    CHECK(nonzero >= 99);
  }
}

TEST_CASE("trace CSV round trip") {
  Trace trace;
  Rng rng(13);
  for (int t = 0; t < 50; ++t) {
    TraceRow r;
    r.t = t;
    r.train_loss = std::exp(rng.uniform(-30, 3));
    r.w_norm = rng.uniform(0.1, 3.0);
    r.eff_lr = rng.uniform(1e-4, 2.0);
    r.two_over_eff_lr = 2.0 / r.eff_lr;
    if (t % 3 == 0) r.test_loss = rng.next_gaussian();
    if (t % 5 == 0) {
      r.sph_sharpness = rng.uniform(0.0, 10.0);
      r.h = rng.next_gaussian() * 1e-3;
      r.u = rng.next_gaussian();
      r.misalignment = std::abs(rng.next_gaussian()) * 1e-6;
      r.dist_to_target = std::abs(rng.next_gaussian());
    }
    trace.rows.push_back(r);
  }
  const std::string csv = harness::trace_to_csv(trace);
  const Trace back = harness::trace_from_csv(csv);
  CHECK(back == trace);  // exact, including missing fields
  const auto j = harness::trace_to_json(trace);
  CHECK(harness::trace_from_json(j) == trace);
}

TEST_CASE("format_double produces shortest round-trip decimals") {
  CHECK(harness::format_double(0.1) == "0.1");
  CHECK(harness::format_double(1.0 / 3.0) == "0.3333333333333333");
  CHECK(harness::format_double(1e300) == "1e+300");
  Rng rng(14);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.next_gaussian() * std::exp(rng.uniform(-300, 300));
    const std::string s = harness::format_double(x);
    CHECK(std::stod(s) == x);
  }
}

TEST_CASE("experiment runs are bitwise reproducible") {
  ExperimentConfig cfg;
  cfg.kind = harness::Kind::Example3D;
  cfg.apply_kind_defaults();
  cfg.steps = 3000;
  cfg.seed = 5;
  const auto a = harness::run_experiment(cfg);
  const auto b = harness::run_experiment(cfg);
  CHECK(harness::trace_to_csv(a.trace) == harness::trace_to_csv(b.trace));
}

TEST_CASE("reports embed config, seed and version") {
  ExperimentConfig cfg;
  cfg.kind = harness::Kind::Example3D;
  cfg.apply_kind_defaults();
  cfg.steps = 500;
  cfg.seed = 77;
  const auto run = harness::run_experiment(cfg);
  const auto j = run.report.to_json();
  CHECK(j.at("version").get<std::string>() == kVersion);
  CHECK(j.at("schema").get<int>() == 1);
  CHECK(j.at("config").at("seed").get<std::uint64_t>() == 77);
  CHECK(j.at("config").at("kind").get<std::string>() == "example3d");
}

TEST_CASE("detect_eos_entry") {
  SUBCASE("synthetic ramp crossing a constant sharpness") {
    // 2/eff ramps linearly from 4 to 2 over 100 rows; sharpness fixed at 3.
    // |2/eff - 3| <= 0.15 first holds at row with 2/eff = 3.15.
    Trace trace;
    for (int t = 0; t < 100; ++t) {
      TraceRow r;
      r.t = t;
      r.train_loss = 0.0;
      r.w_norm = 1.0;
      r.two_over_eff_lr = 4.0 - 0.02 * t;
      r.eff_lr = 2.0 / r.two_over_eff_lr;
      r.sph_sharpness = 3.0;
      trace.rows.push_back(r);
    }
    const auto entry = harness::detect_eos_entry(trace, 0.05, 5);
    REQUIRE(entry.has_value());
    // analytic: 4 - 0.02 t <= 3.15  =>  t >= 42.5  => first row 43
    CHECK(*entry == 43);
  }
  SUBCASE("stable-regime trace yields nothing") {
    Trace trace;
    for (int t = 0; t < 50; ++t) {
      TraceRow r;
      r.t = t;
      r.two_over_eff_lr = 10.0;
      r.eff_lr = 0.2;
      r.sph_sharpness = 3.0;
      trace.rows.push_back(r);
    }
    CHECK_FALSE(harness::detect_eos_entry(trace, 0.05, 5).has_value());
  }
}

TEST_CASE("detect_period2") {
  SUBCASE("strict alternation gives 1") {
    Trace trace;
    for (int t = 0; t < 40; ++t) {
      TraceRow r;
      r.t = t;
      r.h = (t % 2 == 0) ? 0.5 : -0.5;
      trace.rows.push_back(r);
    }
    CHECK(harness::detect_period2(trace, 0, 39) == doctest::Approx(1.0));
  }
  SUBCASE("constant sign gives 0") {
    Trace trace;
    for (int t = 0; t < 40; ++t) {
      TraceRow r;
      r.t = t;
      r.h = 0.25;
      trace.rows.push_back(r);
    }
    CHECK(harness::detect_period2(trace, 0, 39) == doctest::Approx(0.0));
  }
}

TEST_CASE("run_experiment: linreg short run produces coherent observables") {
  ExperimentConfig cfg;
  cfg.kind = harness::Kind::LinReg;
  cfg.apply_kind_defaults();
  cfg.seed = 1;
  cfg.steps = 6000;
  cfg.record_every = 100;
  cfg.project_every = 500;
  cfg.detail_window = 0;
  const auto run = harness::run_experiment(cfg);
  CHECK_FALSE(run.report.diverged);
  CHECK(run.trace.sharpness_at == "phi");
  bool saw_sharpness = false;
  for (const auto& r : run.trace.rows) {
    CHECK(std::isfinite(r.train_loss));
    if (r.sph_sharpness) {
      saw_sharpness = true;
      CHECK(*r.sph_sharpness > 0.0);
      CHECK(r.h.has_value());
      CHECK(r.u.has_value());
      CHECK(r.misalignment.has_value());
      CHECK(r.dist_to_target.has_value());
      CHECK(r.test_loss.has_value());
    }
  }
  CHECK(saw_sharpness);
}

TEST_CASE("run_experiment: scalar-rms near a minimizer stays in EoS") {
  ExperimentConfig cfg;
  cfg.kind = harness::Kind::LinReg;
  cfg.apply_kind_defaults();
  cfg.seed = 2;
  cfg.steps = 4000;
  cfg.record_every = 100;
  cfg.project_every = 200;
  cfg.detail_window = 0;
  cfg.sched = harness::Sched::ScalarRMS;
  cfg.sched_eta = 0.02;  // beta defaults to 1 - 2 eta^2
  cfg.init = "near-min";
  const auto run = harness::run_experiment(cfg);
  CHECK_FALSE(run.report.diverged);
  // The run starts at the edge of stability by construction and the
  // scheduler keeps it there: sharpness may only go down.
  REQUIRE(run.report.sharpness_first.has_value());
  REQUIRE(run.report.sharpness_last.has_value());
  CHECK(*run.report.sharpness_last <= *run.report.sharpness_first * 1.001);
}

TEST_CASE("run_experiment: matcom with sharpness at the projection") {
  ExperimentConfig cfg;
  cfg.kind = harness::Kind::MatCom;
  cfg.apply_kind_defaults();
  cfg.seed = 6;
  cfg.dim = 8;
  cfg.n_observed = 30;
  cfg.steps = 400;
  cfg.record_every = 100;
  cfg.project_every = 200;
  cfg.sharpness_at = "phi";
  const auto run = harness::run_experiment(cfg);
  CHECK_FALSE(run.report.diverged);
  CHECK(run.trace.sharpness_at == "phi");
  bool saw = false;
  for (const auto& r : run.trace.rows)
    if (r.sph_sharpness) {
      saw = true;
      CHECK(*r.sph_sharpness > 0.0);
    }
  CHECK(saw);
}

TEST_CASE("run_experiment writes trace and report files") {
  ExperimentConfig cfg;
  cfg.kind = harness::Kind::Example3D;
  cfg.apply_kind_defaults();
  cfg.steps = 300;
  cfg.record_every = 50;
  cfg.project_every = 100;
  cfg.out = "/tmp/eoslab_test_trace.csv";
  const auto run = harness::run_experiment(cfg);
  const Trace back =
      harness::trace_from_csv(harness::read_file("/tmp/eoslab_test_trace.csv"));
  CHECK(back == run.trace);
  const auto rep = nlohmann::json::parse(
      harness::read_file("/tmp/eoslab_test_trace.report.json"));
  CHECK(rep.at("rows").get<long>() == static_cast<long>(back.rows.size()));

  ExperimentConfig jcfg = cfg;
  jcfg.format = "json";
  jcfg.out = "/tmp/eoslab_test_trace.json";
  const auto jrun = harness::run_experiment(jcfg);
  const Trace jback = harness::trace_from_json(
      nlohmann::json::parse(harness::read_file("/tmp/eoslab_test_trace.json")));
  CHECK(jback == jrun.trace);
}

TEST_CASE("driftsim experiments") {
  SUBCASE("discrete mode emits rows and energy stats") {
    ExperimentConfig cfg;
    cfg.kind = harness::Kind::DriftSim;
    cfg.apply_kind_defaults();
    cfg.steps = 2000;
    cfg.record_every = 10;
    cfg.drift.mode = "discrete";
    const auto run = harness::run_experiment(cfg);
    CHECK(run.drift_csv.rfind("t,h,u,energy\n", 0) == 0);
    CHECK(run.report.extra.contains("energy_max_deviation"));
    CHECK(run.report.extra.at("periods").get<int>() >= 1);
  }
  SUBCASE("leapfrog mode reports the relative energy drift") {
    ExperimentConfig cfg;
    cfg.kind = harness::Kind::DriftSim;
    cfg.apply_kind_defaults();
    cfg.steps = 5000;
    cfg.record_every = 50;
    cfg.drift.mode = "leapfrog";
    cfg.drift.c_b = 1.0;
    cfg.drift.grad_norm_sq = 2.0;  // K = 2
    const auto run = harness::run_experiment(cfg);
    CHECK(run.report.extra.at("energy_max_rel_drift").get<double>() <= 1e-6);
  }
  SUBCASE("portrait mode closes its orbits") {
    ExperimentConfig cfg;
    cfg.kind = harness::Kind::DriftSim;
    cfg.apply_kind_defaults();
    cfg.steps = 1;
    cfg.drift.mode = "portrait";
    cfg.drift.c_b = 1.0;
    cfg.drift.grad_norm_sq = 2.0;
    cfg.drift.samples_per_orbit = 32;
    const auto run = harness::run_experiment(cfg);
    CHECK(run.report.extra.at("max_closure").get<double>() <= 1e-4);
    CHECK(run.drift_csv.rfind("level,period,idx,log_abs_h,minus_u\n", 0) == 0);
  }
}
