#include <doctest.h>

#include "dyn.hpp"
#include "harness.hpp"
#include "sched.hpp"

using namespace eoslab;
using sched::SchedulerState;

TEST_CASE("rmsprop_step") {
  SUBCASE("hand arithmetic: v0=4, eta=1, beta=0.5, |g|=2") {
    SchedulerState s{4.0, 1.0, 0.5, 0};
    const auto [eff, next] = sched::rmsprop_step(s, 2.0);
    CHECK(eff == doctest::Approx(0.5));
    CHECK(next.v_tilde == doctest::Approx(4.0));  // 0.5*4 + 0.5*4
    CHECK(next.t == 1);
  }
  SUBCASE("zero gradient decays the moment by beta") {
    SchedulerState s{4.0, 1.0, 0.75, 0};
    CHECK(sched::rmsprop_step(s, 0.0).next.v_tilde == doctest::Approx(3.0));
  }
  SUBCASE("beta = 1 freezes the moment") {
    SchedulerState s{9.0, 0.5, 1.0, 0};
    const auto r1 = sched::rmsprop_step(s, 123.0);
    CHECK(r1.next.v_tilde == 9.0);
    CHECK(r1.eff_lr == doctest::Approx(1.0 / 3.0));
  }
}

TEST_CASE("gwsi_step") {
  SUBCASE("zero gradient matches rmsprop") {
    SchedulerState s{2.5, 0.3, 0.9, 0};
    CHECK(sched::gwsi_step(s, 0.0).next.v_tilde ==
          sched::rmsprop_step(s, 0.0).next.v_tilde);
  }
  SUBCASE("residual vs rmsprop is exactly the fourth-order term") {
    SchedulerState s{2.5, 0.3, 0.9, 0};
    const double gn = 1.7;
    const double viaGwsi = sched::gwsi_step(s, gn).next.v_tilde;
    const double viaRms = sched::rmsprop_step(s, gn).next.v_tilde;
    const double gbar2 = (gn / s.eta) * (gn / s.eta);
    const double expected =
        (1.0 - s.beta) * (1.0 - s.beta) * gbar2 * gbar2 / (4.0 * s.beta * s.v_tilde);
    CHECK(viaGwsi - viaRms == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("gwsi_from_gdwd") {
  SUBCASE("zero weight decay limit") {
    const auto s = sched::gwsi_from_gdwd(0.1, 0.0, 1.0);
    CHECK(s.beta == 1.0);
    CHECK(s.v_tilde == doctest::Approx(100.0));
    CHECK(1.0 / std::sqrt(s.v_tilde) == doctest::Approx(0.1));
  }
  SUBCASE("eta*lambda = 0.5") {
    const auto s = sched::gwsi_from_gdwd(1.0, 0.5, 1.3);
    CHECK(s.beta == doctest::Approx(0.0625));
    CHECK(s.eta == doctest::Approx(std::sqrt(7.5)));
  }
  SUBCASE("initial effective LR identity") {
    const double eh = 0.4, lh = 0.05, n0 = 1.7;
    const auto s = sched::gwsi_from_gdwd(eh, lh, n0);
    const double eff0 = eh / ((1.0 - eh * lh) * n0 * n0);
    CHECK(1.0 / std::sqrt(s.v_tilde) == doctest::Approx(eff0).epsilon(1e-14));
  }
  SUBCASE("invalid hyperparameters") {
    CHECK_THROWS_AS(sched::gwsi_from_gdwd(2.0, 0.5, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(sched::gwsi_from_gdwd(-0.1, 0.0, 1.0), std::invalid_argument);
  }
}

TEST_CASE("full-sequence equivalence with GD+WD norms") {
  auto p = harness::gen_linreg(61);
  const dyn::GDWDConfig cfg{0.5, 2e-4};
  Rng rng(19);
  dyn::OptState s{rng.unit_vector(p.dim()), 0};
  auto ss = sched::gwsi_from_gdwd(cfg.eta_hat, cfg.lambda_hat, s.norm());
  double maxrel = 0.0;
  for (int t = 0; t < 2000; ++t) {
    const double eff = s.eff_lr(cfg);
    maxrel = std::max(maxrel, std::abs(1.0 / std::sqrt(ss.v_tilde) - eff) / eff);
    ss = sched::gwsi_step(ss, s.norm() * p.grad(s.w).norm()).next;
    s = dyn::gdwd_step(s, cfg, p);
  }
  CHECK(maxrel <= 1e-11);
}

TEST_CASE("moment positivity under adversarial gradient streams") {
  Rng rng(20);
  for (int rep = 0; rep < 20; ++rep) {
    SchedulerState s{rng.uniform(1e-8, 10.0), rng.uniform(0.01, 2.0),
                     rng.uniform(0.05, 1.0), 0};
    for (int t = 0; t < 200; ++t) {
      const double gn = (t % 7 == 0) ? 0.0 : std::exp(rng.uniform(-20.0, 10.0));
      s = (t % 2 ? sched::gwsi_step(s, gn) : sched::rmsprop_step(s, gn)).next;
      REQUIRE(s.v_tilde > 0.0);
    }
  }
}

TEST_CASE("qrms_residuals") {
  SUBCASE("rmsprop stream has zero residuals") {
    SchedulerState s{3.0, 0.7, 0.95, 0};
    std::vector<double> effs, vts{s.v_tilde}, gns;
    Rng rng(21);
    for (int t = 0; t < 50; ++t) {
      const double gn = std::abs(rng.next_gaussian());
      const auto r = sched::rmsprop_step(s, gn);
      effs.push_back(r.eff_lr);
      gns.push_back(gn);
      s = r.next;
      vts.push_back(s.v_tilde);
    }
    const auto res = sched::qrms_residuals(effs, vts, gns, 0.7, 0.95);
    for (double d : res.delta1) CHECK(d == 0.0);
    for (double d : res.delta2) CHECK(d <= 1e-18);
  }
  SUBCASE("gwsi stream: delta2 equals the closed-form fourth-order term") {
    SchedulerState s{3.0, 0.7, 0.95, 0};
    std::vector<double> effs, vts{s.v_tilde}, gns;
    std::vector<double> expected;
    Rng rng(22);
    for (int t = 0; t < 50; ++t) {
      const double gn = std::abs(rng.next_gaussian());
      const double gbar2 = (gn / s.eta) * (gn / s.eta);
      expected.push_back((1 - s.beta) * (1 - s.beta) * gbar2 * gbar2 /
                         (4 * s.beta * s.v_tilde));
      const auto r = sched::gwsi_step(s, gn);
      effs.push_back(r.eff_lr);
      gns.push_back(gn);
      s = r.next;
      vts.push_back(s.v_tilde);
    }
    const auto res = sched::qrms_residuals(effs, vts, gns, 0.7, 0.95);
    for (std::size_t t = 0; t < expected.size(); ++t) {
      CHECK(res.delta1[t] == 0.0);
      CHECK(res.delta2[t] == doctest::Approx(expected[t]).epsilon(1e-9));
    }
  }
  SUBCASE("length mismatch throws") {
    std::vector<double> a(5, 1.0), v(5, 1.0), g(5, 1.0);
    CHECK_THROWS_AS(sched::qrms_residuals(a, v, g, 1.0, 0.9),
                    std::invalid_argument);
  }
}

namespace {

// Runs GD+WD on a fresh linreg instance and returns the mean quasi-RMSprop
// delta2 residual over the post-entry half of the run, measured against the
// (eta, beta) = (sqrt(2 eta_in), 1 - 4 eta_in) reference recursion.
struct QrmsScan {
  double mean_delta2 = 0.0;
  double fitted_c = 0.0;  // max delta2 / ((1-beta)^2 (gbar^4 + gbar^2))
};

QrmsScan scan_gdwd_residuals(double eta_in, long steps) {
  auto p = harness::gen_linreg(62);
  const dyn::GDWDConfig cfg{0.5, eta_in / 0.5};
  const double eta = std::sqrt(2.0 * eta_in);
  const double beta = 1.0 - 4.0 * eta_in;
  Rng rng(23);
  dyn::OptState s{rng.unit_vector(p.dim()), 0};
  std::vector<double> effs, vts, gns;
  vts.push_back(1.0 / (s.eff_lr(cfg) * s.eff_lr(cfg)));
  for (long t = 0; t < steps; ++t) {
    effs.push_back(s.eff_lr(cfg));
    gns.push_back(s.norm() * p.grad(s.w).norm());
    s = dyn::gdwd_step(s, cfg, p);
    vts.push_back(1.0 / (s.eff_lr(cfg) * s.eff_lr(cfg)));
  }
  const auto res = sched::qrms_residuals(effs, vts, gns, eta, beta);
  QrmsScan out;
  double sum = 0.0;
  long n = 0;
  for (std::size_t t = res.delta2.size() / 2; t < res.delta2.size(); ++t) {
    sum += res.delta2[t];
    ++n;
    const double gbar2 = (gns[t] / eta) * (gns[t] / eta);
    const double denom =
        (1 - beta) * (1 - beta) * (gbar2 * gbar2 + gbar2) + 1e-300;
    out.fitted_c = std::max(out.fitted_c, res.delta2[t] / denom);
  }
  out.mean_delta2 = sum / static_cast<double>(n);
  return out;
}

}  // namespace

TEST_CASE("gdwd residual delta2 scales as (1-beta)^2 under eta_in halving") {
  // Both runs measured deep in the EoS regime (second half of a long run).
  const auto a = scan_gdwd_residuals(2e-4, 40000);
  const auto b = scan_gdwd_residuals(1e-4, 80000);
  const double ratio = a.mean_delta2 / b.mean_delta2;
  CHECK(ratio >= 3.2);  // 4 +- 20%
  CHECK(ratio <= 4.8);
}

TEST_CASE("fitted quasi-RMSprop constant is stable across eta_in") {
  // Spot the constant in delta2 <= C (1-beta)^2 (gbar^4 + gbar^2); step counts
  // scale with 1/eta_in so the measured window sits past EoS entry each time.
  double cs[3];
  const double eta_ins[3] = {1e-4, 5e-5, 2.5e-5};
  for (int i = 0; i < 3; ++i) {
    const long steps = std::lround(4.0 / eta_ins[i]);
    cs[i] = scan_gdwd_residuals(eta_ins[i], steps).fitted_c;
  }
  const double cmax = std::max({cs[0], cs[1], cs[2]});
  const double cmin = std::min({cs[0], cs[1], cs[2]});
  CHECK(cmax / cmin <= 3.0);
}
