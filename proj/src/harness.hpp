#pragma once

#include <json.hpp>

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "common.hpp"
#include "driftsim.hpp"
#include "dyn.hpp"
#include "manifold.hpp"
#include "oracles.hpp"

namespace eoslab::harness {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Seeded data generation

/// d-dimensional inputs x_i ~ N(0, diag(1/d, 2/d, ..., 1)), targets exactly
/// linear: y = w_gt' x + b_gt with w_gt uniform on the sphere and
/// b_gt ~ N(0, 0.01). Also draws a held-out set from the same distribution.
oracles::LinRegBNProblem gen_linreg(std::uint64_t seed, int d = 40, int n = 20,
                                    int n_test = 1000);

/// Rank-`rank` ground truth M = (d/|Ut Vt'|_F) Ut Vt' with Ut, Vt entries
/// uniform on [-1, 1] (entry second moment exactly 1); `n_obs` observed
/// positions sampled uniformly without replacement.
oracles::MatComBNProblem gen_matcom(int d, int rank, int n_obs,
                                    std::uint64_t seed);

struct Example3DSetup {
  oracles::Example3DProblem problem;
  Vector w0;  // Q' (0.3, 1.3, 1.2)
};
/// Random orthogonal transform via QR of a Gaussian matrix (sign-fixed).
Example3DSetup gen_example3d(std::uint64_t seed);

struct InitResult {
  dyn::OptState state;
  bool degenerate = false;  // sigma0 == 0: started exactly on the manifold
  double lambda1 = 0.0;     // sharpness at zeta0 used to set the norm
};

/// Direction (zeta0 + xi)/|zeta0 + xi| with xi ~ N(0, sigma0^2 I / D); norm
/// chosen so the initial effective LR is 2/lambda1(zeta0) + offset.
InitResult init_near_minimizer(const oracles::LossOracle& oracle,
                               const Vector& zeta0, double sigma0,
                               const dyn::GDWDConfig& cfg, std::uint64_t seed,
                               double offset = 0.0);

// ---------------------------------------------------------------------------
// Traces

struct TraceRow {
  long t = 0;
  double train_loss = 0.0;
  double w_norm = 0.0;
  double eff_lr = 0.0;
  double two_over_eff_lr = 0.0;
  std::optional<double> test_loss;
  std::optional<double> sph_sharpness;
  std::optional<double> h;
  std::optional<double> u;
  std::optional<double> misalignment;
  std::optional<double> dist_to_target;

  bool operator==(const TraceRow&) const = default;
};

struct Trace {
  std::vector<TraceRow> rows;
  std::string sharpness_at;  // "theta" | "phi" | "" (metadata, not serialized)

  bool operator==(const Trace& o) const { return rows == o.rows; }
};

/// Shortest round-trip decimal for a double (to_chars).
std::string format_double(double x);

std::string trace_to_csv(const Trace& trace);
Trace trace_from_csv(const std::string& text);
json trace_to_json(const Trace& trace);
Trace trace_from_json(const json& j);

// ---------------------------------------------------------------------------
// Experiment configuration and reports

enum class Kind { LinReg, MatCom, Example3D, DriftSim };
enum class Sched { GDWD, ScalarRMS };

struct DriftSimParams {
  std::string mode = "discrete";  // discrete | leapfrog | portrait
  double c_b = 2.0;
  double grad_norm_sq = 1.0;
  double h0 = 0.5;
  double u0 = 0.0;
  double eta = 1e-2;     // discrete transition step
  double dtau = 1e-3;    // leapfrog step
  std::optional<double> x0, v0;        // leapfrog start (defaults from h0/u0)
  std::vector<double> levels;          // portrait energy levels
  int samples_per_orbit = 256;
};

struct ExperimentConfig {
  Kind kind = Kind::LinReg;
  std::uint64_t seed = 1;
  double eta_hat = 0.5;
  double lambda_hat = 2e-4;
  long steps = 100000;
  long record_every = 50;
  long project_every = 250;
  Sched sched = Sched::GDWD;
  double sched_eta = 0.1;   // scalar-rms base LR
  double sched_beta = 0.0;  // 0 => derived as 1 - 2 sched_eta^2
  double sched_v0 = 0.0;    // 0 => set from initial sharpness proxy 1/eff0^2
  std::string out;          // trace path; empty = do not write
  std::string format = "csv";
  // problem sizes
  int dim = 40;        // linreg d / matcom d
  int n_train = 20;    // linreg
  int n_test = 1000;   // linreg
  int mc_rank = 2;     // matcom ground-truth rank
  int n_observed = 800;
  // initialization
  std::string init = "default";  // default | near-min
  double init_sigma0 = 0.0;      // near-min perturbation scale (0 => 0.1*eta)
  double init_offset = 0.0;
  double init_spread = 0.3;      // zeta0 null-space spread for near-min linreg
  // observables
  std::string sharpness_at;  // "" => kind default (linreg: phi, else theta)
  double eos_rel_tol = 0.05;
  int eos_consecutive = 20;
  long detail_window = 0;  // per-step-observable window after EoS entry
  DriftSimParams drift;

  static ExperimentConfig from_json(const json& j);
  json to_json() const;
  void apply_kind_defaults();  // per-family default hyperparameters
};

struct Report {
  int schema = 1;
  std::string version;
  json config;
  bool diverged = false;
  std::optional<long> diverged_step;
  std::string error;
  long rows = 0;
  double runtime_s = 0.0;
  std::optional<long> eos_entry_step;
  std::optional<double> period2_fraction;
  std::optional<double> sharpness_first, sharpness_last, sharpness_min,
      sharpness_at_entry;
  std::optional<double> test_loss_at_entry, test_loss_final;
  std::optional<double> dist_at_entry, dist_final;
  std::optional<double> train_loss_final;
  bool degenerate_init = false;
  json extra;  // kind-specific numbers (driftsim energy stats etc.)

  json to_json() const;
};

struct RunResult {
  Trace trace;
  Report report;
  std::string drift_csv;  // driftsim runs emit their own column set
};

/// Runs the configured experiment, writes the trace and `<out>.report.json`
/// when an output path is set, and returns both in memory. Divergence is
/// reported, not thrown.
RunResult run_experiment(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Detectors

/// First step index where |2/eff_lr - sharpness| <= rel_tol * sharpness holds
/// for at least `min_consecutive` consecutive sharpness-bearing rows.
std::optional<long> detect_eos_entry(const Trace& trace, double rel_tol,
                                     int min_consecutive = 20);

/// Fraction of sign alternations of h over consecutive-step row pairs.
double detect_period2(const Trace& trace, long t_begin, long t_end);

// ---------------------------------------------------------------------------
// Misc

/// Harness parallelism cap: EOSLAB_THREADS when set, hardware otherwise.
int thread_cap();
void parallel_for(int n, const std::function<void(int)>& fn);

void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace eoslab::harness
