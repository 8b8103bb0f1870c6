// eoslab command-line harness. Links only the C API; experiment configs are
// assembled as JSON and handed to the library.

#include <eoslab/eoslab.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <string>
#include <vector>

namespace {

using nlohmann::json;

struct CommonOpts {
  double eta = 0.0, wd = 0.0;
  long steps = 0;
  std::uint64_t seed = 1;
  std::string out, format = "csv", sched = "gdwd";
  long record_every = 0, project_every = 0, detail_window = -1;
  double sched_eta = 0.0, sched_beta = 0.0, sched_v0 = 0.0;
  std::string init;
  double init_sigma0 = 0.0, init_offset = 0.0, init_spread = 0.0;
  double eos_rel_tol = 0.0;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--eta", o.eta, "learning rate (eta-hat)");
  cmd->add_option("--wd", o.wd, "weight decay (lambda-hat)");
  cmd->add_option("--steps", o.steps, "number of optimizer steps");
  cmd->add_option("--seed", o.seed, "RNG seed (data + init)");
  cmd->add_option("--out", o.out, "trace output path (report goes next to it)");
  cmd->add_option("--format", o.format, "trace format: csv | json")
      ->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--record-every", o.record_every, "row recording cadence");
  cmd->add_option("--project-every", o.project_every,
                  "projection / sharpness cadence");
  cmd->add_option("--sched", o.sched, "update rule: gdwd | scalar-rms")
      ->check(CLI::IsMember({"gdwd", "scalar-rms"}));
  cmd->add_option("--sched-eta", o.sched_eta, "scalar-rms base LR");
  cmd->add_option("--sched-beta", o.sched_beta,
                  "scalar-rms decay rate (default 1 - 2 eta^2)");
  cmd->add_option("--sched-v0", o.sched_v0, "scalar-rms initial moment");
  cmd->add_option("--init", o.init, "initialization: default | near-min")
      ->check(CLI::IsMember({"default", "near-min"}));
  cmd->add_option("--init-sigma0", o.init_sigma0,
                  "near-min perturbation scale");
  cmd->add_option("--init-offset", o.init_offset,
                  "near-min effective-LR offset");
  cmd->add_option("--init-spread", o.init_spread,
                  "near-min manifold point spread (linreg)");
  cmd->add_option("--detail-window", o.detail_window,
                  "per-step observable window after EoS entry (0 = off)");
  cmd->add_option("--eos-rel-tol", o.eos_rel_tol, "EoS detection tolerance");
}

void fill_common(const CLI::App* cmd, const CommonOpts& o, json& j) {
  if (cmd->count("--eta")) j["eta"] = o.eta;
  if (cmd->count("--wd")) j["wd"] = o.wd;
  if (cmd->count("--steps")) j["steps"] = o.steps;
  if (cmd->count("--seed")) j["seed"] = o.seed;
  if (cmd->count("--out")) j["out"] = o.out;
  if (cmd->count("--format")) j["format"] = o.format;
  if (cmd->count("--record-every")) j["record_every"] = o.record_every;
  if (cmd->count("--project-every")) j["project_every"] = o.project_every;
  if (cmd->count("--sched")) j["sched"] = o.sched;
  if (cmd->count("--sched-eta")) j["sched_eta"] = o.sched_eta;
  if (cmd->count("--sched-beta")) j["sched_beta"] = o.sched_beta;
  if (cmd->count("--sched-v0")) j["sched_v0"] = o.sched_v0;
  if (cmd->count("--init")) j["init"] = o.init;
  if (cmd->count("--init-sigma0")) j["init_sigma0"] = o.init_sigma0;
  if (cmd->count("--init-offset")) j["init_offset"] = o.init_offset;
  if (cmd->count("--init-spread")) j["init_spread"] = o.init_spread;
  if (cmd->count("--detail-window")) j["detail_window"] = o.detail_window;
  if (cmd->count("--eos-rel-tol")) j["eos_rel_tol"] = o.eos_rel_tol;
}

int run_config(const json& config) {
  char* report = nullptr;
  const eoslab_status st = eoslab_run_experiment(config.dump().c_str(), &report);
  if (st != EOSLAB_OK) {
    std::fprintf(stderr, "error: %s\n", eoslab_last_error());
    return 1;
  }
  std::printf("%s\n", report);
  eoslab_string_free(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"eoslab - sharpness-reduction dynamics laboratory"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(eoslab_version()));

  // linreg ------------------------------------------------------------------
  CommonOpts lin_o;
  int lin_dim = 0, lin_n = 0, lin_ntest = 0;
  auto* lin = app.add_subcommand(
      "linreg", "GD+WD on linear regression with batch normalization");
  add_common(lin, lin_o);
  lin->add_option("--dim", lin_dim, "input dimension (default 40)");
  lin->add_option("--ntrain", lin_n, "training points (default 20)");
  lin->add_option("--ntest", lin_ntest, "held-out points (default 1000)");

  // matcom ------------------------------------------------------------------
  CommonOpts mc_o;
  int mc_dim = 0, mc_rank = 0, mc_obs = 0;
  auto* mc = app.add_subcommand(
      "matcom", "GD+WD on matrix completion with batch normalization");
  add_common(mc, mc_o);
  mc->add_option("--dim", mc_dim, "matrix dimension (default 50)");
  mc->add_option("--rank", mc_rank, "ground-truth rank (default 2)");
  mc->add_option("--observed", mc_obs, "observed entries (default 800)");

  // example3d ---------------------------------------------------------------
  CommonOpts e3_o;
  auto* e3 = app.add_subcommand("example3d",
                                "GD+WD on the 3-D scale-invariant example");
  add_common(e3, e3_o);

  // driftsim ----------------------------------------------------------------
  auto* ds = app.add_subcommand(
      "driftsim", "drift-process simulator / Hamiltonian limit");
  std::string ds_mode = "discrete";
  double ds_cb = 2.0, ds_grad2 = 1.0, ds_h0 = 0.5, ds_u0 = 0.0;
  double ds_eta = 1e-2, ds_dtau = 1e-3;
  long ds_steps = 10000, ds_record = 1;
  std::uint64_t ds_seed = 1;
  std::vector<double> ds_levels;
  int ds_samples = 256;
  std::string ds_out;
  ds->add_option("--mode", ds_mode, "discrete | leapfrog | portrait")
      ->check(CLI::IsMember({"discrete", "leapfrog", "portrait"}));
  ds->add_option("--cb", ds_cb, "C_b hyperparameter (2 for GD+WD)");
  ds->add_option("--gradnorm2", ds_grad2, "frozen |grad log lambda1|^2");
  ds->add_option("--h0", ds_h0, "initial h");
  ds->add_option("--u0", ds_u0, "initial u");
  ds->add_option("--deta", ds_eta, "discrete transition step");
  ds->add_option("--dtau", ds_dtau, "leapfrog step");
  ds->add_option("--steps", ds_steps, "transitions / leapfrog steps");
  ds->add_option("--record-every", ds_record, "row cadence");
  ds->add_option("--seed", ds_seed, "seed (recorded in the report)");
  ds->add_option("--levels", ds_levels, "portrait energy levels");
  ds->add_option("--samples", ds_samples, "portrait samples per orbit");
  ds->add_option("--out", ds_out, "CSV output path");

  // check -------------------------------------------------------------------
  auto* ck = app.add_subcommand("check", "run the acceptance suite");
  std::vector<int> ck_only;
  std::string ck_json;
  bool ck_quiet = false;
  ck->add_option("--only", ck_only, "run only these check ids");
  ck->add_option("--json", ck_json, "write the full report JSON here");
  ck->add_flag("--quiet", ck_quiet, "suppress per-check lines");

  CLI11_PARSE(app, argc, argv);

  if (*lin || *mc || *e3) {
    json j;
    const CLI::App* cmd = *lin ? lin : *mc ? mc : e3;
    const CommonOpts& o = *lin ? lin_o : *mc ? mc_o : e3_o;
    j["kind"] = *lin ? "linreg" : *mc ? "matcom" : "example3d";
    fill_common(cmd, o, j);
    if (*lin) {
      if (lin->count("--dim")) j["dim"] = lin_dim;
      if (lin->count("--ntrain")) j["n_train"] = lin_n;
      if (lin->count("--ntest")) j["n_test"] = lin_ntest;
    }
    if (*mc) {
      if (mc->count("--dim")) j["dim"] = mc_dim;
      if (mc->count("--rank")) j["mc_rank"] = mc_rank;
      if (mc->count("--observed")) j["observed"] = mc_obs;
    }
    return run_config(j);
  }

  if (*ds) {
    json j;
    j["kind"] = "driftsim";
    j["seed"] = ds_seed;
    j["steps"] = ds_steps;
    j["record_every"] = ds_record;
    if (!ds_out.empty()) j["out"] = ds_out;
    json d;
    d["mode"] = ds_mode;
    d["cb"] = ds_cb;
    d["grad_norm_sq"] = ds_grad2;
    d["h0"] = ds_h0;
    d["u0"] = ds_u0;
    d["eta"] = ds_eta;
    d["dtau"] = ds_dtau;
    if (!ds_levels.empty()) d["levels"] = ds_levels;
    d["samples_per_orbit"] = ds_samples;
    j["drift"] = d;
    return run_config(j);
  }

  if (*ck) {
    char* report = nullptr;
    int all_passed = 0;
    const eoslab_status st =
        eoslab_run_checks(ck_only.empty() ? nullptr : ck_only.data(),
                          ck_only.size(), ck_quiet ? 0 : 1, &all_passed,
                          &report);
    if (st != EOSLAB_OK) {
      std::fprintf(stderr, "error: %s\n", eoslab_last_error());
      return 1;
    }
    if (!ck_json.empty()) {
      FILE* f = std::fopen(ck_json.c_str(), "wb");
      if (!f) {
        std::fprintf(stderr, "error: cannot write %s\n", ck_json.c_str());
        eoslab_string_free(report);
        return 1;
      }
      std::fputs(report, f);
      std::fputs("\n", f);
      std::fclose(f);
    }
    std::printf("%s\n", all_passed ? "all checks passed" : "CHECK FAILURES");
    eoslab_string_free(report);
    return all_passed ? 0 : 1;
  }
  return 0;
}
