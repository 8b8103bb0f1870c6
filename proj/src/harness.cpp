#include "harness.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "sched.hpp"
#include "spectra.hpp"

namespace eoslab::harness {

// ---------------------------------------------------------------------------
// Generators

oracles::LinRegBNProblem gen_linreg(std::uint64_t seed, int d, int n,
                                    int n_test) {
  if (d < 1 || n < 2) throw std::invalid_argument("gen_linreg: bad sizes");
  Rng rng(seed);
  const Vector w_gt = rng.unit_vector(d);
  const double b_gt = 0.1 * rng.next_gaussian();  // N(0, 0.01)
  Vector scale(d);
  for (int j = 0; j < d; ++j) scale[j] = std::sqrt((j + 1.0) / d);
  auto draw = [&](int rows) {
    Matrix X(rows, d);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < d; ++j) X(i, j) = scale[j] * rng.next_gaussian();
    return X;
  };
  Matrix X = draw(n);
  Vector y = X * w_gt + Vector::Constant(n, b_gt);
  Matrix Xt = draw(n_test);
  Vector yt = Xt * w_gt + Vector::Constant(n_test, b_gt);
  return oracles::LinRegBNProblem(std::move(X), std::move(y), std::move(Xt),
                                  std::move(yt));
}

oracles::MatComBNProblem gen_matcom(int d, int rank, int n_obs,
                                    std::uint64_t seed) {
  if (d < 1 || rank < 1) throw std::invalid_argument("gen_matcom: bad sizes");
  if (n_obs < 1 || n_obs > d * d)
    throw std::invalid_argument("gen_matcom: n_obs outside [1, d^2]");
  Rng rng(seed);
  Matrix Ut(d, rank), Vt(d, rank);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < rank; ++j) Ut(i, j) = rng.uniform(-1.0, 1.0);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < rank; ++j) Vt(i, j) = rng.uniform(-1.0, 1.0);
  Matrix M = Ut * Vt.transpose();
  M *= d / M.norm();  // entry second moment = 1
  // Partial Fisher-Yates over flat indices.
  std::vector<int> idx(d * d);
  for (int i = 0; i < d * d; ++i) idx[i] = i;
  std::vector<std::pair<int, int>> obs(n_obs);
  for (int k = 0; k < n_obs; ++k) {
    const auto j =
        k + static_cast<int>(rng.next_index(static_cast<std::uint64_t>(d * d - k)));
    std::swap(idx[k], idx[j]);
    obs[k] = {idx[k] / d, idx[k] % d};
  }
  return oracles::MatComBNProblem(std::move(M), std::move(obs));
}

Example3DSetup gen_example3d(std::uint64_t seed) {
  Rng rng(seed);
  Matrix A(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) A(i, j) = rng.next_gaussian();
  Eigen::HouseholderQR<Matrix> qr(A);
  Matrix Q = qr.householderQ();
  const Matrix R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < 3; ++j)
    if (R(j, j) < 0.0) Q.col(j) = -Q.col(j);
  Vector x0(3);
  x0 << 0.3, 1.3, 1.2;
  return {oracles::Example3DProblem(Q), Q.transpose() * x0};
}

InitResult init_near_minimizer(const oracles::LossOracle& oracle,
                               const Vector& zeta0, double sigma0,
                               const dyn::GDWDConfig& cfg, std::uint64_t seed,
                               double offset) {
  cfg.validate();
  const int D = static_cast<int>(zeta0.size());
  InitResult res;
  res.degenerate = sigma0 == 0.0;
  Vector dir = zeta0;
  if (sigma0 > 0.0) {
    Rng rng(seed);
    dir += (sigma0 / std::sqrt(static_cast<double>(D))) * rng.gaussian_vector(D);
  }
  dir /= dir.norm();
  res.lambda1 = spectra::spherical_sharpness(oracle, zeta0);
  const double eff0 = 2.0 / res.lambda1 + offset;
  if (!(eff0 > 0.0))
    throw std::invalid_argument("init_near_minimizer: target effective LR <= 0");
  const double norm2 = cfg.eta_hat / ((1.0 - cfg.eta_in()) * eff0);
  res.state.w = std::sqrt(norm2) * dir;
  res.state.t = 0;
  return res;
}

// ---------------------------------------------------------------------------
// Formatting & trace serialization

std::string format_double(double x) {
  char buf[40];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, p);
}

namespace {

const char* kColumns =
    "t,train_loss,test_loss,w_norm,eff_lr,two_over_eff_lr,sph_sharpness,h,u,"
    "misalignment,dist_to_target";

std::string opt_str(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

double parse_double(std::string_view s) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || p != s.data() + s.size())
    throw std::invalid_argument("trace_from_csv: bad float '" + std::string(s) + "'");
  return out;
}

std::optional<double> parse_opt(std::string_view s) {
  if (s.empty()) return std::nullopt;
  return parse_double(s);
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

}  // namespace

std::string trace_to_csv(const Trace& trace) {
  std::string out(kColumns);
  out.push_back('\n');
  for (const TraceRow& r : trace.rows) {
    out += std::to_string(r.t);
    out += ',' + format_double(r.train_loss);
    out += ',' + opt_str(r.test_loss);
    out += ',' + format_double(r.w_norm);
    out += ',' + format_double(r.eff_lr);
    out += ',' + format_double(r.two_over_eff_lr);
    out += ',' + opt_str(r.sph_sharpness);
    out += ',' + opt_str(r.h);
    out += ',' + opt_str(r.u);
    out += ',' + opt_str(r.misalignment);
    out += ',' + opt_str(r.dist_to_target);
    out.push_back('\n');
  }
  return out;
}

Trace trace_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kColumns)
    throw std::invalid_argument("trace_from_csv: unexpected header");
  Trace trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 11)
      throw std::invalid_argument("trace_from_csv: wrong field count");
    TraceRow r;
    r.t = static_cast<long>(parse_double(f[0]));
    r.train_loss = parse_double(f[1]);
    r.test_loss = parse_opt(f[2]);
    r.w_norm = parse_double(f[3]);
    r.eff_lr = parse_double(f[4]);
    r.two_over_eff_lr = parse_double(f[5]);
    r.sph_sharpness = parse_opt(f[6]);
    r.h = parse_opt(f[7]);
    r.u = parse_opt(f[8]);
    r.misalignment = parse_opt(f[9]);
    r.dist_to_target = parse_opt(f[10]);
    trace.rows.push_back(r);
  }
  return trace;
}

namespace {
void put_opt(json& j, const char* key, const std::optional<double>& v) {
  if (v) j[key] = *v;
}
std::optional<double> get_opt(const json& j, const char* key) {
  if (!j.contains(key)) return std::nullopt;
  return j.at(key).get<double>();
}
}  // namespace

json trace_to_json(const Trace& trace) {
  json rows = json::array();
  for (const TraceRow& r : trace.rows) {
    json o;
    o["t"] = r.t;
    o["train_loss"] = r.train_loss;
    o["w_norm"] = r.w_norm;
    o["eff_lr"] = r.eff_lr;
    o["two_over_eff_lr"] = r.two_over_eff_lr;
    put_opt(o, "test_loss", r.test_loss);
    put_opt(o, "sph_sharpness", r.sph_sharpness);
    put_opt(o, "h", r.h);
    put_opt(o, "u", r.u);
    put_opt(o, "misalignment", r.misalignment);
    put_opt(o, "dist_to_target", r.dist_to_target);
    rows.push_back(std::move(o));
  }
  json out;
  out["schema"] = 1;
  out["sharpness_at"] = trace.sharpness_at;
  out["rows"] = std::move(rows);
  return out;
}

Trace trace_from_json(const json& j) {
  Trace trace;
  trace.sharpness_at = j.value("sharpness_at", "");
  for (const json& o : j.at("rows")) {
    TraceRow r;
    r.t = o.at("t").get<long>();
    r.train_loss = o.at("train_loss").get<double>();
    r.w_norm = o.at("w_norm").get<double>();
    r.eff_lr = o.at("eff_lr").get<double>();
    r.two_over_eff_lr = o.at("two_over_eff_lr").get<double>();
    r.test_loss = get_opt(o, "test_loss");
    r.sph_sharpness = get_opt(o, "sph_sharpness");
    r.h = get_opt(o, "h");
    r.u = get_opt(o, "u");
    r.misalignment = get_opt(o, "misalignment");
    r.dist_to_target = get_opt(o, "dist_to_target");
    trace.rows.push_back(std::move(r));
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Config / report JSON

namespace {
Kind kind_from_string(const std::string& s) {
  if (s == "linreg") return Kind::LinReg;
  if (s == "matcom") return Kind::MatCom;
  if (s == "example3d") return Kind::Example3D;
  if (s == "driftsim") return Kind::DriftSim;
  throw std::invalid_argument("unknown experiment kind '" + s + "'");
}
std::string kind_to_string(Kind k) {
  switch (k) {
    case Kind::LinReg: return "linreg";
    case Kind::MatCom: return "matcom";
    case Kind::Example3D: return "example3d";
    case Kind::DriftSim: return "driftsim";
  }
  return "?";
}
}  // namespace

void ExperimentConfig::apply_kind_defaults() {
  switch (kind) {
    case Kind::LinReg:
      eta_hat = 0.5; lambda_hat = 2e-4;
      steps = 100000; record_every = 50; project_every = 250;
      dim = 40; n_train = 20;
      detail_window = 200;
      break;
    case Kind::MatCom:
      eta_hat = 0.1; lambda_hat = 0.01;
      steps = 200000; record_every = 500; project_every = 2000;
      dim = 50; mc_rank = 2; n_observed = 800;
      detail_window = 0;
      break;
    case Kind::Example3D:
      eta_hat = 0.5; lambda_hat = 0.08;
      steps = 50000; record_every = 10; project_every = 50;
      detail_window = 0;
      break;
    case Kind::DriftSim:
      steps = 10000; record_every = 1; project_every = 1;
      break;
  }
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  c.kind = kind_from_string(j.value("kind", std::string("linreg")));
  c.apply_kind_defaults();
  c.seed = j.value("seed", c.seed);
  c.eta_hat = j.value("eta", c.eta_hat);
  c.lambda_hat = j.value("wd", c.lambda_hat);
  c.steps = j.value("steps", c.steps);
  c.record_every = j.value("record_every", c.record_every);
  c.project_every = j.value("project_every", c.project_every);
  const std::string sch = j.value("sched", std::string("gdwd"));
  if (sch == "gdwd") c.sched = Sched::GDWD;
  else if (sch == "scalar-rms") c.sched = Sched::ScalarRMS;
  else throw std::invalid_argument("unknown scheduler '" + sch + "'");
  c.sched_eta = j.value("sched_eta", c.sched_eta);
  c.sched_beta = j.value("sched_beta", c.sched_beta);
  c.sched_v0 = j.value("sched_v0", c.sched_v0);
  c.out = j.value("out", c.out);
  c.format = j.value("format", c.format);
  c.dim = j.value("dim", c.dim);
  c.n_train = j.value("n_train", c.n_train);
  c.n_test = j.value("n_test", c.n_test);
  c.mc_rank = j.value("mc_rank", c.mc_rank);
  c.n_observed = j.value("observed", c.n_observed);
  c.init = j.value("init", c.init);
  c.init_sigma0 = j.value("init_sigma0", c.init_sigma0);
  c.init_offset = j.value("init_offset", c.init_offset);
  c.init_spread = j.value("init_spread", c.init_spread);
  c.sharpness_at = j.value("sharpness_at", c.sharpness_at);
  c.eos_rel_tol = j.value("eos_rel_tol", c.eos_rel_tol);
  c.eos_consecutive = j.value("eos_consecutive", c.eos_consecutive);
  c.detail_window = j.value("detail_window", c.detail_window);
  if (j.contains("drift")) {
    const json& d = j.at("drift");
    c.drift.mode = d.value("mode", c.drift.mode);
    c.drift.c_b = d.value("cb", c.drift.c_b);
    c.drift.grad_norm_sq = d.value("grad_norm_sq", c.drift.grad_norm_sq);
    c.drift.h0 = d.value("h0", c.drift.h0);
    c.drift.u0 = d.value("u0", c.drift.u0);
    c.drift.eta = d.value("eta", c.drift.eta);
    c.drift.dtau = d.value("dtau", c.drift.dtau);
    if (d.contains("x0")) c.drift.x0 = d.at("x0").get<double>();
    if (d.contains("v0")) c.drift.v0 = d.at("v0").get<double>();
    if (d.contains("levels"))
      c.drift.levels = d.at("levels").get<std::vector<double>>();
    c.drift.samples_per_orbit =
        d.value("samples_per_orbit", c.drift.samples_per_orbit);
  }
  return c;
}

json ExperimentConfig::to_json() const {
  json j;
  j["kind"] = kind_to_string(kind);
  j["seed"] = seed;
  j["eta"] = eta_hat;
  j["wd"] = lambda_hat;
  j["steps"] = steps;
  j["record_every"] = record_every;
  j["project_every"] = project_every;
  j["sched"] = sched == Sched::GDWD ? "gdwd" : "scalar-rms";
  if (sched == Sched::ScalarRMS) {
    j["sched_eta"] = sched_eta;
    j["sched_beta"] = sched_beta;
    j["sched_v0"] = sched_v0;
  }
  if (!out.empty()) j["out"] = out;
  j["format"] = format;
  j["dim"] = dim;
  if (kind == Kind::LinReg) {
    j["n_train"] = n_train;
    j["n_test"] = n_test;
  }
  if (kind == Kind::MatCom) {
    j["mc_rank"] = mc_rank;
    j["observed"] = n_observed;
  }
  j["init"] = init;
  if (init == "near-min") {
    j["init_sigma0"] = init_sigma0;
    j["init_offset"] = init_offset;
    j["init_spread"] = init_spread;
  }
  if (!sharpness_at.empty()) j["sharpness_at"] = sharpness_at;
  j["eos_rel_tol"] = eos_rel_tol;
  j["eos_consecutive"] = eos_consecutive;
  j["detail_window"] = detail_window;
  if (kind == Kind::DriftSim) {
    json d;
    d["mode"] = drift.mode;
    d["cb"] = drift.c_b;
    d["grad_norm_sq"] = drift.grad_norm_sq;
    d["h0"] = drift.h0;
    d["u0"] = drift.u0;
    d["eta"] = drift.eta;
    d["dtau"] = drift.dtau;
    if (drift.x0) d["x0"] = *drift.x0;
    if (drift.v0) d["v0"] = *drift.v0;
    if (!drift.levels.empty()) d["levels"] = drift.levels;
    d["samples_per_orbit"] = drift.samples_per_orbit;
    j["drift"] = d;
  }
  return j;
}

json Report::to_json() const {
  json j;
  j["schema"] = schema;
  j["version"] = version;
  j["config"] = config;
  j["diverged"] = diverged;
  if (diverged_step) j["diverged_step"] = *diverged_step;
  if (!error.empty()) j["error"] = error;
  j["rows"] = rows;
  j["runtime_s"] = runtime_s;
  if (eos_entry_step) j["eos_entry_step"] = *eos_entry_step;
  put_opt(j, "period2_fraction", period2_fraction);
  put_opt(j, "sharpness_first", sharpness_first);
  put_opt(j, "sharpness_last", sharpness_last);
  put_opt(j, "sharpness_min", sharpness_min);
  put_opt(j, "sharpness_at_entry", sharpness_at_entry);
  put_opt(j, "test_loss_at_entry", test_loss_at_entry);
  put_opt(j, "test_loss_final", test_loss_final);
  put_opt(j, "dist_at_entry", dist_at_entry);
  put_opt(j, "dist_final", dist_final);
  put_opt(j, "train_loss_final", train_loss_final);
  j["degenerate_init"] = degenerate_init;
  if (!extra.is_null()) j["extra"] = extra;
  return j;
}

// ---------------------------------------------------------------------------
// Experiment driver

namespace {

struct OptRunContext {
  const ExperimentConfig& cfg;
  const oracles::LossOracle& oracle;
  Trace& trace;
  // kind-specific extras computed on projection rows
  std::function<void(TraceRow&, long t, const dyn::OptState&, double eff)> project_fill;
  // EoS tracking / detail window
  long detail_from = -1, detail_until = -1;
  long streak_start = -1;
  int consec = 0;
  bool entry_found = false;

  bool in_detail(long t) const { return t >= detail_from && t < detail_until; }

  void observe(long t, const dyn::OptState& s, double eff, long steps) {
    const bool record = t % cfg.record_every == 0 || t == steps || in_detail(t);
    const bool project =
        (t % cfg.project_every == 0 || t == steps || in_detail(t)) &&
        project_fill != nullptr;
    if (!record && !project) return;
    TraceRow row;
    row.t = t;
    row.train_loss = cfg.sched == Sched::GDWD ? oracle.value(s.theta())
                                              : oracle.value(s.w);
    row.w_norm = s.norm();
    row.eff_lr = eff;
    row.two_over_eff_lr = 2.0 / eff;
    if (project) {
      project_fill(row, t, s, eff);
      if (row.sph_sharpness) {
        const double lam = *row.sph_sharpness;
        if (std::abs(row.two_over_eff_lr - lam) <= cfg.eos_rel_tol * lam) {
          if (consec == 0) streak_start = t;
          ++consec;
          if (!entry_found && consec >= cfg.eos_consecutive) {
            entry_found = true;
            if (cfg.detail_window > 0) {
              detail_from = t + 1;
              detail_until = t + 1 + cfg.detail_window;
            }
          }
        } else {
          consec = 0;
        }
      }
    }
    trace.rows.push_back(std::move(row));
  }
};

RunResult run_optimizer_experiment(const ExperimentConfig& cfg) {
  RunResult result;
  Report& rep = result.report;
  Trace& trace = result.trace;

  std::unique_ptr<oracles::LossOracle> owned;
  oracles::LinRegBNProblem* linreg = nullptr;
  oracles::MatComBNProblem* matcom = nullptr;
  Vector w0;
  Rng init_rng(cfg.seed ^ 0x1db3a5ed0f3c11ULL);

  switch (cfg.kind) {
    case Kind::LinReg: {
      auto p = std::make_unique<oracles::LinRegBNProblem>(
          gen_linreg(cfg.seed, cfg.dim, cfg.n_train, cfg.n_test));
      linreg = p.get();
      owned = std::move(p);
      w0 = init_rng.unit_vector(cfg.dim);
      break;
    }
    case Kind::MatCom: {
      auto p = std::make_unique<oracles::MatComBNProblem>(
          gen_matcom(cfg.dim, cfg.mc_rank, cfg.n_observed, cfg.seed));
      matcom = p.get();
      owned = std::move(p);
      w0 = init_rng.gaussian_vector(owned->dim());
      break;
    }
    case Kind::Example3D: {
      auto setup = gen_example3d(cfg.seed);
      owned = std::make_unique<oracles::Example3DProblem>(setup.problem);
      w0 = setup.w0;
      break;
    }
    default:
      throw std::logic_error("not an optimizer experiment");
  }
  const oracles::LossOracle& oracle = *owned;

  dyn::GDWDConfig gcfg{cfg.eta_hat, cfg.lambda_hat};
  if (cfg.init == "near-min") {
    Vector zeta0;
    if (linreg) {
      Rng zrng(cfg.seed ^ 0x5a17e9bULL);
      zeta0 = manifold::linreg_manifold_point(*linreg, zrng, cfg.init_spread);
      zeta0 = manifold::gf_project(zeta0, oracle,
                                   {.skip_spectrum = true})
                  .phi;
    } else if (cfg.kind == Kind::Example3D) {
      zeta0 = manifold::gf_project(w0 / w0.norm(), oracle,
                                   {.skip_spectrum = true})
                  .phi;
    } else {
      throw std::invalid_argument("near-min init is not available for matcom");
    }
    const double eta_base = std::sqrt(2.0 * gcfg.eta_in());
    const double sigma0 =
        cfg.init_sigma0 > 0.0 ? cfg.init_sigma0 : 0.1 * eta_base;
    auto init = init_near_minimizer(oracle, zeta0, sigma0, gcfg,
                                    cfg.seed ^ 0xfeedULL, cfg.init_offset);
    w0 = init.state.w;
    rep.degenerate_init = init.degenerate;
  }

  // Scheduler base LR used for the scaled oscillation observables.
  const double eta_base = cfg.sched == Sched::GDWD
                              ? std::sqrt(2.0 * gcfg.eta_in())
                              : cfg.sched_eta;

  std::string sharp_at = cfg.sharpness_at;
  if (sharp_at.empty()) sharp_at = cfg.kind == Kind::LinReg ? "phi" : "theta";
  trace.sharpness_at = sharp_at;

  OptRunContext ctx{cfg, oracle, trace};

  // Kind-specific projection-row observables.
  Vector v1_ref;
  std::optional<std::pair<Vector, double>> minnorm;
  std::optional<int> linreg_rank;
  if (linreg) {
    minnorm = manifold::min_norm_oracle(*linreg);
    linreg_rank = manifold::linreg_hessian_rank(*linreg);
  }
  ctx.project_fill = [&](TraceRow& row, long /*t*/, const dyn::OptState& s,
                         double eff) {
    const Vector theta = cfg.sched == Sched::GDWD ? s.theta() : Vector(s.w);
    if (linreg) {
      manifold::ProjectOptions popts;
      popts.rank = linreg_rank;
      const manifold::ManifoldPoint point =
          manifold::gf_project(theta, oracle, popts);
      row.sph_sharpness = point.spectrum.lambda1;
      const double v_tilde = 1.0 / (eff * eff);
      const Vector* ref = v1_ref.size() ? &v1_ref : nullptr;
      const auto obs = manifold::extract_observables(
          theta / theta.norm(), v_tilde, eta_base, point, ref);
      v1_ref = obs.v1;
      row.h = obs.h;
      row.u = obs.u;
      row.misalignment = obs.misalignment;
      const auto [wt, bt] = linreg->coefficients(point.phi);
      Vector diff(wt.size() + 1);
      diff.head(wt.size()) = wt - minnorm->first;
      diff[wt.size()] = bt - minnorm->second;
      row.dist_to_target = diff.norm();
      row.test_loss = linreg->test_value(theta);
    } else if (matcom) {
      spectra::LanczosOptions lo = spectra::sharpness_defaults();
      lo.seed = cfg.seed ^ 0xa5c3ULL;
      if (sharp_at == "phi") {
        manifold::ProjectOptions mo;
        mo.loss_tol = 1e-10;
        mo.lanczos = lo;
        row.sph_sharpness =
            manifold::gf_project(s.w, oracle, mo).spectrum.lambda1;
      } else {
        row.sph_sharpness = spectra::spherical_sharpness(oracle, s.w, lo);
      }
      row.test_loss = oracle.test_value(s.w);
      const Matrix P = matcom->product(s.w);
      Eigen::BDCSVD<Matrix> svd(P);
      if (svd.singularValues().size() >= 3)
        row.dist_to_target = svd.singularValues()[1] / svd.singularValues()[2];
    } else {  // example3d
      if (sharp_at == "phi") {
        manifold::ProjectOptions mo;
        mo.rank = 1;
        row.sph_sharpness =
            manifold::gf_project(theta, oracle, mo).spectrum.lambda1;
      } else {
        row.sph_sharpness = spectra::spherical_sharpness(oracle, s.w);
      }
      const auto& p3 = static_cast<const oracles::Example3DProblem&>(oracle);
      const Vector u = p3.transform() * theta / theta.norm();
      row.dist_to_target = std::abs(u[2]);
    }
  };

  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (cfg.sched == Sched::GDWD) {
      dyn::OptState init{w0, 0};
      dyn::run_gdwd(init, gcfg, oracle, cfg.steps,
                    [&](long t, const dyn::OptState& s, const Vector&,
                        double eff) { ctx.observe(t, s, eff, cfg.steps); });
    } else {
      sched::SchedulerState ss;
      ss.eta = cfg.sched_eta;
      ss.beta = cfg.sched_beta > 0.0 ? cfg.sched_beta
                                     : 1.0 - 2.0 * cfg.sched_eta * cfg.sched_eta;
      if (cfg.sched_v0 > 0.0) {
        ss.v_tilde = cfg.sched_v0;
      } else if (cfg.init == "near-min") {
        const double lam = spectra::spherical_sharpness(oracle, w0);
        ss.v_tilde = lam * lam / 4.0;
      } else {
        ss.v_tilde = 1.0;
      }
      dyn::OptState init{w0 / w0.norm(), 0};
      dyn::run_scalar_rmsprop(
          init, ss, oracle, cfg.steps,
          [&](long t, const dyn::OptState& s, const Vector&, double eff) {
            ctx.observe(t, s, eff, cfg.steps);
          });
    }
  } catch (const DivergedError& e) {
    rep.diverged = true;
    rep.diverged_step = e.step;
    rep.error = e.what();
  }
  rep.runtime_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  // Post-run summary.
  rep.eos_entry_step =
      detect_eos_entry(trace, cfg.eos_rel_tol, cfg.eos_consecutive);
  if (ctx.detail_from >= 0)
    rep.period2_fraction =
        detect_period2(trace, ctx.detail_from, ctx.detail_until);
  for (const TraceRow& r : trace.rows) {
    if (r.sph_sharpness) {
      if (!rep.sharpness_first) rep.sharpness_first = r.sph_sharpness;
      rep.sharpness_last = r.sph_sharpness;
      rep.sharpness_min = rep.sharpness_min
                              ? std::min(*rep.sharpness_min, *r.sph_sharpness)
                              : *r.sph_sharpness;
    }
    if (rep.eos_entry_step && r.t >= *rep.eos_entry_step) {
      if (r.sph_sharpness && !rep.sharpness_at_entry)
        rep.sharpness_at_entry = r.sph_sharpness;
      if (r.test_loss && !rep.test_loss_at_entry)
        rep.test_loss_at_entry = r.test_loss;
      if (r.dist_to_target && !rep.dist_at_entry)
        rep.dist_at_entry = r.dist_to_target;
    }
    if (r.test_loss) rep.test_loss_final = r.test_loss;
    if (r.dist_to_target) rep.dist_final = r.dist_to_target;
  }
  if (!trace.rows.empty()) rep.train_loss_final = trace.rows.back().train_loss;
  rep.rows = static_cast<long>(trace.rows.size());
  return result;
}

RunResult run_driftsim_experiment(const ExperimentConfig& cfg) {
  RunResult result;
  const DriftSimParams& d = cfg.drift;
  std::string csv;
  json extra;
  const auto t0 = std::chrono::steady_clock::now();
  if (d.mode == "discrete") {
    driftsim::DriftState s{d.h0, d.u0, d.grad_norm_sq, std::nullopt};
    const double e0 = driftsim::energy(s, d.c_b);
    double maxdev = 0.0;
    csv = "t,h,u,energy\n";
    std::vector<driftsim::DriftState> traj;
    traj.reserve(cfg.steps + 1);
    traj.push_back(s);
    for (long t = 0; t <= cfg.steps; ++t) {
      if (t % cfg.record_every == 0 || t == cfg.steps) {
        const double e = driftsim::energy(s, d.c_b);
        csv += std::to_string(t) + ',' + format_double(s.h) + ',' +
               format_double(s.u) + ',' + format_double(e) + '\n';
      }
      if (t == cfg.steps) break;
      s = driftsim::drift_transition(s, d.eta, d.c_b);
      traj.push_back(s);
      maxdev = std::max(maxdev, std::abs(driftsim::energy(s, d.c_b) - e0));
    }
    extra["energy_initial"] = e0;
    extra["energy_max_deviation"] = maxdev;
    extra["periods"] = driftsim::count_periods(traj);
    try {
      extra["mean_h2"] = driftsim::average_h2(traj);
    } catch (const std::invalid_argument&) {
    }
  } else if (d.mode == "leapfrog") {
    const auto params = driftsim::HamiltonianParams::from(d.c_b, d.grad_norm_sq);
    double x = d.x0 ? *d.x0 : std::log(std::abs(d.h0));
    double v = d.v0 ? *d.v0 : -d.u0;
    const double e0 = 0.5 * v * v + params.potential(x);
    double maxrel = 0.0;
    csv = "t,x,v,energy\n";
    for (long t = 0; t <= cfg.steps; ++t) {
      const double e = 0.5 * v * v + params.potential(x);
      if (t % cfg.record_every == 0 || t == cfg.steps)
        csv += std::to_string(t) + ',' + format_double(x) + ',' +
               format_double(v) + ',' + format_double(e) + '\n';
      maxrel = std::max(maxrel, std::abs(e - e0) / std::abs(e0));
      if (t == cfg.steps) break;
      std::tie(x, v) = driftsim::ham_ode_step(x, v, d.dtau, params);
    }
    extra["energy_initial"] = e0;
    extra["energy_max_rel_drift"] = maxrel;
  } else if (d.mode == "portrait") {
    const auto params = driftsim::HamiltonianParams::from(d.c_b, d.grad_norm_sq);
    std::vector<double> levels = d.levels;
    if (levels.empty()) {
      const double emin = params.potential(params.fixed_point());
      levels = {emin + 0.5, emin + 1.0, emin + 2.0};
    }
    const auto orbits =
        driftsim::phase_portrait(params, levels, d.samples_per_orbit, d.dtau);
    csv = "level,period,idx,log_abs_h,minus_u\n";
    double max_closure = 0.0;
    for (const auto& orbit : orbits) {
      max_closure = std::max(max_closure, orbit.closure);
      for (std::size_t i = 0; i < orbit.points.size(); ++i)
        csv += format_double(orbit.energy_level) + ',' +
               format_double(orbit.period) + ',' + std::to_string(i) + ',' +
               format_double(orbit.points[i].first) + ',' +
               format_double(orbit.points[i].second) + '\n';
    }
    extra["max_closure"] = max_closure;
  } else {
    throw std::invalid_argument("unknown driftsim mode '" + d.mode + "'");
  }
  result.report.runtime_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  result.report.rows =
      std::count(csv.begin(), csv.end(), '\n') - 1;  // minus header
  result.drift_csv = std::move(csv);
  result.report.extra = std::move(extra);
  return result;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg) {
  if (cfg.steps < 1) throw std::invalid_argument("run_experiment: steps < 1");
  if (cfg.record_every < 1 || cfg.project_every < 1)
    throw std::invalid_argument("run_experiment: cadences must be >= 1");
  RunResult result = cfg.kind == Kind::DriftSim ? run_driftsim_experiment(cfg)
                                                : run_optimizer_experiment(cfg);
  result.report.version = kVersion;
  result.report.config = cfg.to_json();
  if (!result.report.rows) result.report.rows = static_cast<long>(result.trace.rows.size());
  if (!cfg.out.empty()) {
    if (cfg.kind == Kind::DriftSim) {
      write_file(cfg.out, result.drift_csv);
    } else if (cfg.format == "json") {
      write_file(cfg.out, trace_to_json(result.trace).dump(2) + "\n");
    } else {
      write_file(cfg.out, trace_to_csv(result.trace));
    }
    const auto dot = cfg.out.find_last_of('.');
    const std::string base =
        dot == std::string::npos ? cfg.out : cfg.out.substr(0, dot);
    write_file(base + ".report.json", result.report.to_json().dump(2) + "\n");
  }
  return result;
}

// ---------------------------------------------------------------------------
// Detectors

std::optional<long> detect_eos_entry(const Trace& trace, double rel_tol,
                                     int min_consecutive) {
  int consec = 0;
  long streak_start = -1;
  for (const TraceRow& r : trace.rows) {
    if (!r.sph_sharpness) continue;
    const double lam = *r.sph_sharpness;
    if (lam > 0.0 && std::abs(r.two_over_eff_lr - lam) <= rel_tol * lam) {
      if (consec == 0) streak_start = r.t;
      if (++consec >= min_consecutive) return streak_start;
    } else {
      consec = 0;
    }
  }
  return std::nullopt;
}

double detect_period2(const Trace& trace, long t_begin, long t_end) {
  long pairs = 0, alternations = 0;
  for (std::size_t i = 0; i + 1 < trace.rows.size(); ++i) {
    const TraceRow& a = trace.rows[i];
    const TraceRow& b = trace.rows[i + 1];
    if (a.t < t_begin || b.t > t_end) continue;
    if (b.t != a.t + 1 || !a.h || !b.h) continue;
    ++pairs;
    if ((*a.h > 0.0) != (*b.h > 0.0) && *a.h != 0.0 && *b.h != 0.0)
      ++alternations;
  }
  if (pairs == 0) return 0.0;
  return static_cast<double>(alternations) / static_cast<double>(pairs);
}

// ---------------------------------------------------------------------------
// Misc

int thread_cap() {
  if (const char* env = std::getenv("EOSLAB_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(int n, const std::function<void(int)>& fn) {
  const int workers = std::min(thread_cap(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int wkr = 0; wkr < workers; ++wkr) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("short write to '" + path + "'");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace eoslab::harness
