#include "eoslab/eoslab.h"

#include <json.hpp>

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include "checks.hpp"
#include "common.hpp"
#include "harness.hpp"
#include "manifold.hpp"
#include "oracles.hpp"
#include "spectra.hpp"

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& msg) { g_last_error = msg; }

template <typename Fn>
eoslab_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const eoslab::DivergedError& e) {
    set_error(e.what());
    return EOSLAB_ERR_DIVERGED;
  } catch (const eoslab::NoConvergenceError& e) {
    set_error(e.what());
    return EOSLAB_ERR_NO_CONVERGENCE;
  } catch (const std::domain_error& e) {
    set_error(e.what());
    return EOSLAB_ERR_DOMAIN;
  } catch (const std::invalid_argument& e) {
    set_error(e.what());
    return EOSLAB_ERR_INVALID_ARGUMENT;
  } catch (const std::exception& e) {
    set_error(e.what());
    return EOSLAB_ERR_INTERNAL;
  } catch (...) {
    set_error("unknown error");
    return EOSLAB_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

struct eoslab_problem {
  std::unique_ptr<eoslab::oracles::LossOracle> oracle;
  enum class Family { LinReg, MatCom, Example3D } family;
};

extern "C" {

const char* eoslab_version(void) { return eoslab::kVersion; }

const char* eoslab_last_error(void) { return g_last_error.c_str(); }

eoslab_status eoslab_linreg_create(uint64_t seed, int dim, int n_train,
                                   int n_test, eoslab_problem** out) {
  return guarded([&] {
    if (!out) throw std::invalid_argument("out is null");
    auto p = std::make_unique<eoslab_problem>();
    p->oracle = std::make_unique<eoslab::oracles::LinRegBNProblem>(
        eoslab::harness::gen_linreg(seed, dim, n_train, n_test));
    p->family = eoslab_problem::Family::LinReg;
    *out = p.release();
    return EOSLAB_OK;
  });
}

eoslab_status eoslab_matcom_create(uint64_t seed, int d, int rank, int n_obs,
                                   eoslab_problem** out) {
  return guarded([&] {
    if (!out) throw std::invalid_argument("out is null");
    auto p = std::make_unique<eoslab_problem>();
    p->oracle = std::make_unique<eoslab::oracles::MatComBNProblem>(
        eoslab::harness::gen_matcom(d, rank, n_obs, seed));
    p->family = eoslab_problem::Family::MatCom;
    *out = p.release();
    return EOSLAB_OK;
  });
}

eoslab_status eoslab_example3d_create(uint64_t seed, eoslab_problem** out) {
  return guarded([&] {
    if (!out) throw std::invalid_argument("out is null");
    auto setup = eoslab::harness::gen_example3d(seed);
    auto p = std::make_unique<eoslab_problem>();
    p->oracle =
        std::make_unique<eoslab::oracles::Example3DProblem>(setup.problem);
    p->family = eoslab_problem::Family::Example3D;
    *out = p.release();
    return EOSLAB_OK;
  });
}

void eoslab_problem_destroy(eoslab_problem* p) { delete p; }

eoslab_status eoslab_problem_dim(const eoslab_problem* p, int* out) {
  return guarded([&] {
    if (!p || !out) throw std::invalid_argument("null argument");
    *out = p->oracle->dim();
    return EOSLAB_OK;
  });
}

namespace {
eoslab::Vector to_vec(const double* data, size_t len) {
  return Eigen::Map<const eoslab::Vector>(data, static_cast<Eigen::Index>(len));
}

void check_len(const eoslab_problem* p, size_t len) {
  if (static_cast<size_t>(p->oracle->dim()) != len)
    throw std::invalid_argument("parameter length does not match problem dim");
}
}  // namespace

eoslab_status eoslab_initial_point(const eoslab_problem* p, uint64_t seed,
                                   double* w, size_t len) {
  return guarded([&] {
    if (!p || !w) throw std::invalid_argument("null argument");
    check_len(p, len);
    eoslab::Rng rng(seed ^ 0x1db3a5ed0f3c11ULL);
    eoslab::Vector v;
    switch (p->family) {
      case eoslab_problem::Family::LinReg:
        v = rng.unit_vector(p->oracle->dim());
        break;
      case eoslab_problem::Family::MatCom:
        v = rng.gaussian_vector(p->oracle->dim());
        break;
      case eoslab_problem::Family::Example3D:
        v = eoslab::harness::gen_example3d(seed).w0;
        break;
    }
    Eigen::Map<eoslab::Vector>(w, v.size()) = v;
    return EOSLAB_OK;
  });
}

eoslab_status eoslab_value(const eoslab_problem* p, const double* w, size_t len,
                           double* out) {
  return guarded([&] {
    if (!p || !w || !out) throw std::invalid_argument("null argument");
    check_len(p, len);
    *out = p->oracle->value(to_vec(w, len));
    return EOSLAB_OK;
  });
}

eoslab_status eoslab_test_value(const eoslab_problem* p, const double* w,
                                size_t len, double* out) {
  return guarded([&] {
    if (!p || !w || !out) throw std::invalid_argument("null argument");
    check_len(p, len);
    if (!p->oracle->has_test_value())
      throw std::invalid_argument("problem has no held-out metric");
    *out = p->oracle->test_value(to_vec(w, len));
    return EOSLAB_OK;
  });
}

eoslab_status eoslab_grad(const eoslab_problem* p, const double* w, size_t len,
                          double* out_grad) {
  return guarded([&] {
    if (!p || !w || !out_grad) throw std::invalid_argument("null argument");
    check_len(p, len);
    const eoslab::Vector g = p->oracle->grad(to_vec(w, len));
    Eigen::Map<eoslab::Vector>(out_grad, g.size()) = g;
    return EOSLAB_OK;
  });
}

eoslab_status eoslab_hvp(const eoslab_problem* p, const double* w,
                         const double* v, size_t len, double* out_hv) {
  return guarded([&] {
    if (!p || !w || !v || !out_hv) throw std::invalid_argument("null argument");
    check_len(p, len);
    const eoslab::Vector hv = p->oracle->hvp(to_vec(w, len), to_vec(v, len));
    Eigen::Map<eoslab::Vector>(out_hv, hv.size()) = hv;
    return EOSLAB_OK;
  });
}

eoslab_status eoslab_spherical_sharpness(const eoslab_problem* p,
                                         const double* w, size_t len,
                                         uint64_t seed, double tol,
                                         double* out) {
  return guarded([&] {
    if (!p || !w || !out) throw std::invalid_argument("null argument");
    check_len(p, len);
    auto opts = eoslab::spectra::sharpness_defaults();
    opts.seed = seed;
    if (tol > 0.0) opts.tol = tol;
    *out = eoslab::spectra::spherical_sharpness(*p->oracle, to_vec(w, len), opts);
    return EOSLAB_OK;
  });
}

eoslab_status eoslab_min_norm_solution(const eoslab_problem* p, double* w_star,
                                       size_t len, double* b_star) {
  return guarded([&] {
    if (!p || !w_star || !b_star) throw std::invalid_argument("null argument");
    if (p->family != eoslab_problem::Family::LinReg)
      throw std::invalid_argument("min-norm solution is linreg-specific");
    check_len(p, len);
    const auto& problem =
        static_cast<const eoslab::oracles::LinRegBNProblem&>(*p->oracle);
    const auto [w, b] = eoslab::manifold::min_norm_oracle(problem);
    Eigen::Map<eoslab::Vector>(w_star, w.size()) = w;
    *b_star = b;
    return EOSLAB_OK;
  });
}

eoslab_status eoslab_pac_bayes_bound(double lambda1, double m3, double ell_max,
                                     long long n, int dim, double sigma,
                                     double delta, double* out) {
  return guarded([&] {
    if (!out) throw std::invalid_argument("out is null");
    *out = eoslab::spectra::pac_bayes_bound(lambda1, m3, ell_max, n, dim, sigma,
                                            delta);
    return EOSLAB_OK;
  });
}

eoslab_status eoslab_run_experiment(const char* config_json,
                                    char** report_json) {
  return guarded([&] {
    if (!config_json || !report_json)
      throw std::invalid_argument("null argument");
    const auto j = nlohmann::json::parse(config_json);
    const auto cfg = eoslab::harness::ExperimentConfig::from_json(j);
    const auto result = eoslab::harness::run_experiment(cfg);
    *report_json = dup_string(result.report.to_json().dump(2));
    if (!*report_json) throw std::bad_alloc();
    return EOSLAB_OK;
  });
}

eoslab_status eoslab_run_checks(const int* ids, size_t n_ids, int verbose,
                                int* all_passed, char** report_json) {
  return guarded([&] {
    std::vector<int> only;
    if (ids)
      for (size_t i = 0; i < n_ids; ++i) only.push_back(ids[i]);
    const auto results = eoslab::checks::run_all(only, verbose != 0);
    bool all = true;
    for (const auto& r : results) all = all && r.passed;
    if (all_passed) *all_passed = all ? 1 : 0;
    if (report_json) {
      *report_json = dup_string(eoslab::checks::to_json(results).dump(2));
      if (!*report_json) throw std::bad_alloc();
    }
    return EOSLAB_OK;
  });
}

void eoslab_string_free(char* s) { std::free(s); }

}  // extern "C"
