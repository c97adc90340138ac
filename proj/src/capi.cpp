#include "ivate/ivate.h"

#include "ivate/app.hpp"
#include "ivate/error.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <new>

struct ivate_table {
  ivate::ObservationTable table;
};
struct ivate_fit_result {
  ivate::app::FitOutput output;
};
struct ivate_sim_result {
  ivate::app::SimulateOutput output;
};
struct ivate_riesz_result {
  ivate::app::RieszOutput output;
};

namespace {

thread_local std::string last_error;
thread_local std::string last_error_record;

ivate_status status_of(ivate::ErrorKind kind) {
  using K = ivate::ErrorKind;
  switch (kind) {
    case K::invalid_argument: return IVATE_ERR_INVALID_ARGUMENT;
    case K::data: return IVATE_ERR_DATA;
    case K::rank_deficient: return IVATE_ERR_RANK_DEFICIENT;
    case K::separation: return IVATE_ERR_SEPARATION;
    case K::non_convergence: return IVATE_ERR_NON_CONVERGENCE;
    case K::singular_jacobian: return IVATE_ERR_SINGULAR_JACOBIAN;
    case K::non_finite: return IVATE_ERR_NON_FINITE;
    case K::denominator_floor: return IVATE_ERR_DENOMINATOR_FLOOR;
    case K::quadrature: return IVATE_ERR_QUADRATURE;
    case K::excess_failures: return IVATE_ERR_EXCESS_FAILURES;
    case K::unsupported: return IVATE_ERR_UNSUPPORTED;
    case K::io: return IVATE_ERR_IO;
    case K::usage: return IVATE_ERR_USAGE;
  }
  return IVATE_ERR_INTERNAL;
}

ivate_status record(ivate_status status, const std::string& message) {
  last_error = message;
  last_error_record = ivate::app::error_json(ivate_status_name(status), message);
  return status;
}

template <class F>
ivate_status guard(F&& body) {
  try {
    body();
    return IVATE_OK;
  } catch (const ivate::Error& e) {
    return record(status_of(e.kind()), e.what());
  } catch (const nlohmann::json::parse_error& e) {
    return record(IVATE_ERR_USAGE, std::string("configuration is not valid JSON: ") + e.what());
  } catch (const std::bad_alloc&) {
    return record(IVATE_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return record(IVATE_ERR_INTERNAL, e.what());
  }
}

void require(bool ok, const char* what) {
  if (!ok) ivate::fail(ivate::ErrorKind::invalid_argument, what);
}

nlohmann::json parse_config(const char* text) {
  if (text == nullptr || *text == '\0') return nlohmann::json::object();
  return nlohmann::json::parse(text);
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

ivate::InstrumentKind instrument_kind(const char* name) {
  const std::string s = name ? name : "continuous";
  if (s == "continuous") return ivate::InstrumentKind::continuous();
  if (s == "binary") return ivate::InstrumentKind::categorical_with(2);
  if (s.rfind("categorical:", 0) == 0) {
    const int k = std::atoi(s.c_str() + 12);
    if (k >= 2) return ivate::InstrumentKind::categorical_with(k);
  }
  ivate::fail(ivate::ErrorKind::invalid_argument, "instrument must be continuous, binary or categorical:K");
}

}  // namespace

extern "C" {

const char* ivate_version(void) { return ivate::app::kVersion; }

const char* ivate_status_name(ivate_status status) {
  switch (status) {
    case IVATE_OK: return "ok";
    case IVATE_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case IVATE_ERR_DATA: return "data";
    case IVATE_ERR_RANK_DEFICIENT: return "rank_deficient";
    case IVATE_ERR_SEPARATION: return "separation";
    case IVATE_ERR_NON_CONVERGENCE: return "non_convergence";
    case IVATE_ERR_SINGULAR_JACOBIAN: return "singular_jacobian";
    case IVATE_ERR_NON_FINITE: return "non_finite";
    case IVATE_ERR_DENOMINATOR_FLOOR: return "denominator_floor";
    case IVATE_ERR_QUADRATURE: return "quadrature";
    case IVATE_ERR_EXCESS_FAILURES: return "excess_failures";
    case IVATE_ERR_UNSUPPORTED: return "unsupported";
    case IVATE_ERR_IO: return "io";
    case IVATE_ERR_USAGE: return "usage";
    case IVATE_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* ivate_last_error(void) { return last_error.c_str(); }
const char* ivate_last_error_json(void) { return last_error_record.c_str(); }

void ivate_string_free(char* s) { std::free(s); }

ivate_status ivate_table_from_csv(const char* path, const char* instrument, ivate_table** out) {
  return guard([&] {
    require(path && out, "null argument");
    *out = new ivate_table{ivate::read_csv_file(path, instrument_kind(instrument))};
  });
}

ivate_status ivate_table_from_arrays(size_t n, size_t p_covariates, const double* y, const double* d,
                                     const double* z, const double* x, int z_levels, ivate_table** out) {
  return guard([&] {
    require(y && d && z && out && (p_covariates == 0 || x), "null argument");
    require(z_levels == 0 || z_levels >= 2, "z_levels must be 0 or at least 2");
    const auto rows = static_cast<ivate::Index>(n);
    const auto cols = static_cast<ivate::Index>(p_covariates);
    ivate::RawTable raw{ivate::Vector(rows), ivate::Vector(rows), ivate::Vector(rows), ivate::Matrix(rows, cols + 1),
                        z_levels == 0 ? ivate::InstrumentKind::continuous()
                                      : ivate::InstrumentKind::categorical_with(z_levels)};
    for (ivate::Index i = 0; i < rows; ++i) {
      raw.y[i] = y[i];
      raw.d[i] = d[i];
      raw.z[i] = z[i];
      raw.x(i, 0) = 1.0;
      for (ivate::Index j = 0; j < cols; ++j) raw.x(i, j + 1) = x[i * cols + j];
    }
    *out = new ivate_table{ivate::validate(std::move(raw))};
  });
}

ivate_status ivate_table_dims(const ivate_table* table, size_t* n, size_t* p) {
  return guard([&] {
    require(table && n && p, "null argument");
    *n = static_cast<size_t>(table->table.n());
    *p = static_cast<size_t>(table->table.p());
  });
}

ivate_status ivate_table_dichotomize(const ivate_table* table, double q, ivate_table** out) {
  return guard([&] {
    require(table && out, "null argument");
    *out = new ivate_table{ivate::dichotomize(table->table, q)};
  });
}

ivate_status ivate_table_write_csv(const ivate_table* table, const char* path) {
  return guard([&] {
    require(table && path, "null argument");
    std::ofstream f(path, std::ios::binary);
    if (!f) ivate::fail(ivate::ErrorKind::io, std::string("cannot open ") + path + " for writing");
    ivate::write_csv(f, table->table);
    if (!f) ivate::fail(ivate::ErrorKind::io, std::string("failed writing ") + path);
  });
}

ivate_status ivate_table_simulate(const char* setting, size_t n, uint64_t seed, uint64_t stream, ivate_table** out) {
  return guard([&] {
    require(setting && out, "null argument");
    const auto s = ivate::sim::parse_setting(setting);
    require(s != ivate::sim::Setting::dichotomized, "simulate a table from setting I and dichotomize it instead");
    ivate::Philox rng(seed, stream);
    const auto params = ivate::sim::DgpParams::for_setting(s);
    auto data = s == ivate::sim::Setting::binary
                    ? ivate::sim::gen_setting2(params, static_cast<ivate::Index>(n), rng)
                    : ivate::sim::gen_setting1(params, static_cast<ivate::Index>(n), rng);
    *out = new ivate_table{std::move(data.table)};
  });
}

void ivate_table_free(ivate_table* table) { delete table; }

ivate_status ivate_fit(const ivate_table* table, const char* config_json, ivate_fit_result** out) {
  return guard([&] {
    require(table && out, "null argument");
    const auto config = ivate::app::parse_fit_config(parse_config(config_json));
    *out = new ivate_fit_result{ivate::app::run_fit(config, table->table)};
  });
}

ivate_status ivate_fit_config(const char* config_json, ivate_fit_result** out) {
  return guard([&] {
    require(out != nullptr, "null argument");
    const auto config = ivate::app::parse_fit_config(parse_config(config_json));
    *out = new ivate_fit_result{ivate::app::run_fit(config)};
  });
}

size_t ivate_fit_count(const ivate_fit_result* result) { return result ? result->output.results.size() : 0; }

ivate_status ivate_fit_estimate(const ivate_fit_result* result, size_t index, const char** estimator, double* point,
                                double* se, double* ci_lower, double* ci_upper) {
  return guard([&] {
    require(result != nullptr, "null argument");
    require(index < result->output.results.size(), "estimate index out of range");
    const auto& r = result->output.results[index];
    const double na = std::nan("");
    if (estimator) *estimator = ivate::to_string(r.estimator);
    if (point) *point = r.point;
    if (se) *se = r.se.value_or(na);
    if (ci_lower) *ci_lower = r.ci ? r.ci->first : na;
    if (ci_upper) *ci_upper = r.ci ? r.ci->second : na;
  });
}

ivate_status ivate_fit_json(const ivate_fit_result* result, char** out) {
  return guard([&] {
    require(result && out, "null argument");
    *out = copy_string(ivate::app::fit_json(result->output));
  });
}

ivate_status ivate_fit_csv(const ivate_fit_result* result, char** out) {
  return guard([&] {
    require(result && out, "null argument");
    *out = copy_string(ivate::app::fit_csv(result->output));
  });
}

void ivate_fit_free(ivate_fit_result* result) { delete result; }

ivate_status ivate_simulate(const char* config_json, ivate_sim_result** out) {
  return guard([&] {
    require(out != nullptr, "null argument");
    const auto config = ivate::app::parse_simulate_config(parse_config(config_json));
    *out = new ivate_sim_result{ivate::app::run_simulate(config)};
  });
}

ivate_status ivate_sim_table_csv(const ivate_sim_result* result, char** out) {
  return guard([&] {
    require(result && out, "null argument");
    *out = copy_string(ivate::app::simulation_table_csv(result->output));
  });
}

ivate_status ivate_sim_long_csv(const ivate_sim_result* result, char** out) {
  return guard([&] {
    require(result && out, "null argument");
    *out = copy_string(ivate::app::simulation_long_csv(result->output));
  });
}

ivate_status ivate_sim_json(const ivate_sim_result* result, char** out) {
  return guard([&] {
    require(result && out, "null argument");
    *out = copy_string(ivate::app::simulation_json(result->output));
  });
}

void ivate_sim_free(ivate_sim_result* result) { delete result; }

ivate_status ivate_true_ate(const char* setting, uint64_t draws, uint64_t seed, double* value, double* mcse) {
  return guard([&] {
    require(setting && value, "null argument");
    const auto params = ivate::sim::DgpParams::for_setting(ivate::sim::parse_setting(setting));
    const auto truth = ivate::sim::true_ate(params, static_cast<ivate::Index>(draws), seed);
    *value = truth.value;
    if (mcse) *mcse = truth.mcse;
  });
}

ivate_status ivate_riesz_check(const char* config_json, ivate_riesz_result** out) {
  return guard([&] {
    require(out != nullptr, "null argument");
    const auto config = ivate::app::parse_riesz_config(parse_config(config_json));
    *out = new ivate_riesz_result{ivate::app::run_riesz_check(config)};
  });
}

int ivate_riesz_all_pass(const ivate_riesz_result* result) { return result && result->output.all_pass ? 1 : 0; }

ivate_status ivate_riesz_json(const ivate_riesz_result* result, char** out) {
  return guard([&] {
    require(result && out, "null argument");
    *out = copy_string(ivate::app::riesz_json(result->output));
  });
}

void ivate_riesz_free(ivate_riesz_result* result) { delete result; }

}  // extern "C"
