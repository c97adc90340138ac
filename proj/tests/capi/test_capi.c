/* Exercises the shared library through its C interface only. */
#include "ivate/ivate.h"

#include <math.h>
#include <stdio.h>
#include <string.h>

static int failures = 0;

#define EXPECT(cond)                                              \
  do {                                                            \
    if (!(cond)) {                                                \
      fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                 \
    }                                                             \
  } while (0)

static void test_arrays(void) {
  const double y[6] = {1, 0, 2, 1.5, -0.5, 0.3};
  const double d[6] = {1, 0, 1, 1, 0, 0};
  const double z[6] = {0.2, -1, 1.4, 0.8, -0.3, 0.1};
  const double x[6] = {0.5, -0.2, 0.1, 0.9, -1.1, 0.4};
  ivate_table* t = NULL;
  size_t n = 0, p = 0;
  EXPECT(ivate_table_from_arrays(6, 1, y, d, z, x, 0, &t) == IVATE_OK);
  EXPECT(ivate_table_dims(t, &n, &p) == IVATE_OK);
  EXPECT(n == 6 && p == 2);

  ivate_fit_result* fit = NULL;
  EXPECT(ivate_fit(t, "{\"estimators\":[\"crude_rd\"],\"bootstrap\":0}", &fit) == IVATE_OK);
  EXPECT(ivate_fit_count(fit) == 1);
  const char* name = NULL;
  double point = 0, se = 0, lo = 0, hi = 0;
  EXPECT(ivate_fit_estimate(fit, 0, &name, &point, &se, &lo, &hi) == IVATE_OK);
  EXPECT(strcmp(name, "crude_rd") == 0);
  EXPECT(fabs(point - (1.5 - (-0.2 / 3.0))) < 1e-12);
  EXPECT(isnan(se));
  EXPECT(ivate_fit_estimate(fit, 5, &name, &point, &se, &lo, &hi) == IVATE_ERR_INVALID_ARGUMENT);
  ivate_fit_free(fit);
  ivate_table_free(t);

  const double bad_d[6] = {1, 0, 2, 1, 0, 0};
  EXPECT(ivate_table_from_arrays(6, 1, y, bad_d, z, x, 0, &t) == IVATE_ERR_DATA);
  EXPECT(strstr(ivate_last_error(), "treatment not binary") != NULL);
  EXPECT(strstr(ivate_last_error_json(), "\"kind\"") != NULL);
}

static void test_fit_simulated(void) {
  ivate_table* t = NULL;
  EXPECT(ivate_table_simulate("I", 800, 3, 0, &t) == IVATE_OK);
  ivate_fit_result* fit = NULL;
  EXPECT(ivate_fit(t, "{\"estimators\":[\"delta_b_tr\",\"delta_tr\"],\"bootstrap\":20,\"seed\":4}", &fit) ==
         IVATE_OK);
  const char* name = NULL;
  double point = 0, se = 0, lo = 0, hi = 0;
  EXPECT(ivate_fit_estimate(fit, 0, &name, &point, &se, &lo, &hi) == IVATE_OK);
  EXPECT(point >= -1 && point <= 1);
  EXPECT(se > 0 && lo <= point && point <= hi);
  char* json = NULL;
  EXPECT(ivate_fit_json(fit, &json) == IVATE_OK);
  EXPECT(strstr(json, "\"provenance\"") != NULL);
  ivate_string_free(json);
  ivate_fit_free(fit);

  EXPECT(ivate_fit(t, "{\"nonsense\":1}", &fit) == IVATE_ERR_USAGE);
  EXPECT(ivate_fit(t, "{not json", &fit) == IVATE_ERR_USAGE);

  ivate_table* half = NULL;
  EXPECT(ivate_table_dichotomize(t, 0.5, &half) == IVATE_OK);
  ivate_table_free(half);
  ivate_table_free(t);
}

static void test_simulate_and_riesz(void) {
  ivate_sim_result* sim = NULL;
  EXPECT(ivate_simulate("{\"setting\":\"II\",\"reps\":2,\"n\":300,\"truth_draws\":1000,\"threads\":1}", &sim) ==
         IVATE_OK);
  char* csv = NULL;
  EXPECT(ivate_sim_table_csv(sim, &csv) == IVATE_OK);
  EXPECT(strncmp(csv, "#", 1) == 0);
  ivate_string_free(csv);
  ivate_sim_free(sim);

  double value = 0, mcse = 0;
  EXPECT(ivate_true_ate("I", 100000, 1, &value, &mcse) == IVATE_OK);
  EXPECT(fabs(value - 0.0947) < 5 * mcse + 1e-3);

  ivate_riesz_result* rz = NULL;
  EXPECT(ivate_riesz_check("{}", &rz) == IVATE_OK);
  EXPECT(ivate_riesz_all_pass(rz) == 1);
  ivate_riesz_free(rz);
  EXPECT(ivate_riesz_check("{\"cases\":[\"nope\"]}", &rz) == IVATE_ERR_USAGE);
}

int main(void) {
  EXPECT(strlen(ivate_version()) > 0);
  EXPECT(strcmp(ivate_status_name(IVATE_ERR_USAGE), "") != 0);
  test_arrays();
  test_fit_simulated();
  test_simulate_and_riesz();
  if (failures) {
    fprintf(stderr, "%d failed expectations\n", failures);
    return 1;
  }
  printf("C API: all expectations met\n");
  return 0;
}
