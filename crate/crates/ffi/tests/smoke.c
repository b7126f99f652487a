#include <math.h>
#include <stdio.h>
#include <string.h>
#include "qgevrey.h"

#define CHECK(cond) do { if (!(cond)) { fprintf(stderr, "failed: %s\n", #cond); return 1; } } while (0)

int main(void) {
    QgTheta *th = NULL;
    CHECK(qg_theta_new(2.0, 1.0, &th) == QG_STATUS_OK);
    QgComplex one = {1.0, 0.0}, v;
    CHECK(qg_theta_eval(th, one, &v) == QG_STATUS_OK);
    CHECK(isfinite(v.re) && v.re > 0.0);
    QgComplex zero = {0.0, 0.0};
    CHECK(qg_theta_eval(th, zero, &v) == QG_STATUS_OUTSIDE_DOMAIN);
    CHECK(strlen(qg_last_error_message()) > 0);
    qg_theta_free(th);

    QgScenario *sc = NULL;
    CHECK(qg_scenario_default(&sc) == QG_STATUS_OK);
    size_t n = 0;
    CHECK(qg_scenario_len(sc, &n) == QG_STATUS_OK && n == 4);
    QgComplex t = {0.2, 0.0}, z = {0.1, 0.0}, eps = {0.2, 0.05}, u;
    double err = -1.0;
    CHECK(qg_scenario_solution(sc, 0, t, z, eps, &u, &err) == QG_STATUS_OK);
    CHECK(isfinite(u.re) && err >= 0.0);
    qg_scenario_free(sc);
    CHECK(qg_scenario_from_json("{", &sc) == QG_STATUS_PARSE);
    puts("ok");
    return 0;
}
