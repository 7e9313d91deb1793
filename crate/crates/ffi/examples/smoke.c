#include <stdio.h>
#include <string.h>

#include "microgrid_dse.h"

int main(void) {
    double c = 0.0;
    if (mdse_confidence(58.0, 58, &c) != MDSE_STATUS_OK || c < 0.4 || c > 0.6) {
        fprintf(stderr, "confidence %f\n", c);
        return 1;
    }
    if (mdse_confidence(1.0, 0, &c) != MDSE_STATUS_NUMERIC || strlen(mdse_last_error_message()) == 0) {
        return 2;
    }

    /* two states, three rows: x = (1, 2) measured with one inconsistent row */
    const double h[] = {1.0, 0.0, 0.0, 1.0, 1.0, 1.0};
    const double sigma[] = {0.1, 0.1, 0.1};
    const double z[] = {1.0, 2.0, 3.0};
    MdseEstimator *est = NULL;
    if (mdse_estimator_new(2, 3, h, sigma, &est) != MDSE_STATUS_OK || mdse_estimator_dof(est) != 1) {
        return 3;
    }
    double x[2], zeta;
    if (mdse_estimator_solve(est, z, x, &zeta, NULL) != MDSE_STATUS_OK || zeta > 1e-12) {
        return 4;
    }
    mdse_estimator_free(est);

    MdseRun *run = NULL;
    if (mdse_run_builtin("case2", 0.05, &run) != MDSE_STATUS_OK) {
        fprintf(stderr, "%s\n", mdse_last_error_message());
        return 5;
    }
    size_t n = mdse_run_window_count(run);
    MdseWindow w;
    if (n == 0 || mdse_run_window(run, n - 1, &w) != MDSE_STATUS_OK || w.verdict != MDSE_VERDICT_NORMAL) {
        return 6;
    }
    if (mdse_run_window(run, n, &w) != MDSE_STATUS_OUT_OF_RANGE) {
        return 7;
    }
    printf("%s windows=%zu last_c=%.4f\n", mdse_version(), n, w.confidence);
    mdse_run_free(run);
    return 0;
}
