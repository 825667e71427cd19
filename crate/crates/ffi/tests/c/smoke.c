#include <math.h>
#include <stdio.h>

#include "ctcm.h"

int main(void) {
    const double center[2] = {1.0, 1.0};
    const double half[2] = {1.0, 1.0};
    CtcmParams *params = NULL;
    if (ctcm_params_new(0.05, 0.05, 4, 2, center, half, &params) != CTCM_STATUS_OK) {
        fprintf(stderr, "params: %s\n", ctcm_last_error_message());
        return 1;
    }
    double sigma[5];
    double v[2];
    if (ctcm_steady_state(params, sigma, 5) != CTCM_STATUS_OK) return 2;
    if (ctcm_expected_velocity(params, v, 2) != CTCM_STATUS_OK) return 3;
    if (fabs(sigma[2] - 0.375) > 1e-12) return 4;
    if (fabs(v[0] - 0.05 * (1.0 - pow(0.5, 4))) > 1e-12) return 5;
    if (ctcm_steady_state(params, sigma, 3) != CTCM_STATUS_BUFFER_TOO_SMALL) return 6;

    CtcmTrajectory *traj = NULL;
    if (ctcm_simulate_markov(params, 4, 600.0, 7, &traj) != CTCM_STATUS_OK) return 7;
    size_t len = ctcm_trajectory_len(traj);
    double t_last;
    size_t count;
    if (len < 2) return 8;
    if (ctcm_trajectory_time(traj, len - 1, &t_last) != CTCM_STATUS_OK || t_last > 600.0) return 9;
    if (ctcm_trajectory_count(traj, len, &count) != CTCM_STATUS_OUT_OF_RANGE) return 10;
    if (ctcm_trajectory_centroid_at(traj, 600.0, v, 2) != CTCM_STATUS_OK) return 11;
    ctcm_trajectory_free(traj);
    ctcm_params_free(params);
    printf("ok %zu\n", len);
    return 0;
}
