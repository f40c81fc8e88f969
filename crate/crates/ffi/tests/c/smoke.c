#include <math.h>
#include <stdio.h>

#include "alp.h"

int main(void) {
    AlpParams *p = alp_params_reference();
    AlpEpsilon eps;
    if (alp_epsilon(p, &eps) != ALP_STATUS_OK || fabs(eps.epsilon_dp - 2.6223) > 1e-3) {
        return 1;
    }

    AlpCrowd crowd;
    if (alp_crowd_size(p, 48719, 0.99, &crowd) != ALP_STATUS_OK || crowd.threshold_at_confidence != 3119) {
        return 2;
    }

    AlpCounts tally = {4098, 64, 44557};
    AlpEstimate est;
    if (alp_estimate(p, ALP_ESTIMATOR_FROM_YES, tally, 0.99, &est) != ALP_STATUS_OK) {
        return 3;
    }
    alp_params_free(p);

    AlpParams *bad = NULL;
    AlpStatus s = alp_params_new(0.6, 0.6, 0.1, 1, 1, 1, &bad);
    if (s != ALP_STATUS_INVALID_PARAMS || bad != NULL) {
        return 4;
    }
    printf("%s %.3f %s\n", alp_version(), est.point, alp_last_error_message());
    return 0;
}
