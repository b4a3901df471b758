#include <math.h>
#include <stdio.h>
#include "perimit.h"

int main(void) {
    double wp[15];
    for (int i = 0; i < 5; i++) {
        double a = 6.283185307179586 * i / 5.0;
        wp[3 * i] = 0.25 + 0.1 * cos(a);
        wp[3 * i + 1] = 0.2 + 0.1 * sin(a);
        wp[3 * i + 2] = 0.01;
    }
    PerimitRdmp *dmp = NULL;
    if (perimit_rdmp_from_waypoints(wp, 5, 3.0, 25, &dmp) != PERIMIT_STATUS_OK) return 1;
    size_t len = 0;
    if (perimit_rdmp_rollout(dmp, 2, 0.015, NULL, 0, &len) != PERIMIT_STATUS_BUFFER_TOO_SMALL) return 2;
    double out[3 * 1000];
    if (len > 1000) return 3;
    if (perimit_rdmp_rollout(dmp, 2, 0.015, out, len, &len) != PERIMIT_STATUS_OK) return 4;
    perimit_rdmp_free(dmp);

    PerimitRdmp *bad = NULL;
    if (perimit_rdmp_from_waypoints(wp, 2, 3.0, 25, &bad) != PERIMIT_STATUS_INVALID_ARGUMENT) return 5;
    char msg[128];
    if (perimit_last_error_message(msg, sizeof msg) == 0) return 6;
    printf("%zu points; error text: %s\n", len, msg);
    return 0;
}
