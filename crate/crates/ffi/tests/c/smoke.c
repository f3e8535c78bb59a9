#include <math.h>
#include <stdio.h>
#include "excitent.h"

#define CHECK(call)                                                       \
    do {                                                                  \
        ExStatus s_ = (call);                                             \
        if (s_ != EX_STATUS_OK) {                                         \
            fprintf(stderr, "%s failed: %s\n", #call, ex_last_error_message()); \
            return 1;                                                     \
        }                                                                 \
    } while (0)

int main(void) {
    double value = 0.0;
    CHECK(ex_cmax(0.3, 2, &value));
    if (fabs(value - 0.09 / 1.09) > 1e-12) return 2;

    ExState *psi = NULL, *evolved = NULL;
    CHECK(ex_state_leveled_coherent(0.3, 0.0, 3, &psi));
    CHECK(ex_state_evolve_with_vacuum(psi, 3, 0.7853981633974483, &evolved));
    CHECK(ex_state_concurrence(evolved, &value));
    if (fabs(value - 0.017935) > 1e-6) return 3;
    ex_state_free(evolved);
    ex_state_free(psi);

    if (ex_cmax(0.3, 1, &value) != EX_STATUS_INVALID_ARGUMENT) return 4;
    if (ex_last_error_message() == NULL) return 5;
    if (ex_cmax(0.3, 2, NULL) != EX_STATUS_NULL_POINTER) return 6;

    ExNetwork *net = NULL;
    ExReport *report = NULL;
    char *json = NULL;
    CHECK(ex_network_chain(3, 1.0, 0.3, 1.0, &net));
    CHECK(ex_transport_report(net, 0.2, 50, &report));
    double full = 0.0, restricted = 0.0;
    CHECK(ex_report_efficiencies(report, &full, &restricted));
    if (!(full > restricted && full <= 1.0)) return 7;
    CHECK(ex_report_to_json(report, &json));
    ex_string_free(json);
    ex_report_free(report);
    ex_network_free(net);
    printf("ok %s\n", ex_version());
    return 0;
}
