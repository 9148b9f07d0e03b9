#include <stdio.h>
#include <stdlib.h>

#include "asor_lab.h"

int main(void) {
    AsorWorld *world = NULL;
    if (asor_world_canonical(&world) != ASOR_STATUS_OK) {
        return 1;
    }
    size_t n = asor_world_num_states(world);
    double *values = malloc(n * sizeof(double));
    size_t start = 0;
    if (asor_world_start_state(world, &start) != ASOR_STATUS_OK ||
        asor_world_optimal_values(world, 0, values, n) != ASOR_STATUS_OK) {
        return 2;
    }
    if (asor_world_optimal_values(world, 0, values, 1) != ASOR_STATUS_BUFFER_TOO_SMALL) {
        return 3;
    }
    char *msg = asor_last_error_message();
    if (msg == NULL) {
        return 4;
    }
    asor_string_free(msg);
    printf("%zu %zu %.6f\n", n, asor_world_num_thetas(world), values[start]);
    free(values);
    asor_world_free(world);
    return 0;
}
