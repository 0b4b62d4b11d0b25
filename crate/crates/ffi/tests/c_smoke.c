/* Loads a checkpoint through the C header, scores one window and prints it. */
#include <stdio.h>
#include <stdlib.h>
#include "xnec.h"

#define N 45
#define W 16
#define H 16

int main(int argc, char **argv) {
    if (argc != 2) {
        fprintf(stderr, "usage: c_smoke MODEL\n");
        return 2;
    }
    XnecModel *missing = NULL;
    if (xnec_model_load("/nonexistent/model.xnck", &missing) != XNEC_STATUS_IO || xnec_last_error() == NULL) {
        fprintf(stderr, "missing file not reported\n");
        return 1;
    }
    XnecModel *model = NULL;
    if (xnec_model_load(argv[1], &model) != XNEC_STATUS_OK) {
        fprintf(stderr, "load: %s\n", xnec_last_error());
        return 1;
    }
    size_t window = 0;
    xnec_model_window_len(model, &window);
    static uint8_t frames[N * W * H * 3];
    static uint8_t gaze[N * W * H];
    double speed[N];
    for (size_t i = 0; i < sizeof frames; i++) frames[i] = (uint8_t)((i * 7) % 251);
    for (size_t i = 0; i < sizeof gaze; i++) gaze[i] = (uint8_t)((i * 13) % 256);
    for (int i = 0; i < N; i++) speed[i] = 10.0 - 0.1 * i;
    double score = -1.0;
    XnecStatus st = xnec_model_score(model, frames, gaze, N, W, H, 3, speed, N - 1, &score);
    if (st != XNEC_STATUS_OK) {
        fprintf(stderr, "score: %s\n", xnec_last_error());
        return 1;
    }
    if (xnec_model_score(model, frames, gaze, N, W, H, 3, speed, 3, &score) != XNEC_STATUS_MODEL) {
        fprintf(stderr, "short window accepted\n");
        return 1;
    }
    st = xnec_model_score(model, frames, gaze, N, W, H, 3, speed, N - 1, &score);
    int explain = -1;
    xnec_decide(score, 0.5, &explain);
    printf("%zu %.17g %d\n", window, score, explain);
    xnec_model_free(model);
    return st == XNEC_STATUS_OK ? 0 : 1;
}
