/* Classify sentences with a trained checkpoint.
 *
 *   cc predict.c -I../include -L../../../target/release -lgcn_ffi -o predict
 *   ./predict model.gcnc vocab.json "a sentence to score"
 */
#include <stdio.h>

#include "gcn.h"

int main(int argc, char **argv) {
    if (argc < 4) {
        fprintf(stderr, "usage: %s CHECKPOINT VOCAB TEXT...\n", argv[0]);
        return 2;
    }
    GcnModel *model = NULL;
    if (gcn_model_load(argv[1], argv[2], &model) != GCN_STATUS_OK) {
        fprintf(stderr, "load failed: %s\n", gcn_last_error_message());
        return 1;
    }
    printf("gcn %s, gate %s, %zu parameters\n", gcn_version(), gcn_model_gate_kind(model),
           (size_t)gcn_model_param_count(model));
    for (int i = 3; i < argc; i++) {
        double prob = 0.0;
        uint8_t label = 0;
        if (gcn_model_predict_text(model, argv[i], &prob, &label) != GCN_STATUS_OK) {
            fprintf(stderr, "predict failed: %s\n", gcn_last_error_message());
            gcn_model_free(model);
            return 1;
        }
        printf("%d\t%.6f\t%s\n", label, prob, argv[i]);
    }
    gcn_model_free(model);
    return 0;
}
