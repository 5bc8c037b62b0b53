#ifndef GCN_H
#define GCN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GcnStatus {
  GCN_STATUS_OK = 0,
  GCN_STATUS_NULL_POINTER = 1,
  GCN_STATUS_INVALID_UTF8 = 2,
  GCN_STATUS_IO = 3,
  GCN_STATUS_INVALID_CHECKPOINT = 4,
  GCN_STATUS_VOCAB_MISMATCH = 5,
  GCN_STATUS_INVALID_ARGUMENT = 6,
  GCN_STATUS_UNSUPPORTED = 7,
  GCN_STATUS_BUFFER_TOO_SMALL = 8,
  GCN_STATUS_PANIC = 9,
} GcnStatus;

/*
 A loaded checkpoint and its vocabulary.
 */
typedef struct GcnModel GcnModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Loads a checkpoint and the vocabulary it was trained with. On success
 `*out` receives a handle to free with [`gcn_model_free`].

 # Safety
 Paths must be NUL-terminated strings; `out` must be writable.
 */
enum GcnStatus gcn_model_load(const char *checkpoint_path,
                              const char *vocab_path,
                              struct GcnModel **out);

/*
 Releases a handle from [`gcn_model_load`]. Null is ignored.

 # Safety
 `model` must come from [`gcn_model_load`] and not be used afterwards.
 */
void gcn_model_free(struct GcnModel *model);

/*
 Classifies raw text: probability of the positive class and the 0/1 label.
 Either output pointer may be null.

 # Safety
 `text` must be a NUL-terminated string; non-null outputs must be writable.
 */
enum GcnStatus gcn_model_predict_text(const struct GcnModel *model,
                                      const char *text,
                                      double *out_prob,
                                      uint8_t *out_label);

/*
 Classifies a sequence of vocabulary indices (0 is padding). Shorter
 sequences are padded and longer ones truncated to the model's input length.

 # Safety
 `indices` must point to `len` readable values.
 */
enum GcnStatus gcn_model_predict_indices(const struct GcnModel *model,
                                         const uint32_t *indices,
                                         uintptr_t len,
                                         double *out_prob,
                                         uint8_t *out_label);

/*
 Input length the model pads and truncates to, or 0 for a null handle.

 # Safety
 `model` must be null or a live handle.
 */
uintptr_t gcn_model_max_len(const struct GcnModel *model);

/*
 Trainable scalars outside the embedding table, or 0 for a null handle.

 # Safety
 `model` must be null or a live handle.
 */
uintptr_t gcn_model_param_count(const struct GcnModel *model);

/*
 `"glu"`, `"gtu"`, `"gtru"` or `"none"`; null for a null handle. The string
 lives as long as the model.

 # Safety
 `model` must be null or a live handle.
 */
const char *gcn_model_gate_kind(const struct GcnModel *model);

/*
 Per-position mean gate activation of convolution branch `branch` for
 `text`. Writes up to `capacity` values to `out` and the model's input
 length to `*out_len`; returns `BufferTooSmall` if `capacity` is smaller.

 # Safety
 `out` must have room for `capacity` values; `out_len` must be writable.
 */
enum GcnStatus gcn_model_gate_means(const struct GcnModel *model,
                                    const char *text,
                                    uintptr_t branch,
                                    double *out,
                                    uintptr_t capacity,
                                    uintptr_t *out_len);

/*
 Message for the most recent failure on this thread; empty if none. Valid
 until the next failing call on the same thread.
 */
const char *gcn_last_error_message(void);

/*
 Library version as a static string.
 */
const char *gcn_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GCN_H */
