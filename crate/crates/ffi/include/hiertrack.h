#ifndef HIERTRACK_H
#define HIERTRACK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum HtStatus {
  HT_STATUS_OK = 0,
  HT_STATUS_NULL_ARGUMENT = 1,
  HT_STATUS_INVALID_UTF8 = 2,
  HT_STATUS_IO = 3,
  HT_STATUS_PARSE = 4,
  HT_STATUS_VALIDATION = 5,
  HT_STATUS_INTERNAL = 6,
} HtStatus;

/**
 * Loaded detections, features, homographies and configuration.
 */
typedef struct HtSequence HtSequence;

/**
 * A set of tracks, either produced by tracking or read from a MOT file.
 */
typedef struct HtTrackSet HtTrackSet;

/**
 * Trained scorer weights.
 */
typedef struct HtWeights HtWeights;

/**
 * Summary metrics, as percentages in [0, 100].
 */
typedef struct HtMetrics {
  double hota;
  double deta;
  double assa;
} HtMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none failed yet.
 *
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *ht_last_error_message(void);

/**
 * Frames covered by one window of a hierarchy with `levels` levels.
 */
uint32_t ht_max_temporal_span(uint32_t levels);

/**
 * Loads a sequence. `detections` and `features` are required; the other paths may
 * be null. Without a config file the default configuration is used.
 *
 * # Safety
 * Non-null path arguments must be NUL-terminated strings; `out` must be writable.
 */
enum HtStatus ht_sequence_load(const char *detections,
                               const char *features,
                               const char *homographies,
                               const char *gt,
                               const char *config,
                               const char *seqinfo,
                               struct HtSequence **out);

/**
 * Number of detections in a loaded sequence; 0 for a null handle.
 *
 * # Safety
 * `seq` must be null or a live handle.
 */
size_t ht_sequence_num_detections(const struct HtSequence *seq);

/**
 * # Safety
 * `seq` must be null or a handle not yet freed.
 */
void ht_sequence_free(struct HtSequence *seq);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum HtStatus ht_weights_load(const char *path, struct HtWeights **out);

/**
 * # Safety
 * `weights` must be null or a handle not yet freed.
 */
void ht_weights_free(struct HtWeights *weights);

/**
 * Tracks a sequence with the given weights.
 *
 * # Safety
 * `seq` and `weights` must be live handles; `out` must be writable.
 */
enum HtStatus ht_track(const struct HtSequence *seq,
                       const struct HtWeights *weights,
                       struct HtTrackSet **out);

/**
 * Reads tracks from a MOT-format file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum HtStatus ht_trackset_read_mot(const char *path, struct HtTrackSet **out);

/**
 * # Safety
 * `tracks` must be a live handle; `path` a NUL-terminated string.
 */
enum HtStatus ht_trackset_write_mot(const struct HtTrackSet *tracks, const char *path);

/**
 * Number of tracks; 0 for a null handle.
 *
 * # Safety
 * `tracks` must be null or a live handle.
 */
size_t ht_trackset_num_tracks(const struct HtTrackSet *tracks);

/**
 * Number of track points over all tracks; 0 for a null handle.
 *
 * # Safety
 * `tracks` must be null or a live handle.
 */
size_t ht_trackset_len(const struct HtTrackSet *tracks);

/**
 * # Safety
 * `tracks` must be null or a handle not yet freed.
 */
void ht_trackset_free(struct HtTrackSet *tracks);

/**
 * Scores `pred` against `gt`.
 *
 * # Safety
 * `pred` and `gt` must be live handles; `out` must be writable.
 */
enum HtStatus ht_evaluate(const struct HtTrackSet *pred,
                          const struct HtTrackSet *gt,
                          struct HtMetrics *out);

/**
 * Jersey number vector from two character-confidence arrays of 11 entries each
 * (EOL first, then digits 0-9). Writes 100 values to `out` and the legibility flag.
 *
 * # Safety
 * `c1` and `c2` must point to 11 floats, `out` to room for 100, `legible` to a bool.
 */
enum HtStatus ht_jersey_vector(const float *c1, const float *c2, float *out, bool *legible);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HIERTRACK_H */
