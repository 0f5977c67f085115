#ifndef BEDS_H
#define BEDS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of every fallible call.
 */
typedef enum BedsStatus {
  BEDS_STATUS_OK = 0,
  BEDS_STATUS_NULL_POINTER = 1,
  BEDS_STATUS_INVALID_ARGUMENT = 2,
  BEDS_STATUS_NO_FEASIBLE_DAY = 3,
  BEDS_STATUS_DAY_NOT_FEASIBLE = 4,
  BEDS_STATUS_INSUFFICIENT_HOURS = 5,
  BEDS_STATUS_INTERNAL = 99,
} BedsStatus;

/*
 Opaque ledger handle.
 */
typedef struct BedsState BedsState;

/*
 Calendar date.
 */
typedef struct BedsDate {
  int32_t year;
  uint32_t month;
  uint32_t day;
} BedsDate;

/*
 A surgery request. Both windows are inclusive.
 */
typedef struct BedsRequest {
  const char *patient_id;
  const char *surgeon_id;
  double duration_hours;
  struct BedsDate clinical_start;
  struct BedsDate clinical_end;
  struct BedsDate patient_start;
  struct BedsDate patient_end;
  const char *post_op_unit;
} BedsRequest;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread; empty after success.
 */
const char *beds_last_error(void);

/*
 Library version as a static string.
 */
const char *beds_version(void);

/*
 A new, empty ledger. Never returns null.
 */
struct BedsState *beds_state_new(void);

/*
 Releases a ledger. Null is ignored.

 # Safety
 `state` must come from this library and not be used afterwards.
 */
void beds_state_free(struct BedsState *state);

/*
 Ledger from a snapshot JSON document.

 # Safety
 `json` must be a NUL-terminated string; `out` must be writable.
 */
enum BedsStatus beds_state_from_json(const char *json, struct BedsState **out_state);

/*
 Snapshot JSON of the ledger. Free the result with `beds_string_free`.

 # Safety
 `state` must be a live handle; `out_json` must be writable.
 */
enum BedsStatus beds_state_to_json(const struct BedsState *state, char **out_json);

/*
 # Safety
 `s` must be null or a string returned by this library.
 */
void beds_string_free(char *s);

/*
 Sets a surgeon's available hours on a day, replacing any previous value.

 # Safety
 `state` must be a live handle; `surgeon` a NUL-terminated string.
 */
enum BedsStatus beds_state_set_hours(struct BedsState *state,
                                     struct BedsDate on,
                                     const char *surgeon,
                                     double available_hours);

/*
 Records an existing admission to `unit` on a day.

 # Safety
 `state` must be a live handle; `unit` a NUL-terminated string.
 */
enum BedsStatus beds_state_add_admission(struct BedsState *state,
                                         struct BedsDate on,
                                         const char *unit);

/*
 # Safety
 `state` must be a live handle; `surgeon` a NUL-terminated string;
 `out_hours` writable.
 */
enum BedsStatus beds_state_hours(const struct BedsState *state,
                                 struct BedsDate on,
                                 const char *surgeon,
                                 double *out_hours);

/*
 # Safety
 `state` must be a live handle; `unit` a NUL-terminated string;
 `out_count` writable.
 */
enum BedsStatus beds_state_admissions(const struct BedsState *state,
                                      struct BedsDate on,
                                      const char *unit,
                                      uint32_t *out_count);

/*
 Sequence number of the latest booking, 0 for none.

 # Safety
 `state` must be null or a live handle.
 */
uint64_t beds_state_version(const struct BedsState *state);

/*
 The feasible day with the fewest admissions to the post-op unit, earliest
 on ties.

 # Safety
 `state` must be a live handle; `req` a valid request; `out_day` writable.
 */
enum BedsStatus beds_recommend(const struct BedsState *state,
                               const struct BedsRequest *req,
                               struct BedsDate *out_day);

/*
 Up to `capacity` feasible days ranked by the named policy
 (`fewest-admissions`, `earliest`, `weighted-wait`). `out_len` receives the
 number written.

 # Safety
 `state` must be a live handle; `req` a valid request; `policy` a
 NUL-terminated string; `out_days` must hold `capacity` dates.
 */
enum BedsStatus beds_recommend_ranked(const struct BedsState *state,
                                      const struct BedsRequest *req,
                                      const char *policy,
                                      struct BedsDate *out_days,
                                      size_t capacity,
                                      size_t *out_len);

/*
 Books the request on `on` after re-checking the window and the surgeon's
 hours. `out_sequence` (may be null) receives the booking's sequence number.

 # Safety
 `state` must be a live handle; `req` a valid request.
 */
enum BedsStatus beds_book(struct BedsState *state,
                          const struct BedsRequest *req,
                          struct BedsDate on,
                          uint64_t *out_sequence);

/*
 Reschedulable window for a case that arrived on `arrival`, had surgery on
 `surgery` and was admitted on `admission`, scaled by `alpha`.

 # Safety
 `out_start` and `out_end` must be writable.
 */
enum BedsStatus beds_available_window(struct BedsDate arrival,
                                      struct BedsDate surgery,
                                      struct BedsDate admission,
                                      double alpha,
                                      struct BedsDate *out_start,
                                      struct BedsDate *out_end);

/*
 Human-readable name of a status code. Static; do not free.
 */
const char *beds_status_name(enum BedsStatus status);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* BEDS_H */
