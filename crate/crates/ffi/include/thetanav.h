#ifndef THETANAV_H
#define THETANAV_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ThnStatus {
  THN_STATUS_OK = 0,
  THN_STATUS_NULL_POINTER = 1,
  THN_STATUS_INVALID_ARGUMENT = 2,
  THN_STATUS_PARSE = 3,
  THN_STATUS_IO = 4,
  THN_STATUS_BUFFER_TOO_SMALL = 5,
  THN_STATUS_COMPILE = 6,
  THN_STATUS_TRACKING = 7,
  THN_STATUS_CHIP = 8,
  THN_STATUS_PANIC = 99,
} ThnStatus;

/**
 * Emulated chip with its sampled population.
 */
typedef struct ThnChip ThnChip;

/**
 * Run configuration.
 */
typedef struct ThnConfig ThnConfig;

/**
 * Outcome of a tracking run.
 */
typedef struct ThnTrackResult ThnTrackResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread. The pointer is
 * valid until the next call into this library from the same thread.
 */
const char *thn_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *thn_version(void);

/**
 * Total interference nodes for `m` inputs grouped by `n` serving `k` networks.
 *
 * # Safety
 * `out` must be a valid pointer to writable memory.
 */
enum ThnStatus thn_total_nodes(uint64_t m, uint32_t n, uint64_t k, uint64_t *out);

/**
 * Nodes shared across networks for `m` inputs grouped by `n`.
 *
 * # Safety
 * `out` must be a valid pointer to writable memory.
 */
enum ThnStatus thn_sharable_nodes(uint64_t m, uint32_t n, uint64_t *out);

/**
 * Creates a default configuration.
 *
 * # Safety
 * `out` must be a valid pointer; on success it receives a handle to free
 * with [`thn_config_free`].
 */
enum ThnStatus thn_config_new(struct ThnConfig **out);

/**
 * Parses a TOML configuration.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ThnStatus thn_config_from_toml(const char *toml, struct ThnConfig **out);

/**
 * # Safety
 * `cfg` must be a handle from this library or null.
 */
enum ThnStatus thn_config_set_seed(struct ThnConfig *cfg, uint64_t seed);

/**
 * # Safety
 * `cfg` must be a handle from this library or null; it must not be used afterwards.
 */
void thn_config_free(struct ThnConfig *cfg);

/**
 * Runs a built-in script by name, or a TOML script given inline.
 *
 * # Safety
 * `cfg` must be a valid handle, `script` a NUL-terminated string and `out`
 * a valid pointer; the result is freed with [`thn_track_free`].
 */
enum ThnStatus thn_track_run(const struct ThnConfig *cfg,
                             const char *script,
                             struct ThnTrackResult **out);

/**
 * Final bump location.
 *
 * # Safety
 * `r` must be a valid handle and `x`, `y` valid pointers.
 */
enum ThnStatus thn_track_final(const struct ThnTrackResult *r, int32_t *x, int32_t *y);

/**
 * Number of migration events.
 *
 * # Safety
 * `r` must be a valid handle or null.
 */
size_t thn_track_event_count(const struct ThnTrackResult *r);

/**
 * Event `i` as a tick and a direction letter (`E`, `N`, `W` or `S`).
 *
 * # Safety
 * `r` must be a valid handle and `tick`, `dir` valid pointers.
 */
enum ThnStatus thn_track_event(const struct ThnTrackResult *r, size_t i, uint64_t *tick, char *dir);

/**
 * # Safety
 * `r` must be a handle from this library or null; it must not be used afterwards.
 */
void thn_track_free(struct ThnTrackResult *r);

/**
 * Samples the configured population onto a new chip held in Clear.
 *
 * # Safety
 * `cfg` must be a valid handle and `out` a valid pointer; the chip is freed
 * with [`thn_chip_free`].
 */
enum ThnStatus thn_chip_new(const struct ThnConfig *cfg, struct ThnChip **out);

/**
 * Asserts Clear, wiping the programming.
 *
 * # Safety
 * `chip` must be a valid handle or null.
 */
enum ThnStatus thn_chip_clear(struct ThnChip *chip);

/**
 * Loads a serial programming stream of `len` bits, one bit per byte.
 *
 * # Safety
 * `chip` must be a valid handle and `bits` must point to `len` readable bytes.
 */
enum ThnStatus thn_chip_program(struct ThnChip *chip, const uint8_t *bits, size_t len);

/**
 * Number of phases in one scan cycle.
 *
 * # Safety
 * `chip` must be a valid handle or null.
 */
size_t thn_chip_enabled_phases(const struct ThnChip *chip);

/**
 * Zeroes and releases all oscillator phases.
 *
 * # Safety
 * `chip` must be a valid handle or null.
 */
enum ThnStatus thn_chip_reset(struct ThnChip *chip);

/**
 * Scans `n_cycles` at velocity (`vx`, `vy`) into `out`, one bit per byte.
 * `written` receives the number of bytes produced. Fails with
 * `BufferTooSmall` without advancing the chip if `cap` is insufficient.
 *
 * # Safety
 * `chip` must be a valid handle, `out` must point to `cap` writable bytes
 * and `written` must be a valid pointer.
 */
enum ThnStatus thn_chip_scan(struct ThnChip *chip,
                             double vx,
                             double vy,
                             size_t n_cycles,
                             uint8_t *out,
                             size_t cap,
                             size_t *written);

/**
 * # Safety
 * `chip` must be a handle from this library or null; it must not be used afterwards.
 */
void thn_chip_free(struct ThnChip *chip);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* THETANAV_H */
