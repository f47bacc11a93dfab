#ifndef HISTEVENTS_H
#define HISTEVENTS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum HeStatus {
  HE_STATUS_OK = 0,
  HE_STATUS_NULL_ARGUMENT = 1,
  HE_STATUS_INVALID_UTF8 = 2,
  HE_STATUS_CONFIG = 3,
  HE_STATUS_EXTRACT = 4,
  HE_STATUS_STORE = 5,
  HE_STATUS_QUERY = 6,
  HE_STATUS_JSON = 7,
  HE_STATUS_PANIC = 8,
} HeStatus;

/**
 * Loaded language profiles.
 */
typedef struct HeProfiles HeProfiles;

/**
 * An open event store.
 */
typedef struct HeStore HeStore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *he_last_error(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void he_string_free(char *s);

/**
 * Loads the profiles compiled into the library.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
enum HeStatus he_profiles_bundled(struct HeProfiles **out);

/**
 * Parses profiles from TOML text.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be writable.
 */
enum HeStatus he_profiles_load(const char *toml, struct HeProfiles **out);

/**
 * # Safety
 * `p` must come from a profiles constructor and not be freed twice.
 */
void he_profiles_free(struct HeProfiles *p);

/**
 * Number of languages in the profile set; 0 for null.
 *
 * # Safety
 * `p` must be null or a live profiles handle.
 */
size_t he_profiles_count(const struct HeProfiles *p);

/**
 * Article title of `year` (negative for BCE) in `lang`.
 *
 * # Safety
 * Pointers must be valid; `lang` NUL-terminated.
 */
enum HeStatus he_year_title(const struct HeProfiles *profiles,
                            const char *lang,
                            int32_t year,
                            char **out);

/**
 * Extracts the events of one year article. Writes a JSON object
 * `{"events": [...], "report": {...}}`.
 *
 * # Safety
 * Pointers must be valid; strings NUL-terminated.
 */
enum HeStatus he_extract_page(const struct HeProfiles *profiles,
                              const char *lang,
                              const char *title,
                              const char *wikitext,
                              char **out_json);

/**
 * Opens or creates a store file.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` writable.
 */
enum HeStatus he_store_open(const char *path, struct HeStore **out);

/**
 * # Safety
 * `s` must come from [`he_store_open`] and not be freed twice.
 */
void he_store_free(struct HeStore *s);

/**
 * Number of stored events; 0 for null.
 *
 * # Safety
 * `s` must be null or a live store handle.
 */
size_t he_store_count(const struct HeStore *s);

/**
 * Inserts or replaces events given as a JSON array, or as the object
 * written by [`he_extract_page`]. `inserted` and `replaced` may be null.
 *
 * # Safety
 * `s` must be a live store; `json` NUL-terminated.
 */
enum HeStatus he_store_upsert(struct HeStore *s,
                              const char *json,
                              size_t *inserted,
                              size_t *replaced);

/**
 * Runs a search given as a URL query string with the parameters of the
 * HTTP API, e.g. `begin_date=19450000&end_date=19501231&format=json`.
 * `profiles` resolves localized category names and may be null.
 *
 * # Safety
 * `s` must be a live store; `query` NUL-terminated; `out` writable.
 */
enum HeStatus he_store_search(const struct HeStore *s,
                              const struct HeProfiles *profiles,
                              const char *query,
                              char **out);

/**
 * Renders every stored event as `xml`, `json` or `n3`.
 *
 * # Safety
 * `s` must be a live store; `format` NUL-terminated; `out` writable.
 */
enum HeStatus he_store_export(const struct HeStore *s,
                              const char *format,
                              bool links,
                              bool html,
                              char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HISTEVENTS_H */
