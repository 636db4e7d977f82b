#ifndef SKETCHLINK_H
#define SKETCHLINK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Anchor kinds as C values. Matches the leading digit of the text form.
 */
#define SL_KIND_SOURCE_CODE 0

#define SL_KIND_SKETCH 1

#define SL_KIND_MARKER 2

typedef enum SlStatus {
  SL_STATUS_OK = 0,
  SL_STATUS_NULL_ARGUMENT = 1,
  SL_STATUS_INVALID_UTF8 = 2,
  SL_STATUS_INVALID_ANCHOR = 3,
  SL_STATUS_NOT_FOUND = 4,
  SL_STATUS_IO = 5,
  SL_STATUS_SCAN = 6,
  SL_STATUS_EDIT = 7,
  SL_STATUS_LINK = 8,
  SL_STATUS_SKETCH = 9,
  SL_STATUS_UNSUPPORTED = 10,
  SL_STATUS_PANIC = 99,
} SlStatus;

/**
 * A scanned project.
 */
typedef struct SlIndex SlIndex;

/**
 * The link store of a data directory.
 */
typedef struct SlLinkStore SlLinkStore;

/**
 * One sketch document loaded from a data directory.
 */
typedef struct SlSketch SlSketch;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Free with
 * `sl_string_free`.
 */
char *sl_last_error(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, freed once.
 */
void sl_string_free(char *s);

/**
 * Library version; static, do not free.
 */
const char *sl_version(void);

/**
 * Generates a fresh anchor of `kind` into `*out`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum SlStatus sl_anchor_new(uint32_t kind, char **out);

/**
 * Parses `text`; on success writes its kind to `*kind` (may be NULL).
 *
 * # Safety
 * `text` must be a NUL-terminated string; `kind` NULL or valid for writes.
 */
enum SlStatus sl_anchor_parse(const char *text, uint32_t *kind);

/**
 * Scans `root` with default ignore rules. `project` may be NULL.
 *
 * # Safety
 * String arguments must be NUL-terminated; `out` valid for writes.
 */
enum SlStatus sl_index_scan(const char *root, const char *project, struct SlIndex **out);

/**
 * # Safety
 * `index` must be NULL or a handle from `sl_index_scan`, freed once.
 */
void sl_index_free(struct SlIndex *index);

/**
 * Number of anchor occurrences, or 0 for NULL.
 *
 * # Safety
 * `index` must be NULL or a live handle.
 */
size_t sl_index_anchor_count(const struct SlIndex *index);

/**
 * The `scan --json` document.
 *
 * # Safety
 * `index` must be a live handle; `out` valid for writes.
 */
enum SlStatus sl_index_to_json(const struct SlIndex *index, char **out);

/**
 * JSON `{path, occurrence..., referent}` for one anchor.
 *
 * # Safety
 * `index` must be a live handle; `anchor` NUL-terminated; `out` valid for
 * writes.
 */
enum SlStatus sl_index_find(const struct SlIndex *index, const char *anchor, char **out);

/**
 * Inserts `anchor` so it refers to `line` of `text`. `path` only selects
 * the language profile.
 *
 * # Safety
 * String arguments must be NUL-terminated; `out` valid for writes.
 */
enum SlStatus sl_insert_anchor(const char *path,
                               const char *text,
                               size_t line,
                               const char *anchor,
                               char **out);

/**
 * Removes every occurrence of `anchor` from `text`.
 *
 * # Safety
 * String arguments must be NUL-terminated; `out` valid for writes.
 */
enum SlStatus sl_remove_anchor(const char *path, const char *text, const char *anchor, char **out);

/**
 * Loads the sketch `anchor` (a sketch or marker anchor) from `data_dir`.
 *
 * # Safety
 * String arguments must be NUL-terminated; `out` valid for writes.
 */
enum SlStatus sl_sketch_load(const char *data_dir, const char *anchor, struct SlSketch **out);

/**
 * # Safety
 * `sketch` must be NULL or a handle from `sl_sketch_load`, freed once.
 */
void sl_sketch_free(struct SlSketch *sketch);

/**
 * # Safety
 * `sketch` must be NULL or a live handle.
 */
size_t sl_sketch_marker_count(const struct SlSketch *sketch);

/**
 * The document as JSON.
 *
 * # Safety
 * `sketch` must be a live handle; `out` valid for writes.
 */
enum SlStatus sl_sketch_to_json(const struct SlSketch *sketch, char **out);

/**
 * The canonical SVG text.
 *
 * # Safety
 * `sketch` must be a live handle; `out` valid for writes.
 */
enum SlStatus sl_sketch_to_svg(const struct SlSketch *sketch, char **out);

/**
 * Opens the link store in `data_dir`; a missing file gives an empty store.
 *
 * # Safety
 * `data_dir` must be NUL-terminated; `out` valid for writes.
 */
enum SlStatus sl_links_open(const char *data_dir, struct SlLinkStore **out);

/**
 * # Safety
 * `store` must be NULL or a handle from `sl_links_open`, freed once.
 */
void sl_links_free(struct SlLinkStore *store);

/**
 * # Safety
 * `store` must be NULL or a live handle.
 */
size_t sl_links_count(const struct SlLinkStore *store);

/**
 * JSON array of the links touching `anchor`, newest first.
 *
 * # Safety
 * `store` must be a live handle; `anchor` NUL-terminated; `out` valid for
 * writes.
 */
enum SlStatus sl_links_of(const struct SlLinkStore *store, const char *anchor, char **out);

/**
 * Creates a link and saves the store. Sketch and marker ends must exist in
 * the data directory; source ends must be in `index` or already recorded.
 * `*created` (may be NULL) tells whether the link is new.
 *
 * # Safety
 * `store` and `index` must be live handles; anchors NUL-terminated;
 * `created` NULL or valid for writes.
 */
enum SlStatus sl_links_create(struct SlLinkStore *store,
                              const struct SlIndex *index,
                              const char *a,
                              const char *b,
                              bool *created);

/**
 * Removes a link and saves the store. `*removed` may be NULL.
 *
 * # Safety
 * `store` must be a live handle; anchors NUL-terminated; `removed` NULL or
 * valid for writes.
 */
enum SlStatus sl_links_remove(struct SlLinkStore *store,
                              const char *a,
                              const char *b,
                              bool *removed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SKETCHLINK_H */
