#ifndef AXE_H
#define AXE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result codes.
 */
typedef enum AxeStatus {
  AXE_STATUS_OK = 0,
  /*
   Output was produced but a model response could not be parsed.
   */
  AXE_STATUS_DEGRADED = 1,
  AXE_STATUS_NULL_POINTER = 2,
  AXE_STATUS_INVALID_UTF8 = 3,
  /*
   Bad schema, XPath, budget or other argument.
   */
  AXE_STATUS_INVALID_ARGUMENT = 4,
  AXE_STATUS_CONFIG = 5,
  AXE_STATUS_PARSE = 6,
  /*
   The model endpoint failed or a scripted response was missing.
   */
  AXE_STATUS_CLIENT = 7,
  AXE_STATUS_IO = 8,
  /*
   A Rust panic was caught at the boundary.
   */
  AXE_STATUS_INTERNAL = 9,
} AxeStatus;

/*
 A parsed page, with its noise-stripped tree indexed for grounding.
 */
typedef struct AxeDocument AxeDocument;

/*
 A configured pipeline with its model client.
 */
typedef struct AxePipeline AxePipeline;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or NULL. Valid until the
 next failing call on the same thread; do not free.
 */
const char *axe_last_error(void);

/*
 Library version as a static string; do not free.
 */
const char *axe_version(void);

/*
 Releases a string returned by this library. NULL is ignored.

 # Safety
 `s` must come from this library and not have been freed.
 */
void axe_string_free(char *s);

/*
 Parses `html` into a new document handle stored in `*out`.

 # Safety
 `html` must be a valid C string and `out` a valid pointer.
 */
enum AxeStatus axe_document_parse(const char *html, struct AxeDocument **out);

/*
 # Safety
 `doc` must come from [`axe_document_parse`] and not have been freed.
 */
void axe_document_free(struct AxeDocument *doc);

/*
 Whitespace-collapsed visible text of the whole page.

 # Safety
 Pointers must be valid; `*out` receives a string to free with
 [`axe_string_free`].
 */
enum AxeStatus axe_document_visible_text(const struct AxeDocument *doc, char **out);

/*
 Locates the text chunk closest to `search` in the noise-stripped page.
 `*out` receives a JSON object `{"found", "text", "xpath", "sub_index",
 "score"}`. `lexicographic` selects the (similarity, overlap) acceptance
 order instead of the default rule.

 # Safety
 Pointers must be valid; free `*out` with [`axe_string_free`].
 */
enum AxeStatus axe_document_ground(const struct AxeDocument *doc,
                                   const char *search,
                                   bool lexicographic,
                                   char **out);

/*
 Builds a pipeline from a TOML configuration string (NULL for defaults),
 layered over `AXE_*` environment variables.

 # Safety
 `config_toml` must be NULL or a valid C string; `out` must be valid.
 */
enum AxeStatus axe_pipeline_new(const char *config_toml, struct AxePipeline **out);

/*
 # Safety
 `pipeline` must come from [`axe_pipeline_new`] and not have been freed.
 */
void axe_pipeline_free(struct AxePipeline *pipeline);

/*
 Fills a flat JSON schema (`{"key": "", ...}`) from `html`. `*out` receives
 the filled object, with a `_grounding` member unless grounding is off.

 # Safety
 Pointers must be valid; free `*out` with [`axe_string_free`].
 */
enum AxeStatus axe_pipeline_extract(const struct AxePipeline *pipeline,
                                    const char *html,
                                    const char *schema_json,
                                    char **out);

/*
 Answers `question` about `html`; `*out` receives `{"answer": ...}`.

 # Safety
 Pointers must be valid; free `*out` with [`axe_string_free`].
 */
enum AxeStatus axe_pipeline_qa(const struct AxePipeline *pipeline,
                               const char *html,
                               const char *question,
                               char **out);

/*
 Prunes `html` for `query`. `*out` receives `{"distilled_html",
 "kept_xpaths", "tokens_before", "tokens_after", "fail_open_batches"}`.

 # Safety
 Pointers must be valid; free `*out` with [`axe_string_free`].
 */
enum AxeStatus axe_pipeline_prune(const struct AxePipeline *pipeline,
                                  const char *html,
                                  const char *query,
                                  char **out);

/*
 Ratcliff-Obershelp similarity of two strings.

 # Safety
 Pointers must be valid.
 */
enum AxeStatus axe_gestalt_ratio(const char *a, const char *b, double *out);

/*
 SQuAD-style token F1 of `prediction` (NULL for no value) against one
 gold answer (NULL for no value).

 # Safety
 Non-NULL strings must be valid; `out` must be valid.
 */
enum AxeStatus axe_token_f1(const char *prediction, const char *gold, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AXE_H */
