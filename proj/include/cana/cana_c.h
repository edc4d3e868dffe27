/* C interface to the cana toolkit. All functions are thread-compatible but
 * not thread-safe on the same session. Strings returned by the library are
 * owned by the caller and must be released with cana_string_free. */
#ifndef CANA_C_H
#define CANA_C_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define CANA_API __declspec(dllexport)
#else
#define CANA_API __attribute__((visibility("default")))
#endif

typedef enum cana_status {
  CANA_OK = 0,
  CANA_ERR_INVALID_ARGUMENT = 1, /* bad options / malformed JSON */
  CANA_ERR_RUNTIME = 2,          /* stage failure (message is tagged)  */
  CANA_ERR_IO = 3,               /* file could not be read or written  */
  CANA_ERR_INTERNAL = 4          /* anything else */
} cana_status;

/* Opaque session. Holds the last error message. */
typedef struct cana_session cana_session;

CANA_API cana_session* cana_session_new(void);
CANA_API void cana_session_free(cana_session* session);

/* Library version, static storage; do not free. */
CANA_API const char* cana_version(void);

/* Message of the last failing call on this session, or "" if none.
 * Valid until the next call on the session. */
CANA_API const char* cana_last_error(const cana_session* session);

/* Runs one subcommand ("pretrain", "attack", "cana-train", "metrics",
 * "detect", "defend", "pipeline") with a JSON options object. On success
 * *result_json receives a malloc'd JSON string (free with
 * cana_string_free) and CANA_OK is returned. On failure *result_json is
 * set to NULL and the error is retrievable via cana_last_error. */
CANA_API cana_status cana_run(cana_session* session, const char* command,
                              const char* options_json, char** result_json);

CANA_API void cana_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* CANA_C_H */
