#ifndef NETCUBE_H
#define NETCUBE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum NetcubeStatus {
  NETCUBE_STATUS_OK = 0,
  NETCUBE_STATUS_NULL_ARGUMENT = 1,
  NETCUBE_STATUS_INVALID_UTF8 = 2,
  NETCUBE_STATUS_LOAD_FAILED = 3,
  NETCUBE_STATUS_BAD_REQUEST = 4,
  NETCUBE_STATUS_NOT_FOUND = 5,
  NETCUBE_STATUS_UNKNOWN_ENDPOINT = 6,
  NETCUBE_STATUS_PANIC = 7,
} NetcubeStatus;

// Opaque engine handle.
typedef struct NetcubeEngine NetcubeEngine;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Loads a snapshot file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum NetcubeStatus netcube_engine_open(const char *path, struct NetcubeEngine **out);

// Builds an engine in memory from a build config file.
//
// # Safety
// `config_path` must be a NUL-terminated string and `out` a writable pointer.
enum NetcubeStatus netcube_engine_build(const char *config_path, struct NetcubeEngine **out);

// Releases an engine. Null is ignored.
//
// # Safety
// `engine` must come from this library and not be used afterwards.
void netcube_engine_free(struct NetcubeEngine *engine);

// Node and edge counts of the base network.
//
// # Safety
// `engine` must be a live handle; the out pointers must be writable.
enum NetcubeStatus netcube_engine_counts(const struct NetcubeEngine *engine,
                                         uint64_t *nodes,
                                         uint64_t *edges);

// Runs one endpoint. `cell` may be null (top cell); `request_json` may be
// null (defaults). On success and on request errors `*out_json` receives a
// JSON document (the response or `{"code", "message"}`) that must be
// released with [`netcube_string_free`].
//
// Endpoints: `dimensions`, `summary`, `patterns`, `prox`, `embed`,
// `rollup`, `drilldown`, `backtrack`, `localize`, `contrast`.
//
// # Safety
// `engine` must be a live handle, string arguments NUL-terminated, and
// `out_json` writable.
enum NetcubeStatus netcube_query(const struct NetcubeEngine *engine,
                                 const char *endpoint,
                                 const char *cell,
                                 const char *request_json,
                                 char **out_json);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void netcube_string_free(char *s);

// Message of the last failure on this thread; empty if none. Valid until
// the next call into the library from the same thread.
const char *netcube_last_error(void);

// Library version, static storage.
const char *netcube_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NETCUBE_H */
