#ifndef WAYPOINT_H
#define WAYPOINT_H

#include <stddef.h>
#include <stdint.h>

/*
 Result of every fallible call.
 */
typedef enum WpStatus {
  WP_STATUS_OK = 0,
  WP_STATUS_NULL_ARGUMENT = 1,
  WP_STATUS_INVALID_UTF8 = 2,
  WP_STATUS_PARSE_ERROR = 3,
  WP_STATUS_INVALID_ARGUMENT = 4,
  WP_STATUS_NO_USABLE_SIGNAL = 5,
  WP_STATUS_UNKNOWN_NODE = 6,
  WP_STATUS_UNREACHABLE = 7,
  WP_STATUS_INTERNAL = 8,
} WpStatus;

/*
 Navigation graph handle.
 */
typedef struct WpNavGraph WpNavGraph;

/*
 Radio map handle.
 */
typedef struct WpRadioMap WpRadioMap;

typedef struct WpMatcherConfig {
  uint32_t k;
  double floor_dbm;
  double missing_dbm;
  /*
   Non-zero for inverse-distance weights, zero for uniform.
   */
  uint8_t inverse_distance;
} WpMatcherConfig;

typedef struct WpPropagationParams {
  double pt_dbm;
  double gt_db;
  double gr_db;
  double wavelength_m;
  double n;
} WpPropagationParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or null. Valid until
 the next failing call on the same thread.
 */
const char *wp_last_error_message(void);

/*
 # Safety
 `s` must come from this library and not have been freed.
 */
void wp_string_free(char *s);

struct WpMatcherConfig wp_matcher_config_default(void);

struct WpPropagationParams wp_propagation_params_default(void);

/*
 # Safety
 `json` must be a nul-terminated string; `out` must be writable.
 */
enum WpStatus wp_radio_map_from_json(const char *json, struct WpRadioMap **out);

/*
 # Safety
 `map` must be null or a handle from [`wp_radio_map_from_json`] not yet freed.
 */
void wp_radio_map_free(struct WpRadioMap *map);

/*
 # Safety
 `map` must be a live handle.
 */
size_t wp_radio_map_fingerprint_count(const struct WpRadioMap *map);

/*
 Locates a scan given as `{"readings": [{"bssid", "ssid", "rssi_dbm"}]}`.
 Writes the estimate document to `out_json`.

 # Safety
 `map` must be a live handle, `config` readable, `scan_json` a
 nul-terminated string and `out_json` writable.
 */
enum WpStatus wp_locate(const struct WpRadioMap *map,
                        const struct WpMatcherConfig *config,
                        const char *scan_json,
                        char **out_json);

/*
 Loads a graph document, deriving missing weights with the given stair
 penalty per floor crossed.

 # Safety
 `json` must be a nul-terminated string; `out` must be writable.
 */
enum WpStatus wp_nav_graph_from_json(const char *json,
                                     double stair_penalty_m,
                                     struct WpNavGraph **out);

/*
 # Safety
 `graph` must be null or a handle from [`wp_nav_graph_from_json`] not yet freed.
 */
void wp_nav_graph_free(struct WpNavGraph *graph);

/*
 Shortest route; writes `{"nodes": [...], "total_m"}` to `out_json` and
 the total to `out_total_m` when it is non-null.

 # Safety
 `graph` must be a live handle, `from` and `to` nul-terminated strings,
 `out_json` writable and `out_total_m` null or writable.
 */
enum WpStatus wp_route(const struct WpNavGraph *graph,
                       const char *from,
                       const char *to,
                       char **out_json,
                       double *out_total_m);

/*
 # Safety
 `params` must be readable and `out_dbm` writable.
 */
enum WpStatus wp_received_power_dbm(const struct WpPropagationParams *params,
                                    double distance_m,
                                    double *out_dbm);

/*
 # Safety
 `params` must be readable and `out_m` writable.
 */
enum WpStatus wp_distance_from_power(const struct WpPropagationParams *params,
                                     double rssi_dbm,
                                     double *out_m);

/*
 Great-circle distance in meters between two latitude/longitude pairs.

 # Safety
 `out_m` must be writable.
 */
enum WpStatus wp_haversine_distance(double lat1,
                                    double lon1,
                                    double lat2,
                                    double lon2,
                                    double *out_m);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WAYPOINT_H */
