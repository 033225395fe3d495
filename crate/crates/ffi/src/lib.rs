//! C ABI for waypoint.
//!
//! Objects cross the boundary as opaque handles created by `*_from_json`
//! and released by the matching `*_free`. Every fallible call returns a
//! [`WpStatus`]; on failure [`wp_last_error_message`] describes the error.
//! Strings returned through `out_json` parameters are owned by the caller
//! and must be released with [`wp_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use waypoint::localization::{LocateError, MatcherConfig, Weighting, DEFAULT_K, DEFAULT_MISSING_DBM};
use waypoint::navgraph::{GraphConfig, GraphError, GraphLoadError};
use waypoint::radiomap::DEFAULT_FLOOR_DBM;
use waypoint::wire::{LocateRequest, RouteResponse};
use waypoint::{GeoPoint, NavGraph, PropagationParams, RadioMap, RssiDbm};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WpStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidArgument = 4,
    NoUsableSignal = 5,
    UnknownNode = 6,
    Unreachable = 7,
    Internal = 8,
}

/// Radio map handle.
pub struct WpRadioMap(RadioMap);

/// Navigation graph handle.
pub struct WpNavGraph(NavGraph);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WpMatcherConfig {
    pub k: u32,
    pub floor_dbm: f64,
    pub missing_dbm: f64,
    /// Non-zero for inverse-distance weights, zero for uniform.
    pub inverse_distance: u8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WpPropagationParams {
    pub pt_dbm: f64,
    pub gt_db: f64,
    pub gr_db: f64,
    pub wavelength_m: f64,
    pub n: f64,
}

impl From<WpPropagationParams> for PropagationParams {
    fn from(p: WpPropagationParams) -> Self {
        Self {
            pt_dbm: p.pt_dbm,
            gt_db: p.gt_db,
            gr_db: p.gr_db,
            wavelength_m: p.wavelength_m,
            n: p.n,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(WpStatus, String);

fn fail<T>(status: WpStatus, message: impl ToString) -> Result<T, Failure> {
    Err(Failure(status, message.to_string()))
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> WpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WpStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal error: panic".into());
            WpStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return fail(WpStatus::NullArgument, format!("{name} is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(WpStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure(WpStatus::NullArgument, format!("{name} is null")))
}

fn out_arg<T>(p: *mut T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        fail(WpStatus::NullArgument, format!("{name} is null"))
    } else {
        Ok(())
    }
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .or_else(|_| fail(WpStatus::Internal, "output contains a nul byte"))
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn wp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn wp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[no_mangle]
pub extern "C" fn wp_matcher_config_default() -> WpMatcherConfig {
    WpMatcherConfig {
        k: DEFAULT_K as u32,
        floor_dbm: DEFAULT_FLOOR_DBM,
        missing_dbm: DEFAULT_MISSING_DBM,
        inverse_distance: 1,
    }
}

#[no_mangle]
pub extern "C" fn wp_propagation_params_default() -> WpPropagationParams {
    let p = PropagationParams::default();
    WpPropagationParams {
        pt_dbm: p.pt_dbm,
        gt_db: p.gt_db,
        gr_db: p.gr_db,
        wavelength_m: p.wavelength_m,
        n: p.n,
    }
}

/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wp_radio_map_from_json(json: *const c_char, out: *mut *mut WpRadioMap) -> WpStatus {
    guard(|| {
        out_arg(out, "out")?;
        let text = str_arg(json, "json")?;
        let map = RadioMap::from_json(text).map_err(|e| Failure(WpStatus::ParseError, e.to_string()))?;
        *out = Box::into_raw(Box::new(WpRadioMap(map)));
        Ok(())
    })
}

/// # Safety
/// `map` must be null or a handle from [`wp_radio_map_from_json`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wp_radio_map_free(map: *mut WpRadioMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// # Safety
/// `map` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn wp_radio_map_fingerprint_count(map: *const WpRadioMap) -> usize {
    map.as_ref().map_or(0, |m| m.0.fingerprints().len())
}

/// Locates a scan given as `{"readings": [{"bssid", "ssid", "rssi_dbm"}]}`.
/// Writes the estimate document to `out_json`.
///
/// # Safety
/// `map` must be a live handle, `config` readable, `scan_json` a
/// nul-terminated string and `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn wp_locate(
    map: *const WpRadioMap,
    config: *const WpMatcherConfig,
    scan_json: *const c_char,
    out_json: *mut *mut c_char,
) -> WpStatus {
    guard(|| {
        out_arg(out_json, "out_json")?;
        let map = ref_arg(map, "map")?;
        let c = ref_arg(config, "config")?;
        let dbm = |v: f64, name: &str| RssiDbm::new(v).map_err(|e| Failure(WpStatus::InvalidArgument, format!("{name}: {e}")));
        let config = MatcherConfig {
            k: c.k as usize,
            floor_dbm: dbm(c.floor_dbm, "floor_dbm")?,
            missing_dbm: dbm(c.missing_dbm, "missing_dbm")?,
            weighting: if c.inverse_distance != 0 {
                Weighting::InverseDistance
            } else {
                Weighting::Uniform
            },
        };
        let text = str_arg(scan_json, "scan_json")?;
        let req: LocateRequest = serde_json::from_str(text).map_err(|e| Failure(WpStatus::ParseError, e.to_string()))?;
        let scan = req
            .into_scan()
            .map_err(|e| Failure(WpStatus::InvalidArgument, format!("{}: {}", e.path, e.message)))?;
        let est = waypoint::locate(&map.0, &scan, &config).map_err(|e| {
            let status = match e {
                LocateError::NoUsableSignal => WpStatus::NoUsableSignal,
                LocateError::Config(_) => WpStatus::InvalidArgument,
                _ => WpStatus::Internal,
            };
            Failure(status, e.to_string())
        })?;
        *out_json = into_c_string(serde_json::to_string(&est).expect("estimate serializes"))?;
        Ok(())
    })
}

/// Loads a graph document, deriving missing weights with the given stair
/// penalty per floor crossed.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wp_nav_graph_from_json(json: *const c_char, stair_penalty_m: f64, out: *mut *mut WpNavGraph) -> WpStatus {
    guard(|| {
        out_arg(out, "out")?;
        let text = str_arg(json, "json")?;
        if !(stair_penalty_m.is_finite() && stair_penalty_m >= 0.0) {
            return fail(WpStatus::InvalidArgument, format!("stair penalty {stair_penalty_m} must be finite and >= 0"));
        }
        let g = NavGraph::from_json(text, &GraphConfig { stair_penalty_m }).map_err(|e| match e {
            GraphLoadError::Document(d) => Failure(WpStatus::ParseError, d.to_string()),
            GraphLoadError::Graph(g) => Failure(WpStatus::InvalidArgument, g.to_string()),
        })?;
        *out = Box::into_raw(Box::new(WpNavGraph(g)));
        Ok(())
    })
}

/// # Safety
/// `graph` must be null or a handle from [`wp_nav_graph_from_json`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wp_nav_graph_free(graph: *mut WpNavGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Shortest route; writes `{"nodes": [...], "total_m"}` to `out_json` and
/// the total to `out_total_m` when it is non-null.
///
/// # Safety
/// `graph` must be a live handle, `from` and `to` nul-terminated strings,
/// `out_json` writable and `out_total_m` null or writable.
#[no_mangle]
pub unsafe extern "C" fn wp_route(
    graph: *const WpNavGraph,
    from: *const c_char,
    to: *const c_char,
    out_json: *mut *mut c_char,
    out_total_m: *mut f64,
) -> WpStatus {
    guard(|| {
        out_arg(out_json, "out_json")?;
        let g = ref_arg(graph, "graph")?;
        let (from, to) = (str_arg(from, "from")?, str_arg(to, "to")?);
        let route = g.0.shortest_path(from, to).map_err(|e| {
            let status = match e {
                GraphError::UnknownNode(_) => WpStatus::UnknownNode,
                GraphError::Unreachable { .. } => WpStatus::Unreachable,
                GraphError::Build(_) => WpStatus::Internal,
            };
            Failure(status, e.to_string())
        })?;
        let body = serde_json::to_string(&RouteResponse::new(&g.0, &route)).expect("route serializes");
        *out_json = into_c_string(body)?;
        if !out_total_m.is_null() {
            *out_total_m = route.total_m;
        }
        Ok(())
    })
}

/// # Safety
/// `params` must be readable and `out_dbm` writable.
#[no_mangle]
pub unsafe extern "C" fn wp_received_power_dbm(params: *const WpPropagationParams, distance_m: f64, out_dbm: *mut f64) -> WpStatus {
    guard(|| {
        out_arg(out_dbm, "out_dbm")?;
        let p: PropagationParams = (*ref_arg(params, "params")?).into();
        let v = waypoint::received_power_dbm(&p, distance_m).map_err(|e| Failure(WpStatus::InvalidArgument, e.to_string()))?;
        *out_dbm = v.dbm();
        Ok(())
    })
}

/// # Safety
/// `params` must be readable and `out_m` writable.
#[no_mangle]
pub unsafe extern "C" fn wp_distance_from_power(params: *const WpPropagationParams, rssi_dbm: f64, out_m: *mut f64) -> WpStatus {
    guard(|| {
        out_arg(out_m, "out_m")?;
        let p: PropagationParams = (*ref_arg(params, "params")?).into();
        let rssi = RssiDbm::new(rssi_dbm).map_err(|e| Failure(WpStatus::InvalidArgument, e.to_string()))?;
        *out_m = waypoint::distance_from_power(&p, rssi).map_err(|e| Failure(WpStatus::InvalidArgument, e.to_string()))?;
        Ok(())
    })
}

/// Great-circle distance in meters between two latitude/longitude pairs.
///
/// # Safety
/// `out_m` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wp_haversine_distance(lat1: f64, lon1: f64, lat2: f64, lon2: f64, out_m: *mut f64) -> WpStatus {
    guard(|| {
        out_arg(out_m, "out_m")?;
        let a = GeoPoint::new(lat1, lon1, 0).map_err(|e| Failure(WpStatus::InvalidArgument, e.to_string()))?;
        let b = GeoPoint::new(lat2, lon2, 0).map_err(|e| Failure(WpStatus::InvalidArgument, e.to_string()))?;
        *out_m = waypoint::haversine_distance(&a, &b);
        Ok(())
    })
}
