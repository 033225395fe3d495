use std::ffi::{CStr, CString};
use std::ptr;

use waypoint::fixtures::{self, AUDITORIUM};
use waypoint_ffi::*;

fn last_error() -> String {
    let p = wp_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

unsafe fn take(s: *mut std::ffi::c_char) -> serde_json::Value {
    let v = serde_json::from_str(CStr::from_ptr(s).to_str().unwrap()).unwrap();
    wp_string_free(s);
    v
}

fn load_map() -> *mut WpRadioMap {
    let json = CString::new(fixtures::tables_radio_map().to_json()).unwrap();
    let mut map = ptr::null_mut();
    assert_eq!(unsafe { wp_radio_map_from_json(json.as_ptr(), &mut map) }, WpStatus::Ok);
    map
}

fn auditorium_scan() -> CString {
    let readings: Vec<_> = AUDITORIUM
        .readings
        .iter()
        .map(|(ssid, bssid, rssi)| serde_json::json!({"ssid": ssid, "bssid": bssid, "rssi_dbm": rssi}))
        .collect();
    CString::new(serde_json::json!({ "readings": readings }).to_string()).unwrap()
}

#[test]
fn locate_through_handles() {
    let map = load_map();
    assert_eq!(unsafe { wp_radio_map_fingerprint_count(map) }, 2);
    let config = WpMatcherConfig { k: 1, ..wp_matcher_config_default() };
    let mut out = ptr::null_mut();
    let scan = auditorium_scan();
    assert_eq!(unsafe { wp_locate(map, &config, scan.as_ptr(), &mut out) }, WpStatus::Ok);
    let v = unsafe { take(out) };
    assert_eq!(v["neighbors"][0]["location_id"], "auditorium");
    assert_eq!(v["neighbors"][0]["signal_distance_db"], 0.0);

    let empty = CString::new(r#"{"readings":[]}"#).unwrap();
    assert_eq!(unsafe { wp_locate(map, &config, empty.as_ptr(), &mut out) }, WpStatus::NoUsableSignal);
    assert!(last_error().contains("no usable signal"));

    let bad = WpMatcherConfig { k: 0, ..config };
    assert_eq!(unsafe { wp_locate(map, &bad, scan.as_ptr(), &mut out) }, WpStatus::InvalidArgument);
    unsafe { wp_radio_map_free(map) };
}

#[test]
fn malformed_documents_and_nulls() {
    let mut map = ptr::null_mut();
    let bad = CString::new("{\"version\": 9}").unwrap();
    assert_eq!(unsafe { wp_radio_map_from_json(bad.as_ptr(), &mut map) }, WpStatus::ParseError);
    assert!(last_error().contains("version"));
    assert!(map.is_null());
    assert_eq!(unsafe { wp_radio_map_from_json(ptr::null(), &mut map) }, WpStatus::NullArgument);
    let invalid = [0xffu8, 0];
    assert_eq!(unsafe { wp_radio_map_from_json(invalid.as_ptr().cast(), &mut map) }, WpStatus::InvalidUtf8);
    unsafe {
        wp_radio_map_free(ptr::null_mut());
        wp_nav_graph_free(ptr::null_mut());
        wp_string_free(ptr::null_mut());
    }
}

#[test]
fn route_on_triangle() {
    let json = CString::new(fixtures::TRIANGLE_GRAPH_JSON).unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { wp_nav_graph_from_json(json.as_ptr(), 5.0, &mut g) }, WpStatus::Ok);
    let (a, c, z) = (CString::new("A").unwrap(), CString::new("C").unwrap(), CString::new("Z").unwrap());
    let (mut out, mut total) = (ptr::null_mut(), f64::NAN);
    assert_eq!(unsafe { wp_route(g, a.as_ptr(), c.as_ptr(), &mut out, &mut total) }, WpStatus::Ok);
    assert_eq!(total, 2.0);
    let v = unsafe { take(out) };
    let ids: Vec<_> = v["nodes"].as_array().unwrap().iter().map(|n| n["id"].as_str().unwrap().to_string()).collect();
    assert_eq!(ids, ["A", "B", "C"]);
    assert_eq!(unsafe { wp_route(g, a.as_ptr(), z.as_ptr(), &mut out, ptr::null_mut()) }, WpStatus::UnknownNode);
    assert!(last_error().contains("\"Z\""));
    assert_eq!(unsafe { wp_nav_graph_from_json(json.as_ptr(), f64::NAN, &mut g) }, WpStatus::InvalidArgument);
    unsafe { wp_nav_graph_free(g) };
}

#[test]
fn propagation_round_trip() {
    let p = wp_propagation_params_default();
    let (mut rssi, mut d) = (0.0, 0.0);
    assert_eq!(unsafe { wp_received_power_dbm(&p, 10.0, &mut rssi) }, WpStatus::Ok);
    assert_eq!(unsafe { wp_distance_from_power(&p, rssi, &mut d) }, WpStatus::Ok);
    assert!((d - 10.0).abs() <= 1e-9 * 10.0);
    assert_eq!(unsafe { wp_received_power_dbm(&p, -1.0, &mut rssi) }, WpStatus::InvalidArgument);
    let mut m = 0.0;
    assert_eq!(unsafe { wp_haversine_distance(0.0, 0.0, 0.0, 1.0, &mut m) }, WpStatus::Ok);
    assert!((m - 111_194.926_644).abs() < 1e-3);
    assert_eq!(unsafe { wp_haversine_distance(95.0, 0.0, 0.0, 1.0, &mut m) }, WpStatus::InvalidArgument);
}

#[test]
fn errors_are_per_thread() {
    let mut d = 0.0;
    let p = wp_propagation_params_default();
    assert_eq!(unsafe { wp_received_power_dbm(&p, 0.0, &mut d) }, WpStatus::InvalidArgument);
    std::thread::spawn(|| assert!(wp_last_error_message().is_null())).join().unwrap();
    assert!(last_error().contains("distance"));
}
