//! Small reference datasets shipped with the crate.
//!
//! The two survey locations reproduce a published site survey: an
//! auditorium and a department office, each with the RSSI observed from a
//! handful of radios. Radios `27:78` and `1a:90` were only ever published
//! by their last two octets; their leading octets here are placeholders.
//! Geocodes are approximate and only need to be distinct.

use crate::geo::RssiDbm;
use crate::radiomap::{
    build_radio_map, ingest_scan_log, ApRegistry, RadioMap, TrainingSet, DEFAULT_FLOOR_DBM, SCAN_LOG_HEADER,
};

pub struct SurveyLocation {
    pub location_id: &'static str,
    pub lat: f64,
    pub lon: f64,
    pub floor: i32,
    pub timestamp: &'static str,
    /// (ssid, bssid, rssi dBm)
    pub readings: &'static [(&'static str, &'static str, f64)],
}

pub const AUDITORIUM: SurveyLocation = SurveyLocation {
    location_id: "auditorium",
    lat: 12.934_52,
    lon: 77.534_61,
    floor: 0,
    timestamp: "2013-03-14T10:15:00Z",
    readings: &[
        ("PESITRB", "00:23:04:89:24:08", -62.0),
        ("PESITRB", "00:19:5b:b1:23:90", -80.0),
        ("PESITRB", "00:23:04:89:1f:98", -53.0),
        ("CISCO_LAB", "00:23:04:89:67:e7", -85.0),
    ],
};

pub const ISE_OFFICE: SurveyLocation = SurveyLocation {
    location_id: "ise_office",
    lat: 12.934_71,
    lon: 77.534_88,
    floor: 1,
    timestamp: "2013-03-14T10:40:00Z",
    readings: &[
        ("PESBHMWIFI01", "00:23:04:89:27:78", -85.0),
        ("PESITRB", "00:19:5b:b1:23:90", -86.0),
        ("PESBHMWIFI01", "00:23:04:89:1a:90", -68.0),
    ],
};

pub fn scan_log_csv(locations: &[SurveyLocation]) -> String {
    let mut out = SCAN_LOG_HEADER.join(",");
    out.push('\n');
    for loc in locations {
        for (ssid, bssid, rssi) in loc.readings {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                loc.timestamp, loc.location_id, loc.lat, loc.lon, loc.floor, ssid, bssid, rssi
            ));
        }
    }
    out
}

/// Scan-log text for both survey locations.
pub fn tables_csv() -> String {
    scan_log_csv(&[AUDITORIUM, ISE_OFFICE])
}

/// Live-scan CSV (`ssid,bssid,rssi_dbm`) with one location's readings.
pub fn live_scan_csv(loc: &SurveyLocation) -> String {
    let mut out = String::from("ssid,bssid,rssi_dbm\n");
    for (ssid, bssid, rssi) in loc.readings {
        out.push_str(&format!("{ssid},{bssid},{rssi}\n"));
    }
    out
}

pub fn tables_training_set() -> TrainingSet {
    ingest_scan_log(tables_csv().as_bytes()).expect("fixture ingests").training
}

/// Both locations trained with an SSID registry and the default floor.
pub fn tables_radio_map() -> RadioMap {
    let training = tables_training_set();
    let registry = ApRegistry::by_ssid(training.readings());
    build_radio_map(&training, &registry, RssiDbm::new(DEFAULT_FLOOR_DBM).unwrap())
        .expect("fixture builds")
        .map
}

/// A–B 1 m, B–C 1 m, A–C 3 m.
pub const TRIANGLE_GRAPH_JSON: &str = r#"{
  "version": 1,
  "nodes": [
    {"id": "A", "lat": 12.93450, "lon": 77.53460, "floor": 0, "kind": "room"},
    {"id": "B", "lat": 12.93451, "lon": 77.53460, "floor": 0, "kind": "corridor"},
    {"id": "C", "lat": 12.93452, "lon": 77.53460, "floor": 0, "kind": "room"}
  ],
  "edges": [
    {"a": "A", "b": "B", "weight_m": 1.0},
    {"a": "B", "b": "C", "weight_m": 1.0},
    {"a": "A", "b": "C", "weight_m": 3.0}
  ]
}
"#;
