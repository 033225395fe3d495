//! JSON payloads shared by the service endpoints and the CLI's `--format json`.

use serde::{Deserialize, Serialize};

use crate::geo::{Bssid, GeoPoint, RssiDbm};
use crate::localization::LocationEstimate;
use crate::navgraph::{GraphDocument, NavGraph, NodeDoc, Route};
use crate::propagation::{synthetic_timestamp, PlanarPoint};
use crate::radiomap::{RadioMap, Scan, ScanReading};
use crate::simulator::{Extent, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadingPayload {
    pub bssid: Bssid,
    #[serde(default)]
    pub ssid: String,
    pub rssi_dbm: f64,
}

/// Body of `POST /api/v1/locate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocateRequest {
    pub readings: Vec<ReadingPayload>,
}

/// A payload field that failed validation after parsing.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl LocateRequest {
    /// Readings must lie in the measured range `[-120, 0]` dBm.
    pub fn into_scan(self) -> Result<Scan, FieldError> {
        let mut readings = Vec::with_capacity(self.readings.len());
        for (i, r) in self.readings.into_iter().enumerate() {
            let rssi = RssiDbm::ingest(r.rssi_dbm).map_err(|e| FieldError {
                path: format!("readings[{i}].rssi_dbm"),
                message: e.to_string(),
            })?;
            readings.push(ScanReading {
                bssid: r.bssid,
                ssid: r.ssid,
                rssi,
            });
        }
        Ok(Scan::new(synthetic_timestamp(0), readings))
    }
}

/// Response of `locate`: the estimate as produced by the matcher.
pub type EstimateResponse = LocationEstimate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteResponse {
    pub nodes: Vec<NodeDoc>,
    pub total_m: f64,
}

impl RouteResponse {
    pub fn new(graph: &NavGraph, route: &Route) -> Self {
        let nodes = route
            .nodes
            .iter()
            .map(|id| {
                let n = graph.node(id).expect("route nodes belong to the graph");
                NodeDoc {
                    id: n.id.clone(),
                    lat: n.point.lat,
                    lon: n.point.lon,
                    floor: n.point.floor,
                    kind: n.kind,
                }
            })
            .collect();
        Self {
            nodes,
            total_m: route.total_m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessPointInfo {
    pub ap_id: String,
    pub ssid: String,
    pub radios: Vec<Bssid>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationInfo {
    pub location_id: String,
    pub lat: f64,
    pub lon: f64,
    pub floor: i32,
}

/// Radio-map metadata; signatures are not exposed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioMapSummary {
    pub floor_dbm: f64,
    pub fingerprint_count: usize,
    pub access_points: Vec<AccessPointInfo>,
    pub locations: Vec<LocationInfo>,
}

impl RadioMapSummary {
    pub fn new(map: &RadioMap) -> Self {
        let reg = map.registry();
        let access_points = reg
            .ap_ids()
            .map(|ap| AccessPointInfo {
                ap_id: ap.to_string(),
                ssid: reg.ssid_of(ap).unwrap_or_default().to_string(),
                radios: reg.radios().filter(|(_, a)| *a == ap).map(|(b, _)| *b).collect(),
            })
            .collect();
        Self {
            floor_dbm: map.floor_dbm().dbm(),
            fingerprint_count: map.fingerprints().len(),
            access_points,
            locations: map
                .fingerprints()
                .iter()
                .map(|f| LocationInfo {
                    location_id: f.location_id.clone(),
                    lat: f.point.lat,
                    lon: f.point.lon,
                    floor: f.point.floor,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmitterMarker {
    pub ap_name: String,
    pub x: f64,
    pub y: f64,
    pub lat: f64,
    pub lon: f64,
}

/// What a renderer needs from a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub extent: Extent,
    pub grid_m: f64,
    pub anchor: GeoPoint,
    pub transmitters: Vec<TransmitterMarker>,
}

impl ScenarioSummary {
    pub fn new(s: &Scenario) -> Self {
        Self {
            extent: s.extent,
            grid_m: s.grid_m,
            anchor: s.anchor,
            transmitters: s
                .transmitters
                .iter()
                .map(|t| {
                    let g = s.to_geo(t.position);
                    TransmitterMarker {
                        ap_name: t.ap_name.clone(),
                        x: t.position.x,
                        y: t.position.y,
                        lat: g.lat,
                        lon: g.lon,
                    }
                })
                .collect(),
        }
    }
}

/// Response of `GET /api/v1/map`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapResponse {
    pub radio_map: RadioMapSummary,
    pub graph: Option<GraphDocument>,
    pub scenario: Option<ScenarioSummary>,
}

impl MapResponse {
    pub fn new(map: &RadioMap, graph: Option<&NavGraph>, scenario: Option<&Scenario>) -> Self {
        Self {
            radio_map: RadioMapSummary::new(map),
            graph: graph.map(NavGraph::to_document),
            scenario: scenario.map(ScenarioSummary::new),
        }
    }
}

/// Body of `POST /api/v1/sim/scan`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimScanRequest {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruePosition {
    pub x: f64,
    pub y: f64,
    pub lat: f64,
    pub lon: f64,
    pub floor: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScanResponse {
    pub true_position: TruePosition,
    pub scan_index: u64,
    pub readings: Vec<ScanReading>,
}

impl SimScanResponse {
    pub fn new(s: &Scenario, p: PlanarPoint, scan_index: u64, scan: Scan) -> Self {
        let g = s.to_geo(p);
        Self {
            true_position: TruePosition {
                x: p.x,
                y: p.y,
                lat: g.lat,
                lon: g.lon,
                floor: g.floor,
            },
            scan_index,
            readings: scan.readings,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

/// Pretty JSON with a trailing newline, as printed by the CLI.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("payload serializes");
    s.push('\n');
    s
}
