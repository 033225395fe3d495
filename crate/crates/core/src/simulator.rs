//! Deterministic test bed: a planar floor with placed transmitters,
//! synthetic training and test scans, and localization error reports.
//!
//! Every output is a pure function of the scenario, the matcher
//! configuration and the seeds. Training scans use scan indices below
//! [`TEST_STREAM`]; test scans set that bit, so the two never share a
//! noise draw even when the seeds coincide.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::document::{parse_versioned, DocumentError};
use crate::geo::{Bssid, GeoPoint, RssiDbm, EARTH_RADIUS_M};
use crate::localization::{beacons_from_scan, locate, multilaterate, Beacon, MatcherConfig, Method, SearchFrame};
use crate::propagation::{
    distance_from_power, synth_scan, NoiseModel, PlacedTransmitter, PlanarPoint, PropagationError, PropagationParams,
    TEST_STREAM,
};
use crate::radiomap::{build_radio_map, ApRegistry, RadioMap, RadioMapBuild, RadioMapError, Scan, TrainingLocation, TrainingSet};

pub const SCENARIO_VERSION: u32 = 1;

/// Meters per degree of latitude on the reference sphere.
pub fn meters_per_degree() -> f64 {
    EARTH_RADIUS_M * std::f64::consts::PI / 180.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub width_m: f64,
    pub height_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub extent: Extent,
    /// Spacing of training points.
    pub grid_m: f64,
    pub transmitters: Vec<PlacedTransmitter>,
    pub noise: NoiseModel,
    pub scans_per_point: usize,
    /// Geodetic position of the planar origin.
    pub anchor: GeoPoint,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("test point #{index} ({x}, {y}) lies outside the scenario extent")]
    OutOfExtent { index: usize, x: f64, y: f64 },
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error(transparent)]
    RadioMap(#[from] RadioMapError),
    #[error(transparent)]
    Document(#[from] DocumentError),
}

impl Default for Scenario {
    /// 20 x 20 m floor, 1 m grid, four corner access points with five
    /// radios each, 2 dB noise, five scans per training point.
    fn default() -> Self {
        let corners = [(0.0, 0.0), (20.0, 0.0), (0.0, 20.0), (20.0, 20.0)];
        let transmitters = corners
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| PlacedTransmitter {
                ap_name: format!("AP{}", i + 1),
                position: PlanarPoint::new(x, y),
                radios: (0..5).map(|r| Bssid::from_octets([0x02, 0x57, 0x50, 0x00, i as u8 + 1, r])).collect(),
                params: PropagationParams::default(),
            })
            .collect();
        Self {
            extent: Extent {
                width_m: 20.0,
                height_m: 20.0,
            },
            grid_m: 1.0,
            transmitters,
            noise: NoiseModel { sigma_db: 2.0, seed: 42 },
            scans_per_point: 5,
            anchor: GeoPoint {
                lat: 12.9345,
                lon: 77.5346,
                floor: 0,
            },
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Scenario(m));
        if !(self.extent.width_m.is_finite() && self.extent.width_m > 0.0 && self.extent.height_m.is_finite() && self.extent.height_m > 0.0) {
            return bad("extent must be positive".into());
        }
        if !(self.grid_m.is_finite() && self.grid_m > 0.0) {
            return bad(format!("grid spacing must be positive, got {}", self.grid_m));
        }
        if self.transmitters.is_empty() {
            return bad("at least one transmitter is required".into());
        }
        if self.scans_per_point == 0 {
            return bad("scans_per_point must be at least 1".into());
        }
        if self.anchor.validate().is_err() {
            return bad("anchor is not a valid geocode".into());
        }
        let mut radios = BTreeMap::new();
        for t in &self.transmitters {
            t.validate()?;
            for r in &t.radios {
                if let Some(other) = radios.insert(*r, &t.ap_name) {
                    return bad(format!("radio {r} used by both {other:?} and {:?}", t.ap_name));
                }
            }
        }
        self.noise.validate()?;
        Ok(())
    }

    /// Each transmitter is one access point named by its `ap_name`.
    pub fn registry(&self) -> ApRegistry {
        let mut reg = ApRegistry::new();
        for t in &self.transmitters {
            for r in &t.radios {
                reg.insert(*r, &t.ap_name, &t.ap_name).expect("radios validated distinct");
            }
        }
        reg
    }

    pub fn contains(&self, p: PlanarPoint) -> bool {
        (0.0..=self.extent.width_m).contains(&p.x) && (0.0..=self.extent.height_m).contains(&p.y)
    }

    fn meters_per_degree_lon(&self) -> f64 {
        meters_per_degree() * self.anchor.lat.to_radians().cos()
    }

    /// Equirectangular projection about the anchor.
    pub fn to_geo(&self, p: PlanarPoint) -> GeoPoint {
        GeoPoint {
            lat: self.anchor.lat + p.y / meters_per_degree(),
            lon: self.anchor.lon + p.x / self.meters_per_degree_lon(),
            floor: self.anchor.floor,
        }
    }

    pub fn to_planar(&self, g: &GeoPoint) -> PlanarPoint {
        PlanarPoint::new(
            (g.lon - self.anchor.lon) * self.meters_per_degree_lon(),
            (g.lat - self.anchor.lat) * meters_per_degree(),
        )
    }

    /// Planar distance between two geocodes, measured in the scenario frame.
    pub fn geo_error_m(&self, a: &GeoPoint, b: &GeoPoint) -> f64 {
        let dy = (a.lat - b.lat) * meters_per_degree();
        let dx = (a.lon - b.lon) * self.meters_per_degree_lon();
        dx.hypot(dy)
    }

    fn axis_count(&self, length: f64) -> usize {
        (length / self.grid_m + 1e-9).floor() as usize + 1
    }

    /// Training points, row by row: `(location_id, point)`.
    pub fn grid_points(&self) -> Vec<(String, PlanarPoint)> {
        let (nx, ny) = (self.axis_count(self.extent.width_m), self.axis_count(self.extent.height_m));
        let mut out = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                out.push((
                    format!("g{ix:04}_{iy:04}"),
                    PlanarPoint::new(ix as f64 * self.grid_m, iy as f64 * self.grid_m),
                ));
            }
        }
        out
    }

    pub fn frame(&self) -> SearchFrame {
        SearchFrame {
            min: PlanarPoint::new(0.0, 0.0),
            max: PlanarPoint::new(self.extent.width_m, self.extent.height_m),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ScenarioDocument::from(self)).expect("scenario serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let doc: ScenarioDocument = parse_versioned("scenario", text, SCENARIO_VERSION)?;
        let s = Scenario::from(doc);
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDocument {
    version: u32,
    extent: Extent,
    grid_m: f64,
    transmitters: Vec<PlacedTransmitter>,
    noise: NoiseModel,
    scans_per_point: usize,
    anchor: GeoPoint,
}

impl From<&Scenario> for ScenarioDocument {
    fn from(s: &Scenario) -> Self {
        Self {
            version: SCENARIO_VERSION,
            extent: s.extent,
            grid_m: s.grid_m,
            transmitters: s.transmitters.clone(),
            noise: s.noise,
            scans_per_point: s.scans_per_point,
            anchor: s.anchor,
        }
    }
}

impl From<ScenarioDocument> for Scenario {
    fn from(d: ScenarioDocument) -> Self {
        Self {
            extent: d.extent,
            grid_m: d.grid_m,
            transmitters: d.transmitters,
            noise: d.noise,
            scans_per_point: d.scans_per_point,
            anchor: d.anchor,
        }
    }
}

pub fn generate_training_set(s: &Scenario) -> Result<TrainingSet, SimError> {
    s.validate()?;
    let spp = s.scans_per_point as u64;
    let locations = s
        .grid_points()
        .into_par_iter()
        .enumerate()
        .map(|(i, (location_id, p))| {
            let scans = (0..spp)
                .map(|j| synth_scan(&s.transmitters, p, &s.noise, i as u64 * spp + j))
                .collect::<Result<Vec<Scan>, _>>()?;
            Ok(TrainingLocation {
                location_id,
                point: s.to_geo(p),
                scans,
            })
        })
        .collect::<Result<Vec<_>, PropagationError>>()?;
    Ok(TrainingSet::new(locations).expect("grid ids are unique"))
}

/// Trains a radio map for the scenario with its own AP registry.
pub fn train_scenario(s: &Scenario, floor_dbm: RssiDbm) -> Result<RadioMapBuild, SimError> {
    let training = generate_training_set(s)?;
    Ok(build_radio_map(&training, &s.registry(), floor_dbm)?)
}

/// `count` points drawn uniformly over the scenario extent.
pub fn random_test_points(s: &Scenario, count: usize, seed: u64) -> Vec<PlanarPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let x = rng.random::<f64>() * s.extent.width_m;
            let y = rng.random::<f64>() * s.extent.height_m;
            PlanarPoint::new(x, y)
        })
        .collect()
}

/// Scan synthesized for test point `index` on the evaluation stream.
pub fn test_scan(s: &Scenario, p: PlanarPoint, index: usize, test_seed: u64) -> Result<Scan, PropagationError> {
    let noise = NoiseModel {
        sigma_db: s.noise.sigma_db,
        seed: test_seed,
    };
    synth_scan(&s.transmitters, p, &noise, TEST_STREAM | index as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApRange {
    pub ap: String,
    pub estimated_m: f64,
    pub true_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub index: usize,
    pub truth: PlanarPoint,
    pub estimate: Option<PlanarPoint>,
    pub error_m: Option<f64>,
    /// Why no estimate was produced.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub miss: Option<String>,
    /// Multilateration only: per access point range from the assumed model.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ranges: Option<Vec<ApRange>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub mean_m: f64,
    pub median_m: f64,
    pub p95_m: f64,
}

/// Mean, median and 95th percentile of `errors`.
///
/// The median of an even count averages the two middle values; the 95th
/// percentile is the nearest-rank value `sorted[ceil(0.95 n) - 1]`.
pub fn summarize(errors: &[f64]) -> Option<Aggregates> {
    if errors.is_empty() {
        return None;
    }
    let n = errors.len();
    let mean_m = errors.iter().sum::<f64>() / n as f64;
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median_m = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
    Some(Aggregates {
        mean_m,
        median_m,
        p95_m: sorted[rank - 1],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub matcher: Option<MatcherConfig>,
    pub assumed_params: Option<PropagationParams>,
    pub test_seed: u64,
    pub training_seed: u64,
    pub sigma_db: f64,
    pub scans_per_point: usize,
    pub grid_m: f64,
    pub test_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: Method,
    pub points: Vec<PointResult>,
    /// None when every point missed.
    pub aggregates: Option<Aggregates>,
    pub misses: usize,
    pub config: ConfigEcho,
}

impl EvalReport {
    fn assemble(method: Method, points: Vec<PointResult>, config: ConfigEcho) -> Self {
        let errors: Vec<f64> = points.iter().filter_map(|p| p.error_m).collect();
        let misses = points.len() - errors.len();
        Self {
            method,
            aggregates: summarize(&errors),
            points,
            misses,
            config,
        }
    }

    pub fn errors(&self) -> Vec<f64> {
        self.points.iter().filter_map(|p| p.error_m).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let method = match self.method {
            Method::Fingerprint => "fingerprint",
            Method::Multilateration => "multilateration",
        };
        let _ = writeln!(out, "method: {method}");
        let _ = writeln!(out, "{:>5} {:>8} {:>8} {:>8} {:>8} {:>8}", "#", "true_x", "true_y", "est_x", "est_y", "error_m");
        for p in &self.points {
            match (p.estimate, p.error_m) {
                (Some(e), Some(err)) => {
                    let _ = writeln!(
                        out,
                        "{:>5} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3}",
                        p.index, p.truth.x, p.truth.y, e.x, e.y, err
                    );
                }
                _ => {
                    let _ = writeln!(
                        out,
                        "{:>5} {:>8.3} {:>8.3} {:>8} {:>8} {:>8}  {}",
                        p.index,
                        p.truth.x,
                        p.truth.y,
                        "-",
                        "-",
                        "miss",
                        p.miss.as_deref().unwrap_or("")
                    );
                }
            }
        }
        match &self.aggregates {
            Some(a) => {
                let _ = writeln!(
                    out,
                    "points: {}  misses: {}  mean: {:.3} m  median: {:.3} m  p95: {:.3} m",
                    self.points.len(),
                    self.misses,
                    a.mean_m,
                    a.median_m,
                    a.p95_m
                );
            }
            None => {
                let _ = writeln!(out, "points: {}  misses: {}  (no estimates)", self.points.len(), self.misses);
            }
        }
        out
    }
}

fn check_points(s: &Scenario, points: &[PlanarPoint]) -> Result<(), SimError> {
    for (index, p) in points.iter().enumerate() {
        if !s.contains(*p) {
            return Err(SimError::OutOfExtent { index, x: p.x, y: p.y });
        }
    }
    Ok(())
}

pub fn evaluate_localization(
    map: &RadioMap,
    s: &Scenario,
    test_points: &[PlanarPoint],
    config: &MatcherConfig,
    test_seed: u64,
) -> Result<EvalReport, SimError> {
    s.validate()?;
    check_points(s, test_points)?;
    let points = test_points
        .par_iter()
        .enumerate()
        .map(|(index, &truth)| {
            let scan = test_scan(s, truth, index, test_seed)?;
            let mut result = PointResult {
                index,
                truth,
                estimate: None,
                error_m: None,
                miss: None,
                ranges: None,
                converged: None,
            };
            match locate(map, &scan, config) {
                Ok(est) if est.point.floor != s.anchor.floor => {
                    result.miss = Some(format!("estimate on floor {}", est.point.floor));
                }
                Ok(est) => {
                    result.estimate = Some(s.to_planar(&est.point));
                    result.error_m = Some(s.geo_error_m(&est.point, &s.to_geo(truth)));
                }
                Err(e) => result.miss = Some(e.to_string()),
            }
            Ok(result)
        })
        .collect::<Result<Vec<_>, PropagationError>>()?;
    Ok(EvalReport::assemble(
        Method::Fingerprint,
        points,
        ConfigEcho {
            matcher: Some(*config),
            assumed_params: None,
            test_seed,
            training_seed: s.noise.seed,
            sigma_db: s.noise.sigma_db,
            scans_per_point: s.scans_per_point,
            grid_m: s.grid_m,
            test_points: test_points.len(),
        },
    ))
}

/// Multilateration over the same test scans, inverting readings with
/// `assumed_params` in place of each transmitter's true parameters.
pub fn evaluate_multilateration(
    s: &Scenario,
    assumed_params: &PropagationParams,
    test_points: &[PlanarPoint],
    test_seed: u64,
) -> Result<EvalReport, SimError> {
    s.validate()?;
    assumed_params.validate()?;
    check_points(s, test_points)?;
    let registry = s.registry();
    let positions: BTreeMap<String, (PlanarPoint, PropagationParams)> = s
        .transmitters
        .iter()
        .map(|t| (t.ap_name.clone(), (t.position, *assumed_params)))
        .collect();
    let frame = s.frame();
    let points = test_points
        .par_iter()
        .enumerate()
        .map(|(index, &truth)| {
            let scan = test_scan(s, truth, index, test_seed)?;
            let tagged = beacons_from_scan(&registry, &scan, &positions);
            let beacons: Vec<Beacon> = tagged.iter().map(|(_, b)| *b).collect();
            let mut result = PointResult {
                index,
                truth,
                estimate: None,
                error_m: None,
                miss: None,
                ranges: None,
                converged: None,
            };
            match multilaterate(&beacons, &frame) {
                Ok(fix) => {
                    result.ranges = Some(
                        tagged
                            .iter()
                            .zip(&fix.ranges_m)
                            .map(|((ap, b), r)| ApRange {
                                ap: ap.clone(),
                                estimated_m: *r,
                                true_m: b.position.distance(&truth),
                            })
                            .collect(),
                    );
                    result.error_m = Some(fix.point.distance(&truth));
                    result.estimate = Some(fix.point);
                    result.converged = Some(fix.converged);
                }
                Err(e) => result.miss = Some(e.to_string()),
            }
            Ok(result)
        })
        .collect::<Result<Vec<_>, PropagationError>>()?;
    Ok(EvalReport::assemble(
        Method::Multilateration,
        points,
        ConfigEcho {
            matcher: None,
            assumed_params: Some(*assumed_params),
            test_seed,
            training_seed: s.noise.seed,
            sigma_db: s.noise.sigma_db,
            scans_per_point: s.scans_per_point,
            grid_m: s.grid_m,
            test_points: test_points.len(),
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub fingerprint: EvalReport,
    pub multilateration: EvalReport,
}

impl Comparison {
    pub fn to_table(&self) -> String {
        let line = |r: &EvalReport| match &r.aggregates {
            Some(a) => format!("{:.3} {:>10.3} {:>10.3} {:>7}", a.mean_m, a.median_m, a.p95_m, r.misses),
            None => format!("{:>5} {:>10} {:>10} {:>7}", "-", "-", "-", r.misses),
        };
        format!(
            "{:<16} {:>5} {:>10} {:>10} {:>7}\n{:<16} {}\n{:<16} {}\n",
            "method",
            "mean",
            "median",
            "p95",
            "misses",
            "fingerprint",
            line(&self.fingerprint),
            "multilateration",
            line(&self.multilateration)
        )
    }
}

/// Trains a map from the scenario, then evaluates fingerprinting and
/// multilateration on the same test scans.
pub fn compare_methods(
    s: &Scenario,
    config: &MatcherConfig,
    assumed_params: &PropagationParams,
    test_points: &[PlanarPoint],
    test_seed: u64,
) -> Result<Comparison, SimError> {
    if s.transmitters.len() < 3 {
        return Err(SimError::Scenario("multilateration needs at least 3 transmitters".into()));
    }
    let built = train_scenario(s, config.floor_dbm)?;
    Ok(Comparison {
        fingerprint: evaluate_localization(&built.map, s, test_points, config, test_seed)?,
        multilateration: evaluate_multilateration(s, assumed_params, test_points, test_seed)?,
    })
}

/// Range a transmitter's reading would produce under `assumed`, for a
/// device at `device` and the transmitter's true model.
pub fn biased_range(t: &PlacedTransmitter, device: PlanarPoint, assumed: &PropagationParams) -> Result<f64, PropagationError> {
    let rssi = crate::propagation::received_power_dbm(&t.params, t.position.distance(&device).max(crate::propagation::MIN_SIM_DISTANCE_M))?;
    distance_from_power(assumed, rssi)
}
