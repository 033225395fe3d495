//! Online phase: nearest-neighbor matching in signal space, and a
//! propagation-based multilateration baseline.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{GeoPoint, RssiDbm};
use crate::propagation::{distance_from_power, PlanarPoint, PropagationError, PropagationParams};
use crate::radiomap::{apply_floor, group_radios, RadioMap, Scan, Signature, DEFAULT_FLOOR_DBM};

pub const DEFAULT_K: usize = 3;
pub const DEFAULT_MISSING_DBM: f64 = -100.0;

/// Added to signal distances before inverting them into weights.
const WEIGHT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    Uniform,
    InverseDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatcherConfig {
    pub k: usize,
    /// Stands in for an access point heard on only one side of a comparison.
    pub missing_dbm: RssiDbm,
    pub weighting: Weighting,
    pub floor_dbm: RssiDbm,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            missing_dbm: RssiDbm::new(DEFAULT_MISSING_DBM).unwrap(),
            weighting: Weighting::InverseDistance,
            floor_dbm: RssiDbm::new(DEFAULT_FLOOR_DBM).unwrap(),
        }
    }
}

impl MatcherConfig {
    pub fn validate(&self) -> Result<(), LocateError> {
        if self.k == 0 {
            return Err(LocateError::Config("k must be at least 1".into()));
        }
        if self.missing_dbm > self.floor_dbm {
            return Err(LocateError::Config(format!(
                "missing value {} must not exceed floor {}",
                self.missing_dbm, self.floor_dbm
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Fingerprint,
    Multilateration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub location_id: String,
    pub signal_distance_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationEstimate {
    pub point: GeoPoint,
    /// Ascending by signal distance, ties by location id.
    pub neighbors: Vec<Neighbor>,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LocateError {
    #[error("no usable signal: no access point at or above the floor")]
    NoUsableSignal,
    #[error("radio map is empty")]
    EmptyMap,
    #[error("both signatures are empty")]
    EmptySignatures,
    #[error("invalid matcher configuration: {0}")]
    Config(String),
    #[error("insufficient beacons: {0} usable, at least 3 required")]
    InsufficientBeacons(usize),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
}

/// Euclidean distance in dB over the union of access points, substituting
/// `missing_dbm` for an access point absent from one side.
pub fn signal_distance(a: &Signature, b: &Signature, missing_dbm: RssiDbm) -> Result<f64, LocateError> {
    if a.is_empty() && b.is_empty() {
        return Err(LocateError::EmptySignatures);
    }
    let missing = missing_dbm.dbm();
    let mut sum = 0.0;
    let mut left = a.iter().peekable();
    let mut right = b.iter().peekable();
    loop {
        let (x, y) = match (left.peek(), right.peek()) {
            (None, None) => break,
            (Some((_, x)), None) => {
                let x = x.dbm();
                left.next();
                (x, missing)
            }
            (None, Some((_, y))) => {
                let y = y.dbm();
                right.next();
                (missing, y)
            }
            (Some((ka, x)), Some((kb, y))) => match ka.cmp(kb) {
                Ordering::Less => {
                    let x = x.dbm();
                    left.next();
                    (x, missing)
                }
                Ordering::Greater => {
                    let y = y.dbm();
                    right.next();
                    (missing, y)
                }
                Ordering::Equal => {
                    let pair = (x.dbm(), y.dbm());
                    left.next();
                    right.next();
                    pair
                }
            },
        };
        sum += (x - y) * (x - y);
    }
    Ok(sum.sqrt())
}

/// The signature a live scan is matched with: AP-grouped, then floored.
pub fn query_signature(map: &RadioMap, scan: &Scan, floor_dbm: RssiDbm) -> Signature {
    apply_floor(&group_radios(map.registry(), scan), floor_dbm)
}

pub fn locate(map: &RadioMap, scan: &Scan, config: &MatcherConfig) -> Result<LocationEstimate, LocateError> {
    config.validate()?;
    if map.fingerprints().is_empty() {
        return Err(LocateError::EmptyMap);
    }
    let query = query_signature(map, scan, config.floor_dbm);
    if query.is_empty() {
        return Err(LocateError::NoUsableSignal);
    }

    let mut ranked = Vec::with_capacity(map.fingerprints().len());
    for fp in map.fingerprints() {
        let d = signal_distance(&query, &fp.signature, config.missing_dbm)?;
        ranked.push((d, fp));
    }
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.location_id.cmp(&b.1.location_id)));
    ranked.truncate(config.k);

    let nearest = ranked[0].1;
    let point = if ranked.len() == 1 {
        nearest.point
    } else {
        let mut total = 0.0;
        let (mut lat, mut lon) = (0.0, 0.0);
        for (d, fp) in ranked.iter().filter(|(_, fp)| fp.point.floor == nearest.point.floor) {
            let w = match config.weighting {
                Weighting::Uniform => 1.0,
                Weighting::InverseDistance => 1.0 / (d + WEIGHT_EPSILON),
            };
            total += w;
            lat += w * fp.point.lat;
            lon += w * fp.point.lon;
        }
        GeoPoint {
            lat: lat / total,
            lon: lon / total,
            floor: nearest.point.floor,
        }
    };

    Ok(LocationEstimate {
        point,
        neighbors: ranked
            .into_iter()
            .map(|(d, fp)| Neighbor {
                location_id: fp.location_id.clone(),
                signal_distance_db: d,
            })
            .collect(),
        method: Method::Fingerprint,
    })
}

/// A transmitter with a known position and a mean RSSI from one scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beacon {
    pub position: PlanarPoint,
    pub params: PropagationParams,
    pub rssi: RssiDbm,
}

/// Axis-aligned region searched for a multilateration fix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchFrame {
    pub min: PlanarPoint,
    pub max: PlanarPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultilaterationFix {
    pub point: PlanarPoint,
    /// Root-mean-square range residual at `point`, meters.
    pub residual_rms_m: f64,
    /// False when local refinement failed from every start and the best
    /// grid candidate was returned instead.
    pub converged: bool,
    /// Range obtained from each beacon, in input order.
    pub ranges_m: Vec<f64>,
}

const GRID_CELL_M: f64 = 1.0;
const STARTS: usize = 4;
const REFINE_TOLERANCE_M: f64 = 1e-6;
const MAX_ITERATIONS: usize = 200;

fn cost(p: PlanarPoint, anchors: &[(PlanarPoint, f64)]) -> f64 {
    anchors
        .iter()
        .map(|(a, r)| {
            let e = p.distance(a) - r;
            e * e
        })
        .sum()
}

impl SearchFrame {
    pub fn clamp(&self, p: PlanarPoint) -> PlanarPoint {
        PlanarPoint::new(p.x.clamp(self.min.x, self.max.x), p.y.clamp(self.min.y, self.max.y))
    }
}

/// Levenberg-Marquardt on the range residuals, starting from `start`, with
/// every step projected back into `frame`. Returns the refined point and
/// whether the step size fell below tolerance.
fn refine(start: PlanarPoint, anchors: &[(PlanarPoint, f64)], frame: &SearchFrame) -> (PlanarPoint, bool) {
    let mut p = start;
    let mut c = cost(p, anchors);
    let mut lambda = 1e-3;
    for _ in 0..MAX_ITERATIONS {
        // Normal equations J^T J dx = -J^T r for a 2-vector.
        let (mut a11, mut a12, mut a22, mut g1, mut g2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (a, r) in anchors {
            let dist = p.distance(a).max(1e-12);
            let (jx, jy) = ((p.x - a.x) / dist, (p.y - a.y) / dist);
            let res = dist - r;
            a11 += jx * jx;
            a12 += jx * jy;
            a22 += jy * jy;
            g1 += jx * res;
            g2 += jy * res;
        }
        let mut improved = false;
        while lambda < 1e12 {
            let (m11, m22) = (a11 + lambda * a11.max(1e-9), a22 + lambda * a22.max(1e-9));
            let det = m11 * m22 - a12 * a12;
            if det.abs() < 1e-300 {
                lambda *= 10.0;
                continue;
            }
            let dx = -(m22 * g1 - a12 * g2) / det;
            let dy = -(m11 * g2 - a12 * g1) / det;
            let candidate = frame.clamp(PlanarPoint::new(p.x + dx, p.y + dy));
            let cc = cost(candidate, anchors);
            if cc <= c {
                let step = candidate.distance(&p);
                p = candidate;
                c = cc;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if step < REFINE_TOLERANCE_M {
                    return (p, true);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // No descent direction left: at a stationary point.
            return (p, true);
        }
    }
    (p, false)
}

/// Least-squares position from propagation-model ranges.
///
/// Candidates on a grid of at most 1 m cells over `frame` seed a local
/// refinement confined to the frame; the best refined point wins.
pub fn multilaterate(beacons: &[Beacon], frame: &SearchFrame) -> Result<MultilaterationFix, LocateError> {
    if beacons.len() < 3 {
        return Err(LocateError::InsufficientBeacons(beacons.len()));
    }
    let mut anchors = Vec::with_capacity(beacons.len());
    for b in beacons {
        anchors.push((b.position, distance_from_power(&b.params, b.rssi)?));
    }

    let (w, h) = (frame.max.x - frame.min.x, frame.max.y - frame.min.y);
    let nx = (w / GRID_CELL_M).ceil().max(1.0) as usize;
    let ny = (h / GRID_CELL_M).ceil().max(1.0) as usize;
    let mut grid = Vec::with_capacity((nx + 1) * (ny + 1));
    for ix in 0..=nx {
        for iy in 0..=ny {
            let p = PlanarPoint::new(
                frame.min.x + w * ix as f64 / nx as f64,
                frame.min.y + h * iy as f64 / ny as f64,
            );
            grid.push((cost(p, &anchors), ix, iy, p));
        }
    }
    grid.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut best: Option<(f64, PlanarPoint)> = None;
    for &(_, _, _, start) in grid.iter().take(STARTS) {
        let (p, ok) = refine(start, &anchors, frame);
        if !ok {
            continue;
        }
        let c = cost(p, &anchors);
        if best.is_none_or(|(bc, _)| c < bc) {
            best = Some((c, p));
        }
    }
    let ranges_m = anchors.iter().map(|(_, r)| *r).collect();
    let n = anchors.len() as f64;
    Ok(match best {
        Some((c, point)) => MultilaterationFix {
            point,
            residual_rms_m: (c / n).sqrt(),
            converged: true,
            ranges_m,
        },
        None => {
            let (c, _, _, point) = grid[0];
            log::warn!("multilateration did not converge; returning grid candidate");
            MultilaterationFix {
                point,
                residual_rms_m: (c / n).sqrt(),
                converged: false,
                ranges_m,
            }
        }
    })
}

/// Mean RSSI per access point, with the beacons that are positioned.
pub fn beacons_from_scan(
    map_registry: &crate::radiomap::ApRegistry,
    scan: &Scan,
    positions: &BTreeMap<String, (PlanarPoint, PropagationParams)>,
) -> Vec<(String, Beacon)> {
    group_radios(map_registry, scan)
        .into_iter()
        .filter_map(|(ap, rssi)| {
            positions.get(&ap).map(|(position, params)| {
                (
                    ap,
                    Beacon {
                        position: *position,
                        params: *params,
                        rssi,
                    },
                )
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, AUDITORIUM, ISE_OFFICE};
    use crate::geo::Bssid;
    use crate::propagation::received_power_dbm;
    use crate::radiomap::{ApRegistry, Fingerprint, ScanReading};
    use chrono::DateTime;
    use proptest::prelude::*;

    fn sig(entries: &[(&str, f64)]) -> Signature {
        entries.iter().map(|(k, v)| (k.to_string(), RssiDbm::new(*v).unwrap())).collect()
    }

    fn dbm(v: f64) -> RssiDbm {
        RssiDbm::new(v).unwrap()
    }

    fn survey_scan(loc: &fixtures::SurveyLocation) -> Scan {
        Scan::new(
            DateTime::from_timestamp(0, 0).unwrap(),
            loc.readings
                .iter()
                .map(|(ssid, bssid, v)| ScanReading {
                    bssid: bssid.parse().unwrap(),
                    ssid: ssid.to_string(),
                    rssi: dbm(*v),
                })
                .collect(),
        )
    }

    fn k1() -> MatcherConfig {
        MatcherConfig { k: 1, ..MatcherConfig::default() }
    }

    #[test]
    fn identical_signatures_are_zero_apart() {
        let a = sig(&[("P", -62.0), ("Q", -70.0)]);
        assert_eq!(signal_distance(&a, &a, dbm(-100.0)).unwrap(), 0.0);
    }

    #[test]
    fn shared_ap_difference() {
        let d = signal_distance(&sig(&[("P", -62.0)]), &sig(&[("P", -64.0)]), dbm(-100.0)).unwrap();
        assert_eq!(d, 2.0);
    }

    #[test]
    fn missing_ap_substitution() {
        let d = signal_distance(&sig(&[("P", -62.0)]), &sig(&[("P", -62.0), ("Q", -80.0)]), dbm(-100.0)).unwrap();
        assert_eq!(d, 20.0);
    }

    #[test]
    fn both_empty_is_an_error() {
        assert_eq!(
            signal_distance(&Signature::new(), &Signature::new(), dbm(-100.0)),
            Err(LocateError::EmptySignatures)
        );
    }

    #[test]
    fn auditorium_scan_matches_exactly() {
        let map = fixtures::tables_radio_map();
        let est = locate(&map, &survey_scan(&AUDITORIUM), &k1()).unwrap();
        assert_eq!(est.neighbors[0].location_id, "auditorium");
        assert_eq!(est.neighbors[0].signal_distance_db, 0.0);
        assert_eq!(est.point, map.get("auditorium").unwrap().point);
        assert_eq!(est.method, Method::Fingerprint);
    }

    #[test]
    fn ise_office_scan_matches_office() {
        let map = fixtures::tables_radio_map();
        // Worked by hand: the query is {PESBHMWIFI01: -76.5} (PESITRB at -86
        // falls below the floor). Auditorium holds {PESITRB: -65, CISCO_LAB: -85}.
        let to_office = 0.0_f64;
        let to_auditorium = ((100.0_f64 - 76.5).powi(2) + 35.0_f64.powi(2) + 15.0_f64.powi(2)).sqrt();
        assert!((to_auditorium - 44.746).abs() < 1e-3);
        let est = locate(&map, &survey_scan(&ISE_OFFICE), &MatcherConfig { k: 2, ..MatcherConfig::default() }).unwrap();
        assert_eq!(est.neighbors[0].location_id, "ise_office");
        assert_eq!(est.neighbors[0].signal_distance_db, to_office);
        assert!((est.neighbors[1].signal_distance_db - to_auditorium).abs() < 1e-9);
        // The office sits on its own floor, so the centroid is the office.
        let office = map.get("ise_office").unwrap().point;
        assert!((est.point.lat - office.lat).abs() < 1e-12 && (est.point.lon - office.lon).abs() < 1e-12);
        assert_eq!(est.point.floor, office.floor);
    }

    fn two_point_map(ids: [&str; 2], sigs: [Signature; 2]) -> RadioMap {
        let mut reg = ApRegistry::new();
        for (i, ap) in ["P", "Q"].iter().enumerate() {
            reg.insert(Bssid::from_octets([2, 0, 0, 0, 0, i as u8]), ap, ap).unwrap();
        }
        let fps = ids
            .iter()
            .zip(sigs)
            .enumerate()
            .map(|(i, (id, s))| Fingerprint {
                location_id: id.to_string(),
                point: GeoPoint::new(i as f64 * 0.001, 0.0, 0).unwrap(),
                signature: s,
            })
            .collect();
        RadioMap::new(fps, reg, dbm(-85.0)).unwrap()
    }

    fn scan_of(values: &[(u8, f64)]) -> Scan {
        Scan::new(
            DateTime::from_timestamp(0, 0).unwrap(),
            values
                .iter()
                .map(|(i, v)| ScanReading {
                    bssid: Bssid::from_octets([2, 0, 0, 0, 0, *i]),
                    ssid: String::new(),
                    rssi: dbm(*v),
                })
                .collect(),
        )
    }

    #[test]
    fn ties_go_to_smaller_location_id() {
        let map = two_point_map(["zeta", "alpha"], [sig(&[("P", -60.0)]), sig(&[("P", -70.0)])]);
        let est = locate(&map, &scan_of(&[(0, -65.0)]), &k1()).unwrap();
        assert_eq!(est.neighbors[0].location_id, "alpha");
    }

    #[test]
    fn weak_scan_has_no_usable_signal() {
        let map = fixtures::tables_radio_map();
        assert_eq!(locate(&map, &scan_of(&[(0, -97.0)]), &k1()), Err(LocateError::NoUsableSignal));
        assert_eq!(locate(&map, &scan_of(&[]), &k1()), Err(LocateError::NoUsableSignal));
    }

    #[test]
    fn config_validation() {
        let map = fixtures::tables_radio_map();
        let scan = survey_scan(&AUDITORIUM);
        assert!(matches!(
            locate(&map, &scan, &MatcherConfig { k: 0, ..k1() }),
            Err(LocateError::Config(_))
        ));
        assert!(matches!(
            locate(&map, &scan, &MatcherConfig { missing_dbm: dbm(-80.0), ..k1() }),
            Err(LocateError::Config(_))
        ));
    }

    #[test]
    fn centroid_weights() {
        let map = two_point_map(["a", "b"], [sig(&[("P", -60.0)]), sig(&[("P", -70.0)])]);
        let scan = scan_of(&[(0, -62.0)]);
        let uniform = locate(&map, &scan, &MatcherConfig { k: 2, weighting: Weighting::Uniform, ..k1() }).unwrap();
        assert!((uniform.point.lat - 0.0005).abs() < 1e-15);
        let idw = locate(&map, &scan, &MatcherConfig { k: 2, weighting: Weighting::InverseDistance, ..k1() }).unwrap();
        let (wa, wb) = (1.0 / (2.0 + 1e-6), 1.0 / (8.0 + 1e-6));
        assert!((idw.point.lat - 0.001 * wb / (wa + wb)).abs() < 1e-15);
    }

    fn planar_params() -> PropagationParams {
        PropagationParams::default()
    }

    fn beacons_at(points: &[(f64, f64)], device: PlanarPoint, params: PropagationParams) -> Vec<Beacon> {
        points
            .iter()
            .map(|&(x, y)| {
                let position = PlanarPoint::new(x, y);
                Beacon {
                    position,
                    params,
                    rssi: received_power_dbm(&params, position.distance(&device)).unwrap(),
                }
            })
            .collect()
    }

    fn frame(w: f64, h: f64) -> SearchFrame {
        SearchFrame {
            min: PlanarPoint::new(0.0, 0.0),
            max: PlanarPoint::new(w, h),
        }
    }

    #[test]
    fn recovers_position_without_noise() {
        let truth = PlanarPoint::new(6.3, 11.7);
        let b = beacons_at(&[(0.0, 0.0), (20.0, 0.0), (10.0, 20.0)], truth, planar_params());
        let fix = multilaterate(&b, &frame(20.0, 20.0)).unwrap();
        assert!(fix.converged);
        assert!(fix.point.distance(&truth) <= 1e-3, "{:?}", fix.point);
    }

    #[test]
    fn symmetric_layout_returns_centroid() {
        let centre = PlanarPoint::new(10.0, 10.0);
        let b = beacons_at(&[(0.0, 0.0), (20.0, 0.0), (0.0, 20.0), (20.0, 20.0)], centre, planar_params());
        let fix = multilaterate(&b, &frame(20.0, 20.0)).unwrap();
        assert!(fix.point.distance(&centre) <= 1e-6);
    }

    #[test]
    fn inflated_ranges_stay_in_frame() {
        // Readings from n = 3 inverted with n = 2 overstate every range.
        let truth = PlanarPoint::new(12.0, 7.0);
        let mut b = beacons_at(&[(0.0, 0.0), (20.0, 0.0), (0.0, 20.0), (20.0, 20.0)], truth, PropagationParams::default());
        for beacon in &mut b {
            beacon.params.n = 2.0;
        }
        let f = frame(20.0, 20.0);
        let fix = multilaterate(&b, &f).unwrap();
        assert_eq!(f.clamp(fix.point), fix.point);
        assert!(fix.ranges_m.iter().all(|r| *r > 100.0));
    }

    #[test]
    fn two_beacons_are_insufficient() {
        let b = beacons_at(&[(0.0, 0.0), (20.0, 0.0)], PlanarPoint::new(5.0, 5.0), planar_params());
        assert_eq!(multilaterate(&b, &frame(20.0, 20.0)), Err(LocateError::InsufficientBeacons(2)));
    }

    fn arb_sig() -> impl Strategy<Value = Signature> {
        prop::collection::btree_map("[A-E]", -95.0..-30.0f64, 1..5)
            .prop_map(|m| m.into_iter().map(|(k, v)| (k, RssiDbm::new(v).unwrap())).collect())
    }

    proptest! {
        #[test]
        fn signal_distance_is_a_metric(a in arb_sig(), b in arb_sig(), c in arb_sig()) {
            let m = dbm(-100.0);
            let ab = signal_distance(&a, &b, m).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, signal_distance(&b, &a, m).unwrap());
            prop_assert_eq!(ab == 0.0, a == b);
            let ac = signal_distance(&a, &c, m).unwrap();
            let cb = signal_distance(&c, &b, m).unwrap();
            prop_assert!(ab <= ac + cb + 1e-9);
        }

        #[test]
        fn offset_keeps_neighbor_ranking(
            fps in prop::collection::vec(prop::collection::vec(-80.0..-30.0f64, 3), 2..8),
            q in prop::collection::vec(-80.0..-30.0f64, 3),
            c in -5.0..5.0f64,
        ) {
            // Full signatures over the same APs so no substitution applies.
            let aps = ["A", "B", "C"];
            let to_sig = |v: &[f64], off: f64| -> Signature {
                aps.iter().zip(v).map(|(k, x)| (k.to_string(), RssiDbm::new(x + off).unwrap())).collect()
            };
            let rank = |off: f64| -> Vec<usize> {
                let query = to_sig(&q, off);
                let mut d: Vec<(f64, usize)> = fps
                    .iter()
                    .enumerate()
                    .map(|(i, f)| (signal_distance(&query, &to_sig(f, off), dbm(-120.0)).unwrap(), i))
                    .collect();
                d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                d.into_iter().map(|(_, i)| i).collect()
            };
            let base = rank(0.0);
            let shifted = rank(c);
            // Rounding can perturb exact ties only; compare distances instead when they differ.
            if base != shifted {
                let query = to_sig(&q, 0.0);
                for (x, y) in base.iter().zip(&shifted) {
                    let dx = signal_distance(&query, &to_sig(&fps[*x], 0.0), dbm(-120.0)).unwrap();
                    let dy = signal_distance(&query, &to_sig(&fps[*y], 0.0), dbm(-120.0)).unwrap();
                    prop_assert!((dx - dy).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn locate_ignores_reading_order(perm_seed in any::<u64>(), values in prop::collection::vec(-80.0..-40.0f64, 2)) {
            let map = two_point_map(["a", "b"], [sig(&[("P", -60.0), ("Q", -70.0)]), sig(&[("P", -70.0), ("Q", -60.0)])]);
            let mut readings = vec![(0u8, values[0]), (1u8, values[1])];
            if perm_seed % 2 == 1 {
                readings.reverse();
            }
            let cfg = MatcherConfig { k: 2, ..k1() };
            prop_assert_eq!(
                locate(&map, &scan_of(&readings), &cfg).unwrap(),
                locate(&map, &scan_of(&[(0, values[0]), (1, values[1])]), &cfg).unwrap()
            );
        }

        #[test]
        fn zero_noise_multilateration_inside_hull(x in 1.0..19.0f64, y in 1.0..19.0f64) {
            let truth = PlanarPoint::new(x, y);
            let b = beacons_at(&[(0.0, 0.0), (20.0, 0.0), (0.0, 20.0), (20.0, 20.0)], truth, planar_params());
            let fix = multilaterate(&b, &frame(20.0, 20.0)).unwrap();
            prop_assert!(fix.point.distance(&truth) <= 1e-3);
        }
    }
}
