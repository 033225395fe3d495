//! Offline phase: scan-log ingestion, access-point consolidation and the
//! persistent radio map.
//!
//! Readings from radios of the same access point are averaged within each
//! scan, the per-AP values are then averaged over all scans of a location,
//! and finally every AP whose mean falls below the reliability floor is
//! dropped from the fingerprint. All averaging is arithmetic in dBm.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use chrono::{DateTime, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::document::{parse_versioned, DocumentError};
use crate::geo::{parse_bssid, Bssid, GeoPoint, RssiDbm};

/// Default reliability floor: 15 dB above a -100 dBm noise floor.
pub const DEFAULT_FLOOR_DBM: f64 = -85.0;

pub const RADIO_MAP_VERSION: u32 = 1;

/// Per access point mean RSSI.
pub type Signature = BTreeMap<String, RssiDbm>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReading {
    pub bssid: Bssid,
    pub ssid: String,
    #[serde(rename = "rssi_dbm")]
    pub rssi: RssiDbm,
}

/// One sweep of the radio environment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scan {
    pub timestamp: DateTime<Utc>,
    /// Sorted by bssid, at most one reading per radio.
    pub readings: Vec<ScanReading>,
}

impl Scan {
    /// Builds a scan, merging repeated radios by their mean dBm.
    pub fn new(timestamp: DateTime<Utc>, readings: Vec<ScanReading>) -> Self {
        let mut by_radio: BTreeMap<Bssid, (String, Vec<f64>)> = BTreeMap::new();
        for r in readings {
            by_radio
                .entry(r.bssid)
                .or_insert_with(|| (r.ssid.clone(), Vec::new()))
                .1
                .push(r.rssi.dbm());
        }
        let readings = by_radio
            .into_iter()
            .map(|(bssid, (ssid, mut values))| ScanReading {
                bssid,
                ssid,
                rssi: RssiDbm::new(mean_dbm(&mut values)).expect("mean of finite values"),
            })
            .collect();
        Self { timestamp, readings }
    }
}

/// Arithmetic mean, independent of input order.
///
/// Values are sorted and accumulated as offsets from the smallest one, so a
/// set of identical values averages to exactly that value.
pub(crate) fn mean_dbm(values: &mut [f64]) -> f64 {
    debug_assert!(!values.is_empty());
    values.sort_by(f64::total_cmp);
    let base = values[0];
    let offset: f64 = values.iter().map(|v| v - base).sum();
    base + offset / values.len() as f64
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("radio {bssid} already belongs to access point {existing:?}, cannot assign to {requested:?}")]
    Conflict {
        bssid: Bssid,
        existing: String,
        requested: String,
    },
}

/// Assignment of radios to access points.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApRegistry {
    radios: BTreeMap<Bssid, String>,
    aps: BTreeMap<String, String>,
}

impl ApRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, bssid: Bssid, ap_id: &str, ssid: &str) -> Result<(), RegistryError> {
        match self.radios.get(&bssid) {
            Some(existing) if existing != ap_id => {
                return Err(RegistryError::Conflict {
                    bssid,
                    existing: existing.clone(),
                    requested: ap_id.to_string(),
                })
            }
            Some(_) => {}
            None => {
                self.radios.insert(bssid, ap_id.to_string());
            }
        }
        self.aps.entry(ap_id.to_string()).or_insert_with(|| ssid.to_string());
        Ok(())
    }

    /// Groups radios by network name: every radio advertising the same
    /// non-empty SSID is treated as part of one access point named by it.
    /// Radios with an empty SSID stay unregistered.
    pub fn by_ssid<'a>(readings: impl IntoIterator<Item = &'a ScanReading>) -> Self {
        let mut reg = Self::new();
        for r in readings {
            if !r.ssid.is_empty() && !reg.radios.contains_key(&r.bssid) {
                reg.insert(r.bssid, &r.ssid, &r.ssid).expect("new radio");
            }
        }
        reg
    }

    pub fn ap_of(&self, bssid: &Bssid) -> Option<&str> {
        self.radios.get(bssid).map(String::as_str)
    }

    pub fn ssid_of(&self, ap_id: &str) -> Option<&str> {
        self.aps.get(ap_id).map(String::as_str)
    }

    pub fn contains_ap(&self, ap_id: &str) -> bool {
        self.aps.contains_key(ap_id)
    }

    pub fn ap_ids(&self) -> impl Iterator<Item = &str> {
        self.aps.keys().map(String::as_str)
    }

    pub fn radios(&self) -> impl Iterator<Item = (&Bssid, &str)> {
        self.radios.iter().map(|(b, a)| (b, a.as_str()))
    }

    fn ap_id_for(&self, bssid: &Bssid) -> String {
        self.ap_of(bssid).map(str::to_string).unwrap_or_else(|| bssid.to_string())
    }
}

/// Mean RSSI per access point over the radios present in one scan.
/// Unregistered radios form singleton access points keyed by bssid.
pub fn group_radios(registry: &ApRegistry, scan: &Scan) -> Signature {
    let mut per_ap: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in &scan.readings {
        per_ap.entry(registry.ap_id_for(&r.bssid)).or_default().push(r.rssi.dbm());
    }
    per_ap
        .into_iter()
        .map(|(ap, mut v)| (ap, RssiDbm::new(mean_dbm(&mut v)).expect("finite")))
        .collect()
}

/// Drops every entry strictly below `floor_dbm`.
pub fn apply_floor(signature: &Signature, floor_dbm: RssiDbm) -> Signature {
    signature
        .iter()
        .filter(|(_, v)| **v >= floor_dbm)
        .map(|(k, v)| (k.clone(), *v))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingLocation {
    pub location_id: String,
    pub point: GeoPoint,
    pub scans: Vec<Scan>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrainingError {
    #[error("training set is empty")]
    Empty,
    #[error("location {0:?} appears more than once")]
    DuplicateLocation(String),
    #[error("location {0:?} has no scans")]
    NoScans(String),
}

/// Scans recorded at surveyed locations, ordered by location id.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    locations: Vec<TrainingLocation>,
}

impl TrainingSet {
    pub fn new(mut locations: Vec<TrainingLocation>) -> Result<Self, TrainingError> {
        if locations.is_empty() {
            return Err(TrainingError::Empty);
        }
        locations.sort_by(|a, b| a.location_id.cmp(&b.location_id));
        for pair in locations.windows(2) {
            if pair[0].location_id == pair[1].location_id {
                return Err(TrainingError::DuplicateLocation(pair[0].location_id.clone()));
            }
        }
        if let Some(l) = locations.iter().find(|l| l.scans.is_empty()) {
            return Err(TrainingError::NoScans(l.location_id.clone()));
        }
        Ok(Self { locations })
    }

    pub fn locations(&self) -> &[TrainingLocation] {
        &self.locations
    }

    pub fn readings(&self) -> impl Iterator<Item = &ScanReading> {
        self.locations
            .iter()
            .flat_map(|l| l.scans.iter())
            .flat_map(|s| s.readings.iter())
    }
}

/// Column names of the scan-log CSV, in order.
pub const SCAN_LOG_HEADER: [&str; 8] = ["timestamp", "location_id", "lat", "lon", "floor", "ssid", "bssid", "rssi_dbm"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowRejection {
    /// 1-based line number in the input, header included.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("scan log has no valid rows ({} rejected)", .rejections.len())]
    NoValidRows { rejections: Vec<RowRejection> },
    #[error("scan log header is missing column {0:?}")]
    MissingColumn(&'static str),
    #[error("location {location_id:?} has inconsistent geocodes (line {line})")]
    InconsistentGeocode { location_id: String, line: u64 },
    #[error("reading scan log: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone)]
pub struct IngestedLog {
    pub training: TrainingSet,
    pub rejections: Vec<RowRejection>,
}

pub(crate) fn parse_timestamp(text: &str) -> Result<DateTime<Utc>, String> {
    let text = text.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(text) {
        return Ok(t.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(text, fmt) {
            return Ok(t.and_utc());
        }
    }
    Err(format!("invalid ISO-8601 timestamp {text:?}"))
}

fn parse_f64(field: &str, text: &str) -> Result<f64, String> {
    text.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("invalid {field} {text:?}"))
}

struct Columns {
    index: [usize; 8],
}

impl Columns {
    fn from_header(header: &csv::StringRecord, required: &[&'static str]) -> Result<Self, IngestError> {
        let mut index = [usize::MAX; 8];
        for (slot, name) in index.iter_mut().zip(SCAN_LOG_HEADER) {
            if let Some(i) = header.iter().position(|h| h.trim() == name) {
                *slot = i;
            } else if required.contains(&name) {
                return Err(IngestError::MissingColumn(name));
            }
        }
        Ok(Self { index })
    }

    fn get<'r>(&self, record: &'r csv::StringRecord, name: &str) -> Option<&'r str> {
        let pos = SCAN_LOG_HEADER.iter().position(|h| *h == name)?;
        record.get(self.index[pos])
    }

    fn field<'r>(&self, record: &'r csv::StringRecord, name: &str) -> Result<&'r str, String> {
        self.get(record, name).ok_or_else(|| format!("missing field {name}"))
    }
}

fn parse_reading(cols: &Columns, record: &csv::StringRecord) -> Result<ScanReading, String> {
    let bssid = parse_bssid(cols.field(record, "bssid")?).map_err(|e| e.to_string())?;
    let rssi = parse_f64("rssi_dbm", cols.field(record, "rssi_dbm")?)?;
    let rssi = RssiDbm::ingest(rssi).map_err(|e| e.to_string())?;
    let ssid = cols.get(record, "ssid").unwrap_or("").to_string();
    Ok(ScanReading { bssid, ssid, rssi })
}

struct PendingLocation {
    point: GeoPoint,
    scans: BTreeMap<DateTime<Utc>, Vec<ScanReading>>,
}

/// Reads a scan log (see [`SCAN_LOG_HEADER`]) into a training set.
///
/// Malformed rows are skipped and reported; the call fails only when no row
/// survives or one location is given two different geocodes.
pub fn ingest_scan_log<R: Read>(input: R) -> Result<IngestedLog, IngestError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(input);
    let header = reader.headers()?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(IngestError::NoValidRows { rejections: Vec::new() });
    }
    let cols = Columns::from_header(&header, &SCAN_LOG_HEADER)?;

    let mut rejections = Vec::new();
    let mut pending: BTreeMap<String, PendingLocation> = BTreeMap::new();
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                rejections.push(RowRejection { line, reason: e.to_string() });
                continue;
            }
        };
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row = (|| -> Result<_, String> {
            let timestamp = parse_timestamp(cols.field(&record, "timestamp")?)?;
            let location_id = cols.field(&record, "location_id")?.to_string();
            if location_id.is_empty() {
                return Err("empty location_id".into());
            }
            let lat = parse_f64("lat", cols.field(&record, "lat")?)?;
            let lon = parse_f64("lon", cols.field(&record, "lon")?)?;
            let floor = cols
                .field(&record, "floor")?
                .parse::<i32>()
                .map_err(|_| "invalid floor".to_string())?;
            let point = GeoPoint::new(lat, lon, floor).map_err(|e| e.to_string())?;
            let reading = parse_reading(&cols, &record)?;
            Ok((timestamp, location_id, point, reading))
        })();
        let (timestamp, location_id, point, reading) = match row {
            Ok(v) => v,
            Err(reason) => {
                rejections.push(RowRejection { line, reason });
                continue;
            }
        };
        let entry = pending.entry(location_id.clone()).or_insert_with(|| PendingLocation {
            point,
            scans: BTreeMap::new(),
        });
        if entry.point != point {
            return Err(IngestError::InconsistentGeocode { location_id, line });
        }
        entry.scans.entry(timestamp).or_default().push(reading);
    }
    if pending.is_empty() {
        return Err(IngestError::NoValidRows { rejections });
    }
    let locations = pending
        .into_iter()
        .map(|(location_id, p)| TrainingLocation {
            location_id,
            point: p.point,
            scans: p.scans.into_iter().map(|(t, r)| Scan::new(t, r)).collect(),
        })
        .collect();
    let training = TrainingSet::new(locations).expect("grouped locations are unique and non-empty");
    Ok(IngestedLog { training, rejections })
}

/// Reads a single live scan: any CSV with at least `bssid` and `rssi_dbm`
/// columns (`ssid` and `timestamp` optional). All rows form one scan; an
/// empty input yields an empty scan.
pub fn read_scan_csv<R: Read>(input: R) -> Result<(Scan, Vec<RowRejection>), IngestError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(input);
    let header = reader.headers()?.clone();
    let empty = Scan::new(crate::propagation::synthetic_timestamp(0), Vec::new());
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Ok((empty, Vec::new()));
    }
    let cols = Columns::from_header(&header, &["bssid", "rssi_dbm"])?;
    let mut rejections = Vec::new();
    let mut readings = Vec::new();
    let mut timestamp = None;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        match parse_reading(&cols, &record) {
            Ok(r) => readings.push(r),
            Err(reason) => rejections.push(RowRejection { line, reason }),
        }
        if timestamp.is_none() {
            timestamp = cols.get(&record, "timestamp").and_then(|t| parse_timestamp(t).ok());
        }
    }
    Ok((Scan::new(timestamp.unwrap_or(empty.timestamp), readings), rejections))
}

/// Writes scans in scan-log format.
pub fn write_scan_log<W: Write>(training: &TrainingSet, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SCAN_LOG_HEADER)?;
    for loc in training.locations() {
        for scan in &loc.scans {
            let ts = scan.timestamp.to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
            for r in &scan.readings {
                w.write_record([
                    ts.as_str(),
                    &loc.location_id,
                    &loc.point.lat.to_string(),
                    &loc.point.lon.to_string(),
                    &loc.point.floor.to_string(),
                    &r.ssid,
                    &r.bssid.to_string(),
                    &r.rssi.dbm().to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fingerprint {
    pub location_id: String,
    pub point: GeoPoint,
    pub signature: Signature,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RadioMapError {
    #[error("radio map has no fingerprints")]
    Empty,
    #[error("fingerprint {0:?} appears more than once")]
    DuplicateLocation(String),
    #[error("fingerprint {0:?} has an empty signature")]
    EmptySignature(String),
    #[error("fingerprint {location_id:?} references unknown access point {ap_id:?}")]
    UnknownAp { location_id: String, ap_id: String },
    #[error("fingerprint {location_id:?} value for {ap_id:?} is below the map floor")]
    BelowFloor { location_id: String, ap_id: String },
    #[error("fingerprint {location_id:?} has an invalid geocode: {reason}")]
    Geocode { location_id: String, reason: String },
    #[error("every training location was excluded by the floor")]
    AllExcluded,
}

/// The offline-phase product: one fingerprint per surveyed location.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioMap {
    fingerprints: Vec<Fingerprint>,
    registry: ApRegistry,
    floor_dbm: RssiDbm,
}

impl RadioMap {
    pub fn new(mut fingerprints: Vec<Fingerprint>, registry: ApRegistry, floor_dbm: RssiDbm) -> Result<Self, RadioMapError> {
        if fingerprints.is_empty() {
            return Err(RadioMapError::Empty);
        }
        fingerprints.sort_by(|a, b| a.location_id.cmp(&b.location_id));
        let mut seen = BTreeSet::new();
        for fp in &fingerprints {
            if !seen.insert(fp.location_id.as_str()) {
                return Err(RadioMapError::DuplicateLocation(fp.location_id.clone()));
            }
            fp.point.validate().map_err(|e| RadioMapError::Geocode {
                location_id: fp.location_id.clone(),
                reason: e.to_string(),
            })?;
            if fp.signature.is_empty() {
                return Err(RadioMapError::EmptySignature(fp.location_id.clone()));
            }
            for (ap, v) in &fp.signature {
                if !registry.contains_ap(ap) {
                    return Err(RadioMapError::UnknownAp {
                        location_id: fp.location_id.clone(),
                        ap_id: ap.clone(),
                    });
                }
                if *v < floor_dbm {
                    return Err(RadioMapError::BelowFloor {
                        location_id: fp.location_id.clone(),
                        ap_id: ap.clone(),
                    });
                }
            }
        }
        Ok(Self {
            fingerprints,
            registry,
            floor_dbm,
        })
    }

    /// Sorted by location id.
    pub fn fingerprints(&self) -> &[Fingerprint] {
        &self.fingerprints
    }

    pub fn registry(&self) -> &ApRegistry {
        &self.registry
    }

    pub fn floor_dbm(&self) -> RssiDbm {
        self.floor_dbm
    }

    pub fn get(&self, location_id: &str) -> Option<&Fingerprint> {
        self.fingerprints
            .binary_search_by(|f| f.location_id.as_str().cmp(location_id))
            .ok()
            .map(|i| &self.fingerprints[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadioMapBuild {
    pub map: RadioMap,
    /// Locations dropped because nothing survived the floor.
    pub excluded: Vec<String>,
}

pub fn build_radio_map(training: &TrainingSet, registry: &ApRegistry, floor_dbm: RssiDbm) -> Result<RadioMapBuild, RadioMapError> {
    let mut registry = registry.clone();
    for r in training.readings() {
        if registry.ap_of(&r.bssid).is_none() {
            let id = r.bssid.to_string();
            registry.insert(r.bssid, &id, &r.ssid).expect("unregistered radio");
        }
    }

    let mut fingerprints = Vec::new();
    let mut excluded = Vec::new();
    for loc in training.locations() {
        let mut per_ap: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for scan in &loc.scans {
            for (ap, v) in group_radios(&registry, scan) {
                per_ap.entry(ap).or_default().push(v.dbm());
            }
        }
        let averaged: Signature = per_ap
            .into_iter()
            .map(|(ap, mut v)| (ap, RssiDbm::new(mean_dbm(&mut v)).expect("finite")))
            .collect();
        let signature = apply_floor(&averaged, floor_dbm);
        if signature.is_empty() {
            log::info!("location {} excluded: no access point at or above {}", loc.location_id, floor_dbm);
            excluded.push(loc.location_id.clone());
            continue;
        }
        fingerprints.push(Fingerprint {
            location_id: loc.location_id.clone(),
            point: loc.point,
            signature,
        });
    }
    if fingerprints.is_empty() {
        return Err(RadioMapError::AllExcluded);
    }
    Ok(RadioMapBuild {
        map: RadioMap::new(fingerprints, registry, floor_dbm)?,
        excluded,
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FingerprintDoc {
    location_id: String,
    lat: f64,
    lon: f64,
    floor: i32,
    signature: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RadioMapDoc {
    version: u32,
    floor_dbm: f64,
    registry: ApRegistry,
    fingerprints: Vec<FingerprintDoc>,
}

impl RadioMap {
    pub fn to_json(&self) -> String {
        let doc = RadioMapDoc {
            version: RADIO_MAP_VERSION,
            floor_dbm: self.floor_dbm.dbm(),
            registry: self.registry.clone(),
            fingerprints: self
                .fingerprints
                .iter()
                .map(|f| FingerprintDoc {
                    location_id: f.location_id.clone(),
                    lat: f.point.lat,
                    lon: f.point.lon,
                    floor: f.point.floor,
                    signature: f.signature.iter().map(|(k, v)| (k.clone(), v.dbm())).collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("radio map serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DocumentError> {
        const KIND: &str = "radio map";
        let doc: RadioMapDoc = parse_versioned(KIND, text, RADIO_MAP_VERSION)?;
        let invalid = |message: String| DocumentError::Invalid { kind: KIND, message };
        let floor = RssiDbm::new(doc.floor_dbm).map_err(|e| invalid(e.to_string()))?;
        let mut fingerprints = Vec::with_capacity(doc.fingerprints.len());
        for f in doc.fingerprints {
            let mut signature = Signature::new();
            for (ap, v) in f.signature {
                signature.insert(ap, RssiDbm::new(v).map_err(|e| invalid(e.to_string()))?);
            }
            fingerprints.push(Fingerprint {
                location_id: f.location_id,
                point: GeoPoint {
                    lat: f.lat,
                    lon: f.lon,
                    floor: f.floor,
                },
                signature,
            });
        }
        RadioMap::new(fingerprints, doc.registry, floor).map_err(|e| invalid(e.to_string()))
    }
}

pub fn save_radio_map<W: Write>(map: &RadioMap, mut sink: W) -> std::io::Result<()> {
    sink.write_all(map.to_json().as_bytes())?;
    sink.write_all(b"\n")
}

pub fn load_radio_map<R: Read>(mut source: R) -> Result<RadioMap, DocumentError> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|source| DocumentError::Io { kind: "radio map", source })?;
    RadioMap::from_json(&text)
}
