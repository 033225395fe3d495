//! Radio propagation model.
//!
//! Received power follows
//!
//! ```text
//! P_r = P_t * (lambda / (4*pi*d))^n * G_t * G_r
//! ```
//!
//! evaluated in the dB domain as
//! `pt_dbm + gt_db + gr_db + 10*n*log10(lambda / (4*pi*d))`. The exponent
//! applies to the whole `lambda / (4*pi*d)` factor; there is no reference
//! distance as in the usual log-distance form.

use std::f64::consts::PI;

use chrono::{DateTime, Duration, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{Bssid, RssiDbm};
use crate::radiomap::{Scan, ScanReading};

/// Distances below this are clamped when synthesizing scans.
pub const MIN_SIM_DISTANCE_M: f64 = 0.1;

/// Scan-index bit reserved for evaluation (test) scans.
pub const TEST_STREAM: u64 = 1 << 63;
/// Scan-index bit reserved for scans synthesized by the service.
pub const SERVICE_STREAM: u64 = 1 << 62;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PropagationError {
    #[error("distance must be finite and positive, got {0} m")]
    Distance(f64),
    #[error("invalid propagation parameters: {0}")]
    Params(String),
    #[error("received power {0} is not finite")]
    Power(f64),
    #[error("no transmitters to synthesize a scan from")]
    NoTransmitters,
    #[error("transmitter {0:?} has no radios")]
    NoRadios(String),
    #[error("transmitter {ap:?} lists radio {bssid} twice")]
    DuplicateRadio { ap: String, bssid: Bssid },
    #[error("noise sigma must be finite and >= 0, got {0}")]
    Sigma(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationParams {
    /// Transmit power, dBm.
    pub pt_dbm: f64,
    /// Transmitter antenna gain, dB.
    pub gt_db: f64,
    /// Receiver antenna gain, dB.
    pub gr_db: f64,
    pub wavelength_m: f64,
    /// Path loss coefficient.
    pub n: f64,
}

impl Default for PropagationParams {
    /// 20 dBm at 2.4 GHz (0.125 m), isotropic antennas, n = 3.
    fn default() -> Self {
        Self {
            pt_dbm: 20.0,
            gt_db: 0.0,
            gr_db: 0.0,
            wavelength_m: 0.125,
            n: 3.0,
        }
    }
}

impl PropagationParams {
    pub fn validate(&self) -> Result<(), PropagationError> {
        let fields = [self.pt_dbm, self.gt_db, self.gr_db, self.wavelength_m, self.n];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(PropagationError::Params("all fields must be finite".into()));
        }
        if self.wavelength_m <= 0.0 {
            return Err(PropagationError::Params(format!(
                "wavelength must be positive, got {}",
                self.wavelength_m
            )));
        }
        if self.n <= 0.0 {
            return Err(PropagationError::Params(format!(
                "path loss coefficient must be positive, got {}",
                self.n
            )));
        }
        if !(2.0..=6.0).contains(&self.n) {
            log::warn!("path loss coefficient {} outside the usual [2, 6]", self.n);
        }
        Ok(())
    }

    /// Sum of transmit power and both antenna gains, dB.
    fn eirp_db(&self) -> f64 {
        self.pt_dbm + self.gt_db + self.gr_db
    }

    /// Distance at which `lambda / (4*pi*d)` equals one.
    pub fn unit_distance_m(&self) -> f64 {
        self.wavelength_m / (4.0 * PI)
    }
}

pub fn received_power_dbm(params: &PropagationParams, distance_m: f64) -> Result<RssiDbm, PropagationError> {
    params.validate()?;
    if !distance_m.is_finite() || distance_m <= 0.0 {
        return Err(PropagationError::Distance(distance_m));
    }
    let ratio = params.wavelength_m / (4.0 * PI * distance_m);
    let dbm = params.eirp_db() + 10.0 * params.n * ratio.log10();
    RssiDbm::new(dbm).map_err(|_| PropagationError::Power(dbm))
}

/// Inverse of [`received_power_dbm`].
pub fn distance_from_power(params: &PropagationParams, rssi: RssiDbm) -> Result<f64, PropagationError> {
    params.validate()?;
    let exponent = (params.eirp_db() - rssi.dbm()) / (10.0 * params.n);
    let d = params.unit_distance_m() * 10f64.powf(exponent);
    if d.is_finite() && d > 0.0 {
        Ok(d)
    } else {
        Err(PropagationError::Distance(d))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarPoint {
    pub x: f64,
    pub y: f64,
}

impl PlanarPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &PlanarPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// An access point placed in the planar scenario frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedTransmitter {
    /// Network name shared by all radios of this access point.
    pub ap_name: String,
    pub position: PlanarPoint,
    pub radios: Vec<Bssid>,
    pub params: PropagationParams,
}

impl PlacedTransmitter {
    pub fn validate(&self) -> Result<(), PropagationError> {
        if self.radios.is_empty() {
            return Err(PropagationError::NoRadios(self.ap_name.clone()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for r in &self.radios {
            if !seen.insert(*r) {
                return Err(PropagationError::DuplicateRadio {
                    ap: self.ap_name.clone(),
                    bssid: *r,
                });
            }
        }
        self.params.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Standard deviation of the additive Gaussian noise, dB.
    pub sigma_db: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<(), PropagationError> {
        if self.sigma_db.is_finite() && self.sigma_db >= 0.0 {
            Ok(())
        } else {
            Err(PropagationError::Sigma(self.sigma_db))
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the noise stream for one reading.
pub fn reading_stream_seed(seed: u64, scan_index: u64, bssid: Bssid) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ scan_index) ^ bssid.as_u64())
}

/// Synthetic scans are stamped one second apart from this instant.
pub fn synthetic_timestamp(scan_index: u64) -> DateTime<Utc> {
    let base = DateTime::from_timestamp(946_684_800, 0).expect("valid epoch");
    base + Duration::seconds((scan_index & 0xffff_ffff) as i64)
}

/// Synthesize one scan at `device_pos`: one reading per radio of every
/// transmitter, with seeded Gaussian noise drawn per `(seed, scan_index, bssid)`.
pub fn synth_scan(
    transmitters: &[PlacedTransmitter],
    device_pos: PlanarPoint,
    noise: &NoiseModel,
    scan_index: u64,
) -> Result<Scan, PropagationError> {
    if transmitters.is_empty() {
        return Err(PropagationError::NoTransmitters);
    }
    noise.validate()?;
    let mut readings = Vec::with_capacity(transmitters.iter().map(|t| t.radios.len()).sum());
    for tx in transmitters {
        tx.validate()?;
        let mut d = tx.position.distance(&device_pos);
        if d < MIN_SIM_DISTANCE_M {
            log::debug!(
                "clamping distance {d:.4} m to {MIN_SIM_DISTANCE_M} m for transmitter {}",
                tx.ap_name
            );
            d = MIN_SIM_DISTANCE_M;
        }
        let model = received_power_dbm(&tx.params, d)?.dbm();
        for &bssid in &tx.radios {
            let value = if noise.sigma_db > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(reading_stream_seed(noise.seed, scan_index, bssid));
                let normal = Normal::new(0.0, noise.sigma_db).map_err(|_| PropagationError::Sigma(noise.sigma_db))?;
                model + normal.sample(&mut rng)
            } else {
                model
            };
            readings.push(ScanReading {
                bssid,
                ssid: tx.ap_name.clone(),
                rssi: RssiDbm::new(value).map_err(|_| PropagationError::Power(value))?,
            });
        }
    }
    Ok(Scan::new(synthetic_timestamp(scan_index), readings))
}
