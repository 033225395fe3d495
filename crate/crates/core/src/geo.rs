//! Shared primitives: geodetic points, radio identifiers and signal levels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Mean Earth radius used for every great-circle computation.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Lowest RSSI accepted from a scan log.
pub const RSSI_MIN_DBM: f64 = -120.0;
/// Highest RSSI accepted from a scan log.
pub const RSSI_MAX_DBM: f64 = 0.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("invalid BSSID {text:?}: {reason}")]
    Bssid { text: String, reason: &'static str },
    #[error("latitude {0} outside [-90, 90]")]
    Latitude(f64),
    #[error("longitude {0} outside [-180, 180]")]
    Longitude(f64),
    #[error("RSSI {0} dBm is not finite")]
    NonFiniteRssi(f64),
    #[error("RSSI {0} dBm outside accepted range [-120, 0]")]
    RssiRange(f64),
}

/// A geocoded location: latitude/longitude in degrees plus a floor label.
///
/// Floors are semantic; they never contribute to geodesic distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
    pub floor: i32,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64, floor: i32) -> Result<Self, GeoError> {
        if !(-90.0..=90.0).contains(&lat) {
            return Err(GeoError::Latitude(lat));
        }
        if !(-180.0..=180.0).contains(&lon) {
            return Err(GeoError::Longitude(lon));
        }
        Ok(Self { lat, lon, floor })
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        Self::new(self.lat, self.lon, self.floor).map(|_| ())
    }
}

/// Great-circle distance in meters on a sphere of radius [`EARTH_RADIUS_M`].
/// Floors are ignored.
pub fn haversine_distance(a: &GeoPoint, b: &GeoPoint) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Hardware address of a single radio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Bssid([u8; 6]);

impl Bssid {
    pub const fn from_octets(octets: [u8; 6]) -> Self {
        Self(octets)
    }

    pub fn octets(&self) -> [u8; 6] {
        self.0
    }

    /// The 48-bit address as an integer, most significant octet first.
    pub fn as_u64(&self) -> u64 {
        self.0.iter().fold(0u64, |acc, &b| (acc << 8) | b as u64)
    }
}

pub fn parse_bssid(text: &str) -> Result<Bssid, GeoError> {
    let err = |reason| GeoError::Bssid {
        text: text.to_string(),
        reason,
    };
    let parts: Vec<&str> = text.trim().split(':').collect();
    if parts.len() != 6 {
        return Err(err("expected six colon-separated octets"));
    }
    let mut octets = [0u8; 6];
    for (slot, part) in octets.iter_mut().zip(&parts) {
        if part.len() != 2 || !part.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(err("each octet must be two hex digits"));
        }
        *slot = u8::from_str_radix(part, 16).map_err(|_| err("each octet must be two hex digits"))?;
    }
    Ok(Bssid(octets))
}

impl FromStr for Bssid {
    type Err = GeoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_bssid(s)
    }
}

impl fmt::Display for Bssid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let o = self.0;
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            o[0], o[1], o[2], o[3], o[4], o[5]
        )
    }
}

impl Serialize for Bssid {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Bssid {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_bssid(&text).map_err(serde::de::Error::custom)
    }
}

/// Received signal strength in dBm.
///
/// Any finite value can be held (model outputs are not range limited);
/// [`RssiDbm::ingest`] applies the acceptance range used for measured data.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct RssiDbm(f64);

impl RssiDbm {
    pub fn new(dbm: f64) -> Result<Self, GeoError> {
        if dbm.is_finite() {
            Ok(Self(dbm))
        } else {
            Err(GeoError::NonFiniteRssi(dbm))
        }
    }

    /// Validates a measured value against `[-120, 0]` dBm.
    pub fn ingest(dbm: f64) -> Result<Self, GeoError> {
        let v = Self::new(dbm)?;
        if (RSSI_MIN_DBM..=RSSI_MAX_DBM).contains(&dbm) {
            Ok(v)
        } else {
            Err(GeoError::RssiRange(dbm))
        }
    }

    pub fn dbm(self) -> f64 {
        self.0
    }

    pub fn to_milliwatts(self) -> f64 {
        10f64.powf(self.0 / 10.0)
    }
}

impl<'de> Deserialize<'de> for RssiDbm {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(deserializer)?;
        RssiDbm::new(v).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for RssiDbm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} dBm", self.0)
    }
}
