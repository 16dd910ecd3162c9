//! Pose-stamped road imagery: the on-disk store, grid queries, and imagery
//! providers with a local cache.
//!
//! A store is a directory holding `index.jsonl` (one JSON object per record,
//! keys `id, lat, lon, heading, pitch, captured, file`), the PNG files the
//! records point at, and a `cache/` directory for provider fetches.

mod provider;
mod store;

pub use provider::{
    cache_file_name, fetch, HttpTemplateProvider, ImageCache, LocalDirProvider, Provider,
    ViewRequest, PROVIDER_KEY_ENV,
};
pub use store::{grid_lattice, GridHit, ImageRecord, Store, INDEX_FILE};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Latitude/longitude in WGS-84 degrees plus camera heading (clockwise from
/// north, normalized into `[0, 360)`) and pitch (degrees above horizontal).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPose {
    pub lat: f64,
    pub lon: f64,
    pub heading: f64,
    pub pitch: f64,
}

impl GeoPose {
    pub fn new(lat: f64, lon: f64, heading: f64, pitch: f64) -> Result<Self> {
        if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(Error::field("lat", format!("{lat} is outside [-90, 90]")));
        }
        if !lon.is_finite() || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::field("lon", format!("{lon} is outside [-180, 180]")));
        }
        if !heading.is_finite() {
            return Err(Error::field("heading", format!("{heading} is not finite")));
        }
        if !pitch.is_finite() || !(-90.0..=90.0).contains(&pitch) {
            return Err(Error::field("pitch", format!("{pitch} is outside [-90, 90]")));
        }
        Ok(Self {
            lat,
            lon,
            heading: normalize_heading(heading),
            pitch,
        })
    }

    /// Parses `lat,lon,heading,pitch`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(Error::InvalidArgument(format!(
                "pose must be lat,lon,heading,pitch, got {s:?}"
            )));
        }
        let names = ["lat", "lon", "heading", "pitch"];
        let mut v = [0.0; 4];
        for (i, p) in parts.iter().enumerate() {
            v[i] = p
                .parse()
                .map_err(|_| Error::field(names[i], format!("{p:?} is not a number")))?;
        }
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn with_heading(self, heading: f64) -> Self {
        Self {
            heading: normalize_heading(heading),
            ..self
        }
    }

    pub fn with_pitch(self, pitch: f64) -> Self {
        Self {
            pitch: pitch.clamp(-90.0, 90.0),
            ..self
        }
    }

    /// Equirectangular planar distance in degrees (longitude scaled by the
    /// cosine of `self.lat`).
    pub fn planar_distance(&self, other: &GeoPose) -> f64 {
        planar_distance(self.lat, self.lon, other.lat, other.lon)
    }
}

impl std::fmt::Display for GeoPose {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "({:.7}, {:.7}, {:.2}, {:.2})",
            self.lat, self.lon, self.heading, self.pitch
        )
    }
}

pub fn normalize_heading(h: f64) -> f64 {
    let n = h.rem_euclid(360.0);
    if n >= 360.0 {
        0.0
    } else {
        n
    }
}

pub(crate) fn planar_distance(lat0: f64, lon0: f64, lat1: f64, lon1: f64) -> f64 {
    let dy = lat1 - lat0;
    let dx = (lon1 - lon0) * lat0.to_radians().cos();
    (dx * dx + dy * dy).sqrt()
}
