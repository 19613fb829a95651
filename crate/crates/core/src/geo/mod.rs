//! Geography: coordinates, great-circle distance and region binaries.

mod geocode;
mod regions;

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

#[cfg(feature = "live-geocoder")]
pub use geocode::HttpGeocoder;
pub use geocode::{geocode, CacheEntry, GazetteerGeocoder, GeoError, GeocodeCache, Geocoder, Resolver, StubGeocoder};
pub use regions::{
    contiguity_binary, institutional_binaries, AdjacencyTable, InstitutionalFlags, RegionLevel, RegionTags,
};

/// A point on the sphere, stored in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    lat_rad: f64,
    lon_rad: f64,
}

impl GeoPoint {
    pub fn from_radians(lat_rad: f64, lon_rad: f64) -> Option<Self> {
        let ok = lat_rad.is_finite()
            && lon_rad.is_finite()
            && (-FRAC_PI_2..=FRAC_PI_2).contains(&lat_rad)
            && (-PI..=PI).contains(&lon_rad);
        ok.then_some(GeoPoint { lat_rad, lon_rad })
    }

    pub fn from_degrees(lat: f64, lon: f64) -> Option<Self> {
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return None;
        }
        let lat_rad = lat.to_radians().clamp(-FRAC_PI_2, FRAC_PI_2);
        let lon_rad = lon.to_radians().clamp(-PI, PI);
        Self::from_radians(lat_rad, lon_rad)
    }

    pub fn lat_rad(&self) -> f64 {
        self.lat_rad
    }

    pub fn lon_rad(&self) -> f64 {
        self.lon_rad
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarthModel {
    pub radius_km: f64,
}

impl EarthModel {
    pub const RADIUS_KM: f64 = 6373.0;
}

impl Default for EarthModel {
    fn default() -> Self {
        EarthModel {
            radius_km: Self::RADIUS_KM,
        }
    }
}

/// Haversine great-circle distance in kilometres.
pub fn haversine_km(p: GeoPoint, q: GeoPoint, earth: EarthModel) -> f64 {
    let half_dlat = (q.lat_rad - p.lat_rad) / 2.0;
    let half_dlon = (q.lon_rad - p.lon_rad) / 2.0;
    let a = half_dlat.sin().powi(2) + p.lat_rad.cos() * q.lat_rad.cos() * half_dlon.sin().powi(2);
    // rounding can push `a` a hair outside [0, 1] near antipodes
    let a = a.clamp(0.0, 1.0);
    earth.radius_km * 2.0 * a.sqrt().atan2((1.0 - a).sqrt())
}
