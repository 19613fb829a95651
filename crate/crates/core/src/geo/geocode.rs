use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::RwLock;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::GeoPoint;
use crate::corpus::{normalize, Affiliation, CountryCode};

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("could not resolve address `{0}`")]
    Unresolved(String),
    #[error("geocoder failed for `{address}`: {message}")]
    Client { address: String, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad {what} data: {message}")]
    Format { what: &'static str, message: String },
    #[error("region `{0}` is not in the adjacency table")]
    UnknownRegion(String),
    #[error("scenario {0} needs province codes but one side has none")]
    MissingProvince(u8),
}

/// A source of coordinates for affiliation addresses. Results are degrees.
pub trait Geocoder: Send + Sync {
    fn name(&self) -> &str;
    fn lookup(&self, affiliation: &Affiliation) -> Result<Option<(f64, f64)>, GeoError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub address: String,
    pub lat: f64,
    pub lon: f64,
    pub source: String,
    pub ts: u64,
}

impl CacheEntry {
    pub fn point(&self) -> Option<GeoPoint> {
        GeoPoint::from_degrees(self.lat, self.lon)
    }
}

/// Address → coordinates cache. Reads are concurrent; writes take the lock.
#[derive(Debug, Default)]
pub struct GeocodeCache {
    entries: RwLock<BTreeMap<String, CacheEntry>>,
}

impl GeocodeCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, address: &str) -> Option<CacheEntry> {
        self.entries.read().unwrap().get(address).cloned()
    }

    pub fn insert(&self, entry: CacheEntry) {
        self.entries.write().unwrap().insert(entry.address.clone(), entry);
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn entries(&self) -> Vec<CacheEntry> {
        self.entries.read().unwrap().values().cloned().collect()
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, GeoError> {
        let cache = GeocodeCache::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|source| GeoError::Io {
                path: "<cache>".into(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: CacheEntry = serde_json::from_str(&line).map_err(|e| GeoError::Format {
                what: "cache",
                message: format!("line {}: {e}", i + 1),
            })?;
            cache.insert(entry);
        }
        Ok(cache)
    }

    /// Loads a cache file; a missing file yields an empty cache.
    pub fn load(path: &Path) -> Result<Self, GeoError> {
        match File::open(path) {
            Ok(f) => Self::from_reader(BufReader::new(f)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::new()),
            Err(source) => Err(GeoError::Io {
                path: path.display().to_string(),
                source,
            }),
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for entry in self.entries.read().unwrap().values() {
            serde_json::to_writer(&mut w, entry)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    }

    pub fn save(&self, path: &Path) -> Result<(), GeoError> {
        let io = |source| GeoError::Io {
            path: path.display().to_string(),
            source,
        };
        let f = File::create(path).map_err(io)?;
        self.write_to(BufWriter::new(f)).map_err(io)
    }
}

/// Offline city-level lookup table (CSV: city,province,country,lat,lon).
#[derive(Debug, Clone, Default)]
pub struct GazetteerGeocoder {
    by_province: BTreeMap<(String, String, String), (f64, f64)>,
    by_country: BTreeMap<(String, String), (f64, f64)>,
}

#[derive(Debug, Deserialize)]
struct GazetteerRow {
    city: String,
    province: String,
    country: String,
    lat: f64,
    lon: f64,
}

impl GazetteerGeocoder {
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, GeoError> {
        let mut g = GazetteerGeocoder::default();
        let mut rdr = csv::Reader::from_reader(reader);
        for row in rdr.deserialize::<GazetteerRow>() {
            let row = row.map_err(|e| GeoError::Format {
                what: "gazetteer",
                message: e.to_string(),
            })?;
            if GeoPoint::from_degrees(row.lat, row.lon).is_none() {
                return Err(GeoError::Format {
                    what: "gazetteer",
                    message: format!("coordinates out of range for {}", row.city),
                });
            }
            let country = CountryCode::parse(&row.country).ok_or_else(|| GeoError::Format {
                what: "gazetteer",
                message: format!("unknown country `{}`", row.country),
            })?;
            let city = normalize(&row.city);
            let cc = country.to_string();
            g.by_province
                .insert((city.clone(), normalize(&row.province), cc.clone()), (row.lat, row.lon));
            g.by_country.entry((city, cc)).or_insert((row.lat, row.lon));
        }
        Ok(g)
    }

    pub fn load(path: &Path) -> Result<Self, GeoError> {
        let f = File::open(path).map_err(|source| GeoError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_reader(f)
    }

    pub fn bundled() -> Self {
        Self::from_reader(include_str!("../../data/gazetteer.csv").as_bytes()).expect("bundled gazetteer is valid")
    }

    pub fn len(&self) -> usize {
        self.by_province.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_province.is_empty()
    }

    pub fn find(&self, aff: &Affiliation) -> Option<(f64, f64)> {
        let city = normalize(&aff.city);
        let cc = aff.country.to_string();
        let province = normalize(aff.province.as_deref().unwrap_or(""));
        self.by_province
            .get(&(city.clone(), province, cc.clone()))
            .or_else(|| self.by_country.get(&(city, cc)))
            .copied()
    }
}

impl Geocoder for GazetteerGeocoder {
    fn name(&self) -> &str {
        "gazetteer"
    }

    fn lookup(&self, affiliation: &Affiliation) -> Result<Option<(f64, f64)>, GeoError> {
        Ok(self.find(affiliation))
    }
}

/// Test geocoder returning a fixed answer and counting calls.
#[derive(Debug, Default)]
pub struct StubGeocoder {
    answer: Option<(f64, f64)>,
    fail: bool,
    calls: AtomicUsize,
}

impl StubGeocoder {
    pub fn returning(lat: f64, lon: f64) -> Self {
        StubGeocoder {
            answer: Some((lat, lon)),
            ..Default::default()
        }
    }

    pub fn failing() -> Self {
        StubGeocoder {
            fail: true,
            ..Default::default()
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Geocoder for StubGeocoder {
    fn name(&self) -> &str {
        "stub"
    }

    fn lookup(&self, affiliation: &Affiliation) -> Result<Option<(f64, f64)>, GeoError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if self.fail {
            return Err(GeoError::Client {
                address: affiliation.address_key(),
                message: "stub failure".into(),
            });
        }
        Ok(self.answer)
    }
}

fn now_secs() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Resolves an affiliation to a point.
///
/// Explicit record coordinates win; then the cache; then `client`; then the
/// optional offline gazetteer. Successful lookups are written to the cache.
pub fn geocode(
    affiliation: &Affiliation,
    client: &dyn Geocoder,
    cache: &GeocodeCache,
    fallback: Option<&GazetteerGeocoder>,
) -> Result<GeoPoint, GeoError> {
    if let Some(c) = affiliation.coordinates {
        return Ok(c.to_point());
    }
    let address = affiliation.address_key();
    if let Some(hit) = cache.get(&address) {
        return hit.point().ok_or_else(|| GeoError::Format {
            what: "cache",
            message: format!("invalid coordinates for `{address}`"),
        });
    }
    let client_answer = client.lookup(affiliation).ok().flatten();
    let (found, source) = match client_answer {
        Some(ll) => (Some(ll), client.name()),
        None => (fallback.and_then(|g| g.find(affiliation)), "gazetteer"),
    };
    let (lat, lon) = found.ok_or_else(|| GeoError::Unresolved(address.clone()))?;
    let point = GeoPoint::from_degrees(lat, lon).ok_or_else(|| GeoError::Client {
        address: address.clone(),
        message: format!("coordinates out of range: {lat}, {lon}"),
    })?;
    cache.insert(CacheEntry {
        address,
        lat,
        lon,
        source: source.to_string(),
        ts: now_secs(),
    });
    Ok(point)
}

/// A geocoder bundled with its cache and offline fallback.
pub struct Resolver {
    pub cache: GeocodeCache,
    pub client: Box<dyn Geocoder>,
    pub fallback: Option<GazetteerGeocoder>,
}

impl Resolver {
    /// Offline resolver: bundled gazetteer as the client, no further fallback.
    pub fn offline(cache: GeocodeCache) -> Self {
        Resolver {
            cache,
            client: Box::new(GazetteerGeocoder::bundled()),
            fallback: None,
        }
    }

    pub fn resolve(&self, affiliation: &Affiliation) -> Result<GeoPoint, GeoError> {
        geocode(affiliation, self.client.as_ref(), &self.cache, self.fallback.as_ref())
    }
}

/// Thin client for a Google-style geocoding endpoint
/// (`GET {base}?address=...&key=...` answering
/// `{"status":"OK","results":[{"geometry":{"location":{"lat":..,"lng":..}}}]}`),
/// spaced by at least `min_interval` between requests.
#[cfg(feature = "live-geocoder")]
pub struct HttpGeocoder {
    base_url: String,
    api_key: String,
    min_interval: std::time::Duration,
    last: std::sync::Mutex<Option<std::time::Instant>>,
}

#[cfg(feature = "live-geocoder")]
impl HttpGeocoder {
    pub fn new(base_url: impl Into<String>, api_key: impl Into<String>, per_second: f64) -> Self {
        HttpGeocoder {
            base_url: base_url.into(),
            api_key: api_key.into(),
            min_interval: std::time::Duration::from_secs_f64(1.0 / per_second.max(1e-3)),
            last: std::sync::Mutex::new(None),
        }
    }
}

#[cfg(feature = "live-geocoder")]
impl Geocoder for HttpGeocoder {
    fn name(&self) -> &str {
        "http"
    }

    fn lookup(&self, affiliation: &Affiliation) -> Result<Option<(f64, f64)>, GeoError> {
        let address = affiliation.address_key();
        {
            let mut last = self.last.lock().unwrap();
            if let Some(t) = *last {
                let elapsed = t.elapsed();
                if elapsed < self.min_interval {
                    std::thread::sleep(self.min_interval - elapsed);
                }
            }
            *last = Some(std::time::Instant::now());
        }
        let client_err = |message: String| GeoError::Client {
            address: address.clone(),
            message,
        };
        let body: serde_json::Value = ureq::get(&self.base_url)
            .query("address", &address)
            .query("key", &self.api_key)
            .call()
            .map_err(|e| client_err(e.to_string()))?
            .into_json()
            .map_err(|e| client_err(e.to_string()))?;
        match body["status"].as_str() {
            Some("OK") => {
                let loc = &body["results"][0]["geometry"]["location"];
                match (loc["lat"].as_f64(), loc["lng"].as_f64()) {
                    (Some(lat), Some(lon)) => Ok(Some((lat, lon))),
                    _ => Err(client_err("response without a location".into())),
                }
            }
            Some("ZERO_RESULTS") => Ok(None),
            other => Err(client_err(format!("status {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Coordinates;

    fn aff(city: &str, province: Option<&str>, country: &str) -> Affiliation {
        let country = CountryCode::parse(country).unwrap();
        Affiliation {
            institution: "Some University".into(),
            city: city.into(),
            province: province.map(String::from),
            country,
            continent: country.continent(),
            coordinates: None,
        }
    }

    #[test]
    fn cache_hit_skips_client() {
        let a = aff("Nowhere", None, "CA");
        let cache = GeocodeCache::new();
        cache.insert(CacheEntry {
            address: a.address_key(),
            lat: 10.0,
            lon: 20.0,
            source: "seed".into(),
            ts: 0,
        });
        let stub = StubGeocoder::returning(0.0, 0.0);
        let p = geocode(&a, &stub, &cache, None).unwrap();
        assert_eq!(p, GeoPoint::from_degrees(10.0, 20.0).unwrap());
        assert_eq!(stub.calls(), 0);
    }

    #[test]
    fn explicit_coordinates_bypass_everything() {
        let mut a = aff("Nowhere", None, "CA");
        a.coordinates = Some(Coordinates {
            lat_deg: 1.5,
            lon_deg: -2.5,
        });
        let stub = StubGeocoder::failing();
        let cache = GeocodeCache::new();
        let p = geocode(&a, &stub, &cache, None).unwrap();
        assert_eq!(p, GeoPoint::from_degrees(1.5, -2.5).unwrap());
        assert_eq!(stub.calls(), 0);
        assert!(cache.is_empty());
    }

    #[test]
    fn miss_calls_client_and_caches() {
        let a = aff("Nowhere", None, "CA");
        let stub = StubGeocoder::returning(12.0, 34.0);
        let cache = GeocodeCache::new();
        let p = geocode(&a, &stub, &cache, None).unwrap();
        assert_eq!(p, GeoPoint::from_degrees(12.0, 34.0).unwrap());
        assert_eq!(cache.len(), 1);
        assert_eq!(cache.get(&a.address_key()).unwrap().source, "stub");
        geocode(&a, &stub, &cache, None).unwrap();
        assert_eq!(stub.calls(), 1);
    }

    #[test]
    fn client_failure_falls_back_or_errors() {
        let stub = StubGeocoder::failing();
        let cache = GeocodeCache::new();
        let gaz = GazetteerGeocoder::bundled();
        let mtl = aff("Montreal", Some("QC"), "CA");
        let p = geocode(&mtl, &stub, &cache, Some(&gaz)).unwrap();
        assert_eq!(p, GeoPoint::from_degrees(45.5019, -73.5674).unwrap());
        assert_eq!(cache.get(&mtl.address_key()).unwrap().source, "gazetteer");

        let lost = aff("Atlantis", None, "GR");
        match geocode(&lost, &stub, &cache, Some(&gaz)) {
            Err(GeoError::Unresolved(addr)) => assert!(addr.contains("atlantis")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn gazetteer_disambiguates_by_country_and_province() {
        let gaz = GazetteerGeocoder::bundled();
        let on = gaz.find(&aff("London", Some("ON"), "CA")).unwrap();
        let uk = gaz.find(&aff("london", None, "GB")).unwrap();
        assert!(on.1 < -80.0 && uk.1 > -1.0);
        // province unknown to the table still resolves by city + country
        assert!(gaz.find(&aff("Paris", Some("IDF"), "FR")).is_some());
    }

    #[test]
    fn cache_file_round_trips_bit_exactly() {
        let cache = GeocodeCache::new();
        for (i, (lat, lon)) in [(0.1 + 0.2, -73.567_400_000_000_01), (1.0 / 3.0, 2.0 / 7.0)]
            .into_iter()
            .enumerate()
        {
            cache.insert(CacheEntry {
                address: format!("addr {i}"),
                lat,
                lon,
                source: "stub".into(),
                ts: 1_700_000_000 + i as u64,
            });
        }
        let mut buf = Vec::new();
        cache.write_to(&mut buf).unwrap();
        let back = GeocodeCache::from_reader(buf.as_slice()).unwrap();
        let (a, b) = (cache.entries(), back.entries());
        assert_eq!(a, b);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.lat.to_bits(), y.lat.to_bits());
            assert_eq!(x.lon.to_bits(), y.lon.to_bits());
        }
    }
}
