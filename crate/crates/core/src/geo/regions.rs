use std::collections::BTreeSet;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::GeoError;
use crate::corpus::{Affiliation, Continent, CountryCode, ScenarioId};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RegionTags {
    pub province: Option<String>,
    pub country: CountryCode,
    pub continent: Continent,
}

impl RegionTags {
    pub fn new(province: Option<&str>, country: CountryCode) -> Self {
        RegionTags {
            province: province.map(|p| p.trim().to_ascii_uppercase()),
            country,
            continent: country.continent(),
        }
    }

    pub fn of(aff: &Affiliation) -> Self {
        Self::new(aff.province.as_deref(), aff.country)
    }

    /// Region code at `level`: `CC-PROV` for provinces, `CC` for countries.
    pub fn code(&self, level: RegionLevel) -> Option<String> {
        match level {
            RegionLevel::Country => Some(self.country.to_string()),
            RegionLevel::Province => self.province.as_ref().map(|p| format!("{}-{}", self.country, p)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InstitutionalFlags {
    pub different_province: Option<bool>,
    pub different_country: Option<bool>,
}

/// Same-province / same-country indicators; which ones exist depends on the scenario.
pub fn institutional_binaries(
    a: &RegionTags,
    b: &RegionTags,
    scenario: ScenarioId,
) -> Result<InstitutionalFlags, GeoError> {
    let province = || -> Result<bool, GeoError> {
        match (a.code(RegionLevel::Province), b.code(RegionLevel::Province)) {
            (Some(pa), Some(pb)) => Ok(pa != pb),
            _ => Err(GeoError::MissingProvince(scenario.number())),
        }
    };
    let country = a.country != b.country;
    Ok(match scenario {
        ScenarioId::Canada => InstitutionalFlags {
            different_province: Some(province()?),
            different_country: None,
        },
        ScenarioId::NorthAmerica => InstitutionalFlags {
            different_province: Some(province()?),
            different_country: Some(country),
        },
        ScenarioId::NorthAmericaEurope | ScenarioId::World => InstitutionalFlags {
            different_province: None,
            different_country: Some(country),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionLevel {
    Province,
    Country,
}

impl RegionLevel {
    /// Province-level contiguity where provinces are tagged, country-level otherwise.
    pub fn for_scenario(scenario: ScenarioId) -> Self {
        match scenario {
            ScenarioId::Canada | ScenarioId::NorthAmerica => RegionLevel::Province,
            _ => RegionLevel::Country,
        }
    }
}

/// Symmetric, irreflexive set of contiguous region pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyTable {
    level: RegionLevel,
    pairs: BTreeSet<(String, String)>,
    regions: BTreeSet<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct AdjacencyFile {
    level: RegionLevel,
    pairs: Vec<[String; 2]>,
    /// Regions without any neighbour that still belong to the namespace.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    regions: Vec<String>,
}

impl AdjacencyTable {
    pub fn new<I, S>(level: RegionLevel, pairs: I) -> Result<Self, GeoError>
    where
        I: IntoIterator<Item = (S, S)>,
        S: AsRef<str>,
    {
        let mut table = AdjacencyTable {
            level,
            pairs: BTreeSet::new(),
            regions: BTreeSet::new(),
        };
        for (a, b) in pairs {
            let (a, b) = (
                a.as_ref().trim().to_ascii_uppercase(),
                b.as_ref().trim().to_ascii_uppercase(),
            );
            if a == b {
                return Err(GeoError::Format {
                    what: "adjacency",
                    message: format!("region `{a}` declared adjacent to itself"),
                });
            }
            table.regions.insert(a.clone());
            table.regions.insert(b.clone());
            table.pairs.insert(if a < b { (a, b) } else { (b, a) });
        }
        Ok(table)
    }

    pub fn from_json<R: Read>(reader: R) -> Result<Self, GeoError> {
        let file: AdjacencyFile = serde_json::from_reader(reader).map_err(|e| GeoError::Format {
            what: "adjacency",
            message: e.to_string(),
        })?;
        let table = Self::new(file.level, file.pairs.into_iter().map(|[a, b]| (a, b)))?;
        Ok(table.with_regions(file.regions))
    }

    pub fn to_json(&self) -> String {
        let connected: BTreeSet<&String> = self.pairs.iter().flat_map(|(a, b)| [a, b]).collect();
        let file = AdjacencyFile {
            level: self.level,
            pairs: self.pairs.iter().map(|(a, b)| [a.clone(), b.clone()]).collect(),
            regions: self
                .regions
                .iter()
                .filter(|r| !connected.contains(r))
                .cloned()
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("serializable")
    }

    /// Adds regions to the namespace without declaring neighbours.
    pub fn with_regions<I, S>(mut self, regions: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.regions
            .extend(regions.into_iter().map(|r| r.as_ref().trim().to_ascii_uppercase()));
        self
    }

    /// Canadian provinces and US states, codes `CA-QC`, `US-NY`, ...
    pub fn bundled_province() -> Self {
        Self::from_json(include_str!("../../data/adjacency_province.json").as_bytes())
            .expect("bundled province adjacency is valid")
    }

    /// Land borders of Europe and North America plus a few others; every
    /// known country code is in the namespace.
    pub fn bundled_country() -> Self {
        Self::from_json(include_str!("../../data/adjacency_country.json").as_bytes())
            .expect("bundled country adjacency is valid")
            .with_regions(CountryCode::all().map(|c| c.to_string()))
    }

    pub fn bundled(level: RegionLevel) -> Self {
        match level {
            RegionLevel::Province => Self::bundled_province(),
            RegionLevel::Country => Self::bundled_country(),
        }
    }

    pub fn level(&self) -> RegionLevel {
        self.level
    }

    pub fn contains_region(&self, code: &str) -> bool {
        self.regions.contains(code)
    }

    pub fn adjacent(&self, a: &str, b: &str) -> bool {
        let (x, y) = if a < b { (a, b) } else { (b, a) };
        self.pairs.contains(&(x.to_string(), y.to_string()))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// `true` ("not contiguous") unless the regions share a border or coincide.
pub fn contiguity_binary(a: &RegionTags, b: &RegionTags, adj: &AdjacencyTable) -> Result<bool, GeoError> {
    let level = adj.level();
    let code = |t: &RegionTags| -> Result<String, GeoError> {
        let c = t
            .code(level)
            .ok_or(GeoError::UnknownRegion(format!("{}-?", t.country)))?;
        if adj.contains_region(&c) {
            Ok(c)
        } else {
            Err(GeoError::UnknownRegion(c))
        }
    };
    let (ca, cb) = (code(a)?, code(b)?);
    Ok(ca != cb && !adj.adjacent(&ca, &cb))
}
