use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Continent {
    Africa,
    Antarctica,
    Asia,
    Europe,
    NorthAmerica,
    Oceania,
    SouthAmerica,
}

impl Continent {
    pub fn as_str(self) -> &'static str {
        match self {
            Continent::Africa => "africa",
            Continent::Antarctica => "antarctica",
            Continent::Asia => "asia",
            Continent::Europe => "europe",
            Continent::NorthAmerica => "north_america",
            Continent::Oceania => "oceania",
            Continent::SouthAmerica => "south_america",
        }
    }
}

impl FromStr for Continent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "africa" => Continent::Africa,
            "antarctica" => Continent::Antarctica,
            "asia" => Continent::Asia,
            "europe" => Continent::Europe,
            "north_america" => Continent::NorthAmerica,
            "oceania" => Continent::Oceania,
            "south_america" => Continent::SouthAmerica,
            other => return Err(format!("unknown continent `{other}`")),
        })
    }
}

/// ISO-3166 alpha-2 country code, validated against the bundled table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CountryCode([u8; 2]);

impl CountryCode {
    pub fn parse(code: &str) -> Option<Self> {
        let code = code.trim().to_ascii_uppercase();
        let bytes = code.as_bytes();
        if bytes.len() != 2 {
            return None;
        }
        let cc = CountryCode([bytes[0], bytes[1]]);
        table().contains_key(&cc).then_some(cc)
    }

    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.0).expect("ascii")
    }

    pub fn continent(&self) -> Continent {
        table()[self]
    }

    /// Every code known to the bundled table, in code order.
    pub fn all() -> impl Iterator<Item = CountryCode> {
        table().keys().copied()
    }
}

impl fmt::Display for CountryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for CountryCode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for CountryCode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        CountryCode::parse(&s).ok_or_else(|| serde::de::Error::custom(format!("unknown country code `{s}`")))
    }
}

fn table() -> &'static BTreeMap<CountryCode, Continent> {
    static TABLE: OnceLock<BTreeMap<CountryCode, Continent>> = OnceLock::new();
    TABLE.get_or_init(|| {
        include_str!("../../data/countries.csv")
            .lines()
            .skip(1)
            .filter(|l| !l.trim().is_empty())
            .map(|line| {
                let (code, continent) = line.split_once(',').expect("code,continent");
                let b = code.as_bytes();
                (CountryCode([b[0], b[1]]), continent.trim().parse().expect("continent"))
            })
            .collect()
    })
}
