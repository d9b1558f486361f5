//! Shared domain types: indicators, climate classes, station samples and
//! feature regimes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the four field-measured surface water indicators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Indicator {
    Ph,
    DissolvedOxygen,
    SpecificConductance,
    WaterTemperature,
}

impl Indicator {
    /// Fixed order used for feature columns and reports.
    pub const ALL: [Indicator; 4] = [
        Indicator::Ph,
        Indicator::DissolvedOxygen,
        Indicator::SpecificConductance,
        Indicator::WaterTemperature,
    ];

    pub fn unit(self) -> &'static str {
        match self {
            Indicator::Ph => "pH Units",
            Indicator::DissolvedOxygen => "mg/L",
            Indicator::SpecificConductance => "µS/cm@25°C",
            Indicator::WaterTemperature => "°C",
        }
    }

    /// Human-readable name, also used as the design-matrix column name.
    pub fn display_name(self) -> &'static str {
        match self {
            Indicator::Ph => "pH",
            Indicator::DissolvedOxygen => "Dissolved Oxygen",
            Indicator::SpecificConductance => "Specific Conductance",
            Indicator::WaterTemperature => "Water Temperature",
        }
    }

    /// Short machine token (`ph`, `do`, `sc`, `wt`) used in file names and CLI flags.
    pub fn token(self) -> &'static str {
        match self {
            Indicator::Ph => "ph",
            Indicator::DissolvedOxygen => "do",
            Indicator::SpecificConductance => "sc",
            Indicator::WaterTemperature => "wt",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Indicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Indicator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace(['_', '-', ' '], "").as_str() {
            "ph" => Ok(Indicator::Ph),
            "do" | "dissolvedoxygen" => Ok(Indicator::DissolvedOxygen),
            "sc" | "specificconductance" => Ok(Indicator::SpecificConductance),
            "wt" | "watertemperature" => Ok(Indicator::WaterTemperature),
            _ => Err(Error::InvalidArgument(format!("unknown indicator `{s}`"))),
        }
    }
}

/// Köppen major climate class present in California.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MajorClimate {
    B,
    C,
    D,
}

impl MajorClimate {
    pub const ALL: [MajorClimate; 3] = [MajorClimate::B, MajorClimate::C, MajorClimate::D];

    pub fn code(self) -> &'static str {
        match self {
            MajorClimate::B => "B",
            MajorClimate::C => "C",
            MajorClimate::D => "D",
        }
    }
}

/// The nine Köppen sub-climates found in California. Any other code is
/// rejected with [`Error::UnknownClimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum KoppenClass {
    BWh,
    BWk,
    BSh,
    BSk,
    Csa,
    Csb,
    Dsa,
    Dsb,
    Dsc,
}

impl KoppenClass {
    pub const ALL: [KoppenClass; 9] = [
        KoppenClass::BWh,
        KoppenClass::BWk,
        KoppenClass::BSh,
        KoppenClass::BSk,
        KoppenClass::Csa,
        KoppenClass::Csb,
        KoppenClass::Dsa,
        KoppenClass::Dsb,
        KoppenClass::Dsc,
    ];

    pub fn code(self) -> &'static str {
        match self {
            KoppenClass::BWh => "BWh",
            KoppenClass::BWk => "BWk",
            KoppenClass::BSh => "BSh",
            KoppenClass::BSk => "BSk",
            KoppenClass::Csa => "Csa",
            KoppenClass::Csb => "Csb",
            KoppenClass::Dsa => "Dsa",
            KoppenClass::Dsb => "Dsb",
            KoppenClass::Dsc => "Dsc",
        }
    }

    pub fn major(self) -> MajorClimate {
        match self.code().as_bytes()[0] {
            b'B' => MajorClimate::B,
            b'C' => MajorClimate::C,
            _ => MajorClimate::D,
        }
    }
}

impl fmt::Display for KoppenClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for KoppenClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        KoppenClass::ALL
            .into_iter()
            .find(|k| k.code() == s)
            .ok_or_else(|| Error::UnknownClimate(s.to_string()))
    }
}

/// Major class (first letter) of a sub-climate code.
pub fn major_of(sub: &str) -> Result<MajorClimate> {
    sub.parse::<KoppenClass>().map(KoppenClass::major)
}

/// Station classification by distance to the coastline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GeoType {
    Inland,
    Coastal,
}

impl GeoType {
    pub const ALL: [GeoType; 2] = [GeoType::Inland, GeoType::Coastal];

    pub fn name(self) -> &'static str {
        match self {
            GeoType::Inland => "Inland",
            GeoType::Coastal => "Coastal",
        }
    }
}

impl fmt::Display for GeoType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GeoType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "Inland" => Ok(GeoType::Inland),
            "Coastal" => Ok(GeoType::Coastal),
            other => Err(Error::InvalidArgument(format!("unknown geographical type `{other}`"))),
        }
    }
}

/// Labels attached to a record by geo-derivation. A record carries either
/// both labels or neither.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SiteLabels {
    pub climate_zone: KoppenClass,
    pub geographical_type: GeoType,
}

/// One station-month observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub station_id: u64,
    pub latitude: f64,
    pub longitude: f64,
    pub county: String,
    pub year: i32,
    pub month: u8,
    pub ph: f64,
    pub dissolved_oxygen: f64,
    pub specific_conductance: f64,
    pub water_temperature: f64,
    pub labels: Option<SiteLabels>,
}

impl SampleRecord {
    pub fn value(&self, indicator: Indicator) -> f64 {
        match indicator {
            Indicator::Ph => self.ph,
            Indicator::DissolvedOxygen => self.dissolved_oxygen,
            Indicator::SpecificConductance => self.specific_conductance,
            Indicator::WaterTemperature => self.water_temperature,
        }
    }

    pub fn set_value(&mut self, indicator: Indicator, v: f64) {
        match indicator {
            Indicator::Ph => self.ph = v,
            Indicator::DissolvedOxygen => self.dissolved_oxygen = v,
            Indicator::SpecificConductance => self.specific_conductance = v,
            Indicator::WaterTemperature => self.water_temperature = v,
        }
    }

    pub fn is_enriched(&self) -> bool {
        self.labels.is_some()
    }

    /// Checks the structural invariants every record must satisfy.
    pub fn validate(&self) -> std::result::Result<(), &'static str> {
        if self.station_id == 0 {
            return Err("station_id must be positive");
        }
        if !(1..=12).contains(&self.month) {
            return Err("month out of range");
        }
        if !(self.latitude.is_finite() && (-90.0..=90.0).contains(&self.latitude)) {
            return Err("latitude out of range");
        }
        if !(self.longitude.is_finite() && (-180.0..=180.0).contains(&self.longitude)) {
            return Err("longitude out of range");
        }
        if Indicator::ALL.iter().any(|&i| !self.value(i).is_finite()) {
            return Err("non-finite indicator value");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RegimeKind {
    SpatioTemporal,
    VariableDependent,
}

impl RegimeKind {
    pub const ALL: [RegimeKind; 2] = [RegimeKind::SpatioTemporal, RegimeKind::VariableDependent];

    pub fn token(self) -> &'static str {
        match self {
            RegimeKind::SpatioTemporal => "st",
            RegimeKind::VariableDependent => "vd",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            RegimeKind::SpatioTemporal => "S-T",
            RegimeKind::VariableDependent => "V-D",
        }
    }
}

impl FromStr for RegimeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "st" | "s-t" | "spatio-temporal" | "spatio_temporal" => Ok(RegimeKind::SpatioTemporal),
            "vd" | "v-d" | "variable-dependent" | "variable_dependent" => {
                Ok(RegimeKind::VariableDependent)
            }
            _ => Err(Error::InvalidArgument(format!("unknown regime `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum ClimateEncoding {
    #[default]
    Major,
    Sub,
    None,
}

impl FromStr for ClimateEncoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "major" => Ok(ClimateEncoding::Major),
            "sub" => Ok(ClimateEncoding::Sub),
            "none" => Ok(ClimateEncoding::None),
            _ => Err(Error::InvalidArgument(format!("unknown climate encoding `{s}`"))),
        }
    }
}

/// Which predictors are assembled for a target indicator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureRegime {
    pub kind: RegimeKind,
    pub target: Indicator,
    pub climate_encoding: ClimateEncoding,
}

impl FeatureRegime {
    pub fn spatio_temporal(target: Indicator) -> Self {
        FeatureRegime {
            kind: RegimeKind::SpatioTemporal,
            target,
            climate_encoding: ClimateEncoding::Major,
        }
    }

    pub fn variable_dependent(target: Indicator, climate_encoding: ClimateEncoding) -> Self {
        FeatureRegime {
            kind: RegimeKind::VariableDependent,
            target,
            climate_encoding,
        }
    }

    /// Non-target indicators in fixed order.
    pub fn companions(&self) -> impl Iterator<Item = Indicator> + '_ {
        Indicator::ALL.into_iter().filter(move |&i| i != self.target)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn major_of_examples() {
        assert_eq!(major_of("BSk").unwrap(), MajorClimate::B);
        assert_eq!(major_of("Csb").unwrap(), MajorClimate::C);
        assert_eq!(major_of("Dsc").unwrap(), MajorClimate::D);
    }

    #[test]
    fn major_of_rejects_non_california_codes() {
        for code in ["Af", "ET", "Cfa", "bsk", ""] {
            assert!(matches!(major_of(code), Err(Error::UnknownClimate(_))), "{code}");
        }
    }

    #[test]
    fn major_is_first_letter() {
        for k in KoppenClass::ALL {
            assert_eq!(k.major().code(), &k.code()[..1]);
        }
    }

    #[test]
    fn units_are_fixed() {
        let units: Vec<_> = Indicator::ALL.iter().map(|i| i.unit()).collect();
        assert_eq!(units, ["pH Units", "mg/L", "µS/cm@25°C", "°C"]);
    }

    #[test]
    fn indicator_tokens_parse_back() {
        for i in Indicator::ALL {
            assert_eq!(i.token().parse::<Indicator>().unwrap(), i);
            assert_eq!(i.display_name().parse::<Indicator>().unwrap(), i);
        }
    }
}
