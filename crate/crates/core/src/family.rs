//! Feature families and derivation tags.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Environmental data family. Drives imputation strategy and family preservation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    Meteorology,
    Vegetation,
    Sar,
    Soil,
    Topography,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Meteorology,
        Family::Vegetation,
        Family::Sar,
        Family::Soil,
        Family::Topography,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Meteorology => "METEOROLOGY",
            Family::Vegetation => "VEGETATION",
            Family::Sar => "SAR",
            Family::Soil => "SOIL",
            Family::Topography => "TOPOGRAPHY",
        }
    }

    /// Infers the family from a source-dataset identifier.
    ///
    /// Sentinel-2 and MODIS MOD13/MOD15 are vegetation, Sentinel-1 is SAR,
    /// ERA5-Land, NASA POWER and MOD16 are meteorology, SoilGrids is soil and
    /// SRTM is topography.
    pub fn infer_from_source(source_dataset: &str) -> Option<Family> {
        let s = source_dataset.to_ascii_lowercase().replace(['_', ' '], "-");
        // MOD16 (evapotranspiration) must be tested before the generic MODIS rules.
        if s.contains("mod16") || s.contains("era5") || s.contains("nasa-power") || s.contains("nasapower")
        {
            Some(Family::Meteorology)
        } else if s.contains("sentinel-1") || s.contains("s1-grd") || s.contains("s1grd") {
            Some(Family::Sar)
        } else if s.contains("sentinel-2")
            || s.contains("mod13")
            || s.contains("mod15")
            || s.contains("s2-sr")
            || s.contains("copernicus/s2")
        {
            Some(Family::Vegetation)
        } else if s.contains("soilgrids") {
            Some(Family::Soil)
        } else if s.contains("srtm") {
            Some(Family::Topography)
        } else {
            None
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "METEOROLOGY" => Ok(Family::Meteorology),
            "VEGETATION" => Ok(Family::Vegetation),
            "SAR" => Ok(Family::Sar),
            "SOIL" => Ok(Family::Soil),
            "TOPOGRAPHY" => Ok(Family::Topography),
            other => Err(Error::InvalidArgument(format!("unknown family `{other}`"))),
        }
    }
}

/// How a column's values come about.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Derivation {
    /// Retrieved directly with the spec's API parameter.
    None,
    Evi,
    Irrigation,
    Custom(String),
    /// Computed by the feature-engineering stage.
    Engineered,
    /// Coverage ratios and similar bookkeeping columns; never candidates by default.
    Diagnostic,
}

impl Derivation {
    /// Infers the derivation tag from a Notes/Derivation cell.
    pub fn infer_from_notes(notes: &str) -> Derivation {
        if notes.contains("EVI =") {
            Derivation::Evi
        } else if notes.contains("Irrigation = max") {
            Derivation::Irrigation
        } else {
            Derivation::None
        }
    }

    /// Input series a derivation rule consumes, in argument order.
    pub fn inputs(&self) -> &'static [&'static str] {
        match self {
            Derivation::Evi => &["NIR", "RED", "BLUE"],
            Derivation::Irrigation => &["PEV", "TP"],
            _ => &[],
        }
    }

    pub fn is_fetched_derivation(&self) -> bool {
        matches!(self, Derivation::Evi | Derivation::Irrigation)
    }
}

impl fmt::Display for Derivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Derivation::None => f.write_str("NONE"),
            Derivation::Evi => f.write_str("EVI"),
            Derivation::Irrigation => f.write_str("IRRIGATION"),
            Derivation::Custom(id) => write!(f, "CUSTOM:{id}"),
            Derivation::Engineered => f.write_str("ENGINEERED"),
            Derivation::Diagnostic => f.write_str("DIAGNOSTIC"),
        }
    }
}

impl FromStr for Derivation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(id) = s.strip_prefix("CUSTOM:") {
            if id.is_empty() {
                return Err(Error::InvalidArgument("empty CUSTOM derivation id".into()));
            }
            return Ok(Derivation::Custom(id.to_string()));
        }
        match s {
            "" | "NONE" => Ok(Derivation::None),
            "EVI" => Ok(Derivation::Evi),
            "IRRIGATION" => Ok(Derivation::Irrigation),
            "ENGINEERED" => Ok(Derivation::Engineered),
            "DIAGNOSTIC" => Ok(Derivation::Diagnostic),
            other => Err(Error::InvalidArgument(format!("unknown derivation `{other}`"))),
        }
    }
}
