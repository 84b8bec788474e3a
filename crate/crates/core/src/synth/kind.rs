use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The seven degradation classes, each named after the restoration service it
/// calls for. The discriminant is the stable class index used by the model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DegradationKind {
    Denoising = 0,
    #[serde(rename = "Dehazing_Indoor")]
    DehazingIndoor = 1,
    #[serde(rename = "Dehazing_Outdoor")]
    DehazingOutdoor = 2,
    Deblurring = 3,
    Deraining = 4,
    Enhancement = 5,
    #[serde(rename = "Super_Resolution")]
    SuperResolution = 6,
}

/// Number of degradation classes.
pub const K: usize = 7;

impl DegradationKind {
    pub const ALL: [DegradationKind; K] = [
        Self::Denoising,
        Self::DehazingIndoor,
        Self::DehazingOutdoor,
        Self::Deblurring,
        Self::Deraining,
        Self::Enhancement,
        Self::SuperResolution,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Denoising => "Denoising",
            Self::DehazingIndoor => "Dehazing_Indoor",
            Self::DehazingOutdoor => "Dehazing_Outdoor",
            Self::Deblurring => "Deblurring",
            Self::Deraining => "Deraining",
            Self::Enhancement => "Enhancement",
            Self::SuperResolution => "Super_Resolution",
        }
    }

    /// Lower-case key used in config tables (`restorers.<key>.*`).
    pub fn config_key(self) -> &'static str {
        match self {
            Self::Denoising => "denoising",
            Self::DehazingIndoor => "dehazing_indoor",
            Self::DehazingOutdoor => "dehazing_outdoor",
            Self::Deblurring => "deblurring",
            Self::Deraining => "deraining",
            Self::Enhancement => "enhancement",
            Self::SuperResolution => "super_resolution",
        }
    }
}

impl fmt::Display for DegradationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("unknown degradation kind {0:?}")]
pub struct UnknownKind(pub String);

impl FromStr for DegradationKind {
    type Err = UnknownKind;

    /// Case-insensitive; underscores, dashes and spaces are ignored.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| !matches!(c, '_' | '-' | ' '))
            .flat_map(char::to_lowercase)
            .collect();
        Self::ALL
            .into_iter()
            .find(|k| k.config_key().replace('_', "") == norm)
            .ok_or_else(|| UnknownKind(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_is_bijective() {
        for (i, k) in DegradationKind::ALL.iter().enumerate() {
            assert_eq!(k.index(), i);
            assert_eq!(DegradationKind::from_index(i), Some(*k));
        }
        assert_eq!(DegradationKind::from_index(K), None);
    }

    #[test]
    fn parse_names() {
        for k in DegradationKind::ALL {
            assert_eq!(k.name().parse::<DegradationKind>().unwrap(), k);
            assert_eq!(k.config_key().parse::<DegradationKind>().unwrap(), k);
        }
        assert_eq!("super-resolution".parse::<DegradationKind>().unwrap(), DegradationKind::SuperResolution);
        assert!("fog".parse::<DegradationKind>().is_err());
    }

    #[test]
    fn serde_uses_class_names() {
        let s = serde_json::to_string(&DegradationKind::DehazingOutdoor).unwrap();
        assert_eq!(s, "\"Dehazing_Outdoor\"");
    }
}
