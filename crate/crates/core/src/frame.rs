//! The closed set of 15 media frame labels.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// One of the 15 generic media frames. The label set is closed: parsing any
/// other string is an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FrameLabel {
    Economic,
    CapacityAndResources,
    Morality,
    FairnessAndEquality,
    Legality,
    PolicyPrescription,
    CrimeAndPunishment,
    SecurityAndDefense,
    HealthAndSafety,
    QualityOfLife,
    CulturalIdentity,
    PublicOpinion,
    Political,
    ExternalRegulation,
    Other,
}

impl FrameLabel {
    /// Number of frame labels.
    pub const COUNT: usize = 15;

    /// All labels in canonical order.
    pub const ALL: [FrameLabel; Self::COUNT] = [
        FrameLabel::Economic,
        FrameLabel::CapacityAndResources,
        FrameLabel::Morality,
        FrameLabel::FairnessAndEquality,
        FrameLabel::Legality,
        FrameLabel::PolicyPrescription,
        FrameLabel::CrimeAndPunishment,
        FrameLabel::SecurityAndDefense,
        FrameLabel::HealthAndSafety,
        FrameLabel::QualityOfLife,
        FrameLabel::CulturalIdentity,
        FrameLabel::PublicOpinion,
        FrameLabel::Political,
        FrameLabel::ExternalRegulation,
        FrameLabel::Other,
    ];

    /// Canonical string form, used in data files.
    pub fn as_str(self) -> &'static str {
        match self {
            FrameLabel::Economic => "Economic",
            FrameLabel::CapacityAndResources => "Capacity and Resources",
            FrameLabel::Morality => "Morality",
            FrameLabel::FairnessAndEquality => "Fairness and Equality",
            FrameLabel::Legality => "Legality, Constitutionality and Jurisprudence",
            FrameLabel::PolicyPrescription => "Policy Prescription and Evaluation",
            FrameLabel::CrimeAndPunishment => "Crime and Punishment",
            FrameLabel::SecurityAndDefense => "Security and Defense",
            FrameLabel::HealthAndSafety => "Health and Safety",
            FrameLabel::QualityOfLife => "Quality of Life",
            FrameLabel::CulturalIdentity => "Cultural Identity",
            FrameLabel::PublicOpinion => "Public Opinion",
            FrameLabel::Political => "Political",
            FrameLabel::ExternalRegulation => "External Regulation and Reputation",
            FrameLabel::Other => "Other",
        }
    }

    /// Position in [`FrameLabel::ALL`].
    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&f| f == self).unwrap()
    }
}

impl fmt::Display for FrameLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FrameLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::UnknownFrame(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_set_cardinality_is_fifteen() {
        assert_eq!(FrameLabel::ALL.len(), 15);
        assert_eq!(FrameLabel::COUNT, 15);
    }

    #[test]
    fn round_trips_every_canonical_string() {
        for frame in FrameLabel::ALL {
            let parsed: FrameLabel = frame.as_str().parse().unwrap();
            assert_eq!(parsed, frame);
        }
    }

    #[test]
    fn rejects_strings_outside_the_set() {
        assert!("Economics".parse::<FrameLabel>().is_err());
        assert!("".parse::<FrameLabel>().is_err());
        assert!("economic".parse::<FrameLabel>().is_err());
    }

    #[test]
    fn index_is_consistent_with_all() {
        for (i, frame) in FrameLabel::ALL.iter().enumerate() {
            assert_eq!(frame.index(), i);
        }
    }
}
