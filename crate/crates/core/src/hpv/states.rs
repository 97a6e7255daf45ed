//! Health states and HPV strains.

use core::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strain {
    #[serde(rename = "lr")]
    LowRisk,
    #[serde(rename = "hr16")]
    HighRisk16,
    #[serde(rename = "hr18")]
    HighRisk18,
    #[serde(rename = "hr_other")]
    HighRiskOther,
}

pub const STRAINS: [Strain; 4] = [
    Strain::LowRisk,
    Strain::HighRisk16,
    Strain::HighRisk18,
    Strain::HighRiskOther,
];

impl Strain {
    pub const fn index(self) -> usize {
        self as usize
    }

    pub const fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Self::LowRisk),
            1 => Some(Self::HighRisk16),
            2 => Some(Self::HighRisk18),
            3 => Some(Self::HighRiskOther),
            _ => None,
        }
    }

    pub const fn is_high_risk(self) -> bool {
        !matches!(self, Self::LowRisk)
    }

    /// Short label used in file formats and multiplier names.
    pub const fn label(self) -> &'static str {
        match self {
            Self::LowRisk => "LR",
            Self::HighRisk16 => "HR16",
            Self::HighRisk18 => "HR18",
            Self::HighRiskOther => "HRother",
        }
    }

    pub const fn key(self) -> &'static str {
        match self {
            Self::LowRisk => "lr",
            Self::HighRisk16 => "hr16",
            Self::HighRisk18 => "hr18",
            Self::HighRiskOther => "hr_other",
        }
    }

    pub fn from_key(s: &str) -> Option<Self> {
        STRAINS.into_iter().find(|x| x.key() == s)
    }
}

impl fmt::Display for Strain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HealthState {
    Well,
    Hpv(Strain),
    Cin1(Strain),
    Cin23(Strain),
    CancerLocal,
    CancerRegional,
    CancerDistant,
    Dead,
}

pub const N_STATES: usize = 17;

impl HealthState {
    /// Dense index: Well, 4 HPV, 4 CIN1, 4 CIN2/3, three cancer stages,
    /// Dead.
    pub const fn index(self) -> usize {
        match self {
            Self::Well => 0,
            Self::Hpv(s) => 1 + s.index(),
            Self::Cin1(s) => 5 + s.index(),
            Self::Cin23(s) => 9 + s.index(),
            Self::CancerLocal => 13,
            Self::CancerRegional => 14,
            Self::CancerDistant => 15,
            Self::Dead => 16,
        }
    }

    pub const fn from_index(i: usize) -> Option<Self> {
        let strain = Strain::from_index((i + 3) % 4);
        match (i, strain) {
            (0, _) => Some(Self::Well),
            (1..=4, Some(s)) => Some(Self::Hpv(s)),
            (5..=8, Some(s)) => Some(Self::Cin1(s)),
            (9..=12, Some(s)) => Some(Self::Cin23(s)),
            (13, _) => Some(Self::CancerLocal),
            (14, _) => Some(Self::CancerRegional),
            (15, _) => Some(Self::CancerDistant),
            (16, _) => Some(Self::Dead),
            _ => None,
        }
    }

    pub fn all() -> impl Iterator<Item = Self> {
        (0..N_STATES).filter_map(Self::from_index)
    }

    pub const fn is_cancer(self) -> bool {
        matches!(
            self,
            Self::CancerLocal | Self::CancerRegional | Self::CancerDistant
        )
    }

    pub const fn strain(self) -> Option<Strain> {
        match self {
            Self::Hpv(s) | Self::Cin1(s) | Self::Cin23(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for HealthState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Well => f.write_str("Well"),
            Self::Hpv(s) => write!(f, "HPV({s})"),
            Self::Cin1(s) => write!(f, "CIN1({s})"),
            Self::Cin23(s) => write!(f, "CIN23({s})"),
            Self::CancerLocal => f.write_str("CancerLocal"),
            Self::CancerRegional => f.write_str("CancerRegional"),
            Self::CancerDistant => f.write_str("CancerDistant"),
            Self::Dead => f.write_str("Dead"),
        }
    }
}
