//! Baseline monthly transition probabilities and the multipliers that scale
//! them.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::states::{Strain, STRAINS};
use crate::{Error, Result};

/// Ages `0..AGES` (years) have their own row; older ages reuse the last.
pub const AGES: usize = 101;
const ROW_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Edge {
    #[serde(rename = "well_hpv")]
    Infection,
    #[serde(rename = "hpv_well")]
    Clearance,
    #[serde(rename = "hpv_cin1")]
    HpvToCin1,
    #[serde(rename = "cin1_well")]
    Cin1Regression,
    #[serde(rename = "cin1_cin23")]
    Cin1ToCin23,
    #[serde(rename = "cin23_cin1")]
    Cin23Regression,
    #[serde(rename = "cin23_local")]
    Cin23ToCancer,
    #[serde(rename = "local_regional")]
    LocalToRegional,
    #[serde(rename = "regional_distant")]
    RegionalToDistant,
    #[serde(rename = "local_death")]
    LocalDeath,
    #[serde(rename = "regional_death")]
    RegionalDeath,
    #[serde(rename = "distant_death")]
    DistantDeath,
    /// Not a transition: the fraction by which a cleared strain's infection
    /// probability is reduced.
    #[serde(rename = "immune_degree")]
    ImmuneDegree,
}

pub const EDGES: [Edge; 13] = [
    Edge::Infection,
    Edge::Clearance,
    Edge::HpvToCin1,
    Edge::Cin1Regression,
    Edge::Cin1ToCin23,
    Edge::Cin23Regression,
    Edge::Cin23ToCancer,
    Edge::LocalToRegional,
    Edge::RegionalToDistant,
    Edge::LocalDeath,
    Edge::RegionalDeath,
    Edge::DistantDeath,
    Edge::ImmuneDegree,
];

impl Edge {
    pub const fn index(self) -> usize {
        self as usize
    }

    pub const fn key(self) -> &'static str {
        match self {
            Self::Infection => "well_hpv",
            Self::Clearance => "hpv_well",
            Self::HpvToCin1 => "hpv_cin1",
            Self::Cin1Regression => "cin1_well",
            Self::Cin1ToCin23 => "cin1_cin23",
            Self::Cin23Regression => "cin23_cin1",
            Self::Cin23ToCancer => "cin23_local",
            Self::LocalToRegional => "local_regional",
            Self::RegionalToDistant => "regional_distant",
            Self::LocalDeath => "local_death",
            Self::RegionalDeath => "regional_death",
            Self::DistantDeath => "distant_death",
            Self::ImmuneDegree => "immune_degree",
        }
    }

    pub fn from_key(s: &str) -> Option<Self> {
        EDGES.into_iter().find(|e| e.key() == s)
    }

    /// Forward moves toward cancer.
    pub const fn is_progression(self) -> bool {
        matches!(
            self,
            Self::HpvToCin1 | Self::Cin1ToCin23 | Self::Cin23ToCancer
        )
    }
}

/// Strain column of a baseline row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrainSelector {
    All,
    Lr,
    Hr16,
    Hr18,
    HrOther,
}

impl StrainSelector {
    pub fn strains(self) -> &'static [Strain] {
        match self {
            Self::All => &STRAINS,
            Self::Lr => &STRAINS[0..1],
            Self::Hr16 => &STRAINS[1..2],
            Self::Hr18 => &STRAINS[2..3],
            Self::HrOther => &STRAINS[3..4],
        }
    }
}

impl From<Strain> for StrainSelector {
    fn from(s: Strain) -> Self {
        match s {
            Strain::LowRisk => Self::Lr,
            Strain::HighRisk16 => Self::Hr16,
            Strain::HighRisk18 => Self::Hr18,
            Strain::HighRiskOther => Self::HrOther,
        }
    }
}

/// One line of the baseline file: `value` applies to ages
/// `age_lower..age_upper` (years, upper exclusive).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineRow {
    pub edge: Edge,
    pub strain: StrainSelector,
    pub age_lower: u32,
    pub age_upper: u32,
    pub value: f64,
}

/// Monthly probabilities per (edge, strain, single year of age). Cells
/// not covered by any row are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTable {
    values: Vec<f64>,
}

pub type BaselineTable = TransitionTable;
pub type EffectiveTable = TransitionTable;

#[inline]
const fn cell(edge: Edge, strain: Strain, age: usize) -> usize {
    (edge.index() * 4 + strain.index()) * AGES + age
}

impl TransitionTable {
    pub fn zeros() -> Self {
        Self {
            values: vec![0.0; EDGES.len() * 4 * AGES],
        }
    }

    /// Builds a table from rows; overlapping coverage of a cell and values
    /// outside `[0, 1]` are errors.
    pub fn from_rows<'a>(rows: impl IntoIterator<Item = &'a BaselineRow>) -> Result<Self> {
        let mut table = Self::zeros();
        let mut covered = vec![false; table.values.len()];
        for (n, row) in rows.into_iter().enumerate() {
            let n = n + 1;
            if !(row.value.is_finite() && (0.0..=1.0).contains(&row.value)) {
                return Err(Error::Config(format!(
                    "baseline row {n}: value {} outside [0, 1]",
                    row.value
                )));
            }
            if row.age_lower >= row.age_upper || row.age_upper as usize > AGES {
                return Err(Error::Config(format!(
                    "baseline row {n}: age range [{}, {}) must be non-empty and within [0, {AGES})",
                    row.age_lower, row.age_upper
                )));
            }
            for &s in row.strain.strains() {
                for age in row.age_lower as usize..row.age_upper as usize {
                    let k = cell(row.edge, s, age);
                    if covered[k] {
                        return Err(Error::Config(format!(
                            "baseline row {n}: {} for {s} at age {age} is already set",
                            row.edge.key()
                        )));
                    }
                    covered[k] = true;
                    table.values[k] = row.value;
                }
            }
        }
        table.check_rows()?;
        Ok(table)
    }

    #[inline]
    pub fn get(&self, edge: Edge, strain: Strain, age: usize) -> f64 {
        self.values[cell(edge, strain, age.min(AGES - 1))]
    }

    fn set(&mut self, edge: Edge, strain: Strain, age: usize, value: f64) {
        self.values[cell(edge, strain, age)] = value;
    }

    /// Outgoing probabilities of every state must sum to at most one.
    pub fn check_rows(&self) -> Result<()> {
        use Edge::*;
        let groups: [(&str, &[Edge]); 6] = [
            ("HPV", &[Clearance, HpvToCin1]),
            ("CIN1", &[Cin1Regression, Cin1ToCin23]),
            ("CIN23", &[Cin23Regression, Cin23ToCancer]),
            ("CancerLocal", &[LocalToRegional, LocalDeath]),
            ("CancerRegional", &[RegionalToDistant, RegionalDeath]),
            ("CancerDistant", &[DistantDeath]),
        ];
        for age in 0..AGES {
            let well: f64 = STRAINS.iter().map(|&s| self.get(Infection, s, age)).sum();
            if well > 1.0 + ROW_TOLERANCE {
                return Err(Error::Infeasible(format!(
                    "infection probabilities from Well sum to {well} at age {age}"
                )));
            }
            for s in STRAINS {
                for (state, edges) in groups {
                    let total: f64 = edges.iter().map(|&e| self.get(e, s, age)).sum();
                    if total > 1.0 + ROW_TOLERANCE {
                        return Err(Error::Infeasible(format!(
                            "outgoing probabilities of {state} ({s}) sum to {total} at age {age}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Whole-table equality within `tol`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.values
            .iter()
            .zip(&other.values)
            .all(|(a, b)| (a - b).abs() <= tol)
    }
}

/// A named multiplier scaling one edge for a set of strains.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiplierSpec {
    pub name: String,
    pub edge: Edge,
    pub strains: Vec<Strain>,
}

impl MultiplierSpec {
    pub fn new(name: impl Into<String>, edge: Edge, strains: &[Strain]) -> Self {
        Self {
            name: name.into(),
            edge,
            strains: strains.to_vec(),
        }
    }
}

/// Ordered multipliers; the calibrated parameter vector follows this order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<MultiplierSpec>", into = "Vec<MultiplierSpec>")]
pub struct MultiplierMap {
    entries: Vec<MultiplierSpec>,
}

impl TryFrom<Vec<MultiplierSpec>> for MultiplierMap {
    type Error = Error;

    fn try_from(entries: Vec<MultiplierSpec>) -> Result<Self> {
        Self::new(entries)
    }
}

impl From<MultiplierMap> for Vec<MultiplierSpec> {
    fn from(m: MultiplierMap) -> Self {
        m.entries
    }
}

impl MultiplierMap {
    pub fn new(entries: Vec<MultiplierSpec>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Config("multiplier map is empty".into()));
        }
        let mut seen: Vec<(Edge, Strain)> = Vec::new();
        for (i, m) in entries.iter().enumerate() {
            if entries[..i].iter().any(|o| o.name == m.name) {
                return Err(Error::Config(format!(
                    "duplicate multiplier name '{}'",
                    m.name
                )));
            }
            if m.strains.is_empty() {
                return Err(Error::Config(format!(
                    "multiplier '{}' scales no edge",
                    m.name
                )));
            }
            for &s in &m.strains {
                if seen.contains(&(m.edge, s)) {
                    return Err(Error::Config(format!(
                        "multiplier '{}': edge {} ({s}) is already scaled by another multiplier",
                        m.name,
                        m.edge.key()
                    )));
                }
                seen.push((m.edge, s));
            }
        }
        Ok(Self { entries })
    }

    /// The 26 case-study multipliers: per-strain infection, HPV→CIN1,
    /// clearance and immune degree; high-risk CIN1→CIN2/3, CIN2/3
    /// regression and CIN2/3→local cancer; pooled CIN1 regression.
    pub fn case_study() -> Self {
        use Edge::*;
        let hr = &STRAINS[1..];
        let mut entries = Vec::with_capacity(26);
        for s in STRAINS {
            entries.push(MultiplierSpec::new(
                format!("Well->HPV ({s})"),
                Infection,
                &[s],
            ));
        }
        for s in STRAINS {
            entries.push(MultiplierSpec::new(
                format!("HPV->CIN1 ({s})"),
                HpvToCin1,
                &[s],
            ));
        }
        for s in STRAINS {
            entries.push(MultiplierSpec::new(
                format!("HPV->Well ({s})"),
                Clearance,
                &[s],
            ));
        }
        for &s in hr {
            entries.push(MultiplierSpec::new(
                format!("CIN1->CIN23 ({s})"),
                Cin1ToCin23,
                &[s],
            ));
        }
        entries.push(MultiplierSpec::new("CIN1->Well", Cin1Regression, &STRAINS));
        for &s in hr {
            entries.push(MultiplierSpec::new(
                format!("CIN23->CIN1 ({s})"),
                Cin23Regression,
                &[s],
            ));
        }
        for &s in hr {
            entries.push(MultiplierSpec::new(
                format!("CIN23->LocalCancer ({s})"),
                Cin23ToCancer,
                &[s],
            ));
        }
        for s in STRAINS {
            entries.push(MultiplierSpec::new(
                format!("Immune Degree ({s})"),
                ImmuneDegree,
                &[s],
            ));
        }
        Self::new(entries).expect("case-study multipliers are consistent")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[MultiplierSpec] {
        &self.entries
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|m| m.name.as_str())
    }
}

/// Scales each mapped baseline cell by its multiplier and clamps to
/// `[0, 1]`. Unmapped edges keep their baseline value; the stay
/// probability is the residual of each row.
pub fn apply_multipliers(
    baseline: &BaselineTable,
    map: &MultiplierMap,
    multipliers: &[f64],
) -> Result<EffectiveTable> {
    if multipliers.len() != map.len() {
        return Err(Error::Alignment(format!(
            "{} multiplier values for {} multipliers",
            multipliers.len(),
            map.len()
        )));
    }
    let mut table = baseline.clone();
    for (spec, &m) in map.entries.iter().zip(multipliers) {
        if !(m.is_finite() && m >= 0.0) {
            return Err(Error::Domain(format!(
                "multiplier '{}' must be >= 0, got {m}",
                spec.name
            )));
        }
        if m == 1.0 {
            continue;
        }
        for &s in &spec.strains {
            for age in 0..AGES {
                let v = (baseline.get(spec.edge, s, age) * m).clamp(0.0, 1.0);
                table.set(spec.edge, s, age, v);
            }
        }
    }
    table.check_rows()?;
    Ok(table)
}

/// The shipped illustrative baseline. Values are synthetic: smooth in age,
/// with progression ordered HR16 > HR18 > HR-other > LR. They are not
/// estimates from any population.
pub fn synthetic_baseline_rows() -> Vec<BaselineRow> {
    use Edge::*;
    use StrainSelector as S;
    let row = |edge, strain, age_lower, age_upper, value| BaselineRow {
        edge,
        strain,
        age_lower,
        age_upper,
        value,
    };
    let mut rows = Vec::new();

    // Force of infection by age band.
    let bands: [(u32, u32); 8] = [
        (0, 15),
        (15, 20),
        (20, 25),
        (25, 30),
        (30, 35),
        (35, 45),
        (45, 55),
        (55, 101),
    ];
    let infection: [(S, [f64; 8]); 4] = [
        (
            S::Lr,
            [0.0, 0.0300, 0.0330, 0.0150, 0.0080, 0.0045, 0.0030, 0.0020],
        ),
        (
            S::Hr16,
            [0.0, 0.0300, 0.0340, 0.0155, 0.0082, 0.0047, 0.0033, 0.0026],
        ),
        (
            S::Hr18,
            [0.0, 0.0100, 0.0110, 0.0050, 0.0028, 0.0017, 0.0011, 0.0010],
        ),
        (
            S::HrOther,
            [0.0, 0.0360, 0.0400, 0.0180, 0.0094, 0.0054, 0.0038, 0.0029],
        ),
    ];
    for (strain, values) in infection {
        for ((lo, hi), v) in bands.iter().zip(values) {
            rows.push(row(Infection, strain, *lo, *hi, v));
        }
    }

    let per_strain: [(Edge, [f64; 4]); 6] = [
        //             LR      HR16    HR18    HRother
        (Clearance, [0.0900, 0.0760, 0.0900, 0.0820]),
        (HpvToCin1, [0.0120, 0.0025, 0.0040, 0.0014]),
        (Cin1Regression, [0.0450, 0.0300, 0.0350, 0.0400]),
        (Cin1ToCin23, [0.0010, 0.0120, 0.0050, 0.0040]),
        (Cin23Regression, [0.0300, 0.0080, 0.0150, 0.0200]),
        (ImmuneDegree, [0.70, 0.50, 0.50, 0.60]),
    ];
    let strains = [S::Lr, S::Hr16, S::Hr18, S::HrOther];
    for (edge, values) in per_strain {
        for (s, v) in strains.iter().zip(values) {
            rows.push(row(edge, *s, 0, AGES as u32, v));
        }
    }

    // Invasion rises with age up to 40.
    let invasion = [0.0, 0.0025, 0.0040, 0.0070];
    let age_factor: [(u32, u32, f64); 6] = [
        (0, 25, 0.05),
        (25, 30, 0.12),
        (30, 35, 0.3),
        (35, 40, 0.6),
        (40, 50, 1.0),
        (50, 101, 1.25),
    ];
    for (s, v) in strains.iter().zip(invasion) {
        for (lo, hi, f) in age_factor {
            rows.push(row(Cin23ToCancer, *s, lo, hi, v * f));
        }
    }

    for (edge, v) in [
        (LocalToRegional, 0.0200),
        (RegionalToDistant, 0.0250),
        (LocalDeath, 0.0015),
        (RegionalDeath, 0.0080),
        (DistantDeath, 0.0400),
    ] {
        rows.push(row(edge, S::All, 0, AGES as u32, v));
    }
    rows
}

pub fn synthetic_baseline() -> BaselineTable {
    TransitionTable::from_rows(&synthetic_baseline_rows()).expect("synthetic baseline is valid")
}
