//! Averaged bias scores by identity sub-dimension, prompting method and
//! language family. Every score cell carries equal weight.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::identity::{
    ApplicationKind, Children, Gender, Identity, LanguageFamily, MaritalStatus, PromptMethod,
    Religion,
};
use crate::scoring::ScoreCell;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AggregateError {
    #[error("no score cells match {0}")]
    NoMatchingCells(String),
    #[error("sub-dimension query needs both a dimension and a matching value")]
    InvalidQuery,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FamilyFilter {
    IndoAryan,
    Dravidian,
    Both,
}

impl FamilyFilter {
    pub fn admits(self, family: LanguageFamily) -> bool {
        match self {
            FamilyFilter::Both => true,
            FamilyFilter::IndoAryan => family == LanguageFamily::IndoAryan,
            FamilyFilter::Dravidian => family == LanguageFamily::Dravidian,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FamilyFilter::IndoAryan => "Indo-Aryan",
            FamilyFilter::Dravidian => "Dravidian",
            FamilyFilter::Both => "Both",
        }
    }
}

impl From<LanguageFamily> for FamilyFilter {
    fn from(f: LanguageFamily) -> Self {
        match f {
            LanguageFamily::IndoAryan => FamilyFilter::IndoAryan,
            LanguageFamily::Dravidian => FamilyFilter::Dravidian,
        }
    }
}

/// Identity dimension together with one of its values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SubDimension {
    Religion(Religion),
    Gender(Gender),
    MaritalStatus(MaritalStatus),
    Children(Children),
}

impl SubDimension {
    pub fn contains(&self, identity: &Identity) -> bool {
        match *self {
            SubDimension::Religion(r) => identity.religion == r,
            SubDimension::Gender(g) => identity.gender == g,
            SubDimension::MaritalStatus(m) => identity.marital_status == m,
            SubDimension::Children(c) => identity.children == c,
        }
    }

    pub fn label(&self) -> &'static str {
        match *self {
            SubDimension::Religion(r) => r.label(),
            SubDimension::Gender(g) => g.label(),
            SubDimension::MaritalStatus(m) => m.label(),
            SubDimension::Children(c) => c.label(),
        }
    }
}

/// Application filter: one kind or all of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ApplicationFilter {
    Kind(ApplicationKind),
    All,
}

impl ApplicationFilter {
    pub fn admits(self, kind: ApplicationKind) -> bool {
        match self {
            ApplicationFilter::All => true,
            ApplicationFilter::Kind(k) => k == kind,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ApplicationFilter::All => "All",
            ApplicationFilter::Kind(k) => k.label(),
        }
    }
}

impl FromStr for ApplicationFilter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(ApplicationFilter::All);
        }
        s.parse::<ApplicationKind>()
            .map(ApplicationFilter::Kind)
            .map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AverageQuery {
    pub application: ApplicationFilter,
    pub method: PromptMethod,
    pub family: FamilyFilter,
    /// `None` averages over every identity.
    pub subdimension: Option<SubDimension>,
}

impl fmt::Display for AverageQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "application={} method={} family={}",
            self.application.label(),
            self.method,
            self.family.label()
        )?;
        if let Some(s) = &self.subdimension {
            write!(f, " subdimension={}", s.label())?;
        }
        Ok(())
    }
}

impl AverageQuery {
    fn admits(&self, cell: &ScoreCell) -> bool {
        self.application.admits(cell.key.application)
            && self.method == cell.key.method
            && self.family.admits(cell.key.language.family())
            && self
                .subdimension
                .is_none_or(|s| s.contains(&cell.key.identity))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AverageResult {
    pub query: AverageQuery,
    pub mean: f64,
    pub n: usize,
}

fn average(cells: &[ScoreCell], query: AverageQuery) -> Result<AverageResult, AggregateError> {
    let (sum, n) = cells
        .iter()
        .filter(|c| query.admits(c))
        .fold((0.0, 0usize), |(s, n), c| (s + c.bias_score, n + 1));
    if n == 0 {
        return Err(AggregateError::NoMatchingCells(query.to_string()));
    }
    Ok(AverageResult {
        query,
        mean: sum / n as f64,
        n,
    })
}

pub fn average_by_subdimension(
    cells: &[ScoreCell],
    query: AverageQuery,
) -> Result<AverageResult, AggregateError> {
    if query.subdimension.is_none() {
        return Err(AggregateError::InvalidQuery);
    }
    average(cells, query)
}

pub fn average_by_method(
    cells: &[ScoreCell],
    query: AverageQuery,
) -> Result<AverageResult, AggregateError> {
    if query.subdimension.is_some() {
        return Err(AggregateError::InvalidQuery);
    }
    average(cells, query)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    GenderByFamily,
    ReligionByFamily,
    MaritalByFamily,
    ChildrenByFamily,
    MethodByFamily,
}

impl Axis {
    pub const ALL: &'static [Axis] = &[
        Axis::GenderByFamily,
        Axis::ReligionByFamily,
        Axis::MaritalByFamily,
        Axis::ChildrenByFamily,
        Axis::MethodByFamily,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Axis::GenderByFamily => "gender",
            Axis::ReligionByFamily => "religion",
            Axis::MaritalByFamily => "marital",
            Axis::ChildrenByFamily => "children",
            Axis::MethodByFamily => "method",
        }
    }

    fn subdimension_of(self, identity: &Identity) -> Option<SubDimension> {
        match self {
            Axis::GenderByFamily => Some(SubDimension::Gender(identity.gender)),
            Axis::ReligionByFamily => Some(SubDimension::Religion(identity.religion)),
            Axis::MaritalByFamily => Some(SubDimension::MaritalStatus(identity.marital_status)),
            Axis::ChildrenByFamily => Some(SubDimension::Children(identity.children)),
            Axis::MethodByFamily => None,
        }
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.to_ascii_lowercase();
        Axis::ALL
            .iter()
            .copied()
            .find(|a| a.name() == s || format!("{a:?}").eq_ignore_ascii_case(&s))
            .ok_or_else(|| format!("unknown axis `{s}`"))
    }
}

/// One average per (method, sub-dimension value, family) present in `cells`,
/// or per (method, family) for [`Axis::MethodByFamily`]. Ordered by method,
/// then sub-dimension, then family.
pub fn series(cells: &[ScoreCell], axis: Axis, application: ApplicationFilter) -> Vec<AverageResult> {
    let mut groups: BTreeMap<(PromptMethod, Option<SubDimension>, LanguageFamily), ()> =
        BTreeMap::new();
    for c in cells.iter().filter(|c| application.admits(c.key.application)) {
        groups.insert(
            (
                c.key.method,
                axis.subdimension_of(&c.key.identity),
                c.key.language.family(),
            ),
            (),
        );
    }
    groups
        .into_keys()
        .filter_map(|(method, subdimension, family)| {
            average(
                cells,
                AverageQuery {
                    application,
                    method,
                    family: family.into(),
                    subdimension,
                },
            )
            .ok()
        })
        .collect()
}

/// CSV with columns `axis_value,family,method,application,mean,n`.
pub fn series_csv(results: &[AverageResult]) -> String {
    let mut out = String::from("axis_value,family,method,application,mean,n\n");
    for r in results {
        let value = r
            .query
            .subdimension
            .map_or_else(|| r.query.method.label().to_string(), |s| s.label().to_string());
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            value,
            r.query.family.label(),
            r.query.method,
            r.query.application.label(),
            r.mean,
            r.n
        ));
    }
    out
}
