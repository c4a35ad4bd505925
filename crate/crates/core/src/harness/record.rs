use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize};

use crate::config::RunConfig;
use crate::error::Result;

// JSON has no NaN or infinity; serde_json writes them as null, and these
// read null back as NaN.
fn nullable<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

fn nullable_rows<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Vec<f64>>, D::Error> {
    let rows = Vec::<Vec<Option<f64>>>::deserialize(d)?;
    Ok(rows
        .into_iter()
        .map(|r| r.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect())
        .collect())
}

fn nullable_map<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BTreeMap<String, f64>, D::Error> {
    let map = BTreeMap::<String, Option<f64>>::deserialize(d)?;
    Ok(map.into_iter().map(|(k, v)| (k, v.unwrap_or(f64::NAN))).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// Out of tolerance for a documented reason that is not a defect, such
    /// as Gaussian tail mass beyond the truncation.
    Flagged,
    Inconclusive,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Flagged => "flagged",
            Status::Inconclusive => "inconclusive",
        }
    }
}

/// One check with the numbers it was decided on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub check: String,
    pub status: Status,
    #[serde(deserialize_with = "nullable")]
    pub measured: f64,
    #[serde(deserialize_with = "nullable")]
    pub tolerance: f64,
    pub detail: String,
}

impl Verdict {
    pub fn at_most(check: &str, measured: f64, tolerance: f64) -> Self {
        let status = if measured <= tolerance { Status::Pass } else { Status::Fail };
        Self::new(check, status, measured, tolerance)
    }

    pub fn at_least(check: &str, measured: f64, tolerance: f64) -> Self {
        let status = if measured >= tolerance { Status::Pass } else { Status::Fail };
        Self::new(check, status, measured, tolerance)
    }

    pub fn new(check: &str, status: Status, measured: f64, tolerance: f64) -> Self {
        Self {
            check: check.into(),
            status,
            measured,
            tolerance,
            detail: String::new(),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    /// A verdict for a computation that errored; the suite records it and
    /// moves on.
    pub fn errored(check: &str, err: &crate::Error) -> Self {
        Self::new(check, Status::Fail, f64::NAN, f64::NAN).with_detail(err.to_string())
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    #[serde(deserialize_with = "nullable_rows")]
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    /// Error norms against `eps`, one line per column.
    EpsilonSweep,
    /// `E_T` against `E_G` with the fitted line `E_T = C E_G`.
    Scatter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    pub kind: PlotKind,
    pub x: String,
    pub y: Vec<String>,
    /// Name of the fit whose value is the slope of the bound line.
    pub bound: Option<String>,
}

/// The outcome of one study or suite run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub id: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub seeds: Vec<u64>,
    pub table: Table,
    /// Fitted constants and orders, each with its residual under
    /// `<name>_residual` where one applies.
    #[serde(deserialize_with = "nullable_map")]
    pub fits: BTreeMap<String, f64>,
    verdicts: Vec<Verdict>,
    pub plot: Option<PlotSpec>,
}

impl StudyRecord {
    pub fn new(id: &str, config: &RunConfig, seeds: Vec<u64>) -> Result<Self> {
        Ok(Self {
            id: id.into(),
            config_hash: config.hash()?,
            config: config.clone(),
            seeds,
            table: Table::default(),
            fits: BTreeMap::new(),
            verdicts: Vec::new(),
            plot: None,
        })
    }

    /// Verdicts are only ever appended.
    pub fn push(&mut self, verdict: Verdict) {
        self.verdicts.push(verdict);
    }

    pub fn verdicts(&self) -> &[Verdict] {
        &self.verdicts
    }

    pub fn verdict(&self, check: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.check == check)
    }

    /// `Fail` if any verdict failed, else `Inconclusive` if any was, else
    /// `Flagged` if any was, else `Pass`.
    pub fn outcome(&self) -> Status {
        let any = |s: Status| self.verdicts.iter().any(|v| v.status == s);
        if any(Status::Fail) {
            Status::Fail
        } else if any(Status::Inconclusive) {
            Status::Inconclusive
        } else if any(Status::Flagged) {
            Status::Flagged
        } else {
            Status::Pass
        }
    }

    /// Whether the config this record was produced from matches `config`.
    pub fn matches(&self, config: &RunConfig) -> Result<bool> {
        Ok(config.hash()? == self.config_hash)
    }
}
