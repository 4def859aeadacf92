//! The scenario grids of the published simulation tables.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::{Scenario, Sim1Config, Sim2Config};
use super::dgp::{calibrate_beta_scale, calibrate_intercept};
use super::monte_carlo::{monte_carlo, ReplicationSummary};
use super::strategy::{AnalysisOptions, Strategy};
use crate::error::{Error, Result};
use crate::stats::RngStream;

/// Stream used to calibrate the large-sample run.
pub const CALIBRATION_STREAM: u64 = u64::MAX - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum TableId {
    /// First setting, varying the number of covariates.
    Covariates = 4,
    /// First setting, d = 4, varying the covariate correlation.
    Correlation = 5,
    /// Second setting, n = 400, varying the historical-event effect.
    EventSmall = 6,
    /// Second setting, n = 2000 with a calibrated treated share.
    EventLarge = 7,
    /// Second setting with covariate-driven outcome levels; matching on the
    /// pre-period outcome.
    OutcomeMatching = 8,
}

impl TableId {
    pub const ALL: [TableId; 5] = [
        TableId::Covariates,
        TableId::Correlation,
        TableId::EventSmall,
        TableId::EventLarge,
        TableId::OutcomeMatching,
    ];

    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn strategies(self) -> Vec<Strategy> {
        match self {
            TableId::OutcomeMatching => vec![Strategy::None, Strategy::Full, Strategy::Outcome],
            _ => vec![Strategy::None, Strategy::Half, Strategy::Full],
        }
    }
}

impl TryFrom<u8> for TableId {
    type Error = Error;

    fn try_from(n: u8) -> Result<Self> {
        TableId::ALL
            .into_iter()
            .find(|t| t.number() == n)
            .ok_or_else(|| Error::Invalid(format!("unknown table {n} (expected 4-8)")))
    }
}

impl From<TableId> for u8 {
    fn from(t: TableId) -> u8 {
        t.number()
    }
}

impl FromStr for TableId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let n: u8 = s
            .trim()
            .parse()
            .map_err(|_| Error::Invalid(format!("unknown table {s:?}")))?;
        n.try_into()
    }
}

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// How the large-sample run reaches its treated share.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LargeSampleCalibration {
    /// Shrink the coefficient range, weakening selection on covariates.
    #[default]
    CoefficientScale,
    /// Shift the shared intercept of the treatment and event probabilities.
    Intercept,
}

/// Base configurations the grids start from, plus the large-sample target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TableBase {
    pub sim1: Sim1Config,
    pub sim2: Sim2Config,
    /// Total units in the large-sample second-setting run.
    pub large_n_total: usize,
    /// Treated share the large-sample run is calibrated to.
    pub large_treated_fraction: f64,
    pub large_calibration: LargeSampleCalibration,
}

impl Default for TableBase {
    fn default() -> Self {
        Self {
            sim1: Sim1Config::default(),
            sim2: Sim2Config::default(),
            large_n_total: 2000,
            large_treated_fraction: 0.24,
            large_calibration: LargeSampleCalibration::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridCell {
    pub label: String,
    pub scenario: Scenario,
}

/// Scenarios of a table, in row order. The large-sample table calibrates
/// from `master_seed`.
pub fn table_grid(table: TableId, base: &TableBase, master_seed: u64) -> Result<Vec<GridCell>> {
    let cell = |label: String, scenario: Scenario| GridCell { label, scenario };
    let deltas = [-2.0, -4.0, -6.0];
    Ok(match table {
        TableId::Covariates => [2, 4, 8]
            .into_iter()
            .map(|d| {
                cell(
                    format!("d={d}"),
                    Scenario::Sim1(Sim1Config {
                        d,
                        ..base.sim1.clone()
                    }),
                )
            })
            .collect(),
        TableId::Correlation => [0.1, 0.05, 0.0]
            .into_iter()
            .map(|rho| {
                cell(
                    format!("rho={rho}"),
                    Scenario::Sim1(Sim1Config {
                        d: 4,
                        rho,
                        ..base.sim1.clone()
                    }),
                )
            })
            .collect(),
        TableId::EventSmall => deltas
            .into_iter()
            .map(|delta_hist| {
                cell(
                    format!("delta={delta_hist}"),
                    Scenario::Sim2(Sim2Config {
                        delta_hist,
                        ..base.sim2.clone()
                    }),
                )
            })
            .collect(),
        TableId::EventLarge => {
            let mut large = Sim2Config {
                n_total: base.large_n_total,
                ..base.sim2.clone()
            };
            let target = base.large_treated_fraction;
            let stream = RngStream::new(master_seed, CALIBRATION_STREAM);
            match base.large_calibration {
                LargeSampleCalibration::Intercept => {
                    large.intercept = calibrate_intercept(&large, target, stream)?
                }
                LargeSampleCalibration::CoefficientScale => {
                    let k = calibrate_beta_scale(&large, target, stream)?;
                    large.beta_low *= k;
                    large.beta_high *= k;
                }
            }
            deltas
                .into_iter()
                .map(|delta_hist| {
                    cell(
                        format!("delta={delta_hist}"),
                        Scenario::Sim2(Sim2Config {
                            delta_hist,
                            ..large.clone()
                        }),
                    )
                })
                .collect()
        }
        TableId::OutcomeMatching => deltas
            .into_iter()
            .map(|delta_hist| {
                cell(
                    format!("delta={delta_hist}"),
                    Scenario::Sim2(Sim2Config {
                        delta_hist,
                        rtm_mode: true,
                        ..base.sim2.clone()
                    }),
                )
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub scenario: String,
    pub summary: ReplicationSummary,
}

/// Runs every scenario of a table with its strategies.
pub fn run_table(
    table: TableId,
    base: &TableBase,
    n_reps: usize,
    master_seed: u64,
    options: &AnalysisOptions,
) -> Result<Vec<TableRow>> {
    let strategies = table.strategies();
    let mut rows = Vec::new();
    for cell in table_grid(table, base, master_seed)? {
        for summary in monte_carlo(&cell.scenario, &strategies, n_reps, master_seed, options)? {
            rows.push(TableRow {
                scenario: cell.label.clone(),
                summary,
            });
        }
    }
    Ok(rows)
}
