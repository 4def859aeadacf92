//! CSV ingestion and atomic output.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use matchdid::did::{PanelDataset, PanelRecord};
use matchdid::matching::CovariateSample;
use matchdid::stats::RealMatrix;

use crate::error::{CliError, CliResult};

fn open(path: &Path) -> CliResult<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("cannot open {}: {e}", path.display())))
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn parse_flag(value: &str, column: &str, line: u64) -> CliResult<bool> {
    match value {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(CliError::Input(format!(
            "line {line}: {column} must be 0 or 1, got {other:?}"
        ))),
    }
}

fn parse_number(value: &str, column: &str, line: u64) -> CliResult<f64> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| {
            CliError::Input(format!(
                "line {line}: {column} is not a finite number: {value:?}"
            ))
        })
}

fn records<'a>(
    reader: &'a mut csv::Reader<fs::File>,
    path: &Path,
) -> impl Iterator<Item = CliResult<csv::StringRecord>> + 'a {
    let shown = path.display().to_string();
    reader
        .records()
        .map(move |r| r.map_err(|e| CliError::Input(format!("{shown}: {e}"))))
}

/// Reads `unit_id,treated,<covariate...>`.
pub fn read_covariates(path: &Path) -> CliResult<CovariateSample> {
    let mut reader = open(path)?;
    let header = reader
        .headers()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        .clone();
    if header.len() < 3 || &header[0] != "unit_id" || &header[1] != "treated" {
        return Err(CliError::Input(format!(
            "{} line 1: header must be unit_id,treated,<covariate...>",
            path.display()
        )));
    }
    let names: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
    let mut ids = Vec::new();
    let mut treated = Vec::new();
    let mut data = Vec::new();
    for record in records(&mut reader, path) {
        let record = record?;
        let line = line_of(&record);
        ids.push(record[0].to_string());
        treated.push(parse_flag(&record[1], "treated", line)?);
        for (j, name) in names.iter().enumerate() {
            data.push(parse_number(&record[j + 2], name, line)?);
        }
    }
    let covariates = RealMatrix::new(ids.len(), names.len(), data)?;
    Ok(CovariateSample::new(ids, treated, covariates, names)?)
}

/// A panel with its period labels in ordinal order.
#[derive(Debug, Clone)]
pub struct LabelledPanel {
    pub panel: PanelDataset,
    pub labels: Vec<String>,
}

impl LabelledPanel {
    pub fn ordinal(&self, label: &str) -> CliResult<usize> {
        self.labels.iter().position(|l| l == label).ok_or_else(|| {
            CliError::Input(format!(
                "unknown period {label:?}; the panel has {}",
                self.labels.join(", ")
            ))
        })
    }

    /// Records of the two periods, relabelled `first -> 0` and `second -> 1`
    /// so the comparison direction comes from the caller, not file order.
    pub fn two_periods(&self, first: usize, second: usize) -> CliResult<PanelDataset> {
        let records = self
            .panel
            .records()
            .iter()
            .filter(|r| r.period == first || r.period == second)
            .map(|r| PanelRecord {
                period: usize::from(r.period == second),
                ..r.clone()
            })
            .collect();
        Ok(PanelDataset::new(records)?)
    }

    /// The two periods to compare: the given labels, or the only two periods.
    pub fn period_pair(
        &self,
        first: Option<&str>,
        second: Option<&str>,
    ) -> CliResult<(usize, usize)> {
        match (first, second) {
            (Some(a), Some(b)) => {
                let (a, b) = (self.ordinal(a)?, self.ordinal(b)?);
                if a == b {
                    return Err(CliError::Input("the two periods must differ".into()));
                }
                Ok((a, b))
            }
            (None, None) if self.labels.len() == 2 => Ok((0, 1)),
            (None, None) => Err(CliError::Input(format!(
                "the panel has {} periods; choose two explicitly",
                self.labels.len()
            ))),
            _ => Err(CliError::Input("give both periods or neither".into())),
        }
    }
}

/// Reads `unit_id,group,period,outcome`. Period labels get ordinals from
/// `order` if given, otherwise by first appearance.
pub fn read_panel(path: &Path, order: Option<&[String]>) -> CliResult<LabelledPanel> {
    let mut reader = open(path)?;
    let header = reader
        .headers()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        .clone();
    if header.iter().collect::<Vec<_>>() != ["unit_id", "group", "period", "outcome"] {
        return Err(CliError::Input(format!(
            "{} line 1: header must be unit_id,group,period,outcome",
            path.display()
        )));
    }
    let mut labels: Vec<String> = order.map(<[String]>::to_vec).unwrap_or_default();
    let mut index: HashMap<String, usize> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.clone(), i))
        .collect();
    if index.len() != labels.len() {
        return Err(CliError::Input("--period-order repeats a label".into()));
    }
    let mut out = Vec::new();
    for record in records(&mut reader, path) {
        let record = record?;
        let line = line_of(&record);
        let label = record[2].to_string();
        let period = match index.get(&label) {
            Some(&p) => p,
            None if order.is_some() => {
                return Err(CliError::Input(format!(
                    "line {line}: period {label:?} is not in --period-order"
                )))
            }
            None => {
                labels.push(label.clone());
                index.insert(label, labels.len() - 1);
                labels.len() - 1
            }
        };
        out.push(PanelRecord {
            unit_id: record[0].to_string(),
            group: parse_flag(&record[1], "group", line)?,
            period,
            outcome: parse_number(&record[3], "outcome", line)?,
        });
    }
    Ok(LabelledPanel {
        panel: PanelDataset::new(out)?,
        labels,
    })
}

/// Reads `treated_id,control_id[,...]`.
pub fn read_pairs(path: &Path) -> CliResult<Vec<(String, String)>> {
    let mut reader = open(path)?;
    let header = reader
        .headers()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        .clone();
    if header.len() < 2 || &header[0] != "treated_id" || &header[1] != "control_id" {
        return Err(CliError::Input(format!(
            "{} line 1: header must start with treated_id,control_id",
            path.display()
        )));
    }
    let mut pairs = Vec::new();
    for record in records(&mut reader, path) {
        let record = record?;
        pairs.push((record[0].to_string(), record[1].to_string()));
    }
    if pairs.is_empty() {
        return Err(CliError::Input(format!("{} has no pairs", path.display())));
    }
    Ok(pairs)
}

/// Files produced by a command, written together or not at all.
#[derive(Debug, Default)]
pub struct OutputSet {
    files: Vec<(String, Vec<u8>)>,
}

impl OutputSet {
    pub fn add(&mut self, name: &str, contents: Vec<u8>) {
        self.files.push((name.to_string(), contents));
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|(n, _)| n.clone()).collect()
    }

    /// Stages every file in `dir` and renames them into place only after all
    /// were written.
    pub fn commit(self, dir: &Path) -> CliResult<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut staged = Vec::with_capacity(self.files.len());
        for (name, contents) in &self.files {
            let mut tmp = tempfile::Builder::new()
                .prefix(".matchdid-")
                .tempfile_in(dir)?;
            tmp.write_all(contents)?;
            tmp.as_file().sync_all()?;
            staged.push((tmp, dir.join(name)));
        }
        let mut written = Vec::with_capacity(staged.len());
        for (tmp, target) in staged {
            tmp.persist(&target)
                .map_err(|e| CliError::Internal(e.to_string()))?;
            written.push(target);
        }
        Ok(written)
    }
}

pub fn csv_bytes<F>(header: &[&str], write_rows: F) -> CliResult<Vec<u8>>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::Internal(e.to_string());
    w.write_record(header).map_err(fail)?;
    write_rows(&mut w).map_err(fail)?;
    w.into_inner()
        .map_err(|e| CliError::Internal(e.to_string()))
}

/// Optional numbers as empty CSV fields.
pub fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
