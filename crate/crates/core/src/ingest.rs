//! Panel data to Gaussian measures.
//!
//! A panel is a CSV of `entity,date,v1,...,vd` rows (for instance weekly
//! yield curves per country). Rows are bucketed into named date periods and
//! each entity's rows within a period are condensed into the sample mean and
//! sample covariance.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{GaussianMeasure, MeasureCollection};
use crate::spd::ensure_spd;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelRecord {
    pub entity: String,
    pub date: NaiveDate,
    pub values: Vec<f64>,
}

/// Records read from a panel file plus how many rows were skipped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Panel {
    pub records: Vec<PanelRecord>,
    pub dropped: usize,
    pub dim: usize,
}

/// A named closed date interval.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodSpec {
    pub name: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl PeriodSpec {
    pub fn new(name: impl Into<String>, start: NaiveDate, end: NaiveDate) -> Result<Self> {
        let spec = PeriodSpec {
            name: name.into(),
            start,
            end,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if self.start > self.end {
            return Err(Error::InvalidConfig(format!(
                "period {:?} starts {} after it ends {}",
                self.name, self.start, self.end
            )));
        }
        Ok(())
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum CovDenominator {
    #[default]
    #[serde(rename = "n-1")]
    NMinus1,
    #[serde(rename = "n")]
    N,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryConfig {
    pub cov_denominator: CovDenominator,
    /// Repair jitter as a fraction of the mean diagonal of the covariance
    /// (absolute when that diagonal is zero).
    pub jitter: f64,
    /// Defaults to `d + 1`.
    pub min_records: Option<usize>,
}

impl Default for SummaryConfig {
    fn default() -> Self {
        SummaryConfig {
            cov_denominator: CovDenominator::NMinus1,
            jitter: 1e-8,
            min_records: None,
        }
    }
}

impl SummaryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.jitter > 0.0 && self.jitter.is_finite()) {
            return Err(Error::InvalidConfig(format!("jitter must be positive, got {}", self.jitter)));
        }
        Ok(())
    }

    pub fn min_records_for(&self, dim: usize) -> usize {
        self.min_records.unwrap_or(dim + 1)
    }
}

/// Reads a panel CSV.
///
/// Rows with an empty value are skipped and counted; so are rows that fail
/// to parse, unless `strict` is set, in which case the first bad row is a
/// [`Error::Parse`] naming its line. The returned records are sorted by date,
/// keeping file order within a date.
pub fn load_panel(path: impl AsRef<Path>, strict: bool) -> Result<Panel> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    read_panel(file, path, strict)
}

pub fn read_panel(reader: impl std::io::Read, path: &Path, strict: bool) -> Result<Panel> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let dim = check_header(&header)?;

    let mut panel = Panel {
        dim,
        ..Panel::default()
    };
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map_or(0, |p| p.line());
        match parse_row(&row, dim) {
            Ok(record) => panel.records.push(record),
            Err(message) if strict => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message,
                })
            }
            Err(message) => {
                log::warn!("{}:{line}: skipping row: {message}", path.display());
                panel.dropped += 1;
            }
        }
    }
    panel.records.sort_by_key(|r| r.date);
    Ok(panel)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}

fn check_header(header: &csv::StringRecord) -> Result<usize> {
    let fields: Vec<&str> = header.iter().collect();
    if fields.len() < 3 || fields[0] != "entity" || fields[1] != "date" {
        return Err(Error::Schema(format!(
            "expected header entity,date,v1,...,vd, got {}",
            fields.join(",")
        )));
    }
    Ok(fields.len() - 2)
}

fn parse_row(row: &csv::StringRecord, dim: usize) -> std::result::Result<PanelRecord, String> {
    if row.len() != dim + 2 {
        return Err(format!("expected {} fields, got {}", dim + 2, row.len()));
    }
    let entity = &row[0];
    if entity.is_empty() {
        return Err("missing entity".into());
    }
    let date = NaiveDate::parse_from_str(&row[1], "%Y-%m-%d").map_err(|e| format!("bad date {:?}: {e}", &row[1]))?;
    let values = row
        .iter()
        .skip(2)
        .enumerate()
        .map(|(j, field)| {
            if field.is_empty() {
                return Err(format!("missing value v{}", j + 1));
            }
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(format!("bad value v{} {field:?}", j + 1)),
            }
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(PanelRecord {
        entity: entity.to_string(),
        date,
        values,
    })
}

/// Reads a `name,start,end` period file.
pub fn load_periods(path: impl AsRef<Path>) -> Result<Vec<PeriodSpec>> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| csv_error(path, e))?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().collect::<Vec<_>>() != ["name", "start", "end"] {
        return Err(Error::Schema(format!(
            "expected header name,start,end, got {}",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut specs = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map_or(0, |p| p.line());
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let date = |s: &str| NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| parse_err(format!("bad date {s:?}: {e}")));
        let spec = PeriodSpec {
            name: row[0].to_string(),
            start: date(&row[1])?,
            end: date(&row[2])?,
        };
        spec.validate().map_err(|e| parse_err(e.to_string()))?;
        specs.push(spec);
    }
    Ok(specs)
}

/// Records bucketed by period, then by entity.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodSplit {
    /// In the order the periods were given.
    pub periods: Vec<(PeriodSpec, BTreeMap<String, Vec<PanelRecord>>)>,
    /// Records outside every period.
    pub dropped: usize,
}

impl PeriodSplit {
    pub fn get(&self, name: &str) -> Option<&BTreeMap<String, Vec<PanelRecord>>> {
        self.periods.iter().find(|(p, _)| p.name == name).map(|(_, b)| b)
    }
}

/// Puts every record in the period containing its date.
///
/// Periods are closed intervals. Two periods may share one boundary date,
/// which then goes to the earlier-starting period; any wider overlap is
/// [`Error::OverlappingPeriods`].
pub fn split_periods(records: &[PanelRecord], specs: &[PeriodSpec]) -> Result<PeriodSplit> {
    let mut names = std::collections::HashSet::new();
    for spec in specs {
        spec.validate()?;
        if !names.insert(spec.name.as_str()) {
            return Err(Error::InvalidConfig(format!("period name {:?} is repeated", spec.name)));
        }
    }
    let mut by_start: Vec<usize> = (0..specs.len()).collect();
    by_start.sort_by_key(|i| (specs[*i].start, specs[*i].end));
    for w in by_start.windows(2) {
        let (a, b) = (&specs[w[0]], &specs[w[1]]);
        if b.start < a.end || b.start == a.start {
            return Err(Error::OverlappingPeriods {
                first: a.name.clone(),
                second: b.name.clone(),
            });
        }
    }

    let mut buckets: Vec<BTreeMap<String, Vec<PanelRecord>>> = vec![BTreeMap::new(); specs.len()];
    let mut dropped = 0;
    for record in records {
        match by_start.iter().find(|i| specs[**i].contains(record.date)) {
            Some(i) => buckets[*i].entry(record.entity.clone()).or_default().push(record.clone()),
            None => dropped += 1,
        }
    }
    if dropped > 0 {
        log::warn!("{dropped} records fall outside every period");
    }
    Ok(PeriodSplit {
        periods: specs.iter().cloned().zip(buckets).collect(),
        dropped,
    })
}

/// Sample mean and covariance before any repair.
pub fn sample_moments(records: &[PanelRecord], denominator: CovDenominator) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = records.len();
    if n == 0 {
        return Err(Error::TooFewRecords { needed: 1, got: 0 });
    }
    let d = records[0].values.len();
    if let Some(bad) = records.iter().find(|r| r.values.len() != d) {
        return Err(Error::DimMismatch {
            expected: d,
            got: bad.values.len(),
        });
    }
    let mut mean = DVector::zeros(d);
    for r in records {
        for (j, v) in r.values.iter().enumerate() {
            mean[j] += v;
        }
    }
    mean /= n as f64;

    let divisor = match denominator {
        CovDenominator::NMinus1 if n > 1 => (n - 1) as f64,
        CovDenominator::NMinus1 => {
            return Err(Error::TooFewRecords { needed: 2, got: n });
        }
        CovDenominator::N => n as f64,
    };
    let mut cov = DMatrix::zeros(d, d);
    for r in records {
        let centered = DVector::from_iterator(d, r.values.iter().zip(mean.iter()).map(|(v, m)| v - m));
        cov += &centered * centered.transpose();
    }
    cov /= divisor;
    Ok((mean, cov))
}

/// One measure from one entity's records in one period.
pub fn summarize(records: &[PanelRecord], config: &SummaryConfig) -> Result<GaussianMeasure> {
    config.validate()?;
    let d = records.first().map_or(0, |r| r.values.len());
    let needed = config.min_records_for(d);
    if records.len() < needed.max(1) {
        return Err(Error::TooFewRecords {
            needed: needed.max(1),
            got: records.len(),
        });
    }
    let (mean, cov) = sample_moments(records, config.cov_denominator)?;
    let scale = cov.trace() / d as f64;
    let jitter = config.jitter * if scale > 0.0 { scale } else { 1.0 };
    GaussianMeasure::new(mean, ensure_spd(&cov, jitter)?)
}

/// Summaries for one period, labelled by entity.
#[derive(Debug, Clone)]
pub struct PeriodMeasures {
    pub period: PeriodSpec,
    /// `None` when no entity in the period had enough records.
    pub collection: Option<MeasureCollection>,
    /// Entities left out for having too few records.
    pub skipped: Vec<String>,
}

/// Summarizes every entity in every period, skipping entities with fewer
/// than `min_records` rows.
pub fn summarize_split(split: &PeriodSplit, config: &SummaryConfig) -> Result<Vec<PeriodMeasures>> {
    config.validate()?;
    split
        .periods
        .iter()
        .map(|(period, entities)| {
            let entries: Vec<(&String, &Vec<PanelRecord>)> = entities.iter().collect();
            let results: Vec<Result<GaussianMeasure>> =
                entries.par_iter().map(|(_, records)| summarize(records, config)).collect();
            let mut labels = Vec::new();
            let mut measures = Vec::new();
            let mut skipped = Vec::new();
            for ((entity, _), result) in entries.iter().zip(results) {
                match result {
                    Ok(m) => {
                        labels.push((*entity).clone());
                        measures.push(m);
                    }
                    Err(Error::TooFewRecords { needed, got }) => {
                        log::warn!("period {}: skipping {entity}: {got} records, need {needed}", period.name);
                        skipped.push((*entity).clone());
                    }
                    Err(e) => return Err(e),
                }
            }
            let collection = if measures.is_empty() {
                None
            } else {
                Some(MeasureCollection::with_labels(measures, labels)?)
            };
            Ok(PeriodMeasures {
                period: period.clone(),
                collection,
                skipped,
            })
        })
        .collect()
}
