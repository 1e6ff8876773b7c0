use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::{ConfusionCounts, MacroReport, Metric, MetricsReport, RankSum};

use super::config::RunConfig;

/// Six-decimal value, or `NA` when undefined.
pub fn fmt_value(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.6}"),
        None => "NA".into(),
    }
}

/// One line of `report.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub image: String,
    pub method: String,
    pub representation: String,
    pub extractor: String,
    pub counts: ConfusionCounts,
    pub report: MetricsReport,
}

impl ReportRow {
    pub fn new(image: &str, config: &RunConfig, counts: ConfusionCounts, report: MetricsReport) -> Self {
        Self {
            image: image.into(),
            method: config.classify.method.name().into(),
            representation: config.representation.name().into(),
            extractor: config.extractor.name().into(),
            counts,
            report,
        }
    }
}

const FIXED_COLUMNS: [&str; 8] = ["image", "method", "representation", "extractor", "tp", "tn", "fp", "fn"];

fn write_file(path: &Path, text: String) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_report(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let mut header: Vec<&str> = FIXED_COLUMNS.to_vec();
    header.extend(Metric::ALL.iter().map(|m| m.name()));
    let mut text = header.join(",");
    text.push('\n');
    for r in rows {
        let c = &r.counts;
        let mut cells = vec![
            r.image.clone(),
            r.method.clone(),
            r.representation.clone(),
            r.extractor.clone(),
            c.tp.to_string(),
            c.tn.to_string(),
            c.fp.to_string(),
            c.fn_.to_string(),
        ];
        cells.extend(Metric::ALL.iter().map(|&m| fmt_value(r.report.get(m))));
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    write_file(path, text)
}

fn parse_value(cell: &str) -> Result<Option<f64>> {
    if cell == "NA" {
        return Ok(None);
    }
    cell.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Config(format!("bad metric value `{cell}`")))
}

/// Reads a `report.csv` written by [`write_report`].
pub fn read_report(path: &Path) -> Result<Vec<ReportRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("{}: missing column `{name}`", path.display())))
    };
    let fixed: Vec<usize> = FIXED_COLUMNS.iter().map(|c| col(c)).collect::<Result<_>>()?;
    let metric_cols: Vec<(Metric, usize)> = Metric::ALL
        .iter()
        .map(|&m| col(m.name()).map(|i| (m, i)))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let count = |i: usize| {
            rec[fixed[i]]
                .parse::<u64>()
                .map_err(|_| Error::Config(format!("bad count `{}`", &rec[fixed[i]])))
        };
        let mut report = MetricsReport::default();
        for &(m, i) in &metric_cols {
            report.set(m, parse_value(&rec[i])?);
        }
        rows.push(ReportRow {
            image: rec[fixed[0]].to_string(),
            method: rec[fixed[1]].to_string(),
            representation: rec[fixed[2]].to_string(),
            extractor: rec[fixed[3]].to_string(),
            counts: ConfusionCounts::new(count(4)?, count(5)?, count(6)?, count(7)?),
            report,
        });
    }
    Ok(rows)
}

pub fn write_macro(path: &Path, report: &MacroReport) -> Result<()> {
    let mut text = String::from("metric,mean,std,n,undefined\n");
    for (m, s) in &report.stats {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            m.name(),
            fmt_value(s.mean),
            fmt_value(s.std),
            s.n,
            s.undefined
        ));
    }
    write_file(path, text)
}

/// Significance threshold for the reject column.
pub const ALPHA: f64 = 0.05;

pub fn write_significance(path: &Path, results: &[(Metric, RankSum)]) -> Result<()> {
    let mut text = String::from("metric,p_value,reject_at_0.05\n");
    for (m, r) in results {
        text.push_str(&format!("{},{:.6},{}\n", m.name(), r.p_value, r.p_value < ALPHA));
    }
    write_file(path, text)
}
