use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::{wilcoxon_ranksum, Metric, RankSum};

use super::config::MICRO_ROW;
use super::report::{read_report, write_significance, ReportRow};

fn per_image(rows: Vec<ReportRow>) -> BTreeMap<String, ReportRow> {
    rows.into_iter()
        .filter(|r| r.image != MICRO_ROW)
        .map(|r| (r.image.clone(), r))
        .collect()
}

/// Rank-sum test of every metric between the per-image values of two runs
/// over the same images. Images where a metric is undefined are left out of
/// that metric's test.
pub fn compare_reports(a: &[ReportRow], b: &[ReportRow]) -> Result<Vec<(Metric, RankSum)>> {
    let (a, b) = (per_image(a.to_vec()), per_image(b.to_vec()));
    if a.is_empty() {
        return Err(Error::Empty("report has no per-image rows".into()));
    }
    if !a.keys().eq(b.keys()) {
        let only_a: Vec<&String> = a.keys().filter(|k| !b.contains_key(*k)).collect();
        let only_b: Vec<&String> = b.keys().filter(|k| !a.contains_key(*k)).collect();
        return Err(Error::Dimension(format!(
            "reports cover different images (only in first: {only_a:?}, only in second: {only_b:?})"
        )));
    }
    Metric::ALL
        .iter()
        .map(|&m| {
            let xs: Vec<f64> = a.values().filter_map(|r| r.report.get(m)).collect();
            let ys: Vec<f64> = b.values().filter_map(|r| r.report.get(m)).collect();
            wilcoxon_ranksum(&xs, &ys)
                .map(|r| (m, r))
                .map_err(|e| Error::Empty(format!("{}: {e}", m.name())))
        })
        .collect()
}

/// Reads two `report.csv` files, tests every metric and writes the
/// significance table to `out`.
pub fn compare_runs(report_a: &Path, report_b: &Path, out: &Path) -> Result<Vec<(Metric, RankSum)>> {
    let results = compare_reports(&read_report(report_a)?, &read_report(report_b)?)?;
    write_significance(out, &results)?;
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{ConfusionCounts, MetricsReport};

    fn row(image: &str, bacc: f64) -> ReportRow {
        ReportRow {
            image: image.into(),
            method: "ssl".into(),
            representation: "hsi".into(),
            extractor: "none".into(),
            counts: ConfusionCounts::default(),
            report: MetricsReport {
                se: Some(bacc),
                sp: Some(bacc),
                bacc: Some(bacc),
                f1: Some(bacc),
                iou: Some(bacc),
                prec: Some(bacc),
            },
        }
    }

    #[test]
    fn self_comparison_is_not_significant() {
        let rows: Vec<ReportRow> = (0..5).map(|i| row(&format!("im{i}"), 0.8 + 0.01 * i as f64)).collect();
        for (_, r) in compare_reports(&rows, &rows).unwrap() {
            assert_eq!(r.p_value, 1.0);
        }
    }

    #[test]
    fn disjoint_ranges_are_significant() {
        let a: Vec<ReportRow> = (0..6).map(|i| row(&format!("im{i}"), 0.80 + 0.01 * i as f64)).collect();
        let b: Vec<ReportRow> = (0..6).map(|i| row(&format!("im{i}"), 0.90 + 0.01 * i as f64)).collect();
        for (_, r) in compare_reports(&a, &b).unwrap() {
            assert!(r.p_value < 0.05);
            assert!((r.p_value - 2.0 / 924.0).abs() < 1e-12);
        }
    }

    #[test]
    fn image_sets_must_match() {
        let a = vec![row("x", 0.5), row("y", 0.6)];
        let b = vec![row("x", 0.5), row("z", 0.6)];
        assert!(compare_reports(&a, &b).is_err());
    }
}
