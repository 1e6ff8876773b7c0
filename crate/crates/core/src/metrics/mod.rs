//! Pixel-wise evaluation: confusion counts, the six ratio metrics, and
//! micro/macro aggregation across images.

pub mod agreement;
pub mod ranksum;

use std::ops::Add;

use crate::cube_io::LabelMap;
use crate::error::{Error, Result};

pub use agreement::{fleiss_kappa, kappa_band, majority_vote, KappaBand};
pub use ranksum::{wilcoxon_ranksum, RankSum, EXACT_MAX};

/// Binary confusion counts with class 1 as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        Self { tp, tn, fp, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

impl Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            tn: self.tn + o.tn,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

/// Counts agreement between `pred` and `gt` over the pixels where `mask`
/// is set. Unlabelled ground-truth pixels are never counted.
pub fn confusion(pred: &LabelMap, gt: &LabelMap, mask: &[bool]) -> Result<ConfusionCounts> {
    gt.check_shape(pred.rows(), pred.cols())?;
    if mask.len() != gt.len() {
        return Err(Error::Dimension(format!("mask of {} for {} pixels", mask.len(), gt.len())));
    }
    let mut c = ConfusionCounts::default();
    for p in (0..gt.len()).filter(|&p| mask[p]) {
        match (pred.get(p), gt.get(p)) {
            (_, LabelMap::UNLABELED) => {}
            (1, 1) => c.tp += 1,
            (1, _) => c.fp += 1,
            (_, 1) => c.fn_ += 1,
            _ => c.tn += 1,
        }
    }
    if c.total() == 0 {
        return Err(Error::Empty("no annotated pixel under the evaluation mask".into()));
    }
    Ok(c)
}

/// The six reported metrics. `None` marks a ratio whose denominator is zero.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MetricsReport {
    pub se: Option<f64>,
    pub sp: Option<f64>,
    pub bacc: Option<f64>,
    pub f1: Option<f64>,
    pub iou: Option<f64>,
    pub prec: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Se,
    Sp,
    Bacc,
    F1,
    Iou,
    Prec,
}

impl Metric {
    pub const ALL: [Metric; 6] = [Metric::Se, Metric::Sp, Metric::Bacc, Metric::F1, Metric::Iou, Metric::Prec];

    /// Column name used in reports.
    pub fn name(self) -> &'static str {
        match self {
            Metric::Se => "SE",
            Metric::Sp => "SP",
            Metric::Bacc => "BACC",
            Metric::F1 => "F1",
            Metric::Iou => "IoU",
            Metric::Prec => "PREC",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }
}

impl MetricsReport {
    pub fn get(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Se => self.se,
            Metric::Sp => self.sp,
            Metric::Bacc => self.bacc,
            Metric::F1 => self.f1,
            Metric::Iou => self.iou,
            Metric::Prec => self.prec,
        }
    }

    pub fn set(&mut self, m: Metric, v: Option<f64>) {
        let slot = match m {
            Metric::Se => &mut self.se,
            Metric::Sp => &mut self.sp,
            Metric::Bacc => &mut self.bacc,
            Metric::F1 => &mut self.f1,
            Metric::Iou => &mut self.iou,
            Metric::Prec => &mut self.prec,
        };
        *slot = v;
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn metrics(c: &ConfusionCounts) -> MetricsReport {
    let se = ratio(c.tp, c.tp + c.fn_);
    let sp = ratio(c.tn, c.tn + c.fp);
    MetricsReport {
        se,
        sp,
        bacc: se.zip(sp).map(|(a, b)| (a + b) / 2.0),
        f1: ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
        iou: ratio(c.tp, c.tp + c.fp + c.fn_),
        prec: ratio(c.tp, c.tp + c.fp),
    }
}

/// Pools the counts of all images, then computes the metrics.
pub fn micro_aggregate(counts: &[ConfusionCounts]) -> Result<MetricsReport> {
    if counts.is_empty() {
        return Err(Error::Empty("no confusion counts to aggregate".into()));
    }
    let pooled = counts.iter().copied().fold(ConfusionCounts::default(), Add::add);
    Ok(metrics(&pooled))
}

/// Mean and sample standard deviation of one metric over images.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacroStat {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    /// Images where the metric was defined.
    pub n: usize,
    /// Images skipped because the metric was undefined.
    pub undefined: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacroReport {
    pub stats: Vec<(Metric, MacroStat)>,
}

impl MacroReport {
    pub fn get(&self, m: Metric) -> MacroStat {
        self.stats.iter().find(|(k, _)| *k == m).map(|(_, s)| *s).expect("every metric present")
    }
}

/// Per-metric mean and sample (n-1) standard deviation; undefined entries
/// are skipped and counted. A single defined value has std 0.
pub fn macro_aggregate(reports: &[MetricsReport]) -> Result<MacroReport> {
    if reports.is_empty() {
        return Err(Error::Empty("no reports to aggregate".into()));
    }
    let stats = Metric::ALL
        .into_iter()
        .map(|m| {
            let vals: Vec<f64> = reports.iter().filter_map(|r| r.get(m)).collect();
            let n = vals.len();
            let mean = (n > 0).then(|| vals.iter().sum::<f64>() / n as f64);
            let std = mean.map(|mu| {
                if n < 2 {
                    0.0
                } else {
                    (vals.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (n - 1) as f64).sqrt()
                }
            });
            (
                m,
                MacroStat {
                    mean,
                    std,
                    n,
                    undefined: reports.len() - n,
                },
            )
        })
        .collect();
    Ok(MacroReport { stats })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction() {
        let r = metrics(&ConfusionCounts::new(1, 1, 0, 0));
        for m in Metric::ALL {
            assert_eq!(r.get(m), Some(1.0));
        }
    }

    #[test]
    fn undefined_ratios() {
        let r = metrics(&ConfusionCounts::new(0, 5, 0, 0));
        assert_eq!(r.se, None);
        assert_eq!(r.prec, None);
        assert_eq!(r.f1, None);
        assert_eq!(r.sp, Some(1.0));
        assert_eq!(r.bacc, None);
        let r = metrics(&ConfusionCounts::default());
        assert!(Metric::ALL.iter().all(|&m| r.get(m).is_none()));
    }

    #[test]
    fn confusion_counts_against_gt() {
        let gt = LabelMap::new(1, 5, vec![1, 1, 0, 0, 255]).unwrap();
        let pred = LabelMap::new(1, 5, vec![1, 0, 1, 0, 1]).unwrap();
        let c = confusion(&pred, &gt, &[true; 5]).unwrap();
        assert_eq!(c, ConfusionCounts::new(1, 1, 1, 1));
        let c = confusion(&pred, &gt, &[true, false, false, false, false]).unwrap();
        assert_eq!(c, ConfusionCounts::new(1, 0, 0, 0));
        assert!(confusion(&pred, &gt, &[false, false, false, false, true]).is_err());
        let other = LabelMap::new(5, 1, vec![0; 5]).unwrap();
        assert!(confusion(&other, &gt, &[true; 5]).is_err());
    }

    #[test]
    fn macro_two_reports() {
        let mut a = MetricsReport::default();
        let mut b = MetricsReport::default();
        a.bacc = Some(0.9);
        b.bacc = Some(1.0);
        let m = macro_aggregate(&[a, b]).unwrap();
        let s = m.get(Metric::Bacc);
        assert!((s.mean.unwrap() - 0.95).abs() < 1e-15);
        assert!((s.std.unwrap() - 0.070711).abs() < 1e-6);
        assert_eq!(m.get(Metric::Se).n, 0);
        assert_eq!(m.get(Metric::Se).undefined, 2);
        assert_eq!(m.get(Metric::Se).mean, None);
        let single = macro_aggregate(&[a]).unwrap();
        assert_eq!(single.get(Metric::Bacc).std, Some(0.0));
        assert!(macro_aggregate(&[]).is_err());
        assert!(micro_aggregate(&[]).is_err());
    }
}
