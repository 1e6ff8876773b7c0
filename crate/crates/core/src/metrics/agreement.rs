//! Fusion of several annotations and inter-rater agreement.

use std::collections::BTreeMap;
use std::fmt;

use crate::cube_io::LabelMap;
use crate::error::{Error, Result};

/// Pixel-wise majority of an odd number of binary annotations.
pub fn majority_vote(maps: &[&LabelMap]) -> Result<LabelMap> {
    if maps.len() < 3 || maps.len() % 2 == 0 {
        return Err(Error::InvalidParameter(format!(
            "majority vote needs an odd number (>= 3) of maps, got {}",
            maps.len()
        )));
    }
    let (rows, cols) = (maps[0].rows(), maps[0].cols());
    for m in maps {
        m.check_shape(rows, cols)?;
        if let Some(p) = m.labels().iter().position(|&l| l > 1) {
            return Err(Error::LabelRange {
                index: p,
                value: m.get(p),
            });
        }
    }
    let half = maps.len() / 2;
    let out = (0..rows * cols)
        .map(|p| u8::from(maps.iter().filter(|m| m.get(p) == 1).count() > half))
        .collect();
    LabelMap::new(rows, cols, out)
}

/// Fleiss' kappa for `ratings[item][rater]` holding arbitrary category ids.
/// A table using a single category has kappa 1.
pub fn fleiss_kappa(ratings: &[Vec<u32>]) -> Result<f64> {
    let n = ratings.len();
    if n == 0 {
        return Err(Error::Empty("no rated items".into()));
    }
    let m = ratings[0].len();
    if m < 2 {
        return Err(Error::InvalidParameter("at least two raters are needed".into()));
    }
    if let Some(i) = ratings.iter().position(|r| r.len() != m) {
        return Err(Error::Dimension(format!("item {i} has {} ratings, expected {m}", ratings[i].len())));
    }
    let mut totals: BTreeMap<u32, usize> = BTreeMap::new();
    let mut p_bar = 0.0;
    for item in ratings {
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for &c in item {
            *counts.entry(c).or_default() += 1;
            *totals.entry(c).or_default() += 1;
        }
        let agree: usize = counts.values().map(|&k| k * (k - 1)).sum();
        p_bar += agree as f64 / (m * (m - 1)) as f64;
    }
    p_bar /= n as f64;
    if totals.len() == 1 {
        return Ok(1.0);
    }
    let nm = (n * m) as f64;
    let p_e: f64 = totals.values().map(|&t| (t as f64 / nm).powi(2)).sum();
    Ok((p_bar - p_e) / (1.0 - p_e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum KappaBand {
    Poor,
    Slight,
    Fair,
    Moderate,
    Substantial,
    AlmostPerfect,
}

impl KappaBand {
    pub fn label(self) -> &'static str {
        match self {
            KappaBand::Poor => "poor",
            KappaBand::Slight => "slight",
            KappaBand::Fair => "fair",
            KappaBand::Moderate => "moderate",
            KappaBand::Substantial => "substantial",
            KappaBand::AlmostPerfect => "almost perfect",
        }
    }
}

impl fmt::Display for KappaBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Verbal agreement band. Each band includes its upper bound, so values
/// between two printed bounds (e.g. 0.205) belong to the higher band.
pub fn kappa_band(kappa: f64) -> KappaBand {
    if kappa < 0.0 {
        KappaBand::Poor
    } else if kappa <= 0.20 {
        KappaBand::Slight
    } else if kappa <= 0.40 {
        KappaBand::Fair
    } else if kappa <= 0.60 {
        KappaBand::Moderate
    } else if kappa <= 0.80 {
        KappaBand::Substantial
    } else {
        KappaBand::AlmostPerfect
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vote_picks_majority() {
        let a = LabelMap::new(1, 3, vec![1, 0, 1]).unwrap();
        let b = LabelMap::new(1, 3, vec![1, 0, 0]).unwrap();
        let c = LabelMap::new(1, 3, vec![0, 0, 1]).unwrap();
        assert_eq!(majority_vote(&[&a, &b, &c]).unwrap().labels(), &[1, 0, 1]);
        assert_eq!(majority_vote(&[&a, &a, &a]).unwrap(), a);
        assert!(majority_vote(&[&a, &b]).is_err());
        let bad = LabelMap::new(1, 3, vec![255, 0, 0]).unwrap();
        assert!(majority_vote(&[&a, &b, &bad]).is_err());
    }

    #[test]
    fn kappa_unanimous() {
        assert_eq!(fleiss_kappa(&[vec![0, 0, 0], vec![1, 1, 1]]).unwrap(), 1.0);
        assert_eq!(fleiss_kappa(&[vec![2, 2], vec![2, 2]]).unwrap(), 1.0);
        assert!(fleiss_kappa(&[]).is_err());
        assert!(fleiss_kappa(&[vec![0]]).is_err());
        assert!(fleiss_kappa(&[vec![0, 1], vec![0]]).is_err());
    }

    #[test]
    fn kappa_known_value() {
        // two raters always disagreeing on two balanced categories
        let k = fleiss_kappa(&[vec![0, 1], vec![1, 0], vec![0, 1], vec![1, 0]]).unwrap();
        assert!((k - -1.0).abs() < 1e-12);
    }

    #[test]
    fn band_edges() {
        assert_eq!(kappa_band(-0.1), KappaBand::Poor);
        assert_eq!(kappa_band(0.0), KappaBand::Slight);
        assert_eq!(kappa_band(0.20), KappaBand::Slight);
        assert_eq!(kappa_band(0.205), KappaBand::Fair);
        assert_eq!(kappa_band(0.50), KappaBand::Moderate);
        assert_eq!(kappa_band(0.61), KappaBand::Substantial);
        assert_eq!(kappa_band(0.85), KappaBand::AlmostPerfect);
        assert_eq!(kappa_band(1.0).label(), "almost perfect");
    }
}
