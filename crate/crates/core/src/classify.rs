//! Patch-level pixel classifiers: self-training on top of k-NN, plus the
//! plain k-NN and linear SVM baselines.
//!
//! All randomness is drawn from seeded ChaCha streams and every tie is
//! broken toward the lower index, so results are reproducible bit for bit.

use std::cmp::Ordering;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cube_io::{FeatureStack, LabelMap};
use crate::error::{Error, Result};
use crate::metrics::{confusion, ConfusionCounts};

/// Training pixels of one patch with their binary labels, sorted by pixel
/// index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSet {
    indices: Vec<usize>,
    labels: Vec<u8>,
}

impl LabeledSet {
    pub fn new(indices: Vec<usize>, labels: Vec<u8>) -> Result<Self> {
        if indices.len() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} indices for {} labels",
                indices.len(),
                labels.len()
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidParameter(format!("training label {l} is not binary")));
        }
        let mut pairs: Vec<(usize, u8)> = indices.into_iter().zip(labels).collect();
        pairs.sort_unstable();
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidParameter("duplicate training pixel".into()));
        }
        let (indices, labels) = pairs.into_iter().unzip();
        Ok(Self { indices, labels })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn count(&self, class: u8) -> usize {
        self.labels.iter().filter(|&&l| l == class).count()
    }

    pub fn contains(&self, pixel: usize) -> bool {
        self.indices.binary_search(&pixel).is_ok()
    }

    pub fn require_both_classes(&self) -> Result<()> {
        for class in [0u8, 1] {
            if self.count(class) == 0 {
                return Err(Error::MissingClass(class));
            }
        }
        Ok(())
    }
}

/// Draws `ceil(fraction * n_c)` pixels of each class `c` uniformly without
/// replacement.
pub fn sample_labels(gt: &LabelMap, fraction: f64, seed: u64) -> Result<LabeledSet> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!("label fraction {fraction} not in (0,1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices = Vec::new();
    let mut labels = Vec::new();
    for class in [LabelMap::NON_CANCER, LabelMap::CANCER] {
        let members: Vec<usize> = (0..gt.len()).filter(|&p| gt.get(p) == class).collect();
        if members.is_empty() {
            return Err(Error::MissingClass(class));
        }
        // the epsilon keeps e.g. 0.01 * 700 from rounding up to 8
        let take = ((fraction * members.len() as f64 - 1e-9).ceil() as usize).clamp(1, members.len());
        for i in index::sample(&mut rng, members.len(), take).into_iter() {
            indices.push(members[i]);
            labels.push(class);
        }
    }
    LabeledSet::new(indices, labels)
}

/// Labelled points in a flat row-major buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    dim: usize,
    points: Vec<f64>,
    labels: Vec<u8>,
}

impl TrainingSet {
    pub fn new(dim: usize, points: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if dim == 0 || points.len() != dim * labels.len() {
            return Err(Error::Dimension(format!(
                "{} values for {} points of dimension {dim}",
                points.len(),
                labels.len()
            )));
        }
        Ok(Self { dim, points, labels })
    }

    /// Gathers the labelled pixels of a feature stack.
    pub fn from_stack(features: &FeatureStack, set: &LabeledSet) -> Self {
        let mut points = Vec::with_capacity(set.len() * features.dim());
        for &p in set.indices() {
            points.extend_from_slice(features.pixel(p));
        }
        Self {
            dim: features.dim(),
            points,
            labels: set.labels().to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Label and majority fraction for a single query.
fn knn_one(train: &TrainingSet, query: &[f64], k: usize) -> (u8, f64) {
    // (distance, index), kept sorted; lower index wins distance ties
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for i in 0..train.len() {
        let d = sq_dist(train.point(i), query);
        if best.len() == k && d >= best[k - 1].0 {
            continue;
        }
        let pos = best.partition_point(|&(bd, _)| bd <= d);
        best.insert(pos, (d, i));
        best.truncate(k);
    }
    let ones = best.iter().filter(|&&(_, i)| train.labels[i] == 1).count();
    let zeros = k - ones;
    if ones > zeros {
        (1, ones as f64 / k as f64)
    } else {
        (0, zeros as f64 / k as f64)
    }
}

/// Euclidean k-NN majority vote. `queries` holds rows of `train.dim()`
/// values. Vote ties go to class 0.
pub fn knn_predict(train: &TrainingSet, queries: &[f64], k: usize) -> Result<(Vec<u8>, Vec<f64>)> {
    if train.is_empty() {
        return Err(Error::Empty("k-NN training set is empty".into()));
    }
    if k == 0 || k > train.len() {
        return Err(Error::InvalidParameter(format!(
            "k = {k} with {} training points",
            train.len()
        )));
    }
    if queries.len() % train.dim() != 0 {
        return Err(Error::Dimension("query buffer is not a whole number of rows".into()));
    }
    Ok(queries
        .par_chunks(train.dim())
        .map(|q| knn_one(train, q, k))
        .unzip())
}

fn default_k() -> usize {
    5
}
fn default_tau() -> f64 {
    0.9
}
fn default_rounds() -> usize {
    10
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SslConfig {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_rounds")]
    pub max_rounds: usize,
    /// Pseudo-labels accepted per round; 0 means no limit.
    #[serde(default)]
    pub batch_cap: usize,
}

impl Default for SslConfig {
    fn default() -> Self {
        Self {
            k: default_k(),
            tau: default_tau(),
            max_rounds: default_rounds(),
            batch_cap: 0,
        }
    }
}

impl SslConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be >= 1".into()));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::InvalidParameter(format!("tau {} not in (0,1]", self.tau)));
        }
        if self.max_rounds == 0 {
            return Err(Error::InvalidParameter("max_rounds must be positive".into()));
        }
        Ok(())
    }
}

/// `k` when the pool has that many points, otherwise the largest odd
/// count the pool allows, so a tiny pool cannot force tied votes.
pub fn effective_k(k: usize, pool: usize) -> usize {
    if k <= pool || pool == 0 {
        k.min(pool)
    } else if pool % 2 == 0 {
        pool - 1
    } else {
        pool
    }
}

/// Output of [`self_train`].
#[derive(Debug, Clone, PartialEq)]
pub struct SelfTraining {
    pub prediction: LabelMap,
    /// Labelled pool size before the first round and after each round.
    pub pool_sizes: Vec<usize>,
    /// Pixels that entered the pool as pseudo-labels, in the order added.
    pub pseudo_labeled: Vec<usize>,
}

/// Self-training with a k-NN base learner: each round every unlabelled pixel
/// whose neighbour vote reaches `tau` joins the pool with its predicted
/// label. Pooled labels are never revisited. Pixels still unlabelled at the
/// end take the final classifier's prediction. `k` is capped as in
/// [`effective_k`].
pub fn self_train(features: &FeatureStack, seeds: &LabeledSet, config: &SslConfig) -> Result<SelfTraining> {
    config.validate()?;
    seeds.require_both_classes()?;
    let npix = features.pixel_count();
    if let Some(&p) = seeds.indices().iter().find(|&&p| p >= npix) {
        return Err(Error::Dimension(format!("seed pixel {p} outside the patch")));
    }
    let dim = features.dim();
    let mut pool: Vec<Option<u8>> = vec![None; npix];
    for (&p, &l) in seeds.indices().iter().zip(seeds.labels()) {
        pool[p] = Some(l);
    }
    let mut pool_size = seeds.len();
    let mut pool_sizes = vec![pool_size];
    let mut pseudo_labeled = Vec::new();

    let build = |pool: &[Option<u8>]| -> TrainingSet {
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for (p, l) in pool.iter().enumerate() {
            if let Some(l) = l {
                points.extend_from_slice(features.pixel(p));
                labels.push(*l);
            }
        }
        TrainingSet { dim, points, labels }
    };
    let unlabeled_queries = |pool: &[Option<u8>]| -> (Vec<usize>, Vec<f64>) {
        let idx: Vec<usize> = (0..npix).filter(|&p| pool[p].is_none()).collect();
        let mut q = Vec::with_capacity(idx.len() * dim);
        for &p in &idx {
            q.extend_from_slice(features.pixel(p));
        }
        (idx, q)
    };

    for _ in 0..config.max_rounds {
        let (idx, queries) = unlabeled_queries(&pool);
        if idx.is_empty() {
            break;
        }
        let train = build(&pool);
        let k = effective_k(config.k, train.len());
        let (labels, conf) = knn_predict(&train, &queries, k)?;
        let mut accepted: Vec<usize> = (0..idx.len()).filter(|&i| conf[i] >= config.tau).collect();
        if accepted.is_empty() {
            break;
        }
        accepted.sort_by(|&a, &b| conf[b].partial_cmp(&conf[a]).unwrap_or(Ordering::Equal).then(idx[a].cmp(&idx[b])));
        if config.batch_cap > 0 {
            accepted.truncate(config.batch_cap);
        }
        for &i in &accepted {
            pool[idx[i]] = Some(labels[i]);
            pseudo_labeled.push(idx[i]);
        }
        pool_size += accepted.len();
        pool_sizes.push(pool_size);
    }

    let (idx, queries) = unlabeled_queries(&pool);
    let mut out: Vec<u8> = pool.iter().map(|l| l.unwrap_or(0)).collect();
    if !idx.is_empty() {
        let train = build(&pool);
        let k = effective_k(config.k, train.len());
        let (labels, _) = knn_predict(&train, &queries, k)?;
        for (p, l) in idx.into_iter().zip(labels) {
            out[p] = l;
        }
    }
    Ok(SelfTraining {
        prediction: LabelMap::new(features.rows(), features.cols(), out)?,
        pool_sizes,
        pseudo_labeled,
    })
}

/// Linear decision function `w . x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvm {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearSvm {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.decision(x) > 0.0)
    }
}

/// L2-regularised hinge-loss SVM trained by seeded stochastic subgradient
/// descent with step `1 / (lambda t)`. The bias is learned as the weight of
/// a constant input, and the returned model is the average of all iterates.
pub fn linear_svm_fit(train: &TrainingSet, lambda: f64, epochs: usize, seed: u64) -> Result<LinearSvm> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    if epochs == 0 {
        return Err(Error::InvalidParameter("epochs must be positive".into()));
    }
    for class in [0u8, 1] {
        if !train.labels.contains(&class) {
            return Err(Error::MissingClass(class));
        }
    }
    let dim = train.dim;
    let mut w = vec![0.0; dim + 1];
    let mut avg = vec![0.0; dim + 1];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut t = 0usize;
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let x = train.point(i);
            let y = if train.labels[i] == 1 { 1.0 } else { -1.0 };
            let margin = y * (w[..dim].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[dim]);
            let shrink = 1.0 - eta * lambda;
            for v in w.iter_mut() {
                *v *= shrink;
            }
            if margin < 1.0 {
                for (wk, xk) in w[..dim].iter_mut().zip(x) {
                    *wk += eta * y * xk;
                }
                w[dim] += eta * y;
            }
            let a = 1.0 / t as f64;
            for (m, v) in avg.iter_mut().zip(&w) {
                *m += a * (v - *m);
            }
        }
    }
    let bias = avg[dim];
    avg.truncate(dim);
    Ok(LinearSvm { weights: avg, bias })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ssl,
    Knn,
    Svm,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Ssl => "ssl",
            Method::Knn => "knn",
            Method::Svm => "svm",
        }
    }
}

fn default_method() -> Method {
    Method::Ssl
}
fn default_fraction() -> f64 {
    0.01
}
fn default_lambda() -> f64 {
    1e-3
}
fn default_epochs() -> usize {
    20
}

/// The `classify` configuration section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyConfig {
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default = "default_fraction")]
    pub fraction: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_rounds")]
    pub max_rounds: usize,
    #[serde(default)]
    pub batch_cap: usize,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            method: default_method(),
            fraction: default_fraction(),
            seed: 0,
            k: default_k(),
            tau: default_tau(),
            max_rounds: default_rounds(),
            batch_cap: 0,
            lambda: default_lambda(),
            epochs: default_epochs(),
        }
    }
}

impl ClassifyConfig {
    pub fn ssl(&self) -> SslConfig {
        SslConfig {
            k: self.k,
            tau: self.tau,
            max_rounds: self.max_rounds,
            batch_cap: self.batch_cap,
        }
    }
}

/// Prediction and evaluation of one patch.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchOutcome {
    pub prediction: LabelMap,
    pub confusion: ConfusionCounts,
    pub training: LabeledSet,
}

/// Pixels scored for a patch: annotated, and not used for training.
pub fn evaluation_mask(gt: &LabelMap, training: &LabeledSet) -> Vec<bool> {
    (0..gt.len())
        .map(|p| gt.get(p) != LabelMap::UNLABELED && !training.contains(p))
        .collect()
}

/// Trains `method` on an already drawn training set and scores every
/// remaining annotated pixel.
pub fn classify_with_labels(
    features: &FeatureStack,
    gt: &LabelMap,
    training: &LabeledSet,
    method: Method,
    config: &ClassifyConfig,
) -> Result<PatchOutcome> {
    gt.check_shape(features.rows(), features.cols())?;
    training.require_both_classes()?;
    let prediction = match method {
        Method::Ssl => self_train(features, training, &config.ssl())?.prediction,
        Method::Knn => {
            let train = TrainingSet::from_stack(features, training);
            let k = effective_k(config.k, train.len());
            let (labels, _) = knn_predict(&train, features.data(), k)?;
            LabelMap::new(features.rows(), features.cols(), labels)?
        }
        Method::Svm => {
            let scaled = features.min_max_scaled();
            let train = TrainingSet::from_stack(&scaled, training);
            let model = linear_svm_fit(&train, config.lambda, config.epochs, config.seed)?;
            let labels = (0..scaled.pixel_count()).map(|p| model.predict(scaled.pixel(p))).collect();
            LabelMap::new(features.rows(), features.cols(), labels)?
        }
    };
    let mask = evaluation_mask(gt, training);
    if !mask.iter().any(|&m| m) {
        return Err(Error::Empty("no pixels left to evaluate after removing training pixels".into()));
    }
    let confusion = confusion(&prediction, gt, &mask)?;
    Ok(PatchOutcome {
        prediction,
        confusion,
        training: training.clone(),
    })
}

/// Samples labels, trains `method`, predicts and scores one patch.
pub fn classify_patch(
    features: &FeatureStack,
    gt: &LabelMap,
    method: Method,
    fraction: f64,
    seed: u64,
    config: &ClassifyConfig,
) -> Result<PatchOutcome> {
    let training = sample_labels(gt, fraction, seed)?;
    classify_with_labels(features, gt, &training, method, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map_with_counts(zeros: usize, ones: usize) -> LabelMap {
        let mut v = vec![0u8; zeros];
        v.extend(std::iter::repeat(1u8).take(ones));
        v.push(255);
        LabelMap::new(1, v.len(), v).unwrap()
    }

    #[test]
    fn sampling_counts() {
        let gt = map_with_counts(300, 700);
        let set = sample_labels(&gt, 0.01, 4).unwrap();
        assert_eq!(set.count(0), 3);
        assert_eq!(set.count(1), 7);
        assert_eq!(set, sample_labels(&gt, 0.01, 4).unwrap());
        assert_ne!(set, sample_labels(&gt, 0.01, 5).unwrap());
        let all = sample_labels(&gt, 1.0, 0).unwrap();
        assert_eq!(all.len(), 1000);
        assert!(!all.contains(1000));
        for (&p, &l) in set.indices().iter().zip(set.labels()) {
            assert_eq!(gt.get(p), l);
        }
        assert!(matches!(sample_labels(&map_with_counts(5, 0), 0.5, 0), Err(Error::MissingClass(1))));
        assert!(sample_labels(&gt, 0.0, 0).is_err());
    }

    #[test]
    fn labeled_set_rejects_duplicates() {
        assert!(LabeledSet::new(vec![1, 1], vec![0, 1]).is_err());
        assert!(LabeledSet::new(vec![1, 2], vec![0, 2]).is_err());
    }

    #[test]
    fn knn_basic_votes() {
        let train = TrainingSet::new(1, vec![0.0, 1.0, 2.0, 10.0], vec![1, 1, 0, 0]).unwrap();
        let (l, c) = knn_predict(&train, &[2.0], 1).unwrap();
        assert_eq!((l[0], c[0]), (0, 1.0));
        let (l, c) = knn_predict(&train, &[0.9], 3).unwrap();
        assert_eq!(l[0], 1);
        assert!((c[0] - 2.0 / 3.0).abs() < 1e-15);
        // neighbours 1.0 (class 1) and 2.0 (class 0): vote tie goes to class 0
        let (l, c) = knn_predict(&train, &[1.4], 2).unwrap();
        assert_eq!((l[0], c[0]), (0, 0.5));
        let (l, c) = knn_predict(&train, &[0.6], 2).unwrap();
        assert_eq!((l[0], c[0]), (1, 1.0));
        let (l, _) = knn_predict(&train, &[1.5], 4).unwrap();
        assert_eq!(l[0], 0);
        assert!(knn_predict(&train, &[0.0], 5).is_err());
        let empty = TrainingSet::new(1, vec![], vec![]).unwrap();
        assert!(matches!(knn_predict(&empty, &[0.0], 1), Err(Error::Empty(_))));
    }

    #[test]
    fn knn_distance_ties_prefer_lower_index() {
        let train = TrainingSet::new(1, vec![1.0, -1.0, 1.0], vec![0, 1, 1]).unwrap();
        // all three at distance 1; k=1 picks index 0
        let (l, _) = knn_predict(&train, &[0.0], 1).unwrap();
        assert_eq!(l[0], 0);
    }

    #[test]
    fn svm_separates_two_points() {
        let train = TrainingSet::new(2, vec![1.0, 0.0, -1.0, 0.0], vec![0, 1]).unwrap();
        let m = linear_svm_fit(&train, 1e-2, 50, 1).unwrap();
        assert_eq!(m.predict(&[1.0, 0.0]), 0);
        assert_eq!(m.predict(&[-1.0, 0.0]), 1);
        let strong = linear_svm_fit(&train, 1e3, 50, 1).unwrap();
        let norm = strong.weights.iter().map(|w| w * w).sum::<f64>().sqrt();
        assert!(norm < 0.1);
        assert_eq!(m, linear_svm_fit(&train, 1e-2, 50, 1).unwrap());
        let one_class = TrainingSet::new(1, vec![0.0, 1.0], vec![1, 1]).unwrap();
        assert!(matches!(linear_svm_fit(&one_class, 1.0, 1, 0), Err(Error::MissingClass(0))));
    }

    #[test]
    fn ssl_config_bounds() {
        assert!(SslConfig { tau: 1.5, ..SslConfig::default() }.validate().is_err());
        assert!(SslConfig { tau: 0.0, ..SslConfig::default() }.validate().is_err());
        assert!(SslConfig { k: 0, ..SslConfig::default() }.validate().is_err());
        assert!(SslConfig { tau: 1.0, ..SslConfig::default() }.validate().is_ok());
    }
}
