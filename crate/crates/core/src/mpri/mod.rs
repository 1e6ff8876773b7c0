//! Multiscale, multilayer PRI spectral-spatial features.
//!
//! Every pixel's `n x n` neighbourhood is treated as a sample set `X`; the
//! PRI fixed point `Y*` of that set is computed and its centre row becomes
//! the pixel's feature vector. One PRI map per window size is reduced with
//! regularised LDA, the reduced maps are concatenated into the layer output,
//! and that output (rescaled to [0,1]) feeds the next layer. The final stack
//! is the raw input followed by all layer outputs.

pub mod itl;
pub mod rlda;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::LabeledSet;
use crate::cube_io::FeatureStack;
use crate::error::{Error, Result};

pub use itl::{
    cs_divergence, gaussian_kernel, information_potential, pri_fixed_point_update, pri_gradient,
    pri_objective, pri_optimize, PriConfig, PriRun,
};
pub use rlda::{rlda_fit, Projection};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpriConfig {
    /// Odd window sizes.
    pub scales: Vec<usize>,
    pub layers: usize,
    /// Trade-off weight per layer.
    pub betas: Vec<f64>,
    pub sigma2: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub rlda_gamma: f64,
    pub rlda_dims: usize,
    /// Prepend the raw input to the final stack.
    pub include_raw: bool,
}

impl Default for MpriConfig {
    fn default() -> Self {
        let pri = PriConfig::default();
        Self {
            scales: vec![3, 7, 11],
            layers: 3,
            betas: vec![2.0, 2.0, 3.0],
            sigma2: pri.sigma2,
            max_iter: pri.max_iter,
            tol: pri.tol,
            rlda_gamma: 0.1,
            rlda_dims: 1,
            include_raw: true,
        }
    }
}

impl MpriConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.scales.is_empty() {
            return bad("mpri needs at least one scale".into());
        }
        if let Some(&n) = self.scales.iter().find(|&&n| n < 3 || n % 2 == 0) {
            return bad(format!("scale {n} must be odd and >= 3"));
        }
        if self.layers == 0 {
            return bad("mpri needs at least one layer".into());
        }
        if self.betas.len() != self.layers {
            return bad(format!("{} betas for {} layers", self.betas.len(), self.layers));
        }
        if self.rlda_dims == 0 {
            return bad("rlda_dims must be positive".into());
        }
        if !(self.rlda_gamma >= 0.0) {
            return bad("rlda_gamma must be >= 0".into());
        }
        for layer in 0..self.layers {
            self.pri(layer).validate()?;
        }
        Ok(())
    }

    /// PRI settings used in `layer` (zero-based).
    pub fn pri(&self, layer: usize) -> PriConfig {
        PriConfig {
            beta: self.betas[layer],
            sigma2: self.sigma2,
            max_iter: self.max_iter,
            tol: self.tol,
        }
    }

    /// Feature dimension produced for an input of `input_dim` bands.
    pub fn output_dim(&self, input_dim: usize) -> usize {
        let raw = if self.include_raw { input_dim } else { 0 };
        raw + self.layers * self.scales.len() * self.rlda_dims.min(1)
    }
}

/// Runs PRI on one `n^2 x d` neighbourhood (rows in row-major window order)
/// and returns the centre row of the optimised set.
pub fn pri_patch(patch: &DMatrix<f64>, config: &PriConfig) -> Result<Vec<f64>> {
    let n_rows = patch.nrows();
    let n = (n_rows as f64).sqrt().round() as usize;
    if n * n != n_rows || n % 2 == 0 {
        return Err(Error::Dimension(format!(
            "patch has {n_rows} rows, expected the square of an odd window size"
        )));
    }
    let run = pri_optimize(patch, config)?;
    let centre = (n / 2) * n + n / 2;
    Ok(run.y.row(centre).iter().copied().collect())
}

/// Symmetric (edge-repeating) reflection of an out-of-range index.
#[inline]
fn mirror(i: isize, len: usize) -> usize {
    let len = len as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= len {
            i = 2 * len - i - 1;
        } else {
            return i as usize;
        }
    }
}

/// `n x n` mirror-padded neighbourhood of pixel `(r, c)` as an `n^2 x dim`
/// matrix.
pub fn neighbourhood(input: &FeatureStack, r: usize, c: usize, n: usize) -> DMatrix<f64> {
    let half = (n / 2) as isize;
    let dim = input.dim();
    let mut m = DMatrix::zeros(n * n, dim);
    for dr in 0..n {
        let rr = mirror(r as isize + dr as isize - half, input.rows());
        for dc in 0..n {
            let cc = mirror(c as isize + dc as isize - half, input.cols());
            let px = input.pixel(rr * input.cols() + cc);
            let row = dr * n + dc;
            for (k, &v) in px.iter().enumerate() {
                m[(row, k)] = v;
            }
        }
    }
    m
}

/// PRI map of a whole image at window size `n`.
pub fn pri_scale(input: &FeatureStack, n: usize, config: &PriConfig) -> Result<FeatureStack> {
    config.validate()?;
    if n % 2 == 0 || n > input.rows().min(input.cols()) {
        return Err(Error::InvalidParameter(format!(
            "window {n} must be odd and no larger than {}x{}",
            input.rows(),
            input.cols()
        )));
    }
    let dim = input.dim();
    let cols = input.cols();
    let mut data = vec![0.0; input.pixel_count() * dim];
    data.par_chunks_mut(dim)
        .enumerate()
        .try_for_each(|(p, out)| -> Result<()> {
            let patch = neighbourhood(input, p / cols, p % cols, n);
            out.copy_from_slice(&pri_patch(&patch, config)?);
            Ok(())
        })?;
    FeatureStack::new(input.rows(), input.cols(), dim, data)
}

/// Fits rLDA on the labelled pixels of `stack` and projects every pixel.
pub fn rlda_reduce(stack: &FeatureStack, labeled: &LabeledSet, gamma: f64, dims: usize) -> Result<FeatureStack> {
    let dim = stack.dim();
    let mut train = DMatrix::zeros(labeled.len(), dim);
    for (row, &p) in labeled.indices().iter().enumerate() {
        for (k, &v) in stack.pixel(p).iter().enumerate() {
            train[(row, k)] = v;
        }
    }
    let projection = rlda_fit(&train, labeled.labels(), gamma, dims)?;
    let out_dim = projection.output_dim();
    let mut data = vec![0.0; stack.pixel_count() * out_dim];
    data.par_chunks_mut(out_dim)
        .enumerate()
        .for_each(|(p, out)| projection.apply(stack.pixel(p), out));
    FeatureStack::new(stack.rows(), stack.cols(), out_dim, data)
}

/// PRI maps of the first layer, one per scale. They depend only on the input,
/// not on the labels, so callers running several label draws on one image
/// can compute them once.
pub fn first_layer_pri(input: &FeatureStack, config: &MpriConfig) -> Result<Vec<FeatureStack>> {
    config.validate()?;
    let scaled = input.min_max_scaled();
    config
        .scales
        .iter()
        .map(|&n| pri_scale(&scaled, n, &config.pri(0)))
        .collect()
}

/// Full multilayer extraction reusing precomputed first-layer PRI maps.
pub fn mpri_extract_from_first_layer(
    input: &FeatureStack,
    first_layer: &[FeatureStack],
    labeled: &LabeledSet,
    config: &MpriConfig,
) -> Result<FeatureStack> {
    config.validate()?;
    labeled.require_both_classes()?;
    if first_layer.len() != config.scales.len() {
        return Err(Error::Dimension(format!(
            "{} first-layer maps for {} scales",
            first_layer.len(),
            config.scales.len()
        )));
    }
    if let Some(&p) = labeled.indices().iter().find(|&&p| p >= input.pixel_count()) {
        return Err(Error::Dimension(format!("labelled pixel {p} outside the image")));
    }
    let mut layer_outputs: Vec<FeatureStack> = Vec::with_capacity(config.layers);
    for layer in 0..config.layers {
        let maps: Vec<FeatureStack> = if layer == 0 {
            first_layer.to_vec()
        } else {
            let scaled = layer_outputs[layer - 1].min_max_scaled();
            config
                .scales
                .iter()
                .map(|&n| pri_scale(&scaled, n, &config.pri(layer)))
                .collect::<Result<_>>()?
        };
        let reduced = maps
            .iter()
            .map(|m| rlda_reduce(m, labeled, config.rlda_gamma, config.rlda_dims))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&FeatureStack> = reduced.iter().collect();
        layer_outputs.push(FeatureStack::concat(&refs)?);
    }
    let mut parts: Vec<&FeatureStack> = Vec::with_capacity(config.layers + 1);
    if config.include_raw {
        parts.push(input);
    }
    parts.extend(layer_outputs.iter());
    FeatureStack::concat(&parts)
}

/// Multiscale multilayer PRI features of `input`, with rLDA fitted on
/// `labeled` pixels.
pub fn mpri_extract(input: &FeatureStack, labeled: &LabeledSet, config: &MpriConfig) -> Result<FeatureStack> {
    labeled.require_both_classes()?;
    let first = first_layer_pri(input, config)?;
    mpri_extract_from_first_layer(input, &first, labeled, config)
}
