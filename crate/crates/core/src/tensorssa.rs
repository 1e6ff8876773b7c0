//! Tensor singular spectrum analysis.
//!
//! Each pixel is embedded as the stack of its `l` most similar spectra from a
//! local window, giving an `l x (rows*cols) x bands` trajectory tensor. The
//! tensor is truncated to low tubal rank with the FFT-based t-SVD and then
//! averaged back onto the pixel grid.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::cube_io::FeatureStack;
use crate::error::{Error, Result};

fn default_u() -> usize {
    5
}
fn default_l() -> usize {
    60
}
fn default_rtub() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TssaConfig {
    /// Half window; the search window is `2u + 1` pixels wide.
    #[serde(default = "default_u")]
    pub u: usize,
    /// Fibers per pixel, the pixel itself included.
    #[serde(default = "default_l")]
    pub l: usize,
    /// Tubal rank kept by the t-SVD.
    #[serde(default = "default_rtub")]
    pub rtub: usize,
}

impl Default for TssaConfig {
    fn default() -> Self {
        Self {
            u: default_u(),
            l: default_l(),
            rtub: default_rtub(),
        }
    }
}

impl TssaConfig {
    /// Settings used for three-band images.
    pub fn rgb() -> Self {
        Self { l: 8, ..Self::default() }
    }

    pub fn window(&self) -> usize {
        2 * self.u + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.u == 0 || self.l == 0 || self.rtub == 0 {
            return Err(Error::InvalidParameter("u, l and rtub must all be positive".into()));
        }
        let bound = (self.window() - 2).pow(2);
        if self.l > bound {
            return Err(Error::InvalidParameter(format!(
                "l = {} exceeds (w-2)^2 = {bound} for u = {}",
                self.l, self.u
            )));
        }
        if self.rtub > self.l {
            return Err(Error::InvalidParameter(format!("rtub = {} exceeds l = {}", self.rtub, self.l)));
        }
        Ok(())
    }
}

/// Dense order-3 tensor; index `(i, j, t)` is stored at `(i * n2 + j) * n3 + t`
/// so every tube is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn new(dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        if dims.iter().any(|&n| n == 0) || data.len() != dims.iter().product::<usize>() {
            return Err(Error::Dimension(format!("{} values for tensor {dims:?}", data.len())));
        }
        Ok(Self { dims, data })
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dims.iter().product());
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for t in 0..dims[2] {
                    data.push(f(i, j, t));
                }
            }
        }
        Self { dims, data }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize, t: usize) -> f64 {
        self.data[(i * self.dims[1] + j) * self.dims[2] + t]
    }

    pub fn tube(&self, i: usize, j: usize) -> &[f64] {
        let start = (i * self.dims[1] + j) * self.dims[2];
        &self.data[start..start + self.dims[2]]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Frobenius norm of `self - other`.
    pub fn distance(&self, other: &Tensor3) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Embedded tensor plus, for every fiber, the pixel whose spectrum it holds.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTensor {
    pub rows: usize,
    pub cols: usize,
    /// `l x (rows*cols) x bands`.
    pub tensor: Tensor3,
    /// Source pixel of fiber `k` of pixel `p` at `k * rows * cols + p`.
    pub index_map: Vec<usize>,
}

impl TrajectoryTensor {
    pub fn l(&self) -> usize {
        self.tensor.dims[0]
    }

    pub fn source(&self, k: usize, p: usize) -> usize {
        self.index_map[k * self.rows * self.cols + p]
    }
}

fn unit_spectra(cube: &FeatureStack) -> Vec<f64> {
    let mut out = cube.data().to_vec();
    for px in out.chunks_mut(cube.dim()) {
        let norm = px.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            px.iter_mut().for_each(|v| *v /= norm);
        }
    }
    out
}

/// Window of `2u + 1` positions around `center`, slid inward at the image
/// border so it stays full length (or covers the whole axis if shorter).
fn window_range(center: usize, u: usize, len: usize) -> std::ops::Range<usize> {
    let w = (2 * u + 1).min(len);
    let start = center.saturating_sub(u).min(len - w);
    start..start + w
}

fn check_window(rows: usize, cols: usize, u: usize, l: usize) -> Result<()> {
    let size = (2 * u + 1).min(rows) * (2 * u + 1).min(cols);
    if l > size {
        return Err(Error::InvalidParameter(format!(
            "a {rows}x{cols} image gives windows of {size} pixels, {l} needed"
        )));
    }
    Ok(())
}

fn neighbors_from_unit(unit: &[f64], rows: usize, cols: usize, bands: usize, p: usize, u: usize, l: usize) -> Vec<usize> {
    let (r, c) = (p / cols, p % cols);
    let center = &unit[p * bands..(p + 1) * bands];
    let mut cands: Vec<(f64, usize)> = Vec::new();
    for rr in window_range(r, u, rows) {
        for cc in window_range(c, u, cols) {
            let q = rr * cols + cc;
            if q == p {
                continue;
            }
            let d: f64 = unit[q * bands..(q + 1) * bands]
                .iter()
                .zip(center)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            cands.push((d, q));
        }
    }
    // candidates are generated in row-major order, so a stable sort keeps
    // the index tie-break
    cands.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::with_capacity(l);
    out.push(p);
    out.extend(cands.into_iter().take(l - 1).map(|(_, q)| q));
    out
}

/// The pixel itself followed by the `l - 1` window pixels whose unit-norm
/// spectra are closest to its own.
pub fn similar_neighbors(cube: &FeatureStack, pixel: usize, u: usize, l: usize) -> Result<Vec<usize>> {
    if pixel >= cube.pixel_count() {
        return Err(Error::Dimension(format!("pixel {pixel} outside the image")));
    }
    if l == 0 || u == 0 {
        return Err(Error::InvalidParameter("u and l must be positive".into()));
    }
    if l > (2 * u - 1).pow(2) {
        return Err(Error::InvalidParameter(format!("l = {l} exceeds (2u-1)^2")));
    }
    check_window(cube.rows(), cube.cols(), u, l)?;
    let unit = unit_spectra(cube);
    Ok(neighbors_from_unit(&unit, cube.rows(), cube.cols(), cube.dim(), pixel, u, l))
}

/// Builds the trajectory tensor of `cube`.
pub fn embed(cube: &FeatureStack, config: &TssaConfig) -> Result<TrajectoryTensor> {
    config.validate()?;
    let (rows, cols, bands) = (cube.rows(), cube.cols(), cube.dim());
    check_window(rows, cols, config.u, config.l)?;
    let npix = rows * cols;
    let unit = unit_spectra(cube);
    let neighbors: Vec<Vec<usize>> = (0..npix)
        .into_par_iter()
        .map(|p| neighbors_from_unit(&unit, rows, cols, bands, p, config.u, config.l))
        .collect();
    let l = config.l;
    let mut index_map = vec![0usize; l * npix];
    let mut data = vec![0.0; l * npix * bands];
    for (p, list) in neighbors.iter().enumerate() {
        for (k, &q) in list.iter().enumerate() {
            index_map[k * npix + p] = q;
            let at = (k * npix + p) * bands;
            data[at..at + bands].copy_from_slice(cube.pixel(q));
        }
    }
    Ok(TrajectoryTensor {
        rows,
        cols,
        tensor: Tensor3 {
            dims: [l, npix, bands],
            data,
        },
        index_map,
    })
}

/// Rank-`r` truncated SVD of one complex slice, largest singular values
/// first.
fn truncate_slice(m: DMatrix<Complex64>, r: usize) -> DMatrix<Complex64> {
    let (n1, n2) = m.shape();
    let svd = m.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut out = DMatrix::zeros(n1, n2);
    for &s in order.iter().take(r) {
        let sigma = Complex64::new(svd.singular_values[s], 0.0);
        let ucol = u.column(s) * sigma;
        out.ger(Complex64::new(1.0, 0.0), &ucol, &v_t.row(s).transpose(), Complex64::new(1.0, 0.0));
    }
    out
}

/// Low-tubal-rank approximation together with the largest imaginary part
/// left after the inverse transform.
pub fn tsvd_lowrank_with_residue(z: &Tensor3, rtub: usize) -> Result<(Tensor3, f64)> {
    let [n1, n2, n3] = z.dims;
    if rtub == 0 || rtub > n1.min(n2) {
        return Err(Error::InvalidParameter(format!(
            "rtub = {rtub} outside 1..={}",
            n1.min(n2)
        )));
    }
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(n3);
    let inverse = planner.plan_fft_inverse(n3);

    let mut spec: Vec<Complex64> = z.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    forward.process(&mut spec);

    // frequency slices are processed in batches so only a few extra
    // slice-sized buffers are alive at once
    let batch = rayon::current_num_threads().max(1);
    let mut f0 = 0;
    while f0 < n3 {
        let f1 = (f0 + batch).min(n3);
        let done: Vec<DMatrix<Complex64>> = (f0..f1)
            .into_par_iter()
            .map(|f| {
                let slice = DMatrix::from_fn(n1, n2, |i, j| spec[(i * n2 + j) * n3 + f]);
                truncate_slice(slice, rtub)
            })
            .collect();
        for (f, m) in (f0..f1).zip(done) {
            for i in 0..n1 {
                for j in 0..n2 {
                    spec[(i * n2 + j) * n3 + f] = m[(i, j)];
                }
            }
        }
        f0 = f1;
    }

    inverse.process(&mut spec);
    let scale = 1.0 / n3 as f64;
    let mut residue = 0.0f64;
    let data = spec
        .iter()
        .map(|c| {
            residue = residue.max((c.im * scale).abs());
            c.re * scale
        })
        .collect();
    Ok((Tensor3 { dims: z.dims, data }, residue))
}

/// Best tubal-rank-`rtub` approximation of `z` under the t-SVD.
pub fn tsvd_lowrank(z: &Tensor3, rtub: usize) -> Result<Tensor3> {
    tsvd_lowrank_with_residue(z, rtub).map(|(t, _)| t)
}

/// Averages every fiber back onto the pixel it was copied from.
pub fn reproject(z: &Tensor3, index_map: &[usize], rows: usize, cols: usize) -> Result<FeatureStack> {
    let [l, npix, bands] = z.dims;
    if npix != rows * cols || index_map.len() != l * npix {
        return Err(Error::Dimension(format!(
            "tensor {:?} and index map of {} entries do not fit a {rows}x{cols} image",
            z.dims,
            index_map.len()
        )));
    }
    if let Some(&bad) = index_map.iter().find(|&&s| s >= npix) {
        return Err(Error::Dimension(format!("index map entry {bad} outside the image")));
    }
    let mut sum = vec![0.0; npix * bands];
    let mut count = vec![0usize; npix];
    for k in 0..l {
        for p in 0..npix {
            let s = index_map[k * npix + p];
            count[s] += 1;
            let src = z.tube(k, p);
            for (acc, v) in sum[s * bands..(s + 1) * bands].iter_mut().zip(src) {
                *acc += v;
            }
        }
    }
    if let Some(p) = count.iter().position(|&c| c == 0) {
        return Err(Error::Dimension(format!("pixel {p} receives no fiber")));
    }
    for (px, &c) in sum.chunks_mut(bands).zip(&count) {
        px.iter_mut().for_each(|v| *v /= c as f64);
    }
    FeatureStack::new(rows, cols, bands, sum)
}

/// Embedding, low-rank truncation and reprojection in one call.
pub fn tensorssa_extract(cube: &FeatureStack, config: &TssaConfig) -> Result<FeatureStack> {
    let traj = embed(cube, config)?;
    let low = tsvd_lowrank(&traj.tensor, config.rtub)?;
    reproject(&low, &traj.index_map, traj.rows, traj.cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_stack(rows: usize, cols: usize, dim: usize, seed: u64) -> FeatureStack {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..rows * cols * dim).map(|_| rng.random_range(0.1..1.0)).collect();
        FeatureStack::new(rows, cols, dim, data).unwrap()
    }

    #[test]
    fn config_bounds() {
        assert!(TssaConfig::default().validate().is_ok());
        assert!(TssaConfig::rgb().validate().is_ok());
        // u = 2: (w-2)^2 = 9
        assert!(TssaConfig { u: 2, l: 9, rtub: 1 }.validate().is_ok());
        assert!(TssaConfig { u: 2, l: 10, rtub: 1 }.validate().is_err());
        assert!(TssaConfig { u: 2, l: 4, rtub: 5 }.validate().is_err());
        assert!(TssaConfig { u: 0, l: 1, rtub: 1 }.validate().is_err());
    }

    #[test]
    fn constant_cube_neighbors_follow_index_order() {
        let cube = FeatureStack::new(5, 5, 2, vec![1.0; 50]).unwrap();
        // pixel (2,2) = 12; window covers the whole image
        assert_eq!(similar_neighbors(&cube, 12, 2, 4).unwrap(), vec![12, 0, 1, 2]);
        let wide = FeatureStack::new(7, 7, 1, vec![1.0; 49]).unwrap();
        // corner window slides inward to rows 2..7, cols 2..7
        assert_eq!(similar_neighbors(&wide, 48, 2, 4).unwrap(), vec![48, 16, 17, 18]);
        assert_eq!(similar_neighbors(&wide, 0, 1, 1).unwrap(), vec![0]);
    }

    #[test]
    fn scaled_spectrum_is_nearest() {
        let mut data = vec![0.0; 9 * 3];
        for p in 0..9 {
            data[p * 3..p * 3 + 3].copy_from_slice(&[1.0, (p as f64) * 0.3, 2.0]);
        }
        // pixel 8 is 2.5 times pixel 4
        data[24..27].copy_from_slice(&[2.5, 3.0, 5.0]);
        data[12..15].copy_from_slice(&[1.0, 1.2, 2.0]);
        let cube = FeatureStack::new(3, 3, 3, data).unwrap();
        assert_eq!(similar_neighbors(&cube, 4, 2, 2).unwrap(), vec![4, 8]);
    }

    #[test]
    fn window_slides_at_border() {
        assert_eq!(window_range(0, 2, 10), 0..5);
        assert_eq!(window_range(9, 2, 10), 5..10);
        assert_eq!(window_range(4, 2, 10), 2..7);
        assert_eq!(window_range(1, 2, 3), 0..3);
    }

    #[test]
    fn window_too_small() {
        let cube = random_stack(2, 2, 3, 1);
        assert!(similar_neighbors(&cube, 0, 2, 5).is_err());
        assert!(embed(&cube, &TssaConfig { u: 2, l: 5, rtub: 1 }).is_err());
    }

    #[test]
    fn embedding_is_consistent() {
        let cube = random_stack(8, 8, 4, 2);
        let traj = embed(&cube, &TssaConfig { u: 2, l: 6, rtub: 1 }).unwrap();
        for k in 0..6 {
            for p in 0..64 {
                let s = traj.source(k, p);
                assert_eq!(traj.tensor.tube(k, p), cube.pixel(s));
                if k == 0 {
                    assert_eq!(s, p);
                }
            }
        }
        let single = embed(&cube, &TssaConfig { u: 1, l: 1, rtub: 1 }).unwrap();
        for p in 0..64 {
            assert_eq!(single.tensor.tube(0, p), cube.pixel(p));
        }
    }

    #[test]
    fn reproject_inverts_embed() {
        let cube = random_stack(7, 6, 5, 3);
        let traj = embed(&cube, &TssaConfig { u: 2, l: 5, rtub: 1 }).unwrap();
        let back = reproject(&traj.tensor, &traj.index_map, 7, 6).unwrap();
        for (a, b) in back.data().iter().zip(cube.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(reproject(&traj.tensor, &traj.index_map, 6, 7).is_ok());
        assert!(reproject(&traj.tensor, &traj.index_map[1..], 7, 6).is_err());
    }

    #[test]
    fn full_rank_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let z = Tensor3::from_fn([3, 5, 7], |_, _, _| rng.random_range(-1.0..1.0));
        let (r, residue) = tsvd_lowrank_with_residue(&z, 3).unwrap();
        assert!(r.distance(&z) / z.frobenius_norm() < 1e-10);
        assert!(residue < 1e-9);
        assert!(tsvd_lowrank(&z, 4).is_err());
        assert!(tsvd_lowrank(&z, 0).is_err());
    }

    #[test]
    fn outer_product_has_tubal_rank_one() {
        let a = [0.5, -1.0, 2.0, 0.3];
        let b = [1.0, 0.2, -0.7, 0.0, 1.5];
        let tube = [0.9, 0.1, -0.4];
        let z = Tensor3::from_fn([4, 5, 3], |i, j, t| a[i] * b[j] * tube[t]);
        let r = tsvd_lowrank(&z, 1).unwrap();
        assert!(r.distance(&z) / z.frobenius_norm() < 1e-10);
    }

    #[test]
    fn extract_keeps_shape() {
        let cube = random_stack(6, 9, 5, 5);
        let out = tensorssa_extract(&cube, &TssaConfig { u: 2, l: 4, rtub: 1 }).unwrap();
        assert_eq!((out.rows(), out.cols(), out.dim()), (6, 9, 5));
    }
}
