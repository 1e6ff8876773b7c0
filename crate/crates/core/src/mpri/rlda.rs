//! Regularised linear discriminant analysis.
//!
//! Projection directions are the leading generalised eigenvectors of
//! `(S_w + gamma I)^{-1} S_b`, where `S_w` is the pooled within-class
//! covariance and `S_b` the class-size weighted between-class covariance.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalues below this fraction of the largest are treated as zero.
const EIGEN_RTOL: f64 = 1e-10;

/// A learned `d -> k` linear map; columns are unit-norm directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub directions: DMatrix<f64>,
}

impl Projection {
    pub fn input_dim(&self) -> usize {
        self.directions.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.directions.ncols()
    }

    /// Projects one feature vector.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            let col = self.directions.column(k);
            *o = col.iter().zip(x).map(|(w, v)| w * v).sum();
        }
    }
}

/// Fits the projection on `samples` (rows) with binary `labels`.
pub fn rlda_fit(samples: &DMatrix<f64>, labels: &[u8], gamma: f64, dims: usize) -> Result<Projection> {
    let (n, d) = samples.shape();
    if labels.len() != n {
        return Err(Error::Dimension(format!("{} labels for {n} samples", labels.len())));
    }
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!("gamma must be >= 0, got {gamma}")));
    }
    if dims == 0 {
        return Err(Error::InvalidParameter("rlda dims must be positive".into()));
    }
    let mut classes: Vec<u8> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    for class in [0u8, 1u8] {
        let count = labels.iter().filter(|&&l| l == class).count();
        if count < 2 {
            return Err(Error::MissingClass(class));
        }
    }
    if classes.len() != 2 {
        return Err(Error::InvalidParameter(format!("labels must be binary, found {classes:?}")));
    }

    let mean_of = |class: u8| -> (DVector<f64>, usize) {
        let mut m = DVector::zeros(d);
        let mut count = 0;
        for (i, &l) in labels.iter().enumerate() {
            if l == class {
                m += samples.row(i).transpose();
                count += 1;
            }
        }
        (m / count as f64, count)
    };
    let means = [mean_of(0), mean_of(1)];
    let overall = samples.row_sum().transpose() / n as f64;

    let mut sw = DMatrix::zeros(d, d);
    for (i, &l) in labels.iter().enumerate() {
        let diff = samples.row(i).transpose() - &means[l as usize].0;
        sw.ger(1.0, &diff, &diff, 1.0);
    }
    sw /= (n - 2) as f64;
    let mut sb = DMatrix::zeros(d, d);
    for (mean, count) in &means {
        let diff = mean - &overall;
        sb.ger(*count as f64 / n as f64, &diff, &diff, 1.0);
    }

    let mut regularized = sw;
    for k in 0..d {
        regularized[(k, k)] += gamma;
    }
    let chol = regularized
        .cholesky()
        .ok_or_else(|| Error::Singular("regularised within-class scatter is not positive definite".into()))?;
    let l = chol.l();
    let max_pivot = l.diagonal().max();
    if l.diagonal().iter().any(|&v| v <= 1e-7 * max_pivot) {
        return Err(Error::Singular("regularised within-class scatter is numerically singular".into()));
    }
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("cholesky factor not invertible".into()))?;
    let m = &l_inv * sb * l_inv.transpose();
    let m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let available = order
        .iter()
        .take_while(|&&i| eig.eigenvalues[i] > EIGEN_RTOL * top && top > 0.0)
        .count()
        .min(1); // two classes give one discriminant direction
    let k = dims.min(available.max(1));

    let diff = &means[1].0 - &means[0].0;
    let mut directions = DMatrix::zeros(d, k);
    let l_inv_t = l_inv.transpose();
    for (c, &idx) in order.iter().take(k).enumerate() {
        let mut w = &l_inv_t * eig.eigenvectors.column(idx);
        let norm = w.norm();
        if norm > 0.0 {
            w /= norm;
        }
        // orient so the positive class projects higher
        if w.dot(&diff) < 0.0 {
            w = -w;
        }
        directions.set_column(c, &w);
    }
    Ok(Projection { directions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn angle(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        (a.dot(b).abs() / (a.norm() * b.norm())).min(1.0).acos()
    }

    /// Class samples placed symmetrically so the within-class scatter is
    /// exactly isotropic.
    fn axis_separated(d: usize) -> (DMatrix<f64>, Vec<u8>) {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (class, center) in [(0u8, -2.0), (1u8, 2.0)] {
            for k in 0..d {
                for sign in [-1.0, 1.0] {
                    let mut v = vec![0.0; d];
                    v[0] = center;
                    v[k] += sign * 0.5;
                    rows.extend(v);
                    labels.push(class);
                }
            }
        }
        (DMatrix::from_row_slice(labels.len(), d, &rows), labels)
    }

    #[test]
    fn isotropic_scatter_recovers_axis() {
        let (x, y) = axis_separated(5);
        let p = rlda_fit(&x, &y, 0.1, 1).unwrap();
        let e1 = DVector::from_fn(5, |i, _| if i == 0 { 1.0 } else { 0.0 });
        let w = p.directions.column(0).into_owned();
        assert!(angle(&w, &e1) < 1e-3);
        assert!(w[0] > 0.0);
        assert!((w.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn large_gamma_gives_mean_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let d = 4;
        let n = 30;
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let class = (i % 2) as u8;
            // strongly anisotropic scatter so plain LDA would tilt
            for k in 0..d {
                let scale = [3.0, 0.2, 1.0, 0.5][k];
                let shift = if class == 1 { [1.0, 0.5, 0.0, -0.3][k] } else { 0.0 };
                data.push(scale * noise.sample(&mut rng) + shift);
            }
            labels.push(class);
        }
        let x = DMatrix::from_row_slice(n, d, &data);
        let p = rlda_fit(&x, &labels, 1e6, 1).unwrap();
        let mut m = [DVector::zeros(d), DVector::zeros(d)];
        for (i, &l) in labels.iter().enumerate() {
            m[l as usize] += x.row(i).transpose() / (n / 2) as f64;
        }
        let diff = &m[1] - &m[0];
        assert!(angle(&p.directions.column(0).into_owned(), &diff) < 1e-2);
    }

    #[test]
    fn invariant_to_offset() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let x = DMatrix::from_fn(20, 3, |_, _| noise.sample(&mut rng));
        let labels: Vec<u8> = (0..20).map(|i| (i % 2) as u8).collect();
        let shifted = x.map(|v| v + 4.5);
        let a = rlda_fit(&x, &labels, 0.1, 1).unwrap();
        let b = rlda_fit(&shifted, &labels, 0.1, 1).unwrap();
        assert!((a.directions - b.directions).abs().max() < 1e-9);
    }

    #[test]
    fn degenerate_inputs() {
        let x = DMatrix::from_element(6, 2, 1.0);
        assert!(matches!(rlda_fit(&x, &[1; 6], 0.1, 1), Err(Error::MissingClass(0))));
        assert!(matches!(rlda_fit(&x, &[0, 0, 0, 0, 0, 1], 0.1, 1), Err(Error::MissingClass(1))));
        // 3 samples per class in 5 dimensions: singular scatter without ridge
        let x = DMatrix::from_fn(6, 5, |i, j| ((i * 7 + j * 3) % 5) as f64);
        let y = [0, 0, 0, 1, 1, 1];
        assert!(matches!(rlda_fit(&x, &y, 0.0, 1), Err(Error::Singular(_))));
        assert!(rlda_fit(&x, &y, 0.1, 1).is_ok());
    }

    #[test]
    fn dims_capped_at_one() {
        let (x, y) = axis_separated(3);
        assert_eq!(rlda_fit(&x, &y, 0.1, 3).unwrap().output_dim(), 1);
    }
}
