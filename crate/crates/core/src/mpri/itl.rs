//! Parzen-window estimators of Renyi quadratic quantities and the
//! principle-of-relevant-information (PRI) objective.
//!
//! Sample sets are `N x d` matrices whose rows are samples. With the Gaussian
//! kernel `G(u) = exp(-|u|^2 / (2 sigma2))` the information potential between
//! two sets is the mean pairwise kernel value, and `-log V` estimates the
//! quadratic (cross-)entropy.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Rows whose fixed-point denominator falls below this take a gradient step.
const DENOMINATOR_FLOOR: f64 = 1e-12;
/// Step halvings tried by the gradient fallback.
const MAX_HALVINGS: usize = 20;

/// `exp(-|u|^2 / (2 sigma2))`.
pub fn gaussian_kernel(u: &[f64], sigma2: f64) -> f64 {
    let sq: f64 = u.iter().map(|v| v * v).sum();
    (-sq / (2.0 * sigma2)).exp()
}

fn check_sets(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    if a.nrows() == 0 || b.nrows() == 0 {
        return Err(Error::Empty("sample set has no rows".into()));
    }
    if a.ncols() != b.ncols() {
        return Err(Error::Dimension(format!(
            "sample dimension {} vs {}",
            a.ncols(),
            b.ncols()
        )));
    }
    Ok(())
}

fn check_sigma(sigma2: f64) -> Result<()> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidParameter(format!("sigma2 must be positive, got {sigma2}")));
    }
    Ok(())
}

#[inline]
fn row_sq_norms(m: &DMatrix<f64>) -> Vec<f64> {
    (0..m.nrows()).map(|i| m.row(i).norm_squared()).collect()
}

/// Kernel matrix `K[i][j] = G(a_i - b_j)`.
fn kernel_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>, sigma2: f64) -> DMatrix<f64> {
    let (na, nb) = (row_sq_norms(a), row_sq_norms(b));
    let mut k = a * b.transpose();
    let scale = -1.0 / (2.0 * sigma2);
    for j in 0..b.nrows() {
        for i in 0..a.nrows() {
            let d2 = (na[i] + nb[j] - 2.0 * k[(i, j)]).max(0.0);
            k[(i, j)] = (d2 * scale).exp();
        }
    }
    k
}

/// Symmetric kernel matrix of a set with itself; the diagonal is exactly 1.
fn self_kernel_matrix(a: &DMatrix<f64>, sigma2: f64) -> DMatrix<f64> {
    let na = row_sq_norms(a);
    let mut k = a * a.transpose();
    let scale = -1.0 / (2.0 * sigma2);
    let n = a.nrows();
    for j in 0..n {
        k[(j, j)] = 1.0;
        for i in j + 1..n {
            let d2 = (na[i] + na[j] - 2.0 * k[(i, j)]).max(0.0);
            let v = (d2 * scale).exp();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// `V(A;B) = (1 / (N M)) sum_ij G(a_i - b_j)`; `V(A)` when `b` is `a`.
pub fn information_potential(a: &DMatrix<f64>, b: &DMatrix<f64>, sigma2: f64) -> Result<f64> {
    check_sets(a, b)?;
    check_sigma(sigma2)?;
    let k = kernel_matrix(a, b, sigma2);
    Ok(k.sum() / (a.nrows() * b.nrows()) as f64)
}

/// Cauchy-Schwarz divergence `-2 log V(Y;X) + log V(Y) + log V(X)`.
pub fn cs_divergence(y: &DMatrix<f64>, x: &DMatrix<f64>, sigma2: f64) -> Result<f64> {
    check_sets(y, x)?;
    check_sigma(sigma2)?;
    let vyx = information_potential(y, x, sigma2)?;
    let vy = self_kernel_matrix(y, sigma2).sum() / (y.nrows() * y.nrows()) as f64;
    let vx = self_kernel_matrix(x, sigma2).sum() / (x.nrows() * x.nrows()) as f64;
    Ok(-2.0 * vyx.ln() + vy.ln() + vx.ln())
}

/// Trade-off weight and kernel width of a PRI problem, plus the stopping
/// rule of the fixed-point iteration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriConfig {
    pub beta: f64,
    pub sigma2: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for PriConfig {
    fn default() -> Self {
        Self {
            beta: 2.0,
            sigma2: 0.3,
            max_iter: 10,
            tol: 1e-3,
        }
    }
}

impl PriConfig {
    pub fn validate(&self) -> Result<()> {
        check_sigma(self.sigma2)?;
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidParameter(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// PRI cost `-(1 - beta) log V(Y) - 2 beta log V(Y;X)`.
pub fn pri_objective(y: &DMatrix<f64>, x: &DMatrix<f64>, beta: f64, sigma2: f64) -> Result<f64> {
    check_same_shape(y, x)?;
    check_sigma(sigma2)?;
    Ok(PriProblem::new(x, beta, sigma2).evaluate(y).objective)
}

fn check_same_shape(y: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<()> {
    check_sets(y, x)?;
    if y.nrows() != x.nrows() {
        return Err(Error::Dimension(format!(
            "Y has {} rows, X has {}",
            y.nrows(),
            x.nrows()
        )));
    }
    Ok(())
}

/// Analytic gradient of [`pri_objective`] with respect to every row of `Y`.
pub fn pri_gradient(y: &DMatrix<f64>, x: &DMatrix<f64>, beta: f64, sigma2: f64) -> Result<DMatrix<f64>> {
    check_same_shape(y, x)?;
    check_sigma(sigma2)?;
    let problem = PriProblem::new(x, beta, sigma2);
    let state = problem.evaluate(y);
    Ok(problem.step_terms(y, &state).gradient)
}

/// One safeguarded fixed-point step; never increases the objective.
pub fn pri_fixed_point_update(
    y: &DMatrix<f64>,
    x: &DMatrix<f64>,
    beta: f64,
    sigma2: f64,
) -> Result<DMatrix<f64>> {
    check_same_shape(y, x)?;
    check_sigma(sigma2)?;
    let problem = PriProblem::new(x, beta, sigma2);
    let state = problem.evaluate(y);
    Ok(problem.step(y, &state).0)
}

/// Result of running the fixed-point iteration to its stopping rule.
#[derive(Debug, Clone)]
pub struct PriRun {
    pub y: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective before the first step and after each step.
    pub objectives: Vec<f64>,
}

/// Minimises the PRI cost starting from `Y = X`.
pub fn pri_optimize(x: &DMatrix<f64>, config: &PriConfig) -> Result<PriRun> {
    config.validate()?;
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::Empty("PRI input has no samples".into()));
    }
    let problem = PriProblem::new(x, config.beta, config.sigma2);
    let mut y = x.clone();
    let mut state = problem.evaluate(&y);
    let mut objectives = vec![state.objective];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iter {
        let (next, next_state) = problem.step(&y, &state);
        iterations += 1;
        let change = (&next - &y).norm() / y.norm().max(f64::MIN_POSITIVE);
        y = next;
        state = next_state;
        objectives.push(state.objective);
        if change < config.tol {
            converged = true;
            break;
        }
    }
    Ok(PriRun {
        y,
        iterations,
        converged,
        objectives,
    })
}

/// Kernel quantities of the current `Y`.
struct PriState {
    kyy: DMatrix<f64>,
    kyx: DMatrix<f64>,
    vy: f64,
    vyx: f64,
    objective: f64,
}

struct StepTerms {
    /// Row `i` is `p * sum_j Kyy_ij y_j + q * sum_j Kyx_ij x_j`.
    numerator: DMatrix<f64>,
    /// `p * A_i + q * B_i`.
    denominator: Vec<f64>,
    gradient: DMatrix<f64>,
}

struct PriProblem<'a> {
    x: &'a DMatrix<f64>,
    beta: f64,
    sigma2: f64,
}

impl<'a> PriProblem<'a> {
    fn new(x: &'a DMatrix<f64>, beta: f64, sigma2: f64) -> Self {
        Self { x, beta, sigma2 }
    }

    fn evaluate(&self, y: &DMatrix<f64>) -> PriState {
        let n2 = (y.nrows() * y.nrows()) as f64;
        let kyy = self_kernel_matrix(y, self.sigma2);
        let kyx = kernel_matrix(y, self.x, self.sigma2);
        let vy = kyy.sum() / n2;
        let vyx = kyx.sum() / n2;
        let objective = -(1.0 - self.beta) * vy.ln() - 2.0 * self.beta * vyx.ln();
        PriState {
            kyy,
            kyx,
            vy,
            vyx,
            objective,
        }
    }

    fn step_terms(&self, y: &DMatrix<f64>, s: &PriState) -> StepTerms {
        let n = y.nrows();
        let p = (1.0 - self.beta) / s.vy;
        let q = self.beta / s.vyx;
        let mut numerator = &s.kyy * y;
        numerator *= p;
        numerator.gemm(q, &s.kyx, self.x, 1.0);
        let denominator: Vec<f64> = (0..n)
            .map(|i| p * s.kyy.row(i).sum() + q * s.kyx.row(i).sum())
            .collect();
        // dJ/dy_i = 2 / (N^2 sigma2) * (den_i * y_i - num_i)
        let c = 2.0 / ((n * n) as f64 * self.sigma2);
        let mut gradient = numerator.clone();
        for i in 0..n {
            for k in 0..y.ncols() {
                gradient[(i, k)] = c * (denominator[i] * y[(i, k)] - numerator[(i, k)]);
            }
        }
        StepTerms {
            numerator,
            denominator,
            gradient,
        }
    }

    /// Fixed-point candidate, falling back to backtracking gradient descent
    /// when the candidate would raise the objective. Returns `Y` itself if
    /// no step within the halving budget decreases the objective.
    fn step(&self, y: &DMatrix<f64>, s: &PriState) -> (DMatrix<f64>, PriState) {
        let n = y.nrows();
        let terms = self.step_terms(y, s);
        let c = 2.0 / ((n * n) as f64 * self.sigma2);
        let mean_den = terms.denominator.iter().map(|d| d.abs()).sum::<f64>() / n as f64;
        let eta0 = if mean_den > DENOMINATOR_FLOOR {
            1.0 / (c * mean_den)
        } else {
            self.sigma2
        };

        let mut candidate = y.clone();
        for i in 0..n {
            let den = terms.denominator[i];
            for k in 0..y.ncols() {
                candidate[(i, k)] = if den.abs() < DENOMINATOR_FLOOR {
                    y[(i, k)] - eta0 * terms.gradient[(i, k)]
                } else {
                    terms.numerator[(i, k)] / den
                };
            }
        }
        if candidate.iter().all(|v| v.is_finite()) {
            let cs = self.evaluate(&candidate);
            if cs.objective <= s.objective {
                return (candidate, cs);
            }
        }

        let mut eta = eta0;
        for _ in 0..MAX_HALVINGS {
            let trial = y - &terms.gradient * eta;
            let ts = self.evaluate(&trial);
            if ts.objective <= s.objective {
                return (trial, ts);
            }
            eta *= 0.5;
        }
        (
            y.clone(),
            PriState {
                kyy: s.kyy.clone(),
                kyx: s.kyx.clone(),
                ..*s
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_set(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn kernel_values() {
        assert_eq!(gaussian_kernel(&[0.0, 0.0], 0.3), 1.0);
        // |u|^2 = 2 sigma2
        let s2: f64 = 0.3;
        let u = [(2.0 * s2).sqrt(), 0.0];
        assert!((gaussian_kernel(&u, s2) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((gaussian_kernel(&u, s2) - 0.367_879).abs() < 1e-6);
    }

    #[test]
    fn potential_of_symmetric_pair() {
        let a = 0.4;
        let set = DMatrix::from_row_slice(2, 1, &[-a, a]);
        let v = information_potential(&set, &set, 0.3).unwrap();
        let g = gaussian_kernel(&[2.0 * a], 0.3);
        assert!((v - (1.0 + g) / 2.0).abs() < 1e-15);
        let single = DMatrix::from_row_slice(1, 3, &[0.1, 0.2, 0.3]);
        assert_eq!(information_potential(&single, &single, 0.3).unwrap(), 1.0);
    }

    #[test]
    fn dimension_mismatch() {
        let a = DMatrix::<f64>::zeros(3, 2);
        let b = DMatrix::<f64>::zeros(3, 3);
        assert!(matches!(information_potential(&a, &b, 0.3), Err(Error::Dimension(_))));
        assert!(cs_divergence(&a, &b, 0.3).is_err());
        let c = DMatrix::<f64>::zeros(4, 2);
        assert!(pri_objective(&a, &c, 1.0, 0.3).is_err());
    }

    #[test]
    fn cs_divergence_grows_with_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_set(&mut rng, 10, 2);
        assert!(cs_divergence(&x, &x, 0.3).unwrap().abs() < 1e-12);
        let mut last = 0.0;
        for step in 1..8 {
            let y = x.map(|v| v + 0.25 * step as f64);
            let d = cs_divergence(&y, &x, 0.3).unwrap();
            assert!(d > last, "shift {step}: {d} <= {last}");
            last = d;
        }
    }

    #[test]
    fn objective_when_y_equals_x() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_set(&mut rng, 7, 3);
        let vx = information_potential(&x, &x, 0.3).unwrap();
        for beta in [0.0, 0.5, 2.0, 3.0] {
            let j = pri_objective(&x, &x, beta, 0.3).unwrap();
            assert!((j - (-(1.0 + beta) * vx.ln())).abs() < 1e-12);
        }
        let collapsed = DMatrix::from_element(5, 2, 0.7);
        assert!(pri_objective(&collapsed, &collapsed, 0.0, 0.3).unwrap().abs() < 1e-15);
    }

    #[test]
    fn constant_data_is_a_fixed_point() {
        let x = DMatrix::from_element(9, 4, 0.25);
        let y = pri_fixed_point_update(&x, &x, 2.0, 0.3).unwrap();
        assert!((y - &x).abs().max() < 1e-15);
    }

    #[test]
    fn beta_one_is_mean_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_set(&mut rng, 12, 3);
        let y = random_set(&mut rng, 12, 3);
        let updated = pri_fixed_point_update(&y, &x, 1.0, 0.3).unwrap();
        // standalone Gaussian mean-shift step of each y_i toward X
        for i in 0..12 {
            let mut w_sum = 0.0;
            let mut acc = [0.0; 3];
            for j in 0..12 {
                let d2: f64 = (0..3).map(|k| (y[(i, k)] - x[(j, k)]).powi(2)).sum();
                let w = (-d2 / 0.6).exp();
                w_sum += w;
                for k in 0..3 {
                    acc[k] += w * x[(j, k)];
                }
            }
            for k in 0..3 {
                assert!((updated[(i, k)] - acc[k] / w_sum).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for beta in [0.5, 2.0] {
            let x = random_set(&mut rng, 6, 2);
            let y = random_set(&mut rng, 6, 2);
            let g = pri_gradient(&y, &x, beta, 0.3).unwrap();
            let h = 1e-6;
            for i in 0..6 {
                for k in 0..2 {
                    let mut yp = y.clone();
                    let mut ym = y.clone();
                    yp[(i, k)] += h;
                    ym[(i, k)] -= h;
                    let fd = (pri_objective(&yp, &x, beta, 0.3).unwrap()
                        - pri_objective(&ym, &x, beta, 0.3).unwrap())
                        / (2.0 * h);
                    assert!((fd - g[(i, k)]).abs() < 1e-7, "{fd} vs {}", g[(i, k)]);
                }
            }
        }
    }

    #[test]
    fn zero_iterations_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_set(&mut rng, 9, 3);
        let cfg = PriConfig {
            max_iter: 0,
            ..PriConfig::default()
        };
        let run = pri_optimize(&x, &cfg).unwrap();
        assert_eq!(run.y, x);
        assert_eq!(run.iterations, 0);
    }
}
