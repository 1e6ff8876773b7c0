//! The relevant-information trade-off on a toy sample: small beta
//! collapses the set towards its modes, large beta keeps it close to the
//! data.

use hsi_ssl::mpri::{cs_divergence, pri_optimize, PriConfig};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Mean squared distance to the cluster centroid; rows 0..20 and 20..40
/// are the two clusters.
fn spread(y: &DMatrix<f64>) -> f64 {
    [0..20, 20..40]
        .into_iter()
        .map(|r| {
            let part = y.rows(r.start, r.len());
            let mean = part.row_mean();
            (0..part.nrows()).map(|i| (part.row(i) - &mean).norm_squared()).sum::<f64>()
        })
        .sum::<f64>()
        / y.nrows() as f64
}

fn main() -> hsi_ssl::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    // two clusters in the plane
    let x = DMatrix::from_fn(40, 2, |i, _| if i < 20 { 0.2 } else { 0.8 } + rng.random_range(-0.12..0.12));

    println!("{:>5} {:>6} {:>10} {:>10} {:>10}", "beta", "iters", "objective", "scatter", "D_cs(Y,X)");
    for beta in [0.0, 1.0, 3.0, 10.0, 40.0] {
        let cfg = PriConfig { beta, sigma2: 0.005, max_iter: 200, tol: 1e-6 };
        let run = pri_optimize(&x, &cfg)?;
        println!(
            "{beta:>5} {:>6} {:>10.4} {:>10.5} {:>10.5}",
            run.iterations,
            run.objectives.last().unwrap(),
            spread(&run.y),
            cs_divergence(&run.y, &x, cfg.sigma2)?
        );
    }
    println!("input scatter {:.5}", spread(&x));
    Ok(())
}
