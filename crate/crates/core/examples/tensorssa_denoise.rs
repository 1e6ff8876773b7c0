//! Tensor SSA on a noisy phantom: within-class variance before and after.

use hsi_ssl::synth::{make_phantom, PhantomSpec};
use hsi_ssl::tensorssa::{embed, tensorssa_extract, TssaConfig};
use hsi_ssl::{FeatureStack, LabelMap};

fn within_class_variance(s: &FeatureStack, gt: &LabelMap) -> f64 {
    let d = s.dim();
    let mut total = 0.0;
    for class in [0u8, 1] {
        let pix: Vec<usize> = (0..gt.len()).filter(|&p| gt.get(p) == class).collect();
        let n = pix.len() as f64;
        for b in 0..d {
            let mean = pix.iter().map(|&p| s.pixel(p)[b]).sum::<f64>() / n;
            total += pix.iter().map(|&p| (s.pixel(p)[b] - mean).powi(2)).sum::<f64>() / n;
        }
    }
    total / (2 * d) as f64
}

fn main() -> hsi_ssl::Result<()> {
    let mut spec = PhantomSpec::two_class(64, 64, 32, 5);
    spec.noise_sigma = 0.05;
    let (cube, gt) = make_phantom(&spec)?;
    let input = FeatureStack::from(&cube);
    let before = within_class_variance(&input, &gt);

    let traj = embed(&input, &TssaConfig { u: 2, l: 8, rtub: 1 })?;
    println!("trajectory tensor {:?}", traj.tensor.dims());

    for rtub in 1..=3 {
        let out = tensorssa_extract(&input, &TssaConfig { u: 2, l: 8, rtub })?;
        let after = within_class_variance(&out, &gt);
        println!("rtub {rtub}: within-class variance {before:.2e} -> {after:.2e} ({:.1}%)", 100.0 * after / before);
    }
    Ok(())
}
