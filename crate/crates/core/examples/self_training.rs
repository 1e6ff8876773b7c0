//! Self-training against plain k-NN and a linear SVM with 1% of the labels.

use hsi_ssl::classify::{classify_with_labels, sample_labels, ClassifyConfig, Method};
use hsi_ssl::metrics::metrics;
use hsi_ssl::synth::{make_phantom, PhantomSpec};
use hsi_ssl::FeatureStack;

fn main() -> hsi_ssl::Result<()> {
    let mut spec = PhantomSpec::two_class(96, 96, 48, 1);
    spec.noise_sigma = 0.05;
    spec.gain_jitter = 0.1;
    let (cube, gt) = make_phantom(&spec)?;
    let features = FeatureStack::from(&cube);
    let config = ClassifyConfig::default();

    for seed in 0..3 {
        let training = sample_labels(&gt, 0.01, seed)?;
        let mut line = format!("seed {seed} ({} labels):", training.len());
        for method in [Method::Knn, Method::Svm, Method::Ssl] {
            let out = classify_with_labels(&features, &gt, &training, method, &config)?;
            let bacc = metrics(&out.confusion).bacc.unwrap_or(f64::NAN);
            line += &format!("  {} {bacc:.4}", method.name());
        }
        println!("{line}");
    }
    Ok(())
}
