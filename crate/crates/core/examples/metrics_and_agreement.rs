//! Scoring a prediction, fusing three annotations and measuring how much
//! the annotators agree.

use hsi_ssl::metrics::{confusion, fleiss_kappa, kappa_band, majority_vote, metrics, Metric};
use hsi_ssl::LabelMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> hsi_ssl::Result<()> {
    let (rows, cols) = (40, 40);
    let truth: Vec<u8> = (0..rows * cols).map(|p| u8::from(p % cols < 18)).collect();

    // each annotator flips a few pixels
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let annotators: Vec<LabelMap> = [0.04, 0.07, 0.12]
        .iter()
        .map(|&flip| {
            let labels = truth.iter().map(|&l| if rng.random::<f64>() < flip { 1 - l } else { l }).collect();
            LabelMap::new(rows, cols, labels)
        })
        .collect::<hsi_ssl::Result<_>>()?;
    let refs: Vec<&LabelMap> = annotators.iter().collect();
    let fused = majority_vote(&refs)?;

    let ratings: Vec<Vec<u32>> = (0..rows * cols)
        .map(|p| annotators.iter().map(|a| u32::from(a.get(p))).collect())
        .collect();
    let kappa = fleiss_kappa(&ratings)?;
    println!("Fleiss kappa {kappa:.3} ({})", kappa_band(kappa));

    let truth = LabelMap::new(rows, cols, truth)?;
    let mask = vec![true; truth.len()];
    for (name, map) in [("annotator 3", &annotators[2]), ("majority", &fused)] {
        let c = confusion(map, &truth, &mask)?;
        let r = metrics(&c);
        let cells: Vec<String> = Metric::ALL
            .iter()
            .map(|&m| format!("{} {:.3}", m.name(), r.get(m).unwrap_or(f64::NAN)))
            .collect();
        println!("{name:>11}: {}", cells.join("  "));
    }
    Ok(())
}
