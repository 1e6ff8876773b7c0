//! Rank-sum comparison of per-image balanced accuracies of two methods.

use hsi_ssl::metrics::wilcoxon_ranksum;

fn main() -> hsi_ssl::Result<()> {
    let a = [0.912, 0.887, 0.934, 0.901, 0.948, 0.925, 0.879];
    let b = [0.861, 0.874, 0.892, 0.855, 0.903, 0.868, 0.881];

    let r = wilcoxon_ranksum(&a, &b)?;
    println!("rank sum {}", r.statistic);
    match r.p_exact {
        Some(p) => println!("exact p {p:.5}, normal approximation {:.5}", r.p_normal),
        None => println!("normal approximation p {:.5}", r.p_normal),
    }
    println!("{}", if r.p_value < 0.05 { "significant at 0.05" } else { "not significant at 0.05" });

    let r = wilcoxon_ranksum(&a, &a)?;
    println!("a against itself: p {:.3}", r.p_value);
    Ok(())
}
