//! The whole protocol on two phantom images: tiling, MPRI features,
//! self-training, micro and macro reports.
//!
//! cargo run --release --example full_experiment -- [output dir]

use hsi_ssl::metrics::Metric;
use hsi_ssl::pipeline::{fmt_value, run_experiment, RunConfig};

const CONFIG: &str = r#"
extractor = "mpri"
patch_rows = 32
patch_cols = 32

[phantom]
images = 2
rows = 64
cols = 32
bands = 24
seed = 10

[classify]
method = "ssl"
fraction = 0.02
seed = 42

[mpri]
scales = [3, 5]
layers = 2
betas = [2.0, 3.0]
"#;

fn main() -> hsi_ssl::Result<()> {
    let mut config = RunConfig::parse(CONFIG)?;
    config.output_dir = std::env::args().nth(1).unwrap_or_else(|| "experiment_out".into()).into();
    config.validate()?;

    let summary = run_experiment(&config)?;
    for img in &summary.images {
        println!("{}: BACC {} over {} patches", img.name, fmt_value(img.report.bacc), img.patches);
    }
    for m in Metric::ALL {
        let s = summary.macro_report.get(m);
        println!(
            "{:>4}  micro {}  macro {} +- {}",
            m.name(),
            fmt_value(summary.micro.get(m)),
            fmt_value(s.mean),
            fmt_value(s.std)
        );
    }
    println!("reports in {}", config.output_dir.display());
    Ok(())
}
