use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hsi_ssl::classify::Method;
use hsi_ssl::metrics::Metric;
use hsi_ssl::pipeline::{self, Extractor, Representation, RunConfig, RunSummary};
use hsi_ssl::{Error, Result};

#[derive(Parser)]
#[command(name = "hsi", version, about = "Semi-supervised classification of hyperspectral cubes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Master seed; overrides `classify.seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long, value_parser = parse_method)]
    method: Option<Method>,
    /// Labelled fraction per class.
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long, value_parser = parse_extractor)]
    extractor: Option<Extractor>,
    #[arg(long, value_parser = parse_representation)]
    representation: Option<Representation>,
}

#[derive(Subcommand)]
enum Command {
    /// Write phantom cubes and label maps.
    Synth(Common),
    /// Render cubes to sRGB images.
    Rgb(Common),
    /// Write per-patch feature stacks.
    Extract(Common),
    /// Predict every patch and write the prediction maps.
    Classify(Common),
    /// Score prediction maps written by `classify`.
    Evaluate(Common),
    /// Full protocol: classify, score and report.
    Run(Common),
    /// Rank-sum test between the per-image scores of two runs.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Output CSV.
        #[arg(long, short, default_value = "significance.csv")]
        out: PathBuf,
    },
}

fn parse_enum<T: serde::de::DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    T::deserialize(serde::de::value::StrDeserializer::<serde::de::value::Error>::new(s)).map_err(|e| e.to_string())
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    parse_enum(s)
}

fn parse_extractor(s: &str) -> std::result::Result<Extractor, String> {
    parse_enum(s)
}

fn parse_representation(s: &str) -> std::result::Result<Representation, String> {
    parse_enum(s)
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut config = RunConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            config.classify.seed = seed;
        }
        if let Some(dir) = &self.output_dir {
            config.output_dir = dir.clone();
        }
        if let Some(m) = self.method {
            config.classify.method = m;
        }
        if let Some(f) = self.fraction {
            config.classify.fraction = f;
        }
        if let Some(e) = self.extractor {
            config.extractor = e;
        }
        if let Some(r) = self.representation {
            config.representation = r;
        }
        config.validate()?;
        Ok(config)
    }
}

fn print_summary(summary: &RunSummary) {
    for img in &summary.images {
        println!(
            "{}: BACC {} ({} patches, {} skipped)",
            img.name,
            pipeline::fmt_value(img.report.bacc),
            img.patches,
            img.skipped
        );
    }
    let cells: Vec<String> = Metric::ALL
        .iter()
        .map(|&m| format!("{} {}", m.name(), pipeline::fmt_value(summary.micro.get(m))))
        .collect();
    println!("micro: {}", cells.join("  "));
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(c) => {
            for (cube, gt) in pipeline::run_synthesis(&c.load()?)? {
                println!("{} {}", cube.display(), gt.display());
            }
        }
        Command::Rgb(c) => {
            for path in pipeline::run_rgb(&c.load()?)? {
                println!("{}", path.display());
            }
        }
        Command::Extract(c) => {
            for path in pipeline::run_extraction(&c.load()?)? {
                println!("{}", path.display());
            }
        }
        Command::Classify(c) => {
            let config = c.load()?;
            let records = pipeline::run_classification(&config)?;
            println!("{} patches written to {}", records.len(), config.output_dir.display());
        }
        Command::Evaluate(c) => print_summary(&pipeline::evaluate_predictions(&c.load()?)?),
        Command::Run(c) => print_summary(&pipeline::run_experiment(&c.load()?)?),
        Command::Compare { a, b, out } => {
            for (m, r) in pipeline::compare_runs(&a, &b, &out)? {
                println!("{:5} p = {:.6}{}", m.name(), r.p_value, if r.p_value < pipeline::ALPHA { "  *" } else { "" });
            }
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e.category() {
        "config" | "config not found" => 2,
        "io" => 3,
        "malformed header" | "payload size" | "non-finite" | "wavelengths" | "label range" => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.category());
            ExitCode::from(exit_code(&e))
        }
    }
}
