use hsi_ssl::metrics::{metrics, Metric};
use hsi_ssl::pipeline::{run_experiment, PatchStatus, Representation, RunConfig, RunSummary};

fn run(text: &str, dir: &std::path::Path) -> RunSummary {
    let mut config = RunConfig::parse(text).unwrap();
    config.output_dir = dir.to_path_buf();
    config.validate().unwrap();
    run_experiment(&config).unwrap()
}

#[test]
fn knn_on_clean_phantom_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let s = run(
        r#"
patch_rows = 20
patch_cols = 20
[phantom]
images = 3
rows = 40
cols = 40
bands = 16
noise_sigma = 0.0
gain_jitter = 0.0
[classify]
method = "knn"
fraction = 0.05
"#,
        dir.path(),
    );
    assert_eq!(s.micro.bacc, Some(1.0));
    assert_eq!(s.images.len(), 3);
}

#[test]
fn micro_row_is_metrics_of_pooled_counts() {
    let dir = tempfile::tempdir().unwrap();
    let s = run(
        r#"
patch_rows = 16
patch_cols = 16
[phantom]
images = 2
rows = 32
cols = 32
bands = 12
seed = 8
[classify]
method = "svm"
fraction = 0.05
"#,
        dir.path(),
    );
    assert_eq!(s.micro, metrics(&s.pooled));
    let summed = s.images.iter().fold(Default::default(), |acc, i| acc + i.counts);
    assert_eq!(s.pooled, summed);
    let done = s.records.iter().filter(|r| matches!(r.status, PatchStatus::Done { .. })).count();
    assert_eq!(done + s.images.iter().map(|i| i.skipped).sum::<usize>(), s.records.len());
    let macro_bacc = s.macro_report.get(Metric::Bacc);
    assert_eq!(macro_bacc.n, 2);
}

#[test]
fn spectral_cube_beats_its_colour_projection() {
    let text = r#"
patch_rows = 96
patch_cols = 96
[phantom]
rows = 96
cols = 96
bands = 48
seed = 1
[classify]
fraction = 0.01
"#;
    let dir = tempfile::tempdir().unwrap();
    let hsi = run(text, &dir.path().join("hsi"));
    let mut config = RunConfig::parse(text).unwrap();
    config.representation = Representation::Rgb;
    config.output_dir = dir.path().join("rgb");
    let rgb = run_experiment(&config).unwrap();
    let (h, r) = (hsi.micro.bacc.unwrap(), rgb.micro.bacc.unwrap());
    assert!(h > r, "hsi {h} vs rgb {r}");
}
