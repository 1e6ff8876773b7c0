use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::classify::{classify_with_labels, sample_labels, LabeledSet};
use crate::cube_io::{
    load_cube, load_label_map, save_cube, save_label_map, save_ppm, tile, FeatureStack, HyperCube, LabelMap,
};
use crate::error::{Error, Result};
use crate::metrics::{confusion, macro_aggregate, metrics, micro_aggregate, ConfusionCounts, MacroReport, MetricsReport};
use crate::mpri::mpri_extract;
use crate::rgbrecon::{hsi_to_rgb, CmfTable};
use crate::synth::{make_phantom, make_rgb_projection};
use crate::tensorssa::tensorssa_extract;

use super::config::{Extractor, PhantomSource, Representation, RunConfig};
use super::report::{write_macro, write_report, ReportRow};

/// Environment variable capping the number of worker threads.
pub const WORKERS_ENV: &str = "HSI_WORKERS";

/// An image ready for patch processing, already in the configured
/// representation.
#[derive(Debug, Clone)]
pub struct ImageData {
    pub name: String,
    pub cube: HyperCube,
    pub gt: LabelMap,
}

/// Label seed of a patch: a 64-bit mix of `master ^ index`. The mix is a
/// bijection, so distinct patches always get distinct seeds.
pub fn patch_seed(master: u64, index: usize) -> u64 {
    let mut z = master ^ index as u64;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Loads or synthesises the configured images without changing their
/// representation.
pub fn load_source_images(config: &RunConfig) -> Result<Vec<ImageData>> {
    if let Some(ph) = &config.phantom {
        return (0..ph.images)
            .map(|i| {
                let (cube, gt) = make_phantom(&ph.spec(i))?;
                Ok(ImageData {
                    name: PhantomSource::image_name(i),
                    cube,
                    gt,
                })
            })
            .collect();
    }
    config
        .inputs
        .iter()
        .map(|input| {
            let cube = load_cube(&input.cube)?;
            let gt = load_label_map(&input.gt)?;
            gt.check_shape(cube.rows(), cube.cols())?;
            Ok(ImageData {
                name: input.display_name(),
                cube,
                gt,
            })
        })
        .collect()
}

/// Images in the configured representation.
pub fn load_images(config: &RunConfig) -> Result<Vec<ImageData>> {
    let mut images = load_source_images(config)?;
    if config.representation == Representation::Rgb {
        for img in &mut images {
            img.cube = make_rgb_projection(&img.cube)?;
        }
    }
    Ok(images)
}

/// One tile of one image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchJob {
    pub image: usize,
    /// Running index over all images, used for seeding.
    pub index: usize,
    pub origin: (usize, usize),
    pub rows: usize,
    pub cols: usize,
    pub seed: u64,
}

/// Tiles every image. Images smaller than the patch size form one patch.
pub fn plan_patches(images: &[ImageData], config: &RunConfig) -> Result<Vec<PatchJob>> {
    let mut jobs = Vec::new();
    for (i, img) in images.iter().enumerate() {
        let pr = config.patch_rows.min(img.cube.rows());
        let pc = config.patch_cols.min(img.cube.cols());
        let grid = tile(img.cube.rows(), img.cube.cols(), pr, pc)?;
        for origin in grid.origins {
            let index = jobs.len();
            jobs.push(PatchJob {
                image: i,
                index,
                origin,
                rows: pr,
                cols: pc,
                seed: patch_seed(config.classify.seed, index),
            });
        }
    }
    Ok(jobs)
}

/// Features of one patch under the configured extractor.
pub fn extract_features(cube: &HyperCube, labeled: &LabeledSet, config: &RunConfig) -> Result<FeatureStack> {
    let raw = FeatureStack::from(cube);
    match config.extractor {
        Extractor::None => Ok(raw),
        Extractor::Mpri => mpri_extract(&raw, labeled, &config.mpri),
        Extractor::Tensorssa => tensorssa_extract(&raw, &config.tensorssa()),
    }
}

/// Result of one patch.
#[derive(Debug, Clone, PartialEq)]
pub enum PatchStatus {
    Done {
        training: LabeledSet,
        prediction: LabelMap,
    },
    /// The patch lacks one of the classes and cannot be trained on.
    Skipped(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchRecord {
    pub job: PatchJob,
    pub status: PatchStatus,
}

fn both_classes(gt: &LabelMap) -> Option<String> {
    for class in [LabelMap::NON_CANCER, LabelMap::CANCER] {
        if !gt.labels().contains(&class) {
            return Some(format!("no pixel of class {class}"));
        }
    }
    None
}

fn patch_error(images: &[ImageData], job: &PatchJob, e: Error) -> Error {
    Error::Patch {
        image: images[job.image].name.clone(),
        patch: job.index,
        source: Box::new(e),
    }
}

/// Training set of a patch, or the reason it is skipped.
fn patch_training(gt: &LabelMap, job: &PatchJob, config: &RunConfig) -> Result<std::result::Result<LabeledSet, String>> {
    if let Some(reason) = both_classes(gt) {
        return Ok(Err(reason));
    }
    Ok(Ok(sample_labels(gt, config.classify.fraction, job.seed)?))
}

fn process_patch(img: &ImageData, job: &PatchJob, config: &RunConfig) -> Result<PatchStatus> {
    let gt = img.gt.crop(job.origin, job.rows, job.cols)?;
    let training = match patch_training(&gt, job, config)? {
        Ok(t) => t,
        Err(reason) => return Ok(PatchStatus::Skipped(reason)),
    };
    let cube = img.cube.crop(job.origin, job.rows, job.cols)?;
    let features = extract_features(&cube, &training, config)?;
    let outcome = classify_with_labels(&features, &gt, &training, config.classify.method, &config.classify)?;
    Ok(PatchStatus::Done {
        training,
        prediction: outcome.prediction,
    })
}

/// Runs `f` inside a pool sized by [`WORKERS_ENV`] when it is set.
pub fn with_workers<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| Error::Config(format!("{WORKERS_ENV} must be a positive integer, got `{v}`")))?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
        Err(_) => Ok(f()),
    }
}

/// Classifies every patch. Results are in patch order.
pub fn classify_patches(images: &[ImageData], config: &RunConfig) -> Result<Vec<PatchRecord>> {
    let jobs = plan_patches(images, config)?;
    with_workers(|| {
        jobs.par_iter()
            .map(|job| {
                process_patch(&images[job.image], job, config)
                    .map(|status| PatchRecord { job: *job, status })
                    .map_err(|e| patch_error(images, job, e))
            })
            .collect::<Result<Vec<_>>>()
    })?
}

/// Scores of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSummary {
    pub name: String,
    pub counts: ConfusionCounts,
    pub report: MetricsReport,
    pub patches: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub images: Vec<ImageSummary>,
    pub pooled: ConfusionCounts,
    pub micro: MetricsReport,
    pub macro_report: MacroReport,
    pub records: Vec<PatchRecord>,
}

/// Confusion counts of a finished patch against its ground truth.
fn patch_confusion(img: &ImageData, record: &PatchRecord) -> Result<Option<ConfusionCounts>> {
    let PatchStatus::Done { training, prediction } = &record.status else {
        return Ok(None);
    };
    let job = &record.job;
    let gt = img.gt.crop(job.origin, job.rows, job.cols)?;
    let mask = crate::classify::evaluation_mask(&gt, training);
    confusion(prediction, &gt, &mask).map(Some)
}

/// Aggregates patch records into per-image, micro and macro scores.
pub fn summarize(images: &[ImageData], records: Vec<PatchRecord>) -> Result<RunSummary> {
    let mut summaries = Vec::with_capacity(images.len());
    let mut all = Vec::new();
    for (i, img) in images.iter().enumerate() {
        let mut counts = ConfusionCounts::default();
        let (mut done, mut skipped) = (0, 0);
        for r in records.iter().filter(|r| r.job.image == i) {
            match patch_confusion(img, r).map_err(|e| patch_error(images, &r.job, e))? {
                Some(c) => {
                    counts = counts + c;
                    all.push(c);
                    done += 1;
                }
                None => skipped += 1,
            }
        }
        if done == 0 {
            return Err(Error::Empty(format!("image `{}` has no patch containing both classes", img.name)));
        }
        summaries.push(ImageSummary {
            name: img.name.clone(),
            counts,
            report: metrics(&counts),
            patches: done,
            skipped,
        });
    }
    let micro = micro_aggregate(&all)?;
    let pooled = all.iter().copied().fold(ConfusionCounts::default(), |a, b| a + b);
    let reports: Vec<MetricsReport> = summaries.iter().map(|s| s.report).collect();
    Ok(RunSummary {
        images: summaries,
        pooled,
        micro,
        macro_report: macro_aggregate(&reports)?,
        records,
    })
}

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn prediction_path(dir: &Path, image: &str, patch: usize) -> PathBuf {
    dir.join("predictions").join(format!("{image}_p{patch:04}.pgm"))
}

const CLASS_COLOURS: [[u8; 3]; 2] = [[70, 130, 200], [215, 48, 39]];

/// Colour rendering of a label map; unlabelled pixels are black.
pub fn label_colours(map: &LabelMap) -> Vec<[u8; 3]> {
    map.labels()
        .iter()
        .map(|&l| match l {
            0 | 1 => CLASS_COLOURS[l as usize],
            _ => [0, 0, 0],
        })
        .collect()
}

/// Writes per-patch prediction PGMs and one stitched PPM per image.
pub fn write_predictions(dir: &Path, images: &[ImageData], records: &[PatchRecord]) -> Result<()> {
    ensure_dir(&dir.join("predictions"))?;
    for (i, img) in images.iter().enumerate() {
        let mut full = LabelMap::filled(img.gt.rows(), img.gt.cols(), LabelMap::UNLABELED)?;
        for r in records.iter().filter(|r| r.job.image == i) {
            if let PatchStatus::Done { prediction, .. } = &r.status {
                save_label_map(prediction, prediction_path(dir, &img.name, r.job.index))?;
                full.paste(r.job.origin, prediction)?;
            }
        }
        save_ppm(
            dir.join(format!("{}_prediction.ppm", img.name)),
            full.rows(),
            full.cols(),
            &label_colours(&full),
        )?;
    }
    Ok(())
}

/// Writes `manifest.txt`: the resolved configuration and the patch table.
pub fn write_manifest(dir: &Path, config: &RunConfig, images: &[ImageData], records: &[PatchRecord]) -> Result<()> {
    let mut text = String::from("# resolved configuration\n");
    text.push_str(&config.to_toml());
    text.push_str("\n# patches: image, index, origin_row, origin_col, rows, cols, seed, status\n");
    for r in records {
        let j = &r.job;
        let status = match &r.status {
            PatchStatus::Done { training, .. } => format!("done ({} training pixels)", training.len()),
            PatchStatus::Skipped(why) => format!("skipped ({why})"),
        };
        text.push_str(&format!(
            "# {}, {}, {}, {}, {}, {}, {}, {}\n",
            images[j.image].name, j.index, j.origin.0, j.origin.1, j.rows, j.cols, j.seed, status
        ));
    }
    let path = dir.join("manifest.txt");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Writes `report.csv` (one row per image plus the pooled row) and
/// `macro.csv`.
pub fn write_reports(dir: &Path, config: &RunConfig, summary: &RunSummary) -> Result<()> {
    let mut rows: Vec<ReportRow> = summary
        .images
        .iter()
        .map(|s| ReportRow::new(&s.name, config, s.counts, s.report))
        .collect();
    rows.push(ReportRow::new(super::config::MICRO_ROW, config, summary.pooled, summary.micro));
    write_report(&dir.join("report.csv"), &rows)?;
    write_macro(&dir.join("macro.csv"), &summary.macro_report)
}

/// The complete protocol: load, tile, extract, classify, score, and write
/// every artefact into the output directory.
pub fn run_experiment(config: &RunConfig) -> Result<RunSummary> {
    config.validate()?;
    let images = load_images(config)?;
    let records = classify_patches(&images, config)?;
    let dir = &config.output_dir;
    ensure_dir(dir)?;
    write_predictions(dir, &images, &records)?;
    write_manifest(dir, config, &images, &records)?;
    let summary = summarize(&images, records)?;
    write_reports(dir, config, &summary)?;
    Ok(summary)
}

/// Classification only: writes predictions and the manifest, no scores.
pub fn run_classification(config: &RunConfig) -> Result<Vec<PatchRecord>> {
    config.validate()?;
    let images = load_images(config)?;
    let records = classify_patches(&images, config)?;
    ensure_dir(&config.output_dir)?;
    write_predictions(&config.output_dir, &images, &records)?;
    write_manifest(&config.output_dir, config, &images, &records)?;
    Ok(records)
}

/// Scores prediction maps previously written by [`run_classification`].
/// Training sets are re-drawn from the configured seeds so the same pixels
/// are excluded.
pub fn evaluate_predictions(config: &RunConfig) -> Result<RunSummary> {
    config.validate()?;
    let images = load_images(config)?;
    let jobs = plan_patches(&images, config)?;
    let mut records = Vec::with_capacity(jobs.len());
    for job in jobs {
        let img = &images[job.image];
        let gt = img.gt.crop(job.origin, job.rows, job.cols)?;
        let status = match patch_training(&gt, &job, config).map_err(|e| patch_error(&images, &job, e))? {
            Err(reason) => PatchStatus::Skipped(reason),
            Ok(training) => {
                let prediction = load_label_map(prediction_path(&config.output_dir, &img.name, job.index))
                    .map_err(|e| patch_error(&images, &job, e))?;
                PatchStatus::Done { training, prediction }
            }
        };
        records.push(PatchRecord { job, status });
    }
    let summary = summarize(&images, records)?;
    write_reports(&config.output_dir, config, &summary)?;
    Ok(summary)
}

/// Writes the feature stack of every patch as a cube file.
pub fn run_extraction(config: &RunConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let images = load_images(config)?;
    let jobs = plan_patches(&images, config)?;
    let dir = config.output_dir.join("features");
    ensure_dir(&dir)?;
    let stacks = with_workers(|| {
        jobs.par_iter()
            .map(|job| -> Result<Option<FeatureStack>> {
                let img = &images[job.image];
                let gt = img.gt.crop(job.origin, job.rows, job.cols)?;
                let Ok(training) = patch_training(&gt, job, config)? else {
                    return Ok(None);
                };
                let cube = img.cube.crop(job.origin, job.rows, job.cols)?;
                extract_features(&cube, &training, config).map(Some)
            })
            .zip(jobs.par_iter())
            .map(|(r, job)| r.map_err(|e| patch_error(&images, job, e)))
            .collect::<Result<Vec<_>>>()
    })??;
    let mut written = Vec::new();
    for (job, stack) in jobs.iter().zip(stacks) {
        if let Some(stack) = stack {
            let path = dir.join(format!("{}_p{:04}.hscube", images[job.image].name, job.index));
            save_cube(&stack.to_cube()?, &path)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Writes each source image as `<name>.hscube` plus `<name>_gt.pgm`.
pub fn run_synthesis(config: &RunConfig) -> Result<Vec<(PathBuf, PathBuf)>> {
    if config.phantom.is_none() {
        return Err(Error::Config("synthesis needs a [phantom] section".into()));
    }
    config.validate()?;
    ensure_dir(&config.output_dir)?;
    load_source_images(config)?
        .into_iter()
        .map(|img| {
            let cube_path = config.output_dir.join(format!("{}.hscube", img.name));
            let gt_path = config.output_dir.join(format!("{}_gt.pgm", img.name));
            save_cube(&img.cube, &cube_path)?;
            save_label_map(&img.gt, &gt_path)?;
            Ok((cube_path, gt_path))
        })
        .collect()
}

/// Renders each source image to an sRGB PPM.
pub fn run_rgb(config: &RunConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    ensure_dir(&config.output_dir)?;
    let cmf = CmfTable::cie1931();
    load_source_images(config)?
        .into_iter()
        .map(|img| {
            let path = config.output_dir.join(format!("{}_rgb.ppm", img.name));
            hsi_to_rgb(&img.cube, &cmf)?.save_ppm(&path)?;
            Ok(path)
        })
        .collect()
}
