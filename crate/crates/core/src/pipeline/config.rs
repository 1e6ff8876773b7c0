use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classify::ClassifyConfig;
use crate::error::{Error, Result};
use crate::mpri::MpriConfig;
use crate::synth::PhantomSpec;
use crate::tensorssa::TssaConfig;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    #[default]
    Hsi,
    Rgb,
}

impl Representation {
    pub fn name(self) -> &'static str {
        match self {
            Representation::Hsi => "hsi",
            Representation::Rgb => "rgb",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extractor {
    #[default]
    None,
    Mpri,
    Tensorssa,
}

impl Extractor {
    pub fn name(self) -> &'static str {
        match self {
            Extractor::None => "none",
            Extractor::Mpri => "mpri",
            Extractor::Tensorssa => "tensorssa",
        }
    }
}

/// One cube on disk with its ground-truth label map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputImage {
    /// Defaults to the cube's file stem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub cube: PathBuf,
    pub gt: PathBuf,
}

impl InputImage {
    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            self.cube
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "image".into())
        })
    }
}

fn default_images() -> usize {
    1
}
fn default_side() -> usize {
    96
}
fn default_bands() -> usize {
    48
}
fn default_sigma() -> f64 {
    0.05
}
fn default_jitter() -> f64 {
    0.1
}

/// Synthetic two-class images generated in place of input files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSource {
    #[serde(default = "default_images")]
    pub images: usize,
    #[serde(default = "default_side")]
    pub rows: usize,
    #[serde(default = "default_side")]
    pub cols: usize,
    #[serde(default = "default_bands")]
    pub bands: usize,
    /// Image `i` uses seed `seed + i`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_sigma")]
    pub noise_sigma: f64,
    #[serde(default = "default_jitter")]
    pub gain_jitter: f64,
}

impl Default for PhantomSource {
    fn default() -> Self {
        Self {
            images: default_images(),
            rows: default_side(),
            cols: default_side(),
            bands: default_bands(),
            seed: 0,
            noise_sigma: default_sigma(),
            gain_jitter: default_jitter(),
        }
    }
}

impl PhantomSource {
    pub fn spec(&self, image: usize) -> PhantomSpec {
        let mut spec = PhantomSpec::two_class(self.rows, self.cols, self.bands, self.seed.wrapping_add(image as u64));
        spec.noise_sigma = self.noise_sigma;
        spec.gain_jitter = self.gain_jitter;
        spec
    }

    pub fn image_name(image: usize) -> String {
        format!("phantom_{image:02}")
    }
}

fn default_patch_rows() -> usize {
    230
}
fn default_patch_cols() -> usize {
    258
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// A complete experiment description, usually read from a TOML file.
///
/// Relative paths are resolved against the directory of the file they were
/// read from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub representation: Representation,
    #[serde(default)]
    pub extractor: Extractor,
    #[serde(default = "default_patch_rows")]
    pub patch_rows: usize,
    #[serde(default = "default_patch_cols")]
    pub patch_cols: usize,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<InputImage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phantom: Option<PhantomSource>,
    /// Method, label fraction and master seed live here.
    #[serde(default)]
    pub classify: ClassifyConfig,
    #[serde(default)]
    pub mpri: MpriConfig,
    /// Defaults depend on the representation, see [`RunConfig::tensorssa`].
    #[serde(default, rename = "tensorssa", skip_serializing_if = "Option::is_none")]
    pub tensorssa_section: Option<TssaConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            representation: Representation::default(),
            extractor: Extractor::default(),
            patch_rows: default_patch_rows(),
            patch_cols: default_patch_cols(),
            output_dir: default_output(),
            inputs: Vec::new(),
            phantom: None,
            classify: ClassifyConfig::default(),
            mpri: MpriConfig::default(),
            tensorssa_section: None,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads, resolves and validates a configuration file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.is_file() {
            return Err(Error::ConfigNotFound(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::parse(&text)?;
        if let Some(base) = path.parent() {
            config.resolve_paths(base);
        }
        config.validate()?;
        Ok(config)
    }

    /// Makes relative paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        for input in &mut self.inputs {
            fix(&mut input.cube);
            fix(&mut input.gt);
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.inputs.is_empty(), &self.phantom) {
            (true, None) => return Err(Error::Config("either `inputs` or `phantom` must be given".into())),
            (false, Some(_)) => return Err(Error::Config("`inputs` and `phantom` are mutually exclusive".into())),
            _ => {}
        }
        if let Some(ph) = &self.phantom {
            if ph.images == 0 {
                return Err(Error::Config("phantom.images must be positive".into()));
            }
            ph.spec(0).validate()?;
        }
        let mut names: Vec<String> = self.image_names();
        if names.iter().any(|n| n == MICRO_ROW) {
            return Err(Error::Config(format!("`{MICRO_ROW}` is reserved and cannot name an image")));
        }
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("image names must be unique".into()));
        }
        let c = &self.classify;
        if !(c.fraction > 0.0 && c.fraction <= 1.0) {
            return Err(Error::Config(format!("classify.fraction {} not in (0,1]", c.fraction)));
        }
        if self.patch_rows == 0 || self.patch_cols == 0 {
            return Err(Error::Config("patch dimensions must be positive".into()));
        }
        c.ssl().validate()?;
        self.mpri.validate()?;
        self.tensorssa().validate()?;
        Ok(())
    }

    pub fn image_names(&self) -> Vec<String> {
        match &self.phantom {
            Some(ph) => (0..ph.images).map(PhantomSource::image_name).collect(),
            None => self.inputs.iter().map(InputImage::display_name).collect(),
        }
    }

    /// The `tensorssa` section, or the defaults for the representation
    /// (`l = 60` for spectral cubes, `l = 8` for colour images).
    pub fn tensorssa(&self) -> TssaConfig {
        self.tensorssa_section.unwrap_or(match self.representation {
            Representation::Hsi => TssaConfig::default(),
            Representation::Rgb => TssaConfig::rgb(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }
}

/// Image column value of the pooled row in `report.csv`.
pub const MICRO_ROW: &str = "micro";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_phantom_config() {
        let c = RunConfig::parse("[phantom]\nimages = 2\n").unwrap();
        c.validate().unwrap();
        assert_eq!(c.patch_rows, 230);
        assert_eq!(c.patch_cols, 258);
        assert_eq!(c.image_names(), vec!["phantom_00", "phantom_01"]);
        assert_eq!(c.tensorssa().l, 60);
    }

    #[test]
    fn sections_parse() {
        let text = r#"
representation = "rgb"
extractor = "tensorssa"
patch_rows = 32
patch_cols = 32
output_dir = "results"

[[inputs]]
cube = "a.hscube"
gt = "a.pgm"

[classify]
method = "knn"
fraction = 0.02
seed = 9

[mpri]
scales = [3, 5]
layers = 2
betas = [2.0, 3.0]
"#;
        let c = RunConfig::parse(text).unwrap();
        c.validate().unwrap();
        assert_eq!(c.classify.seed, 9);
        assert_eq!(c.inputs[0].display_name(), "a");
        assert_eq!(c.tensorssa().l, 8);
        let back = RunConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn invalid_configs() {
        assert!(RunConfig::parse("bogus = 1\n[phantom]\n").is_err());
        assert!(RunConfig::parse("").unwrap().validate().is_err());
        let both = "[[inputs]]\ncube = \"a\"\ngt = \"b\"\n[phantom]\n";
        assert!(RunConfig::parse(both).unwrap().validate().is_err());
        let frac = "[phantom]\n[classify]\nfraction = 0.0\n";
        assert!(RunConfig::parse(frac).unwrap().validate().is_err());
        let dup = "[[inputs]]\ncube = \"x/a.c\"\ngt = \"g\"\n[[inputs]]\ncube = \"y/a.c\"\ngt = \"h\"\n";
        assert!(RunConfig::parse(dup).unwrap().validate().is_err());
    }

    #[test]
    fn missing_file_category() {
        let err = RunConfig::load("/nonexistent/run.toml").unwrap_err();
        assert_eq!(err.category(), "config not found");
    }
}
