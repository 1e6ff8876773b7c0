//! Deterministic synthetic phantoms with known ground truth.
//!
//! Class regions come from a smooth random field (a handful of low-frequency
//! sinusoids) cut at per-class quantiles, so every class forms large
//! connected blobs. Each pixel is its class mean spectrum times a per-pixel
//! gain drawn from `[1 - gain_jitter, 1 + gain_jitter]`, plus white Gaussian
//! noise of standard deviation `noise_sigma`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cube_io::{HyperCube, LabelMap};
use crate::error::{Error, Result};
use crate::rgbrecon::{hsi_to_rgb, CmfTable};

fn default_range() -> (f64, f64) {
    (450.0, 800.0)
}

fn default_terms() -> usize {
    4
}

fn default_cycles() -> f64 {
    2.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSpec {
    pub rows: usize,
    pub cols: usize,
    pub bands: usize,
    /// Mean spectrum per class, each of length `bands`, values in [0,1].
    pub class_spectra: Vec<Vec<f64>>,
    /// Area fraction per class; equal shares when empty.
    #[serde(default)]
    pub class_fractions: Vec<f64>,
    /// Binary label written for each class; class 0 maps to 0 and every
    /// other class to 1 when empty.
    #[serde(default)]
    pub class_labels: Vec<u8>,
    pub region_seed: u64,
    pub noise_seed: u64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub gain_jitter: f64,
    /// Wavelength span (nm) covered by the evenly spaced bands.
    #[serde(default = "default_range")]
    pub wavelength_range: (f64, f64),
    #[serde(default = "default_terms")]
    pub field_terms: usize,
    /// Highest spatial frequency of the region field, in cycles per image.
    #[serde(default = "default_cycles")]
    pub max_cycles: f64,
}

impl PhantomSpec {
    /// Two-class phantom in the style used throughout the tests and
    /// examples. Both classes share a haematoxylin/eosin-like visible
    /// profile; they differ mainly in a near-infrared band around 750 nm,
    /// with only a faint difference near 590 nm that a colour rendering can
    /// pick up.
    pub fn two_class(rows: usize, cols: usize, bands: usize, seed: u64) -> Self {
        let range = default_range();
        let wl = linspace(range.0, range.1, bands);
        let bump = |x: f64, mu: f64, s: f64| (-(x - mu).powi(2) / (2.0 * s * s)).exp();
        let base = |x: f64| 0.62 - 0.30 * bump(x, 545.0, 35.0) - 0.12 * bump(x, 615.0, 40.0);
        let offset = |x: f64| 0.04 * bump(x, 750.0, 35.0) + 0.005 * bump(x, 590.0, 30.0);
        let stroma: Vec<f64> = wl.iter().map(|&x| base(x) + offset(x)).collect();
        let tumor: Vec<f64> = wl.iter().map(|&x| base(x) - offset(x)).collect();
        Self {
            rows,
            cols,
            bands,
            class_spectra: vec![stroma, tumor],
            class_fractions: Vec::new(),
            class_labels: Vec::new(),
            region_seed: seed,
            noise_seed: seed.wrapping_add(0x9E37_79B9),
            noise_sigma: 0.0,
            gain_jitter: 0.0,
            wavelength_range: range,
            field_terms: default_terms(),
            max_cycles: default_cycles(),
        }
    }

    pub fn class_count(&self) -> usize {
        self.class_spectra.len()
    }

    pub fn wavelengths(&self) -> Vec<f64> {
        linspace(self.wavelength_range.0, self.wavelength_range.1, self.bands)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.rows == 0 || self.cols == 0 || self.bands == 0 {
            return bad("phantom dimensions must be positive".into());
        }
        if self.class_count() < 2 {
            return bad("a phantom needs at least two classes".into());
        }
        for (c, s) in self.class_spectra.iter().enumerate() {
            if s.len() != self.bands {
                return bad(format!("class {c} spectrum has {} bands, expected {}", s.len(), self.bands));
            }
            if s.iter().any(|v| !v.is_finite() || !(0.0..=1.0).contains(v)) {
                return bad(format!("class {c} spectrum must lie in [0,1]"));
            }
        }
        for a in 0..self.class_count() {
            for b in a + 1..self.class_count() {
                let diff = self.class_spectra[a]
                    .iter()
                    .zip(&self.class_spectra[b])
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max);
                if diff <= 0.0 {
                    return bad(format!("classes {a} and {b} share a spectrum"));
                }
            }
        }
        if !self.class_fractions.is_empty() {
            if self.class_fractions.len() != self.class_count() {
                return bad("class_fractions length differs from class count".into());
            }
            if self.class_fractions.iter().any(|&f| !(f > 0.0)) {
                return bad("class fractions must be positive".into());
            }
        }
        if !self.class_labels.is_empty() {
            if self.class_labels.len() != self.class_count() {
                return bad("class_labels length differs from class count".into());
            }
            if self.class_labels.iter().any(|&l| l > 1) {
                return bad("class labels must be 0 or 1".into());
            }
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return bad("noise_sigma must be >= 0".into());
        }
        if !(self.gain_jitter >= 0.0) || !self.gain_jitter.is_finite() {
            return bad("gain_jitter must be >= 0".into());
        }
        if !(self.wavelength_range.0 < self.wavelength_range.1) && self.bands > 1 {
            return bad("wavelength range must be increasing".into());
        }
        if self.field_terms == 0 || !(self.max_cycles > 0.0) {
            return bad("region field needs at least one term and positive max_cycles".into());
        }
        Ok(())
    }

    fn binary_label(&self, class: usize) -> u8 {
        match self.class_labels.get(class) {
            Some(&l) => l,
            None => u8::from(class != 0),
        }
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Class index per pixel, row-major.
pub fn region_classes(spec: &PhantomSpec) -> Result<Vec<usize>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.region_seed);
    let scale = spec.rows.max(spec.cols) as f64;
    let terms: Vec<(f64, f64, f64, f64)> = (0..spec.field_terms)
        .map(|_| {
            let cycles = rng.random_range(0.5..=spec.max_cycles);
            let angle = rng.random_range(0.0..std::f64::consts::PI);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            let amp = rng.random_range(0.5..=1.0);
            let k = std::f64::consts::TAU * cycles / scale;
            (k * angle.cos(), k * angle.sin(), phase, amp)
        })
        .collect();
    let npix = spec.rows * spec.cols;
    let field: Vec<f64> = (0..npix)
        .map(|p| {
            let (r, c) = ((p / spec.cols) as f64, (p % spec.cols) as f64);
            terms.iter().map(|&(kr, kc, ph, a)| a * (kr * r + kc * c + ph).sin()).sum()
        })
        .collect();

    let k = spec.class_count();
    let fractions: Vec<f64> = if spec.class_fractions.is_empty() {
        vec![1.0; k]
    } else {
        spec.class_fractions.clone()
    };
    let total: f64 = fractions.iter().sum();
    let mut order: Vec<usize> = (0..npix).collect();
    order.sort_by(|&a, &b| field[a].total_cmp(&field[b]).then(a.cmp(&b)));
    let mut classes = vec![0usize; npix];
    let mut start = 0usize;
    let mut acc = 0.0;
    for (c, f) in fractions.iter().enumerate() {
        acc += f;
        let end = if c + 1 == k { npix } else { ((acc / total) * npix as f64).round() as usize };
        for &p in &order[start..end.max(start)] {
            classes[p] = c;
        }
        start = end.max(start);
    }
    Ok(classes)
}

/// Generates the phantom cube and its binary ground-truth map.
pub fn make_phantom(spec: &PhantomSpec) -> Result<(HyperCube, LabelMap)> {
    let classes = region_classes(spec)?;
    let npix = spec.rows * spec.cols;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.noise_seed);
    let normal = Normal::new(0.0, spec.noise_sigma.max(0.0))
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut data = vec![0.0f32; npix * spec.bands];
    for (p, &class) in classes.iter().enumerate() {
        let gain = if spec.gain_jitter > 0.0 {
            rng.random_range(1.0 - spec.gain_jitter..=1.0 + spec.gain_jitter)
        } else {
            1.0
        };
        let mean = &spec.class_spectra[class];
        for b in 0..spec.bands {
            let mut v = gain * mean[b];
            if spec.noise_sigma > 0.0 {
                v += normal.sample(&mut rng);
            }
            data[b * npix + p] = v as f32;
        }
    }
    let cube = HyperCube::new(spec.rows, spec.cols, spec.bands, spec.wavelengths(), data)?;
    let labels = classes.iter().map(|&c| spec.binary_label(c)).collect();
    let gt = LabelMap::new(spec.rows, spec.cols, labels)?;
    Ok((cube, gt))
}

/// Nominal wavelengths assigned to the blue, green and red planes of a
/// colour projection.
pub const RGB_NOMINAL_NM: [f64; 3] = [465.0, 549.0, 611.0];

/// Renders a cube to sRGB and wraps the result as a three-band cube
/// (band order blue, green, red so the wavelength axis stays increasing).
pub fn make_rgb_projection(cube: &HyperCube) -> Result<HyperCube> {
    if cube.bands() < 3 {
        return Err(Error::InvalidParameter(format!(
            "colour projection needs at least 3 bands, cube has {}",
            cube.bands()
        )));
    }
    let rgb = hsi_to_rgb(cube, &CmfTable::cie1931())?;
    HyperCube::from_fn(cube.rows(), cube.cols(), RGB_NOMINAL_NM.to_vec(), |p, b| {
        rgb.pixels[p][2 - b] as f32
    })
}
