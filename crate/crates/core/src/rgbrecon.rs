//! Colour rendering of hyperspectral cubes: spectral integration against the
//! CIE 1931 colour-matching functions, equal-energy white normalisation, and
//! conversion to sRGB.

use std::path::Path;

use rayon::prelude::*;

use crate::cube_io::{save_ppm, HyperCube};
use crate::error::{Error, Result};

const CIE1931_2DEG: &str = include_str!("../data/cie1931_2deg.txt");

/// XYZ to linear sRGB (D65). Rows are rescaled to sum to one before use.
const XYZ_TO_SRGB: [[f64; 3]; 3] = [
    [3.240_454_2, -1.537_138_5, -0.498_531_4],
    [-0.969_266_0, 1.876_010_8, 0.041_556_0],
    [0.055_643_4, -0.204_025_9, 1.057_225_2],
];

/// Colour-matching functions sampled on a 1 nm grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CmfTable {
    wavelengths: Vec<f64>,
    xbar: Vec<f64>,
    ybar: Vec<f64>,
    zbar: Vec<f64>,
}

impl CmfTable {
    pub fn new(wavelengths: Vec<f64>, xbar: Vec<f64>, ybar: Vec<f64>, zbar: Vec<f64>) -> Result<Self> {
        let n = wavelengths.len();
        if n == 0 || xbar.len() != n || ybar.len() != n || zbar.len() != n {
            return Err(Error::Dimension("CMF columns differ in length".into()));
        }
        if wavelengths.windows(2).any(|w| (w[1] - w[0] - 1.0).abs() > 1e-9) {
            return Err(Error::InvalidParameter("CMF grid must have 1 nm spacing".into()));
        }
        if wavelengths[0] > 450.0 || wavelengths[n - 1] < 800.0 {
            return Err(Error::InvalidParameter("CMF grid must cover 450-800 nm".into()));
        }
        let weights = xbar.iter().chain(&ybar).chain(&zbar);
        if weights.clone().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter("CMF weights must be finite and nonnegative".into()));
        }
        if ybar.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidParameter("ybar integrates to zero".into()));
        }
        Ok(Self {
            wavelengths,
            xbar,
            ybar,
            zbar,
        })
    }

    /// Parses the four-column text format `nm xbar ybar zbar`; `#` starts a
    /// comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let (mut wl, mut x, mut y, mut z) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let vals: Vec<f64> = line
                .split_ascii_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::MalformedHeader(format!("CMF line {}: `{line}`", lineno + 1)))?;
            if vals.len() != 4 {
                return Err(Error::MalformedHeader(format!(
                    "CMF line {} has {} columns",
                    lineno + 1,
                    vals.len()
                )));
            }
            wl.push(vals[0]);
            x.push(vals[1]);
            y.push(vals[2]);
            z.push(vals[3]);
        }
        Self::new(wl, x, y, z)
    }

    /// The CIE 1931 2-degree standard observer, 360-830 nm.
    pub fn cie1931() -> Self {
        Self::parse(CIE1931_2DEG).expect("bundled CMF table is valid")
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    /// `(xbar, ybar, zbar)` at the grid point nearest to `nm`.
    pub fn lookup(&self, nm: f64) -> Result<[f64; 3]> {
        let first = self.wavelengths[0];
        let last = self.wavelengths[self.wavelengths.len() - 1];
        if !(nm >= first - 0.5 && nm <= last + 0.5) {
            return Err(Error::InvalidParameter(format!(
                "wavelength {nm} nm outside CMF table {first}-{last} nm"
            )));
        }
        let i = ((nm - first).round() as usize).min(self.wavelengths.len() - 1);
        Ok([self.xbar[i], self.ybar[i], self.zbar[i]])
    }
}

/// A three-channel floating-point image, pixel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TriImage {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<[f64; 3]>,
}

impl TriImage {
    /// Quantises [0,1] channels to bytes and writes a binary PPM.
    pub fn save_ppm(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes: Vec<[u8; 3]> = self
            .pixels
            .iter()
            .map(|px| px.map(|c| (c.clamp(0.0, 1.0) * 255.0).round() as u8))
            .collect();
        save_ppm(path, self.rows, self.cols, &bytes)
    }
}

/// Per-band CMF weights for a cube, already divided by the flat-spectrum
/// response so that S(λ) = 1 integrates to (1, 1, 1).
fn white_normalized_weights(wavelengths: &[f64], cmf: &CmfTable) -> Result<Vec<[f64; 3]>> {
    let raw = wavelengths
        .iter()
        .map(|&nm| cmf.lookup(nm))
        .collect::<Result<Vec<_>>>()?;
    let mut white = [0.0; 3];
    for w in &raw {
        for c in 0..3 {
            white[c] += w[c];
        }
    }
    if let Some(c) = white.iter().position(|&v| v <= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "cube wavelengths give no response in {} channel",
            ["X", "Y", "Z"][c]
        )));
    }
    Ok(raw
        .into_iter()
        .map(|w| [w[0] / white[0], w[1] / white[1], w[2] / white[2]])
        .collect())
}

/// Integrates every pixel spectrum against the CMFs, normalised so that a
/// flat unit spectrum maps to XYZ = (1, 1, 1).
pub fn hsi_to_xyz(cube: &HyperCube, cmf: &CmfTable) -> Result<TriImage> {
    let weights = white_normalized_weights(cube.wavelengths(), cmf)?;
    let npix = cube.pixel_count();
    let mut pixels = vec![[0.0f64; 3]; npix];
    for (b, w) in weights.iter().enumerate() {
        let plane = cube.band_plane(b);
        pixels.par_iter_mut().zip(plane.par_iter()).for_each(|(px, &s)| {
            let s = s as f64;
            px[0] += s * w[0];
            px[1] += s * w[1];
            px[2] += s * w[2];
        });
    }
    Ok(TriImage {
        rows: cube.rows(),
        cols: cube.cols(),
        pixels,
    })
}

fn srgb_matrix() -> [[f64; 3]; 3] {
    XYZ_TO_SRGB.map(|row| {
        let s: f64 = row.iter().sum();
        row.map(|v| v / s)
    })
}

/// sRGB transfer curve applied to a linear value in [0,1].
pub fn srgb_encode(linear: f64) -> f64 {
    if linear <= 0.003_130_8 {
        12.92 * linear
    } else {
        1.055 * linear.powf(1.0 / 2.4) - 0.055
    }
}

/// XYZ to gamma-encoded sRGB in [0,1]; out-of-gamut values are clipped before
/// encoding.
pub fn xyz_to_srgb(xyz: &TriImage) -> TriImage {
    let m = srgb_matrix();
    let pixels = xyz
        .pixels
        .par_iter()
        .map(|p| {
            let mut out = [0.0; 3];
            for (o, row) in out.iter_mut().zip(&m) {
                let lin = row[0] * p[0] + row[1] * p[1] + row[2] * p[2];
                // NaN-safe clip: NaN falls through to 0
                let lin = if lin > 0.0 { lin.min(1.0) } else { 0.0 };
                *o = srgb_encode(lin);
            }
            out
        })
        .collect();
    TriImage {
        rows: xyz.rows,
        cols: xyz.cols,
        pixels,
    }
}

pub fn hsi_to_rgb(cube: &HyperCube, cmf: &CmfTable) -> Result<TriImage> {
    Ok(xyz_to_srgb(&hsi_to_xyz(cube, cmf)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(lo: usize, hi: usize) -> Vec<f64> {
        (lo..=hi).map(|v| v as f64).collect()
    }

    fn const_cube(wl: Vec<f64>, v: f32) -> HyperCube {
        HyperCube::from_fn(2, 3, wl, |_, _| v).unwrap()
    }

    #[test]
    fn table_loads() {
        let cmf = CmfTable::cie1931();
        assert_eq!(cmf.wavelengths().len(), 471);
        let y555 = cmf.lookup(555.0).unwrap()[1];
        assert!((y555 - 1.0).abs() < 1e-3);
        assert!(cmf.lookup(900.0).is_err());
    }

    #[test]
    fn flat_and_zero_spectra() {
        let cmf = CmfTable::cie1931();
        let xyz = hsi_to_xyz(&const_cube(grid(450, 800), 1.0), &cmf).unwrap();
        for px in &xyz.pixels {
            for c in px {
                assert!((c - 1.0).abs() < 1e-12);
            }
        }
        let zero = hsi_to_xyz(&const_cube(grid(450, 800), 0.0), &cmf).unwrap();
        assert!(zero.pixels.iter().all(|p| *p == [0.0; 3]));
        let black = hsi_to_rgb(&const_cube(grid(450, 800), 0.0), &cmf).unwrap();
        assert!(black.pixels.iter().all(|p| *p == [0.0; 3]));
    }

    #[test]
    fn spike_matches_direct_summation() {
        let cmf = CmfTable::cie1931();
        let wl = grid(450, 800);
        let spike = 550 - 450;
        let cube = HyperCube::from_fn(1, 1, wl.clone(), |_, b| if b == spike { 1.0 } else { 0.0 }).unwrap();
        let xyz = hsi_to_xyz(&cube, &cmf).unwrap().pixels[0];
        // oracle: raw CMF value over the summed CMF column on the same grid
        let mut white = [0.0; 3];
        for &nm in &wl {
            let w = cmf.lookup(nm).unwrap();
            for c in 0..3 {
                white[c] += w[c];
            }
        }
        let at = cmf.lookup(550.0).unwrap();
        for c in 0..3 {
            assert!((xyz[c] - at[c] / white[c]).abs() < 1e-15);
        }
    }

    #[test]
    fn neutral_and_transfer_curve() {
        let m = srgb_matrix();
        for row in &m {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
        let img = TriImage {
            rows: 1,
            cols: 2,
            pixels: vec![[0.0; 3], [1.0; 3]],
        };
        let rgb = xyz_to_srgb(&img);
        assert_eq!(rgb.pixels[0], [0.0; 3]);
        let p = rgb.pixels[1];
        assert!((p[0] - p[1]).abs() < 1e-6 && (p[1] - p[2]).abs() < 1e-6);
        assert!((p[0] - 1.0).abs() < 1e-12);
        let half = srgb_encode(0.5);
        assert!((half - (1.055 * 0.5f64.powf(1.0 / 2.4) - 0.055)).abs() < 1e-15);
        assert!((half - 0.7354).abs() < 1e-4);
    }

    #[test]
    fn red_ramp_is_red() {
        let cmf = CmfTable::cie1931();
        let cube = HyperCube::from_fn(2, 2, grid(450, 650), |p, b| {
            (b as f32 / 200.0) * (1.0 + p as f32 * 0.1)
        })
        .unwrap();
        let rgb = hsi_to_rgb(&cube, &cmf).unwrap();
        for px in &rgb.pixels {
            assert!(px[0] > px[2], "{px:?}");
        }
    }

    #[test]
    fn nan_input_never_escapes() {
        let img = TriImage {
            rows: 1,
            cols: 1,
            pixels: vec![[f64::NAN, 1e300, -1e300]],
        };
        let out = xyz_to_srgb(&img);
        assert!(out.pixels[0].iter().all(|c| (0.0..=1.0).contains(c)));
    }
}
