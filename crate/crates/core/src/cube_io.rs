//! Hyperspectral cube, label map and feature stack containers, their file
//! formats, and the patch tiling used by the patch-wise protocol.
//!
//! Cube file layout:
//!
//! ```text
//! HSCUBE1 <rows> <cols> <bands>\n
//! <wavelength_0> <wavelength_1> ... <wavelength_{bands-1}>\n
//! <rows*cols*bands little-endian f32, band-sequential>
//! ```
//!
//! Band-sequential means each band plane is contiguous, and inside a plane
//! samples run row-major. Label maps are binary PGM (`P5`, maxval 255).

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

const CUBE_MAGIC: &str = "HSCUBE1";

/// A `rows x cols x bands` spectral cube with its wavelength axis (nm).
#[derive(Debug, Clone, PartialEq)]
pub struct HyperCube {
    rows: usize,
    cols: usize,
    bands: usize,
    wavelengths: Vec<f64>,
    data: Vec<f32>,
}

impl HyperCube {
    /// Builds a cube from band-sequential samples, checking every invariant.
    pub fn new(
        rows: usize,
        cols: usize,
        bands: usize,
        wavelengths: Vec<f64>,
        data: Vec<f32>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 || bands == 0 {
            return Err(Error::Dimension(format!(
                "cube dimensions must be positive, got {rows}x{cols}x{bands}"
            )));
        }
        if wavelengths.len() != bands {
            return Err(Error::Dimension(format!(
                "{} wavelengths for {bands} bands",
                wavelengths.len()
            )));
        }
        check_wavelengths(&wavelengths)?;
        let expected = rows * cols * bands;
        if data.len() != expected {
            return Err(Error::PayloadSize {
                expected: expected * 4,
                found: data.len() * 4,
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            rows,
            cols,
            bands,
            wavelengths,
            data,
        })
    }

    /// Builds a cube from a pixel-major closure `f(pixel, band)`.
    pub fn from_fn(
        rows: usize,
        cols: usize,
        wavelengths: Vec<f64>,
        mut f: impl FnMut(usize, usize) -> f32,
    ) -> Result<Self> {
        let bands = wavelengths.len();
        let npix = rows * cols;
        let mut data = vec![0.0f32; npix * bands];
        for p in 0..npix {
            for b in 0..bands {
                data[b * npix + p] = f(p, b);
            }
        }
        Self::new(rows, cols, bands, wavelengths, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn pixel_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    /// Raw band-sequential samples.
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Sample at linear pixel index `p` and band `b`.
    #[inline]
    pub fn sample(&self, p: usize, b: usize) -> f32 {
        self.data[b * self.pixel_count() + p]
    }

    /// Contiguous slice holding band `b`.
    pub fn band_plane(&self, b: usize) -> &[f32] {
        let n = self.pixel_count();
        &self.data[b * n..(b + 1) * n]
    }

    /// Spectrum at linear pixel index `p`, widened to f64.
    pub fn spectrum(&self, p: usize) -> Vec<f64> {
        (0..self.bands).map(|b| self.sample(p, b) as f64).collect()
    }

    /// Pixel-major f64 copy of the cube.
    pub fn to_features(&self) -> FeatureStack {
        let npix = self.pixel_count();
        let mut data = vec![0.0; npix * self.bands];
        for b in 0..self.bands {
            let plane = self.band_plane(b);
            for p in 0..npix {
                data[p * self.bands + b] = plane[p] as f64;
            }
        }
        FeatureStack {
            rows: self.rows,
            cols: self.cols,
            dim: self.bands,
            data,
        }
    }

    /// Sub-cube of `patch_rows x patch_cols` pixels starting at `origin`.
    pub fn crop(&self, origin: (usize, usize), patch_rows: usize, patch_cols: usize) -> Result<Self> {
        let (r0, c0) = origin;
        if r0 + patch_rows > self.rows || c0 + patch_cols > self.cols {
            return Err(Error::Dimension(format!(
                "crop {patch_rows}x{patch_cols} at ({r0},{c0}) exceeds {}x{} cube",
                self.rows, self.cols
            )));
        }
        let npix = self.pixel_count();
        let mut data = Vec::with_capacity(patch_rows * patch_cols * self.bands);
        for b in 0..self.bands {
            let plane = &self.data[b * npix..(b + 1) * npix];
            for r in r0..r0 + patch_rows {
                data.extend_from_slice(&plane[r * self.cols + c0..r * self.cols + c0 + patch_cols]);
            }
        }
        Self::new(patch_rows, patch_cols, self.bands, self.wavelengths.clone(), data)
    }
}

fn check_wavelengths(wavelengths: &[f64]) -> Result<()> {
    if let Some(i) = wavelengths.iter().position(|w| !w.is_finite()) {
        return Err(Error::MalformedHeader(format!("wavelength {i} is not finite")));
    }
    if let Some(i) = wavelengths.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::NonIncreasingWavelengths(i + 1));
    }
    Ok(())
}

/// Per-pixel binary labels with an unlabeled sentinel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    rows: usize,
    cols: usize,
    labels: Vec<u8>,
}

impl LabelMap {
    pub const NON_CANCER: u8 = 0;
    pub const CANCER: u8 = 1;
    pub const UNLABELED: u8 = 255;

    pub fn new(rows: usize, cols: usize, labels: Vec<u8>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!(
                "label map dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if labels.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} labels for a {rows}x{cols} map",
                labels.len()
            )));
        }
        if let Some(index) = labels.iter().position(|&v| !is_valid_label(v)) {
            return Err(Error::LabelRange {
                index,
                value: labels[index],
            });
        }
        Ok(Self { rows, cols, labels })
    }

    /// Map filled with a single value.
    pub fn filled(rows: usize, cols: usize, value: u8) -> Result<Self> {
        Self::new(rows, cols, vec![value; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, p: usize) -> u8 {
        self.labels[p]
    }

    /// Errors unless `other` has the same spatial shape.
    pub fn check_shape(&self, rows: usize, cols: usize) -> Result<()> {
        if self.rows != rows || self.cols != cols {
            return Err(Error::Dimension(format!(
                "label map is {}x{}, expected {rows}x{cols}",
                self.rows, self.cols
            )));
        }
        Ok(())
    }

    pub fn crop(&self, origin: (usize, usize), patch_rows: usize, patch_cols: usize) -> Result<Self> {
        let (r0, c0) = origin;
        if r0 + patch_rows > self.rows || c0 + patch_cols > self.cols {
            return Err(Error::Dimension(format!(
                "crop {patch_rows}x{patch_cols} at ({r0},{c0}) exceeds {}x{} map",
                self.rows, self.cols
            )));
        }
        let mut labels = Vec::with_capacity(patch_rows * patch_cols);
        for r in r0..r0 + patch_rows {
            labels.extend_from_slice(&self.labels[r * self.cols + c0..r * self.cols + c0 + patch_cols]);
        }
        Self::new(patch_rows, patch_cols, labels)
    }

    /// Writes `patch` into this map at `origin`.
    pub fn paste(&mut self, origin: (usize, usize), patch: &LabelMap) -> Result<()> {
        let (r0, c0) = origin;
        if r0 + patch.rows > self.rows || c0 + patch.cols > self.cols {
            return Err(Error::Dimension("pasted patch exceeds map".into()));
        }
        for r in 0..patch.rows {
            let dst = (r0 + r) * self.cols + c0;
            self.labels[dst..dst + patch.cols]
                .copy_from_slice(&patch.labels[r * patch.cols..(r + 1) * patch.cols]);
        }
        Ok(())
    }
}

#[inline]
fn is_valid_label(v: u8) -> bool {
    v == LabelMap::NON_CANCER || v == LabelMap::CANCER || v == LabelMap::UNLABELED
}

/// Pixel-major `rows x cols x dim` feature cube.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    pub(crate) rows: usize,
    pub(crate) cols: usize,
    pub(crate) dim: usize,
    pub(crate) data: Vec<f64>,
}

impl FeatureStack {
    pub fn new(rows: usize, cols: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || dim == 0 {
            return Err(Error::Dimension(format!(
                "feature stack dimensions must be positive, got {rows}x{cols}x{dim}"
            )));
        }
        if data.len() != rows * cols * dim {
            return Err(Error::Dimension(format!(
                "{} values for a {rows}x{cols}x{dim} stack",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            rows,
            cols,
            dim,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pixel_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, p: usize) -> &[f64] {
        &self.data[p * self.dim..(p + 1) * self.dim]
    }

    /// Swaps the two spatial axes.
    pub fn transpose(&self) -> Self {
        let mut data = vec![0.0; self.data.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                let src = (r * self.cols + c) * self.dim;
                let dst = (c * self.rows + r) * self.dim;
                data[dst..dst + self.dim].copy_from_slice(&self.data[src..src + self.dim]);
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            dim: self.dim,
            data,
        }
    }

    /// Per-pixel concatenation of stacks sharing a spatial shape.
    pub fn concat(parts: &[&FeatureStack]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Empty("nothing to concatenate".into()))?;
        let (rows, cols) = (first.rows, first.cols);
        if parts.iter().any(|s| s.rows != rows || s.cols != cols) {
            return Err(Error::Dimension("concatenated stacks differ in shape".into()));
        }
        let dim: usize = parts.iter().map(|s| s.dim).sum();
        let mut data = Vec::with_capacity(rows * cols * dim);
        for p in 0..rows * cols {
            for s in parts {
                data.extend_from_slice(s.pixel(p));
            }
        }
        Ok(Self {
            rows,
            cols,
            dim,
            data,
        })
    }

    /// Rescales every dimension to [0, 1]; constant dimensions become 0.
    pub fn min_max_scaled(&self) -> Self {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for px in self.data.chunks_exact(self.dim) {
            for (k, &v) in px.iter().enumerate() {
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            }
        }
        let mut data = self.data.clone();
        for px in data.chunks_exact_mut(self.dim) {
            for (k, v) in px.iter_mut().enumerate() {
                let span = hi[k] - lo[k];
                *v = if span > 0.0 { (*v - lo[k]) / span } else { 0.0 };
            }
        }
        Self {
            rows: self.rows,
            cols: self.cols,
            dim: self.dim,
            data,
        }
    }

    /// Narrows to an f32 cube whose wavelength line holds feature indices
    /// 1..=dim, so the stack can be written with [`save_cube`].
    pub fn to_cube(&self) -> Result<HyperCube> {
        let wavelengths = (1..=self.dim).map(|i| i as f64).collect();
        HyperCube::from_fn(self.rows, self.cols, wavelengths, |p, b| {
            self.data[p * self.dim + b] as f32
        })
    }
}

impl From<&HyperCube> for FeatureStack {
    fn from(cube: &HyperCube) -> Self {
        cube.to_features()
    }
}

/// Non-overlapping, equally sized tiles laid out row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchGrid {
    pub patch_rows: usize,
    pub patch_cols: usize,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub origins: Vec<(usize, usize)>,
}

impl PatchGrid {
    pub fn count(&self) -> usize {
        self.origins.len()
    }
}

/// Tiles an image into whole patches; the remainder margin at the bottom and
/// right is dropped.
pub fn tile(rows: usize, cols: usize, patch_rows: usize, patch_cols: usize) -> Result<PatchGrid> {
    if patch_rows == 0 || patch_cols == 0 {
        return Err(Error::InvalidParameter("patch dimensions must be positive".into()));
    }
    if patch_rows > rows || patch_cols > cols {
        return Err(Error::InvalidParameter(format!(
            "patch {patch_rows}x{patch_cols} larger than image {rows}x{cols}"
        )));
    }
    let grid_rows = rows / patch_rows;
    let grid_cols = cols / patch_cols;
    let origins = (0..grid_rows)
        .flat_map(|i| (0..grid_cols).map(move |j| (i * patch_rows, j * patch_cols)))
        .collect();
    Ok(PatchGrid {
        patch_rows,
        patch_cols,
        grid_rows,
        grid_cols,
        origins,
    })
}

/// Divides every band by the matching entry of a positive reference spectrum
/// (e.g. the lamp spectrum).
pub fn band_normalize(cube: &HyperCube, reference: &[f64]) -> Result<HyperCube> {
    if reference.len() != cube.bands {
        return Err(Error::Dimension(format!(
            "reference has {} entries for {} bands",
            reference.len(),
            cube.bands
        )));
    }
    if let Some(i) = reference.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "reference entry {i} must be positive and finite, got {}",
            reference[i]
        )));
    }
    let npix = cube.pixel_count();
    let mut data = cube.data.clone();
    for (b, plane) in data.chunks_exact_mut(npix).enumerate() {
        let r = reference[b];
        for v in plane {
            *v = (*v as f64 / r) as f32;
        }
    }
    HyperCube::new(cube.rows, cube.cols, cube.bands, cube.wavelengths.clone(), data)
}

/// Dimensions parsed from a cube header.
#[derive(Debug, Clone, PartialEq)]
pub struct CubeHeader {
    pub rows: usize,
    pub cols: usize,
    pub bands: usize,
    pub wavelengths: Vec<f64>,
    /// Byte offset at which the sample payload starts.
    pub payload_offset: usize,
}

impl CubeHeader {
    pub fn payload_len(&self) -> usize {
        self.rows * self.cols * self.bands * 4
    }
}

/// Parses the two text lines that open a cube file.
pub fn parse_cube_header(bytes: &[u8]) -> Result<CubeHeader> {
    let first_nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::MalformedHeader("missing header line".into()))?;
    let second_nl = bytes[first_nl + 1..]
        .iter()
        .position(|&b| b == b'\n')
        .map(|i| first_nl + 1 + i)
        .ok_or_else(|| Error::MalformedHeader("missing wavelength line".into()))?;
    let line = std::str::from_utf8(&bytes[..first_nl])
        .map_err(|_| Error::MalformedHeader("header is not utf-8".into()))?;
    let mut fields = line.split_ascii_whitespace();
    if fields.next() != Some(CUBE_MAGIC) {
        return Err(Error::MalformedHeader(format!("expected `{CUBE_MAGIC}` magic")));
    }
    let mut dim = |name: &str| -> Result<usize> {
        let tok = fields
            .next()
            .ok_or_else(|| Error::MalformedHeader(format!("missing {name}")))?;
        let v: usize = tok
            .parse()
            .map_err(|_| Error::MalformedHeader(format!("bad {name} `{tok}`")))?;
        if v == 0 {
            return Err(Error::MalformedHeader(format!("{name} must be positive")));
        }
        Ok(v)
    };
    let rows = dim("rows")?;
    let cols = dim("cols")?;
    let bands = dim("bands")?;
    if fields.next().is_some() {
        return Err(Error::MalformedHeader("trailing header fields".into()));
    }
    let wl_line = std::str::from_utf8(&bytes[first_nl + 1..second_nl])
        .map_err(|_| Error::MalformedHeader("wavelength line is not utf-8".into()))?;
    let wavelengths = wl_line
        .split_ascii_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::MalformedHeader(format!("bad wavelength `{t}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    if wavelengths.len() != bands {
        return Err(Error::MalformedHeader(format!(
            "{} wavelengths for {bands} bands",
            wavelengths.len()
        )));
    }
    check_wavelengths(&wavelengths)?;
    Ok(CubeHeader {
        rows,
        cols,
        bands,
        wavelengths,
        payload_offset: second_nl + 1,
    })
}

/// Decodes a cube from its full file contents.
pub fn decode_cube(bytes: &[u8]) -> Result<HyperCube> {
    let header = parse_cube_header(bytes)?;
    let payload = &bytes[header.payload_offset..];
    if payload.len() != header.payload_len() {
        return Err(Error::PayloadSize {
            expected: header.payload_len(),
            found: payload.len(),
        });
    }
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    HyperCube::new(header.rows, header.cols, header.bands, header.wavelengths, data)
}

/// Encodes a cube into the on-disk byte layout.
pub fn encode_cube(cube: &HyperCube) -> Vec<u8> {
    let mut out = format!("{CUBE_MAGIC} {} {} {}\n", cube.rows, cube.cols, cube.bands).into_bytes();
    let wl: Vec<String> = cube.wavelengths.iter().map(|w| w.to_string()).collect();
    out.extend_from_slice(wl.join(" ").as_bytes());
    out.push(b'\n');
    out.reserve(cube.data.len() * 4);
    for v in &cube.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn load_cube(path: impl AsRef<Path>) -> Result<HyperCube> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_cube(&bytes)
}

pub fn save_cube(cube: &HyperCube, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_cube(cube)).map_err(|e| Error::io(path, e))
}

/// Encodes a label map as binary PGM.
pub fn encode_label_map(map: &LabelMap) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", map.cols, map.rows).into_bytes();
    out.extend_from_slice(&map.labels);
    out
}

/// Decodes a binary PGM label map; comments in the header are allowed.
pub fn decode_label_map(bytes: &[u8]) -> Result<LabelMap> {
    let mut pos = 0usize;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        // skip whitespace and comments
        while pos < bytes.len() {
            if bytes[pos].is_ascii_whitespace() {
                pos += 1;
            } else if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::MalformedHeader("truncated PGM header".into()));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if tokens[0] != "P5" {
        return Err(Error::MalformedHeader(format!("expected P5, found `{}`", tokens[0])));
    }
    let num = |t: &str| -> Result<usize> {
        t.parse()
            .map_err(|_| Error::MalformedHeader(format!("bad PGM field `{t}`")))
    };
    let cols = num(&tokens[1])?;
    let rows = num(&tokens[2])?;
    let maxval = num(&tokens[3])?;
    if maxval != 255 {
        return Err(Error::MalformedHeader(format!("maxval {maxval}, expected 255")));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let raster = bytes.get(pos..).unwrap_or(&[]);
    if raster.len() != rows * cols {
        return Err(Error::PayloadSize {
            expected: rows * cols,
            found: raster.len(),
        });
    }
    LabelMap::new(rows, cols, raster.to_vec())
}

pub fn load_label_map(path: impl AsRef<Path>) -> Result<LabelMap> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_label_map(&bytes)
}

pub fn save_label_map(map: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_label_map(map)).map_err(|e| Error::io(path, e))
}

/// Writes an 8-bit RGB raster as binary PPM (`P6`).
pub fn save_ppm(path: impl AsRef<Path>, rows: usize, cols: usize, pixels: &[[u8; 3]]) -> Result<()> {
    let path = path.as_ref();
    if pixels.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "{} pixels for a {rows}x{cols} image",
            pixels.len()
        )));
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut buf = format!("P6\n{cols} {rows}\n255\n").into_bytes();
    buf.reserve(pixels.len() * 3);
    for px in pixels {
        buf.extend_from_slice(px);
    }
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_cube(rows: usize, cols: usize, bands: usize) -> HyperCube {
        let n = rows * cols * bands;
        let wl = (0..bands).map(|b| 450.0 + b as f64).collect();
        HyperCube::new(rows, cols, bands, wl, (0..n).map(|v| v as f32).collect()).unwrap()
    }

    #[test]
    fn round_trip_2x2x3() {
        let cube = ramp_cube(2, 2, 3);
        let back = decode_cube(&encode_cube(&cube)).unwrap();
        assert_eq!(back.data(), &(0..12).map(|v| v as f32).collect::<Vec<_>>()[..]);
        assert_eq!(back, cube);
    }

    #[test]
    fn short_payload_is_size_error() {
        let cube = ramp_cube(2, 2, 3);
        let mut bytes = encode_cube(&cube);
        bytes.truncate(bytes.len() - 8);
        assert!(matches!(decode_cube(&bytes), Err(Error::PayloadSize { expected: 48, found: 40 })));
    }

    #[test]
    fn zero_cube_layout() {
        let wl = vec![500.0, 600.0];
        let cube = HyperCube::new(4, 4, 2, wl, vec![0.0; 32]).unwrap();
        let bytes = encode_cube(&cube);
        let header = b"HSCUBE1 4 4 2\n500 600\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(bytes.len(), header.len() + 128);
        assert!(bytes[header.len()..].iter().all(|&b| b == 0));
    }

    #[test]
    fn full_size_header() {
        let wl: Vec<String> = (0..351).map(|b| (450 + b).to_string()).collect();
        let text = format!("HSCUBE1 1384 1035 351\n{}\n", wl.join(" "));
        let h = parse_cube_header(text.as_bytes()).unwrap();
        assert_eq!((h.rows, h.cols, h.bands), (1384, 1035, 351));
        assert_eq!(h.payload_len(), 1384 * 1035 * 351 * 4);
        assert_eq!(h.wavelengths[350], 800.0);
    }

    #[test]
    fn header_errors_are_distinct() {
        assert!(matches!(decode_cube(b"HSCUBE2 1 1 1\n500\n\0\0\0\0"), Err(Error::MalformedHeader(_))));
        assert!(matches!(decode_cube(b"HSCUBE1 1 1 x\n500\n\0\0\0\0"), Err(Error::MalformedHeader(_))));
        assert!(matches!(
            decode_cube(b"HSCUBE1 1 1 2\n600 500\n\0\0\0\0\0\0\0\0"),
            Err(Error::NonIncreasingWavelengths(1))
        ));
        let mut bytes = b"HSCUBE1 1 1 1\n500\n".to_vec();
        bytes.extend_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode_cube(&bytes), Err(Error::NonFinite(0))));
    }

    #[test]
    fn tile_examples() {
        let g = tile(1384, 1035, 230, 258).unwrap();
        assert_eq!((g.grid_rows, g.grid_cols, g.count()), (6, 4, 24));
        let last = g.origins.last().unwrap();
        assert_eq!((last.0 + 230, last.1 + 258), (1380, 1032));
        assert_eq!(tile(230, 258, 230, 258).unwrap().origins, vec![(0, 0)]);
        assert_eq!(tile(459, 517, 230, 258).unwrap().count(), 2);
        assert!(tile(100, 100, 101, 5).is_err());
    }

    #[test]
    fn tile_count_exhaustive() {
        for rows in 1..=20 {
            for cols in 1..=20 {
                for pr in 1..=rows {
                    for pc in 1..=cols {
                        let g = tile(rows, cols, pr, pc).unwrap();
                        assert_eq!(g.count(), (rows / pr) * (cols / pc));
                        for &(r, c) in &g.origins {
                            assert!(r + pr <= rows && c + pc <= cols);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn band_normalize_examples() {
        let cube = ramp_cube(3, 2, 4);
        assert_eq!(band_normalize(&cube, &[1.0; 4]).unwrap(), cube);
        let two = HyperCube::new(2, 2, 2, vec![1.0, 2.0], vec![2.0; 8]).unwrap();
        let out = band_normalize(&two, &[2.0, 2.0]).unwrap();
        assert!(out.data().iter().all(|&v| v == 1.0));
        assert!(band_normalize(&two, &[1.0, 0.0]).is_err());
        assert!(band_normalize(&two, &[1.0, -3.0]).is_err());
    }

    #[test]
    fn label_map_values() {
        let map = LabelMap::filled(3, 5, LabelMap::UNLABELED).unwrap();
        assert_eq!(decode_label_map(&encode_label_map(&map)).unwrap(), map);
        let mut bytes = b"P5\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 7]);
        assert!(matches!(
            decode_label_map(&bytes),
            Err(Error::LabelRange { index: 1, value: 7 })
        ));
        let commented = b"P5\n# made by hand\n2 1\n255\n\x00\x01";
        assert_eq!(decode_label_map(commented).unwrap().labels(), &[0, 1]);
    }

    #[test]
    fn crop_and_paste() {
        let cube = ramp_cube(4, 5, 2);
        let sub = cube.crop((1, 2), 2, 3).unwrap();
        assert_eq!(sub.sample(0, 0), cube.sample(7, 0));
        assert_eq!(sub.sample(5, 1), cube.sample(2 * 5 + 4, 1));
        let mut map = LabelMap::filled(4, 5, 255).unwrap();
        let patch = LabelMap::filled(2, 3, 1).unwrap();
        map.paste((1, 2), &patch).unwrap();
        assert_eq!(map.crop((1, 2), 2, 3).unwrap(), patch);
        assert_eq!(map.labels().iter().filter(|&&v| v == 1).count(), 6);
    }

    #[test]
    fn feature_stack_transpose_twice() {
        let f = ramp_cube(3, 4, 2).to_features();
        assert_eq!(f.transpose().transpose(), f);
        // (r=0, c=1) of the transpose is (r=1, c=0) of the original
        assert_eq!(f.transpose().pixel(1), f.pixel(4));
    }
}
