//! Dense 2D grids and the on-disk formats used for images, masks and float fields.
//!
//! Images are kept on the raw 8-bit intensity scale (0..=255) as `f64`.
//! Lossless persistence of non-image fields (bias, level sets) uses the
//! `F64FIELD` dump: an ASCII header line `F64FIELD <width> <height>\n`
//! followed by `width * height` little-endian IEEE-754 doubles in row-major order.

use crate::error::{Error, Result};

/// A dense, row-major grid of finite `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ScalarField {
    /// A `width x height` field with every pixel set to `fill`.
    pub fn new(width: usize, height: usize, fill: f64) -> Result<Self> {
        check_dims(width, height)?;
        if !fill.is_finite() {
            return Err(Error::invalid("fill value must be finite"));
        }
        Ok(ScalarField {
            width,
            height,
            values: vec![fill; width * height],
        })
    }

    pub fn from_vec(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        if values.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} values supplied for a {}x{} field",
                values.len(),
                width,
                height
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value at pixel ({}, {})",
                i % width,
                i / width
            )));
        }
        Ok(ScalarField {
            width,
            height,
            values,
        })
    }

    /// Builds a field by evaluating `f(x, y)` at every pixel.
    pub fn from_fn<F>(width: usize, height: usize, f: F) -> Result<Self>
    where
        F: Fn(usize, usize) -> f64,
    {
        check_dims(width, height)?;
        let values = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self::from_vec(width, height, values)
    }

    /// Unchecked constructor for internal kernels whose outputs are finite by construction.
    pub(crate) fn from_raw(width: usize, height: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), width * height);
        ScalarField {
            width,
            height,
            values,
        }
    }

    /// A field of the same shape computed row by row (in parallel with the `parallel` feature).
    pub(crate) fn build_rows<F>(width: usize, height: usize, f: F) -> Self
    where
        F: Fn(usize, &mut [f64]) + Sync + Send,
    {
        let mut values = vec![0.0; width * height];
        crate::exec::for_each_row(&mut values, width, f);
        ScalarField::from_raw(width, height, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.values[y * self.width..(y + 1) * self.width]
    }

    pub fn same_shape(&self, other: &ScalarField) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn check_shape(&self, other: &ScalarField, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "{what}: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }

    /// Returns a copy with pixel `(x, y)` replaced.
    pub fn with_value(&self, x: usize, y: usize, value: f64) -> Result<Self> {
        if x >= self.width || y >= self.height {
            return Err(Error::invalid(format!("pixel ({x}, {y}) out of bounds")));
        }
        if !value.is_finite() {
            return Err(Error::invalid("value must be finite"));
        }
        let mut out = self.clone();
        out.values[y * self.width + x] = value;
        Ok(out)
    }

    /// Applies `f` to every pixel in row-major order.
    pub fn map<F>(&self, mut f: F) -> ScalarField
    where
        F: FnMut(f64) -> f64,
    {
        ScalarField::from_raw(
            self.width,
            self.height,
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Elementwise combination of two equally shaped fields.
    pub fn zip_map<F>(&self, other: &ScalarField, f: F) -> Result<ScalarField>
    where
        F: Fn(f64, f64) -> f64,
    {
        self.check_shape(other, "zip_map")?;
        Ok(ScalarField::from_raw(
            self.width,
            self.height,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn scale(&self, factor: f64) -> ScalarField {
        self.map(|v| v * factor)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::invalid(format!(
            "field dimensions must be positive, got {width}x{height}"
        )));
    }
    Ok(())
}

/// One class index per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl LabelMap {
    pub fn from_vec(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        check_dims(width, height)?;
        if labels.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} labels supplied for a {}x{} map",
                labels.len(),
                width,
                height
            )));
        }
        Ok(LabelMap {
            width,
            height,
            labels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    /// Pixel set of one class as a boolean mask.
    pub fn region(&self, class: u8) -> Vec<bool> {
        self.labels.iter().map(|&l| l == class).collect()
    }

    pub fn count(&self, class: u8) -> usize {
        self.labels.iter().filter(|&&l| l == class).count()
    }

    pub fn same_shape(&self, other: &LabelMap) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Gray-level rendering: class `k` of `n_classes` maps to `k * 255 / (n_classes - 1)`.
    pub fn to_gray(&self, n_classes: usize) -> ScalarField {
        let step = 255.0 / (n_classes.max(2) - 1) as f64;
        ScalarField::from_raw(
            self.width,
            self.height,
            self.labels.iter().map(|&l| (l as f64 * step).round()).collect(),
        )
    }

    /// Inverse of [`LabelMap::to_gray`]: each gray level snaps to the nearest class level.
    pub fn from_gray(gray: &ScalarField, n_classes: usize) -> Result<Self> {
        if !(2..=255).contains(&n_classes) {
            return Err(Error::invalid(format!(
                "class count must be in 2..=255, got {n_classes}"
            )));
        }
        let step = 255.0 / (n_classes - 1) as f64;
        let labels = gray
            .values()
            .iter()
            .map(|&g| ((g / step).round().clamp(0.0, (n_classes - 1) as f64)) as u8)
            .collect();
        LabelMap::from_vec(gray.width(), gray.height(), labels)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn integer(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::format(start, format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(start, format!("{what} does not fit in an integer")))
    }
}

/// Decodes an 8-bit grayscale PGM, ASCII (`P2`) or binary (`P5`).
pub fn read_pgm(bytes: &[u8]) -> Result<ScalarField> {
    if bytes.len() < 2 {
        return Err(Error::format(0, "missing magic number"));
    }
    let binary = match &bytes[..2] {
        b"P2" => false,
        b"P5" => true,
        other => {
            return Err(Error::format(
                0,
                format!(
                    "unsupported magic {:?}, expected P2 or P5",
                    String::from_utf8_lossy(other)
                ),
            ))
        }
    };
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.integer("width")?;
    let height = cur.integer("height")?;
    let maxval_at = cur.pos;
    let maxval = cur.integer("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::format(maxval_at, "zero image dimension"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::format(
            maxval_at,
            format!("maxval {maxval} unsupported, must be in 1..=255"),
        ));
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::format(0, "image dimensions overflow"))?;

    let mut values = Vec::with_capacity(n);
    if binary {
        // Exactly one whitespace byte separates the header from the raster.
        if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
            return Err(Error::format(cur.pos, "missing raster separator"));
        }
        let start = cur.pos + 1;
        let available = bytes.len().saturating_sub(start);
        if available < n {
            return Err(Error::format(
                bytes.len(),
                format!("truncated raster: {available} of {n} bytes"),
            ));
        }
        for (i, &b) in bytes[start..start + n].iter().enumerate() {
            if b as usize > maxval {
                return Err(Error::format(start + i, "sample exceeds maxval"));
            }
            values.push(b as f64);
        }
    } else {
        for _ in 0..n {
            cur.skip_space_and_comments();
            if cur.pos >= bytes.len() {
                return Err(Error::format(
                    cur.pos,
                    format!("truncated raster: {} of {n} samples", values.len()),
                ));
            }
            let at = cur.pos;
            let v = cur.integer("sample")?;
            if v > maxval {
                return Err(Error::format(at, "sample exceeds maxval"));
            }
            values.push(v as f64);
        }
    }
    Ok(ScalarField::from_raw(width, height, values))
}

/// Encodes a field as binary PGM (`P5`, maxval 255), rounding half-up.
///
/// With `clamp` set, values are clamped into `[0, 255]` first; otherwise any
/// value outside that interval is a range error.
pub fn write_pgm(f: &ScalarField, clamp: bool) -> Result<Vec<u8>> {
    let header = format!("P5\n{} {}\n255\n", f.width(), f.height());
    let mut out = Vec::with_capacity(header.len() + f.len());
    out.extend_from_slice(header.as_bytes());
    for (i, &v) in f.values().iter().enumerate() {
        let v = if clamp {
            v.clamp(0.0, 255.0)
        } else if !(0.0..=255.0).contains(&v) {
            return Err(Error::Range {
                x: i % f.width(),
                y: i / f.width(),
                value: v,
            });
        } else {
            v
        };
        out.push((v + 0.5).floor().min(255.0) as u8);
    }
    Ok(out)
}

const DUMP_MAGIC: &str = "F64FIELD";

/// Lossless binary dump of a field.
pub fn write_field_dump(f: &ScalarField) -> Vec<u8> {
    let header = format!("{DUMP_MAGIC} {} {}\n", f.width(), f.height());
    let mut out = Vec::with_capacity(header.len() + 8 * f.len());
    out.extend_from_slice(header.as_bytes());
    for v in f.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn read_field_dump(bytes: &[u8]) -> Result<ScalarField> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::format(bytes.len(), "missing header terminator"))?;
    let header = std::str::from_utf8(&bytes[..nl])
        .map_err(|e| Error::format(e.valid_up_to(), "header is not ASCII"))?;
    let mut parts = header.split(' ');
    if parts.next() != Some(DUMP_MAGIC) {
        return Err(Error::format(0, "expected F64FIELD header"));
    }
    let mut dim = |what: &str| -> Result<usize> {
        parts
            .next()
            .and_then(|s| s.parse::<usize>().ok())
            .filter(|&d| d > 0)
            .ok_or_else(|| Error::format(0, format!("bad {what} in header")))
    };
    let width = dim("width")?;
    let height = dim("height")?;
    if parts.next().is_some() {
        return Err(Error::format(0, "trailing tokens in header"));
    }
    let n = width * height;
    let payload = &bytes[nl + 1..];
    if payload.len() != 8 * n {
        return Err(Error::format(
            bytes.len(),
            format!("payload is {} bytes, expected {}", payload.len(), 8 * n),
        ));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::format(nl + 1 + 8 * i, "non-finite value"));
    }
    Ok(ScalarField::from_raw(width, height, values))
}

/// Affine min-max stretch onto `[0, 255]`; a constant field maps to 128.
pub fn normalize_display(f: &ScalarField) -> ScalarField {
    let (lo, hi) = (f.min(), f.max());
    if hi <= lo {
        return f.map(|_| 128.0);
    }
    let span = hi - lo;
    f.map(|v| ((v - lo) / span * 255.0).clamp(0.0, 255.0))
}
