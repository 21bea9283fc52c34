//! The constant disk indicator kernel and its truncated convolution.
//!
//! `conv_disk` sums a field over every integer offset `(dx, dy)` with
//! `dx^2 + dy^2 <= rho^2`, skipping offsets that leave the image. There is no
//! normalization; the window area at each pixel is available separately from
//! [`area_field`]. Sums are evaluated with per-row prefix sums, so the cost is
//! `O(pixels * (2 * rho + 1))` independent of the disk area.

use crate::error::{Error, Result};
use crate::field::ScalarField;

/// Integer offsets inside a closed Euclidean disk of radius `rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiskKernel {
    rho: f64,
    offsets: Vec<(i64, i64)>,
    /// `(dy, half_width)`: row `dy` of the disk covers `dx` in `-half_width..=half_width`.
    spans: Vec<(i64, i64)>,
}

impl DiskKernel {
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn offsets(&self) -> &[(i64, i64)] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Largest `|dx|` or `|dy|` present in the kernel.
    pub fn reach(&self) -> i64 {
        self.spans.last().map(|&(dy, _)| dy).unwrap_or(0)
    }
}

/// Enumerates the lattice points of the closed disk of radius `rho`.
pub fn disk_offsets(rho: f64) -> Result<DiskKernel> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::invalid(format!("disk radius must be positive, got {rho}")));
    }
    let r2 = rho * rho;
    let reach = rho.floor() as i64;
    let mut spans = Vec::new();
    let mut offsets = Vec::new();
    for dy in -reach..=reach {
        // Widest dx with dx^2 + dy^2 <= rho^2, computed in integers to avoid sqrt rounding.
        let rem = r2 - (dy * dy) as f64;
        let mut hw = rem.sqrt().floor() as i64;
        while ((hw + 1) * (hw + 1)) as f64 <= rem {
            hw += 1;
        }
        while hw > 0 && (hw * hw) as f64 > rem {
            hw -= 1;
        }
        spans.push((dy, hw));
        offsets.extend((-hw..=hw).map(|dx| (dx, dy)));
    }
    Ok(DiskKernel {
        rho,
        offsets,
        spans: spans.into_iter().filter(|&(dy, _)| dy >= 0).collect(),
    })
}

struct RowPrefix {
    width: usize,
    /// `(width + 1)` entries per row; entry `i` holds the sum of the first `i` samples.
    sums: Vec<f64>,
}

impl RowPrefix {
    fn new(f: &ScalarField) -> Self {
        let width = f.width();
        let mut sums = Vec::with_capacity((width + 1) * f.height());
        for y in 0..f.height() {
            let mut acc = 0.0;
            sums.push(0.0);
            for &v in f.row(y) {
                acc += v;
                sums.push(acc);
            }
        }
        RowPrefix { width, sums }
    }

    /// Sum of row `y` over the inclusive column range `lo..=hi`.
    #[inline]
    fn range(&self, y: usize, lo: usize, hi: usize) -> f64 {
        let base = y * (self.width + 1);
        self.sums[base + hi + 1] - self.sums[base + lo]
    }
}

fn conv_row(prefix: &RowPrefix, k: &DiskKernel, height: usize, y: usize, out: &mut [f64]) {
    let width = out.len() as i64;
    for (x, slot) in out.iter_mut().enumerate() {
        let x = x as i64;
        let mut acc = 0.0;
        for &(dy, hw) in &k.spans {
            let lo = (x - hw).max(0) as usize;
            let hi = (x + hw).min(width - 1) as usize;
            let up = y as i64 - dy;
            if up >= 0 {
                acc += prefix.range(up as usize, lo, hi);
            }
            let down = y + dy as usize;
            if dy > 0 && down < height {
                acc += prefix.range(down, lo, hi);
            }
        }
        *slot = acc;
    }
}

/// Truncated disk convolution: `out(x) = sum of f(x + o)` over kernel offsets `o` landing inside the image.
pub fn conv_disk(f: &ScalarField, k: &DiskKernel) -> ScalarField {
    let prefix = RowPrefix::new(f);
    let height = f.height();
    ScalarField::build_rows(f.width(), height, |y, row| {
        conv_row(&prefix, k, height, y, row)
    })
}

/// Single-threaded [`conv_disk`], regardless of the `parallel` feature.
pub fn conv_disk_sequential(f: &ScalarField, k: &DiskKernel) -> ScalarField {
    let prefix = RowPrefix::new(f);
    let height = f.height();
    let mut values = vec![0.0; f.len()];
    for (y, row) in values.chunks_mut(f.width()).enumerate() {
        conv_row(&prefix, k, height, y, row);
    }
    ScalarField::from_raw(f.width(), height, values)
}

/// Number of kernel offsets landing inside a `width x height` image at each pixel.
pub fn area_field(width: usize, height: usize, k: &DiskKernel) -> Result<ScalarField> {
    let ones = ScalarField::new(width, height, 1.0)?;
    Ok(conv_disk(&ones, k))
}
