//! Locally statistical data term: smoothed indicators, soft phase memberships,
//! the per-class force fields and the closed-form parameter updates.
//!
//! Every pixel `y` is modelled as `I(y) ~ N(b(x) c_i, sigma_i^2)` for each
//! window centre `x` within distance `rho`. With soft memberships `M_i` the
//! energy is
//!
//! ```text
//! E = sum_i sum_y d_i(y) M_i(y),
//! d_i(y) = sum_{x : |x - y| <= rho} [ log sigma_i + (I(y) - b(x) c_i)^2 / (2 sigma_i^2) ]
//! ```
//!
//! Expanding the square turns every window integral into one of three disk
//! convolutions shared by all classes: the window area `A = K * 1`, `K * b`
//! and `K * b^2` (see [`BiasMoments`]).

use crate::error::{Error, Result};
use crate::exec;
use crate::field::{LabelMap, ScalarField};
use crate::kernel::{area_field, conv_disk, DiskKernel};
use std::f64::consts::PI;

/// Lower clamp applied to every class deviation.
pub const SIGMA_FLOOR: f64 = 1e-4;
/// Lower clamp applied to the estimated bias field.
pub const BIAS_FLOOR: f64 = 1e-6;
/// Class mass below which a class counts as empty.
pub const MASS_EPSILON: f64 = 1e-12;

/// Arctan-smoothed Heaviside step, strictly inside `(0, 1)`.
#[inline]
pub fn heaviside(z: f64, epsilon: f64) -> f64 {
    0.5 * (1.0 + (2.0 / PI) * (z / epsilon).atan())
}

/// Derivative of [`heaviside`] with respect to `z`.
#[inline]
pub fn dirac(z: f64, epsilon: f64) -> f64 {
    epsilon / (PI * (epsilon * epsilon + z * z))
}

/// Level set functions: one for two classes, two for four classes.
#[derive(Debug, Clone, PartialEq)]
pub enum PhaseState {
    Two(ScalarField),
    Four(ScalarField, ScalarField),
}

impl PhaseState {
    pub fn four(phi1: ScalarField, phi2: ScalarField) -> Result<Self> {
        phi1.check_shape(&phi2, "four-phase level sets")?;
        Ok(PhaseState::Four(phi1, phi2))
    }

    pub fn n_classes(&self) -> usize {
        match self {
            PhaseState::Two(_) => 2,
            PhaseState::Four(..) => 4,
        }
    }

    pub fn level_sets(&self) -> Vec<&ScalarField> {
        match self {
            PhaseState::Two(phi) => vec![phi],
            PhaseState::Four(a, b) => vec![a, b],
        }
    }

    pub fn width(&self) -> usize {
        self.level_sets()[0].width()
    }

    pub fn height(&self) -> usize {
        self.level_sets()[0].height()
    }

    /// Applies `f` to every level set.
    pub fn map<F>(&self, mut f: F) -> Result<PhaseState>
    where
        F: FnMut(&ScalarField) -> Result<ScalarField>,
    {
        Ok(match self {
            PhaseState::Two(phi) => PhaseState::Two(f(phi)?),
            PhaseState::Four(a, b) => PhaseState::Four(f(a)?, f(b)?),
        })
    }

    /// Hard labels. Two-phase: class 0 where `phi >= 0`, class 1 elsewhere.
    /// Four-phase: the argmax of the memberships, i.e. `2 [phi1 < 0] + [phi2 < 0]`
    /// with ties at zero resolved to the lower index.
    pub fn labels(&self) -> LabelMap {
        let labels = match self {
            PhaseState::Two(phi) => phi.values().iter().map(|&v| (v < 0.0) as u8).collect(),
            PhaseState::Four(a, b) => a
                .values()
                .iter()
                .zip(b.values())
                .map(|(&p, &q)| 2 * (p < 0.0) as u8 + (q < 0.0) as u8)
                .collect(),
        };
        LabelMap::from_vec(self.width(), self.height(), labels).expect("shape of a valid field")
    }
}

/// Class constants, class deviations and the multiplicative bias field.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub c: Vec<f64>,
    pub sigma: Vec<f64>,
    pub bias: ScalarField,
}

impl ModelParams {
    pub fn n_classes(&self) -> usize {
        self.c.len()
    }
}

/// The three window sums every update shares: `A = K * 1`, `K * b` and `K * b^2`.
#[derive(Debug, Clone)]
pub struct BiasMoments {
    pub area: ScalarField,
    pub kb: ScalarField,
    pub kb2: ScalarField,
}

impl BiasMoments {
    pub fn new(bias: &ScalarField, k: &DiskKernel) -> Self {
        let area = area_field(bias.width(), bias.height(), k).expect("bias has valid dimensions");
        Self::with_area(area, bias, k)
    }

    /// Reuses a precomputed window-area field.
    pub fn with_area(area: ScalarField, bias: &ScalarField, k: &DiskKernel) -> Self {
        BiasMoments {
            area,
            kb: conv_disk(bias, k),
            kb2: conv_disk(&bias.map(|b| b * b), k),
        }
    }
}

/// Soft memberships; they sum to one at every pixel.
pub fn memberships(phi: &PhaseState, epsilon: f64) -> Vec<ScalarField> {
    match phi {
        PhaseState::Two(phi) => {
            let h = phi.map(|v| heaviside(v, epsilon));
            let g = h.map(|v| 1.0 - v);
            vec![h, g]
        }
        PhaseState::Four(p1, p2) => {
            let h1 = p1.map(|v| heaviside(v, epsilon));
            let h2 = p2.map(|v| heaviside(v, epsilon));
            let prod = |f: &dyn Fn(f64, f64) -> f64| h1.zip_map(&h2, f).expect("same shape");
            vec![
                prod(&|a, b| a * b),
                prod(&|a, b| a * (1.0 - b)),
                prod(&|a, b| (1.0 - a) * b),
                prod(&|a, b| (1.0 - a) * (1.0 - b)),
            ]
        }
    }
}

/// Indicator memberships of the sign partition, the `epsilon -> 0` limit of
/// [`memberships`]. Class order matches [`PhaseState::labels`].
pub fn sharp_memberships(phi: &PhaseState) -> Vec<ScalarField> {
    let labels = phi.labels();
    let (w, h) = (phi.width(), phi.height());
    (0..phi.n_classes() as u8)
        .map(|class| {
            let v = labels.labels().iter().map(|&l| f64::from(u8::from(l == class))).collect();
            ScalarField::from_raw(w, h, v)
        })
        .collect()
}

fn check_inputs(image: &ScalarField, m: &[ScalarField], other: &ScalarField) -> Result<()> {
    if m.is_empty() {
        return Err(Error::invalid("no memberships supplied"));
    }
    for mi in m {
        image.check_shape(mi, "membership")?;
    }
    image.check_shape(other, "image vs field")
}

/// Weighted pixel sum `sum_y f(y)` computed by deterministic row partials.
fn pixel_sum<F>(width: usize, height: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    exec::sum_rows(height, |y| (y * width..(y + 1) * width).map(&f).sum())
}

/// Per-class closed-form constant; `Err` for a class without mass.
pub fn update_c_per_class(
    image: &ScalarField,
    m: &[ScalarField],
    moments: &BiasMoments,
) -> Vec<Result<f64>> {
    let (w, h) = (image.width(), image.height());
    let (iv, kb, kb2) = (image.values(), moments.kb.values(), moments.kb2.values());
    m.iter()
        .enumerate()
        .map(|(class, mi)| {
            let mv = mi.values();
            let num = pixel_sum(w, h, |i| kb[i] * iv[i] * mv[i]);
            let den = pixel_sum(w, h, |i| kb2[i] * mv[i]);
            if den < MASS_EPSILON {
                Err(Error::DegenerateClass { class })
            } else {
                Ok(num / den)
            }
        })
        .collect()
}

/// Class constants minimizing the energy with memberships and bias fixed:
/// `c_i = sum (K*b) I M_i / sum (K*b^2) M_i`.
pub fn update_c(
    image: &ScalarField,
    m: &[ScalarField],
    bias: &ScalarField,
    k: &DiskKernel,
) -> Result<Vec<f64>> {
    check_inputs(image, m, bias)?;
    update_c_per_class(image, m, &BiasMoments::new(bias, k))
        .into_iter()
        .collect()
}

/// Bias field minimizing the energy pixel by pixel, a normalized convolution:
///
/// ```text
/// b(x) = sum_i (c_i / s_i^2) (K * (I M_i))(x) / sum_i (c_i^2 / s_i^2) (K * M_i)(x)
/// ```
///
/// The result is clamped below at [`BIAS_FLOOR`].
pub fn update_b(
    image: &ScalarField,
    m: &[ScalarField],
    c: &[f64],
    sigma: &[f64],
    k: &DiskKernel,
) -> Result<ScalarField> {
    check_inputs(image, m, image)?;
    if c.len() != m.len() || sigma.len() != m.len() {
        return Err(Error::invalid("parameter count does not match class count"));
    }
    let (w, h) = (image.width(), image.height());
    let mut num = vec![0.0; w * h];
    let mut den = vec![0.0; w * h];
    for ((mi, &ci), &si) in m.iter().zip(c).zip(sigma) {
        let weight = ci / (si * si);
        let im = image.zip_map(mi, |a, b| a * b)?;
        for (acc, v) in num.iter_mut().zip(conv_disk(&im, k).values()) {
            *acc += weight * v;
        }
        for (acc, v) in den.iter_mut().zip(conv_disk(mi, k).values()) {
            *acc += weight * ci * v;
        }
    }
    let mut out = Vec::with_capacity(w * h);
    for (i, (n, d)) in num.into_iter().zip(den).enumerate() {
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::DegenerateBias { x: i % w, y: i / w });
        }
        out.push((n / d).max(BIAS_FLOOR));
    }
    Ok(ScalarField::from_raw(w, h, out))
}

/// Window-summed squared residual of class constant `c` at pixel `i`:
/// `sum_x (I(y) - b(x) c)^2 = I^2 A - 2 I c (K*b) + c^2 (K*b^2)`, clamped at zero.
#[inline]
fn residual(i_val: f64, c: f64, area: f64, kb: f64, kb2: f64) -> f64 {
    (i_val * i_val * area - 2.0 * i_val * c * kb + c * c * kb2).max(0.0)
}

/// Per-class closed-form deviation (already clamped); `Err` for a class without mass.
pub fn update_sigma_per_class(
    image: &ScalarField,
    m: &[ScalarField],
    c: &[f64],
    moments: &BiasMoments,
    floor: f64,
) -> Vec<Result<f64>> {
    let (w, h) = (image.width(), image.height());
    let iv = image.values();
    let (a, kb, kb2) = (
        moments.area.values(),
        moments.kb.values(),
        moments.kb2.values(),
    );
    m.iter()
        .zip(c)
        .enumerate()
        .map(|(class, (mi, &ci))| {
            let mv = mi.values();
            let num = pixel_sum(w, h, |i| mv[i] * residual(iv[i], ci, a[i], kb[i], kb2[i]));
            let den = pixel_sum(w, h, |i| mv[i] * a[i]);
            if den < MASS_EPSILON {
                Err(Error::DegenerateClass { class })
            } else {
                Ok((num / den).sqrt().max(floor))
            }
        })
        .collect()
}

/// Class deviations minimizing the energy with everything else fixed,
/// clamped below at `floor`.
pub fn update_sigma(
    image: &ScalarField,
    m: &[ScalarField],
    bias: &ScalarField,
    c: &[f64],
    k: &DiskKernel,
    floor: f64,
) -> Result<Vec<f64>> {
    check_inputs(image, m, bias)?;
    if c.len() != m.len() {
        return Err(Error::invalid("parameter count does not match class count"));
    }
    update_sigma_per_class(image, m, c, &BiasMoments::new(bias, k), floor)
        .into_iter()
        .collect()
}

/// Force fields `d_i` from precomputed window sums.
pub fn force_fields_with(
    image: &ScalarField,
    c: &[f64],
    sigma: &[f64],
    moments: &BiasMoments,
) -> Vec<ScalarField> {
    let (w, h) = (image.width(), image.height());
    let iv = image.values();
    let (a, kb, kb2) = (
        moments.area.values(),
        moments.kb.values(),
        moments.kb2.values(),
    );
    c.iter()
        .zip(sigma)
        .map(|(&ci, &si)| {
            let log_s = si.ln();
            let inv = 1.0 / (2.0 * si * si);
            ScalarField::build_rows(w, h, |y, row| {
                for (x, slot) in row.iter_mut().enumerate() {
                    let i = y * w + x;
                    *slot = a[i] * log_s + residual(iv[i], ci, a[i], kb[i], kb2[i]) * inv;
                }
            })
        })
        .collect()
}

/// Per-class data costs `d_i(y)`.
pub fn force_fields(
    image: &ScalarField,
    params: &ModelParams,
    k: &DiskKernel,
) -> Result<Vec<ScalarField>> {
    image.check_shape(&params.bias, "image vs bias")?;
    if params.sigma.len() != params.c.len() {
        return Err(Error::invalid("c and sigma lengths differ"));
    }
    let moments = BiasMoments::new(&params.bias, k);
    Ok(force_fields_with(image, &params.c, &params.sigma, &moments))
}

/// `sum_i sum_y d_i(y) M_i(y)`.
pub fn energy_from_forces(d: &[ScalarField], m: &[ScalarField]) -> f64 {
    let (w, h) = (d[0].width(), d[0].height());
    pixel_sum(w, h, |i| {
        d.iter()
            .zip(m)
            .map(|(di, mi)| di.values()[i] * mi.values()[i])
            .sum::<f64>()
    })
}

/// Total energy of a configuration.
pub fn energy(
    image: &ScalarField,
    params: &ModelParams,
    phi: &PhaseState,
    epsilon: f64,
    k: &DiskKernel,
) -> Result<f64> {
    if phi.n_classes() != params.n_classes() {
        return Err(Error::invalid(format!(
            "{} level-set classes but {} class parameters",
            phi.n_classes(),
            params.n_classes()
        )));
    }
    for ls in phi.level_sets() {
        image.check_shape(ls, "image vs level set")?;
    }
    let d = force_fields(image, params, k)?;
    Ok(energy_from_forces(&d, &memberships(phi, epsilon)))
}
