//! Explicit level set updates and the diffusion regularizer.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::model::{dirac, heaviside};

/// Largest regularization step for which the explicit 5-point diffusion is stable.
pub const MAX_DT2: f64 = 0.25;

/// Time steps for evolution (`dt`) and diffusion (`dt2`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams {
    pub dt: f64,
    pub dt2: f64,
}

impl StepParams {
    pub fn new(dt: f64, dt2: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::invalid(format!("evolution step must be positive, got {dt}")));
        }
        check_dt2(dt2)?;
        Ok(StepParams { dt, dt2 })
    }
}

pub fn check_dt2(dt2: f64) -> Result<()> {
    if (0.0..=MAX_DT2).contains(&dt2) {
        Ok(())
    } else {
        Err(Error::StabilityViolation { dt2 })
    }
}

/// One forward-Euler step of `phi_t = (d2 - d1) delta(phi)`.
pub fn step_two_phase(
    phi: &ScalarField,
    d1: &ScalarField,
    d2: &ScalarField,
    dt: f64,
    epsilon: f64,
) -> Result<ScalarField> {
    phi.check_shape(d1, "level set vs d1")?;
    phi.check_shape(d2, "level set vs d2")?;
    let (p, a, b) = (phi.values(), d1.values(), d2.values());
    let w = phi.width();
    Ok(ScalarField::build_rows(w, phi.height(), |y, row| {
        for (x, slot) in row.iter_mut().enumerate() {
            let i = y * w + x;
            *slot = p[i] + dt * (b[i] - a[i]) * dirac(p[i], epsilon);
        }
    }))
}

/// One simultaneous forward-Euler step of the coupled four-phase flow. Both level
/// sets advance from the same input state:
///
/// ```text
/// phi1_t = -[(d1 - d2 - d3 + d4) H(phi2) + d2 - d4] delta(phi1)
/// phi2_t = -[(d1 - d2 - d3 + d4) H(phi1) + d3 - d4] delta(phi2)
/// ```
pub fn step_four_phase(
    phi1: &ScalarField,
    phi2: &ScalarField,
    d: &[ScalarField],
    dt: f64,
    epsilon: f64,
) -> Result<(ScalarField, ScalarField)> {
    four_phase_with(phi1, phi2, d, dt, epsilon, |v| heaviside(v, epsilon))
}

/// [`step_four_phase`] with the coupling weight `H(phi)` replaced by the sign
/// indicator `[phi >= 0]`. The soft weight lets the far side of the other level
/// set leak into the force, which swamps it when one class is much tighter.
pub fn step_four_phase_sharp(
    phi1: &ScalarField,
    phi2: &ScalarField,
    d: &[ScalarField],
    dt: f64,
    epsilon: f64,
) -> Result<(ScalarField, ScalarField)> {
    four_phase_with(phi1, phi2, d, dt, epsilon, |v| f64::from(u8::from(v >= 0.0)))
}

fn four_phase_with(
    phi1: &ScalarField,
    phi2: &ScalarField,
    d: &[ScalarField],
    dt: f64,
    epsilon: f64,
    gate: impl Fn(f64) -> f64 + Sync,
) -> Result<(ScalarField, ScalarField)> {
    if d.len() != 4 {
        return Err(Error::invalid(format!("four force fields expected, got {}", d.len())));
    }
    phi1.check_shape(phi2, "phi1 vs phi2")?;
    for di in d {
        phi1.check_shape(di, "level set vs force")?;
    }
    let (p1, p2) = (phi1.values(), phi2.values());
    let (d1, d2, d3, d4) = (d[0].values(), d[1].values(), d[2].values(), d[3].values());
    let w = phi1.width();
    let h = phi1.height();
    let mixed = |i: usize| d1[i] - d2[i] - d3[i] + d4[i];
    let next1 = ScalarField::build_rows(w, h, |y, row| {
        for (x, slot) in row.iter_mut().enumerate() {
            let i = y * w + x;
            let force = mixed(i) * gate(p2[i]) + d2[i] - d4[i];
            *slot = p1[i] - dt * force * dirac(p1[i], epsilon);
        }
    });
    let next2 = ScalarField::build_rows(w, h, |y, row| {
        for (x, slot) in row.iter_mut().enumerate() {
            let i = y * w + x;
            let force = mixed(i) * gate(p1[i]) + d3[i] - d4[i];
            *slot = p2[i] - dt * force * dirac(p2[i], epsilon);
        }
    });
    Ok((next1, next2))
}

/// How the 5-point stencil treats neighbors beyond the image edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    /// Off-image neighbors take the centre value (zero flux).
    #[default]
    Replicate,
    /// Off-image neighbors wrap around.
    Periodic,
}

/// 5-point Laplacian with zero-flux boundaries.
pub fn laplacian(phi: &ScalarField) -> ScalarField {
    laplacian_with(phi, Boundary::Replicate)
}

pub fn laplacian_with(phi: &ScalarField, boundary: Boundary) -> ScalarField {
    let (w, h) = (phi.width(), phi.height());
    let v = phi.values();
    ScalarField::build_rows(w, h, |y, row| {
        for (x, slot) in row.iter_mut().enumerate() {
            let c = v[y * w + x];
            let at = |xx: usize, yy: usize| v[yy * w + xx];
            let (left, right, up, down) = match boundary {
                Boundary::Replicate => (
                    if x > 0 { at(x - 1, y) } else { c },
                    if x + 1 < w { at(x + 1, y) } else { c },
                    if y > 0 { at(x, y - 1) } else { c },
                    if y + 1 < h { at(x, y + 1) } else { c },
                ),
                Boundary::Periodic => (
                    at((x + w - 1) % w, y),
                    at((x + 1) % w, y),
                    at(x, (y + h - 1) % h),
                    at(x, (y + 1) % h),
                ),
            };
            // Differences first so a constant neighborhood yields exactly zero.
            *slot = (left - c) + (right - c) + (up - c) + (down - c);
        }
    })
}

/// One explicit diffusion step `phi + dt2 * laplacian(phi)`, rejecting unstable steps.
pub fn regularize(phi: &ScalarField, dt2: f64) -> Result<ScalarField> {
    regularize_with(phi, dt2, Boundary::Replicate)
}

pub fn regularize_with(phi: &ScalarField, dt2: f64, boundary: Boundary) -> Result<ScalarField> {
    check_dt2(dt2)?;
    let lap = laplacian_with(phi, boundary);
    phi.zip_map(&lap, |p, l| p + dt2 * l)
}
