//! The alternating solver, its Chan-Vese baseline, and helpers around them.
//!
//! One iteration of [`segment`] performs, in order:
//!
//! 1. class constants `c_i` (closed form),
//! 2. bias field `b` (closed form, normalized convolution),
//! 3. class deviations `sigma_i` (closed form),
//! 4. force fields `d_i`,
//! 5. one explicit level set step, clamped to `[-level_bound, level_bound]`,
//! 6. one diffusion step on every level set,
//!
//! and stops once the fraction of pixels whose level-set sign flipped is at
//! most `stop_tol`. Solving starts from `b = bias_init` (1 by default) and
//! `sigma_i = i`.
//!
//! By default the parameter updates see the sign partition rather than the
//! smoothed memberships, and the level sets are clamped. With raw image
//! intensities the forces are in the thousands, so an unbounded level set is
//! frozen after its first step, and the arctangent Heaviside leaks about
//! `1 / (pi |phi|)` of every pixel into the other class, enough to drag the
//! class estimates toward a degenerate edge/flat split. The same leak through
//! the four-phase coupling weight `H(phi)` is replaced by the sign indicator.
//!
//! A small window lets the bias absorb almost any partition, so the solver
//! also walks a window schedule: it starts at `min(W, H) / 4`, halves down to
//! `rho`, and carries the level sets and parameters across each change. Coarse
//! widths share half of `max_iter` and stop early once stationary.
//! [`SolverConfig::literal`] restores the unmodified single-scale scheme.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::evolve::{check_dt2, regularize, step_four_phase, step_four_phase_sharp, step_two_phase};
use crate::field::{LabelMap, ScalarField};
use crate::kernel::{area_field, disk_offsets, DiskKernel};
use crate::model::{
    energy_from_forces, force_fields_with, memberships, sharp_memberships, update_b,
    update_c_per_class, update_sigma_per_class, BiasMoments, PhaseState, BIAS_FLOOR, SIGMA_FLOOR,
};

/// Default magnitude cap on the level sets after each evolution step.
pub const DEFAULT_LEVEL_BOUND: f64 = 10.0;

/// Consecutive iterations a class may stay empty before the solver gives up.
pub const MAX_EMPTY_STREAK: usize = 50;

/// Initial contour. The level set is `+1` strictly inside the region and `-1` outside,
/// testing pixel centres at integer coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    Circle { cx: f64, cy: f64, r: f64 },
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
    /// Alternating `cell x cell` blocks, inside at the top-left block.
    Checker { cell: usize },
    /// Inside wherever the mask is `true`.
    Mask(LabelMap),
}

impl InitSpec {
    /// Default contour: a centred circle of radius `min(width, height) / 4`.
    pub fn centered_circle(width: usize, height: usize) -> Self {
        InitSpec::Circle {
            cx: (width as f64 - 1.0) / 2.0,
            cy: (height as f64 - 1.0) / 2.0,
            r: width.min(height) as f64 / 4.0,
        }
    }

    fn inside(&self, x: usize, y: usize) -> bool {
        let (xf, yf) = (x as f64, y as f64);
        match *self {
            InitSpec::Circle { cx, cy, r } => (xf - cx).powi(2) + (yf - cy).powi(2) < r * r,
            InitSpec::Rect { x0, y0, x1, y1 } => x0 < xf && xf < x1 && y0 < yf && yf < y1,
            InitSpec::Checker { cell } => (x / cell + y / cell).is_multiple_of(2),
            InitSpec::Mask(ref m) => m.get(x, y) != 0,
        }
    }
}

impl fmt::Display for InitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitSpec::Circle { cx, cy, r } => write!(f, "circle:{cx},{cy},{r}"),
            InitSpec::Rect { x0, y0, x1, y1 } => write!(f, "rect:{x0},{y0},{x1},{y1}"),
            InitSpec::Checker { cell } => write!(f, "checker:{cell}"),
            InitSpec::Mask(m) => write!(f, "mask:{}x{}", m.width(), m.height()),
        }
    }
}

/// Parses `circle:cx,cy,r`, `rect:x0,y0,x1,y1` or `checker:cell`.
impl FromStr for InitSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("init spec {s:?} lacks a kind prefix")))?;
        let nums = parse_reals(args)?;
        let want = |n: usize| -> Result<()> {
            if nums.len() == n {
                Ok(())
            } else {
                Err(Error::invalid(format!("{kind} takes {n} numbers, got {}", nums.len())))
            }
        };
        match kind {
            "circle" => {
                want(3)?;
                if !(nums[2] > 0.0) {
                    return Err(Error::invalid("circle radius must be positive"));
                }
                Ok(InitSpec::Circle { cx: nums[0], cy: nums[1], r: nums[2] })
            }
            "rect" => {
                want(4)?;
                Ok(InitSpec::Rect { x0: nums[0], y0: nums[1], x1: nums[2], y1: nums[3] })
            }
            "checker" => {
                want(1)?;
                let cell = nums[0];
                if !(cell >= 1.0) || cell.fract() != 0.0 {
                    return Err(Error::invalid("checker cell must be a positive integer"));
                }
                Ok(InitSpec::Checker { cell: cell as usize })
            }
            other => Err(Error::invalid(format!("unknown init kind {other:?}"))),
        }
    }
}

pub(crate) fn parse_reals(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::invalid(format!("not a number: {t:?}")))
        })
        .collect()
}

/// Binary step level set for one contour.
pub fn init_binary(width: usize, height: usize, spec: &InitSpec) -> Result<ScalarField> {
    if let InitSpec::Mask(m) = spec {
        if m.width() != width || m.height() != height {
            return Err(Error::Dimension(format!(
                "mask is {}x{}, image is {width}x{height}",
                m.width(),
                m.height()
            )));
        }
    }
    let phi = ScalarField::from_fn(width, height, |x, y| if spec.inside(x, y) { 1.0 } else { -1.0 })?;
    let inside = phi.values().iter().filter(|&&v| v > 0.0).count();
    if inside == 0 {
        return Err(Error::invalid(format!("initial region {spec} is empty")));
    }
    if inside == phi.len() {
        return Err(Error::invalid(format!("initial region {spec} covers the whole image")));
    }
    Ok(phi)
}

/// One contour gives a two-phase state, two contours a four-phase state.
pub fn init_level_set(width: usize, height: usize, specs: &[InitSpec]) -> Result<PhaseState> {
    match specs {
        [one] => Ok(PhaseState::Two(init_binary(width, height, one)?)),
        [a, b] => PhaseState::four(init_binary(width, height, a)?, init_binary(width, height, b)?),
        _ => Err(Error::invalid(format!(
            "one or two initial contours required, got {}",
            specs.len()
        ))),
    }
}

/// Memberships fed to the closed-form parameter updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Membership {
    /// Indicators of the sign partition.
    #[default]
    Sharp,
    /// The smoothed Heaviside memberships of the energy.
    Smooth,
}

/// Solver settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Window radius in pixels.
    pub rho: f64,
    /// Level set time step.
    pub dt: f64,
    /// Diffusion step, within `[0, 0.25]`.
    pub dt2: f64,
    /// Heaviside/Dirac width.
    pub epsilon: f64,
    /// 2 or 4.
    pub n_classes: usize,
    pub max_iter: usize,
    /// Largest fraction of sign flips per iteration that counts as stationary.
    pub stop_tol: f64,
    pub sigma_floor: f64,
    /// Initial contours; empty means one centred circle (two-phase only).
    pub init: Vec<InitSpec>,
    /// Constant initial bias value.
    pub bias_init: f64,
    /// Memberships used when re-estimating `c`, `b` and `sigma`.
    pub membership: Membership,
    /// Clamp the level sets to `[-bound, bound]` after each evolution step;
    /// `None` lets them grow freely.
    pub level_bound: Option<f64>,
    /// Start with a wide window and halve it down to `rho`, one stationary run per width.
    pub coarse_to_fine: bool,
    /// First window radius of the schedule; `None` means `min(width, height) / 4`.
    pub coarse_rho: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rho: 6.0,
            dt: 1.0,
            dt2: 0.1,
            epsilon: 1.0,
            n_classes: 2,
            max_iter: 500,
            stop_tol: 1e-4,
            sigma_floor: SIGMA_FLOOR,
            init: Vec::new(),
            bias_init: 1.0,
            membership: Membership::Sharp,
            level_bound: Some(DEFAULT_LEVEL_BOUND),
            coarse_to_fine: true,
            coarse_rho: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        check_dt2(self.dt2)?;
        let positive = [
            ("rho", self.rho),
            ("dt", self.dt),
            ("epsilon", self.epsilon),
            ("sigma_floor", self.sigma_floor),
            ("bias_init", self.bias_init),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.n_classes != 2 && self.n_classes != 4 {
            return Err(Error::invalid(format!(
                "class count must be 2 or 4, got {}",
                self.n_classes
            )));
        }
        if let Some(bound) = self.level_bound {
            if !(bound > 0.0) || !bound.is_finite() {
                return Err(Error::invalid(format!("level bound must be positive, got {bound}")));
            }
        }
        if let Some(r) = self.coarse_rho {
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::invalid(format!("coarse rho must be positive, got {r}")));
            }
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        if !(self.stop_tol >= 0.0) {
            return Err(Error::invalid("stop_tol must be non-negative"));
        }
        let want = self.n_classes / 2;
        if !self.init.is_empty() && self.init.len() != want {
            return Err(Error::invalid(format!(
                "{} classes need {want} initial contour(s), got {}",
                self.n_classes,
                self.init.len()
            )));
        }
        if self.init.is_empty() && self.n_classes == 4 {
            return Err(Error::invalid("four-phase segmentation needs two initial contours"));
        }
        Ok(())
    }

    /// The literal published scheme: smooth memberships everywhere, unbounded level
    /// sets and a single window width.
    pub fn literal() -> Self {
        SolverConfig {
            membership: Membership::Smooth,
            level_bound: None,
            coarse_to_fine: false,
            ..Self::default()
        }
    }

    /// Window radii visited in order; the last one is always `rho`.
    pub fn window_schedule(&self, width: usize, height: usize) -> Vec<f64> {
        let mut radii = Vec::new();
        if self.coarse_to_fine {
            let mut r = self.coarse_rho.unwrap_or(width.min(height) as f64 / 4.0);
            while r > self.rho {
                radii.push(r);
                r /= 2.0;
            }
        }
        radii.push(self.rho);
        radii
    }

    fn param_memberships(&self, phi: &PhaseState) -> Vec<ScalarField> {
        match self.membership {
            Membership::Sharp => sharp_memberships(phi),
            Membership::Smooth => memberships(phi, self.epsilon),
        }
    }

    fn initial_state(&self, width: usize, height: usize) -> Result<PhaseState> {
        if self.init.is_empty() {
            init_level_set(width, height, &[InitSpec::centered_circle(width, height)])
        } else {
            init_level_set(width, height, &self.init)
        }
    }
}

/// Result of a segmentation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SegOutcome {
    pub labels: LabelMap,
    pub level_sets: PhaseState,
    /// Estimated bias, rescaled to unit mean.
    pub bias: ScalarField,
    /// `image / max(bias, 1e-6)`.
    pub corrected: ScalarField,
    /// Class constants in the unit-mean bias gauge.
    pub c: Vec<f64>,
    pub sigma: Vec<f64>,
    pub iterations: usize,
    /// Energy after each iteration.
    pub energy_trace: Vec<f64>,
    pub converged: bool,
}

/// True when the fraction of pixels whose sign changed in any level set is at most `stop_tol`.
pub fn stop_check(prev: &PhaseState, next: &PhaseState, stop_tol: f64) -> bool {
    let (a, b) = (prev.level_sets(), next.level_sets());
    assert_eq!(a.len(), b.len(), "phase states differ in class count");
    let n = a[0].len();
    let flipped = (0..n)
        .filter(|&i| {
            a.iter()
                .zip(&b)
                .any(|(p, q)| (p.values()[i] >= 0.0) != (q.values()[i] >= 0.0))
        })
        .count();
    (flipped as f64) <= stop_tol * n as f64
}

/// `image / max(bias, 1e-6)`.
pub fn bias_correct(image: &ScalarField, bias: &ScalarField) -> Result<ScalarField> {
    image.zip_map(bias, |i, b| i / b.max(BIAS_FLOOR))
}

/// Data force `d2 - d1` of the local model with unit deviations and unit bias:
/// `A(y) / 2 * [(I - c2)^2 - (I - c1)^2]`, a positive multiple of the Chan-Vese force.
pub fn cv_reduction_force(
    image: &ScalarField,
    c1: f64,
    c2: f64,
    k: &DiskKernel,
    area: &ScalarField,
) -> Result<ScalarField> {
    image.check_shape(area, "image vs area")?;
    let ones = ScalarField::new(image.width(), image.height(), 1.0)?;
    let moments = BiasMoments::with_area(area.clone(), &ones, k);
    let d = force_fields_with(image, &[c1, c2], &[1.0, 1.0], &moments);
    d[1].zip_map(&d[0], |a, b| a - b)
}

fn check_image(image: &ScalarField) -> Result<()> {
    if image.max() <= image.min() {
        return Err(Error::DegenerateInput("image is constant".into()));
    }
    Ok(())
}

/// Tracks consecutive failures of per-class updates and keeps the last good value.
struct ClassGuard {
    streak: Vec<usize>,
}

impl ClassGuard {
    fn new(n: usize) -> Self {
        ClassGuard { streak: vec![0; n] }
    }

    fn apply(&mut self, current: &mut [f64], updates: Vec<Result<f64>>) -> Result<()> {
        for (class, update) in updates.into_iter().enumerate() {
            match update {
                Ok(v) => {
                    current[class] = v;
                    self.streak[class] = 0;
                }
                Err(e) => {
                    self.streak[class] += 1;
                    if self.streak[class] >= MAX_EMPTY_STREAK {
                        return Err(e);
                    }
                }
            }
        }
        Ok(())
    }
}

fn evolve_once(
    phi: &PhaseState,
    d: &[ScalarField],
    cfg: &SolverConfig,
) -> Result<PhaseState> {
    let stepped = match phi {
        PhaseState::Two(p) => PhaseState::Two(step_two_phase(p, &d[0], &d[1], cfg.dt, cfg.epsilon)?),
        PhaseState::Four(p1, p2) => {
            let step = match cfg.membership {
                Membership::Sharp => step_four_phase_sharp,
                Membership::Smooth => step_four_phase,
            };
            let (a, b) = step(p1, p2, d, cfg.dt, cfg.epsilon)?;
            PhaseState::Four(a, b)
        }
    };
    let bounded = match cfg.level_bound {
        Some(bound) => stepped.map(|ls| Ok(ls.map(|v| v.clamp(-bound, bound))))?,
        None => stepped,
    };
    bounded.map(|ls| regularize(ls, cfg.dt2))
}

/// Joint segmentation and bias estimation.
pub fn segment(image: &ScalarField, cfg: &SolverConfig) -> Result<SegOutcome> {
    cfg.validate()?;
    check_image(image)?;
    let (w, h) = (image.width(), image.height());
    let n = cfg.n_classes;
    let radii = cfg.window_schedule(w, h);
    // Each coarse width gets a share of half the budget; the target width keeps the rest.
    let coarse_cap = (cfg.max_iter / (2 * radii.len())).max(1);

    let mut k = disk_offsets(radii[0])?;
    let mut area = area_field(w, h, &k)?;
    let mut phi = cfg.initial_state(w, h)?;
    let mut m = cfg.param_memberships(&phi);
    let mut bias = ScalarField::new(w, h, cfg.bias_init)?;
    let mut sigma: Vec<f64> = (1..=n).map(|i| i as f64).collect();

    let mut moments = BiasMoments::with_area(area.clone(), &bias, &k);
    let mut c: Vec<f64> = update_c_per_class(image, &m, &moments)
        .into_iter()
        .collect::<Result<_>>()?;

    let mut c_guard = ClassGuard::new(n);
    let mut s_guard = ClassGuard::new(n);
    let mut trace = Vec::with_capacity(cfg.max_iter);
    let mut converged = false;

    for (stage, &rho) in radii.iter().enumerate() {
        let last = stage + 1 == radii.len();
        if stage > 0 {
            k = disk_offsets(rho)?;
            area = area_field(w, h, &k)?;
            moments = BiasMoments::with_area(area.clone(), &bias, &k);
        }
        let left = cfg.max_iter - trace.len();
        let budget = if last { left } else { coarse_cap.min(left) };
        for _ in 0..budget {
            if !trace.is_empty() {
                c_guard.apply(&mut c, update_c_per_class(image, &m, &moments))?;
            }
            match update_b(image, &m, &c, &sigma, &k) {
                Ok(b) => bias = b,
                Err(Error::DegenerateBias { .. }) => {}
                Err(e) => return Err(e),
            }
            moments = BiasMoments::with_area(area.clone(), &bias, &k);
            s_guard.apply(
                &mut sigma,
                update_sigma_per_class(image, &m, &c, &moments, cfg.sigma_floor),
            )?;
            let d = force_fields_with(image, &c, &sigma, &moments);

            let next = evolve_once(&phi, &d, cfg)?;
            let soft = memberships(&next, cfg.epsilon);
            trace.push(energy_from_forces(&d, &soft));
            m = match cfg.membership {
                Membership::Smooth => soft,
                Membership::Sharp => sharp_memberships(&next),
            };
            let stationary = stop_check(&phi, &next, cfg.stop_tol);
            phi = next;
            if stationary {
                converged = last;
                break;
            }
        }
    }

    // Fix the b <-> c scale ambiguity: report the bias with unit mean.
    let scale = bias.mean();
    let bias = bias.scale(1.0 / scale);
    let c = c.iter().map(|ci| ci * scale).collect();
    let corrected = bias_correct(image, &bias)?;
    Ok(SegOutcome {
        labels: phi.labels(),
        iterations: trace.len(),
        level_sets: phi,
        bias,
        corrected,
        c,
        sigma,
        energy_trace: trace,
        converged,
    })
}

/// Membership-weighted global means.
fn global_means(image: &ScalarField, m: &[ScalarField]) -> Vec<Result<f64>> {
    m.iter()
        .enumerate()
        .map(|(class, mi)| {
            let mass = mi.sum();
            if mass < crate::model::MASS_EPSILON {
                return Err(Error::DegenerateClass { class });
            }
            let weighted: f64 = image.values().iter().zip(mi.values()).map(|(a, b)| a * b).sum();
            Ok(weighted / mass)
        })
        .collect()
}

/// Piecewise-constant baseline without length penalty: `d_i = (I - c_i)^2` with
/// `c_i` the membership-weighted global means. Bias stays at one and `sigma` at one.
pub fn cv_segment(image: &ScalarField, cfg: &SolverConfig) -> Result<SegOutcome> {
    cfg.validate()?;
    check_image(image)?;
    let (w, h) = (image.width(), image.height());
    let n = cfg.n_classes;
    let mut phi = cfg.initial_state(w, h)?;
    let mut m = cfg.param_memberships(&phi);
    let mut c: Vec<f64> = global_means(image, &m).into_iter().collect::<Result<_>>()?;
    let mut guard = ClassGuard::new(n);
    let mut trace = Vec::with_capacity(cfg.max_iter);
    let mut converged = false;

    for iter in 1..=cfg.max_iter {
        if iter > 1 {
            guard.apply(&mut c, global_means(image, &m))?;
        }
        let d: Vec<ScalarField> = c
            .iter()
            .map(|&ci| image.map(|v| (v - ci) * (v - ci)))
            .collect();
        let next = evolve_once(&phi, &d, cfg)?;
        let soft = memberships(&next, cfg.epsilon);
        trace.push(energy_from_forces(&d, &soft));
        m = match cfg.membership {
            Membership::Smooth => soft,
            Membership::Sharp => sharp_memberships(&next),
        };
        let stationary = stop_check(&phi, &next, cfg.stop_tol);
        phi = next;
        if stationary {
            converged = true;
            break;
        }
    }

    let bias = ScalarField::new(w, h, 1.0)?;
    Ok(SegOutcome {
        labels: phi.labels(),
        iterations: trace.len(),
        level_sets: phi,
        corrected: image.clone(),
        bias,
        c,
        sigma: vec![1.0; n],
        energy_trace: trace,
        converged,
    })
}
