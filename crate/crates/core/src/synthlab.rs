//! Synthetic phantoms following `I = b J + n` and the metrics used to score
//! segmentations and bias estimates against them.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::field::{normalize_display, write_field_dump, write_pgm, LabelMap, ScalarField};
use crate::pipeline::parse_reals;

/// Identifies the noise generator so phantoms can be regenerated elsewhere.
pub const NOISE_RNG_ID: &str = "chacha20:seed_from_u64;rand_distr-normal;row-major";

/// Region geometry in pixel-centre coordinates. All bounds are inclusive.
#[derive(Debug, Clone, PartialEq)]
pub enum ShapeKind {
    Disk { cx: f64, cy: f64, r: f64 },
    Ring { cx: f64, cy: f64, r_in: f64, r_out: f64 },
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
    /// Plus sign: two bars of half-length `arm` and half-width `half_width`.
    Cross { cx: f64, cy: f64, arm: f64, half_width: f64 },
}

impl ShapeKind {
    fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            ShapeKind::Disk { cx, cy, r } => (x - cx).powi(2) + (y - cy).powi(2) <= r * r,
            ShapeKind::Ring { cx, cy, r_in, r_out } => {
                let d2 = (x - cx).powi(2) + (y - cy).powi(2);
                r_in * r_in <= d2 && d2 <= r_out * r_out
            }
            ShapeKind::Rect { x0, y0, x1, y1 } => x0 <= x && x <= x1 && y0 <= y && y <= y1,
            ShapeKind::Cross { cx, cy, arm, half_width } => {
                let (dx, dy) = ((x - cx).abs(), (y - cy).abs());
                (dx <= arm && dy <= half_width) || (dy <= arm && dx <= half_width)
            }
        }
    }
}

/// A shape painted with one class.
#[derive(Debug, Clone, PartialEq)]
pub struct Shape {
    pub kind: ShapeKind,
    pub class: u8,
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ShapeKind::Disk { cx, cy, r } => write!(f, "disk:{cx},{cy},{r}"),
            ShapeKind::Ring { cx, cy, r_in, r_out } => write!(f, "ring:{cx},{cy},{r_in},{r_out}"),
            ShapeKind::Rect { x0, y0, x1, y1 } => write!(f, "rect:{x0},{y0},{x1},{y1}"),
            ShapeKind::Cross { cx, cy, arm, half_width } => {
                write!(f, "cross:{cx},{cy},{arm},{half_width}")
            }
        }?;
        write!(f, "@{}", self.class)
    }
}

impl Shape {
    /// Parses `kind:numbers[@class]`; without `@class` the shape gets `default_class`.
    pub fn parse(s: &str, default_class: u8) -> Result<Self> {
        let (body, class) = match s.rsplit_once('@') {
            Some((body, c)) => (
                body,
                c.parse::<u8>()
                    .map_err(|_| Error::invalid(format!("bad class index in {s:?}")))?,
            ),
            None => (s, default_class),
        };
        let (kind, args) = body
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("shape {s:?} lacks a kind prefix")))?;
        let v = parse_reals(args)?;
        let arity = |n: usize| -> Result<()> {
            if v.len() == n {
                Ok(())
            } else {
                Err(Error::invalid(format!("{kind} takes {n} numbers, got {}", v.len())))
            }
        };
        let kind = match kind {
            "disk" => {
                arity(3)?;
                ShapeKind::Disk { cx: v[0], cy: v[1], r: v[2] }
            }
            "ring" => {
                arity(4)?;
                ShapeKind::Ring { cx: v[0], cy: v[1], r_in: v[2], r_out: v[3] }
            }
            "rect" => {
                arity(4)?;
                ShapeKind::Rect { x0: v[0], y0: v[1], x1: v[2], y1: v[3] }
            }
            "cross" => {
                arity(4)?;
                ShapeKind::Cross { cx: v[0], cy: v[1], arm: v[2], half_width: v[3] }
            }
            other => return Err(Error::invalid(format!("unknown shape kind {other:?}"))),
        };
        Ok(Shape { kind, class })
    }
}

/// Smooth multiplicative bias families.
#[derive(Debug, Clone, PartialEq)]
pub enum BiasKind {
    /// Affine in `x`, from `lo` at the left column to `hi` at the right column.
    Ramp { lo: f64, hi: f64 },
    /// `1 + a exp(-((x - x0)^2 + (y - y0)^2) / (2 s^2))`.
    GaussBump { a: f64, x0: f64, y0: f64, s: f64 },
    /// Quadratic `ax u + ay v + axx u^2 + axy u v + ayy v^2` on unit coordinates
    /// `u, v in [0, 1]`, min-max rescaled onto `[lo, hi]`.
    Poly2 { lo: f64, hi: f64, ax: f64, ay: f64, axx: f64, axy: f64, ayy: f64 },
}

impl fmt::Display for BiasKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            BiasKind::Ramp { lo, hi } => write!(f, "ramp:{lo},{hi}"),
            BiasKind::GaussBump { a, x0, y0, s } => write!(f, "gauss:{a},{x0},{y0},{s}"),
            BiasKind::Poly2 { lo, hi, ax, ay, axx, axy, ayy } => {
                write!(f, "poly2:{lo},{hi},{ax},{ay},{axx},{axy},{ayy}")
            }
        }
    }
}

/// Parses `ramp:lo,hi`, `gauss:a,x0,y0,s` or `poly2:lo,hi,ax,ay,axx,axy,ayy`.
impl FromStr for BiasKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "none" {
            return Ok(BiasKind::Ramp { lo: 1.0, hi: 1.0 });
        }
        let (kind, args) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("bias {s:?} lacks a kind prefix")))?;
        let v = parse_reals(args)?;
        let arity = |n: usize| -> Result<()> {
            if v.len() == n {
                Ok(())
            } else {
                Err(Error::invalid(format!("{kind} bias takes {n} numbers, got {}", v.len())))
            }
        };
        match kind {
            "ramp" => {
                arity(2)?;
                Ok(BiasKind::Ramp { lo: v[0], hi: v[1] })
            }
            "gauss" | "gauss_bump" => {
                arity(4)?;
                Ok(BiasKind::GaussBump { a: v[0], x0: v[1], y0: v[2], s: v[3] })
            }
            "poly2" => {
                arity(7)?;
                Ok(BiasKind::Poly2 {
                    lo: v[0],
                    hi: v[1],
                    ax: v[2],
                    ay: v[3],
                    axx: v[4],
                    axy: v[5],
                    ayy: v[6],
                })
            }
            other => Err(Error::invalid(format!("unknown bias kind {other:?}"))),
        }
    }
}

/// Strictly positive smooth bias field.
pub fn gen_bias(kind: &BiasKind, width: usize, height: usize) -> Result<ScalarField> {
    let unit = |i: usize, n: usize| if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
    let field = match *kind {
        BiasKind::Ramp { lo, hi } => {
            ScalarField::from_fn(width, height, |x, _| lo + (hi - lo) * unit(x, width))?
        }
        BiasKind::GaussBump { a, x0, y0, s } => {
            if !(s > 0.0) {
                return Err(Error::invalid("gauss bump width must be positive"));
            }
            ScalarField::from_fn(width, height, |x, y| {
                let d2 = (x as f64 - x0).powi(2) + (y as f64 - y0).powi(2);
                1.0 + a * (-d2 / (2.0 * s * s)).exp()
            })?
        }
        BiasKind::Poly2 { lo, hi, ax, ay, axx, axy, ayy } => {
            let raw = ScalarField::from_fn(width, height, |x, y| {
                let (u, v) = (unit(x, width), unit(y, height));
                ax * u + ay * v + axx * u * u + axy * u * v + ayy * v * v
            })?;
            let (rmin, rmax) = (raw.min(), raw.max());
            if rmax > rmin {
                raw.map(|q| lo + (hi - lo) * (q - rmin) / (rmax - rmin))
            } else {
                raw.map(|_| 0.5 * (lo + hi))
            }
        }
    };
    if !(field.min() > 0.0) {
        return Err(Error::invalid(format!(
            "bias {kind} is not strictly positive (min {})",
            field.min()
        )));
    }
    Ok(field)
}

/// Everything needed to regenerate a phantom.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    /// Painted in order over a class-0 background; later shapes overwrite earlier ones.
    pub shapes: Vec<Shape>,
    /// True class constants; the class count is `class_levels.len()`.
    pub class_levels: Vec<f64>,
    pub bias: BiasKind,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl PhantomSpec {
    pub fn n_classes(&self) -> usize {
        self.class_levels.len()
    }

    /// Plain-text `key=value` echo of the spec, one entry per line.
    pub fn to_sidecar(&self) -> String {
        let mut out = format!("width={}\nheight={}\n", self.width, self.height);
        for s in &self.shapes {
            out += &format!("shape={s}\n");
        }
        let levels: Vec<String> = self.class_levels.iter().map(|l| l.to_string()).collect();
        out += &format!(
            "levels={}\nbias={}\nnoise_sigma={}\nseed={}\nrng={NOISE_RNG_ID}\n",
            levels.join(","),
            self.bias,
            self.noise_sigma,
            self.seed
        );
        out
    }
}

/// Generated image with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub image: ScalarField,
    pub truth_labels: LabelMap,
    pub truth_bias: ScalarField,
    pub truth_signal: ScalarField,
}

pub fn gen_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    let n = spec.n_classes();
    if !(2..=255).contains(&n) {
        return Err(Error::invalid(format!("need 2..=255 class levels, got {n}")));
    }
    for (i, a) in spec.class_levels.iter().enumerate() {
        if !a.is_finite() {
            return Err(Error::invalid("class levels must be finite"));
        }
        if spec.class_levels[..i].contains(a) {
            return Err(Error::invalid(format!("class level {a} repeated")));
        }
    }
    if !(spec.noise_sigma >= 0.0) || !spec.noise_sigma.is_finite() {
        return Err(Error::invalid("noise sigma must be non-negative"));
    }
    if let Some(s) = spec.shapes.iter().find(|s| s.class as usize >= n) {
        return Err(Error::invalid(format!("shape {s} refers to a missing class")));
    }
    let (w, h) = (spec.width, spec.height);
    let truth_bias = gen_bias(&spec.bias, w, h)?;

    let mut labels = vec![0u8; w * h];
    for shape in &spec.shapes {
        for (i, l) in labels.iter_mut().enumerate() {
            if shape.kind.contains((i % w) as f64, (i / w) as f64) {
                *l = shape.class;
            }
        }
    }
    let truth_labels = LabelMap::from_vec(w, h, labels)?;
    if let Some(empty) = (0..n as u8).find(|&c| truth_labels.count(c) == 0) {
        return Err(Error::invalid(format!("class {empty} covers no pixels")));
    }
    let truth_signal = ScalarField::from_vec(
        w,
        h,
        truth_labels
            .labels()
            .iter()
            .map(|&l| spec.class_levels[l as usize])
            .collect(),
    )?;
    let clean = truth_bias.zip_map(&truth_signal, |b, j| b * j)?;
    let image = if spec.noise_sigma > 0.0 {
        let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
        let normal = Normal::new(0.0, spec.noise_sigma)
            .map_err(|e| Error::invalid(format!("noise distribution: {e}")))?;
        clean.map(|v| v + normal.sample(&mut rng))
    } else {
        clean
    };
    Ok(Phantom {
        image,
        truth_labels,
        truth_bias,
        truth_signal,
    })
}

/// File suffixes and contents for a phantom: `.pgm`, `_mask.pgm`, `_bias.f64`,
/// `_signal.f64` and `_spec.txt`.
pub fn phantom_files(phantom: &Phantom, spec: &PhantomSpec) -> Result<Vec<(&'static str, Vec<u8>)>> {
    Ok(vec![
        (".pgm", write_pgm(&phantom.image, true)?),
        (
            "_mask.pgm",
            write_pgm(&phantom.truth_labels.to_gray(spec.n_classes()), true)?,
        ),
        ("_bias.f64", write_field_dump(&phantom.truth_bias)),
        ("_signal.f64", write_field_dump(&phantom.truth_signal)),
        ("_spec.txt", spec.to_sidecar().into_bytes()),
    ])
}

/// Display rendering of a bias field.
pub fn bias_display(bias: &ScalarField) -> Result<Vec<u8>> {
    write_pgm(&normalize_display(bias), true)
}

/// `|A ∩ B| / |A ∪ B|`; two empty regions score 1.
pub fn jaccard(a: &[bool], b: &[bool]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("regions of {} and {} pixels", a.len(), b.len())));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &q) in a.iter().zip(b) {
        inter += (p && q) as usize;
        union += (p || q) as usize;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Jaccard index between class `class_a` of `a` and class `class_b` of `b`.
pub fn jaccard_labels(a: &LabelMap, class_a: u8, b: &LabelMap, class_b: u8) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::Dimension(format!(
            "label maps {}x{} and {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    jaccard(&a.region(class_a), &b.region(class_b))
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Per-truth-class Jaccard indices under the predicted-to-truth class assignment
/// maximizing their sum. Segmentation class indices are arbitrary, so this is
/// the score used to compare a result against ground truth.
pub fn matched_jaccard(pred: &LabelMap, truth: &LabelMap, n_classes: usize) -> Result<Vec<f64>> {
    if !(1..=6).contains(&n_classes) {
        return Err(Error::invalid("matched jaccard supports 1..=6 classes"));
    }
    let mut table = vec![vec![0.0; n_classes]; n_classes];
    for (t, row) in table.iter_mut().enumerate() {
        for (p, cell) in row.iter_mut().enumerate() {
            *cell = jaccard_labels(pred, p as u8, truth, t as u8)?;
        }
    }
    let best = permutations(n_classes)
        .into_iter()
        .map(|perm| perm.iter().enumerate().map(|(t, &p)| table[t][p]).collect::<Vec<_>>())
        .max_by(|a, b| {
            a.iter()
                .sum::<f64>()
                .partial_cmp(&b.iter().sum::<f64>())
                .expect("finite scores")
        })
        .expect("at least one permutation");
    Ok(best)
}

/// Agreement between an estimated and a true bias field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasScore {
    pub pearson: f64,
    /// RMS of `est / mean(est) - truth / mean(truth)`.
    pub rmse_gauged: f64,
}

pub fn bias_similarity(est: &ScalarField, truth: &ScalarField) -> Result<BiasScore> {
    est.check_shape(truth, "estimated vs true bias")?;
    let (me, mt) = (est.mean(), truth.mean());
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&e, &t) in est.values().iter().zip(truth.values()) {
        let (de, dt) = (e - me, t - mt);
        sxy += de * dt;
        sxx += de * de;
        syy += dt * dt;
    }
    if !(syy > 0.0) {
        return Err(Error::DegenerateInput("true bias is constant".into()));
    }
    if !(sxx > 0.0) {
        return Err(Error::DegenerateInput(
            "estimated bias is constant, correlation undefined".into(),
        ));
    }
    if me == 0.0 || mt == 0.0 {
        return Err(Error::DegenerateInput("bias field has zero mean".into()));
    }
    let pearson = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let mse = est
        .values()
        .iter()
        .zip(truth.values())
        .map(|(&e, &t)| (e / me - t / mt).powi(2))
        .sum::<f64>()
        / est.len() as f64;
    Ok(BiasScore {
        pearson,
        rmse_gauged: mse.sqrt(),
    })
}
