//! Command line front end: `segment`, `synth` and `eval`.
//!
//! Exit codes: 0 success, 2 bad flags, 3 file or format problems (including
//! dimension mismatches), 4 solver degeneracy.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::Error;
use crate::field::{
    normalize_display, read_field_dump, read_pgm, write_field_dump, write_pgm, LabelMap,
    ScalarField,
};
use crate::pipeline::{segment, InitSpec, Membership, SolverConfig};
use crate::synthlab::{
    bias_similarity, gen_phantom, jaccard_labels, matched_jaccard, phantom_files, BiasKind,
    PhantomSpec, Shape,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_DEGENERATE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "lsacm", version, about = "Joint level set segmentation and bias field estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Segment a PGM image and estimate its bias field.
    Segment(SegmentArgs),
    /// Write a synthetic phantom with its ground truth.
    Synth(SynthArgs),
    /// Score a segmentation or a bias estimate against ground truth.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct SegmentArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 2, value_parser = parse_phases)]
    phases: usize,
    #[arg(long, default_value_t = 6.0)]
    rho: f64,
    #[arg(long, default_value_t = 1.0)]
    dt: f64,
    #[arg(long, default_value_t = 0.1)]
    dt2: f64,
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-4)]
    stop_tol: f64,
    /// `circle:cx,cy,r`, `rect:x0,y0,x1,y1`, `checker:cell` or `mask:path.pgm`.
    /// Give it twice for four phases.
    #[arg(long)]
    init: Vec<String>,
    #[arg(long)]
    out_mask: Option<PathBuf>,
    /// F64FIELD dump; a display PGM is written next to it.
    #[arg(long)]
    out_bias: Option<PathBuf>,
    #[arg(long)]
    out_corrected: Option<PathBuf>,
    /// F64FIELD dump of the final level set(s).
    #[arg(long)]
    out_phi: Option<PathBuf>,
    /// CSV of the energy after each iteration.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Memberships used to re-estimate the class and bias parameters.
    #[arg(long, value_enum, default_value_t = MembershipArg::Sharp)]
    membership: MembershipArg,
    /// Clamp on the level set values after each step, or `none`.
    #[arg(long, default_value = "10", value_parser = parse_bound)]
    level_bound: Bound,
    /// First window radius of the coarse-to-fine schedule (default: min(W, H) / 4).
    #[arg(long)]
    coarse_rho: Option<f64>,
    /// Run at `--rho` only, without the coarse-to-fine schedule.
    #[arg(long)]
    single_scale: bool,
    /// The unmodified scheme: smooth memberships, no clamp, single scale.
    #[arg(long, conflicts_with_all = ["membership", "level_bound", "coarse_rho", "single_scale"])]
    literal: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MembershipArg {
    Sharp,
    Smooth,
}

/// Parsed `--level-bound`; a newtype so clap does not read `Option` as "flag may be absent".
#[derive(Debug, Clone, Copy)]
struct Bound(Option<f64>);

#[derive(Debug, Args)]
struct SynthArgs {
    /// `WxH`.
    #[arg(long)]
    size: String,
    /// `disk:cx,cy,r`, `ring:cx,cy,r_in,r_out`, `rect:x0,y0,x1,y1` or
    /// `cross:cx,cy,arm,half_width`, optionally suffixed `@class`. The n-th shape
    /// defaults to class n (counting from 1).
    #[arg(long, required = true)]
    shape: Vec<String>,
    /// Comma-separated class intensities, background first.
    #[arg(long)]
    levels: String,
    /// `ramp:lo,hi`, `gauss:a,x0,y0,s`, `poly2:lo,hi,ax,ay,axx,axy,ayy` or `none`.
    #[arg(long, default_value = "none")]
    bias: String,
    #[arg(long, default_value_t = 0.0)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_prefix: String,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long, requires = "truth")]
    pred: Option<PathBuf>,
    #[arg(long, requires = "pred")]
    truth: Option<PathBuf>,
    /// Region scored by `js`.
    #[arg(long, default_value_t = 0)]
    class: u8,
    /// Number of gray levels the masks encode.
    #[arg(long, default_value_t = 2)]
    phases: usize,
    /// Relabel the prediction to its best match with the truth before scoring.
    #[arg(long = "match")]
    match_labels: bool,
    #[arg(long, requires = "bias_truth")]
    bias_pred: Option<PathBuf>,
    #[arg(long, requires = "bias_pred")]
    bias_truth: Option<PathBuf>,
}

/// What went wrong, already mapped to an exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidArgument(_) | Error::StabilityViolation { .. } => EXIT_USAGE,
            Error::Format { .. } | Error::Range { .. } | Error::Dimension(_) => EXIT_IO,
            Error::DegenerateClass { .. }
            | Error::DegenerateBias { .. }
            | Error::DegenerateInput(_) => EXIT_DEGENERATE,
        };
        Failure { code, message: e.to_string() }
    }
}

type CmdResult = std::result::Result<String, Failure>;

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: message.into() }
}

fn read(path: &Path) -> std::result::Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure {
        code: EXIT_IO,
        message: format!("{}: {e}", path.display()),
    })
}

fn write(path: &Path, bytes: &[u8]) -> std::result::Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| Failure {
        code: EXIT_IO,
        message: format!("{}: {e}", path.display()),
    })
}

/// `path` with `suffix` inserted before the extension.
fn sibling(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

/// Runs the tool on `args` (program name first), printing to stdout/stderr, and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Segment(a) => cmd_segment(&a),
        Command::Synth(a) => cmd_synth(&a),
        Command::Eval(a) => cmd_eval(&a),
    };
    match outcome {
        Ok(stdout) => {
            print!("{stdout}");
            EXIT_OK
        }
        Err(f) => {
            eprintln!("lsacm: {}", f.message);
            f.code
        }
    }
}

fn parse_bound(s: &str) -> std::result::Result<Bound, String> {
    if s == "none" {
        return Ok(Bound(None));
    }
    s.parse::<f64>()
        .map(|v| Bound(Some(v)))
        .map_err(|_| format!("expected a positive number or `none`, got `{s}`"))
}

fn parse_phases(s: &str) -> std::result::Result<usize, String> {
    match s {
        "2" => Ok(2),
        "4" => Ok(4),
        _ => Err(format!("phases must be 2 or 4, got {s}")),
    }
}

fn parse_init(spec: &str) -> std::result::Result<InitSpec, Failure> {
    match spec.strip_prefix("mask:") {
        Some(path) => {
            let gray = read_pgm(&read(Path::new(path))?)?;
            let labels = gray.values().iter().map(|&g| u8::from(g > 0.0)).collect();
            Ok(InitSpec::Mask(LabelMap::from_vec(gray.width(), gray.height(), labels)?))
        }
        None => Ok(spec.parse()?),
    }
}

fn cmd_segment(a: &SegmentArgs) -> CmdResult {
    // Validate flags before reading the image so bad flags exit 2 even when --in is missing.
    let init = a.init.iter().map(|s| parse_init(s)).collect::<Result<Vec<_>, _>>()?;
    let cfg = SolverConfig {
        rho: a.rho,
        dt: a.dt,
        dt2: a.dt2,
        epsilon: a.eps,
        n_classes: a.phases,
        max_iter: a.max_iter,
        stop_tol: a.stop_tol,
        init,
        ..SolverConfig::default()
    };
    let cfg = if a.literal {
        SolverConfig { membership: Membership::Smooth, level_bound: None, coarse_to_fine: false, ..cfg }
    } else {
        SolverConfig {
            membership: match a.membership {
                MembershipArg::Sharp => Membership::Sharp,
                MembershipArg::Smooth => Membership::Smooth,
            },
            level_bound: a.level_bound.0,
            coarse_to_fine: !a.single_scale,
            coarse_rho: a.coarse_rho,
            ..cfg
        }
    };
    cfg.validate()?;
    let image = read_pgm(&read(&a.input)?)?;
    for spec in &cfg.init {
        if let InitSpec::Mask(m) = spec {
            if (m.width(), m.height()) != (image.width(), image.height()) {
                return Err(Error::Dimension(format!(
                    "init mask {}x{} vs image {}x{}",
                    m.width(),
                    m.height(),
                    image.width(),
                    image.height()
                ))
                .into());
            }
        }
    }
    let out = segment(&image, &cfg)?;

    if let Some(p) = &a.out_mask {
        write(p, &write_pgm(&out.labels.to_gray(a.phases), true)?)?;
    }
    if let Some(p) = &a.out_bias {
        write(p, &write_field_dump(&out.bias))?;
        let display = if p.extension().is_some_and(|e| e == "pgm") {
            sibling(p, "_display", "pgm")
        } else {
            p.with_extension("pgm")
        };
        write(&display, &write_pgm(&normalize_display(&out.bias), true)?)?;
    }
    if let Some(p) = &a.out_corrected {
        write(p, &write_pgm(&out.corrected, true)?)?;
    }
    if let Some(p) = &a.out_phi {
        let sets = out.level_sets.level_sets();
        if sets.len() == 1 {
            write(p, &write_field_dump(sets[0]))?;
        } else {
            let ext = p.extension().map(|e| e.to_string_lossy().into_owned());
            let ext = ext.as_deref().unwrap_or("f64");
            for (i, phi) in sets.iter().enumerate() {
                write(&sibling(p, &format!("_{}", i + 1), ext), &write_field_dump(phi))?;
            }
        }
    }
    if let Some(p) = &a.trace {
        let mut csv = String::from("iter,energy\n");
        for (i, e) in out.energy_trace.iter().enumerate() {
            let _ = writeln!(csv, "{},{e}", i + 1);
        }
        write(p, csv.as_bytes())?;
    }
    let last = out.energy_trace.last().copied().unwrap_or(f64::NAN);
    Ok(format!(
        "iters={} converged={} energy={last}\n",
        out.iterations, out.converged
    ))
}

fn parse_size(s: &str) -> std::result::Result<(usize, usize), Failure> {
    let bad = || usage(format!("size must look like WxH, got {s:?}"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let w: usize = w.trim().parse().map_err(|_| bad())?;
    let h: usize = h.trim().parse().map_err(|_| bad())?;
    if w == 0 || h == 0 {
        return Err(bad());
    }
    Ok((w, h))
}

fn cmd_synth(a: &SynthArgs) -> CmdResult {
    let (width, height) = parse_size(&a.size)?;
    let shapes = a
        .shape
        .iter()
        .enumerate()
        .map(|(i, s)| Shape::parse(s, (i + 1).min(255) as u8))
        .collect::<Result<Vec<_>, _>>()?;
    let class_levels = crate::pipeline::parse_reals(&a.levels)?;
    let bias: BiasKind = a.bias.parse()?;
    let spec = PhantomSpec {
        width,
        height,
        shapes,
        class_levels,
        bias,
        noise_sigma: a.noise_sigma,
        seed: a.seed,
    };
    let phantom = gen_phantom(&spec)?;
    let mut listing = String::new();
    for (suffix, bytes) in phantom_files(&phantom, &spec)? {
        let path = format!("{}{suffix}", a.out_prefix);
        write(Path::new(&path), &bytes)?;
        let _ = writeln!(listing, "wrote {path}");
    }
    Ok(listing)
}

fn cmd_eval(a: &EvalArgs) -> CmdResult {
    let mut out = String::new();
    if let (Some(pred), Some(truth)) = (&a.pred, &a.truth) {
        if usize::from(a.class) >= a.phases {
            return Err(usage(format!("class {} out of range for {} phases", a.class, a.phases)));
        }
        let pred = LabelMap::from_gray(&read_pgm(&read(pred)?)?, a.phases)?;
        let truth = LabelMap::from_gray(&read_pgm(&read(truth)?)?, a.phases)?;
        let js = if a.match_labels {
            if !pred.same_shape(&truth) {
                // Same message as the unmatched path.
                jaccard_labels(&pred, 0, &truth, 0)?;
            }
            matched_jaccard(&pred, &truth, a.phases)?[usize::from(a.class)]
        } else {
            jaccard_labels(&pred, a.class, &truth, a.class)?
        };
        let _ = writeln!(out, "js={js:.6}");
    }
    if let (Some(pred), Some(truth)) = (&a.bias_pred, &a.bias_truth) {
        let est: ScalarField = read_field_dump(&read(pred)?)?;
        let truth = read_field_dump(&read(truth)?)?;
        let score = bias_similarity(&est, &truth)?;
        let _ = writeln!(out, "pearson={:.6}", score.pearson);
        let _ = writeln!(out, "rmse={:.6}", score.rmse_gauged);
    }
    if out.is_empty() {
        return Err(usage("nothing to evaluate: give --pred/--truth and/or --bias-pred/--bias-truth"));
    }
    Ok(out)
}
