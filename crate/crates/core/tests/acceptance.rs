//! Acceptance suite: one line per criterion, `PASS` or `FAIL` with the measured
//! numbers. Exits non-zero when any criterion fails.
//!
//! Run: cargo test --release --test acceptance

use std::panic::{self, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use lsacm::evolve::{regularize, regularize_with, step_four_phase, step_two_phase, Boundary};
use lsacm::field::{read_field_dump, read_pgm, write_field_dump, write_pgm};
use lsacm::kernel::{area_field, conv_disk, disk_offsets, DiskKernel};
use lsacm::model::{
    energy, force_fields, memberships, update_b, update_c, update_sigma, SIGMA_FLOOR,
};
use lsacm::pipeline::{cv_reduction_force, cv_segment, segment};
use lsacm::synthlab::{bias_similarity, gen_phantom, matched_jaccard, BiasKind, PhantomSpec, Shape};
use lsacm::{map_jobs, InitSpec, ModelParams, PhaseState, ScalarField, SegOutcome, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------------------
// Random small instances shared by criteria 1-3.

struct Instance {
    image: ScalarField,
    phi: PhaseState,
    params: ModelParams,
    k: DiskKernel,
}

fn random_field(rng: &mut ChaCha8Rng, w: usize, h: usize, lo: f64, hi: f64) -> ScalarField {
    let v = (0..w * h).map(|_| rng.gen_range(lo..hi)).collect();
    ScalarField::from_vec(w, h, v).unwrap()
}

fn instance(seed: u64, four: bool) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = rng.gen_range(8..=16);
    let h = rng.gen_range(8..=16);
    let rho = [1.0, 2.0, 3.0][rng.gen_range(0..3)];
    let image = random_field(&mut rng, w, h, 0.0, 255.0);
    let bias = random_field(&mut rng, w, h, 0.5, 1.5);
    let phi = if four {
        PhaseState::four(
            random_field(&mut rng, w, h, -3.0, 3.0),
            random_field(&mut rng, w, h, -3.0, 3.0),
        )
        .unwrap()
    } else {
        PhaseState::Two(random_field(&mut rng, w, h, -3.0, 3.0))
    };
    let n = phi.n_classes();
    let c = (0..n).map(|_| rng.gen_range(20.0..230.0)).collect();
    let sigma = (0..n).map(|_| rng.gen_range(10.0..80.0)).collect();
    Instance {
        image,
        phi,
        params: ModelParams { c, sigma, bias },
        k: disk_offsets(rho).unwrap(),
    }
}

fn suite() -> Vec<Instance> {
    (0..100).map(|s| instance(s, s % 4 == 3)).collect()
}

const EPS: f64 = 1.0;

fn instance_energy(inst: &Instance, params: &ModelParams) -> f64 {
    energy(&inst.image, params, &inst.phi, EPS, &inst.k).unwrap()
}

// ---------------------------------------------------------------------------
// Brute-force oracles: direct double/triple loops over the defining sums.

fn in_window(k: &DiskKernel, x: usize, y: usize, u: usize, v: usize) -> bool {
    let (dx, dy) = (x as f64 - u as f64, y as f64 - v as f64);
    dx * dx + dy * dy <= k.rho() * k.rho()
}

fn naive_conv(f: &ScalarField, k: &DiskKernel) -> Vec<f64> {
    let (w, h) = (f.width(), f.height());
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            for v in 0..h {
                for u in 0..w {
                    if in_window(k, x, y, u, v) {
                        out[y * w + x] += f.get(u, v);
                    }
                }
            }
        }
    }
    out
}

/// `d_i(y) = sum_x K(x, y) [log s_i + (I(y) - b(x) c_i)^2 / (2 s_i^2)]`.
fn naive_forces(inst: &Instance) -> Vec<Vec<f64>> {
    let (img, p) = (&inst.image, &inst.params);
    let (w, h) = (img.width(), img.height());
    p.c.iter()
        .zip(&p.sigma)
        .map(|(&c, &s)| {
            let mut d = vec![0.0; w * h];
            for y in 0..h {
                for x in 0..w {
                    for v in 0..h {
                        for u in 0..w {
                            if in_window(&inst.k, x, y, u, v) {
                                let r = img.get(x, y) - p.bias.get(u, v) * c;
                                d[y * w + x] += s.ln() + r * r / (2.0 * s * s);
                            }
                        }
                    }
                }
            }
            d
        })
        .collect()
}

fn naive_energy(inst: &Instance) -> f64 {
    let m = memberships(&inst.phi, EPS);
    naive_forces(inst)
        .iter()
        .zip(&m)
        .map(|(d, mi)| d.iter().zip(mi.values()).map(|(a, b)| a * b).sum::<f64>())
        .sum()
}

fn naive_sigma(inst: &Instance) -> Vec<f64> {
    let (img, p) = (&inst.image, &inst.params);
    let (w, h) = (img.width(), img.height());
    let m = memberships(&inst.phi, EPS);
    p.c.iter()
        .zip(&m)
        .map(|(&c, mi)| {
            let (mut num, mut den) = (0.0, 0.0);
            for y in 0..h {
                for x in 0..w {
                    let weight = mi.get(x, y);
                    for v in 0..h {
                        for u in 0..w {
                            if in_window(&inst.k, x, y, u, v) {
                                let r = img.get(x, y) - p.bias.get(u, v) * c;
                                num += weight * r * r;
                                den += weight;
                            }
                        }
                    }
                }
            }
            (num / den).sqrt().max(SIGMA_FLOOR)
        })
        .collect()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / scale.max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------

fn c1_descent() -> Verdict {
    let start = Instant::now();
    let mut worst = f64::NEG_INFINITY;
    for inst in suite() {
        let m = memberships(&inst.phi, EPS);
        let p = &inst.params;
        let e0 = instance_energy(&inst, p);
        let with_c = ModelParams { c: update_c(&inst.image, &m, &p.bias, &inst.k).unwrap(), ..p.clone() };
        let with_b = ModelParams {
            bias: update_b(&inst.image, &m, &p.c, &p.sigma, &inst.k).unwrap(),
            ..p.clone()
        };
        let with_s = ModelParams {
            sigma: update_sigma(&inst.image, &m, &p.bias, &p.c, &inst.k, SIGMA_FLOOR).unwrap(),
            ..p.clone()
        };
        for q in [with_c, with_b, with_s] {
            worst = worst.max((instance_energy(&inst, &q) - e0) / e0.abs());
        }
    }
    let t = start.elapsed();
    check(
        worst <= 1e-9 && t < Duration::from_secs(10),
        format!("max relative energy increase {worst:.3e} (tol 1e-9), {:.2}s", t.as_secs_f64()),
    )
}

fn c2_oracles() -> Verdict {
    let start = Instant::now();
    let (mut conv, mut force, mut sig, mut en) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for inst in suite() {
        conv = conv.max(max_rel(conv_disk(&inst.image, &inst.k).values(), &naive_conv(&inst.image, &inst.k)));
        let fast = force_fields(&inst.image, &inst.params, &inst.k).unwrap();
        for (f, n) in fast.iter().zip(naive_forces(&inst)) {
            force = force.max(max_rel(f.values(), &n));
        }
        let m = memberships(&inst.phi, EPS);
        let p = &inst.params;
        let s = update_sigma(&inst.image, &m, &p.bias, &p.c, &inst.k, SIGMA_FLOOR).unwrap();
        for (a, b) in s.iter().zip(naive_sigma(&inst)) {
            sig = sig.max(rel_err(*a, b));
        }
        en = en.max(rel_err(instance_energy(&inst, p), naive_energy(&inst)));
    }
    let t = start.elapsed();
    let worst = conv.max(force).max(sig).max(en);
    check(
        worst <= 1e-9 && t < Duration::from_secs(30),
        format!(
            "relative error conv {conv:.1e} force {force:.1e} sigma {sig:.1e} energy {en:.1e} (tol 1e-9), {:.2}s",
            t.as_secs_f64()
        ),
    )
}

fn c3_gradient() -> Verdict {
    const H: f64 = 1e-4;
    let mut worst = 0.0f64;
    let mut samples = 0;
    for seed in 0..10u64 {
        let four = seed % 2 == 1;
        let inst = instance(1000 + seed, four);
        let d = force_fields(&inst.image, &inst.params, &inst.k).unwrap();
        // The library's explicit step with dt = 1 moves by minus the energy gradient.
        let increments: Vec<ScalarField> = match &inst.phi {
            PhaseState::Two(p) => {
                vec![step_two_phase(p, &d[0], &d[1], 1.0, EPS).unwrap().zip_map(p, |a, b| a - b).unwrap()]
            }
            PhaseState::Four(p1, p2) => {
                let (a, b) = step_four_phase(p1, p2, &d, 1.0, EPS).unwrap();
                vec![a.zip_map(p1, |x, y| x - y).unwrap(), b.zip_map(p2, |x, y| x - y).unwrap()]
            }
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, h) = (inst.image.width(), inst.image.height());
        for _ in 0..20 {
            let (x, y) = (rng.gen_range(0..w), rng.gen_range(0..h));
            let which = rng.gen_range(0..increments.len());
            let nudge = |delta: f64| {
                let phi = match (inst.phi.clone(), which) {
                    (PhaseState::Two(p), _) => PhaseState::Two(p.with_value(x, y, p.get(x, y) + delta).unwrap()),
                    (PhaseState::Four(p1, p2), 0) => {
                        PhaseState::Four(p1.with_value(x, y, p1.get(x, y) + delta).unwrap(), p2)
                    }
                    (PhaseState::Four(p1, p2), _) => {
                        PhaseState::Four(p1, p2.with_value(x, y, p2.get(x, y) + delta).unwrap())
                    }
                };
                energy(&inst.image, &inst.params, &phi, EPS, &inst.k).unwrap()
            };
            let fd = (nudge(H) - nudge(-H)) / (2.0 * H);
            let analytic = -increments[which].get(x, y);
            worst = worst.max(rel_err(fd, analytic));
            samples += 1;
        }
    }
    check(
        worst <= 1e-5 && samples == 200,
        format!("{samples} pixels, max relative gradient error {worst:.2e} (tol 1e-5)"),
    )
}

fn c4_stability() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut max_violation, mut mass_err) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let (w, h) = (rng.gen_range(4..=24), rng.gen_range(4..=24));
        let phi = random_field(&mut rng, w, h, -50.0, 50.0);
        for dt2 in [0.0, 0.1, 0.25] {
            let out = regularize(&phi, dt2).unwrap();
            max_violation = max_violation.max(phi.min() - out.min()).max(out.max() - phi.max());
            mass_err = mass_err.max(rel_err(out.sum(), phi.sum()));
        }
    }
    let rejected = regularize(&ScalarField::new(4, 4, 0.0).unwrap(), 0.25 + 1e-9).is_err();

    let n = 16;
    let mut amp_err = 0.0f64;
    let mut out_of_band = 0;
    for dt2 in [0.1, 0.25] {
        for k1 in 0..n {
            for k2 in 0..n {
                let (xi1, xi2) = (
                    2.0 * std::f64::consts::PI * k1 as f64 / n as f64,
                    2.0 * std::f64::consts::PI * k2 as f64 / n as f64,
                );
                let mode = ScalarField::from_fn(n, n, |x, y| (xi1 * x as f64 + xi2 * y as f64 + 0.3).cos()).unwrap();
                let out = regularize_with(&mode, dt2, Boundary::Periodic).unwrap();
                let r = 1.0 + 2.0 * dt2 * (xi1.cos() + xi2.cos() - 2.0);
                let dot: f64 = out.values().iter().zip(mode.values()).map(|(a, b)| a * b).sum();
                let norm: f64 = mode.values().iter().map(|a| a * a).sum();
                let measured = dot / norm;
                if measured < 1.0 - 8.0 * dt2 - 1e-9 || measured > 1.0 + 1e-9 {
                    out_of_band += 1;
                }
                amp_err = amp_err.max((measured - r).abs());
                for (o, m) in out.values().iter().zip(mode.values()) {
                    amp_err = amp_err.max((o - r * m).abs());
                }
            }
        }
    }
    check(
        max_violation <= 0.0 && mass_err <= 1e-12 && rejected && out_of_band == 0 && amp_err <= 1e-9,
        format!(
            "max-principle overshoot {max_violation:.1e}, mass error {mass_err:.1e}, dt2=0.25+1e-9 rejected {rejected}, \
             modes outside [1-8dt2,1] {out_of_band}, amplification error {amp_err:.1e}"
        ),
    )
}

fn c5_cv_reduction() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut agree, mut total) = (0usize, 0usize);
    for _ in 0..20 {
        let (w, h) = (rng.gen_range(8..=32), rng.gen_range(8..=32));
        let image = random_field(&mut rng, w, h, 0.0, 255.0);
        let (c1, c2) = (rng.gen_range(0.0..255.0), rng.gen_range(0.0..255.0));
        let k = disk_offsets(rng.gen_range(1.0..6.0)).unwrap();
        let area = area_field(w, h, &k).unwrap();
        let force = cv_reduction_force(&image, c1, c2, &k, &area).unwrap();
        for (f, &i) in force.values().iter().zip(image.values()) {
            let cv = (i - c2).powi(2) - (i - c1).powi(2);
            agree += (signum0(*f) == signum0(cv)) as usize;
            total += 1;
        }
    }
    check(agree == total, format!("sign agreement {agree}/{total} pixels"))
}

fn signum0(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

// ---------------------------------------------------------------------------
// Phantom criteria.

fn disk_spec(lo: f64, hi: f64, noise: f64) -> PhantomSpec {
    PhantomSpec {
        width: 128,
        height: 128,
        shapes: vec![Shape::parse("disk:64,64,30", 1).unwrap()],
        class_levels: vec![60.0, 180.0],
        bias: BiasKind::Ramp { lo, hi },
        noise_sigma: noise,
        seed: 7,
    }
}

fn disk_js(out: &SegOutcome, truth: &lsacm::LabelMap) -> f64 {
    matched_jaccard(&out.labels, truth, 2).unwrap()[1]
}

fn c6_phantom() -> Verdict {
    let p = gen_phantom(&disk_spec(0.5, 1.5, 1.0)).unwrap();
    let start = Instant::now();
    let out = segment(&p.image, &SolverConfig::default()).unwrap();
    let t = start.elapsed();
    let js = disk_js(&out, &p.truth_labels);
    check(
        js >= 0.95 && out.iterations <= 500 && t < Duration::from_secs(30),
        format!("JS {js:.4} (need >= 0.95) after {} iterations, {:.2}s", out.iterations, t.as_secs_f64()),
    )
}

fn c7_init_robustness() -> Verdict {
    let p = gen_phantom(&disk_spec(0.5, 1.5, 1.0)).unwrap();
    let inits = [
        "circle:63.5,63.5,32",
        "circle:40,45,20",
        "circle:85,80,14",
        "rect:10,10,60,100",
        "rect:30,50,115,95",
        "checker:13",
    ];
    let scores = map_jobs(inits.to_vec(), |s| {
        let cfg = SolverConfig { init: vec![s.parse().unwrap()], ..Default::default() };
        disk_js(&segment(&p.image, &cfg).unwrap(), &p.truth_labels)
    });
    let spread = spread(&scores);
    check(spread <= 0.03, format!("JS {} spread {spread:.4} (need <= 0.03)", fmt_list(&scores)))
}

fn c8_rho_robustness() -> Verdict {
    let p = gen_phantom(&disk_spec(0.5, 1.5, 1.0)).unwrap();
    let rhos = vec![5.5, 8.5, 10.5, 14.5, 18.5, 22.5];
    let scores = map_jobs(rhos.clone(), |rho| {
        let cfg = SolverConfig { rho, ..Default::default() };
        disk_js(&segment(&p.image, &cfg).unwrap(), &p.truth_labels)
    });
    let reference = scores[2];
    let worst = scores.iter().map(|s| (s - reference).abs()).fold(0.0, f64::max);
    check(
        worst <= 0.05,
        format!("JS at rho {rhos:?}: {}, max deviation from rho=10.5 {worst:.4} (need <= 0.05)", fmt_list(&scores)),
    )
}

/// Full-width band under a horizontal ramp: the band's dark end meets the
/// background's bright end, so one global threshold cannot separate them.
fn band_spec(lo: f64, hi: f64) -> PhantomSpec {
    PhantomSpec {
        width: 128,
        height: 128,
        shapes: vec![Shape::parse("rect:0,40,127,88", 1).unwrap()],
        class_levels: vec![80.0, 160.0],
        bias: BiasKind::Ramp { lo, hi },
        noise_sigma: 1.0,
        seed: 7,
    }
}

fn c9_inhomogeneity() -> Verdict {
    let spans = vec![(1.0, 1.0), (0.85, 1.15), (0.7, 1.3), (0.55, 1.45), (0.4, 1.6)];
    let scores = map_jobs(spans.clone(), |(lo, hi)| {
        let p = gen_phantom(&band_spec(lo, hi)).unwrap();
        let cfg = SolverConfig::default();
        (
            disk_js(&segment(&p.image, &cfg).unwrap(), &p.truth_labels),
            disk_js(&cv_segment(&p.image, &cfg).unwrap(), &p.truth_labels),
        )
    });
    let lsacm: Vec<f64> = scores.iter().map(|s| s.0).collect();
    let cv: Vec<f64> = scores.iter().map(|s| s.1).collect();
    let ok = lsacm.iter().all(|&j| j >= 0.95)
        && cv[0] >= 0.95
        && cv[1] >= 0.95
        && cv[1] > cv[2]
        && cv[2] > cv[3]
        && cv[3] > cv[4]
        && lsacm[3] - cv[3] >= 0.05
        && lsacm[4] - cv[4] >= 0.05;
    check(ok, format!("LSACM JS {} / CV JS {}", fmt_list(&lsacm), fmt_list(&cv)))
}

fn c10_bias_recovery() -> Verdict {
    let results = map_jobs(vec![1.0, 5.0], |noise| {
        let p = gen_phantom(&disk_spec(0.5, 1.5, noise)).unwrap();
        let out = segment(&p.image, &SolverConfig::default()).unwrap();
        bias_similarity(&out.bias, &p.truth_bias).unwrap()
    });
    let ok = results.iter().all(|s| s.pearson >= 0.95 && s.rmse_gauged <= 0.05);
    let detail = results
        .iter()
        .zip(["noise 1", "noise 5"])
        .map(|(s, name)| format!("{name}: pearson {:.4} rmse {:.4}", s.pearson, s.rmse_gauged))
        .collect::<Vec<_>>()
        .join(", ");
    check(ok, detail + " (need pearson >= 0.95, rmse <= 0.05)")
}

fn c11_four_phase() -> Verdict {
    let spec = PhantomSpec {
        width: 128,
        height: 128,
        shapes: ["disk:64,64,48", "disk:64,64,32", "disk:64,64,16"]
            .iter()
            .enumerate()
            .map(|(i, s)| Shape::parse(s, i as u8 + 1).unwrap())
            .collect(),
        class_levels: vec![50.0, 110.0, 170.0, 230.0],
        bias: BiasKind::GaussBump { a: 0.4, x0: 40.0, y0: 40.0, s: 50.0 },
        noise_sigma: 1.0,
        seed: 7,
    };
    let p = gen_phantom(&spec).unwrap();
    let cfg = SolverConfig {
        n_classes: 4,
        max_iter: 800,
        init: vec![
            InitSpec::Checker { cell: 16 },
            InitSpec::Checker { cell: 24 },
        ],
        ..Default::default()
    };
    let out = segment(&p.image, &cfg).unwrap();
    let js = matched_jaccard(&out.labels, &p.truth_labels, 4).unwrap();
    check(
        js.iter().all(|&j| j >= 0.90) && out.iterations <= 800,
        format!("per-class JS {} (need >= 0.90) after {} iterations", fmt_list(&js), out.iterations),
    )
}

fn c12_gauge() -> Verdict {
    let p = gen_phantom(&disk_spec(0.5, 1.5, 1.0)).unwrap();
    let runs = map_jobs(vec![1.0, 0.5, 2.0], |lambda| {
        segment(&p.image, &SolverConfig { bias_init: lambda, ..Default::default() }).unwrap()
    });
    let base = &runs[0];
    let mut labels_equal = true;
    let mut corrected_err = 0.0f64;
    for r in &runs[1..] {
        labels_equal &= r.labels == base.labels;
        for (a, b) in r.corrected.values().iter().zip(base.corrected.values()) {
            corrected_err = corrected_err.max(rel_err(*a, *b));
        }
    }
    check(
        labels_equal && corrected_err <= 1e-6,
        format!("labels identical {labels_equal}, corrected max relative diff {corrected_err:.2e} (tol 1e-6)"),
    )
}

fn c13_formats_and_cli() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut pgm_ok = true;
    let mut dump_ok = true;
    for _ in 0..50 {
        let (w, h) = (rng.gen_range(1..=40), rng.gen_range(1..=40));
        let gray = ScalarField::from_vec(w, h, (0..w * h).map(|_| rng.gen_range(0..=255) as f64).collect()).unwrap();
        pgm_ok &= read_pgm(&write_pgm(&gray, false).unwrap()).unwrap() == gray;
        let raw = ScalarField::from_vec(
            w,
            h,
            (0..w * h).map(|_| f64::from_bits(rng.gen::<u64>() & !(0x7ff << 52)) * rng.gen_range(-1e300..1e300)).collect(),
        )
        .unwrap();
        let back = read_field_dump(&write_field_dump(&raw)).unwrap();
        dump_ok &= back.values().iter().zip(raw.values()).all(|(a, b)| a.to_bits() == b.to_bits());
    }

    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_lsacm");
    let run_once = |tag: &str| -> Vec<Vec<u8>> {
        let prefix = dir.path().join(format!("p{tag}"));
        let prefix = prefix.to_str().unwrap();
        let synth = Command::new(bin)
            .args(["synth", "--size", "64x64", "--shape", "disk:32,32,15", "--levels", "60,180"])
            .args(["--bias", "ramp:0.5,1.5", "--noise-sigma", "1", "--seed", "7", "--out-prefix", prefix])
            .output()
            .unwrap();
        assert!(synth.status.success());
        let out = |name: &str| dir.path().join(format!("{name}{tag}")).to_str().unwrap().to_string();
        let seg = Command::new(bin)
            .args(["segment", "--in", &format!("{prefix}.pgm"), "--max-iter", "50"])
            .args(["--out-mask", &out("mask"), "--out-bias", &out("bias"), "--out-corrected", &out("corr")])
            .args(["--out-phi", &out("phi"), "--trace", &out("trace")])
            .output()
            .unwrap();
        assert!(seg.status.success());
        let mut files: Vec<Vec<u8>> = ["mask", "bias", "corr", "phi", "trace"]
            .iter()
            .map(|n| std::fs::read(out(n)).unwrap())
            .collect();
        for suffix in [".pgm", "_mask.pgm", "_bias.f64", "_signal.f64", "_spec.txt"] {
            files.push(std::fs::read(format!("{prefix}{suffix}")).unwrap());
        }
        files.push(seg.stdout);
        files
    };
    let cli_ok = run_once("a") == run_once("b");
    check(
        pgm_ok && dump_ok && cli_ok,
        format!("PGM round trip {pgm_ok}, F64FIELD round trip {dump_ok}, CLI byte-identical reruns {cli_ok}"),
    )
}

fn spread(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min)
}

fn fmt_list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("[{}]", items.join(", "))
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 13] = [
        ("closed-form descent", c1_descent),
        ("brute-force oracle equivalence", c2_oracles),
        ("variational gradient check", c3_gradient),
        ("regularizer stability", c4_stability),
        ("Chan-Vese reduction", c5_cv_reduction),
        ("disk phantom segmentation", c6_phantom),
        ("initialization robustness", c7_init_robustness),
        ("window radius robustness", c8_rho_robustness),
        ("inhomogeneity sweep vs Chan-Vese", c9_inhomogeneity),
        ("bias recovery", c10_bias_recovery),
        ("four-phase phantom", c11_four_phase),
        ("bias gauge invariance", c12_gauge),
        ("format round trips and CLI determinism", c13_formats_and_cli),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let verdict = panic::catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|e| {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Err(format!("panicked: {msg}"))
            });
        match verdict {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
