//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p antijam-cli --test acceptance`.

use std::f64::consts::{PI, TAU};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use antijam_cli::{
    cmd_bench_scaling, cmd_compare_stepsize, cmd_impairment_study, cmd_synthesize, CommonArgs, Context,
    SynthesisReport,
};
use antijam_core::analog::{
    epsilon_objective, project_mainlobe, project_null, project_sidelobe, solve_epsilon_analog, AdmmParams,
};
use antijam_core::array::{steering_matrix, UlaGeometry, UpaGeometry};
use antijam_core::digital::{
    epsilon_objective_digital, project_mainlobe_digital, project_null_digital, project_sidelobe_digital,
    ripple_deviations, solve_epsilon_digital, MAX_EPSILON,
};
use antijam_core::impairments::{
    quantize_phase, realized_weights, resolution, select_codes_cosine, select_codes_naive, ChannelErrors,
    ImpairmentModel, PhaseMap,
};
use antijam_core::manifold::{euclidean_gradient, ls_objective, retract, riemannian_project, LsSystem};
use antijam_core::Complex64;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn context(name: &str, out: &Path) -> Context {
    Context::load(&CommonArgs {
        config: config(name),
        seed: None,
        mode: None,
        weights: None,
        out: Some(out.to_path_buf()),
    })
    .unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn synthesize(name: &str, out: &Path) -> (SynthesisReport, f64) {
    let start = Instant::now();
    let report = cmd_synthesize(&context(name, out)).unwrap_or_else(|e| panic!("{name}: {e}")).report;
    (report, start.elapsed().as_secs_f64())
}

fn single_ap(out: &Path) -> Outcome {
    let (r, secs) = synthesize("single_jammer.toml", out);
    let p = &r.pattern;
    let pass = p.ripple_db <= 2.0 && p.max_sidelobe_db <= -13.0 && p.max_null_db <= -27.0 && secs < 60.0;
    outcome(
        pass,
        format!(
            "ripple {:.3} dB (<= 2), sidelobe {:.3} dB (<= -13), null {:.3} dB (<= -27), {secs:.1} s (< 60)",
            p.ripple_db, p.max_sidelobe_db, p.max_null_db
        ),
    )
}

fn two_jammers(out: &Path) -> Outcome {
    let (r, _) = synthesize("two_jammers.toml", out);
    let p = &r.pattern;
    outcome(
        p.max_null_db <= -27.0,
        format!("max null over both regions {:.3} dB (<= -27)", p.max_null_db),
    )
}

fn comp(out: &Path) -> Outcome {
    let (r, _) = synthesize("comp_l10.toml", out);
    let p = &r.pattern;
    let pass = r.num_aps == 10 && p.ripple_db <= 1.5 && p.max_sidelobe_db <= -14.0 && p.max_null_db <= -29.0;
    outcome(
        pass,
        format!(
            "L = {}: ripple {:.3} dB (<= 1.5), sidelobe {:.3} dB (<= -14), null {:.3} dB (<= -29)",
            r.num_aps, p.ripple_db, p.max_sidelobe_db, p.max_null_db
        ),
    )
}

/// Closest point of the annulus `lo <= |z| <= hi` by refined search over polar coordinates.
fn closest_point(x: Complex64, lo: f64, hi: f64) -> Complex64 {
    let (mut r0, mut r1, mut t0, mut t1) = (lo, hi, -PI, PI);
    let mut best = (f64::INFINITY, lo, 0.0);
    let n = 120;
    for _ in 0..14 {
        for i in 0..=n {
            let r = r0 + (r1 - r0) * i as f64 / n as f64;
            for j in 0..=n {
                let t = t0 + (t1 - t0) * j as f64 / n as f64;
                let d = (Complex64::from_polar(r, t) - x).norm();
                if d < best.0 {
                    best = (d, r, t);
                }
            }
        }
        let (dr, dt) = (2.0 * (r1 - r0) / n as f64, 2.0 * (t1 - t0) / n as f64);
        (r0, r1) = ((best.1 - dr).max(lo), (best.1 + dr).min(hi));
        (t0, t1) = (best.2 - dt, best.2 + dt);
    }
    Complex64::from_polar(best.1, best.2)
}

fn grid_min(f: impl Fn(f64) -> f64, hi: f64) -> f64 {
    let n = 20_000;
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=n {
        let s = hi * i as f64 / n as f64;
        let v = f(s);
        if v < best.0 {
            best = (v, s);
        }
    }
    let step = hi / n as f64;
    let (mut a, mut b) = ((best.1 - step).max(0.0), (best.1 + step).min(hi));
    let r = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let (c, d) = (b - r * (b - a), a + r * (b - a));
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let s = 0.5 * (a + b);
    if f(s) < best.0 {
        s
    } else {
        best.1
    }
}

fn polar_samples(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::from_polar(scale * rng.random::<f64>(), rng.random_range(-PI..PI)))
        .collect()
}

fn oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_proj: f64 = 0.0;
    for _ in 0..200 {
        let x = Complex64::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let eps = rng.random_range(0.01..2.0);
        let alpha = rng.random_range(1.0..1.5);
        let eta = rng.random_range(1e-4..0.1);
        let de = rng.random_range(0.0..0.99);
        let cases = [
            (project_mainlobe(x, eps, alpha), eps.sqrt(), (alpha * eps).sqrt()),
            (project_sidelobe(x, eps, eta), 0.0, (eta * eps).sqrt()),
            (project_null(x, eps, eta), 0.0, (eta * eps).sqrt()),
            (project_mainlobe_digital(x, de), (1.0 - de).sqrt(), (1.0 + de).sqrt()),
            (project_sidelobe_digital(x, eta), 0.0, eta.sqrt()),
            (project_null_digital(x, eta), 0.0, eta.sqrt()),
        ];
        for (p, lo, hi) in cases {
            worst_proj = worst_proj.max((p - closest_point(x, lo, hi)).norm());
        }
    }

    let mut worst_analog: f64 = 0.0;
    for _ in 0..200 {
        let params = AdmmParams {
            rho: 1e-5,
            itermax: 50,
            kappa: 1e-6,
            alpha: rng.random_range(1.01..1.5),
            eta_z_lin: 10f64.powf(rng.random_range(-4.0..-2.0)),
            eta_sl_lin: 10f64.powf(rng.random_range(-2.0..-1.0)),
        };
        let counts = (rng.random_range(2..12), rng.random_range(0..30), rng.random_range(0..10));
        let h = polar_samples(&mut rng, counts.0, 2.0);
        let g = polar_samples(&mut rng, counts.1, 0.5);
        let q = polar_samples(&mut rng, counts.2, 0.1);
        let eps = solve_epsilon_analog(&h, &g, &q, &params).unwrap();
        let mag = |v: &[Complex64]| v.iter().map(|z| z.norm()).collect::<Vec<_>>();
        let (rh, rg, rq) = (mag(&h), mag(&g), mag(&q));
        let hi = rh
            .iter()
            .copied()
            .chain(rg.iter().map(|r| r / params.eta_sl_lin.sqrt()))
            .chain(rq.iter().map(|r| r / params.eta_z_lin.sqrt()))
            .fold(0.0, f64::max)
            * 2.0
            + 1.0;
        let s = grid_min(|s| epsilon_objective(s, &rh, &rg, &rq, &params), hi);
        worst_analog = worst_analog.max((eps - s * s).abs());
    }

    let mut worst_digital: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(1..20);
        let h = polar_samples(&mut rng, n, 1.6);
        let eps = solve_epsilon_digital(&h).unwrap();
        let e = ripple_deviations(&h);
        let s = grid_min(|s| epsilon_objective_digital(s * s, &e), MAX_EPSILON.sqrt());
        worst_digital = worst_digital.max((eps - s * s).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst_proj <= 1e-5 && worst_analog <= 1e-3 && worst_digital <= 1e-3 && secs < 300.0,
        format!(
            "projection gap {worst_proj:.2e} (<= 1e-5), analog scale gap {worst_analog:.2e}, digital scale gap {worst_digital:.2e} (<= 1e-3), {secs:.1} s (< 300)"
        ),
    )
}

fn random_system(rng: &mut ChaCha8Rng) -> LsSystem {
    let n = rng.random_range(2..32);
    let k = rng.random_range(n..3 * n);
    let angles: Vec<f64> = (0..k).map(|_| rng.random_range(-90.0..90.0)).collect();
    let a = steering_matrix(&UlaGeometry::half_wavelength(n).unwrap(), &angles).unwrap();
    let u = (0..k)
        .map(|_| Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)))
        .collect();
    LsSystem::new(u, a).unwrap()
}

fn manifold() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let (mut tangency, mut modulus, mut fd_rel): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let h = 1e-6;
    for _ in 0..100 {
        let sys = random_system(&mut rng);
        let n = sys.num_antennas();
        let w: Vec<Complex64> = (0..n).map(|_| Complex64::cis(rng.random_range(-PI..PI))).collect();
        let g = riemannian_project(&euclidean_gradient(&w, &sys).unwrap(), &w).unwrap();
        for (gi, wi) in g.iter().zip(&w) {
            tangency = tangency.max((gi * wi.conj()).re.abs() / (1.0 + gi.norm()));
        }

        let d: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)))
            .collect();
        let r = retract(&w, &d, rng.random_range(0.0..3.0)).unwrap();
        modulus = modulus.max(r.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max));

        let x: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let eg = euclidean_gradient(&x, &sys).unwrap();
        let mut err = 0.0;
        for i in 0..n {
            let part = |dir: Complex64| {
                let (mut p, mut m) = (x.clone(), x.clone());
                p[i] += dir * h;
                m[i] -= dir * h;
                (ls_objective(&p, &sys).unwrap() - ls_objective(&m, &sys).unwrap()) / (2.0 * h)
            };
            let fd = Complex64::new(part(Complex64::new(1.0, 0.0)), part(Complex64::i())) * 0.5;
            err += (eg[i] - fd).norm_sqr();
        }
        let size: f64 = eg.iter().map(|z| z.norm_sqr()).sum();
        fd_rel = fd_rel.max((err / size.max(1e-24)).sqrt());
    }
    outcome(
        tangency < 1e-10 && modulus < 1e-12 && fd_rel < 1e-5,
        format!("tangency {tangency:.2e} (< 1e-10), modulus {modulus:.2e} (< 1e-12), gradient {fd_rel:.2e} (< 1e-5)"),
    )
}

fn step_size(out: &Path) -> Outcome {
    let (rows, r, _) = cmd_compare_stepsize(&context("compare_stepsize.toml", out)).unwrap();
    let s = &r.summary;
    let e2e = r.end_to_end.speedup;
    let pass = rows.len() == 50
        && r.unfolded_faster
        && s.within_ratio >= 0.9
        && s.ratio_limit == 1.25
        && e2e > 1.0
        && e2e <= 30.0;
    outcome(
        pass,
        format!(
            "{} instances, {:.0}% within {}x (>= 90%), subproblem {:.3} s vs {:.3} s, synthesis speedup {e2e:.2}x (1..30)",
            rows.len(),
            100.0 * s.within_ratio,
            s.ratio_limit,
            s.unfolded_total_s,
            s.armijo_total_s
        ),
    )
}

fn scaling(out: &Path) -> Outcome {
    let (r, _) = cmd_bench_scaling(&context("bench_scaling.toml", out)).unwrap();
    let ls: Vec<usize> = r.rows.iter().map(|b| b.num_aps).collect();
    outcome(
        ls == [2, 4, 6, 8, 10] && r.fit.r_squared >= 0.9,
        format!("L = {ls:?}, slope {:.4} s/AP, R^2 {:.4} (>= 0.9)", r.fit.slope, r.fit.r_squared),
    )
}

fn impairments(out: &Path) -> Outcome {
    let mut bound_ok = true;
    for bits in 3..=8 {
        let d = resolution(bits);
        let fine = (0..200_000).map(|i| -2.0 * TAU + 4.0 * TAU * i as f64 / 200_000.0);
        let edges = (0..2u32 << bits).map(|k| k as f64 * d / 2.0);
        for phi in fine.chain(edges) {
            let (_, err) = quantize_phase(phi, bits).unwrap();
            bound_ok &= err.abs() <= d / 2.0 + 1e-12;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let geom = UpaGeometry::new(10, 100).unwrap();
    let bits = 6;
    let model = ImpairmentModel {
        errors: ChannelErrors::zero(&geom),
        bits: Some(bits),
        phase_map: Some(PhaseMap::synthetic(geom.channels(), bits, resolution(bits), 7).unwrap()),
    };
    let ideal = DMatrix::from_fn(10, 100, |_, _| Complex64::cis(rng.random_range(-PI..PI)));
    let chosen = realized_weights(&select_codes_cosine(&ideal, &model).unwrap(), &model).unwrap();
    let naive = realized_weights(&select_codes_naive(&ideal, bits).unwrap(), &model).unwrap();
    let losses = (0..geom.channels())
        .filter(|&c| {
            let idx = (c / 100, c % 100);
            (ideal[idx].conj() * chosen[idx]).re < (ideal[idx].conj() * naive[idx]).re - 1e-15
        })
        .count();

    let (_, r, _) = cmd_impairment_study(&context("impairment_8x16.toml", out)).unwrap();
    outcome(
        bound_ok && losses == 0 && r.sigma_p == 0.3 && r.null_improvement_db >= 10.0,
        format!(
            "half-step bound {} for b = 3..8, cosine loses on {losses}/1000 channels, null {:.2} -> {:.2} dB, improvement {:.2} dB (>= 10)",
            if bound_ok { "holds" } else { "violated" },
            r.null_uncorrected_db,
            r.null_compensated_db,
            r.null_improvement_db
        ),
    )
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism(first: &Path, second: &Path) -> Outcome {
    synthesize("single_jammer.toml", second);
    let (a, b) = (csv_files(first), csv_files(second));
    let differing: Vec<&str> = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    outcome(
        a.len() == b.len() && a.len() >= 5 && differing.is_empty(),
        format!("{} CSVs compared, differing: {differing:?}", a.len()),
    )
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = |name: &str| tmp.path().join(name);
    let criteria: Vec<Criterion> = vec![
        ("single_ap_synthesis", Box::new(|| single_ap(&dir("single")))),
        ("two_jammer_nulls", Box::new(|| two_jammers(&dir("two")))),
        ("comp_ten_aps", Box::new(|| comp(&dir("comp")))),
        ("projection_and_scale_oracles", Box::new(oracles)),
        ("manifold_geometry", Box::new(manifold)),
        ("step_size_ordering", Box::new(|| step_size(&dir("compare")))),
        ("scaling_linearity", Box::new(|| scaling(&dir("bench")))),
        ("impairment_compensation", Box::new(|| impairments(&dir("impairment")))),
        ("determinism", Box::new(|| determinism(&dir("single"), &dir("single_again")))),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        let o = check();
        failed += usize::from(!o.pass);
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
