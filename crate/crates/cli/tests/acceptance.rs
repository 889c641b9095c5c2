//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Tolerances are pinned here, not read from presets.

use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use toeplitz_core::bargmann::{FockSpace, InteriorBlock, MarginPolicy, ZPoly};
use toeplitz_core::hermitian::{eig_hermitian, eigvals_hermitian, ComplexMatrix, HermitianOp, C64};
use toeplitz_core::sphere::SphereSpace;
use toeplitz_core::symbols::{parse_symbol, Domain};
use toeplitz_lab::commands;
use toeplitz_lab::config::{self, RunConfig};
use toeplitz_lab::report::{Check, Outcome};

struct Verdict {
    passed: bool,
    summary: String,
    failures: Vec<String>,
}

impl Verdict {
    fn from_checks<'a>(checks: impl IntoIterator<Item = &'a Check>, extra: &str) -> Self {
        let checks: Vec<&Check> = checks.into_iter().collect();
        let failures: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| c.line()).collect();
        Self {
            passed: failures.is_empty() && !checks.is_empty(),
            summary: format!("{} checks, {} failed{extra}", checks.len(), failures.len()),
            failures,
        }
    }

    fn error(e: impl std::fmt::Display) -> Self {
        Self {
            passed: false,
            summary: format!("error: {e}"),
            failures: vec![],
        }
    }
}

fn cache_dir() -> Option<PathBuf> {
    Some(PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance-cache"))
}

fn cfg(value: Value) -> RunConfig {
    config::resolve(value, &[], None).expect("acceptance config")
}

fn with_anchor<'a>(o: &'a Outcome, prefix: &'a str) -> impl Iterator<Item = &'a Check> + 'a {
    o.checks.iter().filter(move |c| c.anchor.starts_with(prefix))
}

fn criterion_1() -> Verdict {
    let clock = Instant::now();
    let mut failures = Vec::new();
    let mut worst_sphere = 0.0f64;
    let x3 = parse_symbol("x3", Domain::Sphere).unwrap();
    for k in [2usize, 8, 32, 128] {
        let ev = match SphereSpace::new(k).and_then(|s| Ok(eigvals_hermitian(&s.toeplitz(&x3)?)?)) {
            Ok(ev) => ev,
            Err(e) => return Verdict::error(e),
        };
        for (i, v) in ev.iter().enumerate() {
            let m = k - i;
            let want = (k as f64 - 2.0 * m as f64) / (k as f64 + 2.0);
            worst_sphere = worst_sphere.max((v - want).abs());
        }
        if ev.len() != k + 1 {
            failures.push(format!("k={k}: {} eigenvalues", ev.len()));
        }
    }
    if worst_sphere > 1e-8 {
        failures.push(format!("T_k(x3) spectrum off by {worst_sphere:.3e}"));
    }
    let mut worst_fock = 0.0f64;
    for h in [1.0, 0.25, 0.0625] {
        let s = FockSpace::new(h, 256).unwrap();
        let tz = s.toeplitz_poly(&ZPoly::z()).unwrap();
        let tzb = s.toeplitz_poly(&ZPoly::zbar()).unwrap();
        let rhs = s
            .toeplitz_poly(&ZPoly::z().mul(&ZPoly::zbar()))
            .unwrap()
            .sub(&ComplexMatrix::identity(256).scale_real(h))
            .unwrap();
        let block = InteriorBlock::new(&s, MarginPolicy::Degree(2)).unwrap();
        let d = block.restrict(&tz.matmul(&tzb).unwrap().sub(&rhs).unwrap()).max_abs();
        worst_fock = worst_fock.max(d);
    }
    if worst_fock > 1e-12 {
        failures.push(format!("T(z)T(zbar) ladder off by {worst_fock:.3e}"));
    }
    let secs = clock.elapsed().as_secs_f64();
    if secs >= 60.0 {
        failures.push(format!("runtime {secs:.1}s"));
    }
    Verdict {
        passed: failures.is_empty(),
        summary: format!("sphere {worst_sphere:.2e} (tol 1e-8), ladder {worst_fock:.2e} (tol 1e-12), {secs:.1}s (< 60s)"),
        failures,
    }
}

fn axioms_config() -> RunConfig {
    cfg(json!({
        "sphere": {"ks": [16, 32, 64, 128, 256]},
        "axioms": {
            "slopes": {"p1_gap": 0.15, "p2_rem": 0.2, "p2c_rem": 0.2, "p3_rem": 0.2, "p4_err": 0.15},
            "corrected": {"ks": [32, 64, 128, 256], "pair": ["x1", "x2"]}
        }
    }))
}

fn criterion_9() -> Verdict {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut sizes: Vec<usize> = (0..94).map(|i| 2 + i % 63).collect();
    sizes.extend([128, 192, 256, 320, 384, 512]);
    let mut worst = 0.0f64;
    for &n in &sizes {
        let mut a = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = C64::new(rng.gen_range(-1.0..1.0), 0.0);
            for j in i + 1..n {
                let z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                a[(i, j)] = z;
                a[(j, i)] = z.conj();
            }
        }
        let op = HermitianOp::untagged(a.clone()).unwrap();
        match eig_hermitian(&op) {
            Ok(s) => worst = worst.max(s.reconstruct().sub(&a).unwrap().max_abs()),
            Err(e) => failures.push(format!("n={n}: {e}")),
        }
    }
    if worst > 1e-10 {
        failures.push(format!("reconstruction error {worst:.3e}"));
    }

    let exe = env!("CARGO_BIN_EXE_toeplitz-lab");
    let base = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("determinism");
    let mut identical = 0;
    for (cmd, preset) in [("bargmann", "polynomial-exact"), ("joint-noise", "quantum-box")] {
        let mut reports = Vec::new();
        for run in 0..2 {
            let out = base.join(format!("{cmd}-{run}"));
            let _ = std::fs::remove_dir_all(&out);
            let status = Command::new(exe)
                .args([cmd, "--preset", preset, "--jobs", "2", "--print", "quiet", "--out"])
                .arg(&out)
                .status()
                .expect("binary runs");
            if status.code() != Some(0) {
                failures.push(format!("{cmd} --preset {preset} exited {status}"));
            }
            reports.push(std::fs::read(out.join("report.json")).unwrap_or_default());
        }
        if reports[0].is_empty() || reports[0] != reports[1] {
            failures.push(format!("{cmd} reports differ between runs"));
        } else {
            identical += 1;
        }
    }
    Verdict {
        passed: failures.is_empty(),
        summary: format!(
            "{} matrices up to 512, reconstruction {worst:.2e} (tol 1e-10); {identical}/2 byte-identical report pairs",
            sizes.len()
        ),
        failures,
    }
}

fn main() {
    let mut verdicts: Vec<(usize, Verdict)> = Vec::new();
    let cache = cache_dir();

    verdicts.push((1, criterion_1()));

    let clock = Instant::now();
    match commands::verify_axioms(&axioms_config(), cache.clone()) {
        Ok(o) => {
            let secs = clock.elapsed().as_secs_f64();
            let c2: Vec<&Check> = o
                .checks
                .iter()
                .filter(|c| ["P1", "P2:", "P3", "P4"].iter().any(|p| c.anchor.starts_with(p)))
                .collect();
            let mut v2 = Verdict::from_checks(c2, &format!(", {secs:.0}s (< 1200s)"));
            if secs >= 1200.0 {
                v2.passed = false;
                v2.failures.push(format!("runtime {secs:.0}s"));
            }
            verdicts.push((2, v2));
            verdicts.push((3, Verdict::from_checks(with_anchor(&o, "P2c"), "")));
            verdicts.push((5, Verdict::from_checks(with_anchor(&o, "MS"), "")));
        }
        Err(e) => {
            for n in [2, 3, 5] {
                verdicts.push((n, Verdict::error(&e)));
            }
        }
    }

    verdicts.push((
        4,
        match commands::bargmann(&cfg(json!({})), cache.clone()) {
            Ok(o) => Verdict::from_checks(&o.checks, ""),
            Err(e) => Verdict::error(e),
        },
    ));
    verdicts.push((
        6,
        match commands::joint_noise(&cfg(json!({})), cache.clone()) {
            Ok(o) => Verdict::from_checks(&o.checks, ""),
            Err(e) => Verdict::error(e),
        },
    ));
    // κ = 1: with κ = 6 every radius of the grid is below κ√ħ at k = 128
    verdicts.push((
        7,
        match commands::localization(&cfg(json!({"localization": {"kappa": 1.0}})), cache.clone()) {
            Ok(o) => Verdict::from_checks(&o.checks, ""),
            Err(e) => Verdict::error(e),
        },
    ));
    verdicts.push((
        8,
        match commands::rigidity(&cfg(json!({"rigidity": {"dimension": null}})), cache.clone()) {
            Ok(o) => Verdict::from_checks(&o.checks, ""),
            Err(e) => Verdict::error(e),
        },
    ));
    verdicts.push((9, criterion_9()));

    verdicts.sort_by_key(|v| v.0);
    let mut all = true;
    for (n, v) in &verdicts {
        all &= v.passed;
        println!("criterion {n}: {} {}", if v.passed { "PASS" } else { "FAIL" }, v.summary);
        for f in &v.failures {
            println!("    {f}");
        }
    }
    if !all {
        std::process::exit(1);
    }
}
