use toeplitz_core::hermitian::{eigvals_hermitian, op_norm, C64};
use toeplitz_core::sphere::{QuadraturePolicy, SphereSpace};
use toeplitz_core::symbols::{parse_symbol, poisson_bracket, Domain, Symbol};

fn sym(s: &str) -> Symbol {
    parse_symbol(s, Domain::Sphere).unwrap()
}

// T_k(x_a) = 2J_a/(k+2) in the spin-k/2 representation, so the spectrum of
// every coordinate is {(k − 2m)/(k + 2)}.
#[test]
fn coordinate_spectra_match_spin_representation() {
    for k in [1usize, 2, 5, 8, 32] {
        let s = SphereSpace::new(k).unwrap();
        for c in ["x1", "x2", "x3", "0.6*x1 + 0.8*x3"] {
            let ev = eigvals_hermitian(&s.toeplitz(&sym(c)).unwrap()).unwrap();
            for (i, v) in ev.iter().enumerate() {
                let want = (2.0 * i as f64 - k as f64) / (k as f64 + 2.0);
                assert!((v - want).abs() < 1e-10, "{c} k={k} i={i}: {v} vs {want}");
            }
        }
    }
}

// tr T_k(f) = (k+1)/(4π) ∫ f dA, and ∫ x3^{2n} dA = 4π/(2n+1) (a Beta moment).
#[test]
fn traces_match_beta_moments() {
    for k in [3usize, 10, 40] {
        let s = SphereSpace::new(k).unwrap();
        for n in 0..4 {
            let f = sym(&format!("x3^{}", 2 * n));
            let tr = s.toeplitz(&f).unwrap().trace();
            let want = (k + 1) as f64 / (2 * n + 1) as f64;
            assert!((tr - want).abs() < 1e-9 * want.max(1.0), "k={k} n={n}: {tr} vs {want}");
        }
        let tr = s.toeplitz(&sym("x1*x2 + x3")).unwrap().trace();
        assert!(tr.abs() < 1e-10);
    }
}

// (−ik)[T(x1), T(x2)] − T({x1, x2}) = 4/(k+2) T(x3), of norm 4k/(k+2)².
#[test]
fn correspondence_remainder_for_coordinates_is_closed_form() {
    for k in [4usize, 16, 64] {
        let s = SphereSpace::new(k).unwrap();
        let t1 = s.toeplitz(&sym("x1")).unwrap();
        let t2 = s.toeplitz(&sym("x2")).unwrap();
        let tb = s.toeplitz(&poisson_bracket(&sym("x1"), &sym("x2")).unwrap()).unwrap();
        let c = t1.matrix().commutator(t2.matrix()).unwrap().scale(C64::new(0.0, -(k as f64)));
        let r = c.sub(tb.matrix()).unwrap().spectral_norm().unwrap();
        let kf = k as f64;
        let want = 4.0 * kf / ((kf + 2.0) * (kf + 2.0));
        assert!((r - want).abs() < 1e-10, "k={k}: {r} vs {want}");
    }
}

// {f, g}(x) = −2 x·(∇F × ∇G) for radially constant extensions; gradients by
// central differences.
#[test]
fn poisson_bracket_matches_finite_differences() {
    let f = sym("sin(x1)*x3 + x2^2");
    let g = sym("cos(x2 + x3)");
    let b = poisson_bracket(&f, &g).unwrap();
    let ext = |s: &Symbol, y: [f64; 3]| {
        let n = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
        s.value(&[y[0] / n, y[1] / n, y[2] / n]).unwrap()
    };
    let grad = |s: &Symbol, x: [f64; 3]| {
        let h = 1e-5;
        let mut out = [0.0; 3];
        for i in 0..3 {
            let (mut a, mut c) = (x, x);
            a[i] += h;
            c[i] -= h;
            out[i] = (ext(s, a) - ext(s, c)) / (2.0 * h);
        }
        out
    };
    for x in [[0.0, 0.0, 1.0], [0.6, 0.0, 0.8], [0.36, 0.48, 0.8], [-0.5, 0.5, -(0.5f64).sqrt()]] {
        let (a, c) = (grad(&f, x), grad(&g, x));
        let cross = [a[1] * c[2] - a[2] * c[1], a[2] * c[0] - a[0] * c[2], a[0] * c[1] - a[1] * c[0]];
        let want = -2.0 * (x[0] * cross[0] + x[1] * cross[1] + x[2] * cross[2]);
        let got = b.value(&x).unwrap();
        assert!((got - want).abs() < 1e-7, "{x:?}: {got} vs {want}");
    }
}

// Σ|e_l(x)|² = (k+1)/(2π) for the total-mass-2π normalization, and the
// normalized coherent state has unit norm.
#[test]
fn bergman_diagonal_is_constant() {
    for k in [1usize, 7, 30] {
        let s = SphereSpace::new(k).unwrap();
        for x in [[0.0, 0.0, 1.0], [0.0, 0.0, -1.0], [0.6, 0.8, 0.0], [0.36, -0.48, 0.8]] {
            let d = s.bergman_diag(&x);
            let want = (k + 1) as f64 / (2.0 * std::f64::consts::PI);
            assert!((d - want).abs() < 1e-10 * want, "k={k}: {d}");
            let cs = s.coherent_state(&x, true);
            let n: f64 = cs.amplitudes.iter().map(|a| a.norm_sqr()).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }
}

// Power iteration on T(f)² as an independent check of the operator norm.
#[test]
fn operator_norm_agrees_with_power_iteration() {
    let s = SphereSpace::new(12).unwrap();
    let t = s.toeplitz(&sym("x1*x2 + 0.3*x3")).unwrap();
    let m = t.matrix();
    let mut v: Vec<C64> = (0..m.rows()).map(|i| C64::new(1.0 + i as f64 * 0.1, 0.2)).collect();
    let mut lambda = 0.0;
    for _ in 0..2000 {
        let w = m.matvec(&m.matvec(&v).unwrap()).unwrap();
        let n = w.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        lambda = n.sqrt() / v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt().sqrt();
        v = w.iter().map(|a| a / n).collect();
    }
    let norm = op_norm(&t).unwrap();
    assert!((norm - lambda).abs() < 1e-8, "{norm} vs {lambda}");
}

#[test]
fn cached_space_reproduces_matrices() {
    let dir = std::env::temp_dir().join(format!("toeplitz-core-cache-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    let policy = QuadraturePolicy::default();
    let (a, path) = SphereSpace::load_or_build(&dir, 10, policy).unwrap();
    assert!(path.exists());
    let (b, path2) = SphereSpace::load_or_build(&dir, 10, policy).unwrap();
    assert_eq!(path, path2);
    let f = sym("cutoff(sign, x1, 0.5) + x3^2");
    let d = a.toeplitz(&f).unwrap().matrix().sub(b.toeplitz(&f).unwrap().matrix()).unwrap();
    assert_eq!(d.max_abs(), 0.0);
    let _ = std::fs::remove_dir_all(&dir);
}
