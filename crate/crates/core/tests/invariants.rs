use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use toeplitz_core::bargmann::{FockSpace, ZPoly};
use toeplitz_core::experiments::fit_power_law;
use toeplitz_core::hermitian::{eig_hermitian, min_eigenvalue, op_norm, ComplexMatrix, HermitianOp, C64};
use toeplitz_core::sphere::SphereSpace;
use toeplitz_core::symbols::{parse_symbol, Domain, Symbol};

const MONOMIALS: [&str; 8] = ["1", "x1", "x2", "x3", "x1*x2", "x3^2", "x1*x2*x3", "x2^3"];

fn poly(coeffs: &[f64]) -> String {
    coeffs
        .iter()
        .zip(MONOMIALS)
        .map(|(c, m)| format!("({c})*{m}"))
        .collect::<Vec<_>>()
        .join(" + ")
}

fn sym(s: &str) -> Symbol {
    parse_symbol(s, Domain::Sphere).unwrap()
}

fn coeffs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, MONOMIALS.len())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quantized_symbols_are_hermitian_and_bounded(c in coeffs(), k in 1usize..24) {
        let s = SphereSpace::new(k).unwrap();
        let t = s.toeplitz(&sym(&poly(&c))).unwrap();
        prop_assert!(t.matrix().hermitian_deviation() < 1e-12);
        // every monomial is bounded by 1 on the sphere
        let sup: f64 = c.iter().map(|v| v.abs()).sum();
        prop_assert!(op_norm(&t).unwrap() <= sup * (1.0 + 1e-12));
    }

    #[test]
    fn quantization_is_linear(a in coeffs(), b in coeffs(), s1 in -3.0..3.0f64, s2 in -3.0..3.0f64, k in 1usize..20) {
        let s = SphereSpace::new(k).unwrap();
        let ta = s.toeplitz(&sym(&poly(&a))).unwrap();
        let tb = s.toeplitz(&sym(&poly(&b))).unwrap();
        let mixed: Vec<f64> = a.iter().zip(&b).map(|(x, y)| s1 * x + s2 * y).collect();
        let t = s.toeplitz(&sym(&poly(&mixed))).unwrap();
        let want = ta.scale(s1).add(&tb.scale(s2)).unwrap();
        let scale = t.matrix().max_abs().max(1.0);
        prop_assert!(t.matrix().sub(want.matrix()).unwrap().max_abs() < 1e-11 * scale);
    }

    #[test]
    fn nonnegative_symbols_give_positive_operators(c in coeffs(), shift in 0.0..0.5f64, k in 1usize..24) {
        let s = SphereSpace::new(k).unwrap();
        let f = sym(&format!("({})^2 + {shift}", poly(&c)));
        let t = s.toeplitz(&f).unwrap();
        let tol = 1e-12 * t.matrix().max_abs().max(1.0);
        prop_assert!(min_eigenvalue(&t).unwrap() >= shift - tol);
    }

    #[test]
    fn fock_adjoint_is_the_conjugate_symbol(
        terms in prop::collection::vec((0u32..4, 0u32..4, -1.0..1.0f64, -1.0..1.0f64), 1..5),
        hbar in 0.05..1.0f64,
    ) {
        let p = terms.iter().fold(ZPoly::zero(), |acc, &(a, b, re, im)| {
            acc.add(&ZPoly::monomial(C64::new(re, im), a, b))
        });
        let s = FockSpace::new(hbar, 24).unwrap();
        let lhs = s.toeplitz_poly(&p).unwrap().adjoint();
        let rhs = s.toeplitz_poly(&p.conj()).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().max_abs() < 1e-12 * lhs.max_abs().max(1.0));
    }

    #[test]
    fn power_law_fit_recovers_exponent(c in 1e-6..1e3f64, slope in -3.0..3.0f64, k0 in 2usize..40) {
        let xs: Vec<f64> = (0..5).map(|i| 1.0 / (k0 << i) as f64).collect();
        let vals: Vec<f64> = xs.iter().map(|x| c * x.powf(slope)).collect();
        let fit = fit_power_law(&xs, &vals).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-9);
        // the fitted exponent does not depend on the overall constant
        let scaled: Vec<f64> = vals.iter().map(|v| 7.5 * v).collect();
        prop_assert!((fit_power_law(&xs, &scaled).unwrap().slope - fit.slope).abs() < 1e-9);
    }

    #[test]
    fn eigendecomposition_reconstructs(n in 1usize..40, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = C64::new(rng.gen_range(-1.0..1.0), 0.0);
            for j in i + 1..n {
                let z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                a[(i, j)] = z;
                a[(j, i)] = z.conj();
            }
        }
        let spec = eig_hermitian(&HermitianOp::untagged(a.clone()).unwrap()).unwrap();
        prop_assert!(spec.reconstruct().sub(&a).unwrap().max_abs() < 1e-11);
        prop_assert!(spec.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }
}
