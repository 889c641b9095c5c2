use toeplitz_core::bargmann::{
    composition_expansion, rescaling_check, rescaling_check_poly, FockSpace, InteriorBlock, MarginPolicy, ZPoly,
};
use toeplitz_core::hermitian::{ComplexMatrix, C64};
use toeplitz_core::measurement::{concentration_check, noise_norm, unsharpness_check};
use toeplitz_core::sphere::SphereSpace;
use toeplitz_core::symbols::{parse_symbol, Domain, SampleGrid};

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

// T(z) is the weighted shift √(ħ(l+1)); check against the explicit matrix.
#[test]
fn creation_operator_is_the_weighted_shift() {
    let s = FockSpace::new(0.3, 40).unwrap();
    let tz = s.toeplitz_poly(&ZPoly::z()).unwrap();
    let want = ComplexMatrix::from_fn(40, 40, |m, l| if m == l + 1 { c((0.3 * m as f64).sqrt()) } else { c(0.0) });
    assert!(tz.sub(&want).unwrap().max_abs() < 1e-15);
    let tzb = s.toeplitz_poly(&ZPoly::zbar()).unwrap();
    assert!(tzb.sub(&tz.adjoint()).unwrap().max_abs() == 0.0);
}

// Quadrature assembly of a polynomial symbol agrees with the exact formula,
// and doubling D does not move the interior block.
#[test]
fn quadrature_matches_exact_and_is_stable_under_doubling() {
    let f = parse_symbol("x^2 - 2*x*y + 0.5*y^3", Domain::Plane).unwrap();
    // x = (z + z̄)/2, y = (z − z̄)/(2i)
    let x = ZPoly::z().add(&ZPoly::zbar()).scale(c(0.5));
    let y = ZPoly::z().sub(&ZPoly::zbar()).scale(C64::new(0.0, -0.5));
    let p = x.mul(&x).sub(&x.mul(&y).scale(c(2.0))).add(&y.pow(3).scale(c(0.5)));
    for h in [0.5, 0.125] {
        let s = FockSpace::new(h, 64).unwrap();
        let block = InteriorBlock::new(&s, MarginPolicy::Smooth).unwrap();
        let q = s.toeplitz_general(&f).unwrap();
        let e = s.toeplitz_poly(&p).unwrap();
        assert!(block.restrict(&q.matrix().sub(&e).unwrap()).max_abs() < 1e-9, "hbar={h}");
        let s2 = FockSpace::new(h, 128).unwrap();
        let q2 = s2.toeplitz_general(&f).unwrap();
        let d = block.restrict(&q2.matrix().leading_block(64).sub(q.matrix()).unwrap()).max_abs();
        assert!(d < 1e-9, "hbar={h}: doubling moved the block by {d}");
    }
}

#[test]
fn terminating_expansion_is_exact() {
    // T(z̄^2 z) T(z^2) has only finitely many terms
    let f = ZPoly::monomial(c(1.0), 1, 2);
    let g = ZPoly::monomial(c(2.0), 2, 0).add(&ZPoly::zbar());
    let s = FockSpace::new(0.25, 80).unwrap();
    let prod = s.toeplitz_poly(&f).unwrap().matmul(&s.toeplitz_poly(&g).unwrap()).unwrap();
    let exp = composition_expansion(&f, &g, f.degree_z().min(g.degree_zbar()) + 1, &s).unwrap();
    let block = InteriorBlock::new(&s, MarginPolicy::Degree(f.degree() + g.degree())).unwrap();
    assert!(block.restrict(&prod.sub(&exp).unwrap()).max_abs() < 1e-12);
}

// T_ħ(f) = T_1(f(√ħ ·)) with ħ not a power of two, exactly and by quadrature.
#[test]
fn rescaling_identity_holds_off_dyadic_hbar() {
    let s = FockSpace::new(0.3, 64).unwrap();
    let p = ZPoly::parse("z^2*zbar + 3*zbar").unwrap();
    assert!(rescaling_check_poly(&p, &s).unwrap() < 1e-12);
    for f in ["x^2 + y^2", "cos(x)*sin(y)"] {
        let f = parse_symbol(f, Domain::Plane).unwrap();
        assert!(rescaling_check(&f, &s).unwrap() < 1e-10);
    }
}

// Top eigenvector of T_k(x3) is the highest weight state; its Husimi law for
// u = (1 + x3)/2 is Beta(k+1, 1), so Var x3 = 4(k+1)/((k+2)²(k+3)).
#[test]
fn husimi_variance_of_highest_weight_state_is_beta() {
    let f = parse_symbol("x3", Domain::Sphere).unwrap();
    for k in [4usize, 16, 40] {
        let s = SphereSpace::new(k).unwrap();
        let rep = concentration_check(&s, &f, 0.25, k).unwrap();
        let kf = k as f64;
        let want = 4.0 * (kf + 1.0) / ((kf + 2.0).powi(2) * (kf + 3.0));
        assert!((rep.eigenvalue - kf / (kf + 2.0)).abs() < 1e-12);
        assert!((rep.variance - want).abs() < 1e-10, "k={k}: {} vs {want}", rep.variance);
        assert!((rep.husimi_variance - want).abs() < 1e-8);
        assert!(rep.holds);
    }
}

// Δ(x1) = T(x1²) − T(x1)² is positive and of order ħ.
#[test]
fn noise_of_coordinates_is_positive_and_order_hbar() {
    let f = parse_symbol("x1", Domain::Sphere).unwrap();
    let mut prev = f64::INFINITY;
    for k in [8usize, 16, 32] {
        let s = SphereSpace::new(k).unwrap();
        let (n, lo) = noise_norm(&s, &f).unwrap();
        assert!(lo > -1e-12);
        let scaled = n * k as f64;
        assert!(scaled > 0.5 && scaled < 4.0, "k={k}: {n}");
        assert!(n < prev);
        prev = n;
    }
}

#[test]
fn unsharpness_chain_for_coordinates() {
    let s = SphereSpace::new(12).unwrap();
    let f = parse_symbol("x1", Domain::Sphere).unwrap();
    let g = parse_symbol("x2", Domain::Sphere).unwrap();
    let rep = unsharpness_check(&s, &f, &g, Some(&SampleGrid::fibonacci(500))).unwrap();
    assert!(rep.upper_proxy >= rep.lower_proxy);
    // ½‖[T(x1), T(x2)]‖ = ‖T(x3)‖/(k+2) = k/(k+2)²
    assert!((rep.lower_proxy - 12.0 / 196.0).abs() < 1e-12);
}
