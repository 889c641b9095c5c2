//! Browser demo. The plain functions do the work and are tested natively;
//! the `wasm_*` exports only convert errors for JavaScript.

use num_complex::Complex64;
use wasm_bindgen::prelude::*;

use toeplitz_core::hermitian::eig_hermitian;
use toeplitz_core::measurement::unsharpness_check;
use toeplitz_core::sphere::SphereSpace;
use toeplitz_core::symbols::{cutoff_compose, parse_symbol, CutoffProfile, Domain};

/// Largest k the page offers; assembly and Jacobi stay interactive below it.
pub const MAX_K: usize = 96;

fn space(k: usize) -> Result<SphereSpace, String> {
    if k == 0 || k > MAX_K {
        return Err(format!("k must be in 1..={MAX_K}"));
    }
    SphereSpace::new(k).map_err(|e| e.to_string())
}

/// Eigenvalues of T_k(f), ascending.
pub fn spectrum(symbol: &str, k: usize) -> Result<Vec<f64>, String> {
    let f = parse_symbol(symbol, Domain::Sphere).map_err(|e| e.to_string())?;
    let s = space(k)?;
    let op = s.toeplitz(&f).map_err(|e| e.to_string())?;
    Ok(eig_hermitian(&op).map_err(|e| e.to_string())?.eigenvalues)
}

/// Husimi density of the `index`-th eigenvector of T_k(f) on an
/// equirectangular grid, row-major from the north pole, normalized to max 1.
pub fn husimi_map(symbol: &str, k: usize, index: usize, n_lat: usize, n_lon: usize) -> Result<Vec<f64>, String> {
    let f = parse_symbol(symbol, Domain::Sphere).map_err(|e| e.to_string())?;
    let s = space(k)?;
    let spec = eig_hermitian(&s.toeplitz(&f).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    if index > k {
        return Err(format!("eigenvector index {index} out of range 0..={k}"));
    }
    let xi: Vec<Complex64> = spec.eigenvector(index);
    let mut out = Vec::with_capacity(n_lat * n_lon);
    for i in 0..n_lat {
        let theta = std::f64::consts::PI * (i as f64 + 0.5) / n_lat as f64;
        for j in 0..n_lon {
            let phi = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / n_lon as f64 - std::f64::consts::PI;
            let x = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
            out.push(s.husimi_density(&xi, &x).map_err(|e| e.to_string())?);
        }
    }
    let max = out.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        out.iter_mut().for_each(|v| *v /= max);
    }
    Ok(out)
}

/// Upper and lower joint-noise proxies for sign cutoffs of f at scale
/// r ħ^p and of g at R ħ^q, one (k, upper, lower) triple per k.
pub fn joint_noise_curve(f: &str, g: &str, p: f64, q: f64, r: f64, big_r: f64, ks: &[usize]) -> Result<Vec<f64>, String> {
    let f = parse_symbol(f, Domain::Sphere).map_err(|e| e.to_string())?;
    let g = parse_symbol(g, Domain::Sphere).map_err(|e| e.to_string())?;
    let u = CutoffProfile::sign();
    let mut out = Vec::with_capacity(3 * ks.len());
    for &k in ks {
        let s = space(k)?;
        let h = 1.0 / k as f64;
        let big_f = cutoff_compose(&u, &f, r * h.powf(p)).map_err(|e| e.to_string())?;
        let big_g = cutoff_compose(&u, &g, big_r * h.powf(q)).map_err(|e| e.to_string())?;
        let rep = unsharpness_check(&s, &big_f, &big_g, None).map_err(|e| e.to_string())?;
        out.extend([k as f64, rep.upper_proxy, rep.lower_proxy]);
    }
    Ok(out)
}

#[wasm_bindgen(js_name = spectrum)]
pub fn wasm_spectrum(symbol: &str, k: usize) -> Result<Vec<f64>, JsValue> {
    spectrum(symbol, k).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = husimiMap)]
pub fn wasm_husimi_map(symbol: &str, k: usize, index: usize, n_lat: usize, n_lon: usize) -> Result<Vec<f64>, JsValue> {
    husimi_map(symbol, k, index, n_lat, n_lon).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = jointNoiseCurve)]
#[allow(clippy::too_many_arguments)]
pub fn wasm_joint_noise_curve(f: &str, g: &str, p: f64, q: f64, r: f64, big_r: f64, ks: Vec<usize>) -> Result<Vec<f64>, JsValue> {
    joint_noise_curve(f, g, p, q, r, big_r, &ks).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spin_spectrum() {
        let ev = spectrum("x3", 4).unwrap();
        let want = [-4.0, -2.0, 0.0, 2.0, 4.0].map(|v| v / 6.0);
        for (a, b) in ev.iter().zip(want) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn husimi_of_top_state_peaks_at_the_pole() {
        let m = husimi_map("x3", 8, 8, 9, 4).unwrap();
        assert_eq!(m.len(), 36);
        assert!(m[0] > 0.99);
        assert!(m[35] < 1e-6);
    }

    #[test]
    fn curve_and_errors() {
        let c = joint_noise_curve("x1", "x2", 0.0, 0.0, 6.0, 6.0, &[8, 16]).unwrap();
        assert_eq!(c.len(), 6);
        assert!(c[1] >= c[2] && c[4] >= c[5]);
        assert!(spectrum("x1 +", 8).unwrap_err().contains("column"));
        assert!(spectrum("x1", MAX_K + 1).is_err());
    }
}
