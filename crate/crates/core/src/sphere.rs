//! Berezin–Toeplitz quantization of S² ≅ CP¹ at level k.
//!
//! Chart: z = (x₁ + i x₂)/(1 + x₃), stereographic from the south pole. The
//! sections are polynomials of degree ≤ k in z with pointwise weight
//! (1 + |z|²)^{−k}; the orthonormal basis is e_m = z^m/‖z^m‖. In the
//! variables t = |z|²/(1 + |z|²) = (1 − x₃)/2 and φ = arg z the form ω
//! (total area 2π) is dt dφ and
//!
//!   e_m = ψ_m(t) e^{imφ},  ψ_m(t) = t^{m/2}(1 − t)^{(k−m)/2} / ‖z^m‖,
//!   ‖z^m‖² = 2π m!(k − m)!/(k + 1)!.
//!
//! Matrix elements ⟨e_m, f e_l⟩ = ∫ ψ_m ψ_l f̂(t, l − m) dt, where
//! f̂(t, d) = ∫ f e^{idφ} dφ is taken by an FFT of the angular samples and the
//! t-integral by Gauss–Legendre.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::{ComplexMatrix, ContextTag, HermitianOp, C64};
use crate::quadrature::gauss_legendre;
use crate::symbols::{laplacian, Domain, Symbol, SymbolError};

/// Entrywise change tolerated between a quadrature and its doubling.
pub const DOUBLING_TOL: f64 = 1e-8;
const INTEGRAL_TOL_FACTOR: f64 = 1e-2;
/// Trig degree assumed for non-polynomial symbols before any doubling.
const NONPOLY_DEGREE: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Resolution {
    pub n_phi: usize,
    pub n_t: usize,
}

impl Resolution {
    pub fn doubled(self) -> Self {
        Self {
            n_phi: 2 * self.n_phi,
            n_t: 2 * self.n_t,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraturePolicy {
    pub tolerance: f64,
    pub max_doublings: u32,
}

impl Default for QuadraturePolicy {
    fn default() -> Self {
        Self {
            tolerance: DOUBLING_TOL,
            max_doublings: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameConvention {
    pub chart: String,
    pub frame: String,
    pub weight: String,
}

impl Default for FrameConvention {
    fn default() -> Self {
        Self {
            chart: "z = (x1 + i x2)/(1 + x3), stereographic from the south pole".into(),
            frame: "monomial sections z^m, m = 0..k".into(),
            weight: "|s|^2 = |p(z)|^2 (1 + |z|^2)^(-k)".into(),
        }
    }
}

/// The level-k space with its base quadrature. Immutable after construction.
#[derive(Clone, Debug)]
pub struct SphereSpace {
    k: usize,
    /// ln ‖z^m‖²
    log_norms: Vec<f64>,
    base: Resolution,
    t_nodes: Arc<Vec<f64>>,
    t_weights: Arc<Vec<f64>>,
    policy: QuadraturePolicy,
    frame: FrameConvention,
}

/// Portable on-disk form of a space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceCache {
    pub k: usize,
    pub n_phi: usize,
    pub n_t: usize,
    pub log_norms: Vec<f64>,
    pub t_nodes: Vec<f64>,
    pub t_weights: Vec<f64>,
    pub frame: FrameConvention,
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|i| (i as f64).ln()).sum()
}

/// Point on S² for (t, φ).
pub fn point_from_t_phi(t: f64, phi: f64) -> [f64; 3] {
    let s = 2.0 * (t * (1.0 - t)).max(0.0).sqrt();
    [s * phi.cos(), s * phi.sin(), 1.0 - 2.0 * t]
}

/// (t, φ) for a point on S² (normalized first).
pub fn t_phi_from_point(x: &[f64; 3]) -> (f64, f64) {
    let n = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    let t = ((1.0 - x[2] / n) / 2.0).clamp(0.0, 1.0);
    (t, x[1].atan2(x[0]))
}

pub fn default_resolution(k: usize, degree: usize) -> Resolution {
    Resolution {
        n_phi: 4 * (k + degree + 8),
        n_t: (2 * (k + 16)).max((k + degree) / 2 + 2),
    }
}

impl SphereSpace {
    pub fn new(k: usize) -> Result<Self> {
        Self::with_policy(k, QuadraturePolicy::default())
    }

    pub fn with_policy(k: usize, policy: QuadraturePolicy) -> Result<Self> {
        if k == 0 {
            return Err(Error::Invalid("sphere level k must be positive".into()));
        }
        let base = default_resolution(k, 0);
        let (t_nodes, t_weights) = gauss_legendre(base.n_t, 0.0, 1.0);
        let lf_k1 = ln_factorial(k + 1);
        let log_norms = (0..=k)
            .map(|m| (2.0 * PI).ln() + ln_factorial(m) + ln_factorial(k - m) - lf_k1)
            .collect();
        Ok(Self {
            k,
            log_norms,
            base,
            t_nodes: Arc::new(t_nodes),
            t_weights: Arc::new(t_weights),
            policy,
            frame: FrameConvention::default(),
        })
    }

    pub fn from_cache(cache: SpaceCache) -> Result<Self> {
        let k = cache.k;
        if k == 0
            || cache.log_norms.len() != k + 1
            || cache.t_nodes.len() != cache.n_t
            || cache.t_weights.len() != cache.n_t
        {
            return Err(Error::Invalid(format!("inconsistent cached space for k = {k}")));
        }
        Ok(Self {
            k,
            log_norms: cache.log_norms,
            base: Resolution {
                n_phi: cache.n_phi,
                n_t: cache.n_t,
            },
            t_nodes: Arc::new(cache.t_nodes),
            t_weights: Arc::new(cache.t_weights),
            policy: QuadraturePolicy::default(),
            frame: cache.frame,
        })
    }

    pub fn to_cache(&self) -> SpaceCache {
        SpaceCache {
            k: self.k,
            n_phi: self.base.n_phi,
            n_t: self.base.n_t,
            log_norms: self.log_norms.clone(),
            t_nodes: self.t_nodes.to_vec(),
            t_weights: self.t_weights.to_vec(),
            frame: self.frame.clone(),
        }
    }

    pub fn cache_file_name(k: usize, res: Resolution) -> String {
        format!("sphere-k{k}-nphi{}-nt{}.json", res.n_phi, res.n_t)
    }

    /// Load the space from `dir` if a cache file exists, otherwise build it
    /// and write the file.
    pub fn load_or_build(dir: &Path, k: usize, policy: QuadraturePolicy) -> Result<(Self, PathBuf)> {
        let path = dir.join(Self::cache_file_name(k, default_resolution(k, 0)));
        if let Ok(text) = std::fs::read_to_string(&path) {
            let cache: SpaceCache = serde_json::from_str(&text)
                .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
            let mut space = Self::from_cache(cache)?;
            space.policy = policy;
            return Ok((space, path));
        }
        let space = Self::with_policy(k, policy)?;
        std::fs::create_dir_all(dir)
            .and_then(|_| {
                let text = serde_json::to_string(&space.to_cache()).expect("cache serializes");
                std::fs::write(&path, text)
            })
            .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
        Ok((space, path))
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn hbar(&self) -> f64 {
        1.0 / self.k as f64
    }

    pub fn dim(&self) -> usize {
        self.k + 1
    }

    pub fn base_resolution(&self) -> Resolution {
        self.base
    }

    pub fn policy(&self) -> QuadraturePolicy {
        self.policy
    }

    pub fn frame(&self) -> &FrameConvention {
        &self.frame
    }

    /// ‖z^m‖² for m = 0..=k.
    pub fn basis_norms(&self) -> Vec<f64> {
        self.log_norms.iter().map(|l| l.exp()).collect()
    }

    pub fn context(&self) -> ContextTag {
        ContextTag::new(format!("sphere k={}", self.k))
    }

    fn t_rule(&self, n_t: usize) -> (Arc<Vec<f64>>, Arc<Vec<f64>>) {
        if n_t == self.base.n_t {
            (self.t_nodes.clone(), self.t_weights.clone())
        } else {
            let (x, w) = gauss_legendre(n_t, 0.0, 1.0);
            (Arc::new(x), Arc::new(w))
        }
    }

    fn log_psi(&self, m: usize, t: f64) -> f64 {
        let k = self.k;
        let a = if m == 0 { 0.0 } else { 0.5 * m as f64 * t.ln() };
        let b = if m == k { 0.0 } else { 0.5 * (k - m) as f64 * (1.0 - t).ln() };
        a + b - 0.5 * self.log_norms[m]
    }

    /// ψ_m(t) for m = 0..=k.
    pub fn radial_profile(&self, t: f64) -> Vec<f64> {
        (0..=self.k).map(|m| self.log_psi(m, t).exp()).collect()
    }

    /// e_m(x) in the chart frame, m = 0..=k.
    pub fn basis_at(&self, x: &[f64; 3]) -> Vec<C64> {
        let (t, phi) = t_phi_from_point(x);
        self.radial_profile(t)
            .into_iter()
            .enumerate()
            .map(|(m, p)| C64::from_polar(p, m as f64 * phi))
            .collect()
    }

    /// Toeplitz matrix from a sampler at a fixed resolution.
    pub fn assemble<F>(&self, res: Resolution, f: F) -> Result<ComplexMatrix>
    where
        F: Fn(&[f64; 3]) -> Result<f64> + Sync,
    {
        let (t_nodes, _) = self.t_rule(res.n_t);
        let dphi = 2.0 * PI / res.n_phi as f64;
        let rows: Vec<Vec<f64>> = t_nodes
            .par_iter()
            .map(|&t| {
                (0..res.n_phi)
                    .map(|j| {
                        let x = point_from_t_phi(t, j as f64 * dphi);
                        let v = f(&x)?;
                        if !v.is_finite() {
                            return Err(Error::Invalid(format!("symbol is not finite at {x:?}")));
                        }
                        Ok(v)
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        self.assemble_rows(res, &rows)
    }

    /// Assemble from symbol values sampled at the nodes of
    /// [`quadrature_points`](Self::quadrature_points), in the same order.
    pub fn assemble_values(&self, res: Resolution, values: &[f64]) -> Result<ComplexMatrix> {
        if values.len() != res.n_t * res.n_phi {
            return Err(Error::Invalid(format!(
                "expected {} samples, got {}",
                res.n_t * res.n_phi,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("symbol sample is not finite: {v}")));
        }
        let rows: Vec<Vec<f64>> = values.chunks(res.n_phi).map(<[f64]>::to_vec).collect();
        self.assemble_rows(res, &rows)
    }

    fn assemble_rows(&self, res: Resolution, rows: &[Vec<f64>]) -> Result<ComplexMatrix> {
        let k = self.k;
        let n = k + 1;
        let (t_nodes, t_weights) = self.t_rule(res.n_t);
        let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(res.n_phi);
        let dphi = 2.0 * PI / res.n_phi as f64;

        // fhat[i][d + k] = ∫ f(t_i, φ) e^{idφ} dφ for |d| ≤ k
        let fhat: Vec<Vec<C64>> = rows
            .par_iter()
            .map(|row| {
                let mut buf: Vec<C64> = row.iter().map(|&v| C64::new(v, 0.0)).collect();
                fft.process(&mut buf);
                // X_d = Σ f_j e^{−2πi dj/n}, so Σ f_j e^{+idφ_j} = X_{−d mod n}.
                (0..2 * k + 1)
                    .map(|idx| {
                        let d = idx as isize - k as isize;
                        let j = (-d).rem_euclid(res.n_phi as isize) as usize;
                        buf[j] * dphi
                    })
                    .collect()
            })
            .collect();

        let psi: Vec<Vec<f64>> = t_nodes.iter().map(|&t| self.radial_profile(t)).collect();
        let mut data = vec![C64::new(0.0, 0.0); n * n];
        data.par_chunks_mut(n).enumerate().for_each(|(m, row)| {
            for i in 0..t_nodes.len() {
                let a = t_weights[i] * psi[i][m];
                let band = &fhat[i][k - m..2 * k - m + 1];
                for ((out, &pl), &fh) in row.iter_mut().zip(&psi[i]).zip(band) {
                    *out += fh * (a * pl);
                }
            }
        });
        let out = ComplexMatrix::from_row_major(n, n, data);
        out.check_finite()?;
        Ok(out)
    }

    /// Assemble, doubling the resolution until successive results agree
    /// entrywise to the policy tolerance.
    pub fn assemble_adaptive<F>(&self, start: Resolution, f: F) -> Result<(ComplexMatrix, Resolution)>
    where
        F: Fn(&[f64; 3]) -> Result<f64> + Sync,
    {
        let mut res = start;
        let mut prev = self.assemble(res, &f)?;
        let mut change = f64::INFINITY;
        for _ in 0..=self.policy.max_doublings {
            let next_res = res.doubled();
            let next = self.assemble(next_res, &f)?;
            change = next.sub(&prev)?.max_abs();
            res = next_res;
            prev = next;
            if change <= self.policy.tolerance {
                return Ok((prev, res));
            }
        }
        Err(Error::QuadratureUnderResolved {
            max_change: change,
            n_phi: res.n_phi,
            n_t: res.n_t,
        })
    }

    /// Toeplitz matrix of a closure (not necessarily real-symmetric in
    /// structure); resolution chosen as for a non-polynomial symbol.
    pub fn toeplitz_fn<F>(&self, f: F) -> Result<HermitianOp>
    where
        F: Fn(&[f64; 3]) -> Result<f64> + Sync,
    {
        let (m, _) = self.assemble_adaptive(default_resolution(self.k, NONPOLY_DEGREE), f)?;
        Ok(HermitianOp::new(m, self.hbar(), self.context())?)
    }

    /// T_k(f). Polynomial symbols use a rule that is exact for their degree;
    /// everything else goes through adaptive doubling.
    pub fn toeplitz(&self, f: &Symbol) -> Result<HermitianOp> {
        if f.domain() != Domain::Sphere {
            return Err(SymbolError::DomainMismatch {
                expected: Domain::Sphere,
                found: f.domain(),
            }
            .into());
        }
        let sampler = |x: &[f64; 3]| f.value(x).map_err(Error::from);
        let m = match f.polynomial_degree() {
            Some(d) => self.assemble(default_resolution(self.k, d), sampler)?,
            None => self.assemble_adaptive(default_resolution(self.k, NONPOLY_DEGREE), sampler)?.0,
        };
        Ok(HermitianOp::new(m, self.hbar(), self.context())?)
    }

    /// T^c_k(f) = T_k(f) − (1/k) T_k(Λf) with Λ the Laplace–Beltrami
    /// operator of the unit sphere.
    pub fn corrected_toeplitz(&self, f: &Symbol) -> Result<HermitianOp> {
        let t = self.toeplitz(f)?;
        let lf = laplacian(f)?;
        let tl = match f.polynomial_degree() {
            // Λ preserves the degree of a polynomial on the sphere.
            Some(d) => HermitianOp::new(
                self.assemble(default_resolution(self.k, d), |x| lf.value(x).map_err(Error::from))?,
                self.hbar(),
                self.context(),
            )?,
            None => self.toeplitz_fn(|x| lf.value(x).map_err(Error::from))?,
        };
        Ok(t.sub(&tl.scale(self.hbar()))?)
    }

    /// B_k(x, y) = Σ_m e_m(x) conj(e_m(y)) in the chart frame.
    pub fn bergman_kernel(&self, x: &[f64; 3], y: &[f64; 3]) -> C64 {
        let ex = self.basis_at(x);
        let ey = self.basis_at(y);
        ex.iter().zip(&ey).map(|(a, b)| a * b.conj()).sum()
    }

    pub fn bergman_diag(&self, x: &[f64; 3]) -> f64 {
        let (t, _) = t_phi_from_point(x);
        self.radial_profile(t).iter().map(|p| p * p).sum()
    }

    pub fn coherent_state(&self, x: &[f64; 3], normalized: bool) -> CoherentVector {
        let e = self.basis_at(x);
        let norm2: f64 = e.iter().map(|a| a.norm_sqr()).sum();
        let s = if normalized { 1.0 / norm2.sqrt() } else { 1.0 };
        let p = t_phi_from_point(x);
        CoherentVector {
            point: point_from_t_phi(p.0, p.1),
            amplitudes: e.iter().map(|a| a.conj() * s).collect(),
            norm2_raw: norm2,
            normalized,
        }
    }

    /// |ξ(x)|²_h for ξ = Σ ξ_m e_m.
    pub fn husimi_density(&self, xi: &[C64], x: &[f64; 3]) -> Result<f64> {
        if xi.len() != self.dim() {
            return Err(Error::Invalid(format!(
                "state has {} amplitudes, space dimension is {}",
                xi.len(),
                self.dim()
            )));
        }
        let e = self.basis_at(x);
        let v: C64 = xi.iter().zip(&e).map(|(a, b)| a * b).sum();
        Ok(v.norm_sqr())
    }

    /// Quadrature nodes (point, weight) of the tensor rule at `res`; the
    /// weights include the angular step and sum to 2π.
    pub fn quadrature_points(&self, res: Resolution) -> Vec<([f64; 3], f64)> {
        let (t_nodes, t_weights) = self.t_rule(res.n_t);
        let dphi = 2.0 * PI / res.n_phi as f64;
        let mut out = Vec::with_capacity(res.n_t * res.n_phi);
        for (&t, &w) in t_nodes.iter().zip(t_weights.iter()) {
            for j in 0..res.n_phi {
                out.push((point_from_t_phi(t, j as f64 * dphi), w * dphi));
            }
        }
        out
    }

    /// ∫ f ω at a fixed resolution.
    pub fn integrate_at<F>(&self, res: Resolution, f: F) -> Result<f64>
    where
        F: Fn(&[f64; 3]) -> Result<f64> + Sync,
    {
        let (t_nodes, t_weights) = self.t_rule(res.n_t);
        let dphi = 2.0 * PI / res.n_phi as f64;
        let rows: Vec<f64> = t_nodes
            .par_iter()
            .zip(t_weights.par_iter())
            .map(|(&t, &w)| -> Result<f64> {
                let mut s = 0.0;
                for j in 0..res.n_phi {
                    s += f(&point_from_t_phi(t, j as f64 * dphi))?;
                }
                Ok(w * s * dphi)
            })
            .collect::<Result<_>>()?;
        Ok(rows.iter().sum())
    }

    /// ∫ f ω with adaptive doubling, to a hundredth of the matrix policy
    /// tolerance relative to the running magnitude.
    pub fn integrate<F>(&self, start: Resolution, f: F) -> Result<f64>
    where
        F: Fn(&[f64; 3]) -> Result<f64> + Sync,
    {
        let mut res = start;
        let mut prev = self.integrate_at(res, &f)?;
        let mut change = f64::INFINITY;
        for _ in 0..=self.policy.max_doublings + 1 {
            res = res.doubled();
            let next = self.integrate_at(res, &f)?;
            change = (next - prev).abs();
            prev = next;
            if change <= INTEGRAL_TOL_FACTOR * self.policy.tolerance * prev.abs().max(1.0) {
                return Ok(prev);
            }
        }
        Err(Error::QuadratureUnderResolved {
            max_change: change,
            n_phi: res.n_phi,
            n_t: res.n_t,
        })
    }

    /// ∫ f ω for a symbol (total mass 2π).
    pub fn liouville_integrate(&self, f: &Symbol) -> Result<f64> {
        let sampler = |x: &[f64; 3]| f.value(x).map_err(Error::from);
        match f.polynomial_degree() {
            Some(d) => self.integrate_at(default_resolution(self.k, d), sampler),
            None => self.integrate(default_resolution(self.k, NONPOLY_DEGREE), sampler),
        }
    }

    /// max_l |∫ B(x, y) e_l(y) ω(y) − e_l(x)| by direct quadrature over y.
    pub fn reproducing_error(&self, x: &[f64; 3]) -> Result<f64> {
        let ex = self.basis_at(x);
        let res = default_resolution(self.k, 0);
        let mut worst = 0.0f64;
        for l in 0..=self.k {
            let re = self.integrate_at(res, |y| {
                let ey = self.basis_at(y);
                let b: C64 = ex.iter().zip(&ey).map(|(a, b)| a * b.conj()).sum();
                Ok((b * ey[l]).re)
            })?;
            let im = self.integrate_at(res, |y| {
                let ey = self.basis_at(y);
                let b: C64 = ex.iter().zip(&ey).map(|(a, b)| a * b.conj()).sum();
                Ok((b * ey[l]).im)
            })?;
            worst = worst.max((C64::new(re, im) - ex[l]).norm());
        }
        Ok(worst)
    }

    /// Schur-test constants C₁ = sup_x ∫|B(x, y)| ω(y) and C₂ (= C₁ by the
    /// symmetry |B(x, y)| = |B(y, x)|), sampled at the given points.
    pub fn schur_bound(&self, points: &[[f64; 3]]) -> Result<SchurReport> {
        let res = default_resolution(self.k, self.k);
        let mut c1 = 0.0f64;
        for x in points {
            let ex = self.basis_at(x);
            let v = self.integrate_at(res, |y| {
                let ey = self.basis_at(y);
                Ok(ex.iter().zip(&ey).map(|(a, b)| a * b.conj()).sum::<C64>().norm())
            })?;
            c1 = c1.max(v);
        }
        Ok(SchurReport {
            c1,
            c2: c1,
            product: c1 * c1,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoherentVector {
    pub point: [f64; 3],
    pub amplitudes: Vec<C64>,
    /// B_k(x, x), the squared norm before normalization
    pub norm2_raw: f64,
    pub normalized: bool,
}

impl CoherentVector {
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// ⟨A ψ, ψ⟩
    pub fn expectation(&self, a: &HermitianOp) -> Result<f64> {
        let v = a.matrix().matvec(&self.amplitudes)?;
        Ok(self.amplitudes.iter().zip(&v).map(|(p, q)| (p.conj() * q).re).sum())
    }

    /// ⟨ψ, other⟩
    pub fn overlap(&self, other: &CoherentVector) -> C64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a * b.conj())
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchurReport {
    pub c1: f64,
    pub c2: f64,
    pub product: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::eigvals_hermitian;

    fn coord(i: usize) -> Symbol {
        Symbol::coordinate(Domain::Sphere, i)
    }

    #[test]
    fn identity_and_x3_spectrum() {
        for k in [1usize, 2, 7, 40] {
            let s = SphereSpace::new(k).unwrap();
            let one = s.toeplitz(&Symbol::constant(Domain::Sphere, 1.0)).unwrap();
            let dev = one.matrix().sub(&ComplexMatrix::identity(k + 1)).unwrap().max_abs();
            assert!(dev < 1e-12, "k={k}: {dev}");
            let ev = eigvals_hermitian(&s.toeplitz(&coord(2)).unwrap()).unwrap();
            for (m, l) in ev.iter().rev().enumerate() {
                let exact = (k as f64 - 2.0 * m as f64) / (k as f64 + 2.0);
                assert!((l - exact).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn norms_are_symmetric() {
        let s = SphereSpace::new(9).unwrap();
        let n = s.basis_norms();
        for m in 0..=9 {
            assert!((n[m] / n[9 - m] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn pole_points_are_finite() {
        let s = SphereSpace::new(5).unwrap();
        for x in [[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]] {
            assert!(s.basis_at(&x).iter().all(|v| v.re.is_finite() && v.im.is_finite()));
            let d = s.bergman_diag(&x);
            assert!((d - 6.0 / (2.0 * PI)).abs() < 1e-13);
        }
    }

    #[test]
    fn cache_round_trip_is_exact() {
        let s = SphereSpace::new(12).unwrap();
        let text = serde_json::to_string(&s.to_cache()).unwrap();
        let back = SphereSpace::from_cache(serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.to_cache(), s.to_cache());
        let f = coord(0).mul(&coord(2)).unwrap();
        assert_eq!(s.toeplitz(&f).unwrap().matrix(), back.toeplitz(&f).unwrap().matrix());
    }

    #[test]
    fn corrected_coordinates_are_scaled_spin() {
        let k = 10;
        let s = SphereSpace::new(k).unwrap();
        let c = s.corrected_toeplitz(&coord(2)).unwrap();
        let ev = eigvals_hermitian(&c).unwrap();
        for (m, l) in ev.iter().rev().enumerate() {
            assert!((l - (k as f64 - 2.0 * m as f64) / k as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn wrong_domain_is_rejected() {
        let s = SphereSpace::new(3).unwrap();
        let f = Symbol::coordinate(Domain::Plane, 0);
        assert!(matches!(s.toeplitz(&f), Err(Error::Symbol(SymbolError::DomainMismatch { .. }))));
    }
}
