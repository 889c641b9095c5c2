//! Noise operators, the unsharpness sandwich and Chebyshev concentration.
//!
//! The minimal noise ν(T(f), T(g)) is never computed; it is bracketed by
//! lower_proxy = ½‖[T(f), T(g)]‖ ≤ ν ≤ upper_proxy = ‖Δ(f)‖^{1/2}‖Δ(g)‖^{1/2}.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::{eig_hermitian, eigvals_hermitian, op_norm, HermitianOp};
use crate::quantizer::Quantizer;
use crate::sphere::{default_resolution, SphereSpace};
use crate::symbols::{ck_seminorms, pair_seminorm, poisson_bracket, reduced_pair_seminorm, SampleGrid, SeminormPanel, Symbol};

/// Slack for the unsharpness chain; anything beyond is an assembly bug.
pub const UNSHARPNESS_SLACK: f64 = 1e-12;
/// Slack for the Chebyshev inequality (quadrature tolerance).
pub const CHEBYSHEV_SLACK: f64 = 1e-8;

/// Δ(f) = T(f²) − T(f)².
pub fn noise_operator<Q: Quantizer + ?Sized>(q: &Q, f: &Symbol) -> Result<HermitianOp> {
    let tf = q.quantize(f)?;
    let tf2 = q.quantize(&f.square())?;
    Ok(tf2.sub(&tf.square())?)
}

/// The noise operator on the trusted block. Both terms are restricted
/// before subtracting so that Hermiticity is judged at their scale.
fn trusted_noise<Q: Quantizer + ?Sized>(q: &Q, tf: &HermitianOp, f: &Symbol) -> Result<HermitianOp> {
    let tf2 = trusted_op(q, &q.quantize(&f.square())?)?;
    Ok(tf2.sub(&trusted_op(q, &tf.square())?)?)
}

fn trusted_op<Q: Quantizer + ?Sized>(q: &Q, a: &HermitianOp) -> Result<HermitianOp> {
    Ok(a.with_matrix(q.trusted(a.matrix())?)?)
}

/// ‖Δ(f)‖ and its smallest eigenvalue, on the trusted block.
pub fn noise_norm<Q: Quantizer + ?Sized>(q: &Q, f: &Symbol) -> Result<(f64, f64)> {
    let d = trusted_noise(q, &q.quantize(f)?, f)?;
    let ev = eigvals_hermitian(&d)?;
    let lo = ev[0];
    let hi = ev[ev.len() - 1];
    Ok((lo.abs().max(hi.abs()), lo))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSeminorms {
    /// |f,f|₂
    pub ff_2: f64,
    /// |g,g|₂
    pub gg_2: f64,
    /// |f,g|_{1,3}
    pub fg_13: f64,
    /// |{f,g}|₂
    pub bracket_2: f64,
}

/// Field names are part of the report schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseReport {
    pub hbar: f64,
    pub f: String,
    pub g: String,
    /// ‖T(f²) − T(f)²‖
    pub noise_f: f64,
    pub noise_g: f64,
    /// smallest eigenvalues of the two noise operators
    pub noise_f_min_eig: f64,
    pub noise_g_min_eig: f64,
    /// ‖[T(f), T(g)]‖
    pub comm_norm: f64,
    /// sup |{f, g}| over the seminorm grid (absent without a grid)
    pub bracket_norm: Option<f64>,
    pub upper_proxy: f64,
    pub lower_proxy: f64,
    pub seminorms: Option<NoiseSeminorms>,
}

impl NoiseReport {
    pub fn chain_holds(&self) -> bool {
        self.upper_proxy >= self.lower_proxy - UNSHARPNESS_SLACK
    }
}

/// Symbol-level quantities of a pair: |f,f|₂, |g,g|₂, |f,g|_{1,3},
/// |{f,g}|₂ and sup|{f,g}|.
pub fn pair_panel(f: &Symbol, g: &Symbol, grid: &SampleGrid) -> Result<(NoiseSeminorms, f64)> {
    let pf = SeminormPanel::compute(f, grid, false)?;
    let pg = SeminormPanel::compute(g, grid, false)?;
    let br = ck_seminorms(&poisson_bracket(f, g)?, grid, 2)?;
    Ok((
        NoiseSeminorms {
            ff_2: pair_seminorm(&pf, &pf, 2)?,
            gg_2: pair_seminorm(&pg, &pg, 2)?,
            fg_13: reduced_pair_seminorm(&pf, &pg)?,
            bracket_2: br[2],
        },
        br[0],
    ))
}

/// T(f) with the norm and smallest eigenvalue of its noise operator, so
/// that pair quantities can reuse per-symbol work.
#[derive(Clone, Debug)]
pub struct SymbolNoise {
    pub op: HermitianOp,
    pub noise: f64,
    pub min_eig: f64,
}

pub fn symbol_noise<Q: Quantizer + ?Sized>(q: &Q, f: &Symbol) -> Result<SymbolNoise> {
    let op = q.quantize(f)?;
    let d = trusted_noise(q, &op, f)?;
    let ev = eigvals_hermitian(&d)?;
    let lo = ev[0];
    let hi = ev[ev.len() - 1];
    Ok(SymbolNoise {
        op,
        noise: lo.abs().max(hi.abs()),
        min_eig: lo,
    })
}

/// (upper_proxy, lower_proxy) of a pair.
pub fn pair_proxies<Q: Quantizer + ?Sized>(q: &Q, a: &SymbolNoise, b: &SymbolNoise) -> Result<(f64, f64)> {
    let c = q.trusted(&a.op.matrix().commutator(b.op.matrix())?)?;
    Ok(((a.noise * b.noise).sqrt(), 0.5 * c.spectral_norm()?))
}

/// Populate a [`NoiseReport`] and check the unsharpness chain.
pub fn unsharpness_check<Q: Quantizer + ?Sized>(
    q: &Q,
    f: &Symbol,
    g: &Symbol,
    grid: Option<&SampleGrid>,
) -> Result<NoiseReport> {
    let a = symbol_noise(q, f)?;
    let b = symbol_noise(q, g)?;
    let (upper, lower) = pair_proxies(q, &a, &b)?;
    let (seminorms, bracket_norm) = match grid {
        Some(grid) => {
            let (s, b) = pair_panel(f, g, grid)?;
            (Some(s), Some(b))
        }
        None => (None, None),
    };
    let report = NoiseReport {
        hbar: q.hbar(),
        f: f.to_string(),
        g: g.to_string(),
        noise_f: a.noise,
        noise_g: b.noise,
        noise_f_min_eig: a.min_eig,
        noise_g_min_eig: b.min_eig,
        comm_norm: 2.0 * lower,
        bracket_norm,
        upper_proxy: upper,
        lower_proxy: lower,
        seminorms,
    };
    if !report.chain_holds() {
        return Err(Error::UnsharpnessViolated {
            upper: report.upper_proxy,
            lower: report.lower_proxy,
        });
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub index: usize,
    pub eigenvalue: f64,
    /// ⟨Δ(f)ξ, ξ⟩
    pub variance: f64,
    /// the same variance as a Husimi integral ∫(f − λ)² |ξ|² ω
    pub husimi_variance: f64,
    /// Husimi mass of {|f − λ| ≥ r}
    pub mass: f64,
    pub r: f64,
    /// variance / r²
    pub chebyshev_bound: f64,
    /// ‖Δ(f)‖
    pub noise_norm: f64,
    pub holds: bool,
}

/// Chebyshev concentration of the `index`-th eigenvector (ascending order)
/// of T_k(f). The Husimi mass is a sum over the quadrature nodes, the same
/// discrete measure in which the variance identity holds, so the inequality
/// is exact up to quadrature error.
pub fn concentration_check(space: &SphereSpace, f: &Symbol, r: f64, index: usize) -> Result<ConcentrationReport> {
    if !(r > 0.0) {
        return Err(Error::Invalid(format!("concentration radius must be positive, got {r}")));
    }
    let tf = space.toeplitz(f)?;
    let spec = eig_hermitian(&tf)?;
    if index >= spec.eigenvalues.len() {
        return Err(Error::EigSelection {
            index,
            dim: spec.eigenvalues.len(),
        });
    }
    let lambda = spec.eigenvalues[index];
    let xi = spec.eigenvector(index);
    let delta = noise_operator(space, f)?;
    let dx = delta.matrix().matvec(&xi)?;
    let variance: f64 = xi.iter().zip(&dx).map(|(a, b)| (a.conj() * b).re).sum();
    let noise = op_norm(&delta)?;

    let degree = f.polynomial_degree().unwrap_or(8);
    let res = default_resolution(space.k(), space.k() + 2 * degree);
    let mut mass = 0.0;
    let mut hv = 0.0;
    for (x, w) in space.quadrature_points(res) {
        let mu = space.husimi_density(&xi, &x)?;
        let dv = f.value(&x)? - lambda;
        hv += w * mu * dv * dv;
        if dv.abs() >= r {
            mass += w * mu;
        }
    }
    let bound = variance / (r * r);
    Ok(ConcentrationReport {
        index,
        eigenvalue: lambda,
        variance,
        husimi_variance: hv,
        mass,
        r,
        chebyshev_bound: bound,
        noise_norm: noise,
        holds: mass <= bound + CHEBYSHEV_SLACK,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bargmann::FockSpace;
    use crate::hermitian::ComplexMatrix;
    use crate::symbols::Domain;

    #[test]
    fn constant_has_no_noise() {
        let s = SphereSpace::new(6).unwrap();
        let d = noise_operator(&s, &Symbol::constant(Domain::Sphere, 1.0)).unwrap();
        assert!(d.matrix().max_abs() < 1e-13);
    }

    #[test]
    fn fock_noise_of_x_is_quarter_hbar() {
        let hbar = 1.0 / 8.0;
        let s = FockSpace::new(hbar, 100).unwrap();
        let x = Symbol::coordinate(Domain::Plane, 0);
        let d = noise_operator(&s, &x).unwrap();
        let t = s.trusted(d.matrix()).unwrap();
        let expect = ComplexMatrix::identity(t.rows()).scale_real(hbar / 4.0);
        assert!(t.sub(&expect).unwrap().max_abs() < 1e-9);
    }

    #[test]
    fn chebyshev_for_top_state_of_x3() {
        let s = SphereSpace::new(24).unwrap();
        let x3 = Symbol::coordinate(Domain::Sphere, 2);
        let rep = concentration_check(&s, &x3, 0.5, 24).unwrap();
        assert!(rep.holds);
        assert!((rep.eigenvalue - 24.0 / 26.0).abs() < 1e-12);
        assert!((rep.variance - rep.husimi_variance).abs() < 1e-12);
        assert!(matches!(
            concentration_check(&s, &x3, 0.5, 25),
            Err(Error::EigSelection { .. })
        ));
    }
}
