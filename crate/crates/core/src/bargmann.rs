//! Truncated Bargmann–Fock quantization of ℂ.
//!
//! The space B_ħ of entire functions square integrable against e^{−|z|²/ħ}
//! has orthonormal basis e_l = z^l/‖z^l‖, ‖z^l‖² = πħ^{l+1} l!. We keep
//! e_0..e_{D−1}. In the scaled polar variables z = √ħ σ e^{iφ}
//!
//!   ⟨e_m, f e_l⟩ = (1/π) ∫∫ f χ_m(σ) χ_l(σ) e^{i(l−m)φ} σ dσ dφ,
//!   χ_l(σ) = σ^l e^{−σ²/2}/√(l!),
//!
//! and for monomials ⟨e_m, z^a z̄^b e_l⟩ = δ_{m+b, l+a} ħ^{(a+b)/2}(a+l)!/√(m! l!).
//! Truncation corrupts entries within (degree) indices of the edge, so
//! identities are compared on an [`InteriorBlock`].

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::{ComplexMatrix, ContextTag, HermitianOp, C64};
use crate::quadrature::gauss_legendre;
use crate::symbols::{parse_ast, Ast, Domain, SampleGrid, Symbol, SymbolError};

/// Degrees beyond this are refused rather than silently losing precision.
pub const MAX_POLY_DEGREE: u32 = 4096;
/// Up to this total degree monomial entries are plain products (no overflow
/// for D ≤ 4096 and ħ ≤ 1).
const DIRECT_PRODUCT_DEGREE: u32 = 48;
/// Radial Gauss–Legendre nodes per panel.
const PANEL_NODES: usize = 16;
/// Base panel width in σ.
const PANEL_WIDTH: f64 = 0.5;
/// Basis functions below e^{−40} at a radial node are skipped there.
const LOG_NEGLIGIBLE: f64 = -40.0;

// ---------------------------------------------------------------------------
// Polynomials in z, z̄

/// Polynomial Σ c_{ab} z^a z̄^b with complex coefficients.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ZPoly {
    terms: BTreeMap<(u32, u32), C64>,
}

impl ZPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: C64) -> Self {
        Self::monomial(c, 0, 0)
    }

    pub fn monomial(c: C64, a: u32, b: u32) -> Self {
        let mut p = Self::zero();
        if c != C64::new(0.0, 0.0) {
            p.terms.insert((a, b), c);
        }
        p
    }

    pub fn z() -> Self {
        Self::monomial(C64::new(1.0, 0.0), 1, 0)
    }

    pub fn zbar() -> Self {
        Self::monomial(C64::new(1.0, 0.0), 0, 1)
    }

    pub fn terms(&self) -> impl Iterator<Item = (u32, u32, C64)> + '_ {
        self.terms.iter().map(|(&(a, b), &c)| (a, b, c))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn insert_add(&mut self, key: (u32, u32), c: C64) {
        let e = self.terms.entry(key).or_insert(C64::new(0.0, 0.0));
        *e += c;
        if *e == C64::new(0.0, 0.0) {
            self.terms.remove(&key);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&k, &c) in &other.terms {
            out.insert_add(k, c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = Self::zero();
        for (&k, &c) in &self.terms {
            out.insert_add(k, c * s);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (&(a, b), &c) in &self.terms {
            for (&(p, q), &d) in &other.terms {
                out.insert_add((a + p, b + q), c * d);
            }
        }
        out
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut out = Self::constant(C64::new(1.0, 0.0));
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    /// Complex conjugate polynomial: c_{ab} z^a z̄^b ↦ c̄_{ab} z^b z̄^a.
    pub fn conj(&self) -> Self {
        let mut out = Self::zero();
        for (&(a, b), &c) in &self.terms {
            out.insert_add((b, a), c.conj());
        }
        out
    }

    /// ∂_z^n
    pub fn dz(&self, n: u32) -> Self {
        let mut out = Self::zero();
        for (&(a, b), &c) in &self.terms {
            if a >= n {
                let f: f64 = (a - n + 1..=a).map(|i| i as f64).product();
                out.insert_add((a - n, b), c * f);
            }
        }
        out
    }

    /// ∂_z̄^n
    pub fn dzbar(&self, n: u32) -> Self {
        self.conj().dz(n).conj()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|(a, b)| a + b).max().unwrap_or(0)
    }

    pub fn degree_z(&self) -> u32 {
        self.terms.keys().map(|(a, _)| *a).max().unwrap_or(0)
    }

    pub fn degree_zbar(&self) -> u32 {
        self.terms.keys().map(|(_, b)| *b).max().unwrap_or(0)
    }

    /// Real-valued as a function (c_{ba} = conj c_{ab}).
    pub fn is_real(&self, tol: f64) -> bool {
        self.sub(&self.conj()).terms.values().all(|c| c.norm() <= tol)
    }

    pub fn eval(&self, z: C64) -> C64 {
        let zb = z.conj();
        self.terms
            .iter()
            .map(|(&(a, b), &c)| c * z.powu(a) * zb.powu(b))
            .sum()
    }

    /// f(λ·) for real λ > 0.
    pub fn rescaled(&self, lambda: f64) -> Self {
        let mut out = Self::zero();
        for (&(a, b), &c) in &self.terms {
            out.insert_add((a, b), c * lambda.powi((a + b) as i32));
        }
        out
    }

    /// Real and imaginary parts as polynomial symbols in (x, y).
    pub fn to_plane_symbols(&self) -> (Symbol, Symbol) {
        // z^a z̄^b = Σ_{j,l} C(a,j)C(b,l) x^{a−j+b−l} (iy)^j (−iy)^l
        let mut re: BTreeMap<[u8; 3], f64> = BTreeMap::new();
        let mut im: BTreeMap<[u8; 3], f64> = BTreeMap::new();
        for (&(a, b), &c) in &self.terms {
            for j in 0..=a {
                for l in 0..=b {
                    let coef = binom(a, j) * binom(b, l);
                    let phase = C64::new(0.0, 1.0).powu(j) * C64::new(0.0, -1.0).powu(l);
                    let v = c * phase * coef;
                    let key = [(a - j + b - l) as u8, (j + l) as u8, 0];
                    *re.entry(key).or_insert(0.0) += v.re;
                    *im.entry(key).or_insert(0.0) += v.im;
                }
            }
        }
        let build = |m: BTreeMap<[u8; 3], f64>| {
            Symbol::polynomial(
                Domain::Plane,
                m.into_iter().filter(|(_, c)| *c != 0.0).map(|(e, c)| (c, e)).collect(),
            )
        };
        (build(re), build(im))
    }

    /// Frobenius norm of the j-th real derivative tensor at z (as for
    /// plane symbols: Σ_a C(j,a)|∂_x^a ∂_y^{j−a} f|²).
    pub fn derivative_tensor_norm(&self, j: u32, z: C64) -> f64 {
        // ∂_x = ∂_z + ∂_z̄, ∂_y = i(∂_z − ∂_z̄)
        let mut s = 0.0;
        for a in 0..=j {
            let mut d = self.clone();
            for _ in 0..a {
                d = d.dz(1).add(&d.dzbar(1));
            }
            for _ in 0..j - a {
                d = d.dz(1).sub(&d.dzbar(1)).scale(C64::new(0.0, 1.0));
            }
            s += binom(j, a) * d.eval(z).norm_sqr();
        }
        s.sqrt()
    }

    /// |f|'_j maximized over a plane grid.
    pub fn seminorm(&self, j: u32, grid: &SampleGrid) -> f64 {
        grid.points
            .iter()
            .map(|p| self.derivative_tensor_norm(j, C64::new(p[0], p[1])))
            .fold(0.0, f64::max)
    }

    /// Parse an expression in `z`, `zbar` and `i` with + − * / ^ and
    /// parentheses (division by constants only).
    pub fn parse(input: &str) -> std::result::Result<Self, SymbolError> {
        let ast = parse_ast(input)?;
        lower_zpoly(&ast, input)
    }
}

fn binom(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn lower_zpoly(ast: &Ast, input: &str) -> std::result::Result<ZPoly, SymbolError> {
    let err = |msg: String, pos: usize| {
        SymbolError::Parse(crate::symbols::ParseError {
            message: msg,
            position: pos,
            input: input.to_string(),
        })
    };
    Ok(match ast {
        Ast::Num(v) => ZPoly::constant(C64::new(*v, 0.0)),
        Ast::Var(name, pos) => match name.as_str() {
            "z" => ZPoly::z(),
            "zbar" => ZPoly::zbar(),
            "i" => ZPoly::constant(C64::new(0.0, 1.0)),
            "pi" => ZPoly::constant(C64::new(PI, 0.0)),
            _ => return Err(err(format!("unknown variable `{name}` (expected z, zbar or i)"), *pos)),
        },
        Ast::Neg(a) => lower_zpoly(a, input)?.scale(C64::new(-1.0, 0.0)),
        Ast::Add(a, b) => lower_zpoly(a, input)?.add(&lower_zpoly(b, input)?),
        Ast::Sub(a, b) => lower_zpoly(a, input)?.sub(&lower_zpoly(b, input)?),
        Ast::Mul(a, b) => lower_zpoly(a, input)?.mul(&lower_zpoly(b, input)?),
        Ast::Div(a, b, pos) => {
            let d = lower_zpoly(b, input)?;
            let c = match d.terms.get(&(0, 0)) {
                Some(c) if d.terms.len() == 1 => *c,
                _ => return Err(err("division by a non-constant polynomial".into(), *pos)),
            };
            lower_zpoly(a, input)?.scale(C64::new(1.0, 0.0) / c)
        }
        Ast::Pow(a, e) => lower_zpoly(a, input)?.pow(*e),
        Ast::Call(name, _, pos) => {
            return Err(err(format!("function `{name}` is not allowed in a z-polynomial"), *pos))
        }
    })
}

impl fmt::Display for ZPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (&(a, b), c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if c.im == 0.0 {
                write!(f, "{}", c.re)?;
            } else {
                write!(f, "({}{:+}i)", c.re, c.im)?;
            }
            match a {
                0 => {}
                1 => write!(f, "*z")?,
                _ => write!(f, "*z^{a}")?,
            }
            match b {
                0 => {}
                1 => write!(f, "*zbar")?,
                _ => write!(f, "*zbar^{b}")?,
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Space and interior blocks

/// Truncated Fock space e_0..e_{D−1} at Planck constant ħ.
#[derive(Clone, Debug)]
pub struct FockSpace {
    hbar: f64,
    dim: usize,
    /// ln l! for l = 0..=dim + MAX extra (grown on demand)
    ln_fact: Arc<Vec<f64>>,
    policy: FockQuadraturePolicy,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FockQuadraturePolicy {
    pub tolerance: f64,
    pub max_doublings: u32,
}

impl Default for FockQuadraturePolicy {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_doublings: 3,
        }
    }
}

/// Portable on-disk form of a Fock space's radial rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FockCache {
    pub hbar: f64,
    pub dim: usize,
    pub sigma_max: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..=n {
        acc += (i as f64).ln();
        out.push(acc);
    }
    out
}

/// Which rows/columns are trusted after truncation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteriorBlock {
    pub cutoff: usize,
}

/// How the interior block is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarginPolicy {
    /// D' = D − degree − 2, exact for polynomial identities.
    Degree(u32),
    /// D' = ⌊(√D − 6)²⌋: six Gaussian widths in σ between the block and the
    /// truncation edge.
    Smooth,
}

impl InteriorBlock {
    pub fn new(space: &FockSpace, policy: MarginPolicy) -> Result<Self> {
        let d = space.dim;
        let cutoff = match policy {
            MarginPolicy::Degree(deg) => d.saturating_sub(deg as usize + 2),
            MarginPolicy::Smooth => {
                let s = (d as f64).sqrt() - 6.0;
                if s <= 0.0 {
                    0
                } else {
                    (s * s).floor() as usize
                }
            }
        };
        if cutoff == 0 {
            return Err(Error::Invalid(format!(
                "truncation dimension {d} leaves no interior block under {policy:?}"
            )));
        }
        Ok(Self { cutoff })
    }

    pub fn restrict(&self, m: &ComplexMatrix) -> ComplexMatrix {
        m.leading_block(self.cutoff.min(m.rows()))
    }
}

impl FockSpace {
    pub fn new(hbar: f64, dim: usize) -> Result<Self> {
        Self::with_policy(hbar, dim, FockQuadraturePolicy::default())
    }

    pub fn with_policy(hbar: f64, dim: usize, policy: FockQuadraturePolicy) -> Result<Self> {
        if !(hbar > 0.0) || !hbar.is_finite() {
            return Err(Error::Invalid(format!("ħ must be positive, got {hbar}")));
        }
        if dim == 0 {
            return Err(Error::Invalid("Fock truncation dimension must be positive".into()));
        }
        Ok(Self {
            hbar,
            dim,
            ln_fact: Arc::new(ln_factorials(dim + MAX_POLY_DEGREE as usize + 1)),
            policy,
        })
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn context(&self) -> ContextTag {
        ContextTag::new(format!("fock hbar={} D={}", self.hbar, self.dim))
    }

    /// Radius (in σ) beyond which the Gaussian weight is negligible for
    /// every kept basis vector: σ² = D + 8√D.
    pub fn sigma_max(&self) -> f64 {
        let d = self.dim as f64;
        (d + 8.0 * d.sqrt()).sqrt()
    }

    /// The support radius in z.
    pub fn support_radius(&self) -> f64 {
        self.hbar.sqrt() * self.sigma_max()
    }

    pub fn radial_rule(&self, refine: usize) -> (Vec<f64>, Vec<f64>) {
        // pad past σ_max so the outermost basis functions are fully covered
        let top = self.sigma_max() + 10.0;
        let h = PANEL_WIDTH / refine as f64;
        let panels = (top / h).ceil() as usize;
        let (x, w) = gauss_legendre(PANEL_NODES, 0.0, h);
        let mut nodes = Vec::with_capacity(panels * PANEL_NODES);
        let mut weights = Vec::with_capacity(panels * PANEL_NODES);
        for p in 0..panels {
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(p as f64 * h + xi);
                weights.push(*wi);
            }
        }
        (nodes, weights)
    }

    pub fn to_cache(&self) -> FockCache {
        let (nodes, weights) = self.radial_rule(1);
        FockCache {
            hbar: self.hbar,
            dim: self.dim,
            sigma_max: self.sigma_max(),
            nodes,
            weights,
        }
    }

    fn ln_chi(&self, l: usize, sigma: f64) -> f64 {
        let a = if l == 0 { 0.0 } else { l as f64 * sigma.ln() };
        a - 0.5 * sigma * sigma - 0.5 * self.ln_fact[l]
    }

    /// T(z^a z̄^b) restricted to the truncated basis.
    pub fn toeplitz_monomial(&self, a: u32, b: u32) -> Result<ComplexMatrix> {
        if a + b > MAX_POLY_DEGREE {
            return Err(Error::DegreeOverflow(format!(
                "monomial degree {} exceeds {MAX_POLY_DEGREE}",
                a + b
            )));
        }
        let d = self.dim;
        let mut out = ComplexMatrix::zeros(d, d);
        let lh = 0.5 * (a + b) as f64 * self.hbar.ln();
        for l in 0..d {
            // m = l + a − b
            let m = l as i64 + a as i64 - b as i64;
            if m < 0 || m as usize >= d {
                continue;
            }
            let m = m as usize;
            // (l+a)!/√(m! l!) = √(∏_{j≤a}(l+j) · ∏_{j≤b}(m+j)); the direct product
            // keeps a few ulps where the log-factorial route loses ~1e-13·ln(l!)
            let v = if a + b <= DIRECT_PRODUCT_DEGREE {
                let mut p = 1.0f64;
                for j in 1..=a as usize {
                    p *= self.hbar * (l + j) as f64;
                }
                for j in 1..=b as usize {
                    p *= self.hbar * (m + j) as f64;
                }
                p.sqrt()
            } else {
                (lh + self.ln_fact[a as usize + l] - 0.5 * (self.ln_fact[m] + self.ln_fact[l])).exp()
            };
            out[(m, l)] = C64::new(v, 0.0);
        }
        Ok(out)
    }

    /// T(f) for a polynomial in z, z̄ from the exact formula.
    pub fn toeplitz_poly(&self, f: &ZPoly) -> Result<ComplexMatrix> {
        if f.degree() > MAX_POLY_DEGREE {
            return Err(Error::DegreeOverflow(format!(
                "polynomial degree {} exceeds {MAX_POLY_DEGREE}",
                f.degree()
            )));
        }
        let mut out = ComplexMatrix::zeros(self.dim, self.dim);
        for (a, b, c) in f.terms() {
            out = out.axpy(c, &self.toeplitz_monomial(a, b)?)?;
        }
        Ok(out)
    }

    /// Hermitian T(f) for a real polynomial.
    pub fn toeplitz_poly_op(&self, f: &ZPoly) -> Result<HermitianOp> {
        Ok(HermitianOp::new(self.toeplitz_poly(f)?, self.hbar, self.context())?)
    }

    /// Toeplitz matrix of a real function on ℂ (given in z = x + iy) by
    /// polar quadrature at a fixed refinement level.
    pub fn assemble<F>(&self, refine: usize, f: F) -> Result<ComplexMatrix>
    where
        F: Fn(f64, f64) -> Result<f64> + Sync,
    {
        let d = self.dim;
        let (nodes, weights) = self.radial_rule(refine);
        let n_phi = (2 * d + 64) * refine;
        let fft = FftPlanner::new().plan_fft_forward(n_phi);
        let dphi = 2.0 * PI / n_phi as f64;
        let sq = self.hbar.sqrt();

        // active window of basis indices per node
        let windows: Vec<Option<(usize, usize)>> = nodes
            .iter()
            .map(|&s| {
                let mut lo = None;
                let mut hi = 0;
                for l in 0..d {
                    if self.ln_chi(l, s) > LOG_NEGLIGIBLE {
                        lo.get_or_insert(l);
                        hi = l;
                    }
                }
                lo.map(|lo| (lo, hi))
            })
            .collect();

        // per node: χ_l on the window and f̂(d) = ∫ f e^{idφ} dφ for |d| ≤ width
        struct NodeData {
            lo: usize,
            hi: usize,
            chi: Vec<f64>,
            fhat: Vec<C64>,
        }
        let data: Vec<Option<NodeData>> = nodes
            .par_iter()
            .zip(windows.par_iter())
            .map(|(&s, w)| -> Result<Option<NodeData>> {
                let Some((lo, hi)) = *w else { return Ok(None) };
                let width = hi - lo;
                let mut buf = Vec::with_capacity(n_phi);
                for j in 0..n_phi {
                    let phi = j as f64 * dphi;
                    let v = f(sq * s * phi.cos(), sq * s * phi.sin())?;
                    if !v.is_finite() {
                        return Err(Error::Invalid(format!("symbol not finite at σ = {s}, φ = {phi}")));
                    }
                    buf.push(C64::new(v, 0.0));
                }
                fft.process(&mut buf);
                let fhat = (0..2 * width + 1)
                    .map(|idx| {
                        let dd = idx as isize - width as isize;
                        buf[(-dd).rem_euclid(n_phi as isize) as usize] * dphi
                    })
                    .collect();
                let chi = (lo..=hi).map(|l| self.ln_chi(l, s).exp()).collect();
                Ok(Some(NodeData { lo, hi, chi, fhat }))
            })
            .collect::<Result<_>>()?;

        let mut out = vec![C64::new(0.0, 0.0); d * d];
        out.par_chunks_mut(d).enumerate().for_each(|(m, row)| {
            for (r, nd) in data.iter().enumerate() {
                let Some(nd) = nd else { continue };
                if m < nd.lo || m > nd.hi {
                    continue;
                }
                let width = nd.hi - nd.lo;
                let a = weights[r] * nodes[r] * nd.chi[m - nd.lo] / PI;
                for l in nd.lo..=nd.hi {
                    let dd = l as isize - m as isize + width as isize;
                    row[l] += nd.fhat[dd as usize] * (a * nd.chi[l - nd.lo]);
                }
            }
        });
        let out = ComplexMatrix::from_row_major(d, d, out);
        out.check_finite()?;
        Ok(out)
    }

    /// Adaptive version of [`assemble`](Self::assemble): halves the panels
    /// and doubles the angular nodes until entries agree to the policy
    /// tolerance.
    pub fn assemble_adaptive<F>(&self, f: F) -> Result<ComplexMatrix>
    where
        F: Fn(f64, f64) -> Result<f64> + Sync,
    {
        let mut refine = 1;
        let mut prev = self.assemble(refine, &f)?;
        let mut change = f64::INFINITY;
        for _ in 0..self.policy.max_doublings.max(1) {
            refine *= 2;
            let next = self.assemble(refine, &f)?;
            change = next.sub(&prev)?.max_abs();
            prev = next;
            if change <= self.policy.tolerance {
                return Ok(prev);
            }
        }
        Err(Error::QuadratureUnderResolved {
            max_change: change,
            n_phi: (2 * self.dim + 64) * refine,
            n_t: self.radial_rule(refine).0.len(),
        })
    }

    /// T(f) for a bounded real symbol on the plane, by quadrature.
    pub fn toeplitz_general(&self, f: &Symbol) -> Result<HermitianOp> {
        if f.domain() != Domain::Plane {
            return Err(SymbolError::DomainMismatch {
                expected: Domain::Plane,
                found: f.domain(),
            }
            .into());
        }
        let m = self.assemble_adaptive(|x, y| f.value(&[x, y]).map_err(Error::from))?;
        Ok(HermitianOp::new(m, self.hbar, self.context())?)
    }

    /// (ħ, D) → ħ = 1 with the same truncation: the space on which
    /// T_1(f(√ħ ·)) lives.
    pub fn unit_counterpart(&self) -> Result<Self> {
        Self::with_policy(1.0, self.dim, self.policy)
    }
}

// ---------------------------------------------------------------------------
// Composition expansion and remainders

/// Σ_{ℓ<N} (−1)^ℓ ħ^ℓ/ℓ! T(∂_z^ℓ f · ∂_z̄^ℓ g).
pub fn composition_expansion(f: &ZPoly, g: &ZPoly, n: u32, space: &FockSpace) -> Result<ComplexMatrix> {
    if n == 0 {
        return Err(Error::Invalid("expansion order N must be at least 1".into()));
    }
    let mut sum = ZPoly::zero();
    let mut coef = 1.0;
    for l in 0..n {
        if l > 0 {
            coef *= -space.hbar / l as f64;
        }
        sum = sum.add(&f.dz(l).mul(&g.dzbar(l)).scale(C64::new(coef, 0.0)));
    }
    space.toeplitz_poly(&sum)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemainderReport {
    pub hbar: f64,
    pub order: u32,
    pub interior: usize,
    /// ‖T(f)T(g) − expansion‖ on the interior block
    pub norm: f64,
    /// ħ^N Σ_{m=0}^N |f|'_{N+m}|g|'_{N−m}
    pub bound_rhs: f64,
}

/// Remainder of the order-N expansion for polynomial symbols. Seminorms
/// are maximized over `grid` (polynomials are unbounded on ℂ).
pub fn remainder_norm_poly(
    f: &ZPoly,
    g: &ZPoly,
    n: u32,
    space: &FockSpace,
    grid: &SampleGrid,
) -> Result<RemainderReport> {
    let deg = f.degree().max(g.degree());
    let block = InteriorBlock::new(space, MarginPolicy::Degree(2 * deg))?;
    let prod = space.toeplitz_poly(f)?.matmul(&space.toeplitz_poly(g)?)?;
    let exp = composition_expansion(f, g, n, space)?;
    let r = block.restrict(&prod.sub(&exp)?);
    let mut rhs = 0.0;
    for m in 0..=n {
        rhs += f.seminorm(n + m, grid) * g.seminorm(n - m, grid);
    }
    Ok(RemainderReport {
        hbar: space.hbar,
        order: n,
        interior: block.cutoff,
        norm: r.spectral_norm()?,
        bound_rhs: space.hbar.powi(n as i32) * rhs,
    })
}

/// ‖T(f)T(g) − T(fg)‖ on the smooth interior block (N = 1) for general
/// plane symbols, with the seminorm bound ħ(|f|'₁|g|'₁ + |f|'₂|g|'₀).
pub fn remainder_norm(
    f: &Symbol,
    g: &Symbol,
    n: u32,
    space: &FockSpace,
    grid: &SampleGrid,
) -> Result<RemainderReport> {
    if n != 1 {
        return Err(SymbolError::OrderUnavailable {
            requested: 2 * n as usize,
            available: 3,
        }
        .into());
    }
    let block = InteriorBlock::new(space, MarginPolicy::Smooth)?;
    let tf = space.toeplitz_general(f)?;
    let tg = space.toeplitz_general(g)?;
    let tfg = space.toeplitz_general(&f.mul(g)?)?;
    let r = block.restrict(&tf.matrix().matmul(tg.matrix())?.sub(tfg.matrix())?);
    let sf = crate::symbols::ck_seminorms(f, grid, 2)?;
    let sg = crate::symbols::ck_seminorms(g, grid, 1)?;
    Ok(RemainderReport {
        hbar: space.hbar,
        order: 1,
        interior: block.cutoff,
        norm: r.spectral_norm()?,
        bound_rhs: space.hbar * (sf[1] * sg[1] + sf[2] * sg[0]),
    })
}

/// max |T_ħ(f) − T_1(f(√ħ ·))| over the interior block, both sides from
/// the exact monomial formula.
pub fn rescaling_check_poly(f: &ZPoly, space: &FockSpace) -> Result<f64> {
    let unit = space.unit_counterpart()?;
    let lhs = space.toeplitz_poly(f)?;
    let rhs = unit.toeplitz_poly(&f.rescaled(space.hbar.sqrt()))?;
    let block = InteriorBlock::new(space, MarginPolicy::Degree(f.degree()))?;
    Ok(block.restrict(&lhs.sub(&rhs)?).max_abs())
}

/// Same comparison for a general plane symbol via quadrature on both sides.
pub fn rescaling_check(f: &Symbol, space: &FockSpace) -> Result<f64> {
    let unit = space.unit_counterpart()?;
    let lhs = space.toeplitz_general(f)?;
    let fh = crate::symbols::rescale(f, 1.0 / space.hbar.sqrt())?;
    let rhs = unit.toeplitz_general(&fh)?;
    let block = InteriorBlock::new(space, MarginPolicy::Smooth)?;
    Ok(block.restrict(&lhs.matrix().sub(rhs.matrix())?).max_abs())
}

/// ‖(−i/ħ)[T(f), T(g)] − T({f, g})‖ on the smooth interior block.
pub fn correspondence_remainder(f: &Symbol, g: &Symbol, space: &FockSpace) -> Result<f64> {
    let block = InteriorBlock::new(space, MarginPolicy::Smooth)?;
    let tf = space.toeplitz_general(f)?;
    let tg = space.toeplitz_general(g)?;
    let tb = space.toeplitz_general(&crate::symbols::poisson_bracket(f, g)?)?;
    let c = tf.matrix().commutator(tg.matrix())?.scale(C64::new(0.0, -1.0 / space.hbar));
    Ok(block.restrict(&c.sub(tb.matrix())?).spectral_norm()?)
}

// ---------------------------------------------------------------------------
// Multi-index identity in exact arithmetic

/// Polynomial in z_1..z_n, z̄_1..z̄_n with rational coefficients. Keys hold
/// the n z-exponents followed by the n z̄-exponents.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiPoly {
    n: usize,
    terms: BTreeMap<Vec<u32>, BigRational>,
}

impl MultiPoly {
    pub fn zero(n: usize) -> Self {
        Self {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn vars(&self) -> usize {
        self.n
    }

    pub fn from_terms(n: usize, terms: Vec<(Vec<u32>, BigRational)>) -> Self {
        let mut p = Self::zero(n);
        for (e, c) in terms {
            assert_eq!(e.len(), 2 * n);
            p.insert_add(e, c);
        }
        p
    }

    /// Seeded polynomial of total degree ≤ `degree` with integer
    /// coefficients in [−5, 5] (about a third of the monomials vanish).
    pub fn seeded(n: usize, degree: u32, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zero(n);
        for e in exponents(2 * n, degree) {
            if rng.gen_range(0..3) == 0 {
                continue;
            }
            let c: i64 = rng.gen_range(-5..=5);
            p.insert_add(e, BigRational::from_integer(BigInt::from(c)));
        }
        p
    }

    fn insert_add(&mut self, e: Vec<u32>, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(e.clone()).or_insert_with(BigRational::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&e);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.insert_add(e.clone(), c.clone());
        }
        out
    }

    pub fn scale(&self, s: &BigRational) -> Self {
        let mut out = Self::zero(self.n);
        for (e, c) in &self.terms {
            out.insert_add(e.clone(), c * s);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.n);
        for (e, c) in &self.terms {
            for (f, d) in &other.terms {
                let key = e.iter().zip(f).map(|(a, b)| a + b).collect();
                out.insert_add(key, c * d);
            }
        }
        out
    }

    /// ∂ with respect to variable slot `v` (0..n for z_i, n..2n for z̄_i).
    fn d(&self, v: usize) -> Self {
        let mut out = Self::zero(self.n);
        for (e, c) in &self.terms {
            if e[v] > 0 {
                let mut key = e.clone();
                key[v] -= 1;
                out.insert_add(key, c * BigRational::from_integer(BigInt::from(e[v])));
            }
        }
        out
    }

    /// ∂_z^α ∂_z̄^β
    pub fn derivative(&self, alpha: &[u32], beta: &[u32]) -> Self {
        assert!(alpha.len() == self.n && beta.len() == self.n);
        let mut out = self.clone();
        for i in 0..self.n {
            for _ in 0..alpha[i] {
                out = out.d(i);
            }
            for _ in 0..beta[i] {
                out = out.d(self.n + i);
            }
        }
        out
    }

    /// Largest coefficient magnitude, as f64 (for reporting).
    pub fn max_coefficient(&self) -> f64 {
        self.terms
            .values()
            .map(|c| c.abs().to_f64().unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
    }
}

/// All exponent vectors of length `slots` with total degree ≤ `degree`.
fn exponents(slots: usize, degree: u32) -> Vec<Vec<u32>> {
    fn rec(slots: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == slots {
            out.push(cur.clone());
            return;
        }
        for e in 0..=left {
            cur.push(e);
            rec(slots, left - e, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(slots, degree, &mut Vec::new(), &mut out);
    out
}

fn multi_factorial(a: &[u32]) -> BigInt {
    a.iter()
        .map(|&k| (1..=k).fold(BigInt::one(), |acc, i| acc * BigInt::from(i)))
        .fold(BigInt::one(), |acc, f| acc * f)
}

/// All β ≤ α componentwise.
fn sub_indices(alpha: &[u32]) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for &a in alpha {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..=a).map(move |b| {
                    let mut p = prefix.clone();
                    p.push(b);
                    p
                })
            })
            .collect();
    }
    out
}

/// Both sides of
///   Σ_{β ≤ α} (−1)^{|α−β|}/(β!(α−β)!) ∂_z̄^{α−β}(f_{α,β} g) = (−1)^{|α|} f_{α,0} g_{0,α}/α!
/// with f_{α,β} = ∂_z^α ∂_z̄^β f. The sign on the right is what the
/// coefficient sum Σ_γ (−1)^{|γ|}/((α−γ)!(γ−δ)!) = (−1)^{|α|}δ_{αδ} produces;
/// it is also the (−1)^ℓ of the composition expansion.
pub fn multiindex_identity_sides(alpha: &[u32], f: &MultiPoly, g: &MultiPoly) -> (MultiPoly, MultiPoly) {
    let n = f.n;
    assert!(alpha.len() == n && g.n == n, "multi-index and polynomials disagree on n");
    let zero = vec![0u32; n];
    let mut lhs = MultiPoly::zero(n);
    for beta in sub_indices(alpha) {
        let gamma: Vec<u32> = alpha.iter().zip(&beta).map(|(a, b)| a - b).collect();
        let sign = if gamma.iter().sum::<u32>() % 2 == 0 { 1 } else { -1 };
        let coef = BigRational::new(BigInt::from(sign), multi_factorial(&beta) * multi_factorial(&gamma));
        let term = f.derivative(alpha, &beta).mul(g).derivative(&zero, &gamma);
        lhs = lhs.add(&term.scale(&coef));
    }
    let rhs = f
        .derivative(alpha, &zero)
        .mul(&g.derivative(&zero, alpha))
        .scale(&BigRational::new(
            BigInt::from(if alpha.iter().sum::<u32>() % 2 == 0 { 1 } else { -1 }),
            multi_factorial(alpha),
        ));
    (lhs, rhs)
}

pub fn multiindex_identity_check(alpha: &[u32], f: &MultiPoly, g: &MultiPoly) -> bool {
    let (l, r) = multiindex_identity_sides(alpha, f, g);
    l == r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn identity_and_number_operator() {
        let s = FockSpace::new(0.25, 12).unwrap();
        let one = s.toeplitz_poly(&ZPoly::constant(c(1.0))).unwrap();
        assert_eq!(one, ComplexMatrix::identity(12));
        let n = s.toeplitz_poly(&ZPoly::z().mul(&ZPoly::zbar())).unwrap();
        for l in 0..12 {
            assert!((n[(l, l)].re - 0.25 * (l as f64 + 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn ladder_relation_on_interior() {
        for hbar in [1.0, 0.25, 1.0 / 16.0] {
            let s = FockSpace::new(hbar, 40).unwrap();
            let a = s.toeplitz_poly(&ZPoly::z()).unwrap();
            let b = s.toeplitz_poly(&ZPoly::zbar()).unwrap();
            let zz = s.toeplitz_poly(&ZPoly::z().mul(&ZPoly::zbar())).unwrap();
            let lhs = a.matmul(&b).unwrap();
            let rhs = zz.sub(&ComplexMatrix::identity(40).scale_real(hbar)).unwrap();
            let blk = InteriorBlock::new(&s, MarginPolicy::Degree(2)).unwrap();
            assert!(blk.restrict(&lhs.sub(&rhs).unwrap()).max_abs() < 1e-12);
        }
    }

    #[test]
    fn parse_and_print() {
        let p = ZPoly::parse("z^2*zbar + 2*i*z - (zbar)/2").unwrap();
        assert_eq!(p.degree(), 3);
        assert_eq!(p.degree_z(), 2);
        let v = p.eval(C64::new(0.5, -1.0));
        let z = C64::new(0.5, -1.0);
        let expect = z * z * z.conj() + C64::new(0.0, 2.0) * z - z.conj() / 2.0;
        assert!((v - expect).norm() < 1e-14);
        assert!(ZPoly::parse("z + x").is_err());
        assert!(ZPoly::parse("z / zbar").is_err());
        assert!(ZPoly::parse("z*zbar").unwrap().is_real(0.0));
        assert!(!ZPoly::parse("z").unwrap().is_real(0.0));
    }

    #[test]
    fn plane_conversion_matches_evaluation() {
        let p = ZPoly::parse("z^2*zbar + 3*zbar^2 - i*z").unwrap();
        let (re, im) = p.to_plane_symbols();
        for (x, y) in [(0.3, -0.7), (1.1, 0.4)] {
            let v = p.eval(C64::new(x, y));
            assert!((re.value(&[x, y]).unwrap() - v.re).abs() < 1e-13);
            assert!((im.value(&[x, y]).unwrap() - v.im).abs() < 1e-13);
        }
    }

    #[test]
    fn quadrature_agrees_with_exact_formula() {
        let s = FockSpace::new(0.125, 24).unwrap();
        let p = ZPoly::parse("z*zbar + z^2 + zbar^2 - 0.5*z^2*zbar^2").unwrap();
        let (re, _) = p.to_plane_symbols();
        let q = s.toeplitz_general(&re).unwrap();
        let e = s.toeplitz_poly(&p).unwrap();
        let blk = InteriorBlock::new(&s, MarginPolicy::Degree(4)).unwrap();
        let dev = blk.restrict(&q.matrix().sub(&e).unwrap()).max_abs();
        assert!(dev < 1e-10, "{dev}");
    }

    #[test]
    fn multiindex_identity_small_cases() {
        let one = BigRational::one;
        // f = z z̄, g = z̄, α = (1)
        let f = MultiPoly::from_terms(1, vec![(vec![1, 1], one())]);
        let g = MultiPoly::from_terms(1, vec![(vec![0, 1], one())]);
        assert!(multiindex_identity_check(&[1], &f, &g));
        assert!(multiindex_identity_check(&[0], &f, &g));
        let f = MultiPoly::seeded(2, 3, 7);
        let g = MultiPoly::seeded(2, 3, 8);
        assert!(multiindex_identity_check(&[1, 2], &f, &g));
    }
}
