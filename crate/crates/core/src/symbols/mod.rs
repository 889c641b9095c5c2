//! Classical observables on the sphere S² ⊂ ℝ³ and on the plane ℝ² ≅ ℂ.
//!
//! A [`Symbol`] is an immutable expression graph. Jets are obtained by
//! propagating truncated Taylor expansions through the graph, so derivatives
//! are exact (up to rounding) for every node type.
//!
//! Sphere symbols are evaluated through the radially constant extension
//! F(x) = f(x/|x|). For that extension the tangential projection of the
//! ambient Hessian is the covariant Hessian, so the projected ambient tensors
//! used for seminorms see the curvature terms (|x₃|₂ ≠ 0).
//!
//! Conventions: ω on the sphere is half the round area form (total area 2π);
//! on the plane ω = 2 dx∧dy, the form whose Bargmann space has weight
//! e^{−|z|²/ħ}. The Poisson bracket is {f, g} = −ω(X_f, X_g) with
//! i_{X_f}ω + df = 0, which gives {x₁, x₂} = −2x₃ and {x, y} = −1/2.

mod cutoff;
mod grammar;
mod net;
mod taylor;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cutoff::{CutoffKind, CutoffProfile, BUMP_INNER, BUMP_OUTER};
pub use grammar::{parse_ast, parse_symbol, Ast, ParseError};
pub use net::{build_net, build_partition, local_cap_grid, NetReport, PartitionOfUnity, DEFAULT_R0};
pub use taylor::{Taylor, MAX_ORDER};

/// Highest seminorm/jet order exposed without the fourth-order flag.
pub const DEFAULT_JET_ORDER: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Sphere,
    Plane,
}

impl Domain {
    pub fn ambient_dim(self) -> usize {
        match self {
            Domain::Sphere => 3,
            Domain::Plane => 2,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::Sphere => "sphere",
            Domain::Plane => "plane",
        })
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SymbolError {
    #[error("domain mismatch: expected {expected}, found {found}")]
    DomainMismatch { expected: Domain, found: Domain },
    #[error("operation not available on the {0}")]
    UnsupportedOnDomain(Domain),
    #[error("singular point: {0}")]
    SingularPoint(String),
    #[error("jet order {requested} unavailable (maximum {available})")]
    OrderUnavailable { requested: usize, available: usize },
    #[error("coverage gap: grid point {point:?} is not covered by the 0.6r balls")]
    CoverageGap { point: [f64; 3] },
    #[error("radius {r} exceeds the configured maximum {r0}")]
    RadiusTooLarge { r: f64, r0: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

pub type Result<T> = std::result::Result<T, SymbolError>;

/// Scalar functions that may be composed with a symbol.
#[derive(Clone, Debug, PartialEq)]
pub enum Univariate {
    Cutoff(CutoffProfile),
    Sin,
    Cos,
    /// y ↦ y^p (p non-integer requires y > 0)
    Pow(f64),
    Arccos,
}

impl Univariate {
    fn is_flat_at(&self, y: f64) -> bool {
        match self {
            Univariate::Cutoff(c) => c.is_flat_at(y),
            _ => false,
        }
    }

    fn derivs(&self, y: f64, order: usize) -> Result<Vec<f64>> {
        Ok(match self {
            Univariate::Cutoff(c) => c.derivs(y, order),
            Univariate::Sin | Univariate::Cos => {
                let (s, c) = y.sin_cos();
                let cycle = if matches!(self, Univariate::Sin) {
                    [s, c, -s, -c]
                } else {
                    [c, -s, -c, s]
                };
                (0..=order).map(|j| cycle[j % 4]).collect()
            }
            Univariate::Pow(p) => {
                if *p != p.trunc() && y <= 0.0 {
                    return Err(SymbolError::SingularPoint(format!("y^{p} at y = {y}")));
                }
                taylor::power_derivs(y, *p, order)
            }
            Univariate::Arccos => {
                if y.abs() >= 1.0 - 1e-12 && order > 0 {
                    return Err(SymbolError::SingularPoint(format!(
                        "arccos jet at {y} (distance leaf at its center or antipode)"
                    )));
                }
                let mut out = vec![y.clamp(-1.0, 1.0).acos()];
                if order > 0 {
                    // arccos' = −(1 − y²)^{−1/2}; expand in one variable
                    let v = Taylor::variable(1, order - 1, 0, y);
                    let g = v.mul(&v).scale(-1.0).add_constant(1.0).powf(-0.5).scale(-1.0);
                    let mut fact = 1.0;
                    for j in 0..order {
                        if j > 0 {
                            fact *= j as f64;
                        }
                        out.push(g.coeff([j as u8, 0, 0]) * fact);
                    }
                }
                out
            }
        })
    }

    fn name(&self) -> String {
        match self {
            Univariate::Cutoff(c) => format!("{:?}", c.kind()).to_lowercase(),
            Univariate::Sin => "sin".into(),
            Univariate::Cos => "cos".into(),
            Univariate::Pow(p) => format!("pow{p}"),
            Univariate::Arccos => "arccos".into(),
        }
    }
}

#[derive(Debug)]
enum Node {
    Const(f64),
    /// Σ c·x^e in ambient coordinates
    Poly(Vec<(f64, [u8; 3])>),
    Sum(Vec<Symbol>),
    Product(Vec<Symbol>),
    Scale(f64, Symbol),
    Compose(Univariate, Symbol),
    Quotient(Symbol, Symbol),
    /// geodesic distance arccos(x·c) to a unit vector c
    Dist([f64; 3]),
    /// f(x/s)
    Rescale(f64, Symbol),
    Bracket(Symbol, Symbol),
    Laplacian(Symbol),
    Partial(usize, Symbol),
}

/// A classical observable: an immutable, cheaply clonable expression graph.
#[derive(Clone, Debug)]
pub struct Symbol {
    domain: Domain,
    node: Arc<Node>,
    /// jet orders consumed below this node (brackets: 1, Laplacians: 2)
    extra: usize,
    has_derivative_nodes: bool,
    has_singular_leaf: bool,
}

/// Everything a node needs besides its coordinate jets.
struct Ctx {
    /// normalized ambient coordinates (sphere) used by brackets
    unit: Vec<Taylor>,
    /// |x|² of the raw ambient point (sphere), for homogeneity factors
    r2: Option<Taylor>,
}

impl Symbol {
    fn make(domain: Domain, node: Node) -> Self {
        let children: Vec<&Symbol> = match &node {
            Node::Const(_) | Node::Poly(_) | Node::Dist(_) => vec![],
            Node::Sum(v) | Node::Product(v) => v.iter().collect(),
            Node::Scale(_, a)
            | Node::Compose(_, a)
            | Node::Rescale(_, a)
            | Node::Laplacian(a)
            | Node::Partial(_, a) => vec![a],
            Node::Quotient(a, b) | Node::Bracket(a, b) => vec![a, b],
        };
        let own = match &node {
            Node::Bracket(..) | Node::Partial(..) => 1,
            Node::Laplacian(_) => 2,
            _ => 0,
        };
        let extra = own + children.iter().map(|c| c.extra).max().unwrap_or(0);
        let has_derivative_nodes = own > 0 || children.iter().any(|c| c.has_derivative_nodes);
        let has_singular_leaf =
            matches!(node, Node::Dist(_)) || children.iter().any(|c| c.has_singular_leaf);
        Self {
            domain,
            node: Arc::new(node),
            extra,
            has_derivative_nodes,
            has_singular_leaf,
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn constant(domain: Domain, c: f64) -> Self {
        Self::make(domain, Node::Const(c))
    }

    /// Ambient coordinate x_{i+1} (sphere) or x / y (plane, i = 0 / 1).
    pub fn coordinate(domain: Domain, i: usize) -> Self {
        assert!(i < domain.ambient_dim());
        let mut e = [0u8; 3];
        e[i] = 1;
        Self::polynomial(domain, vec![(1.0, e)])
    }

    /// Polynomial in the ambient coordinates: terms (coefficient, exponents).
    pub fn polynomial(domain: Domain, mut terms: Vec<(f64, [u8; 3])>) -> Self {
        let d = domain.ambient_dim();
        assert!(terms.iter().all(|(_, e)| e[d..].iter().all(|&k| k == 0)));
        terms.retain(|(c, _)| *c != 0.0);
        Self::make(domain, Node::Poly(terms))
    }

    fn same_domain(&self, other: &Self) -> Result<()> {
        if self.domain != other.domain {
            return Err(SymbolError::DomainMismatch {
                expected: self.domain,
                found: other.domain,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_domain(other)?;
        Ok(Self::make(self.domain, Node::Sum(vec![self.clone(), other.clone()])))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    pub fn sum(domain: Domain, terms: Vec<Symbol>) -> Result<Self> {
        for t in &terms {
            if t.domain != domain {
                return Err(SymbolError::DomainMismatch {
                    expected: domain,
                    found: t.domain,
                });
            }
        }
        Ok(Self::make(domain, Node::Sum(terms)))
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.same_domain(other)?;
        Ok(Self::make(self.domain, Node::Product(vec![self.clone(), other.clone()])))
    }

    pub fn square(&self) -> Self {
        Self::make(self.domain, Node::Product(vec![self.clone(), self.clone()]))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::make(self.domain, Node::Scale(s, self.clone()))
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        self.same_domain(other)?;
        Ok(Self::make(self.domain, Node::Quotient(self.clone(), other.clone())))
    }

    pub fn compose(&self, u: Univariate) -> Self {
        Self::make(self.domain, Node::Compose(u, self.clone()))
    }

    /// Geodesic distance to the unit vector `center` (normalized here).
    pub fn distance_to(center: [f64; 3]) -> Result<Self> {
        let n = (center[0].powi(2) + center[1].powi(2) + center[2].powi(2)).sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(SymbolError::InvalidParameter(format!("distance center {center:?}")));
        }
        Ok(Self::make(
            Domain::Sphere,
            Node::Dist([center[0] / n, center[1] / n, center[2] / n]),
        ))
    }

    /// Evaluate at a point given in ambient coordinates. Sphere points are
    /// normalized first.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        if self.has_derivative_nodes {
            return Ok(self.taylor(x, 0)?.value());
        }
        let pt = self.prepare_point(x);
        self.value_at(&pt[..self.domain.ambient_dim()])
    }

    fn prepare_point(&self, x: &[f64]) -> [f64; 3] {
        let d = self.domain.ambient_dim();
        assert!(x.len() >= d, "point has {} coordinates, need {d}", x.len());
        let mut p = [0.0; 3];
        p[..d].copy_from_slice(&x[..d]);
        if self.domain == Domain::Sphere {
            let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            for c in &mut p {
                *c /= n;
            }
        }
        p
    }

    /// Value-only evaluation; only valid for graphs without derivative nodes.
    fn value_at(&self, y: &[f64]) -> Result<f64> {
        Ok(match &*self.node {
            Node::Const(c) => *c,
            Node::Poly(terms) => terms
                .iter()
                .map(|(c, e)| {
                    c * y
                        .iter()
                        .zip(e)
                        .map(|(v, &k)| v.powi(k as i32))
                        .product::<f64>()
                })
                .sum(),
            Node::Sum(v) => {
                let mut s = 0.0;
                for t in v {
                    s += t.value_at(y)?;
                }
                s
            }
            Node::Product(v) => {
                let mut s = 1.0;
                for t in v {
                    s *= t.value_at(y)?;
                    if s == 0.0 {
                        break;
                    }
                }
                s
            }
            Node::Scale(s, a) => s * a.value_at(y)?,
            Node::Compose(u, a) => {
                let h = a.value_at(y)?;
                match u {
                    Univariate::Cutoff(c) => c.value(h),
                    Univariate::Sin => h.sin(),
                    Univariate::Cos => h.cos(),
                    Univariate::Pow(p) => {
                        if *p != p.trunc() && h < 0.0 {
                            return Err(SymbolError::SingularPoint(format!("y^{p} at y = {h}")));
                        }
                        h.powf(*p)
                    }
                    Univariate::Arccos => h.clamp(-1.0, 1.0).acos(),
                }
            }
            Node::Quotient(a, b) => {
                let num = a.value_at(y)?;
                if num == 0.0 {
                    return Ok(0.0);
                }
                let den = b.value_at(y)?;
                if den == 0.0 {
                    return Err(SymbolError::SingularPoint("division by zero".into()));
                }
                num / den
            }
            Node::Dist(c) => (y[0] * c[0] + y[1] * c[1] + y[2] * c[2]).clamp(-1.0, 1.0).acos(),
            Node::Rescale(s, a) => {
                let scaled: Vec<f64> = y.iter().map(|v| v / s).collect();
                a.value_at(&scaled)?
            }
            Node::Bracket(..) | Node::Laplacian(_) | Node::Partial(..) => {
                unreachable!("derivative nodes use the jet path")
            }
        })
    }

    /// Taylor expansion of order `order` about the ambient point `x`.
    pub fn taylor(&self, x: &[f64], order: usize) -> Result<Taylor> {
        let need = order + self.extra;
        if need > MAX_ORDER {
            return Err(SymbolError::OrderUnavailable {
                requested: need,
                available: MAX_ORDER,
            });
        }
        let d = self.domain.ambient_dim();
        let raw: Vec<Taylor> = (0..d).map(|i| Taylor::variable(d, need, i, x[i])).collect();
        let (coords, ctx) = match self.domain {
            Domain::Plane => (
                raw,
                Ctx {
                    unit: vec![],
                    r2: None,
                },
            ),
            Domain::Sphere => {
                let r2 = raw[0].mul(&raw[0]).add(&raw[1].mul(&raw[1])).add(&raw[2].mul(&raw[2]));
                let inv = r2.powf(-0.5);
                let unit: Vec<Taylor> = raw.iter().map(|t| t.mul(&inv)).collect();
                (
                    unit.clone(),
                    Ctx {
                        unit,
                        r2: Some(r2),
                    },
                )
            }
        };
        self.eval(&coords, &ctx, order)
    }

    fn eval(&self, coords: &[Taylor], ctx: &Ctx, order: usize) -> Result<Taylor> {
        let d = self.domain.ambient_dim();
        Ok(match &*self.node {
            Node::Const(c) => Taylor::constant(d, order, *c),
            Node::Poly(terms) => {
                let xs: Vec<Taylor> = coords.iter().map(|t| t.truncate(order)).collect();
                let max_e = terms.iter().flat_map(|(_, e)| e.iter().copied()).max().unwrap_or(0);
                // powers[i][k] = x_i^k
                let powers: Vec<Vec<Taylor>> = xs
                    .iter()
                    .map(|x| {
                        let mut p = vec![Taylor::constant(d, order, 1.0)];
                        for k in 1..=max_e as usize {
                            let next = p[k - 1].mul(x);
                            p.push(next);
                        }
                        p
                    })
                    .collect();
                let mut out = Taylor::constant(d, order, 0.0);
                for (c, e) in terms {
                    let mut t = Taylor::constant(d, order, *c);
                    for i in 0..d {
                        if e[i] > 0 {
                            t = t.mul(&powers[i][e[i] as usize]);
                        }
                    }
                    out = out.add(&t);
                }
                out
            }
            Node::Sum(v) => {
                let mut out = Taylor::constant(d, order, 0.0);
                for t in v {
                    out = out.add(&t.eval(coords, ctx, order)?);
                }
                out
            }
            Node::Product(v) => {
                let mut out = Taylor::constant(d, order, 1.0);
                for t in v {
                    let f = t.eval(coords, ctx, order)?;
                    if f.is_zero() {
                        return Ok(Taylor::constant(d, order, 0.0));
                    }
                    out = out.mul(&f);
                }
                out
            }
            Node::Scale(s, a) => a.eval(coords, ctx, order)?.scale(*s),
            Node::Compose(u, a) => {
                if a.has_singular_leaf {
                    let h0 = a.eval(coords, ctx, 0)?.value();
                    if u.is_flat_at(h0) {
                        return Ok(Taylor::constant(d, order, u.derivs(h0, 0)?[0]));
                    }
                }
                let h = a.eval(coords, ctx, order)?;
                if u.is_flat_at(h.value()) {
                    return Ok(Taylor::constant(d, order, u.derivs(h.value(), 0)?[0]));
                }
                h.compose(&u.derivs(h.value(), order)?)
            }
            Node::Quotient(a, b) => {
                let num = a.eval(coords, ctx, order)?;
                if num.is_zero() {
                    return Ok(num);
                }
                let den = b.eval(coords, ctx, order)?;
                if den.value() == 0.0 {
                    return Err(SymbolError::SingularPoint("division by zero".into()));
                }
                num.div(&den)
            }
            Node::Dist(c) => {
                let mut h = Taylor::constant(d, order, 0.0);
                for i in 0..3 {
                    h = h.add(&coords[i].truncate(order).scale(c[i]));
                }
                h.compose(&Univariate::Arccos.derivs(h.value(), order)?)
            }
            Node::Rescale(s, a) => {
                let scaled: Vec<Taylor> = coords.iter().map(|t| t.scale(1.0 / s)).collect();
                a.eval(&scaled, ctx, order)?
            }
            Node::Bracket(f, g) => {
                let fj = f.eval(coords, ctx, order + 1)?;
                let gj = g.eval(coords, ctx, order + 1)?;
                let df: Vec<Taylor> = (0..d).map(|i| fj.derivative(i)).collect();
                let dg: Vec<Taylor> = (0..d).map(|i| gj.derivative(i)).collect();
                match self.domain {
                    Domain::Plane => df[1].mul(&dg[0]).sub(&df[0].mul(&dg[1])).scale(0.5),
                    Domain::Sphere => {
                        // −2 y·(∇F × ∇G), made 0-homogeneous by the |x|² factor
                        let cross = [
                            df[1].mul(&dg[2]).sub(&df[2].mul(&dg[1])),
                            df[2].mul(&dg[0]).sub(&df[0].mul(&dg[2])),
                            df[0].mul(&dg[1]).sub(&df[1].mul(&dg[0])),
                        ];
                        let mut triple = Taylor::constant(d, order, 0.0);
                        for i in 0..3 {
                            triple = triple.add(&ctx.unit[i].truncate(order).mul(&cross[i]));
                        }
                        let r2 = ctx.r2.as_ref().expect("sphere context").truncate(order);
                        triple.mul(&r2).scale(-2.0)
                    }
                }
            }
            Node::Laplacian(f) => {
                let fj = f.eval(coords, ctx, order + 2)?;
                let mut lap = Taylor::constant(d, order, 0.0);
                for i in 0..d {
                    lap = lap.add(&fj.derivative(i).derivative(i));
                }
                let r2 = ctx.r2.as_ref().expect("sphere context").truncate(order);
                lap.mul(&r2)
            }
            Node::Partial(i, f) => f.eval(coords, ctx, order + 1)?.derivative(*i),
        })
    }

    /// Exact total degree when the symbol is a polynomial in the ambient
    /// coordinates on its domain, `None` otherwise.
    pub fn polynomial_degree(&self) -> Option<usize> {
        match &*self.node {
            Node::Const(_) => Some(0),
            Node::Poly(t) => Some(
                t.iter()
                    .map(|(_, e)| (e[0] + e[1] + e[2]) as usize)
                    .max()
                    .unwrap_or(0),
            ),
            Node::Sum(v) => v.iter().map(|s| s.polynomial_degree()).try_fold(0, |m, d| Some(m.max(d?))),
            Node::Product(v) => v.iter().map(|s| s.polynomial_degree()).try_fold(0, |m, d| Some(m + d?)),
            Node::Scale(_, a) | Node::Rescale(_, a) => a.polynomial_degree(),
            Node::Partial(_, a) => a.polynomial_degree(),
            Node::Bracket(a, b) => Some((a.polynomial_degree()? + b.polynomial_degree()?).saturating_sub(1)),
            Node::Laplacian(a) => a.polynomial_degree(),
            Node::Compose(..) | Node::Quotient(..) | Node::Dist(_) => None,
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let var = |i: usize| -> &'static str {
            match (self.domain, i) {
                (Domain::Sphere, 0) => "x1",
                (Domain::Sphere, 1) => "x2",
                (Domain::Sphere, _) => "x3",
                (Domain::Plane, 0) => "x",
                (Domain::Plane, _) => "y",
            }
        };
        match &*self.node {
            Node::Const(c) => write!(f, "{c}"),
            Node::Poly(terms) => {
                if terms.is_empty() {
                    return write!(f, "0");
                }
                for (n, (c, e)) in terms.iter().enumerate() {
                    let mono: Vec<String> = (0..3)
                        .filter(|&i| e[i] > 0)
                        .map(|i| {
                            if e[i] == 1 {
                                var(i).to_string()
                            } else {
                                format!("{}^{}", var(i), e[i])
                            }
                        })
                        .collect();
                    let sep = if n == 0 {
                        ""
                    } else if *c < 0.0 {
                        " - "
                    } else {
                        " + "
                    };
                    let mag = if n == 0 { *c } else { c.abs() };
                    f.write_str(sep)?;
                    if mono.is_empty() {
                        write!(f, "{mag}")?;
                    } else if mag == 1.0 {
                        write!(f, "{}", mono.join("*"))?;
                    } else if mag == -1.0 {
                        write!(f, "-{}", mono.join("*"))?;
                    } else {
                        write!(f, "{mag}*{}", mono.join("*"))?;
                    }
                }
                Ok(())
            }
            Node::Sum(v) => {
                let parts: Vec<String> = v.iter().map(|s| s.to_string()).collect();
                write!(f, "({})", parts.join(" + "))
            }
            Node::Product(v) => {
                let parts: Vec<String> = v.iter().map(|s| format!("({s})")).collect();
                write!(f, "{}", parts.join("*"))
            }
            Node::Scale(s, a) => write!(f, "{s}*({a})"),
            Node::Compose(Univariate::Cutoff(c), a) => {
                write!(f, "cutoff({}, {a}, 1)", format!("{:?}", c.kind()).to_lowercase())
            }
            Node::Compose(u, a) => write!(f, "{}({a})", u.name()),
            Node::Quotient(a, b) => write!(f, "({a})/({b})"),
            Node::Dist(c) => write!(f, "dist({}, {}, {})", c[0], c[1], c[2]),
            Node::Rescale(s, a) => write!(f, "rescale({a}, {s})"),
            Node::Bracket(a, b) => write!(f, "{{{a}, {b}}}"),
            Node::Laplacian(a) => write!(f, "lap({a})"),
            Node::Partial(i, a) => write!(f, "d{}({a})", var(*i)),
        }
    }
}

/// Value and derivative tensors of a symbol at a point, in ambient
/// coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Jet3 {
    pub value: f64,
    pub grad: Vec<f64>,
    /// d×d, row-major
    pub hess: Vec<f64>,
    /// d×d×d, row-major
    pub third: Vec<f64>,
    pub fourth: Option<Vec<f64>>,
}

pub fn eval_jet(f: &Symbol, x: &[f64], fourth_order: bool) -> Result<Jet3> {
    let order = if fourth_order { 4 } else { 3 };
    let t = f.taylor(x, order)?;
    Ok(Jet3 {
        value: t.value(),
        grad: t.derivative_tensor(1),
        hess: t.derivative_tensor(2),
        third: t.derivative_tensor(3),
        fourth: fourth_order.then(|| t.derivative_tensor(4)),
    })
}

pub fn poisson_bracket(f: &Symbol, g: &Symbol) -> Result<Symbol> {
    f.same_domain(g)?;
    Ok(Symbol::make(f.domain, Node::Bracket(f.clone(), g.clone())))
}

/// Laplace–Beltrami operator of the round unit sphere (so Λx₃ = −2x₃).
pub fn laplacian(f: &Symbol) -> Result<Symbol> {
    if f.domain != Domain::Sphere {
        return Err(SymbolError::UnsupportedOnDomain(f.domain));
    }
    Ok(Symbol::make(Domain::Sphere, Node::Laplacian(f.clone())))
}

/// ∂f/∂x (i = 0) or ∂f/∂y (i = 1) on the plane.
pub fn partial(f: &Symbol, i: usize) -> Result<Symbol> {
    if f.domain != Domain::Plane {
        return Err(SymbolError::UnsupportedOnDomain(f.domain));
    }
    assert!(i < 2);
    Ok(Symbol::make(Domain::Plane, Node::Partial(i, f.clone())))
}

/// f_s(x) = f(x/s) on the plane.
pub fn rescale(f: &Symbol, s: f64) -> Result<Symbol> {
    if f.domain != Domain::Plane {
        return Err(SymbolError::UnsupportedOnDomain(f.domain));
    }
    if !(s > 0.0) || !s.is_finite() {
        return Err(SymbolError::InvalidParameter(format!("rescale factor {s}")));
    }
    if s == 1.0 {
        return Ok(f.clone());
    }
    Ok(Symbol::make(Domain::Plane, Node::Rescale(s, f.clone())))
}

/// u(f/s), the fuzzified sign of f at scale s.
pub fn cutoff_compose(u: &CutoffProfile, f: &Symbol, s: f64) -> Result<Symbol> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(SymbolError::InvalidParameter(format!("cutoff scale {s}")));
    }
    Ok(f.scale(1.0 / s).compose(Univariate::Cutoff(u.clone())))
}

/// (z^{1/2} F sin(G/z), z^{1/2} F cos(G/z)); their bracket is {−F²/2, G}
/// whatever z is.
pub fn sin_cos_pair(big_f: &Symbol, big_g: &Symbol, z: f64) -> Result<(Symbol, Symbol)> {
    big_f.same_domain(big_g)?;
    if !(z > 0.0) {
        return Err(SymbolError::InvalidParameter(format!("z = {z}")));
    }
    let phase = big_g.scale(1.0 / z);
    let amp = big_f.scale(z.sqrt());
    Ok((
        amp.mul(&phase.compose(Univariate::Sin))?,
        amp.mul(&phase.compose(Univariate::Cos))?,
    ))
}

/// Deterministic sample points for seminorm maximization.
#[derive(Clone, Debug)]
pub struct SampleGrid {
    pub domain: Domain,
    pub points: Vec<[f64; 3]>,
    pub description: String,
}

pub const DEFAULT_SPHERE_GRID: usize = 20_000;

impl SampleGrid {
    /// Fibonacci lattice plus the six axis points (so poles and equator
    /// extremes of the coordinate functions are hit exactly).
    pub fn fibonacci(n: usize) -> Self {
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        let mut points = Vec::with_capacity(n + 6);
        for i in 0..n {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            points.push([r * phi.cos(), r * phi.sin(), z]);
        }
        for a in 0..3 {
            for s in [1.0, -1.0] {
                let mut p = [0.0; 3];
                p[a] = s;
                points.push(p);
            }
        }
        Self {
            domain: Domain::Sphere,
            points,
            description: format!("fibonacci({n})+axes"),
        }
    }

    /// Uniform (n × n) grid on the square [−half, half]².
    pub fn plane_box(half: f64, n: usize) -> Self {
        assert!(n >= 2);
        let mut points = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let x = -half + 2.0 * half * i as f64 / (n - 1) as f64;
                let y = -half + 2.0 * half * j as f64 / (n - 1) as f64;
                points.push([x, y, 0.0]);
            }
        }
        Self {
            domain: Domain::Plane,
            points,
            description: format!("box(±{half}, {n}x{n})"),
        }
    }

    pub fn default_sphere() -> Self {
        Self::fibonacci(DEFAULT_SPHERE_GRID)
    }
}

/// Frobenius norm of the order-j derivative tensor, tangentially projected
/// on the sphere.
fn tensor_norm(t: &Taylor, j: usize, point: &[f64; 3], domain: Domain) -> f64 {
    if j == 0 {
        return t.value().abs();
    }
    let d = domain.ambient_dim();
    let mut tensor = t.derivative_tensor(j);
    if domain == Domain::Sphere {
        let n = (point[0] * point[0] + point[1] * point[1] + point[2] * point[2]).sqrt();
        let u = [point[0] / n, point[1] / n, point[2] / n];
        let proj = |a: usize, b: usize| (if a == b { 1.0 } else { 0.0 }) - u[a] * u[b];
        // contract each index with P in turn; index m has stride d^m
        for m in 0..j {
            let stride = d.pow(m as u32);
            let mut out = vec![0.0; tensor.len()];
            for (flat, o) in out.iter_mut().enumerate() {
                let a = (flat / stride) % d;
                let base = flat - a * stride;
                *o = (0..d).map(|b| proj(a, b) * tensor[base + b * stride]).sum();
            }
            tensor = out;
        }
    }
    tensor.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// |f|_0, ..., |f|_max_order, each maximized over the grid.
pub fn ck_seminorms(f: &Symbol, grid: &SampleGrid, max_order: usize) -> Result<Vec<f64>> {
    if grid.domain != f.domain {
        return Err(SymbolError::DomainMismatch {
            expected: f.domain,
            found: grid.domain,
        });
    }
    if max_order > 4 {
        return Err(SymbolError::OrderUnavailable {
            requested: max_order,
            available: 4,
        });
    }
    let mut out = vec![0.0f64; max_order + 1];
    for p in &grid.points {
        let t = f.taylor(p, max_order)?;
        for (j, o) in out.iter_mut().enumerate() {
            *o = o.max(tensor_norm(&t, j, p, f.domain));
        }
    }
    Ok(out)
}

pub fn ck_seminorm(f: &Symbol, j: usize, grid: &SampleGrid) -> Result<f64> {
    if j > DEFAULT_JET_ORDER {
        return Err(SymbolError::OrderUnavailable {
            requested: j,
            available: DEFAULT_JET_ORDER,
        });
    }
    Ok(ck_seminorms(f, grid, j)?[j])
}

/// Seminorms |f|_0..|f|_K of one symbol, computed once and reused.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeminormPanel {
    pub values: Vec<f64>,
    /// max relative change against a grid with a quarter of the points
    pub grid_delta: f64,
}

impl SeminormPanel {
    pub fn compute(f: &Symbol, grid: &SampleGrid, fourth_order: bool) -> Result<Self> {
        let k = if fourth_order { 4 } else { 3 };
        let values = ck_seminorms(f, grid, k)?;
        let coarse = SampleGrid {
            domain: grid.domain,
            points: grid.points.iter().step_by(4).copied().collect(),
            description: String::new(),
        };
        let cv = ck_seminorms(f, &coarse, k)?;
        let grid_delta = values
            .iter()
            .zip(&cv)
            .map(|(a, b)| if *a > 0.0 { (a - b).abs() / a } else { 0.0 })
            .fold(0.0, f64::max);
        Ok(Self { values, grid_delta })
    }

    pub fn order(&self) -> usize {
        self.values.len() - 1
    }

    pub fn get(&self, j: usize) -> Result<f64> {
        self.values.get(j).copied().ok_or(SymbolError::OrderUnavailable {
            requested: j,
            available: self.order(),
        })
    }
}

/// |f,g|_N = Σ_{j=0}^{N} |f|_j |g|_{N−j}.
pub fn pair_seminorm(f: &SeminormPanel, g: &SeminormPanel, n: usize) -> Result<f64> {
    let mut s = 0.0;
    for j in 0..=n {
        s += f.get(j)? * g.get(n - j)?;
    }
    Ok(s)
}

/// |f,g|_{1,3} = |f|₁|g|₃ + |f|₂|g|₂ + |f|₃|g|₁.
pub fn reduced_pair_seminorm(f: &SeminormPanel, g: &SeminormPanel) -> Result<f64> {
    Ok(f.get(1)? * g.get(3)? + f.get(2)? * g.get(2)? + f.get(3)? * g.get(1)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: usize) -> Symbol {
        Symbol::coordinate(Domain::Sphere, i)
    }

    #[test]
    fn linear_leaf_at_pole() {
        let j = eval_jet(&x(2), &[0.0, 0.0, 1.0], false).unwrap();
        assert_eq!(j.value, 1.0);
        // radially constant extension: the gradient at the pole is tangent
        assert!(j.grad.iter().all(|g| g.abs() < 1e-15));
        let j = eval_jet(&x(2), &[1.0, 0.0, 0.0], false).unwrap();
        assert!((j.grad[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn coordinate_bracket_sign() {
        let b = poisson_bracket(&x(0), &x(1)).unwrap();
        for p in [[0.0, 0.0, 1.0], [0.6, 0.0, 0.8], [0.48, 0.6, -0.64]] {
            assert!((b.value(&p).unwrap() + 2.0 * p[2]).abs() < 1e-14);
        }
        let b = poisson_bracket(&x(1), &x(2)).unwrap();
        let p = [0.6, 0.0, 0.8];
        assert!((b.value(&p).unwrap() + 2.0 * p[0]).abs() < 1e-14);
    }

    #[test]
    fn plane_bracket_is_constant() {
        let xx = Symbol::coordinate(Domain::Plane, 0);
        let yy = Symbol::coordinate(Domain::Plane, 1);
        let b = poisson_bracket(&xx, &yy).unwrap();
        for p in [[0.0, 0.0], [1.3, -2.0], [-0.1, 7.0]] {
            assert!((b.value(&p).unwrap() + 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn laplacian_of_coordinates() {
        let l = laplacian(&x(2)).unwrap();
        for p in [[0.0, 0.0, 1.0], [0.6, 0.0, 0.8], [0.48, 0.6, -0.64]] {
            assert!((l.value(&p).unwrap() + 2.0 * p[2]).abs() < 1e-13);
        }
        // Λ(x₃²) = 2 − 6x₃²
        let l = laplacian(&x(2).square()).unwrap();
        let p = [0.48, 0.6, -0.64];
        assert!((l.value(&p).unwrap() - (2.0 - 6.0 * 0.64 * 0.64)).abs() < 1e-12);
    }

    #[test]
    fn seminorms_of_x3() {
        let grid = SampleGrid::fibonacci(2000);
        let s = ck_seminorms(&x(2), &grid, 3).unwrap();
        assert_eq!(s[0], 1.0);
        assert!((s[1] - 1.0).abs() < 1e-12); // attained on the equator axes
        assert!(s[2] > 0.5);
    }

    #[test]
    fn constant_seminorms() {
        let c = Symbol::constant(Domain::Sphere, -2.5);
        let s = ck_seminorms(&c, &SampleGrid::fibonacci(100), 3).unwrap();
        assert_eq!(s, vec![2.5, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn order_limits() {
        let grid = SampleGrid::fibonacci(10);
        assert!(matches!(
            ck_seminorm(&x(0), 4, &grid),
            Err(SymbolError::OrderUnavailable { .. })
        ));
        let p = SeminormPanel::compute(&x(0), &grid, false).unwrap();
        assert!(matches!(pair_seminorm(&p, &p, 4), Err(SymbolError::OrderUnavailable { .. })));
    }

    #[test]
    fn cutoff_plateau_and_zero() {
        let u = CutoffProfile::sign();
        let f = cutoff_compose(&u, &x(0), 0.2).unwrap();
        assert_eq!(f.value(&[0.6, 0.0, 0.8]).unwrap(), 1.0);
        assert_eq!(f.value(&[-0.6, 0.0, 0.8]).unwrap(), -1.0);
        assert_eq!(f.value(&[0.0, 0.6, 0.8]).unwrap(), 0.0);
    }

    #[test]
    fn distance_leaf_singular_only_when_active() {
        let d = Symbol::distance_to([0.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            d.taylor(&[0.0, 0.0, 1.0], 1),
            Err(SymbolError::SingularPoint(_))
        ));
        let g = cutoff_compose(&CutoffProfile::bump(), &d, 0.5).unwrap();
        let t = g.taylor(&[0.0, 0.0, 1.0], 3).unwrap();
        assert_eq!(t.value(), 1.0);
        assert!(t.is_constant());
    }

    #[test]
    fn rescale_identity_and_domain() {
        let xx = Symbol::coordinate(Domain::Plane, 0);
        let f = rescale(&xx.square(), 0.5).unwrap();
        assert!((f.value(&[0.3, 0.0]).unwrap() - 4.0 * 0.09).abs() < 1e-15);
        assert!(matches!(rescale(&x(0), 0.5), Err(SymbolError::UnsupportedOnDomain(_))));
    }

    #[test]
    fn polynomial_degree_detection() {
        let f = x(0).mul(&x(1)).unwrap().add(&x(2)).unwrap();
        assert_eq!(f.polynomial_degree(), Some(2));
        assert_eq!(poisson_bracket(&f, &x(2)).unwrap().polynomial_degree(), Some(2));
        let g = cutoff_compose(&CutoffProfile::sign(), &x(0), 0.3).unwrap();
        assert_eq!(g.polynomial_degree(), None);
    }
}
