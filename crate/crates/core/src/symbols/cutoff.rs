//! Piecewise-polynomial cutoff profiles.
//!
//! Both profiles are built from the C⁴ smoothstep
//! S(w) = w⁵(126 − 420w + 540w² − 315w³ + 70w⁴), which has S(0) = 0,
//! S(1) = 1 and vanishing derivatives of orders 1..4 at both ends.

use serde::{Deserialize, Serialize};

use super::taylor::MAX_ORDER;

/// Start of the sign profile's transition: u(z) = z on [−A, A].
const SIGN_LINEAR_END: f64 = 0.5;
/// Plateau and support radii of the radial bump, in units of r.
pub const BUMP_INNER: f64 = 0.6;
pub const BUMP_OUTER: f64 = 0.7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CutoffKind {
    /// Odd, increasing, u(z) = z near 0 and ±1 outside [−1, 1].
    Sign,
    /// Radial bump: 1 on [0, 0.6], 0 on [0.7, ∞).
    Bump,
}

/// A polynomial in the local variable w = (y − origin) / width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Piece {
    origin: f64,
    width: f64,
    /// coefficients in w, lowest degree first
    coeffs: Vec<f64>,
}

impl Piece {
    /// Derivatives in y at y, orders 0..=order.
    fn derivs(&self, y: f64, order: usize) -> Vec<f64> {
        let w = (y - self.origin) / self.width;
        let mut out = Vec::with_capacity(order + 1);
        let mut c = self.coeffs.clone();
        let mut scale = 1.0;
        for _ in 0..=order {
            out.push(scale * horner(&c, w));
            c = poly_derivative(&c);
            scale /= self.width;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffProfile {
    kind: CutoffKind,
    transition: Piece,
    /// max |u^{(j)}| for j = 1, 2, 3 over the real line
    bounds: [f64; 3],
}

fn horner(c: &[f64], w: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * w + a)
}

fn poly_derivative(c: &[f64]) -> Vec<f64> {
    if c.len() <= 1 {
        return vec![0.0];
    }
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(k, a)| k as f64 * a)
        .collect()
}

fn poly_antiderivative(c: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0];
    out.extend(c.iter().enumerate().map(|(k, a)| a / (k as f64 + 1.0)));
    out
}

fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| a.get(i).copied().unwrap_or(0.0) + b.get(i).copied().unwrap_or(0.0))
        .collect()
}

fn poly_scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// Smoothstep coefficients in w.
fn smoothstep() -> Vec<f64> {
    vec![0.0, 0.0, 0.0, 0.0, 0.0, 126.0, -420.0, 540.0, -315.0, 70.0]
}

/// w⁵(1 − w)⁵
fn hump() -> Vec<f64> {
    vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0, -5.0, 10.0, -10.0, 5.0, -1.0]
}

impl CutoffProfile {
    pub fn sign() -> Self {
        let a = SIGN_LINEAR_END;
        let width = 1.0 - a;
        // u'(z) = 1 − S(w) + c·w⁵(1−w)⁵ on the transition; c makes u(1) = 1,
        // i.e. c·∫hump = 1/2 with ∫hump = B(6,6) = 1/2772.
        let c = 1386.0;
        let du = poly_add(&poly_add(&[1.0], &poly_scale(&smoothstep(), -1.0)), &poly_scale(&hump(), c));
        // u(z) = a + width·∫_0^w u'(z(w')) dw'
        let mut coeffs = poly_scale(&poly_antiderivative(&du), width);
        coeffs[0] += a;
        Self::finish(CutoffKind::Sign, Piece {
            origin: a,
            width,
            coeffs,
        })
    }

    pub fn bump() -> Self {
        let coeffs = poly_add(&[1.0], &poly_scale(&smoothstep(), -1.0));
        Self::finish(CutoffKind::Bump, Piece {
            origin: BUMP_INNER,
            width: BUMP_OUTER - BUMP_INNER,
            coeffs,
        })
    }

    pub fn from_kind(kind: CutoffKind) -> Self {
        match kind {
            CutoffKind::Sign => Self::sign(),
            CutoffKind::Bump => Self::bump(),
        }
    }

    fn finish(kind: CutoffKind, transition: Piece) -> Self {
        let mut p = Self {
            kind,
            transition,
            bounds: [0.0; 3],
        };
        let (lo, hi) = p.transition_interval();
        let n = 20_000;
        let mut bounds = [0.0f64; 3];
        if kind == CutoffKind::Sign {
            bounds[0] = 1.0; // slope on the linear part
        }
        for i in 0..=n {
            let y = lo + (hi - lo) * i as f64 / n as f64;
            let d = p.derivs(y, 3);
            for j in 0..3 {
                bounds[j] = bounds[j].max(d[j + 1].abs());
            }
        }
        p.bounds = bounds;
        p
    }

    pub fn kind(&self) -> CutoffKind {
        self.kind
    }

    /// The (positive-side) transition interval.
    pub fn transition_interval(&self) -> (f64, f64) {
        (self.transition.origin, self.transition.origin + self.transition.width)
    }

    /// Tabulated max |u^{(j)}| for j = 1, 2, 3.
    pub fn derivative_bounds(&self) -> [f64; 3] {
        self.bounds
    }

    /// True where u is constant on a neighbourhood (closed plateau; the
    /// blend is flat to order 4 at the knots).
    pub fn is_flat_at(&self, y: f64) -> bool {
        match self.kind {
            CutoffKind::Sign => y.abs() >= 1.0,
            CutoffKind::Bump => y <= BUMP_INNER || y >= BUMP_OUTER,
        }
    }

    pub fn value(&self, y: f64) -> f64 {
        self.derivs(y, 0)[0]
    }

    /// u^{(j)}(y) for j = 0..=order.
    pub fn derivs(&self, y: f64, order: usize) -> Vec<f64> {
        assert!(order <= MAX_ORDER);
        let mut out = vec![0.0; order + 1];
        match self.kind {
            CutoffKind::Sign => {
                let s = y.abs();
                let sgn = if y < 0.0 { -1.0 } else { 1.0 };
                if s <= SIGN_LINEAR_END {
                    out[0] = y;
                    if order >= 1 {
                        out[1] = 1.0;
                    }
                } else if s < 1.0 {
                    // odd extension: u(y) = sgn·p(|y|), u^{(j)}(y) = sgn^{j+1} p^{(j)}(|y|)
                    let d = self.transition.derivs(s, order);
                    for (j, v) in d.into_iter().enumerate() {
                        let f = if j % 2 == 0 { sgn } else { 1.0 };
                        out[j] = f * v;
                    }
                } else {
                    out[0] = sgn;
                }
            }
            CutoffKind::Bump => {
                if y <= BUMP_INNER {
                    out[0] = 1.0;
                } else if y < BUMP_OUTER {
                    out = self.transition.derivs(y, order);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The transition polynomial must reproduce the neighbouring piece's
    /// derivatives exactly at the knot.
    fn check_knot(p: &CutoffProfile, knot: f64, outside: [f64; 5]) {
        let inside = p.transition.derivs(knot, 4);
        for j in 0..=4 {
            assert!(
                (inside[j] - outside[j]).abs() < 1e-12,
                "{:?} knot {knot} order {j}: {} vs {}",
                p.kind(),
                inside[j],
                outside[j]
            );
        }
    }

    #[test]
    fn sign_profile_shape() {
        let u = CutoffProfile::sign();
        assert_eq!(u.value(0.0), 0.0);
        assert_eq!(u.value(0.3), 0.3);
        assert_eq!(u.value(-0.3), -0.3);
        assert!((u.value(1.0) - 1.0).abs() < 1e-14);
        assert_eq!(u.value(2.0), 1.0);
        assert_eq!(u.value(-2.0), -1.0);
        assert!((u.transition.derivs(1.0, 0)[0] - 1.0).abs() < 1e-12);
        let mut prev = -1.0;
        for i in 0..=4000 {
            let y = -1.2 + 2.4 * i as f64 / 4000.0;
            let v = u.value(y);
            assert!(v >= prev - 1e-13 && v.abs() <= 1.0 + 1e-13, "{y}: {v}");
            prev = v;
        }
    }

    #[test]
    fn knots_are_c4() {
        let u = CutoffProfile::sign();
        check_knot(&u, 0.5, [0.5, 1.0, 0.0, 0.0, 0.0]);
        check_knot(&u, 1.0, [1.0, 0.0, 0.0, 0.0, 0.0]);
        let b = CutoffProfile::bump();
        check_knot(&b, BUMP_INNER, [1.0, 0.0, 0.0, 0.0, 0.0]);
        check_knot(&b, BUMP_OUTER, [0.0; 5]);
    }

    #[test]
    fn bump_shape_and_bounds() {
        let b = CutoffProfile::bump();
        assert_eq!(b.value(0.0), 1.0);
        assert_eq!(b.value(0.6), 1.0);
        assert!((b.value(0.65) - 0.5).abs() < 1e-14);
        assert_eq!(b.value(0.7), 0.0);
        // max |S'| = 126·(1/2)^4·(1/2)^4 scaled by 1/0.1: S'(w) = 630 w⁴(1−w)⁴
        let expected = 630.0 / 256.0 / 0.1;
        assert!((b.derivative_bounds()[0] - expected).abs() < 1e-6);
    }

    #[test]
    fn odd_symmetry_of_derivatives() {
        let u = CutoffProfile::sign();
        let a = u.derivs(0.8, 3);
        let b = u.derivs(-0.8, 3);
        assert!((a[0] + b[0]).abs() < 1e-15);
        assert!((a[1] - b[1]).abs() < 1e-15);
        assert!((a[2] + b[2]).abs() < 1e-15);
        assert!((a[3] - b[3]).abs() < 1e-15);
    }
}
