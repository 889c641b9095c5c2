//! Truncated multivariate Taylor polynomials ("jets") in 1–3 variables.
//!
//! Coefficients are stored as c_α = ∂^α f / α!, indexed by monomials sorted
//! by total degree. Because the ordering within a degree does not depend on
//! the truncation order, a jet of order K is a prefix of the same jet at any
//! higher order, which makes truncation a slice operation.

use std::sync::OnceLock;

/// Highest order any jet can carry. Nested brackets and Laplacians consume
/// orders, so this sits a little above the public maximum of 4.
pub const MAX_ORDER: usize = 7;

pub(crate) struct Layout {
    /// exponents of each monomial
    monos: Vec<[u8; 3]>,
    /// deg_start[g] = index of the first monomial of total degree g
    deg_start: Vec<usize>,
    /// (i, j, k) with mono_i * mono_j = mono_k, sorted by deg(k)
    mul: Vec<(u16, u16, u16)>,
    /// mul_end[K] = number of triples with deg(k) ≤ K
    mul_end: Vec<usize>,
    /// raise[v][a] = index of mono_a + e_v (valid when deg(a) < MAX_ORDER)
    raise: [Vec<u16>; 3],
}

impl Layout {
    fn build(d: usize) -> Self {
        let mut monos: Vec<[u8; 3]> = Vec::new();
        let mut deg_start = Vec::new();
        for g in 0..=MAX_ORDER {
            deg_start.push(monos.len());
            // lexicographically decreasing in the first exponent
            for a in (0..=g).rev() {
                if d == 1 {
                    if a == g {
                        monos.push([a as u8, 0, 0]);
                    }
                    continue;
                }
                for b in (0..=g - a).rev() {
                    let c = g - a - b;
                    if d == 2 && c != 0 {
                        continue;
                    }
                    monos.push([a as u8, b as u8, c as u8]);
                }
            }
        }
        deg_start.push(monos.len());
        let index_of = |e: [u8; 3]| monos.iter().position(|m| *m == e);
        let deg = |m: &[u8; 3]| (m[0] + m[1] + m[2]) as usize;

        let mut mul = Vec::new();
        for (i, a) in monos.iter().enumerate() {
            for (j, b) in monos.iter().enumerate() {
                if deg(a) + deg(b) <= MAX_ORDER {
                    let e = [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
                    let k = index_of(e).unwrap();
                    mul.push((i as u16, j as u16, k as u16));
                }
            }
        }
        mul.sort_by_key(|&(_, _, k)| (deg(&monos[k as usize]), k));
        let mut mul_end = vec![0; MAX_ORDER + 1];
        for (order, end) in mul_end.iter_mut().enumerate() {
            *end = mul
                .iter()
                .take_while(|&&(_, _, k)| deg(&monos[k as usize]) <= order)
                .count();
        }
        let raise = std::array::from_fn(|v| {
            monos
                .iter()
                .map(|m| {
                    if v >= d || deg(m) >= MAX_ORDER {
                        return u16::MAX;
                    }
                    let mut e = *m;
                    e[v] += 1;
                    index_of(e).unwrap() as u16
                })
                .collect()
        });
        Self {
            monos,
            deg_start,
            mul,
            mul_end,
            raise,
        }
    }

    pub(crate) fn get(d: usize) -> &'static Layout {
        static LAYOUTS: OnceLock<[Layout; 3]> = OnceLock::new();
        let all = LAYOUTS.get_or_init(|| [Layout::build(1), Layout::build(2), Layout::build(3)]);
        &all[d - 1]
    }

    pub(crate) fn len(&self, order: usize) -> usize {
        self.deg_start[order + 1]
    }

    pub(crate) fn index(&self, e: [u8; 3]) -> usize {
        let g = (e[0] + e[1] + e[2]) as usize;
        let lo = self.deg_start[g];
        lo + self.monos[lo..self.deg_start[g + 1]]
            .iter()
            .position(|m| *m == e)
            .expect("monomial in layout")
    }
}

/// A truncated Taylor expansion about some base point.
#[derive(Clone, Debug, PartialEq)]
pub struct Taylor {
    d: usize,
    order: usize,
    c: Vec<f64>,
}

impl Taylor {
    pub fn constant(d: usize, order: usize, value: f64) -> Self {
        let mut c = vec![0.0; Layout::get(d).len(order)];
        c[0] = value;
        Self { d, order, c }
    }

    /// The coordinate function x_v expanded about a point whose v-th
    /// coordinate is `value`.
    pub fn variable(d: usize, order: usize, v: usize, value: f64) -> Self {
        let mut t = Self::constant(d, order, value);
        if order >= 1 {
            let mut e = [0u8; 3];
            e[v] = 1;
            t.c[Layout::get(d).index(e)] = 1.0;
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|&x| x == 0.0)
    }

    pub fn is_constant(&self) -> bool {
        self.c[1..].iter().all(|&x| x == 0.0)
    }

    pub fn truncate(&self, order: usize) -> Self {
        assert!(order <= self.order, "cannot raise jet order by truncation");
        let n = Layout::get(self.d).len(order);
        Self {
            d: self.d,
            order,
            c: self.c[..n].to_vec(),
        }
    }

    /// Coefficient of x^e (i.e. ∂^e f / e!).
    pub fn coeff(&self, e: [u8; 3]) -> f64 {
        let g = (e[0] + e[1] + e[2]) as usize;
        if g > self.order {
            return 0.0;
        }
        self.c[Layout::get(self.d).index(e)]
    }

    fn zip_orders(&self, other: &Self) -> usize {
        assert_eq!(self.d, other.d, "jet dimension mismatch");
        self.order.min(other.order)
    }

    pub fn add(&self, other: &Self) -> Self {
        let order = self.zip_orders(other);
        let n = Layout::get(self.d).len(order);
        Self {
            d: self.d,
            order,
            c: (0..n).map(|i| self.c[i] + other.c[i]).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let order = self.zip_orders(other);
        let n = Layout::get(self.d).len(order);
        Self {
            d: self.d,
            order,
            c: (0..n).map(|i| self.c[i] - other.c[i]).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            d: self.d,
            order: self.order,
            c: self.c.iter().map(|x| x * s).collect(),
        }
    }

    pub fn add_constant(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.c[0] += s;
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let order = self.zip_orders(other);
        let layout = Layout::get(self.d);
        let mut c = vec![0.0; layout.len(order)];
        for &(i, j, k) in &layout.mul[..layout.mul_end[order]] {
            c[k as usize] += self.c[i as usize] * other.c[j as usize];
        }
        Self { d: self.d, order, c }
    }

    /// u∘self where `derivs[j]` = u^{(j)}(self.value()), j = 0..=order.
    pub fn compose(&self, derivs: &[f64]) -> Self {
        assert!(derivs.len() > self.order, "not enough univariate derivatives");
        let mut h = self.clone();
        h.c[0] = 0.0;
        let mut out = Self::constant(self.d, self.order, derivs[0]);
        if self.order == 0 {
            return out;
        }
        let mut power = h.clone();
        let mut fact = 1.0;
        for (j, dj) in derivs.iter().enumerate().take(self.order + 1).skip(1) {
            fact *= j as f64;
            if *dj != 0.0 {
                let s = dj / fact;
                for (o, p) in out.c.iter_mut().zip(&power.c) {
                    *o += s * p;
                }
            }
            if j < self.order {
                power = power.mul(&h);
            }
        }
        out
    }

    pub fn powi(&self, n: u32) -> Self {
        let mut out = Self::constant(self.d, self.order, 1.0);
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    /// x^p composed with self; requires a positive base value unless p is a
    /// nonnegative integer.
    pub fn powf(&self, p: f64) -> Self {
        self.compose(&power_derivs(self.value(), p, self.order))
    }

    pub fn recip(&self) -> Self {
        self.powf(-1.0)
    }

    pub fn div(&self, other: &Self) -> Self {
        self.mul(&other.recip())
    }

    /// ∂/∂x_v; the result has order one less.
    pub fn derivative(&self, v: usize) -> Self {
        assert!(self.order >= 1, "derivative of an order-0 jet");
        assert!(v < self.d);
        let layout = Layout::get(self.d);
        let order = self.order - 1;
        let n = layout.len(order);
        let c = (0..n)
            .map(|a| {
                let up = layout.raise[v][a] as usize;
                (layout.monos[a][v] as f64 + 1.0) * self.c[up]
            })
            .collect();
        Self { d: self.d, order, c }
    }

    /// Full symmetric j-th derivative tensor, flattened with row-major
    /// indices (i1, ..., ij) ∈ {0..d}^j.
    pub fn derivative_tensor(&self, j: usize) -> Vec<f64> {
        assert!(j <= self.order);
        let d = self.d;
        let n = d.pow(j as u32);
        let mut out = vec![0.0; n];
        for (flat, slot) in out.iter_mut().enumerate() {
            let mut e = [0u8; 3];
            let mut rest = flat;
            for _ in 0..j {
                e[rest % d] += 1;
                rest /= d;
            }
            let afact: f64 = e.iter().map(|&k| factorial(k as usize)).product();
            *slot = afact * self.coeff(e);
        }
        out
    }
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Derivatives of y ↦ y^p at y, orders 0..=order.
pub fn power_derivs(y: f64, p: f64, order: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(order + 1);
    let mut coef = 1.0;
    for j in 0..=order {
        let e = p - j as f64;
        let val = if coef == 0.0 { 0.0 } else { coef * y.powf(e) };
        out.push(val);
        coef *= e;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(d: usize, k: usize, v: usize, x: f64) -> Taylor {
        Taylor::variable(d, k, v, x)
    }

    #[test]
    fn layout_sizes() {
        // number of monomials of degree ≤ K in d variables is C(K+d, d)
        assert_eq!(Layout::get(3).len(3), 20);
        assert_eq!(Layout::get(3).len(4), 35);
        assert_eq!(Layout::get(2).len(3), 10);
        assert_eq!(Layout::get(1).len(5), 6);
    }

    #[test]
    fn product_of_variables() {
        let x = var(2, 3, 0, 2.0);
        let y = var(2, 3, 1, -1.0);
        let p = x.mul(&y).mul(&x); // x²y
        assert_eq!(p.value(), -4.0);
        assert_eq!(p.coeff([1, 0, 0]), -4.0); // 2xy
        assert_eq!(p.coeff([0, 1, 0]), 4.0); // x²
        assert_eq!(p.coeff([2, 1, 0]), 1.0);
        assert_eq!(p.coeff([1, 1, 0]), 4.0); // 2x
        assert_eq!(p.coeff([2, 0, 0]), -1.0); // y
    }

    #[test]
    fn compose_exp_like() {
        // sin(x) at x = 0.3: coefficients are sin^{(j)}(0.3)/j!
        let x = var(1, 5, 0, 0.3);
        let (s, c) = 0.3f64.sin_cos();
        let t = x.compose(&[s, c, -s, -c, s, c]);
        let expected = [s, c, -s / 2.0, -c / 6.0, s / 24.0, c / 120.0];
        for (a, b) in t.coeffs().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn reciprocal_times_self_is_one() {
        let x = var(3, 4, 0, 0.7);
        let y = var(3, 4, 1, -0.2);
        let z = var(3, 4, 2, 0.4);
        let h = x.mul(&x).add(&y.mul(&z)).add_constant(1.5);
        let one = h.mul(&h.recip());
        assert!((one.value() - 1.0).abs() < 1e-14);
        assert!(one.coeffs()[1..].iter().all(|c| c.abs() < 1e-13));
    }

    #[test]
    fn derivative_lowers_order() {
        let x = var(2, 4, 0, 1.5);
        let y = var(2, 4, 1, 0.5);
        let f = x.powi(3).mul(&y); // x³y
        let fx = f.derivative(0); // 3x²y
        assert_eq!(fx.order(), 3);
        assert!((fx.value() - 3.0 * 2.25 * 0.5).abs() < 1e-14);
        assert!((fx.coeff([0, 1, 0]) - 3.0 * 2.25).abs() < 1e-14);
        let fxy = fx.derivative(1); // 3x²
        assert!((fxy.value() - 6.75).abs() < 1e-14);
    }

    #[test]
    fn tensor_is_symmetric_hessian() {
        let x = var(3, 2, 0, 1.0);
        let y = var(3, 2, 1, 2.0);
        let f = x.mul(&y).scale(3.0); // 3xy: Hessian [[0,3,0],[3,0,0],[0,0,0]]
        let h = f.derivative_tensor(2);
        assert_eq!(h[1], 3.0);
        assert_eq!(h[3], 3.0);
        assert_eq!(h[0], 0.0);
        let g = f.derivative_tensor(1);
        assert_eq!(g, vec![6.0, 3.0, 0.0]);
    }

    #[test]
    fn truncation_is_prefix() {
        let x = var(3, 5, 0, 0.3);
        let y = var(3, 5, 2, 0.1);
        let f = x.mul(&y).add(&x.powi(3));
        let f3 = x.truncate(3).mul(&y.truncate(3)).add(&x.truncate(3).powi(3));
        assert_eq!(f.truncate(3), f3);
    }
}
