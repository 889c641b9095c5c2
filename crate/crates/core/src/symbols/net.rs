//! Maximal r/2-nets on S² and the partition of unity built on them.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    ck_seminorms, cutoff_compose, CutoffProfile, Domain, SampleGrid, Symbol, SymbolError,
    BUMP_INNER, BUMP_OUTER,
};

/// Default upper limit for net radii.
pub const DEFAULT_R0: f64 = 0.5;

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn geodesic(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    dot(a, b).clamp(-1.0, 1.0).acos()
}

/// Uniform cubic cells over ℝ³ for fixed-radius neighbour queries.
#[derive(Clone, Debug)]
pub(crate) struct CellIndex {
    cell: f64,
    map: HashMap<(i32, i32, i32), Vec<usize>>,
}

impl CellIndex {
    fn key(&self, p: &[f64; 3]) -> (i32, i32, i32) {
        (
            (p[0] / self.cell).floor() as i32,
            (p[1] / self.cell).floor() as i32,
            (p[2] / self.cell).floor() as i32,
        )
    }

    pub(crate) fn new(cell: f64) -> Self {
        Self {
            cell,
            map: HashMap::new(),
        }
    }

    pub(crate) fn insert(&mut self, p: &[f64; 3], idx: usize) {
        let k = self.key(p);
        self.map.entry(k).or_default().push(idx);
    }

    /// Indices in cells that could hold points within chord distance ≤ cell.
    pub(crate) fn candidates<'a>(&'a self, p: &[f64; 3]) -> impl Iterator<Item = usize> + 'a {
        let (a, b, c) = self.key(p);
        (-1..=1).flat_map(move |i| {
            (-1..=1).flat_map(move |j| {
                (-1..=1).flat_map(move |k| {
                    self.map
                        .get(&(a + i, b + j, c + k))
                        .map(|v| v.as_slice())
                        .unwrap_or(&[])
                        .iter()
                        .copied()
                })
            })
        })
    }
}

/// Chord length for geodesic distance d.
fn chord(d: f64) -> f64 {
    2.0 * (d / 2.0).sin()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NetReport {
    pub centers: Vec<[f64; 3]>,
    pub r: f64,
    pub seed: u64,
    pub candidates: usize,
    /// card · r², the constant in card ≥ c₀ r⁻²
    pub c0: f64,
    pub min_separation: f64,
}

/// Greedy maximal r/2-separated subset of a fine, seeded-shuffled Fibonacci
/// candidate set. Every candidate ends up within r/2 of a center.
pub fn build_net(r: f64, seed: u64, r0: f64) -> Result<NetReport, SymbolError> {
    if !(r > 0.0) || r > r0 {
        return Err(SymbolError::RadiusTooLarge { r, r0 });
    }
    let sep = r / 2.0;
    // candidate spacing ≈ r/20 keeps maximality meaningful on the sphere
    let n_cand = ((4.0 * std::f64::consts::PI) / (r / 20.0).powi(2)).ceil() as usize;
    let mut cands = SampleGrid::fibonacci(n_cand).points;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    cands.shuffle(&mut rng);

    let sep_chord = chord(sep);
    let mut index = CellIndex::new(sep_chord);
    let mut centers: Vec<[f64; 3]> = Vec::new();
    for p in &cands {
        let clash = index
            .candidates(p)
            .any(|j| geodesic(&centers[j], p) < sep);
        if !clash {
            index.insert(p, centers.len());
            centers.push(*p);
        }
    }
    let mut min_separation = f64::INFINITY;
    for (i, c) in centers.iter().enumerate() {
        for j in index.candidates(c) {
            if j != i {
                min_separation = min_separation.min(geodesic(c, &centers[j]));
            }
        }
    }
    Ok(NetReport {
        c0: centers.len() as f64 * r * r,
        centers,
        r,
        seed,
        candidates: cands.len(),
        min_separation,
    })
}

/// f_i = g_i / Σ_j g_j with g_i = u(d(x, z_i)/r).
#[derive(Clone, Debug)]
pub struct PartitionOfUnity {
    pub centers: Vec<[f64; 3]>,
    pub r: f64,
    /// max number of g_j nonzero at a validation point
    pub multiplicity: usize,
    /// max |Σ f_i − 1| on the validation grid
    pub sum_error: f64,
    profile: CutoffProfile,
    index: CellIndex,
    members: Vec<Symbol>,
}

impl PartitionOfUnity {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn member(&self, i: usize) -> &Symbol {
        &self.members[i]
    }

    pub fn members(&self) -> &[Symbol] {
        &self.members
    }

    /// Nonzero (index, f_i(x)) pairs at a unit vector x, by direct
    /// evaluation of the cutoffs (no jets).
    pub fn weights_at(&self, x: &[f64; 3]) -> Vec<(usize, f64)> {
        let mut g: Vec<(usize, f64)> = self
            .index
            .candidates(x)
            .filter_map(|j| {
                let d = geodesic(x, &self.centers[j]) / self.r;
                let v = self.profile.value(d);
                (v > 0.0).then_some((j, v))
            })
            .collect();
        let total: f64 = g.iter().map(|(_, v)| v).sum();
        for (_, v) in &mut g {
            *v /= total;
        }
        g.sort_by_key(|&(j, _)| j);
        g
    }

    /// max_i |f_i|_k · r^k for k = 1, 2, 3 over a sample of members, each
    /// on a dense local grid covering its support.
    pub fn derivative_constants(&self, sample: usize, seed: u64) -> Result<[f64; 3], SymbolError> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        idx.shuffle(&mut rng);
        let mut out = [0.0f64; 3];
        for &i in idx.iter().take(sample) {
            let grid = local_cap_grid(&self.centers[i], BUMP_OUTER * self.r * 1.05, 60);
            let s = ck_seminorms(&self.members[i], &grid, 3)?;
            for k in 1..=3 {
                out[k - 1] = out[k - 1].max(s[k] * self.r.powi(k as i32));
            }
        }
        Ok(out)
    }
}

/// Polar grid on the cap of geodesic radius `radius` around `center`.
pub fn local_cap_grid(center: &[f64; 3], radius: f64, n: usize) -> SampleGrid {
    // orthonormal frame (e1, e2, center)
    let c = *center;
    let helper = if c[2].abs() < 0.9 { [0.0, 0.0, 1.0] } else { [1.0, 0.0, 0.0] };
    let mut e1 = [
        helper[1] * c[2] - helper[2] * c[1],
        helper[2] * c[0] - helper[0] * c[2],
        helper[0] * c[1] - helper[1] * c[0],
    ];
    let n1 = dot(&e1, &e1).sqrt();
    for v in &mut e1 {
        *v /= n1;
    }
    let e2 = [
        c[1] * e1[2] - c[2] * e1[1],
        c[2] * e1[0] - c[0] * e1[2],
        c[0] * e1[1] - c[1] * e1[0],
    ];
    let mut points = Vec::new();
    for i in 0..=n {
        let theta = radius * i as f64 / n as f64;
        let m = if i == 0 { 1 } else { 4 * i };
        for j in 0..m {
            let phi = 2.0 * std::f64::consts::PI * (j as f64 + 0.5 * (i % 2) as f64) / m as f64;
            let (st, ct) = theta.sin_cos();
            let (sp, cp) = phi.sin_cos();
            points.push(std::array::from_fn(|a| ct * c[a] + st * (cp * e1[a] + sp * e2[a])));
        }
    }
    SampleGrid {
        domain: Domain::Sphere,
        points,
        description: format!("cap({radius:.4}, {n})"),
    }
}

pub fn build_partition(
    net: &NetReport,
    profile: &CutoffProfile,
) -> Result<PartitionOfUnity, SymbolError> {
    let r = net.r;
    let centers = net.centers.clone();
    let support = BUMP_OUTER * r;
    let mut index = CellIndex::new(chord(support));
    for (i, c) in centers.iter().enumerate() {
        index.insert(c, i);
    }

    // coverage by the 0.6r balls, on a grid finer than the transition width
    let spacing = 0.05 * r;
    let n_val = ((4.0 * std::f64::consts::PI) / (spacing * spacing)).ceil() as usize;
    let validation = SampleGrid::fibonacci(n_val.min(400_000));
    let mut multiplicity = 0;
    let mut sum_error = 0.0f64;
    let provisional = PartitionOfUnity {
        centers: centers.clone(),
        r,
        multiplicity: 0,
        sum_error: 0.0,
        profile: profile.clone(),
        index: index.clone(),
        members: Vec::new(),
    };
    for p in &validation.points {
        let covered = index
            .candidates(p)
            .any(|j| geodesic(p, &centers[j]) <= BUMP_INNER * r);
        if !covered {
            return Err(SymbolError::CoverageGap { point: *p });
        }
        let w = provisional.weights_at(p);
        multiplicity = multiplicity.max(w.len());
        let s: f64 = w.iter().map(|(_, v)| v).sum();
        sum_error = sum_error.max((s - 1.0).abs());
    }

    // symbolic members; the denominator only needs balls meeting supp g_i
    let bumps: Vec<Symbol> = centers
        .iter()
        .map(|c| {
            let d = Symbol::distance_to(*c)?;
            cutoff_compose(profile, &d, r)
        })
        .collect::<Result<_, _>>()?;
    let mut near = CellIndex::new(chord(2.0 * support));
    for (i, c) in centers.iter().enumerate() {
        near.insert(c, i);
    }
    let members = centers
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut nb: Vec<usize> = near
                .candidates(c)
                .filter(|&j| geodesic(c, &centers[j]) < 2.0 * support)
                .collect();
            nb.sort_unstable();
            let den = Symbol::sum(Domain::Sphere, nb.iter().map(|&j| bumps[j].clone()).collect())?;
            bumps[i].div(&den)
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(PartitionOfUnity {
        centers,
        r,
        multiplicity,
        sum_error,
        profile: profile.clone(),
        index,
        members,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_precondition() {
        assert!(matches!(
            build_net(6.0, 1, DEFAULT_R0),
            Err(SymbolError::RadiusTooLarge { .. })
        ));
        assert!(build_net(0.0, 1, DEFAULT_R0).is_err());
    }

    #[test]
    fn net_separation_exhaustive() {
        let net = build_net(0.5, 7, DEFAULT_R0).unwrap();
        let c = &net.centers;
        for i in 0..c.len() {
            for j in i + 1..c.len() {
                assert!(geodesic(&c[i], &c[j]) >= 0.25 - 1e-12);
            }
        }
        assert!(net.min_separation >= 0.25 - 1e-12);
    }

    #[test]
    fn partition_sums_to_one() {
        let net = build_net(0.5, 3, DEFAULT_R0).unwrap();
        let pu = build_partition(&net, &CutoffProfile::bump()).unwrap();
        assert!(pu.sum_error < 1e-10, "{}", pu.sum_error);
        // symbolic members agree with the fast evaluator
        let grid = SampleGrid::fibonacci(300);
        for p in &grid.points {
            let w = pu.weights_at(p);
            let total: f64 = w.iter().map(|&(i, _)| pu.member(i).value(p).unwrap()).sum();
            assert!((total - 1.0).abs() < 1e-10);
            for &(i, v) in &w {
                assert!((pu.member(i).value(p).unwrap() - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn member_support() {
        let net = build_net(0.5, 3, DEFAULT_R0).unwrap();
        let pu = build_partition(&net, &CutoffProfile::bump()).unwrap();
        let grid = SampleGrid::fibonacci(2000);
        for i in [0, pu.len() / 2, pu.len() - 1] {
            for p in &grid.points {
                if geodesic(p, &pu.centers[i]) > 0.7 * pu.r {
                    assert!(pu.member(i).value(p).unwrap().abs() < 1e-12);
                }
            }
        }
    }
}
