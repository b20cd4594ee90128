//! Stopping-cube (corona) decompositions and the stratifications of cubes by
//! their `A_2` product and by their density relative to a stopping cube.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DyadicCube, DyadicGrid};
use crate::weights::Weight;

/// Density jump that triggers a new stopping cube.
pub const STOPPING_FACTOR: f64 = 4.0;

/// Constant in `Σ_{L ⊆ Q} w(L) ≤ (16/9) ‖w‖_{A_2} w(Q)`.
pub const CARLESON_CONSTANT: f64 = 16.0 / 9.0;

#[derive(Debug, Clone, PartialEq)]
pub struct StoppingCube {
    pub cube: DyadicCube,
    /// `μ(L) / |L|`.
    pub density: f64,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Number of strict stopping ancestors.
    pub depth: u32,
}

/// A `μ`-corona decomposition of a cube family under `top`.
#[derive(Debug, Clone)]
pub struct CoronaDecomposition {
    mu: Weight,
    top: DyadicCube,
    factor: f64,
    family: HashSet<DyadicCube>,
    /// Sorted by (level, index); the top cube is entry 0.
    stopping: Vec<StoppingCube>,
    stop_index: HashMap<DyadicCube, usize>,
    /// `λ(Q)` for every family cube.
    assignment: BTreeMap<DyadicCube, usize>,
    /// `𝒬'(L)`, sorted, indexed like `stopping`.
    coronas: Vec<Vec<DyadicCube>>,
}

/// Every cube contained in `top`.
pub fn cubes_under(grid: &DyadicGrid, top: DyadicCube) -> Vec<DyadicCube> {
    grid.cubes_within(top).collect()
}

/// Principal-cube construction with the standard factor 4.
pub fn build_corona(
    mu: &Weight,
    family: impl IntoIterator<Item = DyadicCube>,
    top: DyadicCube,
) -> Result<CoronaDecomposition> {
    build_corona_with_factor(mu, family, top, STOPPING_FACTOR)
}

/// Principal-cube construction: starting from `top`, the stopping children
/// of a stopping cube `L` are the maximal family cubes `Q ⊊ L` with
/// `μ(Q)/|Q| > factor · μ(L)/|L|`.
///
/// Candidates are taken from the family itself, so every stopping cube other
/// than `top` belongs to the family and inherits its scale separation.
pub fn build_corona_with_factor(
    mu: &Weight,
    family: impl IntoIterator<Item = DyadicCube>,
    top: DyadicCube,
    factor: f64,
) -> Result<CoronaDecomposition> {
    let grid = mu.grid();
    if !grid.is_valid(top) {
        return Err(Error::Config(format!("top cube {top} is not on {grid}")));
    }
    if !(factor >= 1.0) {
        return Err(Error::Config(format!("stopping factor must be >= 1, got {factor}")));
    }
    let family: HashSet<DyadicCube> = family.into_iter().collect();
    if let Some(q) = family.iter().find(|q| !top.contains(q) || !grid.is_valid(**q)) {
        return Err(Error::Config(format!("family cube {q} is not contained in {top}")));
    }

    // (cube, parent cube) in discovery order
    let mut found: Vec<(DyadicCube, Option<DyadicCube>)> = vec![(top, None)];
    let mut lambda: HashMap<DyadicCube, DyadicCube> = HashMap::new();
    if family.contains(&top) {
        lambda.insert(top, top);
    }
    let mut next = 0;
    while next < found.len() {
        let l = found[next].0;
        next += 1;
        let threshold = factor * mu.density(l);
        let mut stack: Vec<DyadicCube> = Vec::new();
        if l.level < grid.depth() {
            stack.extend(grid.subcubes(l, 1));
        }
        while let Some(q) = stack.pop() {
            let member = family.contains(&q);
            if member && mu.density(q) > threshold {
                found.push((q, Some(l)));
                lambda.insert(q, q);
                continue;
            }
            if member {
                lambda.insert(q, l);
            }
            if q.level < grid.depth() {
                stack.extend(grid.subcubes(q, 1));
            }
        }
    }

    found.sort_by_key(|(q, _)| *q);
    let stop_index: HashMap<DyadicCube, usize> = found.iter().enumerate().map(|(i, (q, _))| (*q, i)).collect();
    let mut stopping: Vec<StoppingCube> = found
        .iter()
        .map(|(q, p)| StoppingCube {
            cube: *q,
            density: mu.density(*q),
            parent: p.map(|p| stop_index[&p]),
            children: Vec::new(),
            depth: 0,
        })
        .collect();
    for i in 0..stopping.len() {
        if let Some(p) = stopping[i].parent {
            stopping[p].children.push(i);
            // parents precede children in (level, index) order
            stopping[i].depth = stopping[p].depth + 1;
        }
    }

    let mut coronas = vec![Vec::new(); stopping.len()];
    let mut assignment = BTreeMap::new();
    for (q, l) in lambda {
        let i = stop_index[&l];
        assignment.insert(q, i);
        coronas[i].push(q);
    }
    coronas.iter_mut().for_each(|c| c.sort());

    Ok(CoronaDecomposition {
        mu: mu.clone(),
        top,
        factor,
        family,
        stopping,
        stop_index,
        assignment,
        coronas,
    })
}

/// Results of verifying the defining conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoronaChecks {
    /// Pairs `L ⊊ L'` violating `μ(L)/|L| > factor · μ(L')/|L'|`.
    pub lin1_violations: usize,
    /// Smallest `(μ(L)/|L|) / (factor · μ(L')/|L'|)` over such pairs.
    pub lin1_min_ratio: f64,
    /// Family cubes violating `factor · μ(λ(Q))/|λ(Q)| ≥ μ(Q)/|Q|`.
    pub lin2_violations: usize,
    /// Largest `(μ(Q)/|Q|) / (factor · μ(λ(Q))/|λ(Q)|)`.
    pub lin2_max_ratio: f64,
    /// Family cubes whose assigned cube is not their minimal stopping ancestor.
    pub assignment_errors: usize,
    /// Whether the coronas cover the family exactly once.
    pub partition_ok: bool,
}

impl CoronaChecks {
    pub fn holds(&self) -> bool {
        self.lin1_violations == 0 && self.lin2_violations == 0 && self.assignment_errors == 0 && self.partition_ok
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PackingReport {
    /// `max_L |⋃_{L' ⊊ L} L'| / |L|`.
    pub max_union_fraction: f64,
    pub union_witness: DyadicCube,
    /// `max_L ‖Σ_{L' ⊆ L} 1_{L'}‖_2 / |L|^{1/2}`.
    pub max_overlap_ratio: f64,
    pub overlap_witness: DyadicCube,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarlesonReport {
    /// `max_Q Σ_{L ⊆ Q} μ(L) / μ(Q)`.
    pub max_ratio: f64,
    pub witness: DyadicCube,
    /// `(16/9) ‖μ‖_{A_2}`.
    pub bound: f64,
}

impl CarlesonReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.max_ratio <= self.bound + tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescendantMassReport {
    /// `max_L μ(⋃_{L' ⊊ L} L') / μ(L)`.
    pub max_fraction: f64,
    pub witness: DyadicCube,
    /// `1 - (9/16) / ‖μ‖_{A_2}`.
    pub bound: f64,
}

impl CoronaDecomposition {
    pub fn grid(&self) -> DyadicGrid {
        self.mu.grid()
    }

    pub fn measure(&self) -> &Weight {
        &self.mu
    }

    pub fn top(&self) -> DyadicCube {
        self.top
    }

    pub fn factor(&self) -> f64 {
        self.factor
    }

    pub fn stopping(&self) -> &[StoppingCube] {
        &self.stopping
    }

    pub fn stopping_cubes(&self) -> impl Iterator<Item = DyadicCube> + '_ {
        self.stopping.iter().map(|s| s.cube)
    }

    pub fn stopping_index(&self, q: &DyadicCube) -> Option<usize> {
        self.stop_index.get(q).copied()
    }

    pub fn is_stopping(&self, q: &DyadicCube) -> bool {
        self.stop_index.contains_key(q)
    }

    /// `λ(Q)` for a family cube.
    pub fn lambda(&self, q: &DyadicCube) -> Option<DyadicCube> {
        self.assignment.get(q).map(|&i| self.stopping[i].cube)
    }

    /// `𝒬'(L)` for the stopping cube at `index`.
    pub fn corona(&self, index: usize) -> &[DyadicCube] {
        &self.coronas[index]
    }

    pub fn corona_of(&self, l: &DyadicCube) -> Option<&[DyadicCube]> {
        self.stopping_index(l).map(|i| self.corona(i))
    }

    pub fn family_len(&self) -> usize {
        self.family.len()
    }

    /// Minimal stopping cube containing `q`, found by walking up from `q`.
    fn minimal_stopping_ancestor(&self, q: DyadicCube) -> Option<usize> {
        let mut c = Some(q);
        while let Some(x) = c {
            if let Some(&i) = self.stop_index.get(&x) {
                return Some(i);
            }
            if x == self.top {
                return None;
            }
            c = x.parent();
        }
        None
    }

    pub fn checks(&self) -> CoronaChecks {
        let mut lin1_violations = 0;
        let mut lin1_min_ratio = f64::INFINITY;
        for s in &self.stopping {
            let mut a = s.parent;
            while let Some(p) = a {
                let big = &self.stopping[p];
                if !(s.density > self.factor * big.density) {
                    lin1_violations += 1;
                }
                lin1_min_ratio = lin1_min_ratio.min(s.density / (self.factor * big.density));
                a = big.parent;
            }
        }
        let mut lin2_violations = 0;
        let mut lin2_max_ratio = 0.0f64;
        let mut assignment_errors = 0;
        for (q, &i) in &self.assignment {
            let l = &self.stopping[i];
            let dq = self.mu.density(*q);
            if !(self.factor * l.density >= dq) {
                lin2_violations += 1;
            }
            lin2_max_ratio = lin2_max_ratio.max(dq / (self.factor * l.density));
            if self.minimal_stopping_ancestor(*q) != Some(i) {
                assignment_errors += 1;
            }
        }
        let covered: usize = self.coronas.iter().map(Vec::len).sum();
        let partition_ok = covered == self.family.len() && self.family.iter().all(|q| self.assignment.contains_key(q));
        CoronaChecks {
            lin1_violations,
            lin1_min_ratio,
            lin2_violations,
            lin2_max_ratio,
            assignment_errors,
            partition_ok,
        }
    }

    /// Union fraction of the strict stopping descendants and the `L²`
    /// overlap ratio of the stopping indicators below each stopping cube.
    pub fn packing_check(&self) -> PackingReport {
        let grid = self.grid();
        let mut report = PackingReport {
            max_union_fraction: 0.0,
            union_witness: self.top,
            max_overlap_ratio: 0.0,
            overlap_witness: self.top,
        };
        // ∫ (Σ_{L' ⊆ L} 1_{L'})² = Σ_{A ⊆ L} |A| (1 + 2·#{B : A ⊊ B ⊆ L}),
        // accumulated over the tree from the leaves up.
        let n = self.stopping.len();
        let mut volume_sum = vec![0.0; n]; // Σ_{A ⊆ L} |A|
        let mut square = vec![0.0; n];
        for i in (0..n).rev() {
            let s = &self.stopping[i];
            let vol = grid.volume(s.cube);
            let (mut vs, mut sq) = (vol, vol);
            for &c in &s.children {
                vs += volume_sum[c];
                sq += square[c] + 2.0 * volume_sum[c];
            }
            volume_sum[i] = vs;
            square[i] = sq;
            let union: f64 = s.children.iter().map(|&c| grid.volume(self.stopping[c].cube)).sum();
            let frac = union / vol;
            if frac > report.max_union_fraction {
                report.max_union_fraction = frac;
                report.union_witness = s.cube;
            }
            let overlap = (sq / vol).sqrt();
            if overlap > report.max_overlap_ratio {
                report.max_overlap_ratio = overlap;
                report.overlap_witness = s.cube;
            }
        }
        report
    }

    /// `Σ_{L ∈ 𝓛, L ⊆ Q} μ(L)`.
    pub fn carleson_sum(&self, q: DyadicCube) -> f64 {
        self.stopping
            .iter()
            .filter(|s| q.contains(&s.cube))
            .map(|s| self.mu.mass(s.cube))
            .sum()
    }

    /// The Carleson ratio over every cube; only ancestors of stopping cubes
    /// can carry a nonzero sum.
    pub fn carleson_check(&self, a2: f64) -> CarlesonReport {
        let mut sums: BTreeMap<DyadicCube, f64> = BTreeMap::new();
        for s in &self.stopping {
            let m = self.mu.mass(s.cube);
            let mut c = Some(s.cube);
            while let Some(x) = c {
                *sums.entry(x).or_insert(0.0) += m;
                c = x.parent();
            }
        }
        let mut report = CarlesonReport {
            max_ratio: 0.0,
            witness: self.top,
            bound: CARLESON_CONSTANT * a2,
        };
        for (q, s) in sums {
            let r = s / self.mu.mass(q);
            if r > report.max_ratio {
                report.max_ratio = r;
                report.witness = q;
            }
        }
        report
    }

    /// Mass fraction of the strict stopping descendants of each stopping cube.
    pub fn descendant_mass_check(&self, a2: f64) -> DescendantMassReport {
        let mut report = DescendantMassReport {
            max_fraction: 0.0,
            witness: self.top,
            bound: 1.0 - 9.0 / (16.0 * a2),
        };
        for s in &self.stopping {
            let union: f64 = s.children.iter().map(|&c| self.mu.mass(self.stopping[c].cube)).sum();
            let frac = union / self.mu.mass(s.cube);
            if frac > report.max_fraction {
                report.max_fraction = frac;
                report.witness = s.cube;
            }
        }
        report
    }

    /// Nested export of the stopping forest.
    pub fn forest(&self) -> ForestNode {
        fn node(c: &CoronaDecomposition, i: usize) -> ForestNode {
            let s = &c.stopping[i];
            ForestNode {
                cube: s.cube,
                density: s.density,
                corona_size: c.coronas[i].len(),
                children: s.children.iter().map(|&k| node(c, k)).collect(),
            }
        }
        node(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestNode {
    pub cube: DyadicCube,
    pub density: f64,
    pub corona_size: usize,
    pub children: Vec<ForestNode>,
}

/// Smallest `n ≥ 0` with `product ≤ 2^n`, so that `2^{n-1} < product ≤ 2^n`
/// whenever `product > 1/2`.
pub fn qn_index(product: f64) -> u32 {
    let mut n = 0;
    while product > (n as f64).exp2() {
        n += 1;
    }
    n
}

/// Cubes grouped by the dyadic size of `(w(Q)/|Q|)(w^{-1}(Q)/|Q|)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QnPartition {
    pub classes: BTreeMap<u32, Vec<DyadicCube>>,
}

impl QnPartition {
    pub fn class(&self, n: u32) -> &[DyadicCube] {
        self.classes.get(&n).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn max_index(&self) -> Option<u32> {
        self.classes.keys().next_back().copied()
    }

    pub fn len(&self) -> usize {
        self.classes.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn qn_partition(w: &Weight) -> QnPartition {
    let grid = w.grid();
    qn_partition_of(w, grid.cubes())
}

pub fn qn_partition_of(w: &Weight, cubes: impl IntoIterator<Item = DyadicCube>) -> QnPartition {
    let mut classes: BTreeMap<u32, Vec<DyadicCube>> = BTreeMap::new();
    for q in cubes {
        classes.entry(qn_index(w.a2_product(q))).or_default().push(q);
    }
    QnPartition { classes }
}

/// The window convention of [`alpha_index`], for output metadata.
pub const ALPHA_WINDOW_CONVENTION: &str =
    "alpha >= 0 with 2^(1-alpha) <= ratio < 2^(2-alpha); ratio = 4 is assigned to alpha = 0";

/// Class of a density ratio `r = (w(Q)/|Q|) / (w(L)/|L|)`: `α ≥ 0` with
/// `2^{1-α} ≤ r < 2^{2-α}`, except that `r = 4` is also placed in `α = 0`.
/// Ratios above 4 or not positive have no class.
pub fn alpha_index(ratio: f64) -> Option<u32> {
    if !(ratio > 0.0) || ratio > 4.0 {
        return None;
    }
    let mut alpha = 0u32;
    while ratio < (1.0 - alpha as f64).exp2() {
        alpha += 1;
    }
    Some(alpha)
}

/// Corona cubes grouped by density relative to their stopping cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PnAlphaPartition {
    pub stopping_cube: DyadicCube,
    pub classes: BTreeMap<u32, Vec<DyadicCube>>,
    /// Cubes whose density falls outside every window.
    pub residue: Vec<DyadicCube>,
}

impl PnAlphaPartition {
    pub fn class(&self, alpha: u32) -> &[DyadicCube] {
        self.classes.get(&alpha).map(Vec::as_slice).unwrap_or(&[])
    }
}

pub fn pn_alpha(l: DyadicCube, cubes: &[DyadicCube], w: &Weight) -> PnAlphaPartition {
    let base = w.density(l);
    let mut classes: BTreeMap<u32, Vec<DyadicCube>> = BTreeMap::new();
    let mut residue = Vec::new();
    for &q in cubes {
        match alpha_index(w.density(q) / base) {
            Some(a) => classes.entry(a).or_default().push(q),
            None => residue.push(q),
        }
    }
    PnAlphaPartition {
        stopping_cube: l,
        classes,
        residue,
    }
}
