//! Partial sums `H(Q₀, 𝒬') = Σ_{Q ⊆ Q₀, Q ∈ 𝒬'} ⟨w, g_Q⟩ γ_Q`, their
//! normalized suprema, and the corona split of `‖H(Q₀, 𝒬_n)‖²`.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::corona::{build_corona, qn_index, CoronaDecomposition};
use crate::error::{ensure_same_grid, Error, Result};
use crate::grid::{DyadicCube, GridFunction};
use crate::shifts::{partial_apply_local, ShiftOperator, SimpleHaarShift};
use crate::weights::{a2_characteristic, Weight};

/// `H(Q₀, 𝒬')` on the cells of `q0`, row-major within `q0`.
pub fn h_local(
    q0: DyadicCube,
    family: impl IntoIterator<Item = DyadicCube>,
    t: &SimpleHaarShift,
    w: &Weight,
) -> Vec<f64> {
    partial_apply_local(t, w.sums(), q0, family)
}

/// `H(Q₀, 𝒬')` as a function on the whole grid.
pub fn h_functional(
    q0: DyadicCube,
    family: impl IntoIterator<Item = DyadicCube>,
    t: &SimpleHaarShift,
    w: &Weight,
) -> Result<GridFunction> {
    let grid = t.grid();
    ensure_same_grid(grid, w.grid())?;
    let local = h_local(q0, family, t, w);
    let mut f = GridFunction::zeros(grid);
    for (c, v) in grid.cells(q0).zip(local) {
        f.values_mut()[c] = v;
    }
    Ok(f)
}

/// `‖v‖²_{L²(w^{-1})}` for values `v` on the cells of `q`.
fn dual_norm_sq(w: &Weight, q: DyadicCube, v: &[f64]) -> f64 {
    let grid = w.grid();
    grid.cells(q)
        .zip(v)
        .map(|(c, x)| x * x * w.dual_values()[c])
        .sum::<f64>()
        * grid.cell_volume()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoldH {
    pub value: f64,
    pub witness: Option<DyadicCube>,
}

/// `sup_{Q₀} ‖H(Q₀, 𝒬')‖_{L²(w^{-1})} / w(Q₀)^{1/2}` with `Q₀` ranging
/// over `tops`.
pub fn bold_h_over(
    family: &[DyadicCube],
    tops: impl IntoIterator<Item = DyadicCube>,
    t: &SimpleHaarShift,
    w: &Weight,
) -> Result<BoldH> {
    ensure_same_grid(t.grid(), w.grid())?;
    let mut members: Vec<DyadicCube> = family.to_vec();
    members.sort();
    members.dedup();
    let mut best = BoldH {
        value: 0.0,
        witness: None,
    };
    for q0 in tops {
        let inside = members.iter().copied().filter(|q| q0.contains(q));
        let h = h_local(q0, inside, t, w);
        let r = (dual_norm_sq(w, q0, &h) / w.mass(q0)).sqrt();
        if r > best.value || best.witness.is_none() {
            best = BoldH {
                value: r,
                witness: Some(q0),
            };
        }
    }
    Ok(best)
}

/// `𝐇(𝒬')` with the supremum restricted to `Q₀ ∈ 𝒬'`; zero for an empty
/// family. Disjoint maximal subcubes make the restriction lossless.
pub fn bold_h(family: &[DyadicCube], t: &SimpleHaarShift, w: &Weight) -> Result<BoldH> {
    bold_h_over(family, family.iter().copied(), t, w)
}

/// `𝒬_n` intersected with the cubes carrying a term of `t`.
pub fn qn_term_class(t: &SimpleHaarShift, w: &Weight, n: u32) -> Vec<DyadicCube> {
    t.cubes()
        .iter()
        .copied()
        .filter(|q| qn_index(w.a2_product(*q)) == n)
        .collect()
}

/// `𝒫_n = {Q ∈ 𝒬_n : Q ⊆ Q₀}` and its `w`-corona decomposition under `Q₀`.
pub fn pn_corona(q0: DyadicCube, n: u32, t: &SimpleHaarShift, w: &Weight) -> Result<CoronaDecomposition> {
    let family: Vec<DyadicCube> = qn_term_class(t, w, n).into_iter().filter(|q| q0.contains(q)).collect();
    build_corona(w, family, q0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbSplit {
    pub n: u32,
    pub top: DyadicCube,
    pub a2: f64,
    /// `Σ_L ‖H_n(L)‖²_{L²(w^{-1})}`.
    pub a: f64,
    /// `Σ_L Σ_{L' ⊊ L} ∫ H_n(L) H_n(L') w^{-1}`.
    pub b: f64,
    /// `‖Σ_L H_n(L)‖²_{L²(w^{-1})}`; equals `A + 2B`.
    pub total: f64,
    /// `‖H(Q₀, 𝒫_n)‖²_{L²(w^{-1})}`; at most `total`.
    pub h_norm_sq: f64,
    pub w_top: f64,
    pub stopping_count: usize,
    /// `max_L B(L) / (2^n w(L))`.
    pub max_b_local: f64,
}

impl AbSplit {
    pub fn normalized_a(&self) -> f64 {
        self.a / ((self.n as f64).exp2() * self.a2 * self.w_top)
    }

    pub fn normalized_b(&self) -> f64 {
        self.b / ((self.n as f64).exp2() * self.a2 * self.w_top)
    }
}

/// Relative spread tolerated when asserting that a sum is constant on a cube.
const SINGLE_VALUE_TOLERANCE: f64 = 1e-12;

/// The split `‖Σ_L H_n(L)‖² = A + 2B` over a corona of `𝒫_n`, with
/// `H_n(L) = |H(L, 𝒫_n(L))|`. Before using the cross terms, asserts that
/// `H_n(L)` is constant on every strict stopping descendant of `L`; with
/// separated scales this holds because each such `L'` lies inside a single
/// subcell of every term cube of the corona of `L`.
pub fn corona_ab_split(
    q0: DyadicCube,
    n: u32,
    corona: &CoronaDecomposition,
    t: &SimpleHaarShift,
    w: &Weight,
) -> Result<AbSplit> {
    let grid = t.grid();
    ensure_same_grid(grid, w.grid())?;
    if corona.top() != q0 {
        return Err(Error::Config(format!(
            "corona top {} differs from Q0 = {q0}",
            corona.top()
        )));
    }
    let a2 = a2_characteristic(w);
    let stops = corona.stopping();
    // |H(L, 𝒫_n(L))| as full-grid vectors (zero outside L)
    let mut hn: Vec<Vec<f64>> = Vec::with_capacity(stops.len());
    for (i, s) in stops.iter().enumerate() {
        let local = h_local(s.cube, corona.corona(i).iter().copied(), t, w);
        let mut v = vec![0.0; grid.cell_count()];
        for (c, x) in grid.cells(s.cube).zip(local) {
            v[c] = x.abs();
        }
        hn.push(v);
    }
    let dual = w.dual_values();
    let h = grid.cell_volume();
    let mut a = 0.0;
    let mut b = 0.0;
    let mut max_b_local = 0.0f64;
    for (i, s) in stops.iter().enumerate() {
        a += grid.cells(s.cube).map(|c| hn[i][c] * hn[i][c] * dual[c]).sum::<f64>() * h;
        let mut b_l = 0.0;
        for (k, d) in stops.iter().enumerate() {
            if !s.cube.strictly_contains(&d.cube) {
                continue;
            }
            let (lo, hi) = grid
                .cells(d.cube)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
                    (lo.min(hn[i][c]), hi.max(hn[i][c]))
                });
            let scale = hi.abs().max(lo.abs()).max(f64::MIN_POSITIVE);
            if hi - lo > SINGLE_VALUE_TOLERANCE * scale.max(1.0) {
                return Err(Error::Structural(format!(
                    "H_n({}) is not constant on the stopping cube {} (spread {}); \
                     the shift family must have separated scales",
                    s.cube,
                    d.cube,
                    hi - lo
                )));
            }
            b_l += grid.cells(d.cube).map(|c| hn[i][c] * hn[k][c] * dual[c]).sum::<f64>() * h;
        }
        b += b_l;
        max_b_local = max_b_local.max(b_l / ((n as f64).exp2() * w.mass(s.cube)));
    }
    let mut sum = vec![0.0; grid.cell_count()];
    for v in &hn {
        sum.iter_mut().zip(v).for_each(|(x, y)| *x += y);
    }
    let total = sum.iter().zip(dual).map(|(x, m)| x * x * m).sum::<f64>() * h;
    let members: BTreeSet<DyadicCube> = (0..stops.len())
        .flat_map(|i| corona.corona(i).iter().copied())
        .collect();
    let hq = h_local(q0, members, t, w);
    let h_norm_sq = dual_norm_sq(w, q0, &hq);
    Ok(AbSplit {
        n,
        top: q0,
        a2,
        a,
        b,
        total,
        h_norm_sq,
        w_top: w.mass(q0),
        stopping_count: stops.len(),
        max_b_local,
    })
}

/// Distinct `n` for which some term cube falls in `𝒬_n`.
pub fn occupied_classes(t: &SimpleHaarShift, w: &Weight) -> Vec<u32> {
    let set: HashSet<u32> = t.cubes().iter().map(|q| qn_index(w.a2_product(*q))).collect();
    let mut v: Vec<u32> = set.into_iter().collect();
    v.sort();
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DyadicGrid;
    use crate::shifts::{petermichl_shift, random_simple_shift, ScaleFamily};
    use crate::weights::random_a2_weight;

    #[test]
    fn lebesgue_weight_gives_zero() {
        let grid = DyadicGrid::new(1, 8).unwrap();
        let w = Weight::lebesgue(grid);
        let t = random_simple_shift(grid, 2, 3, ScaleFamily::Separated).unwrap();
        let h = h_functional(grid.root(), t.cubes().to_vec(), &t, &w).unwrap();
        assert!(h.values().iter().all(|v| v.abs() < 1e-12));
        let c = pn_corona(grid.root(), 0, &t, &w).unwrap();
        let ab = corona_ab_split(grid.root(), 0, &c, &t, &w).unwrap();
        assert!(ab.a.abs() < 1e-20 && ab.b.abs() < 1e-20);
        assert_eq!(bold_h(&[], &t, &w).unwrap().value, 0.0);
    }

    #[test]
    fn h_matches_direct_sum() {
        let grid = DyadicGrid::new(1, 7).unwrap();
        let w = random_a2_weight(3, 4, grid).unwrap();
        let t = petermichl_shift(grid, ScaleFamily::All).unwrap();
        let q0 = DyadicCube::new_1d(1, 0);
        let fam: Vec<_> = t.cubes().iter().copied().filter(|q| q.index[0] % 2 == 0).collect();
        let h = h_functional(q0, fam.iter().copied(), &t, &w).unwrap();
        let mut direct = vec![0.0; grid.cell_count()];
        for q in fam.iter().filter(|q| q0.contains(q)) {
            let p = t.profile(q).unwrap();
            let c: f64 = grid.subcubes(*q, 2).zip(&p.g).map(|(s, g)| g * w.mass(s)).sum();
            for (s, y) in grid.subcubes(*q, 2).zip(&p.gamma) {
                for cell in grid.cells(s) {
                    direct[cell] += c * y;
                }
            }
        }
        for (a, b) in h.values().iter().zip(&direct) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn restricting_the_supremum_is_lossless() {
        let grid = DyadicGrid::new(1, 9).unwrap();
        let w = random_a2_weight(5, 7, grid).unwrap();
        let t = random_simple_shift(grid, 2, 1, ScaleFamily::Separated).unwrap();
        for n in occupied_classes(&t, &w) {
            let fam = qn_term_class(&t, &w, n);
            let restricted = bold_h(&fam, &t, &w).unwrap().value;
            let all = bold_h_over(&fam, grid.cubes(), &t, &w).unwrap().value;
            assert!(
                (restricted - all).abs() <= 1e-12 * all.max(1.0),
                "{restricted} vs {all}"
            );
        }
    }

    #[test]
    fn ab_identity_with_separated_scales() {
        let grid = DyadicGrid::new(1, 10).unwrap();
        for seed in 0..5 {
            let w = random_a2_weight(6, seed, grid).unwrap();
            let t = random_simple_shift(grid, 2, seed + 10, ScaleFamily::Separated).unwrap();
            for n in occupied_classes(&t, &w) {
                for q0 in qn_term_class(&t, &w, n).into_iter().take(4) {
                    let c = pn_corona(q0, n, &t, &w).unwrap();
                    assert!(c.checks().holds());
                    let ab = corona_ab_split(q0, n, &c, &t, &w).unwrap();
                    assert!((ab.total - (ab.a + 2.0 * ab.b)).abs() <= 1e-10 * ab.total.max(1e-300));
                    assert!(ab.h_norm_sq <= ab.total * (1.0 + 1e-12) + 1e-300);
                    if c.stopping().len() == 1 {
                        assert_eq!(ab.b, 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn unseparated_scales_break_single_value() {
        // w = 1000 on [0,1/8): [0,1/8) stops under the root while [0,1/2)
        // stays in the root's corona, two levels above it.
        let grid = DyadicGrid::new(1, 10).unwrap();
        let w = Weight::from_function(GridFunction::from_fn(grid, |c| if c < 128 { 1000.0 } else { 1.0 })).unwrap();
        let t = random_simple_shift(grid, 3, 1, ScaleFamily::All).unwrap();
        let family = vec![DyadicCube::ROOT, DyadicCube::new_1d(1, 0), DyadicCube::new_1d(3, 0)];
        let c = build_corona(&w, family, DyadicCube::ROOT).unwrap();
        assert_eq!(c.stopping().len(), 2);
        assert!(matches!(
            corona_ab_split(DyadicCube::ROOT, 0, &c, &t, &w),
            Err(Error::Structural(_))
        ));
    }
}
