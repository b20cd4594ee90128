//! Exponential integrability of partial sums `S_Q = Σ_{Q' ⊆ Q} φ_{Q'}` of
//! cube-indexed step functions.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DyadicCube, DyadicGrid};
use crate::shifts::PROFILE_TOLERANCE;

/// Thresholds `2τt` are evaluated for `t = 1, ..., JN_THRESHOLDS`.
pub const JN_THRESHOLDS: u32 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JnLevel {
    pub t: u32,
    pub height: f64,
    /// `max_Q |{|S_Q| > 2τt}| / |Q|`.
    pub worst_fraction: f64,
    /// `τ 2^{1-t}`.
    pub bound: f64,
    pub witness: DyadicCube,
}

impl JnLevel {
    pub fn holds(&self) -> bool {
        self.worst_fraction <= self.bound
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JnReport {
    pub tau: u32,
    /// `max_Q |{|S_Q| > 1}| / (2^{-τd-1}|Q|)`; the hypothesis holds iff ≤ 1.
    pub hypothesis_ratio: f64,
    pub hypothesis_witness: DyadicCube,
    /// Empty when the hypothesis fails.
    pub conclusion: Vec<JnLevel>,
}

impl JnReport {
    pub fn hypothesis_holds(&self) -> bool {
        self.hypothesis_ratio <= 1.0
    }

    pub fn holds(&self) -> bool {
        self.hypothesis_holds() && self.conclusion.iter().all(JnLevel::holds)
    }
}

/// A family `{φ_Q}`: each entry holds the `2^{τd}` values of `φ_Q` on the
/// subcubes of `Q` at relative depth `τ`, row-major.
pub type JnFamily = Vec<(DyadicCube, Vec<f64>)>;

fn validate(grid: &DyadicGrid, tau: u32, family: &[(DyadicCube, Vec<f64>)]) -> Result<()> {
    if tau == 0 || tau > grid.depth() {
        return Err(Error::Config(format!(
            "tau must lie in 1..={}, got {tau}",
            grid.depth()
        )));
    }
    let len = 1usize << (tau * grid.dim());
    let mut seen = HashSet::new();
    for (q, values) in family {
        if !grid.is_valid(*q) || q.level + tau > grid.depth() {
            return Err(Error::Config(format!(
                "cube {q:?} cannot carry a depth-{tau} step function"
            )));
        }
        if !seen.insert(*q) {
            return Err(Error::Config(format!("cube {q:?} appears twice")));
        }
        if values.len() != len {
            return Err(Error::Config(format!(
                "cube {q:?}: expected {len} values, got {}",
                values.len()
            )));
        }
        if values
            .iter()
            .any(|v| !v.is_finite() || v.abs() > 1.0 + PROFILE_TOLERANCE)
        {
            return Err(Error::Config(format!("cube {q:?}: values must be bounded by 1")));
        }
    }
    Ok(())
}

/// Visits `(level, P_level)` from the finest level up, where
/// `P_j = Σ_{level(Q) ≥ j} φ_Q`; on a cube `Q` of level `j`, `P_j = S_Q`.
fn for_each_suffix(
    grid: &DyadicGrid,
    tau: u32,
    family: &[(DyadicCube, Vec<f64>)],
    scale: f64,
    mut visit: impl FnMut(u32, &[f64]),
) {
    let mut by_level: Vec<Vec<usize>> = vec![Vec::new(); grid.depth() as usize + 1];
    for (i, (q, _)) in family.iter().enumerate() {
        by_level[q.level as usize].push(i);
    }
    let mut acc = vec![0.0; grid.cell_count()];
    for j in (0..=grid.depth()).rev() {
        for &i in &by_level[j as usize] {
            let (q, values) = &family[i];
            for (s, v) in grid.subcubes(*q, tau).zip(values) {
                for range in grid.cell_rows(s) {
                    acc[range].iter_mut().for_each(|a| *a += scale * v);
                }
            }
        }
        visit(j, &acc);
    }
}

fn cube_fraction(grid: &DyadicGrid, q: DyadicCube, acc: &[f64], height: f64) -> f64 {
    let count: usize = grid
        .cell_rows(q)
        .map(|r| acc[r].iter().filter(|v| v.abs() > height).count())
        .sum();
    count as f64 / grid.cells_in(q) as f64
}

/// `(ratio, witness)` of the hypothesis for `{scale·φ_Q}`.
fn hypothesis(grid: &DyadicGrid, tau: u32, family: &[(DyadicCube, Vec<f64>)], scale: f64) -> (f64, DyadicCube) {
    let allowed = (-((tau * grid.dim() + 1) as f64)).exp2();
    let mut best = (0.0, DyadicCube::ROOT);
    for_each_suffix(grid, tau, family, scale, |j, acc| {
        for q in grid.level_cubes(j) {
            let r = cube_fraction(grid, q, acc, 1.0) / allowed;
            if r > best.0 {
                best = (r, q);
            }
        }
    });
    best
}

/// Checks the uniform hypothesis `|{|S_Q| > 1}| ≤ 2^{-τd-1}|Q|` on every
/// cube and, when it holds, the conclusion `|{|S_Q| > 2τt}| ≤ τ2^{1-t}|Q|`
/// for `t = 1, ..., 10`.
pub fn jn_check(grid: DyadicGrid, tau: u32, family: &[(DyadicCube, Vec<f64>)]) -> Result<JnReport> {
    validate(&grid, tau, family)?;
    let (hypothesis_ratio, hypothesis_witness) = hypothesis(&grid, tau, family, 1.0);
    let mut report = JnReport {
        tau,
        hypothesis_ratio,
        hypothesis_witness,
        conclusion: Vec::new(),
    };
    if !report.hypothesis_holds() {
        return Ok(report);
    }
    let mut levels: Vec<JnLevel> = (1..=JN_THRESHOLDS)
        .map(|t| JnLevel {
            t,
            height: 2.0 * tau as f64 * t as f64,
            worst_fraction: 0.0,
            bound: tau as f64 * (1.0 - t as f64).exp2(),
            witness: DyadicCube::ROOT,
        })
        .collect();
    for_each_suffix(&grid, tau, family, 1.0, |j, acc| {
        for q in grid.level_cubes(j) {
            for level in levels.iter_mut() {
                let f = cube_fraction(&grid, q, acc, level.height);
                if f > level.worst_fraction {
                    level.worst_fraction = f;
                    level.witness = q;
                }
            }
        }
    });
    report.conclusion = levels;
    Ok(report)
}

/// A random family scaled to the largest multiple (found by bisection) that
/// still satisfies the hypothesis, so the partial sums sit close to the
/// threshold. Cubes are kept with a random density, values mix a common
/// offset with independent noise.
pub fn random_jn_family(grid: DyadicGrid, tau: u32, seed: u64) -> Result<JnFamily> {
    validate(&grid, tau, &[])?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep: f64 = rng.random_range(0.2..=1.0);
    let offset: f64 = rng.random_range(-1.0..=1.0);
    let noise: f64 = rng.random_range(0.0..=1.0);
    let len = 1usize << (tau * grid.dim());
    let mut family = Vec::new();
    for j in 0..=grid.depth() - tau {
        for q in grid.level_cubes(j) {
            if rng.random::<f64>() >= keep {
                continue;
            }
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let values: Vec<f64> = (0..len)
                .map(|_| {
                    let v: f64 = sign * offset + noise * rng.random_range(-1.0..=1.0);
                    v.clamp(-1.0, 1.0)
                })
                .collect();
            family.push((q, values));
        }
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    if hypothesis(&grid, tau, &family, 1.0).0 <= 1.0 {
        lo = 1.0;
    } else {
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if hypothesis(&grid, tau, &family, mid).0 <= 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    for (_, values) in family.iter_mut() {
        values.iter_mut().for_each(|v| *v *= lo);
    }
    Ok(family)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::haar_basis;

    #[test]
    fn zero_family() {
        let grid = DyadicGrid::new(1, 8).unwrap();
        let family: JnFamily = grid
            .cubes()
            .filter(|q| q.level <= 6)
            .map(|q| (q, vec![0.0; 4]))
            .collect();
        let r = jn_check(grid, 2, &family).unwrap();
        assert_eq!(r.hypothesis_ratio, 0.0);
        assert!(r.holds());
        assert!(r.conclusion.iter().all(|l| l.worst_fraction == 0.0));
    }

    #[test]
    fn small_haar_family() {
        let grid = DyadicGrid::new(1, 10).unwrap();
        let eps = 0.05;
        let family: JnFamily = grid
            .cubes()
            .filter(|q| q.level < grid.depth())
            .map(|q| {
                let h = &haar_basis(&grid, q).unwrap()[0];
                let scale = grid.volume(q).sqrt();
                (q, h.child_values.iter().map(|v| eps * v * scale).collect())
            })
            .collect();
        let r = jn_check(grid, 1, &family).unwrap();
        // |S_Q| ≤ ε·depth = 0.5 < 1
        assert_eq!(r.hypothesis_ratio, 0.0);
        assert!(r.holds());
    }

    #[test]
    fn suffix_sums_match_direct_sums() {
        let grid = DyadicGrid::new(2, 4).unwrap();
        let family = random_jn_family(grid, 1, 3).unwrap();
        let q = DyadicCube {
            level: 1,
            index: [1, 0],
        };
        let mut direct = vec![0.0; grid.cell_count()];
        for (p, values) in family.iter().filter(|(p, _)| q.contains(p)) {
            for (s, v) in grid.subcubes(*p, 1).zip(values) {
                for c in grid.cells(s) {
                    direct[c] += v;
                }
            }
        }
        for_each_suffix(&grid, 1, &family, 1.0, |j, acc| {
            if j == 1 {
                for c in grid.cells(q) {
                    assert!((acc[c] - direct[c]).abs() < 1e-12);
                }
            }
        });
    }

    #[test]
    fn random_families_sit_at_the_hypothesis() {
        for (dim, n, tau) in [(1, 10, 1), (1, 10, 2), (2, 5, 1)] {
            let grid = DyadicGrid::new(dim, n).unwrap();
            for seed in 0..5 {
                let family = random_jn_family(grid, tau, seed).unwrap();
                let r = jn_check(grid, tau, &family).unwrap();
                assert!(r.hypothesis_holds(), "{r:?}");
                assert!(r.holds(), "{r:?}");
            }
        }
    }

    #[test]
    fn hypothesis_failure_is_reported() {
        let grid = DyadicGrid::new(1, 6).unwrap();
        let family: JnFamily = grid
            .cubes()
            .filter(|q| q.level <= 5)
            .map(|q| (q, vec![1.0; 2]))
            .collect();
        let r = jn_check(grid, 1, &family).unwrap();
        assert!(!r.hypothesis_holds());
        assert!(r.conclusion.is_empty());
    }

    #[test]
    fn invalid_families_rejected() {
        let grid = DyadicGrid::new(1, 4).unwrap();
        let q = DyadicCube::ROOT;
        assert!(jn_check(grid, 1, &[(q, vec![2.0, 0.0])]).is_err());
        assert!(jn_check(grid, 1, &[(q, vec![0.0])]).is_err());
        assert!(jn_check(grid, 1, &[(q, vec![0.0; 2]), (q, vec![0.0; 2])]).is_err());
        assert!(jn_check(grid, 1, &[(DyadicCube::new_1d(4, 0), vec![0.0; 2])]).is_err());
    }
}
