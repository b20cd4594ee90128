//! Calderón–Zygmund decomposition and weak-type quantities.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::grid::{DyadicCube, DyadicGrid, GridFunction};

use super::{apply_values, ShiftOperator};

/// One bad piece `b_Q = (f - ⟨f⟩_Q) 1_Q`, stored on the cells of `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct BadPart {
    pub cube: DyadicCube,
    /// Values on the cells of `cube`, row-major within it.
    pub values: Vec<f64>,
}

impl BadPart {
    pub fn to_grid_function(&self, grid: DyadicGrid) -> GridFunction {
        let mut f = GridFunction::zeros(grid);
        for (c, v) in grid.cells(self.cube).zip(&self.values) {
            f.values_mut()[c] = *v;
        }
        f
    }

    pub fn l1_norm(&self, grid: &DyadicGrid) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * grid.cell_volume()
    }
}

/// `f = g + Σ_Q b_Q` at height `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CzDecomposition {
    pub height: f64,
    pub good: GridFunction,
    /// Maximal cubes with `⟨|f|⟩_Q > λ`, in (level, index) order.
    pub bad: Vec<BadPart>,
}

/// Diagnostics that should all hold by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CzChecks {
    /// `max_Q |∫ b_Q| / ‖f‖_1`.
    pub mean_defect: f64,
    /// `Σ |Q|` over bad cubes.
    pub bad_measure: f64,
    /// `‖f‖_1 / λ`.
    pub measure_bound: f64,
    pub good_sup: f64,
    /// `2^d λ`.
    pub good_bound: f64,
    /// `max |f - g - Σ b_Q|`.
    pub reconstruction_error: f64,
}

impl CzChecks {
    pub fn holds(&self) -> bool {
        self.mean_defect <= 1e-12
            && self.bad_measure <= self.measure_bound * (1.0 + 1e-12)
            && self.good_sup <= self.good_bound * (1.0 + 1e-12)
            && self.reconstruction_error <= 1e-12
    }
}

/// Top-down scan for maximal cubes with `⟨|f|⟩_Q > λ`. Requires
/// `λ ≥ ⟨|f|⟩_{[0,1)^d}` so that the root is never selected.
pub fn cz_decompose(f: &GridFunction, lambda: f64) -> Result<CzDecomposition> {
    let grid = f.grid();
    let abs = GridFunction::from_fn(grid, |c| f.values()[c].abs());
    let abs_sums = abs.cube_sums();
    let sums = f.cube_sums();
    if !(lambda > 0.0) || abs_sums.total() > lambda {
        return Err(Error::Config(format!(
            "height {lambda} must be positive and at least the mean of |f| ({})",
            abs_sums.total()
        )));
    }
    let mut bad_cubes = Vec::new();
    let mut stack = vec![grid.root()];
    while let Some(q) = stack.pop() {
        if abs_sums.get(&grid, q) / grid.volume(q) > lambda {
            bad_cubes.push(q);
        } else if q.level < grid.depth() {
            stack.extend(grid.subcubes(q, 1));
        }
    }
    bad_cubes.sort();
    let mut good = f.clone();
    let mut bad = Vec::with_capacity(bad_cubes.len());
    for q in bad_cubes {
        let avg = sums.get(&grid, q) / grid.volume(q);
        let mut values = Vec::with_capacity(grid.cells_in(q));
        for c in grid.cells(q) {
            values.push(f.values()[c] - avg);
            good.values_mut()[c] = avg;
        }
        bad.push(BadPart { cube: q, values });
    }
    Ok(CzDecomposition {
        height: lambda,
        good,
        bad,
    })
}

impl CzDecomposition {
    pub fn checks(&self, f: &GridFunction) -> CzChecks {
        let grid = f.grid();
        let l1 = f.l1_norm().max(f64::MIN_POSITIVE);
        let h = grid.cell_volume();
        let mean_defect = self
            .bad
            .iter()
            .map(|b| (b.values.iter().sum::<f64>() * h).abs() / l1)
            .fold(0.0, f64::max);
        let bad_measure = self.bad.iter().map(|b| grid.volume(b.cube)).sum();
        let mut total = self.good.values().to_vec();
        for b in &self.bad {
            for (c, v) in grid.cells(b.cube).zip(&b.values) {
                total[c] += v;
            }
        }
        let reconstruction_error = total
            .iter()
            .zip(f.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        CzChecks {
            mean_defect,
            bad_measure,
            measure_bound: f.l1_norm() / self.height,
            good_sup: self.good.sup_norm(),
            good_bound: grid.child_count() as f64 * self.height,
            reconstruction_error,
        }
    }

    pub fn bad_cubes(&self) -> impl Iterator<Item = DyadicCube> + '_ {
        self.bad.iter().map(|b| b.cube)
    }
}

/// `|⋃_Q Q^{(τ)}|`, where `Q^{(τ)}` is the `τ`-th ancestor of `Q`, or the
/// unit cube when `Q` is fewer than `τ` levels deep.
pub fn parents_measure(grid: &DyadicGrid, cubes: impl IntoIterator<Item = DyadicCube>, tau: u32) -> f64 {
    let ancestors: BTreeSet<DyadicCube> = cubes
        .into_iter()
        .map(|q| q.ancestor(tau.min(q.level)).unwrap_or(DyadicCube::ROOT))
        .collect();
    ancestors
        .iter()
        .filter(|q| {
            let mut a = q.parent();
            while let Some(p) = a {
                if ancestors.contains(&p) {
                    return false;
                }
                a = p.parent();
            }
            true
        })
        .map(|q| grid.volume(*q))
        .sum()
}

/// `sup_{v > 0} v |{|F| ≥ v}|` for Lebesgue measure on the grid.
pub fn weak_l1_quasinorm(f: &GridFunction) -> f64 {
    weak_l1_of_values(f.values(), f.grid().cell_volume())
}

/// `sup_{v > 0} v |{|F| ≥ v}|` for cell values `values` of volume `h` each.
pub fn weak_l1_of_values(values: &[f64], h: f64) -> f64 {
    let mut a: Vec<f64> = values.iter().map(|v| v.abs()).filter(|v| *v > 0.0).collect();
    a.sort_by(|x, y| y.total_cmp(x));
    a.iter()
        .enumerate()
        .map(|(i, v)| v * (i + 1) as f64 * h)
        .fold(0.0, f64::max)
}

/// `‖T f‖_{L^{1,∞}} / ‖f‖_1`.
pub fn weak_l1_ratio<T: ShiftOperator + ?Sized>(t: &T, f: &GridFunction) -> Result<f64> {
    crate::error::ensure_same_grid(t.grid(), f.grid())?;
    let l1 = f.l1_norm();
    if l1 == 0.0 {
        return Ok(0.0);
    }
    let tf = GridFunction::new(f.grid(), apply_values(t, f.values(), false))?;
    Ok(weak_l1_quasinorm(&tf) / l1)
}

/// `max_Q sup_{x ∉ Q^{(τ)}} |T b_Q(x)| / ‖b_Q‖_1`: the part of each bad
/// piece's image that escapes the `τ`-th ancestor.
pub fn off_support_leak<T: ShiftOperator + ?Sized>(t: &T, cz: &CzDecomposition) -> Result<f64> {
    let grid = t.grid();
    let tau = t.tau();
    let mut worst = 0.0f64;
    for b in &cz.bad {
        let l1 = b.l1_norm(&grid);
        if l1 == 0.0 {
            continue;
        }
        let f = b.to_grid_function(grid);
        let tb = apply_values(t, f.values(), false);
        let anc = b.cube.ancestor(tau.min(b.cube.level)).unwrap_or(DyadicCube::ROOT);
        let mut inside = vec![false; grid.cell_count()];
        for c in grid.cells(anc) {
            inside[c] = true;
        }
        let leak = tb
            .iter()
            .zip(&inside)
            .filter(|(_, i)| !**i)
            .map(|(v, _)| v.abs())
            .fold(0.0, f64::max);
        worst = worst.max(leak / l1);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shifts::{random_simple_shift, ScaleFamily};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bumpy(grid: DyadicGrid, seed: u64) -> GridFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GridFunction::from_fn(grid, |_| {
            let u: f64 = rng.random_range(0.0..1.0);
            if u < 0.05 {
                rng.random_range(-50.0..50.0)
            } else {
                rng.random_range(-1.0..1.0)
            }
        })
    }

    #[test]
    fn decomposition_properties() {
        for (dim, n) in [(1, 10), (2, 5)] {
            let grid = DyadicGrid::new(dim, n).unwrap();
            let f = bumpy(grid, 3);
            let mean = f.l1_norm();
            for k in [1.25, 2.0, 5.0] {
                let cz = cz_decompose(&f, k * mean).unwrap();
                let c = cz.checks(&f);
                assert!(c.holds(), "{c:?}");
                // maximal cubes are pairwise disjoint
                for (i, a) in cz.bad.iter().enumerate() {
                    for b in &cz.bad[i + 1..] {
                        assert!(!a.cube.intersects(&b.cube));
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_low_height() {
        let grid = DyadicGrid::new(1, 4).unwrap();
        let f = GridFunction::constant(grid, 2.0);
        assert!(cz_decompose(&f, 1.0).is_err());
        let cz = cz_decompose(&f, 2.0).unwrap();
        assert!(cz.bad.is_empty());
    }

    #[test]
    fn weak_norm_examples() {
        let grid = DyadicGrid::new(1, 3).unwrap();
        let f = GridFunction::new(grid, vec![8.0, 4.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        // v=8:1/8 → 1, v=4: 2/8 → 1, v=1: 3/8 → 3/8
        assert!((weak_l1_quasinorm(&f) - 1.0).abs() < 1e-15);
        let one = GridFunction::constant(grid, 1.0);
        assert!((weak_l1_quasinorm(&one) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bad_parts_do_not_leak_beyond_ancestor() {
        let grid = DyadicGrid::new(1, 9).unwrap();
        let f = bumpy(grid, 5);
        let t = random_simple_shift(grid, 3, 2, ScaleFamily::All).unwrap();
        let cz = cz_decompose(&f, 4.0 * f.l1_norm()).unwrap();
        assert!(off_support_leak(&t, &cz).unwrap() < 1e-12);
    }

    #[test]
    fn parents_union() {
        let grid = DyadicGrid::new(1, 6).unwrap();
        let cubes = [
            DyadicCube::new_1d(4, 0),
            DyadicCube::new_1d(4, 1),
            DyadicCube::new_1d(3, 7),
        ];
        // ancestors at τ=2: [0,1/4), [0,1/4), (1, 1) = [1/2,1)
        assert!((parents_measure(&grid, cubes, 2) - 0.75).abs() < 1e-15);
        assert!((parents_measure(&grid, cubes, 5) - 1.0).abs() < 1e-15);
    }
}
