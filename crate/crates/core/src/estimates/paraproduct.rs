//! The paraproduct `P f = Σ_Q ⟨f⟩^σ_Q Δ^w_Q(T(σ1))`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_same_grid, Result};
use crate::grid::{CubeSums, DyadicCube, DyadicGrid, GridFunction, Measure};
use crate::shifts::{apply_values, ShiftOperator};
use crate::weights::Weight;

use super::testing::measure_sums;

/// `⟨f⟩^σ_Q = σ(Q)^{-1} ∫_Q f σ` for every cube below the finest level, in
/// level order.
fn sigma_averages(grid: &DyadicGrid, f: &GridFunction, sigma: &Measure<'_>) -> Vec<Vec<f64>> {
    let fs: Vec<f64> = f
        .values()
        .iter()
        .enumerate()
        .map(|(c, v)| v * sigma.density(c))
        .collect();
    let num = CubeSums::from_cells(grid, &fs);
    let den = measure_sums(sigma, grid);
    (0..grid.depth())
        .map(|j| num.level(j).iter().zip(den.level(j)).map(|(a, b)| a / b).collect())
        .collect()
}

/// `w`-averages of `g` over every cube, per level.
fn weighted_means(grid: &DyadicGrid, g: &[f64], w: &Weight) -> Vec<Vec<f64>> {
    let gw: Vec<f64> = g.iter().zip(w.values()).map(|(a, b)| a * b).collect();
    let num = CubeSums::from_cells(grid, &gw);
    (0..=grid.depth())
        .map(|j| num.level(j).iter().zip(w.sums().level(j)).map(|(a, b)| a / b).collect())
        .collect()
}

fn parent_local(grid: &DyadicGrid, j: u32, local: usize) -> usize {
    let q = grid.cube_at(j, local);
    grid.local_index(q.parent().expect("level >= 1"))
}

/// `P f` and both sides of the orthogonality identity
/// `‖P f‖²_{L²(w)} = Σ_Q |⟨f⟩^σ_Q|² ‖Δ^w_Q(T(σ1))‖²_{L²(w)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Paraproduct {
    pub value: GridFunction,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParaproductIdentity {
    pub lhs: f64,
    pub rhs: f64,
    pub relative_gap: f64,
}

/// Evaluates `P f` with the `w`-martingale differences
/// `Δ^w_Q g = Σ_{Q' child of Q} (⟨g⟩^w_{Q'} - ⟨g⟩^w_Q) 1_{Q'}`.
pub fn paraproduct<T: ShiftOperator + ?Sized>(
    f: &GridFunction,
    t: &T,
    sigma: Measure<'_>,
    w: &Weight,
) -> Result<Paraproduct> {
    let grid = f.grid();
    ensure_same_grid(grid, t.grid())?;
    ensure_same_grid(grid, w.grid())?;
    sigma.check_grid(grid)?;
    let g = apply_values(t, &sigma.densities(&grid), false);
    let avg = sigma_averages(&grid, f, &sigma);
    let means = weighted_means(&grid, &g, w);

    let mut rhs = 0.0;
    // coefficient on each cube of level j ≥ 1: Σ over strict ancestors is
    // accumulated top-down; a child c of Q receives ⟨f⟩_Q (E_c - E_Q).
    let mut acc = vec![0.0f64];
    for j in 1..=grid.depth() {
        let n = grid.cubes_at_level(j);
        let mut next = vec![0.0; n];
        for (local, slot) in next.iter_mut().enumerate() {
            let p = parent_local(&grid, j, local);
            let jump = means[j as usize][local] - means[j as usize - 1][p];
            let a = avg[j as usize - 1][p];
            *slot = acc[p] + a * jump;
            rhs += a * a * jump * jump * w.sums().level(j)[local];
        }
        acc = next;
    }
    let value = GridFunction::new(grid, acc)?;
    let lhs = value
        .values()
        .iter()
        .zip(w.values())
        .map(|(p, m)| p * p * m)
        .sum::<f64>()
        * grid.cell_volume();
    Ok(Paraproduct { value, lhs, rhs })
}

pub fn paraproduct_norm_identity_check<T: ShiftOperator + ?Sized>(
    f: &GridFunction,
    t: &T,
    sigma: Measure<'_>,
    w: &Weight,
) -> Result<ParaproductIdentity> {
    let p = paraproduct(f, t, sigma, w)?;
    let scale = p.lhs.abs().max(p.rhs.abs());
    let relative_gap = if scale == 0.0 {
        0.0
    } else {
        (p.lhs - p.rhs).abs() / scale
    };
    Ok(ParaproductIdentity {
        lhs: p.lhs,
        rhs: p.rhs,
        relative_gap,
    })
}

/// `g - ⟨g⟩^w_{[0,1)^d}` for `g = T(σ1)`; equals `P 1`.
pub fn paraproduct_of_one_oracle<T: ShiftOperator + ?Sized>(t: &T, sigma: Measure<'_>, w: &Weight) -> Vec<f64> {
    let grid = t.grid();
    let g = apply_values(t, &sigma.densities(&grid), false);
    let mean =
        g.iter().zip(w.values()).map(|(a, b)| a * b).sum::<f64>() * grid.cell_volume() / w.mass(DyadicCube::ROOT);
    g.into_iter().map(|v| v - mean).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shifts::{random_simple_shift, ScaleFamily, SimpleHaarShift};
    use crate::weights::random_a2_weight;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn paraproduct_of_one_telescopes() {
        let grid = DyadicGrid::new(1, 8).unwrap();
        let w = random_a2_weight(3, 1, grid).unwrap();
        let sigma = w.dual();
        let t = random_simple_shift(grid, 2, 5, ScaleFamily::All).unwrap();
        let one = GridFunction::constant(grid, 1.0);
        let p = paraproduct(&one, &t, Measure::Weighted(&sigma), &w).unwrap();
        let oracle = paraproduct_of_one_oracle(&t, Measure::Weighted(&sigma), &w);
        for (a, b) in p.value.values().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn identity_holds() {
        for (dim, n) in [(1, 8), (2, 4)] {
            let grid = DyadicGrid::new(dim, n).unwrap();
            let w = random_a2_weight(3, 2, grid).unwrap();
            let sigma = random_a2_weight(2, 3, grid).unwrap();
            let t = random_simple_shift(grid, 1, 9, ScaleFamily::All).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            let f = GridFunction::from_fn(grid, |_| rng.random_range(-1.0..1.0));
            let r = paraproduct_norm_identity_check(&f, &t, Measure::Weighted(&sigma), &w).unwrap();
            assert!(r.relative_gap < 1e-10, "{r:?}");
            assert!(r.lhs > 0.0);
        }
    }

    #[test]
    fn zero_shift_gives_zero() {
        let grid = DyadicGrid::new(1, 5).unwrap();
        let w = random_a2_weight(2, 2, grid).unwrap();
        let t = SimpleHaarShift::zero(grid, 1).unwrap();
        let f = GridFunction::constant(grid, 3.0);
        let p = paraproduct(&f, &t, Measure::Lebesgue, &w).unwrap();
        assert!(p.value.values().iter().all(|v| *v == 0.0));
        assert_eq!((p.lhs, p.rhs), (0.0, 0.0));
    }
}
