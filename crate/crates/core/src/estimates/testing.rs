//! Two-weight testing constants and the weak-boundedness diagnostics.

use std::borrow::Cow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_same_grid, Result};
use crate::grid::{CubeSums, DyadicCube, DyadicGrid, Measure};
use crate::shifts::{apply_values, apply_window, operator_norm, NormMethod, ShiftOperator};
use crate::weights::{a2_characteristic, Weight};

pub(crate) fn measure_sums<'a>(m: &Measure<'a>, grid: &DyadicGrid) -> Cow<'a, CubeSums> {
    match m {
        Measure::Lebesgue => Cow::Owned(CubeSums::from_cells(grid, &vec![1.0; grid.cell_count()])),
        Measure::Weighted(w) => Cow::Borrowed(w.sums()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestingReport {
    pub c_wb: f64,
    /// `(Q', Q'')` attaining `C_WB`.
    pub wb_witness: (DyadicCube, DyadicCube),
    pub c_t1: f64,
    pub t1_witness: DyadicCube,
    pub c_t_star_1: f64,
    pub t_star_1_witness: DyadicCube,
    pub full_norm: f64,
    pub norm_iterations: usize,
}

impl TestingReport {
    /// `max(C_WB, C_T1, C_T*1) - ‖T‖`; never positive up to the error of
    /// the norm computation.
    pub fn necessity_slack(&self) -> f64 {
        self.c_wb.max(self.c_t1).max(self.c_t_star_1) - self.full_norm
    }

    pub fn testing_sum(&self) -> f64 {
        self.c_wb + self.c_t1 + self.c_t_star_1
    }

    /// `‖T‖ / (C_WB + C_T1 + C_T*1)`, zero when both vanish.
    pub fn sufficiency_ratio(&self) -> f64 {
        let s = self.testing_sum();
        if s == 0.0 {
            0.0
        } else {
            self.full_norm / s
        }
    }
}

fn best<K: Copy>(a: (f64, K), b: (f64, K)) -> (f64, K) {
    if b.0 > a.0 {
        b
    } else {
        a
    }
}

/// `‖1_Q T(x 1_Q)‖_{L²(m)}` for every cube, maximized after dividing by
/// `x(Q)^{1/2}`, where `x` has integrals `sums` and `m` has cell densities
/// `out_density`.
fn t1_scan<T: ShiftOperator + ?Sized>(t: &T, sums: &CubeSums, out_density: &[f64], adjoint: bool) -> (f64, DyadicCube) {
    let grid = t.grid();
    let h = grid.cell_volume();
    let cubes: Vec<DyadicCube> = grid.cubes().collect();
    cubes
        .par_iter()
        .map(|&q| {
            let mass = sums.get(&grid, q);
            if !(mass > 0.0) {
                return (0.0, q);
            }
            let v = apply_window(t, sums, q, q, adjoint);
            let l2: f64 = grid.cells(q).zip(&v).map(|(c, y)| y * y * out_density[c]).sum::<f64>() * h;
            ((l2 / mass).sqrt(), q)
        })
        .reduce(|| (0.0, DyadicCube::ROOT), best)
}

/// Testing constants of `T(σ·): L²(σ) → L²(μ)` and the full norm.
///
/// The weak-boundedness scan covers `Q', Q'' ⊆ Q` with
/// `|Q'|, |Q''| ≥ 2^{-(τ-1)d}|Q|`.
pub fn testing_constants<T: ShiftOperator + ?Sized>(
    t: &T,
    sigma: Measure<'_>,
    mu: Measure<'_>,
    method: NormMethod,
) -> Result<TestingReport> {
    let grid = t.grid();
    for m in [sigma, mu] {
        if let Some(g) = m.grid() {
            ensure_same_grid(grid, g)?;
        }
    }
    let tau = t.tau();
    let h = grid.cell_volume();
    let sigma_sums = measure_sums(&sigma, &grid);
    let mu_sums = measure_sums(&mu, &grid);
    let sigma_d = sigma.densities(&grid);
    let mu_d = mu.densities(&grid);

    let cubes: Vec<DyadicCube> = grid.cubes().collect();
    let wb = cubes
        .par_iter()
        .map(|&q| {
            let span = (tau - 1).min(grid.depth() - q.level);
            let subs: Vec<DyadicCube> = (0..=span).flat_map(|k| grid.subcubes(q, k)).collect();
            let local_mu: Vec<f64> = grid.cells(q).map(|c| mu_d[c]).collect();
            let mut top = (0.0, (q, q));
            for &qp in &subs {
                let sp = sigma_sums.get(&grid, qp);
                if !(sp > 0.0) {
                    continue;
                }
                let v = apply_window(t, &sigma_sums, qp, q, false);
                for &qpp in &subs {
                    let mpp = mu_sums.get(&grid, qpp);
                    if !(mpp > 0.0) {
                        continue;
                    }
                    let integral: f64 = grid
                        .local_rows(q, qpp)
                        .flatten()
                        .map(|i| v[i] * local_mu[i])
                        .sum::<f64>()
                        * h;
                    top = best(top, (integral.abs() / (sp * mpp).sqrt(), (qp, qpp)));
                }
            }
            top
        })
        .reduce(|| (0.0, (DyadicCube::ROOT, DyadicCube::ROOT)), best);

    let t1 = t1_scan(t, &sigma_sums, &mu_d, false);
    let t_star_1 = t1_scan(t, &mu_sums, &sigma_d, true);
    let norm = operator_norm(t, sigma, mu, method)?;
    Ok(TestingReport {
        c_wb: wb.0,
        wb_witness: wb.1,
        c_t1: t1.0,
        t1_witness: t1.1,
        c_t_star_1: t_star_1.0,
        t_star_1_witness: t_star_1.1,
        full_norm: norm.value,
        norm_iterations: norm.iterations,
    })
}

/// Worst ratios of the inequalities deriving weak boundedness from the `T1`
/// condition for `σ = w`, `μ = w^{-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakBoundednessReport {
    pub a2: f64,
    /// `max |⟨T(w1_Q), w^{-1}1_R⟩| / (‖w‖_{A_2} (w(Q) w^{-1}(R))^{1/2})` over
    /// pairs with `2^{-(τ+1)d}|Q| ≤ |R| ≤ 2^{(τ+1)d}|Q|`.
    pub pair_ratio: f64,
    pub pair_witness: (DyadicCube, DyadicCube),
    /// `max ‖1_Q T(w1_Q)‖²_{L²(w^{-1})} / (‖w‖²_{A_2} w(Q))`.
    pub t1_ratio: f64,
    /// `max |⟨T(w1_Q), w^{-1}1_{R∖Q}⟩| |R| / (w(Q) w^{-1}(R))` over
    /// `Q ⊊ R` with `|Q| ≥ 2^{-τd}|R|`.
    pub large_scale_ratio: f64,
    /// Pairs `Q ⊆ R` violating `(w(Q)w^{-1}(R)/|R|²)^{1/2} ≤ ‖w‖_{A_2}^{1/2} ≤ ‖w‖_{A_2}`.
    pub chain_violations: usize,
}

/// Evaluates both sides of the weak-boundedness inequality and of its
/// derivation from the `T1` inequality. Applies `T` once per cube, so the
/// cost is quadratic in the number of cells; intended for `N ≤ 10` at `d = 1`.
pub fn weak_boundedness_from_t1_check<T: ShiftOperator + ?Sized>(t: &T, w: &Weight) -> Result<WeakBoundednessReport> {
    let grid = t.grid();
    ensure_same_grid(grid, w.grid())?;
    let a2 = a2_characteristic(w);
    let tau = t.tau();
    let sqrt_a2 = a2.sqrt();
    let cubes: Vec<DyadicCube> = grid.cubes().collect();
    let per_q: Vec<_> = cubes
        .par_iter()
        .map(|&q| {
            let x: Vec<f64> = {
                let mut x = vec![0.0; grid.cell_count()];
                for c in grid.cells(q) {
                    x[c] = w.values()[c];
                }
                x
            };
            let tx = apply_values(t, &x, false);
            let weighted: Vec<f64> = tx.iter().zip(w.dual_values()).map(|(a, b)| a * b).collect();
            let pairing = CubeSums::from_cells(&grid, &weighted);
            let wq = w.mass(q);
            let mut pair = (0.0, (q, q));
            let mut large = 0.0f64;
            let mut violations = 0usize;
            let lo = q.level.saturating_sub(tau + 1);
            let hi = (q.level + tau + 1).min(grid.depth());
            for level in lo..=hi {
                for r in grid.level_cubes(level) {
                    let ip = pairing.get(&grid, r);
                    let dr = w.dual_mass(r);
                    pair = best(pair, (ip.abs() / (a2 * (wq * dr).sqrt()), (q, r)));
                    if r.strictly_contains(&q) && q.level - r.level <= tau {
                        let outside = ip - pairing.get(&grid, q);
                        large = large.max(outside.abs() * grid.volume(r) / (wq * dr));
                    }
                    if r.contains(&q) {
                        let vr = grid.volume(r);
                        let left = (wq * dr / (vr * vr)).sqrt();
                        if !(left <= sqrt_a2 * (1.0 + 1e-12) && sqrt_a2 <= a2 * (1.0 + 1e-12)) {
                            violations += 1;
                        }
                    }
                }
            }
            let local: f64 =
                grid.cells(q).map(|c| tx[c] * tx[c] * w.dual_values()[c]).sum::<f64>() * grid.cell_volume();
            let t1 = local / (a2 * a2 * wq);
            (pair, t1, large, violations)
        })
        .collect();
    let mut report = WeakBoundednessReport {
        a2,
        pair_ratio: 0.0,
        pair_witness: (DyadicCube::ROOT, DyadicCube::ROOT),
        t1_ratio: 0.0,
        large_scale_ratio: 0.0,
        chain_violations: 0,
    };
    for (pair, t1, large, v) in per_q {
        if pair.0 > report.pair_ratio {
            report.pair_ratio = pair.0;
            report.pair_witness = pair.1;
        }
        report.t1_ratio = report.t1_ratio.max(t1);
        report.large_scale_ratio = report.large_scale_ratio.max(large);
        report.chain_violations += v;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{inner_product, GridFunction};
    use crate::shifts::{petermichl_shift, random_simple_shift, ScaleFamily, SimpleHaarShift};
    use crate::weights::random_a2_weight;

    /// Brute-force oracle: full applications and explicit integrals.
    fn brute(t: &SimpleHaarShift, sigma: &Weight, mu: &Weight) -> (f64, f64, f64) {
        let grid = t.grid();
        let tau = t.tau();
        let sig = sigma.to_grid_function();
        let mut wb = 0.0f64;
        let mut t1 = 0.0f64;
        let mut ts1 = 0.0f64;
        for q in grid.cubes() {
            let ind = GridFunction::indicator(grid, q);
            let tq =
                GridFunction::new(grid, apply_values(t, ind.pointwise_mul(&sig).unwrap().values(), false)).unwrap();
            let loc = tq.pointwise_mul(&ind).unwrap();
            t1 = t1.max((inner_product(&loc, &loc, Measure::Weighted(mu)).unwrap() / sigma.mass(q)).sqrt());
            let mu_f = mu.to_grid_function();
            let sq =
                GridFunction::new(grid, apply_values(t, ind.pointwise_mul(&mu_f).unwrap().values(), true)).unwrap();
            let sloc = sq.pointwise_mul(&ind).unwrap();
            ts1 = ts1.max((inner_product(&sloc, &sloc, Measure::Weighted(sigma)).unwrap() / mu.mass(q)).sqrt());
            let span = (tau - 1).min(grid.depth() - q.level);
            let subs: Vec<_> = (0..=span).flat_map(|k| grid.subcubes(q, k)).collect();
            for &a in &subs {
                let ia = GridFunction::indicator(grid, a);
                let ta =
                    GridFunction::new(grid, apply_values(t, ia.pointwise_mul(&sig).unwrap().values(), false)).unwrap();
                for &b in &subs {
                    let ib = GridFunction::indicator(grid, b);
                    let v = inner_product(&ta, &ib, Measure::Weighted(mu)).unwrap();
                    wb = wb.max(v.abs() / (sigma.mass(a) * mu.mass(b)).sqrt());
                }
            }
        }
        (wb, t1, ts1)
    }

    #[test]
    fn matches_brute_force() {
        let grid = DyadicGrid::new(1, 6).unwrap();
        for tau in 1..=3 {
            let w = random_a2_weight(3, tau as u64, grid).unwrap();
            let dual = w.dual();
            let t = random_simple_shift(grid, tau, 40 + tau as u64, ScaleFamily::All).unwrap();
            let r = testing_constants(&t, Measure::Weighted(&w), Measure::Weighted(&dual), NormMethod::Dense).unwrap();
            let (wb, t1, ts1) = brute(&t, &w, &dual);
            assert!((r.c_wb - wb).abs() < 1e-10 * (1.0 + wb));
            assert!((r.c_t1 - t1).abs() < 1e-10 * (1.0 + t1));
            assert!((r.c_t_star_1 - ts1).abs() < 1e-10 * (1.0 + ts1));
            assert!(r.necessity_slack() <= 1e-9);
        }
    }

    #[test]
    fn two_dimensional_scan_matches_brute_force() {
        let grid = DyadicGrid::new(2, 3).unwrap();
        let w = random_a2_weight(2, 5, grid).unwrap();
        let dual = w.dual();
        let t = random_simple_shift(grid, 2, 3, ScaleFamily::All).unwrap();
        let r = testing_constants(&t, Measure::Weighted(&w), Measure::Weighted(&dual), NormMethod::Dense).unwrap();
        let (wb, t1, ts1) = brute(&t, &w, &dual);
        assert!((r.c_wb - wb).abs() < 1e-10 * (1.0 + wb));
        assert!((r.c_t1 - t1).abs() < 1e-10 * (1.0 + t1));
        assert!((r.c_t_star_1 - ts1).abs() < 1e-10 * (1.0 + ts1));
    }

    #[test]
    fn zero_shift_has_zero_constants() {
        let grid = DyadicGrid::new(1, 5).unwrap();
        let t = SimpleHaarShift::zero(grid, 2).unwrap();
        let w = random_a2_weight(2, 1, grid).unwrap();
        let r = testing_constants(&t, Measure::Weighted(&w), Measure::Lebesgue, NormMethod::default()).unwrap();
        assert_eq!((r.c_wb, r.c_t1, r.c_t_star_1, r.full_norm), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(r.sufficiency_ratio(), 0.0);
    }

    #[test]
    fn weak_boundedness_diagnostic() {
        let grid = DyadicGrid::new(1, 7).unwrap();
        let t = petermichl_shift(grid, ScaleFamily::All).unwrap();
        let w = random_a2_weight(3, 2, grid).unwrap();
        let r = weak_boundedness_from_t1_check(&t, &w).unwrap();
        assert_eq!(r.chain_violations, 0);
        assert!(r.pair_ratio.is_finite() && r.pair_ratio > 0.0);
        let lebesgue = weak_boundedness_from_t1_check(&t, &Weight::lebesgue(grid)).unwrap();
        assert!(lebesgue.pair_ratio.is_finite());
    }
}
