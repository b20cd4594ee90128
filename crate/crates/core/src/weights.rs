//! Strictly positive cell-constant weights, their dual weights, the dyadic
//! `A_p` characteristic and the empirical `A_∞` modulus.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CubeSums, DyadicCube, DyadicGrid, GridFunction};

/// Largest cascade contrast `δ` the generator accepts; cell values then stay
/// within `(1 - δ)^N` of the mean and remain comfortably positive.
pub const CASCADE_DELTA_MAX: f64 = 0.999;

/// Where a weight came from; serialized into weight sidecar files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct WeightProvenance {
    pub family: String,
    pub parameters: BTreeMap<String, f64>,
    pub seed: Option<u64>,
}

/// A strictly positive cell-constant weight with cached cube masses of the
/// weight and of its reciprocal.
#[derive(Debug, Clone)]
pub struct Weight {
    grid: DyadicGrid,
    values: Vec<f64>,
    dual_values: Vec<f64>,
    sums: CubeSums,
    dual_sums: CubeSums,
    provenance: WeightProvenance,
}

impl PartialEq for Weight {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.values == other.values && self.dual_values == other.dual_values
    }
}

impl Weight {
    pub fn new(f: GridFunction, provenance: WeightProvenance) -> Result<Self> {
        let grid = f.grid();
        let values = f.into_values();
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidWeight(format!(
                "cell {i} has value {v}; weights must be finite and strictly positive"
            )));
        }
        let dual_values: Vec<f64> = values.iter().map(|v| v.recip()).collect();
        if dual_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidWeight("reciprocal overflows".into()));
        }
        let sums = CubeSums::from_cells(&grid, &values);
        let dual_sums = CubeSums::from_cells(&grid, &dual_values);
        Ok(Weight {
            grid,
            values,
            dual_values,
            sums,
            dual_sums,
            provenance,
        })
    }

    pub fn from_function(f: GridFunction) -> Result<Self> {
        Self::new(
            f,
            WeightProvenance {
                family: "custom".into(),
                ..Default::default()
            },
        )
    }

    pub fn constant(grid: DyadicGrid, value: f64) -> Result<Self> {
        Self::new(
            GridFunction::constant(grid, value),
            WeightProvenance {
                family: "constant".into(),
                parameters: [("value".to_string(), value)].into(),
                seed: None,
            },
        )
    }

    pub fn lebesgue(grid: DyadicGrid) -> Self {
        Self::constant(grid, 1.0).expect("1 is a valid weight")
    }

    pub fn grid(&self) -> DyadicGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Cell values of `w^{-1}`.
    pub fn dual_values(&self) -> &[f64] {
        &self.dual_values
    }

    pub fn provenance(&self) -> &WeightProvenance {
        &self.provenance
    }

    pub fn to_grid_function(&self) -> GridFunction {
        GridFunction::new(self.grid, self.values.clone()).expect("sizes match")
    }

    pub fn sums(&self) -> &CubeSums {
        &self.sums
    }

    pub fn dual_sums(&self) -> &CubeSums {
        &self.dual_sums
    }

    /// `w(Q)`.
    pub fn mass(&self, q: DyadicCube) -> f64 {
        self.sums.get(&self.grid, q)
    }

    /// `w^{-1}(Q)`.
    pub fn dual_mass(&self, q: DyadicCube) -> f64 {
        self.dual_sums.get(&self.grid, q)
    }

    /// `w(Q)/|Q|`.
    pub fn density(&self, q: DyadicCube) -> f64 {
        self.mass(q) / self.grid.volume(q)
    }

    pub fn dual_density(&self, q: DyadicCube) -> f64 {
        self.dual_mass(q) / self.grid.volume(q)
    }

    /// `(w(Q)/|Q|)(w^{-1}(Q)/|Q|)`, at least one by Cauchy–Schwarz.
    pub fn a2_product(&self, q: DyadicCube) -> f64 {
        self.density(q) * self.dual_density(q)
    }

    /// Mass of an arbitrary union of finest cells.
    pub fn cells_mass(&self, cells: &[usize]) -> f64 {
        cells.iter().map(|&c| self.values[c]).sum::<f64>() * self.grid.cell_volume()
    }

    /// The pointwise reciprocal. Swaps the cached data, so `dual(dual(w))`
    /// reproduces `w` bit for bit.
    pub fn dual(&self) -> Weight {
        let mut provenance = self.provenance.clone();
        provenance.family = match provenance.family.strip_prefix("dual:") {
            Some(inner) => inner.to_string(),
            None => format!("dual:{}", provenance.family),
        };
        Weight {
            grid: self.grid,
            values: self.dual_values.clone(),
            dual_values: self.values.clone(),
            sums: self.dual_sums.clone(),
            dual_sums: self.sums.clone(),
            provenance,
        }
    }
}

/// Dual weight `w^{-1}`.
pub fn dual_weight(w: &Weight) -> Weight {
    w.dual()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApReport {
    pub p: f64,
    pub characteristic: f64,
    pub witness_cube: DyadicCube,
}

/// Maximum over all grid cubes of
/// `|Q|^{-1}∫_Q w · (|Q|^{-1}∫_Q w^{-1/(p-1)})^{p-1}`.
///
/// Ties keep the first cube in (level, index) scan order.
pub fn ap_characteristic(w: &Weight, p: f64) -> Result<ApReport> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Config(format!("A_p requires p > 1, got {p}")));
    }
    let grid = w.grid;
    let owned;
    let other: &CubeSums = if p == 2.0 {
        &w.dual_sums
    } else {
        let e = -1.0 / (p - 1.0);
        let vals: Vec<f64> = w.values.iter().map(|v| v.powf(e)).collect();
        owned = CubeSums::from_cells(&grid, &vals);
        &owned
    };
    let per_level: Vec<(f64, usize)> = (0..=grid.depth())
        .into_par_iter()
        .map(|j| {
            let vol = grid.volume(DyadicCube {
                level: j,
                index: [0, 0],
            });
            let wl = w.sums.level(j);
            let ol = other.level(j);
            let mut best = (f64::NEG_INFINITY, 0usize);
            for (i, (a, b)) in wl.iter().zip(ol).enumerate() {
                let prod = if p == 2.0 {
                    (a / vol) * (b / vol)
                } else {
                    (a / vol) * (b / vol).powf(p - 1.0)
                };
                if prod > best.0 {
                    best = (prod, i);
                }
            }
            best
        })
        .collect();
    let mut best = (f64::NEG_INFINITY, DyadicCube::ROOT);
    for (j, (v, i)) in per_level.into_iter().enumerate() {
        if v > best.0 {
            best = (v, grid.cube_at(j as u32, i));
        }
    }
    Ok(ApReport {
        p,
        characteristic: best.0,
        witness_cube: best.1,
    })
}

/// `‖w‖_{A_2}` over dyadic grid cubes.
pub fn a2_characteristic(w: &Weight) -> f64 {
    ap_characteristic(w, 2.0).expect("p = 2 is valid").characteristic
}

/// Two-weight constant `sup_Q (α(Q)/|Q|)(β(Q)/|Q|)` with its witness.
pub fn two_weight_a2(alpha: &Weight, beta: &Weight) -> Result<(f64, DyadicCube)> {
    crate::error::ensure_same_grid(alpha.grid, beta.grid)?;
    let mut best = (f64::NEG_INFINITY, DyadicCube::ROOT);
    for q in alpha.grid.cubes() {
        let v = alpha.density(q) * beta.density(q);
        if v > best.0 {
            best = (v, q);
        }
    }
    Ok(best)
}

/// Discretized `x^a` on `[0,1)` using exact cell averages
/// `(x_hi^{a+1} - x_lo^{a+1}) / ((a+1)(x_hi - x_lo))`.
pub fn power_weight(a: f64, grid: DyadicGrid) -> Result<Weight> {
    if grid.dim() != 1 {
        return Err(Error::Config("power weights are defined for d = 1".into()));
    }
    if !(a > -1.0 && a < 1.0) {
        return Err(Error::Config(format!("power exponent must lie in (-1, 1), got {a}")));
    }
    let h = grid.cell_volume();
    let b = a + 1.0;
    let f = GridFunction::from_fn(grid, |i| {
        if a == 0.0 {
            return 1.0;
        }
        if i == 0 {
            return h.powf(a) / b;
        }
        let lo = i as f64 * h;
        // x_lo^{b} (exp(b ln(1 + h/x_lo)) - 1) avoids cancellation for small cells.
        lo.powf(b) * (b * (h / lo).ln_1p()).exp_m1() / (b * h)
    });
    Weight::new(
        f,
        WeightProvenance {
            family: "power".into(),
            parameters: [("a".to_string(), a)].into(),
            seed: None,
        },
    )
}

/// `1 + M·1_{[0, 2^{-k})}` on a one-dimensional grid.
pub fn spike_weight(grid: DyadicGrid, k: u32, height: f64) -> Result<Weight> {
    if grid.dim() != 1 || k > grid.depth() {
        return Err(Error::Config(format!(
            "spike weight needs d = 1 and k <= N, got {grid} k={k}"
        )));
    }
    let spike = DyadicCube::new_1d(k, 0);
    let cells = grid.cells_in(spike);
    let f = GridFunction::from_fn(grid, |i| if i < cells { 1.0 + height } else { 1.0 });
    Weight::new(
        f,
        WeightProvenance {
            family: "spike".into(),
            parameters: [("k".to_string(), k as f64), ("height".to_string(), height)].into(),
            seed: None,
        },
    )
}

/// Contrast `δ` of a balanced cascade whose characteristic is `2^n` at depth `N`.
///
/// Every node of a balanced cascade has the same number of `1+δ` and `1-δ`
/// children, so the `w^{-1}` average over a cube with `m` levels below it is
/// `(1-δ²)^{-m}` times the reciprocal of its `w` average, and the
/// characteristic is attained at the root: `(1-δ²)^{-N}`.
pub fn cascade_delta(n: u32, depth: u32) -> Result<f64> {
    let delta = (1.0 - (-(n as f64) / depth as f64).exp2()).sqrt();
    if delta > CASCADE_DELTA_MAX {
        return Err(Error::Unreachable {
            requested: n,
            depth,
            max_characteristic: (1.0 - CASCADE_DELTA_MAX * CASCADE_DELTA_MAX).powi(-(depth as i32)),
        });
    }
    Ok(delta)
}

/// Balanced multiplicative cascade with realized characteristic close to `2^n`.
///
/// Children of each cube receive factors `1 ± δ`, half of them each, in a
/// seeded random arrangement, so every parent average is preserved.
pub fn random_a2_weight(n: u32, seed: u64, grid: DyadicGrid) -> Result<Weight> {
    let delta = cascade_delta(n, grid.depth())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Sign patterns with exactly half of the children raised.
    let patterns: Vec<Vec<f64>> = match grid.dim() {
        1 => vec![vec![1.0, -1.0], vec![-1.0, 1.0]],
        _ => (0u32..16)
            .filter(|m| m.count_ones() == 2)
            .map(|m| (0..4).map(|c| if m >> c & 1 == 1 { 1.0 } else { -1.0 }).collect())
            .collect(),
    };
    let mut current = vec![1.0f64];
    for j in 0..grid.depth() {
        let mut next = vec![0.0; grid.cubes_at_level(j + 1)];
        for (local, avg) in current.iter().enumerate() {
            let q = grid.cube_at(j, local);
            let pattern = &patterns[rng.random_range(0..patterns.len())];
            for (child, sign) in grid.subcubes(q, 1).zip(pattern) {
                next[grid.local_index(child)] = avg * (1.0 + sign * delta);
            }
        }
        current = next;
    }
    let w = Weight::new(
        GridFunction::new(grid, current)?,
        WeightProvenance {
            family: "cascade".into(),
            parameters: [("n".to_string(), n as f64), ("delta".to_string(), delta)].into(),
            seed: Some(seed),
        },
    )?;
    let realized = a2_characteristic(&w);
    let (lo, hi) = ((n as f64 - 1.0).exp2(), (n as f64 + 1.0).exp2());
    if !(realized >= lo && realized <= hi) {
        return Err(Error::Structural(format!(
            "cascade realized characteristic {realized} outside [{lo}, {hi}]"
        )));
    }
    Ok(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AInftyReport {
    pub epsilon: f64,
    pub eta: f64,
    pub witness_cube: DyadicCube,
}

/// Empirical `A_∞` modulus: the supremum over cubes `Q` and sets `E ⊆ Q`
/// with `|E| ≤ ε|Q|` of `μ(E)/μ(Q)`.
///
/// For a cell-constant measure the extremal `E` fills the cells of largest
/// density first, taking a fraction of the last cell, so the greedy value is
/// exact. Any `η` above the returned value satisfies the `A_∞` implication.
pub fn a_infty_modulus(mu: &Weight, epsilon: f64) -> Result<AInftyReport> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Config(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let grid = mu.grid;
    let h = grid.cell_volume();
    let mut best = (f64::NEG_INFINITY, DyadicCube::ROOT);
    // Descending cell values per cube, merged bottom-up.
    let mut sorted: Vec<Vec<f64>> = mu.values.iter().map(|v| vec![*v]).collect();
    for j in (0..=grid.depth()).rev() {
        if j < grid.depth() {
            let mut next = Vec::with_capacity(grid.cubes_at_level(j));
            for q in grid.level_cubes(j) {
                let mut merged = Vec::with_capacity(grid.cells_in(q));
                for c in grid.subcubes(q, 1) {
                    merged.extend_from_slice(&sorted[grid.local_index(c)]);
                }
                merged.sort_by(|a, b| b.total_cmp(a));
                next.push(merged);
            }
            sorted = next;
        }
        for (local, vals) in sorted.iter().enumerate() {
            let q = grid.cube_at(j, local);
            let eta = greedy_fill(vals, epsilon) * h / mu.mass(q);
            if eta > best.0 {
                best = (eta, q);
            }
        }
    }
    Ok(AInftyReport {
        epsilon,
        eta: best.0,
        witness_cube: best.1,
    })
}

/// The greedy value `sup {μ(E)/μ(Q) : E ⊆ Q, |E| ≤ ε|Q|}` for one cube.
pub fn a_infty_ratio(mu: &Weight, q: DyadicCube, epsilon: f64) -> f64 {
    let mut vals: Vec<f64> = mu.grid.cells(q).map(|c| mu.values[c]).collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    greedy_fill(&vals, epsilon) * mu.grid.cell_volume() / mu.mass(q)
}

fn greedy_fill(sorted_desc: &[f64], epsilon: f64) -> f64 {
    let budget = epsilon * sorted_desc.len() as f64;
    let full = budget.floor() as usize;
    let mut mass: f64 = sorted_desc[..full].iter().sum();
    if full < sorted_desc.len() {
        mass += (budget - full as f64) * sorted_desc[full];
    }
    mass
}

/// Upper bound on the `A_∞` modulus implied by the `A_2` characteristic:
/// applying `|F|/|L| ≤ (‖w‖_{A_2} w(F)/w(L))^{1/2}` to the complement
/// `F = L \ E` gives `w(E)/w(L) ≤ 1 - (1-ε)²/‖w‖_{A_2}`.
pub fn a_infty_bound_from_a2(a2: f64, epsilon: f64) -> f64 {
    1.0 - (1.0 - epsilon).powi(2) / a2
}

/// Right side of `|E|/|L| ≤ (‖w‖_{A_2} w(E)/w(L))^{1/2}`.
pub fn lebesgue_fraction_bound(a2: f64, mass_fraction: f64) -> f64 {
    (a2 * mass_fraction).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: u32) -> DyadicGrid {
        DyadicGrid::new(1, n).unwrap()
    }

    /// Exhaustive maximum computed straight from cell values.
    fn brute_a2(w: &Weight) -> f64 {
        let g = w.grid();
        g.cubes()
            .map(|q| {
                let cells: Vec<usize> = g.cells(q).collect();
                let n = cells.len() as f64;
                let a: f64 = cells.iter().map(|&c| w.values()[c]).sum::<f64>() / n;
                let b: f64 = cells.iter().map(|&c| 1.0 / w.values()[c]).sum::<f64>() / n;
                a * b
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn constant_weights_have_characteristic_one() {
        for c in [1.0, 7.0] {
            let w = Weight::constant(grid(6), c).unwrap();
            let r = ap_characteristic(&w, 2.0).unwrap();
            assert!((r.characteristic - 1.0).abs() < 1e-14);
            let r3 = ap_characteristic(&w, 3.0).unwrap();
            assert!((r3.characteristic - 1.0).abs() < 1e-14);
        }
        assert!(ap_characteristic(&Weight::lebesgue(grid(3)), 1.0).is_err());
    }

    #[test]
    fn power_weight_characteristic_matches_enumeration() {
        let w = power_weight(0.5, grid(12)).unwrap();
        let fast = a2_characteristic(&w);
        let slow = brute_a2(&w);
        assert!((fast - slow).abs() <= 1e-12 * slow, "{fast} {slow}");
        assert_eq!(grid(12).cube_count(), (1 << 13) - 1);
    }

    #[test]
    fn power_weight_cells() {
        assert!(power_weight(0.0, grid(5)).unwrap().values().iter().all(|&v| v == 1.0));
        let w = power_weight(0.5, grid(4)).unwrap();
        assert!((w.values()[0] - 1.0 / 6.0).abs() < 1e-15);
        // second cell: (2/16)^{3/2} - (1/16)^{3/2} over (3/2)(1/16)
        let expect = ((0.125f64).powf(1.5) - (0.0625f64).powf(1.5)) / (1.5 * 0.0625);
        assert!((w.values()[1] - expect).abs() < 1e-14);
        assert!(power_weight(1.0, grid(4)).is_err());
        assert!(power_weight(-1.0, grid(4)).is_err());
        assert!(power_weight(0.5, DyadicGrid::new(2, 3).unwrap()).is_err());
    }

    #[test]
    fn power_characteristic_grows_with_exponent() {
        let g = grid(10);
        let mut last = 0.0;
        for a in [0.0, 0.25, 0.5, 0.75, 0.9] {
            let up = a2_characteristic(&power_weight(a, g).unwrap());
            let down = a2_characteristic(&power_weight(-a, g).unwrap());
            assert!(up >= last - 1e-12 && down >= last - 1e-12);
            last = up.min(down);
        }
    }

    #[test]
    fn dual_is_an_exact_involution() {
        let w = random_a2_weight(3, 11, grid(8)).unwrap();
        let d = w.dual();
        assert_eq!(d.dual(), w);
        assert_eq!(
            ap_characteristic(&w, 2.0).unwrap().characteristic,
            ap_characteristic(&d, 2.0).unwrap().characteristic
        );
        assert!(Weight::lebesgue(grid(3)).dual().values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn dual_of_power_weight_shares_witness() {
        let w = power_weight(0.75, grid(10)).unwrap();
        let a = ap_characteristic(&w, 2.0).unwrap();
        let b = ap_characteristic(&w.dual(), 2.0).unwrap();
        assert_eq!(a.witness_cube, b.witness_cube);
        let brute_witness = w
            .grid()
            .cubes()
            .fold((f64::NEG_INFINITY, DyadicCube::ROOT), |best, q| {
                let v = w.a2_product(q);
                if v > best.0 {
                    (v, q)
                } else {
                    best
                }
            })
            .1;
        assert_eq!(a.witness_cube, brute_witness);
    }

    #[test]
    fn cascade_examples() {
        let w0 = random_a2_weight(0, 99, grid(8)).unwrap();
        assert!(w0.values().iter().all(|&v| v == 1.0));
        let w = random_a2_weight(3, 7, grid(12)).unwrap();
        let c = a2_characteristic(&w);
        assert!((4.0..=16.0).contains(&c), "{c}");
        assert!((c - 8.0).abs() < 1e-9, "{c}");
        let g = w.grid();
        for q in g.cubes().filter(|q| q.level < g.depth()) {
            let kids: f64 = g.children(q).unwrap().map(|k| w.mass(k)).sum();
            assert!((kids - w.mass(q)).abs() <= 1e-14 * w.mass(q));
        }
        assert!(matches!(
            random_a2_weight(40, 1, grid(2)),
            Err(Error::Unreachable { .. })
        ));
    }

    #[test]
    fn cascade_is_deterministic_and_seed_dependent() {
        let a = random_a2_weight(4, 5, grid(9)).unwrap();
        let b = random_a2_weight(4, 5, grid(9)).unwrap();
        let c = random_a2_weight(4, 6, grid(9)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn cascade_in_two_dimensions() {
        let g = DyadicGrid::new(2, 5).unwrap();
        let w = random_a2_weight(2, 3, g).unwrap();
        let c = a2_characteristic(&w);
        assert!((c - 4.0).abs() < 1e-9);
    }

    #[test]
    fn a_infty_lebesgue_and_limits() {
        let w = Weight::lebesgue(grid(6));
        let r = a_infty_modulus(&w, 0.3).unwrap();
        assert!((r.eta - 0.3).abs() < 1e-14);
        let p = power_weight(0.5, grid(8)).unwrap();
        let near_one = a_infty_modulus(&p, 1.0 - 1e-9).unwrap();
        assert!(near_one.eta > 1.0 - 1e-6 && near_one.eta <= 1.0 + 1e-12);
        assert!(a_infty_modulus(&w, 0.0).is_err());
    }

    #[test]
    fn a_infty_power_weight_against_a2_bounds() {
        let w = power_weight(0.5, grid(12)).unwrap();
        let a2 = a2_characteristic(&w);
        let r = a_infty_modulus(&w, 0.25).unwrap();
        // highest-density quarter of [0,1) is [3/4,1); w([3/4,1))/w([0,1)) = 1 - (3/4)^{3/2}
        let top_quarter = 1.0 - 0.75f64.powf(1.5);
        assert!(r.eta >= top_quarter - 1e-12);
        assert!(r.eta <= a_infty_bound_from_a2(a2, 0.25) + 1e-12);
        assert!(r.eta <= lebesgue_fraction_bound(a2, 0.25) + 1e-12);
    }

    #[test]
    fn greedy_ratio_matches_subset_enumeration() {
        let w = random_a2_weight(2, 4, grid(3)).unwrap();
        let g = w.grid();
        let eps = 0.5;
        for q in g.cubes().filter(|q| g.cells_in(*q) >= 2) {
            let cells: Vec<usize> = g.cells(q).collect();
            let k = cells.len() / 2;
            let mut best: f64 = 0.0;
            for mask in 0u32..(1 << cells.len()) {
                if mask.count_ones() as usize > k {
                    continue;
                }
                let e: Vec<usize> = (0..cells.len())
                    .filter(|b| mask >> b & 1 == 1)
                    .map(|b| cells[b])
                    .collect();
                best = best.max(w.cells_mass(&e) / w.mass(q));
            }
            assert!((a_infty_ratio(&w, q, eps) - best).abs() < 1e-14);
        }
        let sup = g
            .cubes()
            .map(|q| a_infty_ratio(&w, q, eps))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((a_infty_modulus(&w, eps).unwrap().eta - sup).abs() < 1e-14);
    }
}
