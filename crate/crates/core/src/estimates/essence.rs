//! Distributional estimates for `H(L, 𝒫_n(L))` inside one stopping cube.

use serde::{Deserialize, Serialize};

use crate::corona::pn_alpha;
use crate::error::{ensure_same_grid, Result};
use crate::grid::DyadicCube;
use crate::shifts::{partial_apply_local, weak_l1_of_values, ShiftOperator, SimpleHaarShift};
use crate::stats::{log_slope, median};
use crate::weights::Weight;

use super::DistributionCurve;

/// Number of thresholds `K t w(L)/|L|`, `t = 1, ..., THRESHOLDS`.
pub const THRESHOLDS: u32 = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSummary {
    pub alpha: u32,
    pub size: usize,
    /// Median of `w^{-1}(Q)/|Q|` over the class.
    pub rho: f64,
    /// `max_{Q₁} ‖Σ_{Q ⊆ Q₁} ⟨w,g_Q⟩γ_Q‖_{L^{1,∞}} / (2^{-α} (w(L)/|L|) |Q₁|)`.
    pub weak_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssenceReport {
    pub stopping_cube: DyadicCube,
    pub k: f64,
    /// `w(L)/|L|`.
    pub base_density: f64,
    /// Superlevel fractions of `|H|` at `K t w(L)/|L|`: Lebesgue mass over
    /// `|L|` and `w^{-1}` mass over `w^{-1}(L)`.
    pub curve: DistributionCurve,
    /// `max_Q max_x |⟨w,g_Q⟩ γ_Q(x)| / (w(Q)/|Q|)`; at most 1.
    pub single_term_ratio: f64,
    pub alpha_classes: Vec<AlphaSummary>,
    /// Cubes of the corona outside every density window.
    pub residue: usize,
    /// `K Σ_α 2^{-α/2}` over the occupied classes.
    pub aggregate_k: f64,
}

impl EssenceReport {
    pub fn weak_ratio(&self) -> f64 {
        self.alpha_classes.iter().map(|a| a.weak_ratio).fold(0.0, f64::max)
    }

    pub fn lebesgue_slope(&self) -> Option<f64> {
        log_slope(&self.curve.t, &self.curve.lebesgue_mass)
    }

    pub fn dual_slope(&self) -> Option<f64> {
        log_slope(&self.curve.t, &self.curve.dual_mass)
    }
}

/// Evaluates the distribution of `|H(L, 𝒫_n(L))|` on `L` and the per-class
/// ingredients: single-term sizes and the weak-type bound per `α` class.
pub fn essence_check(
    l: DyadicCube,
    corona_cubes: &[DyadicCube],
    t: &SimpleHaarShift,
    w: &Weight,
    k: f64,
) -> Result<EssenceReport> {
    let grid = t.grid();
    ensure_same_grid(grid, w.grid())?;
    let h = grid.cell_volume();
    let tau = t.tau();
    let base = w.density(l);
    let values = partial_apply_local(t, w.sums(), l, corona_cubes.iter().copied());
    let dual: Vec<f64> = grid.cells(l).map(|c| w.dual_values()[c]).collect();
    let total_dual = w.dual_mass(l);
    let vol = grid.volume(l);

    let ts: Vec<f64> = (1..=THRESHOLDS).map(f64::from).collect();
    let thresholds: Vec<f64> = ts.iter().map(|t| k * t * base).collect();
    let mut leb = vec![0.0; ts.len()];
    let mut dm = vec![0.0; ts.len()];
    for (v, d) in values.iter().zip(&dual) {
        let a = v.abs();
        for (i, thr) in thresholds.iter().enumerate() {
            if a > *thr {
                leb[i] += h;
                dm[i] += d * h;
            } else {
                break;
            }
        }
    }
    let curve = DistributionCurve {
        bound: ts.iter().map(|t| (-t).exp()).collect(),
        t: ts,
        thresholds,
        lebesgue_mass: leb.iter().map(|m| m / vol).collect(),
        dual_mass: dm.iter().map(|m| m / total_dual).collect(),
    };

    let mut single_term_ratio = 0.0f64;
    for q in corona_cubes {
        let Some(p) = t.profile(q) else { continue };
        let c: f64 = grid.subcubes(*q, tau).zip(&p.g).map(|(s, g)| g * w.mass(s)).sum();
        let peak = p.gamma.iter().fold(0.0f64, |m, y| m.max((c * y).abs()));
        single_term_ratio = single_term_ratio.max(peak / w.density(*q));
    }

    let classes = pn_alpha(l, corona_cubes, w);
    let mut alpha_classes = Vec::new();
    for (&alpha, cubes) in &classes.classes {
        let rho = median(&cubes.iter().map(|q| w.dual_density(*q)).collect::<Vec<_>>()).unwrap_or(0.0);
        let mut weak_ratio = 0.0f64;
        for &q1 in cubes {
            let inside = cubes.iter().copied().filter(|q| q1.contains(q));
            let local = partial_apply_local(t, w.sums(), q1, inside);
            let norm = weak_l1_of_values(&local, h);
            let scale = (-(alpha as f64)).exp2() * base * grid.volume(q1);
            weak_ratio = weak_ratio.max(norm / scale);
        }
        alpha_classes.push(AlphaSummary {
            alpha,
            size: cubes.len(),
            rho,
            weak_ratio,
        });
    }
    let aggregate_k = k * alpha_classes
        .iter()
        .map(|a| (-(a.alpha as f64) / 2.0).exp2())
        .sum::<f64>();
    Ok(EssenceReport {
        stopping_cube: l,
        k,
        base_density: base,
        curve,
        single_term_ratio,
        alpha_classes,
        residue: classes.residue.len(),
        aggregate_k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimates::corona_sums::{occupied_classes, pn_corona, qn_term_class};
    use crate::grid::DyadicGrid;
    use crate::shifts::{random_simple_shift, ScaleFamily};
    use crate::weights::random_a2_weight;

    #[test]
    fn lebesgue_curves_vanish() {
        let grid = DyadicGrid::new(1, 8).unwrap();
        let w = Weight::lebesgue(grid);
        let t = random_simple_shift(grid, 2, 1, ScaleFamily::Separated).unwrap();
        let r = essence_check(grid.root(), t.cubes(), &t, &w, 1.0).unwrap();
        assert!(r.curve.lebesgue_mass.iter().all(|m| *m == 0.0));
        assert!(r.curve.dual_mass.iter().all(|m| *m == 0.0));
    }

    #[test]
    fn curves_are_monotone_and_single_terms_bounded() {
        let grid = DyadicGrid::new(1, 10).unwrap();
        for seed in 0..4 {
            let w = random_a2_weight(6, seed, grid).unwrap();
            let t = random_simple_shift(grid, 2, seed, ScaleFamily::Separated).unwrap();
            for n in occupied_classes(&t, &w) {
                let q0 = qn_term_class(&t, &w, n)[0];
                let c = pn_corona(q0, n, &t, &w).unwrap();
                for (i, s) in c.stopping().iter().enumerate() {
                    let r = essence_check(s.cube, c.corona(i), &t, &w, 0.5).unwrap();
                    assert!(r.curve.is_nonincreasing());
                    assert!(r.curve.lebesgue_mass[0] <= 1.0 && r.curve.dual_mass[0] <= 1.0);
                    assert!(r.single_term_ratio <= 1.0 + 1e-12);
                    assert_eq!(r.residue, 0);
                }
            }
        }
    }
}
