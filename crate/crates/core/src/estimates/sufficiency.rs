//! Two-weight boundedness under `A_∞` plus the two-weight `A_2` condition.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_same_grid, Result};
use crate::grid::{DyadicCube, Measure};
use crate::shifts::{operator_norm, NormMethod, ShiftOperator};
use crate::weights::{a_infty_modulus, two_weight_a2, AInftyReport, Weight};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftNorm {
    pub tau: u32,
    /// `‖T(α·)‖_{L²(α) → L²(β)}`.
    pub norm: f64,
    pub norm_over_sqrt_a2: f64,
    pub norm_over_a2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SufficiencyReport {
    /// `sup_Q (α(Q)/|Q|)(β(Q)/|Q|)`.
    pub two_weight_a2: f64,
    pub a2_witness: DyadicCube,
    pub alpha_a_infty: AInftyReport,
    pub beta_a_infty: AInftyReport,
    pub shifts: Vec<ShiftNorm>,
}

impl SufficiencyReport {
    pub fn max_norm(&self) -> f64 {
        self.shifts.iter().map(|s| s.norm).fold(0.0, f64::max)
    }

    pub fn max_ratio(&self) -> f64 {
        self.shifts.iter().map(|s| s.norm_over_sqrt_a2).fold(0.0, f64::max)
    }
}

/// Measures every shift of the family between `L²(α)` and `L²(β)` and
/// records the two-weight `A_2` constant and both `A_∞` moduli at `epsilon`.
pub fn sufficiency_experiment(
    alpha: &Weight,
    beta: &Weight,
    shifts: &[&dyn ShiftOperator],
    epsilon: f64,
    method: NormMethod,
) -> Result<SufficiencyReport> {
    ensure_same_grid(alpha.grid(), beta.grid())?;
    let (a2, witness) = two_weight_a2(alpha, beta)?;
    let alpha_a_infty = a_infty_modulus(alpha, epsilon)?;
    let beta_a_infty = a_infty_modulus(beta, epsilon)?;
    let shifts = shifts
        .iter()
        .map(|t| {
            let norm = operator_norm(*t, Measure::Weighted(alpha), Measure::Weighted(beta), method)?.value;
            Ok(ShiftNorm {
                tau: t.tau(),
                norm,
                norm_over_sqrt_a2: norm / a2.sqrt(),
                norm_over_a2: norm / a2,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SufficiencyReport {
        two_weight_a2: a2,
        a2_witness: witness,
        alpha_a_infty,
        beta_a_infty,
        shifts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DyadicGrid;
    use crate::shifts::{random_simple_shift, ScaleFamily};
    use crate::weights::{a2_characteristic, random_a2_weight};

    #[test]
    fn lebesgue_pair() {
        let grid = DyadicGrid::new(1, 8).unwrap();
        let one = Weight::lebesgue(grid);
        let shifts: Vec<_> = (1..=3)
            .map(|tau| random_simple_shift(grid, tau, tau as u64, ScaleFamily::All).unwrap())
            .collect();
        let refs: Vec<&dyn ShiftOperator> = shifts.iter().map(|s| s as &dyn ShiftOperator).collect();
        let r = sufficiency_experiment(&one, &one, &refs, 0.5, NormMethod::Dense).unwrap();
        assert!((r.two_weight_a2 - 1.0).abs() < 1e-12);
        for s in &r.shifts {
            assert!(s.norm <= s.tau as f64 + 1.0 + 1e-9);
        }
    }

    #[test]
    fn dual_pair_recovers_a2() {
        let grid = DyadicGrid::new(1, 8).unwrap();
        let w = random_a2_weight(4, 7, grid).unwrap();
        let r = sufficiency_experiment(&w, &w.dual(), &[], 0.5, NormMethod::Dense).unwrap();
        assert!((r.two_weight_a2 - a2_characteristic(&w)).abs() < 1e-9 * r.two_weight_a2);
    }
}
