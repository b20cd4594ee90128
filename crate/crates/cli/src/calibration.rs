//! Constants the theory leaves unspecified, measured once on the fixed
//! suites and frozen in `calibration.json`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use dyadlab_core::shifts::NormMethod;

use crate::error::{HarnessError, Result};
use crate::suites::{
    cascade_shift, cascade_weight, corona_sum_stats, essence_suite, necessity_suite, petermichl_growth,
    weak_boundedness_stats, CoronaSumStats, GROWTH_DEPTH, GROWTH_EXPONENTS, K_LADDER, SLOPE_LIMIT,
};

/// Multiplicative margin applied to every observed extreme.
pub const HEADROOM: f64 = 1.25;
/// Instances measured for the sufficiency constant.
pub const SUFFICIENCY_INSTANCES: u64 = 200;
/// Cascade-suite members used for the lemma constants.
pub const LEMMA_MEMBERS: u64 = 50;

const FROZEN: &str = include_str!("../calibration.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub schema: String,
    pub headroom: f64,
    pub sufficiency: SufficiencyCalibration,
    pub growth: GrowthCalibration,
    pub essence: EssenceCalibration,
    pub corona_sums: CoronaSumCalibration,
    pub weak_boundedness: WeakBoundednessCalibration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauLimit {
    pub tau: u32,
    pub observed: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SufficiencyCalibration {
    pub method: String,
    pub instances: u64,
    /// `max ‖T‖ / (C_WB + C_T1 + C_T*1)`.
    pub observed: f64,
    pub limit: f64,
    pub per_tau: Vec<TauLimit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthCalibration {
    pub depth: u32,
    pub exponents: Vec<f64>,
    /// Extremes of the weighted norm over `‖w‖_{A_2}`.
    pub observed_min: f64,
    pub observed_max: f64,
    pub window_low: f64,
    pub window_high: f64,
}

impl GrowthCalibration {
    pub fn contains(&self, ratio: f64) -> bool {
        (self.window_low..=self.window_high).contains(&ratio)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KTrial {
    pub k: f64,
    pub lebesgue_slope: Option<f64>,
    pub dual_slope: Option<f64>,
    pub positive_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssenceCalibration {
    pub members: u64,
    /// Smallest ladder value whose pooled curves decay at the required rate.
    pub k: f64,
    pub slope_limit: f64,
    pub trials: Vec<KTrial>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoronaSumCalibration {
    pub members: u64,
    pub observed: CoronaSumStats,
    pub bold_h_limit: f64,
    pub a_limit: f64,
    pub b_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakBoundednessCalibration {
    pub members: u64,
    pub observed_pair_ratio: f64,
    pub observed_large_scale_ratio: f64,
    pub pair_limit: f64,
    pub large_scale_limit: f64,
}

/// The constants shipped with the crate.
pub fn frozen() -> &'static Calibration {
    static CELL: OnceLock<Calibration> = OnceLock::new();
    CELL.get_or_init(|| serde_json::from_str(FROZEN).expect("bundled calibration.json is valid"))
}

fn first_error<T>(items: Vec<Result<T>>) -> Result<Vec<T>> {
    items.into_iter().collect()
}

/// Reruns every calibration from scratch; takes a few minutes.
pub fn calibrate() -> Result<Calibration> {
    let cases = necessity_suite(SUFFICIENCY_INSTANCES, NormMethod::Dense)?;
    let ratio = |c: &crate::suites::NecessityCase| c.report.sufficiency_ratio();
    let observed = cases.iter().map(ratio).fold(0.0, f64::max);
    let per_tau = (1..=3)
        .map(|tau| {
            let o = cases.iter().filter(|c| c.tau == tau).map(ratio).fold(0.0, f64::max);
            TauLimit {
                tau,
                observed: o,
                limit: o * HEADROOM,
            }
        })
        .collect();
    let sufficiency = SufficiencyCalibration {
        method: "dense".into(),
        instances: SUFFICIENCY_INSTANCES,
        observed,
        limit: observed * HEADROOM,
        per_tau,
    };

    let study = petermichl_growth(GROWTH_DEPTH, &GROWTH_EXPONENTS)?;
    let lo = study.ratios().fold(f64::INFINITY, f64::min);
    let hi = study.ratios().fold(0.0, f64::max);
    let growth = GrowthCalibration {
        depth: GROWTH_DEPTH,
        exponents: GROWTH_EXPONENTS.to_vec(),
        observed_min: lo,
        observed_max: hi,
        window_low: lo / HEADROOM,
        window_high: hi * HEADROOM,
    };

    let members: Vec<u64> = (0..LEMMA_MEMBERS).collect();
    let mut trials = Vec::new();
    let mut chosen = None;
    for &k in &K_LADDER {
        let s = essence_suite(&members, k)?;
        trials.push(KTrial {
            k,
            lebesgue_slope: s.lebesgue_slope,
            dual_slope: s.dual_slope,
            positive_points: s.positive_points,
        });
        if chosen.is_none() && s.decays(SLOPE_LIMIT) && s.positive_points >= 3 {
            chosen = Some(k);
        }
    }
    let k = chosen.ok_or_else(|| HarnessError::Usage("no ladder value gives the required decay".into()))?;
    let essence = EssenceCalibration {
        members: LEMMA_MEMBERS,
        k,
        slope_limit: SLOPE_LIMIT,
        trials,
    };

    use rayon::prelude::*;
    let sums = first_error(
        members
            .par_iter()
            .map(|&i| corona_sum_stats(&cascade_shift(i)?, &cascade_weight(i)?))
            .collect(),
    )?
    .into_iter()
    .fold(CoronaSumStats::zero(), CoronaSumStats::merge);
    let corona_sums = CoronaSumCalibration {
        members: LEMMA_MEMBERS,
        bold_h_limit: sums.bold_h_ratio * HEADROOM,
        a_limit: sums.a_ratio * HEADROOM,
        b_limit: sums.b_ratio * HEADROOM,
        observed: sums,
    };

    let wb = first_error(
        members
            .par_iter()
            .map(|&i| weak_boundedness_stats(&cascade_shift(i)?, &cascade_weight(i)?))
            .collect(),
    )?;
    let pair = wb.iter().map(|s| s.pair_ratio).fold(0.0, f64::max);
    let large = wb.iter().map(|s| s.large_scale_ratio).fold(0.0, f64::max);
    let weak_boundedness = WeakBoundednessCalibration {
        members: LEMMA_MEMBERS,
        observed_pair_ratio: pair,
        observed_large_scale_ratio: large,
        pair_limit: pair * HEADROOM,
        large_scale_limit: large * HEADROOM,
    };

    Ok(Calibration {
        schema: dyadlab_core::io::SCHEMA.into(),
        headroom: HEADROOM,
        sufficiency,
        growth,
        essence,
        corona_sums,
        weak_boundedness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frozen_limits_carry_the_headroom() {
        let c = frozen();
        assert_eq!(c.schema, dyadlab_core::io::SCHEMA);
        assert_eq!(c.sufficiency.limit, c.sufficiency.observed * c.headroom);
        assert!(c.growth.window_low > 0.0 && c.growth.window_low < c.growth.observed_min);
        assert!(c.growth.contains(c.growth.observed_max));
        assert!(K_LADDER.contains(&c.essence.k));
        assert_eq!(c.corona_sums.observed.structural_errors, 0);
    }
}
