//! Testing constants, paraproducts, corona sums and the distributional
//! lemmas built on top of the shift engine.

pub mod corona_sums;
pub mod essence;
pub mod jn;
pub mod paraproduct;
pub mod sufficiency;
pub mod testing;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use corona_sums::{
    bold_h, bold_h_over, corona_ab_split, h_functional, h_local, occupied_classes, pn_corona, qn_term_class, AbSplit,
    BoldH,
};
pub use essence::{essence_check, AlphaSummary, EssenceReport};
pub use jn::{jn_check, random_jn_family, JnFamily, JnLevel, JnReport};
pub use paraproduct::{
    paraproduct, paraproduct_norm_identity_check, paraproduct_of_one_oracle, Paraproduct, ParaproductIdentity,
};
pub use sufficiency::{sufficiency_experiment, ShiftNorm, SufficiencyReport};
pub use testing::{testing_constants, weak_boundedness_from_t1_check, TestingReport, WeakBoundednessReport};

/// Superlevel-set masses at increasing thresholds, normalized to fractions
/// of the total Lebesgue and dual mass of the reference cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionCurve {
    pub t: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub lebesgue_mass: Vec<f64>,
    pub dual_mass: Vec<f64>,
    /// Reference decay `e^{-t}`.
    pub bound: Vec<f64>,
}

impl DistributionCurve {
    pub fn is_nonincreasing(&self) -> bool {
        let mono = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0]);
        mono(&self.lebesgue_mass) && mono(&self.dual_mass)
    }

    /// CSV with columns `t, lebesgue_mass, dual_mass, bound`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "lebesgue_mass", "dual_mass", "bound"])?;
        for i in 0..self.t.len() {
            w.write_record(&[
                self.t[i].to_string(),
                self.lebesgue_mass[i].to_string(),
                self.dual_mass[i].to_string(),
                self.bound[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
