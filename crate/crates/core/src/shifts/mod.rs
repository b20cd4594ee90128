//! Haar shift operators.
//!
//! Every term of a shift of index `τ` lives on one cube `Q` and acts through
//! the `2^{τd}` subcells of `Q` at level `level(Q) + τ`: it reads the
//! integrals of the input over those subcells and writes values that are
//! constant on them. Simple shifts store the pair `(g_Q, γ_Q)` and act by
//! `⟨f, g_Q⟩ γ_Q`; generic shifts store the Haar coefficient block
//! `a_{Q',Q''}` and act by its subcell kernel. The shared engine in
//! [`engine`] applies either kind.

use std::collections::HashMap;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DyadicCube, DyadicGrid};

pub mod cz;
pub mod engine;
pub mod generic;
pub mod norm;

pub use cz::{
    cz_decompose, off_support_leak, parents_measure, weak_l1_of_values, weak_l1_quasinorm, weak_l1_ratio, BadPart,
    CzChecks, CzDecomposition,
};
pub use engine::{apply, apply_adjoint, apply_values, apply_window, partial_apply_local};
pub use generic::{martingale_transform_per_haar, random_generic_shift, GenericHaarShift};
pub use norm::{dense_matrix, operator_norm, weighted_norm, NormEstimate, NormMethod, PowerIteration};

/// Relative slack used when validating mean-zero and size conditions of
/// profiles built in floating point.
pub const PROFILE_TOLERANCE: f64 = 1e-12;

/// A linear operator made of terms localized on dyadic cubes, each acting
/// through the `τ`-level subcells of its cube.
pub trait ShiftOperator: Send + Sync {
    fn grid(&self) -> DyadicGrid;

    fn tau(&self) -> u32;

    /// Term cubes in (level, index) order.
    fn cubes(&self) -> &[DyadicCube];

    fn term_of(&self, q: &DyadicCube) -> Option<usize>;

    /// Terms whose cube lies at `level`.
    fn level_terms(&self, level: u32) -> Range<usize>;

    /// `output += K_term · input`, both indexed by subcells of the term cube.
    fn apply_term(&self, term: usize, input: &[f64], output: &mut [f64]);

    /// `output += K_termᵀ · input`.
    fn apply_term_adjoint(&self, term: usize, input: &[f64], output: &mut [f64]);

    /// Number of subcells per term, `2^{τd}`.
    fn subcell_count(&self) -> usize {
        1usize << (self.tau() * self.grid().dim())
    }
}

/// Which cubes carry terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScaleFamily {
    /// Every cube of level `≤ N - τ`.
    #[default]
    All,
    /// Only levels `0, τ, 2τ, ...`, so nested term cubes differ by at least
    /// `τ` levels.
    Separated,
}

impl ScaleFamily {
    pub fn levels(self, grid: &DyadicGrid, tau: u32) -> Vec<u32> {
        if tau > grid.depth() {
            return Vec::new();
        }
        let top = grid.depth() - tau;
        match self {
            ScaleFamily::All => (0..=top).collect(),
            ScaleFamily::Separated => (0..=top).step_by(tau.max(1) as usize).collect(),
        }
    }

    pub fn contains_level(self, level: u32, tau: u32) -> bool {
        match self {
            ScaleFamily::All => true,
            ScaleFamily::Separated => level.is_multiple_of(tau.max(1)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ShiftKind {
    Zero,
    Petermichl,
    Martingale,
    Random { seed: u64 },
    Custom,
}

impl ShiftKind {
    pub fn name(&self) -> &'static str {
        match self {
            ShiftKind::Zero => "zero",
            ShiftKind::Petermichl => "petermichl",
            ShiftKind::Martingale => "martingale",
            ShiftKind::Random { .. } => "random",
            ShiftKind::Custom => "custom",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            ShiftKind::Random { seed } => Some(*seed),
            _ => None,
        }
    }
}

/// The localized pair of one simple-shift term.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub g: Vec<f64>,
    pub gamma: Vec<f64>,
}

/// `T f = Σ_Q ⟨f, g_Q⟩ γ_Q` with `g_Q, γ_Q` mean zero on `Q`, constant on
/// the level-`(level(Q)+τ)` subcells and bounded by `|Q|^{-1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimpleHaarShift {
    grid: DyadicGrid,
    tau: u32,
    kind: ShiftKind,
    family: ScaleFamily,
    cubes: Vec<DyadicCube>,
    profiles: Vec<Profile>,
    index: HashMap<DyadicCube, usize>,
    levels: Vec<Range<usize>>,
}

pub(crate) fn level_ranges(grid: &DyadicGrid, cubes: &[DyadicCube]) -> Vec<Range<usize>> {
    let mut ranges = Vec::with_capacity(grid.depth() as usize + 1);
    let mut start = 0;
    for j in 0..=grid.depth() {
        let end = start + cubes[start..].iter().take_while(|q| q.level == j).count();
        ranges.push(start..end);
        start = end;
    }
    ranges
}

fn check_profile(grid: &DyadicGrid, q: DyadicCube, v: &[f64], what: &str) -> Result<()> {
    let bound = grid.volume(q).sqrt().recip();
    let sup = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if !(sup <= bound * (1.0 + PROFILE_TOLERANCE)) {
        return Err(Error::Structural(format!(
            "{what} on {q} has sup-norm {sup}, exceeding |Q|^-1/2 = {bound}"
        )));
    }
    let mean: f64 = v.iter().sum();
    let scale: f64 = v.iter().map(|x| x.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
    if mean.abs() > PROFILE_TOLERANCE * scale {
        return Err(Error::Structural(format!(
            "{what} on {q} is not mean zero (sum {mean})"
        )));
    }
    Ok(())
}

impl SimpleHaarShift {
    /// Validates and sorts the terms.
    pub fn new(
        grid: DyadicGrid,
        tau: u32,
        kind: ShiftKind,
        family: ScaleFamily,
        mut terms: Vec<(DyadicCube, Profile)>,
    ) -> Result<Self> {
        if tau == 0 || tau > grid.depth() {
            return Err(Error::Config(format!(
                "shift index must lie in 1..=N, got tau={tau} on {grid}"
            )));
        }
        let sub = 1usize << (tau * grid.dim());
        terms.sort_by_key(|(q, _)| *q);
        for w in terms.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Structural(format!("duplicate term at {}", w[0].0)));
            }
        }
        for (q, p) in &terms {
            if !grid.is_valid(*q) || q.level + tau > grid.depth() {
                return Err(Error::Structural(format!(
                    "term cube {q} must have level <= N - tau on {grid}"
                )));
            }
            if !family.contains_level(q.level, tau) {
                return Err(Error::Structural(format!(
                    "term cube {q} is outside the scale-separated family"
                )));
            }
            if p.g.len() != sub || p.gamma.len() != sub {
                return Err(Error::Structural(format!("profiles on {q} need {sub} subcell values")));
            }
            check_profile(&grid, *q, &p.g, "g")?;
            check_profile(&grid, *q, &p.gamma, "gamma")?;
        }
        let (cubes, profiles): (Vec<_>, Vec<_>) = terms.into_iter().unzip();
        let index = cubes.iter().enumerate().map(|(i, q)| (*q, i)).collect();
        let levels = level_ranges(&grid, &cubes);
        Ok(SimpleHaarShift {
            grid,
            tau,
            kind,
            family,
            cubes,
            profiles,
            index,
            levels,
        })
    }

    pub fn zero(grid: DyadicGrid, tau: u32) -> Result<Self> {
        Self::new(grid, tau, ShiftKind::Zero, ScaleFamily::All, Vec::new())
    }

    pub fn kind(&self) -> &ShiftKind {
        &self.kind
    }

    pub fn family(&self) -> ScaleFamily {
        self.family
    }

    pub fn profiles(&self) -> &[Profile] {
        &self.profiles
    }

    pub fn profile(&self, q: &DyadicCube) -> Option<&Profile> {
        self.index.get(q).map(|&i| &self.profiles[i])
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    /// Swaps `g_Q` and `γ_Q` in every term.
    pub fn adjoint(&self) -> Self {
        let mut out = self.clone();
        for p in &mut out.profiles {
            std::mem::swap(&mut p.g, &mut p.gamma);
        }
        out
    }

    /// Keeps the terms selected by `keep`.
    pub fn filtered(&self, mut keep: impl FnMut(&DyadicCube) -> bool) -> Self {
        let terms = self
            .cubes
            .iter()
            .zip(&self.profiles)
            .filter(|(q, _)| keep(q))
            .map(|(q, p)| (*q, p.clone()))
            .collect();
        Self::new(self.grid, self.tau, ShiftKind::Custom, self.family, terms).expect("a subset of valid terms is valid")
    }

    /// The single-scale piece `T_s`: terms whose cube lies at `level`.
    pub fn scale_piece(&self, level: u32) -> Self {
        self.filtered(|q| q.level == level)
    }

    /// The terms as `(cube, profile)` pairs.
    pub fn terms(&self) -> impl Iterator<Item = (DyadicCube, &Profile)> {
        self.cubes.iter().copied().zip(&self.profiles)
    }
}

impl ShiftOperator for SimpleHaarShift {
    fn grid(&self) -> DyadicGrid {
        self.grid
    }

    fn tau(&self) -> u32 {
        self.tau
    }

    fn cubes(&self) -> &[DyadicCube] {
        &self.cubes
    }

    fn term_of(&self, q: &DyadicCube) -> Option<usize> {
        self.index.get(q).copied()
    }

    fn level_terms(&self, level: u32) -> Range<usize> {
        self.levels.get(level as usize).cloned().unwrap_or(0..0)
    }

    fn apply_term(&self, term: usize, input: &[f64], output: &mut [f64]) {
        let p = &self.profiles[term];
        let c: f64 = p.g.iter().zip(input).map(|(g, x)| g * x).sum();
        if c != 0.0 {
            for (o, y) in output.iter_mut().zip(&p.gamma) {
                *o += c * y;
            }
        }
    }

    fn apply_term_adjoint(&self, term: usize, input: &[f64], output: &mut [f64]) {
        let p = &self.profiles[term];
        let c: f64 = p.gamma.iter().zip(input).map(|(g, x)| g * x).sum();
        if c != 0.0 {
            for (o, y) in output.iter_mut().zip(&p.g) {
                *o += c * y;
            }
        }
    }
}

/// Values of the standard Haar function of the subcube at relative level
/// `t < τ` and offset `k`, sampled on the `2^τ` level-`τ` subcells of a
/// one-dimensional cube of volume `vol`.
fn haar_1d_on_subcells(tau: u32, t: u32, k: usize, vol: f64) -> Vec<f64> {
    let n = 1usize << tau;
    let width = n >> t;
    let scale = (vol / (1u64 << t) as f64).sqrt().recip();
    let mut v = vec![0.0; n];
    for (s, x) in v.iter_mut().enumerate().skip(k * width).take(width) {
        *x = if s - k * width < width / 2 { scale } else { -scale };
    }
    v
}

/// The dyadic model of the Hilbert transform: `g_Q = h_Q` and
/// `γ_Q = 2^{-1/2}(h_{Q_-} - h_{Q_+})`, index 2.
pub fn petermichl_shift(grid: DyadicGrid, family: ScaleFamily) -> Result<SimpleHaarShift> {
    if grid.dim() != 1 {
        return Err(Error::Config("the Petermichl shift is defined for d = 1".into()));
    }
    if grid.depth() < 2 {
        return Err(Error::Config("the Petermichl shift needs N >= 2".into()));
    }
    let tau = 2;
    let mut terms = Vec::new();
    for j in family.levels(&grid, tau) {
        for q in grid.level_cubes(j) {
            let vol = grid.volume(q);
            let g = haar_1d_on_subcells(tau, 0, 0, vol);
            let left = haar_1d_on_subcells(tau, 1, 0, vol);
            let right = haar_1d_on_subcells(tau, 1, 1, vol);
            let gamma = left
                .iter()
                .zip(&right)
                .map(|(a, b)| (a - b) * std::f64::consts::FRAC_1_SQRT_2)
                .collect();
            terms.push((q, Profile { g, gamma }));
        }
    }
    SimpleHaarShift::new(grid, tau, ShiftKind::Petermichl, family, terms)
}

/// `T f = Σ_Q ε_Q ⟨f, h_Q⟩ h_Q` on a one-dimensional grid.
pub fn martingale_transform(grid: DyadicGrid, signs: impl Fn(DyadicCube) -> f64) -> Result<SimpleHaarShift> {
    if grid.dim() != 1 {
        return Err(Error::Config(
            "cubes carry several Haar functions for d > 1; use martingale_transform_per_haar".into(),
        ));
    }
    let mut terms = Vec::new();
    for q in grid.cubes().filter(|q| q.level < grid.depth()) {
        let e = signs(q);
        if e != 1.0 && e != -1.0 {
            return Err(Error::Config(format!("sign on {q} must be ±1, got {e}")));
        }
        let h = haar_1d_on_subcells(1, 0, 0, grid.volume(q));
        let gamma = h.iter().map(|x| e * x).collect();
        terms.push((q, Profile { g: h, gamma }));
    }
    SimpleHaarShift::new(grid, 1, ShiftKind::Martingale, ScaleFamily::All, terms)
}

/// Seeded `±1` signs, one per cube, drawn in scan order.
pub fn random_signs(grid: &DyadicGrid, seed: u64) -> HashMap<DyadicCube, f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    grid.cubes()
        .map(|q| (q, if rng.random_bool(0.5) { 1.0 } else { -1.0 }))
        .collect()
}

fn random_profile(rng: &mut ChaCha8Rng, len: usize, bound: f64) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mean = v.iter().sum::<f64>() / len as f64;
        v.iter_mut().for_each(|x| *x -= mean);
        let sup = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if sup > 1e-9 {
            let s = bound / sup;
            v.iter_mut().for_each(|x| *x *= s);
            // exact mean zero after rescaling: push the rounding residue into the smallest entry
            let residue: f64 = v.iter().sum();
            let k = (0..len)
                .min_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()))
                .expect("len >= 2");
            v[k] -= residue;
            return v;
        }
    }
}

/// Random simple shift: each profile is drawn uniformly on the subcells,
/// projected to mean zero and rescaled to sup-norm exactly `|Q|^{-1/2}`.
pub fn random_simple_shift(grid: DyadicGrid, tau: u32, seed: u64, family: ScaleFamily) -> Result<SimpleHaarShift> {
    if tau == 0 || tau > grid.depth() {
        return Err(Error::Config(format!(
            "random shift needs 1 <= tau <= N, got tau={tau} on {grid}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sub = 1usize << (tau * grid.dim());
    let mut terms = Vec::new();
    for j in family.levels(&grid, tau) {
        for q in grid.level_cubes(j) {
            let bound = grid.volume(q).sqrt().recip();
            let g = random_profile(&mut rng, sub, bound);
            let gamma = random_profile(&mut rng, sub, bound);
            terms.push((q, Profile { g, gamma }));
        }
    }
    SimpleHaarShift::new(grid, tau, ShiftKind::Random { seed }, family, terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{haar_basis, GridFunction};

    fn g1(n: u32) -> DyadicGrid {
        DyadicGrid::new(1, n).unwrap()
    }

    #[test]
    fn petermichl_profiles() {
        let t = petermichl_shift(g1(5), ScaleFamily::All).unwrap();
        assert_eq!(t.tau(), 2);
        for (q, p) in t.terms() {
            let b = t.grid().volume(q).sqrt().recip();
            assert!(p.g.iter().all(|x| x.abs() == b));
            assert!(p.gamma.iter().all(|x| (x.abs() - b).abs() < 1e-15 * b));
        }
        assert!(petermichl_shift(DyadicGrid::new(2, 3).unwrap(), ScaleFamily::All).is_err());
    }

    #[test]
    fn random_profiles_satisfy_constraints() {
        for dim in [1, 2] {
            let g = DyadicGrid::new(dim, 5).unwrap();
            for tau in 1..=3 {
                let t = random_simple_shift(g, tau, 17, ScaleFamily::All).unwrap();
                for (q, p) in t.terms() {
                    check_profile(&g, q, &p.g, "g").unwrap();
                    check_profile(&g, q, &p.gamma, "gamma").unwrap();
                    let b = g.volume(q).sqrt().recip();
                    let sup = p.g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                    assert!((sup - b).abs() <= 1e-12 * b);
                }
            }
        }
    }

    #[test]
    fn tau_one_profiles_are_unit_multiples_of_haar() {
        let g = g1(6);
        let t = random_simple_shift(g, 1, 3, ScaleFamily::All).unwrap();
        for (q, p) in t.terms() {
            let h = &haar_basis(&g, q).unwrap()[0].child_values;
            let m = p.g[0] / h[0];
            assert!((m.abs() - 1.0).abs() < 1e-12);
            assert!((p.g[1] - m * h[1]).abs() < 1e-12 * h[0].abs());
        }
    }

    #[test]
    fn rejects_invalid_terms() {
        let g = g1(4);
        let q = DyadicCube::new_1d(1, 0);
        let big = Profile {
            g: vec![3.0, -3.0],
            gamma: vec![1.0, -1.0],
        };
        assert!(SimpleHaarShift::new(g, 1, ShiftKind::Custom, ScaleFamily::All, vec![(q, big)]).is_err());
        let biased = Profile {
            g: vec![1.0, 0.0],
            gamma: vec![1.0, -1.0],
        };
        assert!(SimpleHaarShift::new(g, 1, ShiftKind::Custom, ScaleFamily::All, vec![(q, biased)]).is_err());
        let deep = DyadicCube::new_1d(4, 0);
        let ok = Profile {
            g: vec![1.0, -1.0],
            gamma: vec![1.0, -1.0],
        };
        assert!(SimpleHaarShift::new(g, 1, ShiftKind::Custom, ScaleFamily::All, vec![(deep, ok)]).is_err());
    }

    #[test]
    fn separated_family_levels() {
        let g = g1(10);
        assert_eq!(ScaleFamily::Separated.levels(&g, 3), vec![0, 3, 6]);
        assert_eq!(ScaleFamily::All.levels(&g, 3).len(), 8);
        let t = random_simple_shift(g, 3, 1, ScaleFamily::Separated).unwrap();
        assert!(t.cubes().iter().all(|q| q.level % 3 == 0));
    }

    #[test]
    fn adjoint_swaps_profiles() {
        let t = random_simple_shift(g1(6), 2, 8, ScaleFamily::All).unwrap();
        assert_eq!(t.adjoint().adjoint(), t);
        let m = martingale_transform(g1(5), |_| 1.0).unwrap();
        assert_eq!(m.adjoint(), m);
    }

    #[test]
    fn martingale_rejects_bad_input() {
        assert!(martingale_transform(g1(3), |_| 0.5).is_err());
        assert!(martingale_transform(DyadicGrid::new(2, 2).unwrap(), |_| 1.0).is_err());
        let s = random_signs(&g1(4), 2);
        let m = martingale_transform(g1(4), |q| s[&q]).unwrap();
        assert_eq!(m.len(), 15);
        let _ = GridFunction::zeros(g1(4));
    }
}
