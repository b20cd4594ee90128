//! Fixed, seeded experiment suites shared by `calibrate`, the lemma
//! commands and the acceptance run. Every suite is deterministic; instance
//! loops run on the rayon pool and are collected in instance order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use dyadlab_core::corona::{build_corona, cubes_under, CoronaDecomposition};
use dyadlab_core::estimates::{
    bold_h, corona_ab_split, essence_check, jn_check, occupied_classes, paraproduct_norm_identity_check, pn_corona,
    qn_term_class, random_jn_family, testing_constants, weak_boundedness_from_t1_check, DistributionCurve,
    TestingReport,
};
use dyadlab_core::shifts::{
    cz_decompose, operator_norm, petermichl_shift, random_generic_shift, random_simple_shift, weighted_norm,
    NormMethod, PowerIteration, ScaleFamily, ShiftOperator, SimpleHaarShift,
};
use dyadlab_core::stats::{least_squares, least_squares_model, log_slope, LinearFit};
use dyadlab_core::weights::{power_weight, random_a2_weight};
use dyadlab_core::{a2_characteristic, DyadicCube, DyadicGrid, GridFunction, Measure, Weight};

use crate::error::Result;

/// Depth of the cascade suite.
pub const CASCADE_DEPTH: u32 = 12;
/// Depth of the necessity and unweighted-norm suites.
pub const INSTANCE_DEPTH: u32 = 10;
/// Depth of the power-weight growth study.
pub const GROWTH_DEPTH: u32 = 16;
pub const GROWTH_EXPONENTS: [f64; 5] = [0.0, 0.5, 0.75, 0.9, 0.95];
/// Candidate superlevel constants, smallest first.
pub const K_LADDER: [f64; 6] = [0.125, 0.25, 0.5, 1.0, 2.0, 4.0];
pub const SLOPE_LIMIT: f64 = -0.5;
/// Rounding allowed when a mass fraction is compared with 1.
const FRACTION_ROUNDING: f64 = 1e-12;

/// Tight power iteration used wherever a norm is compared against an oracle.
pub fn tight_power() -> NormMethod {
    NormMethod::Power(PowerIteration {
        rel_tol: 1e-13,
        max_iter: 200_000,
        ..Default::default()
    })
}

fn cascade_grid() -> DyadicGrid {
    DyadicGrid::new(1, CASCADE_DEPTH).expect("valid depth")
}

/// Member `i` of the cascade suite: `‖w‖_{A_2} = 2^n` with `n = 1 + i mod 6`.
pub fn cascade_weight(i: u64) -> Result<Weight> {
    Ok(random_a2_weight(1 + (i % 6) as u32, i, cascade_grid())?)
}

/// The scale-separated shift paired with cascade weight `i`.
pub fn cascade_shift(i: u64) -> Result<SimpleHaarShift> {
    Ok(random_simple_shift(
        cascade_grid(),
        2,
        1000 + i,
        ScaleFamily::Separated,
    )?)
}

/// Maximal cubes of a cube set.
pub fn maximal(cubes: &[DyadicCube]) -> Vec<DyadicCube> {
    cubes
        .iter()
        .copied()
        .filter(|q| !cubes.iter().any(|p| p.strictly_contains(q)))
        .collect()
}

/// Every `𝒫_n` corona of `t` for `w`: one per class and maximal top cube.
pub fn class_coronas(t: &SimpleHaarShift, w: &Weight) -> Result<Vec<(u32, CoronaDecomposition)>> {
    let mut out = Vec::new();
    for n in occupied_classes(t, w) {
        for q0 in maximal(&qn_term_class(t, w, n)) {
            out.push((n, pn_corona(q0, n, t, w)?));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoronaSuite {
    pub weights: usize,
    pub coronas: usize,
    pub max_union_fraction: f64,
    /// `max (Σ_{L⊆Q} w(L) / w(Q)) / ((16/9)‖w‖_{A_2})`.
    pub max_carleson_ratio: f64,
    pub construction_failures: usize,
}

struct CoronaStats {
    coronas: usize,
    union: f64,
    carleson: f64,
    failures: usize,
}

fn corona_stats(c: &CoronaDecomposition, a2: f64) -> CoronaStats {
    let p = c.packing_check();
    let r = c.carleson_check(a2);
    CoronaStats {
        coronas: 1,
        union: p.max_union_fraction,
        carleson: r.max_ratio / r.bound,
        failures: usize::from(!c.checks().holds()),
    }
}

/// Packing and Carleson bounds over the full-family corona of each cascade
/// weight and over all its class coronas.
pub fn corona_suite(count: u64) -> Result<CoronaSuite> {
    let grid = cascade_grid();
    let per: Vec<CoronaStats> = (0..count)
        .into_par_iter()
        .map(|i| -> Result<CoronaStats> {
            let w = cascade_weight(i)?;
            let a2 = a2_characteristic(&w);
            let mut acc = corona_stats(&build_corona(&w, cubes_under(&grid, grid.root()), grid.root())?, a2);
            for (_, c) in class_coronas(&cascade_shift(i)?, &w)? {
                let s = corona_stats(&c, a2);
                acc.coronas += 1;
                acc.union = acc.union.max(s.union);
                acc.carleson = acc.carleson.max(s.carleson);
                acc.failures += s.failures;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    Ok(CoronaSuite {
        weights: per.len(),
        coronas: per.iter().map(|s| s.coronas).sum(),
        max_union_fraction: per.iter().map(|s| s.union).fold(0.0, f64::max),
        max_carleson_ratio: per.iter().map(|s| s.carleson).fold(0.0, f64::max),
        construction_failures: per.iter().map(|s| s.failures).sum(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CzSuite {
    pub inputs: usize,
    /// `max |∫_Q b| / ‖f‖_1` over all bad cubes.
    pub max_mean_defect: f64,
    /// Inputs with `Σ|Q| > ‖f‖_1/λ`, compared without tolerance.
    pub measure_violations: usize,
    pub max_measure_fraction: f64,
    pub check_failures: usize,
    pub bad_cubes: usize,
}

/// Random heavy-tailed input with `‖f‖_1 = 1`.
pub fn random_l1_input(grid: DyadicGrid, seed: u64) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let density: f64 = rng.random_range(0.01..1.0);
    let tail: f64 = rng.random_range(0.5..3.0);
    let f = GridFunction::from_fn(grid, |_| {
        if rng.random::<f64>() < density {
            let u: f64 = rng.random_range(1e-6..1.0);
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            sign * u.powf(-tail)
        } else {
            0.0
        }
    });
    let norm = f.l1_norm();
    if norm == 0.0 {
        GridFunction::constant(grid, 1.0)
    } else {
        f.scaled(norm.recip())
    }
}

pub fn cz_suite(count: u64) -> Result<CzSuite> {
    let per: Vec<(f64, bool, f64, bool, usize)> = (0..count)
        .into_par_iter()
        .map(|i| -> Result<_> {
            let grid = if i % 2 == 0 {
                DyadicGrid::new(1, 12)?
            } else {
                DyadicGrid::new(2, 6)?
            };
            let f = random_l1_input(grid, 7000 + i);
            let mut rng = ChaCha8Rng::seed_from_u64(9000 + i);
            let lambda = f.l1_norm() * rng.random_range(1.5..50.0);
            let cz = cz_decompose(&f, lambda)?;
            let c = cz.checks(&f);
            Ok((
                c.mean_defect,
                c.bad_measure <= c.measure_bound,
                c.bad_measure / c.measure_bound,
                c.holds(),
                cz.bad.len(),
            ))
        })
        .collect::<Result<_>>()?;
    Ok(CzSuite {
        inputs: per.len(),
        max_mean_defect: per.iter().map(|p| p.0).fold(0.0, f64::max),
        measure_violations: per.iter().filter(|p| !p.1).count(),
        max_measure_fraction: per.iter().map(|p| p.2).fold(0.0, f64::max),
        check_failures: per.iter().filter(|p| !p.3).count(),
        bad_cubes: per.iter().map(|p| p.4).sum(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormCase {
    pub depth: u32,
    pub tau: u32,
    pub seed: u64,
    pub power: f64,
    pub iterations: usize,
    pub dense: Option<f64>,
}

/// Unweighted norms of random simple shifts; `dense_every`-th case (and
/// every case at depth ≤ 8) is also measured with the dense oracle.
pub fn unweighted_norm_suite(depth: u32, seeds: u64, dense_every: u64) -> Result<Vec<NormCase>> {
    let grid = DyadicGrid::new(1, depth)?;
    let cases: Vec<(u32, u64)> = (1..=3).flat_map(|tau| (0..seeds).map(move |s| (tau, s))).collect();
    cases
        .into_par_iter()
        .map(|(tau, seed)| {
            let t = random_simple_shift(grid, tau, seed, ScaleFamily::All)?;
            let p = operator_norm(&t, Measure::Lebesgue, Measure::Lebesgue, tight_power())?;
            let dense = if depth <= 8 || seed % dense_every == 0 {
                Some(operator_norm(&t, Measure::Lebesgue, Measure::Lebesgue, NormMethod::Dense)?.value)
            } else {
                None
            };
            Ok(NormCase {
                depth,
                tau,
                seed,
                power: p.value,
                iterations: p.iterations,
                dense,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NecessityCase {
    pub index: u64,
    pub tau: u32,
    pub generic: bool,
    pub weight_a2: f64,
    pub report: TestingReport,
}

/// Instance `i`: a random shift of index `1 + i mod 3` (generic for
/// `i ≡ 3 mod 4`) and a cascade weight on the depth-10 grid, measured on
/// the dual-measure form `σ = w`, `μ = w^{-1}`.
pub fn necessity_suite(count: u64, method: NormMethod) -> Result<Vec<NecessityCase>> {
    let grid = DyadicGrid::new(1, INSTANCE_DEPTH)?;
    (0..count)
        .into_par_iter()
        .map(|i| {
            let tau = 1 + (i % 3) as u32;
            let generic = i % 4 == 3;
            let w = random_a2_weight(1 + ((i / 3) % 5) as u32, 500 + i, grid)?;
            let dual = w.dual();
            let (s, m) = (Measure::Weighted(&w), Measure::Weighted(&dual));
            let report = if generic {
                testing_constants(
                    &random_generic_shift(grid, tau, 300 + i, ScaleFamily::All)?,
                    s,
                    m,
                    method,
                )?
            } else {
                testing_constants(
                    &random_simple_shift(grid, tau, 300 + i, ScaleFamily::All)?,
                    s,
                    m,
                    method,
                )?
            };
            Ok(NecessityCase {
                index: i,
                tau,
                generic,
                weight_a2: a2_characteristic(&w),
                report,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthPoint {
    pub a: f64,
    pub a2: f64,
    pub norm: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthStudy {
    pub depth: u32,
    pub points: Vec<GrowthPoint>,
    /// `norm ≈ c_0 + c_1 ‖w‖_{A_2}`.
    pub linear: LinearFit,
    /// `norm ≈ c_0 + c_1 ‖w‖_{A_2}^{1/2}`.
    pub sqrt: LinearFit,
    /// `norm ≈ c_0 + c_1 ‖w‖_{A_2}^{3/2}`.
    pub three_halves: LinearFit,
    /// `norm ≈ c_0 + c_1 ‖w‖_{A_2}^2`.
    pub quadratic: LinearFit,
    /// Slope of `ln norm` against `ln ‖w‖_{A_2}`.
    pub loglog_slope: f64,
}

impl GrowthStudy {
    pub fn ratios(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.norm / p.a2)
    }
}

/// Dual-measure weighted norms of the Petermichl shift over power weights.
pub fn petermichl_growth(depth: u32, exponents: &[f64]) -> Result<GrowthStudy> {
    let grid = DyadicGrid::new(1, depth)?;
    let t = petermichl_shift(grid, ScaleFamily::All)?;
    let points: Vec<GrowthPoint> = exponents
        .par_iter()
        .map(|&a| {
            let w = power_weight(a, grid)?;
            let e = weighted_norm(&t, &w, tight_power())?;
            Ok(GrowthPoint {
                a,
                a2: a2_characteristic(&w),
                norm: e.value,
                iterations: e.iterations,
            })
        })
        .collect::<Result<_>>()?;
    let x: Vec<f64> = points.iter().map(|p| p.a2).collect();
    let y: Vec<f64> = points.iter().map(|p| p.norm).collect();
    let fit = |g: fn(f64) -> f64| {
        least_squares_model(&x, &y, g).ok_or_else(|| crate::error::HarnessError::Usage("degenerate sweep".into()))
    };
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    Ok(GrowthStudy {
        depth,
        linear: least_squares(&x, &y).ok_or_else(|| crate::error::HarnessError::Usage("degenerate sweep".into()))?,
        sqrt: fit(f64::sqrt)?,
        three_halves: fit(|v| v.powf(1.5))?,
        quadratic: fit(|v| v * v)?,
        loglog_slope: log_slope(&lx, &y).unwrap_or(f64::NAN),
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParaproductSuite {
    pub instances: usize,
    pub max_relative_gap: f64,
}

pub fn paraproduct_suite(count: u64) -> Result<ParaproductSuite> {
    let grid = DyadicGrid::new(1, INSTANCE_DEPTH)?;
    let gaps: Vec<f64> = (0..count)
        .into_par_iter()
        .map(|i| {
            let t = random_simple_shift(grid, 1 + (i % 3) as u32, 40 + i, ScaleFamily::All)?;
            let w = random_a2_weight(1 + (i % 5) as u32, 60 + i, grid)?;
            let mut rng = ChaCha8Rng::seed_from_u64(80 + i);
            let f = GridFunction::from_fn(grid, |_| rng.random_range(-1.0..1.0));
            let dual = w.dual();
            let sigma = if i % 2 == 0 {
                Measure::Weighted(&dual)
            } else {
                Measure::Lebesgue
            };
            Ok(paraproduct_norm_identity_check(&f, &t, sigma, &w)?.relative_gap)
        })
        .collect::<Result<_>>()?;
    Ok(ParaproductSuite {
        instances: gaps.len(),
        max_relative_gap: gaps.iter().copied().fold(0.0, f64::max),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JnSuite {
    pub families: usize,
    pub hypothesis_failures: usize,
    pub conclusion_failures: usize,
    pub max_hypothesis_ratio: f64,
    /// Per `t`: max over families of `worst_fraction / bound`.
    pub max_conclusion_ratio: Vec<f64>,
}

pub fn jn_suite(count: u64, seed_base: u64) -> Result<JnSuite> {
    let reports: Vec<_> = (0..count)
        .into_par_iter()
        .map(|i| {
            let (grid, tau) = match i % 4 {
                0 => (DyadicGrid::new(1, 12)?, 1),
                1 => (DyadicGrid::new(1, 12)?, 2),
                2 => (DyadicGrid::new(1, 12)?, 3),
                _ => (DyadicGrid::new(2, 6)?, 1),
            };
            let family = random_jn_family(grid, tau, seed_base + i)?;
            Ok(jn_check(grid, tau, &family)?)
        })
        .collect::<Result<_>>()?;
    let levels = reports.iter().map(|r| r.conclusion.len()).max().unwrap_or(0);
    let max_conclusion_ratio = (0..levels)
        .map(|k| {
            reports
                .iter()
                .filter_map(|r| r.conclusion.get(k))
                .map(|l| l.worst_fraction / l.bound)
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(JnSuite {
        families: reports.len(),
        hypothesis_failures: reports.iter().filter(|r| !r.hypothesis_holds()).count(),
        conclusion_failures: reports.iter().filter(|r| r.hypothesis_holds() && !r.holds()).count(),
        max_hypothesis_ratio: reports.iter().map(|r| r.hypothesis_ratio).fold(0.0, f64::max),
        max_conclusion_ratio,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssenceSuite {
    pub k: f64,
    pub curves: usize,
    pub nonincreasing: bool,
    pub max_single_term_ratio: f64,
    pub max_weak_ratio: f64,
    /// Mean over all stopping cubes of the normalized superlevel masses.
    pub pooled: DistributionCurve,
    pub lebesgue_slope: Option<f64>,
    pub dual_slope: Option<f64>,
    pub positive_points: usize,
    /// Largest `K Σ_α 2^{-α/2}` over the stopping cubes.
    pub max_aggregate_k: f64,
}

impl EssenceSuite {
    /// Both pooled slopes exist and are at most `limit`.
    pub fn decays(&self, limit: f64) -> bool {
        matches!((self.lebesgue_slope, self.dual_slope), (Some(a), Some(b)) if a <= limit && b <= limit)
    }
}

struct EssenceAcc {
    curves: usize,
    mono: bool,
    single: f64,
    weak: f64,
    aggregate: f64,
    leb: Vec<f64>,
    dual: Vec<f64>,
    t: Vec<f64>,
}

fn essence_for(t: &SimpleHaarShift, w: &Weight, k: f64) -> Result<EssenceAcc> {
    let mut acc = EssenceAcc {
        curves: 0,
        mono: true,
        single: 0.0,
        weak: 0.0,
        aggregate: 0.0,
        leb: Vec::new(),
        dual: Vec::new(),
        t: Vec::new(),
    };
    for (_, c) in class_coronas(t, w)? {
        for (i, s) in c.stopping().iter().enumerate() {
            let r = essence_check(s.cube, c.corona(i), t, w, k)?;
            if acc.leb.is_empty() {
                acc.leb = vec![0.0; r.curve.t.len()];
                acc.dual = vec![0.0; r.curve.t.len()];
                acc.t = r.curve.t.clone();
            }
            acc.curves += 1;
            acc.mono &= r.curve.is_nonincreasing()
                && r.curve.dual_mass[0] <= 1.0 + FRACTION_ROUNDING
                && r.curve.lebesgue_mass[0] <= 1.0 + FRACTION_ROUNDING;
            acc.single = acc.single.max(r.single_term_ratio);
            acc.weak = acc.weak.max(r.weak_ratio());
            acc.aggregate = acc.aggregate.max(r.aggregate_k);
            acc.leb
                .iter_mut()
                .zip(&r.curve.lebesgue_mass)
                .for_each(|(a, b)| *a += b);
            acc.dual.iter_mut().zip(&r.curve.dual_mass).for_each(|(a, b)| *a += b);
        }
    }
    Ok(acc)
}

/// Pooled superlevel curves of `|H(L, 𝒫_n(L))|` over every class corona of
/// the given cascade-suite members.
pub fn essence_suite(members: &[u64], k: f64) -> Result<EssenceSuite> {
    let parts: Vec<EssenceAcc> = members
        .par_iter()
        .map(|&i| essence_for(&cascade_shift(i)?, &cascade_weight(i)?, k))
        .collect::<Result<_>>()?;
    Ok(pool(parts, k))
}

/// The same statistics for one shift and weight.
pub fn essence_of(t: &SimpleHaarShift, w: &Weight, k: f64) -> Result<EssenceSuite> {
    Ok(pool(vec![essence_for(t, w, k)?], k))
}

fn pool(parts: Vec<EssenceAcc>, k: f64) -> EssenceSuite {
    let t: Vec<f64> = parts
        .iter()
        .find(|p| !p.t.is_empty())
        .map(|p| p.t.clone())
        .unwrap_or_default();
    let mut leb = vec![0.0; t.len()];
    let mut dual = vec![0.0; t.len()];
    for p in parts.iter().filter(|p| !p.leb.is_empty()) {
        leb.iter_mut().zip(&p.leb).for_each(|(a, b)| *a += b);
        dual.iter_mut().zip(&p.dual).for_each(|(a, b)| *a += b);
    }
    let curves: usize = parts.iter().map(|p| p.curves).sum();
    let scale = (curves.max(1) as f64).recip();
    leb.iter_mut().chain(dual.iter_mut()).for_each(|v| *v *= scale);
    let pooled = DistributionCurve {
        thresholds: t.iter().map(|v| k * v).collect(),
        bound: t.iter().map(|v| (-v).exp()).collect(),
        t,
        lebesgue_mass: leb,
        dual_mass: dual,
    };
    let positive_points = pooled
        .lebesgue_mass
        .iter()
        .zip(&pooled.dual_mass)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .count();
    EssenceSuite {
        k,
        curves,
        nonincreasing: parts.iter().all(|p| p.mono),
        max_single_term_ratio: parts.iter().map(|p| p.single).fold(0.0, f64::max),
        max_weak_ratio: parts.iter().map(|p| p.weak).fold(0.0, f64::max),
        lebesgue_slope: log_slope(&pooled.t, &pooled.lebesgue_mass),
        dual_slope: log_slope(&pooled.t, &pooled.dual_mass),
        positive_points,
        max_aggregate_k: parts.iter().map(|p| p.aggregate).fold(0.0, f64::max),
        pooled,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoronaSumStats {
    /// `max_n 𝐇(𝒬_n) / (2^{n/2} ‖w‖_{A_2}^{1/2})`.
    pub bold_h_ratio: f64,
    /// `max A / (2^n ‖w‖_{A_2} w(Q_0))`.
    pub a_ratio: f64,
    /// `max B / (2^n ‖w‖_{A_2} w(Q_0))`.
    pub b_ratio: f64,
    /// `max_L B(L) / (2^n w(L))`.
    pub b_local_ratio: f64,
    /// Single-value assertion failures.
    pub structural_errors: usize,
}

impl CoronaSumStats {
    pub fn merge(self, o: CoronaSumStats) -> CoronaSumStats {
        CoronaSumStats {
            bold_h_ratio: self.bold_h_ratio.max(o.bold_h_ratio),
            a_ratio: self.a_ratio.max(o.a_ratio),
            b_ratio: self.b_ratio.max(o.b_ratio),
            b_local_ratio: self.b_local_ratio.max(o.b_local_ratio),
            structural_errors: self.structural_errors + o.structural_errors,
        }
    }

    pub fn zero() -> Self {
        CoronaSumStats {
            bold_h_ratio: 0.0,
            a_ratio: 0.0,
            b_ratio: 0.0,
            b_local_ratio: 0.0,
            structural_errors: 0,
        }
    }
}

pub fn corona_sum_stats(t: &SimpleHaarShift, w: &Weight) -> Result<CoronaSumStats> {
    let a2 = a2_characteristic(w);
    let mut s = CoronaSumStats::zero();
    for n in occupied_classes(t, w) {
        let class = qn_term_class(t, w, n);
        let h = bold_h(&class, t, w)?;
        s.bold_h_ratio = s.bold_h_ratio.max(h.value / ((n as f64 / 2.0).exp2() * a2.sqrt()));
        for q0 in maximal(&class) {
            let c = pn_corona(q0, n, t, w)?;
            match corona_ab_split(q0, n, &c, t, w) {
                Ok(ab) => {
                    s.a_ratio = s.a_ratio.max(ab.normalized_a());
                    s.b_ratio = s.b_ratio.max(ab.normalized_b());
                    s.b_local_ratio = s.b_local_ratio.max(ab.max_b_local);
                }
                Err(dyadlab_core::Error::Structural(_)) => s.structural_errors += 1,
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakBoundednessStats {
    pub pair_ratio: f64,
    pub t1_ratio: f64,
    pub large_scale_ratio: f64,
    pub chain_violations: usize,
}

pub fn weak_boundedness_stats<T: ShiftOperator + ?Sized>(t: &T, w: &Weight) -> Result<WeakBoundednessStats> {
    let r = weak_boundedness_from_t1_check(t, w)?;
    Ok(WeakBoundednessStats {
        pair_ratio: r.pair_ratio,
        t1_ratio: r.t1_ratio,
        large_scale_ratio: r.large_scale_ratio,
        chain_violations: r.chain_violations,
    })
}
