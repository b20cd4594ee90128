//! Subcommand bodies. Each returns the list of failed assertions; an empty
//! list means exit code 0.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use dyadlab_core::corona::{build_corona, cubes_under, ForestNode, ALPHA_WINDOW_CONVENTION};
use dyadlab_core::estimates::{
    jn_check, paraproduct_norm_identity_check, random_jn_family, testing_constants, TestingReport,
};
use dyadlab_core::io::StoredShift;
use dyadlab_core::shifts::{cz_decompose, weighted_norm, NormMethod, ScaleFamily, ShiftOperator, SimpleHaarShift};
use dyadlab_core::weights::{ap_characteristic, ApReport};
use dyadlab_core::{a2_characteristic, DyadicGrid, GridFunction, Measure, Weight};

use crate::calibration::{frozen, Calibration};
use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::output::{Metadata, Output};
use crate::suites::{corona_sum_stats, essence_of, random_l1_input};

pub const WORKERS_ENV: &str = "DYADLAB_WORKERS";

fn metadata<C: Serialize>(command: &'static str, parameters: C) -> Metadata<C> {
    Metadata {
        command,
        workers_env: WORKERS_ENV,
        convention: None,
        parameters,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ApRow {
    pub weight_id: String,
    pub p: f64,
    pub characteristic: f64,
    pub witness: String,
}

impl ApRow {
    pub fn new(weight_id: String, r: &ApReport) -> Self {
        ApRow {
            weight_id,
            p: r.p,
            characteristic: r.characteristic,
            witness: r.witness_cube.to_string(),
        }
    }
}

pub fn char_command<P: Serialize>(params: P, id: String, w: &Weight, p: f64, out: &Output) -> Result<Vec<String>> {
    let r = ap_characteristic(w, p)?;
    out.table("char", &metadata("char", params), &[ApRow::new(id, &r)])?;
    Ok(Vec::new())
}

#[derive(Debug, Clone, Serialize)]
pub struct NormRow {
    pub weight_id: String,
    pub a2: f64,
    pub norm: f64,
    pub iterations: usize,
}

/// The dual-measure weighted norm for every configured weight.
pub fn norm_command(cfg: &ExperimentConfig, out: &Output) -> Result<Vec<String>> {
    let t = cfg.build_shift()?;
    let method = cfg.tolerances.method();
    let rows: Vec<NormRow> = cfg
        .build_weights()?
        .par_iter()
        .map(|(id, w)| {
            let e = weighted_norm(t.as_operator(), w, method)?;
            Ok(NormRow {
                weight_id: id.clone(),
                a2: a2_characteristic(w),
                norm: e.value,
                iterations: e.iterations,
            })
        })
        .collect::<Result<_>>()?;
    out.table("norm", &metadata("norm", cfg), &rows)?;
    Ok(Vec::new())
}

/// Allowed excess of a testing constant over the measured norm.
pub(crate) fn necessity_allowance(cfg: &ExperimentConfig, norm: f64) -> f64 {
    match cfg.tolerances.method() {
        NormMethod::Dense => cfg.tolerances.necessity_slack,
        NormMethod::Power(p) => cfg.tolerances.necessity_slack + p.rel_tol * norm,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TestingRow {
    pub weight_id: String,
    pub a2: f64,
    pub c_wb: f64,
    pub c_t1: f64,
    pub c_t_star_1: f64,
    pub full_norm: f64,
    pub sufficiency_ratio: f64,
    pub necessity_ok: bool,
}

#[derive(Serialize)]
struct TestingEntry<'a> {
    weight_id: &'a str,
    a2: f64,
    report: &'a TestingReport,
}

/// Testing constants in the dual-measure form `σ = w`, `μ = w^{-1}`.
pub fn testing_for<T: ShiftOperator + ?Sized>(t: &T, w: &Weight, method: NormMethod) -> Result<TestingReport> {
    let dual = w.dual();
    Ok(testing_constants(
        t,
        Measure::Weighted(w),
        Measure::Weighted(&dual),
        method,
    )?)
}

pub fn test_conditions_command(cfg: &ExperimentConfig, out: &Output) -> Result<Vec<String>> {
    let t = cfg.build_shift()?;
    let weights = cfg.build_weights()?;
    let method = cfg.tolerances.method();
    let reports: Vec<TestingReport> = weights
        .par_iter()
        .map(|(_, w)| testing_for(t.as_operator(), w, method))
        .collect::<Result<_>>()?;
    let mut failures = Vec::new();
    let rows: Vec<TestingRow> = weights
        .iter()
        .zip(&reports)
        .map(|((id, w), r)| {
            let ok = r.necessity_slack() <= necessity_allowance(cfg, r.full_norm);
            if !ok {
                failures.push(format!(
                    "{id}: testing constant exceeds the norm by {:e}",
                    r.necessity_slack()
                ));
            }
            TestingRow {
                weight_id: id.clone(),
                a2: a2_characteristic(w),
                c_wb: r.c_wb,
                c_t1: r.c_t1,
                c_t_star_1: r.c_t_star_1,
                full_norm: r.full_norm,
                sufficiency_ratio: r.sufficiency_ratio(),
                necessity_ok: ok,
            }
        })
        .collect();
    match out.format {
        crate::output::Format::Csv => out.table("test_conditions", &metadata("test-conditions", cfg), &rows)?,
        crate::output::Format::Json => {
            let entries: Vec<TestingEntry> = weights
                .iter()
                .zip(&reports)
                .map(|((id, w), r)| TestingEntry {
                    weight_id: id,
                    a2: a2_characteristic(w),
                    report: r,
                })
                .collect();
            out.document("test_conditions", &metadata("test-conditions", cfg), &entries)?
        }
    }
    Ok(failures)
}

#[derive(Debug, Clone, Serialize)]
pub struct CoronaRow {
    pub weight_id: String,
    pub a2: f64,
    pub stopping_cubes: usize,
    pub max_union_fraction: f64,
    pub max_carleson_ratio: f64,
    pub carleson_bound: f64,
    pub checks_ok: bool,
}

#[derive(Serialize)]
struct CoronaEntry {
    #[serde(flatten)]
    row: CoronaRow,
    forest: ForestNode,
}

pub fn corona_command(cfg: &ExperimentConfig, out: &Output) -> Result<Vec<String>> {
    let grid = cfg.grid()?;
    let tol = cfg.tolerances.carleson_tol;
    let weights = cfg.build_weights()?;
    let built: Vec<(CoronaRow, ForestNode)> = weights
        .par_iter()
        .map(|(id, w)| {
            let c = build_corona(w, cubes_under(&grid, grid.root()), grid.root())?;
            let a2 = a2_characteristic(w);
            let car = c.carleson_check(a2);
            Ok((
                CoronaRow {
                    weight_id: id.clone(),
                    a2,
                    stopping_cubes: c.stopping().len(),
                    max_union_fraction: c.packing_check().max_union_fraction,
                    max_carleson_ratio: car.max_ratio,
                    carleson_bound: car.bound,
                    checks_ok: c.checks().holds(),
                },
                c.forest(),
            ))
        })
        .collect::<Result<_>>()?;
    let mut failures = Vec::new();
    for (r, _) in &built {
        if !r.checks_ok {
            failures.push(format!("{}: stopping conditions violated", r.weight_id));
        }
        if r.max_union_fraction > 0.25 + tol {
            failures.push(format!("{}: packing fraction {}", r.weight_id, r.max_union_fraction));
        }
        if r.max_carleson_ratio > r.carleson_bound + tol {
            failures.push(format!(
                "{}: Carleson ratio {} above {}",
                r.weight_id, r.max_carleson_ratio, r.carleson_bound
            ));
        }
    }
    let meta = Metadata {
        convention: Some(ALPHA_WINDOW_CONVENTION),
        ..metadata("corona", cfg)
    };
    match out.format {
        crate::output::Format::Csv => {
            let rows: Vec<CoronaRow> = built.iter().map(|(r, _)| r.clone()).collect();
            out.table("corona", &meta, &rows)?;
        }
        crate::output::Format::Json => {
            let entries: Vec<CoronaEntry> = built
                .into_iter()
                .map(|(r, forest)| CoronaEntry { row: r, forest })
                .collect();
            out.document("corona", &meta, &entries)?;
        }
    }
    Ok(failures)
}

#[derive(Debug, Clone, Serialize)]
pub struct CzRow {
    pub input: u32,
    pub lambda: f64,
    pub bad_cubes: usize,
    pub mean_defect: f64,
    pub bad_measure: f64,
    pub measure_bound: f64,
    pub good_sup: f64,
    pub good_bound: f64,
    pub pass: bool,
}

pub fn cz_command(cfg: &ExperimentConfig, out: &Output) -> Result<Vec<String>> {
    let grid = cfg.grid()?;
    if cfg.cz.lambda_factor < 1.0 {
        return Err(HarnessError::Usage("cz.lambda_factor must be at least 1".into()));
    }
    let rows: Vec<CzRow> = (0..cfg.cz.inputs)
        .into_par_iter()
        .map(|i| {
            let f = random_l1_input(grid, cfg.seed.wrapping_add(i as u64));
            let lambda = cfg.cz.lambda_factor * f.l1_norm();
            let cz = cz_decompose(&f, lambda)?;
            let c = cz.checks(&f);
            Ok(CzRow {
                input: i,
                lambda,
                bad_cubes: cz.bad.len(),
                mean_defect: c.mean_defect,
                bad_measure: c.bad_measure,
                measure_bound: c.measure_bound,
                good_sup: c.good_sup,
                good_bound: c.good_bound,
                pass: c.holds() && c.bad_measure <= c.measure_bound,
            })
        })
        .collect::<Result<_>>()?;
    let failures = rows
        .iter()
        .filter(|r| !r.pass)
        .map(|r| format!("input {}: decomposition checks failed", r.input))
        .collect();
    out.table("cz", &metadata("cz", cfg), &rows)?;
    Ok(failures)
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaRow {
    pub subject: String,
    pub check: &'static str,
    pub value: f64,
    pub bound: f64,
    /// Informational rows never fail the run.
    pub asserted: bool,
    pub pass: bool,
}

impl LemmaRow {
    fn at_most(subject: &str, check: &'static str, value: f64, bound: f64, asserted: bool) -> Self {
        LemmaRow {
            subject: subject.to_owned(),
            check,
            value,
            bound,
            asserted,
            pass: value <= bound,
        }
    }
}

fn simple_shift(t: &StoredShift) -> Result<&SimpleHaarShift> {
    match t {
        StoredShift::Simple(t) => Ok(t),
        StoredShift::Generic(_) => Err(HarnessError::Usage("the lemma checks need a simple shift".into())),
    }
}

fn lemma_rows_for(
    id: &str,
    t: &SimpleHaarShift,
    w: &Weight,
    cfg: &ExperimentConfig,
    cal: &Calibration,
    k: f64,
) -> Result<Vec<LemmaRow>> {
    let grid = t.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9a7a);
    let f = GridFunction::from_fn(grid, |_| rng.random_range(-1.0..1.0));
    let dual = w.dual();
    let pp = paraproduct_norm_identity_check(&f, t, Measure::Weighted(&dual), w)?;
    let ess = essence_of(t, w, k)?;
    let sums = corona_sum_stats(t, w)?;
    let separated = t.family() == ScaleFamily::Separated;
    let mut rows = vec![
        LemmaRow::at_most(
            id,
            "paraproduct_identity_gap",
            pp.relative_gap,
            cfg.tolerances.identity_tol,
            true,
        ),
        LemmaRow::at_most(
            id,
            "essence_nonmonotone_curves",
            f64::from(u8::from(!ess.nonincreasing)),
            0.0,
            true,
        ),
        LemmaRow::at_most(id, "essence_single_term_ratio", ess.max_single_term_ratio, 1.0, true),
        LemmaRow::at_most(
            id,
            "corona_single_value_failures",
            sums.structural_errors as f64,
            0.0,
            separated,
        ),
        LemmaRow::at_most(
            id,
            "bold_h_ratio",
            sums.bold_h_ratio,
            cal.corona_sums.bold_h_limit,
            false,
        ),
        LemmaRow::at_most(id, "corona_a_ratio", sums.a_ratio, cal.corona_sums.a_limit, false),
        LemmaRow::at_most(id, "corona_b_ratio", sums.b_ratio, cal.corona_sums.b_limit, false),
    ];
    for (check, slope) in [
        ("essence_lebesgue_slope", ess.lebesgue_slope),
        ("essence_dual_slope", ess.dual_slope),
    ] {
        if let Some(s) = slope {
            rows.push(LemmaRow::at_most(id, check, s, cal.essence.slope_limit, false));
        }
    }
    Ok(rows)
}

/// Paraproduct identity, exponential integrability, superlevel decay and
/// corona sums for every configured weight.
pub fn lemmas_command(cfg: &ExperimentConfig, out: &Output) -> Result<Vec<String>> {
    let cal = frozen();
    let k = cfg.lemmas.k.unwrap_or(cal.essence.k);
    let stored = cfg.build_shift()?;
    let t = simple_shift(&stored)?;
    let grid: DyadicGrid = cfg.grid()?;
    let weights = cfg.build_weights()?;
    let per: Vec<Vec<LemmaRow>> = weights
        .par_iter()
        .map(|(id, w)| lemma_rows_for(id, t, w, cfg, cal, k))
        .collect::<Result<_>>()?;
    let mut rows: Vec<LemmaRow> = per.into_iter().flatten().collect();
    let tau = cfg.shift.tau.min(grid.depth());
    let jn: Vec<LemmaRow> = (0..cfg.lemmas.jn_families)
        .into_par_iter()
        .map(|i| {
            let family = random_jn_family(grid, tau, cfg.seed.wrapping_add(u64::from(i)))?;
            let r = jn_check(grid, tau, &family)?;
            let worst = r
                .conclusion
                .iter()
                .map(|l| l.worst_fraction / l.bound)
                .fold(0.0, f64::max);
            let value = if r.hypothesis_holds() { worst } else { f64::INFINITY };
            Ok(LemmaRow::at_most(
                &format!("jn_family({i})"),
                "jn_level_ratio",
                value,
                1.0,
                true,
            ))
        })
        .collect::<Result<_>>()?;
    rows.extend(jn);
    let failures = rows
        .iter()
        .filter(|r| r.asserted && !r.pass)
        .map(|r| format!("{}: {} = {} exceeds {}", r.subject, r.check, r.value, r.bound))
        .collect();
    #[derive(Serialize)]
    struct LemmaParams<'a> {
        config: &'a ExperimentConfig,
        k: f64,
    }
    let meta = Metadata {
        convention: Some(ALPHA_WINDOW_CONVENTION),
        ..metadata("lemmas", LemmaParams { config: cfg, k })
    };
    out.table("lemmas", &meta, &rows)?;
    Ok(failures)
}

pub fn calibrate_command(out: &Output) -> Result<Vec<String>> {
    let c = crate::calibration::calibrate()?;
    match &out.dir {
        Some(_) => out.text("calibration.json", &(serde_json::to_string_pretty(&c)? + "\n"))?,
        None => println!("{}", serde_json::to_string_pretty(&c)?),
    }
    Ok(Vec::new())
}
