//! Norm-growth sweeps: one row per weight, a least-squares summary and a
//! gnuplot script for the growth figure.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use dyadlab_core::corona::{build_corona, cubes_under};
use dyadlab_core::shifts::ShiftOperator;
use dyadlab_core::stats::least_squares;
use dyadlab_core::{a2_characteristic, Weight};

use crate::calibration::frozen;
use crate::commands::{necessity_allowance, testing_for};
use crate::config::{ExperimentConfig, ShiftChoice, WeightSpec};
use crate::error::Result;
use crate::output::{Format, Metadata, Output};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub weight_id: String,
    pub a2: Option<f64>,
    pub norm: Option<f64>,
    pub c_wb: Option<f64>,
    pub c_t1: Option<f64>,
    pub c_t_star_1: Option<f64>,
    pub stopping_cubes: Option<usize>,
    /// `max_Q Σ_{L⊆Q} w(L)/w(Q)` over the `(16/9)‖w‖_{A_2}` bound.
    pub max_carleson_ratio: Option<f64>,
    /// `ok` or the error that stopped this row.
    pub status: String,
}

impl SweepRow {
    fn failed(weight_id: String, err: String) -> Self {
        SweepRow {
            weight_id,
            a2: None,
            norm: None,
            c_wb: None,
            c_t1: None,
            c_t_star_1: None,
            stopping_cubes: None,
            max_carleson_ratio: None,
            status: err,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub rows: usize,
    pub failures: Vec<String>,
    /// `norm ≈ intercept + slope ‖w‖_{A_2}`.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub r_squared: Option<f64>,
    pub ratio_min: Option<f64>,
    pub ratio_max: Option<f64>,
    /// Calibrated `[c, C]` for the power-weight Petermichl study, when the
    /// configuration is that study.
    pub window: Option<(f64, f64)>,
}

fn row_for<T: ShiftOperator + ?Sized>(t: &T, id: &str, w: &Weight, cfg: &ExperimentConfig) -> Result<SweepRow> {
    let grid = w.grid();
    let r = testing_for(t, w, cfg.tolerances.method())?;
    let a2 = a2_characteristic(w);
    let c = build_corona(w, cubes_under(&grid, grid.root()), grid.root())?;
    let car = c.carleson_check(a2);
    Ok(SweepRow {
        weight_id: id.to_owned(),
        a2: Some(a2),
        norm: Some(r.full_norm),
        c_wb: Some(r.c_wb),
        c_t1: Some(r.c_t1),
        c_t_star_1: Some(r.c_t_star_1),
        stopping_cubes: Some(c.stopping().len()),
        max_carleson_ratio: Some(car.max_ratio / car.bound),
        status: "ok".into(),
    })
}

/// Whether `cfg` is the calibrated power-weight growth study.
fn is_growth_study(cfg: &ExperimentConfig) -> bool {
    let cal = &frozen().growth;
    let exps: Vec<f64> = cfg
        .weights
        .iter()
        .filter_map(|w| match w {
            WeightSpec::Power { a } => Some(*a),
            _ => None,
        })
        .collect();
    cfg.shift.kind == ShiftChoice::Petermichl
        && cfg.shift.path.is_none()
        && cfg.grid.d == 1
        && cfg.grid.n == cal.depth
        && exps.len() == cfg.weights.len()
        && exps == cal.exponents
}

pub fn run_sweep(cfg: &ExperimentConfig) -> Result<(Vec<SweepRow>, SweepSummary)> {
    let t = cfg.build_shift()?;
    let weights = cfg.build_weights()?;
    let rows: Vec<SweepRow> = weights
        .par_iter()
        .map(|(id, w)| {
            let start = Instant::now();
            let row =
                row_for(t.as_operator(), id, w, cfg).unwrap_or_else(|e| SweepRow::failed(id.clone(), e.to_string()));
            eprintln!("sweep {id}: {} ms", start.elapsed().as_millis());
            row
        })
        .collect();
    let mut failures = Vec::new();
    for r in &rows {
        if r.status != "ok" {
            failures.push(format!("{}: {}", r.weight_id, r.status));
            continue;
        }
        let norm = r.norm.unwrap_or(0.0);
        let allowance = necessity_allowance(cfg, norm);
        let worst = r.c_wb.into_iter().chain(r.c_t1).chain(r.c_t_star_1).fold(0.0, f64::max);
        if worst > norm + allowance {
            failures.push(format!(
                "{}: testing constant {worst} exceeds the norm {norm}",
                r.weight_id
            ));
        }
        if r.max_carleson_ratio
            .is_some_and(|v| v > 1.0 + cfg.tolerances.carleson_tol)
        {
            failures.push(format!("{}: Carleson bound exceeded", r.weight_id));
        }
    }
    let ok: Vec<&SweepRow> = rows.iter().filter(|r| r.status == "ok").collect();
    let x: Vec<f64> = ok.iter().filter_map(|r| r.a2).collect();
    let y: Vec<f64> = ok.iter().filter_map(|r| r.norm).collect();
    let fit = least_squares(&x, &y);
    let ratios: Vec<f64> = x.iter().zip(&y).map(|(a, n)| n / a).collect();
    let window = is_growth_study(cfg).then(|| (frozen().growth.window_low, frozen().growth.window_high));
    if let Some((lo, hi)) = window {
        for (r, q) in ok.iter().zip(&ratios) {
            if !(lo..=hi).contains(q) {
                failures.push(format!("{}: ratio {q} outside [{lo}, {hi}]", r.weight_id));
            }
        }
    }
    let summary = SweepSummary {
        rows: rows.len(),
        failures,
        slope: fit.map(|f| f.slope),
        intercept: fit.map(|f| f.intercept),
        r_squared: fit.map(|f| f.r_squared),
        ratio_min: ratios.iter().copied().reduce(f64::min),
        ratio_max: ratios.iter().copied().reduce(f64::max),
        window,
    };
    Ok((rows, summary))
}

fn gnuplot_script(summary: &SweepSummary) -> String {
    let mut s = format!("# schema={}\n", dyadlab_core::io::SCHEMA);
    s.push_str("set datafile separator ','\n");
    s.push_str("set xlabel 'A2 characteristic'\nset ylabel 'weighted operator norm'\nset key left top\n");
    if let (Some(a), Some(b)) = (summary.intercept, summary.slope) {
        s.push_str(&format!("f(x) = {a:.12e} + {b:.12e} * x\n"));
        s.push_str("plot 'sweep.csv' skip 3 using 2:3 with linespoints title 'measured', f(x) title 'least squares'\n");
    } else {
        s.push_str("plot 'sweep.csv' skip 3 using 2:3 with linespoints title 'measured'\n");
    }
    s
}

pub fn sweep_command(cfg: &ExperimentConfig, out: &Output) -> Result<Vec<String>> {
    let (rows, summary) = run_sweep(cfg)?;
    let meta = Metadata {
        command: "sweep",
        workers_env: crate::commands::WORKERS_ENV,
        convention: None,
        parameters: cfg,
    };
    match (&out.dir, out.format) {
        (Some(_), format) => {
            out.table("sweep", &meta, &rows)?;
            out.document("summary", &meta, &summary)?;
            if format == Format::Csv {
                out.text("sweep.gp", &gnuplot_script(&summary))?;
            }
        }
        // One stream: a single JSON document, or the table with the summary
        // on stderr.
        (None, Format::Json) => {
            #[derive(Serialize)]
            struct Combined<'a> {
                rows: &'a [SweepRow],
                summary: &'a SweepSummary,
            }
            out.document(
                "sweep",
                &meta,
                &Combined {
                    rows: &rows,
                    summary: &summary,
                },
            )?;
        }
        (None, Format::Csv) => {
            out.table("sweep", &meta, &rows)?;
            eprintln!("{}", serde_json::to_string(&dyadlab_core::io::with_schema(&summary)?)?);
        }
    }
    Ok(summary.failures)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn growth_study_is_recognized() {
        let mut cfg: ExperimentConfig = toml::from_str("grid = { N = 16 }").unwrap();
        cfg.weights = frozen()
            .growth
            .exponents
            .iter()
            .map(|&a| WeightSpec::Power { a })
            .collect();
        assert!(is_growth_study(&cfg));
        cfg.grid.n = 12;
        assert!(!is_growth_study(&cfg));
    }

    #[test]
    fn failed_rows_do_not_stop_the_sweep() {
        // Two power iterations cannot reach the tolerance, so every row fails.
        let cfg: ExperimentConfig = toml::from_str(
            "grid = { N = 6 }\n[tolerances]\npower_max_iter = 2\npower_rel_tol = 1e-15\n\
             [[weights]]\nfamily = \"constant\"\n[[weights]]\nfamily = \"cascade\"\nn = 1\n",
        )
        .unwrap();
        let (rows, summary) = run_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.status != "ok" && r.norm.is_none()));
        assert_eq!(summary.failures.len(), 2);
        assert!(summary.slope.is_none());
    }

    #[test]
    fn rows_keep_config_order() {
        let cfg: ExperimentConfig = toml::from_str(
            "grid = { N = 6 }\n[[weights]]\nfamily = \"cascade\"\nn = 3\n\
             [[weights]]\nfamily = \"constant\"\n[[weights]]\nfamily = \"cascade\"\nn = 1\n",
        )
        .unwrap();
        let (rows, summary) = run_sweep(&cfg).unwrap();
        let ids: Vec<&str> = rows.iter().map(|r| r.weight_id.as_str()).collect();
        assert_eq!(ids, ["cascade(n=3,seed=0)", "constant(1)", "cascade(n=1,seed=2)"]);
        assert!(summary.failures.is_empty());
        assert!(summary.window.is_none());
    }
}
