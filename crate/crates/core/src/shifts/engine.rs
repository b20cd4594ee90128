//! Application of shift operators through the cube-integral pyramid.
//!
//! A term on `Q` only needs the integrals of the input over the subcells of
//! `Q` at level `level(Q)+τ`, and its output is constant on those subcells.
//! Applying `T` therefore costs one bottom-up pass to build integrals, one
//! kernel evaluation per term, and one top-down pass accumulating the
//! piecewise constant outputs onto the finest cells.

use rayon::prelude::*;

use crate::error::{ensure_same_grid, Result};
use crate::grid::{CubeSums, DyadicCube, DyadicGrid, GridFunction, Measure};

use super::ShiftOperator;

/// Below this many cells the per-level work runs on the calling thread.
const PARALLEL_CELLS: usize = 1 << 14;

/// Local (row-major, level-wide) index of the `s`-th subcube of `q` at
/// relative depth `t`.
#[inline]
pub(crate) fn subcell_local(dim: u32, q: DyadicCube, t: u32, s: usize) -> usize {
    match dim {
        1 => ((q.index[0] as usize) << t) + s,
        _ => {
            let side = 1usize << t;
            let row = ((q.index[0] as usize) << t) + s / side;
            let col = ((q.index[1] as usize) << t) + s % side;
            (row << (q.level + t)) | col
        }
    }
}

/// Terms at one level: reads subcell integrals, returns the accumulated
/// subcell values at level `j + τ`.
fn level_contribution<T: ShiftOperator + ?Sized>(t: &T, j: u32, sums: &CubeSums, adjoint: bool) -> Vec<f64> {
    let grid = t.grid();
    let tau = t.tau();
    let dim = grid.dim();
    let sub = t.subcell_count();
    let src = sums.level(j + tau);
    let mut out = vec![0.0; grid.cubes_at_level(j + tau)];
    let mut input = vec![0.0; sub];
    let mut output = vec![0.0; sub];
    for (term, q) in t.level_terms(j).zip(&t.cubes()[t.level_terms(j)]) {
        for (s, x) in input.iter_mut().enumerate() {
            *x = src[subcell_local(dim, *q, tau, s)];
        }
        output.fill(0.0);
        if adjoint {
            t.apply_term_adjoint(term, &input, &mut output);
        } else {
            t.apply_term(term, &input, &mut output);
        }
        for (s, y) in output.iter().enumerate() {
            out[subcell_local(dim, *q, tau, s)] += y;
        }
    }
    out
}

/// `T x` (or `T* x`) for cell values `x`, returned as cell values.
pub fn apply_values<T: ShiftOperator + ?Sized>(t: &T, x: &[f64], adjoint: bool) -> Vec<f64> {
    let grid = t.grid();
    let tau = t.tau();
    let depth = grid.depth();
    debug_assert_eq!(x.len(), grid.cell_count());
    let sums = CubeSums::from_cells(&grid, x);
    let levels: Vec<u32> = (0..=depth - tau).filter(|&j| !t.level_terms(j).is_empty()).collect();
    let parts: Vec<(u32, Vec<f64>)> = if grid.cell_count() >= PARALLEL_CELLS {
        levels
            .par_iter()
            .map(|&j| (j + tau, level_contribution(t, j, &sums, adjoint)))
            .collect()
    } else {
        levels
            .iter()
            .map(|&j| (j + tau, level_contribution(t, j, &sums, adjoint)))
            .collect()
    };
    push_down(&grid, 0, parts)
}

/// Sums level-wise piecewise constant contributions onto the finest cells.
/// `parts` holds `(level, values)` with levels strictly increasing and at
/// least `base`; values are indexed relative to a cube at level `base`
/// (the whole grid when `base == 0`).
fn push_down(grid: &DyadicGrid, base: u32, parts: Vec<(u32, Vec<f64>)>) -> Vec<f64> {
    let dim = grid.dim();
    let depth = grid.depth();
    let mut cur = vec![0.0];
    let mut parts = parts.into_iter().peekable();
    if let Some((l, v)) = parts.next_if(|(l, _)| *l == base) {
        debug_assert_eq!(l, base);
        cur[0] += v[0];
    }
    for l in base..depth {
        let t = l + 1 - base;
        let mut next = vec![0.0; 1usize << (t * dim)];
        match dim {
            1 => {
                for (i, x) in next.iter_mut().enumerate() {
                    *x = cur[i >> 1];
                }
            }
            _ => {
                let side = 1usize << t;
                for (i, x) in next.iter_mut().enumerate() {
                    let (r, c) = (i / side, i % side);
                    *x = cur[(r >> 1) * (side >> 1) + (c >> 1)];
                }
            }
        }
        if let Some((_, v)) = parts.next_if(|(lv, _)| *lv == l + 1) {
            next.iter_mut().zip(&v).for_each(|(a, b)| *a += b);
        }
        cur = next;
    }
    cur
}

fn weighted_input(f: &GridFunction, sigma: Measure<'_>) -> Result<Vec<f64>> {
    sigma.check_grid(f.grid())?;
    Ok(match sigma {
        Measure::Lebesgue => f.values().to_vec(),
        Measure::Weighted(w) => f.values().iter().zip(w.values()).map(|(a, b)| a * b).collect(),
    })
}

/// `T(f σ)`.
pub fn apply<T: ShiftOperator + ?Sized>(t: &T, f: &GridFunction, sigma: Measure<'_>) -> Result<GridFunction> {
    ensure_same_grid(t.grid(), f.grid())?;
    let x = weighted_input(f, sigma)?;
    GridFunction::new(f.grid(), apply_values(t, &x, false))
}

/// `T*(f σ)`.
pub fn apply_adjoint<T: ShiftOperator + ?Sized>(t: &T, f: &GridFunction, sigma: Measure<'_>) -> Result<GridFunction> {
    ensure_same_grid(t.grid(), f.grid())?;
    let x = weighted_input(f, sigma)?;
    GridFunction::new(f.grid(), apply_values(t, &x, true))
}

/// Values of `1_{out} · T(1_{input} x)` on the cells of `out`, in
/// row-major order within `out`, where `sums` are the cube integrals of
/// `x`. Only terms whose cube meets both `input` and `out` contribute, so
/// the cost is proportional to the number of cells of the smaller cube plus
/// the depth.
pub fn apply_window<T: ShiftOperator + ?Sized>(
    t: &T,
    sums: &CubeSums,
    input: DyadicCube,
    out: DyadicCube,
    adjoint: bool,
) -> Vec<f64> {
    let grid = t.grid();
    let tau = t.tau();
    let dim = grid.dim();
    let sub = t.subcell_count();
    let depth = grid.depth();

    // Candidate term cubes: every cube inside the smaller cube when the two
    // are nested, plus the chain of ancestors above it.
    let (inner, chain_start) = if input.contains(&out) {
        (Some(out), out.parent())
    } else if out.contains(&input) {
        (Some(input), input.parent())
    } else {
        (None, Some(input.common_ancestor(&out)))
    };
    let mut candidates: Vec<DyadicCube> = Vec::new();
    let mut c = chain_start;
    while let Some(q) = c {
        candidates.push(q);
        c = q.parent();
    }
    candidates.reverse();
    if let Some(s) = inner {
        let top = depth.saturating_sub(tau);
        if s.level <= top {
            for l in 0..=(top - s.level) {
                candidates.extend(grid.subcubes(s, l));
            }
        }
    }

    let levels = depth - out.level + 1;
    let mut acc: Vec<Vec<f64>> = (0..levels).map(|l| vec![0.0; 1usize << (l * dim)]).collect();
    let mut used = vec![false; levels as usize];
    let mut xin = vec![0.0; sub];
    let mut yout = vec![0.0; sub];
    let input_total = sums.get(&grid, input);
    for q in candidates {
        let Some(term) = t.term_of(&q) else {
            continue;
        };
        for (s, sc) in grid.subcubes(q, tau).enumerate() {
            xin[s] = if input.contains(&sc) {
                sums.get(&grid, sc)
            } else if sc.contains(&input) {
                input_total
            } else {
                0.0
            };
        }
        if xin.iter().all(|v| *v == 0.0) {
            continue;
        }
        yout.fill(0.0);
        if adjoint {
            t.apply_term_adjoint(term, &xin, &mut yout);
        } else {
            t.apply_term(term, &xin, &mut yout);
        }
        for (sc, y) in grid.subcubes(q, tau).zip(&yout) {
            if *y == 0.0 {
                continue;
            }
            if out.contains(&sc) {
                let rel = (sc.level - out.level) as usize;
                acc[rel][grid.subcube_offset(out, sc)] += y;
                used[rel] = true;
            } else if sc.contains(&out) {
                acc[0][0] += y;
                used[0] = true;
            }
        }
    }
    let parts = acc
        .into_iter()
        .enumerate()
        .filter(|(l, _)| used[*l])
        .map(|(l, v)| (out.level + l as u32, v))
        .collect();
    push_down(&grid, out.level, parts)
}

/// Subcell integrals of `x` for the term cube `q`.
pub(crate) fn gather(grid: &DyadicGrid, tau: u32, sums: &CubeSums, q: DyadicCube, buf: &mut [f64]) {
    let src = sums.level(q.level + tau);
    for (s, x) in buf.iter_mut().enumerate() {
        *x = src[subcell_local(grid.dim(), q, tau, s)];
    }
}

/// `Σ_{Q ∈ cubes} T_Q x` on the cells of `top` (row-major within `top`),
/// where `T_Q` is the term on `Q` and `sums` are the cube integrals of `x`.
/// Cubes outside `top` or without a term are skipped.
pub fn partial_apply_local<T: ShiftOperator + ?Sized>(
    t: &T,
    sums: &CubeSums,
    top: DyadicCube,
    cubes: impl IntoIterator<Item = DyadicCube>,
) -> Vec<f64> {
    let grid = t.grid();
    let tau = t.tau();
    let dim = grid.dim();
    let sub = t.subcell_count();
    let levels = grid.depth() - top.level + 1;
    let mut acc: Vec<Option<Vec<f64>>> = vec![None; levels as usize];
    let mut xin = vec![0.0; sub];
    let mut yout = vec![0.0; sub];
    for q in cubes {
        if !top.contains(&q) {
            continue;
        }
        let Some(term) = t.term_of(&q) else {
            continue;
        };
        gather(&grid, tau, sums, q, &mut xin);
        yout.fill(0.0);
        t.apply_term(term, &xin, &mut yout);
        let rel = q.level + tau - top.level;
        let slot = acc[rel as usize].get_or_insert_with(|| vec![0.0; 1usize << (rel * dim)]);
        for (sc, y) in grid.subcubes(q, tau).zip(&yout) {
            slot[grid.subcube_offset(top, sc)] += y;
        }
    }
    let parts = acc
        .into_iter()
        .enumerate()
        .filter_map(|(l, v)| v.map(|v| (top.level + l as u32, v)))
        .collect();
    push_down(&grid, top.level, parts)
}
