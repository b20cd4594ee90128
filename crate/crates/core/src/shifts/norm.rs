//! Operator norms `‖T(· σ)‖_{L²(σ) → L²(μ)}`.
//!
//! The norm equals the largest singular value of `A = √μ T √σ` acting on
//! cell values, computed either by power iteration on `A*A` or by a dense
//! SVD for small grids.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_same_grid, Error, Result};
use crate::grid::Measure;
use crate::weights::Weight;

use super::{apply_values, ShiftOperator};

/// Largest cell count accepted by the dense method.
pub const DENSE_MAX_CELLS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerIteration {
    pub rel_tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for PowerIteration {
    fn default() -> Self {
        PowerIteration {
            rel_tol: 1e-8,
            max_iter: 10_000,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NormMethod {
    Power(PowerIteration),
    Dense,
}

impl Default for NormMethod {
    fn default() -> Self {
        NormMethod::Power(PowerIteration::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
}

struct Sandwich<'a, T: ?Sized> {
    t: &'a T,
    sqrt_sigma: Vec<f64>,
    sqrt_mu: Vec<f64>,
}

impl<T: ShiftOperator + ?Sized> Sandwich<'_, T> {
    fn forward(&self, u: &[f64]) -> Vec<f64> {
        let x: Vec<f64> = u.iter().zip(&self.sqrt_sigma).map(|(a, b)| a * b).collect();
        let mut y = apply_values(self.t, &x, false);
        y.iter_mut().zip(&self.sqrt_mu).for_each(|(a, b)| *a *= b);
        y
    }

    fn backward(&self, v: &[f64]) -> Vec<f64> {
        let x: Vec<f64> = v.iter().zip(&self.sqrt_mu).map(|(a, b)| a * b).collect();
        let mut y = apply_values(self.t, &x, true);
        y.iter_mut().zip(&self.sqrt_sigma).for_each(|(a, b)| *a *= b);
        y
    }
}

fn sandwich<'a, T: ShiftOperator + ?Sized>(t: &'a T, sigma: Measure<'_>, mu: Measure<'_>) -> Result<Sandwich<'a, T>> {
    let grid = t.grid();
    for m in [sigma, mu] {
        if let Some(g) = m.grid() {
            ensure_same_grid(grid, g)?;
        }
    }
    let root = |m: Measure<'_>| m.densities(&grid).into_iter().map(f64::sqrt).collect();
    Ok(Sandwich {
        t,
        sqrt_sigma: root(sigma),
        sqrt_mu: root(mu),
    })
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// The matrix of `√μ T √σ` on cell values, column-major.
pub fn dense_matrix<T: ShiftOperator + ?Sized>(t: &T, sigma: Measure<'_>, mu: Measure<'_>) -> Result<DMatrix<f64>> {
    let n = t.grid().cell_count();
    if n > DENSE_MAX_CELLS {
        return Err(Error::Config(format!(
            "dense norm limited to {DENSE_MAX_CELLS} cells, grid has {n}"
        )));
    }
    let s = sandwich(t, sigma, mu)?;
    let mut data = Vec::with_capacity(n * n);
    let mut e = vec![0.0; n];
    for k in 0..n {
        e[k] = 1.0;
        data.extend(s.forward(&e));
        e[k] = 0.0;
    }
    Ok(DMatrix::from_vec(n, n, data))
}

/// `‖T(· σ)‖_{L²(σ) → L²(μ)}`. Power iteration returns `‖A u‖` for the
/// final unit vector `u`, which never exceeds the true norm.
pub fn operator_norm<T: ShiftOperator + ?Sized>(
    t: &T,
    sigma: Measure<'_>,
    mu: Measure<'_>,
    method: NormMethod,
) -> Result<NormEstimate> {
    match method {
        NormMethod::Dense => {
            let m = dense_matrix(t, sigma, mu)?;
            let value = m.singular_values().iter().fold(0.0f64, |a, b| a.max(*b));
            Ok(NormEstimate { value, iterations: 0 })
        }
        NormMethod::Power(cfg) => power_norm(t, sigma, mu, cfg),
    }
}

/// Dual-measure weighted norm: `σ = w`, `μ = w^{-1}`, the norm of
/// `f ↦ T(fw)` from `L²(w)` to `L²(w^{-1})`. Equal to `‖T‖` on `L²(w^{-1})`
/// and to `‖T*‖` on `L²(w)`; both carry the characteristic of `w`.
pub fn weighted_norm<T: ShiftOperator + ?Sized>(t: &T, w: &Weight, method: NormMethod) -> Result<NormEstimate> {
    let dual = w.dual();
    operator_norm(t, Measure::Weighted(w), Measure::Weighted(&dual), method)
}

fn power_norm<T: ShiftOperator + ?Sized>(
    t: &T,
    sigma: Measure<'_>,
    mu: Measure<'_>,
    cfg: PowerIteration,
) -> Result<NormEstimate> {
    let s = sandwich(t, sigma, mu)?;
    let n = t.grid().cell_count();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nu = norm2(&u);
    u.iter_mut().for_each(|x| *x /= nu);
    let mut prev = f64::NAN;
    for it in 1..=cfg.max_iter {
        let v = s.forward(&u);
        let est = norm2(&v);
        if est == 0.0 {
            return Ok(NormEstimate {
                value: 0.0,
                iterations: it,
            });
        }
        if (est - prev).abs() <= cfg.rel_tol * est {
            return Ok(NormEstimate {
                value: est,
                iterations: it,
            });
        }
        prev = est;
        let mut w = s.backward(&v);
        let nw = norm2(&w);
        if nw == 0.0 {
            return Ok(NormEstimate {
                value: est,
                iterations: it,
            });
        }
        w.iter_mut().for_each(|x| *x /= nw);
        u = w;
    }
    let last = norm2(&s.forward(&u));
    Err(Error::NotConverged {
        iterations: cfg.max_iter,
        previous: prev,
        last,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DyadicGrid;
    use crate::shifts::{martingale_transform, petermichl_shift, random_simple_shift, ScaleFamily, SimpleHaarShift};
    use crate::weights::{power_weight, random_a2_weight};

    #[test]
    fn martingale_transform_is_an_isometry_on_mean_zero() {
        let grid = DyadicGrid::new(1, 6).unwrap();
        let t = martingale_transform(grid, |q| if q.level % 2 == 0 { 1.0 } else { -1.0 }).unwrap();
        let d = operator_norm(&t, Measure::Lebesgue, Measure::Lebesgue, NormMethod::Dense).unwrap();
        assert!((d.value - 1.0).abs() < 1e-12);
        let p = operator_norm(&t, Measure::Lebesgue, Measure::Lebesgue, NormMethod::default()).unwrap();
        assert!((p.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn petermichl_unweighted_norm_is_one() {
        let grid = DyadicGrid::new(1, 7).unwrap();
        let t = petermichl_shift(grid, ScaleFamily::All).unwrap();
        let d = operator_norm(&t, Measure::Lebesgue, Measure::Lebesgue, NormMethod::Dense).unwrap();
        assert!(d.value <= 1.0 + 1e-12 && d.value > 0.99);
    }

    #[test]
    fn zero_shift_has_zero_norm() {
        let grid = DyadicGrid::new(1, 4).unwrap();
        let t = SimpleHaarShift::zero(grid, 1).unwrap();
        let p = operator_norm(&t, Measure::Lebesgue, Measure::Lebesgue, NormMethod::default()).unwrap();
        assert_eq!(p.value, 0.0);
    }

    #[test]
    fn power_iteration_agrees_with_dense() {
        let grid = DyadicGrid::new(1, 7).unwrap();
        let w = random_a2_weight(3, 4, grid).unwrap();
        let t = random_simple_shift(grid, 2, 6, ScaleFamily::All).unwrap();
        let dual = w.dual();
        let d = operator_norm(&t, Measure::Weighted(&w), Measure::Weighted(&dual), NormMethod::Dense).unwrap();
        let cfg = PowerIteration {
            rel_tol: 1e-12,
            ..Default::default()
        };
        let p = operator_norm(
            &t,
            Measure::Weighted(&w),
            Measure::Weighted(&dual),
            NormMethod::Power(cfg),
        )
        .unwrap();
        assert!(p.value <= d.value * (1.0 + 1e-12));
        assert!(
            (p.value - d.value).abs() <= 1e-6 * d.value,
            "{} vs {}",
            p.value,
            d.value
        );
    }

    #[test]
    fn weighted_norm_grows_with_characteristic() {
        let grid = DyadicGrid::new(1, 8).unwrap();
        let t = petermichl_shift(grid, ScaleFamily::All).unwrap();
        let norm = |a: f64| {
            let w = power_weight(a, grid).unwrap();
            let dual = w.dual();
            operator_norm(&t, Measure::Weighted(&w), Measure::Weighted(&dual), NormMethod::Dense)
                .unwrap()
                .value
        };
        assert!(norm(0.8) > norm(0.3));
    }

    #[test]
    fn weighted_norm_is_the_adjoint_norm_for_the_dual_weight() {
        let grid = DyadicGrid::new(1, 7).unwrap();
        let t = petermichl_shift(grid, ScaleFamily::All).unwrap();
        let w = power_weight(0.6, grid).unwrap();
        let a = weighted_norm(&t, &w, NormMethod::Dense).unwrap().value;
        let b = weighted_norm(&t.adjoint(), &w.dual(), NormMethod::Dense).unwrap().value;
        assert!((a - b).abs() <= 1e-10 * a, "{a} vs {b}");
    }

    #[test]
    fn dense_rejects_large_grids() {
        let grid = DyadicGrid::new(1, 13).unwrap();
        let t = SimpleHaarShift::zero(grid, 1).unwrap();
        assert!(dense_matrix(&t, Measure::Lebesgue, Measure::Lebesgue).is_err());
    }

    #[test]
    fn nonconvergence_is_reported() {
        let grid = DyadicGrid::new(1, 8).unwrap();
        let w = random_a2_weight(4, 1, grid).unwrap();
        let t = random_simple_shift(grid, 3, 2, ScaleFamily::All).unwrap();
        let cfg = PowerIteration {
            rel_tol: 0.0,
            max_iter: 3,
            seed: 1,
        };
        let dual = w.dual();
        let r = operator_norm(
            &t,
            Measure::Weighted(&w),
            Measure::Weighted(&dual),
            NormMethod::Power(cfg),
        );
        assert!(matches!(r, Err(Error::NotConverged { iterations: 3, .. })));
    }
}
