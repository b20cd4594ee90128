//! Haar shifts given by arbitrary coefficient blocks
//! `T f = Σ_Q Σ_{Q',Q''} a_{Q',Q''} ⟨f, h_{Q'}⟩ h_{Q''}` where `Q', Q''`
//! range over subcubes of `Q` at most `τ - 1` levels down and
//! `|a_{Q',Q''}| ≤ (|Q'||Q''|)^{1/2} / |Q|`.

use std::collections::HashMap;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{DyadicCube, DyadicGrid};

use super::{level_ranges, ScaleFamily, ShiftOperator, PROFILE_TOLERANCE};

/// Description of one local Haar function inside a term cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalHaar {
    /// Relative level of its cube below the term cube, `< τ`.
    pub depth: u32,
    /// Row-major offset of its cube among subcubes at that depth.
    pub offset: usize,
    /// Sign-pattern bitmask, `1 .. 2^d - 1`.
    pub mask: usize,
}

/// Local Haar functions of a term cube in (depth, offset, mask) order.
pub fn local_haars(dim: u32, tau: u32) -> Vec<LocalHaar> {
    let masks = (1usize << dim) - 1;
    (0..tau)
        .flat_map(|t| {
            (0..1usize << (t * dim))
                .flat_map(move |offset| (1..=masks).map(move |mask| LocalHaar { depth: t, offset, mask }))
        })
        .collect()
}

/// Values of a local Haar function on the `2^{τd}` subcells of a cube of
/// volume `vol`.
fn sample(dim: u32, tau: u32, h: LocalHaar, vol: f64) -> Vec<f64> {
    let sub = 1usize << (tau * dim);
    let scale = (vol / (1u64 << (h.depth * dim)) as f64).sqrt().recip();
    let shift = tau - h.depth;
    let mut v = vec![0.0; sub];
    for (s, x) in v.iter_mut().enumerate() {
        let (owner, child) = match dim {
            1 => (s >> shift, (s >> (shift - 1)) & 1),
            _ => {
                let side = 1usize << tau;
                let (r, c) = (s / side, s % side);
                let owner = ((r >> shift) << h.depth) | (c >> shift);
                let child = (((r >> (shift - 1)) & 1) << 1) | ((c >> (shift - 1)) & 1);
                (owner, child)
            }
        };
        if owner == h.offset {
            *x = if (h.mask & child).count_ones().is_multiple_of(2) {
                scale
            } else {
                -scale
            };
        }
    }
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenericHaarShift {
    grid: DyadicGrid,
    tau: u32,
    family: ScaleFamily,
    seed: Option<u64>,
    cubes: Vec<DyadicCube>,
    /// Per term, `a[k'][k'']` row-major over [`local_haars`].
    coefficients: Vec<Vec<f64>>,
    /// Per term, subcell kernel `K[s][s']` row-major.
    kernels: Vec<Vec<f64>>,
    index: HashMap<DyadicCube, usize>,
    levels: Vec<Range<usize>>,
}

impl GenericHaarShift {
    pub fn new(
        grid: DyadicGrid,
        tau: u32,
        family: ScaleFamily,
        seed: Option<u64>,
        mut terms: Vec<(DyadicCube, Vec<f64>)>,
    ) -> Result<Self> {
        if tau == 0 || tau > grid.depth() {
            return Err(Error::Config(format!(
                "shift index must lie in 1..=N, got tau={tau} on {grid}"
            )));
        }
        let dim = grid.dim();
        let haars = local_haars(dim, tau);
        let h = haars.len();
        let sub = 1usize << (tau * dim);
        terms.sort_by_key(|(q, _)| *q);
        for w in terms.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Structural(format!("duplicate term at {}", w[0].0)));
            }
        }
        let mut kernels = Vec::with_capacity(terms.len());
        for (q, a) in &terms {
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
            if a.len() != h * h {
                return Err(Error::Structural(format!(
                    "coefficient block on {q} needs {} entries",
                    h * h
                )));
            }
            for (i, hi) in haars.iter().enumerate() {
                for (k, hk) in haars.iter().enumerate() {
                    let bound = ((hi.depth + hk.depth) as f64 * dim as f64 * -0.5).exp2();
                    let v = a[i * h + k];
                    if !(v.abs() <= bound * (1.0 + PROFILE_TOLERANCE)) {
                        return Err(Error::Structural(format!(
                            "coefficient {v} on {q} exceeds the size bound {bound}"
                        )));
                    }
                }
            }
            let vol = grid.volume(*q);
            let hm: Vec<Vec<f64>> = haars.iter().map(|x| sample(dim, tau, *x, vol)).collect();
            // M[k''][s'] = Σ_{k'} a[k'][k''] h_{k'}[s']
            let mut m = vec![0.0; h * sub];
            for kp in 0..h {
                for kpp in 0..h {
                    let c = a[kp * h + kpp];
                    if c != 0.0 {
                        for (dst, hv) in m[kpp * sub..(kpp + 1) * sub].iter_mut().zip(&hm[kp]) {
                            *dst += c * hv;
                        }
                    }
                }
            }
            let mut kernel = vec![0.0; sub * sub];
            for kpp in 0..h {
                for s in 0..sub {
                    let hv = hm[kpp][s];
                    if hv != 0.0 {
                        for (dst, mv) in kernel[s * sub..(s + 1) * sub]
                            .iter_mut()
                            .zip(&m[kpp * sub..(kpp + 1) * sub])
                        {
                            *dst += hv * mv;
                        }
                    }
                }
            }
            kernels.push(kernel);
        }
        let (cubes, coefficients): (Vec<_>, Vec<_>) = terms.into_iter().unzip();
        let index = cubes.iter().enumerate().map(|(i, q)| (*q, i)).collect();
        let levels = level_ranges(&grid, &cubes);
        Ok(GenericHaarShift {
            grid,
            tau,
            family,
            seed,
            cubes,
            coefficients,
            kernels,
            index,
            levels,
        })
    }

    pub fn family(&self) -> ScaleFamily {
        self.family
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn coefficients(&self, term: usize) -> &[f64] {
        &self.coefficients[term]
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    /// Transposes every coefficient block.
    pub fn adjoint(&self) -> Self {
        let h = local_haars(self.grid.dim(), self.tau).len();
        let sub = self.subcell_count();
        let transpose = |m: &Vec<f64>, n: usize| {
            let mut t = vec![0.0; n * n];
            for i in 0..n {
                for k in 0..n {
                    t[k * n + i] = m[i * n + k];
                }
            }
            t
        };
        GenericHaarShift {
            coefficients: self.coefficients.iter().map(|m| transpose(m, h)).collect(),
            kernels: self.kernels.iter().map(|m| transpose(m, sub)).collect(),
            ..self.clone()
        }
    }

    pub fn filtered(&self, mut keep: impl FnMut(&DyadicCube) -> bool) -> Self {
        let terms = self
            .cubes
            .iter()
            .zip(&self.coefficients)
            .filter(|(q, _)| keep(q))
            .map(|(q, a)| (*q, a.clone()))
            .collect();
        Self::new(self.grid, self.tau, self.family, self.seed, terms).expect("a subset of valid terms is valid")
    }

    pub fn scale_piece(&self, level: u32) -> Self {
        self.filtered(|q| q.level == level)
    }
}

impl ShiftOperator for GenericHaarShift {
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
        let sub = input.len();
        let k = &self.kernels[term];
        for (s, o) in output.iter_mut().enumerate() {
            *o += k[s * sub..(s + 1) * sub]
                .iter()
                .zip(input)
                .map(|(a, x)| a * x)
                .sum::<f64>();
        }
    }

    fn apply_term_adjoint(&self, term: usize, input: &[f64], output: &mut [f64]) {
        let sub = input.len();
        let k = &self.kernels[term];
        for (s, x) in input.iter().enumerate() {
            if *x != 0.0 {
                for (o, a) in output.iter_mut().zip(&k[s * sub..(s + 1) * sub]) {
                    *o += a * x;
                }
            }
        }
    }
}

/// Random generic shift with coefficients uniform in the full size bound.
pub fn random_generic_shift(grid: DyadicGrid, tau: u32, seed: u64, family: ScaleFamily) -> Result<GenericHaarShift> {
    if tau == 0 || tau > grid.depth() {
        return Err(Error::Config(format!(
            "random shift needs 1 <= tau <= N, got tau={tau} on {grid}"
        )));
    }
    let dim = grid.dim();
    let haars = local_haars(dim, tau);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms = Vec::new();
    for j in family.levels(&grid, tau) {
        for q in grid.level_cubes(j) {
            let mut a = Vec::with_capacity(haars.len() * haars.len());
            for hi in &haars {
                for hk in &haars {
                    let bound = ((hi.depth + hk.depth) as f64 * dim as f64 * -0.5).exp2();
                    a.push(rng.random_range(-1.0..=1.0) * bound);
                }
            }
            terms.push((q, a));
        }
    }
    GenericHaarShift::new(grid, tau, family, Some(seed), terms)
}

/// `T f = Σ_Q Σ_m ε_{Q,m} ⟨f, h_Q^m⟩ h_Q^m` with one sign per Haar function.
pub fn martingale_transform_per_haar(
    grid: DyadicGrid,
    signs: impl Fn(DyadicCube, usize) -> f64,
) -> Result<GenericHaarShift> {
    let h = (1usize << grid.dim()) - 1;
    let mut terms = Vec::new();
    for q in grid.cubes().filter(|q| q.level < grid.depth()) {
        let mut a = vec![0.0; h * h];
        for m in 0..h {
            let e = signs(q, m + 1);
            if e != 1.0 && e != -1.0 {
                return Err(Error::Config(format!("sign on {q} must be ±1, got {e}")));
            }
            a[m * h + m] = e;
        }
        terms.push((q, a));
    }
    GenericHaarShift::new(grid, 1, ScaleFamily::All, None, terms)
}
